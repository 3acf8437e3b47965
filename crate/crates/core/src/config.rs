//! Engine tuning knobs shared by training, recognition and evaluation.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Maximum number of categories kept per feature per domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TopK {
    #[default]
    Unbounded,
    Limit(usize),
}

impl TopK {
    pub fn limit(k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidConfig("top-k must be at least 1".into()));
        }
        Ok(TopK::Limit(k))
    }

    /// Number of cells to visit out of `len`.
    #[inline]
    pub fn take(self, len: usize) -> usize {
        match self {
            TopK::Unbounded => len,
            TopK::Limit(k) => k.min(len),
        }
    }

    pub fn min(self, other: TopK) -> TopK {
        match (self, other) {
            (TopK::Unbounded, o) => o,
            (s, TopK::Unbounded) => s,
            (TopK::Limit(a), TopK::Limit(b)) => TopK::Limit(a.min(b)),
        }
    }
}

impl fmt::Display for TopK {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TopK::Unbounded => f.write_str("unbounded"),
            TopK::Limit(k) => write!(f, "{k}"),
        }
    }
}

impl FromStr for TopK {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "unbounded" | "inf" | "infinity" | "all" => Ok(TopK::Unbounded),
            other => {
                let k: usize = other
                    .parse()
                    .map_err(|_| Error::InvalidConfig(format!("invalid top-k `{s}`")))?;
                TopK::limit(k)
            }
        }
    }
}

macro_rules! keyword_enum {
    ($(#[$meta:meta])* $name:ident { $($(#[$vmeta:meta])* $variant:ident => $text:literal),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq)]
        pub enum $name {
            $($(#[$vmeta])* $variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(self) -> &'static str {
                match self {
                    $($name::$variant => $text),+
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $name {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                let norm = s.trim().to_ascii_lowercase().replace('-', "_");
                $(if norm == $text {
                    return Ok($name::$variant);
                })+
                Err(Error::InvalidConfig(format!(
                    concat!("invalid ", stringify!($name), " `{}`"),
                    s
                )))
            }
        }
    };
}

keyword_enum!(
    /// Relevance statistic used to score a category through a feature.
    ScoringMode {
        /// `cf / C_f`: share of the feature's evidence pointing at the category.
        Asymmetric => "asymmetric",
        /// `cf² / (C_f · F_c)`: mutual relevance of feature and category.
        Symmetric => "symmetric",
    }
);

keyword_enum!(
    RankingMode {
        /// Matched feature count first, score breaks ties.
        BooleanFirst => "boolean_first",
        ScoreOnly => "score_only",
    }
);

keyword_enum!(
    /// How driver-domain winners narrow the attribute domains to score.
    ScopeMode {
        Union => "union",
        Intersection => "intersection",
        Off => "off",
    }
);

keyword_enum!(
    /// Per-triple contribution added to a category-feature cell in training.
    CfFormula {
        /// `weight · TFTF · TCTC`
        Product => "product",
        /// `weight` (plain co-occurrence count)
        Count => "count",
    }
);

keyword_enum!(
    /// Which categories the feature evidence base `C_f` sums over.
    TotalScope {
        Domain => "domain",
        Global => "global",
    }
);

/// All tuning knobs. A copy is stored in every trained model and every
/// evaluation report.
#[derive(Debug, Clone, PartialEq)]
pub struct EngineConfig {
    pub max_frame_distance: usize,
    pub top_k: TopK,
    pub scoring_mode: ScoringMode,
    pub ranking_mode: RankingMode,
    pub order_priority: bool,
    pub scope_mode: ScopeMode,
    pub min_matched_features: usize,
    pub min_score: f64,
    /// Domains whose recognized values select attribute domains.
    pub driver_domains: Vec<String>,
    pub cf_formula: CfFormula,
    pub total_scope: TotalScope,
}

pub const DEFAULT_DRIVER_DOMAINS: [&str; 3] = ["unspsc", "type", "purpose"];

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            max_frame_distance: 2,
            top_k: TopK::Unbounded,
            scoring_mode: ScoringMode::Asymmetric,
            ranking_mode: RankingMode::BooleanFirst,
            order_priority: true,
            scope_mode: ScopeMode::Union,
            min_matched_features: 1,
            min_score: 0.0,
            driver_domains: DEFAULT_DRIVER_DOMAINS.iter().map(|s| s.to_string()).collect(),
            cf_formula: CfFormula::Product,
            total_scope: TotalScope::Domain,
        }
    }
}

impl EngineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_frame_distance == 0 {
            return Err(Error::InvalidConfig("max-frame-distance must be at least 1".into()));
        }
        if self.max_frame_distance > u32::MAX as usize {
            return Err(Error::InvalidConfig("max-frame-distance too large".into()));
        }
        if let TopK::Limit(0) = self.top_k {
            return Err(Error::InvalidConfig("top-k must be at least 1".into()));
        }
        if !(self.min_score.is_finite() && self.min_score >= 0.0) {
            return Err(Error::InvalidConfig("min-score must be a finite value >= 0".into()));
        }
        if self.driver_domains.iter().any(|d| d.is_empty()) {
            return Err(Error::InvalidConfig("driver domain names must be non-empty".into()));
        }
        Ok(())
    }

    pub fn is_driver(&self, domain: &str) -> bool {
        self.driver_domains.iter().any(|d| d == domain)
    }

    /// Single-line `key=value` rendering, used in reports and bench output.
    pub fn summary(&self) -> String {
        format!(
            "max_frame_distance={} top_k={} scoring_mode={} ranking_mode={} order_priority={} \
             scope_mode={} min_matched_features={} min_score={} driver_domains={} cf_formula={} total_scope={}",
            self.max_frame_distance,
            self.top_k,
            self.scoring_mode,
            self.ranking_mode,
            self.order_priority,
            self.scope_mode,
            self.min_matched_features,
            self.min_score,
            self.driver_domains.join(","),
            self.cf_formula,
            self.total_scope,
        )
    }
}
