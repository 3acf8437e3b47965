//! Learning category-feature evidence from a labeled corpus.
//!
//! Training runs in two passes. The first extracts every record's feature
//! bag, growing the vocabularies and collecting the global sums `T_f`
//! (texts per feature) and `T_c` (texts per category). The second walks
//! every (text, feature, labeled category) triple and adds
//! `weight · TFTF_tf · TCTC_tc` to the category-feature cell, where
//!
//! ```text
//! TFTF_tf = TF_tf² / (T_f · F_t)      TCTC_tc = TC_tc² / (T_c · C_t)
//! ```
//!
//! Records are processed in a canonical order (sorted by text, weight and
//! labels) so the resulting model does not depend on the input order.

use std::collections::BTreeMap;

use crate::config::{CfFormula, EngineConfig, TopK};
use crate::error::{Error, Result};
use crate::ids::{CategoryId, DomainId, FeatureId};
use crate::model::{FeatureKey, Model};
use crate::text::{instantiate_bag, FeatureBag, FeatureKind};

/// One labeled example: raw text, quality weight in `(0, 1]`, and at most
/// one category label per domain.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusRecord {
    pub text: String,
    pub weight: f64,
    pub labels: BTreeMap<String, String>,
}

impl CorpusRecord {
    pub fn new(text: impl Into<String>) -> Self {
        CorpusRecord { text: text.into(), weight: 1.0, labels: BTreeMap::new() }
    }

    pub fn with_weight(mut self, weight: f64) -> Self {
        self.weight = weight;
        self
    }

    pub fn label(mut self, domain: impl Into<String>, label: impl Into<String>) -> Self {
        self.labels.insert(domain.into(), label.into());
        self
    }

    fn validate(&self, index: usize) -> Result<()> {
        if !(self.weight > 0.0 && self.weight <= 1.0) {
            return Err(Error::InvalidRecord { index, reason: format!("weight {} outside (0, 1]", self.weight) });
        }
        for (d, l) in &self.labels {
            if d.is_empty() || l.is_empty() {
                return Err(Error::InvalidRecord { index, reason: "empty domain or label".into() });
            }
        }
        Ok(())
    }
}

/// A feature named by surfaces rather than ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FeatureSpec {
    Keyword(String),
    Frame(String, String),
}

impl FeatureSpec {
    pub fn kind(&self) -> FeatureKind {
        match self {
            FeatureSpec::Keyword(_) => FeatureKind::Keyword,
            FeatureSpec::Frame(..) => FeatureKind::Frame,
        }
    }
}

/// A manually confirmed category-feature relation; its cell is forced to 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Confirmation {
    pub domain: String,
    pub label: String,
    pub feature: FeatureSpec,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureRelevance {
    pub feature: FeatureId,
    /// `TF_tf`
    pub tf: f64,
    /// `T_f`
    pub texts: f64,
    /// `TFTF_tf`
    pub tftf: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CategoryRelevance {
    pub category: CategoryId,
    /// `TC_tc`
    pub tc: f64,
    /// `T_c`
    pub texts: f64,
    /// `C_t` for the category's domain.
    pub categories: f64,
    /// `TCTC_tc`
    pub tctc: f64,
}

/// Per-record mutual relevances computed during training.
#[derive(Debug, Clone, PartialEq)]
pub struct TextRelevances {
    /// Position of the record in the input corpus.
    pub record: usize,
    pub weight: f64,
    /// `F_t`
    pub feature_base: f64,
    pub features: Vec<FeatureRelevance>,
    pub categories: Vec<CategoryRelevance>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainStats {
    pub records: usize,
    /// Records whose text produced no tokens.
    pub skipped_empty: Vec<usize>,
    /// `T`: texts that contributed.
    pub texts: usize,
    /// `F`
    pub features: usize,
    /// `C`
    pub categories: usize,
    pub tokens: usize,
    pub cells: usize,
}

pub struct Training {
    pub model: Model,
    pub relevances: Vec<TextRelevances>,
    pub stats: TrainStats,
}

#[derive(Debug, Clone, Default)]
pub struct Trainer {
    config: EngineConfig,
    confirmations: Vec<Confirmation>,
}

struct Pass1Text {
    record: usize,
    weight: f64,
    bag: FeatureBag,
    labels: Vec<(DomainId, CategoryId)>,
}

impl Trainer {
    pub fn new(config: EngineConfig) -> Result<Self> {
        config.validate()?;
        Ok(Trainer { config, confirmations: Vec::new() })
    }

    pub fn with_confirmations(mut self, confirmations: Vec<Confirmation>) -> Self {
        self.confirmations = confirmations;
        self
    }

    pub fn train(&self, corpus: &[CorpusRecord]) -> Result<Model> {
        self.train_detailed(corpus).map(|t| t.model)
    }

    pub fn train_detailed(&self, corpus: &[CorpusRecord]) -> Result<Training> {
        if corpus.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        for (i, r) in corpus.iter().enumerate() {
            r.validate(i)?;
        }
        let mut order: Vec<usize> = (0..corpus.len()).collect();
        order.sort_by(|&a, &b| {
            let (ra, rb) = (&corpus[a], &corpus[b]);
            ra.text
                .cmp(&rb.text)
                .then(ra.weight.total_cmp(&rb.weight))
                .then_with(|| ra.labels.cmp(&rb.labels))
        });

        let mut model = Model::new(self.config.clone());
        let mut stats = TrainStats { records: corpus.len(), ..Default::default() };

        // pass 1
        let mut texts = Vec::with_capacity(corpus.len());
        let mut text_count: Vec<f64> = Vec::new(); // T_f
        let mut category_texts: Vec<f64> = Vec::new(); // T_c
        for &i in &order {
            let record = &corpus[i];
            let bag = instantiate_bag(&mut model, &record.text, record.weight, self.config.max_frame_distance)?;
            if bag.is_empty() {
                stats.skipped_empty.push(i);
                continue;
            }
            model.record_text(&record.text)?;
            text_count.resize(model.feature_count(), 0.0);
            for &(f, tf) in bag.entries() {
                text_count[f.index()] += tf;
            }
            let mut labels = Vec::with_capacity(record.labels.len());
            for (domain, label) in &record.labels {
                let d = model.intern_domain(domain, self.config.is_driver(domain))?;
                let c = model.intern_category(d, label)?;
                labels.push((d, c));
            }
            category_texts.resize(model.category_count(), 0.0);
            for &(_, c) in &labels {
                category_texts[c.index()] += 1.0;
            }
            accumulate_cooccurrence(&labels, &mut model)?;
            texts.push(Pass1Text { record: i, weight: record.weight, bag, labels });
        }

        // pass 2
        let mut relevances = Vec::with_capacity(texts.len());
        for text in &texts {
            let feature_base = text.bag.total();
            let mut per_domain: BTreeMap<DomainId, f64> = BTreeMap::new();
            for &(d, _) in &text.labels {
                *per_domain.entry(d).or_insert(0.0) += 1.0;
            }
            let categories: Vec<CategoryRelevance> = text
                .labels
                .iter()
                .map(|&(d, c)| {
                    let tc = 1.0;
                    let t_c = category_texts[c.index()];
                    let c_t = per_domain[&d];
                    CategoryRelevance { category: c, tc, texts: t_c, categories: c_t, tctc: tc * tc / (t_c * c_t) }
                })
                .collect();
            let features: Vec<FeatureRelevance> = text
                .bag
                .entries()
                .iter()
                .map(|&(f, tf)| {
                    let t_f = text_count[f.index()];
                    FeatureRelevance { feature: f, tf, texts: t_f, tftf: tf * tf / (t_f * feature_base) }
                })
                .collect();
            for fr in &features {
                for cr in &categories {
                    let delta = match self.config.cf_formula {
                        CfFormula::Product => text.weight * fr.tftf * cr.tctc,
                        CfFormula::Count => text.weight,
                    };
                    model.add_cf(cr.category, fr.feature, delta)?;
                }
            }
            relevances.push(TextRelevances {
                record: text.record,
                weight: text.weight,
                feature_base,
                features,
                categories,
            });
        }

        for conf in &self.confirmations {
            apply_confirmation(&mut model, conf, &self.config)?;
        }

        model.freeze();
        if let TopK::Limit(k) = self.config.top_k {
            model.retain_top_k(k);
        }

        stats.texts = texts.len();
        stats.features = model.feature_count();
        stats.categories = model.category_count();
        stats.tokens = model.token_count();
        stats.cells = model.cell_count();
        Ok(Training { model, relevances, stats })
    }
}

fn apply_confirmation(model: &mut Model, conf: &Confirmation, config: &EngineConfig) -> Result<()> {
    let d = model.intern_domain(&conf.domain, config.is_driver(&conf.domain))?;
    let c = model.intern_category(d, &conf.label)?;
    let key = match &conf.feature {
        FeatureSpec::Keyword(t) => FeatureKey::Keyword(model.intern_token(t)?),
        FeatureSpec::Frame(a, b) => {
            let a = model.intern_token(a)?;
            FeatureKey::Frame(a, model.intern_token(b)?)
        }
    };
    let f = model.intern_feature(key)?;
    model.confirm(c, f)?;
    Ok(())
}

/// Trains with default settings and no confirmations.
pub fn train(corpus: &[CorpusRecord], config: &EngineConfig) -> Result<Model> {
    Trainer::new(config.clone())?.train(corpus)
}

/// Counts, for each driver-domain label of a record, every other
/// non-driver domain the record is labeled in.
pub fn accumulate_cooccurrence(labels: &[(DomainId, CategoryId)], model: &mut Model) -> Result<()> {
    for &(driver, category) in labels {
        if !model.domain(driver).is_some_and(|d| d.is_driver) {
            continue;
        }
        for &(domain, _) in labels {
            if domain != driver && !model.domain(domain).is_some_and(|d| d.is_driver) {
                model.add_cooccurrence(category, domain)?;
            }
        }
    }
    Ok(())
}

/// Keeps only the `k` most relevant categories per feature per domain.
pub fn compress(mut model: Model, k: TopK) -> Result<Model> {
    if !model.is_frozen() {
        return Err(Error::ModelNotFrozen);
    }
    if let TopK::Limit(k) = k {
        if k == 0 {
            return Err(Error::InvalidConfig("top-k must be at least 1".into()));
        }
        model.retain_top_k(k);
        model.config.top_k = model.config.top_k.min(TopK::Limit(k));
    }
    Ok(model)
}

/// Drops every domain but `domain`, along with the rules that only served them.
pub fn specialize(model: &Model, domain: &str) -> Result<Model> {
    if !model.is_frozen() {
        return Err(Error::ModelNotFrozen);
    }
    let d = model.domain_id(domain).ok_or_else(|| Error::UnknownDomain(domain.to_owned()))?;
    Ok(model.restricted_to(d))
}
