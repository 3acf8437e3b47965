//! Applying a frozen model to novel texts.
//!
//! Recognition detects known features in the text, scores the driver
//! domains, uses the driver winners to pick which attribute domains are
//! worth scoring, and scores those. Within a domain each used feature `f`
//! adds `evidence(f) · rel(f, c)` to every category `c` it points at, where
//! `rel` is `cf / C_f` (asymmetric) or `cf² / (C_f · F_c)` (symmetric).

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;

use crate::config::{EngineConfig, RankingMode, ScopeMode, ScoringMode, TotalScope};
use crate::error::{Error, Result};
use crate::ids::{CategoryId, DomainId, FeatureId};
use crate::model::{FeatureKey, Model};
use crate::text::{detect_bag, FeatureBag, FeatureKind};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CategoryCandidate {
    pub category: CategoryId,
    pub matched_feature_count: usize,
    /// Inferred text-category evidence.
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DomainResult {
    pub domain: DomainId,
    /// Ranked by the active ranking mode; the first one is the winner.
    pub candidates: Vec<CategoryCandidate>,
    /// Features that took part in scoring after order-priority filtering.
    pub used_features: Vec<FeatureId>,
    /// Number of (feature, category) pairs visited.
    pub visited_cells: usize,
}

impl DomainResult {
    pub fn winner(&self) -> Option<&CategoryCandidate> {
        self.candidates.first()
    }

    /// Kind of the used features, `None` when nothing was used.
    pub fn used_kind(&self, model: &Model) -> Option<FeatureKind> {
        let f = self.used_features.first()?;
        model.feature(*f).map(|f| f.key.kind())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecognitionResult {
    /// Scored domains: drivers first, then scoped attributes, each ascending.
    pub domains: Vec<DomainResult>,
    /// The attributed object: domain name → winning label.
    pub object: BTreeMap<String, String>,
    pub detected_features: usize,
    /// Domains not scored because scoping or an explicit filter excluded them.
    pub skipped_domains: Vec<DomainId>,
}

impl RecognitionResult {
    pub fn domain(&self, domain: DomainId) -> Option<&DomainResult> {
        self.domains.iter().find(|d| d.domain == domain)
    }
}

/// Attribute domains to score for the recognized driver values.
///
/// Drivers without a recognized value are left out of the combination. An
/// intersection over no drivers is empty.
pub fn scope_attributes(
    driver_values: &[(DomainId, CategoryId)],
    model: &Model,
    scope_mode: ScopeMode,
) -> BTreeSet<DomainId> {
    let mut sets = driver_values
        .iter()
        .map(|&(_, c)| model.cooccurring_domains(c).collect::<BTreeSet<_>>());
    match scope_mode {
        ScopeMode::Union => sets.flatten().collect(),
        ScopeMode::Intersection => {
            let Some(first) = sets.next() else {
                return BTreeSet::new();
            };
            sets.fold(first, |acc, s| acc.intersection(&s).copied().collect())
        }
        ScopeMode::Off => model.attribute_domains().collect(),
    }
}

/// Reusable per-worker scoring state over a frozen model.
pub struct Recognizer<'m> {
    model: &'m Model,
    config: EngineConfig,
    scores: Vec<f64>,
    counts: Vec<u32>,
    touched: Vec<CategoryId>,
    used: Vec<(FeatureId, f64, bool)>,
}

impl<'m> Recognizer<'m> {
    pub fn new(model: &'m Model, config: &EngineConfig) -> Result<Self> {
        if !model.is_frozen() {
            return Err(Error::ModelNotFrozen);
        }
        config.validate()?;
        let n = model.category_count();
        Ok(Recognizer {
            model,
            config: config.clone(),
            scores: vec![0.0; n],
            counts: vec![0; n],
            touched: Vec::new(),
            used: Vec::new(),
        })
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    pub fn detect(&self, text: &str) -> FeatureBag {
        detect_bag(self.model, text, 1.0, self.config.max_frame_distance)
    }

    pub fn score_domain(&mut self, bag: &FeatureBag, domain: DomainId) -> Result<DomainResult> {
        if domain.index() >= self.model.domain_count() {
            return Err(Error::UnknownDomainId(domain));
        }
        Ok(self.score_domain_unchecked(bag, domain))
    }

    fn score_domain_unchecked(&mut self, bag: &FeatureBag, domain: DomainId) -> DomainResult {
        let model = self.model;
        let cfg = &self.config;

        self.used.clear();
        let mut any_frame = false;
        for &(f, ev) in bag.entries() {
            if model.domain_cells(f, domain).is_some() {
                let is_frame = matches!(model.features[f.index()].key, FeatureKey::Frame(..));
                any_frame |= is_frame;
                self.used.push((f, ev, is_frame));
            }
        }
        // Without frames carrying cells here, only keywords are left anyway.
        if cfg.order_priority && any_frame {
            self.used.retain(|&(_, _, is_frame)| is_frame);
        }

        let mut visited = 0;
        for &(f, ev, _) in &self.used {
            let (cells, domain_total) = model.domain_cells(f, domain).expect("filtered above");
            let base = match cfg.total_scope {
                TotalScope::Domain => domain_total,
                TotalScope::Global => model.feature_totals[f.index()],
            };
            let take = cfg.top_k.take(cells.len());
            visited += take;
            for cell in &cells[..take] {
                let rel = match cfg.scoring_mode {
                    ScoringMode::Asymmetric => cell.cf / base,
                    ScoringMode::Symmetric => {
                        cell.cf * cell.cf / (base * model.category_totals[cell.category.index()])
                    }
                };
                let i = cell.category.index();
                if self.counts[i] == 0 {
                    self.touched.push(cell.category);
                }
                self.counts[i] += 1;
                self.scores[i] += ev * rel;
            }
        }

        let mut candidates = Vec::with_capacity(self.touched.len());
        for c in self.touched.drain(..) {
            let i = c.index();
            let cand = CategoryCandidate {
                category: c,
                matched_feature_count: self.counts[i] as usize,
                score: self.scores[i],
            };
            self.counts[i] = 0;
            self.scores[i] = 0.0;
            if cand.matched_feature_count >= cfg.min_matched_features && cand.score >= cfg.min_score {
                candidates.push(cand);
            }
        }
        match cfg.ranking_mode {
            RankingMode::BooleanFirst => candidates.sort_by(|a, b| {
                b.matched_feature_count
                    .cmp(&a.matched_feature_count)
                    .then(b.score.total_cmp(&a.score))
                    .then(a.category.cmp(&b.category))
            }),
            RankingMode::ScoreOnly => {
                candidates.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.category.cmp(&b.category)))
            }
        }

        DomainResult {
            domain,
            candidates,
            used_features: self.used.iter().map(|&(f, _, _)| f).collect(),
            visited_cells: visited,
        }
    }

    /// Recognizes a text over all domains (subject to scoping) or over an
    /// explicit domain set.
    pub fn recognize(&mut self, text: &str, domains: Option<&[DomainId]>) -> Result<RecognitionResult> {
        let bag = self.detect(text);
        self.recognize_bag(&bag, domains)
    }

    pub fn recognize_bag(&mut self, bag: &FeatureBag, domains: Option<&[DomainId]>) -> Result<RecognitionResult> {
        let model = self.model;
        let all: Vec<DomainId> = (0..model.domain_count()).map(|i| DomainId(i as u32)).collect();
        let mut results = Vec::new();

        let scored: BTreeSet<DomainId> = match domains {
            Some(explicit) => {
                let set: BTreeSet<DomainId> = explicit.iter().copied().collect();
                if let Some(bad) = set.iter().find(|d| d.index() >= model.domain_count()) {
                    return Err(Error::UnknownDomainId(*bad));
                }
                for &d in &set {
                    results.push(self.score_domain_unchecked(bag, d));
                }
                set
            }
            None => {
                let drivers: Vec<DomainId> = model.driver_domains().collect();
                for &d in &drivers {
                    results.push(self.score_domain_unchecked(bag, d));
                }
                let winners: Vec<(DomainId, CategoryId)> = results
                    .iter()
                    .filter_map(|r| r.winner().map(|w| (r.domain, w.category)))
                    .collect();
                let attributes: BTreeSet<DomainId> = if self.config.scope_mode == ScopeMode::Off || winners.is_empty() {
                    model.attribute_domains().collect()
                } else {
                    scope_attributes(&winners, model, self.config.scope_mode)
                };
                for &d in &attributes {
                    results.push(self.score_domain_unchecked(bag, d));
                }
                drivers.into_iter().chain(attributes).collect()
            }
        };

        let object = results
            .iter()
            .filter_map(|r| {
                let w = r.winner()?;
                Some((model.domains[r.domain.index()].name.clone(), model.categories[w.category.index()].label.clone()))
            })
            .collect();
        Ok(RecognitionResult {
            domains: results,
            object,
            detected_features: bag.len(),
            skipped_domains: all.into_iter().filter(|d| !scored.contains(d)).collect(),
        })
    }
}

pub fn score_domain(bag: &FeatureBag, domain: DomainId, model: &Model, config: &EngineConfig) -> Result<Vec<CategoryCandidate>> {
    Ok(Recognizer::new(model, config)?.score_domain(bag, domain)?.candidates)
}

pub fn recognize(text: &str, model: &Model, config: &EngineConfig, domains: Option<&[DomainId]>) -> Result<RecognitionResult> {
    Recognizer::new(model, config)?.recognize(text, domains)
}

/// Recognizes many texts on `worker_count` threads. Output order follows
/// input order and does not depend on the worker count.
pub fn batch_recognize<S>(
    texts: &[S],
    model: &Model,
    config: &EngineConfig,
    domains: Option<&[DomainId]>,
    worker_count: usize,
) -> Result<Vec<RecognitionResult>>
where
    S: AsRef<str> + Sync,
{
    if worker_count == 0 {
        return Err(Error::InvalidConfig("worker count must be at least 1".into()));
    }
    // validates model and config once up front
    let mut single = Recognizer::new(model, config)?;
    if worker_count == 1 || texts.len() < 2 {
        return texts.iter().map(|t| single.recognize(t.as_ref(), domains)).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(worker_count)
        .build()
        .map_err(|e| Error::InvalidConfig(format!("cannot start workers: {e}")))?;
    pool.install(|| {
        texts
            .par_iter()
            .map_init(
                || Recognizer::new(model, config).expect("validated above"),
                |r, t| r.recognize(t.as_ref(), domains),
            )
            .collect()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trainer::{train, CorpusRecord};

    fn cfg() -> EngineConfig {
        EngineConfig::default()
    }

    #[test]
    fn single_cell_normalizes_to_evidence() {
        let m = train(&[CorpusRecord::new("scissors").label("unspsc", "A")], &cfg()).unwrap();
        let d = m.domain_id("unspsc").unwrap();
        let f = m.feature_by_surfaces(&["scissors"]).unwrap();
        let bag = detect_bag(&m, "scissors scissors", 1.0, 2);
        let ev = bag.evidence(f).unwrap();
        let got = score_domain(&bag, d, &m, &cfg()).unwrap();
        assert_eq!(got.len(), 1);
        assert_eq!(got[0].matched_feature_count, 1);
        assert_eq!(got[0].score, ev * 1.0);
    }

    #[test]
    fn empty_bag_scores_nothing() {
        let m = train(&[CorpusRecord::new("scissors").label("unspsc", "A")], &cfg()).unwrap();
        let d = m.domain_id("unspsc").unwrap();
        assert!(score_domain(&FeatureBag::default(), d, &m, &cfg()).unwrap().is_empty());
        assert!(matches!(
            score_domain(&FeatureBag::default(), DomainId(7), &m, &cfg()),
            Err(Error::UnknownDomainId(_))
        ));
    }

    #[test]
    fn unfrozen_model_is_rejected() {
        let m = Model::new(cfg());
        assert!(matches!(recognize("x", &m, &cfg(), None), Err(Error::ModelNotFrozen)));
    }

    #[test]
    fn frames_take_priority_over_keywords() {
        let corpus = [
            CorpusRecord::new("office scissors").label("unspsc", "A"),
            CorpusRecord::new("office").label("unspsc", "B"),
        ];
        let m = train(&corpus, &cfg()).unwrap();
        let d = m.domain_id("unspsc").unwrap();
        let mut r = Recognizer::new(&m, &cfg()).unwrap();
        let res = r.score_domain(&r.detect("office scissors"), d).unwrap();
        assert_eq!(res.used_features, vec![m.feature_by_surfaces(&["office", "scissors"]).unwrap()]);
        assert_eq!(res.used_kind(&m), Some(FeatureKind::Frame));

        let res = r.score_domain(&r.detect("scissors office"), d).unwrap();
        assert_eq!(res.used_kind(&m), Some(FeatureKind::Keyword));
        assert_eq!(res.used_features.len(), 2);

        let off = EngineConfig { order_priority: false, ..cfg() };
        let mut r = Recognizer::new(&m, &off).unwrap();
        let res = r.score_domain(&r.detect("office scissors"), d).unwrap();
        assert_eq!(res.used_features.len(), 3);
    }

    #[test]
    fn thresholds_drop_candidates() {
        let corpus = [
            CorpusRecord::new("red pen").label("unspsc", "A"),
            CorpusRecord::new("red").label("unspsc", "B"),
        ];
        let m = train(&corpus, &cfg()).unwrap();
        let d = m.domain_id("unspsc").unwrap();
        let config = EngineConfig { order_priority: false, min_matched_features: 2, ..cfg() };
        let bag = detect_bag(&m, "red pen", 1.0, 2);
        let got = score_domain(&bag, d, &m, &config).unwrap();
        assert!(got.iter().all(|c| c.matched_feature_count >= 2));
        assert_eq!(got.len(), 1);
        let config = EngineConfig { min_score: 1e9, ..cfg() };
        assert!(score_domain(&bag, d, &m, &config).unwrap().is_empty());
    }

    #[test]
    fn union_and_intersection_scopes() {
        let corpus = [
            CorpusRecord::new("a").label("type", "X1").label("A5", "p"),
            CorpusRecord::new("b").label("type", "X2").label("A6", "q"),
            CorpusRecord::new("c").label("type", "X1").label("A6", "q"),
            CorpusRecord::new("d").label("purpose", "Y1").label("A6", "q"),
            CorpusRecord::new("e").label("purpose", "Y1").label("A7", "r"),
            CorpusRecord::new("f").label("purpose", "Y2").label("A5", "r"),
        ];
        let m = train(&corpus, &cfg()).unwrap();
        let x1 = (m.domain_id("type").unwrap(), m.category_by_name("type", "X1").unwrap());
        let y1 = (m.domain_id("purpose").unwrap(), m.category_by_name("purpose", "Y1").unwrap());
        let ids = |names: &[&str]| names.iter().map(|n| m.domain_id(n).unwrap()).collect::<BTreeSet<_>>();
        assert_eq!(scope_attributes(&[x1, y1], &m, ScopeMode::Union), ids(&["A5", "A6", "A7"]));
        assert_eq!(scope_attributes(&[x1, y1], &m, ScopeMode::Intersection), ids(&["A6"]));
        assert_eq!(scope_attributes(&[x1], &m, ScopeMode::Union), ids(&["A5", "A6"]));
        assert_eq!(scope_attributes(&[x1], &m, ScopeMode::Intersection), ids(&["A5", "A6"]));
        assert!(scope_attributes(&[], &m, ScopeMode::Union).is_empty());
        assert!(scope_attributes(&[], &m, ScopeMode::Intersection).is_empty());
    }

    #[test]
    fn recognize_scopes_attributes_by_driver() {
        let corpus = [
            CorpusRecord::new("steel scissors").label("type", "scissors").label("material", "steel"),
            CorpusRecord::new("red pen").label("type", "pen").label("color", "red"),
        ];
        let m = train(&corpus, &cfg()).unwrap();
        let res = recognize("red pen", &m, &cfg(), None).unwrap();
        assert_eq!(res.object.get("type").map(String::as_str), Some("pen"));
        assert_eq!(res.object.get("color").map(String::as_str), Some("red"));
        assert_eq!(res.skipped_domains, vec![m.domain_id("material").unwrap()]);

        let off = EngineConfig { scope_mode: ScopeMode::Off, ..cfg() };
        let all = recognize("red pen", &m, &off, None).unwrap();
        assert!(all.skipped_domains.is_empty());
        for d in &res.domains {
            assert_eq!(Some(d), all.domain(d.domain));
        }
    }

    #[test]
    fn unknown_text_gives_empty_object() {
        let corpus = [CorpusRecord::new("red pen").label("type", "pen").label("color", "red")];
        let m = train(&corpus, &cfg()).unwrap();
        let res = recognize("blue widget", &m, &cfg(), None).unwrap();
        assert!(res.object.is_empty());
        assert_eq!(res.detected_features, 0);
        // no driver winner: falls back to every attribute domain
        assert!(res.skipped_domains.is_empty());
    }

    #[test]
    fn batch_matches_sequential() {
        let corpus = [
            CorpusRecord::new("steel scissors").label("type", "scissors"),
            CorpusRecord::new("red pen").label("type", "pen"),
        ];
        let m = train(&corpus, &cfg()).unwrap();
        let texts = ["red pen", "steel", "nothing", "pen scissors"];
        let one = batch_recognize(&texts, &m, &cfg(), None, 1).unwrap();
        let three = batch_recognize(&texts, &m, &cfg(), None, 3).unwrap();
        assert_eq!(one, three);
        assert!(batch_recognize::<&str>(&[], &m, &cfg(), None, 4).unwrap().is_empty());
        assert!(batch_recognize(&texts, &m, &cfg(), None, 0).is_err());
    }
}
