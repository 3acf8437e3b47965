//! The knowledge store: vocabularies, category-feature evidence and
//! category-domain co-occurrence.
//!
//! A model is built mutably by the trainer and then frozen. Freezing sorts
//! each feature's cells by `(domain, cf desc, category asc)` and records one
//! [`DomainSpan`] per domain, so recognition reads a feature's ranked
//! categories in a domain as a contiguous slice. Totals are recomputed from
//! the cells in that canonical order, which makes them reproducible bit for
//! bit.

use std::hash::Hasher;

use fnv::{FnvHashMap, FnvHasher};

use crate::config::{EngineConfig, TotalScope};
use crate::error::{Error, Result};
use crate::ids::{CategoryId, DomainId, FeatureId, TokenId};
use crate::text::FeatureKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FeatureKey {
    Keyword(TokenId),
    /// Ordered pair; `Frame(a, b) != Frame(b, a)`.
    Frame(TokenId, TokenId),
}

impl FeatureKey {
    pub fn kind(self) -> FeatureKind {
        match self {
            FeatureKey::Keyword(_) => FeatureKind::Keyword,
            FeatureKey::Frame(..) => FeatureKind::Frame,
        }
    }

    pub fn tokens(self) -> Vec<TokenId> {
        match self {
            FeatureKey::Keyword(t) => vec![t],
            FeatureKey::Frame(a, b) => vec![a, b],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Feature {
    pub key: FeatureKey,
    pub quality: f64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Domain {
    pub name: String,
    pub is_driver: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Category {
    pub domain: DomainId,
    pub label: String,
    pub quality: f64,
}

/// One stored category-feature relation (`CF_cf`). Zero cells are never stored.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CfCell {
    pub category: CategoryId,
    pub cf: f64,
    /// Manually confirmed cells hold `cf == 1`.
    pub confirmed: bool,
}

/// A feature's cells for one domain and their sum `C_f(f, d)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct DomainSpan {
    pub domain: DomainId,
    pub total: f64,
    /// Cell range, valid only once the model is frozen.
    pub start: u32,
    pub end: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TotalFinding {
    FeatureDomain { feature: FeatureId, domain: DomainId, stored: f64, recomputed: f64 },
    Feature { feature: FeatureId, stored: f64, recomputed: f64 },
    Category { category: CategoryId, stored: f64, recomputed: f64 },
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TotalsReport {
    pub findings: Vec<TotalFinding>,
}

impl TotalsReport {
    pub fn is_consistent(&self) -> bool {
        self.findings.is_empty()
    }
}

struct Totals {
    feature_domain: Vec<Vec<(DomainId, f64)>>,
    feature: Vec<f64>,
    category: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Model {
    pub(crate) config: EngineConfig,
    pub(crate) frozen: bool,
    /// Set on models cut down to one domain; their per-feature global totals
    /// still describe the full model.
    pub(crate) specialized: bool,

    pub(crate) tokens: Vec<String>,
    token_index: FnvHashMap<String, TokenId>,

    pub(crate) features: Vec<Feature>,
    feature_index: FnvHashMap<FeatureKey, FeatureId>,
    keyword_of_token: Vec<Option<FeatureId>>,

    pub(crate) domains: Vec<Domain>,
    domain_index: FnvHashMap<String, DomainId>,

    pub(crate) categories: Vec<Category>,
    category_index: Vec<FnvHashMap<String, CategoryId>>,

    pub(crate) feature_cells: Vec<Vec<CfCell>>,
    pub(crate) feature_spans: Vec<Vec<DomainSpan>>,
    /// `C_f` summed over every domain.
    pub(crate) feature_totals: Vec<f64>,
    /// `F_c`.
    pub(crate) category_totals: Vec<f64>,
    /// Training-time lookup from (feature, category) to cell position.
    locator: FnvHashMap<(FeatureId, CategoryId), u32>,
    /// Features carrying a cell for each category, ascending. Frozen only.
    by_category: Vec<Vec<FeatureId>>,

    /// Driver category → (attribute domain, co-occurrence count), by domain.
    pub(crate) category_domains: Vec<Vec<(DomainId, u64)>>,

    /// Sorted fingerprints of the training texts.
    pub(crate) text_fingerprints: Vec<u64>,
}

pub fn text_fingerprint(text: &str) -> u64 {
    let mut h = FnvHasher::default();
    h.write(text.as_bytes());
    h.finish()
}

impl Model {
    pub fn new(config: EngineConfig) -> Self {
        Model {
            config,
            frozen: false,
            specialized: false,
            tokens: Vec::new(),
            token_index: FnvHashMap::default(),
            features: Vec::new(),
            feature_index: FnvHashMap::default(),
            keyword_of_token: Vec::new(),
            domains: Vec::new(),
            domain_index: FnvHashMap::default(),
            categories: Vec::new(),
            category_index: Vec::new(),
            feature_cells: Vec::new(),
            feature_spans: Vec::new(),
            feature_totals: Vec::new(),
            category_totals: Vec::new(),
            locator: FnvHashMap::default(),
            by_category: Vec::new(),
            category_domains: Vec::new(),
            text_fingerprints: Vec::new(),
        }
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen
    }

    pub fn is_specialized(&self) -> bool {
        self.specialized
    }

    fn ensure_mutable(&self) -> Result<()> {
        if self.frozen {
            Err(Error::ModelFrozen)
        } else {
            Ok(())
        }
    }

    // ---- interning -------------------------------------------------------

    pub fn intern_token(&mut self, surface: &str) -> Result<TokenId> {
        self.ensure_mutable()?;
        if let Some(&id) = self.token_index.get(surface) {
            return Ok(id);
        }
        let id = TokenId::from_index(self.tokens.len());
        self.tokens.push(surface.to_owned());
        self.token_index.insert(surface.to_owned(), id);
        self.keyword_of_token.push(None);
        Ok(id)
    }

    pub fn intern_feature(&mut self, key: FeatureKey) -> Result<FeatureId> {
        self.ensure_mutable()?;
        if let Some(&id) = self.feature_index.get(&key) {
            return Ok(id);
        }
        for t in key.tokens() {
            if t.index() >= self.tokens.len() {
                return Err(Error::UnknownToken(t));
            }
        }
        let id = FeatureId::from_index(self.features.len());
        self.features.push(Feature { key, quality: 1.0 });
        self.feature_index.insert(key, id);
        if let FeatureKey::Keyword(t) = key {
            self.keyword_of_token[t.index()] = Some(id);
        }
        self.feature_cells.push(Vec::new());
        self.feature_spans.push(Vec::new());
        self.feature_totals.push(0.0);
        Ok(id)
    }

    /// Returns the existing id when `name` is already known; the driver flag
    /// of an existing domain is left unchanged.
    pub fn intern_domain(&mut self, name: &str, is_driver: bool) -> Result<DomainId> {
        self.ensure_mutable()?;
        if let Some(&id) = self.domain_index.get(name) {
            return Ok(id);
        }
        let id = DomainId::from_index(self.domains.len());
        self.domains.push(Domain { name: name.to_owned(), is_driver });
        self.domain_index.insert(name.to_owned(), id);
        self.category_index.push(FnvHashMap::default());
        Ok(id)
    }

    pub fn intern_category(&mut self, domain: DomainId, label: &str) -> Result<CategoryId> {
        self.ensure_mutable()?;
        let index = self.category_index.get_mut(domain.index()).ok_or(Error::UnknownDomainId(domain))?;
        if let Some(&id) = index.get(label) {
            return Ok(id);
        }
        let id = CategoryId::from_index(self.categories.len());
        index.insert(label.to_owned(), id);
        self.categories.push(Category { domain, label: label.to_owned(), quality: 1.0 });
        self.category_totals.push(0.0);
        self.category_domains.push(Vec::new());
        Ok(id)
    }

    pub fn record_text(&mut self, text: &str) -> Result<()> {
        self.ensure_mutable()?;
        self.text_fingerprints.push(text_fingerprint(text));
        Ok(())
    }

    // ---- evidence --------------------------------------------------------

    fn check_pair(&self, category: CategoryId, feature: FeatureId) -> Result<DomainId> {
        if feature.index() >= self.features.len() {
            return Err(Error::UnknownFeature(feature));
        }
        self.categories
            .get(category.index())
            .map(|c| c.domain)
            .ok_or(Error::UnknownCategory(category))
    }

    fn adjust_totals(&mut self, feature: FeatureId, domain: DomainId, category: CategoryId, delta: f64) {
        let spans = &mut self.feature_spans[feature.index()];
        match spans.binary_search_by_key(&domain, |s| s.domain) {
            Ok(i) => spans[i].total += delta,
            Err(i) => spans.insert(i, DomainSpan { domain, total: delta, start: 0, end: 0 }),
        }
        self.feature_totals[feature.index()] += delta;
        self.category_totals[category.index()] += delta;
    }

    /// Adds `delta` to `CF_cf`, creating the cell on first use. Confirmed
    /// cells are left at their confirmed value.
    pub fn add_cf(&mut self, category: CategoryId, feature: FeatureId, delta: f64) -> Result<CfCell> {
        self.ensure_mutable()?;
        if !(delta.is_finite() && delta > 0.0) {
            return Err(Error::InvalidDelta(delta));
        }
        let domain = self.check_pair(category, feature)?;
        let cells = &mut self.feature_cells[feature.index()];
        let pos = *self.locator.entry((feature, category)).or_insert_with(|| {
            cells.push(CfCell { category, cf: 0.0, confirmed: false });
            (cells.len() - 1) as u32
        }) as usize;
        let cell = &mut cells[pos];
        if cell.confirmed {
            return Ok(*cell);
        }
        cell.cf += delta;
        let out = *cell;
        self.adjust_totals(feature, domain, category, delta);
        Ok(out)
    }

    /// Marks a relation as manually confirmed, forcing `cf = 1`.
    pub fn confirm(&mut self, category: CategoryId, feature: FeatureId) -> Result<CfCell> {
        self.ensure_mutable()?;
        let domain = self.check_pair(category, feature)?;
        let cells = &mut self.feature_cells[feature.index()];
        let pos = *self.locator.entry((feature, category)).or_insert_with(|| {
            cells.push(CfCell { category, cf: 0.0, confirmed: false });
            (cells.len() - 1) as u32
        }) as usize;
        let cell = &mut cells[pos];
        let delta = 1.0 - cell.cf;
        cell.cf = 1.0;
        cell.confirmed = true;
        let out = *cell;
        if delta != 0.0 {
            self.adjust_totals(feature, domain, category, delta);
        }
        Ok(out)
    }

    pub fn add_cooccurrence(&mut self, category: CategoryId, domain: DomainId) -> Result<()> {
        self.ensure_mutable()?;
        if domain.index() >= self.domains.len() {
            return Err(Error::UnknownDomainId(domain));
        }
        let row = self
            .category_domains
            .get_mut(category.index())
            .ok_or(Error::UnknownCategory(category))?;
        match row.binary_search_by_key(&domain, |&(d, _)| d) {
            Ok(i) => row[i].1 += 1,
            Err(i) => row.insert(i, (domain, 1)),
        }
        Ok(())
    }

    // ---- freezing and layout ---------------------------------------------

    /// Sorts cells into recognition order, recomputes every total and makes
    /// the model read-only. Idempotent.
    pub fn freeze(&mut self) {
        if self.frozen {
            return;
        }
        self.rebuild_layout();
        self.locator = FnvHashMap::default();
        self.text_fingerprints.sort_unstable();
        self.text_fingerprints.dedup();
        self.frozen = true;
    }

    pub(crate) fn rebuild_layout(&mut self) {
        let categories = &self.categories;
        for cells in &mut self.feature_cells {
            cells.sort_by(|a, b| {
                categories[a.category.index()]
                    .domain
                    .cmp(&categories[b.category.index()].domain)
                    .then(b.cf.total_cmp(&a.cf))
                    .then(a.category.cmp(&b.category))
            });
        }
        let totals = self.compute_totals();
        for (f, cells) in self.feature_cells.iter().enumerate() {
            let mut spans = Vec::with_capacity(totals.feature_domain[f].len());
            let mut start = 0usize;
            for &(domain, total) in &totals.feature_domain[f] {
                let mut end = start;
                while end < cells.len() && categories[cells[end].category.index()].domain == domain {
                    end += 1;
                }
                spans.push(DomainSpan { domain, total, start: start as u32, end: end as u32 });
                start = end;
            }
            self.feature_spans[f] = spans;
        }
        self.feature_totals = totals.feature;
        self.category_totals = totals.category;
        self.rebuild_indexes();
    }

    /// Rebuilds the derived lookup tables that are never persisted.
    pub(crate) fn rebuild_indexes(&mut self) {
        self.token_index = self.tokens.iter().enumerate().map(|(i, s)| (s.clone(), TokenId::from_index(i))).collect();
        self.keyword_of_token = vec![None; self.tokens.len()];
        self.feature_index = FnvHashMap::default();
        self.feature_index.reserve(self.features.len());
        for (i, f) in self.features.iter().enumerate() {
            let id = FeatureId::from_index(i);
            self.feature_index.insert(f.key, id);
            if let FeatureKey::Keyword(t) = f.key {
                self.keyword_of_token[t.index()] = Some(id);
            }
        }
        self.domain_index = self.domains.iter().enumerate().map(|(i, d)| (d.name.clone(), DomainId::from_index(i))).collect();
        self.category_index = vec![FnvHashMap::default(); self.domains.len()];
        for (i, c) in self.categories.iter().enumerate() {
            self.category_index[c.domain.index()].insert(c.label.clone(), CategoryId::from_index(i));
        }
        self.by_category = vec![Vec::new(); self.categories.len()];
        for (f, cells) in self.feature_cells.iter().enumerate() {
            for cell in cells {
                self.by_category[cell.category.index()].push(FeatureId::from_index(f));
            }
        }
    }

    /// Sums cells in stored order. Per-domain sums are grouped in order of
    /// first appearance and then sorted by domain id.
    fn compute_totals(&self) -> Totals {
        let mut feature_domain = Vec::with_capacity(self.features.len());
        let mut feature = Vec::with_capacity(self.features.len());
        let mut category = vec![0.0; self.categories.len()];
        for cells in &self.feature_cells {
            let mut per_domain: Vec<(DomainId, f64)> = Vec::new();
            let mut all = 0.0;
            for cell in cells {
                let d = self.categories[cell.category.index()].domain;
                match per_domain.iter_mut().find(|(pd, _)| *pd == d) {
                    Some((_, t)) => *t += cell.cf,
                    None => per_domain.push((d, cell.cf)),
                }
                all += cell.cf;
                category[cell.category.index()] += cell.cf;
            }
            per_domain.sort_by_key(|&(d, _)| d);
            feature_domain.push(per_domain);
            feature.push(all);
        }
        Totals { feature_domain, feature, category }
    }

    /// Recomputes `C_f` and `F_c` from the stored cells and reports every
    /// stored total that disagrees. Frozen models must agree exactly; a
    /// model still in training is compared with a relative tolerance of
    /// 1e-9 since its totals were accumulated incrementally.
    pub fn verify_totals(&self) -> TotalsReport {
        let totals = self.compute_totals();
        let exact = self.frozen;
        let agrees = |stored: f64, recomputed: f64| {
            if exact {
                stored.to_bits() == recomputed.to_bits()
            } else {
                (stored - recomputed).abs() <= 1e-9 * recomputed.abs().max(1.0)
            }
        };
        let mut findings = Vec::new();
        for (f, recomputed) in totals.feature_domain.iter().enumerate() {
            let feature = FeatureId::from_index(f);
            let stored = &self.feature_spans[f];
            for &(domain, r) in recomputed {
                let s = stored.iter().find(|s| s.domain == domain).map_or(0.0, |s| s.total);
                if !agrees(s, r) {
                    findings.push(TotalFinding::FeatureDomain { feature, domain, stored: s, recomputed: r });
                }
            }
            for s in stored {
                if !recomputed.iter().any(|&(d, _)| d == s.domain) && s.total != 0.0 {
                    findings.push(TotalFinding::FeatureDomain {
                        feature,
                        domain: s.domain,
                        stored: s.total,
                        recomputed: 0.0,
                    });
                }
            }
            if !self.specialized && !agrees(self.feature_totals[f], totals.feature[f]) {
                findings.push(TotalFinding::Feature {
                    feature,
                    stored: self.feature_totals[f],
                    recomputed: totals.feature[f],
                });
            }
        }
        for (c, &r) in totals.category.iter().enumerate() {
            let s = self.category_totals[c];
            if !agrees(s, r) {
                findings.push(TotalFinding::Category { category: CategoryId::from_index(c), stored: s, recomputed: r });
            }
        }
        TotalsReport { findings }
    }

    // ---- lookups ---------------------------------------------------------

    pub fn token_count(&self) -> usize {
        self.tokens.len()
    }

    pub fn feature_count(&self) -> usize {
        self.features.len()
    }

    pub fn domain_count(&self) -> usize {
        self.domains.len()
    }

    pub fn category_count(&self) -> usize {
        self.categories.len()
    }

    pub fn cell_count(&self) -> usize {
        self.feature_cells.iter().map(Vec::len).sum()
    }

    pub fn token(&self, id: TokenId) -> Option<&str> {
        self.tokens.get(id.index()).map(String::as_str)
    }

    pub fn token_id(&self, surface: &str) -> Option<TokenId> {
        self.token_index.get(surface).copied()
    }

    pub fn feature(&self, id: FeatureId) -> Option<&Feature> {
        self.features.get(id.index())
    }

    pub fn feature_id(&self, key: FeatureKey) -> Option<FeatureId> {
        self.feature_index.get(&key).copied()
    }

    #[inline]
    pub fn keyword_feature(&self, token: TokenId) -> Option<FeatureId> {
        self.keyword_of_token.get(token.index()).copied().flatten()
    }

    #[inline]
    pub fn frame_feature(&self, first: TokenId, second: TokenId) -> Option<FeatureId> {
        self.feature_index.get(&FeatureKey::Frame(first, second)).copied()
    }

    /// Looks a feature up by its token surfaces: one token for a keyword,
    /// two for a frame.
    pub fn feature_by_surfaces(&self, surfaces: &[&str]) -> Option<FeatureId> {
        match surfaces {
            [t] => self.keyword_feature(self.token_id(t)?),
            [a, b] => self.frame_feature(self.token_id(a)?, self.token_id(b)?),
            _ => None,
        }
    }

    /// Human-readable feature name, `a` for keywords and `a-b` for frames.
    pub fn feature_name(&self, id: FeatureId) -> Option<String> {
        let f = self.feature(id)?;
        Some(match f.key {
            FeatureKey::Keyword(t) => self.tokens[t.index()].clone(),
            FeatureKey::Frame(a, b) => format!("{}-{}", self.tokens[a.index()], self.tokens[b.index()]),
        })
    }

    pub fn domains(&self) -> &[Domain] {
        &self.domains
    }

    pub fn domain(&self, id: DomainId) -> Option<&Domain> {
        self.domains.get(id.index())
    }

    pub fn domain_id(&self, name: &str) -> Option<DomainId> {
        self.domain_index.get(name).copied()
    }

    pub fn driver_domains(&self) -> impl Iterator<Item = DomainId> + '_ {
        self.domains
            .iter()
            .enumerate()
            .filter(|(_, d)| d.is_driver)
            .map(|(i, _)| DomainId::from_index(i))
    }

    pub fn attribute_domains(&self) -> impl Iterator<Item = DomainId> + '_ {
        self.domains
            .iter()
            .enumerate()
            .filter(|(_, d)| !d.is_driver)
            .map(|(i, _)| DomainId::from_index(i))
    }

    pub fn category(&self, id: CategoryId) -> Option<&Category> {
        self.categories.get(id.index())
    }

    pub fn category_id(&self, domain: DomainId, label: &str) -> Option<CategoryId> {
        self.category_index.get(domain.index())?.get(label).copied()
    }

    pub fn category_by_name(&self, domain: &str, label: &str) -> Option<CategoryId> {
        self.category_id(self.domain_id(domain)?, label)
    }

    pub fn categories_in(&self, domain: DomainId) -> impl Iterator<Item = CategoryId> + '_ {
        self.categories
            .iter()
            .enumerate()
            .filter(move |(_, c)| c.domain == domain)
            .map(|(i, _)| CategoryId::from_index(i))
    }

    /// All cells of a feature, in stored order.
    pub fn cells(&self, feature: FeatureId) -> &[CfCell] {
        self.feature_cells.get(feature.index()).map_or(&[], Vec::as_slice)
    }

    /// Features linked to a category, ascending. Empty before freezing.
    pub fn category_features(&self, category: CategoryId) -> &[FeatureId] {
        self.by_category.get(category.index()).map_or(&[], Vec::as_slice)
    }

    /// A frozen feature's cells in one domain, ranked by relevance, together
    /// with `C_f(f, d)`.
    #[inline]
    pub fn domain_cells(&self, feature: FeatureId, domain: DomainId) -> Option<(&[CfCell], f64)> {
        let spans = self.feature_spans.get(feature.index())?;
        let span = match spans.len() {
            1 if spans[0].domain == domain => &spans[0],
            _ => &spans[spans.binary_search_by_key(&domain, |s| s.domain).ok()?],
        };
        let cells = &self.feature_cells[feature.index()][span.start as usize..span.end as usize];
        if cells.is_empty() {
            None
        } else {
            Some((cells, span.total))
        }
    }

    pub fn cf(&self, category: CategoryId, feature: FeatureId) -> f64 {
        self.cells(feature)
            .iter()
            .find(|c| c.category == category)
            .map_or(0.0, |c| c.cf)
    }

    /// `C_f` within one domain.
    pub fn feature_domain_total(&self, feature: FeatureId, domain: DomainId) -> f64 {
        self.feature_spans
            .get(feature.index())
            .and_then(|s| s.iter().find(|s| s.domain == domain))
            .map_or(0.0, |s| s.total)
    }

    /// `C_f` across all domains.
    pub fn feature_total(&self, feature: FeatureId) -> f64 {
        self.feature_totals.get(feature.index()).copied().unwrap_or(0.0)
    }

    /// `F_c`.
    pub fn category_total(&self, category: CategoryId) -> f64 {
        self.category_totals.get(category.index()).copied().unwrap_or(0.0)
    }

    /// `C_f` under the configured total scope, for the domain of `category`.
    pub fn evidence_base(&self, feature: FeatureId, category: CategoryId) -> f64 {
        match self.config.total_scope {
            TotalScope::Domain => match self.category(category) {
                Some(c) => self.feature_domain_total(feature, c.domain),
                None => 0.0,
            },
            TotalScope::Global => self.feature_total(feature),
        }
    }

    /// `CFCF_f = cf / C_f`: feature-category relevance.
    pub fn feature_category_relevance(&self, feature: FeatureId, category: CategoryId) -> f64 {
        let cf = self.cf(category, feature);
        if cf == 0.0 {
            0.0
        } else {
            cf / self.evidence_base(feature, category)
        }
    }

    /// `CFCF_c = cf / F_c`: category-feature relevance. Diagnostics only.
    pub fn category_feature_relevance(&self, feature: FeatureId, category: CategoryId) -> f64 {
        let cf = self.cf(category, feature);
        if cf == 0.0 {
            0.0
        } else {
            cf / self.category_total(category)
        }
    }

    /// `CFCF_cf = cf² / (C_f · F_c)`: mutual relevance.
    pub fn mutual_relevance(&self, feature: FeatureId, category: CategoryId) -> f64 {
        let cf = self.cf(category, feature);
        if cf == 0.0 {
            0.0
        } else {
            cf * cf / (self.evidence_base(feature, category) * self.category_total(category))
        }
    }

    /// `(category, cf, CFCF_f)` for a feature within a domain, by relevance
    /// descending and category id ascending.
    pub fn feature_categories(&self, feature: FeatureId, domain: DomainId) -> Result<Vec<(CategoryId, f64, f64)>> {
        if feature.index() >= self.features.len() {
            return Err(Error::UnknownFeature(feature));
        }
        if domain.index() >= self.domains.len() {
            return Err(Error::UnknownDomainId(domain));
        }
        let mut out: Vec<(CategoryId, f64, f64)> = self
            .cells(feature)
            .iter()
            .filter(|c| self.categories[c.category.index()].domain == domain)
            .map(|c| (c.category, c.cf, c.cf / self.evidence_base(feature, c.category)))
            .collect();
        out.sort_by(|a, b| b.2.total_cmp(&a.2).then(a.0.cmp(&b.0)));
        Ok(out)
    }

    pub fn cooccurrence(&self, category: CategoryId, domain: DomainId) -> u64 {
        self.category_domains
            .get(category.index())
            .and_then(|row| row.binary_search_by_key(&domain, |&(d, _)| d).ok().map(|i| row[i].1))
            .unwrap_or(0)
    }

    /// Domains seen alongside a driver category in training, ascending.
    pub fn cooccurring_domains(&self, category: CategoryId) -> impl Iterator<Item = DomainId> + '_ {
        self.category_domains
            .get(category.index())
            .into_iter()
            .flatten()
            .filter(|&&(_, n)| n > 0)
            .map(|&(d, _)| d)
    }

    pub fn cooccurrence_cell_count(&self) -> usize {
        self.category_domains.iter().map(Vec::len).sum()
    }

    /// Whether `text` appeared verbatim in the training corpus.
    pub fn is_known_text(&self, text: &str) -> bool {
        let fp = text_fingerprint(text);
        if self.frozen {
            self.text_fingerprints.binary_search(&fp).is_ok()
        } else {
            self.text_fingerprints.contains(&fp)
        }
    }

    // ---- derived models --------------------------------------------------

    /// Keeps the `k` best cells per feature per domain and recomputes totals.
    pub(crate) fn retain_top_k(&mut self, k: usize) {
        debug_assert!(self.frozen);
        for (cells, spans) in self.feature_cells.iter_mut().zip(&self.feature_spans) {
            if spans.iter().all(|s| (s.end - s.start) as usize <= k) {
                continue;
            }
            let mut kept = Vec::with_capacity(spans.len() * k);
            for s in spans {
                let end = (s.start as usize + k).min(s.end as usize);
                kept.extend_from_slice(&cells[s.start as usize..end]);
            }
            *cells = kept;
        }
        self.rebuild_layout();
    }

    /// A copy holding only `domain`, its categories, the features that still
    /// carry a cell, and the tokens those features use. Relative id order is
    /// preserved so recognition in `domain` is unchanged.
    pub(crate) fn restricted_to(&self, domain: DomainId) -> Model {
        debug_assert!(self.frozen);
        let mut out = Model::new(self.config.clone());
        out.domains.push(self.domains[domain.index()].clone());

        let mut category_map = vec![None; self.categories.len()];
        for (i, c) in self.categories.iter().enumerate() {
            if c.domain == domain {
                category_map[i] = Some(CategoryId::from_index(out.categories.len()));
                out.categories.push(Category { domain: DomainId(0), ..c.clone() });
                out.category_totals.push(self.category_totals[i]);
                out.category_domains.push(Vec::new());
            }
        }

        let kept: Vec<(usize, &[CfCell], f64)> = (0..self.features.len())
            .filter_map(|f| {
                self.domain_cells(FeatureId::from_index(f), domain)
                    .map(|(cells, total)| (f, cells, total))
            })
            .collect();

        let mut token_map = vec![None; self.tokens.len()];
        for &(f, _, _) in &kept {
            for t in self.features[f].key.tokens() {
                token_map[t.index()] = Some(());
            }
        }
        let mut next = 0u32;
        let token_map: Vec<Option<TokenId>> = token_map
            .into_iter()
            .enumerate()
            .map(|(i, used)| {
                used.map(|_| {
                    out.tokens.push(self.tokens[i].clone());
                    next += 1;
                    TokenId(next - 1)
                })
            })
            .collect();
        let remap = |t: TokenId| token_map[t.index()].expect("token of kept feature");

        for (f, cells, total) in kept {
            let feature = &self.features[f];
            let key = match feature.key {
                FeatureKey::Keyword(t) => FeatureKey::Keyword(remap(t)),
                FeatureKey::Frame(a, b) => FeatureKey::Frame(remap(a), remap(b)),
            };
            out.features.push(Feature { key, quality: feature.quality });
            out.feature_cells.push(
                cells
                    .iter()
                    .map(|c| CfCell { category: category_map[c.category.index()].expect("cell in domain"), ..*c })
                    .collect(),
            );
            out.feature_spans.push(vec![DomainSpan { domain: DomainId(0), total, start: 0, end: cells.len() as u32 }]);
            out.feature_totals.push(self.feature_totals[f]);
        }
        out.text_fingerprints = self.text_fingerprints.clone();
        out.specialized = true;
        out.frozen = true;
        out.rebuild_indexes();
        out
    }
}
