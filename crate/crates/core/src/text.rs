//! Tokenization and keyword / keyword-frame feature extraction.
//!
//! A text is lowercased and split on every run of non-alphanumeric
//! characters. Each token yields a keyword feature; each ordered token pair
//! at hop distance `k <= max_frame_distance` yields a frame feature with
//! evidence `1/k`. Repeated pairs sum their weights.

use std::hash::Hash;

use indexmap::IndexMap;

use crate::error::Result;
use crate::ids::{FeatureId, TokenId};
use crate::model::{FeatureKey, Model};

/// Splits `text` into lowercase alphanumeric tokens. Short and digit-bearing
/// tokens are kept.
pub fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|s| !s.is_empty())
        .map(str::to_owned)
        .collect()
}

/// Enumerates ordered token pairs within `max_distance` hops.
///
/// Pairs come out in first-emission order, walking hop distance 1 first,
/// then 2, and so on; a pair seen more than once accumulates its weights.
pub fn build_frames<T>(tokens: &[T], max_distance: usize) -> Vec<((T, T), f64)>
where
    T: Clone + Eq + Hash,
{
    let mut acc: IndexMap<(T, T), f64> = IndexMap::new();
    for_each_frame(tokens.len(), max_distance, |i, j, w| {
        *acc.entry((tokens[i].clone(), tokens[j].clone())).or_insert(0.0) += w;
    });
    acc.into_iter().collect()
}

/// Visits every frame occurrence `(i, j, 1/(j-i))` in canonical order.
///
/// Both feature instantiation and detection go through this loop so that
/// per-pair weight sums are formed in the same order and agree bit for bit.
#[inline]
fn for_each_frame(n: usize, max_distance: usize, mut visit: impl FnMut(usize, usize, f64)) {
    for hop in 1..=max_distance.min(n.saturating_sub(1)) {
        let w = 1.0 / hop as f64;
        for i in 0..n - hop {
            visit(i, i + hop, w);
        }
    }
}

/// Number of frame occurrences emitted for `n` tokens at distance `d`.
pub fn frame_occurrences(n: usize, d: usize) -> usize {
    (1..=d).map(|k| n.saturating_sub(k)).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FeatureKind {
    Keyword,
    Frame,
}

impl FeatureKind {
    pub fn as_str(self) -> &'static str {
        match self {
            FeatureKind::Keyword => "keyword",
            FeatureKind::Frame => "frame",
        }
    }
}

/// Transient decomposition of one text: feature id → evidence (`TF_tf`).
///
/// Entries are sorted by feature id and every evidence value is positive.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FeatureBag {
    entries: Vec<(FeatureId, f64)>,
    pub text_weight: f64,
}

impl FeatureBag {
    fn from_unsorted(mut raw: Vec<(FeatureId, f64)>, text_weight: f64) -> Self {
        // Stable sort keeps per-feature emission order for the summation below.
        raw.sort_by_key(|&(f, _)| f);
        let mut entries: Vec<(FeatureId, f64)> = Vec::with_capacity(raw.len());
        for (f, w) in raw {
            match entries.last_mut() {
                Some((last, acc)) if *last == f => *acc += w,
                _ => entries.push((f, w)),
            }
        }
        FeatureBag { entries, text_weight }
    }

    pub fn entries(&self) -> &[(FeatureId, f64)] {
        &self.entries
    }

    pub fn evidence(&self, feature: FeatureId) -> Option<f64> {
        self.entries
            .binary_search_by_key(&feature, |&(f, _)| f)
            .ok()
            .map(|i| self.entries[i].1)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// `F_t`: total feature evidence of the text.
    pub fn total(&self) -> f64 {
        self.entries.iter().map(|&(_, w)| w).sum()
    }

    /// Keeps only entries for which `keep` returns true.
    pub fn retain(&mut self, mut keep: impl FnMut(FeatureId) -> bool) {
        self.entries.retain(|&(f, _)| keep(f));
    }

    /// Multiplies every evidence value by `factor`.
    pub fn scale(&mut self, factor: f64) {
        for (_, w) in &mut self.entries {
            *w *= factor;
        }
    }
}

/// Whether unseen tokens and features are added to the model.
pub enum VocabMode<'m> {
    Instantiate(&'m mut Model),
    Detect(&'m Model),
}

pub fn extract_bag(text: &str, text_weight: f64, mode: VocabMode<'_>, max_distance: usize) -> Result<FeatureBag> {
    match mode {
        VocabMode::Instantiate(model) => instantiate_bag(model, text, text_weight, max_distance),
        VocabMode::Detect(model) => Ok(detect_bag(model, text, text_weight, max_distance)),
    }
}

/// Builds a bag, interning every new token and feature into `model`.
pub fn instantiate_bag(model: &mut Model, text: &str, text_weight: f64, max_distance: usize) -> Result<FeatureBag> {
    let surfaces = tokenize(text);
    let mut tokens = Vec::with_capacity(surfaces.len());
    let mut raw = Vec::with_capacity(surfaces.len() + frame_occurrences(surfaces.len(), max_distance));
    for s in surfaces {
        let t = model.intern_token(&s)?;
        tokens.push(t);
        raw.push((model.intern_feature(FeatureKey::Keyword(t))?, 1.0));
    }
    for ((a, b), w) in build_frames(&tokens, max_distance) {
        raw.push((model.intern_feature(FeatureKey::Frame(a, b))?, w));
    }
    Ok(FeatureBag::from_unsorted(raw, text_weight))
}

/// Builds a bag from features already known to `model`; anything unseen is
/// skipped. Unknown tokens still occupy a position, so hop distances are
/// measured on the original token sequence.
pub fn detect_bag(model: &Model, text: &str, text_weight: f64, max_distance: usize) -> FeatureBag {
    let tokens: Vec<Option<TokenId>> = tokenize(text).iter().map(|s| model.token_id(s)).collect();
    let mut raw = Vec::with_capacity(tokens.len() * (1 + max_distance));
    for t in tokens.iter().flatten() {
        if let Some(f) = model.keyword_feature(*t) {
            raw.push((f, 1.0));
        }
    }
    for_each_frame(tokens.len(), max_distance, |i, j, w| {
        if let (Some(a), Some(b)) = (tokens[i], tokens[j]) {
            if let Some(f) = model.frame_feature(a, b) {
                raw.push((f, w));
            }
        }
    });
    FeatureBag::from_unsorted(raw, text_weight)
}
