//! Test-only helpers: a brute-force reimplementation of the training
//! statistics that shares no code with the library, random corpus
//! generators, and flattening of recognition results into comparable rows.
#![allow(dead_code)]

use std::collections::{BTreeMap, HashMap};

use ctgn::{CorpusRecord, Model, RecognitionResult};
use rand::Rng;

/// Feature named by its token surfaces.
pub type Name = Vec<String>;
/// (domain, label)
pub type Cat = (String, String);

fn oracle_tokens(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    for ch in text.to_lowercase().chars() {
        if ch.is_alphanumeric() {
            cur.push(ch);
        } else if !cur.is_empty() {
            out.push(std::mem::take(&mut cur));
        }
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out
}

/// TF per feature by nested loops over positions.
pub fn oracle_bag(text: &str, d: usize) -> HashMap<Name, f64> {
    let toks = oracle_tokens(text);
    let mut bag: HashMap<Name, f64> = HashMap::new();
    for t in &toks {
        *bag.entry(vec![t.clone()]).or_default() += 1.0;
    }
    for i in 0..toks.len() {
        for j in i + 1..toks.len() {
            if j - i <= d {
                *bag.entry(vec![toks[i].clone(), toks[j].clone()]).or_default() += 1.0 / (j - i) as f64;
            }
        }
    }
    bag
}

#[derive(Debug, Default)]
pub struct Oracle {
    /// Keyed by record index in the input corpus.
    pub tftf: HashMap<usize, HashMap<Name, f64>>,
    pub tctc: HashMap<usize, HashMap<Cat, f64>>,
    pub cf: HashMap<(Cat, Name), f64>,
    /// `C_f` per (feature, domain)
    pub c_f: HashMap<(Name, String), f64>,
    /// `C_f` over all domains
    pub c_f_all: HashMap<Name, f64>,
    pub f_c: HashMap<Cat, f64>,
}

impl Oracle {
    pub fn new(corpus: &[CorpusRecord], d: usize) -> Oracle {
        let bags: Vec<HashMap<Name, f64>> = corpus.iter().map(|r| oracle_bag(&r.text, d)).collect();
        let live: Vec<usize> = (0..corpus.len()).filter(|&i| !bags[i].is_empty()).collect();

        let mut t_f: HashMap<Name, f64> = HashMap::new();
        for &i in &live {
            for (f, tf) in &bags[i] {
                *t_f.entry(f.clone()).or_default() += tf;
            }
        }
        let mut t_c: HashMap<Cat, f64> = HashMap::new();
        for &i in &live {
            for (dom, lab) in &corpus[i].labels {
                *t_c.entry((dom.clone(), lab.clone())).or_default() += 1.0;
            }
        }

        let mut o = Oracle::default();
        for &i in &live {
            let f_t: f64 = bags[i].values().sum();
            let tftf: HashMap<Name, f64> = bags[i].iter().map(|(f, tf)| (f.clone(), tf * tf / (t_f[f] * f_t))).collect();
            let mut tctc = HashMap::new();
            for (dom, lab) in &corpus[i].labels {
                let c_t = corpus[i].labels.keys().filter(|k| *k == dom).count() as f64;
                let cat = (dom.clone(), lab.clone());
                tctc.insert(cat.clone(), 1.0 / (t_c[&cat] * c_t));
            }
            for (f, v) in &tftf {
                for (c, u) in &tctc {
                    *o.cf.entry((c.clone(), f.clone())).or_default() += corpus[i].weight * v * u;
                }
            }
            o.tftf.insert(i, tftf);
            o.tctc.insert(i, tctc);
        }
        for ((c, f), v) in &o.cf {
            *o.c_f.entry((f.clone(), c.0.clone())).or_default() += v;
            *o.c_f_all.entry(f.clone()).or_default() += v;
            *o.f_c.entry(c.clone()).or_default() += v;
        }
        o
    }

    /// `cf / C_f` within the category's domain.
    pub fn cfcf_f(&self, c: &Cat, f: &Name) -> f64 {
        self.cf.get(&(c.clone(), f.clone())).map_or(0.0, |v| v / self.c_f[&(f.clone(), c.0.clone())])
    }

    /// `cf² / (C_f · F_c)`
    pub fn cfcf_cf(&self, c: &Cat, f: &Name) -> f64 {
        self.cf
            .get(&(c.clone(), f.clone()))
            .map_or(0.0, |v| v * v / (self.c_f[&(f.clone(), c.0.clone())] * self.f_c[c]))
    }

    /// Scores every category of `domain` for a text the way the recognizer
    /// is documented to, given the oracle's statistics: (label, matched, score).
    pub fn score(&self, text: &str, d: usize, domain: &str, symmetric: bool, order_priority: bool) -> Vec<(String, usize, f64)> {
        let bag = oracle_bag(text, d);
        let has_cells = |f: &Name| self.c_f.contains_key(&(f.clone(), domain.to_owned()));
        let mut used: Vec<(&Name, f64)> = bag.iter().filter(|(f, _)| has_cells(f)).map(|(f, v)| (f, *v)).collect();
        if order_priority && used.iter().any(|(f, _)| f.len() == 2) {
            used.retain(|(f, _)| f.len() == 2);
        }
        let mut acc: BTreeMap<String, (usize, f64)> = BTreeMap::new();
        for (c, f) in self.cf.keys() {
            if c.0 != domain {
                continue;
            }
            if let Some((_, ev)) = used.iter().find(|(g, _)| *g == f) {
                let rel = if symmetric { self.cfcf_cf(c, f) } else { self.cfcf_f(c, f) };
                let e = acc.entry(c.1.clone()).or_default();
                e.0 += 1;
                e.1 += ev * rel;
            }
        }
        acc.into_iter().map(|(l, (n, s))| (l, n, s)).collect()
    }
}

/// Surface names of a model feature.
pub fn feature_name(model: &Model, f: ctgn::FeatureId) -> Name {
    model
        .feature(f)
        .unwrap()
        .key
        .tokens()
        .into_iter()
        .map(|t| model.token(t).unwrap().to_owned())
        .collect()
}

pub fn category_name(model: &Model, c: ctgn::CategoryId) -> Cat {
    let cat = model.category(c).unwrap();
    (model.domain(cat.domain).unwrap().name.clone(), cat.label.clone())
}

pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

const WORDS: &[&str] = &["a", "b", "c", "dd", "e1", "ff", "g", "h7"];

/// Random small labeled corpus for oracle comparisons.
pub fn random_corpus(rng: &mut impl Rng, max_texts: usize, max_domains: usize, max_cats: usize) -> Vec<CorpusRecord> {
    let n_texts = rng.gen_range(1..=max_texts);
    let n_domains = rng.gen_range(1..=max_domains);
    let domain_names = ["unspsc", "color", "type"];
    let cats_per_domain: Vec<usize> = (0..n_domains).map(|_| rng.gen_range(1..=max_cats)).collect();
    (0..n_texts)
        .map(|_| {
            let len = rng.gen_range(0..=6);
            let text: Vec<&str> = (0..len).map(|_| WORDS[rng.gen_range(0..WORDS.len())]).collect();
            let mut r = CorpusRecord::new(text.join(" "));
            if rng.gen_bool(0.3) {
                r.weight = rng.gen_range(0.05..=1.0);
            }
            for (d, &n) in cats_per_domain.iter().enumerate() {
                if rng.gen_bool(0.8) {
                    r.labels.insert(domain_names[d].to_owned(), format!("L{}", rng.gen_range(0..n)));
                }
            }
            r
        })
        .collect()
}

pub fn random_text(rng: &mut impl Rng, max_len: usize) -> String {
    let len = rng.gen_range(0..=max_len);
    (0..len).map(|_| WORDS[rng.gen_range(0..WORDS.len())]).collect::<Vec<_>>().join(" ")
}

/// One comparable row per scored domain: (domain, winner label, score bits, matched).
pub type Row = (String, String, u64, usize);

pub fn rows(model: &Model, result: &RecognitionResult) -> Vec<Row> {
    result
        .domains
        .iter()
        .map(|d| {
            let name = model.domain(d.domain).unwrap().name.clone();
            match d.winner() {
                Some(w) => (name, model.category(w.category).unwrap().label.clone(), w.score.to_bits(), w.matched_feature_count),
                None => (name, String::new(), 0, 0),
            }
        })
        .collect()
}

/// Full candidate lists keyed by label, for cross-model comparison.
pub fn candidates(model: &Model, d: &ctgn::DomainResult) -> Vec<(String, usize, u64)> {
    d.candidates
        .iter()
        .map(|c| (model.category(c.category).unwrap().label.clone(), c.matched_feature_count, c.score.to_bits()))
        .collect()
}
