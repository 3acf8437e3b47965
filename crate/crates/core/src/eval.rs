//! Accuracy evaluation against a labeled test corpus.
//!
//! A test record is "known" when its text occurred verbatim in the training
//! corpus. Abstentions (no winner) count as incorrect in the accuracy figure
//! and are also reported on their own.

use std::collections::BTreeSet;
use std::io::{self, Write};
use std::time::Instant;

use crate::config::EngineConfig;
use crate::error::Result;
use crate::model::Model;
use crate::recognizer::batch_recognize;
use crate::trainer::CorpusRecord;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DomainStats {
    pub domain: String,
    pub in_model: bool,
    pub labeled: usize,
    pub correct: usize,
    pub wrong: usize,
    pub abstained: usize,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl DomainStats {
    pub fn accuracy(&self) -> f64 {
        ratio(self.correct, self.labeled)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubsetReport {
    pub items: usize,
    pub domains: Vec<DomainStats>,
}

impl SubsetReport {
    pub fn labeled(&self) -> usize {
        self.domains.iter().map(|d| d.labeled).sum()
    }

    pub fn correct(&self) -> usize {
        self.domains.iter().map(|d| d.correct).sum()
    }

    pub fn micro_accuracy(&self) -> f64 {
        ratio(self.correct(), self.labeled())
    }

    pub fn domain(&self, name: &str) -> Option<&DomainStats> {
        self.domains.iter().find(|d| d.domain == name)
    }
}

/// One (test item, labeled domain) outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalRow {
    /// Index of the record in the test corpus.
    pub item: usize,
    pub known: bool,
    pub domain: String,
    pub expected: String,
    pub predicted: Option<String>,
    pub score: f64,
    pub matched: usize,
}

impl EvalRow {
    pub fn is_correct(&self) -> bool {
        self.predicted.as_deref() == Some(self.expected.as_str())
    }
}

#[derive(Debug, Clone)]
pub struct EvalReport {
    pub config: EngineConfig,
    pub overall: SubsetReport,
    pub known: SubsetReport,
    pub unfamiliar: SubsetReport,
    pub rows: Vec<EvalRow>,
    pub items_per_sec: f64,
    pub model_cells: usize,
}

impl PartialEq for EvalReport {
    /// Compares everything except the wall-clock throughput.
    fn eq(&self, other: &Self) -> bool {
        self.config == other.config
            && self.overall == other.overall
            && self.known == other.known
            && self.unfamiliar == other.unfamiliar
            && self.rows == other.rows
            && self.model_cells == other.model_cells
    }
}

/// Aggregates rows into per-domain counts over `domains`.
pub fn tally<'a>(rows: impl Iterator<Item = &'a EvalRow>, items: usize, domains: &[(String, bool)]) -> SubsetReport {
    let mut stats: Vec<DomainStats> = domains
        .iter()
        .map(|(d, in_model)| DomainStats {
            domain: d.clone(),
            in_model: *in_model,
            labeled: 0,
            correct: 0,
            wrong: 0,
            abstained: 0,
        })
        .collect();
    for row in rows {
        let Some(s) = stats.iter_mut().find(|s| s.domain == row.domain) else {
            continue;
        };
        s.labeled += 1;
        match &row.predicted {
            None => s.abstained += 1,
            Some(p) if *p == row.expected => s.correct += 1,
            Some(_) => s.wrong += 1,
        }
    }
    SubsetReport { items, domains: stats }
}

pub fn evaluate(model: &Model, test: &[CorpusRecord], config: &EngineConfig, workers: usize) -> Result<EvalReport> {
    let texts: Vec<&str> = test.iter().map(|r| r.text.as_str()).collect();
    let start = Instant::now();
    let results = batch_recognize(&texts, model, config, None, workers)?;
    let elapsed = start.elapsed().as_secs_f64();

    let mut rows = Vec::new();
    for (item, (record, result)) in test.iter().zip(&results).enumerate() {
        let known = model.is_known_text(&record.text);
        for (domain, expected) in &record.labels {
            let scored = model.domain_id(domain).and_then(|d| result.domain(d));
            let winner = scored.and_then(|r| r.winner());
            rows.push(EvalRow {
                item,
                known,
                domain: domain.clone(),
                expected: expected.clone(),
                predicted: winner.and_then(|w| model.category(w.category)).map(|c| c.label.clone()),
                score: winner.map_or(0.0, |w| w.score),
                matched: winner.map_or(0, |w| w.matched_feature_count),
            });
        }
    }

    let names: BTreeSet<&str> = test.iter().flat_map(|r| r.labels.keys().map(String::as_str)).collect();
    let domains: Vec<(String, bool)> = names.into_iter().map(|d| (d.to_owned(), model.domain_id(d).is_some())).collect();
    let known_items = test.iter().filter(|r| model.is_known_text(&r.text)).count();

    Ok(EvalReport {
        config: config.clone(),
        overall: tally(rows.iter(), test.len(), &domains),
        known: tally(rows.iter().filter(|r| r.known), known_items, &domains),
        unfamiliar: tally(rows.iter().filter(|r| !r.known), test.len() - known_items, &domains),
        rows,
        items_per_sec: if elapsed > 0.0 { test.len() as f64 / elapsed } else { f64::INFINITY },
        model_cells: model.cell_count(),
    })
}

impl EvalReport {
    fn subsets(&self) -> [(&'static str, &SubsetReport); 3] {
        [("overall", &self.overall), ("known", &self.known), ("unfamiliar", &self.unfamiliar)]
    }

    pub fn write_table(&self, mut out: impl Write) -> io::Result<()> {
        writeln!(out, "config: {}", self.config.summary())?;
        writeln!(out, "model cells: {}    throughput: {:.1} items/sec", self.model_cells, self.items_per_sec)?;
        for (name, subset) in self.subsets() {
            writeln!(out)?;
            writeln!(out, "{name} ({} items)", subset.items)?;
            writeln!(
                out,
                "  {:<24} {:>8} {:>8} {:>8} {:>9} {:>9}",
                "domain", "labeled", "correct", "wrong", "abstained", "accuracy"
            )?;
            for d in &subset.domains {
                let marker = if d.in_model { "" } else { " (not in model)" };
                writeln!(
                    out,
                    "  {:<24} {:>8} {:>8} {:>8} {:>9} {:>9.4}{marker}",
                    d.domain,
                    d.labeled,
                    d.correct,
                    d.wrong,
                    d.abstained,
                    d.accuracy()
                )?;
            }
            writeln!(out, "  {:<24} {:>8} {:>8} {:>28.4}", "(micro)", subset.labeled(), subset.correct(), subset.micro_accuracy())?;
        }
        Ok(())
    }

    /// Line-oriented tab-separated form; `with_rows` adds one line per
    /// (item, domain) outcome for failure analysis.
    pub fn write_tsv(&self, mut out: impl Write, with_rows: bool) -> io::Result<()> {
        writeln!(out, "# config\tsummary")?;
        writeln!(out, "# domain\tsubset\tdomain\tin_model\tlabeled\tcorrect\twrong\tabstained\taccuracy")?;
        writeln!(out, "# micro\tsubset\titems\tlabeled\tcorrect\taccuracy")?;
        writeln!(out, "# throughput\titems_per_sec")?;
        writeln!(out, "# cells\tcount")?;
        if with_rows {
            writeln!(out, "# row\titem\tknown\tdomain\texpected\tpredicted\tscore\tmatched")?;
        }
        writeln!(out, "config\t{}", self.config.summary())?;
        for (name, subset) in self.subsets() {
            for d in &subset.domains {
                writeln!(
                    out,
                    "domain\t{name}\t{}\t{}\t{}\t{}\t{}\t{}\t{:.6}",
                    d.domain,
                    d.in_model,
                    d.labeled,
                    d.correct,
                    d.wrong,
                    d.abstained,
                    d.accuracy()
                )?;
            }
            writeln!(
                out,
                "micro\t{name}\t{}\t{}\t{}\t{:.6}",
                subset.items,
                subset.labeled(),
                subset.correct(),
                subset.micro_accuracy()
            )?;
        }
        writeln!(out, "throughput\t{:.3}", self.items_per_sec)?;
        writeln!(out, "cells\t{}", self.model_cells)?;
        if with_rows {
            for r in &self.rows {
                writeln!(
                    out,
                    "row\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                    r.item,
                    r.known,
                    r.domain,
                    r.expected,
                    r.predicted.as_deref().unwrap_or(""),
                    r.score,
                    r.matched
                )?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trainer::train;

    fn corpus() -> Vec<CorpusRecord> {
        vec![
            CorpusRecord::new("red pen").label("type", "pen").label("color", "red"),
            CorpusRecord::new("blue pen").label("type", "pen").label("color", "blue"),
            CorpusRecord::new("steel scissors").label("type", "scissors").label("material", "steel"),
        ]
    }

    #[test]
    fn training_set_is_all_known() {
        let c = corpus();
        let m = train(&c, &EngineConfig::default()).unwrap();
        let r = evaluate(&m, &c, &EngineConfig::default(), 1).unwrap();
        assert_eq!(r.known.items, 3);
        assert_eq!(r.unfamiliar.items, 0);
        assert_eq!(r.overall.micro_accuracy(), 1.0);
        assert_eq!(r.known, SubsetReport { items: 3, ..r.overall.clone() });
    }

    #[test]
    fn unknown_domain_has_zero_coverage() {
        let c = corpus();
        let m = train(&c, &EngineConfig::default()).unwrap();
        let test = vec![CorpusRecord::new("red pen").label("weight", "5g").label("type", "pen")];
        let r = evaluate(&m, &test, &EngineConfig::default(), 1).unwrap();
        let w = r.overall.domain("weight").unwrap();
        assert!(!w.in_model);
        assert_eq!((w.labeled, w.correct, w.abstained), (1, 0, 1));
        assert_eq!(r.overall.domain("type").unwrap().correct, 1);
    }

    #[test]
    fn counts_add_up() {
        let c = corpus();
        let m = train(&c, &EngineConfig::default()).unwrap();
        let test = vec![
            CorpusRecord::new("blue scissors").label("type", "scissors").label("color", "blue"),
            CorpusRecord::new("green thing").label("type", "pen"),
        ];
        let r = evaluate(&m, &test, &EngineConfig::default(), 1).unwrap();
        for d in &r.overall.domains {
            assert_eq!(d.labeled, d.correct + d.wrong + d.abstained);
            assert!((0.0..=1.0).contains(&d.accuracy()));
        }
        assert_eq!(r.unfamiliar.items, 2);
        let mut buf = Vec::new();
        r.write_tsv(&mut buf, true).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().filter(|l| l.starts_with("row\t")).count(), 3);
    }
}
