mod common;

use ctgn::corpus::{parse_confirmations, parse_corpus, write_corpus};
use ctgn::eval::evaluate;
use ctgn::synth::{generate, SynthSpec};
use ctgn::trainer::Trainer;
use ctgn::{train, CorpusRecord, EngineConfig, Model};
use common::random_corpus;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const CORPUS: &str = "\
# office supplies
Office scissors, steel\tunspsc=44121618\tmaterial=steel
red ball pen\t0.8\tunspsc=44121704\tcolor=red
blue ball pen\tunspsc=44121704\tcolor=blue
steel ruler 30cm\tunspsc=44121618\tmaterial=steel
";

#[test]
fn file_to_model_to_report() {
    let records: Vec<CorpusRecord> = parse_corpus(CORPUS.as_bytes()).unwrap().into_iter().map(|(_, r)| r).collect();
    assert_eq!(records.len(), 4);
    assert_eq!(records[1].weight, 0.8);

    let mut buf = Vec::new();
    write_corpus(&records, &mut buf).unwrap();
    let again: Vec<CorpusRecord> = parse_corpus(buf.as_slice()).unwrap().into_iter().map(|(_, r)| r).collect();
    assert_eq!(again, records);

    let confirmations = parse_confirmations("color\tred\tkeyword\tRed\n".as_bytes()).unwrap();
    let config = EngineConfig { driver_domains: vec!["unspsc".into()], ..Default::default() };
    let model = Trainer::new(config.clone()).unwrap().with_confirmations(confirmations).train(&records).unwrap();
    let red = model.feature_by_surfaces(&["red"]).unwrap();
    let c = model.category_by_name("color", "red").unwrap();
    assert_eq!(model.cf(c, red), 1.0);

    let loaded = Model::from_bytes(&model.to_bytes().unwrap()).unwrap();
    let mut test = records.clone();
    test.push(CorpusRecord::new("green pen").label("color", "green").label("size", "xl"));
    let report = evaluate(&loaded, &test, &config, 2).unwrap();
    assert_eq!(report.known.items, 4);
    assert_eq!(report.unfamiliar.items, 1);
    assert_eq!(report.known.micro_accuracy(), 1.0);
    let size = report.overall.domain("size").unwrap();
    assert!(!size.in_model);
    assert_eq!((size.labeled, size.correct, size.abstained), (1, 0, 1));
    let green = report.overall.domain("color").unwrap();
    assert_eq!(green.labeled, 3);
    assert_eq!(green.wrong + green.abstained, 1);
}

#[test]
fn test_set_equal_to_training_set_is_all_known() {
    let corpus = generate(&SynthSpec { texts_per_category: 5, ..Default::default() }).unwrap();
    let model = train(&corpus, &EngineConfig::default()).unwrap();
    let report = evaluate(&model, &corpus, &EngineConfig::default(), 1).unwrap();
    assert_eq!(report.known.items, corpus.len());
    assert_eq!(report.unfamiliar.items, 0);
    assert_eq!(report.overall.micro_accuracy(), 1.0);
}

#[test]
fn full_overlap_is_near_chance() {
    let spec = SynthSpec { overlap: 1.0, ..Default::default() };
    let corpus = generate(&spec).unwrap();
    let test = generate(&SynthSpec { split: 1, ..spec.clone() }).unwrap();
    let model = train(&corpus, &EngineConfig::default()).unwrap();
    let report = evaluate(&model, &test, &EngineConfig::default(), 1).unwrap();
    let chance = 1.0 / spec.categories_per_domain as f64;
    for d in &report.overall.domains {
        assert!((d.accuracy() - chance).abs() <= 0.1, "{}: {}", d.domain, d.accuracy());
    }
}

#[test]
fn report_tsv_counts_add_up() {
    let spec = SynthSpec { overlap: 0.5, texts_per_category: 20, ..Default::default() };
    let corpus = generate(&spec).unwrap();
    let test = generate(&SynthSpec { split: 1, ..spec }).unwrap();
    let model = train(&corpus, &EngineConfig::default()).unwrap();
    let report = evaluate(&model, &test, &EngineConfig::default(), 1).unwrap();
    for d in &report.overall.domains {
        assert_eq!(d.correct + d.wrong + d.abstained, d.labeled);
        let recount = report.rows.iter().filter(|r| r.domain == d.domain && r.is_correct()).count();
        assert_eq!(recount, d.correct);
    }
    let mut out = Vec::new();
    report.write_tsv(&mut out, true).unwrap();
    let text = String::from_utf8(out).unwrap();
    assert!(text.starts_with('#'));
    assert_eq!(text.lines().filter(|l| l.starts_with("row\t")).count(), report.rows.len());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn training_ignores_record_order(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let corpus = random_corpus(&mut rng, 16, 3, 4);
        prop_assume!(corpus.iter().any(|r| !r.text.is_empty()));
        let mut shuffled = corpus.clone();
        shuffled.shuffle(&mut rng);
        let a = train(&corpus, &EngineConfig::default()).unwrap();
        let b = train(&shuffled, &EngineConfig::default()).unwrap();
        prop_assert_eq!(a.to_bytes().unwrap(), b.to_bytes().unwrap());
    }
}
