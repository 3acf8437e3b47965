use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ctgn::bench::{bench, sweep_configs};
use ctgn::corpus::{read_confirmations, read_corpus, write_corpus};
use ctgn::eval::evaluate;
use ctgn::synth::{generate, SynthSpec};
use ctgn::trainer::Trainer;
use ctgn::{
    batch_recognize, compress, specialize, CfFormula, DomainId, EngineConfig, Error, Model, RankingMode, ScopeMode, ScoringMode, TopK,
    TotalScope,
};

const EXIT_USAGE: u8 = 2;
const EXIT_IO: u8 = 3;
const EXIT_FORMAT: u8 = 4;
const EXIT_MODEL: u8 = 5;

/// Categorize short product texts with rules learned from a labeled corpus.
#[derive(Parser)]
#[command(name = "ctgn", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model from a tab-separated corpus.
    Train {
        corpus: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        /// Confirmed category-feature relations to pin at full evidence.
        #[arg(long)]
        confirmations: Option<PathBuf>,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Recognize categories for text lines; `-` reads standard input.
    Recognize {
        #[command(flatten)]
        model: ModelArg,
        input: String,
        /// Only score these domains (repeatable).
        #[arg(long = "domain")]
        domains: Vec<String>,
        #[arg(long, default_value_t = 1)]
        workers: usize,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Score a model against a labeled test corpus.
    Evaluate {
        #[command(flatten)]
        model: ModelArg,
        test: PathBuf,
        /// Also print one row per (item, domain) outcome.
        #[arg(long)]
        rows: bool,
        #[arg(long, default_value_t = 1)]
        workers: usize,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Measure recognition throughput.
    Bench {
        #[command(flatten)]
        model: ModelArg,
        input: PathBuf,
        #[arg(long, default_value_t = 1)]
        workers: usize,
        #[arg(long, default_value_t = 3)]
        repetitions: usize,
        /// Run every top-k / scoring-mode / order-priority combination.
        #[arg(long)]
        sweep: bool,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Keep only the K most relevant categories per feature per domain.
    Compress {
        input: PathBuf,
        #[arg(short = 'k', long = "top-k")]
        k: TopK,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Keep only one domain and the rules that serve it.
    Specialize {
        input: PathBuf,
        #[arg(long)]
        domain: String,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Write a deterministic synthetic corpus.
    Synth {
        #[arg(long, default_value_t = 3)]
        domains: usize,
        #[arg(long, default_value_t = 10)]
        categories: usize,
        #[arg(long, default_value_t = 12)]
        vocab: usize,
        #[arg(long, default_value_t = 0.0)]
        overlap: f64,
        #[arg(long, default_value_t = 100)]
        texts_per_category: usize,
        #[arg(long, default_value_t = 8)]
        tokens_per_text: usize,
        #[arg(long, default_value_t = 1)]
        drivers: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Text split; another split reuses the vocabularies with new texts.
        #[arg(long, default_value_t = 0)]
        split: u64,
        #[arg(short, long)]
        output: PathBuf,
    },
}

#[derive(Args)]
struct ModelArg {
    #[arg(short = 'm', long = "model", env = "CTGN_MODEL")]
    path: PathBuf,
}

/// Overrides on top of the default (train) or stored (other commands) config.
#[derive(Args, Default)]
struct ConfigArgs {
    #[arg(long)]
    max_frame_distance: Option<usize>,
    #[arg(long)]
    top_k: Option<TopK>,
    #[arg(long)]
    scoring_mode: Option<ScoringMode>,
    #[arg(long)]
    ranking_mode: Option<RankingMode>,
    #[arg(long)]
    order_priority: Option<bool>,
    #[arg(long)]
    scope_mode: Option<ScopeMode>,
    #[arg(long)]
    min_matched_features: Option<usize>,
    #[arg(long)]
    min_score: Option<f64>,
    /// Comma-separated driver domain names.
    #[arg(long, value_delimiter = ',')]
    driver_domains: Option<Vec<String>>,
    #[arg(long)]
    cf_formula: Option<CfFormula>,
    #[arg(long)]
    total_scope: Option<TotalScope>,
}

impl ConfigArgs {
    fn apply(&self, base: &EngineConfig) -> ctgn::Result<EngineConfig> {
        let mut c = base.clone();
        macro_rules! set {
            ($($field:ident),*) => {$(
                if let Some(v) = &self.$field {
                    c.$field = v.clone();
                }
            )*};
        }
        set!(
            max_frame_distance,
            top_k,
            scoring_mode,
            ranking_mode,
            order_priority,
            scope_mode,
            min_matched_features,
            min_score,
            driver_domains,
            cf_formula,
            total_scope
        );
        c.validate()?;
        Ok(c)
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::InvalidConfig(_) => EXIT_USAGE,
        Error::Io(_) => EXIT_IO,
        Error::Format(_) | Error::Parse { .. } | Error::InvalidRecord { .. } | Error::EmptyCorpus => EXIT_FORMAT,
        _ => EXIT_MODEL,
    }
}

fn load(path: &Path) -> ctgn::Result<Model> {
    Model::load(path).map_err(|e| match e {
        Error::Io(io) => Error::Io(io::Error::new(io.kind(), format!("{}: {io}", path.display()))),
        other => other,
    })
}

fn create(path: &Path) -> ctgn::Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::Io(io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

/// Text column of an input line; trailing tab-separated columns are ignored.
fn text_column(line: &str) -> &str {
    line.split('\t').next().unwrap_or("")
}

fn read_texts(path: &Path) -> ctgn::Result<Vec<String>> {
    let file = File::open(path).map_err(|e| Error::Io(io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
    BufReader::new(file)
        .lines()
        .map(|l| Ok(text_column(l?.trim_end_matches('\r')).to_owned()))
        .collect()
}

fn cell_report(what: &str, before: &Model, after: &Model) {
    println!(
        "{what}: cells {} -> {}, features {} -> {}, categories {} -> {}",
        before.cell_count(),
        after.cell_count(),
        before.feature_count(),
        after.feature_count(),
        before.category_count(),
        after.category_count()
    );
}

const CHUNK: usize = 4096;

fn run_recognize(model: &Model, input: &str, domains: &[String], workers: usize, config: &EngineConfig) -> ctgn::Result<()> {
    let filter: Option<Vec<DomainId>> = if domains.is_empty() {
        None
    } else {
        Some(
            domains
                .iter()
                .map(|d| model.domain_id(d).ok_or_else(|| Error::UnknownDomain(d.clone())))
                .collect::<ctgn::Result<_>>()?,
        )
    };
    let reader: Box<dyn BufRead> = if input == "-" {
        Box::new(io::stdin().lock())
    } else {
        let f = File::open(input).map_err(|e| Error::Io(io::Error::new(e.kind(), format!("{input}: {e}"))))?;
        Box::new(BufReader::new(f))
    };
    let mut out = BufWriter::new(io::stdout().lock());
    writeln!(out, "# line\tdomain\twinner\tscore\tmatched")?;

    let flush = |start: usize, chunk: &mut Vec<String>, out: &mut dyn Write| -> ctgn::Result<()> {
        let results = batch_recognize(chunk, model, config, filter.as_deref(), workers)?;
        for (i, r) in results.iter().enumerate() {
            for d in &r.domains {
                let name = &model.domain(d.domain).expect("scored domain exists").name;
                match d.winner() {
                    Some(w) => {
                        let label = &model.category(w.category).expect("winner exists").label;
                        writeln!(out, "{}\t{name}\t{label}\t{}\t{}", start + i, w.score, w.matched_feature_count)?;
                    }
                    None => writeln!(out, "{}\t{name}\t\t0\t0", start + i)?,
                }
            }
        }
        chunk.clear();
        Ok(())
    };

    let mut chunk = Vec::with_capacity(CHUNK);
    let mut start = 1;
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        chunk.push(text_column(line.trim_end_matches('\r')).to_owned());
        if chunk.len() == CHUNK {
            flush(start, &mut chunk, &mut out)?;
            start = n + 2;
        }
    }
    if !chunk.is_empty() {
        flush(start, &mut chunk, &mut out)?;
    }
    out.flush()?;
    Ok(())
}

fn run(cli: Cli) -> ctgn::Result<()> {
    match cli.command {
        Command::Train { corpus, output, confirmations, config } => {
            let config = config.apply(&EngineConfig::default())?;
            let records = read_corpus(&corpus)?;
            let mut trainer = Trainer::new(config)?;
            if let Some(path) = confirmations {
                trainer = trainer.with_confirmations(read_confirmations(path)?);
            }
            let training = trainer.train_detailed(&records)?;
            let model = &training.model;
            let totals = model.verify_totals();
            model.save(&output)?;
            let s = &training.stats;
            println!("records: {} ({} skipped without tokens)", s.records, s.skipped_empty.len());
            println!(
                "tokens: {}  features: {}  domains: {}  categories: {}",
                model.token_count(),
                model.feature_count(),
                model.domain_count(),
                model.category_count()
            );
            println!("cells: {}  totals consistent: {}", model.cell_count(), totals.is_consistent());
            println!("wrote {}", output.display());
        }
        Command::Recognize { model, input, domains, workers, config } => {
            let m = load(&model.path)?;
            let config = config.apply(m.config())?;
            run_recognize(&m, &input, &domains, workers, &config)?;
        }
        Command::Evaluate { model, test, rows, workers, config } => {
            let m = load(&model.path)?;
            let config = config.apply(m.config())?;
            let test = read_corpus(&test)?;
            let report = evaluate(&m, &test, &config, workers)?;
            let mut out = BufWriter::new(io::stdout().lock());
            report.write_table(&mut out)?;
            writeln!(out)?;
            report.write_tsv(&mut out, rows)?;
            out.flush()?;
        }
        Command::Bench { model, input, workers, repetitions, sweep, config } => {
            let m = load(&model.path)?;
            let config = config.apply(m.config())?;
            let texts = read_texts(&input)?;
            let configs = if sweep { sweep_configs(&config) } else { vec![config] };
            let mut out = io::stdout().lock();
            writeln!(out, "# config\tworkers\titems\trates\tmedian_items_per_sec")?;
            for c in &configs {
                let r = bench(&m, &texts, c, workers, repetitions)?;
                let rates: Vec<String> = r.rates.iter().map(|x| format!("{x:.1}")).collect();
                writeln!(out, "{}\t{}\t{}\t{}\t{:.1}", c.summary(), r.workers, r.items, rates.join(","), r.median)?;
            }
        }
        Command::Compress { input, k, output } => {
            let before = load(&input)?;
            let after = compress(before.clone(), k)?;
            after.save(&output)?;
            cell_report(&format!("compress top-k={k}"), &before, &after);
        }
        Command::Specialize { input, domain, output } => {
            let before = load(&input)?;
            let after = specialize(&before, &domain)?;
            after.save(&output)?;
            cell_report(&format!("specialize {domain}"), &before, &after);
        }
        Command::Synth {
            domains,
            categories,
            vocab,
            overlap,
            texts_per_category,
            tokens_per_text,
            drivers,
            seed,
            split,
            output,
        } => {
            let spec = SynthSpec {
                domains,
                categories_per_domain: categories,
                vocab_per_category: vocab,
                overlap,
                texts_per_category,
                tokens_per_text,
                drivers,
                seed,
                split,
            };
            let records = generate(&spec)?;
            let mut out = create(&output)?;
            write_corpus(&records, &mut out)?;
            out.flush()?;
            println!("wrote {} records to {}", records.len(), output.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
