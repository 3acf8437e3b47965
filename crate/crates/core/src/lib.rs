//! Learns category-assignment rules from labeled short product texts and
//! applies them to new texts at high throughput.
//!
//! The pipeline is [`text`] (tokens and keyword / keyword-frame features),
//! [`model`] (the frozen knowledge store), [`trainer`] (evidence
//! accumulation, compression and specialization) and [`recognizer`]
//! (per-domain scoring with contextual scoping). [`eval`], [`bench`],
//! [`corpus`] and [`synth`] support the command-line tool.
//!
//! ```
//! use ctgn::{train, recognize, CorpusRecord, EngineConfig};
//!
//! let corpus = vec![
//!     CorpusRecord::new("red ball pen").label("unspsc", "44121704").label("color", "red"),
//!     CorpusRecord::new("steel ruler").label("unspsc", "44121618"),
//! ];
//! let config = EngineConfig::default();
//! let model = train(&corpus, &config)?;
//! let result = recognize("red pen", &model, &config, None)?;
//! assert_eq!(result.object["color"], "red");
//! # Ok::<(), ctgn::Error>(())
//! ```

pub mod bench;
pub mod config;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod ids;
pub mod model;
mod persist;
pub mod recognizer;
pub mod synth;
pub mod text;
pub mod trainer;

pub use config::{CfFormula, EngineConfig, RankingMode, ScopeMode, ScoringMode, TopK, TotalScope};
pub use error::{Error, FormatError, Result};
pub use ids::{CategoryId, DomainId, FeatureId, TokenId};
pub use model::{CfCell, FeatureKey, Model, TotalFinding, TotalsReport};
pub use persist::{FORMAT_VERSION, MAGIC};
pub use recognizer::{batch_recognize, recognize, score_domain, scope_attributes, CategoryCandidate, DomainResult, RecognitionResult, Recognizer};
pub use text::{build_frames, tokenize, FeatureBag, FeatureKind};
pub use trainer::{compress, specialize, train, Confirmation, CorpusRecord, FeatureSpec, Trainer};
