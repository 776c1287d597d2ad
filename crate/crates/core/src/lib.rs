//! Two-player normal-form game harness.
//!
//! Plays one-shot and repeated games between scripted strategies and
//! LLM-backed players, records every round to line-delimited transcripts, and
//! computes move distributions with uniformity ranges, tie rates, joint-outcome
//! tables, win milestones and early/late splits.
//!
//! ```
//! use playbench::{prisoners_dilemma, Experiment, ExperimentConfig, Mode, PlayerSpec, Points};
//!
//! let cfg = ExperimentConfig::new(
//!     "tft-vs-defector",
//!     prisoners_dilemma(),
//!     PlayerSpec::scripted("tit_for_tat"),
//!     PlayerSpec::scripted("always_defect"),
//!     Mode::Repeated { rounds: 100 },
//! );
//! let t = Experiment::new(cfg).unwrap().run_repeated().unwrap();
//! assert_eq!(t.totals().first, Points::whole(99));
//! assert_eq!(t.totals().second, Points::whole(109));
//! ```

pub mod analytics;
pub mod cli;
pub mod clock;
pub mod config;
pub mod engine;
pub mod game;
pub mod gateway;
pub mod players;
pub mod prompts;
pub mod replay;
pub mod seeds;
pub mod storage;
pub mod synthetic;
pub mod transcript;

pub use analytics::{DistributionStats, Pooling, UniformTestConfig};
pub use clock::Clock;
pub use config::{load_experiment, ExperimentConfig, Mode};
pub use engine::{Experiment, ExperimentBuilder};
pub use game::{prisoners_dilemma, rock_paper_scissors, Action, ActionId, Game, Points};
pub use gateway::{Gateway, GatewayConfig};
pub use players::{ModelParams, PlayerSpec, StrategyRegistry};
pub use prompts::{PromptCatalog, PromptTemplate};
pub use transcript::{PerSeat, RoundRecord, Seat, Termination, Transcript};
