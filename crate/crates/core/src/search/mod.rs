//! Episode orchestration and the outer search loop.

mod config;
mod episode;
mod output;
mod run;

pub use config::{resolve_hardware, resolve_model, SearchConfig, DEFAULT_LAMBDA};
pub use episode::{reward, EpisodeTrace, SearchState};
pub use output::{build_report, write_atomic, write_report, write_run, LayerReportRow, RunManifest, RUN_FILES};
pub use run::{search_loop, search_loop_with, EpisodeRecord, SearchOutcome, EPISODE_CSV_HEADER};
