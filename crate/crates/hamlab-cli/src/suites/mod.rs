//! The check suites.  Each suite is a fixed list of named checks against the
//! library; a suite function receives the resolved configuration and returns
//! rows (plus optional trend series).  Check ids are `suite/check-name` and
//! every row records the inputs it actually used, so a report is
//! self-describing.

mod asympt;
mod bound;
mod green;
mod laplace;
mod lemma_a;
mod localtime;
mod representation;
mod s2;
mod variational;
mod wick;

use crate::config::{RunConfig, Suite};
use crate::report::SuiteOutput;
use anyhow::Result;

pub fn run_suite(suite: Suite, cfg: &RunConfig) -> Result<SuiteOutput> {
    match suite {
        Suite::Green => green::run(cfg),
        Suite::Wick => wick::run(cfg),
        Suite::Laplace => laplace::run(cfg),
        Suite::S2 => s2::run(cfg),
        Suite::Bound => bound::run(cfg),
        Suite::LemmaA => lemma_a::run(cfg),
        Suite::Representation => representation::run(cfg),
        Suite::Localtime => localtime::run(cfg),
        Suite::Variational => variational::run(cfg),
        Suite::Asympt => asympt::run(cfg),
        Suite::All => unreachable!("all is expanded by the caller"),
    }
}

/// Compact deterministic rendering of a parameter value for check ids and
/// the inputs column (1 -> "1", 0.5 -> "0.5").
pub(crate) fn p(v: f64) -> String {
    format!("{v}")
}
