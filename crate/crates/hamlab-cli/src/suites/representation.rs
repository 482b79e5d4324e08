//! Order-one moment representation: the deterministic kernel integral
//! against the path-sampled exponential-functional route.

use super::p;
use crate::config::RunConfig;
use crate::report::{inputs, CheckRow, SuiteOutput};
use anyhow::Result;
use hamlab::kernels::SpectralMeasure;
use hamlab::localtime::representation_check_n1;

pub fn run(cfg: &RunConfig) -> Result<SuiteOutput> {
    let hash = cfg.hash();
    let mut out = SuiteOutput::default();

    let theta = cfg.theta_or(2.0);
    let alpha0 = cfg.alpha0_or(0.5);
    let k = 256usize;
    let mc = cfg.mc_or(20_000);
    let measure = SpectralMeasure::single_atom(1.0, 1.0);

    let id = "representation/n1-two-routes";
    let report = representation_check_n1(theta, &measure, alpha0, k, mc, cfg.check_seed(id))?;
    out.rows.push(CheckRow::compare(
        id,
        "kernel-integral-vs-sampled-functional",
        inputs(
            &hash,
            &[
                ("theta", p(theta)),
                ("alpha0", p(alpha0)),
                ("k", k.to_string()),
                ("m", mc.to_string()),
            ],
        ),
        report.lhs,
        report.rhs,
        3.0 * report.stderr + report.quad_tol,
    ));

    Ok(out)
}
