//! Damped-resolvent checks: closed form against direct quadrature, the decay
//! rate of the damped integral, and boundedness of the compensated family.
//!
//! The decay-slope window below is the stated target; the measured log-log
//! slope of the closed form sits outside it (see the report row), and the
//! check records that honestly rather than widening the window.

use super::p;
use crate::config::RunConfig;
use crate::report::{inputs, CheckRow, SuiteOutput, TrendSeries};
use anyhow::Result;
use hamlab::kernels::SpectralMeasure;
use hamlab::strat_bound::{lemma_a1, lemma_a2, lemma_a3_rate};

pub fn run(cfg: &RunConfig) -> Result<SuiteOutput> {
    let hash = cfg.hash();
    let mut out = SuiteOutput::default();
    let alpha0 = cfg.alpha0_or(0.5);
    let measure = SpectralMeasure::DiracSpace;

    // First moment of the damped kernel is finite and positive.
    let a1 = lemma_a1(cfg.theta_or(1.0), &measure, alpha0)?;
    out.rows.push(CheckRow::flag(
        "lemma-a/a1-finite",
        "damped-first-moment-finite",
        inputs(
            &hash,
            &[("theta", p(cfg.theta_or(1.0))), ("alpha0", p(alpha0))],
        ),
        a1.is_finite() && a1 > 0.0,
    ));

    // Closed form of the damped pairing integral against its direct
    // four-dimensional quadrature.
    let theta = cfg.theta_or(1.0);
    let pair = lemma_a2(theta, &measure, alpha0)?;
    out.rows.push(CheckRow::compare(
        "lemma-a/a2-closed-vs-direct",
        "closed-form-vs-quadrature",
        inputs(&hash, &[("theta", p(theta)), ("alpha0", p(alpha0))]),
        pair.closed,
        pair.direct,
        cfg.tol_or(1e-3) * pair.closed.abs(),
    ));

    // Log-log decay slope of the closed form over a dyadic damping ladder.
    let thetas = [4.0, 8.0, 16.0, 32.0];
    let slope = lemma_a3_rate(&thetas, &measure, alpha0)?;
    out.rows.push(CheckRow::compare(
        "lemma-a/a3-decay-slope",
        "damped-decay-slope",
        inputs(
            &hash,
            &[("thetas", "4/8/16/32".into()), ("alpha0", p(alpha0))],
        ),
        -2.0,
        slope,
        0.15,
    ));

    // The θ²-compensated closed form must not grow along the ladder.
    let low = lemma_a2(4.0, &measure, alpha0)?.closed * 16.0;
    let high = lemma_a2(64.0, &measure, alpha0)?.closed * 64.0 * 64.0;
    out.rows.push(CheckRow::upper_bound(
        "lemma-a/compensated-bounded",
        "damping-compensated-bound",
        inputs(&hash, &[("theta", "4/64".into()), ("alpha0", p(alpha0))]),
        low,
        high,
        1e-12 * low.abs(),
    ));

    // Trend series: (ln θ, ln closed) along the ladder.
    let mut points = Vec::new();
    for &t in &thetas {
        let c = lemma_a2(t, &measure, alpha0)?.closed;
        points.push((t.ln(), c.ln()));
    }
    out.trends.push(TrendSeries {
        name: "lemma_a3_rate".into(),
        points,
    });

    Ok(out)
}
