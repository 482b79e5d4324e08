//! Path-functional checks: pointwise kernel inequality chain, ensemble-mean
//! nonnegativity of the complex-kernel functional, and the exponential-moment
//! trend series.

use super::p;
use crate::config::RunConfig;
use crate::report::{inputs, CheckRow, SuiteOutput, TrendSeries};
use anyhow::Result;
use hamlab::kernels::SpectralMeasure;
use hamlab::localtime::{
    ensemble_mean_complex, exp_moment_trend, kernel_chain_check, simulate_paths,
    SmoothedCovariance,
};

fn two_atoms() -> SpectralMeasure {
    SpectralMeasure::FiniteAtomic {
        atoms: vec![
            hamlab::kernels::Atom {
                freq: vec![1.0],
                weight: 0.7,
            },
            hamlab::kernels::Atom {
                freq: vec![2.3],
                weight: 0.3,
            },
        ],
    }
}

pub fn run(cfg: &RunConfig) -> Result<SuiteOutput> {
    let hash = cfg.hash();
    let mut out = SuiteOutput::default();

    // Pointwise inequality chain on sampled (s, r, Δβ, w) tuples: zero
    // violations tolerated.
    let id = "localtime/kernel-chain";
    let samples = cfg.mc_or(1_000_000);
    let ok = kernel_chain_check(samples, 1.3, 0.45, cfg.check_seed(id))?;
    out.rows.push(CheckRow::flag(
        id,
        "kernel-inequality-chain",
        inputs(
            &hash,
            &[
                ("samples", samples.to_string()),
                ("theta", "1.3".into()),
                ("alpha0", "0.45".into()),
            ],
        ),
        ok,
    ));

    // Ensemble-mean functional with the complex kernel: the mean must be
    // nonnegative within three standard errors even though pathwise values
    // oscillate, and the imaginary part cancels identically.
    let cov = SmoothedCovariance::new(two_atoms(), 0.0)?;
    let m = cfg.mc_or(2_000);
    let k = 64usize;
    let mut max_abs_im: f64 = 0.0;
    for theta in [1.0, 2.0] {
        for alpha0 in [0.3, 0.5] {
            let id = format!("localtime/mean-nonnegative-t{}-a{}", p(theta), p(alpha0));
            let ens = simulate_paths(1, 1.0, k, m, cfg.check_seed(&id), false)?;
            let est = ensemble_mean_complex(&ens, &cov, theta, alpha0)?;
            max_abs_im = max_abs_im.max(est.value.im.abs());
            // Pass iff Re >= -3*stderr: encoded as -Re <= 3*stderr.
            out.rows.push(CheckRow::upper_bound(
                id,
                "ensemble-mean-nonnegativity",
                inputs(
                    &hash,
                    &[
                        ("theta", p(theta)),
                        ("alpha0", p(alpha0)),
                        ("m", m.to_string()),
                        ("k", k.to_string()),
                    ],
                ),
                0.0,
                -est.value.re,
                3.0 * est.stderr,
            ));
        }
    }
    out.rows.push(CheckRow::compare(
        "localtime/mean-imaginary-vanishes",
        "symmetrized-imaginary-cancellation",
        inputs(&hash, &[("m", m.to_string()), ("k", k.to_string())]),
        0.0,
        max_abs_im,
        1e-15,
    ));

    // Exponential-moment trend over a horizon ladder: recorded as a series,
    // with a finiteness row (no convergence claim is made).
    let id = "localtime/exp-trend";
    let horizons = [0.5, 1.0, 1.5, 2.0];
    let trend = exp_moment_trend(
        0.5,
        1.2,
        0.8,
        0.5,
        &cov,
        &horizons,
        64,
        cfg.mc_or(512),
        cfg.check_seed(id),
    )?;
    let all_finite = trend
        .iter()
        .all(|pt| pt.value.is_finite() && pt.stderr.is_finite() && pt.stderr >= 0.0);
    out.rows.push(CheckRow::flag(
        id,
        "exp-moment-trend-finite",
        inputs(
            &hash,
            &[
                ("b", "0.5".into()),
                ("theta", "1.2".into()),
                ("eta", "0.8".into()),
                ("alpha0", "0.5".into()),
                ("horizons", "0.5/1/1.5/2".into()),
            ],
        ),
        all_finite,
    ));
    out.trends.push(TrendSeries {
        name: "exp_moment_trend".into(),
        points: trend.iter().map(|pt| (pt.t, pt.value)).collect(),
    });

    Ok(out)
}
