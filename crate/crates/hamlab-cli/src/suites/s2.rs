//! Second-chaos expectation checks: the direct iterated-integral route must
//! match the reduced single-integral form, and homogeneous measures must obey
//! the exact time-scaling law.

use super::p;
use crate::config::RunConfig;
use crate::report::{inputs, CheckRow, SuiteOutput};
use anyhow::Result;
use hamlab::kernels::SpectralMeasure;
use hamlab::moments::{s2_expectation_reduced, s2n_expectation_direct, MomentMethod, MomentSpec};

pub fn run(cfg: &RunConfig) -> Result<SuiteOutput> {
    let hash = cfg.hash();
    let mut out = SuiteOutput::default();
    let rel_tol = cfg.tol_or(1e-3);

    let alpha0s: Vec<f64> = match cfg.alpha0 {
        Some(a0) => vec![a0],
        None => vec![0.3, 0.5, 0.7],
    };
    let measures: Vec<(&str, SpectralMeasure)> = vec![
        ("dirac", SpectralMeasure::DiracSpace),
        ("atomic", SpectralMeasure::single_atom(1.3, 0.8)),
    ];

    for (name, measure) in &measures {
        for &a0 in &alpha0s {
            for t in [0.5, 1.0] {
                let reduced = s2_expectation_reduced(t, measure, a0)?;
                let spec = MomentSpec {
                    n: 1,
                    t,
                    d: 1,
                    measure: measure.clone(),
                    alpha0: a0,
                    method: MomentMethod::Quadrature,
                    budget: 10_000_000,
                    seed: 0,
                };
                let direct = s2n_expectation_direct(&spec)?;
                out.rows.push(CheckRow::compare(
                    format!("s2/route-{name}-a{}-t{}", p(a0), p(t)),
                    "iterated-vs-reduced-integral",
                    inputs(
                        &hash,
                        &[("measure", name.to_string()), ("alpha0", p(a0)), ("t", p(t))],
                    ),
                    reduced,
                    direct.value,
                    rel_tol * reduced.abs(),
                ));
            }
        }
    }

    // Homogeneous measures scale exactly: doubling the horizon multiplies the
    // expectation by 2^{4-α-α₀}.
    let homogeneous: Vec<(&str, SpectralMeasure)> = vec![
        ("dirac", SpectralMeasure::DiracSpace),
        (
            "riesz",
            SpectralMeasure::RieszRadial {
                alpha: cfg.alpha.unwrap_or(0.5),
                c: 1.0,
                d: 1,
            },
        ),
    ];
    for (name, measure) in &homogeneous {
        let alpha = measure
            .homogeneity_exponent()
            .expect("homogeneous measure has a scaling exponent");
        for &a0 in &alpha0s {
            let ratio = s2_expectation_reduced(2.0, measure, a0)?
                / s2_expectation_reduced(1.0, measure, a0)?;
            let predicted = 2.0_f64.powf(4.0 - alpha - a0);
            out.rows.push(CheckRow::compare(
                format!("s2/scaling-{name}-a{}", p(a0)),
                "time-scaling-law",
                inputs(
                    &hash,
                    &[
                        ("measure", name.to_string()),
                        ("alpha", p(alpha)),
                        ("alpha0", p(a0)),
                    ],
                ),
                predicted,
                ratio,
                rel_tol * predicted,
            ));
        }
    }

    Ok(out)
}
