//! Wave-kernel checks: resolvent identity against the heat-kernel route,
//! total mass, and the self-similarity invariant.

use super::p;
use crate::config::RunConfig;
use crate::report::{inputs, CheckRow, SuiteOutput};
use anyhow::Result;
use hamlab::wavegreen::{
    green_mass_quadrature, green_scaling_check, subordination_check, GreenSpec,
};

pub fn run(cfg: &RunConfig) -> Result<SuiteOutput> {
    let hash = cfg.hash();
    let mut out = SuiteOutput::default();
    let want_d = |d: usize| cfg.d.map_or(true, |want| want == d);

    if want_d(1) {
        // Resolvent identity in d = 1: ∫ e^{-λ²t} G(t,x) dt computed directly
        // must match the subordinated heat-kernel integral.
        for lambda in [0.5, 1.0, 2.0] {
            for x in [0.0, 0.5] {
                let sides = subordination_check(lambda, &[x], 1)?;
                out.rows.push(CheckRow::compare(
                    format!("green/subordination-d1-l{}-x{}", p(lambda), p(x)),
                    "resolvent-vs-subordinated-heat",
                    inputs(
                        &hash,
                        &[("lambda", p(lambda)), ("x", p(x)), ("d", "1".into())],
                    ),
                    sides.lhs,
                    sides.rhs,
                    1e-6,
                ));
            }
        }
        // Closed form: at λ = 1, x = 0 both routes equal 1/2 exactly.
        let sides = subordination_check(1.0, &[0.0], 1)?;
        out.rows.push(CheckRow::compare(
            "green/subordination-closed-form",
            "resolvent-closed-form-half",
            inputs(&hash, &[("lambda", "1".into()), ("x", "0".into())]),
            0.5,
            sides.rhs,
            1e-6,
        ));
    }

    // Total mass ∫ G(t,x) dx = t: exact in d = 1, quadrature over the disc in
    // d = 2, mollified shell in d = 3.
    for (d, eta, tol) in [(1usize, 0.0, 1e-8), (2, 0.0, 1e-8), (3, 1e-3, 1e-3)] {
        if !want_d(d) {
            continue;
        }
        let g = GreenSpec::new(d, eta)?;
        for t in [0.5, 1.0, 2.0] {
            let mass = green_mass_quadrature(&g, t)?;
            out.rows.push(CheckRow::compare(
                format!("green/mass-d{d}-t{}", p(t)),
                "kernel-total-mass",
                inputs(&hash, &[("d", d.to_string()), ("t", p(t)), ("eta", p(eta))]),
                t,
                mass,
                tol,
            ));
        }
    }

    if want_d(1) {
        // Self-similarity G(ct, cx) = c^{2-d} G(t, x) spot-checked in d = 1.
        let g = GreenSpec::new(1, 0.0)?;
        let ok = green_scaling_check(&g, 1.0, &[0.3])?;
        out.rows.push(CheckRow::flag(
            "green/scaling-invariant-d1",
            "kernel-self-similarity",
            inputs(&hash, &[("t", "1".into()), ("x", "0.3".into())]),
            ok,
        ));
    }

    Ok(out)
}
