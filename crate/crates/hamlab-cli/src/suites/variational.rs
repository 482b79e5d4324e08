//! Variational solver checks: the ascent result must dominate the trial
//! library, stay on the per-slice mass shell, be monotone along the
//! kernel-truncation ladder, and reproduce the covariance-rescaling identity.

use super::p;
use crate::config::RunConfig;
use crate::report::{inputs, CheckRow, SuiteOutput};
use anyhow::Result;
use hamlab::kernels::SpectralMeasure;
use hamlab::variational::{
    eval_functional, rescale_covariance_check, solve, trial_library, FunctionalKind, GridConfig,
};

pub fn run(cfg: &RunConfig) -> Result<SuiteOutput> {
    let hash = cfg.hash();
    let mut out = SuiteOutput::default();
    let alpha0 = cfg.alpha0_or(0.5);
    let measure = SpectralMeasure::DiracSpace;

    // Moderate grid for the solver rows; the rescaling identity below runs on
    // the default grid where its 1% contract is stated.
    let grid = GridConfig {
        slices: 8,
        space_points: 121,
        box_half: 7.0,
    };
    let grid_tag = format!("{}x{}@{}", grid.slices, grid.space_points, p(grid.box_half));
    let sol = solve(
        FunctionalKind::E0,
        &measure,
        alpha0,
        0.0,
        &grid,
        None,
        3000,
        1e-8,
    )?;

    out.rows.push(CheckRow::flag(
        "variational/converged",
        "ascent-converged",
        inputs(
            &hash,
            &[
                ("alpha0", p(alpha0)),
                ("grid", grid_tag.clone()),
                ("iterations", sol.iterations.to_string()),
            ],
        ),
        sol.converged,
    ));

    // Every trial field evaluates below the solver's value.
    let mut best_trial = f64::NEG_INFINITY;
    let trials = trial_library(&grid);
    let trial_count = trials.len();
    for (_, field) in &trials {
        best_trial = best_trial.max(eval_functional(
            FunctionalKind::E0,
            field,
            &measure,
            alpha0,
            0.0,
        )?);
    }
    out.rows.push(CheckRow::upper_bound(
        "variational/trial-domination",
        "solver-above-trial-library",
        inputs(
            &hash,
            &[
                ("trials", trial_count.to_string()),
                ("alpha0", p(alpha0)),
                ("grid", grid_tag.clone()),
            ],
        ),
        sol.value,
        best_trial,
        1e-9,
    ));

    // The iterate stays exactly on the unit mass shell in every slice.
    let mut mass_dev: f64 = 0.0;
    for i in 0..grid.slices {
        mass_dev = mass_dev.max((sol.field.slice_mass(i) - 1.0).abs());
    }
    out.rows.push(CheckRow::compare(
        "variational/feasibility",
        "slice-mass-constraint",
        inputs(&hash, &[("grid", grid_tag.clone())]),
        0.0,
        mass_dev,
        1e-9,
    ));

    // Kernel-truncation ladder: the truncated functional grows as the
    // truncation is removed and never exceeds the untruncated value.
    let deltas = [0.5, 0.25, 0.125];
    let mut ladder = Vec::new();
    for &delta in &deltas {
        let s = solve(
            FunctionalKind::Edelta,
            &measure,
            alpha0,
            delta,
            &grid,
            Some(&sol.field),
            3000,
            1e-8,
        )?;
        ladder.push(s.value);
    }
    let mut worst_violation: f64 = f64::NEG_INFINITY;
    for w in ladder.windows(2) {
        worst_violation = worst_violation.max(w[0] - w[1]);
    }
    worst_violation = worst_violation.max(ladder[2] - sol.value);
    out.rows.push(CheckRow::upper_bound(
        "variational/delta-monotone",
        "truncation-ladder-monotone",
        inputs(
            &hash,
            &[
                ("deltas", "0.5/0.25/0.125".into()),
                ("alpha0", p(alpha0)),
                ("grid", grid_tag),
            ],
        ),
        0.0,
        worst_violation,
        1e-6,
    ));

    // Rescaling identity on the default grid: doubling the covariance must
    // rescale the positive part by 2^{α/(4-α)}.
    let default_grid = GridConfig::default();
    let rc = rescale_covariance_check(&measure, alpha0, &default_grid)?;
    out.rows.push(CheckRow::compare(
        "variational/rescale-identity",
        "covariance-doubling-rescale",
        inputs(
            &hash,
            &[
                ("alpha0", p(alpha0)),
                (
                    "grid",
                    format!(
                        "{}x{}@{}",
                        default_grid.slices,
                        default_grid.space_points,
                        p(default_grid.box_half)
                    ),
                ),
            ],
        ),
        rc.predicted,
        rc.m_tilde,
        0.01 * rc.predicted,
    ));

    Ok(out)
}
