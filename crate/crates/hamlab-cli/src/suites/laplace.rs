//! Time-kernel checks: the truncated lower/tail split must reassemble the
//! power kernel, and the principal-branch complex power must agree with its
//! damped-oscillatory integral representation.

use super::p;
use crate::config::RunConfig;
use crate::report::{inputs, CheckRow, SuiteOutput};
use anyhow::Result;
use hamlab::kernels::{complex_power, time_kernel_eval, TimeKernel};
use hamlab::quad::{integrate_gl, integrate_gl_panels};
use num_complex::Complex64;
use statrs::function::gamma::gamma;

/// Quadrature route for (u + iv)^{-α₀}: Γ(α₀)⁻¹ ∫₀^∞ e^{-λ(u+iv)} λ^{α₀-1} dλ,
/// with a series head for the endpoint singularity, geometric panels through
/// the unit interval, and half-period oscillatory panels beyond it.
fn power_quadrature(alpha0: f64, u: f64, v: f64) -> Complex64 {
    let z = Complex64::new(u, v);
    let eps: f64 = 1e-3;

    let mut acc = Complex64::new(0.0, 0.0);
    let mut zk = Complex64::new(1.0, 0.0);
    let mut factorial = 1.0;
    for k in 0..6 {
        let kk = k as f64;
        acc += zk * eps.powf(alpha0 + kk) / (factorial * (alpha0 + kk));
        zk *= -z;
        factorial *= kk + 1.0;
    }

    let mut lo = eps;
    while lo < 1.0 {
        let hi = (2.0 * lo).min(1.0);
        acc.re += integrate_gl(|l| l.powf(alpha0 - 1.0) * (-l * u).exp() * (l * v).cos(), lo, hi, 24);
        acc.im -= integrate_gl(|l| l.powf(alpha0 - 1.0) * (-l * u).exp() * (l * v).sin(), lo, hi, 24);
        lo = hi;
    }

    let upper = 45.0 / u;
    if upper > 1.0 {
        let panels = (((upper - 1.0) * (v.abs() + 1.0)) / std::f64::consts::PI).ceil() as usize + 4;
        acc.re += integrate_gl_panels(
            |l| l.powf(alpha0 - 1.0) * (-l * u).exp() * (l * v).cos(),
            1.0,
            upper,
            panels,
            16,
        );
        acc.im -= integrate_gl_panels(
            |l| l.powf(alpha0 - 1.0) * (-l * u).exp() * (l * v).sin(),
            1.0,
            upper,
            panels,
            16,
        );
    }

    acc / gamma(alpha0)
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn unit(state: &mut u64) -> f64 {
    (splitmix64(state) >> 11) as f64 / (1u64 << 53) as f64
}

pub fn run(cfg: &RunConfig) -> Result<SuiteOutput> {
    let hash = cfg.hash();
    let mut out = SuiteOutput::default();
    let tol = cfg.tol_or(1e-6);

    // Truncated split: lower part + tail part must equal |u|^{-α₀} for every
    // positive truncation level.
    let alpha0s: Vec<f64> = match cfg.alpha0 {
        Some(a0) => vec![a0],
        None => vec![0.3, 0.5, 0.7],
    };
    let delta = 0.5;
    for &a0 in &alpha0s {
        let lower = TimeKernel::new(a0, delta, false)?;
        let tail = TimeKernel::new(a0, delta, true)?;
        let mut max_dev: f64 = 0.0;
        for u in [0.1, 0.5, 1.0, 2.0, 5.0] {
            let split = time_kernel_eval(&lower, u)? + time_kernel_eval(&tail, u)?;
            max_dev = max_dev.max((split - u.powf(-a0)).abs());
        }
        out.rows.push(CheckRow::compare(
            format!("laplace/power-split-a{}", p(a0)),
            "kernel-split-reassembly",
            inputs(&hash, &[("alpha0", p(a0)), ("delta", p(delta))]),
            0.0,
            max_dev,
            tol,
        ));
    }

    // Untruncated kernel is the power law itself.
    let plain = TimeKernel::new(0.4, 0.0, false)?;
    out.rows.push(CheckRow::compare(
        "laplace/untruncated-identity",
        "kernel-power-law",
        inputs(&hash, &[("alpha0", "0.4".into()), ("u", "2".into())]),
        2.0_f64.powf(-0.4),
        time_kernel_eval(&plain, 2.0)?,
        1e-12,
    ));

    // Principal branch against the integral representation on 50 seeded
    // random tuples.
    let id = "laplace/principal-branch";
    let mut state = cfg.check_seed(id);
    let mut max_dev: f64 = 0.0;
    let points = 50;
    for _ in 0..points {
        let a0 = 0.1 + 0.8 * unit(&mut state);
        let u = 0.2 + 2.8 * unit(&mut state);
        let v = -3.0 + 6.0 * unit(&mut state);
        let direct = complex_power(a0, u, v)?;
        let quad = power_quadrature(a0, u, v);
        max_dev = max_dev.max((direct - quad).norm());
    }
    out.rows.push(CheckRow::compare(
        id,
        "principal-branch-vs-integral",
        inputs(&hash, &[("points", points.to_string())]),
        0.0,
        max_dev,
        tol,
    ));

    Ok(out)
}
