//! Large-time rate predictors for the log-moment growth of the solution,
//! the factorially-normalized moment growth base (reachable through either
//! variational constant), the Mittag-Leffler log-sum asymptotic that turns
//! the moment series into the rate, and the Gamma-tail negligibility bound
//! used to discard the large-time region of the Laplace integral.

use serde_json::{json, Value};
use statrs::function::gamma::ln_gamma;
use thiserror::Error;

use crate::kernels::SpectralMeasure;
use crate::moments::{s2_expectation_reduced, MomentError};
use crate::quad::{ln_gamma_upper_q, log_sum_exp};
use crate::variational::{
    invert_relation_E0_M, relation_E0_M, solve, FunctionalKind, GridConfig, VariationalError,
};

#[derive(Debug, Error)]
pub enum AsymptError {
    #[error("rate predictors need α₀ + α < 2, got α = {alpha}, α₀ = {alpha0}")]
    HypothesisViolated { alpha: f64, alpha0: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Variational(#[from] VariationalError),
    #[error(transparent)]
    Moment(#[from] MomentError),
}

/// Exponent pair and variational constant feeding the rate predictions. The
/// constant can be supplied in either the square-root form (ℳ) or the energy
/// form (𝓔₀); predictions stay on the supplied route so the two can be
/// cross-checked independently.
#[derive(Debug, Clone, Copy)]
pub struct RateInputs {
    pub alpha: f64,
    pub alpha0: f64,
    pub d: usize,
    m_val: Option<f64>,
    e0_val: Option<f64>,
}

impl RateInputs {
    pub fn with_m(alpha: f64, alpha0: f64, d: usize, m_val: f64) -> Self {
        RateInputs { alpha, alpha0, d, m_val: Some(m_val), e0_val: None }
    }

    pub fn with_e0(alpha: f64, alpha0: f64, d: usize, e0_val: f64) -> Self {
        RateInputs { alpha, alpha0, d, m_val: None, e0_val: Some(e0_val) }
    }

    pub fn validate(&self) -> Result<(), AsymptError> {
        if self.d == 0 {
            return Err(AsymptError::InvalidParameter("dimension must be ≥ 1".into()));
        }
        if !(self.alpha0 > 0.0 && self.alpha0 < 1.0) {
            return Err(AsymptError::InvalidParameter(
                "time exponent must lie in (0, 1)".into(),
            ));
        }
        let d = self.d as f64;
        if !(self.alpha > 0.0 && self.alpha <= d) {
            return Err(AsymptError::InvalidParameter(
                "space exponent must lie in (0, d]".into(),
            ));
        }
        // The boundary α = d is only a valid covariance scaling in d = 1.
        if self.alpha == d && self.d != 1 {
            return Err(AsymptError::InvalidParameter(
                "the boundary case α = d is admissible only in dimension 1".into(),
            ));
        }
        if self.alpha0 + self.alpha >= 2.0 {
            return Err(AsymptError::HypothesisViolated {
                alpha: self.alpha,
                alpha0: self.alpha0,
            });
        }
        let val = self.m_val.or(self.e0_val);
        match val {
            Some(v) if v >= 0.0 && v.is_finite() => Ok(()),
            Some(_) => Err(AsymptError::InvalidParameter(
                "variational constant must be finite and ≥ 0".into(),
            )),
            None => Err(AsymptError::InvalidParameter(
                "either ℳ or 𝓔₀ must be supplied".into(),
            )),
        }
    }

    /// The square-root-form constant, converting from the energy form if
    /// that is the supplied route.
    pub fn m_value(&self) -> Result<f64, AsymptError> {
        self.validate()?;
        match (self.m_val, self.e0_val) {
            (Some(m), _) => Ok(m),
            (None, Some(e0)) => Ok(invert_relation_E0_M(e0, self.alpha)?),
            (None, None) => unreachable!("validate rejects missing constants"),
        }
    }

    /// The energy-form constant, converting from the square-root form if
    /// that is the supplied route.
    pub fn e0_value(&self) -> Result<f64, AsymptError> {
        self.validate()?;
        match (self.e0_val, self.m_val) {
            (Some(e0), _) => Ok(e0),
            (None, Some(m)) => Ok(relation_E0_M(m, self.alpha)?),
            (None, None) => unreachable!("validate rejects missing constants"),
        }
    }

    fn record(&self) -> Value {
        json!({
            "alpha": self.alpha,
            "alpha0": self.alpha0,
            "d": self.d,
            "M": self.m_val,
            "E0": self.e0_val,
        })
    }
}

#[derive(Debug, Clone, Copy)]
pub struct RatePrediction {
    pub exponent: f64,
    pub constant: f64,
}

impl RatePrediction {
    /// Flat JSON record of the prediction.
    pub fn json_record(&self, inputs: &RateInputs) -> Value {
        json!({
            "inputs": inputs.record(),
            "exponent": self.exponent,
            "constant": self.constant,
            "provenance": "logEu-growth-rate",
        })
    }
}

/// Growth base of the factorially-normalized even moments on the
/// square-root route: 2·(4−α−2α₀)^{(4−α−2α₀)/2}/(4−α−α₀)^{4−α−α₀}
/// ·(ℳ/(4−α))^{(4−α)/2}, computed in log space.
fn ln_base_from_m(alpha: f64, alpha0: f64, m: f64) -> f64 {
    if m == 0.0 {
        return f64::NEG_INFINITY;
    }
    let p = 4.0 - alpha - 2.0 * alpha0;
    let q = 4.0 - alpha - alpha0;
    2.0f64.ln() + 0.5 * p * p.ln() - q * q.ln()
        + 0.5 * (4.0 - alpha) * (m.ln() - (4.0 - alpha).ln())
}

/// The same base on the energy route:
/// (4−α−2α₀)^{(4−α−2α₀)/2}/(2³(4−α−α₀)^{4−α−α₀})·(2𝓔₀/(2−α))^{(2−α)/2}.
fn ln_base_from_e0(alpha: f64, alpha0: f64, e0: f64) -> f64 {
    if e0 == 0.0 {
        return f64::NEG_INFINITY;
    }
    let p = 4.0 - alpha - 2.0 * alpha0;
    let q = 4.0 - alpha - alpha0;
    0.5 * p * p.ln() - 3.0 * 2.0f64.ln() - q * q.ln()
        + 0.5 * (2.0 - alpha) * ((2.0 * e0).ln() - (2.0 - alpha).ln())
}

/// Growth base of (n!)^{3−α}·(2n-th moment), staying on the route of the
/// supplied constant so the two algebraic forms can be compared externally.
pub fn moment_growth_base(r: &RateInputs) -> Result<f64, AsymptError> {
    r.validate()?;
    let ln_base = match (r.m_val, r.e0_val) {
        (Some(m), _) => ln_base_from_m(r.alpha, r.alpha0, m),
        (None, Some(e0)) => ln_base_from_e0(r.alpha, r.alpha0, e0),
        (None, None) => unreachable!("validate rejects missing constants"),
    };
    Ok(ln_base.exp())
}

/// Predicted large-t behaviour of log E u(t, x): the time power and the
/// limiting constant (3−α)·base^{1/(3−α)}.
#[allow(non_snake_case)]
pub fn predict_logEu_rate(r: &RateInputs) -> Result<RatePrediction, AsymptError> {
    r.validate()?;
    let exponent = (4.0 - r.alpha - r.alpha0) / (3.0 - r.alpha);
    let m = r.m_value()?;
    let constant = if m == 0.0 {
        0.0
    } else {
        (3.0 - r.alpha) * (ln_base_from_m(r.alpha, r.alpha0, m) / (3.0 - r.alpha)).exp()
    };
    Ok(RatePrediction { exponent, constant })
}

/// Predicted value of the growth base raised to the order: the n-th term
/// scale of the factorially-normalized even moments.
pub fn predict_moment_prefactor(n: usize, r: &RateInputs) -> Result<f64, AsymptError> {
    if n == 0 {
        r.validate()?;
        return Ok(1.0);
    }
    let base = moment_growth_base(r)?;
    if base == 0.0 {
        return Ok(0.0);
    }
    Ok((n as f64 * base.ln()).exp())
}

#[derive(Debug, Clone, Copy)]
pub struct ConjecturedRate {
    pub exponent: f64,
    pub constant: f64,
    /// Always true: the p-th moment pattern is conjectured, not proved.
    pub conjecture: bool,
}

impl ConjecturedRate {
    pub fn json_record(&self, p: u32, inputs: &RateInputs) -> Value {
        json!({
            "inputs": inputs.record(),
            "p": p,
            "exponent": self.exponent,
            "constant": self.constant,
            "conjecture": self.conjecture,
            "provenance": "pth-moment-growth-conjecture",
        })
    }
}

/// Conjectured p-th moment analogue of [`predict_logEu_rate`]: same time
/// power, constant scaled by p^{(4−α)/(3−α)}. Flagged as a conjecture and
/// never used as a verification target.
#[allow(non_snake_case)]
pub fn predict_logEup_rate(p: u32, r: &RateInputs) -> Result<ConjecturedRate, AsymptError> {
    if p == 0 {
        return Err(AsymptError::InvalidParameter("moment order must be ≥ 1".into()));
    }
    let plain = predict_logEu_rate(r)?;
    let scale = (p as f64).powf((4.0 - r.alpha) / (3.0 - r.alpha));
    Ok(ConjecturedRate {
        exponent: plain.exponent,
        constant: scale * plain.constant,
        conjecture: true,
    })
}

/// Limiting value γ·θ^{1/γ} of the Mittag-Leffler log-sum rate.
pub fn mittag_leffler_limit(theta: f64, gamma_pow: f64) -> f64 {
    gamma_pow * theta.powf(1.0 / gamma_pow)
}

/// b^{−1/γ}·log Σₙ θⁿbⁿ/(n!)^γ for each b, summed in log space until the
/// tail is below 1e−16 of the peak term. The sequence approaches γθ^{1/γ}.
pub fn mittag_leffler_rate(
    theta: f64,
    gamma_pow: f64,
    b_list: &[f64],
) -> Result<Vec<(f64, f64)>, AsymptError> {
    if !(theta > 0.0) || !(gamma_pow > 0.0) {
        return Err(AsymptError::InvalidParameter("θ and γ must be > 0".into()));
    }
    if b_list.is_empty() || b_list.windows(2).any(|w| w[1] <= w[0]) || !(b_list[0] > 0.0) {
        return Err(AsymptError::InvalidParameter(
            "b values must be positive and increasing".into(),
        ));
    }
    let mut out = Vec::with_capacity(b_list.len());
    for &b in b_list {
        let ln_tb = theta.ln() + b.ln();
        // Past the peak term, stop once terms drop 40 e-folds below it.
        let mut terms = vec![0.0f64];
        let mut peak = 0.0f64;
        let mut n = 1usize;
        loop {
            let t = n as f64 * ln_tb - gamma_pow * ln_gamma(n as f64 + 1.0);
            terms.push(t);
            peak = peak.max(t);
            if t < peak - 40.0 {
                break;
            }
            n += 1;
            if n > 2_000_000 {
                return Err(AsymptError::InvalidParameter(
                    "series did not enter its decaying regime".into(),
                ));
            }
        }
        out.push((b, log_sum_exp(&terms) / b.powf(1.0 / gamma_pow)));
    }
    Ok(out)
}

/// n⁻¹·log[(n!)^{−(1−α₀)}·∫_{η^{−2}n}^∞ t^{(1−α₀)n}e^{−ct}dt], evaluated
/// through the log-regularized upper incomplete Gamma so the deep tail
/// (where the plain integral underflows) stays finite; a cutoff so far out
/// that even the log underflows is reported as −∞.
pub fn gamma_tail_negligibility(
    eta: f64,
    n: usize,
    alpha0: f64,
    c: f64,
) -> Result<f64, AsymptError> {
    if !(eta > 0.0) || !(c > 0.0) {
        return Err(AsymptError::InvalidParameter("η and c must be > 0".into()));
    }
    if n == 0 {
        return Err(AsymptError::InvalidParameter("order must be ≥ 1".into()));
    }
    if !(alpha0 > 0.0 && alpha0 < 1.0) {
        return Err(AsymptError::InvalidParameter("time exponent must lie in (0, 1)".into()));
    }
    let nf = n as f64;
    let a = (1.0 - alpha0) * nf + 1.0;
    let cutoff = nf / (eta * eta);
    // ∫_{x₀}^∞ t^{a−1}e^{−ct}dt = c^{−a}·Γ(a)·Q(a, c·x₀).
    let ln_integral = ln_gamma(a) - a * c.ln() + ln_gamma_upper_q(a, c * cutoff);
    Ok((ln_integral - (1.0 - alpha0) * ln_gamma(nf + 1.0)) / nf)
}

/// Scaling-trend report for the lowest nonvanishing moment: a power-law fit
/// of the second Stratonovich moment across the time grid, alongside the
/// order-one slice of the predicted growth base. The two numbers live at
/// opposite ends of the order index (n = 1 versus n → ∞), so the comparison
/// is informational, never an equality assertion.
#[derive(Debug, Clone)]
pub struct SmallNReport {
    pub exponent_fit: f64,
    pub exponent_predicted: f64,
    pub amplitude: f64,
    pub prefactor_base_n1: f64,
    /// Always true: the amplitude/prefactor comparison is a trend report.
    pub informational: bool,
    pub samples: Vec<(f64, f64)>,
}

/// Fit E S₂(·, t, 0) = A·t^{4−α−α₀} over the time grid for a
/// scale-homogeneous covariance, and report A next to the order-one
/// prefactor slice (with ℳ taken from the grid solver).
pub fn small_n_consistency(
    orders: &[usize],
    m: &SpectralMeasure,
    alpha0: f64,
    t_grid: &[f64],
) -> Result<SmallNReport, AsymptError> {
    if orders != [1] {
        return Err(AsymptError::InvalidParameter(
            "only the order-one trend report is defined".into(),
        ));
    }
    let alpha = match m {
        SpectralMeasure::RieszRadial { alpha, d: 1, .. } => *alpha,
        SpectralMeasure::DiracSpace => 1.0,
        _ => {
            return Err(AsymptError::InvalidParameter(
                "the trend report needs a scale-homogeneous covariance in dimension 1".into(),
            ))
        }
    };
    if t_grid.len() < 2 || t_grid.windows(2).any(|w| w[1] <= w[0]) || !(t_grid[0] > 0.0) {
        return Err(AsymptError::InvalidParameter(
            "time grid must hold at least two increasing positive values".into(),
        ));
    }
    let mut samples = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        samples.push((t, s2_expectation_reduced(t, m, alpha0)?));
    }
    // Least-squares fit of log v = log A + slope·log t.
    let logs: Vec<(f64, f64)> = samples
        .iter()
        .map(|&(t, v)| {
            if v > 0.0 {
                Ok((t.ln(), v.ln()))
            } else {
                Err(AsymptError::InvalidParameter(format!(
                    "moment value {v} at t = {t} is not positive"
                )))
            }
        })
        .collect::<Result<_, _>>()?;
    let k = logs.len() as f64;
    let sx: f64 = logs.iter().map(|p| p.0).sum();
    let sy: f64 = logs.iter().map(|p| p.1).sum();
    let sxx: f64 = logs.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = logs.iter().map(|p| p.0 * p.1).sum();
    let slope = (k * sxy - sx * sy) / (k * sxx - sx * sx);
    let intercept = (sy - slope * sx) / k;

    let m_sol = solve(FunctionalKind::M, m, alpha0, 0.0, &GridConfig::default(), None, 3000, 1e-8)?;
    let inputs = RateInputs::with_m(alpha, alpha0, 1, m_sol.value.max(0.0));
    let base = moment_growth_base(&inputs)?;

    Ok(SmallNReport {
        exponent_fit: slope,
        exponent_predicted: 4.0 - alpha - alpha0,
        amplitude: intercept.exp(),
        prefactor_base_n1: base,
        informational: true,
        samples,
    })
}
