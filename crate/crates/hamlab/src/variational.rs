//! Discretized solvers for the variational constants behind the long-time
//! exponents: the square-root form ℳ, the energy forms 𝓔₀ and 𝓔_δ, the
//! time-independent form 𝓗, and the algebraic relations connecting them.
//!
//! All problems are maximizations over fields g(s, x) on [0,1] × [−L, L]
//! with every time slice normalized in L². Time is discretized into S cells
//! with g piecewise constant per slice; space is a 1-d grid.

use sha2::{Digest, Sha256};
use statrs::function::gamma::gamma;
use thiserror::Error;

use crate::kernels::{KernelError, SpectralMeasure};
use crate::quad::{integrate_gl, ln_gamma_lower_p};

#[derive(Debug, Error)]
pub enum VariationalError {
    #[error("slice {slice} has L2 mass {mass}, not 1")]
    NotNormalized { slice: usize, mass: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("solver stalled before reaching the convergence window")]
    Stalled,
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

/// Spatial boundary handling of the truncated box.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Boundary {
    /// g = 0 at ±L (the solver's convention; the box is a surrogate for ℝ).
    Dirichlet,
    /// Wrap-around differences (used by the flat-field identities).
    Periodic,
}

/// A time-sliced field on the box [−L, L]: S slices of N space values,
/// with the constraint Σ_x g²·h_x = 1 per slice.
#[derive(Debug, Clone)]
pub struct FieldGrid {
    pub s: usize,
    pub n: usize,
    pub l: f64,
    pub boundary: Boundary,
    values: Vec<f64>,
}

impl FieldGrid {
    pub fn new(
        s: usize,
        n: usize,
        l: f64,
        boundary: Boundary,
        values: Vec<f64>,
    ) -> Result<Self, VariationalError> {
        if s == 0 || n < 3 {
            return Err(VariationalError::InvalidParameter(
                "need at least one slice and three space points".into(),
            ));
        }
        if !(l > 0.0) || !l.is_finite() {
            return Err(VariationalError::InvalidParameter("box half-width must be > 0".into()));
        }
        if values.len() != s * n {
            return Err(VariationalError::InvalidParameter(format!(
                "value buffer holds {} entries, grid needs {}",
                values.len(),
                s * n
            )));
        }
        Ok(FieldGrid { s, n, l, boundary, values })
    }

    /// Time cell width (slices tile [0, 1]).
    pub fn h_s(&self) -> f64 {
        1.0 / self.s as f64
    }

    /// Space mesh width. Dirichlet grids keep ghost zeros at ±L, so the N
    /// stored points are interior; periodic grids tile the circle.
    pub fn h_x(&self) -> f64 {
        match self.boundary {
            Boundary::Dirichlet => 2.0 * self.l / (self.n + 1) as f64,
            Boundary::Periodic => 2.0 * self.l / self.n as f64,
        }
    }

    /// Grid point coordinates.
    pub fn xs(&self) -> Vec<f64> {
        let h = self.h_x();
        match self.boundary {
            Boundary::Dirichlet => (0..self.n).map(|k| -self.l + (k + 1) as f64 * h).collect(),
            Boundary::Periodic => (0..self.n).map(|k| -self.l + k as f64 * h).collect(),
        }
    }

    pub fn slice(&self, i: usize) -> &[f64] {
        &self.values[i * self.n..(i + 1) * self.n]
    }

    fn slice_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.values[i * self.n..(i + 1) * self.n]
    }

    pub fn slice_mass(&self, i: usize) -> f64 {
        let h = self.h_x();
        self.slice(i).iter().map(|g| g * g * h).sum()
    }

    /// Rescale every slice onto the constraint set. Errors if a slice has no
    /// mass to normalize.
    pub fn normalize(&mut self) -> Result<(), VariationalError> {
        let h = self.h_x();
        for i in 0..self.s {
            let mass: f64 = self.slice(i).iter().map(|g| g * g * h).sum();
            if !(mass > 0.0) || !mass.is_finite() {
                return Err(VariationalError::InvalidParameter(format!(
                    "slice {i} has non-normalizable mass {mass}"
                )));
            }
            let inv = mass.sqrt().recip();
            for g in self.slice_mut(i) {
                *g *= inv;
            }
        }
        Ok(())
    }

    fn check_normalized(&self) -> Result<(), VariationalError> {
        for i in 0..self.s {
            let mass = self.slice_mass(i);
            if (mass - 1.0).abs() > 1e-10 {
                return Err(VariationalError::NotNormalized { slice: i, mass });
            }
        }
        Ok(())
    }

    /// SHA-256 over the fixed-precision value rows; stable regression key.
    pub fn checksum(&self) -> String {
        let mut hasher = Sha256::new();
        for i in 0..self.s {
            let line: Vec<String> = self.slice(i).iter().map(|v| format!("{v:.12e}")).collect();
            hasher.update(line.join(","));
            hasher.update("\n");
        }
        let out = hasher.finalize();
        out.iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Which functional a grid is evaluated under.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FunctionalKind {
    /// √(time-singular interaction) − full gradient energy.
    M,
    /// time-singular interaction − half gradient energy.
    E0,
    /// λ-truncated time kernel instead of |s−r|^{−α₀}, − half gradient.
    Edelta,
    /// Single-slice, no time kernel: space interaction − half gradient.
    H,
}

/// Internal variant: the public kinds plus the half-gradient square-root
/// functional used by the rescaling identity.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Variant {
    Public(FunctionalKind),
    MHalfGrad,
}

#[derive(Debug, Clone)]
pub struct VariationalSolution {
    pub value: f64,
    pub field: FieldGrid,
    pub iterations: usize,
    pub converged: bool,
    pub functional: FunctionalKind,
    pub delta: Option<f64>,
}

#[derive(Debug, Clone, Copy)]
pub struct GridConfig {
    pub slices: usize,
    pub space_points: usize,
    pub box_half: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig { slices: 12, space_points: 161, box_half: 8.0 }
    }
}

// ---------------------------------------------------------------------------
// Kernels on the grid.
// ---------------------------------------------------------------------------

/// λ-truncated fractional time kernel Γ(α₀)⁻¹∫₀^{1/δ} e^{−λ|u|} λ^{α₀−1} dλ
/// = |u|^{−α₀} P(α₀, |u|/δ). Bounded at 0, dominated by |u|^{−α₀}.
pub fn gamma0_delta(alpha0: f64, delta: f64, u: f64) -> f64 {
    let au = u.abs();
    if au == 0.0 {
        return delta.powf(-alpha0) / gamma(alpha0 + 1.0);
    }
    au.powf(-alpha0) * ln_gamma_lower_p(alpha0, au / delta).exp()
}

/// Second antiderivative of |u|^{−α₀}: F'' = u^{−α₀} on u > 0, F(0) = 0.
fn power_f2(alpha0: f64, u: f64) -> f64 {
    if u <= 0.0 {
        return 0.0;
    }
    if (alpha0 - 1.0).abs() < 1e-9 {
        u * (u.ln() - 1.0)
    } else {
        u.powf(2.0 - alpha0) / ((1.0 - alpha0) * (2.0 - alpha0))
    }
}

/// Exact integrals of the time kernel over slice-pair cells: entry m holds
/// ∫∫_{cell_i × cell_j} k(s−r) ds dr for |i−j| = m.
fn time_cell_weights(
    kind: Variant,
    s: usize,
    alpha0: f64,
    delta: f64,
) -> Result<Vec<f64>, VariationalError> {
    let h = 1.0 / s as f64;
    let mut w = Vec::with_capacity(s);
    match kind {
        Variant::Public(FunctionalKind::Edelta) => {
            if !(delta > 0.0) {
                return Err(VariationalError::InvalidParameter(
                    "the truncated kernel needs δ > 0".into(),
                ));
            }
            if !(alpha0 > 0.0 && alpha0 < 1.0) {
                return Err(VariationalError::InvalidParameter(
                    "the truncated kernel needs 0 < α₀ < 1".into(),
                ));
            }
            // Tent-weighted integrals of the bounded kernel, split at the
            // tent kink.
            w.push(2.0 * integrate_gl(|u| (h - u) * gamma0_delta(alpha0, delta, u), 0.0, h, 32));
            for m in 1..s {
                let c = m as f64 * h;
                let lo = integrate_gl(
                    |u| (h - (u - c).abs()) * gamma0_delta(alpha0, delta, u),
                    c - h,
                    c,
                    32,
                );
                let hi = integrate_gl(
                    |u| (h - (u - c).abs()) * gamma0_delta(alpha0, delta, u),
                    c,
                    c + h,
                    32,
                );
                w.push(lo + hi);
            }
        }
        Variant::Public(FunctionalKind::H) => {
            return Err(VariationalError::InvalidParameter(
                "the single-slice functional has no time kernel".into(),
            ));
        }
        _ => {
            if !(0.0..1.0).contains(&alpha0) {
                return Err(VariationalError::InvalidParameter(
                    "time exponent must lie in [0, 1)".into(),
                ));
            }
            w.push(2.0 * power_f2(alpha0, h));
            for m in 1..s {
                let c = m as f64 * h;
                w.push(power_f2(alpha0, c + h) - 2.0 * power_f2(alpha0, c)
                    + power_f2(alpha0, c - h));
            }
        }
    }
    Ok(w)
}

/// Spatial covariance applied to slice mass densities q = g², as the grid
/// operator (Vq)[k] = Σ_l γ(x_k − x_l) q[l] h_x (with the collapsed measure
/// reducing to the identity density and the power measure cell-averaged).
enum SpaceKernel {
    PointMass,
    Atomic { weights: Vec<f64>, cos_t: Vec<Vec<f64>>, sin_t: Vec<Vec<f64>> },
    Toeplitz { v: Vec<f64> },
}

impl SpaceKernel {
    fn build(m: &SpectralMeasure, g: &FieldGrid) -> Result<Self, VariationalError> {
        m.validate()?;
        if m.dim() != 1 {
            return Err(VariationalError::InvalidParameter(
                "the solver supports one space dimension only".into(),
            ));
        }
        let xs = g.xs();
        let h = g.h_x();
        match m {
            SpectralMeasure::DiracSpace => Ok(SpaceKernel::PointMass),
            SpectralMeasure::FiniteAtomic { atoms } => {
                let mut weights = Vec::new();
                let mut cos_t = Vec::new();
                let mut sin_t = Vec::new();
                for a in atoms {
                    let xi = a.freq[0];
                    weights.push(a.weight);
                    cos_t.push(xs.iter().map(|x| (xi * x).cos()).collect());
                    sin_t.push(xs.iter().map(|x| (xi * x).sin()).collect());
                }
                Ok(SpaceKernel::Atomic { weights, cos_t, sin_t })
            }
            SpectralMeasure::RieszRadial { alpha, c, d } => {
                // Exact cell averages of the power kernel per offset class;
                // the diagonal cell average is finite for α < 1... and for
                // α < 2 via the second-antiderivative form.
                let cprime = crate::kernels::riesz_cprime(*alpha, *c, *d);
                let f2 = |u: f64| -> f64 {
                    if u <= 0.0 {
                        0.0
                    } else if (alpha - 1.0).abs() < 1e-9 {
                        u * (u.ln() - 1.0)
                    } else {
                        u.powf(2.0 - alpha) / ((1.0 - alpha) * (2.0 - alpha))
                    }
                };
                let v: Vec<f64> = (0..g.n)
                    .map(|m0| {
                        let c0 = m0 as f64 * h;
                        let cell = if m0 == 0 {
                            2.0 * f2(h)
                        } else {
                            f2(c0 + h) - 2.0 * f2(c0) + f2(c0 - h)
                        };
                        cprime * cell / (h * h)
                    })
                    .collect();
                Ok(SpaceKernel::Toeplitz { v })
            }
            SpectralMeasure::TruncatedRadial { rho, cutoff } => {
                let v: Vec<f64> = (0..g.n)
                    .map(|m0| {
                        let x = m0 as f64 * h;
                        if m0 == 0 {
                            rho * cutoff / std::f64::consts::PI
                        } else {
                            rho * (cutoff * x).sin() / (std::f64::consts::PI * x)
                        }
                    })
                    .collect();
                Ok(SpaceKernel::Toeplitz { v })
            }
        }
    }

    /// (Vq)[k] = Σ_l γ(x_k − x_l) q[l] h_x.
    fn apply(&self, q: &[f64], h_x: f64, out: &mut [f64]) {
        match self {
            SpaceKernel::PointMass => out.copy_from_slice(q),
            SpaceKernel::Atomic { weights, cos_t, sin_t } => {
                out.iter_mut().for_each(|o| *o = 0.0);
                for ((w, ct), st) in weights.iter().zip(cos_t).zip(sin_t) {
                    let mut cq = 0.0;
                    let mut sq = 0.0;
                    for l in 0..q.len() {
                        cq += ct[l] * q[l];
                        sq += st[l] * q[l];
                    }
                    cq *= h_x;
                    sq *= h_x;
                    for k in 0..q.len() {
                        out[k] += w * (ct[k] * cq + st[k] * sq);
                    }
                }
            }
            SpaceKernel::Toeplitz { v } => {
                let n = q.len();
                for k in 0..n {
                    let mut acc = 0.0;
                    for l in 0..n {
                        acc += v[k.abs_diff(l)] * q[l];
                    }
                    out[k] = acc * h_x;
                }
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Functional evaluation.
// ---------------------------------------------------------------------------

/// Gradient energy Σ_s w_s Σ_edges ((g_{k+1} − g_k)/h_x)²·h_x, differences
/// centered on the cell edges (the node-centered stencil has a null mode at
/// the grid Nyquist frequency, which a maximizer exploits). Dirichlet grids
/// include the two boundary edges against the ghost zeros; w_s is the slice
/// width for time-dependent fields and 1 for single-slice fields.
pub fn gradient_energy(g: &FieldGrid) -> f64 {
    let h = g.h_x();
    let w_s = if g.s == 1 { 1.0 } else { g.h_s() };
    let mut total = 0.0;
    for i in 0..g.s {
        let row = g.slice(i);
        let mut acc = 0.0;
        match g.boundary {
            Boundary::Dirichlet => {
                acc += row[0] * row[0] + row[g.n - 1] * row[g.n - 1];
                for k in 0..g.n - 1 {
                    let d = row[k + 1] - row[k];
                    acc += d * d;
                }
            }
            Boundary::Periodic => {
                for k in 0..g.n {
                    let d = row[(k + 1) % g.n] - row[k];
                    acc += d * d;
                }
            }
        }
        total += w_s * acc / h;
    }
    total
}

struct Workspace {
    kernel: SpaceKernel,
    tw: Option<Vec<f64>>,
    q: Vec<f64>,
    vq: Vec<f64>,
}

impl Workspace {
    fn build(
        variant: Variant,
        g: &FieldGrid,
        m: &SpectralMeasure,
        alpha0: f64,
        delta: f64,
    ) -> Result<Self, VariationalError> {
        let kernel = SpaceKernel::build(m, g)?;
        let tw = match variant {
            Variant::Public(FunctionalKind::H) => {
                if g.s != 1 {
                    return Err(VariationalError::InvalidParameter(
                        "the single-slice functional needs exactly one slice".into(),
                    ));
                }
                None
            }
            v => Some(time_cell_weights(v, g.s, alpha0, delta)?),
        };
        Ok(Workspace { kernel, tw, q: vec![0.0; g.s * g.n], vq: vec![0.0; g.s * g.n] })
    }

    /// Interaction term of the functional for the current field.
    fn interaction(&mut self, g: &FieldGrid) -> f64 {
        let n = g.n;
        let h = g.h_x();
        for (q, v) in self.q.iter_mut().zip(&g.values) {
            *q = v * v;
        }
        for i in 0..g.s {
            let (qs, vs) = (&self.q[i * n..(i + 1) * n], &mut self.vq[i * n..(i + 1) * n]);
            self.kernel.apply(qs, h, vs);
        }
        match &self.tw {
            None => {
                let q = &self.q[..n];
                let vq = &self.vq[..n];
                q.iter().zip(vq).map(|(a, b)| a * b).sum::<f64>() * h
            }
            Some(tw) => {
                let mut total = 0.0;
                for i in 0..g.s {
                    for j in 0..g.s {
                        let w = tw[i.abs_diff(j)];
                        let qi = &self.q[i * n..(i + 1) * n];
                        let vj = &self.vq[j * n..(j + 1) * n];
                        total += w * qi.iter().zip(vj).map(|(a, b)| a * b).sum::<f64>();
                    }
                }
                total * h
            }
        }
    }

    /// d(interaction)/dg into `out` (assumes `interaction` ran on this g).
    fn interaction_gradient(&self, g: &FieldGrid, out: &mut [f64]) {
        let n = g.n;
        let h = g.h_x();
        match &self.tw {
            None => {
                for k in 0..n {
                    out[k] = 4.0 * g.values[k] * self.vq[k] * h;
                }
            }
            Some(tw) => {
                for i in 0..g.s {
                    for k in 0..n {
                        let mut acc = 0.0;
                        for j in 0..g.s {
                            acc += tw[i.abs_diff(j)] * self.vq[j * n + k];
                        }
                        out[i * n + k] = 4.0 * g.values[i * n + k] * acc * h;
                    }
                }
            }
        }
    }
}

fn grad_coeff(variant: Variant) -> f64 {
    match variant {
        Variant::Public(FunctionalKind::M) => 1.0,
        _ => 0.5,
    }
}

fn eval_variant(
    variant: Variant,
    ws: &mut Workspace,
    g: &FieldGrid,
) -> f64 {
    let inter = ws.interaction(g);
    let ge = gradient_energy(g);
    match variant {
        Variant::Public(FunctionalKind::M) | Variant::MHalfGrad => {
            inter.max(0.0).sqrt() - grad_coeff(variant) * ge
        }
        _ => inter - 0.5 * ge,
    }
}

/// Evaluate one of the variational functionals on a normalized field.
pub fn eval_functional(
    kind: FunctionalKind,
    g: &FieldGrid,
    m: &SpectralMeasure,
    alpha0: f64,
    delta: f64,
) -> Result<f64, VariationalError> {
    g.check_normalized()?;
    let variant = Variant::Public(kind);
    let mut ws = Workspace::build(variant, g, m, alpha0, delta)?;
    Ok(eval_variant(variant, &mut ws, g))
}

// ---------------------------------------------------------------------------
// Projected gradient ascent.
// ---------------------------------------------------------------------------

/// d(gradient_energy)/dg into `out` (the discrete Laplacian form).
fn gradient_energy_gradient(g: &FieldGrid, out: &mut [f64]) {
    let h = g.h_x();
    let w_s = if g.s == 1 { 1.0 } else { g.h_s() };
    for i in 0..g.s {
        let row = g.slice(i);
        let o = &mut out[i * g.n..(i + 1) * g.n];
        for k in 0..g.n {
            let left = if k > 0 {
                row[k - 1]
            } else {
                match g.boundary {
                    Boundary::Dirichlet => 0.0,
                    Boundary::Periodic => row[g.n - 1],
                }
            };
            let right = if k + 1 < g.n {
                row[k + 1]
            } else {
                match g.boundary {
                    Boundary::Dirichlet => 0.0,
                    Boundary::Periodic => row[0],
                }
            };
            o[k] = w_s * 2.0 * (2.0 * row[k] - left - right) / h;
        }
    }
}

fn gaussian_field(cfg: &GridConfig, sigma: f64) -> FieldGrid {
    let mut g = FieldGrid::new(
        cfg.slices,
        cfg.space_points,
        cfg.box_half,
        Boundary::Dirichlet,
        vec![0.0; cfg.slices * cfg.space_points],
    )
    .expect("valid config");
    let xs = g.xs();
    for i in 0..g.s {
        let row = g.slice_mut(i);
        for (k, x) in xs.iter().enumerate() {
            row[k] = (-x * x / (2.0 * sigma * sigma)).exp();
        }
    }
    g.normalize().expect("gaussian has mass");
    g
}

fn solve_variant(
    variant: Variant,
    m: &SpectralMeasure,
    alpha0: f64,
    delta: f64,
    cfg: &GridConfig,
    init: Option<&FieldGrid>,
    max_iter: usize,
    tol: f64,
) -> Result<VariationalSolution, VariationalError> {
    if !(tol > 0.0) {
        return Err(VariationalError::InvalidParameter("tolerance must be > 0".into()));
    }
    let cfg = if matches!(variant, Variant::Public(FunctionalKind::H)) {
        GridConfig { slices: 1, ..*cfg }
    } else {
        *cfg
    };
    let mut g = match init {
        Some(f) => {
            if f.s != cfg.slices || f.n != cfg.space_points || f.boundary != Boundary::Dirichlet {
                return Err(VariationalError::InvalidParameter(
                    "initial field does not match the grid configuration".into(),
                ));
            }
            let mut f = f.clone();
            f.normalize()?;
            f
        }
        None => {
            // Coarse σ line search over Gaussian initial fields.
            let sigmas = [0.35, 0.5, 0.7, 1.0, 1.4, 2.0, 2.8];
            let mut best: Option<(f64, FieldGrid)> = None;
            for &s in &sigmas {
                if s > cfg.box_half / 2.5 {
                    continue;
                }
                let cand = gaussian_field(&cfg, s);
                let mut ws = Workspace::build(variant, &cand, m, alpha0, delta)?;
                let v = eval_variant(variant, &mut ws, &cand);
                if best.as_ref().map_or(true, |(bv, _)| v > *bv) {
                    best = Some((v, cand));
                }
            }
            best.expect("sigma grid nonempty").1
        }
    };

    let mut ws = Workspace::build(variant, &g, m, alpha0, delta)?;
    let mut value = eval_variant(variant, &mut ws, &g);
    let mut grad = vec![0.0; g.s * g.n];
    let mut ge_grad = vec![0.0; g.s * g.n];
    let mut history = vec![value];
    let mut converged = false;
    let mut iterations = 0;
    // Step length persists across iterations (doubling on success) so the
    // ascent adapts to the h_x·h_s scaling of the gradient entries.
    let mut step = 0.5;

    for _ in 0..max_iter {
        // Ascent direction on the smooth part (the square root enters by the
        // chain rule away from zero interaction).
        let inter = ws.interaction(&g);
        ws.interaction_gradient(&g, &mut grad);
        let sqrt_scale = match variant {
            Variant::Public(FunctionalKind::M) | Variant::MHalfGrad => {
                if inter > 0.0 {
                    0.5 / inter.sqrt()
                } else {
                    0.0
                }
            }
            _ => 1.0,
        };
        gradient_energy_gradient(&g, &mut ge_grad);
        let gc = grad_coeff(variant);
        for (d, ge) in grad.iter_mut().zip(&ge_grad) {
            *d = *d * sqrt_scale - gc * ge;
        }

        // Backtracking projected step; the step grows only when accepted
        // without backtracking, so it settles at the natural scale instead
        // of oscillating around it.
        let mut trial_step = step;
        let mut accepted = false;
        for attempt in 0..40 {
            let mut cand = g.clone();
            for (v, d) in cand.values.iter_mut().zip(&grad) {
                *v += trial_step * d;
            }
            if cand.normalize().is_err() {
                trial_step *= 0.5;
                continue;
            }
            let cand_value = eval_variant(variant, &mut ws, &cand);
            if cand_value > value {
                g = cand;
                value = cand_value;
                accepted = true;
                step = if attempt == 0 { (trial_step * 2.0).min(1e6) } else { trial_step };
                break;
            }
            trial_step *= 0.5;
        }
        iterations += 1;
        if !accepted {
            // No ascent direction at line-search resolution: grid-local max.
            converged = true;
            break;
        }
        history.push(value);
        if history.len() > 20 {
            let prev = history[history.len() - 21];
            if value - prev < tol * value.abs().max(1.0) {
                converged = true;
                break;
            }
        }
    }

    // Leave the workspace consistent with the final field.
    let final_value = eval_variant(variant, &mut ws, &g);
    let (functional, delta_out) = match variant {
        Variant::Public(FunctionalKind::Edelta) => (FunctionalKind::Edelta, Some(delta)),
        Variant::Public(k) => (k, None),
        Variant::MHalfGrad => (FunctionalKind::M, None),
    };
    Ok(VariationalSolution {
        value: final_value,
        field: g,
        iterations,
        converged,
        functional,
        delta: delta_out,
    })
}

/// Projected gradient ascent for the chosen functional: gradient step on the
/// smooth part, per-slice L² renormalization, backtracking from step 0.5.
/// A run that exhausts max_iter is returned with converged = false.
#[allow(clippy::too_many_arguments)]
pub fn solve(
    kind: FunctionalKind,
    m: &SpectralMeasure,
    alpha0: f64,
    delta: f64,
    cfg: &GridConfig,
    init: Option<&FieldGrid>,
    max_iter: usize,
    tol: f64,
) -> Result<VariationalSolution, VariationalError> {
    solve_variant(Variant::Public(kind), m, alpha0, delta, cfg, init, max_iter, tol)
}

// ---------------------------------------------------------------------------
// Algebraic relations and the rescaling check.
// ---------------------------------------------------------------------------

/// 𝓔₀ from ℳ: ((2−α)/2)·2^{2α/(2−α)}·(4ℳ/(4−α))^{(4−α)/(2−α)}.
#[allow(non_snake_case)]
pub fn relation_E0_M(m_val: f64, alpha: f64) -> Result<f64, VariationalError> {
    if !(alpha > 0.0 && alpha < 2.0) {
        return Err(VariationalError::InvalidParameter(
            "the relation needs 0 < α < 2".into(),
        ));
    }
    if !(m_val >= 0.0) {
        return Err(VariationalError::InvalidParameter("ℳ must be >= 0".into()));
    }
    Ok((2.0 - alpha) / 2.0
        * 2.0f64.powf(2.0 * alpha / (2.0 - alpha))
        * (4.0 * m_val / (4.0 - alpha)).powf((4.0 - alpha) / (2.0 - alpha)))
}

/// Algebraic inverse of [`relation_E0_M`].
#[allow(non_snake_case)]
pub fn invert_relation_E0_M(e0_val: f64, alpha: f64) -> Result<f64, VariationalError> {
    if !(alpha > 0.0 && alpha < 2.0) {
        return Err(VariationalError::InvalidParameter(
            "the relation needs 0 < α < 2".into(),
        ));
    }
    if !(e0_val >= 0.0) {
        return Err(VariationalError::InvalidParameter("𝓔₀ must be >= 0".into()));
    }
    let base = e0_val * 2.0 / (2.0 - alpha) * 2.0f64.powf(-2.0 * alpha / (2.0 - alpha));
    Ok((4.0 - alpha) / 4.0 * base.powf((2.0 - alpha) / (4.0 - alpha)))
}

#[derive(Debug, Clone, Copy)]
pub struct RescaleCheck {
    pub m_tilde: f64,
    pub predicted: f64,
}

/// Solve the half-gradient square-root functional ℳ̃ and compare against the
/// scaling prediction 2^{α/(4−α)}·ℳ for a scale-homogeneous covariance.
pub fn rescale_covariance_check(
    m: &SpectralMeasure,
    alpha0: f64,
    cfg: &GridConfig,
) -> Result<RescaleCheck, VariationalError> {
    let alpha = match m {
        SpectralMeasure::RieszRadial { alpha, .. } => *alpha,
        // The collapsed covariance is the α = 1 homogeneous case in d = 1.
        SpectralMeasure::DiracSpace => 1.0,
        _ => {
            return Err(VariationalError::InvalidParameter(
                "the rescaling identity needs a scale-homogeneous covariance".into(),
            ))
        }
    };
    let base = solve_variant(
        Variant::Public(FunctionalKind::M),
        m,
        alpha0,
        0.0,
        cfg,
        None,
        3000,
        1e-9,
    )?;
    let tilde =
        solve_variant(Variant::MHalfGrad, m, alpha0, 0.0, cfg, None, 3000, 1e-9)?;
    if !base.converged || !tilde.converged {
        return Err(VariationalError::Stalled);
    }
    Ok(RescaleCheck {
        m_tilde: tilde.value,
        predicted: 2.0f64.powf(alpha / (4.0 - alpha)) * base.value,
    })
}

/// Twelve analytic trial fields (time-constant profiles, slice-normalized on
/// the grid): Gaussians, sech bumps, cosine bumps, and a triangle.
pub fn trial_library(cfg: &GridConfig) -> Vec<(String, FieldGrid)> {
    let mut out = Vec::new();
    let build = |name: String, f: &dyn Fn(f64) -> f64| -> (String, FieldGrid) {
        let mut g = FieldGrid::new(
            cfg.slices,
            cfg.space_points,
            cfg.box_half,
            Boundary::Dirichlet,
            vec![0.0; cfg.slices * cfg.space_points],
        )
        .expect("valid config");
        let xs = g.xs();
        for i in 0..g.s {
            let row = g.slice_mut(i);
            for (k, x) in xs.iter().enumerate() {
                row[k] = f(*x);
            }
        }
        g.normalize().expect("trial has mass");
        (name, g)
    };
    for sigma in [0.35, 0.5, 0.7, 1.0, 1.4, 2.0] {
        out.push(build(format!("gaussian σ={sigma}"), &move |x: f64| {
            (-x * x / (2.0 * sigma * sigma)).exp()
        }));
    }
    for lambda in [0.5, 1.0, 1.5] {
        out.push(build(format!("sech λ={lambda}"), &move |x: f64| {
            (lambda * x).cosh().recip()
        }));
    }
    for a in [2.0, 4.0] {
        out.push(build(format!("cosine bump a={a}"), &move |x: f64| {
            if x.abs() < a {
                (std::f64::consts::PI * x / (2.0 * a)).cos()
            } else {
                0.0
            }
        }));
    }
    out.push(build("triangle a=3".into(), &|x: f64| (1.0 - x.abs() / 3.0).max(0.0)));
    out
}
