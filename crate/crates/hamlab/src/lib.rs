//! Numerical verification lab for a wave equation driven by a rough
//! multiplicative Gaussian noise (fractional in time, spectrally described in
//! space).
//!
//! The crate is organized around the quantities that show up when the moments
//! of such an equation are expanded into multiple Stratonovich integrals:
//!
//! * [`kernels`] — spectral measures, their covariance functions, mollified
//!   variants, time kernels with spectral truncation, and the integrability
//!   conditions that decide which stochastic constructions make sense.
//! * [`wavegreen`] — the wave fundamental solution in d = 1, 2, 3, its Fourier
//!   transform, mass and scaling identities, and the Laplace-transform
//!   subordination identity connecting it to the heat kernel.
//! * [`wick`] — pair partitions and Gaussian product moments.
//! * [`moments`] — expectations of the second-order Stratonovich term by two
//!   independent routes, the chaos L² norm, and the sine-integral facts the
//!   positivity arguments rest on.
//! * [`strat_bound`] — damped space-time norms of the wave kernel, their
//!   closed spectral forms, and the recursive certificate that bounds the
//!   pairing integrals appearing in moment expansions.
//! * [`localtime`] — Brownian/Cauchy path simulation and the mollified,
//!   complex-kernel, and time-fractional Hamiltonian functionals, plus the
//!   Laplace-domain representation check tying them to `moments`.
//! * [`variational`] — projected gradient ascent for the variational constants
//!   that govern the large-time asymptotics, and the algebra relating them.
//! * [`asympt`] — the large-time rate predictors, Mittag-Leffler rate
//!   extraction, and tail-negligibility diagnostics.
//! * [`quad`] — the shared quadrature/special-function toolkit (Gauss-Legendre
//!   caches, adaptive Simpson, log-space incomplete gamma, oscillatory tails).
//!
//! Everything is deterministic: random elements are driven by caller-supplied
//! seeds through counter-based generators, and all estimators define their
//! batch structure independently of thread count.

pub mod asympt;
pub mod kernels;
pub mod localtime;
pub mod moments;
pub mod quad;
pub mod strat_bound;
pub mod variational;
pub mod wavegreen;
pub mod wick;
