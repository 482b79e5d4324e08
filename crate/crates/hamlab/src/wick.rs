//! Pair-partition combinatorics and the product-moment formula for jointly
//! Gaussian vectors: E[g₁⋯g_{2n}] = Σ over pairings Π cov(g_j, g_k), with
//! odd products vanishing. A Monte Carlo sampler cross-checks the algebraic
//! value on positive semidefinite covariances.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum WickError {
    #[error("enumeration bound exceeded: order {0} would list more than ~10^6 pairings")]
    OrderTooLarge(usize),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("covariance is not symmetric at ({i},{j}): {a} vs {b}")]
    NotSymmetric { i: usize, j: usize, a: f64, b: f64 },
    #[error("covariance is not positive semidefinite (pivot {pivot:e} at column {col})")]
    NotPsd { col: usize, pivot: f64 },
}

/// A perfect matching of {1, …, 2n}: n disjoint pairs (j, k) with j < k,
/// listed with the smaller first elements ascending (the canonical
/// smallest-unpaired-first enumeration order).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairPartition {
    pub pairs: Vec<(usize, usize)>,
}

impl PairPartition {
    /// Number of pairs n.
    pub fn order(&self) -> usize {
        self.pairs.len()
    }

    /// Validate the defining invariants: disjoint pairs, j < k, covering
    /// 1..=2n exactly.
    pub fn validate(&self) -> bool {
        let n2 = 2 * self.pairs.len();
        let mut seen = vec![false; n2 + 1];
        for &(j, k) in &self.pairs {
            if j >= k || j == 0 || k > n2 || seen[j] || seen[k] {
                return false;
            }
            seen[j] = true;
            seen[k] = true;
        }
        seen[1..].iter().all(|&s| s)
    }
}

/// Number of pairings of 2n points: (2n-1)!! = (2n)!/(2ⁿ n!).
pub fn pairing_count(n: usize) -> u64 {
    let mut c = 1u64;
    let mut k = 1u64;
    for _ in 0..n {
        c *= k;
        k += 2;
    }
    c
}

/// Enumerate all pairings of {1, …, 2n}, pairing the smallest unpaired
/// index first so the order is canonical and stable.
pub fn enumerate_pairings(n: usize) -> Result<Vec<PairPartition>, WickError> {
    if n == 0 {
        return Ok(vec![PairPartition { pairs: vec![] }]);
    }
    if n > 8 {
        return Err(WickError::OrderTooLarge(n));
    }
    let n2 = 2 * n;
    let mut out = Vec::with_capacity(pairing_count(n) as usize);
    let mut used = vec![false; n2 + 1];
    let mut current: Vec<(usize, usize)> = Vec::with_capacity(n);
    fn rec(
        n2: usize,
        used: &mut [bool],
        current: &mut Vec<(usize, usize)>,
        out: &mut Vec<PairPartition>,
    ) {
        let j = match (1..=n2).find(|&i| !used[i]) {
            Some(j) => j,
            None => {
                out.push(PairPartition { pairs: current.clone() });
                return;
            }
        };
        used[j] = true;
        for k in j + 1..=n2 {
            if used[k] {
                continue;
            }
            used[k] = true;
            current.push((j, k));
            rec(n2, used, current, out);
            current.pop();
            used[k] = false;
        }
        used[j] = false;
    }
    rec(n2, &mut used, &mut current, &mut out);
    Ok(out)
}

fn validate_square(cov: &[f64], dim: usize) -> Result<(), WickError> {
    if cov.len() != dim * dim {
        return Err(WickError::DimensionMismatch(format!(
            "expected {}x{} = {} entries, got {}",
            dim,
            dim,
            dim * dim,
            cov.len()
        )));
    }
    let scale = cov.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    for i in 0..dim {
        for j in i + 1..dim {
            let a = cov[i * dim + j];
            let b = cov[j * dim + i];
            if (a - b).abs() > 1e-10 * scale {
                return Err(WickError::NotSymmetric { i, j, a, b });
            }
        }
    }
    Ok(())
}

/// The pairing-sum product moment of a centered Gaussian vector with the
/// given covariance (row-major, dim×dim). Odd dimensions give 0; dimension
/// zero gives the empty product 1. The sum is evaluated by recursive
/// contraction of the first unpaired index, never materializing the pairing
/// list, so no enumeration guard is needed.
pub fn wick_moment(cov: &[f64], dim: usize) -> Result<f64, WickError> {
    validate_square(cov, dim)?;
    if dim % 2 == 1 {
        return Ok(0.0);
    }
    fn contract(cov: &[f64], dim: usize, alive: &mut [bool]) -> f64 {
        let j = match alive.iter().position(|&a| a) {
            Some(j) => j,
            None => return 1.0,
        };
        alive[j] = false;
        let mut acc = 0.0;
        for k in j + 1..dim {
            if !alive[k] {
                continue;
            }
            let c = cov[j * dim + k];
            if c != 0.0 {
                alive[k] = false;
                acc += c * contract(cov, dim, alive);
                alive[k] = true;
            }
        }
        alive[j] = true;
        acc
    }
    let mut alive = vec![true; dim];
    Ok(contract(cov, dim, &mut alive))
}

/// Lower-triangular factor L with cov = L·Lᵀ for a positive semidefinite
/// matrix, tolerating zero pivots (rank deficiency zeroes the column).
fn psd_factor(cov: &[f64], dim: usize) -> Result<Vec<f64>, WickError> {
    let scale = cov.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    let tol = 1e-10 * scale;
    let mut l = vec![0.0f64; dim * dim];
    for j in 0..dim {
        let mut diag = cov[j * dim + j];
        for k in 0..j {
            diag -= l[j * dim + k] * l[j * dim + k];
        }
        if diag < -tol {
            return Err(WickError::NotPsd { col: j, pivot: diag });
        }
        if diag <= tol {
            // Semidefinite direction: leave the whole column at zero.
            continue;
        }
        let root = diag.sqrt();
        l[j * dim + j] = root;
        for i in j + 1..dim {
            let mut v = cov[i * dim + j];
            for k in 0..j {
                v -= l[i * dim + k] * l[j * dim + k];
            }
            l[i * dim + j] = v / root;
        }
    }
    Ok(l)
}

/// Result of the Monte Carlo cross-check of the pairing formula.
#[derive(Debug, Clone, Copy)]
pub struct McCrossCheck {
    pub exact: f64,
    pub mc: f64,
    pub stderr: f64,
}

/// Sample m draws of N(0, cov) (ChaCha-seeded, reproducible) and compare the
/// empirical product moment with the pairing sum; `stderr` comes from 32
/// batch means so the `|exact - mc| ≤ 4·stderr` contract has honest units.
pub fn wick_mc_crosscheck(
    cov: &[f64],
    dim: usize,
    m: usize,
    seed: u64,
) -> Result<McCrossCheck, WickError> {
    validate_square(cov, dim)?;
    if m < 64 {
        return Err(WickError::DimensionMismatch(
            "need at least 64 samples for batch error estimation".into(),
        ));
    }
    let exact = wick_moment(cov, dim)?;
    let l = psd_factor(cov, dim)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let batches = 32usize;
    let per = m / batches;
    let mut batch_means = Vec::with_capacity(batches);
    let mut z = vec![0.0f64; dim];
    for _ in 0..batches {
        let mut acc = 0.0;
        for _ in 0..per {
            for zi in z.iter_mut() {
                *zi = StandardNormal.sample(&mut rng);
            }
            let mut prod = 1.0;
            for i in 0..dim {
                let mut gi = 0.0;
                for k in 0..=i {
                    gi += l[i * dim + k] * z[k];
                }
                prod *= gi;
            }
            acc += prod;
        }
        batch_means.push(acc / per as f64);
    }
    let mc = batch_means.iter().sum::<f64>() / batches as f64;
    // Variance of the grand mean from the spread of the batch means.
    let var = batch_means.iter().map(|b| (b - mc) * (b - mc)).sum::<f64>()
        / ((batches * (batches - 1)) as f64);
    Ok(McCrossCheck { exact, mc, stderr: var.sqrt().max(1e-300) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::Rng;

    #[test]
    fn enumeration_counts_match_double_factorial() {
        let want = [1u64, 1, 3, 15, 105, 945, 10395, 135135];
        for n in 0..=6 {
            let list = enumerate_pairings(n).unwrap();
            assert_eq!(list.len() as u64, want[n]);
            assert_eq!(pairing_count(n), want[n]);
            for p in &list {
                assert!(p.validate(), "invalid partition {:?}", p);
            }
        }
        assert!(matches!(enumerate_pairings(9), Err(WickError::OrderTooLarge(9))));
    }

    #[test]
    fn enumeration_is_canonical_and_duplicate_free() {
        let list = enumerate_pairings(3).unwrap();
        let mut seen = std::collections::HashSet::new();
        for p in &list {
            assert!(seen.insert(format!("{:?}", p.pairs)));
            // Smallest-first order: first elements strictly ascending.
            for w in p.pairs.windows(2) {
                assert!(w[0].0 < w[1].0);
            }
        }
        assert_eq!(list[0].pairs, vec![(1, 2), (3, 4), (5, 6)]);
    }

    #[test]
    fn moment_examples() {
        // E g₁g₂ = ρ.
        let rho = 0.37;
        assert_relative_eq!(
            wick_moment(&[1.0, rho, rho, 1.0], 2).unwrap(),
            rho,
            epsilon = 1e-15
        );
        // Same N(0,1) repeated: E X⁴ = 3, E X⁶ = 15.
        assert_relative_eq!(wick_moment(&vec![1.0; 16], 4).unwrap(), 3.0, epsilon = 1e-12);
        assert_relative_eq!(wick_moment(&vec![1.0; 36], 6).unwrap(), 15.0, epsilon = 1e-12);
        // Independent coordinates: identity covariance kills every pairing.
        let mut eye = vec![0.0; 16];
        for i in 0..4 {
            eye[i * 4 + i] = 1.0;
        }
        assert_eq!(wick_moment(&eye, 4).unwrap(), 0.0);
        // Odd dimension vanishes; empty product is 1.
        assert_eq!(wick_moment(&vec![1.0; 9], 3).unwrap(), 0.0);
        assert_eq!(wick_moment(&[], 0).unwrap(), 1.0);
    }

    #[test]
    fn moment_agrees_with_explicit_enumeration() {
        // Independent dense route: sum over the enumerated pairings.
        let dim = 6;
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut cov = vec![0.0f64; dim * dim];
        for i in 0..dim {
            for j in 0..=i {
                let v: f64 = rng.gen_range(-1.0..1.0);
                cov[i * dim + j] = v;
                cov[j * dim + i] = v;
            }
        }
        let direct = wick_moment(&cov, dim).unwrap();
        let mut by_enum = 0.0;
        for p in enumerate_pairings(dim / 2).unwrap() {
            let mut term = 1.0;
            for &(j, k) in &p.pairs {
                term *= cov[(j - 1) * dim + (k - 1)];
            }
            by_enum += term;
        }
        assert_relative_eq!(direct, by_enum, max_relative = 1e-12);
    }

    #[test]
    fn zero_variance_row_kills_moment() {
        // diag(1, 0, 1, 1): the second coordinate is a.s. zero.
        let mut cov = vec![0.0; 16];
        for (i, v) in [1.0, 0.0, 1.0, 1.0].iter().enumerate() {
            cov[i * 4 + i] = *v;
        }
        assert_eq!(wick_moment(&cov, 4).unwrap(), 0.0);
        let r = wick_mc_crosscheck(&cov, 4, 4096, 11).unwrap();
        assert_eq!(r.exact, 0.0);
        assert_eq!(r.mc, 0.0);
    }

    #[test]
    fn mc_crosscheck_all_ones_and_random_psd() {
        let r = wick_mc_crosscheck(&vec![1.0; 16], 4, 200_000, 42).unwrap();
        assert_relative_eq!(r.exact, 3.0, epsilon = 1e-12);
        assert!(
            (r.exact - r.mc).abs() <= 4.0 * r.stderr,
            "mc {} vs exact {} (stderr {})",
            r.mc,
            r.exact,
            r.stderr
        );
        // Random PSD from a square root: cov = A Aᵀ.
        let dim = 4;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a: Vec<f64> = (0..dim * dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut cov = vec![0.0; dim * dim];
        for i in 0..dim {
            for j in 0..dim {
                for k in 0..dim {
                    cov[i * dim + j] += a[i * dim + k] * a[j * dim + k];
                }
            }
        }
        let r = wick_mc_crosscheck(&cov, dim, 400_000, 5).unwrap();
        assert!(
            (r.exact - r.mc).abs() <= 4.0 * r.stderr,
            "mc {} vs exact {} (stderr {})",
            r.mc,
            r.exact,
            r.stderr
        );
    }

    #[test]
    fn non_psd_is_rejected_by_sampler_but_fine_algebraically() {
        // Symmetric with a negative eigenvalue.
        let cov = [1.0, 2.0, 2.0, 1.0];
        let m = wick_moment(&cov, 2).unwrap();
        assert_relative_eq!(m, 2.0, epsilon = 1e-15);
        assert!(matches!(
            wick_mc_crosscheck(&cov, 2, 1024, 1),
            Err(WickError::NotPsd { .. })
        ));
    }

    proptest! {
        #[test]
        fn prop_permutation_invariance(
            seed in 0u64..1000,
            swap_a in 0usize..6,
            swap_b in 0usize..6,
        ) {
            let dim = 6;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut cov = vec![0.0f64; dim * dim];
            for i in 0..dim {
                for j in 0..=i {
                    let v: f64 = rng.gen_range(-1.0..1.0);
                    cov[i * dim + j] = v;
                    cov[j * dim + i] = v;
                }
            }
            let before = wick_moment(&cov, dim).unwrap();
            // Conjugate by a transposition (generates all permutations).
            let mut perm: Vec<usize> = (0..dim).collect();
            perm.swap(swap_a, swap_b);
            let mut conj = vec![0.0f64; dim * dim];
            for i in 0..dim {
                for j in 0..dim {
                    conj[i * dim + j] = cov[perm[i] * dim + perm[j]];
                }
            }
            let after = wick_moment(&conj, dim).unwrap();
            prop_assert!((before - after).abs() <= 1e-12 * (1.0 + before.abs()));
        }

        #[test]
        fn prop_nonnegative_entries_give_nonnegative_moment(seed in 0u64..1000) {
            let dim = 6;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut cov = vec![0.0f64; dim * dim];
            for i in 0..dim {
                for j in 0..=i {
                    let v: f64 = rng.gen_range(0.0..1.0);
                    cov[i * dim + j] = v;
                    cov[j * dim + i] = v;
                }
            }
            prop_assert!(wick_moment(&cov, dim).unwrap() >= 0.0);
        }

        #[test]
        fn prop_odd_dimension_vanishes(dim in 1usize..8) {
            let dim = 2 * dim - 1;
            let cov = vec![0.5f64; dim * dim];
            prop_assert_eq!(wick_moment(&cov, dim).unwrap(), 0.0);
        }
    }
}
