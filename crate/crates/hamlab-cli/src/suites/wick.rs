//! Gaussian moment checks: pairing enumeration counts, closed-form moments
//! of all-ones covariances, and a seeded Monte Carlo cross-check.

use crate::config::RunConfig;
use crate::report::{inputs, CheckRow, SuiteOutput};
use anyhow::Result;
use hamlab::wick::{enumerate_pairings, pairing_count, wick_mc_crosscheck, wick_moment};

pub fn run(cfg: &RunConfig) -> Result<SuiteOutput> {
    let hash = cfg.hash();
    let mut out = SuiteOutput::default();

    // (2n-1)!! pairing counts, enumerated and validated.
    let expected_counts = [1u64, 3, 15, 105, 945];
    for (i, &want) in expected_counts.iter().enumerate() {
        let n = i + 1;
        let pairings = enumerate_pairings(n)?;
        let all_valid = pairings.iter().all(|pp| pp.validate());
        let counted = pairing_count(n);
        let ok = all_valid && pairings.len() as u64 == want && counted == want;
        out.rows.push(CheckRow::compare(
            format!("wick/pairing-count-n{n}"),
            "pair-partition-count",
            inputs(&hash, &[("n", n.to_string())]),
            want as f64,
            if ok { pairings.len() as f64 } else { f64::NAN },
            0.0,
        ));
    }

    // All-ones covariance: the moment is exactly the pairing count.
    for (dim, want) in [(4usize, 3.0), (6, 15.0)] {
        let cov = vec![1.0; dim * dim];
        let value = wick_moment(&cov, dim)?;
        out.rows.push(CheckRow::compare(
            format!("wick/all-ones-{dim}"),
            "moment-as-pairing-sum",
            inputs(&hash, &[("dim", dim.to_string())]),
            want,
            value,
            1e-12,
        ));
    }

    // Monte Carlo estimate of the same moments, within 4 batch standard
    // errors of the exact sum.
    let m = cfg.mc_or(100_000);
    for dim in [4usize, 6] {
        let id = format!("wick/mc-crosscheck-{dim}");
        let cov = vec![1.0; dim * dim];
        let cc = wick_mc_crosscheck(&cov, dim, m, cfg.check_seed(&id))?;
        out.rows.push(CheckRow::compare(
            id.clone(),
            "moment-vs-sample-mean",
            inputs(
                &hash,
                &[("dim", dim.to_string()), ("m", m.to_string())],
            ),
            cc.exact,
            cc.mc,
            4.0 * cc.stderr,
        ));
    }

    Ok(out)
}
