//! Effective run configuration: defaults, config file, command-line overrides.
//!
//! Precedence is flag > config file > built-in default.  The canonical
//! key=value rendering of the result-affecting fields (everything except the
//! output directory) is hashed to name the run directory, so identical
//! configurations land in the same place and reruns can be compared
//! byte-for-byte.

use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("config error: {0}")]
    Invalid(String),
    #[error("config file {0}: {1}")]
    File(PathBuf, String),
}

fn invalid(msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid(msg.into())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Suite {
    Green,
    Wick,
    Laplace,
    S2,
    Bound,
    LemmaA,
    Representation,
    Localtime,
    Variational,
    Asympt,
    All,
}

impl Suite {
    pub const ALL_NAMES: [&'static str; 11] = [
        "green",
        "wick",
        "laplace",
        "s2",
        "bound",
        "lemma-a",
        "representation",
        "localtime",
        "variational",
        "asympt",
        "all",
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Green => "green",
            Suite::Wick => "wick",
            Suite::Laplace => "laplace",
            Suite::S2 => "s2",
            Suite::Bound => "bound",
            Suite::LemmaA => "lemma-a",
            Suite::Representation => "representation",
            Suite::Localtime => "localtime",
            Suite::Variational => "variational",
            Suite::Asympt => "asympt",
            Suite::All => "all",
        }
    }

    /// Suites whose checks draw Monte Carlo samples and therefore require an
    /// explicit seed on the command line or in the config file.
    pub fn needs_seed(self) -> bool {
        matches!(
            self,
            Suite::Wick | Suite::Representation | Suite::Localtime | Suite::All
        )
    }

    /// Concrete members in fixed execution order (`all` expands, everything
    /// else is itself).
    pub fn members(self) -> Vec<Suite> {
        match self {
            Suite::All => vec![
                Suite::Green,
                Suite::Wick,
                Suite::Laplace,
                Suite::S2,
                Suite::Bound,
                Suite::LemmaA,
                Suite::Representation,
                Suite::Localtime,
                Suite::Variational,
                Suite::Asympt,
            ],
            other => vec![other],
        }
    }
}

impl FromStr for Suite {
    type Err = ConfigError;
    fn from_str(s: &str) -> Result<Self, ConfigError> {
        match s {
            "green" => Ok(Suite::Green),
            "wick" => Ok(Suite::Wick),
            "laplace" => Ok(Suite::Laplace),
            "s2" => Ok(Suite::S2),
            "bound" => Ok(Suite::Bound),
            "lemma-a" => Ok(Suite::LemmaA),
            "representation" => Ok(Suite::Representation),
            "localtime" => Ok(Suite::Localtime),
            "variational" => Ok(Suite::Variational),
            "asympt" => Ok(Suite::Asympt),
            "all" => Ok(Suite::All),
            other => Err(invalid(format!(
                "unknown suite '{other}' (expected one of {})",
                Suite::ALL_NAMES.join(", ")
            ))),
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Optional values the user may set; `None` means "use the per-check default".
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub suite: Option<String>,
    pub seed: Option<u64>,
    pub mc: Option<usize>,
    pub tol: Option<f64>,
    pub out: Option<PathBuf>,
    pub d: Option<usize>,
    pub alpha: Option<f64>,
    pub alpha0: Option<f64>,
    pub theta: Option<f64>,
}

impl Overrides {
    /// Parse a flat key=value config file.  Unknown keys are rejected so a
    /// typo cannot silently fall back to a default.
    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::File(path.to_path_buf(), e.to_string()))?;
        let mut ov = Overrides::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                ConfigError::File(
                    path.to_path_buf(),
                    format!("line {}: expected key=value, got '{raw}'", lineno + 1),
                )
            })?;
            let key = key.trim();
            let value = value.trim();
            let ctx = |what: &str| {
                ConfigError::File(
                    path.to_path_buf(),
                    format!("line {}: bad {what} value '{value}'", lineno + 1),
                )
            };
            match key {
                "suite" => ov.suite = Some(value.to_string()),
                "seed" => ov.seed = Some(value.parse().map_err(|_| ctx("seed"))?),
                "mc" => ov.mc = Some(value.parse().map_err(|_| ctx("mc"))?),
                "tol" => ov.tol = Some(value.parse().map_err(|_| ctx("tol"))?),
                "out" => ov.out = Some(PathBuf::from(value)),
                "d" => ov.d = Some(value.parse().map_err(|_| ctx("d"))?),
                "alpha" => ov.alpha = Some(value.parse().map_err(|_| ctx("alpha"))?),
                "alpha0" => ov.alpha0 = Some(value.parse().map_err(|_| ctx("alpha0"))?),
                "theta" => ov.theta = Some(value.parse().map_err(|_| ctx("theta"))?),
                other => {
                    return Err(ConfigError::File(
                        path.to_path_buf(),
                        format!("line {}: unknown key '{other}'", lineno + 1),
                    ))
                }
            }
        }
        Ok(ov)
    }

    /// Apply `self` on top of `base` (self wins where set).
    pub fn over(self, base: Overrides) -> Overrides {
        Overrides {
            suite: self.suite.or(base.suite),
            seed: self.seed.or(base.seed),
            mc: self.mc.or(base.mc),
            tol: self.tol.or(base.tol),
            out: self.out.or(base.out),
            d: self.d.or(base.d),
            alpha: self.alpha.or(base.alpha),
            alpha0: self.alpha0.or(base.alpha0),
            theta: self.theta.or(base.theta),
        }
    }
}

/// Fully resolved configuration for one `run` invocation.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub suite: Suite,
    pub seed: Option<u64>,
    pub mc: Option<usize>,
    pub tol: Option<f64>,
    pub out: PathBuf,
    pub d: Option<usize>,
    pub alpha: Option<f64>,
    pub alpha0: Option<f64>,
    pub theta: Option<f64>,
}

impl RunConfig {
    pub fn resolve(suite_positional: Option<String>, ov: Overrides) -> Result<Self, ConfigError> {
        let suite_name = match (suite_positional, ov.suite) {
            (Some(p), Some(f)) => {
                return Err(invalid(format!(
                    "suite given both as positional argument '{p}' and as option/config '{f}'; use one"
                )))
            }
            (Some(p), None) => p,
            (None, Some(f)) => f,
            (None, None) => return Err(invalid("no suite selected; pass a suite name or --suite")),
        };
        let suite: Suite = suite_name.parse()?;
        if suite.needs_seed() && ov.seed.is_none() {
            return Err(invalid(format!(
                "suite '{suite}' draws Monte Carlo samples; an explicit --seed is required"
            )));
        }
        if let Some(mc) = ov.mc {
            if mc == 0 {
                return Err(invalid("mc must be positive"));
            }
        }
        if let Some(tol) = ov.tol {
            if !(tol > 0.0) || !tol.is_finite() {
                return Err(invalid("tol must be a positive finite number"));
            }
        }
        if let Some(d) = ov.d {
            if !(1..=3).contains(&d) {
                return Err(invalid("d must be 1, 2, or 3"));
            }
        }
        for (name, v) in [("alpha", ov.alpha), ("alpha0", ov.alpha0), ("theta", ov.theta)] {
            if let Some(v) = v {
                if !v.is_finite() || v <= 0.0 {
                    return Err(invalid(format!("{name} must be a positive finite number")));
                }
            }
        }
        Ok(RunConfig {
            suite,
            seed: ov.seed,
            mc: ov.mc,
            tol: ov.tol,
            out: ov.out.unwrap_or_else(|| PathBuf::from("runs")),
            d: ov.d,
            alpha: ov.alpha,
            alpha0: ov.alpha0,
            theta: ov.theta,
        })
    }

    /// Result-affecting fields as a sorted key=value map.  The output
    /// directory is deliberately excluded: it changes where the report goes,
    /// not what is in it.
    pub fn canonical(&self) -> BTreeMap<String, String> {
        let mut m = BTreeMap::new();
        m.insert("suite".into(), self.suite.name().to_string());
        if let Some(v) = self.seed {
            m.insert("seed".into(), v.to_string());
        }
        if let Some(v) = self.mc {
            m.insert("mc".into(), v.to_string());
        }
        if let Some(v) = self.tol {
            m.insert("tol".into(), format!("{v:e}"));
        }
        if let Some(v) = self.d {
            m.insert("d".into(), v.to_string());
        }
        if let Some(v) = self.alpha {
            m.insert("alpha".into(), format!("{v}"));
        }
        if let Some(v) = self.alpha0 {
            m.insert("alpha0".into(), format!("{v}"));
        }
        if let Some(v) = self.theta {
            m.insert("theta".into(), format!("{v}"));
        }
        m
    }

    /// First 12 hex digits of the SHA-256 of the canonical rendering.
    pub fn hash(&self) -> String {
        let mut hasher = Sha256::new();
        for (k, v) in self.canonical() {
            hasher.update(k.as_bytes());
            hasher.update(b"=");
            hasher.update(v.as_bytes());
            hasher.update(b"\n");
        }
        let digest = hasher.finalize();
        let mut s = String::with_capacity(12);
        for byte in digest.iter().take(6) {
            s.push_str(&format!("{byte:02x}"));
        }
        s
    }

    /// Stable per-check seed: master seed folded with an FNV-1a hash of the
    /// check id, so inserting a new check never shifts the streams of the
    /// existing ones.
    pub fn check_seed(&self, check_id: &str) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in check_id.bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
        self.seed.unwrap_or(0) ^ h
    }

    pub fn mc_or(&self, default: usize) -> usize {
        self.mc.unwrap_or(default)
    }

    pub fn tol_or(&self, default: f64) -> f64 {
        self.tol.unwrap_or(default)
    }

    pub fn alpha0_or(&self, default: f64) -> f64 {
        self.alpha0.unwrap_or(default)
    }

    pub fn theta_or(&self, default: f64) -> f64 {
        self.theta.unwrap_or(default)
    }
}
