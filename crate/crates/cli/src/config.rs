//! Sweep configuration files (TOML).
//!
//! ```toml
//! p = [0.5, "psd"]      # "psd" is the self-dual point of each q
//! q = [2.0, 1e6]
//! n = [2, 4]
//! bc = ["free", "wired"]
//! sweeps = 2000
//! burnin = 200
//! seeds = [1, 2, 3]
//! checkpoint_every = 500
//! out = "results"
//! ```

use std::path::PathBuf;

use detcond::model::self_dual_point;
use serde::{Deserialize, Serialize};

use crate::{Bc, CliError, CliResult};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PValue {
    Value(f64),
    Named(String),
}

impl PValue {
    pub fn resolve(&self, q: f64) -> CliResult<f64> {
        match self {
            PValue::Value(p) => Ok(*p),
            PValue::Named(s) if s == "psd" => Ok(self_dual_point(q)),
            PValue::Named(s) => Err(CliError::usage(format!("unknown p value {s:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BcList {
    One(Bc),
    Many(Vec<Bc>),
}

fn default_d() -> usize {
    2
}

fn default_checkpoint() -> u64 {
    1000
}

fn default_contour_len() -> usize {
    8
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub p: Vec<PValue>,
    pub q: Vec<f64>,
    pub n: Vec<usize>,
    pub bc: BcList,
    #[serde(default = "default_d")]
    pub d: usize,
    pub sweeps: u64,
    pub burnin: u64,
    pub seeds: Vec<u64>,
    #[serde(default = "default_checkpoint")]
    pub checkpoint_every: u64,
    /// Also scan contours around the central edge of each cell.
    #[serde(default)]
    pub contours: bool,
    #[serde(default = "default_contour_len")]
    pub contour_max_len: usize,
    pub out: PathBuf,
}

impl SweepConfig {
    pub fn parse(text: &str) -> CliResult<Self> {
        let cfg: SweepConfig = toml::from_str(text).map_err(|e| CliError::usage(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn bcs(&self) -> Vec<Bc> {
        match &self.bc {
            BcList::One(b) => vec![*b],
            BcList::Many(v) => v.clone(),
        }
    }

    pub fn validate(&self) -> CliResult<()> {
        if self.p.is_empty() || self.q.is_empty() || self.n.is_empty() || self.seeds.is_empty() || self.bcs().is_empty() {
            return Err(CliError::usage("config: p, q, n, bc and seeds must be non-empty"));
        }
        for &q in &self.q {
            if !(q >= 1.0) || !q.is_finite() {
                return Err(CliError::usage(format!("config: q = {q} is not a finite number >= 1")));
            }
            for p in &self.p {
                let p = p.resolve(q)?;
                if !(0.0..=1.0).contains(&p) {
                    return Err(CliError::usage(format!("config: p = {p} is not a probability")));
                }
            }
        }
        let mut s = self.seeds.clone();
        s.sort_unstable();
        if s.windows(2).any(|w| w[0] == w[1]) {
            return Err(CliError::usage("config: seed collision, seeds must be distinct"));
        }
        if self.checkpoint_every == 0 {
            return Err(CliError::usage("config: checkpoint_every must be positive"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_validates() {
        let text = "p = [0.5, \"psd\"]\nq = [16.0]\nn = [1]\nbc = \"wired\"\nsweeps = 10\nburnin = 2\nseeds = [1, 2]\nout = \"x\"\n";
        let c = SweepConfig::parse(text).unwrap();
        assert_eq!(c.bcs(), vec![Bc::Wired]);
        assert!((c.p[1].resolve(16.0).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        let dup = text.replace("[1, 2]", "[3, 3]");
        assert_eq!(SweepConfig::parse(&dup).unwrap_err().code, 1);
    }
}
