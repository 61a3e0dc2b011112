//! Grand coupling of two heat-bath chains through shared uniforms.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Chain, ChainConfig, ChainReport, Start};
use crate::error::{Error, Result};
use crate::graph::{Contraction, EdgeId};
use crate::model::MeasureSpec;

/// Edge of the lower chain and edge of the upper chain updated with the
/// same uniform. Either side may be absent.
pub type EdgePair = (Option<EdgeId>, Option<EdgeId>);

/// Pairs each active edge with itself.
pub fn identity_pairs(spec: &MeasureSpec) -> Vec<EdgePair> {
    spec.active_edges().iter().map(|&e| (Some(e), Some(e))).collect()
}

/// Pairs edges of a free graph with their images in a contraction of it.
/// Edges that became loops are unpaired on the upper side.
pub fn free_wired_pairs(contraction: &Contraction) -> Vec<EdgePair> {
    contraction.edge_map.iter().enumerate().map(|(e, &w)| (Some(e), w)).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub sweep: u64,
    pub lower_edge: EdgeId,
    pub upper_edge: EdgeId,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CouplingReport {
    pub sweeps: u64,
    pub checks: u64,
    pub violations: u64,
    /// The first few violations, for diagnosis.
    pub examples: Vec<Violation>,
    pub lower: ChainReport,
    pub upper: ChainReport,
}

#[derive(Clone, Debug)]
pub struct CoupledChains {
    lower: Chain,
    upper: Chain,
    pairs: Vec<EdgePair>,
    rng: ChaCha8Rng,
    sweep: u64,
    checks: u64,
    violations: u64,
    examples: Vec<Violation>,
}

const MAX_EXAMPLES: usize = 16;

impl CoupledChains {
    /// The lower chain starts all-soft and the upper chain all-hard unless the
    /// configs say otherwise. `observe` is given per side.
    pub fn new(
        lower: MeasureSpec,
        upper: MeasureSpec,
        pairs: Vec<EdgePair>,
        seed: u64,
        burnin: u64,
        observe: (Option<EdgeId>, Option<EdgeId>),
    ) -> Result<Self> {
        check_pairs(&lower, pairs.iter().map(|p| p.0), "lower")?;
        check_pairs(&upper, pairs.iter().map(|p| p.1), "upper")?;
        let cfg = |obs: Option<EdgeId>, start: Start| {
            let mut c = ChainConfig::new(seed).burnin(burnin).start(start);
            c.observe = obs;
            c
        };
        Ok(CoupledChains {
            lower: Chain::new(lower, cfg(observe.0, Start::Soft))?,
            upper: Chain::new(upper, cfg(observe.1, Start::Hard))?,
            pairs,
            rng: ChaCha8Rng::seed_from_u64(seed),
            sweep: 0,
            checks: 0,
            violations: 0,
            examples: Vec::new(),
        })
    }

    pub fn lower(&self) -> &Chain {
        &self.lower
    }

    pub fn upper(&self) -> &Chain {
        &self.upper
    }

    pub fn sweep(&mut self) -> Result<()> {
        self.sweep += 1;
        for i in 0..self.pairs.len() {
            let (a, b) = self.pairs[i];
            let u: f64 = self.rng.random();
            if let Some(e) = a {
                self.lower.update_edge(e, u)?;
            }
            if let Some(f) = b {
                self.upper.update_edge(f, u)?;
            }
            if let (Some(e), Some(f)) = (a, b) {
                self.checks += 1;
                if self.lower.configuration().is_hard(e) && !self.upper.configuration().is_hard(f) {
                    self.violations += 1;
                    if self.examples.len() < MAX_EXAMPLES {
                        self.examples.push(Violation { sweep: self.sweep, lower_edge: e, upper_edge: f });
                    }
                }
            }
        }
        self.lower.finish_sweep();
        self.upper.finish_sweep();
        Ok(())
    }

    pub fn run(&mut self, sweeps: u64) -> Result<CouplingReport> {
        for _ in 0..sweeps {
            self.sweep()?;
        }
        Ok(self.report())
    }

    pub fn report(&self) -> CouplingReport {
        CouplingReport {
            sweeps: self.sweep,
            checks: self.checks,
            violations: self.violations,
            examples: self.examples.clone(),
            lower: self.lower.report(),
            upper: self.upper.report(),
        }
    }
}

fn check_pairs(spec: &MeasureSpec, side: impl Iterator<Item = Option<EdgeId>>, name: &str) -> Result<()> {
    let mut seen: Vec<EdgeId> = side.flatten().collect();
    seen.sort_unstable();
    if seen != spec.active_edges() {
        return Err(Error::Incompatible(format!("{name} edges of the coupling do not match its active set")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_wired_box, builtin};
    use crate::model::BoundaryCondition;
    use std::sync::Arc;

    #[test]
    fn identical_specs_stay_identical() {
        let g = Arc::new(builtin("grid2x2").unwrap());
        let s = MeasureSpec::new(g, 0.4, 2.0).unwrap();
        let mut c = CoupledChains::new(s.clone(), s.clone(), identity_pairs(&s), 3, 0, (None, None)).unwrap();
        for _ in 0..20 {
            c.sweep().unwrap();
        }
        assert_eq!(c.lower().configuration(), c.upper().configuration());
    }

    #[test]
    fn free_below_wired() {
        let w = build_wired_box(2, 1).unwrap();
        let free = MeasureSpec::new(Arc::new(builtin("box1").unwrap()), 0.5, 10.0).unwrap().with_bc(BoundaryCondition::Free);
        let wired = MeasureSpec::new(Arc::new(w.graph.clone()), 0.5, 10.0).unwrap().with_bc(BoundaryCondition::Wired);
        let mut c = CoupledChains::new(free, wired, free_wired_pairs(&w), 5, 0, (None, None)).unwrap();
        let r = c.run(500).unwrap();
        assert_eq!(r.violations, 0);
        assert!(r.checks > 0);
    }
}
