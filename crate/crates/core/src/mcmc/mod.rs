//! Single-edge heat-bath dynamics for `P^{G,p}`.
//!
//! Active edges are visited in increasing id order. Each visit draws one
//! uniform `u` and sets the edge hard iff `u` is below its conditional
//! probability of being hard. The Laplacian is only touched when the edge
//! actually changes.

mod checkpoint;
mod coupling;

pub use checkpoint::{CheckpointSummary, CHECKPOINT_VERSION};
pub use coupling::{free_wired_pairs, identity_pairs, CoupledChains, CouplingReport, Violation};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::graph::EdgeId;
use crate::laplacian::{LaplacianState, DEFAULT_REFRESH};
use crate::model::{heat_bath_probability, BoundaryCondition, Configuration, MeasureSpec};
use crate::stats::{estimate_series, Estimate};

pub const DEFAULT_BURNIN: u64 = 1000;

#[derive(Clone, Debug, PartialEq)]
pub enum Start {
    Soft,
    Hard,
    Given(Configuration),
}

#[derive(Clone, Debug)]
pub struct ChainConfig {
    pub seed: u64,
    pub burnin: u64,
    /// Edge whose hard indicator is recorded each sweep.
    pub observe: Option<EdgeId>,
    /// `None` picks all-hard for wired specs and all-soft otherwise.
    pub start: Option<Start>,
    pub refresh_threshold: usize,
    pub force_sparse: bool,
}

impl ChainConfig {
    pub fn new(seed: u64) -> Self {
        ChainConfig {
            seed,
            burnin: DEFAULT_BURNIN,
            observe: None,
            start: None,
            refresh_threshold: DEFAULT_REFRESH,
            force_sparse: false,
        }
    }

    pub fn burnin(mut self, b: u64) -> Self {
        self.burnin = b;
        self
    }

    pub fn observe(mut self, e: EdgeId) -> Self {
        self.observe = Some(e);
        self
    }

    pub fn start(mut self, s: Start) -> Self {
        self.start = Some(s);
        self
    }
}

/// Per-sweep observables recorded after burn-in.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Accumulators {
    pub count: u64,
    pub sum_h: f64,
    pub sumsq_h: f64,
    pub sum_marginal: f64,
    pub h_series: Vec<f64>,
    pub marginal_series: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainReport {
    pub sweeps: u64,
    pub burnin: u64,
    pub marginal: Option<Estimate>,
    pub h_density: Estimate,
}

#[derive(Clone, Debug)]
pub struct Chain {
    spec: MeasureSpec,
    kappa: Configuration,
    lap: LaplacianState,
    rng: ChaCha8Rng,
    seed: u64,
    sweep: u64,
    burnin: u64,
    observe: Option<EdgeId>,
    acc: Accumulators,
}

impl Chain {
    pub fn new(spec: MeasureSpec, cfg: ChainConfig) -> Result<Self> {
        let m = spec.graph().n_edges();
        let start = cfg.start.clone().unwrap_or(match spec.bc() {
            BoundaryCondition::Wired => Start::Hard,
            _ => Start::Soft,
        });
        let kappa = match start {
            Start::Soft => Configuration::all_soft(m),
            Start::Hard => Configuration::all_hard(m),
            Start::Given(c) => c,
        };
        let kappa = spec.with_exterior(&kappa);
        if let Some(e) = cfg.observe {
            if e >= m {
                return Err(crate::Error::EdgeOutOfRange { edge: e, n_edges: m });
            }
        }
        let lap = LaplacianState::with_options(
            spec.graph().clone(),
            kappa.conductances(spec.q())?,
            crate::laplacian::default_pin(spec.graph()),
            cfg.refresh_threshold,
            cfg.force_sparse,
        )?;
        Ok(Chain {
            spec,
            kappa,
            lap,
            rng: ChaCha8Rng::seed_from_u64(cfg.seed),
            seed: cfg.seed,
            sweep: 0,
            burnin: cfg.burnin,
            observe: cfg.observe,
            acc: Accumulators::default(),
        })
    }

    pub fn spec(&self) -> &MeasureSpec {
        &self.spec
    }

    pub fn configuration(&self) -> &Configuration {
        &self.kappa
    }

    pub fn laplacian(&self) -> &LaplacianState {
        &self.lap
    }

    pub fn sweep_count(&self) -> u64 {
        self.sweep
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn accumulators(&self) -> &Accumulators {
        &self.acc
    }

    /// Probability that `f` is hard given the rest of the current state.
    pub fn conditional_hard(&self, f: EdgeId) -> Result<f64> {
        if self.spec.q() == 1.0 {
            return Ok(self.spec.p());
        }
        let qm = self.lap.marginal_minus(f)?;
        Ok(heat_bath_probability(self.spec.p(), self.spec.q(), qm))
    }

    /// Heat-bath update of `f` driven by the uniform `u`. Returns whether
    /// the edge changed.
    pub fn update_edge(&mut self, f: EdgeId, u: f64) -> Result<bool> {
        let hard = u < self.conditional_hard(f)?;
        if hard == self.kappa.is_hard(f) {
            return Ok(false);
        }
        self.lap.flip_edge(f)?;
        self.kappa.0[f] = hard;
        Ok(true)
    }

    /// One sweep, calling `visit` after every single-edge update.
    pub fn sweep_with(&mut self, mut visit: impl FnMut(&Configuration)) -> Result<()> {
        for i in 0..self.spec.active_edges().len() {
            let f = self.spec.active_edges()[i];
            let u: f64 = self.rng.random();
            self.update_edge(f, u)?;
            visit(&self.kappa);
        }
        self.finish_sweep();
        Ok(())
    }

    pub fn sweep(&mut self) -> Result<()> {
        self.sweep_with(|_| {})
    }

    pub(crate) fn finish_sweep(&mut self) {
        self.sweep += 1;
        if self.sweep > self.burnin {
            let n_act = self.spec.active_edges().len().max(1) as f64;
            let h = self.spec.hard_active(&self.kappa) as f64 / n_act;
            self.acc.count += 1;
            self.acc.sum_h += h;
            self.acc.sumsq_h += h * h;
            self.acc.h_series.push(h);
            if let Some(e) = self.observe {
                let x = if self.kappa.is_hard(e) { 1.0 } else { 0.0 };
                self.acc.sum_marginal += x;
                self.acc.marginal_series.push(x);
            }
        }
    }

    pub fn run(&mut self, sweeps: u64) -> Result<()> {
        for _ in 0..sweeps {
            self.sweep()?;
        }
        Ok(())
    }

    pub fn report(&self) -> ChainReport {
        ChainReport {
            sweeps: self.sweep,
            burnin: self.burnin,
            marginal: self.observe.map(|_| estimate_series(&self.acc.marginal_series)),
            h_density: estimate_series(&self.acc.h_series),
        }
    }

    /// Relative difference between the tracked and a fresh log-determinant.
    pub fn log_det_drift(&self) -> Result<f64> {
        let fresh = self.lap.fresh_log_det_pinned()?;
        Ok((self.lap.log_det_pinned() - fresh).abs() / fresh.abs().max(1.0))
    }

    pub(crate) fn rng(&self) -> &ChaCha8Rng {
        &self.rng
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::triangle;
    use std::sync::Arc;

    #[test]
    fn q_one_marginal_is_p() {
        let spec = MeasureSpec::new(Arc::new(triangle()), 0.3, 1.0).unwrap();
        let mut c = Chain::new(spec, ChainConfig::new(7).burnin(10).observe(0)).unwrap();
        c.run(20000).unwrap();
        let r = c.report();
        let m = r.marginal.unwrap();
        assert!((m.mean - 0.3).abs() < 4.0 * m.stderr);
    }

    #[test]
    fn near_one_absorbs() {
        let spec = MeasureSpec::new(Arc::new(triangle()), 1.0 - 1e-12, 4.0).unwrap();
        let mut c = Chain::new(spec, ChainConfig::new(1)).unwrap();
        c.sweep().unwrap();
        assert_eq!(c.configuration().hard_count(), 3);
    }
}
