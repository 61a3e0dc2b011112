//! Versioned, checksummed binary checkpoints.
//!
//! Layout (little endian): magic `DCCK`, format version, graph hash, spec
//! hash, `p`, `q`, burn-in, sweep, seed, observed edge (`u64::MAX` for none),
//! RNG stream and word position, Laplacian pin / refresh threshold / backend,
//! `κ`, the Laplacian base configuration and pending flips, accumulators and
//! series, then a SHA-256 of everything before it.
//!
//! The Laplacian is rebuilt by replaying the pending flips on top of the base
//! configuration, which reproduces its floating-point state exactly.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use sha2::{Digest, Sha256};

use super::{Accumulators, Chain};
use crate::error::{Error, Result};
use crate::laplacian::LaplacianState;
use crate::model::{Configuration, MeasureSpec};

pub const CHECKPOINT_VERSION: u32 = 1;
const MAGIC: &[u8; 4] = b"DCCK";

struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, x: u8) {
        self.0.push(x);
    }
    fn u32(&mut self, x: u32) {
        self.0.extend_from_slice(&x.to_le_bytes());
    }
    fn u64(&mut self, x: u64) {
        self.0.extend_from_slice(&x.to_le_bytes());
    }
    fn u128(&mut self, x: u128) {
        self.0.extend_from_slice(&x.to_le_bytes());
    }
    fn f64(&mut self, x: f64) {
        self.u64(x.to_bits());
    }
    fn bytes(&mut self, b: &[u8]) {
        self.0.extend_from_slice(b);
    }
    fn bits(&mut self, b: &[bool]) {
        self.u64(b.len() as u64);
        self.0.extend(b.iter().map(|&x| x as u8));
    }
    fn f64s(&mut self, v: &[f64]) {
        self.u64(v.len() as u64);
        for &x in v {
            self.f64(x);
        }
    }
}

struct Reader<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.data.len() {
            return Err(Error::Checkpoint("truncated checkpoint".into()));
        }
        let s = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
    fn u128(&mut self) -> Result<u128> {
        Ok(u128::from_le_bytes(self.take(16)?.try_into().expect("16 bytes")))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_bits(self.u64()?))
    }
    fn len(&mut self) -> Result<usize> {
        let n = self.u64()? as usize;
        if n > self.data.len() {
            return Err(Error::Checkpoint("implausible length".into()));
        }
        Ok(n)
    }
    fn bits(&mut self) -> Result<Vec<bool>> {
        let n = self.len()?;
        Ok(self.take(n)?.iter().map(|&b| b != 0).collect())
    }
    fn f64s(&mut self) -> Result<Vec<f64>> {
        let n = self.len()?;
        (0..n).map(|_| self.f64()).collect()
    }
}

/// Human-readable view of a checkpoint.
#[derive(Clone, Debug, Serialize)]
pub struct CheckpointSummary {
    pub version: u32,
    pub graph_hash: String,
    pub spec_hash: String,
    pub p: f64,
    pub q: f64,
    pub burnin: u64,
    pub sweep: u64,
    pub seed: u64,
    pub observe: Option<usize>,
    pub rng_stream: u64,
    pub rng_word_pos: String,
    pub kappa: String,
    pub pending_flips: usize,
    pub accumulators: Accumulators,
}

fn hex(b: &[u8]) -> String {
    b.iter().map(|x| format!("{x:02x}")).collect()
}

impl Chain {
    pub fn checkpoint(&self) -> Vec<u8> {
        let mut w = Writer(Vec::new());
        w.bytes(MAGIC);
        w.u32(CHECKPOINT_VERSION);
        w.bytes(&self.spec.graph().content_hash());
        w.bytes(&self.spec.content_hash());
        w.f64(self.spec.p());
        w.f64(self.spec.q());
        w.u64(self.burnin);
        w.u64(self.sweep);
        w.u64(self.seed);
        w.u64(self.observe.map_or(u64::MAX, |e| e as u64));
        w.u64(self.rng().get_stream());
        w.u128(self.rng().get_word_pos());
        w.u64(self.lap.pin() as u64);
        w.u64(self.lap.refresh_threshold() as u64);
        w.u8(self.lap.is_sparse() as u8);
        w.bits(&self.kappa.0);
        w.bits(self.lap.base());
        w.u64(self.lap.pending().len() as u64);
        for &e in self.lap.pending() {
            w.u64(e as u64);
        }
        w.u64(self.acc.count);
        w.f64(self.acc.sum_h);
        w.f64(self.acc.sumsq_h);
        w.f64(self.acc.sum_marginal);
        w.f64s(&self.acc.h_series);
        w.f64s(&self.acc.marginal_series);
        let digest = Sha256::digest(&w.0);
        w.bytes(&digest);
        w.0
    }

    /// Restores a chain for `spec` from a blob produced by [`Chain::checkpoint`].
    pub fn restore(spec: MeasureSpec, blob: &[u8]) -> Result<Chain> {
        if blob.len() < 4 + 32 || &blob[..4] != MAGIC {
            return Err(Error::Checkpoint("not a checkpoint".into()));
        }
        let (body, sum) = blob.split_at(blob.len() - 32);
        if Sha256::digest(body).as_slice() != sum {
            return Err(Error::Checkpoint("checksum mismatch".into()));
        }
        let mut r = Reader { data: body, pos: 4 };
        let version = r.u32()?;
        if version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!("unsupported version {version}")));
        }
        if r.take(32)? != spec.graph().content_hash() {
            return Err(Error::Incompatible("checkpoint was written for a different graph".into()));
        }
        if r.take(32)? != spec.content_hash() {
            return Err(Error::Incompatible("checkpoint was written for different parameters".into()));
        }
        let _p = r.f64()?;
        let _q = r.f64()?;
        let burnin = r.u64()?;
        let sweep = r.u64()?;
        let seed = r.u64()?;
        let observe = match r.u64()? {
            u64::MAX => None,
            e => Some(e as usize),
        };
        let stream = r.u64()?;
        let word_pos = r.u128()?;
        let pin = r.u64()? as usize;
        let refresh = r.u64()? as usize;
        let sparse = r.u8()? != 0;
        let kappa = Configuration(r.bits()?);
        let base = r.bits()?;
        let n_pending = r.len()?;
        let pending: Vec<usize> = (0..n_pending).map(|_| r.u64().map(|e| e as usize)).collect::<Result<_>>()?;
        let acc = Accumulators {
            count: r.u64()?,
            sum_h: r.f64()?,
            sumsq_h: r.f64()?,
            sum_marginal: r.f64()?,
            h_series: r.f64s()?,
            marginal_series: r.f64s()?,
        };
        if r.pos != body.len() {
            return Err(Error::Checkpoint("trailing bytes".into()));
        }
        let m = spec.graph().n_edges();
        if kappa.len() != m || base.len() != m || pending.iter().any(|&e| e >= m) {
            return Err(Error::Checkpoint("configuration size does not match the graph".into()));
        }
        let lap = LaplacianState::replay(spec.graph().clone(), spec.q(), base, &pending, pin, refresh, sparse)?;
        if lap.conductances().hard() != kappa.0.as_slice() {
            return Err(Error::Checkpoint("Laplacian replay disagrees with the stored configuration".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        rng.set_word_pos(word_pos);
        Ok(Chain { spec, kappa, lap, rng, seed, sweep, burnin, observe, acc })
    }

    /// Decodes a checkpoint for inspection without rebuilding the chain.
    pub fn inspect_checkpoint(spec: MeasureSpec, blob: &[u8]) -> Result<CheckpointSummary> {
        let chain = Chain::restore(spec, blob)?;
        Ok(CheckpointSummary {
            version: CHECKPOINT_VERSION,
            graph_hash: hex(&chain.spec.graph().content_hash()),
            spec_hash: hex(&chain.spec.content_hash()),
            p: chain.spec.p(),
            q: chain.spec.q(),
            burnin: chain.burnin,
            sweep: chain.sweep,
            seed: chain.seed,
            observe: chain.observe,
            rng_stream: chain.rng().get_stream(),
            rng_word_pos: chain.rng().get_word_pos().to_string(),
            kappa: chain.kappa.bits(),
            pending_flips: chain.lap.pending().len(),
            accumulators: chain.acc.clone(),
        })
    }

    pub fn checkpoint_json(&self) -> Result<String> {
        let summary = Chain::inspect_checkpoint(self.spec.clone(), &self.checkpoint())?;
        serde_json::to_string_pretty(&summary).map_err(|e| Error::Checkpoint(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::super::ChainConfig;
    use super::*;
    use crate::graph::builtin;
    use std::sync::Arc;

    #[test]
    fn round_trip_continues_identically() {
        let spec = MeasureSpec::new(Arc::new(builtin("grid2x3").unwrap()), 0.5, 3.0).unwrap();
        let cfg = ChainConfig::new(11).burnin(5).observe(0);
        let mut a = Chain::new(spec.clone(), cfg).unwrap();
        a.run(37).unwrap();
        let blob = a.checkpoint();
        let mut b = Chain::restore(spec.clone(), &blob).unwrap();
        for _ in 0..50 {
            a.sweep().unwrap();
            b.sweep().unwrap();
            assert_eq!(a.configuration(), b.configuration());
        }
        assert_eq!(a.accumulators(), b.accumulators());
        assert_eq!(a.laplacian().log_det_pinned().to_bits(), b.laplacian().log_det_pinned().to_bits());
        assert_eq!(a.checkpoint(), b.checkpoint());
    }

    #[test]
    fn corruption_and_mismatch() {
        let spec = MeasureSpec::new(Arc::new(builtin("triangle").unwrap()), 0.5, 3.0).unwrap();
        let a = Chain::new(spec.clone(), ChainConfig::new(1)).unwrap();
        let mut blob = a.checkpoint();
        let other = MeasureSpec::new(Arc::new(builtin("c4").unwrap()), 0.5, 3.0).unwrap();
        assert!(matches!(Chain::restore(other, &blob), Err(Error::Incompatible(_))));
        blob[20] ^= 1;
        assert!(matches!(Chain::restore(spec, &blob), Err(Error::Checkpoint(_))));
    }
}
