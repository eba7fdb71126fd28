//! Deterministic random streams.
//!
//! Every random quantity in the library is drawn from a [`NoiseStream`]. Streams
//! are seeded explicitly and can be split into independent substreams keyed by
//! integers or labels, so results never depend on thread scheduling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::domain::BoxDomain;

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// 64-bit FNV-1a, stable across platforms and compiler versions.
pub fn stable_hash(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Combines a seed with a sequence of labels into a new 64-bit key.
pub fn derive_seed(seed: u64, labels: &[&str]) -> u64 {
    labels
        .iter()
        .fold(mix64(seed), |acc, l| mix64(acc ^ stable_hash(l.as_bytes())))
}

#[derive(Debug, Clone)]
pub struct NoiseStream {
    seed: u64,
    rng: ChaCha8Rng,
}

impl NoiseStream {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Independent stream keyed by `key`; does not advance `self`.
    pub fn substream(&self, key: u64) -> NoiseStream {
        NoiseStream::new(mix64(self.seed ^ mix64(key.wrapping_add(0x5851_f42d_4c95_7f2d))))
    }

    pub fn labeled(&self, label: &str) -> NoiseStream {
        NoiseStream::new(derive_seed(self.seed, &[label]))
    }

    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    pub fn normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.random::<u64>()
    }

    pub fn normal_vec(&mut self, m: usize) -> Vec<f64> {
        (0..m).map(|_| self.normal()).collect()
    }

    /// Uniform point in the box.
    pub fn uniform_in(&mut self, domain: &BoxDomain) -> Vec<f64> {
        (0..domain.dim())
            .map(|i| domain.lower()[i] + self.uniform() * domain.width(i))
            .collect()
    }

    pub fn normal_draws(&mut self, count: usize, m: usize) -> NormalDraws {
        NormalDraws {
            m,
            data: (0..count * m).map(|_| self.normal()).collect(),
        }
    }
}

/// A fixed batch of standard-normal `m`-vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalDraws {
    m: usize,
    data: Vec<f64>,
}

impl NormalDraws {
    pub fn from_rows(m: usize, rows: &[Vec<f64>]) -> Self {
        assert!(rows.iter().all(|r| r.len() == m));
        Self {
            m,
            data: rows.iter().flatten().copied().collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.m
    }

    pub fn len(&self) -> usize {
        if self.m == 0 {
            0
        } else {
            self.data.len() / self.m
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.m..(i + 1) * self.m]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.m.max(1))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streams_replay_and_split() {
        let a: Vec<f64> = {
            let mut s = NoiseStream::new(11);
            (0..5).map(|_| s.normal()).collect()
        };
        let b: Vec<f64> = {
            let mut s = NoiseStream::new(11);
            (0..5).map(|_| s.normal()).collect()
        };
        assert_eq!(a, b);
        let root = NoiseStream::new(11);
        let mut s1 = root.substream(1);
        let mut s2 = root.substream(2);
        assert_ne!(s1.next_u64(), s2.next_u64());
        assert_eq!(root.labeled("design").seed(), root.labeled("design").seed());
        assert_ne!(root.labeled("design").seed(), root.labeled("ei_cf").seed());
    }

    #[test]
    fn fnv_reference_value() {
        // Published FNV-1a 64 test vector.
        assert_eq!(stable_hash(b"a"), 0xaf63_dc4c_8601_ec8c);
    }

    #[test]
    fn draws_rows() {
        let d = NormalDraws::from_rows(2, &[vec![1.0, 2.0], vec![3.0, 4.0]]);
        assert_eq!(d.len(), 2);
        assert_eq!(d.row(1), &[3.0, 4.0]);
        assert_eq!(d.rows().count(), 2);
    }
}
