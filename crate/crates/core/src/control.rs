//! Control sequences: which row or block each iteration touches.
//!
//! Indices are zero-based. The index set can grow while a sequence is
//! running, which is how the online runners add measurements.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ControlMode {
    /// `0, 1, …, m−1, 0, 1, …`
    Cyclic,
    UniformRandom,
    /// Index `k` with probability proportional to its weight (usually `‖a_k‖²`).
    RowNormWeighted,
    /// After each growth the newest index first, then cyclic from 0.
    NewestFirstCyclic,
}

impl FromStr for ControlMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cyclic" => Ok(ControlMode::Cyclic),
            "uniform" | "uniform-random" => Ok(ControlMode::UniformRandom),
            "rownorm" | "rownorm-weighted" => Ok(ControlMode::RowNormWeighted),
            "newest-first" | "newest-first-cyclic" => Ok(ControlMode::NewestFirstCyclic),
            other => Err(Error::InvalidConfig(format!(
                "unknown control mode '{other}'"
            ))),
        }
    }
}

impl fmt::Display for ControlMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ControlMode::Cyclic => "cyclic",
            ControlMode::UniformRandom => "uniform",
            ControlMode::RowNormWeighted => "rownorm",
            ControlMode::NewestFirstCyclic => "newest-first",
        })
    }
}

/// State of a control sequence `r(k)`.
///
/// Randomness comes from a ChaCha8 generator seeded with a `u64`, so the
/// emitted stream is a pure function of the mode, the seed and the history of
/// [`ControlState::extend`] calls.
#[derive(Debug, Clone)]
pub struct ControlState {
    mode: ControlMode,
    m: usize,
    k: u64,
    rng: ChaCha8Rng,
    // cumulative weights for RowNormWeighted
    cumulative: Vec<f64>,
    // cyclic position and the end of the sweep in progress
    pos: usize,
    sweep_end: usize,
    pending_newest: Option<usize>,
}

impl ControlState {
    pub fn new(mode: ControlMode, seed: u64) -> Self {
        ControlState {
            mode,
            m: 0,
            k: 0,
            rng: ChaCha8Rng::seed_from_u64(seed),
            cumulative: Vec::new(),
            pos: 0,
            sweep_end: 0,
            pending_newest: None,
        }
    }

    /// A sequence over `m` indices of equal weight.
    pub fn with_len(mode: ControlMode, seed: u64, m: usize) -> Self {
        let mut s = Self::new(mode, seed);
        s.extend(&vec![1.0; m]);
        s
    }

    /// A sequence over indices with the given sampling weights.
    pub fn with_weights(mode: ControlMode, seed: u64, weights: &[f64]) -> Self {
        let mut s = Self::new(mode, seed);
        s.extend(weights);
        s
    }

    /// Adds `weights.len()` new indices. Weights only matter for
    /// [`ControlMode::RowNormWeighted`].
    pub fn extend(&mut self, weights: &[f64]) {
        if weights.is_empty() {
            return;
        }
        let mut acc = self.cumulative.last().copied().unwrap_or(0.0);
        for &w in weights {
            acc += w.max(0.0);
            self.cumulative.push(acc);
        }
        let first_growth = self.m == 0;
        self.m += weights.len();
        if first_growth {
            self.sweep_end = self.m;
        }
        if self.mode == ControlMode::NewestFirstCyclic {
            self.pending_newest = Some(self.m - 1);
            self.pos = 0;
            self.sweep_end = self.m;
        }
    }

    pub fn mode(&self) -> ControlMode {
        self.mode
    }

    pub fn len(&self) -> usize {
        self.m
    }

    pub fn is_empty(&self) -> bool {
        self.m == 0
    }

    /// Number of indices emitted so far.
    pub fn iteration(&self) -> u64 {
        self.k
    }

    pub fn next_index(&mut self) -> Result<usize> {
        if self.m == 0 {
            return Err(Error::EmptySystem);
        }
        let idx = match self.mode {
            ControlMode::Cyclic => self.next_cyclic(),
            ControlMode::NewestFirstCyclic => match self.pending_newest.take() {
                Some(newest) => newest,
                None => self.next_cyclic(),
            },
            ControlMode::UniformRandom => self.rng.gen_range(0..self.m),
            ControlMode::RowNormWeighted => self.next_weighted(),
        };
        self.k += 1;
        Ok(idx)
    }

    // Indices added mid-sweep join at the next wrap.
    fn next_cyclic(&mut self) -> usize {
        if self.pos >= self.sweep_end {
            self.pos = 0;
            self.sweep_end = self.m;
        }
        let idx = self.pos;
        self.pos += 1;
        idx
    }

    fn next_weighted(&mut self) -> usize {
        let total = *self.cumulative.last().unwrap();
        if total <= 0.0 {
            return self.rng.gen_range(0..self.m);
        }
        let u = self.rng.gen::<f64>() * total;
        let idx = self.cumulative.partition_point(|&c| c <= u);
        idx.min(self.m - 1)
    }
}

/// True iff every index `0..m` occurs in `history`.
pub fn is_admissible_window(history: &[usize], m: usize) -> bool {
    let mut seen = vec![false; m];
    for &i in history {
        if i < m {
            seen[i] = true;
        }
    }
    seen.into_iter().all(|s| s)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn take(state: &mut ControlState, n: usize) -> Vec<usize> {
        (0..n).map(|_| state.next_index().unwrap()).collect()
    }

    #[test]
    fn cyclic_sequence() {
        let mut c = ControlState::with_len(ControlMode::Cyclic, 0, 3);
        assert_eq!(take(&mut c, 7), vec![0, 1, 2, 0, 1, 2, 0]);
        assert_eq!(c.iteration(), 7);
    }

    #[test]
    fn cyclic_growth_joins_at_next_wrap() {
        let mut c = ControlState::with_len(ControlMode::Cyclic, 0, 3);
        assert_eq!(take(&mut c, 2), vec![0, 1]);
        c.extend(&[1.0]);
        assert_eq!(take(&mut c, 6), vec![2, 0, 1, 2, 3, 0]);
    }

    #[test]
    fn newest_first_after_growth() {
        let mut c = ControlState::with_len(ControlMode::NewestFirstCyclic, 0, 2);
        take(&mut c, 3);
        c.extend(&[1.0]);
        assert_eq!(take(&mut c, 6), vec![2, 0, 1, 2, 0, 1]);
    }

    #[test]
    fn empty_sequence_errors() {
        let mut c = ControlState::new(ControlMode::UniformRandom, 1);
        assert_eq!(c.next_index(), Err(Error::EmptySystem));
    }

    #[test]
    fn weighted_frequencies() {
        let mut c = ControlState::with_weights(ControlMode::RowNormWeighted, 7, &[1.0, 4.0]);
        let draws = 100_000;
        let ones = take(&mut c, draws).into_iter().filter(|&i| i == 0).count();
        let freq = ones as f64 / draws as f64;
        assert!((freq - 0.2).abs() < 0.01, "freq {freq}");
    }

    #[test]
    fn admissible_windows() {
        assert!(is_admissible_window(&[0, 1, 2], 3));
        assert!(!is_admissible_window(&[0, 0, 0], 2));
        let m = 10;
        let len = (50.0 * m as f64 * (m as f64).ln()).ceil() as usize;
        let mut c = ControlState::with_len(ControlMode::UniformRandom, 0, m);
        assert!(is_admissible_window(&take(&mut c, len), m));
    }

    #[test]
    fn parse_modes() {
        for mode in [
            ControlMode::Cyclic,
            ControlMode::UniformRandom,
            ControlMode::RowNormWeighted,
            ControlMode::NewestFirstCyclic,
        ] {
            assert_eq!(mode.to_string().parse::<ControlMode>().unwrap(), mode);
        }
        assert!("sideways".parse::<ControlMode>().is_err());
    }
}
