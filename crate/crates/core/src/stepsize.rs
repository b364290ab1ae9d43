//! Stepsize rules for the dual update `z ← z − t·Aᵀr`.
//!
//! * exact: for a single row `a`, the `t` that makes the shrunk update land
//!   on the hyperplane, `aᵀ S_λ(z − t a) = β`;
//! * dynamic: `t = ‖r‖² / ‖Aᵀr‖²` for the block residual `r`;
//! * constant: `t = ‖A_l‖⁻²` with the spectral norm of the block.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{dot, norm_sq};
use crate::operators::BlockView;
use crate::shrinkage::ShrinkMode;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StepKind {
    Exact,
    #[default]
    Dynamic,
    Constant,
}

impl FromStr for StepKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(StepKind::Exact),
            "dynamic" => Ok(StepKind::Dynamic),
            "constant" => Ok(StepKind::Constant),
            other => Err(Error::InvalidConfig(format!("unknown stepsize '{other}'"))),
        }
    }
}

impl fmt::Display for StepKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StepKind::Exact => "exact",
            StepKind::Dynamic => "dynamic",
            StepKind::Constant => "constant",
        })
    }
}

/// A stepsize kind plus the per-block `‖A_l‖⁻²` cache used by the constant rule.
#[derive(Debug, Clone, Default)]
pub struct StepsizeRule {
    kind: StepKind,
    constants: Vec<Option<f64>>,
}

impl StepsizeRule {
    pub fn new(kind: StepKind) -> Self {
        StepsizeRule {
            kind,
            constants: Vec::new(),
        }
    }

    pub fn kind(&self) -> StepKind {
        self.kind
    }

    /// `‖A_l‖⁻²` for block `l`, computed on first use.
    pub fn constant_for(&mut self, l: usize, block: BlockView<'_>) -> Result<f64> {
        if self.constants.len() <= l {
            self.constants.resize(l + 1, None);
        }
        match self.constants[l] {
            Some(t) => Ok(t),
            None => {
                let t = constant_step(block)?;
                self.constants[l] = Some(t);
                Ok(t)
            }
        }
    }

    /// Drops the cached constant of block `l` (e.g. after the block grew).
    pub fn invalidate(&mut self, l: usize) {
        if let Some(c) = self.constants.get_mut(l) {
            *c = None;
        }
    }

    pub fn cached(&self, l: usize) -> Option<f64> {
        self.constants.get(l).copied().flatten()
    }
}

/// Exact stepsize for soft shrinkage: `t` with `aᵀ S_λ(z − t a) = β`.
pub fn exact_step(z: &[f64], a: &[f64], beta: f64, lambda: f64) -> Result<f64> {
    exact_step_with(z, a, beta, lambda, ShrinkMode::Signed)
}

/// Exact stepsize for either shrinkage.
///
/// `g(t) = aᵀ shrink(z − t a)` is continuous, piecewise linear and
/// nonincreasing. The breakpoints are sorted and bisected to find the first
/// one where `g ≤ β`; the linear piece to its left is then solved in closed
/// form. This returns the left end of the solution set when `g` is flat at
/// level `β`. In nonnegative mode `g` may stay above or below `β`, in which
/// case the hyperplane misses the orthant and
/// [`Error::InfeasibleHyperplane`] is returned.
pub fn exact_step_with(
    z: &[f64],
    a: &[f64],
    beta: f64,
    lambda: f64,
    mode: ShrinkMode,
) -> Result<f64> {
    let mut bps: Vec<f64> = Vec::with_capacity(2 * a.len());
    for (&zi, &ai) in z.iter().zip(a) {
        if ai != 0.0 {
            bps.push((zi - lambda) / ai);
            if mode == ShrinkMode::Signed && lambda > 0.0 {
                bps.push((zi + lambda) / ai);
            }
        }
    }
    if bps.is_empty() {
        return Err(Error::ZeroRow);
    }
    bps.sort_unstable_by(f64::total_cmp);
    bps.dedup();

    let g = |t: f64| -> f64 {
        z.iter()
            .zip(a)
            .map(|(&zi, &ai)| ai * mode.scalar(zi - t * ai, lambda))
            .sum()
    };
    // g(t) = c − s·t on the piece containing `probe`
    let piece = |probe: f64| -> (f64, f64) {
        let (mut c, mut s) = (0.0, 0.0);
        for (&zi, &ai) in z.iter().zip(a) {
            let u = zi - probe * ai;
            if u > lambda {
                c += ai * (zi - lambda);
                s += ai * ai;
            } else if mode == ShrinkMode::Signed && u < -lambda {
                c += ai * (zi + lambda);
                s += ai * ai;
            }
        }
        (c, s)
    };

    let first = bps.partition_point(|&t| g(t) > beta);
    let last = bps.len() - 1;
    if first == 0 {
        let b0 = bps[0];
        let (c, s) = piece(b0 - (1.0 + b0.abs()));
        if s > 0.0 {
            return Ok(((c - beta) / s).min(b0));
        }
        // g is constant left of the first breakpoint
        return if g(b0) == beta {
            Ok(b0)
        } else {
            Err(Error::InfeasibleHyperplane)
        };
    }
    if first > last {
        let bl = bps[last];
        let (c, s) = piece(bl + (1.0 + bl.abs()));
        if s > 0.0 {
            return Ok(((c - beta) / s).max(bl));
        }
        return Err(Error::InfeasibleHyperplane);
    }
    let (lo, hi) = (bps[first - 1], bps[first]);
    let (c, s) = piece(0.5 * (lo + hi));
    if s > 0.0 {
        Ok(((c - beta) / s).clamp(lo, hi))
    } else {
        Ok(hi)
    }
}

/// Dynamic stepsize `‖r‖² / ‖A_lᵀ r‖²` with `r = A_l x − b_l`; zero when `r = 0`.
pub fn dynamic_step(block: BlockView<'_>, x: &[f64]) -> Result<f64> {
    let r = block.residual(x);
    let atr = block.apply_transpose(&r);
    dynamic_step_from(&r, &atr)
}

/// Dynamic stepsize from a precomputed residual and its back-projection.
pub fn dynamic_step_from(r: &[f64], atr: &[f64]) -> Result<f64> {
    let r_sq = norm_sq(r);
    if r_sq == 0.0 {
        return Ok(0.0);
    }
    let atr_sq = norm_sq(atr);
    if atr_sq == 0.0 {
        return Err(Error::InconsistentBlock);
    }
    Ok(r_sq / atr_sq)
}

const POWER_TOL: f64 = 1e-8;
const POWER_MAX_ITER: usize = 10_000;

/// `‖A_l‖₂⁻²` by power iteration on `A_lᵀA_l`.
pub fn constant_step(block: BlockView<'_>) -> Result<f64> {
    let sigma_sq = spectral_norm_sq(block);
    if sigma_sq > 0.0 {
        Ok(1.0 / sigma_sq)
    } else {
        Err(Error::ZeroBlock)
    }
}

/// Largest eigenvalue of `AᵀA`, i.e. the squared spectral norm.
pub fn spectral_norm_sq(block: BlockView<'_>) -> f64 {
    let n = block.n();
    if block.frobenius_sq() == 0.0 {
        return 0.0;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let nv = norm_sq(&v).sqrt();
    v.iter_mut().for_each(|x| *x /= nv);

    let mut estimate = 0.0;
    for _ in 0..POWER_MAX_ITER {
        let w = block.apply_transpose(&block.apply(&v));
        let rayleigh = dot(&v, &w);
        let nw = norm_sq(&w).sqrt();
        if nw == 0.0 {
            // start vector fell into the null space; retry from a row
            let k = (0..block.m())
                .find(|&k| norm_sq(block.row(k)) > 0.0)
                .unwrap();
            let r = block.row(k);
            let nr = norm_sq(r).sqrt();
            v = r.iter().map(|x| x / nr).collect();
            continue;
        }
        let converged = (rayleigh - estimate).abs() <= POWER_TOL * rayleigh;
        estimate = rayleigh;
        v = w.into_iter().map(|x| x / nw).collect();
        if converged {
            break;
        }
    }
    estimate
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::RowSystem;
    use crate::shrinkage::soft_shrink;

    fn g(z: &[f64], a: &[f64], t: f64, lambda: f64) -> f64 {
        let shifted: Vec<f64> = z.iter().zip(a).map(|(zi, ai)| zi - t * ai).collect();
        dot(a, &soft_shrink(&shifted, lambda))
    }

    #[test]
    fn exact_step_examples() {
        assert_eq!(exact_step(&[1.0, 0.0], &[1.0, 0.0], 0.0, 0.0).unwrap(), 1.0);
        let t = exact_step(&[0.0, 0.0], &[1.0, 0.0], 2.0, 1.0).unwrap();
        assert!((t + 3.0).abs() < 1e-12);
        let t = exact_step(&[0.0, 0.0], &[1.0, 1.0], 4.0, 1.0).unwrap();
        assert!((t + 3.0).abs() < 1e-12);
        assert_eq!(exact_step(&[1.0], &[0.0], 1.0, 1.0), Err(Error::ZeroRow));
    }

    #[test]
    fn exact_step_flat_segment_left_endpoint() {
        // g(t) = S_1(2 − t) is zero on [1, 3]
        let t = exact_step(&[2.0], &[1.0], 0.0, 1.0).unwrap();
        assert_eq!(t, 1.0);
        assert_eq!(g(&[2.0], &[1.0], t, 1.0), 0.0);
    }

    #[test]
    fn exact_step_nonnegative() {
        let z = [0.5, -1.0, 2.0];
        let a = [1.0, -2.0, 0.5];
        let t = exact_step_with(&z, &a, 3.0, 0.25, ShrinkMode::Nonnegative).unwrap();
        let x: Vec<f64> = z
            .iter()
            .zip(&a)
            .map(|(zi, ai)| (zi - t * ai - 0.25f64).max(0.0))
            .collect();
        assert!((dot(&a, &x) - 3.0).abs() < 1e-12);
        // a ≥ 0 and β < 0: no nonnegative point on the hyperplane
        assert_eq!(
            exact_step_with(&[0.0, 0.0], &[1.0, 2.0], -1.0, 0.5, ShrinkMode::Nonnegative),
            Err(Error::InfeasibleHyperplane)
        );
    }

    #[test]
    fn dynamic_step_examples() {
        let s = RowSystem::from_rows(2, &[vec![3.0, 4.0]], &[0.0]).unwrap();
        // aᵀx − β = 5
        let t = dynamic_step(s.full(), &[1.0, 0.5]).unwrap();
        assert!((t - 1.0 / 25.0).abs() < 1e-15);

        let q = RowSystem::from_rows(2, &[vec![0.6, 0.8], vec![-0.8, 0.6]], &[1.0, 2.0]).unwrap();
        assert!((dynamic_step(q.full(), &[5.0, -3.0]).unwrap() - 1.0).abs() < 1e-12);

        let e = RowSystem::from_rows(2, &[vec![1.0, 0.0]], &[2.0]).unwrap();
        assert_eq!(dynamic_step(e.full(), &[2.0, 7.0]).unwrap(), 0.0);
    }

    #[test]
    fn dynamic_step_detects_inconsistent_block() {
        // rows a and −a with b = (1, 1): r = (−1, −1), Aᵀr = 0
        let s = RowSystem::from_rows(2, &[vec![1.0, 1.0], vec![-1.0, -1.0]], &[1.0, 1.0]).unwrap();
        assert_eq!(
            dynamic_step(s.full(), &[0.0, 0.0]),
            Err(Error::InconsistentBlock)
        );
    }

    #[test]
    fn constant_step_examples() {
        let eye = RowSystem::from_rows(2, &[vec![1.0, 0.0], vec![0.0, 1.0]], &[0.0, 0.0]).unwrap();
        assert!((constant_step(eye.full()).unwrap() - 1.0).abs() < 1e-12);
        let two = RowSystem::from_rows(2, &[vec![2.0, 0.0], vec![0.0, 2.0]], &[0.0, 0.0]).unwrap();
        assert!((constant_step(two.full()).unwrap() - 0.25).abs() < 1e-12);
        let zero = RowSystem::from_rows(2, &[vec![0.0, 0.0]], &[0.0]).unwrap();
        assert_eq!(constant_step(zero.full()), Err(Error::ZeroBlock));
    }

    #[test]
    fn rule_caches_constants() {
        let s = RowSystem::from_rows(2, &[vec![2.0, 0.0], vec![0.0, 1.0]], &[0.0, 0.0]).unwrap();
        let mut rule = StepsizeRule::new(StepKind::Constant);
        assert_eq!(rule.cached(0), None);
        let t = rule.constant_for(0, s.full()).unwrap();
        assert_eq!(rule.cached(0), Some(t));
        rule.invalidate(0);
        assert_eq!(rule.cached(0), None);
    }
}
