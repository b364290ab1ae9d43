//! Independent reference implementations used across the integration tests.
#![allow(dead_code)]

use rowaction::scenarios::NormalSampler;
use rowaction::RowSystem;

pub fn soft(z: f64, lambda: f64) -> f64 {
    if z > lambda {
        z - lambda
    } else if z < -lambda {
        z + lambda
    } else {
        0.0
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// `g(t) = aᵀ S_λ(z − t a) − β`.
pub fn step_equation(z: &[f64], a: &[f64], beta: f64, lambda: f64, t: f64) -> f64 {
    z.iter()
        .zip(a)
        .map(|(&zi, &ai)| ai * soft(zi - t * ai, lambda))
        .sum::<f64>()
        - beta
}

/// Smallest root of the (nonincreasing) step equation by bisection on an
/// expanding bracket.
pub fn bisect_step(z: &[f64], a: &[f64], beta: f64, lambda: f64) -> f64 {
    let g = |t| step_equation(z, a, beta, lambda, t);
    let (mut lo, mut hi) = (-1.0, 1.0);
    while g(lo) <= 0.0 {
        lo *= 2.0;
    }
    while g(hi) > 0.0 {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

/// Classical Kaczmarz projection onto `aᵀx = b`.
pub fn kaczmarz_project(x: &mut [f64], a: &[f64], b: f64) {
    let t = (dot(a, x) - b) / dot(a, a);
    for (xi, ai) in x.iter_mut().zip(a) {
        *xi -= t * ai;
    }
}

/// One linearized Bregman step on the whole system with the dynamic stepsize.
pub fn linearized_bregman_step(
    z: &mut [f64],
    x: &mut [f64],
    rows: &[Vec<f64>],
    b: &[f64],
    lambda: f64,
) {
    let r: Vec<f64> = rows.iter().zip(b).map(|(a, bi)| dot(a, x) - bi).collect();
    let mut atr = vec![0.0; x.len()];
    for (a, ri) in rows.iter().zip(&r) {
        for (v, ai) in atr.iter_mut().zip(a) {
            *v += ai * ri;
        }
    }
    let t = dot(&r, &r) / dot(&atr, &atr);
    for ((zi, xi), gi) in z.iter_mut().zip(x.iter_mut()).zip(&atr) {
        *zi -= t * gi;
        *xi = soft(*zi, lambda);
    }
}

/// Gaussian `m×n` rows and the right-hand side generated by `x`.
pub fn gaussian_rows(
    sampler: &mut NormalSampler,
    m: usize,
    x: &[f64],
) -> (Vec<Vec<f64>>, Vec<f64>) {
    let rows: Vec<Vec<f64>> = (0..m).map(|_| sampler.vector(x.len())).collect();
    let b = rows.iter().map(|a| dot(a, x)).collect();
    (rows, b)
}

/// A consistent Gaussian system with a dense random solution.
pub fn consistent_system(seed: u64, m: usize, n: usize) -> RowSystem {
    let mut sampler = NormalSampler::new(seed);
    let x = sampler.vector(n);
    let (rows, b) = gaussian_rows(&mut sampler, m, &x);
    RowSystem::from_rows(n, &rows, &b).unwrap()
}

/// Unnormalized 2-D DFT coefficient of a row-major image, computed directly
/// from the unreduced phase.
pub fn naive_dft(data: &[f64], width: usize, height: usize, f_row: i64, f_col: i64) -> (f64, f64) {
    let (mut re, mut im) = (0.0, 0.0);
    for i in 0..height {
        for j in 0..width {
            let theta = -2.0
                * std::f64::consts::PI
                * (f_row as f64 * i as f64 / height as f64
                    + f_col as f64 * j as f64 / width as f64);
            let v = data[i * width + j];
            re += v * theta.cos();
            im += v * theta.sin();
        }
    }
    (re, im)
}
