//! Deterministic generators for the compressed-sensing, tomography and
//! interferometry experiments, plus brute-force oracles for small systems.

use std::collections::BTreeSet;
use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{dot, norm, rel_dist};
use crate::operators::{fourier_rows, Image2D, ImageShape, RowSystem};
use crate::shrinkage::objective;
use crate::solvers::MeasurementBlock;

/// The true solution `x†` used to report reconstruction errors.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth(Vec<f64>);

impl GroundTruth {
    pub fn new(x: Vec<f64>) -> Self {
        GroundTruth(x)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// `‖x − x†‖ / ‖x†‖`
    pub fn relative_error(&self, x: &[f64]) -> f64 {
        rel_dist(x, &self.0)
    }

    pub fn check_dim(&self, n: usize) -> Result<()> {
        if self.0.len() == n {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                expected: n,
                found: self.0.len(),
            })
        }
    }
}

/// Standard normal samples by the Box–Muller transform on a seeded
/// ChaCha8 stream.
#[derive(Debug, Clone)]
pub struct NormalSampler {
    rng: ChaCha8Rng,
    spare: Option<f64>,
}

impl NormalSampler {
    pub fn new(seed: u64) -> Self {
        NormalSampler {
            rng: ChaCha8Rng::seed_from_u64(seed),
            spare: None,
        }
    }

    pub fn sample(&mut self) -> f64 {
        if let Some(s) = self.spare.take() {
            return s;
        }
        // u1 in (0, 1] keeps the log finite
        let u1 = 1.0 - self.rng.gen::<f64>();
        let u2 = self.rng.gen::<f64>();
        let radius = (-2.0 * u1.ln()).sqrt();
        let angle = 2.0 * PI * u2;
        self.spare = Some(radius * angle.sin());
        radius * angle.cos()
    }

    pub fn vector(&mut self, n: usize) -> Vec<f64> {
        (0..n).map(|_| self.sample()).collect()
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }
}

/// Endless stream of Gaussian measurements `(a_k, a_kᵀx†)`.
#[derive(Debug, Clone)]
pub struct GaussianRowStream {
    sampler: NormalSampler,
    truth: Vec<f64>,
}

impl Iterator for GaussianRowStream {
    type Item = (Vec<f64>, f64);

    fn next(&mut self) -> Option<Self::Item> {
        let a = self.sampler.vector(self.truth.len());
        let b = dot(&a, &self.truth);
        Some((a, b))
    }
}

impl GaussianRowStream {
    /// The same stream as single-row measurement blocks.
    pub fn blocks(self) -> impl Iterator<Item = MeasurementBlock> {
        self.map(|(a, b)| MeasurementBlock::single(a, b))
    }
}

/// An `s`-sparse `x† ∈ Rⁿ` (standard normal values on uniformly drawn
/// positions) and a stream of i.i.d. standard normal rows measuring it.
pub fn gen_gaussian_cs(
    n: usize,
    sparsity: usize,
    seed: u64,
) -> Result<(GroundTruth, GaussianRowStream)> {
    if sparsity == 0 || sparsity > n {
        return Err(Error::BadSparsity { sparsity, n });
    }
    let mut sampler = NormalSampler::new(seed);
    let mut positions = rand::seq::index::sample(sampler.rng(), n, sparsity).into_vec();
    positions.sort_unstable();
    let mut x = vec![0.0; n];
    for p in positions {
        let mut v = 0.0;
        while v == 0.0 {
            v = sampler.sample();
        }
        x[p] = v;
    }
    let stream = GaussianRowStream {
        sampler,
        truth: x.clone(),
    };
    Ok((GroundTruth(x), stream))
}

/// Intensity levels used by [`gen_phantom`].
pub const PHANTOM_LEVELS: [f64; 4] = [0.0, 0.4, 0.8, 1.0];

/// Piecewise-constant test image: an ellipse at 0.8 covering about 40 % of
/// the area, holding a 0.4 rectangle below the centre and a 1.0 rectangle
/// above it. Mirror-symmetric left to right.
pub fn gen_phantom(width: usize, height: usize) -> Image2D {
    let mut img = Image2D::zeros(ImageShape::new(width, height));
    for i in 0..height {
        // normalized pixel centres in (−1, 1); y grows downwards
        let y = 2.0 * (i as f64 + 0.5) / height as f64 - 1.0;
        for j in 0..width {
            let x = 2.0 * (j as f64 + 0.5) / width as f64 - 1.0;
            let mut v = 0.0;
            if (x / 0.75).powi(2) + (y / 0.68).powi(2) <= 1.0 {
                v = 0.8;
                if x.abs() <= 0.35 && (0.15..=0.45).contains(&y) {
                    v = 0.4;
                }
                if x.abs() <= 0.2 && (-0.4..=-0.1).contains(&y) {
                    v = 1.0;
                }
            }
            img.set(i, j, v);
        }
    }
    img
}

/// A straight ray clipped to the image box `[0, width] × [0, height]`, with
/// `x` along columns and `y` along rows.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray {
    pub origin: (f64, f64),
    pub direction: (f64, f64),
    pub t_enter: f64,
    pub t_exit: f64,
}

impl Ray {
    pub fn point(&self, t: f64) -> (f64, f64) {
        (
            self.origin.0 + t * self.direction.0,
            self.origin.1 + t * self.direction.1,
        )
    }

    pub fn length(&self) -> f64 {
        self.t_exit - self.t_enter
    }
}

/// Parallel-beam geometry: `n_angles` angles evenly spaced over `[0, π)`,
/// `n_bins` parallel rays per angle evenly spaced across the image diagonal.
/// Row `angle * n_bins + bin` holds exact ray–pixel intersection lengths.
#[derive(Debug, Clone, PartialEq)]
pub struct TomoGeometry {
    pub shape: ImageShape,
    pub n_angles: usize,
    pub n_bins: usize,
}

impl TomoGeometry {
    pub fn new(shape: ImageShape, n_angles: usize, n_bins: usize) -> Result<Self> {
        if n_angles == 0 || n_bins == 0 {
            return Err(Error::InvalidConfig(
                "need at least one angle and one bin".into(),
            ));
        }
        if shape.pixels() == 0 {
            return Err(Error::InvalidConfig("empty image".into()));
        }
        Ok(TomoGeometry {
            shape,
            n_angles,
            n_bins,
        })
    }

    pub fn n_rays(&self) -> usize {
        self.n_angles * self.n_bins
    }

    /// The clipped ray for `(angle, bin)`, or `None` if it misses the image.
    pub fn ray(&self, angle: usize, bin: usize) -> Option<Ray> {
        let (w, h) = (self.shape.width as f64, self.shape.height as f64);
        let theta = angle as f64 * PI / self.n_angles as f64;
        let dir = (theta.cos(), theta.sin());
        let normal = (-theta.sin(), theta.cos());
        let diag = w.hypot(h);
        let s = -0.5 * diag + (bin as f64 + 0.5) * diag / self.n_bins as f64;
        let origin = (0.5 * w + s * normal.0, 0.5 * h + s * normal.1);

        let mut t_enter = f64::NEG_INFINITY;
        let mut t_exit = f64::INFINITY;
        for (o, d, hi) in [(origin.0, dir.0, w), (origin.1, dir.1, h)] {
            if d.abs() < 1e-15 {
                if o < 0.0 || o > hi {
                    return None;
                }
            } else {
                let (a, b) = ((0.0 - o) / d, (hi - o) / d);
                t_enter = t_enter.max(a.min(b));
                t_exit = t_exit.min(a.max(b));
            }
        }
        (t_exit > t_enter).then_some(Ray {
            origin,
            direction: dir,
            t_enter,
            t_exit,
        })
    }

    /// Siddon traversal: sorted crossings with the pixel grid lines split the
    /// chord into segments, each lying in exactly one pixel.
    pub fn row(&self, angle: usize, bin: usize) -> Vec<f64> {
        let (w, h) = (self.shape.width, self.shape.height);
        let mut row = vec![0.0; w * h];
        let Some(ray) = self.ray(angle, bin) else {
            return row;
        };
        let mut ts = vec![ray.t_enter, ray.t_exit];
        for (o, d, count) in [
            (ray.origin.0, ray.direction.0, w),
            (ray.origin.1, ray.direction.1, h),
        ] {
            if d.abs() < 1e-15 {
                continue;
            }
            for line in 1..count {
                let t = (line as f64 - o) / d;
                if t > ray.t_enter && t < ray.t_exit {
                    ts.push(t);
                }
            }
        }
        ts.sort_unstable_by(f64::total_cmp);
        for pair in ts.windows(2) {
            let len = pair[1] - pair[0];
            if len <= 0.0 {
                continue;
            }
            let (mx, my) = ray.point(0.5 * (pair[0] + pair[1]));
            let j = (mx.floor().max(0.0) as usize).min(w - 1);
            let i = (my.floor().max(0.0) as usize).min(h - 1);
            row[i * w + j] += len;
        }
        row
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.n_angles)
            .flat_map(|a| (0..self.n_bins).map(move |b| (a, b)))
            .map(|(a, b)| self.row(a, b))
            .collect()
    }

    /// The projection system with right-hand side `A · image`.
    pub fn system_for(&self, image: &Image2D) -> Result<RowSystem> {
        if image.shape() != self.shape {
            return Err(Error::DimensionMismatch {
                expected: self.shape.pixels(),
                found: image.data.len(),
            });
        }
        let rows = self.rows();
        let rhs: Vec<f64> = rows.iter().map(|r| dot(r, &image.data)).collect();
        RowSystem::from_rows(self.shape.pixels(), &rows, &rhs)
    }
}

/// Synthetic interferometric observation: phantom ground truth and one block
/// of Fourier measurements per time step.
#[derive(Debug, Clone)]
pub struct RiScenario {
    pub truth: Image2D,
    /// Canonical frequencies sampled by each block.
    pub frequencies: Vec<Vec<(i64, i64)>>,
    pub blocks: Vec<MeasurementBlock>,
}

/// Default number of arms in the base sampling pattern.
pub const RI_ARMS: usize = 5;

/// Base sampling pattern: `samples` points spread over `arms` radial arms
/// that share the same seeded radii. Arms are evenly spaced over a half-turn
/// and every point comes with its mirror `−p` (conjugate-symmetric coverage).
///
/// Rotating the pattern by `π / arms` maps it onto itself, so a rotation
/// schedule revisits frequencies it has already sampled once it has turned
/// that far. With five arms a half-turn covers the pattern five times over,
/// so after the first few blocks new arrivals mostly land on frequencies
/// already sampled (after snapping to the grid).
pub fn ri_base_pattern(
    shape: ImageShape,
    samples: usize,
    arms: usize,
    seed: u64,
) -> Vec<(f64, f64)> {
    let arms = arms.max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let r_max = 0.5 * shape.width.min(shape.height) as f64 - 0.5;
    let offset = rng.gen::<f64>() * PI / arms as f64;
    let per_arm = samples.div_ceil(arms).max(1);
    // quadratic radial spacing packs samples toward the centre
    let radii: Vec<f64> = (0..per_arm)
        .map(|k| {
            let frac = (k as f64 + rng.gen::<f64>()) / per_arm as f64;
            r_max * frac * frac
        })
        .collect();
    let mut pts = Vec::with_capacity(2 * samples);
    for s in 0..samples {
        let arm = s % arms;
        let phi = offset + arm as f64 * PI / arms as f64;
        let r = radii[s / arms];
        let p = (r * phi.cos(), r * phi.sin());
        pts.push(p);
        pts.push((-p.0, -p.1));
    }
    pts
}

/// Canonical representative of the frequency `f` modulo the grid, identified
/// with its conjugate `−f`.
pub fn canonical_frequency(shape: ImageShape, f: (i64, i64)) -> (i64, i64) {
    let (h, w) = (shape.height as i64, shape.width as i64);
    let a = (f.0.rem_euclid(h), f.1.rem_euclid(w));
    let b = ((h - a.0) % h, (w - a.1) % w);
    a.min(b)
}

/// Pattern rotated by `angle`, rounded to the grid and canonicalized;
/// sorted and deduplicated.
pub fn rotated_frequencies(shape: ImageShape, base: &[(f64, f64)], angle: f64) -> Vec<(i64, i64)> {
    let (c, s) = (angle.cos(), angle.sin());
    let set: BTreeSet<(i64, i64)> = base
        .iter()
        .map(|&(u, v)| {
            let (ru, rv) = (c * u - s * v, s * u + c * v);
            // u runs along columns, v along rows
            canonical_frequency(shape, (rv.round() as i64, ru.round() as i64))
        })
        .collect();
    set.into_iter().collect()
}

/// Interferometry scenario: block `l` samples the base pattern rotated by
/// `l·π/n_blocks`. Frequencies may repeat across blocks. All-zero rows
/// (imaginary parts at self-conjugate frequencies) are dropped.
pub fn gen_ri_scenario(
    shape: ImageShape,
    n_blocks: usize,
    samples_per_block: usize,
    seed: u64,
) -> Result<RiScenario> {
    gen_ri_scenario_with_arms(shape, n_blocks, samples_per_block, RI_ARMS, seed)
}

/// [`gen_ri_scenario`] with an explicit number of pattern arms.
pub fn gen_ri_scenario_with_arms(
    shape: ImageShape,
    n_blocks: usize,
    samples_per_block: usize,
    arms: usize,
    seed: u64,
) -> Result<RiScenario> {
    if n_blocks == 0 || samples_per_block == 0 {
        return Err(Error::InvalidConfig(
            "need at least one block and one sample".into(),
        ));
    }
    let truth = gen_phantom(shape.width, shape.height);
    let base = ri_base_pattern(shape, samples_per_block, arms, seed);
    let mut frequencies = Vec::with_capacity(n_blocks);
    let mut blocks = Vec::with_capacity(n_blocks);
    for l in 0..n_blocks {
        let freqs = rotated_frequencies(shape, &base, l as f64 * PI / n_blocks as f64);
        let mut rows = Vec::with_capacity(2 * freqs.len());
        for (re, im) in fourier_rows(shape, &freqs)? {
            rows.push(re);
            if im.iter().any(|&v| v.abs() > 1e-12) {
                rows.push(im);
            }
        }
        let rhs = rows.iter().map(|r| dot(r, &truth.data)).collect();
        blocks.push(MeasurementBlock::new(rows, rhs));
        frequencies.push(freqs);
    }
    Ok(RiScenario {
        truth,
        frequencies,
        blocks,
    })
}

fn feasibility_tol(system: &RowSystem) -> f64 {
    1e-8 * (1.0 + norm(system.rhs()))
}

/// Minimizer of `λ‖x‖₁ + ½‖x‖²` over `Ax = b` by enumerating all `3ⁿ` sign
/// patterns. For each pattern `σ` with support `S` the KKT system
/// `x_S = A_Sᵀy − λσ_S`, `A_S x_S = b` is solved for `y` by least squares;
/// sign-consistent feasible candidates are compared by objective value.
pub fn oracle_min_objective(system: &RowSystem, lambda: f64) -> Result<Vec<f64>> {
    let n = system.n();
    let m = system.m();
    if n > 15 {
        return Err(Error::InvalidConfig(format!(
            "sign enumeration needs n <= 15, got {n}"
        )));
    }
    let a = DMatrix::from_fn(m, n, |r, c| system.row(r)[c]);
    let b = DVector::from_column_slice(system.rhs());
    let tol = feasibility_tol(system);

    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut signs = vec![0i8; n];
    for pattern in 0..3usize.pow(n as u32) {
        let mut p = pattern;
        for s in signs.iter_mut() {
            *s = [0, 1, -1][p % 3];
            p /= 3;
        }
        let support: Vec<usize> = (0..n).filter(|&i| signs[i] != 0).collect();
        let mut x = vec![0.0; n];
        if !support.is_empty() {
            let a_s = a.select_columns(&support);
            let sigma =
                DVector::from_iterator(support.len(), support.iter().map(|&i| signs[i] as f64));
            let gram = &a_s * a_s.transpose();
            let rhs = &b + lambda * (&a_s * &sigma);
            let svd = gram.svd(true, true);
            let eps = 1e-13 * svd.singular_values.max().max(f64::MIN_POSITIVE);
            let Ok(y) = svd.solve(&rhs, eps) else {
                continue;
            };
            let x_s = a_s.transpose() * y - lambda * &sigma;
            if support
                .iter()
                .zip(x_s.iter())
                .any(|(&i, &v)| v * signs[i] as f64 <= 0.0)
            {
                continue;
            }
            for (&i, &v) in support.iter().zip(x_s.iter()) {
                x[i] = v;
            }
        }
        if system.residual_norm(&x) > tol {
            continue;
        }
        let f = objective(&x, lambda);
        if best.as_ref().is_none_or(|(fb, _)| f < *fb) {
            best = Some((f, x));
        }
    }
    best.map(|(_, x)| x).ok_or(Error::NoFeasiblePattern)
}

/// Minimum-norm solution `Aᵀ(AAᵀ + εI)⁻¹b` with `ε = 1e-12`.
pub fn oracle_min_norm(system: &RowSystem) -> Result<Vec<f64>> {
    let (m, n) = (system.m(), system.n());
    let a = DMatrix::from_fn(m, n, |r, c| system.row(r)[c]);
    let gram = &a * a.transpose() + DMatrix::identity(m, m) * 1e-12;
    let chol = gram.cholesky().ok_or(Error::SingularSystem)?;
    let y = chol.solve(&DVector::from_column_slice(system.rhs()));
    let x: Vec<f64> = (a.transpose() * y).iter().copied().collect();
    if system.residual_norm(&x) > 1e-6 * (1.0 + norm(system.rhs())) {
        return Err(Error::SingularSystem);
    }
    Ok(x)
}
