//! Linear-system containers and the linear operators the row-action
//! iterations apply.
//!
//! Rows are stored dense and row-major. A [`RowSystem`] can grow by
//! appending rows, which is how measurements arrive in the online runners.
//! Images are row-major with pixel `(i, j)` (row `i`, column `j`) stored at
//! `i * width + j`.

use std::f64::consts::PI;
use std::ops::Range;

use crate::error::{Error, Result};
use crate::linalg::{dot, norm, norm_sq};

/// A growable dense linear system `A x = b`, one row per measurement.
#[derive(Debug, Clone, PartialEq)]
pub struct RowSystem {
    n: usize,
    data: Vec<f64>,
    rhs: Vec<f64>,
    row_sq_norms: Vec<f64>,
}

impl RowSystem {
    /// An empty system over `n` unknowns.
    pub fn new(n: usize) -> Self {
        RowSystem {
            n,
            data: Vec::new(),
            rhs: Vec::new(),
            row_sq_norms: Vec::new(),
        }
    }

    pub fn from_rows(n: usize, rows: &[Vec<f64>], rhs: &[f64]) -> Result<Self> {
        let mut system = RowSystem::new(n);
        system.append_rows(rows, rhs)?;
        Ok(system)
    }

    /// Appends rows in order. Nothing is modified if any row is malformed.
    pub fn append_rows(&mut self, rows: &[Vec<f64>], rhs: &[f64]) -> Result<()> {
        if rows.len() != rhs.len() {
            return Err(Error::DimensionMismatch {
                expected: rows.len(),
                found: rhs.len(),
            });
        }
        if let Some(bad) = rows.iter().find(|r| r.len() != self.n) {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: bad.len(),
            });
        }
        self.data.reserve(rows.len() * self.n);
        for (row, &b) in rows.iter().zip(rhs) {
            self.data.extend_from_slice(row);
            self.rhs.push(b);
            self.row_sq_norms.push(norm_sq(row));
        }
        Ok(())
    }

    pub fn push_row(&mut self, row: &[f64], b: f64) -> Result<()> {
        if row.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: row.len(),
            });
        }
        self.data.extend_from_slice(row);
        self.rhs.push(b);
        self.row_sq_norms.push(norm_sq(row));
        Ok(())
    }

    /// Number of unknowns.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of rows.
    pub fn m(&self) -> usize {
        self.rhs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rhs.is_empty()
    }

    pub fn row(&self, k: usize) -> &[f64] {
        &self.data[k * self.n..(k + 1) * self.n]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        // chunks_exact panics on a zero chunk size
        (0..self.m()).map(move |k| self.row(k))
    }

    pub fn rhs(&self) -> &[f64] {
        &self.rhs
    }

    pub fn row_sq_norm(&self, k: usize) -> f64 {
        self.row_sq_norms[k]
    }

    pub fn row_sq_norms(&self) -> &[f64] {
        &self.row_sq_norms
    }

    /// Contiguous view of rows `range`.
    pub fn block(&self, range: Range<usize>) -> BlockView<'_> {
        BlockView {
            n: self.n,
            rows: &self.data[range.start * self.n..range.end * self.n],
            rhs: &self.rhs[range],
        }
    }

    pub fn full(&self) -> BlockView<'_> {
        self.block(0..self.m())
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.full().apply(x)
    }

    /// `A x - b`.
    pub fn residual(&self, x: &[f64]) -> Vec<f64> {
        self.full().residual(x)
    }

    pub fn residual_norm(&self, x: &[f64]) -> f64 {
        norm(&self.residual(x))
    }

    /// `‖A x − b‖ / ‖b‖`.
    pub fn residual_norm_rel(&self, x: &[f64]) -> Result<f64> {
        self.full().residual_norm_rel(x)
    }
}

/// `‖A x − b‖ / ‖b‖`; fails with [`Error::ZeroRhs`] when `b = 0`.
pub fn residual_norm_rel(system: &RowSystem, x: &[f64]) -> Result<f64> {
    system.residual_norm_rel(x)
}

/// Borrowed block of consecutive rows `A_l`, `b_l`.
#[derive(Debug, Clone, Copy)]
pub struct BlockView<'a> {
    n: usize,
    rows: &'a [f64],
    rhs: &'a [f64],
}

impl<'a> BlockView<'a> {
    pub fn new(n: usize, rows: &'a [f64], rhs: &'a [f64]) -> Result<Self> {
        if rows.len() != n * rhs.len() {
            return Err(Error::DimensionMismatch {
                expected: n * rhs.len(),
                found: rows.len(),
            });
        }
        Ok(BlockView { n, rows, rhs })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.rhs.len()
    }

    pub fn row(&self, k: usize) -> &'a [f64] {
        &self.rows[k * self.n..(k + 1) * self.n]
    }

    pub fn rhs(&self) -> &'a [f64] {
        self.rhs
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        (0..self.m()).map(|k| dot(self.row(k), x)).collect()
    }

    pub fn apply_transpose(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for (k, &yk) in y.iter().enumerate() {
            if yk != 0.0 {
                for (o, a) in out.iter_mut().zip(self.row(k)) {
                    *o += yk * a;
                }
            }
        }
        out
    }

    pub fn residual(&self, x: &[f64]) -> Vec<f64> {
        (0..self.m())
            .map(|k| dot(self.row(k), x) - self.rhs[k])
            .collect()
    }

    pub fn residual_norm_rel(&self, x: &[f64]) -> Result<f64> {
        let b = norm(self.rhs);
        if b == 0.0 {
            return Err(Error::ZeroRhs);
        }
        Ok(norm(&self.residual(x)) / b)
    }

    /// Squared Frobenius norm.
    pub fn frobenius_sq(&self) -> f64 {
        norm_sq(self.rows)
    }
}

/// Contiguous partition of the rows into blocks `A_1, …, A_L`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockPartition {
    offsets: Vec<usize>,
}

impl BlockPartition {
    /// Partition with no blocks over an empty system.
    pub fn empty() -> Self {
        BlockPartition { offsets: vec![0] }
    }

    /// A single block holding all `m` rows.
    pub fn whole(m: usize) -> Self {
        let mut p = Self::empty();
        if m > 0 {
            p.offsets.push(m);
        }
        p
    }

    /// One block per row.
    pub fn singletons(m: usize) -> Self {
        BlockPartition {
            offsets: (0..=m).collect(),
        }
    }

    /// Blocks of `size` rows; the last block takes the remainder.
    pub fn uniform(m: usize, size: usize) -> Result<Self> {
        if size == 0 {
            return Err(Error::InvalidPartition(
                "block size must be positive".into(),
            ));
        }
        if m == 0 {
            return Ok(Self::empty());
        }
        let mut offsets: Vec<usize> = (0..m).step_by(size).collect();
        offsets.push(m);
        Ok(BlockPartition { offsets })
    }

    pub fn from_sizes(sizes: &[usize]) -> Result<Self> {
        let mut p = Self::empty();
        for &s in sizes {
            p.push_block(s)?;
        }
        Ok(p)
    }

    /// Appends a block of `size` rows after the current last row.
    pub fn push_block(&mut self, size: usize) -> Result<()> {
        if size == 0 {
            return Err(Error::InvalidPartition("empty block".into()));
        }
        let end = self.total_rows() + size;
        self.offsets.push(end);
        Ok(())
    }

    /// Extends the last block by `extra` rows, creating it if needed.
    pub fn grow_last(&mut self, extra: usize) {
        if extra == 0 {
            return;
        }
        if self.offsets.len() == 1 {
            self.offsets.push(extra);
        } else {
            *self.offsets.last_mut().unwrap() += extra;
        }
    }

    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    /// Number of blocks `L`.
    pub fn len(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn total_rows(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    pub fn range(&self, l: usize) -> Range<usize> {
        self.offsets[l]..self.offsets[l + 1]
    }

    pub fn block_size(&self, l: usize) -> usize {
        self.offsets[l + 1] - self.offsets[l]
    }

    pub fn check(&self, system: &RowSystem) -> Result<()> {
        if self.total_rows() != system.m() {
            return Err(Error::InvalidPartition(format!(
                "partition covers {} rows but the system has {}",
                self.total_rows(),
                system.m()
            )));
        }
        Ok(())
    }
}

/// Projection of `x` onto the hyperplane `aᵀx = beta`.
pub fn row_project(x: &[f64], a: &[f64], beta: f64) -> Result<Vec<f64>> {
    let mut out = x.to_vec();
    row_project_in_place(&mut out, a, beta)?;
    Ok(out)
}

pub fn row_project_in_place(x: &mut [f64], a: &[f64], beta: f64) -> Result<()> {
    let a_sq = norm_sq(a);
    if a_sq == 0.0 {
        return Err(Error::ZeroRow);
    }
    let coef = (dot(a, x) - beta) / a_sq;
    for (xi, ai) in x.iter_mut().zip(a) {
        *xi -= coef * ai;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ImageShape {
    pub width: usize,
    pub height: usize,
}

impl ImageShape {
    pub fn new(width: usize, height: usize) -> Self {
        ImageShape { width, height }
    }

    pub fn square(size: usize) -> Self {
        ImageShape::new(size, size)
    }

    pub fn pixels(&self) -> usize {
        self.width * self.height
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Image2D {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl Image2D {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::DimensionMismatch {
                expected: width * height,
                found: data.len(),
            });
        }
        Ok(Image2D {
            width,
            height,
            data,
        })
    }

    pub fn zeros(shape: ImageShape) -> Self {
        Image2D {
            width: shape.width,
            height: shape.height,
            data: vec![0.0; shape.pixels()],
        }
    }

    pub fn shape(&self) -> ImageShape {
        ImageShape::new(self.width, self.height)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.width + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.width + j] = v;
    }
}

/// Per-pixel 2-vectors `(dx, dy)`, e.g. an image gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField2D {
    pub width: usize,
    pub height: usize,
    pub dx: Vec<f64>,
    pub dy: Vec<f64>,
}

impl VectorField2D {
    pub fn new(width: usize, height: usize, dx: Vec<f64>, dy: Vec<f64>) -> Result<Self> {
        for c in [&dx, &dy] {
            if c.len() != width * height {
                return Err(Error::DimensionMismatch {
                    expected: width * height,
                    found: c.len(),
                });
            }
        }
        Ok(VectorField2D {
            width,
            height,
            dx,
            dy,
        })
    }

    pub fn zeros(shape: ImageShape) -> Self {
        VectorField2D {
            width: shape.width,
            height: shape.height,
            dx: vec![0.0; shape.pixels()],
            dy: vec![0.0; shape.pixels()],
        }
    }

    pub fn shape(&self) -> ImageShape {
        ImageShape::new(self.width, self.height)
    }

    pub fn dot(&self, other: &VectorField2D) -> f64 {
        dot(&self.dx, &other.dx) + dot(&self.dy, &other.dy)
    }

    pub fn norm_sq(&self) -> f64 {
        norm_sq(&self.dx) + norm_sq(&self.dy)
    }

    /// Sum of per-pixel Euclidean magnitudes.
    pub fn l21_norm(&self) -> f64 {
        self.dx.iter().zip(&self.dy).map(|(a, b)| a.hypot(*b)).sum()
    }

    pub fn neg(&self) -> VectorField2D {
        VectorField2D {
            width: self.width,
            height: self.height,
            dx: self.dx.iter().map(|v| -v).collect(),
            dy: self.dy.iter().map(|v| -v).collect(),
        }
    }
}

/// Forward differences with a zero last difference (Neumann boundary).
pub fn grad2d(u: &Image2D) -> VectorField2D {
    let (w, h) = (u.width, u.height);
    let mut g = VectorField2D::zeros(u.shape());
    for i in 0..h {
        for j in 0..w {
            let k = i * w + j;
            if j + 1 < w {
                g.dx[k] = u.data[k + 1] - u.data[k];
            }
            if i + 1 < h {
                g.dy[k] = u.data[k + w] - u.data[k];
            }
        }
    }
    g
}

/// Exact adjoint of [`grad2d`] (a negative divergence).
pub fn grad2d_adjoint(p: &VectorField2D) -> Image2D {
    let (w, h) = (p.width, p.height);
    let mut out = Image2D::zeros(p.shape());
    for i in 0..h {
        for j in 0..w {
            let k = i * w + j;
            let mut v = 0.0;
            if j + 1 < w {
                v -= p.dx[k];
            }
            if j > 0 {
                v += p.dx[k - 1];
            }
            if i + 1 < h {
                v -= p.dy[k];
            }
            if i > 0 {
                v += p.dy[k - w];
            }
            out.data[k] = v;
        }
    }
    out
}

/// `B (u, p) = ∇u − p`.
pub fn stacked_apply(u: &Image2D, p: &VectorField2D) -> Result<VectorField2D> {
    if u.shape() != p.shape() {
        return Err(Error::DimensionMismatch {
            expected: u.data.len(),
            found: p.dx.len(),
        });
    }
    let mut g = grad2d(u);
    for (a, b) in g.dx.iter_mut().zip(&p.dx) {
        *a -= b;
    }
    for (a, b) in g.dy.iter_mut().zip(&p.dy) {
        *a -= b;
    }
    Ok(g)
}

/// `Bᵀ w = (∇ᵀw, −w)`.
pub fn stacked_adjoint(w: &VectorField2D) -> (Image2D, VectorField2D) {
    (grad2d_adjoint(w), w.neg())
}

/// Real and imaginary measurement rows of the 2-D DFT at the given
/// frequencies `(f_row, f_col)`.
///
/// For pixel `(i, j)` the rows hold `cos θ` and `sin θ` with
/// `θ = −2π (f_row·i/height + f_col·j/width)`, so their dot products with an
/// image give the real and imaginary parts of its unnormalized DFT
/// coefficient. Frequencies must satisfy `|f_row| < height`, `|f_col| < width`.
pub fn fourier_rows(shape: ImageShape, freqs: &[(i64, i64)]) -> Result<Vec<(Vec<f64>, Vec<f64>)>> {
    let (w, h) = (shape.width as i64, shape.height as i64);
    freqs
        .iter()
        .map(|&(f1, f2)| {
            if f1.abs() >= h || f2.abs() >= w {
                return Err(Error::FrequencyOutOfRange(f1, f2));
            }
            let mut re = Vec::with_capacity(shape.pixels());
            let mut im = Vec::with_capacity(shape.pixels());
            for i in 0..h {
                // exact integer phase reduction keeps the angle accurate
                let pi_ = (f1 * i).rem_euclid(h) as f64 / h as f64;
                for j in 0..w {
                    let pj = (f2 * j).rem_euclid(w) as f64 / w as f64;
                    let theta = -2.0 * PI * (pi_ + pj);
                    re.push(theta.cos());
                    im.push(theta.sin());
                }
            }
            Ok((re, im))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn row_project_examples() {
        assert!(close(
            &row_project(&[0.0, 0.0], &[1.0, 1.0], 2.0).unwrap(),
            &[1.0, 1.0],
            1e-15
        ));
        assert!(close(
            &row_project(&[1.0, 1.0], &[1.0, 0.0], 1.0).unwrap(),
            &[1.0, 1.0],
            1e-15
        ));
        assert!(close(
            &row_project(&[3.0, 0.0], &[1.0, 0.0], 1.0).unwrap(),
            &[1.0, 0.0],
            1e-15
        ));
        assert_eq!(row_project(&[1.0], &[0.0], 1.0), Err(Error::ZeroRow));
    }

    #[test]
    fn relative_residual_examples() {
        let eye = RowSystem::from_rows(2, &[vec![1.0, 0.0], vec![0.0, 1.0]], &[1.0, 0.0]).unwrap();
        assert_eq!(eye.residual_norm_rel(&[1.0, 0.0]).unwrap(), 0.0);
        assert_eq!(eye.residual_norm_rel(&[0.0, 0.0]).unwrap(), 1.0);
        let one = RowSystem::from_rows(2, &[vec![1.0, 1.0]], &[2.0]).unwrap();
        assert_eq!(residual_norm_rel(&one, &[2.0, 2.0]).unwrap(), 1.0);
        let zero = RowSystem::from_rows(2, &[vec![1.0, 1.0]], &[0.0]).unwrap();
        assert_eq!(zero.residual_norm_rel(&[1.0, 1.0]), Err(Error::ZeroRhs));
    }

    #[test]
    fn append_rows_cases() {
        let mut s = RowSystem::new(3);
        s.append_rows(&[vec![1.0, 2.0, 2.0]], &[1.0]).unwrap();
        assert_eq!(s.m(), 1);
        assert_eq!(s.row_sq_norm(0), 9.0);
        let before = s.clone();
        s.append_rows(&[], &[]).unwrap();
        assert_eq!(s, before);
        let err = s.append_rows(&[vec![1.0, 2.0]], &[0.0]).unwrap_err();
        assert_eq!(
            err,
            Error::DimensionMismatch {
                expected: 3,
                found: 2
            }
        );
        assert_eq!(s, before);
        assert!(s.append_rows(&[vec![0.0; 3]], &[0.0, 1.0]).is_err());
    }

    #[test]
    fn partitions() {
        let p = BlockPartition::uniform(7, 3).unwrap();
        assert_eq!(p.offsets(), &[0, 3, 6, 7]);
        assert_eq!(p.len(), 3);
        assert_eq!(p.range(2), 6..7);
        assert_eq!(BlockPartition::singletons(3).len(), 3);
        assert_eq!(BlockPartition::whole(5).offsets(), &[0, 5]);
        assert!(BlockPartition::whole(0).is_empty());
        let mut q = BlockPartition::empty();
        q.grow_last(2);
        q.grow_last(3);
        assert_eq!(q.offsets(), &[0, 5]);
        assert!(q.push_block(0).is_err());
        assert!(BlockPartition::uniform(3, 0).is_err());
    }

    #[test]
    fn gradient_examples() {
        let c = Image2D::new(3, 2, vec![4.0; 6]).unwrap();
        let g = grad2d(&c);
        assert!(g.dx.iter().chain(&g.dy).all(|&v| v == 0.0));

        let u = Image2D::new(2, 2, vec![0.0, 1.0, 0.0, 1.0]).unwrap();
        let g = grad2d(&u);
        assert_eq!(g.dx, vec![1.0, 0.0, 1.0, 0.0]);
        assert_eq!(g.dy, vec![0.0; 4]);
    }

    #[test]
    fn stacked_examples() {
        let u = Image2D::new(3, 3, (0..9).map(|v| (v * v) as f64).collect()).unwrap();
        let p = grad2d(&u);
        let w = stacked_apply(&u, &p).unwrap();
        assert_eq!(w.norm_sq(), 0.0);

        let zero = Image2D::zeros(u.shape());
        assert_eq!(stacked_apply(&zero, &p).unwrap(), p.neg());

        let small = VectorField2D::zeros(ImageShape::new(2, 2));
        assert!(stacked_apply(&u, &small).is_err());
    }

    #[test]
    fn fourier_dc() {
        let shape = ImageShape::new(4, 3);
        let rows = fourier_rows(shape, &[(0, 0)]).unwrap();
        let (re, im) = &rows[0];
        assert!(re.iter().all(|&v| v == 1.0));
        assert!(im.iter().all(|&v| v == 0.0));
        let ones = vec![1.0; 12];
        assert_eq!(dot(re, &ones), 12.0);
        assert_eq!(dot(im, &ones), 0.0);
        assert_eq!(
            fourier_rows(shape, &[(3, 0)]),
            Err(Error::FrequencyOutOfRange(3, 0))
        );
    }
}
