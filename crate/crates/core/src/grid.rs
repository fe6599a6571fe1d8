//! Uniform lattices and the sampled real fields that live on them.
//!
//! Differentiation uses fourth-order finite differences everywhere: centered
//! five-point stencils in the interior and one-sided stencils of the same order
//! on the two nodes nearest each edge. Quadrature is composite Simpson; when the
//! interval count is odd the last three intervals use Simpson's 3/8 rule so the
//! rule stays fourth order on every node count.

use crate::error::{Error, Result};

/// Smallest node count accepted by [`Grid1D::new`].
pub const MIN_NODES: usize = 16;

/// Width of the first-derivative stencils.
pub const FIRST_DERIVATIVE_WIDTH: usize = 5;

/// Width of the second-derivative stencils (the boundary rows need six nodes).
pub const SECOND_DERIVATIVE_WIDTH: usize = 6;

/// A uniform one-dimensional lattice `q_k = q_min + k h`, `k = 0..n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid1D {
    q_min: f64,
    q_max: f64,
    n: usize,
}

impl Grid1D {
    pub fn new(q_min: f64, q_max: f64, n: usize) -> Result<Self> {
        if !q_min.is_finite() || !q_max.is_finite() {
            return Err(Error::InvalidGrid("bounds must be finite".into()));
        }
        if q_max <= q_min {
            return Err(Error::InvalidGrid(format!(
                "q_max ({q_max}) must exceed q_min ({q_min})"
            )));
        }
        if n < MIN_NODES {
            return Err(Error::InvalidGrid(format!(
                "need at least {MIN_NODES} nodes, got {n}"
            )));
        }
        Ok(Self { q_min, q_max, n })
    }

    /// Symmetric grid on `[-half_width, half_width]`.
    pub fn symmetric(half_width: f64, n: usize) -> Result<Self> {
        Self::new(-half_width, half_width, n)
    }

    pub fn q_min(&self) -> f64 {
        self.q_min
    }

    pub fn q_max(&self) -> f64 {
        self.q_max
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn spacing(&self) -> f64 {
        (self.q_max - self.q_min) / (self.n - 1) as f64
    }

    pub fn node(&self, k: usize) -> f64 {
        self.q_min + k as f64 * self.spacing()
    }

    pub fn nodes(&self) -> Vec<f64> {
        let h = self.spacing();
        (0..self.n).map(|k| self.q_min + k as f64 * h).collect()
    }

    /// Samples `f` at every node.
    pub fn sample<F: FnMut(f64) -> f64>(&self, mut f: F) -> Field1D {
        let values = self.nodes().into_iter().map(&mut f).collect();
        Field1D {
            grid: *self,
            values,
        }
    }

    /// Composite Simpson weights (3/8 rule on the tail for odd interval counts).
    pub fn quadrature_weights(&self) -> Vec<f64> {
        quadrature_weights(self.n, self.spacing())
    }
}

fn quadrature_weights(n: usize, h: f64) -> Vec<f64> {
    let intervals = n - 1;
    let mut w = vec![0.0; n];
    let simpson_intervals = if intervals % 2 == 0 {
        intervals
    } else {
        intervals - 3
    };
    for pair in 0..simpson_intervals / 2 {
        let k = 2 * pair;
        w[k] += h / 3.0;
        w[k + 1] += 4.0 * h / 3.0;
        w[k + 2] += h / 3.0;
    }
    if simpson_intervals != intervals {
        let k = simpson_intervals;
        let c = 3.0 * h / 8.0;
        w[k] += c;
        w[k + 1] += 3.0 * c;
        w[k + 2] += 3.0 * c;
        w[k + 3] += c;
    }
    w
}

/// Real values sampled at every node of a [`Grid1D`].
#[derive(Debug, Clone, PartialEq)]
pub struct Field1D {
    grid: Grid1D,
    values: Vec<f64>,
}

impl Field1D {
    pub fn new(grid: Grid1D, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::ShapeMismatch {
                expected: grid.len(),
                got: values.len(),
            });
        }
        check_finite(&values)?;
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: Grid1D) -> Self {
        Self {
            grid,
            values: vec![0.0; grid.len()],
        }
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Nodewise map, keeping the grid.
    pub fn map<F: FnMut(f64) -> f64>(&self, f: F) -> Field1D {
        Field1D {
            grid: self.grid,
            values: self.values.iter().copied().map(f).collect(),
        }
    }

    /// Nodewise combination of two fields on the same grid.
    pub fn zip_map<F: FnMut(f64, f64) -> f64>(&self, other: &Field1D, mut f: F) -> Field1D {
        debug_assert_eq!(self.grid, other.grid);
        Field1D {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    /// Piecewise-linear interpolation; clamps outside the grid.
    pub fn interpolate(&self, q: f64) -> f64 {
        let h = self.grid.spacing();
        let x = (q - self.grid.q_min) / h;
        if x <= 0.0 {
            return self.values[0];
        }
        let last = self.values.len() - 1;
        if x >= last as f64 {
            return self.values[last];
        }
        let k = x.floor() as usize;
        let t = x - k as f64;
        self.values[k] + t * (self.values[k + 1] - self.values[k])
    }
}

fn check_finite(values: &[f64]) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(index) => Err(Error::NonFinite { index }),
        None => Ok(()),
    }
}

pub(crate) fn first_derivative_line(f: &[f64], h: f64, out: &mut [f64]) {
    let n = f.len();
    let d = 12.0 * h;
    out[0] = (-25.0 * f[0] + 48.0 * f[1] - 36.0 * f[2] + 16.0 * f[3] - 3.0 * f[4]) / d;
    out[1] = (-3.0 * f[0] - 10.0 * f[1] + 18.0 * f[2] - 6.0 * f[3] + f[4]) / d;
    for i in 2..n - 2 {
        out[i] = (f[i - 2] - 8.0 * f[i - 1] + 8.0 * f[i + 1] - f[i + 2]) / d;
    }
    out[n - 2] =
        (3.0 * f[n - 1] + 10.0 * f[n - 2] - 18.0 * f[n - 3] + 6.0 * f[n - 4] - f[n - 5]) / d;
    out[n - 1] = (25.0 * f[n - 1] - 48.0 * f[n - 2] + 36.0 * f[n - 3] - 16.0 * f[n - 4]
        + 3.0 * f[n - 5])
        / d;
}

fn second_derivative_line(f: &[f64], h: f64, out: &mut [f64]) {
    let n = f.len();
    let d = 12.0 * h * h;
    out[0] =
        (45.0 * f[0] - 154.0 * f[1] + 214.0 * f[2] - 156.0 * f[3] + 61.0 * f[4] - 10.0 * f[5]) / d;
    out[1] = (10.0 * f[0] - 15.0 * f[1] - 4.0 * f[2] + 14.0 * f[3] - 6.0 * f[4] + f[5]) / d;
    for i in 2..n - 2 {
        out[i] = (-f[i - 2] + 16.0 * f[i - 1] - 30.0 * f[i] + 16.0 * f[i + 1] - f[i + 2]) / d;
    }
    out[n - 2] = (10.0 * f[n - 1] - 15.0 * f[n - 2] - 4.0 * f[n - 3] + 14.0 * f[n - 4]
        - 6.0 * f[n - 5]
        + f[n - 6])
        / d;
    out[n - 1] = (45.0 * f[n - 1] - 154.0 * f[n - 2] + 214.0 * f[n - 3] - 156.0 * f[n - 4]
        + 61.0 * f[n - 5]
        - 10.0 * f[n - 6])
        / d;
}

/// Fourth-order first derivative.
pub fn derivative(f: &Field1D) -> Result<Field1D> {
    let n = f.values.len();
    if n < FIRST_DERIVATIVE_WIDTH {
        return Err(Error::GridTooCoarse {
            nodes: n,
            width: FIRST_DERIVATIVE_WIDTH,
        });
    }
    check_finite(&f.values)?;
    let mut out = vec![0.0; n];
    first_derivative_line(&f.values, f.grid.spacing(), &mut out);
    Ok(Field1D {
        grid: f.grid,
        values: out,
    })
}

/// Fourth-order second derivative.
pub fn second_derivative(f: &Field1D) -> Result<Field1D> {
    let n = f.values.len();
    if n < SECOND_DERIVATIVE_WIDTH {
        return Err(Error::GridTooCoarse {
            nodes: n,
            width: SECOND_DERIVATIVE_WIDTH,
        });
    }
    check_finite(&f.values)?;
    let mut out = vec![0.0; n];
    second_derivative_line(&f.values, f.grid.spacing(), &mut out);
    Ok(Field1D {
        grid: f.grid,
        values: out,
    })
}

/// Composite quadrature over `[q_min, q_max]`. Summation runs in node order.
pub fn integrate(f: &Field1D) -> f64 {
    let w = f.grid.quadrature_weights();
    w.iter().zip(&f.values).map(|(w, v)| w * v).sum()
}

/// Integral of the nodewise product `f * g`.
pub fn integrate_product(f: &Field1D, g: &Field1D) -> f64 {
    let w = f.grid.quadrature_weights();
    w.iter()
        .zip(f.values.iter().zip(&g.values))
        .map(|(w, (a, b))| w * a * b)
        .sum()
}

/// Coordinate axis of a [`Grid2D`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Axis {
    First,
    Second,
}

impl Axis {
    pub fn other(self) -> Axis {
        match self {
            Axis::First => Axis::Second,
            Axis::Second => Axis::First,
        }
    }

    /// Zero-based component index.
    pub fn index(self) -> usize {
        match self {
            Axis::First => 0,
            Axis::Second => 1,
        }
    }
}

/// Tensor product of two 1D grids, coordinates `(q1, q2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid2D {
    pub first: Grid1D,
    pub second: Grid1D,
}

impl Grid2D {
    pub fn new(first: Grid1D, second: Grid1D) -> Self {
        Self { first, second }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.first.len(), self.second.len())
    }

    pub fn axis(&self, axis: Axis) -> &Grid1D {
        match axis {
            Axis::First => &self.first,
            Axis::Second => &self.second,
        }
    }

    pub fn sample<F: FnMut(f64, f64) -> f64>(&self, mut f: F) -> Field2D {
        let q1 = self.first.nodes();
        let q2 = self.second.nodes();
        let mut values = Vec::with_capacity(q1.len() * q2.len());
        for &a in &q1 {
            for &b in &q2 {
                values.push(f(a, b));
            }
        }
        Field2D {
            grid: *self,
            values,
        }
    }
}

/// Real values on a [`Grid2D`], row-major with `q2` varying fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct Field2D {
    grid: Grid2D,
    values: Vec<f64>,
}

impl Field2D {
    pub fn new(grid: Grid2D, values: Vec<f64>) -> Result<Self> {
        let (n1, n2) = grid.shape();
        if values.len() != n1 * n2 {
            return Err(Error::ShapeMismatch {
                expected: n1 * n2,
                got: values.len(),
            });
        }
        check_finite(&values)?;
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn at(&self, i1: usize, i2: usize) -> f64 {
        self.values[i1 * self.grid.second.len() + i2]
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn map<F: FnMut(f64) -> f64>(&self, f: F) -> Field2D {
        Field2D {
            grid: self.grid,
            values: self.values.iter().copied().map(f).collect(),
        }
    }

    pub fn zip_map<F: FnMut(f64, f64) -> f64>(&self, other: &Field2D, mut f: F) -> Field2D {
        debug_assert_eq!(self.grid, other.grid);
        Field2D {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    /// Values along one line of constant coordinate on the other axis.
    pub fn line(&self, axis: Axis, fixed: usize) -> Vec<f64> {
        let (n1, n2) = self.grid.shape();
        match axis {
            Axis::First => (0..n1).map(|i| self.values[i * n2 + fixed]).collect(),
            Axis::Second => self.values[fixed * n2..(fixed + 1) * n2].to_vec(),
        }
    }
}

/// Fourth-order partial derivative along `axis`.
pub fn partial_derivative(f: &Field2D, axis: Axis) -> Result<Field2D> {
    let (n1, n2) = f.grid.shape();
    let along = f.grid.axis(axis);
    if along.len() < FIRST_DERIVATIVE_WIDTH {
        return Err(Error::GridTooCoarse {
            nodes: along.len(),
            width: FIRST_DERIVATIVE_WIDTH,
        });
    }
    check_finite(&f.values)?;
    let h = along.spacing();
    let mut out = vec![0.0; n1 * n2];
    match axis {
        Axis::Second => {
            for i in 0..n1 {
                let row = &f.values[i * n2..(i + 1) * n2];
                first_derivative_line(row, h, &mut out[i * n2..(i + 1) * n2]);
            }
        }
        Axis::First => {
            let mut line = vec![0.0; n1];
            let mut d = vec![0.0; n1];
            for j in 0..n2 {
                for i in 0..n1 {
                    line[i] = f.values[i * n2 + j];
                }
                first_derivative_line(&line, h, &mut d);
                for i in 0..n1 {
                    out[i * n2 + j] = d[i];
                }
            }
        }
    }
    Ok(Field2D {
        grid: f.grid,
        values: out,
    })
}

/// Iterated composite quadrature over the rectangle.
pub fn integrate2d(f: &Field2D) -> f64 {
    let w1 = f.grid.first.quadrature_weights();
    let w2 = f.grid.second.quadrature_weights();
    let n2 = w2.len();
    w1.iter()
        .enumerate()
        .map(|(i, wi)| {
            let row = &f.values[i * n2..(i + 1) * n2];
            wi * w2.iter().zip(row).map(|(w, v)| w * v).sum::<f64>()
        })
        .sum()
}
