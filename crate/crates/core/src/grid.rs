//! The periodic grid on the flat torus `T^n = [0, L)^n`.
//!
//! Nodes sit at `x = i * L / N` along every axis. Field values are stored
//! row-major: in two dimensions node `(i0, i1)` lives at index `i0 * N + i1`.

use crate::error::{Error, Result};

/// A square periodic grid with `n` nodes per axis and side length `side`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TorusGrid {
    dim: usize,
    n: usize,
    side: f64,
}

impl TorusGrid {
    pub fn new(dim: usize, n: usize, side: f64) -> Result<Self> {
        if !(1..=2).contains(&dim) {
            return Err(Error::InvalidGrid(format!("dimension {dim} not in {{1, 2}}")));
        }
        if n < 8 || n % 2 != 0 {
            return Err(Error::InvalidGrid(format!("n_points = {n} must be even and >= 8")));
        }
        if !(side.is_finite() && side > 0.0) {
            return Err(Error::InvalidGrid(format!("side length {side} must be positive")));
        }
        Ok(Self { dim, n, side })
    }

    /// Unit torus `[0, 1)^2`.
    pub fn square(n: usize) -> Result<Self> {
        Self::new(2, n, 1.0)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn side(&self) -> f64 {
        self.side
    }

    /// Grid spacing `L / N`.
    pub fn spacing(&self) -> f64 {
        self.side / self.n as f64
    }

    /// `(L / N)^dim`, the flat volume element carried by each node.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    /// Number of nodes, `N^dim`.
    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Number of stored components of a symmetric 2-tensor (upper triangle).
    pub fn sym_components(&self) -> usize {
        self.dim * (self.dim + 1) / 2
    }

    /// Storage slot of tensor entry `(i, j)` in the upper-triangle layout.
    pub fn sym_index(&self, i: usize, j: usize) -> usize {
        let (a, b) = if i <= j { (i, j) } else { (j, i) };
        match self.dim {
            1 => 0,
            _ => a * (2 * self.dim - a - 1) / 2 + b,
        }
    }

    /// Per-axis integer coordinates of a flat node index.
    pub fn multi_index(&self, idx: usize) -> [usize; 2] {
        match self.dim {
            1 => [idx, 0],
            _ => [idx / self.n, idx % self.n],
        }
    }

    /// Node positions per axis, each of length `len()`.
    pub fn node_coords(&self) -> Vec<Vec<f64>> {
        let h = self.spacing();
        (0..self.dim)
            .map(|axis| (0..self.len()).map(|idx| self.multi_index(idx)[axis] as f64 * h).collect())
            .collect()
    }

    /// Signed frequency index of FFT bin `j` (the Nyquist bin maps to `+N/2`).
    pub fn frequency(&self, j: usize) -> i64 {
        let n = self.n as i64;
        let j = j as i64;
        if j <= n / 2 {
            j
        } else {
            j - n
        }
    }

    /// Angular wavenumber `2 pi k / L` of FFT bin `j`.
    pub fn wavenumber(&self, j: usize) -> f64 {
        2.0 * std::f64::consts::PI * self.frequency(j) as f64 / self.side
    }

    pub fn is_nyquist(&self, j: usize) -> bool {
        j == self.n / 2
    }

    /// Wraps a displacement component into `[-L/2, L/2)`.
    pub fn wrap_delta(&self, d: f64) -> f64 {
        let l = self.side;
        (d + 0.5 * l).rem_euclid(l) - 0.5 * l
    }

    pub(crate) fn check_same(&self, other: &TorusGrid, what: &str) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!("{what}: {self:?} vs {other:?}")))
        }
    }
}
