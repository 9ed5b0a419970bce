//! The inertia operator `A = (1 - alpha * Laplacian)^k` acting componentwise
//! on vector fields, and the right-invariant inner product it defines.

use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::VectorField;
use crate::grid::TorusGrid;
use crate::spectral::{self, l2_inner_vector, wavenumber_sq};

/// Parameters of the Helmholtz-power inertia operator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InertiaSpec {
    alpha: f64,
    order_k: u32,
}

impl InertiaSpec {
    pub fn new(alpha: f64, order_k: u32) -> Result<Self> {
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(Error::InvalidConfig(format!("alpha = {alpha} must be positive")));
        }
        if order_k < 2 {
            return Err(Error::InvalidConfig(format!("order_k = {order_k} must be >= 2")));
        }
        Ok(Self { alpha, order_k })
    }

    /// `alpha = 0.05 L^2`, `k = 2`.
    pub fn default_for(side: f64) -> Self {
        Self { alpha: 0.05 * side * side, order_k: 2 }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn order_k(&self) -> u32 {
        self.order_k
    }

    /// `(1 + alpha |kappa|^2)^k`, always `>= 1`.
    pub fn symbol(&self, kappa_sq: f64) -> f64 {
        (1.0 + self.alpha * kappa_sq).powi(self.order_k as i32)
    }

    fn multiply(&self, v: &VectorField, f: impl Fn(f64) -> f64) -> Result<VectorField> {
        v.validate()?;
        let grid: TorusGrid = *v.grid();
        let components = v
            .components()
            .iter()
            .map(|c| {
                let (out, residue) = spectral::apply_symbol(&grid, c, |b| {
                    Complex64::new(f(self.symbol(wavenumber_sq(&grid, b))), 0.0)
                });
                // roundoff in the transform is amplified by the largest multiplier
                let peak = f(self.symbol(max_kappa_sq(&grid))).max(1.0);
                let input = c.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
                let scale = out.iter().fold(1.0_f64, |m, x| m.max(x.abs()));
                debug_assert!(residue <= 1e-12 * scale + 1e-13 * peak * input, "imaginary residue {residue}");
                out
            })
            .collect();
        Ok(VectorField::from_raw(grid, components))
    }

    pub fn apply(&self, v: &VectorField) -> Result<VectorField> {
        self.multiply(v, |s| s)
    }

    pub fn invert(&self, m: &VectorField) -> Result<VectorField> {
        self.multiply(m, |s| 1.0 / s)
    }

    /// `<A u, w>` in L2.
    pub fn inner(&self, u: &VectorField, w: &VectorField) -> Result<f64> {
        u.grid().check_same(w.grid(), "a_inner")?;
        l2_inner_vector(&self.apply(u)?, w)
    }

    /// `sqrt(<A u, u>)`.
    pub fn norm(&self, u: &VectorField) -> Result<f64> {
        Ok(self.inner(u, u)?.max(0.0).sqrt())
    }
}

pub fn apply_a(spec: &InertiaSpec, v: &VectorField) -> Result<VectorField> {
    spec.apply(v)
}

pub fn invert_a(spec: &InertiaSpec, m: &VectorField) -> Result<VectorField> {
    spec.invert(m)
}

pub fn a_inner(spec: &InertiaSpec, u: &VectorField, w: &VectorField) -> Result<f64> {
    spec.inner(u, w)
}

/// Largest `|kappa|^2` on the grid (the Nyquist corner).
fn max_kappa_sq(grid: &TorusGrid) -> f64 {
    let half = grid.n() / 2;
    wavenumber_sq(grid, &[half, half])
}
