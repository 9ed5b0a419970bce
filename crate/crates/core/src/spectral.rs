//! Fourier-collocation calculus on the torus.
//!
//! Derivatives zero the Nyquist bin so that the discrete derivative is
//! skew-adjoint under the grid pairing, which makes summation by parts hold
//! to roundoff.

use std::cell::RefCell;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::Result;
use crate::field::{MetricField, ScalarField, VectorField};
use crate::grid::TorusGrid;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn transform(grid: &TorusGrid, data: &mut [Complex64], inverse: bool) {
    let n = grid.n();
    let fft = PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if inverse {
            p.plan_fft_inverse(n)
        } else {
            p.plan_fft_forward(n)
        }
    });
    // contiguous axis (the last one) first
    fft.process(data);
    if grid.dim() == 2 {
        let mut column = vec![Complex64::new(0.0, 0.0); n];
        for i1 in 0..n {
            for (i0, c) in column.iter_mut().enumerate() {
                *c = data[i0 * n + i1];
            }
            fft.process(&mut column);
            for (i0, c) in column.iter().enumerate() {
                data[i0 * n + i1] = *c;
            }
        }
    }
}

/// Unnormalized forward DFT of real nodal values.
pub(crate) fn forward(grid: &TorusGrid, values: &[f64]) -> Vec<Complex64> {
    let mut data: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    transform(grid, &mut data, false);
    data
}

/// Inverse DFT (normalized); returns the real part and the largest
/// imaginary residue.
pub(crate) fn inverse(grid: &TorusGrid, mut data: Vec<Complex64>) -> (Vec<f64>, f64) {
    transform(grid, &mut data, true);
    let scale = 1.0 / grid.len() as f64;
    let mut residue: f64 = 0.0;
    let values = data
        .iter()
        .map(|c| {
            residue = residue.max((c.im * scale).abs());
            c.re * scale
        })
        .collect();
    (values, residue)
}

/// Per-axis FFT bin indices of flat spectral index `idx`.
fn bins(grid: &TorusGrid, idx: usize) -> [usize; 2] {
    grid.multi_index(idx)
}

/// Multiplies the spectrum by a per-mode symbol. The symbol receives the
/// bin index per axis.
pub(crate) fn apply_symbol(
    grid: &TorusGrid,
    values: &[f64],
    symbol: impl Fn(&[usize; 2]) -> Complex64,
) -> (Vec<f64>, f64) {
    let mut spec = forward(grid, values);
    for (idx, c) in spec.iter_mut().enumerate() {
        *c *= symbol(&bins(grid, idx));
    }
    inverse(grid, spec)
}

/// Squared wavenumber magnitude `|kappa|^2` of a mode, Nyquist included.
pub(crate) fn wavenumber_sq(grid: &TorusGrid, b: &[usize; 2]) -> f64 {
    (0..grid.dim()).map(|a| grid.wavenumber(b[a]).powi(2)).sum()
}

/// Derivative wavenumber along `axis`, zero at the Nyquist bin.
pub(crate) fn derivative_wavenumber(grid: &TorusGrid, b: &[usize; 2], axis: usize) -> f64 {
    if grid.is_nyquist(b[axis]) {
        0.0
    } else {
        grid.wavenumber(b[axis])
    }
}

/// Derivatives of `values` along every axis, sharing one forward transform.
pub(crate) fn partials(grid: &TorusGrid, values: &[f64]) -> Vec<Vec<f64>> {
    let spec = forward(grid, values);
    (0..grid.dim())
        .map(|axis| {
            let d: Vec<Complex64> = spec
                .iter()
                .enumerate()
                .map(|(idx, c)| {
                    let k = derivative_wavenumber(grid, &bins(grid, idx), axis);
                    c * Complex64::new(0.0, k)
                })
                .collect();
            inverse(grid, d).0
        })
        .collect()
}

/// Fourier-collocation gradient of a scalar field.
pub fn spectral_gradient(f: &ScalarField) -> Result<VectorField> {
    f.validate()?;
    Ok(VectorField::from_raw(*f.grid(), partials(f.grid(), f.values())))
}

/// Componentwise spectral Jacobian `d_i v^a`, indexed `[a][i]`.
pub fn spectral_jacobian(v: &VectorField) -> Result<Vec<Vec<Vec<f64>>>> {
    v.validate()?;
    Ok(v.components().iter().map(|c| partials(v.grid(), c)).collect())
}

/// First derivatives `d_i t_{jk}` of a symmetric tensor field.
#[derive(Debug, Clone)]
pub struct TensorDerivative {
    grid: TorusGrid,
    // [axis][stored component]
    data: Vec<Vec<Vec<f64>>>,
}

impl TensorDerivative {
    /// Nodal values of `d_axis t_{ij}`.
    pub fn get(&self, axis: usize, i: usize, j: usize) -> &[f64] {
        &self.data[axis][self.grid.sym_index(i, j)]
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().flatten().flatten().fold(0.0, |m, v| m.max(v.abs()))
    }
}

pub fn spectral_tensor_derivative(t: &MetricField) -> Result<TensorDerivative> {
    t.validate()?;
    let grid = *t.grid();
    let per_component: Vec<Vec<Vec<f64>>> = t.components().iter().map(|c| partials(&grid, c)).collect();
    let data = (0..grid.dim()).map(|axis| per_component.iter().map(|p| p[axis].clone()).collect()).collect();
    Ok(TensorDerivative { grid, data })
}

/// `sum a b * cell_volume`.
pub fn l2_inner_scalar(a: &ScalarField, b: &ScalarField) -> Result<f64> {
    a.grid().check_same(b.grid(), "l2_inner_scalar")?;
    Ok(dot(a.values(), b.values()) * a.grid().cell_volume())
}

/// Componentwise L2 pairing of two vector fields.
pub fn l2_inner_vector(u: &VectorField, w: &VectorField) -> Result<f64> {
    u.grid().check_same(w.grid(), "l2_inner_vector")?;
    let s: f64 = u.components().iter().zip(w.components()).map(|(a, b)| dot(a, b)).sum();
    Ok(s * u.grid().cell_volume())
}

/// Frobenius L2 pairing `sum p^{ij} q_{ij}` with indices raised by the flat
/// metric; off-diagonal entries count twice.
pub fn l2_inner_tensor(p: &MetricField, q: &MetricField) -> Result<f64> {
    p.grid().check_same(q.grid(), "l2_inner_tensor")?;
    let grid = p.grid();
    let mut s = 0.0;
    for i in 0..grid.dim() {
        for j in i..grid.dim() {
            let w = if i == j { 1.0 } else { 2.0 };
            s += w * dot(p.get(i, j), q.get(i, j));
        }
    }
    Ok(s * grid.cell_volume())
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
