//! Eulerian force from the cotangent-lift momentum maps of the actions on
//! images (`J1`) and on metrics (`J2`).
//!
//! Indices are raised with the flat background metric, so `p^{ij}` and
//! `p_{ij}` coincide numerically and covariant derivatives are partials.

use crate::error::Result;
use crate::field::{MetricField, ScalarField, VectorField};
use crate::spectral::{spectral_gradient, spectral_jacobian, spectral_tensor_derivative};

/// The two momentum-map contributions and their sum.
#[derive(Debug, Clone, PartialEq)]
pub struct ForceBreakdown {
    pub j1_term: VectorField,
    pub j2_term: VectorField,
    pub total: VectorField,
}

/// `J1(I, P) = -P grad I`.
pub fn j1(image: &ScalarField, p: &ScalarField) -> Result<VectorField> {
    image.grid().check_same(p.grid(), "j1")?;
    let grad = spectral_gradient(image)?;
    let comps = grad
        .components()
        .iter()
        .map(|g| g.iter().zip(p.values()).map(|(gi, pi)| -pi * gi).collect())
        .collect();
    VectorField::new(*image.grid(), comps)
}

/// `J2(h, p)_j = 2 (d_i p^{im}) h_{jm} + 2 p^{im} d_i h_{jm} - p^{im} d_j h_{im}`.
pub fn j2(h: &MetricField, p: &MetricField) -> Result<VectorField> {
    h.grid().check_same(p.grid(), "j2")?;
    h.check_positive_definite()?;
    let grid = *h.grid();
    let dim = grid.dim();
    let dh = spectral_tensor_derivative(h)?;
    let dp = spectral_tensor_derivative(p)?;
    let mut comps = vec![vec![0.0; grid.len()]; dim];
    for (j, out) in comps.iter_mut().enumerate() {
        for i in 0..dim {
            for m in 0..dim {
                let (dip, hjm) = (dp.get(i, i, m), h.get(j, m));
                let (pim, dihjm, djhim) = (p.get(i, m), dh.get(i, j, m), dh.get(j, i, m));
                for k in 0..grid.len() {
                    out[k] += 2.0 * dip[k] * hjm[k] + 2.0 * pim[k] * dihjm[k] - pim[k] * djhim[k];
                }
            }
        }
    }
    VectorField::new(grid, comps)
}

/// `(L_V h)_{ij} = V^m d_m h_{ij} + (d_i V^m) h_{mj} + (d_j V^m) h_{im}`.
pub fn lie_derivative(h: &MetricField, v: &VectorField) -> Result<MetricField> {
    h.grid().check_same(v.grid(), "lie_derivative")?;
    let grid = *h.grid();
    let dim = grid.dim();
    let dh = spectral_tensor_derivative(h)?;
    let dv = spectral_jacobian(v)?; // [m][i] = d_i V^m
    let mut comps = vec![vec![0.0; grid.len()]; grid.sym_components()];
    for i in 0..dim {
        for j in i..dim {
            let slot = &mut comps[grid.sym_index(i, j)];
            for m in 0..dim {
                let (vm, dmh) = (v.component(m), dh.get(m, i, j));
                let (divm, hmj) = (&dv[m][i], h.get(m, j));
                let (djvm, him) = (&dv[m][j], h.get(i, m));
                for k in 0..grid.len() {
                    slot[k] += vm[k] * dmh[k] + divm[k] * hmj[k] + djvm[k] * him[k];
                }
            }
        }
    }
    MetricField::new(grid, comps)
}

/// Force `J1(I, I - I1) + J2(h, sigma (h - g_ref))`.
pub fn assemble_force(
    image: &ScalarField,
    target: &ScalarField,
    h: &MetricField,
    g_ref: &MetricField,
    sigma: f64,
) -> Result<ForceBreakdown> {
    let j1_term = j1(image, &image.sub(target)?)?;
    let j2_term = if sigma == 0.0 {
        h.grid().check_same(image.grid(), "assemble_force")?;
        h.check_positive_definite()?;
        VectorField::zeros(*h.grid())
    } else {
        j2(h, &h.sub(g_ref)?.scaled(sigma))?
    };
    let total = j1_term.add(&j2_term)?;
    Ok(ForceBreakdown { j1_term, j2_term, total })
}
