//! The coupled pair `(phi, psi = phi^-1)` stored as periodic displacements,
//! together with the quantities the flow derives from it: the pulled-back
//! image `I0 o psi` and the push-forward metric `phi_* g = psi^* g`.

use crate::error::{Error, Result};
use crate::field::{MetricField, ScalarField, VectorField};
use crate::grid::TorusGrid;
use crate::interp::Interpolation;
use crate::spectral::spectral_jacobian;

/// Default lower bound on `det(D phi)` for an accepted state.
pub const DEFAULT_JAC_FLOOR: f64 = 1e-3;

/// Forward map `phi(x) = x + d_phi(x)` and inverse `psi(x) = x + d_psi(x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffeoPair {
    grid: TorusGrid,
    phi: VectorField,
    psi: VectorField,
    interpolation: Interpolation,
}

/// Diagnostics of one accepted update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepReport {
    pub dt_used: f64,
    pub min_jac_det: f64,
    /// `max |phi(psi(x)) - x|` in grid cells.
    pub inverse_defect: f64,
}

pub fn identity_pair(grid: TorusGrid) -> DiffeoPair {
    DiffeoPair {
        grid,
        phi: VectorField::zeros(grid),
        psi: VectorField::zeros(grid),
        interpolation: Interpolation::default(),
    }
}

impl DiffeoPair {
    pub fn new(phi_displacement: VectorField, psi_displacement: VectorField) -> Result<Self> {
        phi_displacement.grid().check_same(psi_displacement.grid(), "diffeo pair")?;
        phi_displacement.validate()?;
        psi_displacement.validate()?;
        Ok(Self {
            grid: *phi_displacement.grid(),
            phi: phi_displacement,
            psi: psi_displacement,
            interpolation: Interpolation::default(),
        })
    }

    /// Same maps, composed using `scheme` from now on.
    pub fn with_interpolation(mut self, scheme: Interpolation) -> Self {
        self.interpolation = scheme;
        self
    }

    pub fn interpolation(&self) -> Interpolation {
        self.interpolation
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn phi_displacement(&self) -> &VectorField {
        &self.phi
    }

    pub fn psi_displacement(&self) -> &VectorField {
        &self.psi
    }

    /// Node positions moved by a displacement field: `x + d(x)`.
    fn moved_nodes(&self, d: &VectorField) -> Vec<Vec<f64>> {
        self.grid
            .node_coords()
            .into_iter()
            .zip(d.components())
            .map(|(x, dx)| x.iter().zip(dx).map(|(a, b)| a + b).collect())
            .collect()
    }

    /// Positions `psi(x)` at every node.
    pub fn psi_points(&self) -> Vec<Vec<f64>> {
        self.moved_nodes(&self.psi)
    }

    /// Positions `phi(x)` at every node.
    pub fn phi_points(&self) -> Vec<Vec<f64>> {
        self.moved_nodes(&self.phi)
    }

    fn sample_vector(&self, v: &VectorField, points: &[Vec<f64>]) -> Vec<Vec<f64>> {
        (0..self.grid.dim()).map(|a| self.interpolation.sample(&v.component_field(a), points)).collect()
    }

    /// Advances the pair by velocity `u` over time `dt`:
    /// `phi <- phi + dt u(phi)` and `psi <- psi(x - dt u(x))`.
    pub fn advance(&self, u: &VectorField, dt: f64, jac_floor: f64) -> Result<(DiffeoPair, StepReport)> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::InvalidConfig(format!("dt = {dt} must be positive")));
        }
        self.grid.check_same(u.grid(), "advance")?;
        u.validate()?;

        let u_at_phi = self.sample_vector(u, &self.phi_points());
        let phi: Vec<Vec<f64>> = self
            .phi
            .components()
            .iter()
            .zip(&u_at_phi)
            .map(|(d, w)| d.iter().zip(w).map(|(a, b)| a + dt * b).collect())
            .collect();

        let back: Vec<Vec<f64>> = self
            .grid
            .node_coords()
            .into_iter()
            .zip(u.components())
            .map(|(x, w)| x.iter().zip(w).map(|(a, b)| a - dt * b).collect())
            .collect();
        let psi_at_back = self.sample_vector(&self.psi, &back);
        let psi: Vec<Vec<f64>> = psi_at_back
            .iter()
            .zip(u.components())
            .map(|(d, w)| d.iter().zip(w).map(|(a, b)| a - dt * b).collect())
            .collect();

        let next = DiffeoPair {
            grid: self.grid,
            phi: VectorField::new(self.grid, phi)?,
            psi: VectorField::new(self.grid, psi)?,
            interpolation: self.interpolation,
        };
        let min_jac_det = jacobian_min_det(&next)?;
        if min_jac_det <= jac_floor {
            return Err(Error::NonDiffeomorphic { min_det: min_jac_det, floor: jac_floor });
        }
        let report = StepReport { dt_used: dt, min_jac_det, inverse_defect: inverse_defect(&next) };
        Ok((next, report))
    }
}

/// Nodal determinants of `I + D d`.
fn jacobian_dets(d: &VectorField) -> Result<Vec<f64>> {
    let jac = spectral_jacobian(d)?;
    let grid = d.grid();
    Ok((0..grid.len())
        .map(|k| match grid.dim() {
            1 => 1.0 + jac[0][0][k],
            _ => (1.0 + jac[0][0][k]) * (1.0 + jac[1][1][k]) - jac[0][1][k] * jac[1][0][k],
        })
        .collect())
}

/// Minimum over nodes of `det(D phi)`.
pub fn jacobian_min_det(pair: &DiffeoPair) -> Result<f64> {
    Ok(jacobian_dets(&pair.phi)?.into_iter().fold(f64::INFINITY, f64::min))
}

/// `max_x |phi(psi(x)) - x|` (torus distance) in grid cells.
pub fn inverse_defect(pair: &DiffeoPair) -> f64 {
    let at_psi = pair.sample_vector(&pair.phi, &pair.psi_points());
    let grid = pair.grid;
    let worst = (0..grid.len())
        .map(|k| {
            (0..grid.dim())
                .map(|a| grid.wrap_delta(pair.psi.component(a)[k] + at_psi[a][k]).powi(2))
                .sum::<f64>()
                .sqrt()
        })
        .fold(0.0, f64::max);
    worst / grid.spacing()
}

/// `I(x) = I0(psi(x))`.
pub fn pullback_image(template: &ScalarField, pair: &DiffeoPair) -> Result<ScalarField> {
    template.grid().check_same(&pair.grid, "pullback_image")?;
    let values = pair.interpolation.sample(template, &pair.psi_points());
    ScalarField::new(pair.grid, values)
}

/// `h_ij = sum_a d_i psi^a d_j psi^a`, the push-forward of the flat metric.
pub fn pushforward_metric(pair: &DiffeoPair) -> Result<MetricField> {
    let grid = pair.grid;
    let dim = grid.dim();
    let jac = spectral_jacobian(&pair.psi)?;
    let dpsi = |a: usize, i: usize, k: usize| jac[a][i][k] + if a == i { 1.0 } else { 0.0 };
    let mut comps = vec![vec![0.0; grid.len()]; grid.sym_components()];
    for i in 0..dim {
        for j in i..dim {
            let slot = &mut comps[grid.sym_index(i, j)];
            for (k, h) in slot.iter_mut().enumerate() {
                *h = (0..dim).map(|a| dpsi(a, i, k) * dpsi(a, j, k)).sum();
            }
        }
    }
    let h = MetricField::new(grid, comps)?;
    for node in 0..grid.len() {
        let det = h.det_at(node);
        if det <= 0.0 {
            return Err(Error::NonDiffeomorphic { min_det: det, floor: 0.0 });
        }
    }
    Ok(h)
}
