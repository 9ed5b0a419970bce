//! Scalar, vector and symmetric 2-tensor fields sampled on a [`TorusGrid`].

use crate::error::{Error, Result};
use crate::grid::TorusGrid;

fn check_finite(values: &[f64], what: &str) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        None => Ok(()),
        Some(i) => Err(Error::InvalidField(format!("{what}: non-finite value at node {i}"))),
    }
}

fn check_len(grid: &TorusGrid, values: &[f64], what: &str) -> Result<()> {
    if values.len() == grid.len() {
        Ok(())
    } else {
        Err(Error::InvalidField(format!("{what}: expected {} values, got {}", grid.len(), values.len())))
    }
}

/// A real function sampled at the grid nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: TorusGrid,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: TorusGrid, values: Vec<f64>) -> Result<Self> {
        check_len(&grid, &values, "scalar field")?;
        check_finite(&values, "scalar field")?;
        Ok(Self { grid, values })
    }

    pub(crate) fn from_raw(grid: TorusGrid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid, values }
    }

    pub fn zeros(grid: TorusGrid) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: TorusGrid, c: f64) -> Self {
        Self { grid, values: vec![c; grid.len()] }
    }

    /// Samples `f` at every node; `f` receives the node position per axis.
    pub fn from_fn(grid: TorusGrid, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let coords = grid.node_coords();
        let mut x = vec![0.0; grid.dim()];
        let values = (0..grid.len())
            .map(|idx| {
                for (a, c) in coords.iter().enumerate() {
                    x[a] = c[idx];
                }
                f(&x)
            })
            .collect();
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn validate(&self) -> Result<()> {
        check_finite(&self.values, "scalar field")
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn sub(&self, other: &ScalarField) -> Result<ScalarField> {
        self.grid.check_same(&other.grid, "scalar subtraction")?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect();
        Ok(Self::from_raw(self.grid, values))
    }

    pub fn scaled(&self, s: f64) -> ScalarField {
        Self::from_raw(self.grid, self.values.iter().map(|v| v * s).collect())
    }
}

/// A vector field stored as `dim` component arrays.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    grid: TorusGrid,
    components: Vec<Vec<f64>>,
}

impl VectorField {
    pub fn new(grid: TorusGrid, components: Vec<Vec<f64>>) -> Result<Self> {
        if components.len() != grid.dim() {
            return Err(Error::InvalidField(format!(
                "vector field: expected {} components, got {}",
                grid.dim(),
                components.len()
            )));
        }
        for c in &components {
            check_len(&grid, c, "vector field")?;
            check_finite(c, "vector field")?;
        }
        Ok(Self { grid, components })
    }

    pub(crate) fn from_raw(grid: TorusGrid, components: Vec<Vec<f64>>) -> Self {
        debug_assert_eq!(components.len(), grid.dim());
        Self { grid, components }
    }

    pub fn zeros(grid: TorusGrid) -> Self {
        Self::constant(grid, &vec![0.0; grid.dim()])
    }

    pub fn constant(grid: TorusGrid, c: &[f64]) -> Self {
        assert_eq!(c.len(), grid.dim(), "constant vector has wrong length");
        Self { grid, components: c.iter().map(|&v| vec![v; grid.len()]).collect() }
    }

    /// Samples `f` at every node; `f` returns all components at once.
    pub fn from_fn(grid: TorusGrid, f: impl Fn(&[f64]) -> Vec<f64>) -> Result<Self> {
        let coords = grid.node_coords();
        let mut components = vec![Vec::with_capacity(grid.len()); grid.dim()];
        let mut x = vec![0.0; grid.dim()];
        for idx in 0..grid.len() {
            for (a, c) in coords.iter().enumerate() {
                x[a] = c[idx];
            }
            let v = f(&x);
            if v.len() != grid.dim() {
                return Err(Error::InvalidField("vector closure returned wrong length".into()));
            }
            for (a, val) in v.into_iter().enumerate() {
                components[a].push(val);
            }
        }
        Self::new(grid, components)
    }

    pub fn from_scalars(fields: Vec<ScalarField>) -> Result<Self> {
        let grid = *fields.first().ok_or_else(|| Error::InvalidField("no components".into()))?.grid();
        for f in &fields {
            grid.check_same(f.grid(), "vector from scalars")?;
        }
        Self::new(grid, fields.into_iter().map(ScalarField::into_values).collect())
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn component(&self, axis: usize) -> &[f64] {
        &self.components[axis]
    }

    pub fn components(&self) -> &[Vec<f64>] {
        &self.components
    }

    pub fn into_components(self) -> Vec<Vec<f64>> {
        self.components
    }

    pub fn component_field(&self, axis: usize) -> ScalarField {
        ScalarField::from_raw(self.grid, self.components[axis].clone())
    }

    pub fn validate(&self) -> Result<()> {
        self.components.iter().try_for_each(|c| check_finite(c, "vector field"))
    }

    /// Largest absolute component value.
    pub fn max_abs(&self) -> f64 {
        self.components.iter().flatten().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Largest pointwise Euclidean length.
    pub fn max_norm(&self) -> f64 {
        (0..self.grid.len())
            .map(|i| self.components.iter().map(|c| c[i] * c[i]).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }

    pub fn add(&self, other: &VectorField) -> Result<VectorField> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &VectorField) -> Result<VectorField> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn scaled(&self, s: f64) -> VectorField {
        let components = self.components.iter().map(|c| c.iter().map(|v| v * s).collect()).collect();
        Self::from_raw(self.grid, components)
    }

    fn zip_with(&self, other: &VectorField, f: impl Fn(f64, f64) -> f64) -> Result<VectorField> {
        self.grid.check_same(&other.grid, "vector arithmetic")?;
        let components = self
            .components
            .iter()
            .zip(&other.components)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| f(*x, *y)).collect())
            .collect();
        Ok(Self::from_raw(self.grid, components))
    }
}

/// A symmetric 2-tensor field; only the upper triangle is stored.
///
/// Used both for Riemannian metrics (pointwise positive definite) and for
/// arbitrary symmetric perturbations such as `h - g`.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricField {
    grid: TorusGrid,
    components: Vec<Vec<f64>>,
}

impl MetricField {
    pub fn new(grid: TorusGrid, components: Vec<Vec<f64>>) -> Result<Self> {
        if components.len() != grid.sym_components() {
            return Err(Error::InvalidField(format!(
                "metric field: expected {} components, got {}",
                grid.sym_components(),
                components.len()
            )));
        }
        for c in &components {
            check_len(&grid, c, "metric field")?;
            check_finite(c, "metric field")?;
        }
        Ok(Self { grid, components })
    }

    pub(crate) fn from_raw(grid: TorusGrid, components: Vec<Vec<f64>>) -> Self {
        debug_assert_eq!(components.len(), grid.sym_components());
        Self { grid, components }
    }

    pub fn zeros(grid: TorusGrid) -> Self {
        Self { grid, components: vec![vec![0.0; grid.len()]; grid.sym_components()] }
    }

    /// The flat background metric `g = identity`.
    pub fn identity(grid: TorusGrid) -> Self {
        let mut m = Self::zeros(grid);
        for i in 0..grid.dim() {
            m.components[grid.sym_index(i, i)].fill(1.0);
        }
        m
    }

    /// Samples `f(x, i, j)` for every stored `i <= j` entry.
    pub fn from_fn(grid: TorusGrid, f: impl Fn(&[f64], usize, usize) -> f64) -> Result<Self> {
        let coords = grid.node_coords();
        let mut m = Self::zeros(grid);
        let mut x = vec![0.0; grid.dim()];
        for idx in 0..grid.len() {
            for (a, c) in coords.iter().enumerate() {
                x[a] = c[idx];
            }
            for i in 0..grid.dim() {
                for j in i..grid.dim() {
                    m.components[grid.sym_index(i, j)][idx] = f(&x, i, j);
                }
            }
        }
        m.validate()?;
        Ok(m)
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    /// Values of entry `(i, j)`; `(i, j)` and `(j, i)` share storage.
    pub fn get(&self, i: usize, j: usize) -> &[f64] {
        &self.components[self.grid.sym_index(i, j)]
    }

    pub fn components(&self) -> &[Vec<f64>] {
        &self.components
    }

    pub fn validate(&self) -> Result<()> {
        self.components.iter().try_for_each(|c| check_finite(c, "metric field"))
    }

    pub fn det_at(&self, node: usize) -> f64 {
        match self.grid.dim() {
            1 => self.components[0][node],
            _ => {
                let c = &self.components;
                c[0][node] * c[2][node] - c[1][node] * c[1][node]
            }
        }
    }

    pub fn trace_at(&self, node: usize) -> f64 {
        (0..self.grid.dim()).map(|i| self.get(i, i)[node]).sum()
    }

    /// Checks `det > 0` and `trace > 0` at every node.
    pub fn check_positive_definite(&self) -> Result<()> {
        for node in 0..self.grid.len() {
            let det = self.det_at(node);
            let trace = self.trace_at(node);
            if !(det > 0.0 && trace > 0.0) {
                return Err(Error::NotPositiveDefinite { node, det, trace });
            }
        }
        Ok(())
    }

    pub fn sub(&self, other: &MetricField) -> Result<MetricField> {
        self.grid.check_same(&other.grid, "metric subtraction")?;
        let components = self
            .components
            .iter()
            .zip(&other.components)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x - y).collect())
            .collect();
        Ok(Self::from_raw(self.grid, components))
    }

    pub fn scaled(&self, s: f64) -> MetricField {
        let components = self.components.iter().map(|c| c.iter().map(|v| v * s).collect()).collect();
        Self::from_raw(self.grid, components)
    }

    pub fn max_abs(&self) -> f64 {
        self.components.iter().flatten().fold(0.0, |m, v| m.max(v.abs()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_finite_and_bad_lengths() {
        let g = TorusGrid::new(1, 8, 1.0).unwrap();
        let mut v = vec![0.0; 8];
        v[3] = f64::NAN;
        assert!(matches!(ScalarField::new(g, v), Err(Error::InvalidField(_))));
        assert!(ScalarField::new(g, vec![0.0; 7]).is_err());
        assert!(VectorField::new(g, vec![vec![0.0; 8]; 2]).is_err());
        let g2 = TorusGrid::square(8).unwrap();
        assert!(MetricField::new(g2, vec![vec![0.0; 64]; 2]).is_err());
    }

    #[test]
    fn identity_metric_is_positive_definite() {
        let g = TorusGrid::square(8).unwrap();
        let id = MetricField::identity(g);
        id.check_positive_definite().unwrap();
        assert_eq!(id.get(0, 1), id.get(1, 0));
        assert!(id.get(0, 1).iter().all(|&v| v == 0.0));
        assert!(MetricField::zeros(g).check_positive_definite().is_err());
    }

    #[test]
    fn indefinite_metric_is_rejected() {
        let g = TorusGrid::square(8).unwrap();
        let m = MetricField::from_fn(g, |_, i, j| if i == j { 1.0 } else { 2.0 }).unwrap();
        match m.check_positive_definite() {
            Err(Error::NotPositiveDefinite { det, .. }) => assert_eq!(det, -3.0),
            other => panic!("expected failure, got {other:?}"),
        }
    }
}
