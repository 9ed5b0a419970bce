//! Periodic interpolation of nodal fields at arbitrary points.
//!
//! Positions are wrapped modulo `L`, so sampling never fails.

use rustfft::num_complex::Complex64;

use crate::field::ScalarField;
use crate::grid::TorusGrid;
use crate::spectral;

/// Reconstruction scheme used when composing fields with maps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Interpolation {
    /// Multilinear: linear in 1-D, bilinear in 2-D.
    Linear,
    /// Interpolating periodic cubic B-spline (C2, prefiltered via FFT).
    CubicBSpline,
    /// Interpolating periodic quintic B-spline (C4, prefiltered via FFT).
    #[default]
    QuinticBSpline,
}

impl Interpolation {
    pub const ALL: [Interpolation; 3] =
        [Interpolation::Linear, Interpolation::CubicBSpline, Interpolation::QuinticBSpline];

    pub fn name(self) -> &'static str {
        match self {
            Interpolation::Linear => "linear",
            Interpolation::CubicBSpline => "cubic-bspline",
            Interpolation::QuinticBSpline => "quintic-bspline",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "linear" | "bilinear" => Some(Interpolation::Linear),
            "cubic-bspline" | "cubic" => Some(Interpolation::CubicBSpline),
            "quintic-bspline" | "quintic" => Some(Interpolation::QuinticBSpline),
            _ => None,
        }
    }

    /// Prepares `field` for repeated sampling.
    pub fn prepare(self, field: &ScalarField) -> Sampler {
        let grid = *field.grid();
        let coeffs = match self {
            Interpolation::Linear => field.values().to_vec(),
            Interpolation::CubicBSpline => {
                bspline_coefficients(&grid, field.values(), |t| (2.0 + t.cos()) / 3.0)
            }
            Interpolation::QuinticBSpline => bspline_coefficients(&grid, field.values(), |t| {
                (33.0 + 26.0 * t.cos() + (2.0 * t).cos()) / 60.0
            }),
        };
        Sampler { grid, scheme: self, coeffs, nodal: field.values().to_vec() }
    }

    /// Samples `field` at `points` (one coordinate array per axis).
    pub fn sample(self, field: &ScalarField, points: &[Vec<f64>]) -> Vec<f64> {
        self.prepare(field).sample(points)
    }
}

/// Periodic (bi)linear interpolation of `field` at `points`.
pub fn interpolate(field: &ScalarField, points: &[Vec<f64>]) -> Vec<f64> {
    Interpolation::Linear.sample(field, points)
}

/// A field ready for sampling under one scheme.
#[derive(Debug, Clone)]
pub struct Sampler {
    grid: TorusGrid,
    scheme: Interpolation,
    coeffs: Vec<f64>,
    nodal: Vec<f64>,
}

impl Sampler {
    pub fn sample(&self, points: &[Vec<f64>]) -> Vec<f64> {
        assert_eq!(points.len(), self.grid.dim(), "point dimension mismatch");
        let m = points[0].len();
        let mut x = [0.0; 2];
        (0..m)
            .map(|p| {
                for (a, c) in points.iter().enumerate() {
                    x[a] = c[p];
                }
                self.at(&x[..self.grid.dim()])
            })
            .collect()
    }

    /// Value at one point.
    pub fn at(&self, x: &[f64]) -> f64 {
        let n = self.grid.n();
        let inv_h = 1.0 / self.grid.spacing();
        let mut base = [0usize; 2];
        let mut frac = [0.0; 2];
        for a in 0..self.grid.dim() {
            let t = (x[a] * inv_h).rem_euclid(n as f64);
            let mut i = t.floor() as usize;
            let mut u = t - i as f64;
            if i >= n {
                i -= n;
                u = 0.0;
            }
            base[a] = i;
            frac[a] = u;
        }
        if frac[..self.grid.dim()].iter().all(|&u| u == 0.0) {
            // exactly on a node: return the stored sample
            return self.nodal[base[0] * if self.grid.dim() == 2 { n } else { 1 } + base[1]];
        }
        match self.scheme {
            Interpolation::Linear => self.linear(&base, &frac),
            Interpolation::CubicBSpline => self.spline::<4>(&base, &frac, cubic_weights),
            Interpolation::QuinticBSpline => self.spline::<6>(&base, &frac, quintic_weights),
        }
    }

    fn linear(&self, base: &[usize; 2], frac: &[f64; 2]) -> f64 {
        let n = self.grid.n();
        let c = &self.coeffs;
        match self.grid.dim() {
            1 => {
                let i1 = (base[0] + 1) % n;
                (1.0 - frac[0]) * c[base[0]] + frac[0] * c[i1]
            }
            _ => {
                let (i0, j0) = (base[0], base[1]);
                let (i1, j1) = ((i0 + 1) % n, (j0 + 1) % n);
                let (u, v) = (frac[0], frac[1]);
                (1.0 - u) * ((1.0 - v) * c[i0 * n + j0] + v * c[i0 * n + j1])
                    + u * ((1.0 - v) * c[i1 * n + j0] + v * c[i1 * n + j1])
            }
        }
    }

    /// Tensor-product spline with `S` weights per axis; the first weight
    /// belongs to the node `S/2 - 1` cells below the base node.
    fn spline<const S: usize>(
        &self,
        base: &[usize; 2],
        frac: &[f64; 2],
        weights: fn(f64) -> [f64; S],
    ) -> f64 {
        let n = self.grid.n();
        let c = &self.coeffs;
        let back = S / 2 - 1;
        let idx = |i: usize, o: usize| (i + n + o - back) % n;
        let w0 = weights(frac[0]);
        match self.grid.dim() {
            1 => (0..S).map(|o| w0[o] * c[idx(base[0], o)]).sum(),
            _ => {
                let w1 = weights(frac[1]);
                let mut s = 0.0;
                for (o0, wa) in w0.iter().enumerate() {
                    let row = idx(base[0], o0) * n;
                    let mut r = 0.0;
                    for (o1, wb) in w1.iter().enumerate() {
                        r += wb * c[row + idx(base[1], o1)];
                    }
                    s += wa * r;
                }
                s
            }
        }
    }
}

/// Cubic B-spline weights for the nodes at offsets `-1, 0, 1, 2`.
fn cubic_weights(u: f64) -> [f64; 4] {
    let u2 = u * u;
    let u3 = u2 * u;
    let om = 1.0 - u;
    [
        om * om * om / 6.0,
        (3.0 * u3 - 6.0 * u2 + 4.0) / 6.0,
        (-3.0 * u3 + 3.0 * u2 + 3.0 * u + 1.0) / 6.0,
        u3 / 6.0,
    ]
}

/// Centered quintic B-spline.
fn quintic(x: f64) -> f64 {
    let a = x.abs();
    if a < 1.0 {
        let a2 = a * a;
        11.0 / 20.0 - a2 / 2.0 + a2 * a2 / 4.0 - a2 * a2 * a / 12.0
    } else if a < 2.0 {
        17.0 / 40.0 + a * (5.0 / 8.0 + a * (-7.0 / 4.0 + a * (5.0 / 4.0 + a * (-3.0 / 8.0 + a / 24.0))))
    } else if a < 3.0 {
        (3.0 - a).powi(5) / 120.0
    } else {
        0.0
    }
}

/// Quintic B-spline weights for the nodes at offsets `-2..=3`.
fn quintic_weights(u: f64) -> [f64; 6] {
    std::array::from_fn(|o| quintic(u - (o as f64 - 2.0)))
}

/// Spline coefficients whose interpolant reproduces `values` at the nodes,
/// given the per-axis sampling symbol of the B-spline at angle `theta`.
fn bspline_coefficients(grid: &TorusGrid, values: &[f64], symbol: impl Fn(f64) -> f64) -> Vec<f64> {
    let n = grid.n() as f64;
    let axis_symbol = |j: usize| symbol(2.0 * std::f64::consts::PI * j as f64 / n);
    let (c, _) = spectral::apply_symbol(grid, values, |b| {
        let s: f64 = (0..grid.dim()).map(|a| axis_symbol(b[a])).product();
        Complex64::new(1.0 / s, 0.0)
    });
    c
}
