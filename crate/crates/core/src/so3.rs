//! Gradient flow on SO(3) for `E(R) = |R x0 - x1|^2`.
//!
//! The rotation group acts on `R^3` by matrix multiplication; the momentum
//! map of the cotangent lift is `J(q, p) = q x p`, and the right-invariant
//! gradient is `grad E(R) = hat(omega) R` with
//! `A omega = 2 (R x0) x (R x0 - x1)`. Steps use the closed-form
//! exponential, so iterates stay on the group up to roundoff.

use std::fmt::Write as _;

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;

/// A proper rotation matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotation(Matrix3<f64>);

impl Rotation {
    pub fn new(m: Matrix3<f64>) -> Result<Self> {
        let r = Rotation(m);
        if r.orthogonality_error() > 1e-10 || m.determinant() <= 0.0 {
            return Err(Error::InvalidConfig("matrix is not a rotation".into()));
        }
        Ok(r)
    }

    pub fn identity() -> Self {
        Rotation(Matrix3::identity())
    }

    /// `exp(hat(w))` via Rodrigues' formula.
    pub fn exp(w: &Vec3) -> Self {
        let theta = w.norm();
        let k = hat(w);
        let (a, b) = if theta < 1e-6 {
            let t2 = theta * theta;
            (1.0 - t2 / 6.0, 0.5 - t2 / 24.0)
        } else {
            (theta.sin() / theta, (1.0 - theta.cos()) / (theta * theta))
        };
        Rotation(Matrix3::identity() + k * a + k * k * b)
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    pub fn apply(&self, x: &Vec3) -> Vec3 {
        self.0 * x
    }

    /// Left multiplication `self * other`.
    pub fn compose(&self, other: &Rotation) -> Rotation {
        Rotation(self.0 * other.0)
    }

    /// `max |R^T R - I|`.
    pub fn orthogonality_error(&self) -> f64 {
        (self.0.transpose() * self.0 - Matrix3::identity()).amax()
    }

    pub fn det(&self) -> f64 {
        self.0.determinant()
    }
}

/// Symmetric positive-definite inertia operator on `so(3) = R^3`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct So3Inertia {
    matrix: Matrix3<f64>,
    inverse: Matrix3<f64>,
}

impl So3Inertia {
    pub fn new(matrix: Matrix3<f64>) -> Result<Self> {
        if (matrix - matrix.transpose()).amax() > 1e-14 {
            return Err(Error::InvalidConfig("inertia matrix is not symmetric".into()));
        }
        let inverse = matrix
            .cholesky()
            .ok_or_else(|| Error::InvalidConfig("inertia matrix is not positive definite".into()))?
            .inverse();
        Ok(Self { matrix, inverse })
    }

    pub fn diagonal(d: [f64; 3]) -> Result<Self> {
        Self::new(Matrix3::from_diagonal(&Vec3::new(d[0], d[1], d[2])))
    }

    pub fn identity() -> Self {
        Self { matrix: Matrix3::identity(), inverse: Matrix3::identity() }
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.matrix
    }

    pub fn solve(&self, m: &Vec3) -> Vec3 {
        self.inverse * m
    }

    pub fn inner(&self, a: &Vec3, b: &Vec3) -> f64 {
        (self.matrix * a).dot(b)
    }

    pub fn norm(&self, a: &Vec3) -> f64 {
        self.inner(a, a).max(0.0).sqrt()
    }
}

/// The hat isomorphism: `hat(w) q = w x q`.
pub fn hat(w: &Vec3) -> Matrix3<f64> {
    Matrix3::new(0.0, -w.z, w.y, w.z, 0.0, -w.x, -w.y, w.x, 0.0)
}

/// Inverse of [`hat`]; fails on matrices that are not skew to `1e-12`.
pub fn vee(m: &Matrix3<f64>) -> Result<Vec3> {
    if (m + m.transpose()).amax() > 1e-12 {
        return Err(Error::InvalidField("matrix is not skew-symmetric".into()));
    }
    Ok(Vec3::new(m[(2, 1)], m[(0, 2)], m[(1, 0)]))
}

/// Momentum map `J(q, p) = q x p`.
pub fn so3_momentum(q: &Vec3, p: &Vec3) -> Vec3 {
    q.cross(p)
}

/// `|R x0 - x1|^2`.
pub fn so3_energy(r: &Rotation, x0: &Vec3, x1: &Vec3) -> f64 {
    (r.apply(x0) - x1).norm_squared()
}

/// `omega = A^-1 2 (R x0) x (R x0 - x1)`, so that `grad E(R) = hat(omega) R`.
pub fn so3_gradient(r: &Rotation, x0: &Vec3, x1: &Vec3, inertia: &So3Inertia) -> Vec3 {
    let q = r.apply(x0);
    inertia.solve(&so3_momentum(&q, &(2.0 * (q - x1))))
}

/// Trace of an SO(3) run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct So3Record {
    pub step: usize,
    pub t: f64,
    pub energy: f64,
    pub omega_norm_a: f64,
    pub path_length_a: f64,
}

pub const SO3_TRACE_HEADER: &str = "step,t,E,omega_norm_A,path_length_A";

pub fn so3_trace_csv(trace: &[So3Record]) -> String {
    let mut s = String::new();
    s.push_str(SO3_TRACE_HEADER);
    s.push('\n');
    for r in trace {
        let _ = writeln!(s, "{},{},{},{},{}", r.step, r.t, r.energy, r.omega_norm_a, r.path_length_a);
    }
    s
}

#[derive(Debug, Clone)]
pub struct So3Outcome {
    pub rotation: Rotation,
    pub trace: Vec<So3Record>,
    /// `|R x0 - x1| <= tol` or `||omega||_A <= tol` was reached.
    pub converged: bool,
    /// The line search could not decrease the energy any more.
    pub stalled: bool,
}

impl So3Outcome {
    pub fn residual(&self, x0: &Vec3, x1: &Vec3) -> f64 {
        (self.rotation.apply(x0) - x1).norm()
    }
}

/// Parameters of an SO(3) gradient flow.
#[derive(Debug, Clone, Copy)]
pub struct So3Problem {
    pub x0: Vec3,
    pub x1: Vec3,
    pub inertia: So3Inertia,
}

/// Integrates `R' = -hat(omega) R` with `R <- exp(-dt hat(omega)) R`,
/// halving `dt` within a step until the energy strictly decreases.
pub fn so3_flow(problem: &So3Problem, r0: Rotation, dt: f64, steps: usize, tol: f64) -> Result<So3Outcome> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::InvalidConfig(format!("dt = {dt} must be positive")));
    }
    let So3Problem { x0, x1, inertia } = *problem;
    let mut r = r0;
    let mut e = so3_energy(&r, &x0, &x1);
    let mut omega = so3_gradient(&r, &x0, &x1, &inertia);
    let mut norm = inertia.norm(&omega);
    let (mut t, mut path) = (0.0, 0.0);
    let mut trace = vec![So3Record { step: 0, t, energy: e, omega_norm_a: norm, path_length_a: path }];
    let dt_floor = dt * 2f64.powi(-40);
    let mut stalled = false;
    let done = |e: f64, norm: f64| e.sqrt() <= tol || norm <= tol;
    let mut converged = done(e, norm);
    let mut n = 0;
    while !converged && n < steps {
        let mut h = dt;
        let accepted = loop {
            let trial = Rotation::exp(&(-h * omega)).compose(&r);
            let et = so3_energy(&trial, &x0, &x1);
            if et < e {
                break Some((trial, et));
            }
            h *= 0.5;
            if h < dt_floor {
                break None;
            }
        };
        let Some((next, et)) = accepted else {
            stalled = true;
            break;
        };
        n += 1;
        path += norm * h;
        t += h;
        r = next;
        e = et;
        omega = so3_gradient(&r, &x0, &x1, &inertia);
        norm = inertia.norm(&omega);
        trace.push(So3Record { step: n, t, energy: e, omega_norm_a: norm, path_length_a: path });
        converged = done(e, norm);
    }
    Ok(So3Outcome { rotation: r, trace, converged, stalled })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn v(x: f64, y: f64, z: f64) -> Vec3 {
        Vec3::new(x, y, z)
    }

    #[test]
    fn hat_vee_basics() {
        assert_eq!(hat(&Vec3::z()) * Vec3::x(), Vec3::y());
        let w = v(0.3, -1.2, 2.5);
        assert_eq!(vee(&hat(&w)).unwrap(), w);
        assert_eq!(hat(&w).transpose(), -hat(&w));
        assert!(vee(&Matrix3::identity()).is_err());
    }

    #[test]
    fn momentum_basics() {
        let q = v(1.0, 2.0, 3.0);
        assert_eq!(so3_momentum(&q, &q), Vec3::zeros());
        assert_eq!(so3_momentum(&Vec3::x(), &Vec3::y()), Vec3::z());
    }

    proptest! {
        #[test]
        fn momentum_pairing(q in prop::array::uniform3(-5.0f64..5.0),
                            p in prop::array::uniform3(-5.0f64..5.0),
                            w in prop::array::uniform3(-5.0f64..5.0)) {
            let (q, p, w) = (Vec3::from(q), Vec3::from(p), Vec3::from(w));
            let lhs = so3_momentum(&q, &p).dot(&w);
            let rhs = p.dot(&(hat(&w) * q));
            let scale = q.norm() * p.norm() * w.norm();
            prop_assert!((lhs - rhs).abs() <= 1e-14 * scale.max(1.0));
        }

        #[test]
        fn hat_is_cross(w in prop::array::uniform3(-5.0f64..5.0), q in prop::array::uniform3(-5.0f64..5.0)) {
            let (w, q) = (Vec3::from(w), Vec3::from(q));
            prop_assert!((hat(&w) * q - w.cross(&q)).amax() <= 1e-13);
        }

        #[test]
        fn exp_is_a_rotation(w in prop::array::uniform3(-4.0f64..4.0)) {
            let r = Rotation::exp(&Vec3::from(w));
            prop_assert!(r.orthogonality_error() < 1e-14);
            prop_assert!((r.det() - 1.0).abs() < 1e-13);
        }
    }

    #[test]
    fn exp_small_and_quarter_turn() {
        let r = Rotation::exp(&(Vec3::z() * std::f64::consts::FRAC_PI_2));
        assert!((r.apply(&Vec3::x()) - Vec3::y()).amax() < 1e-15);
        let tiny = Rotation::exp(&v(1e-9, 0.0, 0.0));
        assert!((tiny.matrix() - (Matrix3::identity() + hat(&v(1e-9, 0.0, 0.0)))).amax() < 1e-17);
    }

    #[test]
    fn inertia_validation() {
        assert!(So3Inertia::diagonal([1.0, 0.0, 1.0]).is_err());
        let mut m = Matrix3::identity();
        m[(0, 1)] = 0.1;
        assert!(So3Inertia::new(m).is_err());
        assert!(Rotation::new(Matrix3::identity() * 2.0).is_err());
        assert!(Rotation::new(-Matrix3::<f64>::identity()).is_err());
    }

    #[test]
    fn gradient_examples() {
        let r = Rotation::identity();
        let w = so3_gradient(&r, &Vec3::x(), &Vec3::y(), &So3Inertia::identity());
        assert_eq!(w, v(0.0, 0.0, -2.0));
        let a = So3Inertia::diagonal([1.0, 1.0, 2.0]).unwrap();
        assert!((so3_gradient(&r, &Vec3::x(), &Vec3::y(), &a) - v(0.0, 0.0, -1.0)).amax() <= 1e-15);
        assert_eq!(so3_gradient(&r, &Vec3::x(), &Vec3::x(), &a), Vec3::zeros());
    }

    #[test]
    fn gradient_matches_central_difference() {
        let a = So3Inertia::new(Matrix3::new(2.0, 0.3, 0.0, 0.3, 1.0, 0.1, 0.0, 0.1, 1.5)).unwrap();
        let r = Rotation::exp(&v(0.2, -0.4, 0.7));
        let (x0, x1) = (v(1.0, 0.5, -0.2), v(-0.3, 0.9, 0.6));
        let w = so3_gradient(&r, &x0, &x1, &a);
        for eta in [Vec3::x(), v(0.3, -0.8, 0.52).normalize(), v(-0.1, 0.2, 0.97).normalize()] {
            let analytic = a.inner(&w, &eta);
            let best = [1e-3, 1e-4, 1e-5]
                .iter()
                .map(|&eps| {
                    let ep = so3_energy(&Rotation::exp(&(eta * eps)).compose(&r), &x0, &x1);
                    let em = so3_energy(&Rotation::exp(&(-eta * eps)).compose(&r), &x0, &x1);
                    (((ep - em) / (2.0 * eps)) - analytic).abs() / analytic.abs()
                })
                .fold(f64::INFINITY, f64::min);
            assert!(best <= 1e-6, "rel {best}");
        }
    }

    #[test]
    fn matched_start_is_immediate() {
        let p = So3Problem { x0: Vec3::x(), x1: Vec3::x(), inertia: So3Inertia::identity() };
        let out = so3_flow(&p, Rotation::identity(), 0.05, 100, 1e-8).unwrap();
        assert!(out.converged);
        assert_eq!(out.trace.len(), 1);
        assert_eq!(out.trace[0].energy, 0.0);
        assert!(so3_flow(&p, Rotation::identity(), -1.0, 10, 1e-8).is_err());
    }

    #[test]
    fn quarter_turn_converges() {
        let p = So3Problem { x0: Vec3::x(), x1: Vec3::y(), inertia: So3Inertia::identity() };
        let out = so3_flow(&p, Rotation::identity(), 0.05, 10_000, 1e-8).unwrap();
        assert!(out.converged);
        assert!(out.residual(&p.x0, &p.x1) <= 1e-8);
        // cross-check the reached angle against a dense search about e3
        let angle = out.rotation.matrix()[(1, 0)].atan2(out.rotation.matrix()[(0, 0)]);
        let best = (0..=100_000)
            .map(|i| i as f64 * std::f64::consts::TAU / 100_000.0)
            .min_by(|a, b| {
                let ea = (v(a.cos(), a.sin(), 0.0) - p.x1).norm();
                let eb = (v(b.cos(), b.sin(), 0.0) - p.x1).norm();
                ea.partial_cmp(&eb).unwrap()
            })
            .unwrap();
        assert!((angle - best).abs() < 1e-4);
        for w in out.trace.windows(2) {
            assert!(w[1].energy < w[0].energy);
        }
    }
}
