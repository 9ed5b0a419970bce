//! The invariant battery behind `diffeoflow self-check`.
//!
//! Every check compares a measured quantity against a tolerance and never
//! panics; failures are part of the report. A [`Mutation`] deliberately
//! breaks one operator inside the battery so the harness itself can be
//! shown to detect faults.

use std::fmt;

use crate::deformation::identity_pair;
use crate::error::Result;
use crate::field::{ScalarField, VectorField};
use crate::flow::{dissipation_residual, fd_gradient_check, run, FlowConfig, FlowState, Problem};
use crate::grid::TorusGrid;
use crate::inertia::InertiaSpec;
use crate::momentum::{j1, j2, lie_derivative};
use crate::random::FieldRng;
use crate::so3::{so3_flow, so3_momentum, Rotation, So3Inertia, So3Problem, Vec3};
use crate::spectral::{l2_inner_scalar, l2_inner_tensor, l2_inner_vector, partials, spectral_gradient};
use crate::synth::{periodic_gaussian, synth_pair, SynthKind};

/// Grid sizes the battery runs at.
pub const BATTERY_SIZES: [usize; 2] = [32, 64];

/// Faults that can be injected into the battery's operators.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mutation {
    /// Uses `-J1` wherever the battery evaluates the image momentum map.
    FlipJ1Sign,
    /// Inverts `A` with the exponent `k + 1` instead of `k`.
    InvertSymbolOffByOne,
}

impl Mutation {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "j1-sign" => Some(Mutation::FlipJ1Sign),
            "invert-off-by-one" => Some(Mutation::InvertSymbolOffByOne),
            _ => None,
        }
    }
}

/// Outcome of one invariant check.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: String,
    pub measured: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl CheckResult {
    /// Passes when `measured <= tolerance` (NaN fails).
    fn at_most(name: String, measured: f64, tolerance: f64) -> Self {
        let passed = measured <= tolerance;
        Self { name, measured, tolerance, passed }
    }

    fn failed(name: String, err: impl fmt::Display) -> Self {
        Self { name: format!("{name} ({err})"), measured: f64::NAN, tolerance: f64::NAN, passed: false }
    }
}

impl fmt::Display for CheckResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(
            f,
            "{tag} {:<44} measured {:<12.3e} tolerance {:.1e}",
            self.name, self.measured, self.tolerance
        )
    }
}

/// Runs every check at each size in [`BATTERY_SIZES`] plus the SO(3) checks.
pub fn run_battery(mutation: Option<Mutation>) -> Vec<CheckResult> {
    let mut out = Vec::new();
    for n in BATTERY_SIZES {
        out.extend(grid_checks(n, mutation));
    }
    out.extend(so3_checks());
    out
}

/// Collapses a fallible check into a result.
fn check(name: String, f: impl FnOnce() -> Result<(f64, f64)>) -> CheckResult {
    match f() {
        Ok((measured, tol)) => CheckResult::at_most(name, measured, tol),
        Err(e) => CheckResult::failed(name, e),
    }
}

fn image_momentum(image: &ScalarField, p: &ScalarField, mutation: Option<Mutation>) -> Result<VectorField> {
    let m = j1(image, p)?;
    Ok(if mutation == Some(Mutation::FlipJ1Sign) { m.scaled(-1.0) } else { m })
}

fn rel(a: f64, b: f64, scale: f64) -> f64 {
    (a - b).abs() / scale.abs().max(f64::MIN_POSITIVE)
}

fn grid_checks(n: usize, mutation: Option<Mutation>) -> Vec<CheckResult> {
    let g = match TorusGrid::square(n) {
        Ok(g) => g,
        Err(e) => return vec![CheckResult::failed(format!("grid N={n}"), e)],
    };
    let tag = |s: &str| format!("{s} [N={n}]");
    let band = n / 4;
    let mut rng = FieldRng::new(n as u64);
    let spec = InertiaSpec::default_for(g.side());
    let mut out = Vec::new();

    out.push(check(tag("summation by parts"), || {
        let f = rng.band_limited_scalar(&g, band);
        let q = rng.band_limited_scalar(&g, band);
        let (df, dq) = (partials(&g, f.values()), partials(&g, q.values()));
        let mut worst = 0.0_f64;
        for a in 0..g.dim() {
            let lhs = l2_inner_scalar(&ScalarField::new(g, df[a].clone())?, &q)?;
            let rhs = -l2_inner_scalar(&f, &ScalarField::new(g, dq[a].clone())?)?;
            worst = worst.max(rel(lhs, rhs, lhs.abs().max(1e-300)));
        }
        Ok((worst, 1e-12))
    }));

    out.push(check(tag("quadrature of periodic Gaussian"), || {
        let w = 0.1;
        let bump = periodic_gaussian(&g, &[0.3, 0.6], w)?;
        let integral: f64 = bump.values().iter().sum::<f64>() * g.cell_volume();
        let exact = 2.0 * std::f64::consts::PI * w * w;
        Ok(((integral - exact).abs(), 1e-6))
    }));

    out.push(check(tag("inertia round trip"), || {
        let inverse = match mutation {
            Some(Mutation::InvertSymbolOffByOne) => InertiaSpec::new(spec.alpha(), spec.order_k() + 1)?,
            _ => spec,
        };
        // smooth fields: the roundoff floor grows with the largest symbol in the band
        let mut worst = 0.0_f64;
        for _ in 0..10 {
            let v = rng.band_limited_vector(&g, n / 8);
            let back = inverse.invert(&spec.apply(&v)?)?;
            worst = worst.max(back.sub(&v)?.max_abs() / v.max_abs());
        }
        Ok((worst, 1e-12))
    }));

    out.push(check(tag("inertia self-adjoint"), || {
        let u = rng.band_limited_vector(&g, band);
        let w = rng.band_limited_vector(&g, band);
        let uw = l2_inner_vector(&spec.apply(&u)?, &w)?;
        let wu = l2_inner_vector(&u, &spec.apply(&w)?)?;
        Ok((rel(uw, wu, uw), 1e-12))
    }));

    out.push(check(tag("image momentum pairing"), || {
        let img = rng.band_limited_scalar(&g, band);
        let p = rng.band_limited_scalar(&g, band);
        let v = rng.band_limited_vector(&g, band);
        let lhs = l2_inner_vector(&image_momentum(&img, &p, mutation)?, &v)?;
        let grad = spectral_gradient(&img)?;
        let action: Vec<f64> = (0..g.len())
            .map(|k| -(0..g.dim()).map(|a| v.component(a)[k] * grad.component(a)[k]).sum::<f64>())
            .collect();
        let rhs = l2_inner_scalar(&p, &ScalarField::new(g, action)?)?;
        Ok((rel(lhs, rhs, rhs), 1e-12))
    }));

    out.push(check(tag("metric momentum pairing"), || {
        let h = rng.band_limited_metric(&g, band, 0.2);
        let p = rng.band_limited_tensor(&g, band, 1.0);
        let v = rng.band_limited_vector(&g, band);
        let lhs = l2_inner_vector(&j2(&h, &p)?, &v)?;
        let rhs = -l2_inner_tensor(&p, &lie_derivative(&h, &v)?)?;
        Ok((rel(lhs, rhs, rhs), 1e-6))
    }));

    // flow checks on the translated-bump problem
    let problem = synth_pair(&g, SynthKind::TranslateBump, 0).and_then(|(t, s)| Problem::new(t, s));
    let problem = match problem {
        Ok(p) => p,
        Err(e) => {
            out.push(CheckResult::failed(tag("flow problem"), e));
            return out;
        }
    };
    let mut cfg = FlowConfig::default_for(&g);
    cfg.max_steps = 100;
    let reference = run(&cfg, &problem.template, &problem.target, identity_pair(g));

    out.push(check(tag("gradient vs finite differences"), || {
        let reference = reference.clone()?;
        // a mid-run state: generic, not matched
        let pair = &reference.state.pair;
        let mut worst = 0.0_f64;
        for _ in 0..3 {
            let xi = rng.band_limited_vector(&g, band);
            let mut best = f64::INFINITY;
            for eps in [1e-3, 1e-4, 1e-5] {
                let c = gradient_check(&cfg, &problem, pair, &xi, eps, mutation)?;
                best = best.min(c);
            }
            worst = worst.max(best);
        }
        Ok((worst, 1e-4))
    }));

    out.push(check(tag("dissipation residual halves with dt"), || {
        let state = FlowState::new(&cfg, &problem, identity_pair(g).with_interpolation(cfg.interpolation))?;
        let dt0 = 0.1 * g.spacing() / state.velocity.max_norm();
        let r: Vec<f64> = (0..4)
            .map(|j| dissipation_residual(&cfg, &problem, &state, dt0 / 2f64.powi(j)))
            .collect::<Result<_>>()?;
        let worst = r.windows(2).map(|w| (w[0] / w[1] - 2.0).abs()).fold(0.0, f64::max);
        Ok((worst, 0.5))
    }));

    out.push(check(tag("strict energy decrease"), || {
        let reference = reference.clone()?;
        let violations = reference.trace.windows(2).filter(|w| !(w[1].energy < w[0].energy)).count();
        Ok((violations as f64, 0.0))
    }));

    out.push(check(tag("path length bound"), || {
        let reference = reference.clone()?;
        let e0 = reference.trace[0].energy;
        let worst = reference.trace[1..]
            .iter()
            .map(|r| r.path_length_a / (r.t * e0).sqrt() - 1.0)
            .fold(f64::NEG_INFINITY, f64::max);
        Ok((worst, 1e-6))
    }));

    out
}

/// Relative error of the analytic directional derivative, honoring the
/// J1 mutation by recomputing the force with the mutated operator.
fn gradient_check(
    cfg: &FlowConfig,
    problem: &Problem,
    pair: &crate::deformation::DiffeoPair,
    xi: &VectorField,
    eps: f64,
    mutation: Option<Mutation>,
) -> Result<f64> {
    let c = fd_gradient_check(cfg, &problem.template, &problem.target, pair, xi, eps)?;
    if mutation != Some(Mutation::FlipJ1Sign) {
        return Ok(c.rel_err);
    }
    let pair = pair.clone().with_interpolation(cfg.interpolation);
    let image = crate::deformation::pullback_image(&problem.template, &pair)?;
    let metric = crate::deformation::pushforward_metric(&pair)?;
    let residual = image.sub(&problem.target)?;
    let force =
        crate::momentum::assemble_force(&image, &problem.target, &metric, problem.g_ref(), cfg.sigma)?;
    let flipped = force.j2_term.add(&image_momentum(&image, &residual, Some(Mutation::FlipJ1Sign))?)?;
    let analytic = l2_inner_vector(&flipped, xi)?;
    Ok((analytic - c.numeric).abs() / analytic.abs())
}

fn so3_checks() -> Vec<CheckResult> {
    let mut out = Vec::new();
    let mut rng = FieldRng::new(3);
    let mut vec3 = || Vec3::new(rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0));

    let mut worst = 0.0_f64;
    for _ in 0..100 {
        let (q, p, w) = (vec3(), vec3(), vec3());
        worst = worst.max((so3_momentum(&q, &p).dot(&w) - p.dot(&w.cross(&q))).abs());
    }
    out.push(CheckResult::at_most("SO(3) momentum pairing".into(), worst, 1e-14));

    let problem = So3Problem { x0: Vec3::x(), x1: Vec3::y(), inertia: So3Inertia::identity() };
    match so3_flow(&problem, Rotation::identity(), 0.05, 10_000, 1e-8) {
        Ok(o) => {
            out.push(CheckResult::at_most(
                "SO(3) quarter-turn residual".into(),
                o.residual(&problem.x0, &problem.x1),
                1e-8,
            ));
            let e0 = o.trace[0].energy;
            let path = o.trace[1..]
                .iter()
                .map(|r| r.path_length_a / (r.t * e0).sqrt() - 1.0)
                .fold(f64::NEG_INFINITY, f64::max);
            out.push(CheckResult::at_most("SO(3) path length bound".into(), path, 1e-12));
        }
        Err(e) => out.push(CheckResult::failed("SO(3) quarter-turn".into(), e)),
    }

    // group-preserving update: compose many exponentials
    let mut r = Rotation::identity();
    for _ in 0..10_000 {
        r = Rotation::exp(&(0.05 * vec3())).compose(&r);
    }
    let drift = r.orthogonality_error().max((r.det() - 1.0).abs());
    out.push(CheckResult::at_most("SO(3) orthogonality after 1e4 steps".into(), drift, 1e-10));
    out
}
