//! The discrete gradient flow `phi' = u o phi`, `u = -A^-1 F(phi)`, with a
//! monotone backtracking line search and the diagnostics that go with it.

use std::fmt::Write as _;

use crate::deformation::{
    identity_pair, inverse_defect, jacobian_min_det, pullback_image, pushforward_metric, DiffeoPair,
    StepReport, DEFAULT_JAC_FLOOR,
};
use crate::error::{Error, Result};
use crate::field::{MetricField, ScalarField, VectorField};
use crate::grid::TorusGrid;
use crate::inertia::InertiaSpec;
use crate::interp::Interpolation;
use crate::momentum::{assemble_force, ForceBreakdown};
use crate::spectral::{l2_inner_scalar, l2_inner_tensor};

/// Solver and model parameters of one registration run.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowConfig {
    /// Weight of the metric regularizer.
    pub sigma: f64,
    pub inertia: InertiaSpec,
    /// Largest trial time step.
    pub dt_init: f64,
    /// The line search gives up below this step.
    pub dt_min: f64,
    pub max_steps: usize,
    /// Stop once `||u||_A` drops below this; `None` means `1e-6 sqrt(E0)`.
    pub grad_tol: Option<f64>,
    pub jac_floor: f64,
    /// Bound on the inverse-consistency defect, in grid cells.
    pub defect_bound: f64,
    /// Trial steps never move a node further than this many cells.
    pub max_step_cells: f64,
    /// Sufficient-decrease factor `c` in `[0, 1)`: a trial step is accepted
    /// when `E_new < E - c dt ||u||_A^2`. Zero demands strict decrease only.
    pub sufficient_decrease: f64,
    pub interpolation: Interpolation,
}

impl FlowConfig {
    pub fn default_for(grid: &TorusGrid) -> Self {
        Self {
            sigma: 1e-3,
            inertia: InertiaSpec::default_for(grid.side()),
            dt_init: 1e3,
            dt_min: 1e-9,
            max_steps: 2000,
            grad_tol: None,
            jac_floor: DEFAULT_JAC_FLOOR,
            defect_bound: 2.0,
            max_step_cells: 0.5,
            sufficient_decrease: 0.9,
            interpolation: Interpolation::QuinticBSpline,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidConfig(format!("{name} = {v} must be positive")))
            }
        };
        if !(self.sigma.is_finite() && self.sigma >= 0.0) {
            return Err(Error::InvalidConfig(format!("sigma = {} must be >= 0", self.sigma)));
        }
        positive("dt_init", self.dt_init)?;
        positive("dt_min", self.dt_min)?;
        positive("jac_floor", self.jac_floor)?;
        positive("defect_bound", self.defect_bound)?;
        positive("max_step_cells", self.max_step_cells)?;
        if !(0.0..1.0).contains(&self.sufficient_decrease) {
            return Err(Error::InvalidConfig(format!(
                "sufficient_decrease = {} must lie in [0, 1)",
                self.sufficient_decrease
            )));
        }
        if let Some(t) = self.grad_tol {
            positive("grad_tol", t)?;
        }
        if self.dt_min > self.dt_init {
            return Err(Error::InvalidConfig(format!(
                "dt_min = {} exceeds dt_init = {}",
                self.dt_min, self.dt_init
            )));
        }
        Ok(())
    }
}

/// `E = E_match + E_reg`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Energy {
    pub total: f64,
    pub matching: f64,
    pub regularization: f64,
}

/// `E_match = 1/2 ||I - I1||^2`, `E_reg = sigma/2 ||h - g||^2`.
pub fn energy(
    image: &ScalarField,
    target: &ScalarField,
    h: &MetricField,
    g_ref: &MetricField,
    sigma: f64,
) -> Result<Energy> {
    let r = image.sub(target)?;
    let matching = 0.5 * l2_inner_scalar(&r, &r)?;
    let regularization = if sigma == 0.0 {
        h.grid().check_same(image.grid(), "energy")?;
        0.0
    } else {
        let d = h.sub(g_ref)?;
        0.5 * sigma * l2_inner_tensor(&d, &d)?
    };
    Ok(Energy { total: matching + regularization, matching, regularization })
}

/// Template, target and the reference metric they are registered against.
#[derive(Debug, Clone)]
pub struct Problem {
    pub template: ScalarField,
    pub target: ScalarField,
    g_ref: MetricField,
}

impl Problem {
    pub fn new(template: ScalarField, target: ScalarField) -> Result<Self> {
        template.grid().check_same(target.grid(), "problem")?;
        template.validate()?;
        target.validate()?;
        let g_ref = MetricField::identity(*template.grid());
        Ok(Self { template, target, g_ref })
    }

    pub fn grid(&self) -> &TorusGrid {
        self.template.grid()
    }

    pub fn g_ref(&self) -> &MetricField {
        &self.g_ref
    }

    /// Energy of the state reached by `pair`.
    pub fn energy_of(&self, sigma: f64, pair: &DiffeoPair) -> Result<Energy> {
        let image = pullback_image(&self.template, pair)?;
        let h = pushforward_metric(pair)?;
        energy(&image, &self.target, &h, &self.g_ref, sigma)
    }
}

/// Descent velocity `u = -A^-1 F` from an already evaluated image and metric.
pub fn descent_velocity_from(
    cfg: &FlowConfig,
    image: &ScalarField,
    target: &ScalarField,
    h: &MetricField,
    g_ref: &MetricField,
) -> Result<(VectorField, ForceBreakdown)> {
    let force = assemble_force(image, target, h, g_ref, cfg.sigma)?;
    let u = cfg.inertia.invert(&force.total)?.scaled(-1.0);
    Ok((u, force))
}

/// Descent velocity at the state reached by `pair`.
pub fn descent_velocity(
    cfg: &FlowConfig,
    template: &ScalarField,
    target: &ScalarField,
    pair: &DiffeoPair,
) -> Result<(VectorField, ForceBreakdown)> {
    let image = pullback_image(template, pair)?;
    let h = pushforward_metric(pair)?;
    let g_ref = MetricField::identity(*pair.grid());
    descent_velocity_from(cfg, &image, target, &h, &g_ref)
}

/// Current point of a flow together with everything derived from it.
#[derive(Debug, Clone)]
pub struct FlowState {
    pub step: usize,
    /// Accumulated accepted flow time.
    pub t: f64,
    pub pair: DiffeoPair,
    pub image: ScalarField,
    pub metric: MetricField,
    pub energy: Energy,
    /// Descent velocity at this state.
    pub velocity: VectorField,
    pub velocity_norm_a: f64,
    /// `sum ||u_n||_A dt_n` over the accepted steps so far.
    pub path_length_a: f64,
    /// Trial step for the next line search.
    pub dt_next: f64,
    pub last_report: StepReport,
}

impl FlowState {
    pub fn new(cfg: &FlowConfig, problem: &Problem, pair: DiffeoPair) -> Result<Self> {
        problem.grid().check_same(pair.grid(), "flow state")?;
        let image = pullback_image(&problem.template, &pair)?;
        let metric = pushforward_metric(&pair)?;
        let energy = energy(&image, &problem.target, &metric, problem.g_ref(), cfg.sigma)?;
        let (velocity, _) = descent_velocity_from(cfg, &image, &problem.target, &metric, problem.g_ref())?;
        let velocity_norm_a = cfg.inertia.norm(&velocity)?;
        let last_report = StepReport {
            dt_used: 0.0,
            min_jac_det: jacobian_min_det(&pair)?,
            inverse_defect: inverse_defect(&pair),
        };
        Ok(Self {
            step: 0,
            t: 0.0,
            pair,
            image,
            metric,
            energy,
            velocity,
            velocity_norm_a,
            path_length_a: 0.0,
            dt_next: cfg.dt_init,
            last_report,
        })
    }

    pub fn record(&self) -> TraceRecord {
        TraceRecord {
            step: self.step,
            t: self.t,
            energy: self.energy.total,
            energy_match: self.energy.matching,
            energy_reg: self.energy.regularization,
            v_norm_a: self.velocity_norm_a,
            dt: self.last_report.dt_used,
            min_det_jac: self.last_report.min_jac_det,
            inverse_defect: self.last_report.inverse_defect,
            path_length_a: self.path_length_a,
        }
    }
}

/// One accepted gradient step with backtracking.
///
/// The trial step is `min(state.dt_next, max_step_cells * h / |u|_inf)` and
/// is halved until the energy strictly decreases (by at least
/// `sufficient_decrease * dt * ||u||_A^2`).
pub fn step(cfg: &FlowConfig, problem: &Problem, state: &FlowState) -> Result<(FlowState, StepReport)> {
    let grid = *problem.grid();
    let u = &state.velocity;
    let speed = u.max_norm();
    let mut dt = state.dt_next.min(cfg.dt_init);
    if speed > 0.0 {
        dt = dt.min(cfg.max_step_cells * grid.spacing() / speed);
    }
    let required_drop = cfg.sufficient_decrease * state.velocity_norm_a.powi(2);
    loop {
        if dt < cfg.dt_min {
            return Err(Error::LineSearchFailed { dt });
        }
        let trial = state.pair.advance(u, dt, cfg.jac_floor).and_then(|(pair, report)| {
            let image = pullback_image(&problem.template, &pair)?;
            let metric = pushforward_metric(&pair)?;
            let e = energy(&image, &problem.target, &metric, problem.g_ref(), cfg.sigma)?;
            Ok((pair, report, image, metric, e))
        });
        match trial {
            Ok((pair, report, image, metric, e)) if e.total < state.energy.total - required_drop * dt => {
                if report.inverse_defect > cfg.defect_bound {
                    return Err(Error::InverseDefectExceeded {
                        defect: report.inverse_defect,
                        bound: cfg.defect_bound,
                    });
                }
                let (velocity, _) =
                    descent_velocity_from(cfg, &image, &problem.target, &metric, problem.g_ref())?;
                let velocity_norm_a = cfg.inertia.norm(&velocity)?;
                let next = FlowState {
                    step: state.step + 1,
                    t: state.t + dt,
                    pair,
                    image,
                    metric,
                    energy: e,
                    velocity,
                    velocity_norm_a,
                    path_length_a: state.path_length_a + state.velocity_norm_a * dt,
                    dt_next: (2.0 * dt).min(cfg.dt_init),
                    last_report: report,
                };
                return Ok((next, report));
            }
            Ok(_) | Err(Error::NonDiffeomorphic { .. }) | Err(Error::NotPositiveDefinite { .. }) => {
                dt *= 0.5;
            }
            Err(e) => return Err(e),
        }
    }
}

/// Per-step diagnostics written to the trace CSV.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRecord {
    pub step: usize,
    pub t: f64,
    pub energy: f64,
    pub energy_match: f64,
    pub energy_reg: f64,
    pub v_norm_a: f64,
    pub dt: f64,
    pub min_det_jac: f64,
    pub inverse_defect: f64,
    pub path_length_a: f64,
}

pub const TRACE_HEADER: &str = "step,t,E,E_match,E_reg,v_norm_A,dt,min_det_jac,inverse_defect,path_length_A";

impl TraceRecord {
    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            self.step,
            self.t,
            self.energy,
            self.energy_match,
            self.energy_reg,
            self.v_norm_a,
            self.dt,
            self.min_det_jac,
            self.inverse_defect,
            self.path_length_a
        )
    }
}

/// Renders a trace with its header, one line per record.
pub fn trace_csv(trace: &[TraceRecord]) -> String {
    let mut s = String::with_capacity(128 * (trace.len() + 1));
    s.push_str(TRACE_HEADER);
    s.push('\n');
    for r in trace {
        let _ = writeln!(s, "{}", r.csv_line());
    }
    s
}

/// Why a run stopped.
#[derive(Debug, Clone, PartialEq)]
pub enum Termination {
    /// `||u||_A` fell below the gradient tolerance.
    Converged,
    MaxSteps,
    Failed(Error),
}

impl Termination {
    pub fn name(&self) -> String {
        match self {
            Termination::Converged => "converged".into(),
            Termination::MaxSteps => "max_steps".into(),
            Termination::Failed(e) => format!("failed: {e}"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub state: FlowState,
    pub trace: Vec<TraceRecord>,
    pub termination: Termination,
    pub grad_tol: f64,
}

/// Integrates the flow from `initial` until convergence, `max_steps`, or a
/// failure. Failures mid-run are reported in `termination` together with
/// the trace up to that point; only invalid inputs return `Err`.
pub fn run(
    cfg: &FlowConfig,
    template: &ScalarField,
    target: &ScalarField,
    initial: DiffeoPair,
) -> Result<RunOutcome> {
    cfg.validate()?;
    let problem = Problem::new(template.clone(), target.clone())?;
    let pair = initial.with_interpolation(cfg.interpolation);
    let mut state = FlowState::new(cfg, &problem, pair)?;
    let grad_tol = cfg.grad_tol.unwrap_or(1e-6 * state.energy.total.sqrt());
    let mut trace = vec![state.record()];
    let termination = loop {
        if state.velocity_norm_a < grad_tol || state.velocity_norm_a == 0.0 {
            break Termination::Converged;
        }
        if state.step >= cfg.max_steps {
            break Termination::MaxSteps;
        }
        match step(cfg, &problem, &state) {
            Ok((next, _)) => {
                debug_assert!(next.energy.total < state.energy.total);
                state = next;
                trace.push(state.record());
            }
            Err(e) => break Termination::Failed(e),
        }
    };
    Ok(RunOutcome { state, trace, termination, grad_tol })
}

/// Runs from the identity map.
pub fn run_from_identity(
    cfg: &FlowConfig,
    template: &ScalarField,
    target: &ScalarField,
) -> Result<RunOutcome> {
    run(cfg, template, target, identity_pair(*template.grid()))
}

/// Analytic versus central-difference directional derivative of `E`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradientCheck {
    /// `<grad E, xi>_A = -<A u, xi>`.
    pub analytic: f64,
    /// `(E(advance(xi, eps)) - E(advance(-xi, eps))) / (2 eps)`.
    pub numeric: f64,
    pub abs_err: f64,
    /// `abs_err / |analytic|`; NaN when both sides vanish.
    pub rel_err: f64,
}

pub fn fd_gradient_check(
    cfg: &FlowConfig,
    template: &ScalarField,
    target: &ScalarField,
    pair: &DiffeoPair,
    xi: &VectorField,
    eps: f64,
) -> Result<GradientCheck> {
    let problem = Problem::new(template.clone(), target.clone())?;
    let pair = pair.clone().with_interpolation(cfg.interpolation);
    let (u, _) = descent_velocity(cfg, template, target, &pair)?;
    let analytic = -cfg.inertia.inner(&u, xi)?;
    let (plus, _) = pair.advance(xi, eps, cfg.jac_floor)?;
    let (minus, _) = pair.advance(&xi.scaled(-1.0), eps, cfg.jac_floor)?;
    let numeric = (problem.energy_of(cfg.sigma, &plus)?.total - problem.energy_of(cfg.sigma, &minus)?.total)
        / (2.0 * eps);
    let abs_err = (analytic - numeric).abs();
    Ok(GradientCheck { analytic, numeric, abs_err, rel_err: abs_err / analytic.abs() })
}

/// `|(E(advance(u, dt)) - E) / dt + ||u||_A^2|` at `state`, a discrete
/// probe of the dissipation identity `dE/dt = -||u||_A^2`.
pub fn dissipation_residual(cfg: &FlowConfig, problem: &Problem, state: &FlowState, dt: f64) -> Result<f64> {
    let (next, _) = state.pair.advance(&state.velocity, dt, cfg.jac_floor)?;
    let e = problem.energy_of(cfg.sigma, &next)?;
    Ok(((e.total - state.energy.total) / dt + state.velocity_norm_a.powi(2)).abs())
}
