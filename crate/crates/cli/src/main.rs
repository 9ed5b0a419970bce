//! `diffeoflow`: synthetic problems, registration runs, the SO(3) demo and
//! the invariant self-check.

mod config;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use diffeoflow::flow::{run_from_identity, trace_csv};
use diffeoflow::gfr1::FieldDump;
use diffeoflow::momentum::assemble_force;
use diffeoflow::pgm::{deformation_raster, GrayImage};
use diffeoflow::selfcheck::{run_battery, Mutation};
use diffeoflow::so3::{so3_flow, so3_trace_csv, Rotation, So3Inertia, So3Problem, Vec3};
use diffeoflow::synth::{synth_pair, SynthKind};
use diffeoflow::{FlowConfig, InertiaSpec, Interpolation, MetricField, Termination, TorusGrid};

use config::{overlay, KeyValues};

/// Spacing of the drawn grid lines in the deformation raster, in cells.
const RASTER_SPACING: usize = 8;
/// Pixels per grid cell in the deformation raster.
const RASTER_UPSCALE: usize = 4;

#[derive(Parser, Debug)]
#[command(name = "diffeoflow", version, about = "Diffeomorphic image registration on the flat torus")]
#[command(args_override_self = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Register a template image onto a target image.
    Register(RegisterArgs),
    /// Write a synthetic template/target pair as PGM images.
    Synth(SynthArgs),
    /// Run the SO(3) gradient flow that rotates x0 onto x1.
    #[command(name = "so3-demo")]
    So3Demo(So3Args),
    /// Run the invariant battery and report PASS/FAIL per check.
    #[command(name = "self-check")]
    SelfCheck(SelfCheckArgs),
}

#[derive(Args, Debug)]
struct RegisterArgs {
    /// Template image I0 (PGM, P2 or P5).
    #[arg(long)]
    template: Option<PathBuf>,
    /// Target image I1 (PGM, P2 or P5).
    #[arg(long)]
    target: Option<PathBuf>,
    /// Grid points per axis; defaults to the image size for square images.
    #[arg(long)]
    grid: Option<usize>,
    /// Inertia length scale (default 0.05).
    #[arg(long)]
    alpha: Option<f64>,
    /// Inertia order k >= 2 (default 2).
    #[arg(long)]
    order_k: Option<u32>,
    /// Weight of the metric regularizer (default 1e-3).
    #[arg(long)]
    sigma: Option<f64>,
    /// Largest trial step of the line search.
    #[arg(long)]
    dt: Option<f64>,
    /// Smallest step before the line search gives up.
    #[arg(long)]
    dt_min: Option<f64>,
    #[arg(long)]
    max_steps: Option<usize>,
    /// Stop when ||u||_A falls below this (`auto` = 1e-6 sqrt(E0)).
    #[arg(long)]
    grad_tol: Option<GradTol>,
    /// Smallest admissible Jacobian determinant.
    #[arg(long)]
    jac_floor: Option<f64>,
    /// Largest admissible inverse-consistency defect, in cells.
    #[arg(long)]
    defect_bound: Option<f64>,
    /// Cap on the per-step displacement, in cells.
    #[arg(long)]
    max_step_cells: Option<f64>,
    /// Accept a step only if E drops by this fraction of dt ||u||_A^2
    /// (0 = any strict decrease; default 0.9).
    #[arg(long)]
    sufficient_decrease: Option<f64>,
    /// Image/map interpolation: linear, cubic-bspline or quintic-bspline.
    #[arg(long)]
    interpolation: Option<String>,
    /// Recorded in the manifest; registration itself is deterministic.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Also dump the final force components.
    #[arg(long)]
    dump_fields: bool,
    /// key=value settings file; command-line flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SynthArgs {
    /// translate-bump, warp-bump or two-blobs.
    kind: String,
    #[arg(long, default_value_t = 64)]
    grid: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Warp size in units of the domain length (warp-bump only).
    #[arg(long, default_value_t = 0.05)]
    amplitude: f64,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Args, Debug)]
struct So3Args {
    #[arg(long, value_parser = parse_vec3, default_value = "1,0,0")]
    x0: Vec3,
    #[arg(long, value_parser = parse_vec3, default_value = "0,1,0")]
    x1: Vec3,
    /// Diagonal of the inertia matrix.
    #[arg(long, value_parser = parse_vec3, default_value = "1,1,1")]
    inertia_diag: Vec3,
    #[arg(long, value_parser = parse_positive, allow_negative_numbers = true, default_value_t = 0.05)]
    dt: f64,
    #[arg(long, default_value_t = 10_000)]
    steps: usize,
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    /// Trace CSV path.
    #[arg(long, default_value = "so3_trace.csv")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct SelfCheckArgs {
    /// Deliberately break an operator (harness sanity check).
    #[arg(long, hide = true, value_parser = parse_mutation)]
    inject: Option<Mutation>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum GradTol {
    Auto,
    Value(f64),
}

impl FromStr for GradTol {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if s == "auto" {
            return Ok(GradTol::Auto);
        }
        s.parse::<f64>().map(GradTol::Value).map_err(|e| format!("expected `auto` or a number: {e}"))
    }
}

impl std::fmt::Display for GradTol {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            GradTol::Auto => f.write_str("auto"),
            GradTol::Value(v) => write!(f, "{v}"),
        }
    }
}

fn parse_vec3(s: &str) -> std::result::Result<Vec3, String> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("`{p}`: {e}")))
        .collect::<std::result::Result<_, _>>()?;
    match parts[..] {
        [x, y, z] => Ok(Vec3::new(x, y, z)),
        _ => Err(format!("expected three comma-separated numbers, got {}", parts.len())),
    }
}

fn parse_positive(s: &str) -> std::result::Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(format!("must be a positive number, got {v}"))
    }
}

fn parse_mutation(s: &str) -> std::result::Result<Mutation, String> {
    Mutation::parse(s).ok_or_else(|| format!("unknown mutation `{s}`"))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Register(a) => register(a),
        Command::Synth(a) => synth(a).map(|_| 0),
        Command::So3Demo(a) => so3_demo(a).map(|_| 0),
        Command::SelfCheck(a) => Ok(self_check(a)),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

/// Keys a settings file may set for `register`.
const REGISTER_KEYS: &[&str] = &[
    "template",
    "target",
    "grid",
    "alpha",
    "order_k",
    "sigma",
    "dt",
    "dt_min",
    "max_steps",
    "grad_tol",
    "jac_floor",
    "defect_bound",
    "max_step_cells",
    "sufficient_decrease",
    "interpolation",
    "seed",
    "out_dir",
    "dump_fields",
];

/// Fully resolved registration settings; echoed into the manifest.
#[derive(Debug)]
struct RegisterSettings {
    template: PathBuf,
    target: PathBuf,
    grid: usize,
    cfg: FlowConfig,
    grad_tol: GradTol,
    seed: u64,
    out_dir: PathBuf,
    dump_fields: bool,
}

fn read_image(path: &Path) -> Result<GrayImage> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    GrayImage::decode(&bytes).with_context(|| format!("decoding {}", path.display()))
}

/// Resolves every setting from the command line and the optional settings
/// file. The grid defaults to the image size, so it is fixed by `finish`.
fn resolve_register(a: RegisterArgs) -> Result<(RegisterSettings, Option<usize>)> {
    let file = a.config.as_deref().map(|p| KeyValues::load(p, REGISTER_KEYS)).transpose()?;
    let file = file.as_ref();
    let template = overlay(a.template, file, "template")?.context("--template is required")?;
    let target = overlay(a.target, file, "target")?.context("--target is required")?;
    let grid = overlay(a.grid, file, "grid")?;
    // images always live on the unit torus
    let mut cfg = FlowConfig::default_for(&TorusGrid::new(2, grid.unwrap_or(8), 1.0)?);
    let alpha = overlay(a.alpha, file, "alpha")?.unwrap_or(cfg.inertia.alpha());
    let order_k = overlay(a.order_k, file, "order_k")?.unwrap_or(cfg.inertia.order_k());
    cfg.inertia = InertiaSpec::new(alpha, order_k)?;
    macro_rules! take {
        ($field:ident, $target:expr) => {
            if let Some(v) = overlay(a.$field, file, stringify!($field))? {
                $target = v;
            }
        };
    }
    take!(sigma, cfg.sigma);
    take!(dt, cfg.dt_init);
    take!(dt_min, cfg.dt_min);
    take!(max_steps, cfg.max_steps);
    take!(jac_floor, cfg.jac_floor);
    take!(defect_bound, cfg.defect_bound);
    take!(max_step_cells, cfg.max_step_cells);
    take!(sufficient_decrease, cfg.sufficient_decrease);
    if let Some(name) = overlay(a.interpolation, file, "interpolation")? {
        cfg.interpolation =
            Interpolation::parse(&name).with_context(|| format!("unknown interpolation `{name}`"))?;
    }
    let grad_tol = overlay(a.grad_tol, file, "grad_tol")?.unwrap_or(GradTol::Auto);
    cfg.grad_tol = match grad_tol {
        GradTol::Auto => None,
        GradTol::Value(v) => Some(v),
    };
    cfg.validate()?;
    let settings = RegisterSettings {
        template,
        target,
        grid: 0,
        cfg,
        grad_tol,
        seed: overlay(a.seed, file, "seed")?.unwrap_or(0),
        out_dir: overlay(a.out_dir, file, "out_dir")?.unwrap_or_else(|| PathBuf::from(".")),
        dump_fields: a.dump_fields || overlay(None, file, "dump_fields")?.unwrap_or(false),
    };
    Ok((settings, grid))
}

fn settings_text(s: &RegisterSettings) -> String {
    let c = &s.cfg;
    let mut m = String::new();
    let _ = writeln!(m, "template={}", s.template.display());
    let _ = writeln!(m, "target={}", s.target.display());
    let _ = writeln!(m, "grid={}", s.grid);
    let _ = writeln!(m, "alpha={}", c.inertia.alpha());
    let _ = writeln!(m, "order_k={}", c.inertia.order_k());
    let _ = writeln!(m, "sigma={}", c.sigma);
    let _ = writeln!(m, "dt={}", c.dt_init);
    let _ = writeln!(m, "dt_min={}", c.dt_min);
    let _ = writeln!(m, "max_steps={}", c.max_steps);
    let _ = writeln!(m, "grad_tol={}", s.grad_tol);
    let _ = writeln!(m, "jac_floor={}", c.jac_floor);
    let _ = writeln!(m, "defect_bound={}", c.defect_bound);
    let _ = writeln!(m, "max_step_cells={}", c.max_step_cells);
    let _ = writeln!(m, "sufficient_decrease={}", c.sufficient_decrease);
    let _ = writeln!(m, "interpolation={}", c.interpolation.name());
    let _ = writeln!(m, "seed={}", s.seed);
    let _ = writeln!(m, "out_dir={}", s.out_dir.display());
    let _ = writeln!(m, "dump_fields={}", s.dump_fields);
    m
}

fn write_dump(dir: &Path, name: &str, dump: FieldDump) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, dump.to_bytes()?).with_context(|| format!("writing {}", path.display()))
}

fn register(a: RegisterArgs) -> Result<u8> {
    let started = Instant::now();
    let (mut s, grid) = resolve_register(a)?;
    let template_img = read_image(&s.template)?;
    let target_img = read_image(&s.target)?;
    if (template_img.width, template_img.height) != (target_img.width, target_img.height) {
        bail!(
            "dimension mismatch: template is {}x{}, target is {}x{}",
            template_img.width,
            template_img.height,
            target_img.width,
            target_img.height
        );
    }
    s.grid = match grid {
        Some(n) => n,
        None if template_img.width == template_img.height => template_img.width,
        None => bail!("non-square images need an explicit --grid"),
    };
    let template = template_img.to_field(s.grid)?;
    let target = target_img.to_field(s.grid)?;

    let out = run_from_identity(&s.cfg, &template, &target)?;
    fs::create_dir_all(&s.out_dir).with_context(|| format!("creating {}", s.out_dir.display()))?;
    let dir = s.out_dir.as_path();
    let state = &out.state;
    fs::write(dir.join("warped.pgm"), GrayImage::from_field(&state.image)?.encode_p5())?;
    fs::write(
        dir.join("grid.pgm"),
        deformation_raster(&state.pair, RASTER_SPACING, RASTER_UPSCALE)?.encode_p5(),
    )?;
    fs::write(dir.join("trace.csv"), trace_csv(&out.trace))?;
    write_dump(dir, "phi_displacement.gfr1", state.pair.phi_displacement().into())?;
    write_dump(dir, "psi_displacement.gfr1", state.pair.psi_displacement().into())?;
    if s.dump_fields {
        let g_ref = MetricField::identity(*template.grid());
        let f = assemble_force(&state.image, &target, &state.metric, &g_ref, s.cfg.sigma)?;
        write_dump(dir, "force_j1.gfr1", (&f.j1_term).into())?;
        write_dump(dir, "force_j2.gfr1", (&f.j2_term).into())?;
        write_dump(dir, "force_total.gfr1", (&f.total).into())?;
    }

    let first = &out.trace[0];
    let last = out.trace.last().unwrap_or(first);
    let min_det = out.trace.iter().map(|r| r.min_det_jac).fold(f64::INFINITY, f64::min);
    let max_defect = out.trace.iter().map(|r| r.inverse_defect).fold(0.0, f64::max);
    let mut manifest = String::from("# diffeoflow register manifest; reusable as --config\n");
    manifest.push_str(&settings_text(&s));
    let _ = writeln!(manifest, "result.termination={}", out.termination.name());
    let _ = writeln!(manifest, "result.steps={}", state.step);
    let _ = writeln!(manifest, "result.grad_tol={}", out.grad_tol);
    let _ = writeln!(manifest, "result.energy_initial={}", first.energy);
    let _ = writeln!(manifest, "result.energy_match_initial={}", first.energy_match);
    let _ = writeln!(manifest, "result.energy={}", last.energy);
    let _ = writeln!(manifest, "result.energy_match={}", last.energy_match);
    let _ = writeln!(manifest, "result.energy_reg={}", last.energy_reg);
    let _ = writeln!(manifest, "result.min_det_jac={min_det}");
    let _ = writeln!(manifest, "result.max_inverse_defect={max_defect}");
    let _ = writeln!(manifest, "result.wall_time_s={}", started.elapsed().as_secs_f64());
    fs::write(dir.join("manifest.txt"), manifest)?;

    println!(
        "{}: {} steps, E {:.6e} -> {:.6e}, E_match {:.6e} -> {:.6e}",
        out.termination.name(),
        state.step,
        first.energy,
        last.energy,
        first.energy_match,
        last.energy_match
    );
    Ok(match &out.termination {
        Termination::Converged | Termination::MaxSteps => 0,
        Termination::Failed(e) => {
            eprintln!("run failed: {e}");
            2
        }
    })
}

fn synth(a: SynthArgs) -> Result<()> {
    let kind = SynthKind::parse(&a.kind, a.amplitude)?;
    let grid = TorusGrid::square(a.grid)?;
    let (template, target) = synth_pair(&grid, kind, a.seed)?;
    fs::create_dir_all(&a.out_dir).with_context(|| format!("creating {}", a.out_dir.display()))?;
    fs::write(a.out_dir.join("template.pgm"), GrayImage::from_field(&template)?.encode_p5())?;
    fs::write(a.out_dir.join("target.pgm"), GrayImage::from_field(&target)?.encode_p5())?;
    Ok(())
}

fn so3_demo(a: So3Args) -> Result<()> {
    let d = a.inertia_diag;
    let problem = So3Problem { x0: a.x0, x1: a.x1, inertia: So3Inertia::diagonal([d.x, d.y, d.z])? };
    let out = so3_flow(&problem, Rotation::identity(), a.dt, a.steps, a.tol)?;
    fs::write(&a.out, so3_trace_csv(&out.trace)).with_context(|| format!("writing {}", a.out.display()))?;
    let status = match (out.converged, out.stalled) {
        (true, _) => "converged",
        (false, true) => "stalled",
        (false, false) => "max_steps",
    };
    println!(
        "{status}: {} steps, residual {:.3e}, orthogonality error {:.3e}",
        out.trace.len() - 1,
        out.residual(&problem.x0, &problem.x1),
        out.rotation.orthogonality_error()
    );
    Ok(())
}

fn self_check(a: SelfCheckArgs) -> u8 {
    let results = run_battery(a.inject);
    for r in &results {
        println!("{r}");
    }
    let failed = results.iter().filter(|r| !r.passed).count();
    println!("{} checks, {failed} failed", results.len());
    u8::from(failed > 0)
}
