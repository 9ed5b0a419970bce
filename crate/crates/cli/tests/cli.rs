use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use diffeoflow::gfr1::FieldDump;

fn cli(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_diffeoflow")).args(args).current_dir(dir).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn synth(dir: &Path, kind: &str, grid: &str, out: &str) {
    let o = cli(&["synth", kind, "--grid", grid, "--out-dir", out], dir);
    assert!(o.status.success(), "{}", stderr(&o));
}

fn sup_norm(path: &Path) -> f64 {
    let dump = FieldDump::read_from(fs::File::open(path).unwrap()).unwrap();
    dump.components.iter().flatten().fold(0.0, |m: f64, v| m.max(v.abs()))
}

#[test]
fn identical_images_converge_at_step_zero() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    synth(dir, "translate-bump", "32", "in");
    let o = cli(
        &["register", "--template", "in/template.pgm", "--target", "in/template.pgm", "--out-dir", "out"],
        dir,
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(fs::read(dir.join("out/warped.pgm")).unwrap(), fs::read(dir.join("in/template.pgm")).unwrap());
    let trace = fs::read_to_string(dir.join("out/trace.csv")).unwrap();
    assert_eq!(trace.lines().count(), 2, "{trace}");
    let manifest = fs::read_to_string(dir.join("out/manifest.txt")).unwrap();
    assert!(manifest.contains("result.termination=converged"));
    assert!(manifest.contains("result.steps=0"));
}

#[test]
fn translated_bump_registers() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    synth(dir, "translate-bump", "64", "in");
    let o = cli(
        &["register", "--template", "in/template.pgm", "--target", "in/target.pgm", "--max-steps", "200"],
        dir,
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let manifest = fs::read_to_string(dir.join("manifest.txt")).unwrap();
    let value = |key: &str| -> f64 {
        manifest
            .lines()
            .find_map(|l| l.strip_prefix(&format!("{key}=")))
            .unwrap_or_else(|| panic!("{key} missing"))
            .parse()
            .unwrap()
    };
    assert!(value("result.energy_match") <= 0.1 * value("result.energy_match_initial"));
    assert!(value("result.min_det_jac") > 0.0);
    for f in ["warped.pgm", "grid.pgm", "trace.csv", "phi_displacement.gfr1", "psi_displacement.gfr1"] {
        assert!(dir.join(f).exists(), "{f}");
    }
    assert!(!dir.join("force_total.gfr1").exists());
}

#[test]
fn strong_regularization_moves_less() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    synth(dir, "translate-bump", "32", "in");
    let mut norms = Vec::new();
    for (sigma, out) in [("1e-3", "weak"), ("1e6", "strong")] {
        let o = cli(
            &[
                "register",
                "--template",
                "in/template.pgm",
                "--target",
                "in/target.pgm",
                "--sigma",
                sigma,
                "--max-steps",
                "60",
                "--out-dir",
                out,
            ],
            dir,
        );
        assert!(o.status.code() == Some(0), "{}", stderr(&o));
        norms.push(sup_norm(&dir.join(out).join("phi_displacement.gfr1")));
    }
    assert!(norms[1] < norms[0], "{norms:?}");
}

#[test]
fn config_file_is_overridden_by_flags() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    synth(dir, "translate-bump", "32", "in");
    fs::write(dir.join("run.cfg"), "template=in/template.pgm\ntarget=in/target.pgm\nmax-steps=5\n").unwrap();
    let o = cli(&["register", "--config", "run.cfg", "--max-steps", "2", "--out-dir", "out"], dir);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(fs::read_to_string(dir.join("out/trace.csv")).unwrap().lines().count(), 4);
    let o = cli(&["register", "--config", "run.cfg", "--out-dir", "out2"], dir);
    assert_eq!(fs::read_to_string(dir.join("out2/trace.csv")).unwrap().lines().count(), 7, "{}", stderr(&o));
    fs::write(dir.join("bad.cfg"), "colour=blue\n").unwrap();
    assert_eq!(cli(&["register", "--config", "bad.cfg"], dir).status.code(), Some(1));
}

#[test]
fn bad_inputs_exit_with_one() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    synth(dir, "translate-bump", "32", "small");
    synth(dir, "translate-bump", "64", "large");
    fs::write(dir.join("junk.pgm"), b"P7\n1 1\n255\n\0").unwrap();
    let cases: [&[&str]; 3] = [
        &["register", "--template", "missing.pgm", "--target", "small/target.pgm"],
        &["register", "--template", "junk.pgm", "--target", "small/target.pgm"],
        &["register", "--template", "small/template.pgm", "--target", "large/target.pgm"],
    ];
    for args in cases {
        let o = cli(args, dir);
        assert_eq!(o.status.code(), Some(1), "{args:?}: {}", stderr(&o));
        assert!(stderr(&o).starts_with("error:"));
    }
    assert!(stderr(&cli(cases[2], dir)).contains("dimension mismatch"));
}

#[test]
fn failed_line_search_exits_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    synth(dir, "translate-bump", "32", "in");
    // the first admissible step is far below dt_min
    let o = cli(
        &["register", "--template", "in/template.pgm", "--target", "in/target.pgm", "--dt-min", "100"],
        dir,
    );
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(fs::read_to_string(dir.join("manifest.txt")).unwrap().contains("line search failed"));
    assert!(dir.join("trace.csv").exists());
}

#[test]
fn synth_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    for out in ["a", "b"] {
        synth(dir, "two-blobs", "32", out);
    }
    for f in ["template.pgm", "target.pgm"] {
        assert_eq!(fs::read(dir.join("a").join(f)).unwrap(), fs::read(dir.join("b").join(f)).unwrap());
    }
    let o = cli(&["synth", "warp-bump", "--grid", "32", "--amplitude", "0", "--out-dir", "flat"], dir);
    assert!(o.status.success());
    assert_eq!(
        fs::read(dir.join("flat/template.pgm")).unwrap(),
        fs::read(dir.join("flat/target.pgm")).unwrap()
    );
    assert_eq!(cli(&["synth", "spiral"], dir).status.code(), Some(1));
}

#[test]
fn so3_demo_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let o = cli(&["so3-demo", "--out", "t.csv"], dir);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).starts_with("converged"));
    let trace = fs::read_to_string(dir.join("t.csv")).unwrap();
    assert!(trace.starts_with("step,t,E,omega_norm_A,path_length_A\n"));
    let o = cli(&["so3-demo", "--x1", "1,0,0", "--out", "m.csv"], dir);
    assert!(o.status.success());
    assert_eq!(fs::read_to_string(dir.join("m.csv")).unwrap().lines().count(), 2);
    let o = cli(&["so3-demo", "--dt", "-0.1"], dir);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("positive"));
}

#[test]
fn self_check_passes_and_catches_mutations() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let o = cli(&["self-check"], dir);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(!stdout(&o).contains("FAIL"));
    for (mutation, check) in
        [("j1-sign", "image momentum pairing"), ("invert-off-by-one", "inertia round trip")]
    {
        let o = cli(&["self-check", "--inject", mutation], dir);
        assert_eq!(o.status.code(), Some(1));
        let out = stdout(&o);
        assert!(out.lines().any(|l| l.starts_with("FAIL") && l.contains(check)), "{mutation}: {out}");
    }
}
