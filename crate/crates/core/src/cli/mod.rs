//! Command-line entry point: parses the run configuration, dispatches to the
//! quasi-static, inertial, verification or convergence drivers and writes
//! their outputs.
//!
//! Exit codes: 0 success, 1 solver error, 2 a CHECK line failed, 64 usage
//! error, 65 invalid configuration, 74 output error.

pub mod config;
pub mod output;

use std::ffi::OsString;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::Parser;

use crate::discretization::{Discretization, PlateField, PlateRole};
use crate::inertial::{self, InertialContext};
use crate::model::{InitialData, SourceTerms};
use crate::operators::{CgSettings, OperatorContext};
use crate::quasistatic;
use crate::verify::{self, oracle::stability_report, SmoothData, SuiteReport, VerifyConfig};

pub use config::{parse_config, parse_config_with, ConfigError, InitialKind, InitialPreset, Mode, RunConfig, SourcePreset};
use output::{centerline_plate_csv, csv, midplane_pressure_csv, num, SnapshotKind, SnapshotWriter};

pub const EXIT_OK: i32 = 0;
pub const EXIT_SOLVER: i32 = 1;
pub const EXIT_CHECK_FAILED: i32 = 2;
pub const EXIT_USAGE: i32 = 64;
pub const EXIT_CONFIG: i32 = 65;
pub const EXIT_IO: i32 = 74;

/// Name of the effective-configuration echo in the output directory.
pub const CONFIG_ECHO: &str = "effective.conf";

#[derive(Debug, Parser)]
#[command(name = "poroplate", about = "Poro-elastic plate simulator and verification suite")]
struct Args {
    /// Run configuration file.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory (overrides output.dir).
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Configuration override `section.key=value`; repeatable.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Suppress the summary on standard output.
    #[arg(long)]
    quiet: bool,
}

const USAGE: &str = "usage: poroplate --config PATH [--out DIR] [--override KEY=VALUE]... [--quiet]";

/// Runs the command line `argv` (including the program name) and returns
/// the process exit code.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args = match Args::try_parse_from(argv) {
        Ok(a) => a,
        Err(e) if matches!(e.kind(), clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion) => {
            print!("{e}");
            return EXIT_OK;
        }
        Err(e) => {
            eprint!("{e}");
            return EXIT_USAGE;
        }
    };
    let Some(config_path) = args.config.clone() else {
        eprintln!("error: --config is required\n{USAGE}");
        return EXIT_USAGE;
    };
    match execute(&args, &config_path) {
        Ok(Outcome { checks_passed: true }) => EXIT_OK,
        Ok(Outcome { checks_passed: false }) => EXIT_CHECK_FAILED,
        Err(e) => {
            eprintln!("error: {e:#}");
            exit_code_for(&e)
        }
    }
}

fn exit_code_for(e: &anyhow::Error) -> i32 {
    if e.downcast_ref::<ConfigError>().is_some() {
        EXIT_CONFIG
    } else if e.downcast_ref::<crate::Error>().is_some() {
        EXIT_SOLVER
    } else if e.downcast_ref::<io::Error>().is_some() {
        EXIT_IO
    } else {
        EXIT_SOLVER
    }
}

struct Outcome {
    checks_passed: bool,
}

fn execute(args: &Args, config_path: &Path) -> anyhow::Result<Outcome> {
    let text = fs::read_to_string(config_path).with_context(|| format!("reading {}", config_path.display()))?;
    let mut cfg = parse_config_with(&text, &args.overrides)?;
    if let Some(out) = &args.out {
        cfg.output.dir = out.clone();
    }
    let out = cfg.output.dir.clone();
    fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    write(&out, CONFIG_ECHO, &cfg.to_string())?;

    let (summary, checks_passed) = match cfg.mode {
        Mode::Quasistatic => (run_quasistatic(&cfg, &out)?, true),
        Mode::Inertial => (run_inertial(&cfg, &out)?, true),
        Mode::Verify => run_verify(&cfg, &out)?,
        Mode::Convergence => run_convergence(&cfg, &out)?,
    };
    write(&out, "summary.txt", &summary)?;
    if !args.quiet {
        print!("{summary}");
    }
    Ok(Outcome { checks_passed })
}

fn write(dir: &Path, name: &str, contents: &str) -> anyhow::Result<()> {
    let path = dir.join(name);
    fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))
}

fn discretization(cfg: &RunConfig) -> crate::Result<Discretization> {
    Discretization::new(cfg.grid.m, cfg.grid.n, cfg.grid.n3, cfg.params.h)
}

/// Source terms of the configured preset.
pub fn build_sources(cfg: &RunConfig, disc: &Discretization) -> SourceTerms {
    let s = &cfg.sources;
    match s.preset {
        SourcePreset::Zero => SourceTerms::zero(),
        SourcePreset::SmoothRandom => SmoothData::random(cfg.seed).with_scale(1.0, s.f_scale, s.g_scale).sources(disc),
        SourcePreset::HarmonicLoad => {
            let (amp, omega) = (s.amplitude * s.f_scale, s.omega);
            let modes = disc.modes();
            SourceTerms::zero().with_f(
                move |t| {
                    let mut f = PlateField::zeros(modes, PlateRole::Load);
                    f.coeffs[0] = amp * (omega * t).sin();
                    f
                },
                true,
            )
        }
    }
}

/// Quasi-static initial datum of the configured preset.
pub fn build_initial(cfg: &RunConfig, disc: &Discretization) -> InitialData {
    let field = match cfg.initial.preset {
        InitialPreset::Zero => disc.zero_pressure(),
        InitialPreset::SmoothRandom => SmoothData::random(cfg.seed).initial_fluid_content(disc).scaled(cfg.initial.scale),
    };
    match cfg.initial.kind {
        InitialKind::FluidContent => InitialData::FluidContent(field),
        InitialKind::Pressure => InitialData::Pressure(field),
    }
}

/// Inertial initial data `(w0, w1, d0)`: for `smooth-random`, the static
/// deflection under the initial smooth load, zero velocity and the smooth
/// fluid content.
pub fn build_inertial_initial(cfg: &RunConfig, ctx: &OperatorContext) -> InitialData {
    let disc = &ctx.disc;
    let (w0, d0) = match cfg.initial.preset {
        InitialPreset::Zero => (disc.zero_plate(PlateRole::Displacement), disc.zero_pressure()),
        InitialPreset::SmoothRandom => {
            let data = SmoothData::random(cfg.seed);
            let mut w0 = ctx.solve_plate(&disc.zero_plate(PlateRole::Moment), &data.plate_load(disc, 0.0));
            w0.scale(cfg.initial.scale);
            w0.role = PlateRole::Displacement;
            (w0, data.initial_fluid_content(disc).scaled(cfg.initial.scale))
        }
    };
    InitialData::Inertial {
        w0,
        w1: disc.zero_plate(PlateRole::Velocity),
        d0,
        convention: cfg.initial.convention,
    }
}

fn snapshot_due(cfg: &RunConfig, step: usize, last: usize) -> bool {
    step == 0 || step == last || (cfg.output.snapshot_every > 0 && step.is_multiple_of(cfg.output.snapshot_every))
}

fn run_quasistatic(cfg: &RunConfig, out: &Path) -> anyhow::Result<String> {
    let disc = discretization(cfg)?;
    let k = cfg.permeability_model();
    let validation = k.validate(cfg.grid, cfg.params.h, cfg.t_final)?;
    let ctx = OperatorContext::new(cfg.params, disc, k)?.with_cg(cfg.cg);
    let sources = build_sources(cfg, &ctx.disc);
    let run = quasistatic::run(&ctx, &build_initial(cfg, &ctx.disc), &sources, cfg.t_final, cfg.tau, cfg.source_path)?;
    let disc = &ctx.disc;

    let rows: Vec<Vec<String>> = run
        .states
        .iter()
        .enumerate()
        .map(|(n, s)| {
            let d = s.diagnostics;
            vec![
                n.to_string(),
                num(s.t),
                num(d.energy),
                num(d.dissipation),
                num(disc.l2_norm(&s.p)),
                num(disc.v_norm(&s.p)),
                num(s.w.w_norm(&disc.basis)),
                d.cg_iterations.to_string(),
                num(d.cg_residual),
                num(d.plate_residual),
            ]
        })
        .collect();
    let header = [
        "step",
        "t",
        "energy",
        "dissipation",
        "pressure_l2",
        "pressure_v",
        "plate_w",
        "cg_iterations",
        "cg_residual",
        "plate_residual",
    ];
    write(out, "timeseries.csv", &csv(&header, &rows))?;

    let last = run.states.len() - 1;
    let mut snaps = SnapshotWriter::new(out).context("creating snapshot directory")?;
    let mut plates = Vec::new();
    for (n, s) in run.states.iter().enumerate().filter(|(n, _)| snapshot_due(cfg, *n, last)) {
        snaps.pressure(disc, n, s.t, &s.p)?;
        snaps.plate(SnapshotKind::PlateDisplacement, n, s.t, &s.w)?;
        plates.push((s.t, &s.w));
    }
    let files = snaps.finish(disc, &["mode quasistatic".to_string()])?;
    let final_state = run.final_state();
    write(out, "midplane_pressure.csv", &midplane_pressure_csv(disc, &final_state.p, cfg.output.slice_points))?;
    write(out, "centerline_plate.csv", &centerline_plate_csv(disc, &plates, cfg.output.slice_points))?;

    let stab = stability_report(&ctx, &run);
    Ok(format!(
        "mode quasistatic\nsteps {last}\npermeability {} range [{}, {}]\nfinal_energy {}\ntotal_cg_iterations {}\nstability_ratio {}\nsnapshots {}\n",
        ctx.permeability.name,
        num(validation.observed_min.unwrap_or(f64::NAN)),
        num(validation.observed_max.unwrap_or(f64::NAN)),
        num(final_state.diagnostics.energy),
        run.total_cg_iterations(),
        num(stab.ratio),
        files.len()
    ))
}

fn run_inertial(cfg: &RunConfig, out: &Path) -> anyhow::Result<String> {
    let disc = discretization(cfg)?;
    let k = cfg.permeability_model();
    k.validate(cfg.grid, cfg.params.h, cfg.t_final)?;
    let mut ictx = InertialContext::new(cfg.params, disc.clone(), k.clone())?;
    ictx.scaled.cg = cfg.cg;
    let physical_ctx = OperatorContext::new(cfg.params, disc, k)?;
    let sources = build_sources(cfg, ictx.disc());
    let y0 = ictx.initial_state(&build_inertial_initial(cfg, &physical_ctx))?;
    let run = inertial::run_inertial(&ictx, &y0, &sources, cfg.t_final, cfg.tau, cfg.scheme)?;
    let disc = ictx.disc();
    let physical = run.physical_states();

    let rows: Vec<Vec<String>> = run
        .energy
        .iter()
        .zip(&physical)
        .enumerate()
        .map(|(n, (e, y))| {
            vec![
                n.to_string(),
                num(y.t),
                num(e.x_norm),
                num(disc.l2_norm(&y.p)),
                num(y.w.w_norm(&disc.basis)),
                num(y.v.l2_norm()),
                num(e.dissipation),
                num(e.dissipated),
                num(e.balance_defect),
                e.cg_iterations.to_string(),
            ]
        })
        .collect();
    let header = [
        "step",
        "t",
        "x_norm",
        "pressure_l2",
        "plate_w",
        "velocity_l2",
        "dissipation",
        "dissipated",
        "balance_defect",
        "cg_iterations",
    ];
    write(out, "timeseries.csv", &csv(&header, &rows))?;

    let s = run.scaling;
    let metadata = vec![
        "mode inertial".to_string(),
        format!(
            "scaling omega0={} alpha_scaled={} k_scale={} sqrt_D={} sqrt_rho={} sqrt_c={} sigma={}",
            num(s.omega0),
            num(s.alpha),
            num(s.k_scale),
            num(s.sqrt_d),
            num(s.sqrt_rho),
            num(s.sqrt_c),
            num(run.sigma)
        ),
        "snapshots hold physical (unscaled) fields".to_string(),
    ];
    let last = physical.len() - 1;
    let mut snaps = SnapshotWriter::new(out).context("creating snapshot directory")?;
    let mut plates = Vec::new();
    for (n, y) in physical.iter().enumerate().filter(|(n, _)| snapshot_due(cfg, *n, last)) {
        snaps.pressure(disc, n, y.t, &y.p)?;
        snaps.plate(SnapshotKind::PlateDisplacement, n, y.t, &y.w)?;
        snaps.plate(SnapshotKind::PlateVelocity, n, y.t, &y.v)?;
        plates.push((y.t, &y.w));
    }
    let files = snaps.finish(disc, &metadata)?;
    write(out, "midplane_pressure.csv", &midplane_pressure_csv(disc, &physical[last].p, cfg.output.slice_points))?;
    write(out, "centerline_plate.csv", &centerline_plate_csv(disc, &plates, cfg.output.slice_points))?;

    let mut summary = format!("mode inertial\nsteps {last}\n");
    for m in &metadata[1..2] {
        summary.push_str(m);
        summary.push('\n');
    }
    summary.push_str(&format!(
        "initial_x_norm {}\nfinal_x_norm {}\ncontractive {}\nsnapshots {}\n",
        num(run.energy[0].x_norm),
        num(run.energy[last].x_norm),
        run.is_contractive(1e-12),
        files.len()
    ));
    Ok(summary)
}

fn checks_csv(report: &SuiteReport) -> String {
    let rows: Vec<Vec<String>> = report
        .checks
        .iter()
        .map(|c| {
            vec![
                c.suite.clone(),
                c.name.clone(),
                if c.passed { "PASS" } else { "FAIL" }.to_string(),
                format!("{:.6e}", c.value),
                format!("{:.6e}", c.bound),
            ]
        })
        .collect();
    csv(&["suite", "name", "status", "value", "bound"], &rows)
}

fn run_verify(cfg: &RunConfig, out: &Path) -> anyhow::Result<(String, bool)> {
    let names = cfg.suite_names()?;
    let mut vcfg = VerifyConfig::new(cfg.params, cfg.grid, cfg.permeability_model());
    vcfg.t_final = cfg.t_final;
    vcfg.tau = cfg.tau;
    vcfg.seed = cfg.seed;
    vcfg.cg = cfg.cg;
    vcfg.energy_steps = cfg.energy_steps;
    let report = verify::run_all(&names, &vcfg)?;
    write(out, "checks.csv", &checks_csv(&report))?;
    Ok((report.to_string(), report.passed()))
}

fn run_convergence(cfg: &RunConfig, out: &Path) -> anyhow::Result<(String, bool)> {
    let (time, space) = verify::manufactured_ladders(cfg.params, CgSettings::with_tol(cfg.cg.tol.min(1e-12)))?;
    write(out, "convergence_time.csv", &time.to_csv())?;
    write(out, "convergence_space.csv", &space.to_csv())?;
    let report = verify::convergence_checks(&time, &space);
    write(out, "checks.csv", &checks_csv(&report))?;
    Ok((report.to_string(), report.passed()))
}
