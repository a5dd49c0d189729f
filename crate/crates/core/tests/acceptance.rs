//! Acceptance criteria 1-10. Each criterion prints one line
//! `ACCEPTANCE <n> PASS|FAIL <description>` followed by its CHECK lines;
//! the test fails if any criterion fails.

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use poroplate::discretization::GridSpec;
use poroplate::model::{PermeabilityModel, PermeabilityStructure, PhysicalParams};
use poroplate::operators::CgSettings;
use poroplate::verify::{self, SuiteReport, VerifyConfig};

struct Criterion {
    number: usize,
    title: &'static str,
    report: SuiteReport,
    elapsed: Duration,
    time_limit: Option<Duration>,
}

impl Criterion {
    fn passed(&self) -> bool {
        self.report.passed() && !self.report.checks.is_empty() && self.time_limit.is_none_or(|l| self.elapsed <= l)
    }

    fn print(&self) {
        let limit = self.time_limit.map_or(String::new(), |l| format!(" (limit {:.0?})", l));
        println!(
            "ACCEPTANCE {} {} {} [{} checks, {:.2?}{limit}]",
            self.number,
            if self.passed() { "PASS" } else { "FAIL" },
            self.title,
            self.report.checks.len(),
            self.elapsed
        );
        for line in self.report.to_string().lines() {
            println!("    {line}");
        }
    }
}

fn run(number: usize, title: &'static str, time_limit: Option<Duration>, f: impl FnOnce() -> SuiteReport) -> Criterion {
    let start = Instant::now();
    let report = f();
    Criterion {
        number,
        title,
        report,
        elapsed: start.elapsed(),
        time_limit,
    }
}

fn unit_params() -> PhysicalParams {
    PhysicalParams::new(1.0, 1.0, 1.0, 0.0, 0.5)
}

fn sin_in_time() -> PermeabilityModel {
    PermeabilityModel::sin_in_time(1.0, 0.5, 2.0)
}

/// Time-dependent permeability varying in all coordinates; bounds `[0.5, 1.5]`.
fn general_k() -> PermeabilityModel {
    PermeabilityModel::new("general", PermeabilityStructure::General, 0.5, 1.5, |x1, x2, x3, t| {
        1.0 + 0.25 * (PI * x1).cos() * (2.0 * PI * x2).sin() + 0.2 * (3.0 * t).sin() * (1.0 + x3)
    })
    .with_envelope(|_| 0.6 * 1.5, None)
}

fn suite(name: &str, cfg: &VerifyConfig) -> SuiteReport {
    verify::run_suite(name, cfg).unwrap_or_else(|e| panic!("suite {name} failed to run: {e}"))
}

fn prefixed(mut report: SuiteReport, label: &str) -> SuiteReport {
    for c in &mut report.checks {
        c.name = format!("{label}.{}", c.name);
    }
    report
}

#[test]
fn acceptance_criteria() {
    let mut criteria = Vec::new();

    criteria.push(run(1, "operator identities (M=N=4, N3=33)", Some(Duration::from_secs(1)), || {
        let cfg = VerifyConfig::new(unit_params(), GridSpec::new(4, 4, 33), sin_in_time());
        suite("operators", &cfg)
    }));

    criteria.push(run(2, "coercivity on 100 fields x 8 times, sin-in-time", None, || {
        let cfg = VerifyConfig::new(unit_params(), GridSpec::new(4, 4, 17), sin_in_time());
        suite("coercivity", &cfg)
    }));

    criteria.push(run(3, "dense-oracle equivalence (M=N=2, N3=9)", Some(Duration::from_secs(5)), || {
        let mut cfg = VerifyConfig::new(unit_params(), GridSpec::new(2, 2, 9), sin_in_time());
        cfg.cg = CgSettings::with_tol(1e-13);
        suite("oracle", &cfg)
    }));

    criteria.push(run(4, "manufactured convergence ladders", Some(Duration::from_secs(60)), || {
        let cfg = VerifyConfig::new(unit_params(), GridSpec::new(1, 1, 129), PermeabilityModel::constant(1.0));
        suite("convergence", &cfg)
    }));

    criteria.push(run(5, "energy monotonicity over 500 steps, test matrix", None, || {
        let matrix: Vec<(&str, PhysicalParams, GridSpec, PermeabilityModel, f64)> = vec![
            ("unit_constant", unit_params(), GridSpec::new(2, 2, 9), PermeabilityModel::constant(1.0), 0.01),
            ("unit_sin", unit_params(), GridSpec::new(4, 4, 17), sin_in_time(), 0.01),
            ("stiff_layered", PhysicalParams::new(10.0, 2.0, 0.1, 0.0, 0.25), GridSpec::new(3, 2, 17), PermeabilityModel::layered_x3(1.0, 0.8, 0.25, 0.2), 0.05),
            ("soft_sin", PhysicalParams::new(0.1, 0.5, 5.0, 0.0, 1.0), GridSpec::new(2, 3, 9), PermeabilityModel::sin_in_time(0.5, 0.4, 5.0), 0.002),
            ("general", unit_params(), GridSpec::new(3, 3, 9), general_k(), 0.01),
            ("inertia_heavy", PhysicalParams::new(1.0, 1.0, 1.0, 10.0, 0.5), GridSpec::new(2, 2, 9), sin_in_time(), 0.02),
        ];
        let mut total = SuiteReport::default();
        for (label, params, grid, k, tau) in matrix {
            let mut cfg = VerifyConfig::new(params, grid, k);
            cfg.tau = tau;
            cfg.energy_steps = 500;
            total.extend(prefixed(suite("energy", &cfg), label));
        }
        total
    }));

    criteria.push(run(6, "dissipativity identity on 100 states", None, || {
        let mut total = SuiteReport::default();
        for (label, k) in [("sin", sin_in_time()), ("general", general_k())] {
            let cfg = VerifyConfig::new(PhysicalParams::new(1.0, 1.0, 1.0, 1.0, 0.5), GridSpec::new(3, 3, 17), k);
            total.extend(prefixed(suite("dissipativity", &cfg), label));
        }
        total
    }));

    criteria.push(run(7, "weak-form residuals on smooth random data", None, || {
        let cfg = VerifyConfig::new(unit_params(), GridSpec::new(2, 2, 9), sin_in_time());
        suite("weakform", &cfg)
    }));

    criteria.push(run(8, "stability ratio band over a 4-rung ladder", None, || {
        let cfg = VerifyConfig::new(unit_params(), GridSpec::new(2, 2, 9), sin_in_time());
        suite("stability", &cfg)
    }));

    criteria.push(run(9, "d0 <-> p(0) equivalence and norm sandwich", None, || {
        let cfg = VerifyConfig::new(unit_params(), GridSpec::new(4, 4, 17), sin_in_time());
        suite("initial", &cfg)
    }));

    criteria.push(run(10, "direct vs translated plate load", None, || {
        let cfg = VerifyConfig::new(unit_params(), GridSpec::new(4, 4, 17), sin_in_time());
        suite("translation", &cfg)
    }));

    for c in &criteria {
        c.print();
    }
    let failed: Vec<usize> = criteria.iter().filter(|c| !c.passed()).map(|c| c.number).collect();
    assert!(failed.is_empty(), "acceptance criteria failed: {failed:?}");
}
