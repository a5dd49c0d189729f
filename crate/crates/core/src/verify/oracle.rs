//! Dense-oracle equivalence and discrete stability ratios.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::discretization::{Discretization, GridSpec, PlateRole};
use crate::error::Result;
use crate::inertial::{build_dense_generator, solve_resolvent, InertialContext, InertialState};
use crate::model::{InitialData, PermeabilityModel, PhysicalParams};
use crate::operators::{build_dense_oracle, CgSettings, DenseOracle, OperatorContext};
use crate::quasistatic::{self, QSRun, SourcePath};
use crate::verify::data::SmoothData;

#[derive(Debug, Clone, PartialEq)]
pub struct OracleEntry {
    pub name: &'static str,
    pub value: f64,
    pub bound: f64,
}

impl OracleEntry {
    pub fn passed(&self) -> bool {
        self.value <= self.bound
    }
}

#[derive(Debug, Clone, Default)]
pub struct OracleReport {
    pub entries: Vec<OracleEntry>,
}

impl OracleReport {
    pub fn passed(&self) -> bool {
        self.entries.iter().all(OracleEntry::passed)
    }

    pub fn get(&self, name: &str) -> Option<&OracleEntry> {
        self.entries.iter().find(|e| e.name == name)
    }
}

/// Tolerance used for CG solves compared against dense LU.
pub const ORACLE_CG_TOL: f64 = 1e-13;

/// Dense vs matrix-free agreement at time `t` on a small problem: operator
/// applications, one quasi-static step and one inertial resolvent step.
/// The inertial comparison uses `rho_p = 1` when `params.rho_p == 0`.
pub fn oracle_equivalence(ctx: &OperatorContext, t: f64, tau: f64, seed: u64) -> Result<OracleReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let disc = &ctx.disc;
    let oracle = build_dense_oracle(ctx, t)?;
    let random = |rng: &mut ChaCha8Rng| {
        let mut p = disc.zero_pressure();
        p.values.iter_mut().for_each(|v| *v = rng.gen_range(-1.0..1.0));
        p
    };
    let rel = |a: &nalgebra::DVector<f64>, b: &nalgebra::DVector<f64>| (a - b).norm() / b.norm().max(f64::MIN_POSITIVE);

    let mut worst = [0.0f64; 3];
    for _ in 0..10 {
        let p = random(&mut rng);
        let v = oracle.encode(&p);
        let pairs = [
            (&oracle.a, ctx.apply_a(&p, t)?),
            (&oracle.b, ctx.apply_b(&p)),
            (&oracle.fluid_content, ctx.apply_fluid_content(&p)),
        ];
        for (i, (m, mf)) in pairs.into_iter().enumerate() {
            worst[i] = worst[i].max(rel(&oracle.encode(&mf), &(m * &v)));
        }
    }
    let mut entries = vec![
        OracleEntry { name: "apply_a", value: worst[0], bound: 1e-11 },
        OracleEntry { name: "apply_b", value: worst[1], bound: 1e-11 },
        OracleEntry { name: "apply_fluid_content", value: worst[2], bound: 1e-11 },
        OracleEntry { name: "b_symmetry", value: DenseOracle::symmetry_defect(&oracle.b), bound: 1e-13 },
    ];
    let kernel = disc.unknowns() - DenseOracle::rank(&oracle.a, 1e-12);
    entries.push(OracleEntry {
        name: "a_kernel_dimension_defect",
        value: (kernel as f64 - disc.modes() as f64).abs(),
        bound: 0.0,
    });

    // One quasi-static step from a random pressure; the oracle sees the
    // permeability at the new time level.
    let tight = ctx.clone().with_cg(CgSettings::with_tol(ORACLE_CG_TOL));
    let step_oracle = build_dense_oracle(ctx, t + tau)?;
    let p0 = random(&mut rng);
    let g = random(&mut rng);
    let zero_f = disc.zero_plate(PlateRole::Load);
    let s0 = quasistatic::state_from_pressure(&tight, t, p0.clone(), &zero_f)?;
    let s1 = quasistatic::step(&tight, &s0, tau, &g, &zero_f)?;
    let dense_p = step_oracle.quasistatic_step(&p0, &g, tau)?;
    entries.push(OracleEntry {
        name: "quasistatic_step",
        value: rel(&step_oracle.encode(&s1.p), &step_oracle.encode(&dense_p)),
        bound: 1e-11,
    });

    let mut iparams = ctx.params;
    if iparams.rho_p <= 0.0 {
        iparams.rho_p = 1.0;
    }
    let mut ictx = InertialContext::new(iparams, disc.clone(), ctx.permeability.clone())?;
    ictx.scaled.cg = CgSettings::with_tol(ORACLE_CG_TOL);
    let mut r = InertialState::zeros(disc, t);
    r.w.coeffs.iter_mut().for_each(|v| *v = rng.gen_range(-1.0..1.0));
    r.v.coeffs.iter_mut().for_each(|v| *v = rng.gen_range(-1.0..1.0));
    r.p = random(&mut rng);
    let (y, _) = solve_resolvent(&ictx, &r, tau, t)?;
    let gen = build_dense_generator(&ictx, t)?;
    let dense_y = gen.resolvent(&r, tau, disc)?;
    entries.push(OracleEntry {
        name: "inertial_resolvent_step",
        value: rel(&gen.encode(&y, disc), &gen.encode(&dense_y, disc)),
        bound: 1e-11,
    });
    Ok(OracleReport { entries })
}

/// Discrete analogue of the stability estimate for one run.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StabilityReport {
    /// `sum tau (||p_n||_V^2 + ||w_n||_W^2)`.
    pub lhs: f64,
    /// `||f||^2_{H1(W')} + ||g||^2_{l2(V')} + ||d0||^2`.
    pub rhs: f64,
    /// `lhs / rhs`, or 0 for zero data.
    pub ratio: f64,
}

pub fn stability_report(ctx: &OperatorContext, run: &QSRun) -> StabilityReport {
    let lhs = run.pressure_l2v_sq(ctx) + run.plate_l2w_sq(ctx);
    let rhs = run.data_norms.total();
    StabilityReport {
        lhs,
        rhs,
        ratio: if rhs == 0.0 { 0.0 } else { lhs / rhs },
    }
}

#[derive(Debug, Clone)]
pub struct StabilityLadder {
    /// `(tau, N3, report)` per rung.
    pub rungs: Vec<(f64, usize, StabilityReport)>,
}

impl StabilityLadder {
    /// `max ratio / min ratio` over the ladder.
    pub fn band(&self) -> f64 {
        let ratios: Vec<f64> = self.rungs.iter().map(|r| r.2.ratio).collect();
        let max = ratios.iter().cloned().fold(f64::MIN, f64::max);
        let min = ratios.iter().cloned().fold(f64::MAX, f64::min);
        if min <= 0.0 {
            if max <= 0.0 {
                1.0
            } else {
                f64::INFINITY
            }
        } else {
            max / min
        }
    }

    pub fn sup(&self) -> f64 {
        self.rungs.iter().map(|r| r.2.ratio).fold(0.0, f64::max)
    }
}

/// Runs fixed smooth data over a refinement ladder of `(tau, N3)`.
pub fn stability_ladder(
    params: PhysicalParams,
    permeability: &PermeabilityModel,
    in_plane: GridSpec,
    ladder: &[(f64, usize)],
    t_final: f64,
    data: &SmoothData,
    cg: CgSettings,
) -> Result<StabilityLadder> {
    let mut rungs = Vec::with_capacity(ladder.len());
    for &(tau, n3) in ladder {
        let disc = Discretization::new(in_plane.m, in_plane.n, n3, params.h)?;
        let ctx = OperatorContext::new(params, disc, permeability.clone())?.with_cg(cg);
        let init = InitialData::FluidContent(data.initial_fluid_content(&ctx.disc));
        let run = quasistatic::run(&ctx, &init, &data.sources(&ctx.disc), t_final, tau, SourcePath::Direct)?;
        rungs.push((tau, n3, stability_report(&ctx, &run)));
    }
    Ok(StabilityLadder { rungs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::SourceTerms;

    fn small_ctx() -> OperatorContext {
        let params = PhysicalParams::new(1.0, 0.8, 0.7, 0.0, 0.5);
        OperatorContext::new(params, Discretization::new(2, 2, 9, 0.5).unwrap(), PermeabilityModel::sin_in_time(1.0, 0.4, 2.0)).unwrap()
    }

    #[test]
    fn small_problem_passes_oracle() {
        let report = oracle_equivalence(&small_ctx(), 0.3, 0.05, 1).unwrap();
        for e in &report.entries {
            assert!(e.passed(), "{e:?}");
        }
    }

    #[test]
    fn zero_data_ratio_is_zero() {
        let ctx = small_ctx();
        let run = quasistatic::run(&ctx, &InitialData::FluidContent(ctx.disc.zero_pressure()), &SourceTerms::zero(), 0.2, 0.1, SourcePath::Direct).unwrap();
        assert_eq!(stability_report(&ctx, &run).ratio, 0.0);
    }

    #[test]
    fn scaling_data_keeps_ratio() {
        let ctx = small_ctx();
        let base = SmoothData::random(4);
        let ratio = |data: &SmoothData| {
            let init = InitialData::FluidContent(data.initial_fluid_content(&ctx.disc));
            let run = quasistatic::run(&ctx, &init, &data.sources(&ctx.disc), 0.5, 0.05, SourcePath::Direct).unwrap();
            stability_report(&ctx, &run).ratio
        };
        let r1 = ratio(&base);
        let r2 = ratio(&base.clone().with_scale(2.0, 2.0, 2.0));
        assert!((r1 - r2).abs() < 1e-8 * r1);
    }
}
