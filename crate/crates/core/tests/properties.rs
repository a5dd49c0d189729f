use proptest::prelude::*;

use poroplate::cli::output::{decode_snapshot, encode_snapshot, SnapshotKind};
use poroplate::cli::parse_config;
use poroplate::discretization::{Discretization, GridSpec};
use poroplate::inertial::{solve_resolvent, InertialContext, InertialState};
use poroplate::model::{InitialData, PermeabilityModel, PhysicalParams, SourceTerms};
use poroplate::operators::OperatorContext;
use poroplate::quasistatic::{self, SourcePath};
use poroplate::verify::{stability_ladder, SmoothData, STABILITY_LADDER};

fn field(disc: &Discretization, values: &[f64]) -> poroplate::discretization::PressureField {
    let mut p = disc.zero_pressure();
    for (v, x) in p.values.iter_mut().zip(values.iter().cycle()) {
        *v = *x;
    }
    p
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn quasistatic_energy_never_increases(
        d in 0.1f64..10.0,
        alpha in 0.1f64..3.0,
        c_p in 0.05f64..5.0,
        m in 1usize..4,
        n3 in 3usize..12,
        amplitude in 0.0f64..0.9,
        values in prop::collection::vec(-1.0f64..1.0, 8),
    ) {
        let params = PhysicalParams::new(d, alpha, c_p, 0.0, 0.5);
        let disc = Discretization::new(m, 2, n3, 0.5).unwrap();
        let ctx = OperatorContext::new(params, disc, PermeabilityModel::sin_in_time(1.0, amplitude, 3.0)).unwrap();
        let p0 = field(&ctx.disc, &values);
        let run = quasistatic::run(&ctx, &InitialData::Pressure(p0), &SourceTerms::zero(), 1.0, 0.05, SourcePath::Direct).unwrap();
        for w in run.states.windows(2) {
            let (e0, e1) = (w[0].diagnostics.energy, w[1].diagnostics.energy);
            prop_assert!(e1 <= e0 * (1.0 + 1e-12), "energy grew from {e0} to {e1}");
        }
    }

    #[test]
    fn inertial_resolvent_contracts(
        rho in 0.01f64..10.0,
        c_p in 0.1f64..5.0,
        sigma in 1e-3f64..1.0,
        values in prop::collection::vec(-1.0f64..1.0, 12),
    ) {
        let params = PhysicalParams::new(1.0, 1.0, c_p, rho, 0.5);
        let disc = Discretization::new(2, 2, 7, 0.5).unwrap();
        let ictx = InertialContext::new(params, disc, PermeabilityModel::layered_x3(1.0, 0.5, 0.5, 0.25)).unwrap();
        let disc = ictx.disc();
        let mut r = InertialState::zeros(disc, 0.0);
        r.w.coeffs.iter_mut().zip(&values).for_each(|(w, v)| *w = *v);
        r.v.coeffs.iter_mut().zip(values.iter().rev()).for_each(|(w, v)| *w = *v);
        r.p = field(disc, &values);
        let (y, _) = solve_resolvent(&ictx, &r, sigma, sigma).unwrap();
        prop_assert!(y.x_norm(disc) <= r.x_norm(disc) * (1.0 + 1e-12));
    }

    #[test]
    fn snapshot_encoding_round_trips(values in prop::collection::vec(any::<f64>().prop_filter("finite", |v| v.is_finite()), 0..64)) {
        let bytes = encode_snapshot(SnapshotKind::PlateVelocity, &values);
        prop_assert_eq!(decode_snapshot(&bytes), Some((SnapshotKind::PlateVelocity, values)));
    }

    #[test]
    fn config_echo_round_trips(d in 1e-3f64..1e3, alpha in 1e-3f64..10.0, tau_steps in 1usize..200, seed in any::<u64>()) {
        let text = format!(
            "mode = quasistatic\nseed = {seed}\n[params]\nD = {d}\nalpha = {alpha}\nc_p = 0.5\nh = 0.25\n[grid]\nM = 2\nN = 3\nN3 = 5\n[time]\nT = 2.0\ntau = {}\n",
            2.0 / tau_steps as f64
        );
        let cfg = parse_config(&text).unwrap();
        prop_assert_eq!(parse_config(&cfg.to_string()).unwrap(), cfg);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn stability_ratio_band_stays_below_two(seed in any::<u64>()) {
        let params = PhysicalParams::new(1.0, 1.0, 1.0, 0.0, 0.5);
        let data = SmoothData::random(seed);
        let ladder = stability_ladder(
            params,
            &PermeabilityModel::sin_in_time(1.0, 0.5, 2.0),
            GridSpec::new(2, 2, 0),
            &STABILITY_LADDER,
            1.0,
            &data,
            Default::default(),
        )
        .unwrap();
        prop_assert!(ladder.band() <= 2.0, "band {}", ladder.band());
    }
}
