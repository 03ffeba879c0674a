use std::f64::consts::PI;

use costas_lab::lockin;
use costas_lab::loop_model::{self, LoopParams, PhaseState, PiFilter, SimOptions};
use costas_lab::pd_char::{self, PdKind};
use proptest::prelude::*;

fn params(pd: PdKind, offset: f64) -> LoopParams {
    LoopParams::with_offset(pd, 500.0, offset, PiFilter::new(0.05, 0.02).unwrap()).unwrap()
}

#[test]
fn lock_point_is_reached_for_each_circuit() {
    for v in PdKind::CIRCUITS {
        let p = params(v, 10.0);
        let tr = loop_model::integrate(&p, PhaseState::new(0.0, 0.0), 2e-5, 0.6).unwrap();
        assert!(tr.locked && !tr.slipped, "{v}");
        assert!((tr.final_state.theta_e - pd_char::find_stable_zero(v)).abs() < 1e-3);
        assert!((tr.final_state.x - 10.0 / 500.0).abs() < 1e-6);
    }
}

#[test]
fn transformed_model_tracks_original() {
    let p = params(PdKind::Folding, 30.0);
    let tr = loop_model::integrate(&p, PhaseState::new(0.1, 0.0), 1e-5, 0.2).unwrap();
    let start = loop_model::transform_coordinates(&PhaseState::new(0.1, 0.0), &p);
    let tt = loop_model::integrate_transformed(&p, start, 1e-5, 0.2).unwrap();
    let (_, th_t, x_t) = *tt.last().unwrap();
    assert!((th_t / 4.0 - tr.final_state.theta_e).abs() < 1e-9);
    assert!((x_t - tr.final_state.x).abs() < 1e-9);
}

#[test]
fn numeric_lockin_separates_hold_and_slip() {
    let p = lockin::params_for(PdKind::Classical, 500.0, 0.05, 0.02).unwrap();
    let wl = lockin::lockin_numeric(&p, 0.1).unwrap();
    let n = lockin::NumericLockin::default();
    assert!(n.reacquires(&p, 0.95 * wl).unwrap());
    assert!(!n.reacquires(&p, 1.05 * wl).unwrap());
}

#[test]
fn numeric_lockin_grows_with_gain() {
    let w = |k: f64| {
        let p = lockin::params_for(PdKind::Folding, k, 0.05, 0.02).unwrap();
        lockin::lockin_numeric(&p, 0.01 * lockin::natural_scale(&p)).unwrap()
    };
    assert!(w(200.0) < w(400.0));
}

#[test]
fn slip_counts_periods() {
    let p = params(PdKind::FourthPower, 300.0);
    let opts = SimOptions { record_every: 0, ..SimOptions::new(1e-5, 2.0) };
    let tr = loop_model::simulate(&p, PhaseState::new(0.0, 0.0), &opts).unwrap();
    assert!(tr.slipped);
    assert!(tr.periods_slipped > 0);
    assert!(tr.locked);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn equilibrium_is_fixed_point(offset in -50.0f64..50.0, k in 50.0f64..2000.0) {
        for v in PdKind::CIRCUITS {
            let p = LoopParams::with_offset(v, k, offset, PiFilter::new(0.05, 0.02).unwrap()).unwrap();
            let eq = p.equilibrium();
            let (a, b) = loop_model::phase_ode_rhs(&p, &eq);
            prop_assert!(a.abs() < 1e-9 * k.max(1.0) && b.abs() < 1e-9);
        }
    }

    #[test]
    fn small_offsets_never_slip(frac in 0.0f64..0.5) {
        let p0 = lockin::params_for(PdKind::Classical, 500.0, 0.05, 0.02).unwrap();
        // well inside the lock-in range (about 75 rad/s for this loop)
        let p = { let mut q = p0; q.set_offset(frac * 60.0); q };
        let tr = loop_model::integrate(&p, PhaseState::new(0.0, 0.0), 2e-5, 0.5).unwrap();
        prop_assert!(!tr.slipped);
    }

    #[test]
    fn folding_formula_is_positive(a2 in 0.1f64..(2.9 * PI)) {
        // choose K so that a² lands on the drawn value with τ1 = 1, τ2 = 0.5
        let k = a2 / (4.0 * pd_char::K_PD_FOLDING * 0.25);
        let (w, _) = lockin::lockin_folding(k, pd_char::K_PD_FOLDING, 1.0, 0.5).unwrap();
        prop_assert!(w > 0.0 && w.is_finite());
    }
}
