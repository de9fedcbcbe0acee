use std::f64::consts::PI;
use vfpns::coupled::*;
use vfpns::entropy::{maxwellian, MaxwellianParams};
use vfpns::fluid::FluidState;
use vfpns::limit::LimitState;
use vfpns::{PhaseDensity, ScalarField, SpatialGrid, VectorField, VelocityGrid};

fn grids() -> (SpatialGrid, VelocityGrid) {
    (SpatialGrid::new(8, 2.0 * PI).unwrap(), VelocityGrid::new(24, 6.0).unwrap())
}

fn taylor_green(s: SpatialGrid, amp: f64) -> VectorField {
    VectorField::from_fn(s, |x| [amp * x[0].sin() * x[1].cos(), -amp * x[0].cos() * x[1].sin()])
}

fn setup(v: VectorField, eps: f64) -> (PhaseDensity, FluidState, LimitState) {
    let (s, vel) = grids();
    let rho = ScalarField::constant(s, 1.0 / (4.0 * PI * PI));
    let f = maxwellian(&MaxwellianParams { rho: rho.clone(), u: v.scaled(eps) }, vel).unwrap();
    (f, FluidState::new(v.clone()), LimitState::new(rho, v))
}

#[test]
fn global_equilibrium_is_a_fixed_point() {
    let (s, vel) = grids();
    let (f, fl, lim) = setup(VectorField::zeros(s), 0.4);
    let cfg = CoupledConfig::new(&s, &vel, 0.4, 0.05, 2);
    let traj = run_coupled(f.clone(), fl, lim, cfg).unwrap();
    let end = &traj.final_state;
    let drift = end.kin.f.l1_distance(&f);
    assert!(drift < 1e-8, "{drift}");
    assert!(end.fluid.v.max_abs() < 1e-12);
    for r in &traj.records {
        assert!(r.energy.excess.abs() < 1e-10);
        assert!(r.audit.holds(1e-10));
    }
}

#[test]
fn taylor_green_is_tracked_to_order_eps() {
    let (s, vel) = grids();
    let mut gaps = Vec::new();
    for eps in [0.4, 0.2] {
        let (f, fl, lim) = setup(taylor_green(s, 0.5), eps);
        let cfg = CoupledConfig::new(&s, &vel, eps, 0.1, 4);
        let traj = run_coupled(f, fl, lim, cfg).unwrap();
        for r in &traj.records {
            assert!(r.energy.excess <= ENERGY_TOL, "{:?}", r.energy);
            assert!(r.audit.holds(1e-4), "{:?}", r.audit);
        }
        assert!(traj.sups.v_l2 < eps, "{}", traj.sups.v_l2);
        gaps.push(traj.sups.e0);
    }
    assert!(gaps[1] < gaps[0], "{gaps:?}");
}

#[test]
fn checkpoint_resume_matches_an_uninterrupted_run() {
    let (s, vel) = grids();
    let eps = 0.4;
    let (f, fl, lim) = setup(taylor_green(s, 0.5), eps);
    let cfg = CoupledConfig::new(&s, &vel, eps, 0.06, 3);
    let mut whole = CoupledRun::new(f.clone(), fl.clone(), lim.clone(), cfg.clone()).unwrap();
    while !whole.done() {
        whole.step().unwrap();
    }
    let mut first = CoupledRun::new(f, fl, lim, cfg).unwrap();
    for _ in 0..first.cfg.steps / 2 {
        first.step().unwrap();
    }
    let dir = tempfile::tempdir().unwrap();
    first.save_checkpoint(dir.path()).unwrap();
    let mut resumed = CoupledRun::load_checkpoint(dir.path()).unwrap();
    assert_eq!(resumed.state.step, first.state.step);
    while !resumed.done() {
        resumed.step().unwrap();
    }
    assert!(resumed.state.kin.f.l1_distance(&whole.state.kin.f) < 1e-10);
    assert!(resumed.state.fluid.v.sub(&whole.state.fluid.v).max_abs() < 1e-10);
    assert!(resumed.state.limit.rho.zip_map(&whole.state.limit.rho, |a, b| a - b).max_abs() < 1e-10);
    assert!((resumed.t() - whole.t()).abs() < 1e-12);
    assert!(CoupledRun::load_checkpoint(dir.path().join("missing")).is_err());
}

#[test]
fn bad_configs_are_rejected() {
    let (s, vel) = grids();
    let (f, fl, lim) = setup(VectorField::zeros(s), 0.4);
    let mut cfg = CoupledConfig::new(&s, &vel, 0.4, 0.05, 2);
    cfg.eps = 1.5;
    assert!(CoupledRun::new(f.clone(), fl.clone(), lim.clone(), cfg).is_err());
    let mut cfg = CoupledConfig::new(&s, &vel, 0.4, 0.05, 2);
    cfg.steps = 0;
    assert!(CoupledRun::new(f, fl, lim, cfg).is_err());
}

#[test]
fn policy_respects_every_cap() {
    let (s, vel) = grids();
    for eps in [0.05, 0.1, 0.4, 1.0] {
        let n = CoupledConfig::policy_steps(&s, &vel, eps, 1.0);
        let tau = 1.0 / (2.0 * n as f64);
        assert!(tau <= 2.0 * eps.powi(3) + 1e-15 && tau <= TAU_PER_EPS * eps + 1e-15 && tau <= TAU_MAX + 1e-15);
    }
}
