use std::f64::consts::PI;
use vfpns::entropy::llogl_entropy;
use vfpns::fluid::leray_project;
use vfpns::limit::*;
use vfpns::spectral::Spectral;
use vfpns::{Error, ScalarField, SpatialGrid, VectorField};

const L: f64 = 2.0 * PI;

fn grid(n: usize) -> SpatialGrid {
    SpatialGrid::new(n, L).unwrap()
}

fn shear(s: SpatialGrid) -> VectorField {
    VectorField::from_fn(s, |x| [x[1].sin(), 0.5 * x[0].cos()])
}

fn swirl(s: SpatialGrid) -> VectorField {
    leray_project(&VectorField::from_fn(s, |x| [0.8 * x[1].sin() + 0.3 * (x[0] + x[1]).cos(), 0.6 * x[0].cos()]))
}

fn positive_rho(s: SpatialGrid) -> ScalarField {
    let r = ScalarField::from_fn(s, |x| (0.8 * x[0].cos() + 0.4 * (x[1] - x[0]).sin()).exp());
    r.scaled(1.0 / r.integral())
}

#[test]
fn heat_mode_decays_exactly() {
    let s = grid(16);
    let (mean, delta, k, t) = (1.0 / (L * L), 0.01, 2.0, 0.3);
    let mut rho = ScalarField::from_fn(s, |x| mean + delta * (k * x[0]).cos());
    let zero = VectorField::zeros(s);
    let mut ad = AdvDiff::new(Spectral::new(s));
    for _ in 0..30 {
        rho = ad.step(&rho, &zero, &zero, t / 30.0).unwrap();
    }
    let exact = ScalarField::from_fn(s, |x| mean + delta * (-k * k * t).exp() * (k * x[0]).cos());
    assert!(rho.zip_map(&exact, |a, b| a - b).max_abs() < 1e-10);
}

#[test]
fn constant_density_is_invariant() {
    let s = grid(16);
    let rho = ScalarField::constant(s, 0.3);
    let out = advdiff_step(&rho, &swirl(s), 0.05).unwrap();
    assert!(out.zip_map(&rho, |a, b| a - b).max_abs() < 1e-14);
}

fn advect(rho0: &ScalarField, v: &VectorField, t: f64, steps: usize) -> ScalarField {
    let mut ad = AdvDiff::new(Spectral::new(*rho0.grid()));
    let mut r = rho0.clone();
    for _ in 0..steps {
        let before = r.integral();
        r = ad.step(&r, v, v, t / steps as f64).unwrap();
        assert!((r.integral() - before).abs() < 1e-12);
    }
    r
}

#[test]
fn advection_diffusion_self_converges_at_second_order() {
    let s = grid(32);
    let rho0 = positive_rho(s);
    let v = VectorField::from_fn(s, |x| [2.0 * x[1].sin(), 0.0]);
    let t = 0.1;
    let reference = advect(&rho0, &v, t, 512);
    let errs: Vec<f64> = [16, 32, 64].iter().map(|&n| advect(&rho0, &v, t, n).zip_map(&reference, |a, b| a - b).l2_norm()).collect();
    assert!((errs[1] / errs[2]).log2() >= 1.9, "{errs:?}");
    assert!(advdiff_step(&rho0, &v.scaled(100.0), 0.1).is_err());
}

#[test]
fn effective_velocity_examples() {
    let s = grid(32);
    let eps = 0.3;
    let v = shear(s);
    let flat = effective_velocity(&ScalarField::constant(s, 2.0), &v, eps).unwrap();
    assert!(flat.sub(&v.scaled(eps)).max_abs() < 1e-14);

    let raw = ScalarField::from_fn(s, |x| (2.0 * PI * x[0] / L).cos().exp());
    let rho = raw.scaled(1.0 / raw.integral());
    let u = effective_velocity(&rho, &VectorField::zeros(s), eps).unwrap();
    let want = VectorField::from_fn(s, |x| [eps * (2.0 * PI / L) * (2.0 * PI * x[0] / L).sin(), 0.0]);
    assert!(u.sub(&want).max_abs() < 1e-8);

    let r = positive_rho(s);
    let a = effective_velocity(&r, &v, 2.0 * eps).unwrap();
    let b = effective_velocity(&r, &v, eps).unwrap();
    assert!(a.sub(&b.scaled(2.0)).max_abs() < 1e-12);
    let bound = eps * (v.max_abs() + grad_log(&r).unwrap().max_abs());
    assert!(b.max_abs() <= bound + 1e-12);

    let mut hole = r.clone();
    hole.data_mut()[7] = 0.0;
    assert!(matches!(effective_velocity(&hole, &v, eps), Err(Error::Vacuum(7))));
}

#[test]
fn residual_on_stationary_fields_is_convective() {
    let s = grid(32);
    let (rho, v) = (positive_rho(s), shear(s));
    let eps = 0.2;
    let rt = vec![rho.clone(); 3];
    let vt = vec![v.clone(); 3];
    let r = residual_e_eps(&rt, &vt, &[0.0, 0.1, 0.2], eps, 1).unwrap();
    assert!(!r.one_sided);
    let u = effective_velocity(&rho, &v, eps).unwrap();
    let g = Spectral::new(s).grad_tensor(&u);
    let want = VectorField::from_fn(s, |_| [0.0, 0.0]);
    let mut want = want;
    for ix in 0..s.cells() {
        let uu = u.at(ix);
        want.comp_mut(0)[ix] = (uu[0] * g[0].data()[ix] + uu[1] * g[1].data()[ix]) / eps;
        want.comp_mut(1)[ix] = (uu[0] * g[2].data()[ix] + uu[1] * g[3].data()[ix]) / eps;
    }
    assert!(r.e.sub(&want).max_abs() < 1e-12);
    assert!(residual_e_eps(&rt, &vt, &[0.0, 0.1, 0.2], eps, 0).unwrap().one_sided);
    assert!(residual_e_eps(&rt[..1], &vt[..1], &[0.0], eps, 0).is_err());
}

#[test]
fn residual_matches_the_instantaneous_form_and_scales_with_eps() {
    let s = grid(32);
    let traj = run_limit(&positive_rho(s), &swirl(s), 0.02, 40).unwrap();
    let (rt, vt): (Vec<_>, Vec<_>) = traj.states.iter().map(|st| (st.rho.clone(), st.fluid.v.clone())).unzip();
    let times = traj.times();
    let i = 20;
    let eps = 0.1;
    let fd = residual_e_eps(&rt, &vt, &times, eps, i).unwrap().e;
    let an = residual_e_eps_analytic(&rt[i], &vt[i], eps).unwrap();
    assert!(fd.sub(&an).max_abs() < 1e-3 * an.max_abs(), "{} vs {}", fd.sub(&an).max_abs(), an.max_abs());
    let half = residual_e_eps(&rt, &vt, &times, eps / 2.0, i).unwrap().e;
    let ratio = fd.max_abs() / half.max_abs();
    assert!((ratio - 2.0).abs() <= 0.2, "{ratio}");
}

#[test]
fn log_gradient_of_constant_density_stays_zero() {
    let s = grid(16);
    let v = vec![swirl(s); 11];
    let phi = loggrad_evolve(&VectorField::zeros(s), &v, 0.01).unwrap();
    assert!(phi.iter().all(|p| p.max_abs() < 1e-14));
}

#[test]
fn log_gradient_follows_the_heat_solution() {
    let s = grid(32);
    let (delta, t, steps) = (0.1, 0.1, 200);
    let heat = |t: f64| ScalarField::from_fn(s, move |x| 1.0 + delta * (-t).exp() * x[0].cos());
    let phi0 = grad_log(&heat(0.0)).unwrap();
    let v = vec![VectorField::zeros(s); steps + 1];
    let phi = loggrad_evolve(&phi0, &v, t / steps as f64).unwrap();
    let exact = grad_log(&heat(t)).unwrap();
    assert!(phi.last().unwrap().sub(&exact).max_abs() < 1e-6);
}

fn consistency_gap(n: usize, steps: usize) -> f64 {
    let s = grid(n);
    let t = 0.1;
    let traj = run_limit(&positive_rho(s), &swirl(s), t, steps).unwrap();
    let vs: Vec<VectorField> = traj.states.iter().map(|st| st.fluid.v.clone()).collect();
    let phi = loggrad_evolve(&grad_log(&traj.states[0].rho).unwrap(), &vs, t / steps as f64).unwrap();
    phi.iter()
        .zip(&traj.states)
        .map(|(p, st)| p.sub(&grad_log(&st.rho).unwrap()).l2_norm())
        .fold(0.0, f64::max)
}

#[test]
fn log_gradient_is_consistent_with_the_density_under_refinement() {
    let (a, b) = (consistency_gap(32, 20), consistency_gap(32, 40));
    assert!((a / b).log2() >= 1.5, "{a} -> {b}");
}

#[test]
fn constant_density_and_taylor_green_limit_run() {
    let s = grid(32);
    let c = 1.0 / (L * L);
    let tg = VectorField::from_fn(s, |x| [x[0].sin() * x[1].cos(), -x[0].cos() * x[1].sin()]);
    let traj = run_limit(&ScalarField::constant(s, c), &tg, 0.5, 500).unwrap();
    let last = traj.states.last().unwrap();
    assert!(last.rho.map(|r| r - c).max_abs() < 1e-12);
    assert!(last.fluid.v.sub(&tg.scaled((-1.0f64).exp())).l2_norm() < 1e-6);
}

#[test]
fn generic_limit_run_obeys_the_maximum_principle() {
    let s = grid(32);
    let rho0 = positive_rho(s);
    let (lo, hi) = (rho0.min(), rho0.max());
    let traj = run_limit(&rho0, &swirl(s), 1.0, 200).unwrap();
    let l0 = llogl_entropy(&rho0);
    for (st, r) in traj.states.iter().zip(&traj.records) {
        assert!(st.rho.min() >= lo - MAX_PRINCIPLE_TOL && st.rho.max() <= hi + MAX_PRINCIPLE_TOL);
        assert!((r.mass - 1.0).abs() < 1e-10);
        assert!(r.llogl.is_finite() && r.llogl <= l0 + 1.0);
    }
    for w in traj.records.windows(2) {
        assert!((w[1].mass - w[0].mass).abs() < 1e-10);
    }
    assert!(run_limit(&rho0, &swirl(s), 1.0, 0).is_err());
}
