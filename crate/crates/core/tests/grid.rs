use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;
use vfpns::container::{read_field, read_sidecar, write_field, Field};
use vfpns::entropy::{maxwellian, MaxwellianParams};
use vfpns::grid::{bulk_velocity, integrate_phase, moment_density, moment_momentum, weight_l1_2};
use vfpns::spectral::Spectral;
use vfpns::{PhaseDensity, ScalarField, SpatialGrid, VectorField, VelocityGrid};

/// Neumaier compensated sum, used as an extended-precision oracle.
fn compensated(xs: impl IntoIterator<Item = f64>) -> f64 {
    let (mut s, mut c) = (0.0f64, 0.0f64);
    for x in xs {
        let t = s + x;
        c += if s.abs() >= x.abs() { (s - t) + x } else { (x - t) + s };
        s = t;
    }
    s + c
}

fn grids() -> (SpatialGrid, VelocityGrid) {
    (SpatialGrid::new(8, 2.0 * PI).unwrap(), VelocityGrid::new(32, 6.0).unwrap())
}

#[test]
fn grid_invariants_are_enforced() {
    assert!(SpatialGrid::new(4, 1.0).is_err());
    assert!(SpatialGrid::new(12, 1.0).is_err());
    assert!(SpatialGrid::new(8, 0.0).is_err());
    assert!(VelocityGrid::new(16, 4.0).is_err());
    assert!(VelocityGrid::new(4, 6.0).is_err());
    let s = SpatialGrid::new(16, 3.0).unwrap();
    assert_eq!(s.h(), 3.0 / 16.0);
    assert!((0..s.cells()).all(|i| s.point(i).iter().all(|&x| (0.0..3.0).contains(&x))));
    let v = VelocityGrid::new(16, 6.0).unwrap();
    assert_eq!(v.h(), 0.75);
}

#[test]
fn uniform_density_integrates_to_one() {
    let (s, v) = grids();
    let c = 1.0 / (s.side().powi(2) * (2.0 * v.v_max()).powi(2));
    let f = PhaseDensity::from_fn(s, v, |_, _| c);
    assert!((integrate_phase(&f, |_, _| 1.0) - 1.0).abs() < 1e-12);
}

#[test]
fn gaussian_second_moment_is_two() {
    let (s, v) = grids();
    let rho = ScalarField::constant(s, 1.0 / s.side().powi(2));
    let f = maxwellian(&MaxwellianParams { rho, u: VectorField::zeros(s) }, v).unwrap();
    let m2 = integrate_phase(&f, |_, xi| xi[0] * xi[0] + xi[1] * xi[1]);
    assert!((m2 - 2.0).abs() < 1e-6, "{m2}");
    let l12 = integrate_phase(&f, weight_l1_2);
    assert!((l12 - 3.0).abs() < 1e-6);
}

#[test]
fn quadrature_matches_compensated_sum() {
    let (s, v) = grids();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let f = PhaseDensity::from_vec(s, v, (0..s.cells() * v.cells()).map(|_| rng.gen::<f64>()).collect()).unwrap();
    let oracle = compensated(f.data().iter().copied()) * f.cell_volume();
    assert!((integrate_phase(&f, |_, _| 1.0) - oracle).abs() < 1e-12 * oracle);
}

#[test]
fn moments_of_standard_maxwellian() {
    let (s, v) = grids();
    let rho = ScalarField::from_fn(s, |x| 1.0 + 0.3 * x[0].sin());
    let f = maxwellian(&MaxwellianParams { rho: rho.clone(), u: VectorField::zeros(s) }, v).unwrap();
    assert!(moment_momentum(&f).max_abs() < 1e-10);
    let r = moment_density(&f);
    assert!(r.zip_map(&rho, |a, b| a - b).max_abs() < 1e-6);
}

#[test]
fn bulk_velocity_of_drifting_maxwellian() {
    // wide box so the shifted tails are negligible
    let s = SpatialGrid::new(8, 2.0 * PI).unwrap();
    let v = VelocityGrid::new(64, 10.0).unwrap();
    let f = maxwellian(&MaxwellianParams { rho: ScalarField::constant(s, 0.7), u: VectorField::constant(s, [1.5, -3.0]) }, v).unwrap();
    let b = bulk_velocity(&f, 1e-12).unwrap();
    assert!(b.vacuum.is_empty());
    for ix in 0..s.cells() {
        let u = b.u.at(ix);
        assert!((u[0] - 1.5).abs() < 1e-6 && (u[1] + 3.0).abs() < 1e-6, "{u:?}");
    }
    assert!(bulk_velocity(&f, 0.0).is_err());
}

#[test]
fn point_mass_velocity_is_its_node() {
    let (s, v) = grids();
    let mut f = PhaseDensity::zeros(s, v);
    let node = 5 * v.n() + 20;
    f.data_mut()[3 * v.cells() + node] = 2.5;
    let b = bulk_velocity(&f, 1e-12).unwrap();
    assert_eq!(b.u.at(3), v.point(node));
    assert_eq!(b.vacuum.len(), s.cells() - 1);
}

#[test]
fn single_mode_derivative_is_exact() {
    let s = SpatialGrid::new(32, 3.0).unwrap();
    let k = 2.0 * PI / 3.0;
    let g = ScalarField::from_fn(s, |x| (k * x[0]).sin());
    let d = Spectral::new(s).grad(&g);
    let expect = ScalarField::from_fn(s, |x| k * (k * x[0]).cos());
    assert!(d.component(0).zip_map(&expect, |a, b| a - b).max_abs() < 1e-12);
    assert!(d.component(1).max_abs() < 1e-12);
    let c = Spectral::new(s).grad(&ScalarField::constant(s, 4.0));
    assert!(c.max_abs() < 1e-12);
}

#[test]
fn laplacian_converges_to_finite_differences() {
    // Band-limited field; error of the second difference against the
    // spectral Laplacian should fall like h².
    let field = |s: SpatialGrid| ScalarField::from_fn(s, |x| (x[0]).sin() * (2.0 * x[1]).cos() + 0.5 * (x[0] + x[1]).cos());
    let err = |n: usize| {
        let s = SpatialGrid::new(n, 2.0 * PI).unwrap();
        let g = field(s);
        let lap = Spectral::new(s).lap(&g);
        let h = s.h();
        let d = g.data();
        let mut e: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let at = |a: usize, b: usize| d[(a % n) * n + (b % n)];
                let fd = (at(i + 1, j) + at(i + n - 1, j) + at(i, j + 1) + at(i, j + n - 1) - 4.0 * at(i, j)) / (h * h);
                e = e.max((fd - lap.data()[i * n + j]).abs());
            }
        }
        e
    };
    let (e1, e2) = (err(16), err(32));
    let order = (e1 / e2).log2();
    assert!(order >= 1.9, "order {order}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn div_of_grad_is_laplacian(seed in 0u64..1000) {
        let s = SpatialGrid::new(16, 2.0 * PI).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = ScalarField::from_vec(s, (0..s.cells()).map(|_| rng.gen::<f64>()).collect()).unwrap();
        let sp = Spectral::new(s);
        let a = sp.div(&sp.grad(&g));
        let b = sp.lap(&g);
        prop_assert!(a.zip_map(&b, |x, y| x - y).max_abs() < 1e-12 * (1.0 + b.max_abs()));
    }

    #[test]
    fn quadrature_is_linear(seed in 0u64..1000, al in -2.0f64..2.0, be in -2.0f64..2.0) {
        let (s, v) = grids();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = s.cells() * v.cells();
        let f = PhaseDensity::from_vec(s, v, (0..n).map(|_| rng.gen::<f64>()).collect()).unwrap();
        let g = PhaseDensity::from_vec(s, v, (0..n).map(|_| rng.gen::<f64>()).collect()).unwrap();
        let h = PhaseDensity::from_vec(s, v, f.data().iter().zip(g.data()).map(|(a, b)| al * a + be * b).collect()).unwrap();
        let w = |_: [f64; 2], xi: [f64; 2]| 1.0 + xi[0] * xi[0];
        let lhs = integrate_phase(&h, w);
        let rhs = al * integrate_phase(&f, w) + be * integrate_phase(&g, w);
        prop_assert!((lhs - rhs).abs() < 1e-12 * (1.0 + lhs.abs()) * 10.0);
        let mass = integrate_phase(&f, |_, _| 1.0);
        prop_assert!((mass - moment_density(&f).integral()).abs() < 1e-12 * mass);
    }
}

#[test]
fn container_round_trips_every_kind() {
    let (s, v) = grids();
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let phase = PhaseDensity::from_vec(s, v, (0..s.cells() * v.cells()).map(|_| rng.gen::<f64>()).collect()).unwrap();
    let fields = [
        Field::Scalar(ScalarField::from_fn(s, |x| x[0] - x[1])),
        Field::Vector(VectorField::from_fn(s, |x| [x[0], x[1].sin()])),
        Field::Phase(phase),
    ];
    for (k, field) in fields.iter().enumerate() {
        let p = dir.path().join(format!("f{k}.bin"));
        write_field(&p, "test", field, serde_json::json!({ "k": k })).unwrap();
        let (name, back) = read_field(&p).unwrap();
        assert_eq!(name, "test");
        assert_eq!(&back, field);
        assert_eq!(read_sidecar(&p).unwrap().meta["k"], k);
    }
    let bad = dir.path().join("bad.bin");
    std::fs::write(&bad, b"not a field").unwrap();
    assert!(read_field(&bad).is_err());
}
