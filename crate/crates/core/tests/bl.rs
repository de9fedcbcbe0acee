use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;
use vfpns::bl::stability::bl_stability_experiment;
use vfpns::bl::*;
use vfpns::entropy::{maxwellian, MaxwellianParams};
use vfpns::{Error, ScalarField, SpatialGrid, VectorField, VelocityGrid};

fn prob(rng: &mut ChaCha8Rng, n: usize) -> DiscreteMeasure {
    let w: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
    let s: f64 = w.iter().sum();
    DiscreteMeasure::new(w.into_iter().map(|x| x / s).collect()).unwrap()
}

fn points(rng: &mut ChaCha8Rng, n: usize) -> Metric {
    Metric::from_points(&(0..n).map(|_| [rng.gen_range(0.0..3.0), rng.gen_range(0.0..3.0)]).collect::<Vec<_>>())
}

fn dist(mu: &DiscreteMeasure, nu: &DiscreteMeasure, m: &Metric) -> f64 {
    bl_distance(mu, nu, m).unwrap().0
}

/// Vertex enumeration of `max min(2c, ℓd)` over `c, ℓ ≥ 0, c + ℓ ≤ 1`:
/// the optimum sits on `c + ℓ = 1` at an end or where the pieces cross.
fn two_point_enumeration(d: f64) -> f64 {
    let val = |c: f64| (2.0 * c).min((1.0 - c) * d);
    [0.0, 1.0, d / (2.0 + d)].into_iter().map(val).fold(f64::NEG_INFINITY, f64::max)
}

#[test]
fn identical_measures_are_at_distance_zero() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let m = Metric::torus(4, 1.0);
    let mu = prob(&mut rng, 16);
    assert!(dist(&mu, &mu, &m).abs() < 1e-8);
    assert!(bl_oracle(&mu, &mu, &m).unwrap().abs() < 1e-8);
}

#[test]
fn point_masses_match_closed_form() {
    for d in [0.25, 1.0, 2.0, 3.5] {
        let m = Metric::from_points(&[[0.0, 0.0], [d, 0.0]]);
        let (a, b) = (DiscreteMeasure::dirac(2, 0), DiscreteMeasure::dirac(2, 1));
        let want = 2.0 * d / (2.0 + d);
        assert!((dist(&a, &b, &m) - want).abs() < 1e-6, "d = {d}");
        assert!((bl_oracle(&a, &b, &m).unwrap() - want).abs() < 1e-9);
    }
    let m = Metric::from_points(&[[0.0, 0.0], [2.0, 0.0]]);
    assert!((bl_oracle(&DiscreteMeasure::dirac(2, 0), &DiscreteMeasure::dirac(2, 1), &m).unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn two_node_instance_is_four_fifteenths() {
    let m = Metric::from_points(&[[0.0, 0.0], [1.0, 0.0]]);
    let mu = DiscreteMeasure::new(vec![0.7, 0.3]).unwrap();
    let nu = DiscreteMeasure::new(vec![0.3, 0.7]).unwrap();
    let enumerated = 0.4 * two_point_enumeration(1.0);
    assert!((enumerated - 4.0 / 15.0).abs() < 1e-9);
    assert!((bl_oracle(&mu, &nu, &m).unwrap() - enumerated).abs() < 1e-9);
    assert!((dist(&mu, &nu, &m) - enumerated).abs() < 1e-6);
}

#[test]
fn torus_points_use_the_wrapped_distance() {
    // nodes 0 and 3 on a 4-cell axis are neighbours through the wrap
    let m = Metric::torus(4, 4.0);
    assert_eq!(m.distance(0, 3), 1.0);
    assert_eq!(m.distance(0, 10), 4.0);
    let want = 2.0 / 3.0;
    assert!((dist(&DiscreteMeasure::dirac(16, 0), &DiscreteMeasure::dirac(16, 3), &m) - want).abs() < 1e-6);
}

#[test]
fn dual_certificate_is_feasible() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for m in [Metric::torus(6, 2.0), points(&mut rng, 12), Metric::phase(2, 2.0, 2, 6.0)] {
        let n = m.nodes();
        let (mu, nu) = (prob(&mut rng, n), prob(&mut rng, n));
        let (v, dual) = bl_distance(&mu, &nu, &m).unwrap();
        assert!(dual.sup_norm_used + dual.lip_const_used <= 1.0 + 1e-8);
        assert!(dual.phi.iter().all(|p| p.abs() <= dual.sup_norm_used + 1e-8));
        for (i, j, _) in m.edges() {
            assert!((dual.phi[i] - dual.phi[j]).abs() <= dual.lip_const_used * m.distance(i, j) + 1e-8);
        }
        let obj: f64 = dual.phi.iter().zip(mu.weights.iter().zip(&nu.weights)).map(|(p, (a, b))| p * (a - b)).sum();
        assert!((obj - dual.objective).abs() < 1e-10);
        assert!((v - dual.objective).abs() < 1e-8);
    }
}

#[test]
fn malformed_inputs_are_rejected() {
    let m = Metric::torus(4, 1.0);
    assert!(DiscreteMeasure::new(vec![]).is_err());
    assert!(DiscreteMeasure::new(vec![1.0, f64::NAN]).is_err());
    let empty = DiscreteMeasure { weights: vec![] };
    let mu = DiscreteMeasure::dirac(16, 0);
    assert!(matches!(bl_distance(&empty, &mu, &m), Err(Error::Measure(_))));
    let bad = DiscreteMeasure { weights: vec![f64::INFINITY; 16] };
    assert!(bl_distance(&bad, &mu, &m).is_err());
    assert!(bl_distance(&DiscreteMeasure::dirac(9, 0), &mu, &m).is_err());
    let big = Metric::torus(17, 1.0);
    assert!(bl_oracle(&DiscreteMeasure::dirac(289, 0), &DiscreteMeasure::dirac(289, 1), &big).is_err());
}

#[test]
fn instances_round_trip_through_json() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let inst = BlInstance { metric: points(&mut rng, 5), mu: prob(&mut rng, 5), nu: prob(&mut rng, 5) };
    let back: BlInstance = serde_json::from_str(&serde_json::to_string(&inst).unwrap()).unwrap();
    assert_eq!(back, inst);
    let (_, dual) = bl_distance(&inst.mu, &inst.nu, &inst.metric).unwrap();
    let again: LipschitzDualSolution = serde_json::from_str(&serde_json::to_string(&dual).unwrap()).unwrap();
    assert_eq!(again, dual);
}

#[test]
fn density_and_phase_wrappers() {
    let s = SpatialGrid::new(8, 2.0 * PI).unwrap();
    let v = VelocityGrid::new(16, 6.0).unwrap();
    let a = ScalarField::from_fn(s, |x| (1.0 + 0.5 * x[0].sin()) / (4.0 * PI * PI));
    let b = ScalarField::from_fn(s, |x| (1.0 + 0.5 * x[0].cos()) / (4.0 * PI * PI));
    assert!(bl_density(&a, &a).unwrap().abs() < 1e-8);
    let d = bl_density(&a, &b).unwrap();
    assert!(d > 0.0 && d <= a.zip_map(&b, |p, q| (p - q).abs()).integral() + 1e-8);

    let f = maxwellian(&MaxwellianParams { rho: a.clone(), u: VectorField::zeros(s) }, v).unwrap();
    let g = maxwellian(&MaxwellianParams { rho: b, u: VectorField::zeros(s) }, v).unwrap();
    assert!(bl_phase(&f, &f, 4, 8).unwrap().abs() < 1e-8);
    assert!(bl_phase(&f, &g, 4, 8).unwrap() > 0.0);
    assert!(bl_phase(&f, &g, 3, 8).is_err());
}

fn blob(s: SpatialGrid, c: [f64; 2]) -> ScalarField {
    let r = ScalarField::from_fn(s, |x| {
        let d = [x[0] - c[0], x[1] - c[1]];
        (1.0 + 0.8 * d[0].cos() * d[1].cos()).max(0.0)
    });
    r.scaled(1.0 / r.integral())
}

#[test]
fn identical_dynamics_keep_densities_together() {
    let s = SpatialGrid::new(16, 2.0 * PI).unwrap();
    let rho = blob(s, [1.0, 2.0]);
    let u = move |_t: f64| VectorField::from_fn(s, |x| [x[1].sin(), x[0].cos()]);
    let rep = bl_stability_experiment(&rho, &rho, &u, &u, 0.5, 50, 10).unwrap();
    assert!(rep.lhs_max() < 1e-12, "{}", rep.lhs_max());
    assert!(rep.ratio_min.is_none());
}

#[test]
fn constant_drift_gap_has_a_bounded_stable_constant() {
    let s = SpatialGrid::new(16, 2.0 * PI).unwrap();
    let rho = blob(s, [3.0, 3.0]);
    let ua = move |_t: f64| VectorField::constant(s, [0.3, 0.0]);
    let ub = move |_t: f64| VectorField::constant(s, [0.0, 0.0]);
    let run = |steps| bl_stability_experiment(&rho, &rho, &ua, &ub, 1.0, steps, steps / 10).unwrap();
    let (a, b) = (run(100), run(200));
    // budget grows like δ² t for unit mass
    assert!((a.rhs.last().unwrap() - 0.09).abs() < 1e-10);
    let (ca, cb) = (a.constant().unwrap(), b.constant().unwrap());
    assert!(ca.is_finite() && ca > 0.0);
    assert!((ca - cb).abs() <= 0.1 * cb, "{ca} vs {cb}");
    let bad = bl_stability_experiment(&rho, &rho, &ua, &ub, 1.0, 0, 1);
    assert!(bad.is_err());
}

#[test]
fn translated_data_grow_at_most_exponentially() {
    let s = SpatialGrid::new(16, 2.0 * PI).unwrap();
    let (ra, rb) = (blob(s, [3.0, 3.0]), blob(s, [3.4, 3.0]));
    let u = move |_t: f64| VectorField::from_fn(s, |x| [0.5 * x[1].sin(), 0.0]);
    let rep = bl_stability_experiment(&ra, &rb, &u, &u, 1.0, 100, 10).unwrap();
    let d0 = rep.lhs[0].sqrt();
    // fitted rate C with d(t) ≤ e^{Ct} d(0)
    let c = rep.times.iter().zip(&rep.lhs).skip(1).map(|(t, l)| (l.sqrt() / d0).ln() / t).fold(f64::NEG_INFINITY, f64::max);
    assert!(c.is_finite() && c <= 2.0 * rep.lip_b + 1e-9, "C = {c}, Lip = {}", rep.lip_b);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn symmetric_and_bounded(seed in 0u64..100_000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = points(&mut rng, 10);
        let (mu, nu) = (prob(&mut rng, 10), prob(&mut rng, 10));
        let (a, b) = (dist(&mu, &nu, &m), dist(&nu, &mu, &m));
        prop_assert!((a - b).abs() < 1e-8);
        let tv: f64 = mu.weights.iter().zip(&nu.weights).map(|(x, y)| (x - y).abs()).sum();
        prop_assert!(a >= -1e-12 && a <= tv + 1e-8 && a <= 2.0);
    }

    #[test]
    fn triangle_inequality(seed in 0u64..100_000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = Metric::torus(4, 2.0);
        let (a, b, c) = (prob(&mut rng, 16), prob(&mut rng, 16), prob(&mut rng, 16));
        prop_assert!(dist(&a, &b, &m) + dist(&b, &c, &m) - dist(&a, &c, &m) >= -1e-6);
    }

    #[test]
    fn flow_solver_matches_lp_oracle(seed in 0u64..100_000, n in 2usize..40) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = points(&mut rng, n);
        let (mu, nu) = (prob(&mut rng, n), prob(&mut rng, n));
        let o = bl_oracle(&mu, &nu, &m).unwrap();
        prop_assert!((dist(&mu, &nu, &m) - o).abs() <= 1e-6, "oracle {}", o);
    }
}
