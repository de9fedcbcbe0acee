//! Small-instance verification suites: exact identities, analytic
//! solutions, BL oracle equivalence and density stability.
//!
//! Every suite compares two independent evaluations of the same quantity
//! and returns the worst deviation next to its tolerance.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use vfpns::bl::stability::bl_stability_experiment;
use vfpns::bl::{bl_distance, bl_oracle, DiscreteMeasure, Metric};
use vfpns::blockstats::{GradWork, VelocityCtx};
use vfpns::entropy::{ckp_check, dissipation_split, entropy_decomposition, maxwellian, relative_entropy, MaxwellianParams};
use vfpns::fluid::{FluidState, NsSolver};
use vfpns::grid::{block_moments, moment_density};
use vfpns::kinetic::ou_step;
use vfpns::limit::AdvDiff;
use vfpns::spectral::Spectral;
use vfpns::{PhaseDensity, Result, ScalarField, SpatialGrid, VectorField, VelocityGrid};

/// One measured quantity against its tolerance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub worst: f64,
    pub tol: f64,
    pub cases: usize,
}

impl Check {
    fn new(name: &str, worst: f64, tol: f64, cases: usize) -> Self {
        Self { name: name.into(), worst, tol, cases }
    }

    pub fn pass(&self) -> bool {
        self.worst <= self.tol
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub suite: String,
    pub checks: Vec<Check>,
    pub seconds: f64,
}

impl SuiteReport {
    pub fn pass(&self) -> bool {
        self.checks.iter().all(Check::pass)
    }
}

fn timed(name: &str, body: impl FnOnce() -> Result<Vec<Check>>) -> Result<SuiteReport> {
    let t0 = std::time::Instant::now();
    let checks = body()?;
    Ok(SuiteReport { suite: name.into(), checks, seconds: t0.elapsed().as_secs_f64() })
}

/// A positive phase density: a local Maxwellian with random moments,
/// modulated by a random positive factor per node.
pub fn random_state(rng: &mut impl Rng, space: SpatialGrid, vel: VelocityGrid) -> Result<(PhaseDensity, ScalarField, VectorField)> {
    let n = space.cells();
    let rho = ScalarField::from_vec(space, (0..n).map(|_| rng.gen_range(0.3..1.7)).collect())?;
    let u = VectorField::from_vecs(
        space,
        (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect(),
    )?;
    let mut f = maxwellian(&MaxwellianParams { rho, u }, vel)?;
    for x in f.data_mut() {
        *x *= rng.gen_range(0.6..1.4);
    }
    let rho_ref = ScalarField::from_vec(space, (0..n).map(|_| rng.gen_range(0.3..1.7)).collect())?;
    let u_ref = VectorField::from_vecs(
        space,
        (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect(),
    )?;
    Ok((f, rho_ref, u_ref))
}

/// `∬ |∇ξ f + (ξ − c) f|² / f` evaluated node by node.
fn dissipation_pointwise(f: &PhaseDensity, centre: &VectorField) -> f64 {
    let ctx = VelocityCtx::new(*f.vel());
    let mut work = GradWork::new(&ctx);
    let nb = f.block_len();
    let (mut g0, mut g1) = (vec![0.0; nb], vec![0.0; nb]);
    let n = ctx.n();
    let mut s = 0.0;
    for ix in 0..f.space().cells() {
        let blk = f.block(ix);
        ctx.grad_block(blk, &mut g0, &mut g1, &mut work);
        let c = centre.at(ix);
        let floor = vfpns::blockstats::flux_floor(blk);
        for j1 in 0..n {
            for j2 in 0..n {
                let k = j1 * n + j2;
                let v = blk[k];
                let (d0, d1) = (ctx.nodes[j1] - c[0], ctx.nodes[j2] - c[1]);
                if v > floor {
                    let a = g0[k] + d0 * v;
                    let b = g1[k] + d1 * v;
                    s += (a * a + b * b) / v;
                } else {
                    // same convention as the block sums: drop |∇f|²/f only
                    s += 2.0 * (d0 * g0[k] + d1 * g1[k]) + (d0 * d0 + d1 * d1) * v;
                }
            }
        }
    }
    s * f.cell_volume()
}

fn bulk(f: &PhaseDensity) -> VectorField {
    let nodes = f.vel().nodes();
    let dv2 = f.vel().cell_area();
    let (mut a, mut b) = (Vec::new(), Vec::new());
    for ix in 0..f.space().cells() {
        let [r, m0, m1] = block_moments(f.block(ix), &nodes, dv2);
        a.push(m0 / r);
        b.push(m1 / r);
    }
    VectorField::from_vecs(*f.space(), a, b).unwrap()
}

/// Entropy decomposition and dissipation split on `states` random states,
/// CKP on `pairs` pairs of unit mass.
pub fn identity_suite(states: usize, pairs: usize, seed: u64) -> Result<SuiteReport> {
    timed("identities", || {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let space = SpatialGrid::new(8, 2.0 * std::f64::consts::PI)?;
        let vel = VelocityGrid::new(16, 6.0)?;
        let (mut w_dec, mut w_split) = (0.0f64, 0.0f64);
        for _ in 0..states {
            let (f, rho, u) = random_state(&mut rng, space, vel)?;
            let direct = relative_entropy(&f, &maxwellian(&MaxwellianParams { rho: rho.clone(), u: u.clone() }, vel)?)?;
            let parts = entropy_decomposition(&f, &rho, &u)?;
            w_dec = w_dec.max((direct - parts.total()).abs());

            let eps = rng.gen_range(0.05..1.0);
            let nc = space.cells();
            let v = VectorField::from_vecs(
                space,
                (0..nc).map(|_| rng.gen_range(-2.0..2.0)).collect(),
                (0..nc).map(|_| rng.gen_range(-2.0..2.0)).collect(),
            )?;
            let c = v.scaled(eps);
            let uf = bulk(&f);
            let rho_f = moment_density(&f);
            let total = dissipation_pointwise(&f, &c);
            let kin = dissipation_pointwise(&f, &uf);
            let align = uf.sub(&c).norm_sq().zip_map(&rho_f, |a, b| a * b).integral();
            w_split = w_split.max((total - kin - align).abs());
            let split = dissipation_split(&f, &v, eps);
            w_split = w_split.max((split.total - total).abs()).max((split.kinetic - kin).abs());
        }
        let mut ckp_violations = 0usize;
        let mut ckp_worst = f64::NEG_INFINITY;
        for _ in 0..pairs {
            let (mut f, _, _) = random_state(&mut rng, space, vel)?;
            let (mut g, _, _) = random_state(&mut rng, space, vel)?;
            f.scale(1.0 / f.mass());
            g.scale(1.0 / g.mass());
            let c = ckp_check(&f, &g)?;
            ckp_worst = ckp_worst.max(c.lhs - c.rhs);
            if !c.holds {
                ckp_violations += 1;
            }
        }
        Ok(vec![
            Check::new("entropy decomposition", w_dec, 1e-6, states),
            Check::new("dissipation split", w_split, 1e-6, states),
            Check::new("CKP violations", ckp_violations as f64, 0.0, pairs),
            Check::new("CKP worst lhs - rhs", ckp_worst.max(0.0), 1e-8, pairs),
        ])
    })
}

/// Taylor–Green decay, heat-mode decay and OU moment relaxation.
pub fn analytic_suite() -> Result<SuiteReport> {
    timed("analytic", || {
        let l = 2.0 * std::f64::consts::PI;
        let space = SpatialGrid::new(32, l)?;
        let tg = |a: f64| {
            VectorField::from_fn(space, move |x| [a * x[0].sin() * x[1].cos(), -a * x[0].cos() * x[1].sin()])
        };
        let mut ns = NsSolver::new(Spectral::new(space));
        let mut st = FluidState::new(tg(1.0));
        let (dt, steps) = (1e-3, 500);
        let zero = VectorField::zeros(space);
        for _ in 0..steps {
            ns.step(&mut st, dt, &zero)?;
        }
        let t = dt * steps as f64;
        let tg_err = st.v.sub(&tg((-2.0 * t).exp())).l2_norm();

        let mut ad = AdvDiff::new(Spectral::new(space));
        let k = 2.0;
        let mode = |t: f64| ScalarField::from_fn(space, move |x| 1.0 + 0.5 * (k * x[0] + x[1]).cos() * (-(k * k + 1.0) * t).exp());
        let mut rho = mode(0.0);
        let dt_h = 0.01;
        for _ in 0..50 {
            rho = ad.step(&rho, &zero, &zero, dt_h)?;
        }
        let heat_err = rho.zip_map(&mode(0.5), |a, b| a - b).max_abs();

        let one = SpatialGrid::new(8, l)?;
        let vel = VelocityGrid::new(48, 8.0)?;
        let eps = 0.3;
        let (u0, vv) = ([0.8, -0.5], [1.0, 2.0]);
        let temp0 = 1.6f64;
        let s = temp0.sqrt();
        let f0 = PhaseDensity::from_fn(one, vel, |_, xi| {
            let d = [(xi[0] - u0[0]) / s, (xi[1] - u0[1]) / s];
            (-(d[0] * d[0] + d[1] * d[1]) / 2.0).exp() / (2.0 * std::f64::consts::PI * temp0)
        });
        let v = VectorField::constant(one, vv);
        let (mut w_mean, mut w_temp) = (0.0f64, 0.0f64);
        let nodes = vel.nodes();
        for &tau in &[0.005, 0.02, 0.05, 0.2] {
            let f = ou_step(&f0, tau, eps, &v)?;
            let a = (-tau / (eps * eps)).exp();
            let blk = f.block(0);
            let [r, m0, m1] = block_moments(blk, &nodes, vel.cell_area());
            let mean = [m0 / r, m1 / r];
            for d in 0..2 {
                let expect = eps * vv[d] + (u0[d] - eps * vv[d]) * a;
                w_mean = w_mean.max((mean[d] - expect).abs());
            }
            let n = vel.n();
            let mut e = 0.0;
            for j1 in 0..n {
                for j2 in 0..n {
                    let (x, y) = (nodes[j1] - mean[0], nodes[j2] - mean[1]);
                    e += blk[j1 * n + j2] * (x * x + y * y);
                }
            }
            let temp = e * vel.cell_area() / (2.0 * r);
            let expect = 1.0 + (temp0 - 1.0) * a * a;
            w_temp = w_temp.max((temp - expect).abs());
        }
        Ok(vec![
            Check::new("Taylor-Green L2 error", tg_err, 1e-6, 1),
            Check::new("heat mode max error", heat_err, 1e-10, 1),
            Check::new("OU mean", w_mean, 1e-5, 4),
            Check::new("OU temperature", w_temp, 1e-5, 4),
        ])
    })
}

/// Flow solver against the dense LP on `instances` random instances of at
/// most 64 nodes, and the two-point closed form.
pub fn bl_oracle_suite(instances: usize, seed: u64) -> Result<SuiteReport> {
    timed("bl oracle", || {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst = 0.0f64;
        for k in 0..instances {
            let metric = match k % 3 {
                0 => {
                    let n = rng.gen_range(2..=64);
                    let pts: Vec<[f64; 2]> = (0..n).map(|_| [rng.gen_range(0.0..3.0), rng.gen_range(0.0..3.0)]).collect();
                    Metric::from_points(&pts)
                }
                1 => Metric::torus(rng.gen_range(2..=8), rng.gen_range(0.5..7.0)),
                _ => Metric::phase(2, rng.gen_range(0.5..4.0), rng.gen_range(2..=4), rng.gen_range(0.5..3.0)),
            };
            let n = metric.nodes();
            let mut a: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
            let mut b: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
            let (sa, sb) = (a.iter().sum::<f64>(), b.iter().sum::<f64>());
            // A third of the pairs carry unequal mass.
            let skew = if k % 4 == 0 { rng.gen_range(0.6..1.5) } else { 1.0 };
            a.iter_mut().for_each(|x| *x /= sa);
            b.iter_mut().for_each(|x| *x *= skew / sb);
            let mu = DiscreteMeasure::new(a)?;
            let nu = DiscreteMeasure::new(b)?;
            let flow = bl_distance(&mu, &nu, &metric)?.0;
            let lp = bl_oracle(&mu, &nu, &metric)?;
            worst = worst.max((flow - lp).abs());
        }
        let mut closed = 0.0f64;
        for &d in &[0.1, 0.5, 1.0, 2.0, 3.7, 10.0] {
            let metric = Metric::from_points(&[[0.0, 0.0], [d, 0.0]]);
            let (x, y) = (DiscreteMeasure::dirac(2, 0), DiscreteMeasure::dirac(2, 1));
            let expect = 2.0 * d / (2.0 + d);
            closed = closed
                .max((bl_distance(&x, &y, &metric)?.0 - expect).abs())
                .max((bl_oracle(&x, &y, &metric)? - expect).abs());
        }
        Ok(vec![Check::new("flow vs LP", worst, 1e-6, instances), Check::new("two-point closed form", closed, 1e-6, 12)])
    })
}

/// Outcome of one stability scenario at two step sizes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioResult {
    pub name: String,
    pub ratio_coarse: f64,
    pub ratio_fine: f64,
    /// `|fine/coarse − 1|`
    pub drift: f64,
}

/// The three scripted density-stability scenarios on an `n × n` torus.
pub fn stability_scenarios(n: usize, steps: usize) -> Result<Vec<ScenarioResult>> {
    let l = 2.0 * std::f64::consts::PI;
    let space = SpatialGrid::new(n, l)?;
    let h = space.h();
    let rho_a = crate::init::cosine_density(space, 0.5);
    let shifted = {
        let z = ScalarField::from_fn(space, |x| 1.0 + 0.5 * (x[0] - 2.0 * h).cos() + 0.2 * (x[1] - h).sin());
        let m = z.integral();
        z.scaled(1.0 / m)
    };
    let tg = crate::init::taylor_green(space, 0.5);
    let t_end = 1.0;
    type Vel = Box<dyn Fn(f64) -> VectorField>;
    let scenarios: Vec<(&str, ScalarField, Vel, Vel)> = vec![
        (
            "constant drift",
            rho_a.clone(),
            Box::new({
                let tg = tg.clone();
                move |_| tg.add(&VectorField::constant(space, [0.2, 0.1]))
            }),
            Box::new({
                let tg = tg.clone();
                move |_| tg.clone()
            }),
        ),
        (
            "translated data",
            shifted.clone(),
            Box::new({
                let tg = tg.clone();
                move |_| tg.clone()
            }),
            Box::new({
                let tg = tg.clone();
                move |_| tg.clone()
            }),
        ),
        (
            "pulsating field",
            shifted,
            Box::new({
                let tg = tg.clone();
                move |t| tg.scaled(1.0 + 0.5 * (2.0 * std::f64::consts::PI * t).sin())
            }),
            Box::new({
                let tg = tg.clone();
                move |_| tg.clone()
            }),
        ),
    ];
    let mut out = Vec::new();
    for (name, rho_b, ua, ub) in scenarios {
        let ratio = |k: usize| -> Result<f64> {
            let rep = bl_stability_experiment(&rho_a, &rho_b, ua.as_ref(), ub.as_ref(), t_end, k, k / 10)?;
            rep.ratio_min.ok_or_else(|| vfpns::Error::Trajectory(format!("{name}: densities never separate")))
        };
        let (c, f) = (ratio(steps)?, ratio(2 * steps)?);
        out.push(ScenarioResult { name: name.into(), ratio_coarse: c, ratio_fine: f, drift: (f / c - 1.0).abs() });
    }
    Ok(out)
}

/// Scenario ratios must stay positive and move by at most 20% when the
/// step is halved.
pub fn stability_suite(n: usize, steps: usize) -> Result<SuiteReport> {
    timed("bl stability", || {
        let rs = stability_scenarios(n, steps)?;
        Ok(rs
            .iter()
            .flat_map(|r| {
                [
                    Check::new(&format!("{} ratio drift", r.name), r.drift, 0.2, 2),
                    Check::new(&format!("{} ratio not positive", r.name), if r.ratio_coarse > 0.0 && r.ratio_fine > 0.0 { 0.0 } else { 1.0 }, 0.0, 2),
                ]
            })
            .collect())
    })
}
