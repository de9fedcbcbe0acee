//! Exact inner problem by successive shortest paths, and the parametric
//! search over `c + ℓ = 1`.

use super::{difference, DiscreteMeasure, LipschitzDualSolution, Metric};
use crate::error::{Error, Result};
use std::cmp::Ordering;
use std::collections::BinaryHeap;

const INF: f64 = f64::INFINITY;

#[derive(Clone, Copy)]
struct Arc {
    to: usize,
    cost: f64,
    cap: f64,
    /// Edge length for lattice arcs, `None` for arcs to the sink node.
    len: Option<f64>,
}

struct Network {
    head: Vec<Vec<usize>>,
    arcs: Vec<Arc>,
}

impl Network {
    fn add(&mut self, a: usize, b: usize, cost: f64, len: Option<f64>) {
        let i = self.arcs.len();
        self.arcs.push(Arc { to: b, cost, cap: INF, len });
        self.arcs.push(Arc { to: a, cost: -cost, cap: 0.0, len });
        self.head[a].push(i);
        self.head[b].push(i + 1);
    }
}

#[derive(PartialEq)]
struct Item(f64, usize);
impl Eq for Item {}
impl PartialOrd for Item {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Item {
    fn cmp(&self, o: &Self) -> Ordering {
        o.0.total_cmp(&self.0).then(o.1.cmp(&self.1))
    }
}

/// Optimal flow of the inner problem at one `(c, ℓ)`.
#[derive(Clone, Debug)]
pub struct FlowSolution {
    pub c: f64,
    pub lip: f64,
    /// Optimal cost `c A + ℓ B`.
    pub value: f64,
    /// Mass created or destroyed.
    pub a: f64,
    /// Length-weighted transported mass.
    pub b: f64,
    /// Dual potentials `φ_i` on the measure nodes.
    pub phi: Vec<f64>,
}

/// Solves `min c·(mass created/destroyed) + ℓ·(transport cost)` for the
/// signed excess `delta` and returns the flow together with its dual.
pub fn bl_distance_at(delta: &[f64], metric: &Metric, c: f64, lip: f64) -> Result<FlowSolution> {
    let n = delta.len();
    let s = n;
    let mut net = Network { head: vec![Vec::new(); n + 1], arcs: Vec::new() };
    for (i, j, l) in metric.edges() {
        net.add(i, j, lip * l, Some(l));
        net.add(j, i, lip * l, Some(l));
    }
    for i in 0..n {
        net.add(i, s, c, None);
        net.add(s, i, c, None);
    }
    let mut excess: Vec<f64> = delta.to_vec();
    excess.push(-delta.iter().sum::<f64>());
    let scale: f64 = excess.iter().map(|x| x.abs()).sum();
    let tol = 1e-14 * scale.max(1e-300);
    let mut pi = vec![0.0; n + 1];
    let mut dist = vec![INF; n + 1];
    let mut pred = vec![usize::MAX; n + 1];
    let mut done = vec![false; n + 1];
    let mut heap = BinaryHeap::new();
    let mut guard = 0usize;
    loop {
        if !excess.iter().any(|&e| e > tol) {
            break;
        }
        guard += 1;
        if guard > 50 * (n + 1) + 10_000 {
            return Err(Error::Lp("augmenting-path limit reached".into()));
        }
        dist.iter_mut().for_each(|d| *d = INF);
        pred.iter_mut().for_each(|p| *p = usize::MAX);
        done.iter_mut().for_each(|d| *d = false);
        heap.clear();
        for v in 0..=n {
            if excess[v] > tol {
                dist[v] = 0.0;
                heap.push(Item(0.0, v));
            }
        }
        let mut sink = usize::MAX;
        while let Some(Item(d, u)) = heap.pop() {
            if done[u] || d > dist[u] {
                continue;
            }
            done[u] = true;
            if excess[u] < -tol {
                sink = u;
                break;
            }
            for &ai in &net.head[u] {
                let a = net.arcs[ai];
                if a.cap <= tol {
                    continue;
                }
                let rc = (a.cost + pi[u] - pi[a.to]).max(0.0);
                let nd = d + rc;
                if nd < dist[a.to] {
                    dist[a.to] = nd;
                    pred[a.to] = ai;
                    heap.push(Item(nd, a.to));
                }
            }
        }
        if sink == usize::MAX {
            return Err(Error::Lp("no augmenting path".into()));
        }
        let dmax = dist[sink];
        for v in 0..=n {
            pi[v] += dist[v].min(dmax);
        }
        // Bottleneck along the path.
        let mut amt = -excess[sink];
        let mut v = sink;
        while pred[v] != usize::MAX {
            let ai = pred[v];
            amt = amt.min(net.arcs[ai].cap);
            v = net.arcs[ai ^ 1].to;
        }
        amt = amt.min(excess[v]);
        let src = v;
        let mut v = sink;
        while pred[v] != usize::MAX {
            let ai = pred[v];
            if net.arcs[ai].cap.is_finite() {
                net.arcs[ai].cap -= amt;
            }
            net.arcs[ai ^ 1].cap += amt;
            v = net.arcs[ai ^ 1].to;
        }
        excess[src] -= amt;
        excess[sink] += amt;
    }
    // Flow on a forward arc is the residual capacity of its reverse twin.
    let (mut a, mut b) = (0.0, 0.0);
    for k in (0..net.arcs.len()).step_by(2) {
        let f = net.arcs[k + 1].cap;
        if f <= 0.0 {
            continue;
        }
        match net.arcs[k].len {
            Some(l) => b += l * f,
            None => a += f,
        }
    }
    let phi: Vec<f64> = (0..n).map(|i| pi[s] - pi[i]).collect();
    Ok(FlowSolution { c, lip, value: c * a + lip * b, a, b, phi })
}

fn certify(phi: &mut [f64], delta: &[f64], metric: &Metric) -> LipschitzDualSolution {
    let sup = phi.iter().fold(0.0f64, |m, p| m.max(p.abs()));
    let mut lip = 0.0f64;
    for (i, j, l) in metric.edges() {
        if l > 0.0 {
            lip = lip.max((phi[i] - phi[j]).abs() / l);
        }
    }
    let (mut sup, mut lip) = (sup, lip);
    if sup + lip > 1.0 {
        let k = 1.0 / (sup + lip);
        phi.iter_mut().for_each(|p| *p *= k);
        sup *= k;
        lip *= k;
    }
    let objective = phi.iter().zip(delta).map(|(p, d)| p * d).sum();
    LipschitzDualSolution { phi: phi.to_vec(), sup_norm_used: sup, lip_const_used: lip, objective }
}

/// Exact `d_BL(μ, ν)` on `metric` with a feasible dual certificate.
pub fn bl_distance(mu: &DiscreteMeasure, nu: &DiscreteMeasure, metric: &Metric) -> Result<(f64, LipschitzDualSolution)> {
    let delta = difference(mu, nu, metric)?;
    let scale: f64 = delta.iter().map(|x| x.abs()).sum();
    if scale == 0.0 {
        let mut phi = vec![0.0; delta.len()];
        let dual = certify(&mut phi, &delta, metric);
        return Ok((0.0, dual));
    }
    let solve = |c: f64| bl_distance_at(&delta, metric, c, 1.0 - c);
    let line = |s: &FlowSolution, c: f64| c * s.a + (1.0 - c) * s.b;
    let mut lo = solve(0.0)?;
    let mut hi = solve(1.0)?;
    let tol = 1e-13 * scale;
    let mut best = if lo.value >= hi.value { lo.clone() } else { hi.clone() };
    for _ in 0..200 {
        // Supporting lines  L(c) = c A + (1 − c) B  of the concave g.
        let sl = lo.a - lo.b;
        let sh = hi.a - hi.b;
        if sl <= 0.0 || sh >= 0.0 || sl - sh <= 0.0 {
            if sl <= 0.0 && lo.value >= best.value {
                best = lo.clone();
            }
            if sh >= 0.0 && hi.value >= best.value {
                best = hi.clone();
            }
            break;
        }
        // lo.b + c sl = hi.b + c sh ... written in terms of each line.
        let c = ((hi.b - lo.b) / (sl - sh)).clamp(lo.c, hi.c);
        let mid = solve(c)?;
        if mid.value >= best.value {
            best = mid.clone();
        }
        if line(&lo, c) - mid.value <= tol {
            break;
        }
        let sm = mid.a - mid.b;
        if sm == 0.0 {
            break;
        } else if sm > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut phi = best.phi.clone();
    let dual = certify(&mut phi, &delta, metric);
    Ok((dual.objective.max(0.0), dual))
}
