#![allow(dead_code)]

use coral_core::data::{rng_from_seed, DataDistribution};
use coral_core::model::{Policy, RewardKind, TabularModel};
use coral_core::table::SaTable;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    rng_from_seed(seed ^ 0x5eed_0000_0000_0000)
}

/// Strictly positive simplex point.
pub fn simplex(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| 0.1 + rng.random::<f64>()).collect();
    let s: f64 = raw.iter().sum();
    let mut out: Vec<f64> = raw.iter().map(|x| x / s).collect();
    let head: f64 = out[..n - 1].iter().sum();
    out[n - 1] = 1.0 - head;
    out
}

pub fn model(rng: &mut ChaCha8Rng, ns: usize, na: usize, gamma: f64) -> TabularModel {
    let mut p = Vec::new();
    for _ in 0..ns * na {
        p.extend(simplex(rng, ns));
    }
    let r = (0..ns * na).map(|_| rng.random::<f64>()).collect();
    let kinds = (0..ns * na)
        .map(|_| if rng.random::<bool>() { RewardKind::Bernoulli } else { RewardKind::Deterministic })
        .collect();
    TabularModel::new(ns, na, p, r, kinds, simplex(rng, ns), gamma).unwrap()
}

/// Contextual bandit whose data marginal equals the context law.
pub fn cb(rng: &mut ChaCha8Rng, ns: usize, na: usize) -> (TabularModel, DataDistribution) {
    let rho = simplex(rng, ns);
    let r = (0..ns * na).map(|_| rng.random::<f64>()).collect();
    let m = TabularModel::contextual(rho.clone(), na, r, vec![RewardKind::Bernoulli; ns * na]).unwrap();
    let mut cond = Vec::new();
    for _ in 0..ns {
        cond.extend(simplex(rng, na));
    }
    let mu = DataDistribution::from_conditional(&rho, &SaTable::new(ns, na, cond).unwrap()).unwrap();
    (m, mu)
}

pub fn mu(rng: &mut ChaCha8Rng, ns: usize, na: usize) -> DataDistribution {
    DataDistribution::new(SaTable::new(ns, na, simplex(rng, ns * na)).unwrap()).unwrap()
}

pub fn policy(rng: &mut ChaCha8Rng, ns: usize, na: usize) -> Policy {
    let mut p = Vec::new();
    for _ in 0..ns {
        p.extend(simplex(rng, na));
    }
    Policy::new(ns, na, p).unwrap()
}

pub fn table(rng: &mut ChaCha8Rng, ns: usize, na: usize, lo: f64, hi: f64) -> SaTable {
    SaTable::from_fn(ns, na, |_, _| lo + (hi - lo) * rng.random::<f64>())
}

pub fn vector(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| lo + (hi - lo) * rng.random::<f64>()).collect()
}

/// `V^pi` by repeated Bellman backups, independent of the library's solver.
pub fn iterate_value(m: &TabularModel, pi: &Policy, sweeps: usize) -> Vec<f64> {
    let (ns, na) = (m.n_states(), m.n_actions());
    let mut v = vec![0.0; ns];
    for _ in 0..sweeps {
        let mut next = vec![0.0; ns];
        for s in 0..ns {
            for a in 0..na {
                let ev: f64 = (0..ns).map(|t| m.p(s, a, t) * v[t]).sum();
                next[s] += pi.prob(s, a) * (m.reward(s, a) + m.discount() * ev);
            }
        }
        v = next;
    }
    v
}

/// Occupancy by truncated power series `(1-g) sum_t g^t rho P_pi^t`.
pub fn series_occupancy(m: &TabularModel, pi: &Policy, terms: usize) -> SaTable {
    let (ns, na, g) = (m.n_states(), m.n_actions(), m.discount());
    let mut dist = m.initial().to_vec();
    let mut acc = SaTable::zeros(ns, na);
    let mut scale = 1.0 - g;
    for _ in 0..terms {
        let mut next = vec![0.0; ns];
        for s in 0..ns {
            for a in 0..na {
                let mass = dist[s] * pi.prob(s, a);
                let cur = acc.get(s, a);
                acc.set(s, a, cur + scale * mass);
                for (t, nx) in next.iter_mut().enumerate() {
                    *nx += mass * m.p(s, a, t);
                }
            }
        }
        dist = next;
        scale *= g;
    }
    acc
}
