//! Finite discounted MDPs and exact planning quantities.
//!
//! Multi-armed bandits are the one-state, `gamma = 0` case and contextual
//! bandits are the `gamma = 0` case whose next-state law equals the context
//! distribution.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::data::DataDistribution;
use crate::error::{Error, Result};
use crate::linalg;
use crate::table::{check_len, SaTable};

const SUM_TOL: f64 = 1e-12;
/// Occupancy entries at or below this are treated as unvisited.
pub const VISIT_TOL: f64 = 1e-14;

/// Reward law of a state-action pair with the given mean.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RewardKind {
    Deterministic,
    Bernoulli,
}

/// A finite MDP `(S, A, P, R, rho, gamma)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularModel {
    n_states: usize,
    n_actions: usize,
    transitions: Vec<f64>,
    reward_mean: Vec<f64>,
    reward_kind: Vec<RewardKind>,
    initial: Vec<f64>,
    discount: f64,
}

fn check_simplex(what: &str, row: &[f64]) -> Result<()> {
    let mut sum = 0.0;
    for (i, &p) in row.iter().enumerate() {
        if !(p >= 0.0) || !p.is_finite() {
            return Err(Error::InvalidModel(format!("{what}: entry {i} is {p}")));
        }
        sum += p;
    }
    if (sum - 1.0).abs() > SUM_TOL {
        return Err(Error::InvalidModel(format!("{what}: sums to {sum}")));
    }
    Ok(())
}

impl TabularModel {
    /// `transitions` is laid out as `P[(s * A + a) * S + s']`.
    pub fn new(
        n_states: usize,
        n_actions: usize,
        transitions: Vec<f64>,
        reward_mean: Vec<f64>,
        reward_kind: Vec<RewardKind>,
        initial: Vec<f64>,
        discount: f64,
    ) -> Result<Self> {
        if n_states == 0 || n_actions == 0 {
            return Err(Error::InvalidModel("state and action counts must be positive".into()));
        }
        let sa = n_states * n_actions;
        check_len("transitions", &transitions, sa * n_states)?;
        check_len("reward_mean", &reward_mean, sa)?;
        if reward_kind.len() != sa {
            return Err(Error::DimensionMismatch {
                what: "reward_kind",
                expected: sa,
                found: reward_kind.len(),
            });
        }
        check_len("initial", &initial, n_states)?;
        for i in 0..sa {
            check_simplex(
                &format!("transition row ({}, {})", i / n_actions, i % n_actions),
                &transitions[i * n_states..(i + 1) * n_states],
            )?;
            let r = reward_mean[i];
            if !(0.0..=1.0).contains(&r) {
                return Err(Error::InvalidModel(format!(
                    "reward ({}, {}) = {r} outside [0, 1]",
                    i / n_actions,
                    i % n_actions
                )));
            }
        }
        check_simplex("initial distribution", &initial)?;
        if !(0.0..1.0).contains(&discount) {
            return Err(Error::InvalidModel(format!("discount {discount} outside [0, 1)")));
        }
        Ok(Self {
            n_states,
            n_actions,
            transitions,
            reward_mean,
            reward_kind,
            initial,
            discount,
        })
    }

    /// Single-state bandit with `gamma = 0`.
    pub fn bandit(reward_mean: Vec<f64>, reward_kind: Vec<RewardKind>) -> Result<Self> {
        let k = reward_mean.len();
        Self::new(1, k, vec![1.0; k], reward_mean, reward_kind, vec![1.0], 0.0)
    }

    /// Contextual bandit with context law `rho`; next states are redrawn from `rho`.
    pub fn contextual(
        rho: Vec<f64>,
        n_actions: usize,
        reward_mean: Vec<f64>,
        reward_kind: Vec<RewardKind>,
    ) -> Result<Self> {
        let s = rho.len();
        let mut p = Vec::with_capacity(s * n_actions * s);
        for _ in 0..s * n_actions {
            p.extend_from_slice(&rho);
        }
        Self::new(s, n_actions, p, reward_mean, reward_kind, rho, 0.0)
    }

    /// Same model with a different transition kernel.
    pub fn with_transitions(&self, transitions: Vec<f64>) -> Result<Self> {
        Self::new(
            self.n_states,
            self.n_actions,
            transitions,
            self.reward_mean.clone(),
            self.reward_kind.clone(),
            self.initial.clone(),
            self.discount,
        )
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }
    pub fn n_actions(&self) -> usize {
        self.n_actions
    }
    pub fn discount(&self) -> f64 {
        self.discount
    }
    pub fn initial(&self) -> &[f64] {
        &self.initial
    }
    pub fn transitions(&self) -> &[f64] {
        &self.transitions
    }
    pub fn reward_means(&self) -> &[f64] {
        &self.reward_mean
    }
    pub fn reward_kinds(&self) -> &[RewardKind] {
        &self.reward_kind
    }

    #[inline]
    pub fn reward(&self, s: usize, a: usize) -> f64 {
        self.reward_mean[s * self.n_actions + a]
    }

    #[inline]
    pub fn reward_kind(&self, s: usize, a: usize) -> RewardKind {
        self.reward_kind[s * self.n_actions + a]
    }

    #[inline]
    pub fn next_row(&self, s: usize, a: usize) -> &[f64] {
        let i = (s * self.n_actions + a) * self.n_states;
        &self.transitions[i..i + self.n_states]
    }

    #[inline]
    pub fn p(&self, s: usize, a: usize, sn: usize) -> f64 {
        self.transitions[(s * self.n_actions + a) * self.n_states + sn]
    }

    fn check_policy(&self, policy: &Policy) -> Result<()> {
        if policy.n_states != self.n_states || policy.n_actions != self.n_actions {
            return Err(Error::DimensionMismatch {
                what: "policy",
                expected: self.n_states * self.n_actions,
                found: policy.n_states * policy.n_actions,
            });
        }
        Ok(())
    }

    /// State-to-state kernel `P^pi` and expected one-step reward `r^pi`.
    pub fn policy_kernel(&self, policy: &Policy) -> Result<(Vec<f64>, Vec<f64>)> {
        self.check_policy(policy)?;
        let (ns, na) = (self.n_states, self.n_actions);
        let mut pm = vec![0.0; ns * ns];
        let mut r = vec![0.0; ns];
        for s in 0..ns {
            for a in 0..na {
                let pa = policy.prob(s, a);
                if pa == 0.0 {
                    continue;
                }
                r[s] += pa * self.reward(s, a);
                for (sn, &p) in self.next_row(s, a).iter().enumerate() {
                    pm[s * ns + sn] += pa * p;
                }
            }
        }
        Ok((pm, r))
    }

    /// `(P v)(s, a) = sum_{s'} P(s'|s,a) v(s')`.
    pub fn expect_next(&self, v: &[f64]) -> SaTable {
        SaTable::from_fn(self.n_states, self.n_actions, |s, a| {
            self.next_row(s, a).iter().zip(v).map(|(p, x)| p * x).sum()
        })
    }

    /// `Q(s, a) = r(s, a) + gamma (P v)(s, a)`.
    pub fn backup(&self, v: &[f64]) -> SaTable {
        let pv = self.expect_next(v);
        SaTable::from_fn(self.n_states, self.n_actions, |s, a| {
            self.reward(s, a) + self.discount * pv.get(s, a)
        })
    }
}

/// A stationary stochastic policy `pi(a|s)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Policy {
    n_states: usize,
    n_actions: usize,
    probs: Vec<f64>,
}

impl Policy {
    pub fn new(n_states: usize, n_actions: usize, probs: Vec<f64>) -> Result<Self> {
        check_len("policy", &probs, n_states * n_actions)?;
        for s in 0..n_states {
            let row = &probs[s * n_actions..(s + 1) * n_actions];
            let mut sum = 0.0;
            for &p in row {
                if !(p >= 0.0) {
                    return Err(Error::InvalidPolicy(format!("state {s} has entry {p}")));
                }
                sum += p;
            }
            if (sum - 1.0).abs() > SUM_TOL {
                return Err(Error::InvalidPolicy(format!("state {s} sums to {sum}")));
            }
        }
        Ok(Self {
            n_states,
            n_actions,
            probs,
        })
    }

    pub fn uniform(n_states: usize, n_actions: usize) -> Self {
        Self {
            n_states,
            n_actions,
            probs: vec![1.0 / n_actions as f64; n_states * n_actions],
        }
    }

    pub fn deterministic(n_actions: usize, actions: &[usize]) -> Result<Self> {
        let mut probs = vec![0.0; actions.len() * n_actions];
        for (s, &a) in actions.iter().enumerate() {
            if a >= n_actions {
                return Err(Error::InvalidPolicy(format!("action {a} out of range at state {s}")));
            }
            probs[s * n_actions + a] = 1.0;
        }
        Ok(Self {
            n_states: actions.len(),
            n_actions,
            probs,
        })
    }

    /// Rows are trusted to be normalized up to rounding.
    pub(crate) fn from_rows_unchecked(n_states: usize, n_actions: usize, probs: Vec<f64>) -> Self {
        Self {
            n_states,
            n_actions,
            probs,
        }
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }
    pub fn n_actions(&self) -> usize {
        self.n_actions
    }
    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    #[inline]
    pub fn prob(&self, s: usize, a: usize) -> f64 {
        self.probs[s * self.n_actions + a]
    }

    #[inline]
    pub fn row(&self, s: usize) -> &[f64] {
        &self.probs[s * self.n_actions..(s + 1) * self.n_actions]
    }

    /// `sum_a pi(a|s) u(s, a)` for every state.
    pub fn average(&self, u: &SaTable) -> Vec<f64> {
        (0..self.n_states)
            .map(|s| self.row(s).iter().zip(u.row(s)).map(|(p, x)| p * x).sum())
            .collect()
    }
}

/// Discounted state-action occupancy `d^pi`.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyMeasure {
    pub joint: SaTable,
    pub marginal: Vec<f64>,
}

/// Output of [`plan_optimal`].
#[derive(Debug, Clone, PartialEq)]
pub struct PlanningSolution {
    pub optimal_policy: Policy,
    pub greedy_actions: Vec<usize>,
    pub v_star: Vec<f64>,
    pub q_star: SaTable,
    pub a_star: SaTable,
}

/// Exact `V^pi` from the linear system `V = r^pi + gamma P^pi V`.
pub fn policy_value(model: &TabularModel, policy: &Policy) -> Result<Vec<f64>> {
    let (pm, r) = model.policy_kernel(policy)?;
    linalg::solve_resolvent(model.n_states, model.discount, &pm, &r)
}

/// `Q^pi(s, a) = r(s, a) + gamma (P V^pi)(s, a)`.
pub fn q_value(model: &TabularModel, policy: &Policy) -> Result<SaTable> {
    Ok(model.backup(&policy_value(model, policy)?))
}

/// `J(pi) = (1 - gamma) E_rho V^pi`.
pub fn j_value(model: &TabularModel, policy: &Policy) -> Result<f64> {
    let v = policy_value(model, policy)?;
    Ok((1.0 - model.discount) * model.initial.iter().zip(&v).map(|(p, x)| p * x).sum::<f64>())
}

/// Normalized discounted occupancy, solved from the Bellman flow equations.
pub fn occupancy_of(model: &TabularModel, policy: &Policy) -> Result<OccupancyMeasure> {
    let (pm, _) = model.policy_kernel(policy)?;
    let n = model.n_states;
    let mut pt = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            pt[j * n + i] = pm[i * n + j];
        }
    }
    let rhs: Vec<f64> = model.initial.iter().map(|p| (1.0 - model.discount) * p).collect();
    let mut marginal = linalg::solve_resolvent(n, model.discount, &pt, &rhs)?;
    for d in marginal.iter_mut() {
        if *d < 0.0 {
            *d = 0.0;
        }
    }
    let joint = SaTable::from_fn(n, model.n_actions, |s, a| marginal[s] * policy.prob(s, a));
    Ok(OccupancyMeasure { joint, marginal })
}

fn greedy(q: &SaTable, s: usize) -> usize {
    let row = q.row(s);
    let best = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let tol = 1e-12 * (1.0 + best.abs());
    row.iter().position(|&x| x >= best - tol).unwrap_or(0)
}

/// Value iteration warm start, greedy extraction with lowest-index ties,
/// then exact policy evaluation and improvement until stable.
pub fn plan_optimal(model: &TabularModel) -> Result<PlanningSolution> {
    let (ns, na, g) = (model.n_states, model.n_actions, model.discount);
    let mut v = vec![0.0; ns];
    for _ in 0..10_000 {
        let q = model.backup(&v);
        let mut delta: f64 = 0.0;
        for (s, vs) in v.iter_mut().enumerate() {
            let m = q.row(s).iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            delta = delta.max((m - *vs).abs());
            *vs = m;
        }
        if delta * (1.0 + g) < 1e-13 {
            break;
        }
    }
    let mut actions: Vec<usize> = {
        let q = model.backup(&v);
        (0..ns).map(|s| greedy(&q, s)).collect()
    };
    let mut q;
    loop {
        let pol = Policy::deterministic(na, &actions)?;
        v = policy_value(model, &pol)?;
        q = model.backup(&v);
        let mut changed = false;
        for s in 0..ns {
            let cur = q.get(s, actions[s]);
            let b = greedy(&q, s);
            if b != actions[s] && q.get(s, b) > cur + 1e-12 * (1.0 + cur.abs()) {
                actions[s] = b;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    let final_actions: Vec<usize> = (0..ns).map(|s| greedy(&q, s)).collect();
    if final_actions != actions {
        actions = final_actions;
        let pol = Policy::deterministic(na, &actions)?;
        v = policy_value(model, &pol)?;
        q = model.backup(&v);
    }
    let optimal_policy = Policy::deterministic(na, &actions)?;
    let a_star = SaTable::from_fn(ns, na, |s, a| q.get(s, a) - v[s]);
    Ok(PlanningSolution {
        optimal_policy,
        greedy_actions: actions,
        v_star: v,
        q_star: q,
        a_star,
    })
}

/// `max d^pi / mu` over visited pairs; infinite when a visited pair is uncovered.
pub fn concentrability(model: &TabularModel, policy: &Policy, mu: &DataDistribution) -> Result<f64> {
    mu.check_shape(model.n_states, model.n_actions)?;
    let d = occupancy_of(model, policy)?;
    let mut c: f64 = 0.0;
    for (i, &dp) in d.joint.values.iter().enumerate() {
        if dp <= VISIT_TOL {
            continue;
        }
        let m = mu.joint().values[i];
        if m <= 0.0 {
            return Ok(f64::INFINITY);
        }
        c = c.max(dp / m);
    }
    Ok(c)
}
