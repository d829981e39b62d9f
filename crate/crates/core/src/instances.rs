//! Named problem instances with their data laws and realizable classes.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::classes::{Bounds, ClassSet, FiniteClass, ModelClass, RegularizerKind, RegularizerSpec};
use crate::data::{rng_from_seed, DataDistribution};
use crate::error::{Error, Result};
use crate::model::{plan_optimal, Policy, RewardKind, TabularModel};
use crate::objectives::FenchelPair;
use crate::oracles::{occupancy_ratio, regularized_optimum_cb, u_star, zeta_star};
use crate::table::{DualFn, SaTable};

/// A model, its data law, and classes that realize the target solution.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub name: String,
    pub model: TabularModel,
    pub mu: DataDistribution,
    pub classes: ClassSet,
    /// Regularizer the construction is stated for, if any.
    pub regularizer: Option<RegularizerSpec>,
    /// Regularization level the construction is stated for, if any.
    pub alpha: Option<f64>,
}

fn weight_class(members: Vec<SaTable>) -> Result<FiniteClass<SaTable>> {
    let hi = members
        .iter()
        .flat_map(|m| m.values.iter())
        .cloned()
        .fold(0.0, f64::max);
    FiniteClass::new("W", members, Bounds::weight(hi.max(1.0))?)
}

fn dual_class(members: Vec<DualFn>) -> Result<FiniteClass<DualFn>> {
    let hi = members
        .iter()
        .flat_map(|m| m.iter())
        .map(|x| x.abs())
        .fold(1.0, f64::max);
    FiniteClass::new("V", members, Bounds::symmetric(hi)?)
}

/// Two arms: a deterministic `1/2` arm with almost all data and a
/// Bernoulli(1/3) arm seen with probability `2/n`.
pub fn prop1(n: usize, b_w: f64) -> Result<Instance> {
    if n < 3 {
        return Err(Error::InvalidArgument("prop1 needs n >= 3".into()));
    }
    let tail = 2.0 / n as f64;
    let c_star = 1.0 / (1.0 - tail);
    if b_w < c_star {
        return Err(Error::InvalidArgument(format!("B_w = {b_w} is below C* = {c_star}")));
    }
    let model = TabularModel::bandit(vec![0.5, 1.0 / 3.0], vec![RewardKind::Deterministic, RewardKind::Bernoulli])?;
    let mu = DataDistribution::new(SaTable::new(1, 2, vec![1.0 - tail, tail])?)?;
    let w1 = SaTable::new(1, 2, vec![c_star, 0.0])?;
    let w2 = SaTable::new(1, 2, vec![0.0, b_w])?;
    let classes = ClassSet::new(
        FiniteClass::new("W", vec![w1, w2], Bounds::weight(b_w)?)?,
        FiniteClass::new("V", vec![vec![0.5]], Bounds::symmetric(1.0)?)?,
    );
    Ok(Instance {
        name: "prop1".into(),
        model,
        mu,
        classes,
        regularizer: None,
        alpha: Some(0.0),
    })
}

/// One state, two deterministic arms with gap `min(1, alpha)`, and data mass
/// `M_f / 100` on the better arm.
pub fn prop3_large(alpha: f64) -> Result<Instance> {
    let m_f = 2.0;
    let p1 = m_f / 100.0;
    let b_w = 1.0 / p1;
    let spec = RegularizerSpec::new(RegularizerKind::ShiftedSquare, b_w)?;
    let model = TabularModel::bandit(
        vec![1.0, (1.0 - alpha).max(0.0)],
        vec![RewardKind::Deterministic, RewardKind::Deterministic],
    )?;
    let mu = DataDistribution::new(SaTable::new(1, 2, vec![p1, 1.0 - p1])?)?;
    let (w_a, v_a) = regularized_optimum_cb(&model, &mu, &spec, alpha)?;
    let w_star = SaTable::new(1, 2, vec![1.0 / p1, 0.0])?;
    let classes = ClassSet::new(
        FiniteClass::new("W", vec![w_a, w_star], Bounds::weight(b_w)?)?,
        dual_class(vec![v_a, vec![1.0]])?,
    );
    Ok(Instance {
        name: "prop3_large".into(),
        model,
        mu,
        classes,
        regularizer: Some(spec),
        alpha: Some(alpha),
    })
}

/// Two contexts; the rare one (mass `n^{-1/4}`) has a Bernoulli(1/2) best
/// arm, and each context puts mass `2/n` on its worse arm.
pub fn prop3_small(n: usize, alpha: f64) -> Result<Instance> {
    if n < 16 {
        return Err(Error::InvalidArgument("prop3_small needs n >= 16".into()));
    }
    let nf = n as f64;
    let rho1 = libm::pow(nf, -0.25);
    let tail = 2.0 / nf;
    let model = TabularModel::contextual(
        vec![rho1, 1.0 - rho1],
        2,
        vec![0.5, 1.0 / 3.0, 0.5, 1.0 / 3.0],
        vec![
            RewardKind::Bernoulli,
            RewardKind::Deterministic,
            RewardKind::Deterministic,
            RewardKind::Deterministic,
        ],
    )?;
    let cond = SaTable::new(2, 2, vec![1.0 - tail, tail, 1.0 - tail, tail])?;
    let mu = DataDistribution::from_conditional(&[rho1, 1.0 - rho1], &cond)?;
    let b_w = 2.0;
    let spec = RegularizerSpec::new(RegularizerKind::ShiftedSquare, b_w)?;
    let (w_a, v_a) = regularized_optimum_cb(&model, &mu, &spec, alpha)?;
    let mut w_tilde = w_a.clone();
    w_tilde.set(0, 0, 0.0);
    w_tilde.set(0, 1, 0.0);
    let classes = ClassSet::new(
        FiniteClass::new("W", vec![w_a, w_tilde], Bounds::weight(b_w)?)?,
        dual_class(vec![v_a, vec![0.5, 0.5]])?,
    );
    Ok(Instance {
        name: "prop3_small".into(),
        model,
        mu,
        classes,
        regularizer: Some(spec),
        alpha: Some(alpha),
    })
}

/// State indices of the four-state example.
pub mod fig1 {
    pub const A: usize = 0;
    pub const B: usize = 1;
    pub const C: usize = 2;
    pub const T: usize = 3;
    pub const L: usize = 0;
    pub const R: usize = 1;
}

/// Start state A branches to B (always rewarded) or to C (rewarded only on
/// the right action, never covered by data); both lead to an absorbing
/// zero-reward terminal. `W = {w1, w2}` with `w1` optimal, `V = {V*}`.
pub fn figure1(gamma: f64) -> Result<Instance> {
    use fig1::*;
    let (ns, na) = (4, 2);
    let mut p = vec![0.0; ns * na * ns];
    let mut set = |s: usize, a: usize, sn: usize| p[(s * na + a) * ns + sn] = 1.0;
    set(A, L, B);
    set(A, R, C);
    for a in [L, R] {
        set(B, a, T);
        set(C, a, T);
        set(T, a, T);
    }
    let mut r = vec![0.0; ns * na];
    r[B * na + L] = 1.0;
    r[B * na + R] = 1.0;
    r[C * na + R] = 1.0;
    let model = TabularModel::new(
        ns,
        na,
        p,
        r,
        vec![RewardKind::Deterministic; ns * na],
        vec![1.0, 0.0, 0.0, 0.0],
        gamma,
    )?;
    let mut joint = SaTable::zeros(ns, na);
    joint.set(A, L, 0.25);
    joint.set(A, R, 0.5);
    joint.set(B, L, 0.125);
    joint.set(B, R, 0.125);
    let mu = DataDistribution::new(joint)?;
    let (w1, w2) = figure1_weights(&model, &mu)?;
    let v_star = plan_optimal(&model)?.v_star;
    let classes = ClassSet::new(weight_class(vec![w1, w2])?, dual_class(vec![v_star])?);
    Ok(Instance {
        name: "figure1".into(),
        model,
        mu,
        classes,
        regularizer: Some(RegularizerSpec::new(RegularizerKind::PlainSquare, 1.0)?),
        alpha: Some(0.01),
    })
}

/// `w1` matches the occupancy of "left at A" on covered pairs; `w2` matches
/// "right at A" on its only covered pair.
fn figure1_weights(model: &TabularModel, mu: &DataDistribution) -> Result<(SaTable, SaTable)> {
    use fig1::*;
    let pi1 = Policy::new(4, 2, vec![1.0, 0.0, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5])?;
    let pi2 = Policy::new(4, 2, vec![0.0, 1.0, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5])?;
    let ratio = |pi: &Policy| -> Result<SaTable> {
        let d = crate::model::occupancy_of(model, pi)?;
        Ok(SaTable::from_fn(4, 2, |s, a| {
            if mu.mu(s, a) > 0.0 {
                d.joint.get(s, a) / mu.mu(s, a)
            } else {
                0.0
            }
        }))
    };
    let w1 = ratio(&pi1)?;
    let w2 = ratio(&pi2)?;
    debug_assert!(w2.get(A, R) > 0.0 && w1.get(A, L) > 0.0);
    Ok((w1, w2))
}

fn random_simplex<R: Rng>(rng: &mut R, n: usize, floor: f64) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| floor + rng.random::<f64>()).collect();
    let s: f64 = raw.iter().sum();
    let mut out: Vec<f64> = raw.iter().map(|x| x / s).collect();
    let tot: f64 = out[..n - 1].iter().sum();
    out[n - 1] = 1.0 - tot;
    out
}

/// Random full-support model and data law.
pub fn random_model(n_states: usize, n_actions: usize, gamma: f64, seed: u64) -> Result<(TabularModel, DataDistribution)> {
    if n_states == 0 || n_actions == 0 {
        return Err(Error::InvalidArgument("empty shape".into()));
    }
    let mut rng = rng_from_seed(seed);
    let mut p = Vec::with_capacity(n_states * n_actions * n_states);
    for _ in 0..n_states * n_actions {
        p.extend(random_simplex(&mut rng, n_states, 0.05));
    }
    let r: Vec<f64> = (0..n_states * n_actions).map(|_| rng.random::<f64>()).collect();
    let kinds: Vec<RewardKind> = (0..n_states * n_actions)
        .map(|_| {
            if rng.random::<bool>() {
                RewardKind::Bernoulli
            } else {
                RewardKind::Deterministic
            }
        })
        .collect();
    let rho = random_simplex(&mut rng, n_states, 0.1);
    let model = TabularModel::new(n_states, n_actions, p, r, kinds, rho, gamma)?;
    let joint = SaTable::new(n_states, n_actions, random_simplex(&mut rng, n_states * n_actions, 0.2))?;
    Ok((model, DataDistribution::new(joint)?))
}

/// Random MDP whose classes hold the optimal weights plus a few other
/// deterministic-policy weights, with oracle auxiliary and slope members.
pub fn random_mdp(n_states: usize, n_actions: usize, gamma: f64, seed: u64) -> Result<Instance> {
    let (model, mu) = random_model(n_states, n_actions, gamma, seed)?;
    let plan = plan_optimal(&model)?;
    let mut rng = rng_from_seed(seed ^ 0x5eed);
    let mut ws = vec![occupancy_ratio(&model, &plan.optimal_policy, &mu)?];
    for _ in 0..3 {
        let acts: Vec<usize> = (0..n_states).map(|_| rng.random_range(0..n_actions)).collect();
        ws.push(occupancy_ratio(&model, &Policy::deterministic(n_actions, &acts)?, &mu)?);
    }
    let fen = FenchelPair::for_discount(gamma);
    let classes = oracle_classes(&model, &mu, ws, vec![plan.v_star, vec![0.0; n_states]], &fen, true)?;
    Ok(Instance {
        name: format!("random_mdp_{n_states}x{n_actions}_{seed}"),
        model,
        mu,
        classes,
        regularizer: None,
        alpha: None,
    })
}

/// Random bandit with full-support data; classes hold `w*` and `V*`.
pub fn random_mab(n_arms: usize, seed: u64) -> Result<Instance> {
    let inst = random_cb(1, n_arms, seed)?;
    Ok(Instance {
        name: format!("random_mab_{n_arms}_{seed}"),
        ..inst
    })
}

/// Random contextual bandit with `mu(s) = rho(s)`; classes hold `w*` and `V*`.
pub fn random_cb(n_states: usize, n_actions: usize, seed: u64) -> Result<Instance> {
    let mut rng = rng_from_seed(seed);
    let rho = random_simplex(&mut rng, n_states, 0.2);
    let r: Vec<f64> = (0..n_states * n_actions).map(|_| rng.random::<f64>()).collect();
    let model = TabularModel::contextual(rho.clone(), n_actions, r, vec![RewardKind::Bernoulli; n_states * n_actions])?;
    let mut cond = SaTable::zeros(n_states, n_actions);
    for s in 0..n_states {
        for (a, p) in random_simplex(&mut rng, n_actions, 0.2).into_iter().enumerate() {
            cond.set(s, a, p);
        }
    }
    let mu = DataDistribution::from_conditional(&rho, &cond)?;
    let plan = plan_optimal(&model)?;
    let w_star = occupancy_ratio(&model, &plan.optimal_policy, &mu)?;
    let classes = ClassSet::new(weight_class(vec![w_star])?, dual_class(vec![plan.v_star])?);
    Ok(Instance {
        name: format!("random_cb_{n_states}x{n_actions}_{seed}"),
        model,
        mu,
        classes,
        regularizer: None,
        alpha: None,
    })
}

/// Auxiliary class `{u*_w}` and, when `with_z`, slope class
/// `{zeta*_{w, u*_w}} + {-1}` for the given weights.
pub fn oracle_classes(
    model: &TabularModel,
    mu: &DataDistribution,
    ws: Vec<SaTable>,
    vs: Vec<DualFn>,
    fen: &FenchelPair,
    with_z: bool,
) -> Result<ClassSet> {
    let (ns, na) = (model.n_states(), model.n_actions());
    let mut us: Vec<SaTable> = Vec::with_capacity(ws.len());
    let mut zs = vec![SaTable::filled(ns, na, -1.0)];
    for w in &ws {
        let u = u_star(model, mu, w, fen)?;
        if with_z {
            let z = zeta_star(&u, model, mu, w)?;
            if !zs.contains(&z) {
                zs.push(z);
            }
        }
        if !us.contains(&u) {
            us.push(u);
        }
    }
    let u_hi = us
        .iter()
        .flat_map(|u| u.values.iter())
        .map(|x| x.abs())
        .fold(crate::oracles::u_bound(fen.b_x, model.discount()), f64::max);
    let mut set = ClassSet::new(weight_class(ws)?, dual_class(vs)?);
    set.u = Some(FiniteClass::new("U", us, Bounds::symmetric(u_hi)?)?);
    if with_z {
        let lo = zs.iter().flat_map(|z| z.values.iter()).map(|x| x.abs()).fold(1.0, f64::min);
        let hi = zs.iter().flat_map(|z| z.values.iter()).map(|x| x.abs()).fold(1.0, f64::max);
        set.z = Some(FiniteClass::new("Z", zs, Bounds::slope(lo, hi)?)?);
    }
    set.p = Some(ModelClass::Tabular);
    Ok(set)
}

/// Scale of the near-optimal gaps in the rate instances: `c / sqrt(n)`.
pub const LOCAL_GAP: f64 = 0.5;

/// Five arms: one best Bernoulli(1/2) arm, three arms `LOCAL_GAP / sqrt(n)`
/// worse, and a rarely observed Bernoulli(1/3) trap with data mass `2/n`.
/// `W` holds the deterministic-arm weights plus a trap weight at `B_w`.
pub fn rate_mab(n: usize) -> Result<Instance> {
    if n < 16 {
        return Err(Error::InvalidArgument("rate_mab needs n >= 16".into()));
    }
    let nf = n as f64;
    let gap = LOCAL_GAP / libm::sqrt(nf);
    let tail = 2.0 / nf;
    let r = vec![0.5, 0.5 - gap, 0.5 - gap, 0.5 - gap, 1.0 / 3.0];
    let model = TabularModel::bandit(r, vec![RewardKind::Bernoulli; 5])?;
    let common = (1.0 - tail) / 4.0;
    let mu = DataDistribution::new(SaTable::new(1, 5, vec![common, common, common, common, tail])?)?;
    let b_w = 5.0;
    let mut ws: Vec<SaTable> = (0..4)
        .map(|a| SaTable::from_fn(1, 5, |_, b| if a == b { 1.0 / common } else { 0.0 }))
        .collect();
    ws.push(SaTable::from_fn(1, 5, |_, b| if b == 4 { b_w } else { 0.0 }));
    let classes = ClassSet::new(
        FiniteClass::new("W", ws, Bounds::weight(b_w)?)?,
        FiniteClass::new("V", vec![vec![0.5], vec![0.0], vec![1.0]], Bounds::symmetric(1.0)?)?,
    );
    Ok(Instance {
        name: "rate_mab".into(),
        model,
        mu,
        classes,
        regularizer: None,
        alpha: None,
    })
}

/// Three equally likely contexts with three arms each: the best arm, an arm
/// `LOCAL_GAP / sqrt(n)` worse, and a trap arm `1/6` worse with conditional
/// data mass `2/n`. `W` is the product of per-context choices.
pub fn rate_cb(n: usize) -> Result<Instance> {
    if n < 16 {
        return Err(Error::InvalidArgument("rate_cb needs n >= 16".into()));
    }
    let (ns, na) = (3, 3);
    let nf = n as f64;
    let gap = LOCAL_GAP / libm::sqrt(nf);
    let tail = 2.0 / nf;
    let best = [0.5, 0.6, 0.4];
    let rho = vec![1.0 / 3.0; ns];
    let mut r = Vec::with_capacity(ns * na);
    for b in best {
        r.extend([b, b - gap, b - 1.0 / 6.0]);
    }
    let model = TabularModel::contextual(rho.clone(), na, r, vec![RewardKind::Bernoulli; ns * na])?;
    let half = (1.0 - tail) / 2.0;
    let cond = SaTable::from_fn(ns, na, |_, a| if a == 2 { tail } else { half });
    let mu = DataDistribution::from_conditional(&rho, &cond)?;
    let b_w = 3.0;
    let choice = |a: usize| if a == 2 { b_w } else { 1.0 / half };
    let mut ws = Vec::with_capacity(27);
    for a0 in 0..na {
        for a1 in 0..na {
            for a2 in 0..na {
                let pick = [a0, a1, a2];
                ws.push(SaTable::from_fn(ns, na, |s, a| if a == pick[s] { choice(a) } else { 0.0 }));
            }
        }
    }
    let v_star = plan_optimal(&model)?.v_star;
    let classes = ClassSet::new(
        FiniteClass::new("W", ws, Bounds::weight(b_w)?)?,
        FiniteClass::new("V", vec![v_star, vec![0.0; ns], vec![1.0; ns]], Bounds::symmetric(1.0)?)?,
    );
    Ok(Instance {
        name: "rate_cb".into(),
        model,
        mu,
        classes,
        regularizer: None,
        alpha: None,
    })
}

/// Reward gaps of the suboptimal action in each state of [`coral_mdp`].
pub const CORAL_GAPS: [f64; 4] = [0.064, 0.032, 0.016, 0.008];

/// Fixed four-state two-action MDP with `gamma = 0.8`. Both actions share a
/// transition row, so the gap of a deterministic policy is the
/// occupancy-weighted sum of [`CORAL_GAPS`] over states where it errs.
/// `W` holds the sixteen deterministic-policy weights and two infeasible
/// rescalings; `U`, `Z` and `P` are oracle-seeded.
pub fn coral_mdp() -> Result<Instance> {
    coral_mdp_with_gaps(CORAL_GAPS)
}

/// [`coral_mdp`] with custom per-state reward gaps in `[0, 1/2]`.
pub fn coral_mdp_with_gaps(gaps: [f64; 4]) -> Result<Instance> {
    if gaps.iter().any(|g| !(0.0..=0.5).contains(g)) {
        return Err(Error::InvalidArgument("gaps must lie in [0, 1/2]".into()));
    }
    let (ns, na, gamma) = (4, 2, 0.8);
    let rows: [[f64; 4]; 4] = [
        [0.1, 0.5, 0.2, 0.2],
        [0.2, 0.1, 0.5, 0.2],
        [0.2, 0.2, 0.1, 0.5],
        [0.5, 0.2, 0.2, 0.1],
    ];
    let mut p = Vec::with_capacity(ns * na * ns);
    let mut r = Vec::with_capacity(ns * na);
    for s in 0..ns {
        for a in 0..na {
            p.extend_from_slice(&rows[s]);
            r.push(if a == 0 { 0.5 } else { 0.5 - gaps[s] });
        }
    }
    let model = TabularModel::new(ns, na, p, r, vec![RewardKind::Bernoulli; ns * na], vec![0.25; ns], gamma)?;
    let mu = DataDistribution::new(SaTable::filled(ns, na, 1.0 / (ns * na) as f64))?;
    let mut ws = Vec::with_capacity(18);
    for code in 0..1usize << ns {
        let acts: Vec<usize> = (0..ns).map(|s| (code >> s) & 1).collect();
        ws.push(occupancy_ratio(&model, &Policy::deterministic(na, &acts)?, &mu)?);
    }
    let scaled = |w: &SaTable, c: f64| SaTable::from_fn(ns, na, |s, a| c * w.get(s, a));
    ws.push(scaled(&ws[0], 1.25));
    ws.push(scaled(&ws[(1 << ns) - 1], 0.8));
    let plan = plan_optimal(&model)?;
    let fen = FenchelPair::for_discount(gamma);
    let mut classes = oracle_classes(&model, &mu, ws, vec![plan.v_star, vec![0.0; ns]], &fen, true)?;
    let truth = model.transitions().to_vec();
    let uniform = vec![1.0 / ns as f64; ns * na * ns];
    let mix = |c: f64| -> Vec<f64> { truth.iter().zip(&uniform).map(|(t, u)| (1.0 - c) * t + c * u).collect() };
    classes.p = Some(ModelClass::Finite(vec![truth.clone(), mix(0.1), mix(0.3), uniform.clone()]));
    Ok(Instance {
        name: "coral_mdp".into(),
        model,
        mu,
        classes,
        regularizer: None,
        alpha: None,
    })
}
