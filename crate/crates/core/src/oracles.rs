//! Closed-form reference quantities: optimal weights, regularized bandit
//! optima, Fenchel-oracle tables, and the penalty-invariance check.

use alloc::format;
use alloc::vec::Vec;

use crate::classes::{FiniteClass, RegularizerSpec};
use crate::data::DataDistribution;
use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{j_value, occupancy_of, plan_optimal, Policy, TabularModel, VISIT_TOL};
use crate::objectives::{alm_penalty, induced_rows, pop_lagrangian, FenchelPair};
use crate::table::{DualFn, SaTable};

/// `w*(s, a) = d^{pi*}(s, a) / mu(s, a)` on the support of `mu`.
pub fn optimal_weights(model: &TabularModel, mu: &DataDistribution) -> Result<SaTable> {
    let plan = plan_optimal(model)?;
    occupancy_ratio(model, &plan.optimal_policy, mu)
}

/// `d^pi / mu`, failing where `pi` visits a pair outside the data support.
pub fn occupancy_ratio(model: &TabularModel, policy: &Policy, mu: &DataDistribution) -> Result<SaTable> {
    mu.check_shape(model.n_states(), model.n_actions())?;
    let occ = occupancy_of(model, policy)?;
    let (ns, na) = (model.n_states(), model.n_actions());
    let mut w = SaTable::zeros(ns, na);
    for s in 0..ns {
        for a in 0..na {
            let d = occ.joint.get(s, a);
            let m = mu.mu(s, a);
            if m > 0.0 {
                w.set(s, a, d / m);
            } else if d > VISIT_TOL {
                return Err(Error::Uncovered { state: s, action: a });
            }
        }
    }
    Ok(w)
}

/// KKT solution of the behavior-regularized bandit problem.
#[derive(Debug, Clone, PartialEq)]
pub struct RegularizedOptimum {
    pub w: Vec<f64>,
    pub v: f64,
    /// `|sum_a mu(a) w(a) - 1|` at the returned point.
    pub constraint_residual: f64,
}

fn kkt_weights(r: &[f64], p: &[f64], spec: &RegularizerSpec, alpha: f64, v: f64) -> (Vec<f64>, f64) {
    let w: Vec<f64> = r
        .iter()
        .map(|&ra| spec.inv_fprime((ra - v) / alpha).max(0.0))
        .collect();
    let mass = w.iter().zip(p).map(|(x, m)| x * m).sum();
    (w, mass)
}

/// `w(a) = max{0, (f')^{-1}((r(a) - v) / alpha)}` with `v` chosen by
/// bisection so that `sum_a mu(a) w(a) = 1`.
pub fn regularized_optimum(r: &[f64], p: &[f64], spec: &RegularizerSpec, alpha: f64) -> Result<RegularizedOptimum> {
    if r.len() != p.len() || r.is_empty() {
        return Err(Error::DimensionMismatch {
            what: "rewards and data law",
            expected: r.len(),
            found: p.len(),
        });
    }
    if !(alpha > 0.0) {
        return Err(Error::InvalidArgument(format!("alpha {alpha} must be positive")));
    }
    let r_max = r.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let r_min = r.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut hi = r_max;
    let mut lo = r_min - alpha * spec.b_fprime();
    let mass = |v: f64| kkt_weights(r, p, spec, alpha, v).1;
    let mut widen = 0;
    while mass(lo) < 1.0 {
        lo -= (hi - lo).max(1.0);
        widen += 1;
        if widen > 200 {
            return Err(Error::Bracket);
        }
    }
    if mass(hi) > 1.0 + 1e-12 {
        return Err(Error::Bracket);
    }
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if mass(mid) >= 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (w_lo, m_lo) = kkt_weights(r, p, spec, alpha, lo);
    let (w_hi, m_hi) = kkt_weights(r, p, spec, alpha, hi);
    let (w, v, m) = if (m_lo - 1.0).abs() <= (m_hi - 1.0).abs() {
        (w_lo, lo, m_lo)
    } else {
        (w_hi, hi, m_hi)
    };
    Ok(RegularizedOptimum {
        w,
        v,
        constraint_residual: (m - 1.0).abs(),
    })
}

/// Regularized optimum of a bandit model.
pub fn regularized_optimum_mab(
    model: &TabularModel,
    mu: &DataDistribution,
    spec: &RegularizerSpec,
    alpha: f64,
) -> Result<RegularizedOptimum> {
    if model.n_states() != 1 {
        return Err(Error::DimensionMismatch {
            what: "bandit states",
            expected: 1,
            found: model.n_states(),
        });
    }
    mu.check_shape(1, model.n_actions())?;
    regularized_optimum(model.reward_means(), mu.conditional().row(0), spec, alpha)
}

/// Per-state regularized optimum of a contextual bandit.
pub fn regularized_optimum_cb(
    model: &TabularModel,
    mu: &DataDistribution,
    spec: &RegularizerSpec,
    alpha: f64,
) -> Result<(SaTable, DualFn)> {
    mu.check_shape(model.n_states(), model.n_actions())?;
    let (ns, na) = (model.n_states(), model.n_actions());
    let mut w = SaTable::zeros(ns, na);
    let mut v = Vec::with_capacity(ns);
    for s in 0..ns {
        let r = &model.reward_means()[s * na..(s + 1) * na];
        let opt = regularized_optimum(r, mu.conditional().row(s), spec, alpha)?;
        for (a, x) in opt.w.iter().enumerate() {
            w.set(s, a, *x);
        }
        v.push(opt.v);
    }
    Ok((w, v))
}

/// Interval `[r* - alpha f'(C*), r*]` that must contain the regularized dual,
/// with `C* = 1 / mu(a*)` for the lowest-index best arm.
pub fn lemma_band(r: &[f64], p: &[f64], spec: &RegularizerSpec, alpha: f64) -> (f64, f64) {
    let (a_star, r_star) = r
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, &x)| if x > acc.1 { (i, x) } else { acc });
    let c_star = 1.0 / p[a_star];
    (r_star - alpha * spec.fprime(c_star), r_star)
}

/// `x*_w(s, a) = 2 d_w(s) / d^{pi_w}(s) - 2` (zero on unvisited states) and
/// its clip to `[-b_x, b_x]`.
pub fn x_star_and_clip(model: &TabularModel, mu: &DataDistribution, w: &SaTable, b_x: f64) -> Result<(SaTable, SaTable)> {
    mu.check_shape(model.n_states(), model.n_actions())?;
    w.check_shape("weights", model.n_states(), model.n_actions())?;
    let (ns, na) = (model.n_states(), model.n_actions());
    let pi = Policy::from_rows_unchecked(ns, na, induced_rows(w, mu.conditional(), 0.0));
    let occ = occupancy_of(model, &pi)?;
    let mut x = SaTable::zeros(ns, na);
    for s in 0..ns {
        let dp = occ.marginal[s];
        if dp <= VISIT_TOL {
            continue;
        }
        let dw: f64 = (0..na).map(|a| w.get(s, a) * mu.mu(s, a)).sum();
        for a in 0..na {
            x.set(s, a, 2.0 * dw / dp - 2.0);
        }
    }
    let clipped = SaTable::from_fn(ns, na, |s, a| x.get(s, a).clamp(-b_x, b_x));
    Ok((x, clipped))
}

/// Solves `u = f_*(x_tilde_w) + gamma P^{pi_w} u` over state-action pairs.
pub fn u_star(model: &TabularModel, mu: &DataDistribution, w: &SaTable, fen: &FenchelPair) -> Result<SaTable> {
    let (_, xt) = x_star_and_clip(model, mu, w, fen.b_x)?;
    let rhs: Vec<f64> = xt.values.iter().map(|&x| fen.f_star(x)).collect();
    let pi = induced_rows(w, mu.conditional(), 0.0);
    let k = sa_kernel(model, &pi);
    let n = model.n_states() * model.n_actions();
    let u = linalg::solve_resolvent(n, model.discount(), &k, &rhs)?;
    SaTable::new(model.n_states(), model.n_actions(), u)
}

/// State-action kernel `K[(s,a), (s',a')] = P(s'|s,a) pi(a'|s')`.
pub(crate) fn sa_kernel(model: &TabularModel, pi: &[f64]) -> Vec<f64> {
    let (ns, na) = (model.n_states(), model.n_actions());
    let n = ns * na;
    let mut k = alloc::vec![0.0; n * n];
    for s in 0..ns {
        for a in 0..na {
            let row = s * na + a;
            for (sn, &p) in model.next_row(s, a).iter().enumerate() {
                if p == 0.0 {
                    continue;
                }
                for an in 0..na {
                    k[row * n + sn * na + an] = p * pi[sn * na + an];
                }
            }
        }
    }
    k
}

/// `(P^{pi_w} u)(s, a) = sum_{s'} P(s'|s,a) sum_{a'} pi_w(a'|s') u(s', a')`.
pub fn propagate(model: &TabularModel, mu: &DataDistribution, w: &SaTable, u: &SaTable) -> Result<SaTable> {
    mu.check_shape(model.n_states(), model.n_actions())?;
    u.check_shape("auxiliary", model.n_states(), model.n_actions())?;
    let pi = Policy::from_rows_unchecked(w.n_states, w.n_actions, induced_rows(w, mu.conditional(), 0.0));
    Ok(model.expect_next(&pi.average(u)))
}

/// `zeta*_{w,u} = -(u - gamma P^{pi_w} u + 1)^{-1/2}` under `model`'s kernel.
pub fn zeta_star(u: &SaTable, model: &TabularModel, mu: &DataDistribution, w: &SaTable) -> Result<SaTable> {
    let pu = propagate(model, mu, w, u)?;
    let g = model.discount();
    let mut z = SaTable::zeros(u.n_states, u.n_actions);
    for (i, (&x, &p)) in u.values.iter().zip(&pu.values).enumerate() {
        let rad = x - g * p + 1.0;
        if !(rad > 0.0) {
            return Err(Error::Domain {
                what: "zeta_star radicand",
                index: i,
                value: rad,
            });
        }
        z.values[i] = -1.0 / libm::sqrt(rad);
    }
    Ok(z)
}

/// `(B_x^2 / 4 + B_x) / (1 - gamma)`.
pub fn u_bound(b_x: f64, gamma: f64) -> f64 {
    (b_x * b_x / 4.0 + b_x) / (1.0 - gamma)
}

/// `[2 / (2 + B_x), 2 / (2 - B_x)]`.
pub fn zeta_band(b_x: f64) -> (f64, f64) {
    (2.0 / (2.0 + b_x), 2.0 / (2.0 - b_x))
}

/// `J(pi*) - J(pi)`.
pub fn suboptimality(model: &TabularModel, policy: &Policy) -> Result<f64> {
    let plan = plan_optimal(model)?;
    Ok(j_value(model, &plan.optimal_policy)? - j_value(model, policy)?)
}

/// Reference quantities for a model, data law, and weight function.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleBundle {
    pub w_star: SaTable,
    pub v_star: DualFn,
    pub x_star: SaTable,
    pub x_tilde: SaTable,
    pub u_star: SaTable,
    pub zeta_star: SaTable,
    pub b_x: f64,
    pub u_bound: f64,
    pub zeta_band: (f64, f64),
}

pub fn oracle_bundle(model: &TabularModel, mu: &DataDistribution, w: &SaTable, fen: &FenchelPair) -> Result<OracleBundle> {
    let plan = plan_optimal(model)?;
    let w_star = occupancy_ratio(model, &plan.optimal_policy, mu)?;
    let (x_star, x_tilde) = x_star_and_clip(model, mu, w, fen.b_x)?;
    let u = u_star(model, mu, w, fen)?;
    let z = zeta_star(&u, model, mu, w)?;
    Ok(OracleBundle {
        w_star,
        v_star: plan.v_star,
        x_star,
        x_tilde,
        u_star: u,
        zeta_star: z,
        b_x: fen.b_x,
        u_bound: u_bound(fen.b_x, model.discount()),
        zeta_band: zeta_band(fen.b_x),
    })
}

/// Population argmax sets with and without the occupancy-validity penalty.
#[derive(Debug, Clone, PartialEq)]
pub struct InvarianceReport {
    pub plain_argmax: Vec<usize>,
    pub penalized_argmax: Vec<usize>,
    /// Members whose penalty vanishes.
    pub feasible: Vec<usize>,
    /// Penalized set equals plain set restricted to feasible members.
    pub holds: bool,
}

/// Tolerance for ties among population values.
const ARGMAX_TOL: f64 = 1e-10;

fn argmax_set(values: &[f64]) -> Vec<usize> {
    let best = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    (0..values.len()).filter(|&i| values[i] >= best - ARGMAX_TOL).collect()
}

pub fn alm_invariance_check(
    model: &TabularModel,
    mu: &DataDistribution,
    w_class: &FiniteClass<SaTable>,
    v_class: &FiniteClass<DualFn>,
) -> Result<InvarianceReport> {
    let mut plain = Vec::with_capacity(w_class.len());
    let mut penalized = Vec::with_capacity(w_class.len());
    let mut feasible = Vec::new();
    for (i, w) in w_class.members().iter().enumerate() {
        let mut lo = f64::INFINITY;
        for v in v_class.members() {
            lo = lo.min(pop_lagrangian(model, mu, w, v)?);
        }
        let pen = alm_penalty(model, mu, w)?;
        if pen <= 1e-12 {
            feasible.push(i);
        }
        plain.push(lo);
        penalized.push(lo - pen);
    }
    let plain_argmax = argmax_set(&plain);
    let penalized_argmax = argmax_set(&penalized);
    let restricted: Vec<usize> = plain_argmax.iter().copied().filter(|i| feasible.contains(i)).collect();
    let holds = !restricted.is_empty() && restricted == penalized_argmax;
    Ok(InvarianceReport {
        plain_argmax,
        penalized_argmax,
        feasible,
        holds,
    })
}
