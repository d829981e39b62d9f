//! Exact population objectives computed by finite sums.

use alloc::vec::Vec;

use super::{e_v, induced_rows, FenchelPair};
use crate::classes::RegularizerSpec;
use crate::data::DataDistribution;
use crate::error::{Error, Result};
use crate::model::{occupancy_of, Policy, TabularModel, VISIT_TOL};
use crate::table::{check_len, SaTable};

fn check(model: &TabularModel, mu: &DataDistribution, w: &SaTable, v: &[f64]) -> Result<()> {
    mu.check_shape(model.n_states(), model.n_actions())?;
    w.check_shape("weights", model.n_states(), model.n_actions())?;
    check_len("dual", v, model.n_states())
}

/// `(1 - gamma) E_rho v + E_mu [w e_v]`.
pub fn pop_lagrangian(model: &TabularModel, mu: &DataDistribution, w: &SaTable, v: &[f64]) -> Result<f64> {
    check(model, mu, w, v)?;
    let e = e_v(model, v)?;
    let start: f64 = model.initial().iter().zip(v).map(|(p, x)| p * x).sum();
    let flow: f64 = (0..w.values.len())
        .map(|i| mu.joint().values[i] * w.values[i] * e.values[i])
        .sum();
    Ok((1.0 - model.discount()) * start + flow)
}

/// Lagrangian minus `alpha E_mu f(w)`.
pub fn pop_pro(
    model: &TabularModel,
    mu: &DataDistribution,
    w: &SaTable,
    v: &[f64],
    alpha: f64,
    spec: &RegularizerSpec,
) -> Result<f64> {
    let l = pop_lagrangian(model, mu, w, v)?;
    let reg: f64 = w
        .values
        .iter()
        .zip(&mu.joint().values)
        .map(|(x, m)| m * spec.f(*x))
        .sum();
    Ok(l - alpha * reg)
}

/// `E_{d^{pi_w}} [(d_w(s) / d^{pi_w}(s) - 1)^2]`; unvisited states contribute 0.
pub fn alm_penalty(model: &TabularModel, mu: &DataDistribution, w: &SaTable) -> Result<f64> {
    let pi = Policy::from_rows_unchecked(w.n_states, w.n_actions, induced_rows(w, mu.conditional(), 0.0));
    let occ = occupancy_of(model, &pi)?;
    let mut acc = 0.0;
    for s in 0..model.n_states() {
        let dp = occ.marginal[s];
        if dp <= VISIT_TOL {
            continue;
        }
        let dw: f64 = (0..model.n_actions()).map(|a| w.get(s, a) * mu.mu(s, a)).sum();
        let q = dw / dp - 1.0;
        acc += dp * q * q;
    }
    Ok(acc)
}

/// Lagrangian minus the occupancy-validity penalty.
pub fn pop_alm(model: &TabularModel, mu: &DataDistribution, w: &SaTable, v: &[f64]) -> Result<f64> {
    Ok(pop_lagrangian(model, mu, w, v)? - alm_penalty(model, mu, w)?)
}

/// `E_mu [w (r - v)] + v - (E_mu w - 1)^2` on a bandit.
pub fn pop_alm_mab(model: &TabularModel, mu: &DataDistribution, w: &SaTable, v: f64) -> Result<f64> {
    if model.n_states() != 1 {
        return Err(Error::DimensionMismatch {
            what: "bandit states",
            expected: 1,
            found: model.n_states(),
        });
    }
    check(model, mu, w, &[v])?;
    let mut lin = 0.0;
    let mut mass = 0.0;
    for a in 0..model.n_actions() {
        let m = mu.mu(0, a) * w.get(0, a);
        lin += m * (model.reward(0, a) - v);
        mass += m;
    }
    Ok(lin + v - (mass - 1.0) * (mass - 1.0))
}

/// `sum_s mu(s) [sum_a mu(a|s) w (r - v(s)) + v(s) - (sum_a mu(a|s) w - 1)^2]`.
pub fn pop_alm_cb(model: &TabularModel, mu: &DataDistribution, w: &SaTable, v: &[f64]) -> Result<f64> {
    check(model, mu, w, v)?;
    let mut acc = 0.0;
    for s in 0..model.n_states() {
        let ms = mu.marginal()[s];
        let mut lin = 0.0;
        let mut norm = 0.0;
        for a in 0..model.n_actions() {
            let cw = mu.cond(s, a) * w.get(s, a);
            lin += cw * (model.reward(s, a) - v[s]);
            norm += cw;
        }
        acc += ms * (lin + v[s] - (norm - 1.0) * (norm - 1.0));
    }
    Ok(acc)
}

struct CoralPop {
    start: f64,
    flow: f64,
    x: SaTable,
}

fn coral_pop(model: &TabularModel, mu: &DataDistribution, w: &SaTable, v: &[f64], u: &SaTable) -> Result<CoralPop> {
    check(model, mu, w, v)?;
    u.check_shape("auxiliary", model.n_states(), model.n_actions())?;
    let (ns, na, g) = (model.n_states(), model.n_actions(), model.discount());
    let pi = induced_rows(w, mu.conditional(), 0.0);
    let u_pi: Vec<f64> = (0..ns)
        .map(|s| (0..na).map(|a| pi[s * na + a] * u.get(s, a)).sum())
        .collect();
    let start: f64 = (0..ns).map(|s| model.initial()[s] * (v[s] + u_pi[s])).sum();
    let pu = model.expect_next(&u_pi);
    let x = SaTable::from_fn(ns, na, |s, a| u.get(s, a) - g * pu.get(s, a));
    let e = e_v(model, v)?;
    let flow = (0..ns * na).map(|i| mu.joint().values[i] * w.values[i] * e.values[i]).sum();
    Ok(CoralPop {
        start: (1.0 - g) * start,
        flow,
        x,
    })
}

/// Model-based population objective under the true kernel.
pub fn pop_coral_mb(
    model: &TabularModel,
    mu: &DataDistribution,
    w: &SaTable,
    v: &[f64],
    u: &SaTable,
    fen: &FenchelPair,
) -> Result<f64> {
    let c = coral_pop(model, mu, w, v, u)?;
    let mut acc = 0.0;
    for (i, &x) in c.x.values.iter().enumerate() {
        let m = mu.joint().values[i] * w.values[i];
        if m == 0.0 {
            continue;
        }
        acc += m * fen.f_star_inv(x)?;
    }
    Ok(c.start + c.flow - acc)
}

/// Model-free population objective with slope `zeta`.
#[allow(clippy::too_many_arguments)]
pub fn pop_coral_mf(
    model: &TabularModel,
    mu: &DataDistribution,
    w: &SaTable,
    v: &[f64],
    u: &SaTable,
    zeta: &SaTable,
    fen: &FenchelPair,
) -> Result<f64> {
    zeta.check_shape("slope", model.n_states(), model.n_actions())?;
    let c = coral_pop(model, mu, w, v, u)?;
    let mut acc = 0.0;
    for (i, &x) in c.x.values.iter().enumerate() {
        let z = zeta.values[i];
        acc += mu.joint().values[i] * w.values[i] * (z * x + fen.g_star(z)?);
    }
    Ok(c.start + c.flow + acc)
}

/// Population objective selector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PopKind {
    Lagrangian,
    Pro { alpha: f64, spec: RegularizerSpec },
    Alm,
    AlmMab,
    AlmCb,
    CoralMb(FenchelPair),
    CoralMf(FenchelPair),
}

/// Arguments of a population objective; `u` and `zeta` only where used.
#[derive(Debug, Clone, Copy)]
pub struct PopArgs<'a> {
    pub w: &'a SaTable,
    pub v: &'a [f64],
    pub u: Option<&'a SaTable>,
    pub zeta: Option<&'a SaTable>,
}

fn need<'a>(x: Option<&'a SaTable>, what: &str) -> Result<&'a SaTable> {
    x.ok_or_else(|| Error::InvalidArgument(alloc::format!("{what} required")))
}

pub fn pop_objective(kind: &PopKind, model: &TabularModel, mu: &DataDistribution, args: &PopArgs<'_>) -> Result<f64> {
    match kind {
        PopKind::Lagrangian => pop_lagrangian(model, mu, args.w, args.v),
        PopKind::Pro { alpha, spec } => pop_pro(model, mu, args.w, args.v, *alpha, spec),
        PopKind::Alm => pop_alm(model, mu, args.w, args.v),
        PopKind::AlmMab => pop_alm_mab(model, mu, args.w, args.v.first().copied().unwrap_or(0.0)),
        PopKind::AlmCb => pop_alm_cb(model, mu, args.w, args.v),
        PopKind::CoralMb(fen) => pop_coral_mb(model, mu, args.w, args.v, need(args.u, "auxiliary")?, fen),
        PopKind::CoralMf(fen) => pop_coral_mf(
            model,
            mu,
            args.w,
            args.v,
            need(args.u, "auxiliary")?,
            need(args.zeta, "slope")?,
            fen,
        ),
    }
}
