//! Lagrangians, Fenchel conjugates, and the weight-induced policy.

mod empirical;
mod population;

pub use empirical::{
    emp_alm_cb, emp_alm_mab, emp_coral_mb, emp_coral_mf, emp_pro_cb, emp_pro_mab, EmpiricalKind, EmpiricalProblem,
    Gradient,
};
pub use population::{
    alm_penalty, pop_alm, pop_alm_cb, pop_alm_mab, pop_coral_mb, pop_coral_mf, pop_lagrangian, pop_objective, pop_pro, PopArgs,
    PopKind,
};

use alloc::vec::Vec;

use crate::data::DataDistribution;
use crate::error::{Error, Result};
use crate::model::{Policy, TabularModel};
use crate::table::{SaTable, WeightFn};

/// `d_w(s, a) = w(s, a) mu(s, a)` with its state marginal and total mass.
#[derive(Debug, Clone, PartialEq)]
pub struct InducedOccupancy {
    pub d_w_joint: SaTable,
    pub d_w_marginal: Vec<f64>,
    pub normalizer: f64,
}

impl InducedOccupancy {
    pub fn new(w: &WeightFn, mu: &DataDistribution) -> Result<Self> {
        w.check_shape("weights", mu.n_states(), mu.n_actions())?;
        let joint = SaTable::from_fn(w.n_states, w.n_actions, |s, a| w.get(s, a) * mu.mu(s, a));
        let marginal: Vec<f64> = (0..w.n_states).map(|s| joint.row(s).iter().sum()).collect();
        let normalizer = marginal.iter().sum();
        Ok(Self {
            d_w_joint: joint,
            d_w_marginal: marginal,
            normalizer,
        })
    }
}

/// `pi_w(a|s) proportional to w(s, a) mu(a|s)`, uniform where the normalizer vanishes.
pub fn policy_from_weights(w: &WeightFn, mu: &DataDistribution) -> Result<Policy> {
    w.check_shape("weights", mu.n_states(), mu.n_actions())?;
    Ok(Policy::from_rows_unchecked(
        w.n_states,
        w.n_actions,
        induced_rows(w, mu.conditional(), 0.0),
    ))
}

/// Row-major `pi_w`; denominators at or below `floor` use the uniform row
/// when `floor == 0`, otherwise they are raised to `floor`.
pub(crate) fn induced_rows(w: &SaTable, cond: &SaTable, floor: f64) -> Vec<f64> {
    let na = w.n_actions;
    let mut out = Vec::with_capacity(w.values.len());
    for s in 0..w.n_states {
        let den: f64 = (0..na).map(|a| w.get(s, a) * cond.get(s, a)).sum();
        if den > floor {
            out.extend((0..na).map(|a| w.get(s, a) * cond.get(s, a) / den));
        } else if floor > 0.0 {
            out.extend((0..na).map(|a| w.get(s, a) * cond.get(s, a) / floor));
        } else {
            out.extend(core::iter::repeat_n(1.0 / na as f64, na));
        }
    }
    out
}

/// Bellman residual `e_v(s, a) = r(s, a) + gamma (P v)(s, a) - v(s)`.
pub fn e_v(model: &TabularModel, v: &[f64]) -> Result<SaTable> {
    crate::table::check_len("dual", v, model.n_states())?;
    let mut q = model.backup(v);
    for s in 0..model.n_states() {
        for a in 0..model.n_actions() {
            let x = q.get(s, a) - v[s];
            q.set(s, a, x);
        }
    }
    Ok(q)
}

/// Fenchel toolkit for the squared-ratio divergence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FenchelPair {
    /// Clip level for `x` in oracle constructions.
    pub b_x: f64,
}

/// Which closed form [`fenchel_eval`] computes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FenchelFn {
    FStar,
    FStarInv,
    GStar,
}

impl FenchelPair {
    /// Default clip level `(1 - gamma) / 4`.
    pub fn for_discount(gamma: f64) -> Self {
        Self {
            b_x: (1.0 - gamma) / 4.0,
        }
    }

    /// `f_*(x) = ((x + 2) / 2)^2 - 1`.
    #[inline]
    pub fn f_star(&self, x: f64) -> f64 {
        let h = (x + 2.0) / 2.0;
        h * h - 1.0
    }

    /// `f_*^{-1}(x) = 2 sqrt(x + 1) - 2`, defined for `x >= -1`.
    pub fn f_star_inv(&self, x: f64) -> Result<f64> {
        if !(x >= -1.0) {
            return Err(Error::Domain {
                what: "f_star_inv",
                index: 0,
                value: x,
            });
        }
        Ok(2.0 * libm::sqrt(x + 1.0) - 2.0)
    }

    /// `g_*(x) = x + 2 + 1/x`, defined for `x < 0`.
    pub fn g_star(&self, x: f64) -> Result<f64> {
        if !(x < 0.0) {
            return Err(Error::Domain {
                what: "g_star",
                index: 0,
                value: x,
            });
        }
        Ok(x + 2.0 + 1.0 / x)
    }
}

pub fn fenchel_eval(fen: &FenchelPair, which: FenchelFn, x: f64) -> Result<f64> {
    match which {
        FenchelFn::FStar => Ok(fen.f_star(x)),
        FenchelFn::FStarInv => fen.f_star_inv(x),
        FenchelFn::GStar => fen.g_star(x),
    }
}
