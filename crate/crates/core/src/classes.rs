//! Hypothesis classes, regularizers, and the regularization schedule.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::table::{DualFn, SaTable};

/// Convex behavior regularizer `f`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegularizerKind {
    /// `f(x) = (x - 1)^2`
    ShiftedSquare,
    /// `f(x) = x^2`
    PlainSquare,
}

/// Regularizer together with the weight bound that fixes its working range.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegularizerSpec {
    pub kind: RegularizerKind,
    pub b_w: f64,
}

impl RegularizerSpec {
    pub fn new(kind: RegularizerKind, b_w: f64) -> Result<Self> {
        if !(b_w > 0.0) || !b_w.is_finite() {
            return Err(Error::InvalidArgument(format!("weight bound {b_w} must be positive")));
        }
        Ok(Self { kind, b_w })
    }

    #[inline]
    pub fn f(&self, x: f64) -> f64 {
        match self.kind {
            RegularizerKind::ShiftedSquare => (x - 1.0) * (x - 1.0),
            RegularizerKind::PlainSquare => x * x,
        }
    }

    #[inline]
    pub fn fprime(&self, x: f64) -> f64 {
        match self.kind {
            RegularizerKind::ShiftedSquare => 2.0 * (x - 1.0),
            RegularizerKind::PlainSquare => 2.0 * x,
        }
    }

    #[inline]
    pub fn inv_fprime(&self, y: f64) -> f64 {
        match self.kind {
            RegularizerKind::ShiftedSquare => y / 2.0 + 1.0,
            RegularizerKind::PlainSquare => y / 2.0,
        }
    }

    /// Strong convexity modulus.
    pub fn m_f(&self) -> f64 {
        2.0
    }

    /// `sup |f|` over `[0, B_w]`.
    pub fn b_f(&self) -> f64 {
        self.f(0.0).abs().max(self.f(self.b_w).abs())
    }

    /// `sup |f'|` over `[0, B_w]`.
    pub fn b_fprime(&self) -> f64 {
        self.fprime(0.0).abs().max(self.fprime(self.b_w).abs())
    }
}

pub fn regularizer_eval(spec: &RegularizerSpec, x: f64) -> (f64, f64) {
    (spec.f(x), spec.fprime(x))
}

pub fn regularizer_inv_derivative(spec: &RegularizerSpec, y: f64) -> f64 {
    spec.inv_fprime(y)
}

/// Regularization level `16((B_w+1)(B_v+1)+B_f)/M_f * sqrt(ln(|V||W|/delta)/n)`.
#[allow(clippy::too_many_arguments)]
pub fn alpha_schedule(
    b_w: f64,
    b_v: f64,
    b_f: f64,
    m_f: f64,
    card_w: usize,
    card_v: usize,
    delta: f64,
    n: usize,
) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidArgument("n must be at least 1".into()));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidArgument(format!("delta {delta} outside (0, 1)")));
    }
    if !(b_w > 0.0 && b_v > 0.0 && b_f > 0.0 && m_f > 0.0) || card_w == 0 || card_v == 0 {
        return Err(Error::InvalidArgument("bounds and cardinalities must be positive".into()));
    }
    let c = 16.0 * ((b_w + 1.0) * (b_v + 1.0) + b_f) / m_f;
    let log_term = libm::log((card_v as f64) * (card_w as f64) / delta);
    Ok(c * libm::sqrt(log_term / n as f64))
}

/// Closed box `[lower, upper]` shared by every entry of every member.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounds {
    pub lower: f64,
    pub upper: f64,
}

impl Bounds {
    pub fn new(lower: f64, upper: f64) -> Result<Self> {
        if !(lower <= upper) || !lower.is_finite() || !upper.is_finite() {
            return Err(Error::InvalidArgument(format!("invalid bounds [{lower}, {upper}]")));
        }
        Ok(Self { lower, upper })
    }

    pub fn weight(b_w: f64) -> Result<Self> {
        Self::new(0.0, b_w)
    }

    pub fn symmetric(b: f64) -> Result<Self> {
        Self::new(-b, b)
    }

    /// Slopes live in `[-B_zeta_U, -B_zeta_L]` with `B_zeta_L > 0`.
    pub fn slope(b_lower: f64, b_upper: f64) -> Result<Self> {
        if !(b_lower > 0.0) {
            return Err(Error::InvalidArgument("slope lower magnitude must be positive".into()));
        }
        Self::new(-b_upper, -b_lower)
    }

    #[inline]
    pub fn contains(&self, x: f64) -> bool {
        x >= self.lower && x <= self.upper
    }

    #[inline]
    pub fn clip(&self, x: f64) -> f64 {
        x.clamp(self.lower, self.upper)
    }
}

/// First entry of a member that leaves its box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Violation {
    pub entry: usize,
    pub value: f64,
}

/// Checks every entry against the box; reports the first violation.
pub fn validate(values: &[f64], bounds: &Bounds) -> core::result::Result<(), Violation> {
    match values.iter().position(|&x| !bounds.contains(x)) {
        Some(entry) => Err(Violation {
            entry,
            value: values[entry],
        }),
        None => Ok(()),
    }
}

/// Anything whose entries can be box-checked.
pub trait Member {
    fn entries(&self) -> &[f64];
}

impl Member for SaTable {
    fn entries(&self) -> &[f64] {
        &self.values
    }
}

impl Member for Vec<f64> {
    fn entries(&self) -> &[f64] {
        self
    }
}

/// Ordered, nonempty list of functions sharing one box.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteClass<T> {
    members: Vec<T>,
    bounds: Bounds,
}

impl<T: Member> FiniteClass<T> {
    pub fn new(name: &'static str, members: Vec<T>, bounds: Bounds) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::EmptyClass(name));
        }
        for (m, member) in members.iter().enumerate() {
            if let Err(v) = validate(member.entries(), &bounds) {
                return Err(Error::BoundViolation {
                    member: m,
                    entry: v.entry,
                    value: v.value,
                    lower: bounds.lower,
                    upper: bounds.upper,
                });
            }
        }
        Ok(Self { members, bounds })
    }

    pub fn members(&self) -> &[T] {
        &self.members
    }

    pub fn get(&self, i: usize) -> &T {
        &self.members[i]
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn bounds(&self) -> Bounds {
        self.bounds
    }

    /// Keeps members satisfying `keep`; errors when none survive.
    pub fn filter(&self, name: &'static str, mut keep: impl FnMut(&T) -> bool) -> Result<Self>
    where
        T: Clone,
    {
        let members: Vec<T> = self.members.iter().filter(|m| keep(m)).cloned().collect();
        Self::new(name, members, self.bounds)
    }
}

/// `count` evenly spaced levels from `lower` to `upper` inclusive.
pub fn linspace(lower: f64, upper: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![lower],
        _ => (0..count)
            .map(|i| lower + (upper - lower) * i as f64 / (count - 1) as f64)
            .collect(),
    }
}

fn cartesian(cells: usize, levels: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = vec![Vec::with_capacity(cells)];
    for lv in levels.iter().take(cells) {
        let mut next = Vec::with_capacity(out.len() * lv.len());
        for prefix in &out {
            for &x in lv {
                let mut p = prefix.clone();
                p.push(x);
                next.push(p);
            }
        }
        out = next;
    }
    out
}

/// Cartesian grid over `(s, a)` cells; the last cell varies fastest.
/// `levels` holds one level list per cell, or a single list shared by all.
pub fn build_tabular_grid_class(
    n_states: usize,
    n_actions: usize,
    bounds: Bounds,
    levels: &[Vec<f64>],
) -> Result<FiniteClass<SaTable>> {
    let cells = n_states * n_actions;
    let per_cell = expand_levels(cells, bounds, levels)?;
    let members = cartesian(cells, &per_cell)
        .into_iter()
        .map(|v| SaTable::new(n_states, n_actions, v))
        .collect::<Result<Vec<_>>>()?;
    FiniteClass::new("grid", members, bounds)
}

/// Cartesian grid over states for dual functions.
pub fn build_state_grid_class(n_states: usize, bounds: Bounds, levels: &[Vec<f64>]) -> Result<FiniteClass<DualFn>> {
    let per_cell = expand_levels(n_states, bounds, levels)?;
    FiniteClass::new("grid", cartesian(n_states, &per_cell), bounds)
}

fn expand_levels(cells: usize, bounds: Bounds, levels: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    if cells == 0 {
        return Err(Error::InvalidArgument("grid shape is empty".into()));
    }
    let per_cell: Vec<Vec<f64>> = match levels.len() {
        1 => vec![levels[0].clone(); cells],
        n if n == cells => levels.to_vec(),
        n => {
            return Err(Error::DimensionMismatch {
                what: "grid levels",
                expected: cells,
                found: n,
            })
        }
    };
    per_cell
        .into_iter()
        .map(|lv| {
            if lv.is_empty() {
                return Err(Error::InvalidArgument("grid needs at least one level".into()));
            }
            let mut out: Vec<f64> = Vec::with_capacity(lv.len());
            for x in lv {
                let c = bounds.clip(x);
                if !out.contains(&c) {
                    out.push(c);
                }
            }
            Ok(out)
        })
        .collect()
}

/// Transition-model class used by the model-based learner.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelClass {
    /// Explicit kernels laid out like [`crate::model::TabularModel::transitions`].
    Finite(Vec<Vec<f64>>),
    /// All kernels; fitted by smoothed counts.
    Tabular,
}

/// The classes `W, V` and the optional `U, Z, P` consumed by the solvers.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassSet {
    pub w: FiniteClass<SaTable>,
    pub v: FiniteClass<DualFn>,
    pub u: Option<FiniteClass<SaTable>>,
    pub z: Option<FiniteClass<SaTable>>,
    pub p: Option<ModelClass>,
}

impl ClassSet {
    pub fn new(w: FiniteClass<SaTable>, v: FiniteClass<DualFn>) -> Self {
        Self {
            w,
            v,
            u: None,
            z: None,
            p: None,
        }
    }

    /// Every member must match the `(S, A)` shape.
    pub fn check_shape(&self, n_states: usize, n_actions: usize) -> Result<()> {
        for w in self.w.members() {
            w.check_shape("weight member", n_states, n_actions)?;
        }
        for v in self.v.members() {
            crate::table::check_len("dual member", v, n_states)?;
        }
        for c in [&self.u, &self.z].into_iter().flatten() {
            for m in c.members() {
                m.check_shape("auxiliary member", n_states, n_actions)?;
            }
        }
        if let Some(ModelClass::Finite(ps)) = &self.p {
            for p in ps {
                crate::table::check_len("model member", p, n_states * n_actions * n_states)?;
            }
        }
        Ok(())
    }
}
