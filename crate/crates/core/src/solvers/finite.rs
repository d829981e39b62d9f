//! Exact enumeration of `max_w min_v min_u max_zeta` over finite classes.

use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Member indices into `W, V, U, Z`; absent classes use index 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Choice {
    pub w: usize,
    pub v: usize,
    pub u: usize,
    pub z: usize,
}

/// Class sizes; absent classes count as singletons.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Dims {
    pub w: usize,
    pub v: usize,
    pub u: usize,
    pub z: usize,
}

impl Dims {
    pub fn check(&self) -> Result<()> {
        for (n, name) in [(self.w, "W"), (self.v, "V"), (self.u, "U"), (self.z, "Z")] {
            if n == 0 {
                return Err(Error::EmptyClass(name));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FiniteOutcome {
    pub choice: Choice,
    pub value: f64,
    /// `min_v min_u max_zeta` value of every `w`.
    pub member_values: Vec<f64>,
}

fn finite(x: f64) -> Result<f64> {
    if x.is_nan() {
        Err(Error::NonFiniteObjective)
    } else {
        Ok(x)
    }
}

/// Inner optimum for a fixed outer member; ties go to the lowest index.
pub fn inner_optimum<F>(dims: Dims, w: usize, eval: &mut F) -> Result<(f64, Choice)>
where
    F: FnMut(Choice) -> Result<f64>,
{
    let mut best_v = (f64::INFINITY, Choice { w, ..Choice::default() });
    for v in 0..dims.v {
        let mut best_u = (f64::INFINITY, Choice::default());
        for u in 0..dims.u {
            let mut best_z = (f64::NEG_INFINITY, Choice::default());
            for z in 0..dims.z {
                let c = Choice { w, v, u, z };
                let x = finite(eval(c)?)?;
                if z == 0 || x > best_z.0 {
                    best_z = (x, c);
                }
            }
            if u == 0 || best_z.0 < best_u.0 {
                best_u = best_z;
            }
        }
        if v == 0 || best_u.0 < best_v.0 {
            best_v = best_u;
        }
    }
    Ok(best_v)
}

/// Picks the outer maximizer from per-member inner optima, lowest index on ties.
pub fn select_outer(inner: &[(f64, Choice)]) -> Result<FiniteOutcome> {
    if inner.is_empty() {
        return Err(Error::EmptyClass("W"));
    }
    let mut best = 0;
    for (i, r) in inner.iter().enumerate().skip(1) {
        if r.0 > inner[best].0 {
            best = i;
        }
    }
    Ok(FiniteOutcome {
        choice: inner[best].1,
        value: inner[best].0,
        member_values: inner.iter().map(|r| r.0).collect(),
    })
}

/// Nested enumeration in the order `max_w min_v min_u max_zeta`.
pub fn solve_finite<F>(dims: Dims, mut eval: F) -> Result<FiniteOutcome>
where
    F: FnMut(Choice) -> Result<f64>,
{
    dims.check()?;
    let inner = (0..dims.w)
        .map(|w| inner_optimum(dims, w, &mut eval))
        .collect::<Result<Vec<_>>>()?;
    select_outer(&inner)
}
