use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// A dense table indexed by (state, action), stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SaTable {
    pub n_states: usize,
    pub n_actions: usize,
    pub values: Vec<f64>,
}

impl SaTable {
    pub fn new(n_states: usize, n_actions: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n_states * n_actions {
            return Err(Error::DimensionMismatch {
                what: "state-action table",
                expected: n_states * n_actions,
                found: values.len(),
            });
        }
        Ok(Self {
            n_states,
            n_actions,
            values,
        })
    }

    pub fn filled(n_states: usize, n_actions: usize, value: f64) -> Self {
        Self {
            n_states,
            n_actions,
            values: vec![value; n_states * n_actions],
        }
    }

    pub fn zeros(n_states: usize, n_actions: usize) -> Self {
        Self::filled(n_states, n_actions, 0.0)
    }

    pub fn from_fn(n_states: usize, n_actions: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut values = Vec::with_capacity(n_states * n_actions);
        for s in 0..n_states {
            for a in 0..n_actions {
                values.push(f(s, a));
            }
        }
        Self {
            n_states,
            n_actions,
            values,
        }
    }

    #[inline]
    pub fn get(&self, s: usize, a: usize) -> f64 {
        self.values[s * self.n_actions + a]
    }

    #[inline]
    pub fn set(&mut self, s: usize, a: usize, v: f64) {
        self.values[s * self.n_actions + a] = v;
    }

    #[inline]
    pub fn row(&self, s: usize) -> &[f64] {
        &self.values[s * self.n_actions..(s + 1) * self.n_actions]
    }

    pub fn same_shape(&self, n_states: usize, n_actions: usize) -> bool {
        self.n_states == n_states && self.n_actions == n_actions
    }

    pub(crate) fn check_shape(&self, what: &'static str, n_states: usize, n_actions: usize) -> Result<()> {
        if self.same_shape(n_states, n_actions) && self.values.len() == n_states * n_actions {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                what,
                expected: n_states * n_actions,
                found: self.n_states * self.n_actions,
            })
        }
    }
}

/// Weight function `w(s, a) >= 0`.
pub type WeightFn = SaTable;
/// Auxiliary function `u(s, a)`.
pub type AuxFn = SaTable;
/// Slope function `zeta(s, a) < 0`.
pub type SlopeFn = SaTable;
/// Dual function `v(s)`.
pub type DualFn = Vec<f64>;

pub(crate) fn check_len<T>(what: &'static str, v: &[T], n: usize) -> Result<()> {
    if v.len() == n {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            what,
            expected: n,
            found: v.len(),
        })
    }
}
