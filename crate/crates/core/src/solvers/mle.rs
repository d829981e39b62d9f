//! Maximum-likelihood transition fitting.

use alloc::vec::Vec;

use crate::classes::ModelClass;
use crate::data::DatasetSummary;
use crate::error::{Error, Result};
use crate::table::check_len;

/// Additive smoothing used by the tabular fit.
pub const SMOOTHING: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub struct MleFit {
    pub transitions: Vec<f64>,
    /// Selected member for finite classes.
    pub index: Option<usize>,
    pub log_likelihood: f64,
}

/// `sum_i ln P(s'_i | s_i, a_i)`; `-inf` when an observed transition has probability 0.
pub fn log_likelihood(dm: &DatasetSummary, p: &[f64]) -> Result<f64> {
    check_len("model member", p, dm.next_counts.len())?;
    let mut acc = 0.0;
    for (&k, &q) in dm.next_counts.iter().zip(p) {
        if k == 0 {
            continue;
        }
        if q <= 0.0 {
            return Ok(f64::NEG_INFINITY);
        }
        acc += k as f64 * libm::log(q);
    }
    Ok(acc)
}

/// `(n(s,a,s') + lambda) / (n(s,a) + lambda |S|)`; unseen pairs are uniform.
pub fn smoothed_frequencies(dm: &DatasetSummary, lambda: f64) -> Vec<f64> {
    let ns = dm.n_states;
    let mut out = Vec::with_capacity(dm.next_counts.len());
    for i in 0..dm.n_states * dm.n_actions {
        let n = dm.counts[i] as f64;
        let row = &dm.next_counts[i * ns..(i + 1) * ns];
        if dm.counts[i] == 0 {
            out.extend(core::iter::repeat_n(1.0 / ns as f64, ns));
        } else {
            out.extend(row.iter().map(|&k| (k as f64 + lambda) / (n + lambda * ns as f64)));
        }
    }
    out
}

pub fn mle_transitions(dm: &DatasetSummary, class: &ModelClass) -> Result<MleFit> {
    match class {
        ModelClass::Tabular => {
            let transitions = smoothed_frequencies(dm, SMOOTHING);
            let log_likelihood = log_likelihood(dm, &transitions)?;
            Ok(MleFit {
                transitions,
                index: None,
                log_likelihood,
            })
        }
        ModelClass::Finite(members) => {
            if members.is_empty() {
                return Err(Error::EmptyClass("P"));
            }
            if dm.n == 0 {
                return Err(Error::EmptyDataset);
            }
            let mut best: Option<(usize, f64)> = None;
            for (i, p) in members.iter().enumerate() {
                let ll = log_likelihood(dm, p)?;
                if ll == f64::NEG_INFINITY {
                    continue;
                }
                if best.is_none_or(|(_, b)| ll > b) {
                    best = Some((i, ll));
                }
            }
            let (i, ll) = best.ok_or(Error::ZeroLikelihood)?;
            Ok(MleFit {
                transitions: members[i].clone(),
                index: Some(i),
                log_likelihood: ll,
            })
        }
    }
}
