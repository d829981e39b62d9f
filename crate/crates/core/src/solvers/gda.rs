//! Projected gradient descent-ascent over box-constrained blocks.

use alloc::vec;
use alloc::vec::Vec;

use crate::classes::{linspace, Bounds};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Max,
    Min,
}

/// A parameter block: every entry shares one box and one role.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Block {
    pub role: Role,
    pub len: usize,
    pub bounds: Bounds,
}

/// A saddle objective with block gradients.
pub trait SaddleObjective {
    fn blocks(&self) -> Vec<Block>;
    fn value(&self, x: &[Vec<f64>]) -> Result<f64>;
    fn gradient(&self, x: &[Vec<f64>]) -> Result<Vec<Vec<f64>>>;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GdaConfig {
    pub steps: usize,
    pub step_size_primal: f64,
    pub step_size_dual: f64,
    /// Average the second half of the iterates.
    pub averaging: bool,
    pub tol: f64,
    pub probe_levels: usize,
    /// Number of intermediate gap checks.
    pub checkpoints: usize,
}

impl Default for GdaConfig {
    fn default() -> Self {
        Self {
            steps: 10_000,
            step_size_primal: 0.05,
            step_size_dual: 0.05,
            averaging: true,
            tol: 1e-3,
            probe_levels: 5,
            checkpoints: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TracePoint {
    pub step: usize,
    pub value: f64,
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GdaOutcome {
    pub point: Vec<Vec<f64>>,
    pub value: f64,
    pub gap: f64,
    pub converged: bool,
    pub steps_run: usize,
    pub trace: Vec<TracePoint>,
}

/// Product grids larger than this fall back to coordinate sweeps.
const GRID_CAP: usize = 100_000;
const SWEEPS: usize = 3;

fn midpoint(blocks: &[Block]) -> Vec<Vec<f64>> {
    blocks
        .iter()
        .map(|b| vec![0.5 * (b.bounds.lower + b.bounds.upper); b.len])
        .collect()
}

/// Runs simultaneous projected GDA from `init` (box midpoints when absent).
pub fn solve_gda<O: SaddleObjective + ?Sized>(
    obj: &O,
    init: Option<Vec<Vec<f64>>>,
    cfg: &GdaConfig,
) -> Result<GdaOutcome> {
    let blocks = obj.blocks();
    let mut x = init.unwrap_or_else(|| midpoint(&blocks));
    if x.len() != blocks.len() || x.iter().zip(&blocks).any(|(v, b)| v.len() != b.len) {
        return Err(Error::DimensionMismatch {
            what: "initial point blocks",
            expected: blocks.len(),
            found: x.len(),
        });
    }
    for (v, b) in x.iter_mut().zip(&blocks) {
        for e in v.iter_mut() {
            *e = b.bounds.clip(*e);
        }
    }
    let mut avg: Vec<Vec<f64>> = x.iter().map(|v| vec![0.0; v.len()]).collect();
    let mut count = 0usize;
    let start_avg = cfg.steps / 2;
    let every = if cfg.checkpoints == 0 {
        usize::MAX
    } else {
        (cfg.steps / cfg.checkpoints).max(1)
    };
    let mut trace = Vec::new();
    let mut steps_run = 0;
    for t in 0..cfg.steps {
        let g = obj.gradient(&x)?;
        if g.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteGradient { iteration: t });
        }
        for ((xb, gb), b) in x.iter_mut().zip(&g).zip(&blocks) {
            let step = match b.role {
                Role::Max => cfg.step_size_primal,
                Role::Min => -cfg.step_size_dual,
            };
            for (e, d) in xb.iter_mut().zip(gb) {
                *e = b.bounds.clip(*e + step * d);
            }
        }
        steps_run = t + 1;
        if !cfg.averaging || t >= start_avg {
            count += 1;
            let k = count as f64;
            for (ab, xb) in avg.iter_mut().zip(&x) {
                for (a, v) in ab.iter_mut().zip(xb) {
                    *a += (v - *a) / k;
                }
            }
        }
        if steps_run % every == 0 && steps_run < cfg.steps && count > 0 {
            let p = if cfg.averaging { &avg } else { &x };
            let gap = duality_gap(obj, &blocks, p, cfg.probe_levels)?;
            trace.push(TracePoint {
                step: steps_run,
                value: obj.value(p)?,
                gap,
            });
            if gap < cfg.tol {
                break;
            }
        }
    }
    let point = if cfg.averaging && count > 0 { avg } else { x };
    let value = obj.value(&point)?;
    let gap = duality_gap(obj, &blocks, &point, cfg.probe_levels)?;
    trace.push(TracePoint {
        step: steps_run,
        value,
        gap,
    });
    Ok(GdaOutcome {
        point,
        value,
        gap,
        converged: gap < cfg.tol,
        steps_run,
        trace,
    })
}

/// `max_{max-blocks} L - min_{min-blocks} L` around `point`, searched over a
/// probe grid of each entry's box plus its current value.
pub fn duality_gap<O: SaddleObjective + ?Sized>(
    obj: &O,
    blocks: &[Block],
    point: &[Vec<f64>],
    levels: usize,
) -> Result<f64> {
    let hi = best_response(obj, blocks, point, levels, Role::Max)?;
    let lo = best_response(obj, blocks, point, levels, Role::Min)?;
    Ok(hi - lo)
}

fn best_response<O: SaddleObjective + ?Sized>(
    obj: &O,
    blocks: &[Block],
    point: &[Vec<f64>],
    levels: usize,
    role: Role,
) -> Result<f64> {
    let better = |a: f64, b: f64| match role {
        Role::Max => a > b,
        Role::Min => a < b,
    };
    let mut coords: Vec<(usize, usize, Vec<f64>)> = Vec::new();
    for (bi, b) in blocks.iter().enumerate() {
        if b.role != role {
            continue;
        }
        for e in 0..b.len {
            let mut lv = linspace(b.bounds.lower, b.bounds.upper, levels.max(1));
            lv.push(point[bi][e]);
            coords.push((bi, e, lv));
        }
    }
    let mut x = point.to_vec();
    let mut best = obj.value(&x)?;
    if coords.is_empty() {
        return Ok(best);
    }
    let total = coords
        .iter()
        .try_fold(1usize, |acc, c| acc.checked_mul(c.2.len()))
        .unwrap_or(usize::MAX);
    if total <= GRID_CAP {
        let mut idx = vec![0usize; coords.len()];
        loop {
            for (k, (bi, e, lv)) in coords.iter().enumerate() {
                x[*bi][*e] = lv[idx[k]];
            }
            let val = obj.value(&x)?;
            if better(val, best) {
                best = val;
            }
            let mut k = 0;
            loop {
                idx[k] += 1;
                if idx[k] < coords[k].2.len() {
                    break;
                }
                idx[k] = 0;
                k += 1;
                if k == coords.len() {
                    return Ok(best);
                }
            }
        }
    }
    for _ in 0..SWEEPS {
        for (bi, e, lv) in &coords {
            let keep = x[*bi][*e];
            let mut arg = keep;
            for &l in lv {
                x[*bi][*e] = l;
                let val = obj.value(&x)?;
                if better(val, best) {
                    best = val;
                    arg = l;
                }
            }
            x[*bi][*e] = arg;
        }
    }
    Ok(best)
}
