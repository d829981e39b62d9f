//! Saddle-point solvers over function classes and transition fitting.

mod finite;
mod gda;
mod mle;

pub use finite::{inner_optimum, select_outer, solve_finite, Choice, Dims, FiniteOutcome};
pub use gda::{duality_gap, solve_gda, Block, GdaConfig, GdaOutcome, Role, SaddleObjective, TracePoint};
pub use mle::{log_likelihood, mle_transitions, smoothed_frequencies, MleFit, SMOOTHING};

use alloc::vec;
use alloc::vec::Vec;

use crate::classes::{Bounds, ClassSet, ModelClass};
use crate::data::{DataDistribution, DatasetSummary, InitialSummary};
use crate::error::{Error, Result};
use crate::model::Policy;
use crate::objectives::{policy_from_weights, EmpiricalKind, EmpiricalProblem, FenchelPair};
use crate::table::{DualFn, SaTable};

/// Solver-specific diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub enum Diagnostics {
    Finite { member_values: Vec<f64> },
    Gradient { steps_run: usize, gap: f64, converged: bool, trace: Vec<TracePoint> },
}

/// Chosen functions, objective value, and induced policy.
#[derive(Debug, Clone, PartialEq)]
pub struct SaddleSolution {
    pub w: SaTable,
    pub v: DualFn,
    pub u: Option<SaTable>,
    pub zeta: Option<SaTable>,
    /// Member indices in finite mode.
    pub indices: Option<Choice>,
    pub objective_value: f64,
    pub policy: Policy,
    /// Fitted kernel and its class index for the model-based learner.
    pub p_hat: Option<MleFit>,
    pub diagnostics: Diagnostics,
}

/// Everything an empirical solve consumes besides the classes.
#[derive(Debug, Clone, Copy)]
pub struct SolveInputs<'a> {
    pub kind: EmpiricalKind,
    pub data: &'a DatasetSummary,
    pub initial: Option<&'a InitialSummary>,
    pub model_data: Option<&'a DatasetSummary>,
    pub mu: &'a DataDistribution,
    pub gamma: f64,
    pub fen: FenchelPair,
}

impl<'a> SolveInputs<'a> {
    /// Checks shapes and that every block the objective needs is present.
    pub fn validate(&self, u_present: bool, z_present: bool) -> Result<()> {
        let (ns, na) = (self.mu.n_states(), self.mu.n_actions());
        if self.data.n_states != ns || self.data.n_actions != na {
            return Err(Error::DimensionMismatch {
                what: "dataset shape",
                expected: ns * na,
                found: self.data.n_states * self.data.n_actions,
            });
        }
        if self.data.n == 0 {
            return Err(Error::EmptyDataset);
        }
        if self.kind.is_bandit() && ns != 1 {
            return Err(Error::InvalidArgument("bandit objectives need a single state".into()));
        }
        if self.kind.needs_u() {
            if !u_present {
                return Err(Error::InvalidArgument("this objective needs an auxiliary class U".into()));
            }
            match self.initial {
                Some(d0) if d0.n > 0 && d0.counts.len() == ns => {}
                _ => return Err(Error::InvalidArgument("this objective needs initial-state data".into())),
            }
        }
        if self.kind.needs_z() && !z_present {
            return Err(Error::InvalidArgument("this objective needs a slope class Z".into()));
        }
        if matches!(self.kind, EmpiricalKind::CoralMb) && self.model_data.is_none() {
            return Err(Error::InvalidArgument("this objective needs model data".into()));
        }
        Ok(())
    }

    fn fit(&self, class: Option<&ModelClass>) -> Result<Option<MleFit>> {
        if !matches!(self.kind, EmpiricalKind::CoralMb) {
            return Ok(None);
        }
        let dm = self
            .model_data
            .ok_or_else(|| Error::InvalidArgument("this objective needs model data".into()))?;
        Ok(Some(mle_transitions(dm, class.unwrap_or(&ModelClass::Tabular))?))
    }

    fn problem<'b>(&'b self, p_hat: Option<&'b [f64]>) -> EmpiricalProblem<'b> {
        EmpiricalProblem {
            kind: self.kind,
            data: self.data,
            initial: self.initial,
            mu: self.mu,
            p_hat,
            gamma: self.gamma,
            fen: self.fen,
        }
    }
}

/// Class sizes of a class set, absent classes counting as singletons.
pub fn class_dims(classes: &ClassSet, kind: &EmpiricalKind) -> Dims {
    Dims {
        w: classes.w.len(),
        v: classes.v.len(),
        u: if kind.needs_u() { classes.u.as_ref().map_or(0, |c| c.len()) } else { 1 },
        z: if kind.needs_z() { classes.z.as_ref().map_or(0, |c| c.len()) } else { 1 },
    }
}

/// Prepared finite-mode solve; evaluation is pure so outer members may be
/// processed in any order or concurrently.
pub struct FiniteProblem<'a> {
    inputs: SolveInputs<'a>,
    classes: &'a ClassSet,
    fit: Option<MleFit>,
    dims: Dims,
}

impl<'a> FiniteProblem<'a> {
    pub fn new(inputs: SolveInputs<'a>, classes: &'a ClassSet) -> Result<Self> {
        inputs.validate(classes.u.is_some(), classes.z.is_some())?;
        classes.check_shape(inputs.mu.n_states(), inputs.mu.n_actions())?;
        let dims = class_dims(classes, &inputs.kind);
        dims.check()?;
        let fit = inputs.fit(classes.p.as_ref())?;
        Ok(Self {
            inputs,
            classes,
            fit,
            dims,
        })
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn eval(&self, c: Choice) -> Result<f64> {
        let p = self.inputs.problem(self.fit.as_ref().map(|f| f.transitions.as_slice()));
        let u = if self.inputs.kind.needs_u() {
            self.classes.u.as_ref().map(|k| k.get(c.u))
        } else {
            None
        };
        let z = if self.inputs.kind.needs_z() {
            self.classes.z.as_ref().map(|k| k.get(c.z))
        } else {
            None
        };
        p.value(self.classes.w.get(c.w), self.classes.v.get(c.v), u, z)
    }

    /// Inner optimum for one outer member.
    pub fn inner(&self, w: usize) -> Result<(f64, Choice)> {
        inner_optimum(self.dims, w, &mut |c| self.eval(c))
    }

    /// Assembles the solution from an enumeration outcome.
    pub fn finish(self, out: FiniteOutcome) -> Result<SaddleSolution> {
        let c = out.choice;
        let w = self.classes.w.get(c.w).clone();
        let policy = policy_from_weights(&w, self.inputs.mu)?;
        Ok(SaddleSolution {
            v: self.classes.v.get(c.v).clone(),
            u: if self.inputs.kind.needs_u() {
                self.classes.u.as_ref().map(|k| k.get(c.u).clone())
            } else {
                None
            },
            zeta: if self.inputs.kind.needs_z() {
                self.classes.z.as_ref().map(|k| k.get(c.z).clone())
            } else {
                None
            },
            w,
            indices: Some(c),
            objective_value: out.value,
            policy,
            p_hat: self.fit,
            diagnostics: Diagnostics::Finite {
                member_values: out.member_values,
            },
        })
    }
}

/// Exact finite-class solve of an empirical objective.
pub fn solve_empirical_finite(inputs: SolveInputs<'_>, classes: &ClassSet) -> Result<SaddleSolution> {
    let prob = FiniteProblem::new(inputs, classes)?;
    let out = solve_finite(prob.dims(), |c| prob.eval(c))?;
    prob.finish(out)
}

/// Boxes for gradient mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxSpec {
    pub w: Bounds,
    pub v: Bounds,
    pub u: Option<Bounds>,
    pub z: Option<Bounds>,
}

/// An empirical objective seen as a block saddle problem `(w, v[, u][, zeta])`.
pub struct EmpiricalSaddle<'a> {
    pub problem: EmpiricalProblem<'a>,
    pub boxes: BoxSpec,
}

impl EmpiricalSaddle<'_> {
    fn unpack(&self, x: &[Vec<f64>]) -> Result<(SaTable, Vec<f64>, Option<SaTable>, Option<SaTable>)> {
        let (ns, na) = (self.problem.mu.n_states(), self.problem.mu.n_actions());
        let w = SaTable::new(ns, na, x[0].clone())?;
        let v = x[1].clone();
        let mut k = 2;
        let u = if self.problem.kind.needs_u() {
            k += 1;
            Some(SaTable::new(ns, na, x[k - 1].clone())?)
        } else {
            None
        };
        let z = if self.problem.kind.needs_z() {
            Some(SaTable::new(ns, na, x[k].clone())?)
        } else {
            None
        };
        Ok((w, v, u, z))
    }
}

impl SaddleObjective for EmpiricalSaddle<'_> {
    fn blocks(&self) -> Vec<Block> {
        let (ns, na) = (self.problem.mu.n_states(), self.problem.mu.n_actions());
        let mut b = vec![
            Block {
                role: Role::Max,
                len: ns * na,
                bounds: self.boxes.w,
            },
            Block {
                role: Role::Min,
                len: ns,
                bounds: self.boxes.v,
            },
        ];
        if self.problem.kind.needs_u() {
            b.push(Block {
                role: Role::Min,
                len: ns * na,
                bounds: self.boxes.u.expect("validated"),
            });
        }
        if self.problem.kind.needs_z() {
            b.push(Block {
                role: Role::Max,
                len: ns * na,
                bounds: self.boxes.z.expect("validated"),
            });
        }
        b
    }

    fn value(&self, x: &[Vec<f64>]) -> Result<f64> {
        let (w, v, u, z) = self.unpack(x)?;
        self.problem.value(&w, &v, u.as_ref(), z.as_ref())
    }

    fn gradient(&self, x: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        let (w, v, u, z) = self.unpack(x)?;
        let g = self.problem.gradient(&w, &v, u.as_ref(), z.as_ref())?;
        let mut out = vec![g.w, g.v];
        out.extend(g.u);
        out.extend(g.z);
        Ok(out)
    }
}

/// Gradient-mode solve over boxes; the tabular kernel fit is used for the
/// model-based learner unless `p_class` says otherwise.
pub fn solve_empirical_gda(
    inputs: SolveInputs<'_>,
    boxes: BoxSpec,
    p_class: Option<&ModelClass>,
    cfg: &GdaConfig,
    init: Option<Vec<Vec<f64>>>,
) -> Result<SaddleSolution> {
    inputs.validate(boxes.u.is_some(), boxes.z.is_some())?;
    let fit = inputs.fit(p_class)?;
    let saddle = EmpiricalSaddle {
        problem: inputs.problem(fit.as_ref().map(|f| f.transitions.as_slice())),
        boxes,
    };
    let out = solve_gda(&saddle, init, cfg)?;
    let (w, v, u, z) = saddle.unpack(&out.point)?;
    let policy = policy_from_weights(&w, inputs.mu)?;
    Ok(SaddleSolution {
        w,
        v,
        u,
        zeta: z,
        indices: None,
        objective_value: out.value,
        policy,
        p_hat: fit,
        diagnostics: Diagnostics::Gradient {
            steps_run: out.steps_run,
            gap: out.gap,
            converged: out.converged,
            trace: out.trace,
        },
    })
}
