//! Empirical objectives evaluated on dataset summaries.

use alloc::vec;
use alloc::vec::Vec;

use super::{induced_rows, FenchelPair};
use crate::classes::RegularizerSpec;
use crate::data::{DataDistribution, DatasetSummary, InitialSummary};
use crate::error::{Error, Result};
use crate::table::{check_len, SaTable};

/// Denominator floor for the induced policy inside gradients.
const GRAD_FLOOR: f64 = 1e-12;

fn check_nonempty(d: &DatasetSummary) -> Result<f64> {
    if d.n == 0 {
        return Err(Error::EmptyDataset);
    }
    Ok(d.n as f64)
}

fn check_bandit(d: &DatasetSummary) -> Result<()> {
    if d.n_states != 1 {
        return Err(Error::DimensionMismatch {
            what: "bandit data states",
            expected: 1,
            found: d.n_states,
        });
    }
    Ok(())
}

fn check_tables(d: &DatasetSummary, w: &SaTable, v: &[f64]) -> Result<()> {
    w.check_shape("weights", d.n_states, d.n_actions)?;
    check_len("dual", v, d.n_states)
}

/// `(1/N) sum_i [w(a_i) r_i - v (w(a_i) - 1) - alpha f(w(a_i))]`.
pub fn emp_pro_mab(d: &DatasetSummary, w: &SaTable, v: f64, alpha: f64, spec: &RegularizerSpec) -> Result<f64> {
    check_bandit(d)?;
    emp_pro_cb(d, w, &[v], alpha, spec)
}

/// `(1/N) sum_i [w(a_i) r_i - v (w(a_i) - 1)] - ((1/N) sum_i w(a_i) - 1)^2`.
pub fn emp_alm_mab(d: &DatasetSummary, w: &SaTable, v: f64) -> Result<f64> {
    check_bandit(d)?;
    let n = check_nonempty(d)?;
    check_tables(d, w, &[v])?;
    let mut lin = 0.0;
    let mut mean_w = 0.0;
    for a in 0..d.n_actions {
        let c = d.count(0, a) as f64;
        let wa = w.get(0, a);
        lin += wa * d.reward_sum(0, a) - v * (wa - 1.0) * c;
        mean_w += wa * c;
    }
    let gap = mean_w / n - 1.0;
    Ok(lin / n - gap * gap)
}

/// `(1/N) sum_i [w r_i - alpha f(w) - v(s_i) (w - 1)]` with `w = w(s_i, a_i)`.
pub fn emp_pro_cb(d: &DatasetSummary, w: &SaTable, v: &[f64], alpha: f64, spec: &RegularizerSpec) -> Result<f64> {
    let n = check_nonempty(d)?;
    check_tables(d, w, v)?;
    let mut acc = 0.0;
    for s in 0..d.n_states {
        for a in 0..d.n_actions {
            let c = d.count(s, a);
            if c == 0 {
                continue;
            }
            let c = c as f64;
            let x = w.get(s, a);
            acc += x * d.reward_sum(s, a) - c * (alpha * spec.f(x) + v[s] * (x - 1.0));
        }
    }
    Ok(acc / n)
}

/// `(1/N) sum_i [w (r_i - v(s_i)) + v(s_i) - (sum_a w(s_i, a) mu(a|s_i) - 1)^2]`.
pub fn emp_alm_cb(d: &DatasetSummary, w: &SaTable, v: &[f64], mu_cond: &SaTable) -> Result<f64> {
    let n = check_nonempty(d)?;
    check_tables(d, w, v)?;
    mu_cond.check_shape("conditional", d.n_states, d.n_actions)?;
    let mut acc = 0.0;
    for s in 0..d.n_states {
        let ns = d.state_count(s);
        if ns == 0 {
            continue;
        }
        let mut norm = 0.0;
        for a in 0..d.n_actions {
            let x = w.get(s, a);
            acc += x * (d.reward_sum(s, a) - v[s] * d.count(s, a) as f64);
            norm += x * mu_cond.get(s, a);
        }
        acc += ns as f64 * (v[s] - (norm - 1.0) * (norm - 1.0));
    }
    Ok(acc / n)
}

struct CoralShared {
    pi: Vec<f64>,
    u_pi: Vec<f64>,
    d0_term: f64,
    lagrange: f64,
}

fn coral_shared(
    d: &DatasetSummary,
    d0: &InitialSummary,
    mu: &DataDistribution,
    gamma: f64,
    w: &SaTable,
    v: &[f64],
    u: &SaTable,
    floor: f64,
) -> Result<CoralShared> {
    let n = check_nonempty(d)?;
    if d0.n == 0 {
        return Err(Error::EmptyDataset);
    }
    check_tables(d, w, v)?;
    u.check_shape("auxiliary", d.n_states, d.n_actions)?;
    check_len("initial counts", &d0.counts, d.n_states)?;
    mu.check_shape(d.n_states, d.n_actions)?;
    let (ns, na) = (d.n_states, d.n_actions);
    let pi = induced_rows(w, mu.conditional(), floor);
    let u_pi: Vec<f64> = (0..ns)
        .map(|s| (0..na).map(|a| pi[s * na + a] * u.get(s, a)).sum())
        .collect();
    let mut d0_term = 0.0;
    for s in 0..ns {
        d0_term += d0.counts[s] as f64 * (v[s] + u_pi[s]);
    }
    d0_term *= (1.0 - gamma) / d0.n as f64;
    let mut lagrange = 0.0;
    for s in 0..ns {
        for a in 0..na {
            let c = d.count(s, a);
            if c == 0 {
                continue;
            }
            let mut next_v = 0.0;
            for sn in 0..ns {
                next_v += d.next_count(s, a, sn) as f64 * v[sn];
            }
            lagrange += w.get(s, a) * (d.reward_sum(s, a) + gamma * next_v - c as f64 * v[s]);
        }
    }
    Ok(CoralShared {
        pi,
        u_pi,
        d0_term,
        lagrange: lagrange / n,
    })
}

/// Model-based objective with auxiliary `u` and fitted kernel `p_hat`.
#[allow(clippy::too_many_arguments)]
pub fn emp_coral_mb(
    d: &DatasetSummary,
    d0: &InitialSummary,
    p_hat: &[f64],
    mu: &DataDistribution,
    gamma: f64,
    w: &SaTable,
    v: &[f64],
    u: &SaTable,
    fen: &FenchelPair,
) -> Result<f64> {
    let sh = coral_shared(d, d0, mu, gamma, w, v, u, 0.0)?;
    let (ns, na) = (d.n_states, d.n_actions);
    check_len("fitted transitions", p_hat, ns * na * ns)?;
    let mut acc = 0.0;
    for s in 0..ns {
        for a in 0..na {
            let c = d.count(s, a);
            if c == 0 {
                continue;
            }
            let i = s * na + a;
            let pu: f64 = (0..ns).map(|sn| p_hat[i * ns + sn] * sh.u_pi[sn]).sum();
            let x = u.get(s, a) - gamma * pu;
            let h = fen.f_star_inv(x).map_err(|_| Error::Domain {
                what: "f_star_inv at (s, a) cell",
                index: i,
                value: x,
            })?;
            acc += w.get(s, a) * c as f64 * h;
        }
    }
    Ok(sh.d0_term + sh.lagrange - acc / d.n as f64)
}

/// Model-free objective with auxiliary `u` and slope `zeta < 0`.
#[allow(clippy::too_many_arguments)]
pub fn emp_coral_mf(
    d: &DatasetSummary,
    d0: &InitialSummary,
    mu: &DataDistribution,
    gamma: f64,
    w: &SaTable,
    v: &[f64],
    u: &SaTable,
    zeta: &SaTable,
    fen: &FenchelPair,
) -> Result<f64> {
    zeta.check_shape("slope", d.n_states, d.n_actions)?;
    if let Some(i) = zeta.values.iter().position(|&z| !(z < 0.0)) {
        return Err(Error::Domain {
            what: "slope must be negative",
            index: i,
            value: zeta.values[i],
        });
    }
    let sh = coral_shared(d, d0, mu, gamma, w, v, u, 0.0)?;
    let (ns, na) = (d.n_states, d.n_actions);
    let mut acc = 0.0;
    for s in 0..ns {
        for a in 0..na {
            let c = d.count(s, a);
            if c == 0 {
                continue;
            }
            let c = c as f64;
            let mut next_u = 0.0;
            for sn in 0..ns {
                next_u += d.next_count(s, a, sn) as f64 * sh.u_pi[sn];
            }
            let z = zeta.get(s, a);
            acc += w.get(s, a) * (z * (c * u.get(s, a) - gamma * next_u) + c * fen.g_star(z)?);
        }
    }
    Ok(sh.d0_term + sh.lagrange + acc / d.n as f64)
}

/// Which empirical objective a problem evaluates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EmpiricalKind {
    ProMab { alpha: f64, spec: RegularizerSpec },
    AlmMab,
    ProCb { alpha: f64, spec: RegularizerSpec },
    AlmCb,
    CoralMb,
    CoralMf,
}

impl EmpiricalKind {
    pub fn needs_u(&self) -> bool {
        matches!(self, Self::CoralMb | Self::CoralMf)
    }

    pub fn needs_z(&self) -> bool {
        matches!(self, Self::CoralMf)
    }

    pub fn is_bandit(&self) -> bool {
        matches!(self, Self::ProMab { .. } | Self::AlmMab)
    }
}

/// An empirical objective bound to its data.
#[derive(Debug, Clone, Copy)]
pub struct EmpiricalProblem<'a> {
    pub kind: EmpiricalKind,
    pub data: &'a DatasetSummary,
    pub initial: Option<&'a InitialSummary>,
    pub mu: &'a DataDistribution,
    pub p_hat: Option<&'a [f64]>,
    pub gamma: f64,
    pub fen: FenchelPair,
}

/// Partial derivatives per block, laid out like the arguments.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub w: Vec<f64>,
    pub v: Vec<f64>,
    pub u: Option<Vec<f64>>,
    pub z: Option<Vec<f64>>,
}

impl<'a> EmpiricalProblem<'a> {
    fn initial(&self) -> Result<&'a InitialSummary> {
        self.initial
            .ok_or_else(|| Error::InvalidArgument("initial-state data required".into()))
    }

    fn aux<'b>(&self, u: Option<&'b SaTable>) -> Result<&'b SaTable> {
        u.ok_or_else(|| Error::InvalidArgument("auxiliary function required".into()))
    }

    fn slope<'b>(&self, z: Option<&'b SaTable>) -> Result<&'b SaTable> {
        z.ok_or_else(|| Error::InvalidArgument("slope function required".into()))
    }

    pub fn value(&self, w: &SaTable, v: &[f64], u: Option<&SaTable>, z: Option<&SaTable>) -> Result<f64> {
        let d = self.data;
        match self.kind {
            EmpiricalKind::ProMab { alpha, spec } => emp_pro_mab(d, w, v[0], alpha, &spec),
            EmpiricalKind::AlmMab => emp_alm_mab(d, w, v[0]),
            EmpiricalKind::ProCb { alpha, spec } => emp_pro_cb(d, w, v, alpha, &spec),
            EmpiricalKind::AlmCb => emp_alm_cb(d, w, v, self.mu.conditional()),
            EmpiricalKind::CoralMb => {
                let p = self
                    .p_hat
                    .ok_or_else(|| Error::InvalidArgument("fitted transitions required".into()))?;
                emp_coral_mb(d, self.initial()?, p, self.mu, self.gamma, w, v, self.aux(u)?, &self.fen)
            }
            EmpiricalKind::CoralMf => emp_coral_mf(
                d,
                self.initial()?,
                self.mu,
                self.gamma,
                w,
                v,
                self.aux(u)?,
                self.slope(z)?,
                &self.fen,
            ),
        }
    }

    pub fn gradient(&self, w: &SaTable, v: &[f64], u: Option<&SaTable>, z: Option<&SaTable>) -> Result<Gradient> {
        let d = self.data;
        let n = check_nonempty(d)?;
        check_tables(d, w, v)?;
        let (ns, na) = (d.n_states, d.n_actions);
        match self.kind {
            EmpiricalKind::ProMab { alpha, spec } | EmpiricalKind::ProCb { alpha, spec } => {
                let mut gw = vec![0.0; ns * na];
                let mut gv = vec![0.0; ns];
                for s in 0..ns {
                    for a in 0..na {
                        let c = d.count(s, a) as f64;
                        let x = w.get(s, a);
                        gw[s * na + a] = (d.reward_sum(s, a) - c * (alpha * spec.fprime(x) + v[s])) / n;
                        gv[s] -= c * (x - 1.0) / n;
                    }
                }
                Ok(Gradient {
                    w: gw,
                    v: gv,
                    u: None,
                    z: None,
                })
            }
            EmpiricalKind::AlmMab => {
                let mean_w: f64 = (0..na).map(|a| w.get(0, a) * d.count(0, a) as f64).sum::<f64>() / n;
                let gw = (0..na)
                    .map(|a| {
                        let c = d.count(0, a) as f64;
                        (d.reward_sum(0, a) - v[0] * c) / n - 2.0 * (mean_w - 1.0) * c / n
                    })
                    .collect();
                Ok(Gradient {
                    w: gw,
                    v: vec![1.0 - mean_w],
                    u: None,
                    z: None,
                })
            }
            EmpiricalKind::AlmCb => {
                let cond = self.mu.conditional();
                let mut gw = vec![0.0; ns * na];
                let mut gv = vec![0.0; ns];
                for s in 0..ns {
                    let n_s = d.state_count(s) as f64;
                    let norm: f64 = (0..na).map(|a| w.get(s, a) * cond.get(s, a)).sum();
                    gv[s] = n_s / n;
                    for a in 0..na {
                        let c = d.count(s, a) as f64;
                        gw[s * na + a] =
                            (d.reward_sum(s, a) - v[s] * c) / n - n_s / n * 2.0 * (norm - 1.0) * cond.get(s, a);
                        gv[s] -= w.get(s, a) * c / n;
                    }
                }
                Ok(Gradient {
                    w: gw,
                    v: gv,
                    u: None,
                    z: None,
                })
            }
            EmpiricalKind::CoralMb | EmpiricalKind::CoralMf => self.coral_gradient(w, v, self.aux(u)?, z, n),
        }
    }

    fn coral_gradient(&self, w: &SaTable, v: &[f64], u: &SaTable, z: Option<&SaTable>, n: f64) -> Result<Gradient> {
        let d = self.data;
        let d0 = self.initial()?;
        let (ns, na, g) = (d.n_states, d.n_actions, self.gamma);
        let cond = self.mu.conditional();
        let sh = coral_shared(d, d0, self.mu, g, w, v, u, GRAD_FLOOR)?;
        let model_based = matches!(self.kind, EmpiricalKind::CoralMb);
        let p_hat = if model_based {
            let p = self
                .p_hat
                .ok_or_else(|| Error::InvalidArgument("fitted transitions required".into()))?;
            check_len("fitted transitions", p, ns * na * ns)?;
            Some(p)
        } else {
            None
        };
        let zeta = if model_based { None } else { Some(self.slope(z)?) };

        let mut gw = vec![0.0; ns * na];
        let mut gv = vec![0.0; ns];
        let mut gu = vec![0.0; ns * na];
        let mut gz = vec![0.0; ns * na];
        // c[s] = derivative with respect to the policy average of u at s.
        let mut c_u: Vec<f64> = (0..ns)
            .map(|s| (1.0 - g) * d0.counts[s] as f64 / d0.n as f64)
            .collect();
        for s in 0..ns {
            gv[s] += (1.0 - g) * d0.counts[s] as f64 / d0.n as f64;
        }
        for s in 0..ns {
            for a in 0..na {
                let i = s * na + a;
                let c = d.count(s, a) as f64;
                let x_w = w.get(s, a);
                let mut next_v = 0.0;
                for sn in 0..ns {
                    let k = d.next_count(s, a, sn) as f64;
                    next_v += k * v[sn];
                    gv[sn] += g * x_w * k / n;
                }
                gv[s] -= x_w * c / n;
                let base = d.reward_sum(s, a) + g * next_v - c * v[s];
                if let Some(p) = p_hat {
                    let pu: f64 = (0..ns).map(|sn| p[i * ns + sn] * sh.u_pi[sn]).sum();
                    let x = u.get(s, a) - g * pu;
                    if !(x > -1.0) {
                        return Err(Error::Domain {
                            what: "f_star_inv at (s, a) cell",
                            index: i,
                            value: x,
                        });
                    }
                    let root = libm::sqrt(x + 1.0);
                    let h = 2.0 * root - 2.0;
                    let dh = 1.0 / root;
                    gw[i] += (base - c * h) / n;
                    gu[i] -= x_w * c * dh / n;
                    for sn in 0..ns {
                        c_u[sn] += x_w * c * dh * g * p[i * ns + sn] / n;
                    }
                } else {
                    let zt = zeta.expect("slope present");
                    let za = zt.get(s, a);
                    let mut next_u = 0.0;
                    for sn in 0..ns {
                        let k = d.next_count(s, a, sn) as f64;
                        next_u += k * sh.u_pi[sn];
                        c_u[sn] -= g * x_w * za * k / n;
                    }
                    let inner = c * u.get(s, a) - g * next_u;
                    let gs = za + 2.0 + 1.0 / za;
                    gw[i] += (base + za * inner + c * gs) / n;
                    gu[i] += x_w * za * c / n;
                    gz[i] = x_w * (inner + c * (1.0 - 1.0 / (za * za))) / n;
                }
            }
        }
        for s in 0..ns {
            let den: f64 = (0..na).map(|a| w.get(s, a) * cond.get(s, a)).sum();
            for a in 0..na {
                let i = s * na + a;
                gu[i] += c_u[s] * sh.pi[i];
                let du_dw = if den > GRAD_FLOOR {
                    cond.get(s, a) * (u.get(s, a) - sh.u_pi[s]) / den
                } else {
                    cond.get(s, a) * u.get(s, a) / GRAD_FLOOR
                };
                gw[i] += c_u[s] * du_dw;
            }
        }
        let all = gw.iter().chain(&gv).chain(&gu).chain(&gz);
        if all.clone().any(|x| !x.is_finite()) {
            return Err(Error::NonFiniteGradient { iteration: 0 });
        }
        Ok(Gradient {
            w: gw,
            v: gv,
            u: Some(gu),
            z: if model_based { None } else { Some(gz) },
        })
    }
}
