//! Quick invariant suites behind `coral selftest`.

use coral_core::classes::{RegularizerKind, RegularizerSpec};
use coral_core::data::{rng_from_seed, sample_initial_summary, sample_offline_summary};
use coral_core::instances::{figure1, random_mab, random_mdp};
use coral_core::model::Policy;
use coral_core::objectives::{policy_from_weights, EmpiricalKind, EmpiricalProblem, FenchelPair};
use coral_core::oracles::{
    alm_invariance_check, lemma_band, oracle_bundle, propagate, regularized_optimum, suboptimality, u_bound, zeta_band,
};
use coral_core::table::SaTable;

use crate::experiments::{prop1_conditioned, run_figure1, Check, SweepOptions, PROP1_GAP};

fn check(name: &str, passed: bool, detail: String) -> Check {
    Check {
        name: name.to_string(),
        passed,
        detail,
    }
}

fn guard(name: &str, r: coral_core::Result<Check>) -> Check {
    r.unwrap_or_else(|e| check(name, false, format!("error: {e}")))
}

pub fn run_all() -> Vec<Check> {
    let mut out = Vec::new();
    out.extend(figure1_suite());
    out.push(guard("prop1_conditioned", prop1_suite()));
    out.push(guard("aux_residual_and_bounds", oracle_suite()));
    out.push(guard("regularized_kkt", kkt_suite()));
    out.push(guard("fenchel_identities", Ok(fenchel_suite())));
    out.push(guard("gradient_finite_difference", gradient_suite()));
    out.push(guard("penalty_invariance", invariance_suite()));
    out
}

fn figure1_suite() -> Vec<Check> {
    match run_figure1(0.9, 0.01, SweepOptions {
        master_seed: 0,
        timing: false,
    }) {
        Ok(r) => r
            .checks
            .into_iter()
            .map(|c| Check {
                name: format!("figure1_{}", c.name),
                ..c
            })
            .collect(),
        Err(e) => vec![check("figure1", false, format!("error: {e}"))],
    }
}

fn prop1_suite() -> coral_core::Result<Check> {
    let inst = coral_core::instances::prop1(100, 2.0)?;
    let spec = RegularizerSpec::new(RegularizerKind::ShiftedSquare, 2.0)?;
    let d = prop1_conditioned(100);
    let td = crate::experiments::TrialData {
        data: d,
        initial: None,
        model_data: None,
    };
    let sol = crate::experiments::solve_trial(&inst, EmpiricalKind::ProMab { alpha: 0.0, spec }, &td, false)?;
    let sub = suboptimality(&inst.model, &sol.policy)?;
    let idx = sol.indices.map(|c| c.w);
    Ok(check(
        "prop1_conditioned",
        idx == Some(1) && (sub - PROP1_GAP).abs() < 1e-12,
        format!("member {idx:?}, suboptimality {sub}"),
    ))
}

fn oracle_suite() -> coral_core::Result<Check> {
    let mut worst: f64 = 0.0;
    let mut ok = true;
    for seed in 0..10 {
        let inst = random_mdp(3, 2, 0.9, seed)?;
        let fen = FenchelPair::for_discount(0.9);
        for w in inst.classes.w.members() {
            let b = oracle_bundle(&inst.model, &inst.mu, w, &fen)?;
            let pu = propagate(&inst.model, &inst.mu, w, &b.u_star)?;
            for i in 0..b.u_star.values.len() {
                let res = b.u_star.values[i] - fen.f_star(b.x_tilde.values[i]) - 0.9 * pu.values[i];
                worst = worst.max(res.abs());
            }
            let ub = u_bound(fen.b_x, 0.9);
            let (lo, hi) = zeta_band(fen.b_x);
            ok &= b.u_star.values.iter().all(|u| u.abs() <= ub + 1e-12);
            ok &= b.zeta_star.values.iter().all(|z| (lo - 1e-12..=hi + 1e-12).contains(&z.abs()));
        }
    }
    Ok(check(
        "aux_residual_and_bounds",
        ok && worst < 1e-10,
        format!("max residual {worst:e}, bounds hold: {ok}"),
    ))
}

fn kkt_suite() -> coral_core::Result<Check> {
    let mut worst: f64 = 0.0;
    let mut band = true;
    for seed in 0..10 {
        let inst = random_mab(4, seed)?;
        let r = inst.model.reward_means().to_vec();
        let p = inst.mu.joint().values.clone();
        let spec = RegularizerSpec::new(RegularizerKind::ShiftedSquare, 50.0)?;
        let alpha = 0.05 * (seed + 1) as f64;
        let o = regularized_optimum(&r, &p, &spec, alpha)?;
        worst = worst.max(o.constraint_residual);
        let (lo, hi) = lemma_band(&r, &p, &spec, alpha);
        band &= o.v >= lo - 1e-10 && o.v <= hi + 1e-10;
    }
    Ok(check(
        "regularized_kkt",
        worst < 1e-10 && band,
        format!("max constraint residual {worst:e}, band holds: {band}"),
    ))
}

fn fenchel_suite() -> Check {
    let fen = FenchelPair::for_discount(0.9);
    let mut worst: f64 = 0.0;
    for i in 0..=100 {
        let x = -0.9 + 0.05 * i as f64;
        let back = fen.f_star_inv(fen.f_star(x)).unwrap_or(f64::NAN);
        worst = worst.max((back - x).abs());
    }
    let mut dual: f64 = 0.0;
    for i in 0..=20 {
        let y = -0.5 + 0.1 * i as f64;
        let z = -1.0 / (y + 1.0).sqrt();
        let at_opt = z * y + fen.g_star(z).unwrap_or(f64::NAN);
        let target = -fen.f_star_inv(y).unwrap_or(f64::NAN);
        let probe = (1..200)
            .map(|k| -0.02 * k as f64)
            .map(|z| z * y + fen.g_star(z).unwrap_or(f64::NAN))
            .fold(f64::NEG_INFINITY, f64::max);
        dual = dual.max((at_opt - target).abs());
        if probe > target + 1e-12 {
            dual = f64::INFINITY;
        }
    }
    check(
        "fenchel_identities",
        worst < 1e-12 && dual < 1e-12,
        format!("max inverse error {worst:e}, max conjugacy error {dual:e}"),
    )
}

fn gradient_suite() -> coral_core::Result<Check> {
    let inst = random_mdp(3, 2, 0.8, 11)?;
    let mut rng = rng_from_seed(5);
    let d = sample_offline_summary(&inst.model, &inst.mu, 500, &mut rng)?;
    let d0 = sample_initial_summary(&inst.model, 500, &mut rng)?;
    let prob = EmpiricalProblem {
        kind: EmpiricalKind::CoralMf,
        data: &d,
        initial: Some(&d0),
        mu: &inst.mu,
        p_hat: None,
        gamma: 0.8,
        fen: FenchelPair::for_discount(0.8),
    };
    let w = SaTable::from_fn(3, 2, |s, a| 0.5 + 0.3 * s as f64 + 0.2 * a as f64);
    let v = vec![0.3, -0.2, 0.1];
    let u = SaTable::from_fn(3, 2, |s, a| 0.01 * (s as f64 - a as f64));
    let z = SaTable::from_fn(3, 2, |s, a| -1.0 - 0.005 * (s + a) as f64);
    let g = prob.gradient(&w, &v, Some(&u), Some(&z))?;
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for i in 0..6 {
        let mut wp = w.clone();
        let mut wm = w.clone();
        wp.values[i] += h;
        wm.values[i] -= h;
        let fd = (prob.value(&wp, &v, Some(&u), Some(&z))? - prob.value(&wm, &v, Some(&u), Some(&z))?) / (2.0 * h);
        worst = worst.max((fd - g.w[i]).abs() / g.w[i].abs().max(1.0));
    }
    Ok(check(
        "gradient_finite_difference",
        worst < 1e-5,
        format!("max relative error {worst:e}"),
    ))
}

fn invariance_suite() -> coral_core::Result<Check> {
    let inst = figure1(0.9)?;
    let rep = alm_invariance_check(&inst.model, &inst.mu, &inst.classes.w, &inst.classes.v)?;
    let mut ok = rep.penalized_argmax == vec![0] && rep.plain_argmax == vec![0, 1];
    for seed in 0..5 {
        let r = random_mdp(3, 2, 0.8, 100 + seed)?;
        let rep = alm_invariance_check(&r.model, &r.mu, &r.classes.w, &r.classes.v)?;
        ok &= rep.holds;
    }
    let pi: Policy = policy_from_weights(inst.classes.w.get(0), &inst.mu)?;
    let sub = suboptimality(&inst.model, &pi)?;
    Ok(check(
        "penalty_invariance",
        ok && sub.abs() < 1e-12,
        format!("argmax sets consistent: {ok}"),
    ))
}
