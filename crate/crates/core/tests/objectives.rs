mod common;

use coral_core::classes::{RegularizerKind, RegularizerSpec};
use coral_core::data::{
    rng_from_seed, sample_initial, sample_initial_summary, sample_offline, sample_offline_summary, DataDistribution,
    DatasetSummary, InitialDataset, OfflineDataset,
};
use coral_core::instances::{figure1, prop1, prop3_small};
use coral_core::model::{occupancy_of, plan_optimal, RewardKind, TabularModel};
use coral_core::objectives::{
    alm_penalty, e_v, emp_alm_cb, emp_alm_mab, emp_coral_mb, emp_coral_mf, emp_pro_cb, emp_pro_mab, fenchel_eval,
    policy_from_weights, pop_alm, pop_alm_cb, pop_alm_mab, pop_coral_mb, pop_coral_mf, pop_lagrangian, pop_pro,
    EmpiricalKind, EmpiricalProblem, FenchelFn, FenchelPair,
};
use coral_core::oracles::{optimal_weights, regularized_optimum_cb, zeta_star};
use coral_core::table::SaTable;
use proptest::prelude::*;

fn sq() -> RegularizerSpec {
    RegularizerSpec::new(RegularizerKind::ShiftedSquare, 5.0).unwrap()
}

fn induced(w: &SaTable, mu: &DataDistribution) -> Vec<Vec<f64>> {
    (0..w.n_states)
        .map(|s| {
            let den: f64 = (0..w.n_actions).map(|a| w.get(s, a) * mu.cond(s, a)).sum();
            (0..w.n_actions)
                .map(|a| if den > 0.0 { w.get(s, a) * mu.cond(s, a) / den } else { 1.0 / w.n_actions as f64 })
                .collect()
        })
        .collect()
}

fn u_pi(u: &SaTable, pi: &[Vec<f64>], s: usize) -> f64 {
    (0..u.n_actions).map(|a| pi[s][a] * u.get(s, a)).sum()
}

fn rec_pro(d: &OfflineDataset, w: &SaTable, v: &[f64], alpha: f64, spec: &RegularizerSpec) -> f64 {
    d.records
        .iter()
        .map(|t| {
            let x = w.get(t.s, t.a);
            x * t.r - alpha * spec.f(x) - v[t.s] * (x - 1.0)
        })
        .sum::<f64>()
        / d.records.len() as f64
}

fn rec_alm_mab(d: &OfflineDataset, w: &SaTable, v: f64) -> f64 {
    let n = d.records.len() as f64;
    let mean_w = d.records.iter().map(|t| w.get(0, t.a)).sum::<f64>() / n;
    let lin = d.records.iter().map(|t| w.get(0, t.a) * t.r - v * (w.get(0, t.a) - 1.0)).sum::<f64>() / n;
    lin - (mean_w - 1.0) * (mean_w - 1.0)
}

fn rec_alm_cb(d: &OfflineDataset, w: &SaTable, v: &[f64], mu: &DataDistribution) -> f64 {
    d.records
        .iter()
        .map(|t| {
            let norm: f64 = (0..w.n_actions).map(|a| w.get(t.s, a) * mu.cond(t.s, a)).sum();
            w.get(t.s, t.a) * (t.r - v[t.s]) + v[t.s] - (norm - 1.0) * (norm - 1.0)
        })
        .sum::<f64>()
        / d.records.len() as f64
}

fn rec_start(d0: &InitialDataset, gamma: f64, v: &[f64], u: &SaTable, pi: &[Vec<f64>]) -> f64 {
    (1.0 - gamma) * d0.states.iter().map(|&s| v[s] + u_pi(u, pi, s)).sum::<f64>() / d0.states.len() as f64
}

#[allow(clippy::too_many_arguments)]
fn rec_mb(d: &OfflineDataset, d0: &InitialDataset, p: &[f64], mu: &DataDistribution, gamma: f64, w: &SaTable, v: &[f64], u: &SaTable) -> f64 {
    let pi = induced(w, mu);
    let (ns, na) = (w.n_states, w.n_actions);
    let body = d
        .records
        .iter()
        .map(|t| {
            let pu: f64 = (0..ns).map(|sn| p[(t.s * na + t.a) * ns + sn] * u_pi(u, &pi, sn)).sum();
            let x = u.get(t.s, t.a) - gamma * pu;
            w.get(t.s, t.a) * (t.r + gamma * v[t.sn] - v[t.s] - (2.0 * (x + 1.0).sqrt() - 2.0))
        })
        .sum::<f64>()
        / d.records.len() as f64;
    rec_start(d0, gamma, v, u, &pi) + body
}

#[allow(clippy::too_many_arguments)]
fn rec_mf(d: &OfflineDataset, d0: &InitialDataset, mu: &DataDistribution, gamma: f64, w: &SaTable, v: &[f64], u: &SaTable, z: &SaTable) -> f64 {
    let pi = induced(w, mu);
    let body = d
        .records
        .iter()
        .map(|t| {
            let zz = z.get(t.s, t.a);
            let x = u.get(t.s, t.a) - gamma * u_pi(u, &pi, t.sn);
            w.get(t.s, t.a) * (t.r + gamma * v[t.sn] - v[t.s] + zz * x + zz + 2.0 + 1.0 / zz)
        })
        .sum::<f64>()
        / d.records.len() as f64;
    rec_start(d0, gamma, v, u, &pi) + body
}

#[test]
fn e_v_examples() {
    let mut r = common::rng(1);
    let m = common::model(&mut r, 4, 3, 0.85);
    assert_eq!(e_v(&m, &[0.0; 4]).unwrap().values, m.reward_means());
    let plan = plan_optimal(&m).unwrap();
    let e = e_v(&m, &plan.v_star).unwrap();
    for s in 0..4 {
        assert!(e.get(s, plan.greedy_actions[s]).abs() < 1e-12);
        for a in 0..3 {
            assert!((e.get(s, a) - plan.a_star.get(s, a)).abs() < 1e-9);
        }
    }
    let v = common::vector(&mut r, 4, -1.0, 1.0);
    let e = e_v(&m, &v).unwrap();
    for s in 0..4 {
        for a in 0..3 {
            let mut x = m.reward(s, a) - v[s];
            for (t, vt) in v.iter().enumerate() {
                x += 0.85 * m.p(s, a, t) * vt;
            }
            assert!((e.get(s, a) - x).abs() < 1e-14);
        }
    }
}

fn one_record(a: usize, r: f64, n_actions: usize) -> DatasetSummary {
    let mut d = DatasetSummary::empty(1, n_actions);
    d.n = 1;
    d.counts[a] = 1;
    d.reward_sums[a] = r;
    d.next_counts[a] = 1;
    d
}

#[test]
fn pro_mab_examples() {
    let d = one_record(0, 1.0, 2);
    let w = SaTable::new(1, 2, vec![1.0, 0.3]).unwrap();
    assert_eq!(emp_pro_mab(&d, &w, 123.0, 0.0, &sq()).unwrap(), 1.0);

    let n = 100;
    let inst = prop1(n, 2.0).unwrap();
    let mut d = DatasetSummary::empty(1, 2);
    d.n = n as u64;
    d.counts = vec![n as u64 - 1, 1];
    d.reward_sums = vec![0.5 * (n as f64 - 1.0), 1.0];
    d.next_counts = d.counts.clone();
    let spec = RegularizerSpec::new(RegularizerKind::ShiftedSquare, 2.0).unwrap();
    let w1 = inst.classes.w.get(0);
    let w2 = inst.classes.w.get(1);
    let l1 = emp_pro_mab(&d, w1, 0.5, 0.0, &spec).unwrap();
    let l2 = emp_pro_mab(&d, w2, 0.5, 0.0, &spec).unwrap();
    assert!((l1 - 0.5).abs() < 1e-12);
    assert!((l2 - (0.5 + 2.0 / (2.0 * n as f64))).abs() < 1e-12);
}

#[test]
fn alm_mab_penalty_examples() {
    let mut d = DatasetSummary::empty(1, 2);
    d.n = 4;
    d.counts = vec![2, 2];
    d.reward_sums = vec![1.0, 2.0];
    d.next_counts = vec![2, 2];
    let unit = SaTable::new(1, 2, vec![0.5, 1.5]).unwrap();
    let lin = |w: &SaTable, v: f64| (0..2).map(|a| w.get(0, a) * d.reward_sums[a] - v * (w.get(0, a) - 1.0) * 2.0).sum::<f64>() / 4.0;
    assert!((emp_alm_mab(&d, &unit, 0.3).unwrap() - lin(&unit, 0.3)).abs() < 1e-15);
    let c = 0.25;
    let shifted = SaTable::new(1, 2, vec![0.5 + c, 1.5 + c]).unwrap();
    assert!((emp_alm_mab(&d, &shifted, 0.3).unwrap() - (lin(&shifted, 0.3) - c * c)).abs() < 1e-15);
}

#[test]
fn pro_cb_and_alm_cb_unit_weights() {
    let mut r = common::rng(2);
    let (m, mu) = common::cb(&mut r, 3, 2);
    let d = sample_offline(&m, &mu, 500, 4).unwrap();
    let s = d.summarize(3, 2).unwrap();
    let ones = SaTable::filled(3, 2, 1.0);
    let v = common::vector(&mut r, 3, -1.0, 1.0);
    let mean_r = d.records.iter().map(|t| t.r).sum::<f64>() / 500.0;
    let spec = sq();
    assert!((emp_pro_cb(&s, &ones, &v, 0.7, &spec).unwrap() - mean_r).abs() < 1e-12);
    assert!((emp_alm_cb(&s, &ones, &v, mu.conditional()).unwrap() - mean_r).abs() < 1e-12);
}

#[test]
fn prop3_small_difference_closed_form() {
    let n = 4096;
    let alpha = 0.01;
    let inst = prop3_small(n, alpha).unwrap();
    let spec = inst.regularizer.unwrap();
    let w_a = inst.classes.w.get(0);
    let w_t = inst.classes.w.get(1);
    let v_a = inst.classes.v.get(0);
    let p11 = inst.mu.cond(0, 0);
    assert!((w_a.get(0, 0) - 1.0 / p11).abs() < 1e-9 && w_a.get(0, 1) == 0.0);
    let mut rng = rng_from_seed(5);
    let mut signs_agree = 0;
    for _ in 0..50 {
        let d = sample_offline_summary(&inst.model, &inst.mu, n, &mut rng).unwrap();
        let diff = emp_pro_cb(&d, w_a, v_a, alpha, &spec).unwrap() - emp_pro_cb(&d, w_t, v_a, alpha, &spec).unwrap();
        let c11 = d.count(0, 0) as f64;
        if c11 == 0.0 {
            assert!(diff.abs() < 1e-15);
            continue;
        }
        let mu11 = c11 / d.n as f64;
        let r_hat = d.reward_sum(0, 0) / c11;
        let x = 1.0 / p11;
        // Direct expansion of the per-record sum; state 0 rows differ only.
        let derived = mu11 * ((r_hat - 0.5) / p11 + alpha * (x * spec.fprime(x) - spec.f(x) + spec.f(0.0)));
        assert!((diff - derived).abs() < 1e-12, "{diff} vs {derived}");
        let quoted = mu11 * ((r_hat - 0.5) / p11 + alpha * (x * spec.fprime(x) + spec.f(x)));
        let reg = alpha * (x * spec.fprime(x) + spec.f(x)).abs().max((x * spec.fprime(x) - spec.f(x) + spec.f(0.0)).abs());
        if (r_hat - 0.5).abs() / p11 > 2.0 * reg {
            assert_eq!(diff.signum(), quoted.signum());
            signs_agree += 1;
        }
    }
    assert!(signs_agree > 5, "{signs_agree}");
}

#[test]
fn coral_reductions() {
    let mut r = common::rng(3);
    let m = common::model(&mut r, 3, 2, 0.8);
    let mu = common::mu(&mut r, 3, 2);
    let d = sample_offline(&m, &mu, 400, 1).unwrap();
    let d0 = sample_initial(&m, 400, 2).unwrap();
    let (s, s0) = (d.summarize(3, 2).unwrap(), d0.summarize(3).unwrap());
    let w = common::table(&mut r, 3, 2, 0.0, 2.0);
    let v = common::vector(&mut r, 3, -1.0, 1.0);
    let zero = SaTable::zeros(3, 2);
    let fen = FenchelPair::for_discount(0.8);
    let plain: f64 = 0.2 * d0.states.iter().map(|&st| v[st]).sum::<f64>() / 400.0
        + d.records.iter().map(|t| w.get(t.s, t.a) * (t.r + 0.8 * v[t.sn] - v[t.s])).sum::<f64>() / 400.0;
    let mb = emp_coral_mb(&s, &s0, m.transitions(), &mu, 0.8, &w, &v, &zero, &fen).unwrap();
    let mf = emp_coral_mf(&s, &s0, &mu, 0.8, &w, &v, &zero, &SaTable::filled(3, 2, -1.0), &fen).unwrap();
    assert!((mb - plain).abs() < 1e-12);
    assert!((mf - plain).abs() < 1e-12);
}

#[test]
fn coral_at_optimum_recovers_normalized_value() {
    let mut r = common::rng(4);
    let m = common::model(&mut r, 3, 2, 0.7);
    let mu = common::mu(&mut r, 3, 2);
    let plan = plan_optimal(&m).unwrap();
    let w = optimal_weights(&m, &mu).unwrap();
    let n = 400_000;
    let mut rng = rng_from_seed(8);
    let s = sample_offline_summary(&m, &mu, n, &mut rng).unwrap();
    let s0 = sample_initial_summary(&m, n, &mut rng).unwrap();
    let fen = FenchelPair::for_discount(0.7);
    let val = emp_coral_mb(&s, &s0, m.transitions(), &mu, 0.7, &w, &plan.v_star, &SaTable::zeros(3, 2), &fen).unwrap();
    let target = 0.3 * m.initial().iter().zip(&plan.v_star).map(|(p, x)| p * x).sum::<f64>();
    assert!((val - target).abs() < 0.02, "{val} vs {target}");
}

#[test]
fn empirical_objectives_match_record_evaluator() {
    for seed in 0..20 {
        let mut r = common::rng(10 + seed);
        let m = common::model(&mut r, 3, 2, 0.75);
        let mu = common::mu(&mut r, 3, 2);
        let d = sample_offline(&m, &mu, 300, seed).unwrap();
        let d0 = sample_initial(&m, 200, seed + 1).unwrap();
        let (s, s0) = (d.summarize(3, 2).unwrap(), d0.summarize(3).unwrap());
        let w = common::table(&mut r, 3, 2, 0.0, 3.0);
        let v = common::vector(&mut r, 3, -1.0, 1.0);
        let u = common::table(&mut r, 3, 2, -0.3, 0.3);
        let z = common::table(&mut r, 3, 2, -1.5, -0.5);
        let fen = FenchelPair::for_discount(0.75);
        let spec = sq();
        let close = |a: f64, b: f64| (a - b).abs() < 1e-12 * (1.0 + b.abs());
        assert!(close(emp_pro_cb(&s, &w, &v, 0.3, &spec).unwrap(), rec_pro(&d, &w, &v, 0.3, &spec)));
        assert!(close(emp_alm_cb(&s, &w, &v, mu.conditional()).unwrap(), rec_alm_cb(&d, &w, &v, &mu)));
        assert!(close(emp_coral_mb(&s, &s0, m.transitions(), &mu, 0.75, &w, &v, &u, &fen).unwrap(), rec_mb(&d, &d0, m.transitions(), &mu, 0.75, &w, &v, &u)));
        assert!(close(emp_coral_mf(&s, &s0, &mu, 0.75, &w, &v, &u, &z, &fen).unwrap(), rec_mf(&d, &d0, &mu, 0.75, &w, &v, &u, &z)));

        let b = TabularModel::bandit(common::vector(&mut r, 3, 0.0, 1.0), vec![RewardKind::Bernoulli; 3]).unwrap();
        let bmu = common::mu(&mut r, 1, 3);
        let bd = sample_offline(&b, &bmu, 250, seed).unwrap();
        let bs = bd.summarize(1, 3).unwrap();
        let bw = common::table(&mut r, 1, 3, 0.0, 3.0);
        assert!(close(emp_alm_mab(&bs, &bw, 0.4).unwrap(), rec_alm_mab(&bd, &bw, 0.4)));
        assert!(close(emp_pro_mab(&bs, &bw, 0.4, 0.2, &spec).unwrap(), rec_pro(&bd, &bw, &[0.4], 0.2, &spec)));
    }
}

#[test]
fn fenchel_spot_values() {
    let fen = FenchelPair::for_discount(0.9);
    assert_eq!(fenchel_eval(&fen, FenchelFn::FStar, 0.0).unwrap(), 0.0);
    let (mut lo, mut hi) = (-2.0, 10.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if fen.f_star(mid) < 3.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    assert!((fen.f_star_inv(3.0).unwrap() - lo).abs() < 1e-12);
    assert!((lo - 2.0).abs() < 1e-12);
    let x = 0.21;
    let (best_z, best) = (1..=100_000)
        .map(|k| -2.0 * k as f64 / 100_000.0)
        .map(|z| (z, x * z + fen.g_star(z).unwrap()))
        .fold((0.0, f64::NEG_INFINITY), |acc, p| if p.1 > acc.1 { p } else { acc });
    assert!((best - (-0.2)).abs() < 1e-8);
    assert!((best_z + 1.0 / 1.1).abs() < 1e-4);
    assert_eq!(fen.g_star(-1.0).unwrap(), 0.0);
    assert!(fen.f_star_inv(-1.5).is_err() && fen.g_star(0.0).is_err());
}

#[test]
fn conjugacy_on_grid() {
    let fen = FenchelPair::for_discount(0.5);
    let zs: Vec<f64> = (0..10_000)
        .map(|k| -(0.05f64.ln() + (400f64).ln() * k as f64 / 9_999.0).exp())
        .collect();
    for i in 0..100 {
        let x = -0.99 + 3.99 * (i as f64 + 1.0) / 100.0;
        let best = zs.iter().map(|&z| x * z + fen.g_star(z).unwrap()).fold(f64::NEG_INFINITY, f64::max);
        assert!((best - (2.0 - 2.0 * (x + 1.0).sqrt())).abs() < 1e-6, "x = {x}");
    }
}

#[test]
fn population_examples() {
    let mut r = common::rng(6);
    let m = common::model(&mut r, 3, 2, 0.8);
    let mu = common::mu(&mut r, 3, 2);
    let ws = optimal_weights(&m, &mu).unwrap();
    assert!(alm_penalty(&m, &mu, &ws).unwrap() < 1e-20);

    let fig = figure1(0.9).unwrap();
    let (w1, w2) = (fig.classes.w.get(0), fig.classes.w.get(1));
    let pi2 = policy_from_weights(w2, &fig.mu).unwrap();
    let d2 = occupancy_of(&fig.model, &pi2).unwrap();
    assert!(d2.marginal[coral_core::instances::fig1::C] > 0.0);
    assert!(alm_penalty(&fig.model, &fig.mu, w2).unwrap() >= d2.marginal[coral_core::instances::fig1::C]);
    let v = fig.classes.v.get(0);
    let l1 = pop_lagrangian(&fig.model, &fig.mu, w1, v).unwrap();
    let l2 = pop_lagrangian(&fig.model, &fig.mu, w2, v).unwrap();
    assert!((l1 - l2).abs() < 1e-12);
    assert!(pop_alm(&fig.model, &fig.mu, w1, v).unwrap() > pop_alm(&fig.model, &fig.mu, w2, v).unwrap());
}

#[test]
fn cb_reduction_chain() {
    for seed in 0..20 {
        let mut r = common::rng(300 + seed);
        let (m1, mu1) = common::cb(&mut r, 1, 3);
        let w = common::table(&mut r, 1, 3, 0.0, 2.5);
        let v = common::vector(&mut r, 1, -1.0, 1.0);
        assert!((pop_alm_cb(&m1, &mu1, &w, &v).unwrap() - pop_alm_mab(&m1, &mu1, &w, v[0]).unwrap()).abs() < 1e-14);

        let (m, mu) = common::cb(&mut r, 3, 2);
        let w = common::table(&mut r, 3, 2, 0.2, 2.0);
        let v = common::vector(&mut r, 3, -1.0, 1.0);
        // Unclipped minimizer of the auxiliary block at discount 0.
        let u = SaTable::from_fn(3, 2, |s, _| {
            let q = (0..2).map(|a| w.get(s, a) * mu.mu(s, a)).sum::<f64>() / m.initial()[s];
            q * q - 1.0
        });
        let z = zeta_star(&u, &m, &mu, &w).unwrap();
        let fen = FenchelPair::for_discount(0.0);
        let target = pop_alm_cb(&m, &mu, &w, &v).unwrap();
        assert!((pop_coral_mb(&m, &mu, &w, &v, &u, &fen).unwrap() - target).abs() < 1e-8);
        assert!((pop_coral_mf(&m, &mu, &w, &v, &u, &z, &fen).unwrap() - target).abs() < 1e-8);
        assert!((pop_alm(&m, &mu, &w, &v).unwrap() - target).abs() < 1e-12);
    }
}

#[test]
fn empirical_objectives_are_unbiased() {
    let mut r = common::rng(7);
    let m = common::model(&mut r, 3, 2, 0.8);
    let mu = common::mu(&mut r, 3, 2);
    let (cbm, cbmu) = common::cb(&mut r, 3, 2);
    let b = TabularModel::bandit(vec![0.3, 0.6, 0.8], vec![RewardKind::Bernoulli; 3]).unwrap();
    let bmu = common::mu(&mut r, 1, 3);
    let w = common::table(&mut r, 3, 2, 0.5, 1.5);
    let bw = SaTable::new(1, 3, vec![0.8, 1.2, 1.0]).unwrap();
    let v = common::vector(&mut r, 3, -0.5, 0.5);
    let u = common::table(&mut r, 3, 2, -0.2, 0.2);
    let z = common::table(&mut r, 3, 2, -1.2, -0.8);
    let fen = FenchelPair::for_discount(0.8);
    let spec = sq();
    let n = 1000;
    let reps = 200;
    let mut rng = rng_from_seed(70);
    let mut samples: Vec<Vec<f64>> = vec![Vec::new(); 6];
    for _ in 0..reps {
        let d = sample_offline_summary(&m, &mu, n, &mut rng).unwrap();
        let d0 = sample_initial_summary(&m, n, &mut rng).unwrap();
        let dc = sample_offline_summary(&cbm, &cbmu, n, &mut rng).unwrap();
        let db = sample_offline_summary(&b, &bmu, n, &mut rng).unwrap();
        samples[0].push(emp_pro_mab(&db, &bw, 0.5, 0.3, &spec).unwrap());
        samples[1].push(emp_alm_mab(&db, &bw, 0.5).unwrap());
        samples[2].push(emp_pro_cb(&dc, &w, &v, 0.3, &spec).unwrap());
        samples[3].push(emp_alm_cb(&dc, &w, &v, cbmu.conditional()).unwrap());
        samples[4].push(emp_coral_mb(&d, &d0, m.transitions(), &mu, 0.8, &w, &v, &u, &fen).unwrap());
        samples[5].push(emp_coral_mf(&d, &d0, &mu, 0.8, &w, &v, &u, &z, &fen).unwrap());
    }
    let pops = [
        pop_pro(&b, &bmu, &bw, &[0.5], 0.3, &spec).unwrap(),
        pop_alm_mab(&b, &bmu, &bw, 0.5).unwrap(),
        pop_pro(&cbm, &cbmu, &w, &v, 0.3, &spec).unwrap(),
        pop_alm_cb(&cbm, &cbmu, &w, &v).unwrap(),
        pop_coral_mb(&m, &mu, &w, &v, &u, &fen).unwrap(),
        pop_coral_mf(&m, &mu, &w, &v, &u, &z, &fen).unwrap(),
    ];
    for (k, xs) in samples.iter().enumerate() {
        let mean = xs.iter().sum::<f64>() / reps as f64;
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (reps - 1) as f64;
        let se = (var / reps as f64).sqrt();
        assert!((mean - pops[k]).abs() < 3.0 * se, "objective {k}: {mean} vs {} (se {se})", pops[k]);
    }
}

#[test]
fn gradients_match_finite_differences() {
    let mut r = common::rng(8);
    let m = common::model(&mut r, 3, 2, 0.8);
    let mu = common::mu(&mut r, 3, 2);
    let mut rng = rng_from_seed(80);
    let d = sample_offline_summary(&m, &mu, 300, &mut rng).unwrap();
    let d0 = sample_initial_summary(&m, 300, &mut rng).unwrap();
    let (cbm, cbmu) = common::cb(&mut r, 3, 2);
    let dc = sample_offline_summary(&cbm, &cbmu, 300, &mut rng).unwrap();
    let b = TabularModel::bandit(vec![0.3, 0.6, 0.8], vec![RewardKind::Bernoulli; 3]).unwrap();
    let bmu = common::mu(&mut r, 1, 3);
    let db = sample_offline_summary(&b, &bmu, 300, &mut rng).unwrap();
    let spec = sq();
    let cases: Vec<(EmpiricalKind, &DatasetSummary, &DataDistribution, usize, usize)> = vec![
        (EmpiricalKind::ProMab { alpha: 0.2, spec }, &db, &bmu, 1, 3),
        (EmpiricalKind::AlmMab, &db, &bmu, 1, 3),
        (EmpiricalKind::ProCb { alpha: 0.2, spec }, &dc, &cbmu, 3, 2),
        (EmpiricalKind::AlmCb, &dc, &cbmu, 3, 2),
        (EmpiricalKind::CoralMb, &d, &mu, 3, 2),
        (EmpiricalKind::CoralMf, &d, &mu, 3, 2),
    ];
    for (kind, data, law, ns, na) in cases {
        let prob = EmpiricalProblem {
            kind,
            data,
            initial: Some(&d0),
            mu: law,
            p_hat: Some(m.transitions()),
            gamma: if ns == 3 && kind.needs_u() { 0.8 } else { 0.0 },
            fen: FenchelPair::for_discount(0.8),
        };
        for _ in 0..5 {
            let w = common::table(&mut r, ns, na, 0.3, 2.0);
            let v = common::vector(&mut r, ns, -0.5, 0.5);
            let u = common::table(&mut r, ns, na, -0.2, 0.2);
            let z = common::table(&mut r, ns, na, -1.3, -0.7);
            let (uu, zz) = (kind.needs_u().then_some(&u), kind.needs_z().then_some(&z));
            let g = prob.gradient(&w, &v, uu, zz).unwrap();
            let h = 1e-5;
            let fd = |bump: &dyn Fn(f64) -> f64| (bump(h) - bump(-h)) / (2.0 * h);
            let check = |analytic: f64, numeric: f64| {
                assert!((analytic - numeric).abs() <= 1e-5 * analytic.abs().max(1.0), "{kind:?}: {analytic} vs {numeric}");
            };
            for i in 0..ns * na {
                check(g.w[i], fd(&|e| {
                    let mut x = w.clone();
                    x.values[i] += e;
                    prob.value(&x, &v, uu, zz).unwrap()
                }));
            }
            for i in 0..ns {
                check(g.v[i], fd(&|e| {
                    let mut x = v.clone();
                    x[i] += e;
                    prob.value(&w, &x, uu, zz).unwrap()
                }));
            }
            if let Some(gu) = &g.u {
                for i in 0..ns * na {
                    check(gu[i], fd(&|e| {
                        let mut x = u.clone();
                        x.values[i] += e;
                        prob.value(&w, &v, Some(&x), zz).unwrap()
                    }));
                }
            }
            if let Some(gz) = &g.z {
                for i in 0..ns * na {
                    check(gz[i], fd(&|e| {
                        let mut x = z.clone();
                        x.values[i] += e;
                        prob.value(&w, &v, uu, Some(&x)).unwrap()
                    }));
                }
            }
        }
    }
}

#[test]
fn regularized_cb_optimum_is_per_state() {
    let inst = prop3_small(4096, 0.01).unwrap();
    let (w, v) = regularized_optimum_cb(&inst.model, &inst.mu, &inst.regularizer.unwrap(), 0.01).unwrap();
    for s in 0..2 {
        let mass: f64 = (0..2).map(|a| inst.mu.cond(s, a) * w.get(s, a)).sum();
        assert!((mass - 1.0).abs() < 1e-10);
        assert!(v[s] <= 0.5 + 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn inverse_identity(x in -2.0f64..2.0) {
        let fen = FenchelPair::for_discount(0.9);
        prop_assert!((fen.f_star_inv(fen.f_star(x)).unwrap() - x).abs() < 1e-10);
    }

    #[test]
    fn mf_at_closed_form_slope_equals_mb(seed in any::<u64>()) {
        let mut r = common::rng(seed);
        let g = 0.9;
        let m = common::model(&mut r, 3, 2, g);
        let mu = common::mu(&mut r, 3, 2);
        let w = common::table(&mut r, 3, 2, 0.0, 3.0);
        let v = common::vector(&mut r, 3, -1.0, 1.0);
        let u = common::table(&mut r, 3, 2, -0.5, 0.5);
        let fen = FenchelPair::for_discount(g);
        let z = zeta_star(&u, &m, &mu, &w).unwrap();
        let mb = pop_coral_mb(&m, &mu, &w, &v, &u, &fen).unwrap();
        let mf = pop_coral_mf(&m, &mu, &w, &v, &u, &z, &fen).unwrap();
        prop_assert!((mb - mf).abs() < 1e-8);
        let mut worse = z.clone();
        worse.values[0] *= 1.1;
        prop_assert!(pop_coral_mf(&m, &mu, &w, &v, &u, &worse, &fen).unwrap() <= mf + 1e-12);
    }

    #[test]
    fn alm_penalties_are_nonnegative(seed in any::<u64>()) {
        let mut r = common::rng(seed);
        let (m, mu) = common::cb(&mut r, 2, 3);
        let d = sample_offline(&m, &mu, 50, seed).unwrap().summarize(2, 3).unwrap();
        let w = common::table(&mut r, 2, 3, 0.0, 2.0);
        let v = common::vector(&mut r, 2, -1.0, 1.0);
        let lin = |w: &SaTable| (0..2).flat_map(|s| (0..3).map(move |a| (s, a)))
            .map(|(s, a)| w.get(s, a) * (d.reward_sum(s, a) - v[s] * d.count(s, a) as f64) + v[s] * d.count(s, a) as f64)
            .sum::<f64>() / d.n as f64;
        prop_assert!(lin(&w) - emp_alm_cb(&d, &w, &v, mu.conditional()).unwrap() >= -1e-12);
        let mut feasible = w.clone();
        for s in 0..2 {
            let norm: f64 = (0..3).map(|a| w.get(s, a) * mu.cond(s, a)).sum();
            for a in 0..3 {
                feasible.set(s, a, if norm > 0.0 { w.get(s, a) / norm } else { 1.0 });
            }
        }
        prop_assert!((lin(&feasible) - emp_alm_cb(&d, &feasible, &v, mu.conditional()).unwrap()).abs() < 1e-12);
    }
}
