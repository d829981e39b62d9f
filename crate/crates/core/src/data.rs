//! Data distribution, offline datasets, and their sufficient statistics.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};

use crate::error::{Error, Result};
use crate::model::{RewardKind, TabularModel};
use crate::table::SaTable;

/// Joint offline law `mu(s, a)` with its marginal and conditionals.
///
/// States with zero mass get a uniform conditional.
#[derive(Debug, Clone, PartialEq)]
pub struct DataDistribution {
    joint: SaTable,
    marginal: Vec<f64>,
    conditional: SaTable,
}

impl DataDistribution {
    pub fn new(joint: SaTable) -> Result<Self> {
        let mut sum = 0.0;
        for (i, &m) in joint.values.iter().enumerate() {
            if !(m >= 0.0) || !m.is_finite() {
                return Err(Error::InvalidDistribution(format!("entry {i} is {m}")));
            }
            sum += m;
        }
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidDistribution(format!("joint sums to {sum}")));
        }
        let (ns, na) = (joint.n_states, joint.n_actions);
        let marginal: Vec<f64> = (0..ns).map(|s| joint.row(s).iter().sum()).collect();
        let conditional = SaTable::from_fn(ns, na, |s, a| {
            if marginal[s] > 0.0 {
                joint.get(s, a) / marginal[s]
            } else {
                1.0 / na as f64
            }
        });
        Ok(Self {
            joint,
            marginal,
            conditional,
        })
    }

    /// Builds `mu(s, a) = mu(s) mu(a|s)`; rows of `conditional` must be distributions.
    pub fn from_conditional(marginal: &[f64], conditional: &SaTable) -> Result<Self> {
        if marginal.len() != conditional.n_states {
            return Err(Error::DimensionMismatch {
                what: "marginal",
                expected: conditional.n_states,
                found: marginal.len(),
            });
        }
        for s in 0..conditional.n_states {
            let sum: f64 = conditional.row(s).iter().sum();
            if (sum - 1.0).abs() > 1e-12 || conditional.row(s).iter().any(|&p| !(p >= 0.0)) {
                return Err(Error::InvalidDistribution(format!("conditional row {s} is not a distribution")));
            }
        }
        let joint = SaTable::from_fn(conditional.n_states, conditional.n_actions, |s, a| {
            marginal[s] * conditional.get(s, a)
        });
        let mut d = Self::new(joint)?;
        for s in 0..conditional.n_states {
            if d.marginal[s] > 0.0 {
                for a in 0..conditional.n_actions {
                    d.conditional.set(s, a, conditional.get(s, a));
                }
            }
        }
        Ok(d)
    }

    pub fn uniform(n_states: usize, n_actions: usize) -> Self {
        let p = 1.0 / (n_states * n_actions) as f64;
        Self::new(SaTable::filled(n_states, n_actions, p)).expect("uniform law is valid")
    }

    pub fn joint(&self) -> &SaTable {
        &self.joint
    }
    pub fn marginal(&self) -> &[f64] {
        &self.marginal
    }
    pub fn conditional(&self) -> &SaTable {
        &self.conditional
    }
    pub fn n_states(&self) -> usize {
        self.joint.n_states
    }
    pub fn n_actions(&self) -> usize {
        self.joint.n_actions
    }

    #[inline]
    pub fn mu(&self, s: usize, a: usize) -> f64 {
        self.joint.get(s, a)
    }

    #[inline]
    pub fn cond(&self, s: usize, a: usize) -> f64 {
        self.conditional.get(s, a)
    }

    pub(crate) fn check_shape(&self, n_states: usize, n_actions: usize) -> Result<()> {
        self.joint.check_shape("data distribution", n_states, n_actions)
    }
}

/// One offline transition `(s, a, r, s')`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub s: usize,
    pub a: usize,
    pub r: f64,
    pub sn: usize,
}

/// One model-data transition `(s, a, s')`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelRecord {
    pub s: usize,
    pub a: usize,
    pub sn: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OfflineDataset {
    pub records: Vec<Transition>,
    pub seed: u64,
    pub source_hash: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InitialDataset {
    pub states: Vec<usize>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelDataset {
    pub records: Vec<ModelRecord>,
    pub seed: u64,
}

/// Counts and reward sums of an offline dataset; every empirical objective
/// is a function of these.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSummary {
    pub n_states: usize,
    pub n_actions: usize,
    pub n: u64,
    pub counts: Vec<u64>,
    pub reward_sums: Vec<f64>,
    pub next_counts: Vec<u64>,
}

impl DatasetSummary {
    pub fn empty(n_states: usize, n_actions: usize) -> Self {
        let sa = n_states * n_actions;
        Self {
            n_states,
            n_actions,
            n: 0,
            counts: vec![0; sa],
            reward_sums: vec![0.0; sa],
            next_counts: vec![0; sa * n_states],
        }
    }

    pub fn from_transitions(n_states: usize, n_actions: usize, records: &[Transition]) -> Result<Self> {
        let mut out = Self::empty(n_states, n_actions);
        for (i, t) in records.iter().enumerate() {
            if t.s >= n_states || t.a >= n_actions || t.sn >= n_states {
                return Err(Error::InvalidArgument(format!("record {i} has indices out of range")));
            }
            if !(0.0..=1.0).contains(&t.r) {
                return Err(Error::InvalidArgument(format!("record {i} has reward {} outside [0, 1]", t.r)));
            }
            out.push(t.s, t.a, t.r, t.sn);
        }
        Ok(out)
    }

    pub fn from_model_records(n_states: usize, n_actions: usize, records: &[ModelRecord]) -> Result<Self> {
        let mut out = Self::empty(n_states, n_actions);
        for (i, t) in records.iter().enumerate() {
            if t.s >= n_states || t.a >= n_actions || t.sn >= n_states {
                return Err(Error::InvalidArgument(format!("record {i} has indices out of range")));
            }
            out.push(t.s, t.a, 0.0, t.sn);
        }
        Ok(out)
    }

    fn push(&mut self, s: usize, a: usize, r: f64, sn: usize) {
        let i = s * self.n_actions + a;
        self.n += 1;
        self.counts[i] += 1;
        self.reward_sums[i] += r;
        self.next_counts[i * self.n_states + sn] += 1;
    }

    #[inline]
    pub fn count(&self, s: usize, a: usize) -> u64 {
        self.counts[s * self.n_actions + a]
    }

    #[inline]
    pub fn reward_sum(&self, s: usize, a: usize) -> f64 {
        self.reward_sums[s * self.n_actions + a]
    }

    #[inline]
    pub fn next_count(&self, s: usize, a: usize, sn: usize) -> u64 {
        self.next_counts[(s * self.n_actions + a) * self.n_states + sn]
    }

    pub fn state_count(&self, s: usize) -> u64 {
        self.counts[s * self.n_actions..(s + 1) * self.n_actions].iter().sum()
    }

    /// Empirical joint frequencies.
    pub fn mu_hat(&self) -> SaTable {
        let n = self.n.max(1) as f64;
        SaTable::new(
            self.n_states,
            self.n_actions,
            self.counts.iter().map(|&c| c as f64 / n).collect(),
        )
        .expect("shape is consistent")
    }
}

/// State counts of an initial-state dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialSummary {
    pub n: u64,
    pub counts: Vec<u64>,
}

impl InitialSummary {
    pub fn from_states(n_states: usize, states: &[usize]) -> Result<Self> {
        let mut counts = vec![0u64; n_states];
        for (i, &s) in states.iter().enumerate() {
            if s >= n_states {
                return Err(Error::InvalidArgument(format!("record {i} has state {s} out of range")));
            }
            counts[s] += 1;
        }
        Ok(Self {
            n: states.len() as u64,
            counts,
        })
    }
}

impl OfflineDataset {
    pub fn summarize(&self, n_states: usize, n_actions: usize) -> Result<DatasetSummary> {
        DatasetSummary::from_transitions(n_states, n_actions, &self.records)
    }
}

impl InitialDataset {
    pub fn summarize(&self, n_states: usize) -> Result<InitialSummary> {
        InitialSummary::from_states(n_states, &self.states)
    }
}

impl ModelDataset {
    pub fn summarize(&self, n_states: usize, n_actions: usize) -> Result<DatasetSummary> {
        DatasetSummary::from_model_records(n_states, n_actions, &self.records)
    }
}

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Counter-based seed derivation: the seed of `(stream, index)` depends only
/// on the master seed and the two counters.
pub fn derive_seed(master: u64, stream: u64, index: u64) -> u64 {
    let a = splitmix64(master ^ splitmix64(stream.wrapping_mul(GOLDEN).wrapping_add(1)));
    splitmix64(a ^ splitmix64(index.wrapping_add(0xA5A5_A5A5)))
}

/// Deterministic generator used by every sampler.
pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Stable 64-bit FNV-1a digest of a model and data law.
pub fn source_hash(model: &TabularModel, mu: &DataDistribution) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    let mut eat = |x: u64| {
        for b in x.to_le_bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    };
    eat(model.n_states() as u64);
    eat(model.n_actions() as u64);
    eat(model.discount().to_bits());
    for &x in model.transitions() {
        eat(x.to_bits());
    }
    for &x in model.reward_means() {
        eat(x.to_bits());
    }
    for &k in model.reward_kinds() {
        eat(matches!(k, RewardKind::Bernoulli) as u64);
    }
    for &x in model.initial() {
        eat(x.to_bits());
    }
    for &x in &mu.joint().values {
        eat(x.to_bits());
    }
    h
}

/// Draws an index from a probability vector.
pub fn categorical<R: RngCore + ?Sized>(rng: &mut R, probs: &[f64]) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p <= 0.0 {
            continue;
        }
        acc += p;
        last = i;
        if u < acc {
            return i;
        }
    }
    last
}

fn sample_reward<R: RngCore + ?Sized>(rng: &mut R, kind: RewardKind, mean: f64) -> f64 {
    match kind {
        RewardKind::Deterministic => mean,
        RewardKind::Bernoulli => {
            if rng.random::<f64>() < mean {
                1.0
            } else {
                0.0
            }
        }
    }
}

fn binomial<R: RngCore + ?Sized>(rng: &mut R, n: u64, p: f64) -> u64 {
    if n == 0 || p <= 0.0 {
        return 0;
    }
    if p >= 1.0 {
        return n;
    }
    Binomial::new(n, p).expect("valid binomial").sample(rng)
}

/// Multinomial draw by sequential conditional binomials.
pub fn multinomial<R: RngCore + ?Sized>(rng: &mut R, n: u64, probs: &[f64], out: &mut [u64]) {
    let mut left = n;
    let mut mass = 1.0;
    let last = probs.iter().rposition(|&p| p > 0.0).unwrap_or(0);
    for (i, &p) in probs.iter().enumerate() {
        if i == last {
            out[i] = left;
            left = 0;
            continue;
        }
        if left == 0 || p <= 0.0 {
            out[i] = 0;
            continue;
        }
        let k = binomial(rng, left, (p / mass).clamp(0.0, 1.0));
        out[i] = k;
        left -= k;
        mass -= p;
        if mass <= 0.0 {
            mass = f64::MIN_POSITIVE;
        }
    }
}

fn check_inputs(model: &TabularModel, mu: &DataDistribution, n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidArgument("sample size must be at least 1".into()));
    }
    mu.check_shape(model.n_states(), model.n_actions())
}

/// i.i.d. offline transitions: `(s, a) ~ mu`, `r ~ R(s, a)`, `s' ~ P(.|s, a)`.
pub fn sample_offline(model: &TabularModel, mu: &DataDistribution, n: usize, seed: u64) -> Result<OfflineDataset> {
    check_inputs(model, mu, n)?;
    let mut rng = rng_from_seed(seed);
    let na = model.n_actions();
    let mut records = Vec::with_capacity(n);
    for _ in 0..n {
        let i = categorical(&mut rng, &mu.joint().values);
        let (s, a) = (i / na, i % na);
        let r = sample_reward(&mut rng, model.reward_kind(s, a), model.reward(s, a));
        let sn = categorical(&mut rng, model.next_row(s, a));
        records.push(Transition { s, a, r, sn });
    }
    Ok(OfflineDataset {
        records,
        seed,
        source_hash: source_hash(model, mu),
    })
}

/// i.i.d. initial states `s ~ rho`.
pub fn sample_initial(model: &TabularModel, n0: usize, seed: u64) -> Result<InitialDataset> {
    if n0 == 0 {
        return Err(Error::InvalidArgument("sample size must be at least 1".into()));
    }
    let mut rng = rng_from_seed(seed);
    let states = (0..n0).map(|_| categorical(&mut rng, model.initial())).collect();
    Ok(InitialDataset { states, seed })
}

/// i.i.d. model-data transitions `(s, a) ~ mu`, `s' ~ P(.|s, a)`.
pub fn sample_model_data(model: &TabularModel, mu: &DataDistribution, nm: usize, seed: u64) -> Result<ModelDataset> {
    check_inputs(model, mu, nm)?;
    let mut rng = rng_from_seed(seed);
    let na = model.n_actions();
    let records = (0..nm)
        .map(|_| {
            let i = categorical(&mut rng, &mu.joint().values);
            let (s, a) = (i / na, i % na);
            let sn = categorical(&mut rng, model.next_row(s, a));
            ModelRecord { s, a, sn }
        })
        .collect();
    Ok(ModelDataset { records, seed })
}

/// Draws the summary of an `n`-record offline dataset directly; the result
/// has the same law as summarizing [`sample_offline`] output.
pub fn sample_offline_summary<R: RngCore + ?Sized>(
    model: &TabularModel,
    mu: &DataDistribution,
    n: usize,
    rng: &mut R,
) -> Result<DatasetSummary> {
    check_inputs(model, mu, n)?;
    let (ns, na) = (model.n_states(), model.n_actions());
    let mut out = DatasetSummary::empty(ns, na);
    out.n = n as u64;
    multinomial(rng, n as u64, &mu.joint().values, &mut out.counts);
    for s in 0..ns {
        for a in 0..na {
            let i = s * na + a;
            let c = out.counts[i];
            if c == 0 {
                continue;
            }
            let mean = model.reward(s, a);
            out.reward_sums[i] = match model.reward_kind(s, a) {
                RewardKind::Deterministic => c as f64 * mean,
                RewardKind::Bernoulli => binomial(rng, c, mean) as f64,
            };
            multinomial(rng, c, model.next_row(s, a), &mut out.next_counts[i * ns..(i + 1) * ns]);
        }
    }
    Ok(out)
}

/// Draws the summary of an `n0`-state initial dataset directly.
pub fn sample_initial_summary<R: RngCore + ?Sized>(model: &TabularModel, n0: usize, rng: &mut R) -> Result<InitialSummary> {
    if n0 == 0 {
        return Err(Error::InvalidArgument("sample size must be at least 1".into()));
    }
    let mut counts = vec![0; model.n_states()];
    multinomial(rng, n0 as u64, model.initial(), &mut counts);
    Ok(InitialSummary { n: n0 as u64, counts })
}
