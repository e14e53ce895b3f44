//! Epoch-level simulation of buffers, pauses and channel fading.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::allocator::{max_matching, BipartiteGraph, ChannelAllocator, ChannelMatrix};
use crate::error::{Error, Result};
use crate::learner::{IFestival, IFestivalParams};
use crate::model::{GridProb, RateVector, SystemConfig, UserProfile};

/// Random stream owned by one replication.
pub type SimRng = ChaCha8Rng;

pub const DEFAULT_STICKINESS: f64 = 0.9;

/// Seed of replication `rep` derived from the experiment seed (SplitMix64 finaliser).
pub fn replication_seed(seed: u64, rep: u64) -> u64 {
    let mut z = seed ^ rep.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn replication_rng(seed: u64, rep: u64) -> SimRng {
    SimRng::seed_from_u64(replication_seed(seed, rep))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ConsumptionKind {
    Iid { p: GridProb },
    /// Two-state chain with `P(0 -> 1) = (1 - s) p` and `P(1 -> 0) = (1 - s)(1 - p)`,
    /// whose stationary mean is exactly `p`.
    Markov { p: GridProb, stickiness: f64 },
}

impl ConsumptionKind {
    pub fn rate(&self) -> GridProb {
        match *self {
            ConsumptionKind::Iid { p } | ConsumptionKind::Markov { p, .. } => p,
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            ConsumptionKind::Markov { stickiness, .. } if !(0.0..1.0).contains(&stickiness) => {
                Err(Error::domain(format!("stickiness {stickiness} not in [0, 1)")))
            }
            _ => Ok(()),
        }
    }
}

/// Per-user frame consumption `F_i(t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConsumptionProcess {
    kind: ConsumptionKind,
    p: f64,
    state: bool,
}

impl ConsumptionProcess {
    /// Markov chains start from their stationary distribution.
    pub fn new<R: Rng + ?Sized>(kind: ConsumptionKind, rng: &mut R) -> Result<Self> {
        kind.validate()?;
        let p = kind.rate().to_f64();
        let state = match kind {
            ConsumptionKind::Iid { .. } => false,
            ConsumptionKind::Markov { .. } => rng.random::<f64>() < p,
        };
        Ok(ConsumptionProcess { kind, p, state })
    }

    pub fn kind(&self) -> ConsumptionKind {
        self.kind
    }

    /// Whether a frame is due this epoch.
    pub fn next<R: Rng + ?Sized>(&mut self, rng: &mut R) -> bool {
        match self.kind {
            ConsumptionKind::Iid { .. } => rng.random::<f64>() < self.p,
            ConsumptionKind::Markov { stickiness, .. } => {
                let flip = if self.state {
                    (1.0 - stickiness) * (1.0 - self.p)
                } else {
                    (1.0 - stickiness) * self.p
                };
                if rng.random::<f64>() < flip {
                    self.state = !self.state;
                }
                self.state
            }
        }
    }
}

/// One epoch of buffer dynamics in frame units: frames served this epoch can
/// be played in the same epoch.
pub fn step_buffer(x: u64, served: u32, consume: bool) -> (u64, bool) {
    let avail = x + served as u64;
    if consume {
        (avail.saturating_sub(1), avail == 0)
    } else {
        (avail, false)
    }
}

pub fn sample_channels<R: Rng + ?Sized>(config: &SystemConfig, rng: &mut R) -> ChannelMatrix {
    ChannelMatrix::sample(&config.channel, rng)
}

/// A scheduler driven by the simulator.
pub trait Policy {
    /// Frames granted to each user in epoch `t` (1-based).
    fn allocate(&mut self, t: u64, h: &ChannelMatrix, rng: &mut SimRng) -> Vec<u32>;

    /// Called after buffers are stepped; `grew[i]` is whether user `i`'s buffer increased.
    fn observe(&mut self, _t: u64, _grew: &[bool]) -> Result<()> {
        Ok(())
    }

    fn feedback_bits(&self) -> u64 {
        0
    }
}

/// Channel allocation with fixed target rates.
#[derive(Debug, Clone)]
pub struct StaticPolicy(pub ChannelAllocator);

impl Policy for StaticPolicy {
    fn allocate(&mut self, _t: u64, h: &ChannelMatrix, rng: &mut SimRng) -> Vec<u32> {
        self.0.allocate(h, rng).served
    }
}

/// Serves `min(n, m)` users per epoch in cyclic order, each on a channel ON for it.
#[derive(Debug, Clone)]
pub struct RoundRobin {
    n: usize,
    cursor: usize,
}

impl RoundRobin {
    pub fn new(n: usize) -> Self {
        RoundRobin { n, cursor: 0 }
    }
}

impl Policy for RoundRobin {
    fn allocate(&mut self, _t: u64, h: &ChannelMatrix, _rng: &mut SimRng) -> Vec<u32> {
        let m = h.channels();
        let k = self.n.min(m);
        let chosen: Vec<usize> = (0..k).map(|s| (self.cursor + s) % self.n).collect();
        self.cursor = (self.cursor + k) % self.n;
        let mut g = BipartiteGraph::new(k, m);
        for (l, &u) in chosen.iter().enumerate() {
            for ch in 0..m {
                if h.is_on(u, ch) {
                    g.add_edge(l, ch);
                }
            }
        }
        let mut served = vec![0u32; self.n];
        for (l, _) in max_matching(&g).pairs {
            served[chosen[l]] += 1;
        }
        served
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PolicySpec {
    Static(RateVector),
    IFestival(IFestivalParams),
    RoundRobin,
}

impl PolicySpec {
    pub fn build(&self, n: usize, m: usize) -> Result<Box<dyn Policy + Send>> {
        Ok(match self {
            PolicySpec::Static(alpha) => {
                if alpha.len() != n {
                    return Err(Error::domain("rate vector length does not match user count"));
                }
                Box::new(StaticPolicy(ChannelAllocator::new(alpha, m)?))
            }
            PolicySpec::IFestival(params) => Box::new(IFestival::new(params.clone(), n, m)?),
            PolicySpec::RoundRobin => Box::new(RoundRobin::new(n)),
        })
    }
}

/// Half-decade checkpoints `10^2, 10^2.5, ...` up to `horizon`, always ending at `horizon`.
pub fn log_checkpoints(horizon: u64) -> Vec<u64> {
    let mut out: Vec<u64> = (4..)
        .map(|k| 10f64.powf(k as f64 / 2.0).round() as u64)
        .take_while(|&t| t < horizon)
        .collect();
    out.push(horizon);
    out.dedup();
    out
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SimOptions {
    /// Epochs after which pause counts are snapshotted, ascending.
    pub checkpoints: Vec<u64>,
}

impl SimOptions {
    pub fn for_horizon(horizon: u64) -> Self {
        SimOptions { checkpoints: log_checkpoints(horizon) }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Checkpoint {
    pub t: u64,
    pub pauses: Vec<u64>,
}

impl Checkpoint {
    /// `kappa_i(t) = psi_i(t) / t`.
    pub fn kappa(&self) -> Vec<f64> {
        self.pauses.iter().map(|&p| p as f64 / self.t as f64).collect()
    }

    /// `sum_i V_i(kappa_i(t))`.
    pub fn cost(&self, users: &[UserProfile]) -> f64 {
        users.iter().zip(self.kappa()).map(|(u, k)| u.cost.value(k)).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimTrace {
    pub horizon: u64,
    /// `psi_i(T)`.
    pub pauses: Vec<u64>,
    pub served: Vec<u64>,
    /// Epochs in which a frame was due.
    pub demanded: Vec<u64>,
    pub final_buffer: Vec<u64>,
    pub checkpoints: Vec<Checkpoint>,
    pub feedback_bits: u64,
}

impl SimTrace {
    pub fn kappa(&self) -> Vec<f64> {
        self.pauses.iter().map(|&p| p as f64 / self.horizon as f64).collect()
    }

    pub fn cost(&self, users: &[UserProfile]) -> f64 {
        users.iter().zip(self.kappa()).map(|(u, k)| u.cost.value(k)).sum()
    }
}

/// Simulates `config.horizon` epochs of `policy`.
pub fn run_policy<P: Policy + ?Sized>(
    policy: &mut P,
    config: &SystemConfig,
    consumption: &[ConsumptionKind],
    opts: &SimOptions,
    rng: &mut SimRng,
) -> Result<SimTrace> {
    let n = config.n;
    if consumption.len() != n {
        return Err(Error::domain("one consumption process per user required"));
    }
    if config.frame_mult != 1 {
        return Err(Error::domain("the simulator supports unit frame size only"));
    }
    if config.horizon == 0 {
        return Err(Error::domain("horizon must be at least one epoch"));
    }
    let mut procs = consumption
        .iter()
        .map(|&k| ConsumptionProcess::new(k, rng))
        .collect::<Result<Vec<_>>>()?;
    let ideal = config.channel.is_ideal();
    let mut h = ChannelMatrix::all_on(n, config.m);

    let mut x = vec![0u64; n];
    let mut pauses = vec![0u64; n];
    let mut served_total = vec![0u64; n];
    let mut demanded = vec![0u64; n];
    let mut grew = vec![false; n];
    let mut checkpoints = Vec::with_capacity(opts.checkpoints.len());
    let mut next_cp = opts.checkpoints.iter().copied().filter(|&c| c >= 1).peekable();

    for t in 1..=config.horizon {
        if !ideal {
            h.resample(&config.channel, rng);
        }
        let served = policy.allocate(t, &h, rng);
        for i in 0..n {
            let f = procs[i].next(rng);
            let (x_next, paused) = step_buffer(x[i], served[i], f);
            grew[i] = x_next > x[i];
            x[i] = x_next;
            pauses[i] += paused as u64;
            demanded[i] += f as u64;
            served_total[i] += served[i] as u64;
        }
        policy.observe(t, &grew)?;
        while next_cp.peek() == Some(&t) {
            next_cp.next();
            checkpoints.push(Checkpoint { t, pauses: pauses.clone() });
        }
    }

    Ok(SimTrace {
        horizon: config.horizon,
        pauses,
        served: served_total,
        demanded,
        final_buffer: x,
        checkpoints,
        feedback_bits: policy.feedback_bits(),
    })
}

pub fn run_sim(
    spec: &PolicySpec,
    config: &SystemConfig,
    consumption: &[ConsumptionKind],
    opts: &SimOptions,
    rng: &mut SimRng,
) -> Result<SimTrace> {
    let mut policy = spec.build(config.n, config.m)?;
    run_policy(policy.as_mut(), config, consumption, opts, rng)
}

/// Independent replications `0..reps`, run in parallel; output is in replication order.
pub fn run_replications(
    spec: &PolicySpec,
    config: &SystemConfig,
    consumption: &[ConsumptionKind],
    opts: &SimOptions,
    reps: u64,
) -> Result<Vec<SimTrace>> {
    (0..reps)
        .into_par_iter()
        .map(|rep| {
            let mut rng = replication_rng(config.seed, rep);
            run_sim(spec, config, consumption, opts, &mut rng)
        })
        .collect()
}

/// Per-user long-run service rate of channel allocation with target `alpha`:
/// `alpha_i` minus the mean number of user `i`'s slots left unmatched, over
/// `config.horizon` sampled epochs.
pub fn service_rates(alpha: &RateVector, config: &SystemConfig, rng: &mut SimRng) -> Result<Vec<f64>> {
    let n = config.n;
    if alpha.len() != n {
        return Err(Error::domain("rate vector length does not match user count"));
    }
    let allocator = ChannelAllocator::new(alpha, config.m)?;
    let mut h = ChannelMatrix::all_on(n, config.m);
    let ideal = config.channel.is_ideal();
    let mut lost = vec![0u64; n];
    for _ in 0..config.horizon {
        if !ideal {
            h.resample(&config.channel, rng);
        }
        let a = allocator.allocate(&h, rng);
        for (i, (slots, served)) in a.slots.counts(n).into_iter().zip(&a.served).enumerate() {
            lost[i] += (slots - served) as u64;
        }
    }
    let t = config.horizon.max(1) as f64;
    Ok(alpha.to_f64().iter().zip(&lost).map(|(a, &l)| a - l as f64 / t).collect())
}

/// Long-run cost `sum_i V_i((p_i - s_i)^+)` of allocating towards `alpha`, where
/// `s_i` comes from [`service_rates`]. Matches the limit of `sum_i V_i(kappa_i(T))`
/// for i.i.d. service without the finite-horizon fluctuation term.
pub fn asymptotic_cost(
    users: &[UserProfile],
    alpha: &RateVector,
    config: &SystemConfig,
    rng: &mut SimRng,
) -> Result<f64> {
    let rates = service_rates(alpha, config, rng)?;
    Ok(users.iter().zip(rates).map(|(u, s)| u.cost.value(u.p.to_f64() - s)).sum())
}

/// Mean over replications of `sum_i V_i(kappa_i(t)) - benchmark` at every checkpoint.
pub fn regret_v(traces: &[SimTrace], users: &[UserProfile], benchmark: f64) -> Vec<(u64, f64)> {
    let Some(first) = traces.first() else {
        return Vec::new();
    };
    (0..first.checkpoints.len())
        .map(|k| {
            let mean = traces.iter().map(|tr| tr.checkpoints[k].cost(users)).sum::<f64>()
                / traces.len() as f64;
            (first.checkpoints[k].t, mean - benchmark)
        })
        .collect()
}

/// Sample mean and standard error.
pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}
