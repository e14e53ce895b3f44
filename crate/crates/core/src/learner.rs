//! Learning consumption rates from sparse one-bit buffer feedback.
//!
//! Time is split into phases of `(w + 1) * ceil(n b / m)` epochs. Phases whose
//! index is a power of `r` explore: every user is served alone on a channel
//! for `w` epochs in round-robin order and later reports, per served epoch,
//! whether its buffer grew. Since exactly one frame arrives in such an epoch,
//! "no growth" means a frame was consumed, so the share of zero bits estimates
//! `p_i`. Estimates are snapped to the known grid and fed to the concave
//! solver; every other epoch runs channel allocation with the latest rates.

use num_traits::Zero;

use crate::allocator::{max_matching, BipartiteGraph, ChannelAllocator, ChannelMatrix};
use crate::error::{Error, Result};
use crate::model::{CostFunction, CostKind, GridProb, RateVector, Rational, UserProfile};
use crate::optimizer::conc_min;
use crate::simulator::{Policy, SimRng};

/// True iff `tau` is `r^q` for some `q >= 0`.
pub fn is_exploration_phase(tau: u64, r: u64) -> bool {
    if tau == 0 || r < 2 {
        return false;
    }
    let mut t = tau;
    while t.is_multiple_of(r) {
        t /= r;
    }
    t == 1
}

/// Phase geometry for `n` users on `m` channels with unit frame size.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PhasePlan {
    pub w: u32,
    pub r: u32,
    /// `ceil(n b / m)`: epochs per round-robin round, also the feedback window.
    pub round_len: u64,
}

impl PhasePlan {
    pub fn new(n: usize, m: usize, w: u32, r: u32) -> Result<Self> {
        if w < 1 || r < 2 {
            return Err(Error::domain(format!("need w >= 1 and r >= 2, got w = {w}, r = {r}")));
        }
        if n == 0 || m == 0 {
            return Err(Error::domain("need at least one user and one channel"));
        }
        Ok(PhasePlan { w, r, round_len: n.div_ceil(m) as u64 })
    }

    pub fn phase_len(&self) -> u64 {
        (self.w as u64 + 1) * self.round_len
    }

    pub fn exploration_epochs(&self) -> u64 {
        self.w as u64 * self.round_len
    }

    /// 1-based phase index of 1-based epoch `t`.
    pub fn phase_of(&self, t: u64) -> u64 {
        (t - 1) / self.phase_len() + 1
    }

    /// 0-based offset of epoch `t` inside its phase.
    pub fn offset_of(&self, t: u64) -> u64 {
        (t - 1) % self.phase_len()
    }

    pub fn is_exploring(&self, tau: u64) -> bool {
        is_exploration_phase(tau, self.r as u64)
    }

    /// Number of exploration phases that complete by epoch `horizon`.
    pub fn completed_explorations(&self, horizon: u64) -> u64 {
        let full_phases = horizon / self.phase_len();
        let mut count = 0;
        let mut tau = 1u64;
        while tau <= full_phases {
            count += 1;
            match tau.checked_mul(self.r as u64) {
                Some(next) => tau = next,
                None => break,
            }
        }
        count
    }

    /// Smallest `w` satisfying `w > 2 ln r / min_{i != j} |p_i - p_j|`, if the rates are distinct.
    pub fn min_valid_w(rates: &[GridProb], r: u32) -> Option<u32> {
        let mut gap = f64::INFINITY;
        for (i, a) in rates.iter().enumerate() {
            for b in &rates[i + 1..] {
                gap = gap.min((a.to_f64() - b.to_f64()).abs());
            }
        }
        if gap == 0.0 {
            return None;
        }
        if !gap.is_finite() {
            return Some(1);
        }
        Some(((2.0 * (r as f64).ln() / gap).floor() as u32) + 1)
    }
}

/// Running estimate of every user's consumption rate.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorState {
    /// Zero bits (frame consumed) received per user since the start.
    pub zero_counts: Vec<u64>,
    /// Bits received per user; `w * q` unless fading cut rounds short.
    pub valid_bits: Vec<u64>,
    /// Exploration phases processed (`q`).
    pub completed: u32,
    pub p_hat: Vec<GridProb>,
    pub denom: u32,
}

impl EstimatorState {
    /// Before any feedback every user is presumed to consume every epoch.
    pub fn new(n: usize, denom: u32) -> Self {
        EstimatorState {
            zero_counts: vec![0; n],
            valid_bits: vec![0; n],
            completed: 0,
            p_hat: vec![GridProb::one(denom); n],
            denom,
        }
    }
}

/// Folds one exploration phase of feedback into the estimate. `bits[i]` holds
/// user `i`'s bits, `true` meaning its buffer grew. Users without any bit so far
/// keep their previous estimate.
pub fn update_estimates(mut state: EstimatorState, bits: &[Vec<bool>]) -> Result<EstimatorState> {
    if bits.len() != state.zero_counts.len() {
        return Err(Error::domain("feedback does not cover every user"));
    }
    for (i, b) in bits.iter().enumerate() {
        state.zero_counts[i] += b.iter().filter(|&&grew| !grew).count() as u64;
        state.valid_bits[i] += b.len() as u64;
        if state.valid_bits[i] > 0 {
            state.p_hat[i] =
                GridProb::nearest_ratio(state.zero_counts[i], state.valid_bits[i], state.denom);
        }
    }
    state.completed += 1;
    Ok(state)
}

/// Round-robin service during the exploration window of one phase.
#[derive(Debug, Clone, PartialEq)]
struct ExplorationRound {
    remaining: Vec<u32>,
    cursor: usize,
    bits: Vec<Vec<bool>>,
}

impl ExplorationRound {
    fn new(n: usize, w: u32) -> Self {
        ExplorationRound { remaining: vec![w; n], cursor: 0, bits: vec![Vec::new(); n] }
    }
}

/// Which users one exploration epoch serves, walking the rotation from `cursor`.
///
/// A user is admitted only if it can be given a channel that is ON for it while
/// every previously admitted user keeps one; a user that cannot is deferred.
/// Returns `(user, channel)` pairs in rotation order and the number of deferrals.
pub fn explore_allocate(
    remaining: &[u32],
    cursor: usize,
    h: &ChannelMatrix,
) -> (Vec<(usize, usize)>, u32) {
    let n = remaining.len();
    let m = h.channels();
    let mut admitted: Vec<usize> = Vec::new();
    let mut deferred = 0;
    for step in 0..n {
        if admitted.len() == m {
            break;
        }
        let user = (cursor + step) % n;
        if remaining[user] == 0 {
            continue;
        }
        let mut g = BipartiteGraph::new(admitted.len() + 1, m);
        for (l, &u) in admitted.iter().chain(std::iter::once(&user)).enumerate() {
            for ch in 0..m {
                if h.is_on(u, ch) {
                    g.add_edge(l, ch);
                }
            }
        }
        if max_matching(&g).len() == admitted.len() + 1 {
            admitted.push(user);
        } else {
            deferred += 1;
        }
    }
    let mut g = BipartiteGraph::new(admitted.len(), m);
    for (l, &u) in admitted.iter().enumerate() {
        for ch in 0..m {
            if h.is_on(u, ch) {
                g.add_edge(l, ch);
            }
        }
    }
    let mut pairs: Vec<(usize, usize)> =
        max_matching(&g).pairs.into_iter().map(|(l, ch)| (admitted[l], ch)).collect();
    pairs.sort_by_key(|&(u, _)| admitted.iter().position(|&a| a == u));
    (pairs, deferred)
}

#[derive(Debug, Clone, PartialEq)]
pub struct IFestivalParams {
    pub w: u32,
    pub r: u32,
    /// Grid denominator `Z`, known to the scheduler.
    pub denom: u32,
    /// Cost family per user; anchored at the current estimate when solving.
    pub cost_kinds: Vec<CostKind>,
}

/// Emitted at the end of every exploration phase.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseLog {
    pub phase: u64,
    pub exploration: bool,
    pub p_hat: Vec<GridProb>,
    pub alpha_hat: RateVector,
    pub cumulative_bits: u64,
}

/// What the scheduler is doing in a given epoch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EpochRole {
    Explore,
    Feedback,
    Exploit,
}

#[derive(Debug, Clone)]
pub struct IFestival {
    params: IFestivalParams,
    plan: PhasePlan,
    n: usize,
    m: usize,
    capacity: Rational,
    estimator: EstimatorState,
    alpha_hat: RateVector,
    allocator: ChannelAllocator,
    round: Option<ExplorationRound>,
    /// Users served in the current exploration epoch.
    exploring: Vec<usize>,
    feedback_bits: u64,
    deferrals: u64,
    log: Vec<PhaseLog>,
}

impl IFestival {
    pub fn new(params: IFestivalParams, n: usize, m: usize) -> Result<Self> {
        if params.cost_kinds.len() != n {
            return Err(Error::domain("one cost family per user required"));
        }
        let plan = PhasePlan::new(n, m, params.w, params.r)?;
        let capacity = Rational::from_integer(m as i64);
        let estimator = EstimatorState::new(n, params.denom);
        let alpha_hat = solve_rates(&params.cost_kinds, &estimator.p_hat, capacity)?;
        let allocator = ChannelAllocator::new(&alpha_hat, m)?;
        Ok(IFestival {
            params,
            plan,
            n,
            m,
            capacity,
            estimator,
            alpha_hat,
            allocator,
            round: None,
            exploring: Vec::new(),
            feedback_bits: 0,
            deferrals: 0,
            log: Vec::new(),
        })
    }

    pub fn plan(&self) -> PhasePlan {
        self.plan
    }

    pub fn estimator(&self) -> &EstimatorState {
        &self.estimator
    }

    pub fn alpha_hat(&self) -> &RateVector {
        &self.alpha_hat
    }

    pub fn feedback_bits(&self) -> u64 {
        self.feedback_bits
    }

    pub fn deferrals(&self) -> u64 {
        self.deferrals
    }

    pub fn log(&self) -> &[PhaseLog] {
        &self.log
    }

    pub fn role(&self, t: u64) -> EpochRole {
        let tau = self.plan.phase_of(t);
        if !self.plan.is_exploring(tau) {
            EpochRole::Exploit
        } else if self.plan.offset_of(t) < self.plan.exploration_epochs() {
            EpochRole::Explore
        } else {
            EpochRole::Feedback
        }
    }

    /// Channels granted to each user in epoch `t` (1-based).
    pub fn step(&mut self, t: u64, h: &ChannelMatrix, rng: &mut SimRng) -> Vec<u32> {
        self.exploring.clear();
        match self.role(t) {
            EpochRole::Explore => {
                let round = self
                    .round
                    .get_or_insert_with(|| ExplorationRound::new(self.n, self.params.w));
                let (pairs, deferred) = explore_allocate(&round.remaining, round.cursor, h);
                self.deferrals += deferred as u64;
                let mut served = vec![0u32; self.n];
                for &(u, _) in &pairs {
                    served[u] = 1;
                    round.remaining[u] -= 1;
                    self.exploring.push(u);
                }
                if let Some(&(last, _)) = pairs.last() {
                    round.cursor = (last + 1) % self.n;
                }
                served
            }
            EpochRole::Feedback | EpochRole::Exploit => self.allocator.allocate(h, rng).served,
        }
    }

    /// Records buffer growth for the users explored in epoch `t` and, at the
    /// end of an exploration phase, re-estimates and re-solves.
    pub fn record(&mut self, t: u64, grew: &[bool]) -> Result<()> {
        if let Some(round) = self.round.as_mut() {
            for &u in &self.exploring {
                round.bits[u].push(grew[u]);
            }
        }
        let tau = self.plan.phase_of(t);
        let phase_end = self.plan.offset_of(t) + 1 == self.plan.phase_len();
        if phase_end && self.plan.is_exploring(tau) {
            let round = self
                .round
                .take()
                .unwrap_or_else(|| ExplorationRound::new(self.n, self.params.w));
            self.feedback_bits += round.bits.iter().map(|b| b.len() as u64).sum::<u64>();
            let state = std::mem::replace(&mut self.estimator, EstimatorState::new(0, 1));
            self.estimator = update_estimates(state, &round.bits)?;
            self.alpha_hat =
                solve_rates(&self.params.cost_kinds, &self.estimator.p_hat, self.capacity)?;
            self.allocator = ChannelAllocator::new(&self.alpha_hat, self.m)?;
            self.log.push(PhaseLog {
                phase: tau,
                exploration: true,
                p_hat: self.estimator.p_hat.clone(),
                alpha_hat: self.alpha_hat.clone(),
                cumulative_bits: self.feedback_bits,
            });
        }
        Ok(())
    }
}

fn solve_rates(kinds: &[CostKind], p_hat: &[GridProb], capacity: Rational) -> Result<RateVector> {
    if p_hat.iter().all(|p| p.z() == 0) {
        return Ok(RateVector::zeros(p_hat.len()));
    }
    let users = kinds
        .iter()
        .zip(p_hat)
        .map(|(k, &p)| UserProfile::new(p, CostFunction::new(k.clone(), p)?))
        .collect::<Result<Vec<_>>>()?;
    if capacity.is_zero() {
        return Ok(RateVector::zeros(users.len()));
    }
    Ok(conc_min(&users, capacity)?.rates)
}

impl Policy for IFestival {
    fn allocate(&mut self, t: u64, h: &ChannelMatrix, rng: &mut SimRng) -> Vec<u32> {
        self.step(t, h, rng)
    }

    fn observe(&mut self, t: u64, grew: &[bool]) -> Result<()> {
        self.record(t, grew)
    }

    fn feedback_bits(&self) -> u64 {
        self.feedback_bits
    }
}
