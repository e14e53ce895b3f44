//! Instance generation and experiment drivers.

use rand::Rng;
use rayon::prelude::*;

use streamalloc::learner::{IFestivalParams, PhasePlan};
use streamalloc::noback::{expected_cost, noback_solve, NobackInstance, NobackUser};
use streamalloc::optimizer::{brute_force_alpha, conc_min};
use streamalloc::simulator::{
    asymptotic_cost, mean_stderr, replication_rng, replication_seed, run_sim, ConsumptionKind,
    PolicySpec, SimOptions, SimRng, SimTrace,
};
use streamalloc::{CostKind, GridProb, Rational, SystemConfig, UserProfile};

use crate::config::{Consumption, ExperimentConfig, ExperimentKind};

/// One line of `results.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub experiment: ExperimentKind,
    pub n: usize,
    pub m: usize,
    /// `None` for rows that do not depend on the channel (the lower bound).
    pub h: Option<f64>,
    pub policy: &'static str,
    pub t: u64,
    pub replications: u64,
    pub seed: u64,
    pub cost_mean: f64,
    pub cost_stderr: f64,
}

impl ResultRow {
    /// Sort key: experiment, n, policy, h (bound rows first), T.
    pub fn canonical_cmp(&self, other: &Self) -> std::cmp::Ordering {
        let h = |r: &Self| r.h.unwrap_or(-1.0);
        (self.experiment, self.n, self.policy)
            .cmp(&(other.experiment, other.n, other.policy))
            .then(h(self).total_cmp(&h(other)))
            .then(self.t.cmp(&other.t))
    }
}

/// Stream seed for cell `(n, k)` of an experiment.
fn cell_seed(seed: u64, n: usize, k: u64) -> u64 {
    replication_seed(replication_seed(seed, n as u64), k)
}

/// Instance RNG for population size `n`; independent of the simulation streams.
pub fn instance_rng(seed: u64, n: usize) -> SimRng {
    replication_rng(seed ^ 0x5EED_1A57_A4CE_0000, n as u64)
}

/// Grid numerators for `n` users: the explicit list if configured, else
/// uniform draws from `z_min..=z_max`.
pub fn draw_rates(cfg: &ExperimentConfig, n: usize, rng: &mut SimRng) -> Vec<GridProb> {
    match &cfg.p {
        Some(p) => p.iter().map(|&z| grid(z, cfg.denom)).collect(),
        None => (0..n).map(|_| grid(rng.random_range(cfg.z_min..=cfg.z_max), cfg.denom)).collect(),
    }
}

fn grid(z: u32, denom: u32) -> GridProb {
    GridProb::new(z, denom).expect("config validation keeps numerators on the grid")
}

/// Users with power-law costs for population size `n`.
pub fn generate_instance(cfg: &ExperimentConfig, n: usize) -> streamalloc::Result<Vec<UserProfile>> {
    let mut rng = instance_rng(cfg.seed, n);
    draw_rates(cfg, n, &mut rng)
        .into_iter()
        .map(|p| UserProfile::power_law(p, cfg.theta))
        .collect()
}

/// Configured `w`, else the smallest `w` valid for the rates, else the value
/// valid for two rates one grid step apart.
pub fn exploration_rounds(cfg: &ExperimentConfig, users: &[UserProfile]) -> u32 {
    if let Some(w) = cfg.w {
        return w;
    }
    let rates: Vec<GridProb> = users.iter().map(|u| u.p).collect();
    PhasePlan::min_valid_w(&rates, cfg.r).unwrap_or_else(|| {
        let step = 1.0 / cfg.denom as f64;
        (2.0 * (cfg.r as f64).ln() / step).floor() as u32 + 1
    })
}

pub fn consumption_kinds(cfg: &ExperimentConfig, users: &[UserProfile]) -> Vec<ConsumptionKind> {
    users
        .iter()
        .map(|u| match cfg.consumption {
            Consumption::Iid => ConsumptionKind::Iid { p: u.p },
            Consumption::Markov { stickiness } => ConsumptionKind::Markov { p: u.p, stickiness },
        })
        .collect()
}

pub fn ifestival_params(cfg: &ExperimentConfig, users: &[UserProfile]) -> IFestivalParams {
    IFestivalParams {
        w: exploration_rounds(cfg, users),
        r: cfg.r,
        denom: cfg.denom,
        cost_kinds: vec![CostKind::PowerLaw { theta: cfg.theta }; users.len()],
    }
}

fn capacity(m: usize) -> Rational {
    Rational::from_integer(m as i64)
}

/// Simulates `cfg.replications` runs of `spec`; replication `k` uses stream `(cell, k)`.
pub fn simulate(
    spec: &PolicySpec,
    users: &[UserProfile],
    cfg: &ExperimentConfig,
    m: usize,
    h: f64,
    cell: u64,
    opts: &SimOptions,
) -> streamalloc::Result<Vec<SimTrace>> {
    let config = SystemConfig::new(users.len(), m, h, cell, cfg.horizon)?;
    let kinds = consumption_kinds(cfg, users);
    (0..cfg.replications)
        .into_par_iter()
        .map(|rep| run_sim(spec, &config, &kinds, opts, &mut replication_rng(cell, rep)))
        .collect()
}

/// Mean and standard error of the finite-horizon cost `sum_i V_i(kappa_i(T))`.
pub fn trace_cost(traces: &[SimTrace], users: &[UserProfile]) -> (f64, f64) {
    let costs: Vec<f64> = traces.iter().map(|t| t.cost(users)).collect();
    mean_stderr(&costs)
}

/// Mean over replications of `sum_i (psi_i(t) - (p_i - alpha_i)^+ t)` at every checkpoint.
pub fn excess_pauses(traces: &[SimTrace], users: &[UserProfile], alpha: &[f64]) -> Vec<(u64, f64)> {
    let Some(first) = traces.first() else {
        return Vec::new();
    };
    (0..first.checkpoints.len())
        .map(|k| {
            let t = first.checkpoints[k].t;
            let total: f64 = traces
                .iter()
                .map(|tr| {
                    users
                        .iter()
                        .zip(alpha)
                        .zip(&tr.checkpoints[k].pauses)
                        .map(|((u, a), &psi)| psi as f64 - (u.p.to_f64() - a).max(0.0) * t as f64)
                        .sum::<f64>()
                })
                .sum();
            (t, total / traces.len() as f64)
        })
        .collect()
}

pub fn run_experiment(cfg: &ExperimentConfig) -> streamalloc::Result<Vec<ResultRow>> {
    let mut rows = Vec::new();
    for &n in &cfg.n {
        let m = cfg.channels(n);
        let row = |policy, h, t, cost_mean, cost_stderr| ResultRow {
            experiment: cfg.experiment,
            n,
            m,
            h,
            policy,
            t,
            replications: cfg.replications,
            seed: cfg.seed,
            cost_mean,
            cost_stderr,
        };
        match cfg.experiment {
            ExperimentKind::Fig2a => {
                let users = generate_instance(cfg, n)?;
                let sol = conc_min(&users, capacity(m))?;
                rows.push(row("benchmark", None, cfg.horizon, sol.cost, 0.0));
                for (k, &h) in cfg.h.iter().enumerate() {
                    let cell = cell_seed(cfg.seed, n, k as u64);
                    let config = SystemConfig::new(n, m, h, cell, cfg.horizon)?;
                    let costs = (0..cfg.replications)
                        .into_par_iter()
                        .map(|rep| asymptotic_cost(&users, &sol.rates, &config, &mut replication_rng(cell, rep)))
                        .collect::<streamalloc::Result<Vec<f64>>>()?;
                    let (mean, se) = mean_stderr(&costs);
                    rows.push(row("allocate_channels", Some(h), cfg.horizon, mean, se));
                }
            }
            ExperimentKind::Fig2b => {
                let users = generate_instance(cfg, n)?;
                let opts = SimOptions { checkpoints: vec![cfg.horizon] };
                let spec = PolicySpec::IFestival(ifestival_params(cfg, &users));
                for (k, &h) in cfg.h.iter().enumerate() {
                    let traces = simulate(&spec, &users, cfg, m, h, cell_seed(cfg.seed, n, k as u64), &opts)?;
                    let (mean, se) = trace_cost(&traces, &users);
                    rows.push(row("ifestival", Some(h), cfg.horizon, mean, se));
                }
                let cell = cell_seed(cfg.seed, n, cfg.h.len() as u64);
                let traces = simulate(&PolicySpec::RoundRobin, &users, cfg, m, 1.0, cell, &opts)?;
                let (mean, se) = trace_cost(&traces, &users);
                rows.push(row("round_robin", Some(1.0), cfg.horizon, mean, se));
            }
            ExperimentKind::Regret => {
                let users = generate_instance(cfg, n)?;
                let bench = conc_min(&users, capacity(m))?.cost;
                let spec = PolicySpec::IFestival(ifestival_params(cfg, &users));
                for (k, &h) in cfg.h.iter().enumerate() {
                    let opts = SimOptions::for_horizon(cfg.horizon);
                    let traces = simulate(&spec, &users, cfg, m, h, cell_seed(cfg.seed, n, k as u64), &opts)?;
                    for (c, cp) in traces[0].checkpoints.iter().enumerate() {
                        let v: Vec<f64> = traces.iter().map(|t| t.checkpoints[c].cost(&users) - bench).collect();
                        let (mean, se) = mean_stderr(&v);
                        rows.push(row("ifestival", Some(h), cp.t, mean, se));
                    }
                }
            }
            ExperimentKind::Noback => {
                let (nb, split): (Vec<f64>, Vec<f64>) = (0..cfg.replications)
                    .into_par_iter()
                    .map(|rep| {
                        let inst = random_noback_instance(n, m, &mut replication_rng(cell_seed(cfg.seed, n, 0), rep))?;
                        let sol = noback_solve(&inst)?;
                        let c = inst.capacity_f64() / n as f64;
                        let equal: Vec<f64> = inst.users.iter().map(|u| c.min(u.b)).collect();
                        Ok((expected_cost(&inst, &sol.rates)?, expected_cost(&inst, &equal)?))
                    })
                    .collect::<streamalloc::Result<Vec<(f64, f64)>>>()?
                    .into_iter()
                    .unzip();
                let (mean, se) = mean_stderr(&nb);
                rows.push(row("noback", None, 0, mean, se));
                let (mean, se) = mean_stderr(&split);
                rows.push(row("equal_split", None, 0, mean, se));
            }
            ExperimentKind::Oracle => {
                let (fast, brute): (Vec<f64>, Vec<f64>) = (0..cfg.replications)
                    .into_par_iter()
                    .map(|rep| {
                        let mut rng = replication_rng(cell_seed(cfg.seed, n, 0), rep);
                        let users = draw_rates(cfg, n, &mut rng)
                            .into_iter()
                            .map(|p| UserProfile::power_law(p, cfg.theta))
                            .collect::<streamalloc::Result<Vec<_>>>()?;
                        let a = conc_min(&users, capacity(m))?.cost;
                        let b = brute_force_alpha(&users, capacity(m))?.cost;
                        if (a - b).abs() > 1e-12 {
                            return Err(streamalloc::Error::Numerical(format!(
                                "solver cost {a} differs from exhaustive cost {b} (n = {n}, replication {rep})"
                            )));
                        }
                        Ok((a, b))
                    })
                    .collect::<streamalloc::Result<Vec<(f64, f64)>>>()?
                    .into_iter()
                    .unzip();
                let (mean, se) = mean_stderr(&fast);
                rows.push(row("conc_min", None, 0, mean, se));
                let (mean, se) = mean_stderr(&brute);
                rows.push(row("brute_force", None, 0, mean, se));
            }
        }
    }
    rows.sort_by(ResultRow::canonical_cmp);
    Ok(rows)
}

/// Uniform-rate instance: weights in `[0.5, 2)`, supports `[a, b]` with
/// `a < 0.5` and width in `[0.1, 0.5)`, capacity `m`.
pub fn random_noback_instance(n: usize, m: usize, rng: &mut SimRng) -> streamalloc::Result<NobackInstance> {
    let users = (0..n)
        .map(|_| {
            let weight = rng.random_range(0.5..2.0);
            let a: f64 = rng.random_range(0.0..0.5);
            let b = (a + rng.random_range(0.1..0.5)).min(1.0);
            NobackUser::uniform(weight, a, b)
        })
        .collect();
    NobackInstance::new(users, capacity(m))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn instances_are_deterministic_and_on_grid() {
        let cfg = ExperimentConfig::defaults(ExperimentKind::Fig2a);
        let a = generate_instance(&cfg, 10).unwrap();
        let b = generate_instance(&cfg, 10).unwrap();
        assert_eq!(a, b);
        assert!(a.iter().all(|u| u.p.denom() == 20 && (8..=16).contains(&u.p.z())));
    }

    #[test]
    fn fallback_w_uses_grid_step() {
        let cfg = ExperimentConfig::defaults(ExperimentKind::Fig2b);
        let g = GridProb::new(10, 20).unwrap();
        let tied = vec![UserProfile::power_law(g, 0.5).unwrap(); 2];
        // 2 ln 2 / 0.05 = 27.7
        assert_eq!(exploration_rounds(&cfg, &tied), 28);
    }

    #[test]
    fn canonical_order() {
        let cfg = ExperimentConfig { n: vec![10], h: vec![0.8, 0.4], horizon: 200, replications: 2, ..ExperimentConfig::defaults(ExperimentKind::Fig2a) };
        let rows = run_experiment(&cfg).unwrap();
        let labels: Vec<(&str, Option<f64>)> = rows.iter().map(|r| (r.policy, r.h)).collect();
        assert_eq!(
            labels,
            vec![("allocate_channels", Some(0.4)), ("allocate_channels", Some(0.8)), ("benchmark", None)]
        );
    }
}
