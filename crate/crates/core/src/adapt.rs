//! Iterative estimation of the partition functions behind the weighting
//! factors `n_k = 1/Z_k`.
//!
//! Each iteration runs a short trajectory with the current guess, measures the
//! fraction of weight `w_k` each temperature receives, and rescales
//! `Z_k ← Z_k · N w_k` (or by the square root of that factor when it falls
//! outside the trust interval). With exact partition functions every `w_k`
//! tends to `1/N`.

use serde::{Deserialize, Serialize};

use crate::dynamics::{Dynamics, IntegratorParams, Simulation, TrajectoryRecord};
use crate::error::{Error, Result};
use crate::ladder::TemperatureLadder;
use crate::potential::Potential;

/// Closed interval of factors `N w_k` that are applied in full.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo > 0.0 && lo < 1.0 && hi > 1.0 && hi.is_finite()) {
            return Err(Error::invalid(format!(
                "trust interval must satisfy 0 < lo < 1 < hi, got [{lo}, {hi}]"
            )));
        }
        Ok(Self { lo, hi })
    }

    pub fn contains(&self, r: f64) -> bool {
        r >= self.lo && r <= self.hi
    }
}

impl Default for Interval {
    fn default() -> Self {
        Self { lo: 0.35, hi: 1.5 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AdaptRecord {
    pub iteration: usize,
    /// `ln Z_k` used for this iteration's trajectory.
    pub log_z: Vec<f64>,
    pub proportions: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AdaptState {
    pub log_z: Vec<f64>,
    pub iteration: usize,
    pub history: Vec<AdaptRecord>,
}

impl AdaptState {
    pub fn new(log_z: Vec<f64>) -> Result<Self> {
        if log_z.is_empty() || log_z.iter().any(|z| !z.is_finite()) {
            return Err(Error::invalid("ln Z estimates must be finite and non-empty"));
        }
        Ok(Self {
            log_z,
            iteration: 0,
            history: Vec::new(),
        })
    }

    pub fn ladder(&self, betas: &[f64]) -> Result<TemperatureLadder> {
        TemperatureLadder::with_log_partition(betas.to_vec(), &self.log_z)
    }

    /// Proportions measured in the latest iteration.
    pub fn last_proportions(&self) -> Option<&[f64]> {
        self.history.last().map(|h| h.proportions.as_slice())
    }
}

/// Largest `|N w_k - 1|`.
pub fn imbalance(proportions: &[f64]) -> f64 {
    let n = proportions.len() as f64;
    proportions
        .iter()
        .map(|w| (n * w - 1.0).abs())
        .fold(0.0, f64::max)
}

/// Mean over recorded samples of `ω_k(x_t)`, recomputed from the recorded energies.
pub fn estimate_proportions(record: &TrajectoryRecord, ladder: &TemperatureLadder) -> Result<Vec<f64>> {
    if record.is_empty() {
        return Err(Error::invalid("cannot estimate proportions from an empty record"));
    }
    let mut acc = ProportionAccumulator::new(ladder.len());
    for &v in &record.energy {
        acc.add(ladder, v);
    }
    Ok(acc.proportions())
}

#[derive(Clone, Debug)]
struct ProportionAccumulator {
    sums: Vec<f64>,
    scratch: Vec<f64>,
    count: usize,
}

impl ProportionAccumulator {
    fn new(len: usize) -> Self {
        Self {
            sums: vec![0.0; len],
            scratch: vec![0.0; len],
            count: 0,
        }
    }

    fn add(&mut self, ladder: &TemperatureLadder, v: f64) {
        ladder.weights_into(v, &mut self.scratch);
        for (s, w) in self.sums.iter_mut().zip(&self.scratch) {
            *s += w;
        }
        self.count += 1;
    }

    fn proportions(&self) -> Vec<f64> {
        let total: f64 = self.sums.iter().sum();
        self.sums.iter().map(|s| s / total).collect()
    }
}

/// One update of `ln Z` from measured proportions. Returns the new state with
/// the iteration counter advanced and `proportions` appended to the history.
pub fn update_weights(state: &AdaptState, proportions: &[f64], interval: Interval) -> Result<AdaptState> {
    if proportions.len() != state.log_z.len() {
        return Err(Error::invalid(format!(
            "{} proportions for {} temperatures",
            proportions.len(),
            state.log_z.len()
        )));
    }
    if let Some((k, &w)) = proportions.iter().enumerate().find(|(_, w)| !(**w > 0.0)) {
        return Err(Error::DegenerateProportion { k, w });
    }
    let n = proportions.len() as f64;
    let log_z = state
        .log_z
        .iter()
        .zip(proportions)
        .map(|(z, w)| {
            let r = n * w;
            if interval.contains(r) {
                z + r.ln()
            } else {
                z + 0.5 * r.ln()
            }
        })
        .collect();
    let mut history = state.history.clone();
    history.push(AdaptRecord {
        iteration: state.iteration + 1,
        log_z: state.log_z.clone(),
        proportions: proportions.to_vec(),
    });
    Ok(AdaptState {
        log_z,
        iteration: state.iteration + 1,
        history,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdaptSettings {
    pub l_max: usize,
    pub steps_per_iter: u64,
    pub interval: Interval,
    /// Stop once every `|N w_k - 1|` is below this.
    pub tolerance: f64,
}

impl Default for AdaptSettings {
    fn default() -> Self {
        Self {
            l_max: 10,
            steps_per_iter: 10_000_000,
            interval: Interval::default(),
            tolerance: 0.05,
        }
    }
}

/// Alternates short trajectories and [`update_weights`] for up to `l_max`
/// iterations. Each trajectory continues from where the previous one ended,
/// on its own noise stream. When the measured proportions are already within
/// `tolerance` the loop stops without changing `ln Z`.
#[allow(clippy::too_many_arguments)]
pub fn adapt_loop<P: Potential + ?Sized>(
    initial_log_z: Vec<f64>,
    betas: &[f64],
    model: &P,
    params: &IntegratorParams,
    dynamics: Dynamics,
    x0: Vec<f64>,
    settings: &AdaptSettings,
) -> Result<AdaptState> {
    if settings.l_max == 0 {
        return Err(Error::invalid("l_max must be >= 1"));
    }
    if settings.steps_per_iter == 0 {
        return Err(Error::invalid("steps_per_iter must be >= 1"));
    }
    if initial_log_z.len() != betas.len() {
        return Err(Error::invalid("one ln Z guess per temperature is required"));
    }
    let mut state = AdaptState::new(initial_log_z)?;
    let mut x = x0;
    let mut p = vec![0.0; x.len()];
    for l in 0..settings.l_max {
        let at = |e: Error| Error::AtIteration {
            iteration: l + 1,
            source: Box::new(e),
        };
        let ladder = state.ladder(betas).map_err(at)?;
        let mut sim = Simulation::new(model, ladder.clone(), *params, dynamics, x, l as u64)
            .and_then(|s| s.with_momenta(p))
            .map_err(at)?;
        let mut acc = ProportionAccumulator::new(ladder.len());
        sim.run_with(settings.steps_per_iter, 1, |s| acc.add(&ladder, s.energy()))
            .map_err(at)?;
        x = sim.x().to_vec();
        p = sim.p().to_vec();
        let w = acc.proportions();
        if imbalance(&w) < settings.tolerance {
            state.iteration += 1;
            state.history.push(AdaptRecord {
                iteration: state.iteration,
                log_z: state.log_z.clone(),
                proportions: w,
            });
            break;
        }
        state = update_weights(&state, &w, settings.interval).map_err(at)?;
    }
    Ok(state)
}
