//! Integrators for simulated tempering at finite switching rate and for the
//! infinite-switching (ITS) limit.
//!
//! | dynamics     | ν finite                                   | ν = ∞                               |
//! |--------------|--------------------------------------------|-------------------------------------|
//! | overdamped   | Euler–Maruyama, force × β(t)/β_phys, jumps | Euler–Maruyama, force × s(x)        |
//! | Langevin     | BAOAB, force × β(t)/β_phys, jumps          | BAOAB, force × s(x)                 |
//!
//! Noise is always additive at the physical temperature; only the force is
//! rescaled. `s(x)` is [`TemperatureLadder::force_scale`].
//!
//! The free functions (`step_*`, [`attempt_switches`]) are self-contained
//! single steps. [`Simulation`] runs the same updates while caching the force
//! between steps, and is what [`run_trajectory`] and the runner use.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ladder::TemperatureLadder;
use crate::potential::{pair_distance, Potential};

pub type SimRng = ChaCha8Rng;

/// Independent stream `replica` of the generator seeded by `seed`.
pub fn rng_for(seed: u64, replica: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replica);
    rng
}

/// Attempted temperature switches per unit time.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SwitchingRate {
    Finite(f64),
    Infinite,
}

impl SwitchingRate {
    pub fn is_infinite(self) -> bool {
        matches!(self, SwitchingRate::Infinite)
    }
}

impl fmt::Display for SwitchingRate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SwitchingRate::Finite(nu) => write!(f, "{nu}"),
            SwitchingRate::Infinite => f.write_str("inf"),
        }
    }
}

impl FromStr for SwitchingRate {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "inf" | "infinity" | "Inf" | "∞" => Ok(SwitchingRate::Infinite),
            other => other
                .parse::<f64>()
                .map_err(|_| Error::invalid(format!("switching rate `{other}` is neither a number nor `inf`")))
                .and_then(|nu| {
                    if nu.is_infinite() && nu > 0.0 {
                        Ok(SwitchingRate::Infinite)
                    } else if nu >= 0.0 {
                        Ok(SwitchingRate::Finite(nu))
                    } else {
                        Err(Error::invalid(format!("switching rate must be >= 0, got {nu}")))
                    }
                }),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dynamics {
    Overdamped,
    Langevin,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IntegratorParams {
    pub dt: f64,
    pub nu: SwitchingRate,
    pub gamma: f64,
    pub mass: f64,
    pub rng_seed: u64,
}

impl Default for IntegratorParams {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            nu: SwitchingRate::Infinite,
            gamma: 1.0,
            mass: 1.0,
            rng_seed: 0,
        }
    }
}

impl IntegratorParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::invalid(format!("dt must be positive, got {}", self.dt)));
        }
        if let SwitchingRate::Finite(nu) = self.nu {
            if !(nu >= 0.0 && nu.is_finite()) {
                return Err(Error::invalid(format!("nu must be >= 0, got {nu}")));
            }
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(Error::invalid(format!("gamma must be >= 0, got {}", self.gamma)));
        }
        if !(self.mass > 0.0 && self.mass.is_finite()) {
            return Err(Error::invalid(format!("mass must be positive, got {}", self.mass)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OverdampedState {
    pub x: Vec<f64>,
    pub beta_index: usize,
    pub t: f64,
}

impl OverdampedState {
    pub fn new(x: Vec<f64>) -> Self {
        Self {
            x,
            beta_index: 0,
            t: 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LangevinState {
    pub x: Vec<f64>,
    pub p: Vec<f64>,
    /// Only used at finite switching rate.
    pub beta_index: usize,
    pub t: f64,
}

impl LangevinState {
    /// Zero initial momenta.
    pub fn at_rest(x: Vec<f64>) -> Self {
        let p = vec![0.0; x.len()];
        Self {
            x,
            p,
            beta_index: 0,
            t: 0.0,
        }
    }
}

fn check_finite(t: f64, energy: f64, force: &[f64], x: &[f64]) -> Result<()> {
    if energy.is_finite() && force.iter().all(|f| f.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFiniteForce { t, x: x.to_vec() })
    }
}

fn euler_maruyama<R: Rng + ?Sized>(
    x: &mut [f64],
    force: &[f64],
    scale: f64,
    dt: f64,
    beta_phys: f64,
    rng: &mut R,
) {
    let drift = scale * dt;
    let amp = (2.0 * dt / beta_phys).sqrt();
    for (xi, fi) in x.iter_mut().zip(force) {
        let xi_noise: f64 = StandardNormal.sample(rng);
        *xi += drift * fi + amp * xi_noise;
    }
}

fn switch_once<R: Rng + ?Sized>(
    beta_index: usize,
    ladder: &TemperatureLadder,
    v: f64,
    rng: &mut R,
) -> usize {
    let up = rng.random_bool(0.5);
    let proposal = if up {
        beta_index + 1
    } else if beta_index == 0 {
        return beta_index;
    } else {
        beta_index - 1
    };
    if proposal >= ladder.len() {
        return beta_index;
    }
    let g = ladder.acceptance_unchecked(v, beta_index, proposal);
    if rng.random::<f64>() < g {
        proposal
    } else {
        beta_index
    }
}

fn apply_switches<R: Rng + ?Sized>(
    beta_index: &mut usize,
    ladder: &TemperatureLadder,
    v: f64,
    attempts: u64,
    rng: &mut R,
) {
    for _ in 0..attempts {
        *beta_index = switch_once(*beta_index, ladder, v, rng);
    }
}

fn poisson_for(nu: f64, dt: f64) -> Option<Poisson<f64>> {
    let lambda = nu * dt;
    (lambda > 0.0).then(|| Poisson::new(lambda).expect("positive finite Poisson mean"))
}

/// Draws `K ~ Poisson(ν·dt)` switch attempts and applies them in turn at fixed
/// configuration energy `v`. Each attempt proposes the upper or lower
/// neighbour with probability ½; a proposal off the end of the ladder is a
/// rejected no-op. Returns the number of attempts made.
pub fn attempt_switches<R: Rng + ?Sized>(
    beta_index: &mut usize,
    ladder: &TemperatureLadder,
    v: f64,
    nu: f64,
    dt: f64,
    rng: &mut R,
) -> Result<u64> {
    if !(nu >= 0.0 && nu.is_finite()) {
        return Err(Error::invalid(format!("finite switching rate required, got {nu}")));
    }
    if *beta_index >= ladder.len() {
        return Err(Error::IndexOutOfRange {
            index: *beta_index,
            len: ladder.len(),
        });
    }
    let attempts = match poisson_for(nu, dt) {
        Some(p) => p.sample(rng) as u64,
        None => 0,
    };
    apply_switches(beta_index, ladder, v, attempts, rng);
    Ok(attempts)
}

/// One Euler–Maruyama step of `dx = (β_idx/β_phys) f(x) dt + √(2 dt/β_phys) ξ`
/// at the current temperature index, followed by the switching process.
pub fn step_stmd_overdamped<P: Potential + ?Sized, R: Rng + ?Sized>(
    state: &mut OverdampedState,
    ladder: &TemperatureLadder,
    model: &P,
    params: &IntegratorParams,
    rng: &mut R,
) -> Result<()> {
    let SwitchingRate::Finite(nu) = params.nu else {
        return Err(Error::invalid("step_stmd_overdamped needs a finite switching rate"));
    };
    let mut force = vec![0.0; state.x.len()];
    let v = model.energy_force(&state.x, &mut force)?;
    check_finite(state.t, v, &force, &state.x)?;
    let scale = ladder.betas()[state.beta_index] / ladder.beta_phys();
    euler_maruyama(&mut state.x, &force, scale, params.dt, ladder.beta_phys(), rng);
    state.t += params.dt;
    let v_new = model.energy(&state.x)?;
    attempt_switches(&mut state.beta_index, ladder, v_new, nu, params.dt, rng)?;
    Ok(())
}

/// One Euler–Maruyama step of `dx = s(x) f(x) dt + √(2 dt/β_phys) ξ`.
pub fn step_its_overdamped<P: Potential + ?Sized, R: Rng + ?Sized>(
    state: &mut OverdampedState,
    ladder: &TemperatureLadder,
    model: &P,
    params: &IntegratorParams,
    rng: &mut R,
) -> Result<()> {
    let mut force = vec![0.0; state.x.len()];
    let v = model.energy_force(&state.x, &mut force)?;
    check_finite(state.t, v, &force, &state.x)?;
    let scale = ladder.force_scale(v);
    euler_maruyama(&mut state.x, &force, scale, params.dt, ladder.beta_phys(), rng);
    state.t += params.dt;
    Ok(())
}

struct Baoab {
    half_dt: f64,
    inv_mass: f64,
    c1: f64,
    c2: f64,
}

impl Baoab {
    fn new(params: &IntegratorParams, beta_phys: f64) -> Self {
        let c1 = (-params.gamma * params.dt).exp();
        Self {
            half_dt: 0.5 * params.dt,
            inv_mass: 1.0 / params.mass,
            c1,
            c2: ((1.0 - c1 * c1) * params.mass / beta_phys).sqrt(),
        }
    }

    fn kick(&self, p: &mut [f64], force: &[f64], scale: f64) {
        let k = self.half_dt * scale;
        for (pi, fi) in p.iter_mut().zip(force) {
            *pi += k * fi;
        }
    }

    fn drift(&self, x: &mut [f64], p: &[f64]) {
        let k = self.half_dt * self.inv_mass;
        for (xi, pi) in x.iter_mut().zip(p) {
            *xi += k * pi;
        }
    }

    fn thermostat<R: Rng + ?Sized>(&self, p: &mut [f64], rng: &mut R) {
        if self.c2 == 0.0 {
            return;
        }
        for pi in p.iter_mut() {
            let xi: f64 = StandardNormal.sample(rng);
            *pi = self.c1 * *pi + self.c2 * xi;
        }
    }
}

/// One BAOAB step of `dx = p/m dt`, `dp = s(x) f(x) dt - γ p dt + √(2γm/β_phys) dW`.
/// With `γ = 0` this is velocity Verlet on the effective potential.
pub fn step_its_langevin<P: Potential + ?Sized, R: Rng + ?Sized>(
    state: &mut LangevinState,
    ladder: &TemperatureLadder,
    model: &P,
    params: &IntegratorParams,
    rng: &mut R,
) -> Result<()> {
    let scheme = Baoab::new(params, ladder.beta_phys());
    let mut force = vec![0.0; state.x.len()];
    let v = model.energy_force(&state.x, &mut force)?;
    check_finite(state.t, v, &force, &state.x)?;
    scheme.kick(&mut state.p, &force, ladder.force_scale(v));
    scheme.drift(&mut state.x, &state.p);
    scheme.thermostat(&mut state.p, rng);
    scheme.drift(&mut state.x, &state.p);
    let v = model.energy_force(&state.x, &mut force)?;
    check_finite(state.t + params.dt, v, &force, &state.x)?;
    scheme.kick(&mut state.p, &force, ladder.force_scale(v));
    state.t += params.dt;
    Ok(())
}

/// Quantities recorded alongside `t`, `V`, and `ω_0`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Observable {
    Energy,
    Coordinate(usize),
    /// Distance between 2D particles `i` and `j`, minimum-imaged in periodic models.
    PairDistance(usize, usize),
}

impl Observable {
    pub fn evaluate<P: Potential + ?Sized>(&self, model: &P, x: &[f64], energy: f64) -> f64 {
        match *self {
            Observable::Energy => energy,
            Observable::Coordinate(i) => x[i],
            Observable::PairDistance(i, j) => match model.periodic_box() {
                Some(l) => pair_distance(x, i, j, l),
                None => (x[2 * i] - x[2 * j]).hypot(x[2 * i + 1] - x[2 * j + 1]),
            },
        }
    }

    pub fn check<P: Potential + ?Sized>(&self, model: &P) -> Result<()> {
        let d = model.dimension();
        let ok = match *self {
            Observable::Energy => true,
            Observable::Coordinate(i) => i < d,
            Observable::PairDistance(i, j) => i != j && 2 * i.max(j) + 1 < d,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("observable `{self}` does not fit a model of dimension {d}")))
        }
    }
}

impl fmt::Display for Observable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Observable::Energy => f.write_str("energy"),
            Observable::Coordinate(i) => write!(f, "x{i}"),
            Observable::PairDistance(i, j) => write!(f, "r{i}_{j}"),
        }
    }
}

impl FromStr for Observable {
    type Err = Error;

    /// `energy`, `x<i>`, `r<i>_<j>`, or `bond` (= `r0_1`).
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::invalid(format!("unknown observable `{s}`"));
        match s {
            "energy" => Ok(Observable::Energy),
            "bond" => Ok(Observable::PairDistance(0, 1)),
            _ if s.starts_with('x') => s[1..].parse().map(Observable::Coordinate).map_err(|_| bad()),
            _ if s.starts_with('r') => {
                let (i, j) = s[1..].split_once('_').ok_or_else(bad)?;
                Ok(Observable::PairDistance(
                    i.parse().map_err(|_| bad())?,
                    j.parse().map_err(|_| bad())?,
                ))
            }
            _ => Err(bad()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Schedule {
    pub n_steps: u64,
    pub record_stride: u64,
    pub observables: Vec<Observable>,
}

/// Samples taken every `record_stride` steps, starting with the initial state.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrajectoryRecord {
    pub step: Vec<u64>,
    pub t: Vec<f64>,
    pub energy: Vec<f64>,
    pub omega0: Vec<f64>,
    /// Present for finite switching rates only.
    pub beta_index: Option<Vec<usize>>,
    pub observables: Vec<Observable>,
    /// One series per entry of `observables`.
    pub values: Vec<Vec<f64>>,
}

impl TrajectoryRecord {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn series(&self, obs: Observable) -> Option<&[f64]> {
        self.observables
            .iter()
            .position(|o| *o == obs)
            .map(|i| self.values[i].as_slice())
    }

    /// Appends another record with the same observables (e.g. a second replica).
    pub fn extend_from(&mut self, other: &TrajectoryRecord) -> Result<()> {
        if self.observables != other.observables
            || self.beta_index.is_some() != other.beta_index.is_some()
        {
            return Err(Error::invalid("records have different layouts"));
        }
        self.step.extend_from_slice(&other.step);
        self.t.extend_from_slice(&other.t);
        self.energy.extend_from_slice(&other.energy);
        self.omega0.extend_from_slice(&other.omega0);
        if let (Some(a), Some(b)) = (self.beta_index.as_mut(), other.beta_index.as_ref()) {
            a.extend_from_slice(b);
        }
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            a.extend_from_slice(b);
        }
        Ok(())
    }
}

/// A running trajectory: state, generator, and the force cached at the current
/// configuration.
pub struct Simulation<'a, P: Potential + ?Sized> {
    model: &'a P,
    ladder: TemperatureLadder,
    params: IntegratorParams,
    dynamics: Dynamics,
    x: Vec<f64>,
    p: Vec<f64>,
    beta_index: usize,
    t: f64,
    steps: u64,
    energy: f64,
    force: Vec<f64>,
    rng: SimRng,
    poisson: Option<Poisson<f64>>,
    baoab: Baoab,
}

impl<'a, P: Potential + ?Sized> Simulation<'a, P> {
    /// Starts at `x0` in the physical temperature with zero momenta, drawing
    /// noise from stream `replica` of `params.rng_seed`.
    pub fn new(
        model: &'a P,
        ladder: TemperatureLadder,
        params: IntegratorParams,
        dynamics: Dynamics,
        x0: Vec<f64>,
        replica: u64,
    ) -> Result<Self> {
        params.validate()?;
        if x0.len() != model.dimension() {
            return Err(Error::DimensionMismatch {
                expected: model.dimension(),
                got: x0.len(),
            });
        }
        let mut force = vec![0.0; x0.len()];
        let energy = model.energy_force(&x0, &mut force)?;
        check_finite(0.0, energy, &force, &x0)?;
        let poisson = match params.nu {
            SwitchingRate::Finite(nu) => poisson_for(nu, params.dt),
            SwitchingRate::Infinite => None,
        };
        Ok(Self {
            model,
            baoab: Baoab::new(&params, ladder.beta_phys()),
            ladder,
            params,
            dynamics,
            p: vec![0.0; x0.len()],
            x: x0,
            beta_index: 0,
            t: 0.0,
            steps: 0,
            energy,
            force,
            rng: rng_for(params.rng_seed, replica),
            poisson,
        })
    }

    pub fn with_beta_index(mut self, index: usize) -> Result<Self> {
        if index >= self.ladder.len() {
            return Err(Error::IndexOutOfRange {
                index,
                len: self.ladder.len(),
            });
        }
        self.beta_index = index;
        Ok(self)
    }

    pub fn with_momenta(mut self, p: Vec<f64>) -> Result<Self> {
        if p.len() != self.x.len() {
            return Err(Error::DimensionMismatch {
                expected: self.x.len(),
                got: p.len(),
            });
        }
        self.p = p;
        Ok(self)
    }

    pub fn ladder(&self) -> &TemperatureLadder {
        &self.ladder
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn p(&self) -> &[f64] {
        &self.p
    }

    pub fn energy(&self) -> f64 {
        self.energy
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// `None` in the infinite-switching limit.
    pub fn beta_index(&self) -> Option<usize> {
        (!self.params.nu.is_infinite()).then_some(self.beta_index)
    }

    pub fn physical_weight(&self) -> f64 {
        self.ladder.physical_weight(self.energy)
    }

    fn current_scale(&self) -> f64 {
        match self.params.nu {
            SwitchingRate::Infinite => self.ladder.force_scale(self.energy),
            SwitchingRate::Finite(_) => self.ladder.betas()[self.beta_index] / self.ladder.beta_phys(),
        }
    }

    fn refresh_force(&mut self) -> Result<()> {
        self.energy = self.model.energy_force(&self.x, &mut self.force)?;
        check_finite(self.t, self.energy, &self.force, &self.x)
    }

    fn switch(&mut self) {
        if let Some(poisson) = &self.poisson {
            let attempts = poisson.sample(&mut self.rng) as u64;
            apply_switches(&mut self.beta_index, &self.ladder, self.energy, attempts, &mut self.rng);
        }
    }

    pub fn step(&mut self) -> Result<()> {
        self.try_step().map_err(|e| Error::AtStep {
            step: self.steps,
            source: Box::new(e),
        })
    }

    fn try_step(&mut self) -> Result<()> {
        let dt = self.params.dt;
        match self.dynamics {
            Dynamics::Overdamped => {
                let scale = self.current_scale();
                let beta_phys = self.ladder.beta_phys();
                euler_maruyama(&mut self.x, &self.force, scale, dt, beta_phys, &mut self.rng);
                self.t += dt;
                self.refresh_force()?;
            }
            Dynamics::Langevin => {
                let scale = self.current_scale();
                self.baoab.kick(&mut self.p, &self.force, scale);
                self.baoab.drift(&mut self.x, &self.p);
                self.baoab.thermostat(&mut self.p, &mut self.rng);
                self.baoab.drift(&mut self.x, &self.p);
                self.t += dt;
                self.refresh_force()?;
                let scale = self.current_scale();
                self.baoab.kick(&mut self.p, &self.force, scale);
            }
        }
        self.switch();
        self.steps += 1;
        Ok(())
    }

    /// Advances `n_steps`, calling `observe` on the initial state and after
    /// every `stride`-th step.
    pub fn run_with<F>(&mut self, n_steps: u64, stride: u64, mut observe: F) -> Result<()>
    where
        F: FnMut(&Self),
    {
        if stride == 0 {
            return Err(Error::invalid("record stride must be >= 1"));
        }
        observe(self);
        for i in 1..=n_steps {
            self.step()?;
            if i % stride == 0 {
                observe(self);
            }
        }
        Ok(())
    }

    pub fn record(&mut self, schedule: &Schedule) -> Result<TrajectoryRecord> {
        for obs in &schedule.observables {
            obs.check(self.model)?;
        }
        let mut rec = TrajectoryRecord {
            beta_index: self.beta_index().map(|_| Vec::new()),
            observables: schedule.observables.clone(),
            values: vec![Vec::new(); schedule.observables.len()],
            ..Default::default()
        };
        self.run_with(schedule.n_steps, schedule.record_stride, |sim| {
            rec.step.push(sim.steps);
            rec.t.push(sim.t);
            rec.energy.push(sim.energy);
            rec.omega0.push(sim.physical_weight());
            if let (Some(b), Some(k)) = (rec.beta_index.as_mut(), sim.beta_index()) {
                b.push(k);
            }
            for (series, obs) in rec.values.iter_mut().zip(&schedule.observables) {
                series.push(obs.evaluate(sim.model, &sim.x, sim.energy));
            }
        })?;
        Ok(rec)
    }
}

/// Runs a fresh trajectory from `x0` (physical temperature, zero momenta) and
/// records it according to `schedule`. No burn-in is discarded.
pub fn run_trajectory<P: Potential + ?Sized>(
    model: &P,
    ladder: &TemperatureLadder,
    params: &IntegratorParams,
    dynamics: Dynamics,
    x0: Vec<f64>,
    schedule: &Schedule,
) -> Result<TrajectoryRecord> {
    Simulation::new(model, ladder.clone(), *params, dynamics, x0, 0)?.record(schedule)
}
