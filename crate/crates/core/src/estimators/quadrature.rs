//! Reference values for separable low-dimensional models by quadrature.
//!
//! The double well factorises into a quartic factor in `x0` (integrated
//! numerically) and Gaussian factors for the remaining coordinates
//! (integrated analytically), so partition functions, mean energies and the
//! mixture marginal in `x0` are available to near machine precision.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::ladder::{log_sum_exp, TemperatureLadder};
use crate::potential::{DoubleWell, Model};

/// Integration interval for `x0` is `[-HALF_WIDTH, HALF_WIDTH]`.
pub const HALF_WIDTH: f64 = 4.0;
pub const POINTS: usize = 20_001;

/// Composite Simpson rule over equally spaced samples; needs an odd count >= 3.
pub fn simpson(values: &[f64], h: f64) -> f64 {
    let n = values.len();
    assert!(n >= 3 && n % 2 == 1, "simpson needs an odd number of samples >= 3");
    let odd: f64 = values[1..n - 1].iter().step_by(2).sum();
    let even: f64 = values[2..n - 1].iter().step_by(2).sum();
    h / 3.0 * (values[0] + values[n - 1] + 4.0 * odd + 2.0 * even)
}

/// Composite trapezoid rule over equally spaced samples.
pub fn trapezoid(values: &[f64], h: f64) -> f64 {
    match values.len() {
        0 | 1 => 0.0,
        n => h * (values[1..n - 1].iter().sum::<f64>() + 0.5 * (values[0] + values[n - 1])),
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum FirstCoordinate {
    DoubleWell,
    Harmonic(f64),
}

impl FirstCoordinate {
    fn energy(self, x0: f64) -> f64 {
        match self {
            FirstCoordinate::DoubleWell => DoubleWell::well(x0),
            FirstCoordinate::Harmonic(k) => 0.5 * k * x0 * x0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct QuadratureReference {
    pub betas: Vec<f64>,
    pub log_n: Vec<f64>,
    /// `ln Z_β` of the full model, one per ladder temperature.
    pub log_z: Vec<f64>,
    /// `⟨V⟩_β`, one per ladder temperature.
    pub mean_energy: Vec<f64>,
    /// Estimated relative quadrature error of each `Z_β`.
    pub rel_error: Vec<f64>,
    pub grid: Vec<f64>,
    /// Mixture marginal `ϱ(x0)` on `grid`.
    pub density: Vec<f64>,
    first: FirstCoordinate,
    /// `ln` of the Gaussian factors over coordinates `1..D`, per temperature.
    rest_log_z: Vec<f64>,
    /// `ln Σ_k n_k Z_k`.
    log_norm: f64,
}

impl QuadratureReference {
    pub fn z(&self, k: usize) -> f64 {
        self.log_z[k].exp()
    }

    /// `ln n_k = -ln Z_k`, the weighting factors that equalise time spent at
    /// each temperature.
    pub fn oracle_log_n(&self) -> Vec<f64> {
        self.log_z.iter().map(|z| -z).collect()
    }

    pub fn oracle_ladder(&self) -> Result<TemperatureLadder> {
        TemperatureLadder::new(self.betas.clone(), self.oracle_log_n())
    }

    /// Joint equilibrium density of `(x0, β_k)`, marginalised over the other coordinates.
    pub fn component_density(&self, x0: f64, k: usize) -> f64 {
        (self.log_n[k] - self.betas[k] * self.first.energy(x0) + self.rest_log_z[k] - self.log_norm).exp()
    }

    /// `ϱ(x0) = Σ_k` [`component_density`](Self::component_density).
    pub fn mixture_density(&self, x0: f64) -> f64 {
        let v = self.first.energy(x0);
        let terms: Vec<f64> = (0..self.betas.len())
            .map(|k| self.log_n[k] - self.betas[k] * v + self.rest_log_z[k])
            .collect();
        (log_sum_exp(&terms) - self.log_norm).exp()
    }

    /// Mixture probability of each of `bins` equal bins on `[lo, hi]`.
    pub fn bin_probabilities(&self, lo: f64, hi: f64, bins: usize) -> Vec<f64> {
        const SUB: usize = 64;
        let w = (hi - lo) / bins as f64;
        let h = w / SUB as f64;
        (0..bins)
            .map(|b| {
                let a = lo + b as f64 * w;
                let f: Vec<f64> = (0..=SUB).map(|i| self.mixture_density(a + i as f64 * h)).collect();
                simpson(&f, h)
            })
            .collect()
    }
}

struct FirstFactor {
    log_z: f64,
    mean: f64,
    rel_error: f64,
}

fn integrate_first(first: FirstCoordinate, beta: f64, points: usize) -> FirstFactor {
    if let FirstCoordinate::Harmonic(k) = first {
        return FirstFactor {
            log_z: 0.5 * (2.0 * PI / (beta * k)).ln(),
            mean: 0.5 / beta,
            rel_error: 0.0,
        };
    }
    let (grid, h) = uniform_grid(points);
    let v: Vec<f64> = grid.iter().map(|&x| first.energy(x)).collect();
    let v_min = v.iter().copied().fold(f64::INFINITY, f64::min);
    let boltz: Vec<f64> = v.iter().map(|e| (-beta * (e - v_min)).exp()).collect();
    let moment: Vec<f64> = boltz.iter().zip(&v).map(|(b, e)| b * e).collect();
    let z = simpson(&boltz, h);
    let coarse: Vec<f64> = boltz.iter().step_by(2).copied().collect();
    let z_coarse = simpson(&coarse, 2.0 * h);
    // Richardson estimate for the fine rule plus a bound on the truncated tails
    let tail = (boltz[0] + boltz[points - 1]) / (beta * 200.0);
    FirstFactor {
        log_z: z.ln() - beta * v_min,
        mean: simpson(&moment, h) / z,
        rel_error: ((z - z_coarse).abs() / 15.0 + tail) / z,
    }
}

fn uniform_grid(points: usize) -> (Vec<f64>, f64) {
    let h = 2.0 * HALF_WIDTH / (points - 1) as f64;
    ((0..points).map(|i| -HALF_WIDTH + i as f64 * h).collect(), h)
}

/// Partition functions, mean energies and the mixture marginal of `x0` for a
/// separable model at every temperature of `ladder`.
pub fn quadrature_reference(model: &Model, ladder: &TemperatureLadder) -> Result<QuadratureReference> {
    quadrature_reference_with(model, ladder, POINTS)
}

/// As [`quadrature_reference`] with a custom odd number of grid points.
pub fn quadrature_reference_with(
    model: &Model,
    ladder: &TemperatureLadder,
    points: usize,
) -> Result<QuadratureReference> {
    if points < 5 || points % 4 != 1 {
        return Err(Error::invalid("quadrature needs 4m + 1 grid points"));
    }
    let (first, rest): (FirstCoordinate, Vec<f64>) = match model {
        Model::DoubleWell(m) => (FirstCoordinate::DoubleWell, m.stiffness().to_vec()),
        Model::Harmonic(m) => (
            FirstCoordinate::Harmonic(m.stiffness),
            vec![m.stiffness; m.dimension - 1],
        ),
        other => {
            return Err(Error::Unsupported(format!(
                "quadrature reference needs a separable model, got `{}`",
                other.name()
            )))
        }
    };

    let mut log_z = Vec::with_capacity(ladder.len());
    let mut mean_energy = Vec::with_capacity(ladder.len());
    let mut rel_error = Vec::with_capacity(ladder.len());
    let mut rest_log_z = Vec::with_capacity(ladder.len());
    for &beta in ladder.betas() {
        let f = integrate_first(first, beta, points);
        let r: f64 = rest.iter().map(|l| 0.5 * (2.0 * PI / (beta * l)).ln()).sum();
        log_z.push(f.log_z + r);
        mean_energy.push(f.mean + rest.len() as f64 / (2.0 * beta));
        rel_error.push(f.rel_error);
        rest_log_z.push(r);
    }
    let log_norm = log_sum_exp(
        &ladder
            .log_n()
            .iter()
            .zip(&log_z)
            .map(|(n, z)| n + z)
            .collect::<Vec<_>>(),
    );

    let (grid, _) = uniform_grid(points);
    let mut reference = QuadratureReference {
        betas: ladder.betas().to_vec(),
        log_n: ladder.log_n().to_vec(),
        log_z,
        mean_energy,
        rel_error,
        grid: Vec::new(),
        density: Vec::new(),
        first,
        rest_log_z,
        log_norm,
    };
    reference.density = grid.iter().map(|&x| reference.mixture_density(x)).collect();
    reference.grid = grid;
    Ok(reference)
}
