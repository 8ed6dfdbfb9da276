//! Large-deviation rate functionals of the empirical measure of simulated
//! tempering, evaluated for densities on a 1D grid × temperature index.
//!
//! With `θ = dμ/dϱ` the ratio of a trial density to the joint equilibrium
//! `ϱ(x, β_k) ∝ n_k e^{-β_k V(x)}`:
//!
//! ```text
//! J0(μ) = Σ_k ∫ β_k⁻¹ |∂x θ|² / (4 θ²) μ(dx, β_k)
//! J1(μ) = ½ Σ_k ∫ g_{k k'}(x) (1 - √(θ_{k'}/θ_k))² μ(dx, β_k)
//! I^ν   = J0 + ν J1
//! ```
//!
//! `J1` is defined for two temperatures only. Derivatives use central
//! differences in the interior and second-order one-sided differences at the
//! ends; integrals use the trapezoid rule.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::trapezoid;
use crate::ladder::TemperatureLadder;
use crate::potential::Potential;

/// Tolerance on the total mass of a [`GridDensity`].
pub const MASS_TOLERANCE: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid {
    pub a: f64,
    pub b: f64,
    pub points: usize,
}

impl Grid {
    pub fn new(a: f64, b: f64, points: usize) -> Result<Self> {
        if points < 3 || !(a < b) || !a.is_finite() || !b.is_finite() {
            return Err(Error::invalid(format!("bad grid [{a}, {b}] with {points} points")));
        }
        Ok(Self { a, b, points })
    }

    pub fn spacing(&self) -> f64 {
        (self.b - self.a) / (self.points - 1) as f64
    }

    pub fn nodes(&self) -> Vec<f64> {
        let h = self.spacing();
        (0..self.points).map(|i| self.a + i as f64 * h).collect()
    }

    /// Same interval with twice the resolution.
    pub fn refined(&self) -> Self {
        Self {
            points: 2 * self.points - 1,
            ..*self
        }
    }
}

/// Non-negative values `μ(x_i, β_k)` with unit total mass; indexed `[k][i]`.
#[derive(Clone, Debug, PartialEq)]
pub struct GridDensity {
    pub grid: Grid,
    pub values: Vec<Vec<f64>>,
}

impl GridDensity {
    pub fn new(grid: Grid, values: Vec<Vec<f64>>) -> Result<Self> {
        Self::check_shape(&grid, &values)?;
        let d = Self { grid, values };
        let mass = d.mass();
        if (mass - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::invalid(format!("density has total mass {mass}, expected 1")));
        }
        Ok(d)
    }

    /// Rescales non-negative values to unit mass.
    pub fn normalized(grid: Grid, values: Vec<Vec<f64>>) -> Result<Self> {
        Self::check_shape(&grid, &values)?;
        let mut d = Self { grid, values };
        let mass = d.mass();
        if !(mass > 0.0 && mass.is_finite()) {
            return Err(Error::invalid(format!("cannot normalise density of mass {mass}")));
        }
        d.values.iter_mut().flatten().for_each(|v| *v /= mass);
        Ok(d)
    }

    fn check_shape(grid: &Grid, values: &[Vec<f64>]) -> Result<()> {
        if values.is_empty() {
            return Err(Error::invalid("density needs at least one temperature"));
        }
        if values.iter().any(|row| row.len() != grid.points) {
            return Err(Error::invalid("density rows must match the grid"));
        }
        if values.iter().flatten().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::invalid("density values must be finite and non-negative"));
        }
        Ok(())
    }

    pub fn temperatures(&self) -> usize {
        self.values.len()
    }

    pub fn mass(&self) -> f64 {
        let h = self.grid.spacing();
        self.values.iter().map(|row| trapezoid(row, h)).sum()
    }

    /// Multiplies by `factor(x, k)` and renormalises.
    pub fn perturbed(&self, factor: impl Fn(f64, usize) -> f64) -> Result<Self> {
        let nodes = self.grid.nodes();
        let values = self
            .values
            .iter()
            .enumerate()
            .map(|(k, row)| row.iter().zip(&nodes).map(|(v, &x)| v * factor(x, k)).collect())
            .collect();
        Self::normalized(self.grid, values)
    }

    /// Reads `x,k,value` rows (header required). Nodes must be uniformly spaced.
    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        #[derive(Deserialize)]
        struct Row {
            x: f64,
            k: usize,
            value: f64,
        }
        let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_path(path)?;
        let rows: Vec<Row> = rdr.deserialize().collect::<std::result::Result<_, _>>()?;
        let mut xs: Vec<f64> = rows.iter().map(|r| r.x).collect();
        xs.sort_by(f64::total_cmp);
        xs.dedup();
        let temps = rows.iter().map(|r| r.k).max().map_or(0, |k| k + 1);
        if xs.len() < 3 || temps == 0 {
            return Err(Error::invalid("density file needs at least 3 nodes"));
        }
        let grid = Grid::new(xs[0], xs[xs.len() - 1], xs.len())?;
        let h = grid.spacing();
        if xs.iter().enumerate().any(|(i, x)| (x - (grid.a + i as f64 * h)).abs() > 1e-9 * (1.0 + h)) {
            return Err(Error::invalid("density nodes must be uniformly spaced"));
        }
        let mut values = vec![vec![f64::NAN; xs.len()]; temps];
        for r in rows {
            let i = ((r.x - grid.a) / h).round() as usize;
            values[r.k][i] = r.value;
        }
        if values.iter().flatten().any(|v| v.is_nan()) {
            return Err(Error::invalid("density file does not cover every (x, k) pair"));
        }
        Self::normalized(grid, values)
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["x", "k", "value"])?;
        let nodes = self.grid.nodes();
        for (k, row) in self.values.iter().enumerate() {
            for (x, v) in nodes.iter().zip(row) {
                w.write_record([x.to_string(), k.to_string(), v.to_string()])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

fn one_dimensional<P: Potential + ?Sized>(model: &P) -> Result<()> {
    if model.dimension() == 1 {
        Ok(())
    } else {
        Err(Error::Unsupported(format!(
            "rate functionals are evaluated on a 1D grid; model has dimension {}",
            model.dimension()
        )))
    }
}

fn energies<P: Potential + ?Sized>(grid: &Grid, model: &P) -> Result<Vec<f64>> {
    grid.nodes().iter().map(|&x| model.energy(&[x])).collect()
}

/// `ln ϱ(x_i, β_k)` of the joint equilibrium, normalised on the grid.
fn log_equilibrium<P: Potential + ?Sized>(
    grid: Grid,
    ladder: &TemperatureLadder,
    model: &P,
) -> Result<Vec<Vec<f64>>> {
    one_dimensional(model)?;
    let v = energies(&grid, model)?;
    let log: Vec<Vec<f64>> = ladder
        .betas()
        .iter()
        .zip(ladder.log_n())
        .map(|(b, n)| v.iter().map(|e| n - b * e).collect())
        .collect();
    let max = log.iter().flatten().copied().fold(f64::NEG_INFINITY, f64::max);
    let h = grid.spacing();
    let mass: f64 = log
        .iter()
        .map(|row| trapezoid(&row.iter().map(|a| (a - max).exp()).collect::<Vec<_>>(), h))
        .sum();
    let shift = max + mass.ln();
    Ok(log
        .into_iter()
        .map(|row| row.into_iter().map(|a| a - shift).collect())
        .collect())
}

/// Joint equilibrium `ϱ(x_i, β_k) ∝ n_k e^{-β_k V(x_i)}`, normalised on the grid.
pub fn equilibrium_density<P: Potential + ?Sized>(
    grid: Grid,
    ladder: &TemperatureLadder,
    model: &P,
) -> Result<GridDensity> {
    let values = log_equilibrium(grid, ladder, model)?
        .into_iter()
        .map(|row| row.into_iter().map(f64::exp).collect())
        .collect();
    GridDensity::normalized(grid, values)
}

/// `ln ρ_β` with `ρ_β ∝ e^{-β V}` normalised on its own, per ladder temperature.
fn log_boltzmann_rows(v: &[f64], ladder: &TemperatureLadder, h: f64) -> Vec<Vec<f64>> {
    let min = v.iter().copied().fold(f64::INFINITY, f64::min);
    ladder
        .betas()
        .iter()
        .map(|b| {
            let row: Vec<f64> = v.iter().map(|e| -b * (e - min)).collect();
            let log_z = trapezoid(&row.iter().map(|a| a.exp()).collect::<Vec<_>>(), h).ln();
            row.into_iter().map(|a| a - log_z).collect()
        })
        .collect()
}

/// Equilibrium mass outside `[grid.a, grid.b]`, estimated on `pad`-wide
/// extensions of the grid at the same resolution.
pub fn truncated_mass<P: Potential + ?Sized>(
    grid: Grid,
    ladder: &TemperatureLadder,
    model: &P,
    pad: f64,
) -> Result<f64> {
    one_dimensional(model)?;
    let h = grid.spacing();
    let extra = (pad / h).ceil() as usize;
    let wide = Grid::new(grid.a - extra as f64 * h, grid.b + extra as f64 * h, grid.points + 2 * extra)?;
    let eq = equilibrium_density(wide, ladder, model)?;
    let inside: f64 = eq
        .values
        .iter()
        .map(|row| trapezoid(&row[extra..extra + grid.points], h))
        .sum();
    Ok((1.0 - inside).max(0.0))
}

/// `θ = μ/ϱ` on the grid of `mu`, stored as `ln θ` so that extreme ratios
/// in the tails stay finite.
#[derive(Clone, Debug, PartialEq)]
pub struct ThetaField {
    pub grid: Grid,
    pub log_values: Vec<Vec<f64>>,
}

impl ThetaField {
    pub fn values(&self) -> Vec<Vec<f64>> {
        self.log_values
            .iter()
            .map(|row| row.iter().map(|l| l.exp()).collect())
            .collect()
    }
}

/// Where `ϱ` underflows to zero and `μ` vanishes too, `θ` is set to 1; those
/// nodes carry no mass in any of the functionals.
pub fn theta_from_density<P: Potential + ?Sized>(
    mu: &GridDensity,
    ladder: &TemperatureLadder,
    model: &P,
) -> Result<ThetaField> {
    if mu.temperatures() != ladder.len() {
        return Err(Error::invalid(format!(
            "density has {} temperatures, ladder {}",
            mu.temperatures(),
            ladder.len()
        )));
    }
    let log_eq = log_equilibrium(mu.grid, ladder, model)?;
    let nodes = mu.grid.nodes();
    let mut log_values = Vec::with_capacity(ladder.len());
    for (k, (m_row, e_row)) in mu.values.iter().zip(&log_eq).enumerate() {
        let mut row = Vec::with_capacity(nodes.len());
        for ((m, e), x) in m_row.iter().zip(e_row).zip(&nodes) {
            if *m > 0.0 {
                row.push(m.ln() - e);
            } else if e.exp() > 0.0 {
                return Err(Error::ZeroDensity { x: *x, k });
            } else {
                row.push(0.0);
            }
        }
        log_values.push(row);
    }
    Ok(ThetaField {
        grid: mu.grid,
        log_values,
    })
}

fn derivative(f: &[f64], h: f64) -> Vec<f64> {
    let n = f.len();
    (0..n)
        .map(|i| match i {
            0 => (-3.0 * f[0] + 4.0 * f[1] - f[2]) / (2.0 * h),
            _ if i == n - 1 => (3.0 * f[n - 1] - 4.0 * f[n - 2] + f[n - 3]) / (2.0 * h),
            _ => (f[i + 1] - f[i - 1]) / (2.0 * h),
        })
        .collect()
}

fn check_pair(theta: &ThetaField, mu: &GridDensity, ladder: &TemperatureLadder) -> Result<()> {
    if theta.grid != mu.grid
        || theta.log_values.len() != mu.values.len()
        || mu.values.len() != ladder.len()
        || theta.log_values.iter().any(|row| row.len() != theta.grid.points)
    {
        return Err(Error::invalid("θ, μ, and the ladder must share grid and temperatures"));
    }
    for (k, row) in theta.log_values.iter().enumerate() {
        if let Some(i) = row.iter().position(|l| !l.is_finite()) {
            return Err(Error::ZeroDensity {
                x: theta.grid.a + i as f64 * theta.grid.spacing(),
                k,
            });
        }
    }
    Ok(())
}

/// Diffusive part `J0`, using `|∂x θ|²/θ² = |∂x ln θ|²`.
pub fn rate_j0(theta: &ThetaField, mu: &GridDensity, ladder: &TemperatureLadder) -> Result<f64> {
    check_pair(theta, mu, ladder)?;
    let h = mu.grid.spacing();
    let total = ladder
        .betas()
        .iter()
        .zip(theta.log_values.iter().zip(&mu.values))
        .map(|(beta, (l, m))| {
            let integrand: Vec<f64> = derivative(l, h)
                .iter()
                .zip(m)
                .map(|(d, m)| d * d / (4.0 * beta) * m)
                .collect();
            trapezoid(&integrand, h)
        })
        .sum();
    Ok(total)
}

/// `J0` written against the per-temperature Boltzmann densities,
/// `Σ_k ∫ β_k⁻¹ |∂x θ|² / (8 θ) ρ_{β_k}(dx)`. Coincides with [`rate_j0`] when
/// there are two temperatures and `n_k = 1/Z_k`, where `ϱ(·, β_k) = ρ_{β_k}/2`.
pub fn rate_j0_boltzmann_form<P: Potential + ?Sized>(
    theta: &ThetaField,
    ladder: &TemperatureLadder,
    model: &P,
) -> Result<f64> {
    if theta.log_values.len() != ladder.len() {
        return Err(Error::invalid("θ and ladder differ in temperatures"));
    }
    one_dimensional(model)?;
    let h = theta.grid.spacing();
    let v = energies(&theta.grid, model)?;
    let log_rho = log_boltzmann_rows(&v, ladder, h);
    let total = ladder
        .betas()
        .iter()
        .zip(theta.log_values.iter().zip(&log_rho))
        .map(|(beta, (l, r))| {
            let integrand: Vec<f64> = derivative(l, h)
                .iter()
                .zip(l.iter().zip(r))
                .map(|(d, (l, r))| d * d / (8.0 * beta) * (l + r).exp())
                .collect();
            trapezoid(&integrand, h)
        })
        .sum();
    Ok(total)
}

/// Jump part `J1`; two-temperature ladders only.
pub fn rate_j1<P: Potential + ?Sized>(
    theta: &ThetaField,
    mu: &GridDensity,
    ladder: &TemperatureLadder,
    model: &P,
) -> Result<f64> {
    if ladder.len() != 2 {
        return Err(Error::Unsupported(format!(
            "J1 is defined for two temperatures, ladder has {}",
            ladder.len()
        )));
    }
    check_pair(theta, mu, ladder)?;
    one_dimensional(model)?;
    let h = mu.grid.spacing();
    let v = energies(&mu.grid, model)?;
    let mut total = 0.0;
    for k in 0..2 {
        let other = 1 - k;
        let integrand: Vec<f64> = v
            .iter()
            .enumerate()
            .map(|(i, &e)| {
                // (1 - √(θ'/θ))² μ written as (√μ - √(θ'/θ) √μ)²
                let m = mu.values[k][i];
                if m == 0.0 {
                    return 0.0;
                }
                let g = ladder.acceptance_unchecked(e, k, other);
                let root = m.sqrt();
                let shifted = (0.5 * (theta.log_values[other][i] - theta.log_values[k][i] + m.ln())).exp();
                g * (root - shifted).powi(2)
            })
            .collect();
        total += trapezoid(&integrand, h);
    }
    Ok(0.5 * total)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RateRow {
    pub nu: f64,
    pub j0: f64,
    pub j1: f64,
    pub i: f64,
}

/// `I^ν = J0 + ν J1`.
pub fn rate_i<P: Potential + ?Sized>(
    theta: &ThetaField,
    mu: &GridDensity,
    ladder: &TemperatureLadder,
    model: &P,
    nu: f64,
) -> Result<f64> {
    Ok(rate_rows(theta, mu, ladder, model, &[nu])?[0].i)
}

/// `J0`, `J1` and `I^ν` for each `ν`, computing the functionals once.
pub fn rate_rows<P: Potential + ?Sized>(
    theta: &ThetaField,
    mu: &GridDensity,
    ladder: &TemperatureLadder,
    model: &P,
    nus: &[f64],
) -> Result<Vec<RateRow>> {
    if let Some(nu) = nus.iter().find(|nu| !(**nu >= 0.0 && nu.is_finite())) {
        return Err(Error::invalid(format!("ν must be finite and >= 0, got {nu}")));
    }
    let j0 = rate_j0(theta, mu, ladder)?;
    let j1 = rate_j1(theta, mu, ladder, model)?;
    Ok(nus
        .iter()
        .map(|&nu| RateRow {
            nu,
            j0,
            j1,
            i: j0 + nu * j1,
        })
        .collect())
}
