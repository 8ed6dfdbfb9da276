//! Post-processing of trajectories: reweighted physical-temperature averages,
//! batch asymptotic variance, histograms, and free-energy profiles.

pub mod quadrature;

pub use quadrature::{
    quadrature_reference, quadrature_reference_with, simpson, trapezoid, QuadratureReference,
};

use crate::dynamics::TrajectoryRecord;
use crate::error::{Error, Result};

/// Number of batches behind the standard error of [`reweighted_average`].
pub const SE_BATCHES: usize = 32;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
}

/// Ratio estimator `Σ A_t w_t / Σ w_t` with a batch-means standard error over
/// [`SE_BATCHES`] contiguous batches. Batches with zero total weight are
/// dropped from the error estimate; the standard error is NaN when fewer than
/// two batches remain.
pub fn ratio_estimate(values: &[f64], weights: &[f64]) -> Result<Estimate> {
    if values.len() != weights.len() {
        return Err(Error::invalid(format!(
            "{} values but {} weights",
            values.len(),
            weights.len()
        )));
    }
    let (num, den) = weighted_sums(values, weights);
    if den <= 0.0 {
        return Err(Error::DegenerateWeights);
    }
    let value = num / den;

    let batch = values.len() / SE_BATCHES;
    let ratios: Vec<f64> = if batch == 0 {
        Vec::new()
    } else {
        values
            .chunks_exact(batch)
            .zip(weights.chunks_exact(batch))
            .filter_map(|(a, w)| {
                let (n, d) = weighted_sums(a, w);
                (d > 0.0).then(|| n / d)
            })
            .collect()
    };
    let std_error = if ratios.len() < 2 {
        f64::NAN
    } else {
        (sample_variance(&ratios) / ratios.len() as f64).sqrt()
    };
    Ok(Estimate { value, std_error })
}

fn weighted_sums(values: &[f64], weights: &[f64]) -> (f64, f64) {
    values
        .iter()
        .zip(weights)
        .fold((0.0, 0.0), |(n, d), (a, w)| (n + a * w, d + w))
}

/// Physical-temperature average of `values` (one per record sample), using
/// the recorded `ω_0` as weights.
pub fn reweighted_average(record: &TrajectoryRecord, values: &[f64]) -> Result<Estimate> {
    ratio_estimate(values, &record.omega0)
}

/// Unbiased sample variance; NaN below two samples.
pub fn sample_variance(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return f64::NAN;
    }
    let mean = xs.iter().sum::<f64>() / xs.len() as f64;
    xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (xs.len() - 1) as f64
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AvEntry {
    pub window_size: usize,
    /// Sample variance of the window sums.
    pub av: f64,
    /// Sample variance of the window means times the window size (`av / WS`).
    pub av_mean_scaled: f64,
    pub n_batches: usize,
    /// Set when the window is longer than half the series; `av` is NaN then.
    pub skipped: bool,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct BatchAVReport {
    pub entries: Vec<AvEntry>,
}

impl BatchAVReport {
    pub fn window_sizes(&self) -> Vec<usize> {
        self.entries.iter().map(|e| e.window_size).collect()
    }

    pub fn get(&self, window_size: usize) -> Option<&AvEntry> {
        self.entries.iter().find(|e| e.window_size == window_size)
    }

    pub fn has_skipped(&self) -> bool {
        self.entries.iter().any(|e| e.skipped)
    }
}

fn av_entry(window_size: usize, sums: &[f64], skipped: bool) -> AvEntry {
    let av = if skipped { f64::NAN } else { sample_variance(sums) };
    AvEntry {
        window_size,
        av,
        av_mean_scaled: av / window_size as f64,
        n_batches: sums.len(),
        skipped,
    }
}

/// Batch estimate of the asymptotic variance: split the series into
/// `⌊len/WS⌋` consecutive windows, sum each window, and take the sample
/// variance of the sums. Trailing samples that do not fill a window are
/// discarded; window sizes larger than half the series are flagged as skipped.
pub fn batch_asymptotic_variance(series: &[f64], window_sizes: &[usize]) -> Result<BatchAVReport> {
    if window_sizes.contains(&0) {
        return Err(Error::invalid("window sizes must be positive"));
    }
    let entries = window_sizes
        .iter()
        .map(|&ws| {
            let skipped = 2 * ws > series.len();
            let sums: Vec<f64> = series.chunks_exact(ws).map(|w| w.iter().sum()).collect();
            av_entry(ws, &sums, skipped)
        })
        .collect();
    Ok(BatchAVReport { entries })
}

/// Single-pass version of [`batch_asymptotic_variance`] for series too long
/// to keep in memory.
#[derive(Clone, Debug)]
pub struct StreamingBatchSums {
    windows: Vec<WindowAccumulator>,
    len: usize,
}

#[derive(Clone, Debug)]
struct WindowAccumulator {
    size: usize,
    fill: usize,
    current: f64,
    sums: Vec<f64>,
}

impl StreamingBatchSums {
    pub fn new(window_sizes: &[usize]) -> Result<Self> {
        if window_sizes.contains(&0) {
            return Err(Error::invalid("window sizes must be positive"));
        }
        Ok(Self {
            windows: window_sizes
                .iter()
                .map(|&size| WindowAccumulator {
                    size,
                    fill: 0,
                    current: 0.0,
                    sums: Vec::new(),
                })
                .collect(),
            len: 0,
        })
    }

    pub fn push(&mut self, v: f64) {
        self.len += 1;
        for w in &mut self.windows {
            w.current += v;
            w.fill += 1;
            if w.fill == w.size {
                w.sums.push(w.current);
                w.current = 0.0;
                w.fill = 0;
            }
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn report(&self) -> BatchAVReport {
        BatchAVReport {
            entries: self
                .windows
                .iter()
                .map(|w| av_entry(w.size, &w.sums, 2 * w.size > self.len))
                .collect(),
        }
    }
}

/// Single-pass [`ratio_estimate`] for a series whose length is known up front.
#[derive(Clone, Debug)]
pub struct StreamingRatio {
    batch: usize,
    len: usize,
    num: f64,
    den: f64,
    batch_num: f64,
    batch_den: f64,
    ratios: Vec<f64>,
}

impl StreamingRatio {
    pub fn new(expected_len: usize) -> Self {
        Self {
            batch: expected_len / SE_BATCHES,
            len: 0,
            num: 0.0,
            den: 0.0,
            batch_num: 0.0,
            batch_den: 0.0,
            ratios: Vec::new(),
        }
    }

    pub fn push(&mut self, value: f64, weight: f64) {
        self.len += 1;
        self.num += value * weight;
        self.den += weight;
        if self.batch == 0 {
            return;
        }
        self.batch_num += value * weight;
        self.batch_den += weight;
        if self.len.is_multiple_of(self.batch) {
            if self.batch_den > 0.0 {
                self.ratios.push(self.batch_num / self.batch_den);
            }
            self.batch_num = 0.0;
            self.batch_den = 0.0;
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn estimate(&self) -> Result<Estimate> {
        if self.den <= 0.0 {
            return Err(Error::DegenerateWeights);
        }
        let std_error = if self.ratios.len() < 2 {
            f64::NAN
        } else {
            (sample_variance(&self.ratios) / self.ratios.len() as f64).sqrt()
        };
        Ok(Estimate {
            value: self.num / self.den,
            std_error,
        })
    }
}

/// Fixed-width histogram on `[lo, hi]`; the upper edge belongs to the last bin.
#[derive(Clone, Debug, PartialEq)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    pub counts: Vec<f64>,
    /// Weight of every sample offered, in range or not.
    pub total_weight: f64,
    pub in_range: usize,
}

impl Histogram {
    pub fn new(lo: f64, hi: f64, bins: usize) -> Result<Self> {
        if bins < 2 {
            return Err(Error::invalid("histogram needs at least 2 bins"));
        }
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::invalid(format!("bad histogram range [{lo}, {hi}]")));
        }
        Ok(Self {
            lo,
            hi,
            counts: vec![0.0; bins],
            total_weight: 0.0,
            in_range: 0,
        })
    }

    pub fn bins(&self) -> usize {
        self.counts.len()
    }

    pub fn width(&self) -> f64 {
        (self.hi - self.lo) / self.bins() as f64
    }

    pub fn add(&mut self, x: f64, weight: f64) {
        self.total_weight += weight;
        if !(x >= self.lo && x <= self.hi) {
            return;
        }
        let bin = (((x - self.lo) / self.width()) as usize).min(self.bins() - 1);
        self.counts[bin] += weight;
        self.in_range += 1;
    }

    pub fn edges(&self) -> Vec<f64> {
        let w = self.width();
        (0..=self.bins()).map(|i| self.lo + i as f64 * w).collect()
    }

    pub fn centers(&self) -> Vec<f64> {
        let w = self.width();
        (0..self.bins()).map(|i| self.lo + (i as f64 + 0.5) * w).collect()
    }

    /// Fraction of the total weight in each bin.
    pub fn probabilities(&self) -> Vec<f64> {
        self.counts.iter().map(|c| c / self.total_weight).collect()
    }

    pub fn density(&self) -> Vec<f64> {
        let w = self.width();
        self.probabilities().into_iter().map(|p| p / w).collect()
    }
}

/// Histogram of `values`, optionally weighted (e.g. by `ω_0` for
/// physical-temperature marginals).
pub fn histogram(
    values: &[f64],
    weights: Option<&[f64]>,
    lo: f64,
    hi: f64,
    bins: usize,
) -> Result<Histogram> {
    if let Some(w) = weights {
        if w.len() != values.len() {
            return Err(Error::invalid("weights and values differ in length"));
        }
    }
    let mut h = Histogram::new(lo, hi, bins)?;
    for (i, &x) in values.iter().enumerate() {
        h.add(x, weights.map_or(1.0, |w| w[i]));
    }
    if h.in_range == 0 {
        return Err(Error::EmptyHistogram);
    }
    Ok(h)
}

/// `Σ |p_i - q_i|` over paired bin probabilities.
pub fn l1_distance(p: &[f64], q: &[f64]) -> f64 {
    p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum()
}

#[derive(Clone, Debug, PartialEq)]
pub struct FreeEnergyProfile {
    pub edges: Vec<f64>,
    pub centers: Vec<f64>,
    pub counts: Vec<f64>,
    /// `None` for empty bins. The smallest reported value is 0.
    pub free_energy: Vec<Option<f64>>,
}

impl FreeEnergyProfile {
    pub fn from_histogram(h: &Histogram, beta: f64) -> Result<Self> {
        if h.in_range == 0 || h.counts.iter().all(|c| *c <= 0.0) {
            return Err(Error::EmptyHistogram);
        }
        let w = h.width();
        let raw: Vec<Option<f64>> = h
            .counts
            .iter()
            .map(|&c| (c > 0.0).then(|| -(c / w).ln() / beta))
            .collect();
        let min = raw.iter().flatten().copied().fold(f64::INFINITY, f64::min);
        Ok(Self {
            edges: h.edges(),
            centers: h.centers(),
            counts: h.counts.clone(),
            free_energy: raw.into_iter().map(|f| f.map(|f| f - min)).collect(),
        })
    }

    /// Bin index of the lowest free energy among centres in `[a, b]`.
    pub fn argmin_in(&self, a: f64, b: f64) -> Option<usize> {
        self.reported_in(a, b)
            .min_by(|x, y| x.1.total_cmp(&y.1))
            .map(|(i, _)| i)
    }

    /// Bin index of the highest free energy among centres in `[a, b]`.
    pub fn argmax_in(&self, a: f64, b: f64) -> Option<usize> {
        self.reported_in(a, b)
            .max_by(|x, y| x.1.total_cmp(&y.1))
            .map(|(i, _)| i)
    }

    fn reported_in(&self, a: f64, b: f64) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.centers
            .iter()
            .zip(&self.free_energy)
            .enumerate()
            .filter(move |(_, (c, _))| **c >= a && **c <= b)
            .filter_map(|(i, (_, f))| f.map(|f| (i, f)))
    }
}

/// `F(r) = -(1/β) ln(weighted count / bin width)`, shifted so that its
/// minimum is 0. `weights` are normally the recorded `ω_0`.
pub fn free_energy_profile(
    values: &[f64],
    weights: &[f64],
    lo: f64,
    hi: f64,
    bins: usize,
    beta: f64,
) -> Result<FreeEnergyProfile> {
    let h = histogram(values, Some(weights), lo, hi, bins)?;
    FreeEnergyProfile::from_histogram(&h, beta)
}
