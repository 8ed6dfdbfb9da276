//! The four experiment commands behind the `tempering` binary, usable as a
//! library as well. Each writes CSV files (one-line header, `#` comments, no
//! timestamps) plus a `manifest.toml` echoing the resolved configuration.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adapt::{adapt_loop, AdaptState};
use crate::config::{ExperimentConfig, WeightSource};
use crate::dynamics::{Observable, Simulation};
use crate::error::{Error, Result};
use crate::estimators::{
    quadrature_reference, quadrature_reference_with, BatchAVReport, Estimate, FreeEnergyProfile, Histogram,
    QuadratureReference, StreamingBatchSums, StreamingRatio,
};
use crate::ladder::TemperatureLadder;
use crate::ldp::{
    equilibrium_density, rate_j0_boltzmann_form, rate_rows, theta_from_density, truncated_mass, Grid,
    GridDensity,
};
use crate::potential::Model;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Largest equilibrium mass allowed outside the LDP grid.
pub const TAIL_MASS_LIMIT: f64 = 1e-12;

/// Command-line settings layered on top of a config file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut ExperimentConfig) {
        if let Some(seed) = self.seed {
            cfg.dynamics.seed = seed;
        }
        if let Some(out) = &self.out {
            cfg.output.dir = out.clone();
        }
    }
}

/// A hint printed next to errors that have a known fix.
pub fn remediation(err: &Error) -> Option<&'static str> {
    match err {
        Error::AtIteration { source, .. } | Error::AtStep { source, .. } => remediation(source),
        Error::DegenerateProportion { .. } => {
            Some("a temperature was never visited; increase adapt.steps_per_iter or improve adapt.initial_z")
        }
        Error::NonFiniteForce { .. } => Some("the integrator diverged; reduce dynamics.dt"),
        _ => None,
    }
}

struct CsvOut {
    writer: csv::Writer<BufWriter<File>>,
}

impl CsvOut {
    fn create(path: &Path, comments: &[String]) -> Result<Self> {
        let mut file = BufWriter::new(File::create(path)?);
        for c in comments {
            writeln!(file, "# {c}")?;
        }
        Ok(Self {
            writer: csv::Writer::from_writer(file),
        })
    }

    fn row<I, S>(&mut self, fields: I) -> Result<()>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.writer.write_record(fields)?;
        Ok(())
    }

    fn finish(mut self) -> Result<()> {
        self.writer.flush()?;
        Ok(())
    }
}

fn comments(command: &str, cfg: &ExperimentConfig) -> Vec<String> {
    vec![
        format!("tempering {VERSION}"),
        format!("command: {command}"),
        format!("model: {}", cfg.model.build().map(|m| m.name()).unwrap_or("?")),
        format!("seed: {}", cfg.dynamics.seed),
    ]
}

fn write_manifest(dir: &Path, command: &str, cfg: &ExperimentConfig, replicas: usize) -> Result<()> {
    let mut text = format!(
        "# resolved configuration; every default is spelled out\ncommand = \"{command}\"\nversion = \"{VERSION}\"\nseed = {}\nreplicas = {replicas}\n\n",
        cfg.dynamics.seed
    );
    text.push_str(&cfg.to_toml());
    std::fs::write(dir.join("manifest.toml"), text)?;
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct LadderRow {
    k: usize,
    beta: f64,
    log_n: f64,
}

/// Writes `k,beta,log_n` rows readable by [`read_ladder`].
pub fn write_ladder(path: &Path, ladder: &TemperatureLadder, comment: &[String]) -> Result<()> {
    let mut out = CsvOut::create(path, comment)?;
    out.row(["k", "beta", "log_n"])?;
    for (k, (b, n)) in ladder.betas().iter().zip(ladder.log_n()).enumerate() {
        out.row([k.to_string(), b.to_string(), n.to_string()])?;
    }
    out.finish()
}

pub fn read_ladder(path: &Path) -> Result<TemperatureLadder> {
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_path(path)?;
    let mut rows: Vec<LadderRow> = rdr.deserialize().collect::<std::result::Result<_, _>>()?;
    rows.sort_by_key(|r| r.k);
    if rows.iter().enumerate().any(|(i, r)| r.k != i) {
        return Err(Error::invalid(format!("{}: temperature indices must be 0..N", path.display())));
    }
    TemperatureLadder::new(
        rows.iter().map(|r| r.beta).collect(),
        rows.iter().map(|r| r.log_n).collect(),
    )
}

/// The ladder a config asks for. Adaptive weights are not resolved here; see
/// [`cmd_adapt`].
pub fn configured_ladder(cfg: &ExperimentConfig, model: &Model) -> Result<TemperatureLadder> {
    let betas = cfg.ladder.betas.clone();
    match cfg.ladder.weights {
        WeightSource::Explicit => TemperatureLadder::new(betas, cfg.ladder.log_n.clone()),
        WeightSource::Uniform => TemperatureLadder::uniform(betas),
        WeightSource::Oracle => {
            let q = quadrature_reference(model, &TemperatureLadder::uniform(betas)?)?;
            q.oracle_ladder()
        }
        WeightSource::File => {
            let path = cfg.ladder.file.as_ref().expect("validated");
            let ladder = read_ladder(path)?;
            let same = ladder.len() == betas.len()
                && ladder
                    .betas()
                    .iter()
                    .zip(&betas)
                    .all(|(a, b)| (a - b).abs() <= 1e-12 * b.abs());
            if !same {
                return Err(Error::config(
                    "ladder.file",
                    format!("temperatures in {} differ from ladder.betas", path.display()),
                ));
            }
            Ok(ladder)
        }
        WeightSource::Adaptive => Err(Error::config(
            "ladder.weights",
            "adaptive weights must be resolved by the adapt command",
        )),
    }
}

/// Per-replica results of [`cmd_run`].
#[derive(Clone, Debug)]
pub struct ReplicaReport {
    pub replica: usize,
    pub observables: Vec<Observable>,
    /// Reweighted physical-temperature average of each observable.
    pub averages: Vec<Estimate>,
    /// Batch asymptotic variance of each observable's per-step series.
    pub av: Vec<BatchAVReport>,
    /// Unweighted (mixture) histogram of the histogram observable.
    pub mixture: Histogram,
    /// `ω_0`-weighted (physical) histogram of the histogram observable.
    pub physical: Histogram,
}

#[derive(Clone, Debug)]
pub struct RunReport {
    pub ladder: TemperatureLadder,
    pub replicas: Vec<ReplicaReport>,
}

fn replica_dir(out: &Path, replica: usize, replicas: usize) -> PathBuf {
    if replicas == 1 {
        out.to_path_buf()
    } else {
        out.join(format!("replica-{replica:03}"))
    }
}

fn run_replica(
    cfg: &ExperimentConfig,
    model: &Model,
    ladder: &TemperatureLadder,
    replica: usize,
    dir: &Path,
) -> Result<ReplicaReport> {
    std::fs::create_dir_all(dir)?;
    let observables = cfg.estimator.parsed_observables()?;
    let hist_obs = cfg.estimator.parsed_histogram_observable()?;
    let n_steps = cfg.dynamics.steps();
    let stride = cfg.dynamics.record_stride;
    let [lo, hi] = cfg.estimator.histogram_range;
    let bins = cfg.estimator.histogram_bins;

    let mut sim = Simulation::new(
        model,
        ladder.clone(),
        cfg.dynamics.params(),
        cfg.dynamics.kind,
        model.initial_configuration(),
        replica as u64,
    )?;
    let switching = sim.beta_index().is_some();

    let mut header = comments("run", cfg);
    header.push(format!("replica: {replica}"));
    let mut traj = CsvOut::create(&dir.join("trajectory.csv"), &header)?;
    let mut cols: Vec<String> = ["step", "t", "V", "omega0"].map(String::from).to_vec();
    if switching {
        cols.push("beta_index".into());
    }
    cols.extend(observables.iter().map(|o| o.to_string()));
    traj.row(&cols)?;

    let mut ratios = vec![StreamingRatio::new(n_steps as usize + 1); observables.len()];
    let mut sums = observables
        .iter()
        .map(|_| StreamingBatchSums::new(&cfg.estimator.window_sizes))
        .collect::<Result<Vec<_>>>()?;
    let mut mixture = Histogram::new(lo, hi, bins)?;
    let mut physical = Histogram::new(lo, hi, bins)?;
    let mut values = vec![0.0; observables.len()];
    let mut row = Vec::with_capacity(cols.len());
    let mut io_error = None;

    sim.run_with(n_steps, 1, |s| {
        let omega0 = s.physical_weight();
        for (v, obs) in values.iter_mut().zip(&observables) {
            *v = obs.evaluate(model, s.x(), s.energy());
        }
        for ((v, r), b) in values.iter().zip(&mut ratios).zip(&mut sums) {
            r.push(*v, omega0);
            b.push(*v);
        }
        let h = hist_obs.evaluate(model, s.x(), s.energy());
        mixture.add(h, 1.0);
        physical.add(h, omega0);
        if s.steps() % stride == 0 && io_error.is_none() {
            row.clear();
            row.push(s.steps().to_string());
            row.push(s.t().to_string());
            row.push(s.energy().to_string());
            row.push(omega0.to_string());
            if let Some(k) = s.beta_index() {
                row.push(k.to_string());
            }
            row.extend(values.iter().map(f64::to_string));
            if let Err(e) = traj.row(&row) {
                io_error = Some(e);
            }
        }
    })?;
    if let Some(e) = io_error {
        return Err(e);
    }
    traj.finish()?;

    Ok(ReplicaReport {
        replica,
        averages: ratios.iter().map(StreamingRatio::estimate).collect::<Result<_>>()?,
        av: sums.iter().map(StreamingBatchSums::report).collect(),
        observables,
        mixture,
        physical,
    })
}

/// Runs `replicas` independent trajectories (noise streams `0..replicas`
/// of the configured seed) and writes `trajectory.csv` per replica plus
/// merged `summary.csv`, `av.csv`, `histogram.csv`, and `manifest.toml`.
pub fn cmd_run(cfg: &ExperimentConfig, replicas: usize) -> Result<RunReport> {
    if replicas == 0 {
        return Err(Error::config("replicas", "must be >= 1"));
    }
    let model = cfg.model.build()?;
    let out = cfg.output.dir.clone();
    std::fs::create_dir_all(&out)?;
    let ladder = if cfg.ladder.weights == WeightSource::Adaptive {
        adapt_into(cfg, &model, &out)?.ladder(&cfg.ladder.betas)?
    } else {
        configured_ladder(cfg, &model)?
    };
    write_manifest(&out, "run", cfg, replicas)?;
    write_ladder(&out.join("ladder.csv"), &ladder, &comments("run", cfg))?;

    let reports = (0..replicas)
        .into_par_iter()
        .map(|r| run_replica(cfg, &model, &ladder, r, &replica_dir(&out, r, replicas)))
        .collect::<Result<Vec<_>>>()?;

    let head = comments("run", cfg);
    let mut summary = CsvOut::create(&out.join("summary.csv"), &head)?;
    summary.row(["replica", "observable", "average", "std_error"])?;
    for rep in &reports {
        for (obs, est) in rep.observables.iter().zip(&rep.averages) {
            summary.row([
                rep.replica.to_string(),
                obs.to_string(),
                est.value.to_string(),
                est.std_error.to_string(),
            ])?;
        }
    }
    if replicas > 1 {
        for (i, obs) in reports[0].observables.iter().enumerate() {
            let k = replicas as f64;
            let mean = reports.iter().map(|r| r.averages[i].value).sum::<f64>() / k;
            let se = reports.iter().map(|r| r.averages[i].std_error.powi(2)).sum::<f64>().sqrt() / k;
            summary.row(["all".to_string(), obs.to_string(), mean.to_string(), se.to_string()])?;
        }
    }
    summary.finish()?;

    let mut av = CsvOut::create(&out.join("av.csv"), &head)?;
    av.row(["replica", "observable", "window_size", "av", "av_per_ws", "n_batches", "skipped"])?;
    for rep in &reports {
        for (obs, report) in rep.observables.iter().zip(&rep.av) {
            for e in &report.entries {
                av.row([
                    rep.replica.to_string(),
                    obs.to_string(),
                    e.window_size.to_string(),
                    e.av.to_string(),
                    e.av_mean_scaled.to_string(),
                    e.n_batches.to_string(),
                    e.skipped.to_string(),
                ])?;
            }
        }
    }
    av.finish()?;

    let mut mixture = reports[0].mixture.clone();
    let mut physical = reports[0].physical.clone();
    for rep in &reports[1..] {
        merge_histogram(&mut mixture, &rep.mixture);
        merge_histogram(&mut physical, &rep.physical);
    }
    let profile = FreeEnergyProfile::from_histogram(&physical, ladder.beta_phys())?;
    let mut hist = CsvOut::create(&out.join("histogram.csv"), &head)?;
    hist.row(["lo", "hi", "mixture", "physical", "free_energy"])?;
    let edges = mixture.edges();
    for (b, ((m, p), f)) in mixture
        .probabilities()
        .iter()
        .zip(physical.probabilities())
        .zip(&profile.free_energy)
        .enumerate()
    {
        hist.row([
            edges[b].to_string(),
            edges[b + 1].to_string(),
            m.to_string(),
            p.to_string(),
            f.map_or_else(String::new, |f| f.to_string()),
        ])?;
    }
    hist.finish()?;

    Ok(RunReport {
        ladder,
        replicas: reports,
    })
}

fn merge_histogram(into: &mut Histogram, other: &Histogram) {
    for (a, b) in into.counts.iter_mut().zip(&other.counts) {
        *a += b;
    }
    into.total_weight += other.total_weight;
    into.in_range += other.in_range;
}

fn adapt_into(cfg: &ExperimentConfig, model: &Model, out: &Path) -> Result<AdaptState> {
    let settings = cfg.adapt.settings(cfg.dynamics.paper_scale)?;
    let log_z: Vec<f64> = cfg.adapt.initial_z.iter().map(|z| z.ln()).collect();
    let state = adapt_loop(
        log_z,
        &cfg.ladder.betas,
        model,
        &cfg.dynamics.params(),
        cfg.dynamics.kind,
        model.initial_configuration(),
        &settings,
    )?;
    let head = comments("adapt", cfg);
    let mut hist = CsvOut::create(&out.join("adapt_history.csv"), &head)?;
    hist.row(["iteration", "k", "beta", "log_z", "proportion"])?;
    for rec in &state.history {
        for (k, (z, w)) in rec.log_z.iter().zip(&rec.proportions).enumerate() {
            hist.row([
                rec.iteration.to_string(),
                k.to_string(),
                cfg.ladder.betas[k].to_string(),
                z.to_string(),
                w.to_string(),
            ])?;
        }
    }
    hist.finish()?;
    write_ladder(&out.join("ladder.csv"), &state.ladder(&cfg.ladder.betas)?, &head)?;
    Ok(state)
}

/// Runs the adaptive weight loop from `adapt.initial_z` and writes
/// `adapt_history.csv` and the resulting `ladder.csv`.
pub fn cmd_adapt(cfg: &ExperimentConfig) -> Result<AdaptState> {
    if cfg.adapt.initial_z.len() != cfg.ladder.betas.len() {
        return Err(Error::config("adapt.initial_z", "one guess per temperature is required"));
    }
    let model = cfg.model.build()?;
    let out = cfg.output.dir.clone();
    std::fs::create_dir_all(&out)?;
    write_manifest(&out, "adapt", cfg, 1)?;
    adapt_into(cfg, &model, &out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct LdpRecord {
    pub density: String,
    pub alpha: f64,
    pub wavenumber: f64,
    pub nu: f64,
    pub j0: f64,
    pub j1: f64,
    pub i: f64,
    pub j0_boltzmann: f64,
}

/// Evaluates the rate functionals at the equilibrium density, at
/// `θ = 1 + α sin(k x)` on the hottest temperature for every configured
/// `(α, k)`, and at `ldp.density_file` if given. Writes `ldp.csv`.
pub fn cmd_ldp(cfg: &ExperimentConfig) -> Result<Vec<LdpRecord>> {
    let model = cfg.model.build()?;
    let ladder = configured_ladder(cfg, &model)?;
    let grid = Grid::new(cfg.ldp.grid[0], cfg.ldp.grid[1], cfg.ldp.grid_points)?;
    let tail = truncated_mass(grid, &ladder, &model, 4.0)?;
    if tail > TAIL_MASS_LIMIT {
        return Err(Error::config(
            "ldp.grid",
            format!("equilibrium mass {tail:e} lies outside the grid (limit {TAIL_MASS_LIMIT:e}); widen it"),
        ));
    }
    let eq = equilibrium_density(grid, &ladder, &model)?;
    let hot = ladder.len() - 1;

    let mut cases: Vec<(String, f64, f64, GridDensity)> = vec![("equilibrium".into(), 0.0, 0.0, eq.clone())];
    for &k in &cfg.ldp.wavenumbers {
        for &alpha in &cfg.ldp.alphas {
            let mu = eq.perturbed(|x, t| if t == hot { 1.0 + alpha * (k * x).sin() } else { 1.0 })?;
            cases.push(("sine".into(), alpha, k, mu));
        }
    }
    if let Some(path) = &cfg.ldp.density_file {
        cases.push(("file".into(), f64::NAN, f64::NAN, GridDensity::read_csv(path)?));
    }

    let mut records = Vec::new();
    for (name, alpha, k, mu) in cases {
        let theta = theta_from_density(&mu, &ladder, &model)?;
        let j0_b = rate_j0_boltzmann_form(&theta, &ladder, &model)?;
        for row in rate_rows(&theta, &mu, &ladder, &model, &cfg.ldp.nus)? {
            records.push(LdpRecord {
                density: name.clone(),
                alpha,
                wavenumber: k,
                nu: row.nu,
                j0: row.j0,
                j1: row.j1,
                i: row.i,
                j0_boltzmann: j0_b,
            });
        }
    }

    let out = cfg.output.dir.clone();
    std::fs::create_dir_all(&out)?;
    write_manifest(&out, "ldp", cfg, 1)?;
    let mut head = comments("ldp", cfg);
    head.push(format!("equilibrium mass outside grid: {tail:e}"));
    let mut csv = CsvOut::create(&out.join("ldp.csv"), &head)?;
    csv.row(["density", "alpha", "wavenumber", "nu", "j0", "j1", "i", "j0_boltzmann"])?;
    for r in &records {
        csv.row([
            r.density.clone(),
            r.alpha.to_string(),
            r.wavenumber.to_string(),
            r.nu.to_string(),
            r.j0.to_string(),
            r.j1.to_string(),
            r.i.to_string(),
            r.j0_boltzmann.to_string(),
        ])?;
    }
    csv.finish()?;
    Ok(records)
}

/// Quadrature reference for the configured ladder: `reference.csv` with
/// `ln Z_β`, `⟨V⟩_β` per temperature, `reference_density.csv` with the
/// gridded mixture and component densities of `x0`, and a `ladder.csv`
/// carrying `n_k = 1/Z_k`.
pub fn cmd_reference(cfg: &ExperimentConfig) -> Result<QuadratureReference> {
    let model = cfg.model.build()?;
    let ladder = match cfg.ladder.weights {
        WeightSource::Adaptive => TemperatureLadder::uniform(cfg.ladder.betas.clone())?,
        _ => configured_ladder(cfg, &model)?,
    };
    let q = quadrature_reference_with(&model, &ladder, cfg.reference.points)?;
    let out = cfg.output.dir.clone();
    std::fs::create_dir_all(&out)?;
    write_manifest(&out, "reference", cfg, 1)?;
    let head = comments("reference", cfg);

    let mut csv = CsvOut::create(&out.join("reference.csv"), &head)?;
    csv.row(["k", "beta", "log_z", "z", "mean_energy", "rel_error"])?;
    for k in 0..q.betas.len() {
        csv.row([
            k.to_string(),
            q.betas[k].to_string(),
            q.log_z[k].to_string(),
            q.z(k).to_string(),
            q.mean_energy[k].to_string(),
            q.rel_error[k].to_string(),
        ])?;
    }
    csv.finish()?;

    let mut dens = CsvOut::create(&out.join("reference_density.csv"), &head)?;
    let mut cols = vec!["x".to_string(), "mixture".to_string()];
    cols.extend((0..q.betas.len()).map(|k| format!("component_{k}")));
    dens.row(&cols)?;
    let n = cfg.reference.density_points;
    let half = crate::estimators::quadrature::HALF_WIDTH;
    for i in 0..n {
        let x = -half + 2.0 * half * i as f64 / (n - 1) as f64;
        let mut row = vec![x.to_string(), q.mixture_density(x).to_string()];
        row.extend((0..q.betas.len()).map(|k| q.component_density(x, k).to_string()));
        dens.row(&row)?;
    }
    dens.finish()?;

    write_ladder(&out.join("ladder.csv"), &q.oracle_ladder()?, &head)?;
    Ok(q)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(dir: &Path) -> ExperimentConfig {
        let mut cfg = ExperimentConfig::from_toml(
            "[ladder]\nbetas = [4.0, 2.0]\n[dynamics]\nn_steps = 2000\nrecord_stride = 10\ndt = 0.01\n[estimator]\nwindow_sizes = [10, 100]\n",
        )
        .unwrap();
        cfg.output.dir = dir.to_path_buf();
        cfg
    }

    #[test]
    fn ladder_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let ladder = TemperatureLadder::new(vec![3.0, 1.5, 0.1], vec![0.25, -1.0 / 3.0, 7.0]).unwrap();
        let path = dir.path().join("ladder.csv");
        write_ladder(&path, &ladder, &["x".into()]).unwrap();
        assert_eq!(read_ladder(&path).unwrap(), ladder);
    }

    #[test]
    fn run_writes_all_reports() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = small(dir.path());
        let report = cmd_run(&cfg, 2).unwrap();
        assert_eq!(report.replicas.len(), 2);
        for f in ["manifest.toml", "summary.csv", "av.csv", "histogram.csv", "ladder.csv"] {
            assert!(dir.path().join(f).exists(), "{f}");
        }
        let traj = std::fs::read_to_string(dir.path().join("replica-001/trajectory.csv")).unwrap();
        let body: Vec<&str> = traj.lines().filter(|l| !l.starts_with('#')).collect();
        assert_eq!(body[0], "step,t,V,omega0,energy,x0");
        assert_eq!(body.len(), 1 + 201);
        let manifest = std::fs::read_to_string(dir.path().join("manifest.toml")).unwrap();
        let parsed: toml::Table = manifest.parse().unwrap();
        assert_eq!(parsed["replicas"].as_integer(), Some(2));
        assert!(manifest.contains("window_sizes = [10, 100]"));
    }

    #[test]
    fn adaptive_run_needs_guesses() {
        let text = "[ladder]\nbetas = [4.0, 2.0]\nweights = \"adaptive\"\n";
        assert!(matches!(ExperimentConfig::from_toml(text), Err(Error::Config { .. })));
    }

    #[test]
    fn remediation_sees_through_wrappers() {
        let e = Error::AtIteration {
            iteration: 2,
            source: Box::new(Error::DegenerateProportion { k: 1, w: 0.0 }),
        };
        assert!(remediation(&e).unwrap().contains("steps_per_iter"));
        assert!(remediation(&Error::DegenerateWeights).is_none());
    }
}
