use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

const BIN: &str = env!("CARGO_BIN_EXE_tempering");

fn tempering(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(BIN);
    cmd.args(args);
    for (k, _) in std::env::vars().filter(|(k, _)| k.starts_with("TEMPERING")) {
        cmd.env_remove(k);
    }
    cmd.envs(envs.iter().copied());
    cmd.output().expect("binary runs")
}

fn write_cfg(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("exp.cfg");
    std::fs::write(&path, text).unwrap();
    path
}

/// Rows of a CSV written by the tool, skipping `#` comments and the header.
fn rows(path: &Path) -> Vec<Vec<String>> {
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_path(path).unwrap();
    rdr.records()
        .map(|r| r.unwrap().iter().map(str::to_string).collect())
        .collect()
}

fn header(path: &Path) -> Vec<String> {
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_path(path).unwrap();
    rdr.headers().unwrap().iter().map(str::to_string).collect()
}

fn num(s: &str) -> f64 {
    s.parse().unwrap()
}

fn run_ok(args: &[&str], envs: &[(&str, &str)]) {
    let out = tempering(args, envs);
    assert!(
        out.status.success(),
        "{args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn reference_harmonic_matches_gaussian_integral() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(
        dir.path(),
        "[model]\nname = \"harmonic\"\ndimension = 3\nstiffness = [2.0]\n[ladder]\nbetas = [4.0, 1.0]\nweights = \"uniform\"\n",
    );
    let out = dir.path().join("out");
    run_ok(&["reference", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()], &[]);
    for row in rows(&out.join("reference.csv")) {
        let beta = num(&row[1]);
        let z = (2.0 * std::f64::consts::PI / (beta * 2.0)).sqrt().powi(3);
        assert!((num(&row[3]) - z).abs() <= 1e-12 * z, "{row:?}");
        assert!((num(&row[4]) - 1.5 / beta).abs() < 1e-12);
    }
}

#[test]
fn reference_is_stable_under_refinement() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), "[ladder]\nbetas = [25.0]\nweights = \"uniform\"\n");
    let log_z = |points: &str, sub: &str| {
        let out = dir.path().join(sub);
        run_ok(
            &["reference", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()],
            &[("TEMPERING__REFERENCE__POINTS", points)],
        );
        num(&rows(&out.join("reference.csv"))[0][3])
    };
    let (a, b) = (log_z("20001", "a"), log_z("40001", "b"));
    assert!((a - b).abs() <= 1e-8 * b, "{a} vs {b}");
}

#[test]
fn reference_ladder_feeds_run() {
    let dir = tempfile::tempdir().unwrap();
    let text = "[ladder]\nbetas = [8.0, 4.0, 2.0]\nweights = \"uniform\"\n[dynamics]\nn_steps = 500\nrecord_stride = 50\n";
    let cfg = write_cfg(dir.path(), text);
    let refdir = dir.path().join("ref");
    run_ok(&["reference", "--config", cfg.to_str().unwrap(), "--out", refdir.to_str().unwrap()], &[]);

    let with_file = "[ladder]\nbetas = [8.0, 4.0, 2.0]\nweights = \"file\"\nfile = \"ref/ladder.csv\"\n[dynamics]\nn_steps = 500\nrecord_stride = 50\n";
    let cfg_file = write_cfg(dir.path(), with_file);
    let a = dir.path().join("a");
    run_ok(&["run", "--config", cfg_file.to_str().unwrap(), "--out", a.to_str().unwrap()], &[]);

    let oracle = text.replace("uniform", "oracle");
    let cfg_oracle = write_cfg(dir.path(), &oracle);
    let b = dir.path().join("b");
    run_ok(&["run", "--config", cfg_oracle.to_str().unwrap(), "--out", b.to_str().unwrap()], &[]);

    assert_eq!(rows(&a.join("ladder.csv")), rows(&b.join("ladder.csv")));
    assert_eq!(rows(&a.join("trajectory.csv")), rows(&b.join("trajectory.csv")));
}

#[test]
fn single_temperature_its_is_plain_overdamped_langevin() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(
        dir.path(),
        "[ladder]\nbetas = [3.0]\nweights = \"uniform\"\n[dynamics]\nnu = \"inf\"\ndt = 0.01\nn_steps = 1000\nrecord_stride = 1\nseed = 11\n",
    );
    let out = dir.path().join("out");
    run_ok(&["run", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()], &[]);
    let traj = rows(&out.join("trajectory.csv"));
    assert_eq!(header(&out.join("trajectory.csv")), ["step", "t", "V", "omega0", "energy", "x0"]);

    let mut rng = ChaCha8Rng::seed_from_u64(11);
    rng.set_stream(0);
    let (beta, dt) = (3.0, 0.01);
    let mut x = 1.0f64;
    for row in &traj {
        assert!((num(&row[5]) - x).abs() <= 1e-12, "step {}: {} vs {x}", row[0], row[5]);
        assert_eq!(num(&row[3]), 1.0);
        let force = 4.0 * x * (1.0 - x * x) + 0.25;
        let xi: f64 = StandardNormal.sample(&mut rng);
        x += force * dt + (2.0 * dt / beta).sqrt() * xi;
    }
}

#[test]
fn run_outputs_and_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(
        dir.path(),
        "[ladder]\nbetas = [6.0, 3.0]\n[dynamics]\nnu = 1.0\nn_steps = 4000\nrecord_stride = 100\n[estimator]\nwindow_sizes = [10, 100, 5000]\n",
    );
    let out = dir.path().join("out");
    run_ok(
        &["run", "--config", cfg.to_str().unwrap(), "--seed", "5", "--out", out.to_str().unwrap()],
        &[("TEMPERING__DYNAMICS__N_STEPS", "2000")],
    );
    let traj = out.join("trajectory.csv");
    assert_eq!(header(&traj), ["step", "t", "V", "omega0", "beta_index", "energy", "x0"]);
    assert_eq!(rows(&traj).len(), 21);
    let text = std::fs::read_to_string(&traj).unwrap();
    assert!(text.starts_with("# tempering "));
    assert!(text.contains("# seed: 5"));

    let manifest: toml::Table = std::fs::read_to_string(out.join("manifest.toml")).unwrap().parse().unwrap();
    assert_eq!(manifest["seed"].as_integer(), Some(5));
    assert_eq!(manifest["dynamics"]["n_steps"].as_integer(), Some(2000));
    assert_eq!(manifest["dynamics"]["gamma"].as_float(), Some(1.0));
    assert_eq!(manifest["ladder"]["weights"].as_str(), Some("oracle"));

    let av = rows(&out.join("av.csv"));
    let skipped: Vec<bool> = av.iter().filter(|r| r[1] == "energy").map(|r| r[6] == "true").collect();
    assert_eq!(skipped, [false, false, true]);
    let summary = rows(&out.join("summary.csv"));
    assert_eq!(summary.len(), 2);
    assert!(summary.iter().all(|r| num(&r[2]).is_finite()));
}

#[test]
fn replicas_get_their_own_directories() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), "[ladder]\nbetas = [6.0, 3.0]\n[dynamics]\nn_steps = 300\nrecord_stride = 30\n");
    let out = dir.path().join("out");
    run_ok(
        &["run", "--config", cfg.to_str().unwrap(), "--replicas", "3", "--out", out.to_str().unwrap()],
        &[],
    );
    for r in 0..3 {
        assert!(out.join(format!("replica-{r:03}/trajectory.csv")).exists());
    }
    let summary = rows(&out.join("summary.csv"));
    assert_eq!(summary.iter().filter(|r| r[0] == "all").count(), 2);
    assert_eq!(summary.len(), 3 * 2 + 2);
}

#[test]
fn config_errors_exit_nonzero_with_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), "[dynamics]\ndt = 0.01\nstpes = 3\n");
    let out = tempering(&["run", "--config", cfg.to_str().unwrap()], &[]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("stpes"), "{err}");

    let cfg = write_cfg(dir.path(), "[ladder]\nbetas = [1.0, 2.0]\n");
    let out = tempering(&["run", "--config", cfg.to_str().unwrap()], &[]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("ladder.betas"));

    let cfg = write_cfg(dir.path(), "[model]\nname = \"wca_dimer\"\n[ladder]\nbetas = [5.0, 1.0]\nweights = \"uniform\"\n[estimator]\nobservables = [\"bond\"]\nhistogram_observable = \"bond\"\n");
    let out = tempering(&["reference", "--config", cfg.to_str().unwrap()], &[]);
    assert!(!out.status.success());
}

#[test]
fn adapt_writes_history_and_keeps_a_converged_start() {
    let dir = tempfile::tempdir().unwrap();
    // ln Z from quadrature for β = (5, 1), then Z = e^{ln Z}
    let refcfg = write_cfg(dir.path(), "[ladder]\nbetas = [5.0, 1.0]\nweights = \"uniform\"\n");
    let refdir = dir.path().join("ref");
    run_ok(&["reference", "--config", refcfg.to_str().unwrap(), "--out", refdir.to_str().unwrap()], &[]);
    let z: Vec<String> = rows(&refdir.join("reference.csv")).iter().map(|r| r[3].clone()).collect();

    let cfg = write_cfg(
        dir.path(),
        &format!(
            "[ladder]\nbetas = [5.0, 1.0]\nweights = \"adaptive\"\n[adapt]\ninitial_z = [{}, {}]\nsteps_per_iter = 200000\ntolerance = 0.2\n",
            z[0], z[1]
        ),
    );
    let out = dir.path().join("out");
    run_ok(&["adapt", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()], &[]);
    let history = rows(&out.join("adapt_history.csv"));
    assert_eq!(history.len(), 2, "{history:?}");
    let ladder = rows(&out.join("ladder.csv"));
    for (h, l) in history.iter().zip(&ladder) {
        assert!((num(&h[3]) + num(&l[2])).abs() < 1e-12);
        assert!((num(&h[4]) - 0.5).abs() < 0.1);
    }
}

#[test]
fn adapt_reports_degenerate_proportions_with_a_hint() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(
        dir.path(),
        "[ladder]\nbetas = [5.0, 1.0]\nweights = \"adaptive\"\n[adapt]\ninitial_z = [1e-300, 1e300]\nsteps_per_iter = 10\n",
    );
    let out = tempering(&["adapt", "--config", cfg.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap()], &[]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("hint:") && err.contains("steps_per_iter"), "{err}");
}

#[test]
fn ldp_rows_follow_the_rate_structure() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(
        dir.path(),
        "[ladder]\nbetas = [5.0, 1.0]\n[ldp]\nnus = [0.1, 1.0, 10.0]\nalphas = [0.05, 0.1, 0.2]\nwavenumbers = [1.0]\ngrid_points = 2001\n",
    );
    let out = dir.path().join("out");
    run_ok(&["ldp", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()], &[]);
    let all = rows(&out.join("ldp.csv"));
    let eq: Vec<_> = all.iter().filter(|r| r[0] == "equilibrium").collect();
    assert_eq!(eq.len(), 3);
    for r in eq {
        assert!(num(&r[4]).abs() < 1e-12 && num(&r[5]).abs() < 1e-12 && num(&r[6]).abs() < 1e-12);
    }
    let sine: Vec<_> = all.iter().filter(|r| r[0] == "sine").collect();
    assert_eq!(sine.len(), 9);
    for block in sine.chunks(3) {
        assert!(num(&block[0][6]) < num(&block[1][6]) && num(&block[1][6]) < num(&block[2][6]));
        // J0 in both forms agree for two temperatures with n = 1/Z
        assert!((num(&block[0][4]) - num(&block[0][7])).abs() <= 1e-10 * num(&block[0][4]));
    }
    for pair in sine.chunks(3).collect::<Vec<_>>().windows(2) {
        assert!(num(&pair[1][0][4]) > num(&pair[0][0][4]));
        assert!(num(&pair[1][0][5]) > num(&pair[0][0][5]));
    }
}

#[test]
fn ldp_reads_density_files() {
    let dir = tempfile::tempdir().unwrap();
    let mut w = csv::Writer::from_path(dir.path().join("mu.csv")).unwrap();
    w.write_record(["x", "k", "value"]).unwrap();
    for k in 0..2 {
        for i in 0..=400 {
            let x = -4.0 + 0.02 * i as f64;
            let v = (-(x - 1.0) * (x - 1.0)).exp() * if k == 0 { 1.0 } else { 0.5 };
            w.write_record([x.to_string(), k.to_string(), v.to_string()]).unwrap();
        }
    }
    w.flush().unwrap();
    let cfg = write_cfg(
        dir.path(),
        "[ladder]\nbetas = [2.0, 1.0]\n[ldp]\nnus = [1.0]\nalphas = []\ngrid_points = 401\ndensity_file = \"mu.csv\"\n",
    );
    let out = dir.path().join("out");
    run_ok(&["ldp", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()], &[]);
    let file_rows: Vec<_> = rows(&out.join("ldp.csv")).into_iter().filter(|r| r[0] == "file").collect();
    assert_eq!(file_rows.len(), 1);
    assert!(num(&file_rows[0][6]) > 0.0);
}

#[test]
fn ldp_rejects_grids_that_cut_off_mass() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), "[ladder]\nbetas = [5.0, 1.0]\nweights = \"oracle\"\n[ldp]\ngrid = [-1.5, 1.5]\ngrid_points = 301\n");
    let out = tempering(&["ldp", "--config", cfg.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap()], &[]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("ldp.grid"));
}

#[test]
fn presets_parse() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../presets");
    for name in ["doublewell-6T.cfg", "wca-dimer.cfg", "ldp-doublewell.cfg"] {
        tempering::config::ExperimentConfig::load(root.join(name), std::iter::empty::<(String, String)>())
            .unwrap_or_else(|e| panic!("{name}: {e}"));
    }
}
