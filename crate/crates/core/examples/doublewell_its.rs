//! Infinite-switching overdamped dynamics on the 1D double well with the
//! quadrature weights `n_k = 1/Z_k`. Compares the sampled marginal of `x`
//! with the exact mixture density and reweights `V` back to the physical
//! temperature.
//!
//! ```text
//! cargo run --release --example doublewell_its -- [steps] [dt] [overdamped|langevin] [seed]
//! ```

use std::time::Instant;

use tempering::dynamics::{Dynamics, IntegratorParams, Simulation, SwitchingRate};
use tempering::estimators::{l1_distance, quadrature_reference, Histogram, StreamingRatio};
use tempering::{DoubleWell, Model, TemperatureLadder};

fn main() -> tempering::Result<()> {
    let mut args = std::env::args().skip(1);
    let steps: u64 = args.next().map_or(1_000_000, |s| s.parse().expect("steps"));
    let dt: f64 = args.next().map_or(0.025, |s| s.parse().expect("dt"));
    let dynamics = match args.next().as_deref() {
        None | Some("overdamped") => Dynamics::Overdamped,
        Some("langevin") => Dynamics::Langevin,
        Some(other) => panic!("unknown dynamics `{other}`"),
    };
    let seed: u64 = args.next().map_or(7, |s| s.parse().expect("seed"));

    let model = Model::DoubleWell(DoubleWell::new(1)?);
    let betas: Vec<f64> = (0..6).map(|k| 25.0 * 0.5f64.powi(k)).collect();
    let ladder = quadrature_reference(&model, &TemperatureLadder::uniform(betas)?)?.oracle_ladder()?;
    // the mixture density depends on the weights, so recompute with them
    let reference = quadrature_reference(&model, &ladder)?;

    let params = IntegratorParams {
        dt,
        nu: SwitchingRate::Infinite,
        rng_seed: seed,
        ..Default::default()
    };
    let mut sim = Simulation::new(&model, ladder.clone(), params, dynamics, vec![1.0], 0)?;
    let mut hist = Histogram::new(-3.0, 3.0, 200)?;
    let mut energy = StreamingRatio::new(steps as usize + 1);

    let start = Instant::now();
    sim.run_with(steps, 1, |s| {
        hist.add(s.x()[0], 1.0);
        energy.push(s.energy(), s.physical_weight());
    })?;
    let elapsed = start.elapsed();

    let exact = reference.bin_probabilities(-3.0, 3.0, 200);
    let est = energy.estimate()?;
    println!("{steps} {dynamics:?} steps at dt = {dt} in {elapsed:.2?}");
    println!("L1(histogram, exact mixture) = {:.4}", l1_distance(&hist.probabilities(), &exact));
    println!(
        "<V> at beta = 25: {:.5} ± {:.5} (quadrature {:.5})",
        est.value, est.std_error, reference.mean_energy[0]
    );
    Ok(())
}
