//! Free-energy profile of the dimer bond length in a WCA solvent at `β = 5`,
//! sampled by infinite-switching Langevin dynamics between `β = 5` and `β = 1`
//! with adaptively estimated weights.
//!
//! ```text
//! cargo run --release --example wca_dimer -- [steps] [adapt_steps_per_iter] [seed]
//! ```

use std::time::Instant;

use tempering::adapt::{adapt_loop, AdaptSettings};
use tempering::dynamics::{Dynamics, IntegratorParams, Simulation, SwitchingRate};
use tempering::estimators::{FreeEnergyProfile, Histogram};
use tempering::{DimerInSolvent, Model};

fn main() -> tempering::Result<()> {
    let mut args = std::env::args().skip(1);
    let steps: u64 = args.next().map_or(2_000_000, |s| s.parse().expect("steps"));
    let adapt_steps: u64 = args.next().map_or(200_000, |s| s.parse().expect("adapt_steps_per_iter"));
    let seed: u64 = args.next().map_or(8, |s| s.parse().expect("seed"));

    let dimer = DimerInSolvent::reference();
    let model = Model::Dimer(dimer.clone());
    let betas = [5.0, 1.0];
    let params = IntegratorParams {
        dt: 0.001,
        nu: SwitchingRate::Infinite,
        gamma: 1.0,
        mass: 1.0,
        rng_seed: seed,
    };
    let settings = AdaptSettings {
        steps_per_iter: adapt_steps,
        ..Default::default()
    };
    let x0 = model.initial_configuration();
    let start = Instant::now();
    let state = adapt_loop(vec![0.0, 1e8f64.ln()], &betas, &model, &params, Dynamics::Langevin, x0.clone(), &settings)?;
    println!(
        "adapted ln(Z_1/Z_0) = {:.3} after {} iterations",
        state.log_z[1] - state.log_z[0],
        state.history.len()
    );

    let mut sim = Simulation::new(&model, state.ladder(&betas)?, params, Dynamics::Langevin, x0, 100)?;
    let mut hist = Histogram::new(0.7, 2.7, 50)?;
    sim.run_with(steps, 1, |s| hist.add(dimer.bond_distance(s.x()), s.physical_weight()))?;
    println!("{steps} production steps, {:.2?} total", start.elapsed());

    let profile = FreeEnergyProfile::from_histogram(&hist, betas[0])?;
    println!("    r       F(r)");
    for (r, f) in profile.centers.iter().zip(&profile.free_energy) {
        match f {
            Some(f) => println!("{r:.3}  {f:8.4}"),
            None => println!("{r:.3}       -"),
        }
    }
    Ok(())
}
