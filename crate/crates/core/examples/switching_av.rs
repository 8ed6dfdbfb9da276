//! Asymptotic variance of the time average of `V` on the six-temperature
//! double-well ladder for several switching rates, including the infinite
//! switching limit. Columns are the window-sum variance divided by the window size.
//!
//! ```text
//! cargo run --release --example switching_av -- [steps] [seed]
//! ```

use tempering::dynamics::{Dynamics, IntegratorParams, Simulation, SwitchingRate};
use tempering::estimators::{quadrature_reference, StreamingBatchSums};
use tempering::{DoubleWell, Model, TemperatureLadder};

const WINDOWS: [usize; 3] = [1_000, 10_000, 100_000];

fn main() -> tempering::Result<()> {
    let mut args = std::env::args().skip(1);
    let steps: u64 = args.next().map_or(2_000_000, |s| s.parse().expect("steps"));
    let seed: u64 = args.next().map_or(1, |s| s.parse().expect("seed"));

    let model = Model::DoubleWell(DoubleWell::new(1)?);
    let betas: Vec<f64> = (0..6).map(|k| 25.0 * 0.5f64.powi(k)).collect();
    let ladder = quadrature_reference(&model, &TemperatureLadder::uniform(betas)?)?.oracle_ladder()?;

    print!("{:>8}", "nu");
    for ws in WINDOWS {
        print!("{:>14}", format!("AV/WS({ws})"));
    }
    println!();
    for nu in [
        SwitchingRate::Finite(0.1),
        SwitchingRate::Finite(1.0),
        SwitchingRate::Finite(10.0),
        SwitchingRate::Infinite,
    ] {
        let params = IntegratorParams {
            dt: 0.025,
            nu,
            rng_seed: seed,
            ..Default::default()
        };
        let mut sim = Simulation::new(&model, ladder.clone(), params, Dynamics::Overdamped, vec![1.0], 0)?;
        let mut sums = StreamingBatchSums::new(&WINDOWS)?;
        sim.run_with(steps, 1, |s| sums.push(s.energy()))?;
        let label = match nu {
            SwitchingRate::Finite(v) => v.to_string(),
            SwitchingRate::Infinite => "inf".into(),
        };
        print!("{label:>8}");
        for e in &sums.report().entries {
            if e.skipped {
                print!("{:>14}", "-");
            } else {
                print!("{:>14.4e}", e.av_mean_scaled);
            }
        }
        println!();
    }
    Ok(())
}
