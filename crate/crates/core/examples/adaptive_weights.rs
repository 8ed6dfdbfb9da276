//! Iterative estimation of `ln Z_k` for a two-temperature double well,
//! starting from a hot-temperature guess that is ten times too large.
//!
//! ```text
//! cargo run --release --example adaptive_weights -- [steps_per_iter] [seed]
//! ```

use tempering::adapt::{adapt_loop, imbalance, AdaptSettings};
use tempering::dynamics::{Dynamics, IntegratorParams, SwitchingRate};
use tempering::estimators::quadrature_reference;
use tempering::{DoubleWell, Model, TemperatureLadder};

fn main() -> tempering::Result<()> {
    let mut args = std::env::args().skip(1);
    let steps_per_iter: u64 = args.next().map_or(1_000_000, |s| s.parse().expect("steps_per_iter"));
    let seed: u64 = args.next().map_or(7, |s| s.parse().expect("seed"));

    let model = Model::DoubleWell(DoubleWell::new(1)?);
    let betas = [5.0, 1.0];
    let truth = quadrature_reference(&model, &TemperatureLadder::uniform(betas.to_vec())?)?;
    let mut log_z = truth.log_z.clone();
    log_z[1] += 10f64.ln();

    let params = IntegratorParams {
        dt: 0.025,
        nu: SwitchingRate::Infinite,
        rng_seed: seed,
        ..Default::default()
    };
    let settings = AdaptSettings {
        steps_per_iter,
        ..Default::default()
    };
    let state = adapt_loop(log_z, &betas, &model, &params, Dynamics::Overdamped, vec![1.0], &settings)?;

    println!("iter  w_0     w_1     imbalance  ln(Z_1/Z_0) error");
    for (l, h) in state.history.iter().enumerate() {
        let err = h.log_z[1] - h.log_z[0] - (truth.log_z[1] - truth.log_z[0]);
        println!(
            "{:>4}  {:.4}  {:.4}  {:>9.4}  {err:+.4}",
            l + 1,
            h.proportions[0],
            h.proportions[1],
            imbalance(&h.proportions)
        );
    }
    Ok(())
}
