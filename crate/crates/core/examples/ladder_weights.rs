//! Partition functions of the double well by quadrature, the resulting
//! weights `n_k = 1/Z_k`, and what the ladder does with them along the
//! energy axis: temperature weights `ω_k(V)`, effective potential `U(V)`
//! and the ITS force scale.
//!
//! ```text
//! cargo run --release --example ladder_weights -- [dimension]
//! ```

use tempering::estimators::quadrature_reference;
use tempering::{DoubleWell, Model, TemperatureLadder};

fn main() -> tempering::Result<()> {
    let dimension: usize = std::env::args().nth(1).map_or(1, |s| s.parse().expect("dimension"));
    let model = Model::DoubleWell(DoubleWell::new(dimension)?);
    let betas: Vec<f64> = (0..6).map(|k| 25.0 * 0.5f64.powi(k)).collect();
    let reference = quadrature_reference(&model, &TemperatureLadder::uniform(betas)?)?;

    println!(" k   beta      ln Z_k      <V>_k     rel.err");
    for k in 0..reference.betas.len() {
        println!(
            "{k:>2}  {:>6.3}  {:>10.5}  {:>9.5}  {:.1e}",
            reference.betas[k], reference.log_z[k], reference.mean_energy[k], reference.rel_error[k]
        );
    }

    let ladder = reference.oracle_ladder()?;
    println!("\n    V     U(V)     s(V)   omega_k(V)");
    for v in [0.0, 0.25, 0.5, 1.0, 2.0, 4.0] {
        let omega: Vec<String> = ladder.weights(v).as_slice().iter().map(|w| format!("{w:.3}")).collect();
        println!(
            "{v:>5.2}  {:>7.4}  {:.4}   {}",
            ladder.effective_potential(v),
            ladder.force_scale(v),
            omega.join(" ")
        );
    }
    Ok(())
}
