//! Rate functionals of perturbed two-temperature double-well densities:
//! the diffusive part `J0`, the jump part `J1` and `I^ν = J0 + ν J1`.
//!
//! ```text
//! cargo run --release --example ldp_rates -- [grid_points]
//! ```

use tempering::estimators::quadrature_reference;
use tempering::ldp::{equilibrium_density, rate_rows, theta_from_density, Grid};
use tempering::{DoubleWell, Model, TemperatureLadder};

fn main() -> tempering::Result<()> {
    let points: usize = std::env::args().nth(1).map_or(4001, |s| s.parse().expect("grid_points"));
    let model = Model::DoubleWell(DoubleWell::new(1)?);
    let ladder = quadrature_reference(&model, &TemperatureLadder::uniform(vec![5.0, 1.0])?)?.oracle_ladder()?;
    let eq = equilibrium_density(Grid::new(-4.0, 4.0, points)?, &ladder, &model)?;
    let nus = [0.1, 1.0, 10.0, 100.0];

    println!("alpha  k      J0           J1           I(nu={nus:?})");
    for k in [1.0, 2.0] {
        for alpha in [0.05, 0.1, 0.2] {
            let mu = eq.perturbed(|x, t| if t == 1 { 1.0 + alpha * (k * x).sin() } else { 1.0 })?;
            let theta = theta_from_density(&mu, &ladder, &model)?;
            let rows = rate_rows(&theta, &mu, &ladder, &model, &nus)?;
            let rates: Vec<String> = rows.iter().map(|r| format!("{:.4e}", r.i)).collect();
            println!(
                "{alpha:<5}  {k:<4}  {:.4e}  {:.4e}  {}",
                rows[0].j0,
                rows[0].j1,
                rates.join("  ")
            );
        }
    }
    Ok(())
}
