//! Rate functionals on the grid against fine-quadrature evaluations of the
//! same integrals with analytic `θ` and `θ'`.

use tempering::ldp::{equilibrium_density, rate_j0, rate_j1, theta_from_density, Grid};
use tempering::{DoubleWell, TemperatureLadder};

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let inner: f64 = (1..n)
        .map(|i| f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 })
        .sum();
    (f(a) + f(b) + inner) * h / 3.0
}

struct Case {
    betas: [f64; 2],
    log_n: [f64; 2],
    alpha: f64,
    k: f64,
}

impl Case {
    // unnormalised ϱ_t(x) and θ_t(x) = c (1 + α sin kx) on the hot temperature
    fn rho(&self, t: usize, x: f64) -> f64 {
        (self.log_n[t] - self.betas[t] * DoubleWell::well(x)).exp()
    }

    fn factor(&self, t: usize, x: f64) -> f64 {
        if t == 1 {
            1.0 + self.alpha * (self.k * x).sin()
        } else {
            1.0
        }
    }

    fn factor_prime(&self, t: usize, x: f64) -> f64 {
        if t == 1 {
            self.alpha * self.k * (self.k * x).cos()
        } else {
            0.0
        }
    }

    /// `(J0, J1)` from Simpson's rule on 200k panels.
    fn oracle(&self) -> (f64, f64) {
        const N: usize = 200_000;
        let z: f64 = (0..2).map(|t| simpson(|x| self.rho(t, x), -4.0, 4.0, N)).sum();
        let c: f64 = (0..2)
            .map(|t| simpson(|x| self.rho(t, x) * self.factor(t, x), -4.0, 4.0, N))
            .sum::<f64>()
            / z;
        // μ_t = ϱ_t θ_t / z with θ_t = factor / c; J0 integrand β⁻¹ θ'²/(4θ) ϱ
        let j0: f64 = (0..2)
            .map(|t| {
                simpson(
                    |x| {
                        let th = self.factor(t, x) / c;
                        let dth = self.factor_prime(t, x) / c;
                        dth * dth / (4.0 * th * self.betas[t]) * self.rho(t, x) / z
                    },
                    -4.0,
                    4.0,
                    N,
                )
            })
            .sum();
        let j1: f64 = (0..2)
            .map(|t| {
                let o = 1 - t;
                simpson(
                    |x| {
                        let v = DoubleWell::well(x);
                        let g = ((self.log_n[o] - self.betas[o] * v) - (self.log_n[t] - self.betas[t] * v))
                            .exp()
                            .min(1.0);
                        let ratio = (self.factor(o, x) / self.factor(t, x)).sqrt();
                        g * (1.0 - ratio).powi(2) * self.rho(t, x) * self.factor(t, x) / (c * z)
                    },
                    -4.0,
                    4.0,
                    N,
                )
            })
            .sum::<f64>()
            * 0.5;
        (j0, j1)
    }

    fn grid(&self, points: usize) -> (f64, f64) {
        let model = DoubleWell::new(1).unwrap();
        let ladder = TemperatureLadder::new(self.betas.to_vec(), self.log_n.to_vec()).unwrap();
        let grid = Grid::new(-4.0, 4.0, points).unwrap();
        let eq = equilibrium_density(grid, &ladder, &model).unwrap();
        let mu = eq.perturbed(|x, t| self.factor(t, x)).unwrap();
        let theta = theta_from_density(&mu, &ladder, &model).unwrap();
        (
            rate_j0(&theta, &mu, &ladder).unwrap(),
            rate_j1(&theta, &mu, &ladder, &model).unwrap(),
        )
    }
}

const CASES: [Case; 3] = [
    Case {
        betas: [5.0, 1.0],
        log_n: [-0.3, 0.4],
        alpha: 0.1,
        k: 1.0,
    },
    Case {
        betas: [3.0, 2.0],
        log_n: [0.0, 0.0],
        alpha: 0.3,
        k: 2.0,
    },
    Case {
        betas: [10.0, 1.0],
        log_n: [-2.0, 0.5],
        alpha: 0.05,
        k: 3.0,
    },
];

#[test]
fn grid_rates_match_fine_quadrature() {
    for case in &CASES {
        let (j0, j1) = case.oracle();
        let (g0, g1) = case.grid(8001);
        assert!((g0 - j0).abs() <= 1e-5 * j0, "J0 {g0} vs {j0}");
        assert!((g1 - j1).abs() <= 1e-5 * j1, "J1 {g1} vs {j1}");
    }
}

#[test]
fn grid_refinement_converges() {
    for case in &CASES {
        let (a0, a1) = case.grid(16001);
        let (b0, b1) = case.grid(32001);
        assert!((a0 - b0).abs() <= 1e-6 * b0, "{a0} {b0}");
        assert!((a1 - b1).abs() <= 1e-6 * b1, "{a1} {b1}");
    }
}

fn rates_on(points: usize, betas: [f64; 2], factor: impl Fn(f64, usize) -> f64) -> (f64, f64) {
    let model = DoubleWell::new(1).unwrap();
    let ladder = TemperatureLadder::uniform(betas.to_vec()).unwrap();
    let grid = Grid::new(-4.0, 4.0, points).unwrap();
    let mu = equilibrium_density(grid, &ladder, &model)
        .unwrap()
        .perturbed(factor)
        .unwrap();
    let theta = theta_from_density(&mu, &ladder, &model).unwrap();
    (
        rate_j0(&theta, &mu, &ladder).unwrap(),
        rate_j1(&theta, &mu, &ladder, &model).unwrap(),
    )
}

#[test]
fn sine_j0_agrees_with_finer_grid() {
    let (coarse, _) = rates_on(4001, [25.0, 12.5], |x, _| 1.0 + 0.1 * x.sin());
    let (fine, _) = rates_on(8001, [25.0, 12.5], |x, _| 1.0 + 0.1 * x.sin());
    assert!(fine > 0.0);
    assert!((coarse - fine).abs() <= 1e-6 * fine, "{coarse} {fine}");
}

#[test]
fn constant_split_j1_agrees_with_finer_grid() {
    let split = |_: f64, k: usize| if k == 0 { 1.2 } else { 0.8 };
    let (_, coarse) = rates_on(4001, [25.0, 12.5], split);
    let (_, fine) = rates_on(8001, [25.0, 12.5], split);
    assert!(fine > 0.0);
    assert!((coarse - fine).abs() <= 1e-6 * fine, "{coarse} {fine}");
}

#[test]
fn halving_spacing_shrinks_the_change() {
    let factor = |x: f64, k: usize| if k == 1 { 1.0 + 0.2 * (2.0 * x).sin() } else { 1.0 };
    let r: Vec<(f64, f64)> = [1001, 2001, 4001]
        .iter()
        .map(|&n| rates_on(n, [5.0, 1.0], factor))
        .collect();
    let (d0, d1) = ((r[0].0 - r[1].0).abs(), (r[1].0 - r[2].0).abs());
    let (e0, e1) = ((r[0].1 - r[1].1).abs(), (r[1].1 - r[2].1).abs());
    eprintln!("J0 changes {d0:e} {d1:e}  J1 changes {e0:e} {e1:e}");
    assert!(d1 < d0 / 2.0 || d1 < 1e-14 * r[2].0, "J0 {d0} {d1}");
    assert!(e1 < e0 / 2.0 || e1 < 1e-14 * r[2].1, "J1 {e0} {e1}");
}

