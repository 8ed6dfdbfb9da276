//! Potential-energy models with analytic forces.
//!
//! Every model implements [`Potential`]; [`Model`] is the closed set the
//! experiment runner knows how to build from a config file.

use crate::error::{Error, Result};

/// Pairs closer than this (in units of σ) are treated as overlapping.
pub const OVERLAP_GUARD: f64 = 1e-8;

pub trait Potential: Send + Sync {
    /// Number of degrees of freedom.
    fn dimension(&self) -> usize;

    /// Side length of the periodic box, if any.
    fn periodic_box(&self) -> Option<f64> {
        None
    }

    fn energy(&self, x: &[f64]) -> Result<f64>;

    /// Writes `-∇V(x)` into `force` and returns `V(x)`.
    fn energy_force(&self, x: &[f64], force: &mut [f64]) -> Result<f64>;

    fn force(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut f = vec![0.0; self.dimension()];
        self.energy_force(x, &mut f)?;
        Ok(f)
    }
}

fn check_dimension(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}

/// `V(x) = (1 - x0²)² - x0/4 + Σ_j ½ λ_j x_j²`.
///
/// The first coordinate carries a tilted double well, the remaining `D - 1`
/// coordinates are independent harmonic modes with stiffness `λ_j`.
#[derive(Clone, Debug, PartialEq)]
pub struct DoubleWell {
    stiffness: Vec<f64>,
}

impl DoubleWell {
    /// All harmonic stiffnesses default to 1.
    pub fn new(dimension: usize) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::invalid("double well needs dimension >= 1"));
        }
        Ok(Self {
            stiffness: vec![1.0; dimension - 1],
        })
    }

    pub fn with_stiffness(stiffness: Vec<f64>) -> Result<Self> {
        if let Some(bad) = stiffness.iter().find(|l| !(l.is_finite() && **l > 0.0)) {
            return Err(Error::invalid(format!("stiffness must be positive, got {bad}")));
        }
        Ok(Self { stiffness })
    }

    pub fn stiffness(&self) -> &[f64] {
        &self.stiffness
    }

    /// The non-Gaussian part of the potential, as a function of `x0` only.
    pub fn well(x0: f64) -> f64 {
        let a = 1.0 - x0 * x0;
        a * a - 0.25 * x0
    }

    /// `-dV/dx0` of [`DoubleWell::well`].
    pub fn well_force(x0: f64) -> f64 {
        4.0 * x0 * (1.0 - x0 * x0) + 0.25
    }
}

impl Potential for DoubleWell {
    fn dimension(&self) -> usize {
        self.stiffness.len() + 1
    }

    fn energy(&self, x: &[f64]) -> Result<f64> {
        check_dimension(self.dimension(), x.len())?;
        let harmonic: f64 = self
            .stiffness
            .iter()
            .zip(&x[1..])
            .map(|(l, xj)| 0.5 * l * xj * xj)
            .sum();
        Ok(Self::well(x[0]) + harmonic)
    }

    fn energy_force(&self, x: &[f64], force: &mut [f64]) -> Result<f64> {
        check_dimension(self.dimension(), x.len())?;
        check_dimension(self.dimension(), force.len())?;
        force[0] = Self::well_force(x[0]);
        let mut v = Self::well(x[0]);
        for ((f, l), xj) in force[1..].iter_mut().zip(&self.stiffness).zip(&x[1..]) {
            *f = -l * xj;
            v += 0.5 * l * xj * xj;
        }
        Ok(v)
    }
}

/// Isotropic harmonic well `V(x) = ½ k |x|²`.
#[derive(Clone, Debug, PartialEq)]
pub struct Harmonic {
    pub dimension: usize,
    pub stiffness: f64,
}

impl Harmonic {
    pub fn new(dimension: usize, stiffness: f64) -> Result<Self> {
        if dimension == 0 || !(stiffness > 0.0 && stiffness.is_finite()) {
            return Err(Error::invalid("harmonic needs dimension >= 1 and stiffness > 0"));
        }
        Ok(Self {
            dimension,
            stiffness,
        })
    }
}

impl Potential for Harmonic {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn energy(&self, x: &[f64]) -> Result<f64> {
        check_dimension(self.dimension, x.len())?;
        Ok(0.5 * self.stiffness * x.iter().map(|v| v * v).sum::<f64>())
    }

    fn energy_force(&self, x: &[f64], force: &mut [f64]) -> Result<f64> {
        check_dimension(self.dimension, x.len())?;
        check_dimension(self.dimension, force.len())?;
        let mut v = 0.0;
        for (f, xi) in force.iter_mut().zip(x) {
            *f = -self.stiffness * xi;
            v += 0.5 * self.stiffness * xi * xi;
        }
        Ok(v)
    }
}

/// Minimum-image reduction of a single displacement component into `(-l/2, l/2]`.
#[inline]
pub fn min_image(d: f64, l: f64) -> f64 {
    d - l * (d / l - 0.5).ceil()
}

/// Displacement `xi - xj` under the minimum-image convention, component-wise.
pub fn min_image_displacement(xi: &[f64], xj: &[f64], l: f64) -> Vec<f64> {
    xi.iter().zip(xj).map(|(a, b)| min_image(a - b, l)).collect()
}

/// Two-dimensional particles in a periodic square box. Particles 0 and 1 form
/// a dimer bound by a double-well bond; every other pair interacts through the
/// purely repulsive WCA potential.
#[derive(Clone, Debug, PartialEq)]
pub struct DimerInSolvent {
    pub n_particles: usize,
    pub box_len: f64,
    pub sigma: f64,
    pub epsilon: f64,
    /// Barrier height of the dimer bond.
    pub h: f64,
    /// Half-separation of the two bond minima.
    pub omega: f64,
}

impl DimerInSolvent {
    pub const SPATIAL_DIM: usize = 2;

    pub fn new(
        n_particles: usize,
        box_len: f64,
        sigma: f64,
        epsilon: f64,
        h: f64,
        omega: f64,
    ) -> Result<Self> {
        if n_particles < 2 {
            return Err(Error::invalid("dimer system needs at least 2 particles"));
        }
        for (name, v) in [
            ("box_len", box_len),
            ("sigma", sigma),
            ("epsilon", epsilon),
            ("h", h),
            ("omega", omega),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(Self {
            n_particles,
            box_len,
            sigma,
            epsilon,
            h,
            omega,
        })
    }

    /// N = 16, l = 4.4, σ = ε = h = 1, ω = 0.5.
    pub fn reference() -> Self {
        Self {
            n_particles: 16,
            box_len: 4.4,
            sigma: 1.0,
            epsilon: 1.0,
            h: 1.0,
            omega: 0.5,
        }
    }

    pub fn r_wca(&self) -> f64 {
        2f64.powf(1.0 / 6.0) * self.sigma
    }

    pub fn wca_energy(&self, r: f64) -> f64 {
        if r >= self.r_wca() {
            return 0.0;
        }
        let s6 = (self.sigma / r).powi(6);
        4.0 * self.epsilon * (s6 * s6 - s6) + self.epsilon
    }

    /// `-dV_WCA/dr`.
    fn wca_radial_force(&self, r: f64) -> f64 {
        if r >= self.r_wca() {
            return 0.0;
        }
        let s6 = (self.sigma / r).powi(6);
        24.0 * self.epsilon * (2.0 * s6 * s6 - s6) / r
    }

    pub fn bond_energy(&self, r: f64) -> f64 {
        let u = (r - self.r_wca() - self.omega) / self.omega;
        let a = 1.0 - u * u;
        self.h * a * a
    }

    /// `-dV_dW/dr`.
    pub fn bond_radial_force(&self, r: f64) -> f64 {
        let u = (r - self.r_wca() - self.omega) / self.omega;
        4.0 * self.h * u * (1.0 - u * u) / self.omega
    }

    /// Particles on a square lattice filling the box; particles 0 and 1 sit
    /// on neighbouring sites.
    pub fn lattice_configuration(&self) -> Vec<f64> {
        let side = (self.n_particles as f64).sqrt().ceil() as usize;
        let spacing = self.box_len / side as f64;
        (0..self.n_particles)
            .flat_map(|i| {
                let (ix, iy) = (i % side, i / side);
                [(ix as f64 + 0.5) * spacing, (iy as f64 + 0.5) * spacing]
            })
            .collect()
    }

    /// Minimum-image distance between the two dimer particles.
    pub fn bond_distance(&self, x: &[f64]) -> f64 {
        pair_distance(x, 0, 1, self.box_len)
    }

    fn pair_energy(&self, i: usize, j: usize, r: f64) -> f64 {
        if i == 0 && j == 1 {
            self.bond_energy(r)
        } else {
            self.wca_energy(r)
        }
    }

    fn pair_radial_force(&self, i: usize, j: usize, r: f64) -> f64 {
        if i == 0 && j == 1 {
            self.bond_radial_force(r)
        } else {
            self.wca_radial_force(r)
        }
    }

    fn guard(&self, i: usize, j: usize, r: f64) -> Result<()> {
        if r < OVERLAP_GUARD * self.sigma {
            Err(Error::Singularity { i, j, r })
        } else {
            Ok(())
        }
    }
}

/// Minimum-image distance between 2D particles `i` and `j` of a flat coordinate vector.
pub fn pair_distance(x: &[f64], i: usize, j: usize, l: f64) -> f64 {
    let dx = min_image(x[2 * i] - x[2 * j], l);
    let dy = min_image(x[2 * i + 1] - x[2 * j + 1], l);
    dx.hypot(dy)
}

impl Potential for DimerInSolvent {
    fn dimension(&self) -> usize {
        Self::SPATIAL_DIM * self.n_particles
    }

    fn periodic_box(&self) -> Option<f64> {
        Some(self.box_len)
    }

    fn energy(&self, x: &[f64]) -> Result<f64> {
        check_dimension(self.dimension(), x.len())?;
        let l = self.box_len;
        let mut v = 0.0;
        for i in 0..self.n_particles {
            for j in i + 1..self.n_particles {
                let r = pair_distance(x, i, j, l);
                self.guard(i, j, r)?;
                v += self.pair_energy(i, j, r);
            }
        }
        Ok(v)
    }

    fn energy_force(&self, x: &[f64], force: &mut [f64]) -> Result<f64> {
        check_dimension(self.dimension(), x.len())?;
        check_dimension(self.dimension(), force.len())?;
        force.fill(0.0);
        let l = self.box_len;
        let r_wca = self.r_wca();
        let mut v = 0.0;
        for i in 0..self.n_particles {
            for j in i + 1..self.n_particles {
                let dx = min_image(x[2 * i] - x[2 * j], l);
                let dy = min_image(x[2 * i + 1] - x[2 * j + 1], l);
                let r = dx.hypot(dy);
                self.guard(i, j, r)?;
                let is_bond = i == 0 && j == 1;
                if !is_bond && r >= r_wca {
                    continue;
                }
                v += self.pair_energy(i, j, r);
                let fr = self.pair_radial_force(i, j, r) / r;
                force[2 * i] += fr * dx;
                force[2 * i + 1] += fr * dy;
                force[2 * j] -= fr * dx;
                force[2 * j + 1] -= fr * dy;
            }
        }
        Ok(v)
    }
}

/// The models the experiment runner can construct.
#[derive(Clone, Debug, PartialEq)]
pub enum Model {
    DoubleWell(DoubleWell),
    Harmonic(Harmonic),
    Dimer(DimerInSolvent),
}

impl Model {
    pub fn name(&self) -> &'static str {
        match self {
            Model::DoubleWell(_) => "double_well",
            Model::Harmonic(_) => "harmonic",
            Model::Dimer(_) => "dimer",
        }
    }

    pub fn as_potential(&self) -> &dyn Potential {
        match self {
            Model::DoubleWell(m) => m,
            Model::Harmonic(m) => m,
            Model::Dimer(m) => m,
        }
    }

    /// A sensible starting configuration: the deeper well for the double
    /// well, the origin for the harmonic model, a lattice for the dimer.
    pub fn initial_configuration(&self) -> Vec<f64> {
        match self {
            Model::DoubleWell(m) => {
                let mut x = vec![0.0; m.dimension()];
                x[0] = 1.0;
                x
            }
            Model::Harmonic(m) => vec![0.0; m.dimension],
            Model::Dimer(m) => m.lattice_configuration(),
        }
    }
}

impl Potential for Model {
    fn dimension(&self) -> usize {
        self.as_potential().dimension()
    }

    fn periodic_box(&self) -> Option<f64> {
        self.as_potential().periodic_box()
    }

    fn energy(&self, x: &[f64]) -> Result<f64> {
        self.as_potential().energy(x)
    }

    fn energy_force(&self, x: &[f64], force: &mut [f64]) -> Result<f64> {
        self.as_potential().energy_force(x, force)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn fd_gradient(model: &dyn Potential, x: &[f64], step: f64) -> Vec<f64> {
        let mut xp = x.to_vec();
        (0..x.len())
            .map(|i| {
                xp[i] = x[i] + step;
                let up = model.energy(&xp).unwrap();
                xp[i] = x[i] - step;
                let down = model.energy(&xp).unwrap();
                xp[i] = x[i];
                (up - down) / (2.0 * step)
            })
            .collect()
    }

    fn fd_mismatch(model: &dyn Potential, x: &[f64]) -> f64 {
        let f = model.force(x).unwrap();
        let g = fd_gradient(model, x, 1e-6);
        let diff: f64 = f.iter().zip(&g).map(|(a, b)| (a + b).powi(2)).sum::<f64>().sqrt();
        let norm: f64 = f.iter().map(|a| a * a).sum::<f64>().sqrt();
        diff / (1.0 + norm)
    }

    #[test]
    fn double_well_values() {
        let m = DoubleWell::new(1).unwrap();
        assert_eq!(m.energy(&[1.0]).unwrap(), -0.25);
        assert_eq!(m.energy(&[0.0]).unwrap(), 1.0);
        assert_eq!(m.force(&[0.0]).unwrap(), vec![0.25]);
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let m = DoubleWell::new(3).unwrap();
        assert!(matches!(
            m.energy(&[0.0, 1.0]),
            Err(Error::DimensionMismatch { expected: 3, got: 2 })
        ));
    }

    #[test]
    fn wca_vanishes_at_cutoff_and_beyond() {
        let m = DimerInSolvent::reference();
        assert_eq!(m.wca_energy(m.r_wca()), 0.0);
        assert_eq!(m.wca_energy(1.5), 0.0);
        assert!(m.wca_energy(1.0) > 0.0);
        // just inside the cutoff the value is already tiny
        assert!(m.wca_energy(m.r_wca() - 1e-9) < 1e-7);
    }

    #[test]
    fn bond_has_zeros_and_barrier() {
        let m = DimerInSolvent::reference();
        let r0 = m.r_wca();
        assert_abs_diff_eq!(m.bond_energy(r0), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(m.bond_energy(r0 + 2.0 * m.omega), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(m.bond_energy(r0 + m.omega), m.h, epsilon = 1e-15);
        assert_abs_diff_eq!(m.bond_radial_force(r0 + m.omega), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn min_image_examples() {
        let d = min_image_displacement(&[0.0, 0.0], &[4.3, 0.0], 4.4);
        assert_abs_diff_eq!(d[0], 0.1, epsilon = 1e-12);
        assert_eq!(d[1], 0.0);
        assert_eq!(min_image_displacement(&[1.3, -2.0], &[1.3, -2.0], 4.4), vec![0.0, 0.0]);
        assert_eq!(min_image_displacement(&[2.2, 0.0], &[0.0, 0.0], 4.4), vec![2.2, 0.0]);
        assert_eq!(min_image_displacement(&[0.0, 0.0], &[2.2, 0.0], 4.4), vec![2.2, 0.0]);
    }

    #[test]
    fn overlap_is_an_error() {
        let m = DimerInSolvent::reference();
        let mut x = m.lattice_configuration();
        x[4] = x[6];
        x[5] = x[7];
        assert!(matches!(m.energy(&x), Err(Error::Singularity { i: 2, j: 3, .. })));
        assert!(matches!(m.force(&x), Err(Error::Singularity { .. })));
    }

    #[test]
    fn lattice_keeps_dimer_adjacent() {
        let m = DimerInSolvent::reference();
        let x = m.lattice_configuration();
        assert_abs_diff_eq!(m.bond_distance(&x), 1.1, epsilon = 1e-12);
        assert!(m.energy(&x).unwrap().is_finite());
    }

    #[test]
    fn dimer_bond_force_vanishes_at_barrier_top() {
        let m = DimerInSolvent::new(2, 10.0, 1.0, 1.0, 1.0, 0.5).unwrap();
        let r = m.r_wca() + m.omega;
        let f = m.force(&[1.0, 1.0, 1.0 + r, 1.0]).unwrap();
        for c in f {
            assert_abs_diff_eq!(c, 0.0, epsilon = 1e-14);
        }
    }

    fn dimer_config() -> impl Strategy<Value = Vec<f64>> {
        let m = DimerInSolvent::reference();
        let base = m.lattice_configuration();
        prop::collection::vec(-0.15..0.15f64, base.len()).prop_map(move |jitter| {
            base.iter().zip(jitter).map(|(b, j)| b + j).collect()
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn double_well_force_matches_finite_differences(x in prop::collection::vec(-2.0..2.0f64, 5)) {
            let m = DoubleWell::with_stiffness(vec![1.0, 2.0, 0.5, 3.0]).unwrap();
            prop_assert!(fd_mismatch(&m, &x) < 1e-5);
        }

        #[test]
        fn harmonic_force_matches_finite_differences(x in prop::collection::vec(-3.0..3.0f64, 3)) {
            let m = Harmonic::new(3, 2.5).unwrap();
            prop_assert!(fd_mismatch(&m, &x) < 1e-5);
        }

        #[test]
        fn dimer_force_matches_finite_differences(x in dimer_config()) {
            let m = DimerInSolvent::reference();
            prop_assert!(fd_mismatch(&m, &x) < 1e-5);
        }

        #[test]
        fn dimer_energy_is_translation_invariant(x in dimer_config(), sx in -10.0..10.0f64, sy in -10.0..10.0f64) {
            let m = DimerInSolvent::reference();
            let shifted: Vec<f64> = x.chunks(2).flat_map(|p| [p[0] + sx, p[1] + sy]).collect();
            let (a, b) = (m.energy(&x).unwrap(), m.energy(&shifted).unwrap());
            prop_assert!((a - b).abs() <= 1e-10 * (1.0 + a.abs()));
        }

        #[test]
        fn min_image_lands_in_half_open_box(d in -100.0..100.0f64, l in 0.5..10.0f64) {
            let r = min_image(d, l);
            prop_assert!(r > -l / 2.0 - 1e-12 && r <= l / 2.0 + 1e-12);
            let k = ((d - r) / l).round();
            prop_assert!((d - r - k * l).abs() < 1e-9);
        }

        #[test]
        fn wca_is_zero_beyond_cutoff(r in 1.1225..3.0f64) {
            let m = DimerInSolvent::reference();
            prop_assert_eq!(m.wca_energy(r), 0.0);
        }
    }
}
