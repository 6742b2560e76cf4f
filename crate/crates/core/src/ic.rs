//! Monokinetic initial conditions.
//!
//! A beam is a density profile `n(x)` travelling with velocity `u(x)`; an
//! initial condition is one beam or the sum of two.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::error::{Error, Result};
use crate::kl::KlField;
use crate::math;
use crate::params::Grid;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Shape {
    Cos,
    Sin,
    CosSquared,
}

/// `amplitude * shape(wavenumber * x + phase)`
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mode {
    pub amplitude: f64,
    pub wavenumber: f64,
    pub phase: f64,
    pub shape: Shape,
}

impl Mode {
    pub fn cos(amplitude: f64, wavenumber: f64) -> Self {
        Mode {
            amplitude,
            wavenumber,
            phase: 0.0,
            shape: Shape::Cos,
        }
    }

    pub fn sin(amplitude: f64, wavenumber: f64) -> Self {
        Mode {
            amplitude,
            wavenumber,
            phase: 0.0,
            shape: Shape::Sin,
        }
    }

    pub fn with_phase(mut self, phase: f64) -> Self {
        self.phase = phase;
        self
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        let arg = self.wavenumber * x + self.phase;
        self.amplitude
            * match self.shape {
                Shape::Cos => math::cos(arg),
                Shape::Sin => math::sin(arg),
                Shape::CosSquared => {
                    let c = math::cos(arg);
                    c * c
                }
            }
    }
}

/// A scalar profile on the periodic domain.
#[derive(Debug, Clone)]
pub enum Profile {
    Constant(f64),
    Trig { offset: f64, modes: Vec<Mode> },
    Kl { field: Arc<KlField>, z: Vec<f64> },
}

impl Profile {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Profile::Constant(c) => *c,
            Profile::Trig { offset, modes } => {
                modes.iter().fold(*offset, |acc, m| acc + m.eval(x))
            }
            Profile::Kl { field, z } => field.evaluate(x, z),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Beam {
    pub density: Profile,
    pub velocity: Profile,
}

impl Beam {
    pub fn new(density: Profile, velocity: Profile) -> Self {
        Beam { density, velocity }
    }
}

#[derive(Debug, Clone)]
pub enum InitialCondition {
    SingleBeam(Beam),
    DoubleBeam(Beam, Beam),
}

impl InitialCondition {
    /// Total density of all beams.
    pub fn density(&self, x: f64) -> f64 {
        self.beam_iter().map(|b| b.density.eval(x)).sum()
    }

    /// Total momentum density `sum n_b u_b`.
    pub fn momentum(&self, x: f64) -> f64 {
        self.beam_iter()
            .map(|b| b.density.eval(x) * b.velocity.eval(x))
            .sum()
    }

    pub fn beam_iter(&self) -> impl Iterator<Item = &Beam> {
        let (a, b) = match self {
            InitialCondition::SingleBeam(a) => (a, None),
            InitialCondition::DoubleBeam(a, b) => (a, Some(b)),
        };
        core::iter::once(a).chain(b)
    }

    /// `max |u_b(x)|` over the given sample points.
    pub fn max_speed(&self, xs: impl Iterator<Item = f64> + Clone) -> f64 {
        self.beam_iter()
            .flat_map(|b| xs.clone().map(move |x| math::abs(b.velocity.eval(x))))
            .fold(0.0, f64::max)
    }

    /// Every beam density must be strictly positive at the grid centers.
    pub fn check_positive(&self, grid: &Grid) -> Result<()> {
        for b in self.beam_iter() {
            for x in grid.centers() {
                let v = b.density.eval(x);
                if !(v > 0.0) {
                    return Err(Error::NonPositiveDensity { x, value: v });
                }
            }
        }
        Ok(())
    }
}

const TWO_PI: f64 = 2.0 * PI;

/// `n0 = 1 + 0.5 sin(2 pi x)`, `u0 = 0.4 cos(2 pi x)` on `[0, 1]`.
pub fn ap_test() -> InitialCondition {
    InitialCondition::SingleBeam(Beam::new(
        Profile::Trig {
            offset: 1.0,
            modes: vec![Mode::sin(0.5, TWO_PI)],
        },
        Profile::Trig {
            offset: 0.0,
            modes: vec![Mode::cos(0.4, TWO_PI)],
        },
    ))
}

/// Uniform density at rest.
pub fn equilibrium(density: f64) -> InitialCondition {
    InitialCondition::SingleBeam(Beam::new(
        Profile::Constant(density),
        Profile::Constant(0.0),
    ))
}

/// Five-parameter perturbation of a single cold beam on `[0, 1]`.
pub fn uq_test1(z: &[f64; 5]) -> InitialCondition {
    let k = TWO_PI;
    let c = |i: f64| 1.0 / (i * PI * i * PI);
    InitialCondition::SingleBeam(Beam::new(
        Profile::Trig {
            offset: 1.0,
            modes: vec![
                Mode::cos(0.5, k),
                Mode::cos(c(1.0) * z[0], k),
                Mode::sin(c(2.0) * z[1], k),
                Mode::cos(c(3.0) * z[2], k),
                Mode::sin(c(4.0) * z[3], k),
                Mode::cos(c(5.0) * z[4], k),
            ],
        },
        Profile::Trig {
            offset: 0.0,
            modes: vec![Mode::sin(0.2, k)],
        },
    ))
}

/// Two uncertain cold beams on `[0, 1]`.
pub fn uq_test2(z: &[f64; 5]) -> InitialCondition {
    let k = TWO_PI;
    let mut m1 = vec![Mode {
        amplitude: -0.6,
        wavenumber: k,
        phase: PI / 3.0,
        shape: Shape::CosSquared,
    }];
    let mut m2 = vec![Mode::sin(0.4, k).with_phase(-PI / 4.0)];
    for (i, &zi) in z.iter().enumerate() {
        let w = (i + 1) as f64 * PI;
        let c = 1.0 / (w * w);
        m1.push(Mode::cos(c * zi, k));
        m2.push(Mode::sin(c * zi, k));
    }
    InitialCondition::DoubleBeam(
        Beam::new(
            Profile::Trig {
                offset: 1.0,
                modes: m1,
            },
            Profile::Trig {
                offset: 0.0,
                modes: vec![Mode::sin(0.2, k)],
            },
        ),
        Beam::new(
            Profile::Trig {
                offset: 1.0,
                modes: m2,
            },
            Profile::Trig {
                offset: 0.0,
                modes: vec![Mode::cos(0.1, k)],
            },
        ),
    )
}

/// KL-perturbed density with `u0 = sin(x)` on `[0, 2 pi]`.
pub fn uq_test3(field: Arc<KlField>, z: Vec<f64>) -> InitialCondition {
    InitialCondition::SingleBeam(Beam::new(
        Profile::Kl { field, z },
        Profile::Trig {
            offset: 0.0,
            modes: vec![Mode::sin(1.0, 1.0)],
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-14
    }

    #[test]
    fn ap_test_hand_values() {
        let ic = ap_test();
        assert!(close(ic.density(0.0), 1.0));
        assert!(close(ic.density(0.25), 1.5));
        assert!(close(ic.momentum(0.0), 0.4));
        assert!(close(ic.momentum(0.25), 0.0));
    }

    #[test]
    fn uq_test1_hand_values() {
        let z = [1.0, -1.0, 0.5, 0.25, -0.5];
        let ic = uq_test1(&z);
        let p2 = PI * PI;
        // x = 0: all cosines are 1, sines 0.
        let n0 = 1.0 + 0.5 + 1.0 / p2 + 0.5 / (9.0 * p2) - 0.5 / (25.0 * p2);
        assert!(close(ic.density(0.0), n0));
        // x = 1/4: cosines vanish, sines are 1.
        let n14 = 1.0 - 1.0 / (4.0 * p2) + 0.25 / (16.0 * p2);
        assert!(close(ic.density(0.25), n14));
        let InitialCondition::SingleBeam(b) = &ic else {
            panic!()
        };
        assert!(close(b.velocity.eval(0.25), 0.2));
    }

    #[test]
    fn uq_test2_hand_values() {
        let z = [1.0, 0.0, 0.0, 0.0, 0.0];
        let ic = uq_test2(&z);
        let mut it = ic.beam_iter();
        let b1 = it.next().unwrap();
        let b2 = it.next().unwrap();
        let c = (PI / 3.0).cos();
        assert!(close(b1.density.eval(0.0), 1.0 - 0.6 * c * c + 1.0 / (PI * PI)));
        assert!(close(
            b2.density.eval(0.0),
            1.0 + 0.4 * (-PI / 4.0).sin()
        ));
        let c14 = (PI / 2.0 + PI / 3.0).cos();
        assert!(close(b1.density.eval(0.25), 1.0 - 0.6 * c14 * c14));
        assert!(close(
            b2.density.eval(0.25),
            1.0 + 0.4 * (PI / 4.0).sin() + 1.0 / (PI * PI)
        ));
        assert!(close(b1.velocity.eval(0.25), 0.2));
        assert!(close(b2.velocity.eval(0.0), 0.1));
    }

    #[test]
    fn max_speed_and_positivity() {
        let ic = ap_test();
        let g = Grid::new(0.0, 1.0, 400);
        let m = ic.max_speed(g.centers());
        assert!(m <= 0.4 && m > 0.399);
        assert!(ic.check_positive(&g).is_ok());
        assert!(equilibrium(-1.0).check_positive(&g).is_err());
    }
}
