use std::collections::BTreeMap;

use crate::error::{domain, Result};
use crate::lattice::{Alphabet, Boundary, Configuration, Lattice, Point};

use super::SystemRule;

fn check_probability(p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(domain(format!("probability p = {p} is outside [0, 1]")));
    }
    Ok(())
}

fn check_binary(name: &str, alphabet: Alphabet) -> Result<()> {
    if alphabet.size() != 2 {
        return Err(domain(format!(
            "{name} needs a binary alphabet, got size {}",
            alphabet.size()
        )));
    }
    Ok(())
}

fn is_empty_target(x: &Configuration, site: usize, velocity: &[i64]) -> bool {
    x.lattice()
        .translate(site, velocity)
        .is_some_and(|t| x.get(t) == 0)
}

/// Parallel-update TASEP: each particle tries to hop one site along the
/// first axis with probability `p` and succeeds when the target is empty
/// before the step. Every empty site has a single upstream neighbour, so
/// simultaneous moves never collide.
#[derive(Clone, Debug, PartialEq)]
pub struct Tasep {
    p: f64,
}

impl Tasep {
    pub fn new(p: f64) -> Result<Self> {
        check_probability(p)?;
        Ok(Tasep { p })
    }

    pub fn p(&self) -> f64 {
        self.p
    }
}

pub fn tasep_rule(p: f64) -> Result<Tasep> {
    Tasep::new(p)
}

impl SystemRule for Tasep {
    fn name(&self) -> &'static str {
        "tasep"
    }

    fn max_velocity(&self) -> u32 {
        1
    }

    fn check_compatible(&self, _lattice: &Lattice, alphabet: Alphabet) -> Result<()> {
        check_binary("tasep", alphabet)
    }

    fn velocity(&self, lattice: &Lattice, _site: usize, noise: f64) -> Point {
        let mut v = Point::from_elem(0, lattice.dim());
        if noise < self.p {
            v[0] = 1;
        }
        v
    }

    fn admissible(&self, x: &Configuration, site: usize, velocity: &[i64]) -> bool {
        is_empty_target(x, site, velocity)
    }

    fn params(&self) -> BTreeMap<String, f64> {
        BTreeMap::from([("p".to_string(), self.p)])
    }
}

/// Particles at non-negative sites swap with an empty right neighbour, and
/// particles at negative sites with an empty left neighbour, each with
/// probability `p`. Moves off an open window are blocked. On a torus the
/// seam between the largest and smallest coordinate is a wall as well:
/// otherwise the vacancy at the lowest coordinate could receive a particle
/// from both sides in the same step.
#[derive(Clone, Debug, PartialEq)]
pub struct ParticleVacancy {
    p: f64,
}

impl ParticleVacancy {
    pub fn new(p: f64) -> Result<Self> {
        check_probability(p)?;
        Ok(ParticleVacancy { p })
    }
}

pub fn particle_vacancy_rule(p: f64) -> Result<ParticleVacancy> {
    ParticleVacancy::new(p)
}

impl SystemRule for ParticleVacancy {
    fn name(&self) -> &'static str {
        "particle_vacancy"
    }

    fn max_velocity(&self) -> u32 {
        1
    }

    fn check_compatible(&self, lattice: &Lattice, alphabet: Alphabet) -> Result<()> {
        if lattice.dim() != 1 {
            return Err(domain("particle_vacancy is defined on a line only"));
        }
        check_binary("particle_vacancy", alphabet)
    }

    fn velocity(&self, lattice: &Lattice, site: usize, noise: f64) -> Point {
        let c = lattice.coords(site)[0];
        let dir = if noise >= self.p {
            0
        } else if c >= 0 {
            1
        } else {
            -1
        };
        Point::from_slice(&[dir])
    }

    fn admissible(&self, x: &Configuration, site: usize, velocity: &[i64]) -> bool {
        let lat = x.lattice();
        let moved = lat.coords(site)[0] + velocity[0];
        (lat.low()..=lat.high()).contains(&moved) && is_empty_target(x, site, velocity)
    }

    fn is_translation_covariant(&self) -> bool {
        false
    }

    fn natural_boundary(&self) -> Option<Boundary> {
        Some(Boundary::Open)
    }

    fn params(&self) -> BTreeMap<String, f64> {
        BTreeMap::from([("p".to_string(), self.p)])
    }
}
