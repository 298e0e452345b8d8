//! Particle-system dynamics and the deterministic toy maps.
//!
//! A [`SystemRule`] describes one synchronous step of a locally interacting
//! particle system: every particle draws a velocity from a uniform noise
//! value, the move is executed when a local admissibility predicate holds in
//! the current configuration, and all executed moves land at once.

mod maps;
mod rules;

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use rand::Rng;

use crate::error::{domain, Error, Result};
use crate::lattice::{sup_norm, Alphabet, Boundary, Configuration, Lattice, Point};

pub use maps::{doubling_step, halving_step, shift_annihilation_step, BitSource, BitStream};
pub use rules::{particle_vacancy_rule, tasep_rule, ParticleVacancy, Tasep};

/// When the alarm clocks ring. Only the all-at-once discrete-time schedule
/// is implemented.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ClockSchedule {
    #[default]
    Synchronous,
}

pub trait SystemRule: fmt::Debug + Send + Sync {
    fn name(&self) -> &'static str;

    /// Largest allowed velocity `V`.
    fn max_velocity(&self) -> u32;

    fn schedule(&self) -> ClockSchedule {
        ClockSchedule::Synchronous
    }

    fn check_compatible(&self, lattice: &Lattice, alphabet: Alphabet) -> Result<()>;

    /// Velocity of a particle at `site` driven by `noise`, uniform on `[0, 1)`.
    /// Must not depend on the configuration.
    fn velocity(&self, lattice: &Lattice, site: usize, noise: f64) -> Point;

    /// Whether the particle at `site` may move by `velocity`. Reads only
    /// sites within `2V` of `site`.
    fn admissible(&self, x: &Configuration, site: usize, velocity: &[i64]) -> bool;

    fn is_conservative(&self) -> bool {
        true
    }

    /// Same procedure at every site.
    fn is_translation_covariant(&self) -> bool {
        true
    }

    /// Boundary the model is meant for, if it singles one out.
    fn natural_boundary(&self) -> Option<Boundary> {
        None
    }

    fn params(&self) -> BTreeMap<String, f64>;
}

/// Uniform noise per particle slot: site `i` holds up to `|A| - 1` particles
/// and slot `k` of site `i` drives the `k`-th of them.
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseField {
    stride: usize,
    values: Vec<f64>,
}

impl NoiseField {
    pub fn sample<R: Rng + ?Sized>(lattice: &Lattice, alphabet: Alphabet, rng: &mut R) -> Self {
        let stride = alphabet.max_value() as usize;
        let values = (0..lattice.site_count() * stride)
            .map(|_| rng.random::<f64>())
            .collect();
        NoiseField { stride, values }
    }

    pub fn get(&self, site: usize, slot: usize) -> f64 {
        self.values[site * self.stride + slot]
    }

    /// The field seen from `shift(x, offset)`: `shifted(l)(i) = self(i + l)`.
    pub fn shifted(&self, lattice: &Lattice, offset: &[i64]) -> Result<Self> {
        if lattice.boundary() != Boundary::Torus {
            return Err(Error::Unsupported(
                "shifting noise on an open window".into(),
            ));
        }
        let mut values = Vec::with_capacity(self.values.len());
        for i in 0..lattice.site_count() {
            let j = lattice
                .translate(i, offset)
                .expect("torus translation is total");
            values.extend_from_slice(&self.values[j * self.stride..(j + 1) * self.stride]);
        }
        Ok(NoiseField {
            stride: self.stride,
            values,
        })
    }
}

/// A move decided for one particle: where it sits, where it goes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) struct Move {
    pub from: usize,
    pub to: usize,
}

/// Decides the move of one particle at `site`. `Ok(None)` means it stays,
/// either because its velocity is zero or because the move is inadmissible;
/// the flag reports admissibility.
pub(crate) fn decide(
    rule: &dyn SystemRule,
    x: &Configuration,
    site: usize,
    noise: f64,
) -> Result<(Option<Move>, bool)> {
    let lat = x.lattice();
    let v = rule.velocity(lat, site, noise);
    if sup_norm(&v) > rule.max_velocity() as u64 {
        return Err(Error::InvariantViolation(format!(
            "rule {} proposed velocity {:?} above V = {}",
            rule.name(),
            v.as_slice(),
            rule.max_velocity()
        )));
    }
    if v.iter().all(|&c| c == 0) {
        return Ok((None, true));
    }
    if !rule.admissible(x, site, &v) {
        return Ok((None, false));
    }
    let to = lat.translate(site, &v).ok_or_else(|| {
        Error::InvariantViolation(format!(
            "rule {} admitted a move off the window from site {site}",
            rule.name()
        ))
    })?;
    Ok((Some(Move { from: site, to }), true))
}

/// Applies simultaneous moves, checking the alphabet bound.
pub(crate) fn apply_moves(x: &Configuration, moves: &[Move]) -> Result<Configuration> {
    let mut next = x.clone();
    let top = x.alphabet().max_value();
    let vals = next.values_mut();
    for m in moves {
        vals[m.from] -= 1;
    }
    for m in moves {
        if vals[m.to] >= top {
            return Err(Error::InvariantViolation(format!(
                "site {} would exceed {} particles",
                m.to, top
            )));
        }
        vals[m.to] += 1;
    }
    Ok(next)
}

/// One synchronous step driven by an explicit noise field.
pub fn step_with_noise(
    rule: &dyn SystemRule,
    x: &Configuration,
    noise: &NoiseField,
) -> Result<Configuration> {
    rule.check_compatible(x.lattice(), x.alphabet())?;
    let mut moves = Vec::new();
    for (site, &count) in x.values().iter().enumerate() {
        for slot in 0..count as usize {
            if let (Some(m), _) = decide(rule, x, site, noise.get(site, slot))? {
                moves.push(m);
            }
        }
    }
    apply_moves(x, &moves)
}

/// One synchronous step with fresh noise.
pub fn step<R: Rng + ?Sized>(
    rule: &dyn SystemRule,
    x: &Configuration,
    rng: &mut R,
) -> Result<Configuration> {
    let noise = NoiseField::sample(x.lattice(), x.alphabet(), rng);
    step_with_noise(rule, x, &noise)
}

/// Anything that maps a configuration to the next one.
#[derive(Clone, Debug)]
pub enum Dynamics {
    Particles(Arc<dyn SystemRule>),
    /// The deterministic shift-annihilation map on an open line window.
    ShiftAnnihilation,
}

impl Dynamics {
    pub fn name(&self) -> &'static str {
        match self {
            Dynamics::Particles(r) => r.name(),
            Dynamics::ShiftAnnihilation => "shift_annihilation",
        }
    }

    pub fn advance<R: Rng + ?Sized>(
        &self,
        x: &Configuration,
        rng: &mut R,
    ) -> Result<Configuration> {
        match self {
            Dynamics::Particles(rule) => step(rule.as_ref(), x, rng),
            Dynamics::ShiftAnnihilation => shift_annihilation_step(x),
        }
    }

    pub fn check_compatible(&self, lattice: &Lattice, alphabet: Alphabet) -> Result<()> {
        match self {
            Dynamics::Particles(rule) => rule.check_compatible(lattice, alphabet),
            Dynamics::ShiftAnnihilation => {
                if lattice.dim() != 1 || lattice.boundary() != Boundary::Open {
                    return Err(Error::Unsupported(
                        "shift_annihilation needs a one-dimensional open window".into(),
                    ));
                }
                Ok(())
            }
        }
    }

    pub fn natural_boundary(&self) -> Option<Boundary> {
        match self {
            Dynamics::Particles(rule) => rule.natural_boundary(),
            Dynamics::ShiftAnnihilation => Some(Boundary::Open),
        }
    }

    pub fn max_velocity(&self) -> u32 {
        match self {
            Dynamics::Particles(rule) => rule.max_velocity(),
            Dynamics::ShiftAnnihilation => 1,
        }
    }

    pub fn is_conservative(&self) -> bool {
        match self {
            Dynamics::Particles(rule) => rule.is_conservative(),
            Dynamics::ShiftAnnihilation => false,
        }
    }

    pub fn rule(&self) -> Option<&Arc<dyn SystemRule>> {
        match self {
            Dynamics::Particles(r) => Some(r),
            Dynamics::ShiftAnnihilation => None,
        }
    }
}

/// Names accepted by [`dynamics_by_name`].
pub const MODEL_NAMES: &[&str] = &["tasep", "particle_vacancy", "shift_annihilation"];

/// Looks a model up by name. `params` may only contain keys the model reads.
///
/// * `tasep`: `p` (hop probability, default 0.5)
/// * `particle_vacancy`: `p` (exchange probability, default 0.5)
/// * `shift_annihilation`: no parameters
pub fn dynamics_by_name(name: &str, params: &BTreeMap<String, f64>) -> Result<Dynamics> {
    let allowed: &[&str] = match name {
        "tasep" | "particle_vacancy" => &["p"],
        "shift_annihilation" => &[],
        _ => return Err(domain(format!("unknown model {name:?}"))),
    };
    if let Some(k) = params.keys().find(|k| !allowed.contains(&k.as_str())) {
        return Err(domain(format!("model {name:?} has no parameter {k:?}")));
    }
    let p = params.get("p").copied().unwrap_or(0.5);
    Ok(match name {
        "tasep" => Dynamics::Particles(Arc::new(Tasep::new(p)?)),
        "particle_vacancy" => Dynamics::Particles(Arc::new(ParticleVacancy::new(p)?)),
        _ => Dynamics::ShiftAnnihilation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{shift, Alphabet};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[derive(Debug)]
    struct Runaway;

    impl SystemRule for Runaway {
        fn name(&self) -> &'static str {
            "runaway"
        }
        fn max_velocity(&self) -> u32 {
            1
        }
        fn check_compatible(&self, _: &Lattice, _: Alphabet) -> Result<()> {
            Ok(())
        }
        fn velocity(&self, _: &Lattice, _: usize, _: f64) -> Point {
            Point::from_slice(&[2])
        }
        fn admissible(&self, _: &Configuration, _: usize, _: &[i64]) -> bool {
            true
        }
        fn params(&self) -> BTreeMap<String, f64> {
            BTreeMap::new()
        }
    }

    #[test]
    fn velocity_above_bound_is_an_invariant_violation() {
        let lat = Arc::new(Lattice::centered(1, 3, Boundary::Torus).unwrap());
        let x = Configuration::from_line(lat, Alphabet::binary(), "0100000").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(matches!(
            step(&Runaway, &x, &mut rng),
            Err(Error::InvariantViolation(_))
        ));
    }

    #[test]
    fn lookup_by_name() {
        let mut params = BTreeMap::new();
        params.insert("p".to_string(), 0.25);
        let d = dynamics_by_name("tasep", &params).unwrap();
        assert_eq!(d.name(), "tasep");
        assert_eq!(d.rule().unwrap().params()["p"], 0.25);
        assert!(dynamics_by_name("voter", &params).is_err());
        params.insert("q".to_string(), 0.1);
        let err = dynamics_by_name("tasep", &params).unwrap_err();
        assert!(err.to_string().contains("\"q\""));
        assert!(dynamics_by_name("shift_annihilation", &BTreeMap::new()).is_ok());
    }

    proptest! {
        #[test]
        fn tasep_is_translation_covariant_pathwise(
            bits in proptest::collection::vec(0u8..2, 21),
            l in -10i64..10,
            seed in any::<u64>(),
            p in 0.0f64..1.0,
        ) {
            let lat = Arc::new(Lattice::centered(1, 10, Boundary::Torus).unwrap());
            let x = Configuration::new(lat.clone(), Alphabet::binary(), bits).unwrap();
            let rule = Tasep::new(p).unwrap();
            let noise = NoiseField::sample(&lat, Alphabet::binary(), &mut ChaCha8Rng::seed_from_u64(seed));
            let lhs = step_with_noise(&rule, &shift(&x, &[l]).unwrap(), &noise.shifted(&lat, &[l]).unwrap()).unwrap();
            let rhs = shift(&step_with_noise(&rule, &x, &noise).unwrap(), &[l]).unwrap();
            prop_assert_eq!(lhs, rhs);
        }

        #[test]
        fn tasep_is_covariant_in_two_dimensions(
            bits in proptest::collection::vec(0u8..2, 25),
            l0 in -4i64..4, l1 in -4i64..4,
            seed in any::<u64>(),
        ) {
            let lat = Arc::new(Lattice::centered(2, 2, Boundary::Torus).unwrap());
            let x = Configuration::new(lat.clone(), Alphabet::binary(), bits).unwrap();
            let rule = Tasep::new(0.6).unwrap();
            let noise = NoiseField::sample(&lat, Alphabet::binary(), &mut ChaCha8Rng::seed_from_u64(seed));
            let l = [l0, l1];
            let lhs = step_with_noise(&rule, &shift(&x, &l).unwrap(), &noise.shifted(&lat, &l).unwrap()).unwrap();
            let rhs = shift(&step_with_noise(&rule, &x, &noise).unwrap(), &l).unwrap();
            prop_assert_eq!(lhs, rhs);
        }

        #[test]
        fn admissibility_is_local(
            bits in proptest::collection::vec(0u8..2, 15),
            flips in proptest::collection::vec(0u8..2, 15),
            site in 0usize..15,
            pv in any::<bool>(),
        ) {
            // flipping sites farther than 2V from `site` never changes whether its particle may move
            let lat = Arc::new(Lattice::centered(1, 7, Boundary::Open).unwrap());
            let rule: Box<dyn SystemRule> = if pv {
                Box::new(ParticleVacancy::new(1.0).unwrap())
            } else {
                Box::new(Tasep::new(1.0).unwrap())
            };
            let x = Configuration::new(lat.clone(), Alphabet::binary(), bits.clone()).unwrap();
            let far: Vec<u8> = bits
                .iter()
                .zip(&flips)
                .enumerate()
                .map(|(i, (&b, &f))| if lat.distance(i, site) > 2 * rule.max_velocity() as u64 { b ^ f } else { b })
                .collect();
            let y = Configuration::new(lat.clone(), Alphabet::binary(), far).unwrap();
            let v = rule.velocity(&lat, site, 0.0);
            prop_assert_eq!(rule.admissible(&x, site, &v), rule.admissible(&y, site, &v));
        }

        #[test]
        fn conservative_rules_keep_the_particle_count(
            bits in proptest::collection::vec(0u8..2, 31),
            seed in any::<u64>(),
            p in 0.0f64..=1.0,
            torus in any::<bool>(),
        ) {
            let boundary = if torus { Boundary::Torus } else { Boundary::Open };
            let lat = Arc::new(Lattice::centered(1, 15, boundary).unwrap());
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let rules: [Box<dyn SystemRule>; 2] = [
                Box::new(Tasep::new(p).unwrap()),
                Box::new(ParticleVacancy::new(p).unwrap()),
            ];
            for rule in &rules {
                let mut x = Configuration::new(lat.clone(), Alphabet::binary(), bits.clone()).unwrap();
                let n = x.particle_count();
                for _ in 0..20 {
                    x = step(rule.as_ref(), &x, &mut rng).unwrap();
                    prop_assert_eq!(x.particle_count(), n);
                }
            }
        }
    }
}
