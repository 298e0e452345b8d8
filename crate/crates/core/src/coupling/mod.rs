//! Couplings of two copies of a particle system.
//!
//! Four kinds are provided. `Independent` drives the copies with unrelated
//! noise. `Synchronous` feeds both copies the same noise site by site.
//! `EqualPairing` and `LPairing` keep a matching between particles of the two
//! copies; matched particles share their velocity draw, everything else is
//! drawn independently. In every kind each copy, viewed alone, makes exactly
//! one step of the rule.

mod pairing;
mod splice;

use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::lattice::{Boundary, Configuration, Lattice, Point};
use crate::systems::{apply_moves, decide, Move, NoiseField, SystemRule};

pub use pairing::{
    enumerate_particles, BreakReason, Component, PairingEvent, Particle, ParticleRegistry,
};
pub use splice::{rosenthal_splice, tau_epsilon, tau_epsilon_paths, PathMetric};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CouplingKind {
    Independent,
    Synchronous,
    EqualPairing,
    LPairing,
}

impl CouplingKind {
    pub fn uses_pairing(self) -> bool {
        matches!(self, CouplingKind::EqualPairing | CouplingKind::LPairing)
    }
}

impl std::str::FromStr for CouplingKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "independent" => Ok(CouplingKind::Independent),
            "synchronous" => Ok(CouplingKind::Synchronous),
            "equal_pairing" => Ok(CouplingKind::EqualPairing),
            "l_pairing" => Ok(CouplingKind::LPairing),
            _ => Err(domain(format!("unknown coupling kind {s:?}"))),
        }
    }
}

/// Two configurations on one lattice together with their particle matching.
#[derive(Clone, Debug)]
pub struct CoupledState {
    x: Configuration,
    y: Configuration,
    registry: ParticleRegistry,
    kind: CouplingKind,
    pairing_distance: usize,
    time: u64,
    shells: Arc<Vec<Vec<Point>>>,
    events: Option<Vec<PairingEvent>>,
}

impl CoupledState {
    /// Starts with every particle unpaired. `pairing_distance` is the bound
    /// `L` for [`CouplingKind::LPairing`] and is ignored (treated as 0) for
    /// equal pairing.
    pub fn new(
        x: Configuration,
        y: Configuration,
        kind: CouplingKind,
        pairing_distance: usize,
    ) -> Result<Self> {
        x.same_space(&y)?;
        let lat = x.lattice();
        let limit = match kind {
            CouplingKind::LPairing => {
                if pairing_distance == 0 {
                    return Err(domain("L-pairing needs a pairing distance L > 0"));
                }
                pairing_distance
            }
            _ => 0,
        };
        if lat.boundary() == Boundary::Torus && limit > lat.max_radius() {
            return Err(domain(format!(
                "pairing distance {limit} exceeds the lattice radius {}",
                lat.max_radius()
            )));
        }
        let shells = if kind.uses_pairing() {
            (0..=limit).map(|k| lat.shell(k)).collect()
        } else {
            Vec::new()
        };
        let registry = ParticleRegistry::from_configurations(&x, &y);
        Ok(CoupledState {
            x,
            y,
            registry,
            kind,
            pairing_distance: limit,
            time: 0,
            shells: Arc::new(shells),
            events: None,
        })
    }

    pub fn x(&self) -> &Configuration {
        &self.x
    }

    pub fn y(&self) -> &Configuration {
        &self.y
    }

    pub fn registry(&self) -> &ParticleRegistry {
        &self.registry
    }

    pub fn kind(&self) -> CouplingKind {
        self.kind
    }

    /// The effective pairing bound (0 for equal pairing).
    pub fn pairing_distance(&self) -> usize {
        self.pairing_distance
    }

    pub fn time(&self) -> u64 {
        self.time
    }

    fn lattice(&self) -> &Lattice {
        self.x.lattice()
    }

    /// Starts recording pairing events.
    pub fn enable_trace(&mut self) {
        self.events.get_or_insert_with(Vec::new);
    }

    /// Returns and clears the recorded events.
    pub fn take_events(&mut self) -> Vec<PairingEvent> {
        self.events.as_mut().map(std::mem::take).unwrap_or_default()
    }

    /// Pairs two particles by hand. Both must be unpaired and no farther
    /// apart than the pairing distance.
    pub fn pair(&mut self, first: u32, second: u32) -> Result<()> {
        let (a, b) = match (
            self.registry.get(Component::First, first),
            self.registry.get(Component::Second, second),
        ) {
            (Some(a), Some(b)) => (a, b),
            _ => return Err(domain(format!("no particles {first} / {second}"))),
        };
        if a.partner.is_some() || b.partner.is_some() {
            return Err(domain("both particles must be unpaired"));
        }
        if self.lattice().distance(a.site, b.site) as usize > self.pairing_distance {
            return Err(domain(
                "particles are farther apart than the pairing distance",
            ));
        }
        self.registry.link(first, second);
        Ok(())
    }

    pub fn check(&self) -> Result<()> {
        self.registry.check(&self.x, &self.y)
    }

    pub fn unpaired_count(&self) -> usize {
        self.registry.unpaired(Component::First) + self.registry.unpaired(Component::Second)
    }

    /// Unpaired particles of both components over all particles.
    pub fn unpaired_fraction(&self) -> f64 {
        let total = self.registry.particles(Component::First).len()
            + self.registry.particles(Component::Second).len();
        if total == 0 {
            0.0
        } else {
            self.unpaired_count() as f64 / total as f64
        }
    }

    /// Runs the pairing procedure with bound `L` (0 for equal pairing).
    pub fn pairing_update<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<()> {
        self.check()?;
        let lat = Arc::clone(self.x.lattice());
        let shells = Arc::clone(&self.shells);
        pairing::pairing_pass(
            &mut self.registry,
            &lat,
            &shells,
            self.pairing_distance,
            self.time,
            rng,
            self.events.as_mut(),
        );
        Ok(())
    }

    fn draw_noise<R: Rng + ?Sized>(&self, rng: &mut R) -> [Vec<f64>; 2] {
        let first = self.registry.particles(Component::First);
        let second = self.registry.particles(Component::Second);
        match self.kind {
            CouplingKind::Independent => [
                first.iter().map(|_| rng.random()).collect(),
                second.iter().map(|_| rng.random()).collect(),
            ],
            CouplingKind::Synchronous => {
                let field = NoiseField::sample(self.lattice(), self.x.alphabet(), rng);
                let per_slot = |ps: &[Particle]| {
                    let mut seen = vec![0usize; self.lattice().site_count()];
                    ps.iter()
                        .map(|p| {
                            let slot = seen[p.site];
                            seen[p.site] += 1;
                            field.get(p.site, slot)
                        })
                        .collect::<Vec<f64>>()
                };
                [per_slot(first), per_slot(second)]
            }
            CouplingKind::EqualPairing | CouplingKind::LPairing => {
                let mut n1 = vec![f64::NAN; second.len()];
                let n0 = first
                    .iter()
                    .map(|p| {
                        let u: f64 = rng.random();
                        if let Some(q) = p.partner {
                            n1[q as usize] = u;
                        }
                        u
                    })
                    .collect();
                for (slot, p) in n1.iter_mut().zip(second) {
                    if p.partner.is_none() {
                        *slot = rng.random();
                    }
                }
                [n0, n1]
            }
        }
    }

    /// One coupled step: velocities are drawn per the coupling kind, each
    /// component moves under `rule`, pairs whose members disagree on
    /// admissibility are broken, and the pairing procedure runs.
    pub fn step<R: Rng + ?Sized>(&mut self, rule: &dyn SystemRule, rng: &mut R) -> Result<()> {
        rule.check_compatible(self.lattice(), self.x.alphabet())?;
        let noise = self.draw_noise(rng);
        let mut admissible: [Vec<bool>; 2] = Default::default();
        let mut next: [Option<Configuration>; 2] = [None, None];
        for c in [Component::First, Component::Second] {
            let conf = match c {
                Component::First => &self.x,
                Component::Second => &self.y,
            };
            let ps = self.registry.particles(c);
            let mut moves: Vec<Move> = Vec::new();
            let mut targets = Vec::with_capacity(ps.len());
            let mut flags = Vec::with_capacity(ps.len());
            for (p, &u) in ps.iter().zip(&noise[c.index()]) {
                let (mv, ok) = decide(rule, conf, p.site, u)?;
                flags.push(ok);
                targets.push(mv.map_or(p.site, |m| m.to));
                moves.extend(mv);
            }
            next[c.index()] = Some(apply_moves(conf, &moves)?);
            for (p, t) in self.registry.particles_mut(c).iter_mut().zip(targets) {
                p.site = t;
            }
            admissible[c.index()] = flags;
        }
        let [nx, ny] = next;
        self.x = nx.expect("first component stepped");
        self.y = ny.expect("second component stepped");
        self.time += 1;

        if self.kind.uses_pairing() {
            for (first, second) in self.registry.pairs() {
                if admissible[0][first as usize] != admissible[1][second as usize] {
                    self.registry.unlink_first(first);
                    if let Some(log) = self.events.as_mut() {
                        log.push(PairingEvent::Broken {
                            time: self.time,
                            first,
                            second,
                            reason: BreakReason::Admissibility,
                        });
                    }
                }
            }
            self.pairing_update(rng)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{Alphabet, Lattice};
    use crate::systems::{step, Tasep};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn torus(side: usize) -> Arc<Lattice> {
        Arc::new(Lattice::new(1, side, Boundary::Torus).unwrap())
    }

    fn at(lat: &Arc<Lattice>, alphabet: Alphabet, sites: &[(i64, u8)]) -> Configuration {
        Configuration::from_fn(lat.clone(), alphabet, |c| {
            sites
                .iter()
                .find(|(s, _)| *s == c[0])
                .map_or(0, |&(_, v)| v)
        })
        .unwrap()
    }

    fn id_at(st: &CoupledState, c: Component, coord: i64) -> u32 {
        let lat = st.x().lattice();
        st.registry()
            .particles(c)
            .iter()
            .find(|p| lat.coords(p.site)[0] == coord)
            .unwrap()
            .id
    }

    fn partner_of(st: &CoupledState, c: Component, id: u32) -> Option<u32> {
        st.registry().get(c, id).unwrap().partner
    }

    #[test]
    fn enumeration_sorts_by_distance() {
        let lat = torus(21);
        let x = at(&lat, Alphabet::binary(), &[(3, 1), (-1, 1)]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let order = enumerate_particles(&x, &mut rng);
        let coords: Vec<i64> = order.iter().map(|&s| lat.coords(s)[0]).collect();
        assert_eq!(coords, vec![-1, 3]);
        let single = at(&lat, Alphabet::binary(), &[(5, 1)]);
        assert_eq!(enumerate_particles(&single, &mut rng).len(), 1);
    }

    #[test]
    fn lone_pair_within_bound_is_kept() {
        let lat = torus(21);
        let x = at(&lat, Alphabet::binary(), &[(0, 1)]);
        let y = at(&lat, Alphabet::binary(), &[(2, 1)]);
        let mut st = CoupledState::new(x, y, CouplingKind::LPairing, 3).unwrap();
        st.pair(0, 0).unwrap();
        st.pairing_update(&mut ChaCha8Rng::seed_from_u64(1))
            .unwrap();
        assert_eq!(st.registry().pairs(), vec![(0, 0)]);
    }

    #[test]
    fn pair_beyond_bound_is_broken() {
        let lat = torus(21);
        let x = at(&lat, Alphabet::binary(), &[(0, 1)]);
        let y = at(&lat, Alphabet::binary(), &[(2, 1)]);
        let mut st = CoupledState::new(x, y, CouplingKind::LPairing, 3).unwrap();
        st.pair(0, 0).unwrap();
        // push the second particle to distance L + 1 = 4
        st.registry.particles_mut(Component::Second)[0].site = lat.index_of(&[4]).unwrap();
        st.y = at(&lat, Alphabet::binary(), &[(4, 1)]);
        st.enable_trace();
        st.pairing_update(&mut ChaCha8Rng::seed_from_u64(1))
            .unwrap();
        assert!(st.registry().pairs().is_empty());
        assert_eq!(st.unpaired_count(), 2);
        let events = st.take_events();
        assert!(matches!(
            events[0],
            PairingEvent::Broken {
                reason: BreakReason::Distance,
                ..
            }
        ));
    }

    #[test]
    fn figure_one_scenario() {
        // 1 at 0 paired with 1' at 3; 2 at 2 is closer to 1' than 1 is;
        // 3 at 10 and 2' at 12 are unpaired within L = 3.
        let lat = torus(31);
        let x = at(&lat, Alphabet::binary(), &[(0, 1), (2, 1), (10, 1)]);
        let y = at(&lat, Alphabet::binary(), &[(3, 1), (12, 1)]);
        let mut st = CoupledState::new(x, y, CouplingKind::LPairing, 3).unwrap();
        let (p1, p2, p3) = (
            id_at(&st, Component::First, 0),
            id_at(&st, Component::First, 2),
            id_at(&st, Component::First, 10),
        );
        let (q1, q2) = (
            id_at(&st, Component::Second, 3),
            id_at(&st, Component::Second, 12),
        );
        st.pair(p1, q1).unwrap();
        st.enable_trace();
        st.pairing_update(&mut ChaCha8Rng::seed_from_u64(9))
            .unwrap();
        assert_eq!(partner_of(&st, Component::First, p1), None);
        assert_eq!(partner_of(&st, Component::First, p2), Some(q1));
        assert_eq!(partner_of(&st, Component::First, p3), Some(q2));
        st.check().unwrap();
        let events = st.take_events();
        assert_eq!(events.len(), 2);
        assert!(matches!(
            events[0],
            PairingEvent::Swapped {
                released_component: Component::First,
                ..
            }
        ));
    }

    #[test]
    fn paired_particle_swaps_to_strictly_closer_free_partner() {
        let lat = torus(31);
        let x = at(&lat, Alphabet::binary(), &[(0, 1)]);
        let y = at(&lat, Alphabet::binary(), &[(-3, 1), (1, 1)]);
        let mut st = CoupledState::new(x, y, CouplingKind::LPairing, 4).unwrap();
        let far = id_at(&st, Component::Second, -3);
        let near = id_at(&st, Component::Second, 1);
        st.pair(0, far).unwrap();
        st.pairing_update(&mut ChaCha8Rng::seed_from_u64(2))
            .unwrap();
        assert_eq!(partner_of(&st, Component::First, 0), Some(near));
        assert_eq!(partner_of(&st, Component::Second, far), None);
    }

    #[test]
    fn equal_pairing_examples() {
        let lat = torus(11);
        let a = Alphabet::new(3).unwrap();
        let x = at(&lat, a, &[(0, 1), (3, 1)]);
        let y = at(&lat, a, &[(0, 1), (4, 1)]);
        let mut st = CoupledState::new(x, y, CouplingKind::EqualPairing, 5).unwrap();
        assert_eq!(st.pairing_distance(), 0);
        st.pairing_update(&mut ChaCha8Rng::seed_from_u64(0))
            .unwrap();
        assert_eq!(st.registry().pairs().len(), 1);
        assert_eq!(st.unpaired_count(), 2);

        // two first-component particles share a site with one second-component particle
        let x = at(&lat, a, &[(2, 2)]);
        let y = at(&lat, a, &[(2, 1)]);
        let mut winners = [0u32; 2];
        for seed in 0..200 {
            let mut st =
                CoupledState::new(x.clone(), y.clone(), CouplingKind::EqualPairing, 0).unwrap();
            st.pairing_update(&mut ChaCha8Rng::seed_from_u64(seed))
                .unwrap();
            let pairs = st.registry().pairs();
            assert_eq!(pairs.len(), 1);
            winners[pairs[0].0 as usize] += 1;
        }
        assert!(winners[0] > 0 && winners[1] > 0, "{winners:?}");
    }

    #[test]
    fn identical_components_stay_identical() {
        let lat = torus(40);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = Configuration::from_fn(lat, Alphabet::binary(), |c| (c[0] % 3 == 0) as u8).unwrap();
        let mut st = CoupledState::new(x.clone(), x, CouplingKind::LPairing, 2).unwrap();
        st.pairing_update(&mut rng).unwrap();
        assert_eq!(st.unpaired_count(), 0);
        let rule = Tasep::new(1.0).unwrap();
        for _ in 0..50 {
            st.step(&rule, &mut rng).unwrap();
            assert_eq!(st.x(), st.y());
            assert_eq!(st.unpaired_count(), 0);
        }
        let rule = Tasep::new(0.4).unwrap();
        for _ in 0..200 {
            st.step(&rule, &mut rng).unwrap();
            assert_eq!(st.x(), st.y());
        }
    }

    #[test]
    fn blocked_partner_breaks_the_pair() {
        // sites -3..=2; x: particle at -3; y: particles at -3 and -2
        let lat = torus(6);
        let x = at(&lat, Alphabet::binary(), &[(-3, 1)]);
        let y = at(&lat, Alphabet::binary(), &[(-3, 1), (-2, 1)]);
        let mut st = CoupledState::new(x, y, CouplingKind::EqualPairing, 0).unwrap();
        st.pair(0, 0).unwrap();
        st.enable_trace();
        st.step(&Tasep::new(1.0).unwrap(), &mut ChaCha8Rng::seed_from_u64(0))
            .unwrap();
        assert_eq!(st.x().to_line(), "010000");
        assert_eq!(st.y().to_line(), "101000");
        assert!(st.registry().pairs().is_empty());
        assert!(st.take_events().iter().any(|e| matches!(
            e,
            PairingEvent::Broken {
                reason: BreakReason::Admissibility,
                ..
            }
        )));
    }

    #[test]
    fn synchronous_coupling_of_equal_starts_never_separates() {
        let lat = torus(33);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let x = Configuration::from_fn(lat, Alphabet::binary(), |c| (c[0].rem_euclid(5) < 2) as u8)
            .unwrap();
        let mut st = CoupledState::new(x.clone(), x, CouplingKind::Synchronous, 0).unwrap();
        for _ in 0..300 {
            st.step(&Tasep::new(0.5).unwrap(), &mut rng).unwrap();
            assert_eq!(st.x(), st.y());
        }
    }

    #[test]
    fn l_pairing_rejects_zero_distance_and_huge_bound() {
        let lat = torus(11);
        let x = Configuration::zeros(lat, Alphabet::binary());
        assert!(CoupledState::new(x.clone(), x.clone(), CouplingKind::LPairing, 0).is_err());
        assert!(CoupledState::new(x.clone(), x, CouplingKind::LPairing, 6).is_err());
    }

    #[test]
    fn inconsistent_registry_is_reported() {
        let lat = torus(11);
        let x = at(&lat, Alphabet::binary(), &[(0, 1)]);
        let mut st = CoupledState::new(x.clone(), x, CouplingKind::LPairing, 2).unwrap();
        st.registry.particles_mut(Component::First)[0].site = 3;
        assert!(matches!(
            st.pairing_update(&mut ChaCha8Rng::seed_from_u64(0)),
            Err(Error::InvariantViolation(_))
        ));
    }

    #[test]
    fn independent_coupling_has_uncoupled_marginals() {
        // single-site occupancy after one step, Monte Carlo vs the uncoupled step
        let lat = torus(12);
        let x = Configuration::from_line(lat.clone(), Alphabet::binary(), "110100111010").unwrap();
        let y = Configuration::from_line(lat, Alphabet::binary(), "011011001100").unwrap();
        let rule = Tasep::new(0.5).unwrap();
        let site = 1;
        let reps = 10_000;
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let (mut coupled, mut plain) = (0u32, 0u32);
        for _ in 0..reps {
            let mut st =
                CoupledState::new(x.clone(), y.clone(), CouplingKind::Independent, 0).unwrap();
            st.step(&rule, &mut rng).unwrap();
            coupled += st.x().get(site) as u32;
            plain += step(&rule, &x, &mut rng).unwrap().get(site) as u32;
        }
        // both estimate the same probability (1/2 for this site)
        let sigma = (0.25 / reps as f64).sqrt();
        let diff = (coupled as f64 - plain as f64).abs() / reps as f64;
        assert!(
            diff < 3.0 * std::f64::consts::SQRT_2 * sigma,
            "{coupled} vs {plain}"
        );
    }

    proptest! {
        #[test]
        fn matching_stays_consistent_and_within_bound(
            xb in proptest::collection::vec(0u8..2, 41),
            yb in proptest::collection::vec(0u8..2, 41),
            seed in any::<u64>(),
            l in 1usize..6,
            p in 0.0f64..=1.0,
        ) {
            let lat = torus(41);
            let x = Configuration::new(lat.clone(), Alphabet::binary(), xb).unwrap();
            let y = Configuration::new(lat.clone(), Alphabet::binary(), yb).unwrap();
            let mut st = CoupledState::new(x, y, CouplingKind::LPairing, l).unwrap();
            st.enable_trace();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let rule = Tasep::new(p).unwrap();
            for _ in 0..30 {
                st.step(&rule, &mut rng).unwrap();
                st.check().unwrap();
                for (a, b) in st.registry().pairs() {
                    let sa = st.registry().get(Component::First, a).unwrap().site;
                    let sb = st.registry().get(Component::Second, b).unwrap().site;
                    prop_assert!(lat.distance(sa, sb) as usize <= l);
                }
            }
        }

        #[test]
        fn small_l_pairing_matches_equal_pairing_on_colocated_particles(
            bits in proptest::collection::vec(0u8..2, 21),
            seed in any::<u64>(),
        ) {
            // identical components: every particle has a co-located partner at distance 0,
            // so L = 1 and L = 0 make the same decisions from the same stream
            let lat = torus(21);
            let x = Configuration::new(lat, Alphabet::binary(), bits).unwrap();
            let mut a = CoupledState::new(x.clone(), x.clone(), CouplingKind::LPairing, 1).unwrap();
            let mut b = CoupledState::new(x.clone(), x, CouplingKind::EqualPairing, 0).unwrap();
            a.pairing_update(&mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
            b.pairing_update(&mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
            prop_assert_eq!(a.registry().pairs(), b.registry().pairs());
        }
    }
}
