//! Particle identities and the distance-`L` pairing procedure.

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lattice::{Configuration, Lattice, Point};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Component {
    First,
    Second,
}

impl Component {
    pub fn index(self) -> usize {
        match self {
            Component::First => 0,
            Component::Second => 1,
        }
    }

    pub fn other(self) -> Component {
        match self {
            Component::First => Component::Second,
            Component::Second => Component::First,
        }
    }
}

/// One particle of one component. Ids are indices into the component's
/// particle list and are never reused.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Particle {
    pub id: u32,
    pub site: usize,
    /// Id of the partner in the other component.
    pub partner: Option<u32>,
}

impl Particle {
    /// 1 when paired, 0 otherwise.
    pub fn state(&self) -> u8 {
        self.partner.is_some() as u8
    }
}

/// Why a pair came apart.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BreakReason {
    /// Partners drifted farther apart than `L`.
    Distance,
    /// Exactly one partner's move was inadmissible.
    Admissibility,
}

/// Pairing log entry, written as one JSON line per event when tracing.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum PairingEvent {
    Formed {
        time: u64,
        first: u32,
        second: u32,
    },
    Broken {
        time: u64,
        first: u32,
        second: u32,
        reason: BreakReason,
    },
    /// `first` and `second` became partners; `released` (of
    /// `released_component`) lost its partner to make room.
    Swapped {
        time: u64,
        first: u32,
        second: u32,
        released: u32,
        released_component: Component,
    },
}

/// Particles of both components with their partner links.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParticleRegistry {
    components: [Vec<Particle>; 2],
}

fn particles_of(x: &Configuration) -> Vec<Particle> {
    let mut out = Vec::with_capacity(x.particle_count() as usize);
    for (site, &v) in x.values().iter().enumerate() {
        for _ in 0..v {
            out.push(Particle {
                id: out.len() as u32,
                site,
                partner: None,
            });
        }
    }
    out
}

impl ParticleRegistry {
    /// All particles unpaired, ids assigned in site order.
    pub fn from_configurations(x: &Configuration, y: &Configuration) -> Self {
        ParticleRegistry {
            components: [particles_of(x), particles_of(y)],
        }
    }

    pub fn particles(&self, c: Component) -> &[Particle] {
        &self.components[c.index()]
    }

    pub(crate) fn particles_mut(&mut self, c: Component) -> &mut [Particle] {
        &mut self.components[c.index()]
    }

    pub fn get(&self, c: Component, id: u32) -> Option<&Particle> {
        self.components[c.index()].get(id as usize)
    }

    pub fn unpaired(&self, c: Component) -> usize {
        self.components[c.index()]
            .iter()
            .filter(|p| p.partner.is_none())
            .count()
    }

    pub fn pair_count(&self) -> usize {
        self.components[0]
            .iter()
            .filter(|p| p.partner.is_some())
            .count()
    }

    /// All current pairs as `(first id, second id)`.
    pub fn pairs(&self) -> Vec<(u32, u32)> {
        self.components[0]
            .iter()
            .filter_map(|p| p.partner.map(|q| (p.id, q)))
            .collect()
    }

    pub(crate) fn link(&mut self, first: u32, second: u32) {
        self.components[0][first as usize].partner = Some(second);
        self.components[1][second as usize].partner = Some(first);
    }

    pub(crate) fn unlink_first(&mut self, first: u32) -> Option<u32> {
        let second = self.components[0][first as usize].partner.take()?;
        self.components[1][second as usize].partner = None;
        Some(second)
    }

    /// Checks the matching is symmetric and the particles reproduce the
    /// configurations site by site.
    pub fn check(&self, x: &Configuration, y: &Configuration) -> Result<()> {
        let bad = |m: String| Err(Error::InvariantViolation(m));
        for (c, conf) in [(Component::First, x), (Component::Second, y)] {
            let mut counts = vec![0u32; conf.lattice().site_count()];
            for (i, p) in self.particles(c).iter().enumerate() {
                if p.id as usize != i {
                    return bad(format!("{c:?} particle at position {i} has id {}", p.id));
                }
                let Some(n) = counts.get_mut(p.site) else {
                    return bad(format!("{c:?} particle {} sits off the lattice", p.id));
                };
                *n += 1;
                if let Some(q) = p.partner {
                    let back = self.get(c.other(), q).and_then(|o| o.partner);
                    if back != Some(p.id) {
                        return bad(format!(
                            "{c:?} particle {} links to {q}, which does not link back",
                            p.id
                        ));
                    }
                }
            }
            if let Some(site) = counts
                .iter()
                .zip(conf.values())
                .position(|(&n, &v)| n != v as u32)
            {
                return bad(format!(
                    "{c:?} registry holds {} particles at site {site}, configuration {}",
                    counts[site],
                    conf.get(site)
                ));
            }
        }
        Ok(())
    }
}

/// Positions of `sites` sorted by distance to the origin, ties in uniformly
/// random order.
pub(crate) fn order_by_distance<R: Rng + ?Sized>(
    lattice: &Lattice,
    sites: impl Iterator<Item = usize>,
    rng: &mut R,
) -> Vec<u32> {
    let mut keyed: Vec<(u32, u64, u32)> = sites
        .enumerate()
        .map(|(k, s)| (lattice.site_norm(s), rng.random::<u64>(), k as u32))
        .collect();
    keyed.sort_unstable();
    keyed.into_iter().map(|(_, _, k)| k).collect()
}

/// Particle sites of `x` (one entry per particle) ordered by distance to the
/// origin; particles at equal distance come in random order.
pub fn enumerate_particles<R: Rng + ?Sized>(x: &Configuration, rng: &mut R) -> Vec<usize> {
    let parts = particles_of(x);
    order_by_distance(x.lattice(), parts.iter().map(|p| p.site), rng)
        .into_iter()
        .map(|k| parts[k as usize].site)
        .collect()
}

/// Site-to-particle lookup for one component.
struct Occupancy {
    start: Vec<u32>,
    ids: Vec<u32>,
}

impl Occupancy {
    fn build(sites: usize, particles: &[Particle]) -> Self {
        let mut start = vec![0u32; sites + 1];
        for p in particles {
            start[p.site + 1] += 1;
        }
        for i in 0..sites {
            start[i + 1] += start[i];
        }
        let mut fill = start.clone();
        let mut ids = vec![0u32; particles.len()];
        for p in particles {
            ids[fill[p.site] as usize] = p.id;
            fill[p.site] += 1;
        }
        Occupancy { start, ids }
    }

    fn at(&self, site: usize) -> &[u32] {
        &self.ids[self.start[site] as usize..self.start[site + 1] as usize]
    }
}

/// Runs the pairing procedure once. `shells[k]` lists the offsets at
/// distance exactly `k`, for `k = 0..=limit`.
pub(crate) fn pairing_pass<R: Rng + ?Sized>(
    registry: &mut ParticleRegistry,
    lattice: &Lattice,
    shells: &[Vec<Point>],
    limit: usize,
    time: u64,
    rng: &mut R,
    mut log: Option<&mut Vec<PairingEvent>>,
) {
    let order = order_by_distance(
        lattice,
        registry.particles(Component::First).iter().map(|p| p.site),
        rng,
    );
    let mut rank2 = vec![0u32; registry.particles(Component::Second).len()];
    for (r, k) in order_by_distance(
        lattice,
        registry.particles(Component::Second).iter().map(|p| p.site),
        rng,
    )
    .into_iter()
    .enumerate()
    {
        rank2[k as usize] = r as u32;
    }
    let occ2 = Occupancy::build(lattice.site_count(), registry.particles(Component::Second));
    let mut emit = |e: PairingEvent| {
        if let Some(l) = log.as_deref_mut() {
            l.push(e);
        }
    };

    // Closest second-component particle within `radius` accepted by `keep`,
    // ties to the smallest enumeration index.
    let closest = |reg: &ParticleRegistry, from: usize, radius: usize, free_only: bool| {
        for shell in shells.iter().take(radius + 1) {
            let mut best: Option<u32> = None;
            for off in shell {
                let Some(site) = lattice.translate(from, off) else {
                    continue;
                };
                for &id in occ2.at(site) {
                    if free_only && reg.components[1][id as usize].partner.is_some() {
                        continue;
                    }
                    if best.is_none_or(|b| rank2[id as usize] < rank2[b as usize]) {
                        best = Some(id);
                    }
                }
            }
            if best.is_some() {
                return best;
            }
        }
        None
    };

    for eta in order {
        let site = registry.components[0][eta as usize].site;

        if let Some(partner) = registry.components[0][eta as usize].partner {
            let l = lattice.distance(site, registry.components[1][partner as usize].site) as usize;
            if l > limit {
                registry.unlink_first(eta);
                emit(PairingEvent::Broken {
                    time,
                    first: eta,
                    second: partner,
                    reason: BreakReason::Distance,
                });
            } else if l > 0 {
                if let Some(closer) = closest(registry, site, l - 1, true) {
                    registry.unlink_first(eta);
                    registry.link(eta, closer);
                    emit(PairingEvent::Swapped {
                        time,
                        first: eta,
                        second: closer,
                        released: partner,
                        released_component: Component::Second,
                    });
                }
            }
        }

        if registry.components[0][eta as usize].partner.is_none() {
            let Some(target) = closest(registry, site, limit, false) else {
                continue;
            };
            match registry.components[1][target as usize].partner {
                None => {
                    registry.link(eta, target);
                    emit(PairingEvent::Formed {
                        time,
                        first: eta,
                        second: target,
                    });
                }
                Some(holder) => {
                    let tsite = registry.components[1][target as usize].site;
                    let l = lattice.distance(site, tsite);
                    let held =
                        lattice.distance(tsite, registry.components[0][holder as usize].site);
                    if l < held {
                        registry.unlink_first(holder);
                        registry.link(eta, target);
                        emit(PairingEvent::Swapped {
                            time,
                            first: eta,
                            second: target,
                            released: holder,
                            released_component: Component::First,
                        });
                    }
                }
            }
        }
    }
}
