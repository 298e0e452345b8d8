use std::sync::Arc;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::coupling::{CoupledState, CouplingKind};
use crate::error::{domain, Error, Result};
use crate::lattice::{density_in_ball, Boundary, Cylinder, Point};
use crate::metrics::{discrepancy_set, ShiftScanner};
use crate::systems::SystemRule;

use super::{flag_counts, proportion_radius, Initial, Process, ReplicaPlan, SeriesSummary};

/// Two copies of a particle system under one coupling.
#[derive(Clone, Debug)]
pub struct CoupledProcess {
    pub rule: Arc<dyn SystemRule>,
    pub kind: CouplingKind,
    pub pairing_distance: usize,
    pub x0: Initial,
    pub y0: Initial,
}

impl CoupledProcess {
    pub fn new(
        rule: Arc<dyn SystemRule>,
        kind: CouplingKind,
        pairing_distance: usize,
        x0: Initial,
        y0: Initial,
    ) -> Result<Self> {
        if x0.lattice() != y0.lattice() || x0.alphabet() != y0.alphabet() {
            return Err(domain("the two initial laws live on different lattices"));
        }
        rule.check_compatible(x0.lattice(), x0.alphabet())?;
        Ok(CoupledProcess {
            rule,
            kind,
            pairing_distance,
            x0,
            y0,
        })
    }
}

impl Process for CoupledProcess {
    type State = CoupledState;

    fn initial(&self, rng: &mut ChaCha8Rng) -> Result<CoupledState> {
        let x = self.x0.sample(rng)?;
        let y = self.y0.sample(rng)?;
        CoupledState::new(x, y, self.kind, self.pairing_distance)
    }

    fn step(&self, state: &mut CoupledState, rng: &mut ChaCha8Rng) -> Result<()> {
        state.step(self.rule.as_ref(), rng)
    }
}

/// Two copies of a deterministic real map, for the real-line examples.
#[derive(Clone, Copy, Debug)]
pub struct RealPair {
    pub x: f64,
    pub y: f64,
    pub map: fn(f64) -> f64,
}

impl Process for RealPair {
    type State = (f64, f64);

    fn initial(&self, _: &mut ChaCha8Rng) -> Result<(f64, f64)> {
        Ok((self.x, self.y))
    }

    fn step(&self, s: &mut (f64, f64), _: &mut ChaCha8Rng) -> Result<()> {
        *s = ((self.map)(s.0), (self.map)(s.1));
        Ok(())
    }
}

/// What [`run_coupled`] records at every time step.
#[derive(Clone, Debug, Default)]
pub struct Recording {
    /// Ball radius for discrepancy densities; the largest ball when `None`.
    pub discrepancy_radius: Option<usize>,
    /// Shifts `|l| <= shift_bound` are scanned for the shifted discrepancy.
    pub shift_bound: usize,
    /// Radii `n` of the windows for the density of the first component.
    pub density_radii: Vec<usize>,
    /// Cylinders whose unshifted indicator mismatch is flagged.
    pub cylinders: Vec<Cylinder>,
}

/// One replica's series, each of length `horizon + 1`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryStats {
    pub discrepancy: Vec<f64>,
    pub shifted_discrepancy: Vec<f64>,
    pub best_shift: Vec<Vec<i64>>,
    pub paired: Vec<usize>,
    pub unpaired: Vec<usize>,
    pub unpaired_fraction: Vec<f64>,
    /// `densities[k][t]` is the density of `x^t` in the ball of radius
    /// `density_radii[k]`.
    pub densities: Vec<Vec<f64>>,
    /// `mismatch[c][t]` flags `1_A(x^t) != 1_A(y^t)` for cylinder `c`.
    pub mismatch: Vec<Vec<bool>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoupledRun {
    pub replicas: Vec<TrajectoryStats>,
    pub discrepancy: SeriesSummary,
    pub shifted_discrepancy: SeriesSummary,
    pub unpaired_fraction: SeriesSummary,
    /// `mismatch_rate[c][t]`, the fraction of replicas with a mismatch.
    pub mismatch_rate: Vec<Vec<f64>>,
}

fn ratio_f64(r: crate::lattice::Density) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// Runs `plan.replicas` coupled trajectories up to `plan.horizon` and
/// aggregates them with `z`-standard-error radii.
pub fn run_coupled(
    process: &CoupledProcess,
    plan: &ReplicaPlan,
    rec: &Recording,
    z: f64,
) -> Result<CoupledRun> {
    let lattice = process.x0.lattice().clone();
    let m = rec.discrepancy_radius.unwrap_or(lattice.max_radius());
    lattice.ball(m)?;
    for &n in &rec.density_radii {
        lattice.ball(n)?;
    }
    let scanner = match lattice.boundary() {
        Boundary::Torus => Some(ShiftScanner::new(&lattice, rec.shift_bound, m)?),
        Boundary::Open if rec.shift_bound > 0 => {
            return Err(Error::Unsupported(
                "shifted discrepancy on an open window".into(),
            ))
        }
        Boundary::Open => None,
    };
    let resolved = rec
        .cylinders
        .iter()
        .map(|c| c.resolve(&lattice))
        .collect::<Result<Vec<_>>>()?;
    let ball_len = lattice.ball(m)?.len() as f64;
    let zero_shift = vec![0i64; lattice.dim()];

    let replicas = plan.run(0, |_, rng| {
        let mut st = process.initial(rng)?;
        let mut s = TrajectoryStats {
            densities: vec![Vec::new(); rec.density_radii.len()],
            mismatch: vec![Vec::new(); resolved.len()],
            ..Default::default()
        };
        for t in 0..=plan.horizon {
            if t > 0 {
                process.step(&mut st, rng)?;
            }
            let (x, y) = (st.x(), st.y());
            let d = discrepancy_set(x, y, m)?.len() as f64 / ball_len;
            let (sd, shift) = match &scanner {
                Some(sc) => sc.best_density(x, y),
                None => (d, Point::from_slice(&zero_shift)),
            };
            s.discrepancy.push(d);
            s.shifted_discrepancy.push(sd);
            s.best_shift.push(shift.to_vec());
            let pairs = st.registry().pair_count();
            s.paired.push(pairs);
            s.unpaired.push(st.unpaired_count());
            s.unpaired_fraction.push(st.unpaired_fraction());
            for (k, &n) in rec.density_radii.iter().enumerate() {
                s.densities[k].push(ratio_f64(density_in_ball(x, n)?));
            }
            for (k, c) in resolved.iter().enumerate() {
                s.mismatch[k].push(c.contains(x) != c.contains(y));
            }
        }
        Ok(s)
    })?;

    let col = |f: fn(&TrajectoryStats) -> &Vec<f64>| {
        let v: Vec<&[f64]> = replicas.iter().map(|r| f(r).as_slice()).collect();
        SeriesSummary::from_replicas(&v, z)
    };
    let discrepancy = col(|r| &r.discrepancy);
    let shifted_discrepancy = col(|r| &r.shifted_discrepancy);
    let unpaired_fraction = col(|r| &r.unpaired_fraction);
    let r = replicas.len() as f64;
    let mismatch_rate = (0..resolved.len())
        .map(|c| {
            (0..=plan.horizon)
                .map(|t| replicas.iter().filter(|s| s.mismatch[c][t]).count() as f64 / r)
                .collect()
        })
        .collect();
    Ok(CoupledRun {
        replicas,
        discrepancy,
        shifted_discrepancy,
        unpaired_fraction,
        mismatch_rate,
    })
}

/// Estimated `P(1_A(x^t) != 1_A(shift_l y^t))` per time, minimized over the
/// candidate shifts (ties go to the earliest candidate).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MismatchSeries {
    pub rate: Vec<f64>,
    /// Index of the minimizing candidate at each time.
    pub best: Vec<usize>,
    pub ci: Vec<f64>,
}

/// Mismatch rates for arbitrary processes: `observe` returns one mismatch
/// flag per candidate shift.
pub fn indicator_mismatch_rate_with<P, F>(
    process: &P,
    plan: &ReplicaPlan,
    candidates: usize,
    observe: F,
    z: f64,
) -> Result<MismatchSeries>
where
    P: Process,
    F: Fn(&mut P::State) -> Result<Vec<bool>> + Sync,
{
    if candidates == 0 {
        return Err(domain("no candidate shifts"));
    }
    let counts = flag_counts(process, plan, 0, plan.horizon, candidates, observe)?;
    let r = plan.replicas as f64;
    let mut out = MismatchSeries {
        rate: Vec::new(),
        best: Vec::new(),
        ci: Vec::new(),
    };
    for row in counts {
        let (k, &c) = row
            .iter()
            .enumerate()
            .min_by_key(|&(k, c)| (*c, k))
            .expect("at least one candidate");
        let p = c as f64 / r;
        out.rate.push(p);
        out.best.push(k);
        out.ci.push(proportion_radius(p, plan.replicas, z));
    }
    Ok(out)
}

/// Mismatch rates of a cylinder between the two coupled components, with
/// shifts `|l| <= shift_bound` applied to the second one. Returns the series
/// and the candidate shifts in the order `best` indexes them.
pub fn indicator_mismatch_rate(
    process: &CoupledProcess,
    cylinder: &Cylinder,
    shift_bound: usize,
    plan: &ReplicaPlan,
    z: f64,
) -> Result<(MismatchSeries, Vec<Point>)> {
    let lattice = process.x0.lattice().clone();
    if shift_bound > 0 && lattice.boundary() != Boundary::Torus {
        return Err(Error::Unsupported(
            "shifted indicators on an open window".into(),
        ));
    }
    let offsets = lattice.offsets_within(shift_bound);
    let resolved = cylinder.resolve(&lattice)?;
    let shifted = offsets
        .iter()
        .map(|l| cylinder.shifted(l, &lattice)?.resolve(&lattice))
        .collect::<Result<Vec<_>>>()?;
    let series = indicator_mismatch_rate_with(
        process,
        plan,
        offsets.len(),
        |st: &mut CoupledState| {
            let a = resolved.contains(st.x());
            Ok(shifted.iter().map(|c| c.contains(st.y()) != a).collect())
        },
        z,
    )?;
    Ok((series, offsets))
}
