//! Monte Carlo experiments over independent replicas.
//!
//! Every replica draws from its own ChaCha8 stream: the plan's seed picks the
//! key and the replica index (plus a lane, so two samplers in one experiment
//! never share a stream) picks the stream. Replicas run in parallel and
//! results are collected in replica order, so a rerun of the same plan is
//! bit-identical regardless of scheduling.

mod coupled;
mod density;
mod measures;

use std::sync::Arc;

use rand::distr::{Bernoulli, Distribution as _};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Binomial;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::lattice::{Alphabet, Configuration, Lattice};

pub use coupled::{
    indicator_mismatch_rate, indicator_mismatch_rate_with, run_coupled, CoupledProcess, CoupledRun,
    MismatchSeries, RealPair, Recording, TrajectoryStats,
};
pub use density::{density_series, drift_bound, drift_bound_exact, DensitySeries};
pub use measures::{
    cesaro_estimate, cesaro_estimate_with, doubling_close_times, weak_convergence_probe,
    weak_convergence_probe_with, BitCylinder, DoublingProcess, DoublingSampler, EmpiricalMeasure,
    ProbeSeries, SingleProcess,
};

/// Default width of confidence intervals, in standard errors.
pub const DEFAULT_Z: f64 = 3.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplicaPlan {
    pub replicas: usize,
    pub horizon: usize,
    pub seed: u64,
}

impl ReplicaPlan {
    pub fn new(replicas: usize, horizon: usize, seed: u64) -> Result<Self> {
        if replicas == 0 {
            return Err(domain("a plan needs at least one replica"));
        }
        Ok(ReplicaPlan {
            replicas,
            horizon,
            seed,
        })
    }

    /// Stream id of replica `i` in lane `lane`.
    pub fn stream(&self, lane: u32, i: usize) -> u64 {
        ((lane as u64) << 32) | i as u64
    }

    pub fn rng(&self, lane: u32, i: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream(lane, i));
        rng
    }

    /// Runs `f` once per replica in parallel, results in replica order.
    pub fn run<T, F>(&self, lane: u32, f: F) -> Result<Vec<T>>
    where
        T: Send,
        F: Fn(usize, &mut ChaCha8Rng) -> Result<T> + Sync,
    {
        (0..self.replicas)
            .into_par_iter()
            .map(|i| f(i, &mut self.rng(lane, i)))
            .collect()
    }
}

/// A Markov process a replica can sample from.
pub trait Process: Sync {
    type State: Send;
    fn initial(&self, rng: &mut ChaCha8Rng) -> Result<Self::State>;
    fn step(&self, state: &mut Self::State, rng: &mut ChaCha8Rng) -> Result<()>;
}

/// Per-time counts `counts[t][k]` of replicas whose `observe` flag `k` is set,
/// for `t = 0..=horizon`.
pub(crate) fn flag_counts<P, F>(
    process: &P,
    plan: &ReplicaPlan,
    lane: u32,
    horizon: usize,
    flags: usize,
    observe: F,
) -> Result<Vec<Vec<u64>>>
where
    P: Process,
    F: Fn(&mut P::State) -> Result<Vec<bool>> + Sync,
{
    let per_replica = plan.run(lane, |_, rng| {
        let mut state = process.initial(rng)?;
        let mut out = Vec::with_capacity((horizon + 1) * flags);
        for t in 0..=horizon {
            if t > 0 {
                process.step(&mut state, rng)?;
            }
            let f = observe(&mut state)?;
            if f.len() != flags {
                return Err(domain(format!(
                    "observer returned {} flags, expected {flags}",
                    f.len()
                )));
            }
            out.extend(f);
        }
        Ok(out)
    })?;
    let mut counts = vec![vec![0u64; flags]; horizon + 1];
    for rep in per_replica {
        for (k, b) in rep.into_iter().enumerate() {
            counts[k / flags][k % flags] += b as u64;
        }
    }
    Ok(counts)
}

/// Normal-approximation radius for a proportion.
pub fn proportion_radius(p: f64, replicas: usize, z: f64) -> f64 {
    z * (p * (1.0 - p) / replicas as f64).sqrt()
}

/// Source of initial configurations.
#[derive(Clone, Debug)]
pub enum Initial {
    Fixed(Configuration),
    /// Product measure with mean occupancy `density` per site.
    Bernoulli {
        lattice: Arc<Lattice>,
        alphabet: Alphabet,
        density: f64,
    },
}

impl Initial {
    pub fn lattice(&self) -> &Arc<Lattice> {
        match self {
            Initial::Fixed(x) => x.lattice(),
            Initial::Bernoulli { lattice, .. } => lattice,
        }
    }

    pub fn alphabet(&self) -> Alphabet {
        match self {
            Initial::Fixed(x) => x.alphabet(),
            Initial::Bernoulli { alphabet, .. } => *alphabet,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Configuration> {
        match self {
            Initial::Fixed(x) => Ok(x.clone()),
            Initial::Bernoulli {
                lattice,
                alphabet,
                density,
            } => bernoulli(lattice.clone(), *alphabet, *density, rng),
        }
    }
}

/// I.i.d. sites with mean occupancy `r`. Binary alphabets get Bernoulli(r)
/// sites; larger ones get Binomial(|A| - 1, r / (|A| - 1)).
pub fn bernoulli<R: Rng + ?Sized>(
    lattice: Arc<Lattice>,
    alphabet: Alphabet,
    r: f64,
    rng: &mut R,
) -> Result<Configuration> {
    let k = alphabet.max_value() as u64;
    if !(0.0..=k as f64).contains(&r) {
        return Err(domain(format!("density {r} is outside [0, {k}]")));
    }
    let n = lattice.site_count();
    let values = if k == 1 {
        let b = Bernoulli::new(r).map_err(|e| domain(e.to_string()))?;
        (0..n).map(|_| b.sample(rng) as u8).collect()
    } else {
        let b = Binomial::new(k, r / k as f64).map_err(|e| domain(e.to_string()))?;
        (0..n).map(|_| b.sample(rng) as u8).collect()
    };
    Configuration::new(lattice, alphabet, values)
}

/// Mean, median and a `z`-standard-error radius per time step.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SeriesSummary {
    pub mean: Vec<f64>,
    pub median: Vec<f64>,
    pub ci: Vec<f64>,
}

impl SeriesSummary {
    pub fn from_replicas(series: &[&[f64]], z: f64) -> Self {
        let len = series.iter().map(|s| s.len()).min().unwrap_or(0);
        let r = series.len() as f64;
        let mut out = SeriesSummary::default();
        let mut column = Vec::with_capacity(series.len());
        for t in 0..len {
            column.clear();
            column.extend(series.iter().map(|s| s[t]));
            let mean = column.iter().sum::<f64>() / r;
            let var = if series.len() > 1 {
                column.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (r - 1.0)
            } else {
                0.0
            };
            out.mean.push(mean);
            out.median.push(median(&mut column));
            out.ci.push(z * (var / r).sqrt());
        }
        out
    }
}

pub fn median(values: &mut [f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    }
}
