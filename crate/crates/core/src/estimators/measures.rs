use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::lattice::{Configuration, Cylinder};
use crate::metrics::prefix_agreement;
use crate::systems::{BitStream, Dynamics};

use super::{flag_counts, proportion_radius, Initial, Process, ReplicaPlan};

/// One copy of a lattice system started from an initial law.
#[derive(Clone, Debug)]
pub struct SingleProcess {
    pub dynamics: Dynamics,
    pub init: Initial,
}

impl SingleProcess {
    pub fn new(dynamics: Dynamics, init: Initial) -> Result<Self> {
        dynamics.check_compatible(init.lattice(), init.alphabet())?;
        Ok(SingleProcess { dynamics, init })
    }
}

impl Process for SingleProcess {
    type State = Configuration;

    fn initial(&self, rng: &mut ChaCha8Rng) -> Result<Configuration> {
        self.init.sample(rng)
    }

    fn step(&self, x: &mut Configuration, rng: &mut ChaCha8Rng) -> Result<()> {
        *x = self.dynamics.advance(x, rng)?;
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DoublingSampler {
    /// The fixed point 0.
    Zero,
    /// A Lebesgue-random point of `[0, 1)`.
    Uniform,
}

/// The doubling map on exact binary expansions.
#[derive(Clone, Copy, Debug)]
pub struct DoublingProcess(pub DoublingSampler);

impl Process for DoublingProcess {
    type State = BitStream;

    fn initial(&self, rng: &mut ChaCha8Rng) -> Result<BitStream> {
        Ok(match self.0 {
            DoublingSampler::Zero => BitStream::zeros(),
            DoublingSampler::Uniform => BitStream::from_rng(ChaCha8Rng::from_rng(rng)),
        })
    }

    fn step(&self, b: &mut BitStream, _: &mut ChaCha8Rng) -> Result<()> {
        b.advance();
        Ok(())
    }
}

/// Points of `[0, 1)` whose binary digits at the given positions are fixed.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BitCylinder {
    pub bits: Vec<(usize, bool)>,
}

impl BitCylinder {
    pub fn new(bits: Vec<(usize, bool)>) -> Result<Self> {
        if bits.is_empty() {
            return Err(domain("a bit cylinder needs at least one digit"));
        }
        Ok(BitCylinder { bits })
    }

    pub fn contains(&self, b: &mut BitStream) -> bool {
        self.bits.iter().all(|&(k, v)| b.bit(k) == v)
    }

    pub fn label(&self) -> String {
        self.bits
            .iter()
            .map(|(k, v)| format!("{k}:{}", *v as u8))
            .collect::<Vec<_>>()
            .join(",")
    }
}

pub(crate) fn cylinder_label(c: &Cylinder) -> String {
    c.base()
        .iter()
        .map(|(p, v)| {
            let coords: Vec<String> = p.iter().map(|c| c.to_string()).collect();
            format!("{}:{v}", coords.join(" "))
        })
        .collect::<Vec<_>>()
        .join(",")
}

/// Cylinder probabilities with their confidence radii
/// `z sqrt(p (1 - p) / R)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalMeasure {
    pub labels: Vec<String>,
    pub estimates: Vec<f64>,
    pub ci: Vec<f64>,
    pub replicas: usize,
    /// Number of time steps averaged over.
    pub averaging: usize,
    pub z: f64,
}

impl EmpiricalMeasure {
    /// Whether `value` lies within the confidence radius of estimate `k`.
    pub fn covers(&self, k: usize, value: f64) -> bool {
        (self.estimates[k] - value).abs() <= self.ci[k]
    }
}

/// Estimates `(1/n) sum_{t<n} P(x^t in A_k)` for each flag `k` of `observe`.
pub fn cesaro_estimate_with<P, F>(
    process: &P,
    n: usize,
    labels: Vec<String>,
    observe: F,
    plan: &ReplicaPlan,
    z: f64,
) -> Result<EmpiricalMeasure>
where
    P: Process,
    F: Fn(&mut P::State) -> Result<Vec<bool>> + Sync,
{
    if n == 0 {
        return Err(domain("averaging length must be positive"));
    }
    let counts = flag_counts(process, plan, 0, n - 1, labels.len(), observe)?;
    let total = (n * plan.replicas) as f64;
    let estimates: Vec<f64> = (0..labels.len())
        .map(|k| counts.iter().map(|row| row[k]).sum::<u64>() as f64 / total)
        .collect();
    let ci = estimates
        .iter()
        .map(|&p| proportion_radius(p, plan.replicas, z))
        .collect();
    Ok(EmpiricalMeasure {
        labels,
        estimates,
        ci,
        replicas: plan.replicas,
        averaging: n,
        z,
    })
}

/// Time-averaged cylinder probabilities of a lattice system started from
/// `init`. With `n = 1` this is the empirical measure of `init` itself.
pub fn cesaro_estimate(
    dynamics: &Dynamics,
    init: &Initial,
    n: usize,
    cylinders: &[Cylinder],
    plan: &ReplicaPlan,
    z: f64,
) -> Result<EmpiricalMeasure> {
    let process = SingleProcess::new(dynamics.clone(), init.clone())?;
    let resolved = cylinders
        .iter()
        .map(|c| c.resolve(init.lattice()))
        .collect::<Result<Vec<_>>>()?;
    cesaro_estimate_with(
        &process,
        n,
        cylinders.iter().map(cylinder_label).collect(),
        |x: &mut Configuration| Ok(resolved.iter().map(|c| c.contains(x)).collect()),
        plan,
        z,
    )
}

/// Per-time comparison of two empirical laws on a cylinder family.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeSeries {
    pub labels: Vec<String>,
    /// `max_k |first[t][k] - second[t][k]|`.
    pub distance: Vec<f64>,
    /// `z` standard errors of the difference at the maximizing cylinder.
    pub ci: Vec<f64>,
    pub first: Vec<Vec<f64>>,
    pub second: Vec<Vec<f64>>,
}

/// Runs both processes under the same plan (on separate random streams) and
/// compares their cylinder estimates at every `t <= plan.horizon`.
pub fn weak_convergence_probe_with<P, F>(
    a: &P,
    b: &P,
    labels: Vec<String>,
    observe: F,
    plan: &ReplicaPlan,
    z: f64,
) -> Result<ProbeSeries>
where
    P: Process,
    F: Fn(&mut P::State) -> Result<Vec<bool>> + Sync,
{
    let k = labels.len();
    let r = plan.replicas as f64;
    let to_probs = |c: Vec<Vec<u64>>| -> Vec<Vec<f64>> {
        c.into_iter()
            .map(|row| row.into_iter().map(|v| v as f64 / r).collect())
            .collect()
    };
    let first = to_probs(flag_counts(a, plan, 0, plan.horizon, k, &observe)?);
    let second = to_probs(flag_counts(b, plan, 1, plan.horizon, k, &observe)?);
    let mut distance = Vec::with_capacity(first.len());
    let mut ci = Vec::with_capacity(first.len());
    for (p, q) in first.iter().zip(&second) {
        let (d, j) = p
            .iter()
            .zip(q)
            .enumerate()
            .map(|(j, (a, b))| ((a - b).abs(), j))
            .fold((0.0, 0), |m, v| if v.0 > m.0 { v } else { m });
        distance.push(d);
        let var = (p[j] * (1.0 - p[j]) + q[j] * (1.0 - q[j])) / r;
        ci.push(z * var.sqrt());
    }
    Ok(ProbeSeries {
        labels,
        distance,
        ci,
        first,
        second,
    })
}

pub fn weak_convergence_probe(
    dynamics: &Dynamics,
    init_a: &Initial,
    init_b: &Initial,
    cylinders: &[Cylinder],
    plan: &ReplicaPlan,
    z: f64,
) -> Result<ProbeSeries> {
    let a = SingleProcess::new(dynamics.clone(), init_a.clone())?;
    let b = SingleProcess::new(dynamics.clone(), init_b.clone())?;
    if init_a.lattice() != init_b.lattice() {
        return Err(domain("the two initial laws live on different lattices"));
    }
    let resolved = cylinders
        .iter()
        .map(|c| c.resolve(init_a.lattice()))
        .collect::<Result<Vec<_>>>()?;
    weak_convergence_probe_with(
        &a,
        &b,
        cylinders.iter().map(cylinder_label).collect(),
        |x: &mut Configuration| Ok(resolved.iter().map(|c| c.contains(x)).collect()),
        plan,
        z,
    )
}

/// Times `t < horizon` at which the two doubling orbits agree on their
/// first `bits` binary digits, i.e. are within `2^-bits` in the prefix
/// metric.
pub fn doubling_close_times(
    a: &mut BitStream,
    b: &mut BitStream,
    bits: usize,
    horizon: usize,
) -> Vec<usize> {
    let mut hits = Vec::new();
    for t in 0..horizon {
        if prefix_agreement(a, b, bits) == bits {
            hits.push(t);
        }
        a.advance();
        b.advance();
    }
    hits
}
