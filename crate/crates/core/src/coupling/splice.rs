use crate::error::{Error, Result};
use crate::lattice::Configuration;
use crate::metrics::{cylinder_metric, discrepancy_density, shifted_discrepancy_density};

/// Follows `traj_y` up to and including `tau`, and `traj_x` afterwards.
///
/// Both trajectories must agree at `tau` when `tau` lies within them. A `tau`
/// at or beyond the common length returns `traj_y` unchanged.
pub fn rosenthal_splice<T: Clone + PartialEq>(
    traj_x: &[T],
    traj_y: &[T],
    tau: usize,
) -> Result<Vec<T>> {
    if traj_x.len() != traj_y.len() {
        return Err(Error::Precondition(format!(
            "trajectories have lengths {} and {}",
            traj_x.len(),
            traj_y.len()
        )));
    }
    if tau >= traj_y.len() {
        return Ok(traj_y.to_vec());
    }
    if traj_x[tau] != traj_y[tau] {
        return Err(Error::Precondition(format!(
            "trajectories differ at the splice time {tau}"
        )));
    }
    Ok(traj_y[..=tau]
        .iter()
        .chain(&traj_x[tau + 1..])
        .cloned()
        .collect())
}

/// Finite-horizon quasi intersection time: the smallest `tau` such that
/// `distances[t] <= eps` for every observed `t >= tau`. `None` when the last
/// observation already exceeds `eps`.
pub fn tau_epsilon(distances: &[f64], eps: f64) -> Option<usize> {
    match distances.iter().rposition(|&d| d > eps) {
        None => Some(0),
        Some(t) if t + 1 < distances.len() => Some(t + 1),
        Some(_) => None,
    }
}

/// Distance used to compare two configuration trajectories.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PathMetric {
    Cylinder,
    Discrepancy { radius: usize },
    ShiftedDiscrepancy { bound: usize, radius: usize },
}

impl PathMetric {
    pub fn distance(self, x: &Configuration, y: &Configuration) -> Result<f64> {
        use num_traits::ToPrimitive;
        Ok(match self {
            PathMetric::Cylinder => cylinder_metric(x, y)?,
            PathMetric::Discrepancy { radius } => discrepancy_density(x, y, radius)?
                .to_f64()
                .unwrap_or(f64::NAN),
            PathMetric::ShiftedDiscrepancy { bound, radius } => {
                shifted_discrepancy_density(x, y, bound, radius)?
                    .0
                    .to_f64()
                    .unwrap_or(f64::NAN)
            }
        })
    }
}

/// [`tau_epsilon`] for paired configuration trajectories.
pub fn tau_epsilon_paths(
    xs: &[Configuration],
    ys: &[Configuration],
    eps: f64,
    metric: PathMetric,
) -> Result<Option<usize>> {
    if xs.len() != ys.len() {
        return Err(Error::Precondition("trajectories differ in length".into()));
    }
    let d = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| metric.distance(x, y))
        .collect::<Result<Vec<_>>>()?;
    Ok(tau_epsilon(&d, eps))
}
