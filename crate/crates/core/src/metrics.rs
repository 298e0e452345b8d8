//! Distances between configurations.
//!
//! The cylinder metric looks at the agreement radius around the origin; the
//! discrepancy density counts disagreeing sites in a ball and is blind to
//! where they sit. Both are evaluated at a fixed finite radius.

use num_rational::Ratio;
use serde::Serialize;

use crate::error::{domain, Error, Result};
use crate::lattice::{Boundary, Configuration, Cylinder, Density, Lattice, Point};
use crate::systems::BitStream;

/// Agreement radius around the origin.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum Kappa {
    Finite(u32),
    /// The configurations agree on every site.
    Infinite,
}

impl Kappa {
    pub fn metric(self) -> f64 {
        match self {
            Kappa::Finite(k) => (-(k as f64)).exp2(),
            Kappa::Infinite => 0.0,
        }
    }
}

/// Largest `m` with `x = y` on the ball `I_m`. Returns `Finite(0)` when
/// no positive radius of agreement exists, including a disagreement at the
/// origin itself.
pub fn kappa(x: &Configuration, y: &Configuration) -> Result<Kappa> {
    x.same_space(y)?;
    let lat = x.lattice();
    let nearest = x
        .values()
        .iter()
        .zip(y.values())
        .enumerate()
        .filter(|(_, (a, b))| a != b)
        .map(|(i, _)| lat.site_norm(i))
        .min();
    Ok(match nearest {
        None => Kappa::Infinite,
        Some(r) => Kappa::Finite(r.saturating_sub(1)),
    })
}

/// `2^-kappa(x, y)`, and 0 for identical configurations. An ultrametric.
pub fn cylinder_metric(x: &Configuration, y: &Configuration) -> Result<f64> {
    Ok(kappa(x, y)?.metric())
}

/// Disagreeing sites inside `I_m`, in index order.
pub fn discrepancy_set(x: &Configuration, y: &Configuration, m: usize) -> Result<Vec<usize>> {
    x.same_space(y)?;
    let ball = x.lattice().ball(m)?;
    Ok(ball.into_iter().filter(|&i| x.get(i) != y.get(i)).collect())
}

/// `|D_m(x, y)| / |I_m|`.
pub fn discrepancy_density(x: &Configuration, y: &Configuration, m: usize) -> Result<Density> {
    x.same_space(y)?;
    let ball = x.lattice().ball(m)?;
    let bad = ball.iter().filter(|&&i| x.get(i) != y.get(i)).count();
    Ok(Ratio::new(bad as i64, ball.len() as i64))
}

/// Minimum of `discrepancy_density(x, shift(y, l), m)` over `|l| <= bound`.
/// Ties resolve to the lexicographically smallest shift.
pub fn shifted_discrepancy_density(
    x: &Configuration,
    y: &Configuration,
    bound: usize,
    m: usize,
) -> Result<(Density, Point)> {
    x.same_space(y)?;
    let scanner = ShiftScanner::new(x.lattice(), bound, m)?;
    let (bad, shift) = scanner.best(x, y);
    Ok((Ratio::new(bad as i64, scanner.ball_len() as i64), shift))
}

/// Precomputed index tables for repeated shifted-discrepancy scans on one
/// lattice.
#[derive(Clone, Debug)]
pub struct ShiftScanner {
    ball: Vec<usize>,
    offsets: Vec<Point>,
    // translated[k][j] = ball[j] + offsets[k]
    translated: Vec<Vec<usize>>,
}

impl ShiftScanner {
    pub fn new(lattice: &Lattice, bound: usize, m: usize) -> Result<Self> {
        if lattice.boundary() != Boundary::Torus {
            return Err(Error::Unsupported(
                "shifted discrepancy density on an open-boundary lattice".into(),
            ));
        }
        if 2 * bound >= lattice.side() {
            return Err(domain(format!(
                "shift bound {bound} must be below half the side {}",
                lattice.side()
            )));
        }
        let ball = lattice.ball(m)?;
        let offsets = lattice.offsets_within(bound);
        let translated = offsets
            .iter()
            .map(|l| {
                ball.iter()
                    .map(|&i| lattice.translate(i, l).expect("torus translation is total"))
                    .collect()
            })
            .collect();
        Ok(ShiftScanner {
            ball,
            offsets,
            translated,
        })
    }

    pub fn ball_len(&self) -> usize {
        self.ball.len()
    }

    /// Disagreement count between `x` and `shift(y, l)` on the ball.
    fn count(&self, k: usize, x: &Configuration, y: &Configuration) -> usize {
        let (xv, yv) = (x.values(), y.values());
        self.ball
            .iter()
            .zip(&self.translated[k])
            .filter(|(&i, &j)| xv[i] != yv[j])
            .count()
    }

    /// Smallest disagreement count and its shift.
    pub fn best(&self, x: &Configuration, y: &Configuration) -> (usize, Point) {
        let mut best = (usize::MAX, 0);
        for k in 0..self.offsets.len() {
            let c = self.count(k, x, y);
            if c < best.0 {
                best = (c, k);
            }
        }
        (best.0, self.offsets[best.1].clone())
    }

    pub fn best_density(&self, x: &Configuration, y: &Configuration) -> (f64, Point) {
        let (c, l) = self.best(x, y);
        (c as f64 / self.ball.len() as f64, l)
    }
}

/// Average of the cylinder indicator over all shifts `|l| <= m`, i.e.
/// `|J_m(x)| / (2m + 1)^d`.
pub fn psi_n(x: &Configuration, c: &Cylinder, m: usize) -> Result<Density> {
    let lat = x.lattice();
    if lat.boundary() != Boundary::Torus {
        return Err(Error::Unsupported(
            "spatial averages on an open-boundary lattice".into(),
        ));
    }
    lat.check_radius(m)?;
    let resolved = c.resolve(lat)?;
    let offsets = lat.offsets_within(m);
    let hits = offsets
        .iter()
        .filter(|l| resolved.contains_shifted(x, l))
        .count();
    Ok(Ratio::new(hits as i64, offsets.len() as i64))
}

/// Right-hand side of the pathwise Lipschitz estimate
/// `|psi_m(x) - psi_m(y)| <= |I| (2m+1)^-d |D_{m+r}(x, y)|`, where `r` is the
/// radius of the cylinder base. One site lies in at most `|I|` shifted copies
/// of the base, which gives the constant.
pub fn psi_lipschitz_bound(
    x: &Configuration,
    y: &Configuration,
    c: &Cylinder,
    m: usize,
) -> Result<Density> {
    let r = c.radius() as usize;
    let d = discrepancy_set(x, y, m + r)?.len() as i64;
    let dim = x.lattice().dim() as u32;
    Ok(Ratio::new(c.len() as i64 * d, (2 * m as i64 + 1).pow(dim)))
}

/// Number of leading bits on which two streams agree, capped at `cap`.
pub fn prefix_agreement(a: &mut BitStream, b: &mut BitStream, cap: usize) -> usize {
    (0..cap).take_while(|&k| a.bit(k) == b.bit(k)).count()
}

/// Cylinder metric on one-sided bit streams: `2^-k` for `k` agreeing leading
/// bits, looking at no more than `cap` bits.
pub fn prefix_metric(a: &mut BitStream, b: &mut BitStream, cap: usize) -> f64 {
    let k = prefix_agreement(a, b, cap);
    if k == cap {
        0.0
    } else {
        (-(k as f64)).exp2()
    }
}
