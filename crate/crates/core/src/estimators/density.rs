use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rand::Rng;

use crate::error::{domain, Result};
use crate::lattice::{density_full, density_in_ball, Configuration, Density};
use crate::systems::Dynamics;

/// Exact particle densities along one trajectory.
#[derive(Clone, Debug, PartialEq)]
pub struct DensitySeries {
    pub radii: Vec<usize>,
    /// `by_radius[k][t]` is the density of `x^t` in the ball of radius
    /// `radii[k]`.
    pub by_radius: Vec<Vec<Density>>,
    /// Density over every site of the lattice.
    pub full: Vec<Density>,
}

impl DensitySeries {
    /// Largest `|rho(x^{t+1}) - rho(x^t)|` for window `k`.
    pub fn max_step_change(&self, k: usize) -> Density {
        self.by_radius[k]
            .windows(2)
            .map(|w| {
                let d = w[1] - w[0];
                if d < Density::zero() {
                    -d
                } else {
                    d
                }
            })
            .max()
            .unwrap_or_else(Density::zero)
    }
}

pub fn density_series<R: Rng + ?Sized>(
    dynamics: &Dynamics,
    x0: &Configuration,
    radii: &[usize],
    horizon: usize,
    rng: &mut R,
) -> Result<DensitySeries> {
    dynamics.check_compatible(x0.lattice(), x0.alphabet())?;
    for &n in radii {
        x0.lattice().ball(n)?;
    }
    let mut out = DensitySeries {
        radii: radii.to_vec(),
        by_radius: vec![Vec::with_capacity(horizon + 1); radii.len()],
        full: Vec::with_capacity(horizon + 1),
    };
    let mut x = x0.clone();
    for t in 0..=horizon {
        if t > 0 {
            x = dynamics.advance(&x, rng)?;
        }
        for (k, &n) in radii.iter().enumerate() {
            out.by_radius[k].push(density_in_ball(&x, n)?);
        }
        out.full.push(density_full(&x));
    }
    Ok(out)
}

/// `2|A| max(1 - (1 - 2V/(2n+1))^d, (1 + 2V/(2n+1))^d - 1)`, the largest
/// one-step change of the density in the window of radius `n` for a rule
/// moving particles at most `v` sites.
pub fn drift_bound_exact(n: usize, v: u32, d: usize, alphabet: u16) -> Result<BigRational> {
    if n <= v as usize {
        return Err(domain(format!(
            "window radius {n} must exceed the velocity bound {v}"
        )));
    }
    if d == 0 {
        return Err(domain("dimension must be at least 1"));
    }
    let q = BigRational::new(BigInt::from(2 * v as u64), BigInt::from(2 * n as u64 + 1));
    let one = BigRational::one();
    let pow = |b: BigRational| (0..d).fold(BigRational::one(), |acc, _| acc * b.clone());
    let shrink = one.clone() - pow(one.clone() - q.clone());
    let grow = pow(one.clone() + q) - one;
    let m = if shrink > grow { shrink } else { grow };
    Ok(m * BigRational::from_integer(BigInt::from(2 * alphabet as u64)))
}

pub fn drift_bound(n: usize, v: u32, d: usize, alphabet: u16) -> Result<f64> {
    Ok(drift_bound_exact(n, v, d, alphabet)?
        .to_f64()
        .unwrap_or(f64::NAN))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{Alphabet, Boundary, Lattice};
    use crate::systems::{dynamics_by_name, Dynamics};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::collections::BTreeMap;
    use std::sync::Arc;

    #[test]
    fn bound_examples() {
        assert_eq!(
            drift_bound_exact(10, 1, 1, 2).unwrap(),
            BigRational::new(8.into(), 21.into())
        );
        assert_eq!(drift_bound(5, 0, 2, 2).unwrap(), 0.0);
        assert!(drift_bound(1, 1, 1, 2).is_err());
        let mut prev = f64::INFINITY;
        for n in 2..=1000 {
            let b = drift_bound(n, 1, 2, 3).unwrap();
            assert!(b < prev);
            prev = b;
        }
    }

    #[test]
    fn conservative_series_are_constant_and_zeros_stay_zero() {
        let lat = Arc::new(Lattice::new(1, 64, Boundary::Torus).unwrap());
        let dyns = dynamics_by_name("tasep", &BTreeMap::new()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = super::super::bernoulli(lat.clone(), Alphabet::binary(), 0.5, &mut rng).unwrap();
        let s = density_series(&dyns, &x, &[4, 16], 200, &mut rng).unwrap();
        assert!(s.full.iter().all(|d| *d == s.full[0]));
        for k in 0..2 {
            assert!(
                BigRational::new(
                    (*s.max_step_change(k).numer()).into(),
                    (*s.max_step_change(k).denom()).into()
                ) <= drift_bound_exact(s.radii[k], 1, 1, 2).unwrap()
            );
        }
        let z = Configuration::zeros(lat, Alphabet::binary());
        let s = density_series(&dyns, &z, &[4], 10, &mut rng).unwrap();
        assert!(s.by_radius[0].iter().all(|d| d.is_zero()));
        assert!(density_series(&dyns, &x, &[40], 1, &mut rng).is_err());
        assert!(density_series(&Dynamics::ShiftAnnihilation, &x, &[4], 1, &mut rng).is_err());
    }
}
