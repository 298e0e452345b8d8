//! Finite lattices, configurations over them, cylinders and particle
//! densities.
//!
//! Sites carry centered integer coordinates. A lattice of side `s` uses the
//! coordinate range `-(s/2) ..= s - 1 - s/2` on every axis, so an odd side
//! `2n + 1` gives the symmetric range `-n..=n`. Flat site indices are
//! row-major over these coordinates (the first axis varies slowest).

use std::fmt;
use std::sync::Arc;

use num_rational::Ratio;
use num_traits::Signed;
use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use crate::error::{domain, Error, Result};

/// A lattice vector or site coordinate.
pub type Point = SmallVec<[i64; 4]>;

/// Exact particle density.
pub type Density = Ratio<i64>;

const DIGITS: &[u8; 36] = b"0123456789abcdefghijklmnopqrstuvwxyz";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    /// Periodic in every axis.
    Torus,
    /// A window cut out of the infinite lattice; nothing outside exists.
    Open,
}

impl fmt::Display for Boundary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Boundary::Torus => f.write_str("torus"),
            Boundary::Open => f.write_str("open"),
        }
    }
}

/// Site values are `0..size`, read as particle counts.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u16", into = "u16")]
pub struct Alphabet(u16);

impl Alphabet {
    pub fn new(size: u16) -> Result<Self> {
        if !(2..=256).contains(&size) {
            return Err(domain(format!(
                "alphabet size must be in 2..=256, got {size}"
            )));
        }
        Ok(Alphabet(size))
    }

    pub const fn binary() -> Self {
        Alphabet(2)
    }

    pub fn size(self) -> u16 {
        self.0
    }

    /// Largest site value, i.e. the maximal number of particles on one site.
    pub fn max_value(self) -> u8 {
        (self.0 - 1) as u8
    }
}

impl TryFrom<u16> for Alphabet {
    type Error = Error;
    fn try_from(v: u16) -> Result<Self> {
        Alphabet::new(v)
    }
}

impl From<Alphabet> for u16 {
    fn from(a: Alphabet) -> u16 {
        a.0
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Lattice {
    dim: usize,
    side: usize,
    boundary: Boundary,
    sites: usize,
    // Sup-norm distance of each site to the origin.
    norms: Vec<u32>,
}

impl Lattice {
    pub fn new(dim: usize, side: usize, boundary: Boundary) -> Result<Self> {
        if dim == 0 {
            return Err(domain("lattice dimension must be at least 1"));
        }
        if side == 0 {
            return Err(domain("lattice side must be at least 1"));
        }
        let sites = u32::try_from(side)
            .ok()
            .and_then(|s| s.checked_pow(dim as u32))
            .filter(|&n| n <= 1 << 28)
            .ok_or_else(|| domain(format!("lattice {side}^{dim} is too large")))?
            as usize;
        let mut lattice = Lattice {
            dim,
            side,
            boundary,
            sites,
            norms: Vec::new(),
        };
        lattice.norms = (0..sites)
            .map(|i| {
                let mut n = 0;
                lattice.for_each_coord(i, |_, c| n = n.max(c.unsigned_abs()));
                n as u32
            })
            .collect();
        Ok(lattice)
    }

    /// The lattice `{|l| <= radius}` of side `2 * radius + 1`.
    pub fn centered(dim: usize, radius: usize, boundary: Boundary) -> Result<Self> {
        Self::new(dim, 2 * radius + 1, boundary)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    pub fn site_count(&self) -> usize {
        self.sites
    }

    /// Smallest coordinate on each axis.
    pub fn low(&self) -> i64 {
        -((self.side / 2) as i64)
    }

    /// Largest coordinate on each axis.
    pub fn high(&self) -> i64 {
        self.low() + self.side as i64 - 1
    }

    /// Largest `m` such that the ball `I_m` lies inside the lattice.
    pub fn max_radius(&self) -> usize {
        (self.side - 1) / 2
    }

    fn for_each_coord(&self, idx: usize, mut f: impl FnMut(usize, i64)) {
        let mut rest = idx;
        let mut digits: SmallVec<[i64; 4]> = SmallVec::from_elem(0, self.dim);
        for axis in (0..self.dim).rev() {
            digits[axis] = (rest % self.side) as i64 + self.low();
            rest /= self.side;
        }
        for (axis, c) in digits.into_iter().enumerate() {
            f(axis, c);
        }
    }

    pub fn coords(&self, idx: usize) -> Point {
        let mut p = Point::from_elem(0, self.dim);
        self.for_each_coord(idx, |a, c| p[a] = c);
        p
    }

    /// Index of a site given by coordinates in the canonical range.
    /// Coordinates outside the range are rejected on both boundaries.
    pub fn index_of(&self, coords: &[i64]) -> Option<usize> {
        if coords.len() != self.dim {
            return None;
        }
        let (lo, hi) = (self.low(), self.high());
        let mut idx = 0usize;
        for &c in coords {
            if c < lo || c > hi {
                return None;
            }
            idx = idx * self.side + (c - lo) as usize;
        }
        Some(idx)
    }

    /// Resolves arbitrary coordinates to a site: wrapped on a torus, `None`
    /// outside an open window.
    pub fn locate(&self, coords: &[i64]) -> Option<usize> {
        match self.boundary {
            Boundary::Open => self.index_of(coords),
            Boundary::Torus => {
                if coords.len() != self.dim {
                    return None;
                }
                let s = self.side as i64;
                let lo = self.low();
                Some(coords.iter().fold(0usize, |idx, &c| {
                    idx * self.side + (c - lo).rem_euclid(s) as usize
                }))
            }
        }
    }

    /// The site `idx + offset`, or `None` when it falls off an open window.
    pub fn translate(&self, idx: usize, offset: &[i64]) -> Option<usize> {
        debug_assert_eq!(offset.len(), self.dim);
        let s = self.side as i64;
        let mut out = 0usize;
        let mut stride = self.sites;
        let mut rest = idx;
        for &d in offset {
            stride /= self.side;
            let digit = (rest / stride) as i64;
            rest %= stride;
            let moved = digit + d;
            let wrapped = match self.boundary {
                Boundary::Torus => moved.rem_euclid(s),
                Boundary::Open if (0..s).contains(&moved) => moved,
                Boundary::Open => return None,
            };
            out = out * self.side + wrapped as usize;
        }
        Some(out)
    }

    /// Sup-norm distance of a site to the origin.
    pub fn site_norm(&self, idx: usize) -> u32 {
        self.norms[idx]
    }

    /// Sup-norm distance between two sites, measured around the torus when
    /// the lattice is periodic.
    pub fn distance(&self, a: usize, b: usize) -> u64 {
        let (mut ra, mut rb) = (a, b);
        let mut best = 0u64;
        for _ in 0..self.dim {
            let da = (ra % self.side) as i64;
            let db = (rb % self.side) as i64;
            ra /= self.side;
            rb /= self.side;
            let diff = (da - db).unsigned_abs();
            let diff = match self.boundary {
                Boundary::Torus => diff.min(self.side as u64 - diff),
                Boundary::Open => diff,
            };
            best = best.max(diff);
        }
        best
    }

    /// Sites of the ball `I_m = {|l| <= m}` in index order.
    pub fn ball(&self, m: usize) -> Result<Vec<usize>> {
        self.check_radius(m)?;
        Ok((0..self.sites)
            .filter(|&i| self.norms[i] as usize <= m)
            .collect())
    }

    pub(crate) fn check_radius(&self, m: usize) -> Result<()> {
        if m > self.max_radius() {
            return Err(domain(format!(
                "radius {m} exceeds the largest ball radius {} of this lattice",
                self.max_radius()
            )));
        }
        Ok(())
    }

    /// All offsets with `|l| <= bound`, in lexicographic order.
    pub fn offsets_within(&self, bound: usize) -> Vec<Point> {
        let b = bound as i64;
        let width = (2 * bound + 1) as u64;
        let count = width.pow(self.dim as u32);
        (0..count)
            .map(|mut k| {
                let mut p = Point::from_elem(0, self.dim);
                for axis in (0..self.dim).rev() {
                    p[axis] = (k % width) as i64 - b;
                    k /= width;
                }
                p
            })
            .collect()
    }

    /// Offsets with `|l| == k` exactly, in lexicographic order.
    pub fn shell(&self, k: usize) -> Vec<Point> {
        self.offsets_within(k)
            .into_iter()
            .filter(|p| sup_norm(p) as usize == k)
            .collect()
    }
}

pub fn sup_norm(v: &[i64]) -> u64 {
    v.iter().map(|c| c.unsigned_abs()).max().unwrap_or(0)
}

/// An alphabet-valued field over a lattice.
#[derive(Clone, Debug)]
pub struct Configuration {
    lattice: Arc<Lattice>,
    alphabet: Alphabet,
    values: Vec<u8>,
}

impl PartialEq for Configuration {
    fn eq(&self, other: &Self) -> bool {
        (Arc::ptr_eq(&self.lattice, &other.lattice) || self.lattice == other.lattice)
            && self.alphabet == other.alphabet
            && self.values == other.values
    }
}

impl Eq for Configuration {}

impl Configuration {
    pub fn new(lattice: Arc<Lattice>, alphabet: Alphabet, values: Vec<u8>) -> Result<Self> {
        if values.len() != lattice.site_count() {
            return Err(domain(format!(
                "configuration has {} values for {} sites",
                values.len(),
                lattice.site_count()
            )));
        }
        if let Some((i, v)) = values
            .iter()
            .enumerate()
            .find(|(_, &v)| v > alphabet.max_value())
        {
            return Err(domain(format!(
                "value {v} at site {i} is outside an alphabet of size {}",
                alphabet.size()
            )));
        }
        Ok(Configuration {
            lattice,
            alphabet,
            values,
        })
    }

    pub fn filled(lattice: Arc<Lattice>, alphabet: Alphabet, value: u8) -> Result<Self> {
        let n = lattice.site_count();
        Self::new(lattice, alphabet, vec![value; n])
    }

    pub fn zeros(lattice: Arc<Lattice>, alphabet: Alphabet) -> Self {
        let n = lattice.site_count();
        Configuration {
            lattice,
            alphabet,
            values: vec![0; n],
        }
    }

    /// Builds a configuration from a function of site coordinates.
    pub fn from_fn(
        lattice: Arc<Lattice>,
        alphabet: Alphabet,
        mut f: impl FnMut(&[i64]) -> u8,
    ) -> Result<Self> {
        let values = (0..lattice.site_count())
            .map(|i| f(&lattice.coords(i)))
            .collect();
        Self::new(lattice, alphabet, values)
    }

    /// Parses the one-line text form: one digit (`0-9`, then `a-z`) per site
    /// in index order.
    pub fn from_line(lattice: Arc<Lattice>, alphabet: Alphabet, line: &str) -> Result<Self> {
        let values = line
            .trim()
            .chars()
            .map(|ch| {
                ch.to_digit(36)
                    .map(|d| d as u8)
                    .ok_or_else(|| domain(format!("invalid site digit {ch:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(lattice, alphabet, values)
    }

    pub fn to_line(&self) -> String {
        self.values
            .iter()
            .map(|&v| DIGITS[v as usize] as char)
            .collect()
    }

    pub fn lattice(&self) -> &Arc<Lattice> {
        &self.lattice
    }

    pub fn alphabet(&self) -> Alphabet {
        self.alphabet
    }

    pub fn values(&self) -> &[u8] {
        &self.values
    }

    pub fn get(&self, idx: usize) -> u8 {
        self.values[idx]
    }

    /// Value at canonical coordinates.
    pub fn at(&self, coords: &[i64]) -> Result<u8> {
        self.lattice
            .index_of(coords)
            .map(|i| self.values[i])
            .ok_or_else(|| domain(format!("site {coords:?} is outside the lattice")))
    }

    pub(crate) fn values_mut(&mut self) -> &mut [u8] {
        &mut self.values
    }

    pub fn particle_count(&self) -> u64 {
        self.values.iter().map(|&v| v as u64).sum()
    }

    pub(crate) fn same_space(&self, other: &Configuration) -> Result<()> {
        if !(Arc::ptr_eq(&self.lattice, &other.lattice) || self.lattice == other.lattice) {
            return Err(domain("configurations live on different lattices"));
        }
        if self.alphabet != other.alphabet {
            return Err(domain("configurations use different alphabets"));
        }
        Ok(())
    }
}

impl fmt::Display for Configuration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_line())
    }
}

/// `(shift(x, l))_i = x_{i + l}` on a torus.
pub fn shift(x: &Configuration, offset: &[i64]) -> Result<Configuration> {
    let lat = x.lattice();
    if lat.boundary() != Boundary::Torus {
        return Err(Error::Unsupported(
            "shift on an open-boundary lattice".into(),
        ));
    }
    if offset.len() != lat.dim() {
        return Err(domain(format!(
            "shift vector has {} components on a {}-dimensional lattice",
            offset.len(),
            lat.dim()
        )));
    }
    let values = (0..lat.site_count())
        .map(|i| {
            x.values[lat
                .translate(i, offset)
                .expect("torus translation is total")]
        })
        .collect();
    Ok(Configuration {
        lattice: Arc::clone(lat),
        alphabet: x.alphabet,
        values,
    })
}

/// The set of configurations with prescribed values on a finite base.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cylinder {
    base: Vec<(Vec<i64>, u8)>,
}

impl Cylinder {
    pub fn new(base: Vec<(Vec<i64>, u8)>) -> Result<Self> {
        if base.is_empty() {
            return Err(domain("cylinder base is empty"));
        }
        let dim = base[0].0.len();
        for (i, (site, _)) in base.iter().enumerate() {
            if site.len() != dim {
                return Err(domain("cylinder base sites have mixed dimensions"));
            }
            if base[..i].iter().any(|(s, _)| s == site) {
                return Err(domain(format!("cylinder base lists site {site:?} twice")));
            }
        }
        Ok(Cylinder { base })
    }

    /// The one-site cylinder `{x_0 = value}` in dimension `dim`.
    pub fn at_origin(dim: usize, value: u8) -> Self {
        Cylinder {
            base: vec![(vec![0; dim], value)],
        }
    }

    pub fn base(&self) -> &[(Vec<i64>, u8)] {
        &self.base
    }

    pub fn len(&self) -> usize {
        self.base.len()
    }

    pub fn is_empty(&self) -> bool {
        self.base.is_empty()
    }

    /// Sup-norm radius of the base.
    pub fn radius(&self) -> u64 {
        self.base
            .iter()
            .map(|(s, _)| sup_norm(s))
            .max()
            .unwrap_or(0)
    }

    /// The cylinder with its base moved by `offset`, so that
    /// `indicator(shift(x, l), c) == indicator(x, c.shifted(l))`. Sites are
    /// wrapped into canonical coordinates of `lattice` on a torus.
    pub fn shifted(&self, offset: &[i64], lattice: &Lattice) -> Result<Cylinder> {
        let base = self
            .base
            .iter()
            .map(|(site, v)| {
                let moved: Point = site.iter().zip(offset).map(|(a, b)| a + b).collect();
                let idx = lattice
                    .locate(&moved)
                    .ok_or_else(|| domain(format!("shifted site {moved:?} leaves the window")))?;
                Ok((lattice.coords(idx).to_vec(), *v))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Cylinder { base })
    }

    /// Resolves the base against a lattice for repeated evaluation.
    pub fn resolve(&self, lattice: &Lattice) -> Result<ResolvedCylinder> {
        let sites =
            self.base
                .iter()
                .map(|(site, v)| {
                    lattice.index_of(site).map(|i| (i, *v)).ok_or_else(|| {
                        domain(format!("cylinder site {site:?} is outside the lattice"))
                    })
                })
                .collect::<Result<Vec<_>>>()?;
        Ok(ResolvedCylinder {
            coords: self
                .base
                .iter()
                .map(|(s, _)| s.iter().copied().collect())
                .collect(),
            sites,
        })
    }
}

/// A cylinder bound to the site indices of one lattice.
#[derive(Clone, Debug)]
pub struct ResolvedCylinder {
    coords: Vec<Point>,
    sites: Vec<(usize, u8)>,
}

impl ResolvedCylinder {
    pub fn contains(&self, x: &Configuration) -> bool {
        self.sites.iter().all(|&(i, v)| x.values[i] == v)
    }

    /// Evaluates the indicator at `shift(x, offset)` without building the
    /// shifted configuration. Torus only.
    pub(crate) fn contains_shifted(&self, x: &Configuration, offset: &[i64]) -> bool {
        let lat = x.lattice();
        self.coords.iter().zip(&self.sites).all(|(c, &(_, v))| {
            let moved: Point = c.iter().zip(offset).map(|(a, b)| a + b).collect();
            lat.locate(&moved)
                .map(|i| x.values[i] == v)
                .unwrap_or(false)
        })
    }
}

pub fn cylinder_indicator(x: &Configuration, c: &Cylinder) -> Result<bool> {
    Ok(c.resolve(x.lattice())?.contains(x))
}

/// Particles in `sites` divided by the number of sites.
pub fn density(x: &Configuration, sites: &[usize]) -> Result<Density> {
    if sites.is_empty() {
        return Err(domain("density over an empty site set"));
    }
    let n = x.lattice.site_count();
    let mut total: i64 = 0;
    for &i in sites {
        if i >= n {
            return Err(domain(format!("site index {i} is outside the lattice")));
        }
        total += x.values[i] as i64;
    }
    Ok(Ratio::new(total, sites.len() as i64))
}

/// Density on the ball `I_m`.
pub fn density_in_ball(x: &Configuration, m: usize) -> Result<Density> {
    density(x, &x.lattice.ball(m)?)
}

/// Density over the whole lattice.
pub fn density_full(x: &Configuration) -> Density {
    Ratio::new(x.particle_count() as i64, x.lattice.site_count() as i64)
}

/// Configurations whose full density lies within `tolerance` of `target`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DensitySector {
    pub target: Density,
    pub tolerance: Density,
}

impl DensitySector {
    pub fn new(target: Density, tolerance: Density, alphabet: Alphabet) -> Result<Self> {
        let top = Ratio::from_integer(alphabet.max_value() as i64);
        if target < Ratio::from_integer(0) || target > top {
            return Err(domain(format!(
                "target density {target} outside [0, {top}]"
            )));
        }
        if tolerance < Ratio::from_integer(0) {
            return Err(domain("negative density tolerance"));
        }
        Ok(DensitySector { target, tolerance })
    }

    pub fn contains(&self, x: &Configuration) -> bool {
        let d = density_full(x) - self.target;
        d.abs() <= self.tolerance
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn line1(radius: usize) -> Arc<Lattice> {
        Arc::new(Lattice::centered(1, radius, Boundary::Torus).unwrap())
    }

    #[test]
    fn coordinates_round_trip_and_norms() {
        let lat = Lattice::centered(2, 2, Boundary::Torus).unwrap();
        assert_eq!(lat.site_count(), 25);
        for i in 0..25 {
            let c = lat.coords(i);
            assert_eq!(lat.index_of(&c), Some(i));
            assert_eq!(lat.site_norm(i) as u64, sup_norm(&c));
        }
        assert_eq!(lat.coords(0).as_slice(), &[-2, -2]);
        assert_eq!(lat.coords(1).as_slice(), &[-2, -1]);
    }

    #[test]
    fn even_side_uses_half_open_range() {
        let lat = Lattice::new(1, 256, Boundary::Torus).unwrap();
        assert_eq!(lat.low(), -128);
        assert_eq!(lat.high(), 127);
        assert_eq!(lat.max_radius(), 127);
        assert_eq!(lat.ball(127).unwrap().len(), 255);
        assert!(lat.ball(128).is_err());
        assert_eq!(lat.distance(0, 255), 1);
    }

    #[test]
    fn ball_sizes() {
        let lat = Lattice::centered(3, 3, Boundary::Open).unwrap();
        for m in 0..=3 {
            assert_eq!(lat.ball(m).unwrap().len(), (2 * m + 1).pow(3));
        }
    }

    #[test]
    fn shift_by_zero_is_identity() {
        let lat = line1(3);
        let x = Configuration::from_line(lat, Alphabet::binary(), "0110100").unwrap();
        assert_eq!(shift(&x, &[0]).unwrap(), x);
    }

    #[test]
    fn shift_moves_values_left() {
        // sites -2..=2, x_{-1} = 1; (shift x)_i = x_{i+1}
        let x = Configuration::from_line(line1(2), Alphabet::binary(), "01000").unwrap();
        assert_eq!(shift(&x, &[1]).unwrap().to_line(), "10000");
    }

    #[test]
    fn shift_rejects_open_window() {
        let lat = Arc::new(Lattice::centered(1, 2, Boundary::Open).unwrap());
        let x = Configuration::zeros(lat, Alphabet::binary());
        assert!(matches!(shift(&x, &[1]), Err(Error::Unsupported(_))));
    }

    #[test]
    fn shift_group_law_exhaustive() {
        let lat = Arc::new(Lattice::new(2, 3, Boundary::Torus).unwrap());
        let x =
            Configuration::from_line(lat.clone(), Alphabet::new(3).unwrap(), "012201120").unwrap();
        for a in lat.offsets_within(2) {
            for b in lat.offsets_within(2) {
                let sum: Vec<i64> = a.iter().zip(&b).map(|(p, q)| p + q).collect();
                let lhs = shift(&x, &sum).unwrap();
                let rhs = shift(&shift(&x, &a).unwrap(), &b).unwrap();
                assert_eq!(lhs, rhs);
            }
        }
    }

    #[test]
    fn cylinder_indicator_examples() {
        let lat = line1(2);
        let x = Configuration::from_line(lat.clone(), Alphabet::binary(), "00110").unwrap();
        let c = Cylinder::at_origin(1, 1);
        assert!(cylinder_indicator(&x, &c).unwrap());
        let c2 = Cylinder::new(vec![(vec![0], 1), (vec![1], 0)]).unwrap();
        assert!(!cylinder_indicator(&x, &c2).unwrap());
        let far = Cylinder::new(vec![(vec![3], 1)]).unwrap();
        assert!(matches!(
            cylinder_indicator(&x, &far),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn cylinder_rejects_empty_and_duplicate_bases() {
        assert!(Cylinder::new(vec![]).is_err());
        assert!(Cylinder::new(vec![(vec![0], 1), (vec![0], 0)]).is_err());
    }

    #[test]
    fn density_examples() {
        let lat = line1(2);
        let zeros = Configuration::zeros(lat.clone(), Alphabet::binary());
        assert_eq!(density_in_ball(&zeros, 1).unwrap(), Ratio::from_integer(0));
        let a = Alphabet::new(4).unwrap();
        let full = Configuration::filled(lat.clone(), a, 3).unwrap();
        assert_eq!(density_full(&full), Ratio::from_integer(3));
        let x = Configuration::from_line(lat.clone(), Alphabet::binary(), "10101").unwrap();
        assert_eq!(density_in_ball(&x, 2).unwrap(), Ratio::new(3, 5));
        assert_eq!(density_full(&x), Ratio::new(3, 5));
        assert!(density(&x, &[]).is_err());
    }

    #[test]
    fn density_sector_membership() {
        let lat = line1(2);
        let x = Configuration::from_line(lat, Alphabet::binary(), "10101").unwrap();
        let s =
            DensitySector::new(Ratio::new(1, 2), Ratio::new(1, 10), Alphabet::binary()).unwrap();
        assert!(s.contains(&x));
        let tight =
            DensitySector::new(Ratio::new(1, 2), Ratio::new(0, 1), Alphabet::binary()).unwrap();
        assert!(!tight.contains(&x));
    }

    #[test]
    fn line_round_trip_with_large_alphabet() {
        let lat = line1(2);
        let a = Alphabet::new(20).unwrap();
        let x = Configuration::from_line(lat.clone(), a, "0j9a1").unwrap();
        assert_eq!(x.values(), &[0, 19, 9, 10, 1]);
        assert_eq!(x.to_line(), "0j9a1");
        assert!(Configuration::from_line(lat, Alphabet::binary(), "01201").is_err());
    }

    fn arb_config() -> impl Strategy<Value = (Configuration, Vec<i64>)> {
        (
            1usize..4,
            proptest::collection::vec(0u8..3, 49),
            -10i64..10,
            -10i64..10,
        )
            .prop_map(|(side_half, vals, a, b)| {
                let side = 2 * side_half + 1;
                let lat = Arc::new(Lattice::new(2, side, Boundary::Torus).unwrap());
                let n = lat.site_count();
                let x =
                    Configuration::new(lat, Alphabet::new(3).unwrap(), vals[..n].to_vec()).unwrap();
                (x, vec![a, b])
            })
    }

    proptest! {
        #[test]
        fn density_is_shift_invariant((x, l) in arb_config()) {
            prop_assert_eq!(density_full(&shift(&x, &l).unwrap()), density_full(&x));
        }

        #[test]
        fn cylinder_indicator_is_shift_covariant((x, l) in arb_config(), v0 in 0u8..3, v1 in 0u8..3) {
            let c = Cylinder::new(vec![(vec![0, 0], v0), (vec![1, -1], v1)]).unwrap();
            let lhs = cylinder_indicator(&shift(&x, &l).unwrap(), &c).unwrap();
            let rhs = cylinder_indicator(&x, &c.shifted(&l, x.lattice()).unwrap()).unwrap();
            prop_assert_eq!(lhs, rhs);
        }
    }
}
