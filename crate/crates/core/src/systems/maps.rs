use std::collections::VecDeque;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::lattice::{Boundary, Configuration};

/// One step of the shift-annihilation map on a line window: the origin is
/// kept, sites `±1` are cleared, and every other site takes the value of its
/// neighbour one step closer to the origin. Values at the window edges are
/// lost.
pub fn shift_annihilation_step(x: &Configuration) -> Result<Configuration> {
    let lat = x.lattice();
    if lat.dim() != 1 {
        return Err(Error::Unsupported(
            "shift_annihilation is defined on a line only".into(),
        ));
    }
    if lat.boundary() != Boundary::Open {
        return Err(Error::Unsupported(
            "shift_annihilation needs an open window; a torus wraps the tails together".into(),
        ));
    }
    let old = x.values();
    let origin = (-lat.low()) as usize;
    let mut next = x.clone();
    for (idx, v) in next.values_mut().iter_mut().enumerate() {
        *v = match idx.cmp(&origin) {
            std::cmp::Ordering::Equal => old[origin],
            _ if idx.abs_diff(origin) == 1 => 0,
            std::cmp::Ordering::Greater => old[idx - 1],
            std::cmp::Ordering::Less => old[idx + 1],
        };
    }
    Ok(next)
}

/// `x -> x / 2`.
pub fn halving_step(x: f64) -> f64 {
    x / 2.0
}

/// Where the bits of a [`BitStream`] come from once its prefix runs out.
#[derive(Clone, Debug)]
pub enum BitSource {
    Zeros,
    Ones,
    /// Independent fair bits, i.e. a Lebesgue-random point of `[0, 1)`.
    Uniform(Box<ChaCha8Rng>),
}

/// The binary expansion of a point of `[0, 1)`, materialized on demand.
/// Under the doubling map `x -> 2x mod 1` the expansion shifts by one bit, so
/// orbits are exact for any number of steps.
#[derive(Clone, Debug)]
pub struct BitStream {
    bits: VecDeque<bool>,
    source: BitSource,
    pending: u64,
    pending_len: u32,
}

impl BitStream {
    pub fn new(prefix: &[bool], source: BitSource) -> Self {
        BitStream {
            bits: prefix.iter().copied().collect(),
            source,
            pending: 0,
            pending_len: 0,
        }
    }

    /// The point 0, fixed by the doubling map.
    pub fn zeros() -> Self {
        Self::new(&[], BitSource::Zeros)
    }

    pub fn ones() -> Self {
        Self::new(&[], BitSource::Ones)
    }

    pub fn uniform(seed: u64) -> Self {
        Self::from_rng(ChaCha8Rng::seed_from_u64(seed))
    }

    pub fn from_rng(rng: ChaCha8Rng) -> Self {
        Self::new(&[], BitSource::Uniform(Box::new(rng)))
    }

    fn next_source_bit(&mut self) -> bool {
        match &mut self.source {
            BitSource::Zeros => false,
            BitSource::Ones => true,
            BitSource::Uniform(rng) => {
                if self.pending_len == 0 {
                    self.pending = rng.next_u64();
                    self.pending_len = 64;
                }
                let b = self.pending & 1 == 1;
                self.pending >>= 1;
                self.pending_len -= 1;
                b
            }
        }
    }

    /// Bit `k` of the current point (0 is the leading bit).
    pub fn bit(&mut self, k: usize) -> bool {
        while self.bits.len() <= k {
            let b = self.next_source_bit();
            self.bits.push_back(b);
        }
        self.bits[k]
    }

    pub fn window(&mut self, start: usize, len: usize) -> Vec<bool> {
        (start..start + len).map(|k| self.bit(k)).collect()
    }

    /// Applies the doubling map in place.
    pub fn advance(&mut self) {
        if self.bits.pop_front().is_none() {
            self.next_source_bit();
        }
    }

    /// The point truncated to its first 53 bits.
    pub fn value(&mut self) -> f64 {
        (0..53).fold(0.0, |acc, k| {
            acc + if self.bit(k) {
                (-(k as f64) - 1.0).exp2()
            } else {
                0.0
            }
        })
    }
}

/// `2x mod 1` on the binary expansion: drops the leading bit.
pub fn doubling_step(mut b: BitStream) -> BitStream {
    b.advance();
    b
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{Alphabet, Lattice};
    use std::sync::Arc;

    fn window(radius: usize) -> Arc<Lattice> {
        Arc::new(Lattice::centered(1, radius, Boundary::Open).unwrap())
    }

    #[test]
    fn shift_annihilation_examples() {
        let lat = window(4);
        let zeros = Configuration::zeros(lat.clone(), Alphabet::binary());
        assert_eq!(shift_annihilation_step(&zeros).unwrap(), zeros);
        let ones = Configuration::filled(lat.clone(), Alphabet::binary(), 1).unwrap();
        assert_eq!(
            shift_annihilation_step(&ones).unwrap().to_line(),
            "111010111"
        );
        let x = Configuration::from_line(lat.clone(), Alphabet::binary(), "110011011").unwrap();
        assert_eq!(shift_annihilation_step(&x).unwrap().to_line(), "100010101");
    }

    #[test]
    fn shift_annihilation_drains_to_origin() {
        let lat = window(6);
        let x = Configuration::from_line(lat, Alphabet::binary(), "1101101110111").unwrap();
        let mut y = x.clone();
        for _ in 0..6 {
            y = shift_annihilation_step(&y).unwrap();
        }
        assert_eq!(y.to_line(), "0000001000000");
        assert_eq!(shift_annihilation_step(&y).unwrap(), y);
    }

    #[test]
    fn shift_annihilation_rejects_torus() {
        let lat = Arc::new(Lattice::centered(1, 3, Boundary::Torus).unwrap());
        let x = Configuration::zeros(lat, Alphabet::binary());
        assert!(matches!(
            shift_annihilation_step(&x),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn halving_examples() {
        assert_eq!(halving_step(0.0), 0.0);
        assert_eq!(halving_step(1.0), 0.5);
        let (mut x, mut y) = (0.5f64, -1.5f64);
        for t in 1..=60 {
            x = halving_step(x);
            y = halving_step(y);
            assert_eq!((x - y).abs(), 2.0 * (-(t as f64)).exp2());
        }
    }

    #[test]
    fn doubling_drops_leading_bit() {
        let s = BitStream::new(&[false], BitSource::Ones);
        let mut s = doubling_step(s);
        assert_eq!(s.window(0, 5), vec![true; 5]);
        let mut z = doubling_step(BitStream::zeros());
        assert_eq!(z.window(0, 64), vec![false; 64]);
    }

    #[test]
    fn doubling_window_matches_source_offset() {
        let mut source = BitStream::uniform(42);
        let reference = source.window(0, 200);
        let mut s = BitStream::uniform(42);
        for t in 0..150 {
            assert_eq!(s.window(0, 10), reference[t..t + 10]);
            s = doubling_step(s);
        }
    }

    #[test]
    fn materialized_bits_are_stable() {
        let mut s = BitStream::uniform(7);
        let first = s.window(0, 100);
        let _ = s.window(0, 1000);
        assert_eq!(s.window(0, 100), first);
        // advancing without having read anything still consumes one source bit
        let mut a = BitStream::uniform(9);
        let mut b = BitStream::uniform(9);
        a.advance();
        let _ = b.bit(0);
        b.advance();
        assert_eq!(a.window(0, 70), b.window(0, 70));
    }

    #[test]
    fn value_of_half() {
        let mut s = BitStream::new(&[true], BitSource::Zeros);
        assert_eq!(s.value(), 0.5);
    }
}
