//! Exact computations on small finite-state chains.
//!
//! Everything here is generic over [`Scalar`], implemented for `f64`
//! (comparisons at a 1e-12 tolerance) and for `BigRational` (exact, zero
//! tolerance). The rational path is what exact checks should use
//! when false alarms are unacceptable.

mod kernel;
mod text;

use std::fmt::Debug;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Num, Signed, ToPrimitive, Zero};
use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;

use crate::error::{domain, Error, Result};

pub use kernel::{
    coupling_inequality_verify, joint_law, splice_check_on_paths, splice_marginal_check,
    tau_distribution, CouplingKernel, InequalityReport, InequalityRow, JointPath, SpliceReport,
};
pub use text::{parse_chain, parse_kernel, parse_matrix};

pub trait Scalar: Clone + Debug + PartialOrd + Num + Signed + Send + Sync + 'static {
    /// Slack allowed in equality and inequality checks.
    fn tolerance() -> Self;
    fn to_f64(&self) -> f64;
    fn from_ratio(num: i64, den: i64) -> Self;
    /// Parses a decimal (`0.25`, `-1.5e-3`) or a fraction (`1/3`).
    fn parse(s: &str) -> Option<Self>;

    fn approx_eq(&self, other: &Self) -> bool {
        (self.clone() - other.clone()).abs() <= Self::tolerance()
    }

    /// The exact value, for scalars that have one.
    fn as_rational(&self) -> Option<BigRational> {
        None
    }

    fn from_rational(r: BigRational) -> Self;
}

impl Scalar for f64 {
    fn tolerance() -> Self {
        1e-12
    }

    fn to_f64(&self) -> f64 {
        *self
    }

    fn from_ratio(num: i64, den: i64) -> Self {
        num as f64 / den as f64
    }

    fn from_rational(r: BigRational) -> Self {
        ToPrimitive::to_f64(&r).unwrap_or(f64::NAN)
    }

    fn parse(s: &str) -> Option<Self> {
        match s.split_once('/') {
            Some((a, b)) => Some(a.trim().parse::<f64>().ok()? / b.trim().parse::<f64>().ok()?),
            None => s.parse().ok(),
        }
    }
}

impl Scalar for BigRational {
    fn tolerance() -> Self {
        BigRational::zero()
    }

    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }

    fn from_ratio(num: i64, den: i64) -> Self {
        BigRational::new(BigInt::from(num), BigInt::from(den))
    }

    fn parse(s: &str) -> Option<Self> {
        text::parse_rational(s)
    }

    fn as_rational(&self) -> Option<BigRational> {
        Some(self.clone())
    }

    fn from_rational(r: BigRational) -> Self {
        r
    }
}

/// A probability vector.
#[derive(Clone, Debug, PartialEq)]
pub struct Distribution<S>(Vec<S>);

impl<S: Scalar> Distribution<S> {
    pub fn new(probs: Vec<S>) -> Result<Self> {
        if probs.iter().any(|p| *p < S::zero()) {
            return Err(domain("distribution has a negative entry"));
        }
        let total = probs.iter().fold(S::zero(), |a, p| a + p.clone());
        if !total.approx_eq(&S::one()) {
            return Err(domain(format!("distribution sums to {:?}", total)));
        }
        Ok(Distribution(probs))
    }

    pub fn point_mass(n: usize, state: usize) -> Self {
        let mut v = vec![S::zero(); n];
        v[state] = S::one();
        Distribution(v)
    }

    pub fn probs(&self) -> &[S] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// `sup_A |mu(A) - nu(A)|`, i.e. half the L1 distance.
pub fn total_variation<S: Scalar>(mu: &Distribution<S>, nu: &Distribution<S>) -> Result<S> {
    if mu.len() != nu.len() {
        return Err(domain(format!(
            "distributions over {} and {} states",
            mu.len(),
            nu.len()
        )));
    }
    let l1 =
        mu.0.iter()
            .zip(&nu.0)
            .fold(S::zero(), |acc, (a, b)| acc + (a.clone() - b.clone()).abs());
    Ok(l1 / (S::one() + S::one()))
}

/// A row-stochastic matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct FiniteChain<S> {
    n: usize,
    p: Vec<S>,
}

impl<S: Scalar> FiniteChain<S> {
    pub fn new(rows: Vec<Vec<S>>) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(domain("chain has no states"));
        }
        let mut p = Vec::with_capacity(n * n);
        for (i, row) in rows.into_iter().enumerate() {
            check_row(i, &row, n)?;
            p.extend(row);
        }
        Ok(FiniteChain { n, p })
    }

    /// Rows proportional to non-negative integer weights.
    pub fn from_weights(weights: &[Vec<u32>]) -> Result<Self> {
        let rows = weights
            .iter()
            .enumerate()
            .map(|(i, w)| {
                let total: u64 = w.iter().map(|&v| v as u64).sum();
                if total == 0 {
                    return Err(domain(format!("row {i} has zero total weight")));
                }
                Ok(w.iter()
                    .map(|&v| S::from_ratio(v as i64, total as i64))
                    .collect())
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(rows)
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn prob(&self, i: usize, j: usize) -> &S {
        &self.p[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[S] {
        &self.p[i * self.n..(i + 1) * self.n]
    }

    /// `mu P`.
    pub fn push_forward(&self, mu: &Distribution<S>) -> Distribution<S> {
        let mut out = vec![S::zero(); self.n];
        for (i, m) in mu.0.iter().enumerate() {
            if m.is_zero() {
                continue;
            }
            for (o, pij) in out.iter_mut().zip(self.row(i)) {
                *o = o.clone() + m.clone() * pij.clone();
            }
        }
        Distribution(out)
    }

    /// `P^t(x, .)` for `t = 0..=horizon`.
    pub fn laws_from(&self, x: usize, horizon: usize) -> Vec<Distribution<S>> {
        let start = Distribution::<S>::point_mass(self.n, x);
        let singletons: Vec<Vec<usize>> = (0..self.n).map(|i| vec![i]).collect();
        propagate_sums(&start.0, &self.p, self.n, horizon, &[], &singletons)
            .into_iter()
            .map(Distribution)
            .collect()
    }

    /// Closed communicating classes, each sorted, ordered by smallest state.
    pub fn recurrent_classes(&self) -> Vec<Vec<usize>> {
        let mut g = DiGraph::<(), ()>::new();
        let nodes: Vec<_> = (0..self.n).map(|_| g.add_node(())).collect();
        for i in 0..self.n {
            for j in 0..self.n {
                if self.prob(i, j) > &S::zero() {
                    g.add_edge(nodes[i], nodes[j], ());
                }
            }
        }
        let mut classes: Vec<Vec<usize>> = tarjan_scc(&g)
            .into_iter()
            .map(|c| {
                let mut v: Vec<usize> = c.into_iter().map(|n| n.index()).collect();
                v.sort_unstable();
                v
            })
            .filter(|c| {
                c.iter().all(|&i| {
                    (0..self.n).all(|j| self.prob(i, j).is_zero() || c.binary_search(&j).is_ok())
                })
            })
            .collect();
        classes.sort_unstable_by_key(|c| c[0]);
        classes
    }

    /// `max_j |(mu P - mu)_j|`.
    pub fn residual(&self, mu: &Distribution<S>) -> S {
        let next = self.push_forward(mu);
        next.0
            .iter()
            .zip(&mu.0)
            .map(|(a, b)| (a.clone() - b.clone()).abs())
            .fold(S::zero(), |m, d| if d > m { d } else { m })
    }
}

fn check_row<S: Scalar>(i: usize, row: &[S], n: usize) -> Result<()> {
    if row.len() != n {
        return Err(domain(format!(
            "row {i} has {} entries, expected {n}",
            row.len()
        )));
    }
    if let Some(j) = row.iter().position(|v| *v < S::zero()) {
        return Err(domain(format!(
            "row {i} has a negative entry in column {j}"
        )));
    }
    let total = row.iter().fold(S::zero(), |a, v| a + v.clone());
    if !total.approx_eq(&S::one()) {
        return Err(domain(format!("row {i} sums to {}, not 1", total.to_f64())));
    }
    Ok(())
}

/// Solves `a z = b` by Gaussian elimination with partial pivoting.
fn solve<S: Scalar>(mut a: Vec<Vec<S>>, mut b: Vec<S>) -> Result<Vec<S>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&r, &s| {
                a[r][col]
                    .abs()
                    .partial_cmp(&a[s][col].abs())
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
            .expect("non-empty range");
        if a[pivot][col].is_zero() {
            return Err(Error::InvariantViolation("singular linear system".into()));
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for r in col + 1..n {
            if a[r][col].is_zero() {
                continue;
            }
            let f = a[r][col].clone() / a[col][col].clone();
            for c in col..n {
                let v = a[col][c].clone() * f.clone();
                a[r][c] = a[r][c].clone() - v;
            }
            b[r] = b[r].clone() - f * b[col].clone();
        }
    }
    let mut z = vec![S::zero(); n];
    for r in (0..n).rev() {
        let mut acc = b[r].clone();
        for c in r + 1..n {
            acc = acc - a[r][c].clone() * z[c].clone();
        }
        z[r] = acc / a[r][r].clone();
    }
    Ok(z)
}

/// The invariant measure of each recurrent class, supported on that class.
/// An irreducible chain yields exactly one.
pub fn invariant_measures<S: Scalar>(chain: &FiniteChain<S>) -> Result<Vec<Distribution<S>>> {
    chain
        .recurrent_classes()
        .into_iter()
        .map(|class| {
            let k = class.len();
            // (P_C - I)^T z = 0 with the last equation replaced by sum z = 1
            let mut a = vec![vec![S::zero(); k]; k];
            for (r, &j) in class.iter().enumerate() {
                for (c, &i) in class.iter().enumerate() {
                    a[r][c] = chain.prob(i, j).clone();
                }
                a[r][r] = a[r][r].clone() - S::one();
            }
            a[k - 1] = vec![S::one(); k];
            let mut b = vec![S::zero(); k];
            b[k - 1] = S::one();
            let z = solve(a, b)?;
            let mut mu = vec![S::zero(); chain.size()];
            for (&i, v) in class.iter().zip(z) {
                // round-off can leave values like -1e-18
                mu[i] = if v < S::zero() { S::zero() } else { v };
            }
            Ok(Distribution(mu))
        })
        .collect()
}

/// The unique invariant measure; fails when there are several recurrent
/// classes.
pub fn invariant_measure<S: Scalar>(chain: &FiniteChain<S>) -> Result<Distribution<S>> {
    let mut all = invariant_measures(chain)?;
    if all.len() != 1 {
        return Err(Error::NotUnique(all.len()));
    }
    Ok(all.remove(0))
}

/// For `t = 0..=steps`, the sums over each of `groups` of `v K^t`, where
/// `K` is the `dim x dim` row-major matrix `k` and entries listed in
/// `cleared` are zeroed after every product (and initially). Exact scalars
/// are propagated as integers over a common denominator, which avoids a gcd
/// per multiply-add.
pub(crate) fn propagate_sums<S: Scalar>(
    v: &[S],
    k: &[S],
    dim: usize,
    steps: usize,
    cleared: &[usize],
    groups: &[Vec<usize>],
) -> Vec<Vec<S>> {
    if let (Some(v), Some(k)) = (
        v.iter().map(S::as_rational).collect::<Option<Vec<_>>>(),
        k.iter().map(S::as_rational).collect::<Option<Vec<_>>>(),
    ) {
        return propagate_integer(&v, &k, dim, steps, cleared, groups)
            .into_iter()
            .map(|row| row.into_iter().map(S::from_rational).collect())
            .collect();
    }
    let mut v = v.to_vec();
    let mut out = Vec::with_capacity(steps + 1);
    for t in 0..=steps {
        if t > 0 {
            let mut next = vec![S::zero(); dim];
            for (s, vs) in v.iter().enumerate() {
                if vs.is_zero() {
                    continue;
                }
                for (o, ko) in next.iter_mut().zip(&k[s * dim..(s + 1) * dim]) {
                    if !ko.is_zero() {
                        *o = o.clone() + vs.clone() * ko.clone();
                    }
                }
            }
            v = next;
        }
        for &c in cleared {
            v[c] = S::zero();
        }
        out.push(
            groups
                .iter()
                .map(|g| g.iter().fold(S::zero(), |a, &i| a + v[i].clone()))
                .collect(),
        );
    }
    out
}

fn lcm_of_denominators(values: &[BigRational]) -> BigInt {
    use num_integer::Integer;
    values
        .iter()
        .fold(BigInt::from(1), |acc, r| acc.lcm(r.denom()))
}

fn propagate_integer(
    v: &[BigRational],
    k: &[BigRational],
    dim: usize,
    steps: usize,
    cleared: &[usize],
    groups: &[Vec<usize>],
) -> Vec<Vec<BigRational>> {
    let dk = lcm_of_denominators(k);
    let a: Vec<BigInt> = k.iter().map(|r| r.numer() * (&dk / r.denom())).collect();
    let mut scale = lcm_of_denominators(v);
    let mut w: Vec<BigInt> = v.iter().map(|r| r.numer() * (&scale / r.denom())).collect();
    let mut out = Vec::with_capacity(steps + 1);
    for t in 0..=steps {
        if t > 0 {
            let mut next = vec![BigInt::zero(); dim];
            for (s, ws) in w.iter().enumerate() {
                if ws.is_zero() {
                    continue;
                }
                for (o, ao) in next.iter_mut().zip(&a[s * dim..(s + 1) * dim]) {
                    if !ao.is_zero() {
                        *o += ws * ao;
                    }
                }
            }
            w = next;
            scale *= &dk;
        }
        for &c in cleared {
            w[c] = BigInt::zero();
        }
        out.push(
            groups
                .iter()
                .map(|g| {
                    let total = g.iter().fold(BigInt::zero(), |acc, &i| acc + &w[i]);
                    BigRational::new(total, scale.clone())
                })
                .collect(),
        );
    }
    out
}

pub(crate) fn sum<S: Scalar>(v: &[S]) -> S {
    v.iter().fold(S::zero(), |a, b| a + b.clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn q(a: i64, b: i64) -> BigRational {
        BigRational::from_ratio(a, b)
    }

    #[test]
    fn total_variation_examples() {
        let a: Distribution<f64> = Distribution::new(vec![0.5, 0.5]).unwrap();
        assert_eq!(total_variation(&a, &a).unwrap(), 0.0);
        let p0 = Distribution::<f64>::point_mass(3, 0);
        let p2 = Distribution::<f64>::point_mass(3, 2);
        assert_eq!(total_variation(&p0, &p2).unwrap(), 1.0);
        let b = Distribution::new(vec![0.75, 0.25]).unwrap();
        assert_eq!(total_variation(&a, &b).unwrap(), 0.25);
        assert!(total_variation(&a, &p0).is_err());
    }

    #[test]
    fn chain_validation_names_the_row() {
        let err = FiniteChain::new(vec![vec![0.5, 0.5], vec![0.5, 0.4]]).unwrap_err();
        assert!(err.to_string().contains("row 1"), "{err}");
        assert!(FiniteChain::new(vec![vec![1.5, -0.5], vec![0.5, 0.5]]).is_err());
    }

    #[test]
    fn identity_chain_has_one_measure_per_state() {
        let chain = FiniteChain::<f64>::new(vec![
            vec![1.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0],
            vec![0.0, 0.0, 1.0],
        ])
        .unwrap();
        let all = invariant_measures(&chain).unwrap();
        assert_eq!(all.len(), 3);
        for (i, mu) in all.iter().enumerate() {
            assert_eq!(mu, &Distribution::point_mass(3, i));
        }
        assert_eq!(invariant_measure(&chain), Err(Error::NotUnique(3)));
    }

    #[test]
    fn two_state_invariant_measures() {
        let sym = FiniteChain::<f64>::new(vec![vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap();
        assert_eq!(invariant_measure(&sym).unwrap().probs(), &[0.5, 0.5]);
        // detailed balance: 0.3 * mu0 = 0.6 * mu1
        let exact =
            FiniteChain::new(vec![vec![q(7, 10), q(3, 10)], vec![q(6, 10), q(4, 10)]]).unwrap();
        let mu = invariant_measure(&exact).unwrap();
        assert_eq!(mu.probs(), &[q(2, 3), q(1, 3)]);
        assert!(exact.residual(&mu).is_zero());
        let float = FiniteChain::<f64>::new(vec![vec![0.7, 0.3], vec![0.6, 0.4]]).unwrap();
        let mu = invariant_measure(&float).unwrap();
        assert!((mu.probs()[0] - 2.0 / 3.0).abs() < 1e-12);
        assert!(float.residual(&mu) <= 1e-12);
    }

    #[test]
    fn transient_states_get_zero_mass() {
        let chain = FiniteChain::new(vec![
            vec![q(1, 2), q(1, 4), q(1, 4)],
            vec![q(0, 1), q(1, 3), q(2, 3)],
            vec![q(0, 1), q(1, 2), q(1, 2)],
        ])
        .unwrap();
        assert_eq!(chain.recurrent_classes(), vec![vec![1, 2]]);
        let mu = invariant_measure(&chain).unwrap();
        assert_eq!(mu.probs(), &[q(0, 1), q(3, 7), q(4, 7)]);
    }

    fn arb_weights(n: usize) -> impl Strategy<Value = Vec<Vec<u32>>> {
        proptest::collection::vec(proptest::collection::vec(1u32..10, n), n)
    }

    proptest! {
        #[test]
        fn total_variation_contracts(w in arb_weights(4), a in proptest::collection::vec(0u32..10, 4), b in proptest::collection::vec(0u32..10, 4)) {
            prop_assume!(a.iter().sum::<u32>() > 0 && b.iter().sum::<u32>() > 0);
            let chain = FiniteChain::<BigRational>::from_weights(&w).unwrap();
            let norm = |v: &[u32]| {
                let t: u32 = v.iter().sum();
                Distribution::new(v.iter().map(|&x| q(x as i64, t as i64)).collect()).unwrap()
            };
            let (mu, nu) = (norm(&a), norm(&b));
            let before = total_variation(&mu, &nu).unwrap();
            let after = total_variation(&chain.push_forward(&mu), &chain.push_forward(&nu)).unwrap();
            prop_assert!(after <= before);
        }

        #[test]
        fn invariant_measure_has_small_residual(w in arb_weights(6)) {
            let chain = FiniteChain::<f64>::from_weights(&w).unwrap();
            let mu = invariant_measure(&chain).unwrap();
            prop_assert!(chain.residual(&mu) <= 1e-12);
            prop_assert!((sum(mu.probs()) - 1.0).abs() <= 1e-12);
        }
    }
}
