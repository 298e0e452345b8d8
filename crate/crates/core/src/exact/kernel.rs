use crate::coupling::rosenthal_splice;
use crate::error::{domain, Error, Result};

use super::{propagate_sums, sum, total_variation, Distribution, FiniteChain, Scalar};

/// A transition matrix on ordered pairs of states, pair `(i, j)` stored at
/// index `i * n + j`.
#[derive(Clone, Debug, PartialEq)]
pub struct CouplingKernel<S> {
    n: usize,
    k: Vec<S>,
}

impl<S: Scalar> CouplingKernel<S> {
    /// `rows` has `n * n` rows of `n * n` entries.
    pub fn new(rows: Vec<Vec<S>>) -> Result<Self> {
        let m = rows.len();
        let n = (m as f64).sqrt().round() as usize;
        if n == 0 || n * n != m {
            return Err(domain(format!("kernel has {m} rows, not a perfect square")));
        }
        let chain = FiniteChain::new(rows)?;
        Ok(CouplingKernel { n, k: chain.p })
    }

    pub fn independent(chain: &FiniteChain<S>) -> Self {
        Self::product(chain, false)
    }

    /// Independent off the diagonal, moving together once equal.
    pub fn independent_glued(chain: &FiniteChain<S>) -> Self {
        Self::product(chain, true)
    }

    fn product(chain: &FiniteChain<S>, glued: bool) -> Self {
        let n = chain.size();
        let m = n * n;
        let mut k = vec![S::zero(); m * m];
        for i in 0..n {
            for j in 0..n {
                let row = &mut k[(i * n + j) * m..(i * n + j + 1) * m];
                if glued && i == j {
                    for a in 0..n {
                        row[a * n + a] = chain.prob(i, a).clone();
                    }
                    continue;
                }
                for a in 0..n {
                    for b in 0..n {
                        row[a * n + b] = chain.prob(i, a).clone() * chain.prob(j, b).clone();
                    }
                }
            }
        }
        CouplingKernel { n, k }
    }

    pub fn states(&self) -> usize {
        self.n
    }

    pub fn pair_index(&self, i: usize, j: usize) -> usize {
        i * self.n + j
    }

    pub fn prob(&self, from: (usize, usize), to: (usize, usize)) -> &S {
        let m = self.n * self.n;
        &self.k[self.pair_index(from.0, from.1) * m + self.pair_index(to.0, to.1)]
    }

    /// Both projections must reproduce `chain` from every pair.
    pub fn check_marginals(&self, chain: &FiniteChain<S>) -> Result<()> {
        let n = self.n;
        if chain.size() != n {
            return Err(Error::InvalidCoupling(format!(
                "kernel over {n} states, chain over {}",
                chain.size()
            )));
        }
        for i in 0..n {
            for j in 0..n {
                for a in 0..n {
                    let first = sum(&(0..n)
                        .map(|b| self.prob((i, j), (a, b)).clone())
                        .collect::<Vec<_>>());
                    if !first.approx_eq(chain.prob(i, a)) {
                        return Err(Error::InvalidCoupling(format!(
                            "first marginal from ({i}, {j}) puts {} on {a}, chain has {}",
                            first.to_f64(),
                            chain.prob(i, a).to_f64()
                        )));
                    }
                    let second = sum(&(0..n)
                        .map(|b| self.prob((i, j), (b, a)).clone())
                        .collect::<Vec<_>>());
                    if !second.approx_eq(chain.prob(j, a)) {
                        return Err(Error::InvalidCoupling(format!(
                            "second marginal from ({i}, {j}) puts {} on {a}, chain has {}",
                            second.to_f64(),
                            chain.prob(j, a).to_f64()
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Whether every diagonal pair moves only to diagonal pairs.
    pub fn glues_diagonal(&self) -> bool {
        let n = self.n;
        (0..n)
            .all(|i| (0..n).all(|a| (0..n).all(|b| a == b || self.prob((i, i), (a, b)).is_zero())))
    }

    fn step(&self, v: &[S]) -> Vec<S> {
        let m = self.n * self.n;
        let mut out = vec![S::zero(); m];
        for (s, vs) in v.iter().enumerate() {
            if vs.is_zero() {
                continue;
            }
            for (o, k) in out.iter_mut().zip(&self.k[s * m..(s + 1) * m]) {
                if !k.is_zero() {
                    *o = o.clone() + vs.clone() * k.clone();
                }
            }
        }
        out
    }

    fn start(&self, x: usize, y: usize) -> Result<Vec<S>> {
        if x >= self.n || y >= self.n {
            return Err(domain(format!("states ({x}, {y}) outside 0..{}", self.n)));
        }
        let mut v = vec![S::zero(); self.n * self.n];
        v[self.pair_index(x, y)] = S::one();
        Ok(v)
    }

    fn diagonal(&self) -> Vec<usize> {
        (0..self.n).map(|i| self.pair_index(i, i)).collect()
    }

    /// `P(tau > t)` with the diagonal made absorbing: mass is propagated
    /// over off-diagonal pairs only.
    fn survival_absorbing(&self, x: usize, y: usize, horizon: usize) -> Result<Vec<S>> {
        let v = self.start(x, y)?;
        let diag = self.diagonal();
        let all = vec![(0..self.n * self.n).collect::<Vec<_>>()];
        Ok(
            propagate_sums(&v, &self.k, self.n * self.n, horizon, &diag, &all)
                .into_iter()
                .map(|mut row| row.remove(0))
                .collect(),
        )
    }

    /// `P(tau > t)` as one minus the diagonal mass of the unrestricted
    /// propagation; agrees with the absorbing route only for glued kernels.
    fn survival_full(&self, x: usize, y: usize, horizon: usize) -> Result<Vec<S>> {
        let v = self.start(x, y)?;
        let diag = vec![self.diagonal()];
        Ok(
            propagate_sums(&v, &self.k, self.n * self.n, horizon, &[], &diag)
                .into_iter()
                .map(|mut row| S::one() - row.remove(0))
                .collect(),
        )
    }
}

/// Survival function `P(tau > t)` of the meeting time, `t = 0..=horizon`.
pub fn tau_distribution<S: Scalar>(
    kernel: &CouplingKernel<S>,
    x: usize,
    y: usize,
    horizon: usize,
) -> Result<Vec<S>> {
    if !kernel.glues_diagonal() {
        return Err(domain("kernel does not keep the diagonal absorbing"));
    }
    kernel.survival_absorbing(x, y, horizon)
}

#[derive(Clone, Debug, PartialEq)]
pub struct InequalityRow<S> {
    pub t: usize,
    pub tv: S,
    pub survival: S,
    pub holds: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct InequalityReport<S> {
    pub x: usize,
    pub y: usize,
    pub rows: Vec<InequalityRow<S>>,
    /// Largest disagreement between the two survival computations.
    pub survival_gap: S,
}

impl<S: Scalar> InequalityReport<S> {
    pub fn holds(&self) -> bool {
        self.rows.iter().all(|r| r.holds)
    }

    pub fn violations(&self) -> Vec<usize> {
        self.rows.iter().filter(|r| !r.holds).map(|r| r.t).collect()
    }
}

/// Compares `TV(P^t(x,.), P^t(y,.))` with `P(tau > t)` for `t <= horizon`.
pub fn coupling_inequality_verify<S: Scalar>(
    chain: &FiniteChain<S>,
    kernel: &CouplingKernel<S>,
    x: usize,
    y: usize,
    horizon: usize,
) -> Result<InequalityReport<S>> {
    kernel.check_marginals(chain)?;
    if !kernel.glues_diagonal() {
        return Err(Error::InvalidCoupling(
            "kernel lets equal states separate".into(),
        ));
    }
    let absorbing = kernel.survival_absorbing(x, y, horizon)?;
    let full = kernel.survival_full(x, y, horizon)?;
    let survival_gap = absorbing
        .iter()
        .zip(&full)
        .map(|(a, b)| (a.clone() - b.clone()).abs())
        .fold(S::zero(), |m, d| if d > m { d } else { m });
    if survival_gap > S::tolerance() {
        return Err(Error::InvariantViolation(format!(
            "survival routes disagree by {}",
            survival_gap.to_f64()
        )));
    }
    let lx = chain.laws_from(x, horizon);
    let ly = chain.laws_from(y, horizon);
    let rows = absorbing
        .into_iter()
        .enumerate()
        .map(|(t, survival)| {
            let tv = total_variation(&lx[t], &ly[t])?;
            let holds = tv <= survival.clone() + S::tolerance();
            Ok(InequalityRow {
                t,
                tv,
                survival,
                holds,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(InequalityReport {
        x,
        y,
        rows,
        survival_gap,
    })
}

/// One joint trajectory with its probability.
#[derive(Clone, Debug, PartialEq)]
pub struct JointPath<S> {
    pub prob: S,
    pub x: Vec<usize>,
    pub y: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpliceReport<S> {
    pub paths: usize,
    /// L1 distance between the spliced time-t law and `P^t(y, .)`.
    pub l1_errors: Vec<S>,
}

impl<S: Scalar> SpliceReport<S> {
    pub fn max_error(&self) -> S {
        self.l1_errors
            .iter()
            .cloned()
            .fold(S::zero(), |m, d| if d > m { d } else { m })
    }

    pub fn holds(&self) -> bool {
        self.max_error() <= S::tolerance()
    }
}

/// Splices every joint path at its first meeting time and compares the
/// resulting time-t laws with those of the chain started at the second
/// component's initial state. The paths need not come from a Markovian
/// kernel, which is what makes negative checks possible.
pub fn splice_check_on_paths<S: Scalar>(
    chain: &FiniteChain<S>,
    paths: &[JointPath<S>],
) -> Result<SpliceReport<S>> {
    let first = paths.first().ok_or_else(|| domain("no paths to check"))?;
    let len = first.y.len();
    let y0 = *first.y.first().ok_or_else(|| domain("empty path"))?;
    let n = chain.size();
    let mut laws = vec![vec![S::zero(); n]; len];
    for path in paths {
        if path.x.len() != len || path.y.len() != len || path.y[0] != y0 {
            return Err(domain("paths differ in length or initial state"));
        }
        let tau = (0..len).find(|&t| path.x[t] == path.y[t]).unwrap_or(len);
        let spliced = rosenthal_splice(&path.x, &path.y, tau)?;
        for (law, &s) in laws.iter_mut().zip(&spliced) {
            if s >= n {
                return Err(domain(format!("state {s} outside 0..{n}")));
            }
            law[s] = law[s].clone() + path.prob.clone();
        }
    }
    let reference = chain.laws_from(y0, len - 1);
    let l1_errors = laws
        .into_iter()
        .zip(reference)
        .map(|(got, want)| {
            got.iter()
                .zip(want.probs())
                .fold(S::zero(), |a, (g, w)| a + (g.clone() - w.clone()).abs())
        })
        .collect();
    Ok(SpliceReport {
        paths: paths.len(),
        l1_errors,
    })
}

/// Enumerates every positive-probability joint path of `kernel` from
/// `(x, y)` up to `horizon` and runs [`splice_check_on_paths`]. Fails once
/// more than `path_cap` paths would be needed.
pub fn splice_marginal_check<S: Scalar>(
    chain: &FiniteChain<S>,
    kernel: &CouplingKernel<S>,
    x: usize,
    y: usize,
    horizon: usize,
    path_cap: usize,
) -> Result<SpliceReport<S>> {
    kernel.check_marginals(chain)?;
    kernel.start(x, y)?;
    let n = kernel.n;
    let mut paths = vec![JointPath {
        prob: S::one(),
        x: vec![x],
        y: vec![y],
    }];
    for _ in 0..horizon {
        let mut next = Vec::new();
        for path in &paths {
            let from = (
                *path.x.last().expect("non-empty"),
                *path.y.last().expect("non-empty"),
            );
            for a in 0..n {
                for b in 0..n {
                    let p = kernel.prob(from, (a, b));
                    if p.is_zero() {
                        continue;
                    }
                    if next.len() == path_cap {
                        return Err(Error::Precondition(format!(
                            "more than {path_cap} joint paths up to horizon {horizon}"
                        )));
                    }
                    let mut extended = path.clone();
                    extended.prob = extended.prob * p.clone();
                    extended.x.push(a);
                    extended.y.push(b);
                    next.push(extended);
                }
            }
        }
        paths = next;
    }
    splice_check_on_paths(chain, &paths)
}

/// Distribution of the pair at time `t`, mainly for inspection.
pub fn joint_law<S: Scalar>(
    kernel: &CouplingKernel<S>,
    x: usize,
    y: usize,
    t: usize,
) -> Result<Distribution<S>> {
    let mut v = kernel.start(x, y)?;
    for _ in 0..t {
        v = kernel.step(&v);
    }
    Distribution::new(v)
}
