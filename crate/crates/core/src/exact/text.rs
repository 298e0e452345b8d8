//! Plain-text matrices: the first non-blank line holds `n`, then `n` rows of
//! `n` entries separated by whitespace or commas. Entries are decimals or
//! fractions `a/b`. `#` starts a comment.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Pow, Zero};

use crate::error::{Error, Result};

use super::{check_row, CouplingKernel, FiniteChain, Scalar};

fn parse_error(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

pub(crate) fn parse_rational(s: &str) -> Option<BigRational> {
    let s = s.trim();
    if let Some((a, b)) = s.split_once('/') {
        let a: BigInt = a.trim().parse().ok()?;
        let b: BigInt = b.trim().parse().ok()?;
        if b.is_zero() {
            return None;
        }
        return Some(BigRational::new(a, b));
    }
    let (mantissa, exp) = match s.find(['e', 'E']) {
        Some(k) => (&s[..k], s[k + 1..].parse::<i32>().ok()?),
        None => (s, 0),
    };
    let (neg, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int, frac) = digits.split_once('.').unwrap_or((digits, ""));
    if int.is_empty() && frac.is_empty() {
        return None;
    }
    if !int.chars().chain(frac.chars()).all(|c| c.is_ascii_digit()) {
        return None;
    }
    let all: BigInt = format!("0{int}{frac}").parse().ok()?;
    let scale = exp - frac.len() as i32;
    let ten = BigInt::from(10);
    let mut value = if scale >= 0 {
        BigRational::from_integer(all * Pow::pow(&ten, scale as u32))
    } else {
        BigRational::new(all, Pow::pow(&ten, (-scale) as u32))
    };
    if neg {
        value = -value;
    }
    Some(value)
}

/// Returns the rows together with the line number each came from.
fn parse_rows<S: Scalar>(text: &str) -> Result<(Vec<Vec<S>>, Vec<usize>)> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(k, l)| (k + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty());
    let (hline, header) = lines
        .next()
        .ok_or_else(|| parse_error(1, "empty matrix file"))?;
    let n: usize = header
        .parse()
        .map_err(|_| parse_error(hline, format!("expected the state count, found {header:?}")))?;
    if n == 0 {
        return Err(parse_error(hline, "state count must be positive"));
    }
    let mut rows = Vec::with_capacity(n);
    let mut at = Vec::with_capacity(n);
    for (line, body) in lines {
        if rows.len() == n {
            return Err(parse_error(line, format!("more than {n} rows")));
        }
        let row = body
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|t| !t.is_empty())
            .map(|t| S::parse(t).ok_or_else(|| parse_error(line, format!("bad entry {t:?}"))))
            .collect::<Result<Vec<S>>>()?;
        if row.len() != n {
            return Err(parse_error(
                line,
                format!("row {} has {} entries, expected {n}", rows.len(), row.len()),
            ));
        }
        rows.push(row);
        at.push(line);
    }
    if rows.len() != n {
        return Err(parse_error(
            text.lines().count().max(1),
            format!("expected {n} rows, found {}", rows.len()),
        ));
    }
    Ok((rows, at))
}

pub fn parse_matrix<S: Scalar>(text: &str) -> Result<Vec<Vec<S>>> {
    parse_rows(text).map(|(rows, _)| rows)
}

fn stochastic_rows<S: Scalar>(text: &str) -> Result<Vec<Vec<S>>> {
    let (rows, at) = parse_rows::<S>(text)?;
    let n = rows.len();
    for (i, row) in rows.iter().enumerate() {
        check_row(i, row, n).map_err(|e| parse_error(at[i], strip_domain(e)))?;
    }
    Ok(rows)
}

fn strip_domain(e: Error) -> String {
    match e {
        Error::Domain(m) => m,
        other => other.to_string(),
    }
}

pub fn parse_chain<S: Scalar>(text: &str) -> Result<FiniteChain<S>> {
    FiniteChain::new(stochastic_rows(text)?)
}

/// A kernel file lists `n * n` rows over ordered pairs, pair `(i, j)` at
/// position `i * n + j`.
pub fn parse_kernel<S: Scalar>(text: &str) -> Result<CouplingKernel<S>> {
    CouplingKernel::new(stochastic_rows(text)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::One;

    #[test]
    fn rationals() {
        let q = |a: i64, b: i64| BigRational::new(a.into(), b.into());
        assert_eq!(parse_rational("1/3"), Some(q(1, 3)));
        assert_eq!(parse_rational("0.25"), Some(q(1, 4)));
        assert_eq!(parse_rational("-1.5e-3"), Some(q(-3, 2000)));
        assert_eq!(parse_rational("2E2"), Some(q(200, 1)));
        assert_eq!(parse_rational(".5"), Some(q(1, 2)));
        assert_eq!(parse_rational("1"), Some(BigRational::one()));
        for bad in ["", ".", "1/0", "abc", "1.2.3", "0x1"] {
            assert_eq!(parse_rational(bad), None, "{bad}");
        }
        assert_eq!(<f64 as Scalar>::parse("1/4"), Some(0.25));
    }

    #[test]
    fn chain_round_trip() {
        let text = "# fair coin\n2\n0.5 0.5\n1/2, 1/2\n";
        let chain: FiniteChain<BigRational> = parse_chain(text).unwrap();
        assert_eq!(chain.size(), 2);
        let f: FiniteChain<f64> = parse_chain(text).unwrap();
        assert_eq!(f.row(1), &[0.5, 0.5]);
    }

    #[test]
    fn bad_row_sum_names_row_and_line() {
        let err = parse_chain::<f64>("2\n0.5 0.5\n0.5 0.4\n").unwrap_err();
        match err {
            Error::Parse { line, message } => {
                assert_eq!(line, 3);
                assert!(message.contains("row 1"), "{message}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn shape_errors() {
        assert!(matches!(
            parse_matrix::<f64>("2\n1 0\n"),
            Err(Error::Parse { .. })
        ));
        assert!(matches!(
            parse_matrix::<f64>("2\n1 0 0\n0 1\n"),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(matches!(
            parse_matrix::<f64>("x\n"),
            Err(Error::Parse { line: 1, .. })
        ));
        assert!(matches!(
            parse_matrix::<f64>("1\n1\n1\n"),
            Err(Error::Parse { line: 3, .. })
        ));
        assert!(parse_kernel::<f64>("3\n1 0 0\n0 1 0\n0 0 1\n").is_err());
        assert!(parse_kernel::<f64>("1\n1\n").is_ok());
    }
}
