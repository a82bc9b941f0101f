use crate::error::{Error, Result};

/// Exponent vector of a monomial, one entry per domain variable.
///
/// Ordering is lexicographic (derived from the inner `Vec`), which fixes the
/// iteration order of every coefficient map in the crate and hence makes all
/// serialized output deterministic.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MultiIndex(Vec<u32>);

impl MultiIndex {
    pub fn new(exponents: Vec<u32>) -> Self {
        MultiIndex(exponents)
    }

    pub fn zeros(len: usize) -> Self {
        MultiIndex(vec![0; len])
    }

    /// Unit index sigma_j: exponent 1 on variable `j`, 0 elsewhere.
    pub fn unit(len: usize, j: usize) -> Self {
        let mut e = vec![0; len];
        e[j] = 1;
        MultiIndex(e)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn exponents(&self) -> &[u32] {
        &self.0
    }

    pub fn get(&self, j: usize) -> u32 {
        self.0[j]
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn add(&self, other: &MultiIndex) -> Result<MultiIndex> {
        if self.len() != other.len() {
            return Err(Error::DimensionMismatch {
                context: "multi-index add",
                left: self.len(),
                right: other.len(),
            });
        }
        Ok(MultiIndex(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(a, b)| a + b)
                .collect(),
        ))
    }

    /// Decrement the exponent of variable `j`; None if it is already 0.
    pub fn sub_unit(&self, j: usize) -> Option<MultiIndex> {
        if self.0[j] == 0 {
            return None;
        }
        let mut e = self.0.clone();
        e[j] -= 1;
        Some(MultiIndex(e))
    }

    /// alpha! as an f64. Exact for every index this crate can afford to
    /// enumerate (f64 holds factorials up to 170! and exponents stay tiny).
    pub fn factorial(&self) -> f64 {
        self.0
            .iter()
            .map(|&e| (1..=e as u64).map(|v| v as f64).product::<f64>())
            .product()
    }

    /// Insert `extra` zero exponents starting at position `at`, keeping the
    /// original exponents for the surrounding variables.
    pub fn widen(&self, at: usize, extra: usize) -> MultiIndex {
        let mut e = Vec::with_capacity(self.0.len() + extra);
        e.extend_from_slice(&self.0[..at]);
        e.extend(std::iter::repeat(0).take(extra));
        e.extend_from_slice(&self.0[at..]);
        MultiIndex(e)
    }

    /// Drop the exponent at position `at` (must be zero to preserve meaning;
    /// callers check that).
    pub fn narrow(&self, at: usize) -> MultiIndex {
        let mut e = self.0.clone();
        e.remove(at);
        MultiIndex(e)
    }
}

impl std::fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "(")?;
        for (i, e) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{e}")?;
        }
        write!(f, ")")
    }
}

/// All multi-indices of the given degree over `len` variables, in ascending
/// lexicographic order. Count is C(degree + len - 1, len - 1).
pub fn enumerate_indices(degree: u32, len: usize) -> Vec<MultiIndex> {
    let mut out = Vec::new();
    if len == 0 {
        if degree == 0 {
            out.push(MultiIndex(vec![]));
        }
        return out;
    }
    let mut current = vec![0u32; len];
    fill(&mut out, &mut current, 0, degree);
    out
}

fn fill(out: &mut Vec<MultiIndex>, current: &mut Vec<u32>, pos: usize, remaining: u32) {
    if pos == current.len() - 1 {
        current[pos] = remaining;
        out.push(MultiIndex(current.clone()));
        return;
    }
    for e in 0..=remaining {
        current[pos] = e;
        fill(out, current, pos + 1, remaining - e);
    }
    current[pos] = 0;
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn degree_two_two_vars_lexicographic() {
        let idx = enumerate_indices(2, 2);
        let expected: Vec<Vec<u32>> = vec![vec![0, 2], vec![1, 1], vec![2, 0]];
        assert_eq!(
            idx.iter().map(|i| i.exponents().to_vec()).collect::<Vec<_>>(),
            expected
        );
    }

    #[test]
    fn count_matches_binomial() {
        // C(degree + len - 1, len - 1)
        let binom = |n: u64, k: u64| -> u64 {
            let mut num = 1u64;
            let mut den = 1u64;
            for i in 0..k {
                num *= n - i;
                den *= i + 1;
            }
            num / den
        };
        for len in 1..5usize {
            for degree in 0..7u32 {
                let got = enumerate_indices(degree, len).len() as u64;
                assert_eq!(got, binom((degree as usize + len - 1) as u64, (len - 1) as u64));
            }
        }
    }

    #[test]
    fn zero_degree_is_single_zero_index() {
        let idx = enumerate_indices(0, 3);
        assert_eq!(idx, vec![MultiIndex::zeros(3)]);
    }

    #[test]
    fn order_is_sorted() {
        let idx = enumerate_indices(5, 3);
        let mut sorted = idx.clone();
        sorted.sort();
        assert_eq!(idx, sorted);
    }

    #[test]
    fn factorial_values() {
        assert_eq!(MultiIndex::new(vec![0, 0]).factorial(), 1.0);
        assert_eq!(MultiIndex::new(vec![3, 2]).factorial(), 12.0);
        assert_eq!(MultiIndex::new(vec![1, 1, 1]).factorial(), 1.0);
        assert_eq!(MultiIndex::new(vec![4]).factorial(), 24.0);
    }

    #[test]
    fn widen_and_narrow_round_trip() {
        let a = MultiIndex::new(vec![2, 1]);
        let w = a.widen(1, 2);
        assert_eq!(w.exponents(), &[2, 0, 0, 1]);
        assert_eq!(w.narrow(1).narrow(1), a);
    }
}
