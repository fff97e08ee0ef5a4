//! File-popularity distributions.
//!
//! A [`PopularityProfile`] always stores probabilities sorted in descending
//! order; the permutation back to the caller's numbering is kept so results can
//! be reported against the original file indices. File indices in this crate
//! are 0-based: index 0 is the most popular file.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::numeric::{neumaier_sum, pow_complement};

/// Tolerance on the input sum accepted by [`PopularityProfile::from_values`].
pub const SUM_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct PopularityProfile {
    probs: Vec<f64>,
    /// `permutation[k]` is the caller's index of the `k`-th most popular file.
    permutation: Vec<usize>,
}

impl PopularityProfile {
    /// Zipf law `p_n ∝ n^{-alpha}`. Already sorted, so the permutation is the identity.
    pub fn from_zipf(n_files: usize, alpha: f64) -> Result<Self> {
        if n_files == 0 {
            return Err(Error::invalid("zipf profile needs at least one file"));
        }
        if !alpha.is_finite() || alpha < 0.0 {
            return Err(Error::invalid(format!(
                "zipf exponent must be finite and nonnegative, got {alpha}"
            )));
        }
        let weights: Vec<f64> = (1..=n_files).map(|n| (n as f64).powf(-alpha)).collect();
        let total = neumaier_sum(weights.iter().copied());
        let probs = weights.into_iter().map(|w| w / total).collect();
        Ok(Self {
            probs,
            permutation: (0..n_files).collect(),
        })
    }

    pub fn uniform(n_files: usize) -> Result<Self> {
        Self::from_zipf(n_files, 0.0)
    }

    /// Validates, renormalizes and sorts arbitrary probabilities.
    pub fn from_values(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidInput {
                index: None,
                reason: "empty probability list".into(),
            });
        }
        for (i, &v) in values.iter().enumerate() {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidInput {
                    index: Some(i),
                    reason: format!("probability {v} is not a finite nonnegative number"),
                });
            }
        }
        let total = neumaier_sum(values.iter().copied());
        if total == 0.0 {
            return Err(Error::InvalidInput {
                index: None,
                reason: "all probabilities are zero".into(),
            });
        }
        if (total - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::InvalidInput {
                index: None,
                reason: format!("probabilities sum to {total}, expected 1"),
            });
        }
        let mut order: Vec<usize> = (0..values.len()).collect();
        // Stable: equal probabilities keep their input order.
        order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
        let probs = order.iter().map(|&i| values[i] / total).collect();
        Ok(Self {
            probs,
            permutation: order,
        })
    }

    /// Parses the plain-text format: one probability per line, `#` starts a comment.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut values = Vec::new();
        for line in text.lines() {
            let content = line.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let v: f64 = content.parse().map_err(|_| Error::InvalidInput {
                index: Some(values.len()),
                reason: format!("cannot parse {content:?} as a probability"),
            })?;
            values.push(v);
        }
        Self::from_values(&values)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_text(&text)
    }

    pub fn n_files(&self) -> usize {
        self.probs.len()
    }

    /// Probabilities in descending order.
    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob(&self, n: usize) -> Result<f64> {
        self.probs
            .get(n)
            .copied()
            .ok_or(Error::IndexOutOfRange {
                index: n,
                len: self.probs.len(),
            })
    }

    /// Probability of the least popular file.
    pub fn least_popular(&self) -> f64 {
        *self.probs.last().expect("profiles are nonempty")
    }

    pub fn permutation(&self) -> &[usize] {
        &self.permutation
    }

    /// Maps a caller (original) file index to its sorted position.
    pub fn sorted_index(&self, original: usize) -> Result<usize> {
        self.permutation
            .iter()
            .position(|&o| o == original)
            .ok_or(Error::IndexOutOfRange {
                index: original,
                len: self.probs.len(),
            })
    }

    /// Reorders per-file values from sorted order back into the caller's numbering.
    pub fn to_original_order<T: Clone>(&self, sorted: &[T]) -> Vec<T> {
        assert_eq!(sorted.len(), self.n_files());
        let mut out: Vec<Option<T>> = vec![None; sorted.len()];
        for (k, &orig) in self.permutation.iter().enumerate() {
            out[orig] = Some(sorted[k].clone());
        }
        out.into_iter().map(|v| v.expect("permutation")).collect()
    }

    /// Inverse of [`Self::to_original_order`].
    pub fn from_original_order<T: Clone>(&self, original: &[T]) -> Vec<T> {
        assert_eq!(original.len(), self.n_files());
        self.permutation.iter().map(|&o| original[o].clone()).collect()
    }

    /// `s_n(l) = 1 - (1 - p_n)^l`: probability that at least one of `users`
    /// independent requests asks for file `n`.
    pub fn coverage_prob(&self, n: usize, users: usize) -> Result<f64> {
        let p = self.prob(n)?;
        if users == 0 {
            return Err(Error::invalid("coverage needs at least one user"));
        }
        Ok(coverage(p, users))
    }

    /// Expected number of distinct files requested by `users` users, i.e. the
    /// uncoded zero-cache delivery rate `Σ_n s_n(users)`.
    pub fn expected_distinct(&self, users: usize) -> f64 {
        neumaier_sum(self.probs.iter().map(|&p| coverage(p, users)))
    }

    /// True when every file has the same probability.
    pub fn is_uniform(&self) -> bool {
        let first = self.probs[0];
        self.probs.iter().all(|&p| (p - first).abs() <= 1e-12)
    }
}

/// `1 - (1 - p)^l` for a single probability.
pub fn coverage(p: f64, users: usize) -> f64 {
    if p <= 0.0 {
        return 0.0;
    }
    if p < 0.5 {
        // -expm1 keeps precision when the coverage itself is tiny.
        -((users as f64) * (-p).ln_1p()).exp_m1()
    } else {
        1.0 - pow_complement(p, users)
    }
}

/// Textual profile specifier: `uniform`, `zipf:<alpha>`, or a path to a file
/// in the one-probability-per-line format.
#[derive(Debug, Clone, PartialEq)]
pub enum PopularitySpec {
    Uniform,
    Zipf(f64),
    File(PathBuf),
}

impl PopularitySpec {
    /// Builds the profile. `n_files` is required for the parametric forms and,
    /// when given, must agree with the file length for the file form.
    pub fn resolve(&self, n_files: Option<usize>) -> Result<PopularityProfile> {
        match self {
            PopularitySpec::Uniform => PopularityProfile::uniform(require_files(n_files)?),
            PopularitySpec::Zipf(alpha) => {
                PopularityProfile::from_zipf(require_files(n_files)?, *alpha)
            }
            PopularitySpec::File(path) => {
                let profile = PopularityProfile::from_file(path)?;
                if let Some(n) = n_files {
                    if n != profile.n_files() {
                        return Err(Error::DimensionMismatch {
                            expected: n,
                            actual: profile.n_files(),
                        });
                    }
                }
                Ok(profile)
            }
        }
    }
}

fn require_files(n_files: Option<usize>) -> Result<usize> {
    n_files.ok_or_else(|| Error::invalid("the number of files must be given for uniform/zipf profiles"))
}

impl FromStr for PopularitySpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("uniform") {
            return Ok(PopularitySpec::Uniform);
        }
        if let Some(rest) = s.strip_prefix("zipf:") {
            let alpha: f64 = rest
                .trim()
                .parse()
                .map_err(|_| Error::invalid(format!("bad zipf exponent {rest:?}")))?;
            if !alpha.is_finite() || alpha < 0.0 {
                return Err(Error::invalid(format!("zipf exponent must be >= 0, got {alpha}")));
            }
            return Ok(PopularitySpec::Zipf(alpha));
        }
        if s.is_empty() {
            return Err(Error::invalid("empty popularity specifier"));
        }
        Ok(PopularitySpec::File(PathBuf::from(s)))
    }
}

impl fmt::Display for PopularitySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PopularitySpec::Uniform => write!(f, "uniform"),
            PopularitySpec::Zipf(a) => write!(f, "zipf:{a}"),
            PopularitySpec::File(p) => write!(f, "{}", p.display()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn zipf_examples() {
        let u = PopularityProfile::from_zipf(3, 0.0).unwrap();
        assert_eq!(u.probs(), &[1.0 / 3.0; 3]);
        assert!(u.is_uniform());

        // Direct summation: 1 + 1/2 = 3/2.
        let z = PopularityProfile::from_zipf(2, 1.0).unwrap();
        let norm: f64 = (1..=2).map(|n| 1.0 / n as f64).sum();
        assert!((z.probs()[0] - 1.0 / norm).abs() < 1e-15);
        assert!((z.probs()[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!((z.probs()[1] - 1.0 / 3.0).abs() < 1e-15);

        assert_eq!(PopularityProfile::from_zipf(1, 5.0).unwrap().probs(), &[1.0]);
    }

    #[test]
    fn zipf_rejects_bad_arguments() {
        assert!(PopularityProfile::from_zipf(0, 1.0).is_err());
        assert!(PopularityProfile::from_zipf(3, f64::NAN).is_err());
        assert!(PopularityProfile::from_zipf(3, f64::INFINITY).is_err());
    }

    #[test]
    fn zipf_normalization_at_scale() {
        let p = PopularityProfile::from_zipf(1_000_000, 0.7).unwrap();
        let s = neumaier_sum(p.probs().iter().copied());
        assert!((s - 1.0).abs() <= 1e-12, "sum = {s}");
    }

    #[test]
    fn from_values_sorts_and_records_permutation() {
        let p = PopularityProfile::from_values(&[0.5, 0.5]).unwrap();
        assert_eq!(p.probs(), &[0.5, 0.5]);

        let p = PopularityProfile::from_values(&[0.2, 0.8]).unwrap();
        assert_eq!(p.probs(), &[0.8, 0.2]);
        assert_eq!(p.permutation(), &[1, 0]);
        assert_eq!(p.to_original_order(&[10, 20]), vec![20, 10]);
        assert_eq!(p.from_original_order(&[20, 10]), vec![10, 20]);
        assert_eq!(p.sorted_index(0).unwrap(), 1);
    }

    #[test]
    fn from_values_validation() {
        match PopularityProfile::from_values(&[0.3, 0.3, 0.5]) {
            Err(Error::InvalidInput { index: None, reason }) => assert!(reason.contains("1.1")),
            other => panic!("unexpected {other:?}"),
        }
        match PopularityProfile::from_values(&[0.5, -0.1, 0.6]) {
            Err(Error::InvalidInput { index: Some(1), .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
        assert!(PopularityProfile::from_values(&[0.0, 0.0]).is_err());
        assert!(PopularityProfile::from_values(&[]).is_err());
        // Within tolerance: renormalized.
        let p = PopularityProfile::from_values(&[0.5, 0.5000005]).unwrap();
        assert!((p.probs()[0] + p.probs()[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn text_format() {
        let p = PopularityProfile::from_text("# popularity\n0.25\n\n0.75 # hot file\n").unwrap();
        assert_eq!(p.probs(), &[0.75, 0.25]);
        assert_eq!(p.permutation(), &[1, 0]);
        match PopularityProfile::from_text("0.5\nabc\n") {
            Err(Error::InvalidInput { index: Some(1), .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn specifiers() {
        assert_eq!("uniform".parse::<PopularitySpec>().unwrap(), PopularitySpec::Uniform);
        assert_eq!("zipf:0.7".parse::<PopularitySpec>().unwrap(), PopularitySpec::Zipf(0.7));
        assert!("zipf:-1".parse::<PopularitySpec>().is_err());
        assert!(PopularitySpec::Uniform.resolve(None).is_err());
        assert_eq!(PopularitySpec::Zipf(0.0).resolve(Some(4)).unwrap().n_files(), 4);
    }

    #[test]
    fn coverage_examples() {
        let u = PopularityProfile::uniform(2).unwrap();
        // Enumerate the four request pairs: only (2,2) misses file 1.
        let pairs = [(0, 0), (0, 1), (1, 0), (1, 1)];
        let hits = pairs.iter().filter(|(a, b)| *a == 0 || *b == 0).count();
        assert_eq!(u.coverage_prob(0, 2).unwrap(), hits as f64 / 4.0);

        let z = PopularityProfile::from_zipf(5, 1.3).unwrap();
        for n in 0..5 {
            assert!((z.coverage_prob(n, 1).unwrap() - z.probs()[n]).abs() < 1e-16);
        }
        let with_zero = PopularityProfile::from_values(&[1.0, 0.0]).unwrap();
        assert_eq!(with_zero.coverage_prob(1, 7).unwrap(), 0.0);
        assert!(u.coverage_prob(2, 1).is_err());
    }

    proptest! {
        #[test]
        fn coverage_is_monotone_and_bounded(alpha in 0.0f64..3.0, n in 1usize..30, l in 1usize..2000) {
            let p = PopularityProfile::from_zipf(n, alpha).unwrap();
            for k in 0..n {
                let s = p.coverage_prob(k, l).unwrap();
                prop_assert!((0.0..=1.0).contains(&s));
                prop_assert!(p.coverage_prob(k, l + 1).unwrap() >= s);
                if k + 1 < n {
                    prop_assert!(p.coverage_prob(k + 1, l).unwrap() <= s);
                }
            }
        }
    }
}
