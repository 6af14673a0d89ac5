//! Complete contractions: `Σ_k j((Su − Sû)_k) ≤ Σ_k j((u − û)_k)` for every
//! convex, lower semicontinuous `j: ℝ → [0, ∞]` with `j(0) = 0`, sampled on a
//! finite family of such `j`.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hilbert::HVector;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum NormalContraction {
    /// `[r]⁺^q`.
    PositivePartPower(f64),
    /// `|r|^q`.
    AbsolutePower(f64),
    /// `[|r| − k]⁺`.
    TruncatedPositivePart(f64),
}

impl NormalContraction {
    pub fn validate(&self) -> Result<()> {
        match *self {
            NormalContraction::PositivePartPower(q) | NormalContraction::AbsolutePower(q)
                if !(q >= 1.0) || !q.is_finite() =>
            {
                Err(Error::param("q", format!("must be at least 1, got {q}")))
            }
            NormalContraction::TruncatedPositivePart(k) if !(k >= 0.0) || !k.is_finite() => {
                Err(Error::param("k", format!("must be nonnegative, got {k}")))
            }
            _ => Ok(()),
        }
    }

    pub fn eval(&self, r: f64) -> f64 {
        match *self {
            NormalContraction::PositivePartPower(q) => r.max(0.0).powf(q),
            NormalContraction::AbsolutePower(q) => r.abs().powf(q),
            NormalContraction::TruncatedPositivePart(k) => (r.abs() - k).max(0.0),
        }
    }

    pub fn name(&self) -> String {
        match *self {
            NormalContraction::PositivePartPower(q) => format!("positive_part^{q}"),
            NormalContraction::AbsolutePower(q) => format!("abs^{q}"),
            NormalContraction::TruncatedPositivePart(k) => format!("truncated({k})"),
        }
    }

    /// Samples `j(0) = 0`, nonnegativity and midpoint convexity on `[−10, 10]`.
    pub fn sample_check(&self) -> bool {
        if self.eval(0.0) != 0.0 {
            return false;
        }
        let xs: Vec<f64> = (0..=200).map(|i| -10.0 + 0.1 * i as f64).collect();
        xs.iter().all(|&x| self.eval(x) >= 0.0)
            && xs
                .windows(3)
                .all(|w| self.eval(w[1]) <= 0.5 * (self.eval(w[0]) + self.eval(w[2])) + 1e-12)
    }

    /// The family used by default: `[r]⁺²`, `|r|`, `[|r| − 0.1]⁺`, `[|r| − 1]⁺`.
    pub fn standard_set() -> Vec<NormalContraction> {
        vec![
            NormalContraction::PositivePartPower(2.0),
            NormalContraction::AbsolutePower(1.0),
            NormalContraction::TruncatedPositivePart(0.1),
            NormalContraction::TruncatedPositivePart(1.0),
        ]
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct MarginRecord {
    pub name: String,
    /// Smallest `bound − measured` over the sampled pairs.
    pub worst_margin: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct CompleteContractionReport {
    pub instances: usize,
    pub per_j: Vec<MarginRecord>,
    /// Over pairs with `u ≤ û`: the smallest component of `Sû − Su`.
    pub order_preservation: MarginRecord,
    pub l1: MarginRecord,
    pub linf: MarginRecord,
    pub tolerance: f64,
}

impl CompleteContractionReport {
    pub fn pass(&self) -> bool {
        self.per_j.iter().all(|r| r.pass)
            && self.order_preservation.pass
            && self.l1.pass
            && self.linf.pass
    }

    pub fn worst_margin(&self) -> f64 {
        self.per_j
            .iter()
            .chain([&self.order_preservation, &self.l1, &self.linf])
            .map(|r| r.worst_margin)
            .fold(f64::INFINITY, f64::min)
    }
}

fn record(name: &str, worst: f64, tol: f64) -> MarginRecord {
    MarginRecord {
        name: name.to_string(),
        worst_margin: worst,
        pass: worst >= -tol,
    }
}

/// Checks the complete-contraction inequalities of `map` over `pairs`.
///
/// `images` must hold `(S u, S û)` for each pair, so callers can evaluate
/// the map however they like (in parallel, with warm starts, ...).
pub fn check_complete_contraction(
    pairs: &[(HVector, HVector)],
    images: &[(HVector, HVector)],
    j_set: &[NormalContraction],
    tolerance: f64,
) -> Result<CompleteContractionReport> {
    if pairs.len() != images.len() {
        return Err(Error::DimensionMismatch {
            expected: pairs.len(),
            found: images.len(),
        });
    }
    for j in j_set {
        j.validate()?;
    }
    let total = |j: &NormalContraction, d: &HVector| d.iter().map(|&r| j.eval(r)).sum::<f64>();
    let mut per_j = vec![f64::INFINITY; j_set.len()];
    let (mut order, mut l1, mut linf) = (f64::INFINITY, f64::INFINITY, f64::INFINITY);
    for ((u, uh), (su, suh)) in pairs.iter().zip(images) {
        let d_in = u - uh;
        let d_out = su - suh;
        for (k, j) in j_set.iter().enumerate() {
            per_j[k] = per_j[k].min(total(j, &d_in) - total(j, &d_out));
        }
        l1 = l1.min(d_in.lp_norm(1) - d_out.lp_norm(1));
        linf = linf.min(d_in.amax() - d_out.amax());
        if d_in.iter().all(|&r| r <= 0.0) {
            order = order.min(-d_out.max());
        } else if d_in.iter().all(|&r| r >= 0.0) {
            order = order.min(d_out.min());
        }
    }
    let fix = |x: f64| if x.is_finite() { x } else { 0.0 };
    Ok(CompleteContractionReport {
        instances: pairs.len(),
        per_j: j_set
            .iter()
            .zip(&per_j)
            .map(|(j, &m)| record(&j.name(), fix(m), tolerance))
            .collect(),
        order_preservation: record("order_preservation", fix(order), tolerance),
        l1: record("l1_nonexpansive", fix(l1), tolerance),
        linf: record("linf_nonexpansive", fix(linf), tolerance),
        tolerance,
    })
}

/// Convenience wrapper evaluating `map` sequentially.
pub fn check_map_complete_contraction(
    map: impl Fn(&HVector) -> Result<HVector>,
    pairs: &[(HVector, HVector)],
    j_set: &[NormalContraction],
    tolerance: f64,
) -> Result<CompleteContractionReport> {
    let images = pairs
        .iter()
        .map(|(a, b)| Ok((map(a)?, map(b)?)))
        .collect::<Result<Vec<_>>>()?;
    check_complete_contraction(pairs, &images, j_set, tolerance)
}

/// Random pairs: standard normal entries with a random amplitude, norms capped
/// at 10; every other pair is ordered, `(u, u + nonnegative perturbation)`.
pub fn sample_pairs(dim: usize, count: usize, rng: &mut impl Rng) -> Vec<(HVector, HVector)> {
    (0..count)
        .map(|k| {
            let u = sample_vector(dim, rng);
            let other = if k % 2 == 0 {
                sample_vector(dim, rng)
            } else {
                &u + sample_vector(dim, rng).abs()
            };
            (u, other)
        })
        .collect()
}

fn sample_vector(dim: usize, rng: &mut impl Rng) -> HVector {
    let amp: f64 = rng.random_range(0.1..3.0);
    let mut v = HVector::from_fn(dim, |_, _| {
        let x: f64 = StandardNormal.sample(rng);
        amp * x
    });
    let n = v.norm();
    if n > 10.0 {
        v *= 10.0 / n;
    }
    v
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    #[test]
    fn family_is_normal() {
        for j in NormalContraction::standard_set() {
            assert!(j.sample_check(), "{}", j.name());
        }
        assert!(NormalContraction::AbsolutePower(0.5).validate().is_err());
    }

    #[test]
    fn identity_passes() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pairs = sample_pairs(5, 40, &mut rng);
        let rep = check_map_complete_contraction(
            |u| Ok(u.clone()),
            &pairs,
            &NormalContraction::standard_set(),
            1e-12,
        )
        .unwrap();
        assert!(rep.pass());
        assert_eq!(rep.worst_margin(), 0.0);
    }

    #[test]
    fn sign_flip_breaks_order() {
        let pairs = vec![(
            HVector::from_vec(vec![0.0, 0.0]),
            HVector::from_vec(vec![1.0, 1.0]),
        )];
        let rep = check_map_complete_contraction(
            |u| Ok(-u),
            &pairs,
            &NormalContraction::standard_set(),
            1e-12,
        )
        .unwrap();
        assert!(!rep.order_preservation.pass);
        assert!(!rep.pass());
        // the positive part sees the flip too
        assert!(!rep.per_j[0].pass);
    }

    #[test]
    fn averaging_is_a_complete_contraction() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let pairs = sample_pairs(4, 100, &mut rng);
        let avg = |u: &HVector| Ok(HVector::from_element(u.len(), u.mean()));
        let rep =
            check_map_complete_contraction(avg, &pairs, &NormalContraction::standard_set(), 1e-12)
                .unwrap();
        assert!(rep.pass(), "{rep:?}");
    }

    #[test]
    fn samples_are_reproducible_and_bounded() {
        let a = sample_pairs(3, 10, &mut ChaCha8Rng::seed_from_u64(5));
        let b = sample_pairs(3, 10, &mut ChaCha8Rng::seed_from_u64(5));
        assert_eq!(a, b);
        assert!(a.iter().all(|(u, _)| u.norm() <= 10.0));
        assert!(a[1].1.iter().zip(a[1].0.iter()).all(|(x, y)| x >= y));
    }
}
