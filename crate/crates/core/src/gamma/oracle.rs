//! Exhaustive alignment search, used to check the matching-based solver.

use super::{unit_dissimilarity, Alignment, DissimilarityConfig, GammaError};
use crate::model::SpanAnnotation;

pub const ORACLE_MAX_UNITS: usize = 6;

/// Enumerate every partial injective pairing and keep the cheapest.
///
/// Enumeration visits, for each left unit in order, right partners in
/// ascending order and then "unaligned"; the first pairing within rounding
/// distance of the minimum is returned, which gives the same tie-breaking as
/// [`super::best_alignment`].
pub fn oracle_best_alignment(left: &[SpanAnnotation], right: &[SpanAnnotation], cfg: &DissimilarityConfig) -> Result<Alignment, GammaError> {
    if left.is_empty() || right.is_empty() {
        return Err(GammaError::EmptySide);
    }
    if left.len() > ORACLE_MAX_UNITS || right.len() > ORACLE_MAX_UNITS {
        return Err(GammaError::TooLarge {
            left: left.len(),
            right: right.len(),
            max: ORACLE_MAX_UNITS,
        });
    }

    let mut all = Vec::new();
    let mut choices = Vec::with_capacity(left.len());
    let mut used = vec![false; right.len()];
    enumerate(left.len(), right.len(), &mut choices, &mut used, &mut all);

    let costed: Vec<(Vec<Option<usize>>, f64)> = all
        .into_iter()
        .map(|c| {
            let cost = cost_of(&c, left, right, cfg);
            (c, cost)
        })
        .collect();
    let min = costed.iter().map(|(_, c)| *c).fold(f64::INFINITY, f64::min);
    let tol = 1e-9 * min.abs().max(cfg.delta_empty).max(1.0);
    let (choices, _) = costed
        .into_iter()
        .find(|(_, c)| *c <= min + tol)
        .expect("at least the all-unaligned pairing exists");

    Ok(Alignment::from_choices(&choices, right.len(), left, right, cfg))
}

fn enumerate(m: usize, n: usize, choices: &mut Vec<Option<usize>>, used: &mut [bool], out: &mut Vec<Vec<Option<usize>>>) {
    if choices.len() == m {
        out.push(choices.clone());
        return;
    }
    for j in 0..n {
        if used[j] {
            continue;
        }
        used[j] = true;
        choices.push(Some(j));
        enumerate(m, n, choices, used, out);
        choices.pop();
        used[j] = false;
    }
    choices.push(None);
    enumerate(m, n, choices, used, out);
    choices.pop();
}

fn cost_of(choices: &[Option<usize>], left: &[SpanAnnotation], right: &[SpanAnnotation], cfg: &DissimilarityConfig) -> f64 {
    let mut cost = 0.0;
    let mut paired = 0;
    for (i, c) in choices.iter().enumerate() {
        match c {
            Some(j) => {
                cost += unit_dissimilarity(&left[i], &right[*j], cfg);
                paired += 1;
            }
            None => cost += cfg.delta_empty,
        }
    }
    cost + cfg.delta_empty * (right.len() - paired) as f64
}

#[cfg(test)]
mod tests {
    use super::super::best_alignment;
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_side(rng: &mut ChaCha8Rng, max: usize) -> Vec<SpanAnnotation> {
        let count = rng.random_range(1..=max);
        (0..count)
            .map(|_| {
                let start = rng.random_range(0..40);
                let len = rng.random_range(1..12);
                SpanAnnotation::new(start, start + len, rng.random_range(0..3))
            })
            .collect()
    }

    #[test]
    fn rejects_large_and_empty_inputs() {
        let s = SpanAnnotation::new(0, 1, 0);
        let big = vec![s.clone(); 7];
        let cfg = DissimilarityConfig::default();
        assert!(matches!(oracle_best_alignment(&big, std::slice::from_ref(&s), &cfg), Err(GammaError::TooLarge { .. })));
        assert_eq!(oracle_best_alignment(&[], &[s], &cfg), Err(GammaError::EmptySide));
    }

    #[test]
    fn agrees_with_solver_on_cost_and_structure() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let cfg = DissimilarityConfig::default();
        for _ in 0..150 {
            let a = random_side(&mut rng, 5);
            let b = random_side(&mut rng, 5);
            let fast = best_alignment(&a, &b, &cfg).unwrap();
            let slow = oracle_best_alignment(&a, &b, &cfg).unwrap();
            assert!((fast.cost - slow.cost).abs() < 1e-9, "{a:?} {b:?}");
            assert_eq!(fast.pairs, slow.pairs, "{a:?} {b:?}");
            assert!(fast.is_partition(a.len(), b.len()));
            assert_eq!(fast.cost, fast.recompute_cost(&a, &b, &cfg));
        }
    }
}
