//! Exact empirical Wasserstein distances.

use super::SampleSet;
use crate::error::{Error, Result};

/// Largest sample size accepted by the exact assignment solver.
pub const MAX_ASSIGNMENT_POINTS: usize = 4096;

/// `W_q` between two empirical measures with uniform weights.
///
/// One-dimensional samples use the quantile coupling and may differ in size. Otherwise
/// both sets must have the same size `N ≤ 4096` and the optimal matching is computed
/// exactly; the result is the `q`-th root of the mean matched cost `‖a − b‖^q`.
pub fn wasserstein(a: &SampleSet, b: &SampleSet, q: f64) -> Result<f64> {
    if !(q >= 1.0 && q.is_finite()) {
        return Err(Error::param(
            "q",
            format!("must be a finite value ≥ 1, got {q}"),
        ));
    }
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            got: b.dim(),
        });
    }
    if a.dim() == 1 {
        return Ok(quantile_coupling(a, b, q));
    }
    if a.len() != b.len() {
        return Err(Error::UnequalSampleSizes(a.len(), b.len()));
    }
    let n = a.len();
    if n > MAX_ASSIGNMENT_POINTS {
        return Err(Error::TooManySamples {
            n,
            cap: MAX_ASSIGNMENT_POINTS,
        });
    }
    let mut cost = vec![0.0; n * n];
    for (i, x) in a.points().iter().enumerate() {
        for (j, y) in b.points().iter().enumerate() {
            let d = (x - y).norm_squared();
            cost[i * n + j] = if q == 2.0 { d } else { d.sqrt().powf(q) };
        }
    }
    let (_, total) = min_cost_assignment(&cost, n);
    Ok((total.max(0.0) / n as f64).powf(1.0 / q))
}

fn quantile_coupling(a: &SampleSet, b: &SampleSet, q: f64) -> f64 {
    let mut xs: Vec<f64> = a.points().iter().map(|p| p[0]).collect();
    let mut ys: Vec<f64> = b.points().iter().map(|p| p[0]).collect();
    xs.sort_by(f64::total_cmp);
    ys.sort_by(f64::total_cmp);
    let (wa, wb) = (1.0 / xs.len() as f64, 1.0 / ys.len() as f64);
    let (mut i, mut j) = (0, 0);
    let (mut ra, mut rb) = (wa, wb);
    let mut total = 0.0;
    while i < xs.len() && j < ys.len() {
        let mass = ra.min(rb);
        total += mass * (xs[i] - ys[j]).abs().powf(q);
        ra -= mass;
        rb -= mass;
        if ra <= 1e-15 * wa {
            i += 1;
            ra = wa;
        }
        if rb <= 1e-15 * wb {
            j += 1;
            rb = wb;
        }
    }
    total.powf(1.0 / q)
}

/// Hungarian algorithm with row/column potentials on a dense `n × n` row-major cost
/// matrix. Returns the column matched to every row and the total cost.
pub fn min_cost_assignment(cost: &[f64], n: usize) -> (Vec<usize>, f64) {
    assert_eq!(cost.len(), n * n);
    if n == 0 {
        return (Vec::new(), 0.0);
    }
    // 1-based bookkeeping; index 0 is the virtual source column
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut row_of = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    let mut minv = vec![0.0; n + 1];
    let mut used = vec![false; n + 1];
    for i in 1..=n {
        row_of[0] = i;
        let mut j0 = 0;
        minv.iter_mut().for_each(|x| *x = f64::INFINITY);
        used.iter_mut().for_each(|x| *x = false);
        loop {
            used[j0] = true;
            let i0 = row_of[j0];
            let row = &cost[(i0 - 1) * n..i0 * n];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = row[j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[row_of[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if row_of[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            row_of[j0] = row_of[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut col_of = vec![0usize; n];
    for j in 1..=n {
        col_of[row_of[j] - 1] = j - 1;
    }
    let total = col_of
        .iter()
        .enumerate()
        .map(|(i, &j)| cost[i * n + j])
        .sum();
    (col_of, total)
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};

    use super::*;
    use crate::linalg::Vector;
    use crate::random::ChainRng;

    fn set(points: &[&[f64]]) -> SampleSet {
        SampleSet::new(points.iter().map(|p| Vector::from_row_slice(p)).collect()).unwrap()
    }

    fn brute_force(cost: &[f64], n: usize) -> f64 {
        fn rec(cost: &[f64], n: usize, row: usize, used: &mut Vec<bool>, acc: f64, best: &mut f64) {
            if row == n {
                *best = best.min(acc);
                return;
            }
            for j in 0..n {
                if !used[j] {
                    used[j] = true;
                    rec(cost, n, row + 1, used, acc + cost[row * n + j], best);
                    used[j] = false;
                }
            }
        }
        let mut best = f64::INFINITY;
        rec(cost, n, 0, &mut vec![false; n], 0.0, &mut best);
        best
    }

    #[test]
    fn known_values() {
        let a = set(&[&[0.0]]);
        let b = set(&[&[3.0]]);
        assert_eq!(wasserstein(&a, &b, 2.0).unwrap(), 3.0);
        let a = set(&[&[0.0, 0.0], &[1.0, 0.0]]);
        let b = set(&[&[0.0, 1.0], &[1.0, 1.0]]);
        assert!((wasserstein(&a, &b, 2.0).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(wasserstein(&a, &a, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn one_dimensional_unequal_sizes() {
        // uniform on {0, 1} against a point mass at 0.5
        let a = set(&[&[0.0], &[1.0]]);
        let b = set(&[&[0.5]]);
        assert!((wasserstein(&a, &b, 1.0).unwrap() - 0.5).abs() < 1e-15);
        assert!((wasserstein(&a, &b, 2.0).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn errors() {
        let a = set(&[&[0.0, 0.0], &[1.0, 0.0]]);
        let b = set(&[&[0.0, 1.0]]);
        assert!(matches!(
            wasserstein(&a, &b, 2.0),
            Err(Error::UnequalSampleSizes(2, 1))
        ));
        let big = SampleSet::new(vec![Vector::zeros(2); MAX_ASSIGNMENT_POINTS + 1]).unwrap();
        assert!(matches!(
            wasserstein(&big, &big, 2.0),
            Err(Error::TooManySamples { .. })
        ));
    }

    #[test]
    fn assignment_matches_brute_force() {
        let mut rng = ChainRng::seed_from_u64(4);
        for _ in 0..100 {
            let n = rng.random_range(1..=7);
            let cost: Vec<f64> = (0..n * n).map(|_| rng.random_range(0.0..10.0)).collect();
            let (_, total) = min_cost_assignment(&cost, n);
            assert!((total - brute_force(&cost, n)).abs() < 1e-12);
        }
    }
}
