//! Maximum-weight assignment on a dense weight matrix.

/// Solves max-weight assignment for an n x m matrix (rows = first token list).
///
/// Every row is matched to a distinct column when n <= m (the matrix is
/// transposed internally otherwise). With non-negative weights a full matching
/// of the smaller side is also the best partial matching, so the returned sum
/// is the maximum over all one-to-one pairings. Returns the total weight.
pub fn max_weight_assignment(weights: &[Vec<f64>]) -> f64 {
    let n = weights.len();
    if n == 0 {
        return 0.0;
    }
    let m = weights[0].len();
    if m == 0 {
        return 0.0;
    }
    if n > m {
        let mut t = vec![vec![0.0; n]; m];
        for (i, row) in weights.iter().enumerate() {
            for (j, w) in row.iter().enumerate() {
                t[j][i] = *w;
            }
        }
        return max_weight_assignment(&t);
    }

    let assignment = min_cost_assignment(n, m, |i, j| -weights[i][j]);
    assignment
        .iter()
        .enumerate()
        .map(|(i, &j)| weights[i][j])
        .sum()
}

/// Hungarian algorithm with potentials, O(n^2 * m), n <= m.
/// Returns for each row the column it is assigned to.
fn min_cost_assignment(n: usize, m: usize, cost: impl Fn(usize, usize) -> f64) -> Vec<usize> {
    assert!(n <= m);
    // 1-based arrays with column 0 as the virtual start column.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    let mut row_of = vec![0usize; m + 1]; // row assigned to column j, 0 = free
    let mut way = vec![0usize; m + 1];

    for i in 1..=n {
        row_of[0] = i;
        let mut j0 = 0usize;
        let mut min_to = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = row_of[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if cur < min_to[j] {
                    min_to[j] = cur;
                    way[j] = j0;
                }
                if min_to[j] < delta {
                    delta = min_to[j];
                    j1 = j;
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[row_of[j]] += delta;
                    v[j] -= delta;
                } else {
                    min_to[j] -= delta;
                }
            }
            j0 = j1;
            if row_of[j0] == 0 {
                break;
            }
        }
        // Augment along the found alternating path.
        loop {
            let j1 = way[j0];
            row_of[j0] = row_of[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut result = vec![0usize; n];
    for j in 1..=m {
        if row_of[j] > 0 {
            result[row_of[j] - 1] = j - 1;
        }
    }
    result
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_force(weights: &[Vec<f64>]) -> f64 {
        fn go(weights: &[Vec<f64>], i: usize, used: u32) -> f64 {
            if i == weights.len() {
                return 0.0;
            }
            // Skipping a row can never beat matching it when weights are
            // non-negative, but enumerate it anyway: the oracle covers the
            // general partial-injection maximum.
            let mut best = go(weights, i + 1, used);
            for (j, w) in weights[i].iter().enumerate() {
                if used & (1 << j) == 0 {
                    best = best.max(w + go(weights, i + 1, used | (1 << j)));
                }
            }
            best
        }
        go(weights, 0, 0)
    }

    #[test]
    fn known_square_case() {
        let w = vec![
            vec![1.0, 2.0, 3.0],
            vec![3.0, 3.0, 1.0],
            vec![3.0, 1.0, 2.0],
        ];
        assert_eq!(max_weight_assignment(&w), 9.0);
    }

    #[test]
    fn rectangular_both_orientations() {
        let w = vec![vec![0.5, 0.9, 0.1], vec![0.8, 0.9, 0.2]];
        let expected = brute_force(&w);
        assert!((max_weight_assignment(&w) - expected).abs() < 1e-12);
        let t = vec![vec![0.5, 0.8], vec![0.9, 0.9], vec![0.1, 0.2]];
        assert!((max_weight_assignment(&t) - expected).abs() < 1e-12);
    }

    #[test]
    fn degenerate_sizes() {
        assert_eq!(max_weight_assignment(&[]), 0.0);
        assert_eq!(max_weight_assignment(&[vec![]]), 0.0);
        assert_eq!(max_weight_assignment(&[vec![0.7]]), 0.7);
    }

    #[test]
    fn random_matrices_match_brute_force() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(41);
        for _ in 0..200 {
            let n = rng.random_range(1..=5);
            let m = rng.random_range(1..=5);
            let w: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..m).map(|_| rng.random_range(0.0..1.0)).collect())
                .collect();
            let expected = brute_force(&w);
            assert!(
                (max_weight_assignment(&w) - expected).abs() < 1e-9,
                "mismatch on {w:?}"
            );
        }
    }
}
