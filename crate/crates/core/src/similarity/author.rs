//! Author-field similarity: the simple token/trigram pair and the
//! assignment-based measure over position-aligned token lists.

use super::hungarian::max_weight_assignment;
use super::{sim_token, sim_trigram, token_pair_similarity};

/// Normalized token positions for two token lists.
///
/// Each list is laid out on [0, 1] with token i of n initially at (i + 0.5)/n.
/// Exactly-equal tokens (case-insensitive), matched greedily left to right
/// without reuse and without crossings, become boundaries: both positions are
/// replaced by their average, so a boundary pair has distance exactly 0.
/// Virtual boundaries sit at 0 and 1. Every other token is rescaled linearly
/// within its enclosing boundary interval, which keeps positions in [0, 1]
/// and non-decreasing in token order.
pub fn boundary_positions<S: AsRef<str>, T: AsRef<str>>(
    tokens_a: &[S],
    tokens_b: &[T],
) -> (Vec<f64>, Vec<f64>) {
    let lower_a: Vec<String> = tokens_a.iter().map(|t| t.as_ref().to_lowercase()).collect();
    let lower_b: Vec<String> = tokens_b.iter().map(|t| t.as_ref().to_lowercase()).collect();

    // The greedy scan below is led by its first argument, which is not
    // symmetric under swapping the lists. Canonicalize the argument order so
    // that boundary_positions(b, a) is exactly the swap of (a, b).
    if lower_a > lower_b {
        let (pb, pa) = positions_ordered(&lower_b, &lower_a);
        return (pa, pb);
    }
    positions_ordered(&lower_a, &lower_b)
}

fn positions_ordered(lower_a: &[String], lower_b: &[String]) -> (Vec<f64>, Vec<f64>) {
    let initial = |i: usize, n: usize| (i as f64 + 0.5) / n as f64;

    // Greedy non-crossing matching: each match resumes the scan of the other
    // list right after the previously matched token.
    let mut pairs: Vec<(usize, usize)> = Vec::new();
    let mut next_b = 0usize;
    for (i, a) in lower_a.iter().enumerate() {
        if next_b >= lower_b.len() {
            break;
        }
        if let Some(off) = lower_b[next_b..].iter().position(|b| b == a) {
            pairs.push((i, next_b + off));
            next_b += off + 1;
        }
    }

    let place = |n: usize, indices: &[usize], averages: &[f64]| -> Vec<f64> {
        // Boundary anchors in (initial, final) coordinates, including the
        // virtual ends at 0 and 1.
        let mut anchors = Vec::with_capacity(indices.len() + 2);
        anchors.push((0.0, 0.0));
        for (&idx, &avg) in indices.iter().zip(averages) {
            anchors.push((initial(idx, n), avg));
        }
        anchors.push((1.0, 1.0));

        let mut out = Vec::with_capacity(n);
        let mut seg = 0usize;
        let mut boundary = 0usize;
        for i in 0..n {
            if boundary < indices.len() && indices[boundary] == i {
                out.push(averages[boundary]);
                boundary += 1;
                continue;
            }
            let p = initial(i, n);
            while seg + 1 < anchors.len() && anchors[seg + 1].0 <= p {
                seg += 1;
            }
            let (l, l2) = anchors[seg];
            let (r, r2) = anchors[seg + 1];
            out.push(l2 + (p - l) * (r2 - l2) / (r - l));
        }
        out
    };

    let averages: Vec<f64> = pairs
        .iter()
        .map(|&(i, j)| (initial(i, lower_a.len()) + initial(j, lower_b.len())) / 2.0)
        .collect();
    let a_idx: Vec<usize> = pairs.iter().map(|p| p.0).collect();
    let b_idx: Vec<usize> = pairs.iter().map(|p| p.1).collect();

    (
        place(lower_a.len(), &a_idx, &averages),
        place(lower_b.len(), &b_idx, &averages),
    )
}

/// Assignment-based author similarity.
///
/// Pair weight is token similarity scaled down by the positional distance,
/// w(i,j) = sim(a_i, b_j) * (1 - |pos(a_i) - pos(b_j)|); the maximum-weight
/// one-to-one matching is normalized by the longer list. Comparison is
/// case-insensitive. Two empty lists score 1, exactly one empty scores 0.
pub fn sim_author_complex<S: AsRef<str>, T: AsRef<str>>(tokens_a: &[S], tokens_b: &[T]) -> f64 {
    if tokens_a.is_empty() && tokens_b.is_empty() {
        return 1.0;
    }
    if tokens_a.is_empty() || tokens_b.is_empty() {
        return 0.0;
    }
    let weights = author_pair_weights(tokens_a, tokens_b);
    let total = max_weight_assignment(&weights);
    total / tokens_a.len().max(tokens_b.len()) as f64
}

/// The pair-weight matrix used by [`sim_author_complex`].
///
/// Exposed so the matching step can be checked against an exhaustive search
/// over the same weights.
pub fn author_pair_weights<S: AsRef<str>, T: AsRef<str>>(
    tokens_a: &[S],
    tokens_b: &[T],
) -> Vec<Vec<f64>> {
    let (pos_a, pos_b) = boundary_positions(tokens_a, tokens_b);
    tokens_a
        .iter()
        .zip(&pos_a)
        .map(|(a, &pa)| {
            let a = a.as_ref().to_lowercase();
            tokens_b
                .iter()
                .zip(&pos_b)
                .map(|(b, &pb)| {
                    let b = b.as_ref().to_lowercase();
                    token_pair_similarity(&a, &b) * (1.0 - (pa - pb).abs())
                })
                .collect()
        })
        .collect()
}

/// The basic author similarity: token and trigram similarity of the
/// space-joined author texts, both case-insensitive.
pub fn sim_author_simple(a_text: &str, b_text: &str) -> (f64, f64) {
    (
        sim_token(a_text, b_text),
        sim_trigram(&a_text.to_lowercase(), &b_text.to_lowercase()),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(words: &[&str]) -> Vec<String> {
        words.iter().map(|w| w.to_string()).collect()
    }

    #[test]
    fn identical_lists_are_all_boundaries() {
        let a = toks(&["john", "smith"]);
        let (pa, pb) = boundary_positions(&a, &a);
        assert_eq!(pa, pb);
        for (x, y) in pa.iter().zip(&pb) {
            assert_eq!(x, y);
        }
    }

    #[test]
    fn no_common_tokens_keeps_initial_positions() {
        let a = toks(&["x", "y"]);
        let b = toks(&["q"]);
        let (pa, pb) = boundary_positions(&a, &b);
        assert_eq!(pa, vec![0.25, 0.75]);
        assert_eq!(pb, vec![0.5]);
    }

    #[test]
    fn shared_token_is_averaged() {
        // A = [x, q], B = [q]: q sits at 0.75 in A and 0.5 in B, so both move
        // to 0.625; x is rescaled inside the (0, 0.75) -> (0, 0.625) interval.
        let a = toks(&["x", "q"]);
        let b = toks(&["q"]);
        let (pa, pb) = boundary_positions(&a, &b);
        assert!((pa[1] - 0.625).abs() < 1e-12);
        assert!((pb[0] - 0.625).abs() < 1e-12);
        assert!((pa[0] - 0.25 * 0.625 / 0.75).abs() < 1e-12);
    }

    #[test]
    fn boundary_matching_is_case_insensitive() {
        let a = toks(&["Smith"]);
        let b = toks(&["SMITH"]);
        let (pa, pb) = boundary_positions(&a, &b);
        assert_eq!(pa[0], pb[0]);
    }

    #[test]
    fn identical_authors_score_one() {
        let a = toks(&["john", "smith", "jane", "doe"]);
        assert!((sim_author_complex(&a, &a) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn swapped_given_names_score_below_one() {
        // John Smith + Jane Doe vs Jane Smith + John Doe: every token exists
        // on both sides, but the positional penalty separates the two papers.
        let a = toks(&["John", "Smith", "Jane", "Doe"]);
        let b = toks(&["Jane", "Smith", "John", "Doe"]);
        let s = sim_author_complex(&a, &b);
        assert!(s < 1.0, "got {s}");
        assert!(s > 0.5, "got {s}");
    }

    #[test]
    fn empty_cases() {
        let none: Vec<String> = vec![];
        let some = toks(&["smith"]);
        assert_eq!(sim_author_complex(&none, &none), 1.0);
        assert_eq!(sim_author_complex(&none, &some), 0.0);
        assert_eq!(sim_author_complex(&some, &none), 0.0);
    }

    #[test]
    fn simple_author_similarity() {
        assert_eq!(sim_author_simple("J Smith", "J Smith"), (1.0, 1.0));
        let (tok, tri) = sim_author_simple("Smith J", "J Smith");
        assert_eq!(tok, 1.0);
        assert!(tri < 1.0);
        assert_eq!(sim_author_simple("Brown", "Xu"), (0.0, 0.0));
    }

    proptest::proptest! {
        #[test]
        fn positions_are_sorted_and_in_unit_interval(
            a in proptest::collection::vec("[a-c]{1,3}", 0..8),
            b in proptest::collection::vec("[a-c]{1,3}", 0..8),
        ) {
            let (pa, pb) = boundary_positions(&a, &b);
            for w in [&pa, &pb] {
                for &p in w.iter() {
                    proptest::prop_assert!((0.0..=1.0).contains(&p));
                }
                for pair in w.windows(2) {
                    proptest::prop_assert!(pair[0] <= pair[1] + 1e-12);
                }
            }
        }

        #[test]
        fn positions_swap_under_argument_swap(
            a in proptest::collection::vec("[a-c]{1,3}", 0..8),
            b in proptest::collection::vec("[a-c]{1,3}", 0..8),
        ) {
            let (pa, pb) = boundary_positions(&a, &b);
            let (qb, qa) = boundary_positions(&b, &a);
            proptest::prop_assert_eq!(pa, qa);
            proptest::prop_assert_eq!(pb, qb);
        }

        #[test]
        fn complex_similarity_symmetric_and_bounded(
            a in proptest::collection::vec("[a-d]{1,4}", 0..6),
            b in proptest::collection::vec("[a-d]{1,4}", 0..6),
        ) {
            let s1 = sim_author_complex(&a, &b);
            let s2 = sim_author_complex(&b, &a);
            proptest::prop_assert!((s1 - s2).abs() < 1e-9);
            proptest::prop_assert!((0.0..=1.0 + 1e-12).contains(&s1));
        }
    }
}
