//! Single-link clustering over binarized pairwise match decisions, and the
//! evaluation metrics: cluster recall and pairwise precision/recall/F1.

use std::collections::HashMap;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ClusterError {
    #[error("edge ({0}, {1}) is out of range for {2} items")]
    EdgeOutOfRange(usize, usize, usize),
}

/// A partition of items 0..n. Cluster ids are canonical: each cluster is
/// identified by its smallest member.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Clustering {
    assignment: Vec<usize>,
}

struct UnionFind {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> UnionFind {
        UnionFind {
            parent: (0..n).collect(),
            size: vec![1; n],
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, x: usize, y: usize) {
        let (mut a, mut b) = (self.find(x), self.find(y));
        if a == b {
            return;
        }
        if self.size[a] < self.size[b] {
            std::mem::swap(&mut a, &mut b);
        }
        self.parent[b] = a;
        self.size[a] += self.size[b];
    }
}

impl Clustering {
    /// Builds a clustering from arbitrary per-item labels; equal labels mean
    /// same cluster. Ids are canonicalized to smallest members.
    pub fn from_labels(labels: &[usize]) -> Clustering {
        let mut canonical: HashMap<usize, usize> = HashMap::new();
        let mut assignment = vec![0; labels.len()];
        for (item, &label) in labels.iter().enumerate() {
            let id = *canonical.entry(label).or_insert(item);
            assignment[item] = id;
        }
        Clustering { assignment }
    }

    /// item-id -> canonical cluster id.
    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn len(&self) -> usize {
        self.assignment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignment.is_empty()
    }

    /// Clusters as sorted member lists, ordered by canonical id.
    pub fn clusters(&self) -> Vec<Vec<usize>> {
        let mut by_id: HashMap<usize, Vec<usize>> = HashMap::new();
        for (item, &id) in self.assignment.iter().enumerate() {
            by_id.entry(id).or_default().push(item);
        }
        let mut out: Vec<Vec<usize>> = by_id.into_values().collect();
        out.sort_by_key(|members| members[0]);
        out
    }
}

/// Connected components of the match graph: two items share a cluster iff
/// they are connected by edges.
pub fn single_link(n: usize, edges: &[(usize, usize)]) -> Result<Clustering, ClusterError> {
    let mut uf = UnionFind::new(n);
    for &(i, j) in edges {
        if i >= j || j >= n {
            return Err(ClusterError::EdgeOutOfRange(i, j, n));
        }
        uf.union(i, j);
    }
    // Canonicalize roots to smallest members.
    let mut smallest: HashMap<usize, usize> = HashMap::new();
    for item in 0..n {
        let root = uf.find(item);
        smallest.entry(root).or_insert(item);
    }
    let assignment = (0..n).map(|item| smallest[&uf.find(item)]).collect();
    Ok(Clustering { assignment })
}

/// Fraction of gold clusters recovered exactly (as sets) in the prediction.
/// An empty gold clustering counts as fully recovered.
pub fn cluster_recall(gold: &Clustering, pred: &Clustering) -> f64 {
    assert_eq!(gold.len(), pred.len(), "clusterings must cover the same items");
    let gold_clusters = gold.clusters();
    if gold_clusters.is_empty() {
        return 1.0;
    }
    let mut pred_sizes: HashMap<usize, usize> = HashMap::new();
    for &id in pred.assignment() {
        *pred_sizes.entry(id).or_insert(0) += 1;
    }
    let recovered = gold_clusters
        .iter()
        .filter(|members| {
            let pid = pred.assignment()[members[0]];
            members.iter().all(|&m| pred.assignment()[m] == pid)
                && pred_sizes[&pid] == members.len()
        })
        .count();
    recovered as f64 / gold_clusters.len() as f64
}

/// Pairwise link metrics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairwiseMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Precision/recall/F1 over co-membership links.
///
/// 0/0 conventions: precision is 1 when no links are predicted, recall is 1
/// when the gold has no links, and F1 is 0 when both components are 0. These
/// make precision(gold, pred) = recall(pred, gold) hold everywhere.
pub fn pairwise_metrics(gold: &Clustering, pred: &Clustering) -> PairwiseMetrics {
    assert_eq!(gold.len(), pred.len(), "clusterings must cover the same items");
    let pairs = |sizes: &HashMap<usize, usize>| -> u64 {
        sizes.values().map(|&c| (c as u64) * (c as u64 - 1) / 2).sum()
    };
    let mut gold_sizes: HashMap<usize, usize> = HashMap::new();
    let mut pred_sizes: HashMap<usize, usize> = HashMap::new();
    let mut cell_sizes: HashMap<(usize, usize), usize> = HashMap::new();
    for item in 0..gold.len() {
        let g = gold.assignment()[item];
        let p = pred.assignment()[item];
        *gold_sizes.entry(g).or_insert(0) += 1;
        *pred_sizes.entry(p).or_insert(0) += 1;
        *cell_sizes.entry((g, p)).or_insert(0) += 1;
    }
    let gold_links = pairs(&gold_sizes);
    let pred_links = pairs(&pred_sizes);
    let correct: u64 = cell_sizes
        .values()
        .map(|&c| (c as u64) * (c as u64 - 1) / 2)
        .sum();

    let precision = if pred_links == 0 {
        1.0
    } else {
        correct as f64 / pred_links as f64
    };
    let recall = if gold_links == 0 {
        1.0
    } else {
        correct as f64 / gold_links as f64
    };
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    PairwiseMetrics {
        precision,
        recall,
        f1,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn clustering(groups: &[&[usize]]) -> Clustering {
        let n: usize = groups.iter().map(|g| g.len()).sum();
        let mut labels = vec![0usize; n];
        for (c, group) in groups.iter().enumerate() {
            for &item in *group {
                labels[item] = c;
            }
        }
        Clustering::from_labels(&labels)
    }

    #[test]
    fn single_link_basic() {
        let c = single_link(3, &[(0, 1)]).unwrap();
        assert_eq!(c.clusters(), vec![vec![0, 1], vec![2]]);

        let c = single_link(4, &[(0, 1), (1, 2)]).unwrap();
        assert_eq!(c.clusters(), vec![vec![0, 1, 2], vec![3]]);
    }

    #[test]
    fn single_link_rejects_bad_edges() {
        assert!(single_link(3, &[(0, 3)]).is_err());
        assert!(single_link(3, &[(1, 1)]).is_err());
        assert!(single_link(3, &[(2, 1)]).is_err());
    }

    #[test]
    fn single_link_matches_bfs_on_random_graphs() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        for _ in 0..100 {
            let n = rng.random_range(1..=12);
            let mut edges = Vec::new();
            for i in 0..n {
                for j in (i + 1)..n {
                    if rng.random_bool(0.2) {
                        edges.push((i, j));
                    }
                }
            }
            let got = single_link(n, &edges).unwrap();
            // BFS reachability oracle.
            let mut adj = vec![Vec::new(); n];
            for &(i, j) in &edges {
                adj[i].push(j);
                adj[j].push(i);
            }
            let mut component = vec![usize::MAX; n];
            for start in 0..n {
                if component[start] != usize::MAX {
                    continue;
                }
                let mut queue = vec![start];
                component[start] = start;
                while let Some(v) = queue.pop() {
                    for &w in &adj[v] {
                        if component[w] == usize::MAX {
                            component[w] = start;
                            queue.push(w);
                        }
                    }
                }
            }
            assert_eq!(got.assignment(), component.as_slice());
        }
    }

    #[test]
    fn edge_order_does_not_matter() {
        let edges = vec![(0, 1), (2, 3), (1, 2), (4, 5)];
        let a = single_link(6, &edges).unwrap();
        let mut rev = edges.clone();
        rev.reverse();
        let b = single_link(6, &rev).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn cluster_recall_values() {
        let gold = clustering(&[&[0, 1], &[2]]);
        assert_eq!(cluster_recall(&gold, &gold), 1.0);

        let singletons = clustering(&[&[0], &[1], &[2]]);
        assert_eq!(cluster_recall(&gold, &singletons), 0.5);

        let giant = clustering(&[&[0, 1, 2]]);
        assert_eq!(cluster_recall(&singletons, &giant), 0.0);
    }

    #[test]
    fn pairwise_metric_values() {
        let gold = clustering(&[&[0, 1, 2]]);
        let m = pairwise_metrics(&gold, &gold);
        assert_eq!((m.precision, m.recall, m.f1), (1.0, 1.0, 1.0));

        let pred = clustering(&[&[0, 1], &[2]]);
        let m = pairwise_metrics(&gold, &pred);
        assert_eq!(m.precision, 1.0);
        assert!((m.recall - 1.0 / 3.0).abs() < 1e-12);
        assert!((m.f1 - 0.5).abs() < 1e-12);

        let singletons = clustering(&[&[0], &[1], &[2]]);
        let m = pairwise_metrics(&gold, &singletons);
        assert_eq!(m.recall, 0.0);
        assert_eq!(m.precision, 1.0);
        assert_eq!(m.f1, 0.0);
    }

    #[test]
    fn precision_recall_duality() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(23);
        for _ in 0..50 {
            let n = rng.random_range(1..=15);
            let a: Vec<usize> = (0..n).map(|_| rng.random_range(0..4)).collect();
            let b: Vec<usize> = (0..n).map(|_| rng.random_range(0..4)).collect();
            let ca = Clustering::from_labels(&a);
            let cb = Clustering::from_labels(&b);
            let ab = pairwise_metrics(&ca, &cb);
            let ba = pairwise_metrics(&cb, &ca);
            assert!((ab.precision - ba.recall).abs() < 1e-12);
            assert!((ab.recall - ba.precision).abs() < 1e-12);
        }
    }
}
