use super::SparseMatrix;

/// Connected components of the bipartite graph with `m` source (row) nodes
/// and `n` sink (column) nodes, with an edge `(i, j)` whenever `V_ij > 0`.
///
/// Labels are `0..count`, assigned in order of first appearance scanning
/// rows first, then columns.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComponentLabels {
    pub row_label: Vec<usize>,
    pub col_label: Vec<usize>,
    pub count: usize,
}

struct DisjointSet {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl DisjointSet {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            rank: vec![0; n],
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return;
        }
        match self.rank[ra].cmp(&self.rank[rb]) {
            std::cmp::Ordering::Less => self.parent[ra] = rb,
            std::cmp::Ordering::Greater => self.parent[rb] = ra,
            std::cmp::Ordering::Equal => {
                self.parent[rb] = ra;
                self.rank[ra] += 1;
            }
        }
    }
}

pub fn connected_components(v: &SparseMatrix) -> ComponentLabels {
    connected_components_from_edges(
        v.rows(),
        v.cols(),
        v.iter().filter(|e| e.2 > 0.0).map(|(i, j, _)| (i, j)),
    )
}

pub(crate) fn connected_components_from_edges(
    m: usize,
    n: usize,
    edges: impl Iterator<Item = (usize, usize)>,
) -> ComponentLabels {
    let mut ds = DisjointSet::new(m + n);
    for (i, j) in edges {
        ds.union(i, m + j);
    }
    let mut root_label = vec![usize::MAX; m + n];
    let mut count = 0;
    let mut labels = vec![0usize; m + n];
    for (node, label) in labels.iter_mut().enumerate() {
        let r = ds.find(node);
        if root_label[r] == usize::MAX {
            root_label[r] = count;
            count += 1;
        }
        *label = root_label[r];
    }
    let col_label = labels.split_off(m);
    ComponentLabels {
        row_label: labels,
        col_label,
        count,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn dense(m: usize, n: usize, rows: &[&[f64]]) -> SparseMatrix {
        let mut cm = vec![0.0; m * n];
        for i in 0..m {
            for j in 0..n {
                cm[j * m + i] = rows[i][j];
            }
        }
        SparseMatrix::from_col_major(m, n, &cm).unwrap()
    }

    #[test]
    fn identity_pattern_gives_two_components() {
        let c = connected_components(&dense(2, 2, &[&[1., 0.], &[0., 1.]]));
        assert_eq!(c.count, 2);
        assert_eq!(c.row_label, vec![0, 1]);
        assert_eq!(c.col_label, vec![0, 1]);
    }

    #[test]
    fn block_diagonal_gives_two_components() {
        let v = dense(
            4,
            3,
            &[&[1., 2., 0.], &[3., 1., 0.], &[0., 0., 5.], &[0., 0., 1.]],
        );
        let c = connected_components(&v);
        assert_eq!(c.count, 2);
        assert_eq!(c.row_label, vec![0, 0, 1, 1]);
        assert_eq!(c.col_label, vec![0, 0, 1]);
    }

    #[test]
    fn all_positive_is_connected() {
        let c = connected_components(&dense(2, 3, &[&[1., 1., 1.], &[1., 1., 1.]]));
        assert_eq!(c.count, 1);
    }

    #[test]
    fn isolated_nodes_are_singletons() {
        let c = connected_components(&dense(2, 2, &[&[0., 0.], &[0., 0.]]));
        assert_eq!(c.count, 4);
    }

    fn same_partition(a: &ComponentLabels, b_rows: &[usize], b_cols: &[usize]) -> bool {
        let la: Vec<usize> = a.row_label.iter().chain(&a.col_label).copied().collect();
        let lb: Vec<usize> = b_rows.iter().chain(b_cols).copied().collect();
        (0..la.len()).all(|x| (0..la.len()).all(|y| (la[x] == la[y]) == (lb[x] == lb[y])))
    }

    proptest! {
        #[test]
        fn invariant_under_permutation(
            m in 1usize..7, n in 1usize..7,
            bits in proptest::collection::vec(any::<bool>(), 36),
            seed in any::<u64>(),
        ) {
            use rand::{seq::SliceRandom, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let edges: Vec<(usize, usize)> = (0..m * n)
                .filter(|&k| bits[k])
                .map(|k| (k % m, k / m))
                .collect();
            let base = connected_components_from_edges(m, n, edges.iter().copied());
            let mut pr: Vec<usize> = (0..m).collect();
            let mut pc: Vec<usize> = (0..n).collect();
            pr.shuffle(&mut rng);
            pc.shuffle(&mut rng);
            let permuted = connected_components_from_edges(
                m, n, edges.iter().map(|&(i, j)| (pr[i], pc[j])));
            // Pull the permuted labels back to the original node numbering.
            let rows: Vec<usize> = (0..m).map(|i| permuted.row_label[pr[i]]).collect();
            let cols: Vec<usize> = (0..n).map(|j| permuted.col_label[pc[j]]).collect();
            prop_assert_eq!(base.count, permuted.count);
            prop_assert!(same_partition(&base, &rows, &cols));
        }
    }
}
