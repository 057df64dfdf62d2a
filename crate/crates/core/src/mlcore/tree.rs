//! CART trees grown level by level over presorted columns.
//!
//! Each level makes one pass per dimension over the samples still sitting in
//! splittable nodes, so the cost of a level is `O(dims * samples)` no matter
//! how many nodes it holds. Thresholds are midpoints between consecutive
//! distinct values inside a node; ties between equally good splits go to the
//! lowest dimension, then the lowest threshold.

use rand::seq::index::sample;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::Matrix;

const NONE: u32 = u32::MAX;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Criterion {
    /// Binary targets in {0, 1}; leaf value = weighted fraction of ones.
    Gini,
    /// Real targets; leaf value = weighted mean.
    Variance,
}

impl Criterion {
    /// Split score of a node: maximizing the children's sum minus the
    /// parent's is equivalent to maximizing the weighted impurity decrease.
    #[inline]
    fn proxy(self, w: f64, s1: f64) -> f64 {
        if w <= 0.0 {
            return 0.0;
        }
        match self {
            Criterion::Gini => (s1 * s1 + (w - s1) * (w - s1)) / w,
            Criterion::Variance => s1 * s1 / w,
        }
    }

    fn is_pure(self, w: f64, s1: f64, s2: f64) -> bool {
        match self {
            Criterion::Gini => s1 <= 0.0 || s1 >= w,
            Criterion::Variance => {
                let sse = s2 - s1 * s1 / w;
                sse <= 1e-12 * s2.abs().max(1e-300)
            }
        }
    }

    /// Weighted impurity of a node (Gini index or variance).
    pub fn impurity(self, w: f64, s1: f64, s2: f64) -> f64 {
        if w <= 0.0 {
            return 0.0;
        }
        match self {
            Criterion::Gini => {
                let p = s1 / w;
                1.0 - p * p - (1.0 - p) * (1.0 - p)
            }
            Criterion::Variance => (s2 / w - (s1 / w).powi(2)).max(0.0),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Leaf { value: f64, weight: f64 },
    Split { dim: u32, threshold: f64, left: u32, right: u32 },
}

impl Node {
    pub fn leaf_value(&self) -> Option<f64> {
        match self {
            Node::Leaf { value, .. } => Some(*value),
            Node::Split { .. } => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    /// Index of the leaf reached by `x` (`x[dim] <= threshold` goes left).
    pub fn leaf_index(&self, x: &[f64]) -> usize {
        let mut i = 0usize;
        loop {
            match &self.nodes[i] {
                Node::Leaf { .. } => return i,
                Node::Split {
                    dim,
                    threshold,
                    left,
                    right,
                } => {
                    i = if x[*dim as usize] <= *threshold {
                        *left as usize
                    } else {
                        *right as usize
                    }
                }
            }
        }
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        match &self.nodes[self.leaf_index(x)] {
            Node::Leaf { value, .. } => *value,
            Node::Split { .. } => unreachable!(),
        }
    }

    pub fn set_leaf_value(&mut self, leaf: usize, v: f64) {
        if let Node::Leaf { value, .. } = &mut self.nodes[leaf] {
            *value = v;
        }
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[Node], i: usize) -> usize {
            match &nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => {
                    1 + go(nodes, *left as usize).max(go(nodes, *right as usize))
                }
            }
        }
        go(&self.nodes, 0)
    }

    /// The root split, if the tree is not a single leaf.
    pub fn root_split(&self) -> Option<(usize, f64)> {
        match &self.nodes[0] {
            Node::Split { dim, threshold, .. } => Some((*dim as usize, *threshold)),
            Node::Leaf { .. } => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TreeParams {
    pub criterion: Criterion,
    /// `None` grows until nodes are pure or too small.
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    /// Dimensions sampled per node; `None` considers all of them.
    pub max_features: Option<usize>,
}

/// `(row, value)` pairs sorted by value, one list per column (ties by row
/// index). Values travel with the indices so scans read memory in order.
#[derive(Clone, Debug)]
pub struct SortedColumns {
    per_dim: Vec<Vec<(u32, f64)>>,
}

impl SortedColumns {
    pub fn new(x: &Matrix) -> Self {
        let per_dim = (0..x.cols())
            .into_par_iter()
            .map(|d| {
                let mut idx: Vec<u32> = (0..x.rows() as u32).collect();
                idx.sort_by(|&a, &b| {
                    x.get(a as usize, d)
                        .total_cmp(&x.get(b as usize, d))
                        .then(a.cmp(&b))
                });
                idx.into_iter().map(|r| (r, x.get(r as usize, d))).collect()
            })
            .collect();
        SortedColumns { per_dim }
    }
}

/// A grown tree plus the leaf each weighted training sample ended in.
pub struct GrownTree {
    pub tree: Tree,
    /// Leaf node id per sample; `u32::MAX` for zero-weight samples.
    pub leaf_of: Vec<u32>,
}

#[derive(Clone, Copy)]
struct Stats {
    w: f64,
    s1: f64,
    s2: f64,
}

impl Stats {
    const ZERO: Stats = Stats {
        w: 0.0,
        s1: 0.0,
        s2: 0.0,
    };

    #[inline]
    fn add(&mut self, w: f64, y: f64) {
        self.w += w;
        self.s1 += w * y;
        self.s2 += w * y * y;
    }
}

struct Pending {
    node: u32,
    depth: usize,
    stats: Stats,
}

#[derive(Clone, Copy)]
struct Best {
    gain: f64,
    dim: usize,
    threshold: f64,
}

#[derive(Clone, Copy)]
struct Scan {
    left: Stats,
    last: f64,
}

/// Grows one tree on the samples with positive weight.
///
/// `rng` is required when `params.max_features` restricts the candidate
/// dimensions. A node whose sampled dimensions admit no split is retried
/// with the remaining dimensions before it becomes a leaf.
pub fn grow_tree(
    x: &Matrix,
    y: &[f64],
    weights: &[f64],
    sorted: &SortedColumns,
    params: &TreeParams,
    mut rng: Option<&mut ChaCha8Rng>,
) -> GrownTree {
    let n = x.rows();
    let d = x.cols();
    let crit = params.criterion;

    let mut lists: Vec<Vec<(u32, f64)>> = sorted
        .per_dim
        .iter()
        .map(|l| l.iter().copied().filter(|&(s, _)| weights[s as usize] > 0.0).collect())
        .collect();

    let mut node_of = vec![NONE; n];
    let mut leaf_of = vec![NONE; n];
    let mut root = Stats::ZERO;
    for s in 0..n {
        if weights[s] > 0.0 {
            node_of[s] = 0;
            root.add(weights[s], y[s]);
        }
    }

    let mut nodes = vec![Node::Leaf {
        value: 0.0,
        weight: root.w,
    }];
    let mut frontier = vec![Pending {
        node: 0,
        depth: 0,
        stats: root,
    }];
    let mut slot_of: Vec<u32> = vec![NONE];

    while !frontier.is_empty() {
        slot_of.resize(nodes.len(), NONE);
        // Which frontier nodes may split.
        let mut slots: Vec<usize> = Vec::new();
        for (fi, p) in frontier.iter().enumerate() {
            let st = p.stats;
            let can_split = params.max_depth.map_or(true, |m| p.depth < m)
                && st.w >= params.min_samples_split as f64
                && st.w >= 2.0
                && !crit.is_pure(st.w, st.s1, st.s2);
            if can_split {
                slot_of[p.node as usize] = slots.len() as u32;
                slots.push(fi);
            } else {
                slot_of[p.node as usize] = NONE;
            }
        }

        let n_slots = slots.len();
        let mut best: Vec<Option<Best>> = vec![None; n_slots];

        if n_slots > 0 {
            let restricted = params.max_features.filter(|&m| m < d);
            let mut wants: Vec<Vec<bool>> = Vec::with_capacity(n_slots);
            for _ in 0..n_slots {
                match restricted {
                    Some(m) => {
                        let r = rng.as_deref_mut().expect("rng required when max_features < dims");
                        let mut mask = vec![false; d];
                        for j in sample(r, d, m.max(1)).into_iter() {
                            mask[j] = true;
                        }
                        wants.push(mask);
                    }
                    None => wants.push(vec![true; d]),
                }
            }
            scan_level(y, weights, &lists, &node_of, &slot_of, &frontier, &slots, &wants, crit, &mut best);

            if restricted.is_some() {
                let retry: Vec<bool> = best.iter().map(Option::is_none).collect();
                if retry.iter().any(|&r| r) {
                    let wants2: Vec<Vec<bool>> = wants
                        .iter()
                        .zip(&retry)
                        .map(|(w, &r)| if r { w.iter().map(|b| !b).collect() } else { vec![false; d] })
                        .collect();
                    scan_level(y, weights, &lists, &node_of, &slot_of, &frontier, &slots, &wants2, crit, &mut best);
                }
            }
        }

        // Materialize splits; everything else in the frontier becomes a leaf.
        let mut split_children: Vec<Option<(u32, u32, usize, f64)>> = vec![None; frontier.len()];
        for (k, &fi) in slots.iter().enumerate() {
            if let Some(b) = best[k] {
                let l = nodes.len() as u32;
                nodes.push(Node::Leaf { value: 0.0, weight: 0.0 });
                nodes.push(Node::Leaf { value: 0.0, weight: 0.0 });
                nodes[frontier[fi].node as usize] = Node::Split {
                    dim: b.dim as u32,
                    threshold: b.threshold,
                    left: l,
                    right: l + 1,
                };
                split_children[fi] = Some((l, l + 1, b.dim, b.threshold));
            }
        }
        let mut frontier_pos: Vec<u32> = vec![NONE; nodes.len()];
        for (fi, p) in frontier.iter().enumerate() {
            frontier_pos[p.node as usize] = fi as u32;
            if split_children[fi].is_none() {
                let st = p.stats;
                nodes[p.node as usize] = Node::Leaf {
                    value: if st.w > 0.0 { st.s1 / st.w } else { 0.0 },
                    weight: st.w,
                };
            }
        }

        let mut child_stats: Vec<Stats> = vec![Stats::ZERO; nodes.len()];
        if let Some(list) = lists.first() {
            for &(s, _) in list {
                let s = s as usize;
                let m = node_of[s];
                if m == NONE {
                    continue;
                }
                let fi = frontier_pos[m as usize] as usize;
                match split_children[fi] {
                    Some((l, r, dim, thr)) => {
                        let c = if x.get(s, dim) <= thr { l } else { r };
                        node_of[s] = c;
                        child_stats[c as usize].add(weights[s], y[s]);
                    }
                    None => {
                        leaf_of[s] = m;
                        node_of[s] = NONE;
                    }
                }
            }
        } else {
            // Zero-width input: every node is a leaf.
            for s in 0..n {
                if node_of[s] != NONE {
                    leaf_of[s] = node_of[s];
                    node_of[s] = NONE;
                }
            }
        }
        for list in lists.iter_mut() {
            list.retain(|&(s, _)| node_of[s as usize] != NONE);
        }

        let mut next = Vec::new();
        for (fi, p) in frontier.iter().enumerate() {
            if let Some((l, r, _, _)) = split_children[fi] {
                for c in [l, r] {
                    next.push(Pending {
                        node: c,
                        depth: p.depth + 1,
                        stats: child_stats[c as usize],
                    });
                }
            }
        }
        frontier = next;
    }

    GrownTree {
        tree: Tree { nodes },
        leaf_of,
    }
}

#[allow(clippy::too_many_arguments)]
fn scan_level(
    y: &[f64],
    weights: &[f64],
    lists: &[Vec<(u32, f64)>],
    node_of: &[u32],
    slot_of: &[u32],
    frontier: &[Pending],
    slots: &[usize],
    wants: &[Vec<bool>],
    crit: Criterion,
    best: &mut [Option<Best>],
) {
    let n_slots = slots.len();
    let totals: Vec<Stats> = slots.iter().map(|&fi| frontier[fi].stats).collect();
    let parent_proxy: Vec<f64> = totals.iter().map(|t| crit.proxy(t.w, t.s1)).collect();
    let tol: Vec<f64> = totals
        .iter()
        .zip(&parent_proxy)
        .map(|(t, p)| 1e-12 * p.abs().max(t.w).max(1.0))
        .collect();

    let mut scan = vec![
        Scan {
            left: Stats::ZERO,
            last: f64::NAN,
        };
        n_slots
    ];
    // Slot per sample, resolved once for every dimension.
    let slot: Vec<u32> = node_of
        .iter()
        .map(|&m| if m == NONE { NONE } else { slot_of[m as usize] })
        .collect();
    let every = wants.iter().all(|w| w.iter().all(|&b| b));
    for (dim, list) in lists.iter().enumerate() {
        if !every && !wants.iter().any(|w| w[dim]) {
            continue;
        }
        for s in scan.iter_mut() {
            s.left = Stats::ZERO;
            s.last = f64::NAN;
        }
        for &(s, v) in list {
            let s = s as usize;
            let k = slot[s];
            if k == NONE || !(every || wants[k as usize][dim]) {
                continue;
            }
            let k = k as usize;
            let sc = &mut scan[k];
            if sc.left.w > 0.0 && v > sc.last {
                let t = totals[k];
                let lw = sc.left.w;
                let ls1 = sc.left.s1;
                let gain = crit.proxy(lw, ls1) + crit.proxy(t.w - lw, t.s1 - ls1) - parent_proxy[k];
                let better = match best[k] {
                    None => true,
                    Some(b) => gain > b.gain + tol[k],
                };
                if better {
                    let mut threshold = sc.last + (v - sc.last) / 2.0;
                    if !(threshold < v) {
                        threshold = sc.last;
                    }
                    best[k] = Some(Best { gain, dim, threshold });
                }
            }
            sc.left.add(weights[s], y[s]);
            sc.last = v;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fit(x: &[Vec<f64>], y: &[f64], params: TreeParams) -> Tree {
        let m = Matrix::from_rows(x).unwrap();
        let sorted = SortedColumns::new(&m);
        grow_tree(&m, y, &vec![1.0; y.len()], &sorted, &params, None).tree
    }

    const GINI: TreeParams = TreeParams {
        criterion: Criterion::Gini,
        max_depth: None,
        min_samples_split: 2,
        max_features: None,
    };

    #[test]
    fn stump_separates_two_points() {
        let t = fit(&[vec![0.0], vec![1.0]], &[0.0, 1.0], TreeParams { max_depth: Some(1), ..GINI });
        assert_eq!(t.root_split(), Some((0, 0.5)));
        assert_eq!(t.predict(&[0.0]), 0.0);
        assert_eq!(t.predict(&[1.0]), 1.0);
    }

    #[test]
    fn xor_needs_zero_gain_first_split() {
        let x = vec![vec![0.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0], vec![1.0, 1.0]];
        let y = [0.0, 1.0, 1.0, 0.0];
        let t = fit(&x, &y, GINI);
        for (r, &l) in x.iter().zip(&y) {
            assert_eq!(t.predict(r), l);
        }
        assert_eq!(t.depth(), 2);
    }

    #[test]
    fn max_depth_zero_is_root_leaf() {
        let t = fit(&[vec![0.0], vec![1.0], vec![2.0]], &[0.0, 1.0, 1.0], TreeParams { max_depth: Some(0), ..GINI });
        assert_eq!(t.nodes().len(), 1);
        assert!((t.predict(&[5.0]) - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn min_samples_split_stops_growth() {
        let x: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64]).collect();
        let y = [0.0, 1.0, 0.0, 1.0, 0.0, 1.0];
        let t = fit(&x, &y, TreeParams { min_samples_split: 7, ..GINI });
        assert_eq!(t.nodes().len(), 1);
    }

    #[test]
    fn regression_tree_recovers_targets() {
        let x: Vec<Vec<f64>> = (0..8).map(|i| vec![i as f64, (i % 3) as f64]).collect();
        let y: Vec<f64> = (0..8).map(|i| (i * i) as f64).collect();
        let t = fit(&x, &y, TreeParams { criterion: Criterion::Variance, ..GINI });
        for (r, &v) in x.iter().zip(&y) {
            assert_eq!(t.predict(r), v);
        }
    }

    #[test]
    fn weights_exclude_samples() {
        let m = Matrix::from_rows(&[vec![0.0], vec![1.0], vec![2.0]]).unwrap();
        let sorted = SortedColumns::new(&m);
        let g = grow_tree(&m, &[0.0, 1.0, 1.0], &[1.0, 0.0, 2.0], &sorted, &GINI, None);
        assert_eq!(g.leaf_of[1], u32::MAX);
        assert_eq!(g.tree.root_split(), Some((0, 1.0)));
    }
}
