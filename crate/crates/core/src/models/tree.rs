//! Greedy binary decision trees.
//!
//! Each feature column is mapped once onto the sorted list of its distinct
//! values. A node then finds its candidate split points by accumulating
//! per-value statistics (by histogram for large nodes, by sorting for small
//! ones). Candidate thresholds are midpoints between consecutive distinct
//! values present in the node, so the search is exact.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::FeatureMatrix;

/// Column-major bin indices into each feature's sorted distinct values.
#[derive(Debug, Clone)]
pub struct BinnedMatrix {
    n_rows: usize,
    bins: Vec<Vec<u32>>,
    uniques: Vec<Vec<f64>>,
}

impl BinnedMatrix {
    pub fn new(x: &FeatureMatrix) -> Result<Self> {
        if x.has_non_finite() {
            return Err(Error::invalid(
                "feature matrix contains NaN or infinite values",
            ));
        }
        let mut bins = Vec::with_capacity(x.n_cols());
        let mut uniques = Vec::with_capacity(x.n_cols());
        for j in 0..x.n_cols() {
            let col = x.column(j);
            let mut u = col.clone();
            u.sort_by(f64::total_cmp);
            u.dedup_by(|a, b| a == b);
            bins.push(
                col.iter()
                    .map(|v| u.partition_point(|w| w < v) as u32)
                    .collect(),
            );
            uniques.push(u);
        }
        Ok(Self {
            n_rows: x.n_rows(),
            bins,
            uniques,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_features(&self) -> usize {
        self.bins.len()
    }

    pub fn value(&self, row: usize, feature: usize) -> f64 {
        self.uniques[feature][self.bins[feature][row] as usize]
    }
}

/// Flat tree node. Children indices point into the owning tree's node list.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        /// Weighted positive fraction (classification) or raw score (boosting).
        value: f64,
        /// Weighted sample mass (classification) or hessian sum (boosting).
        weight: f64,
        /// Number of training rows, counting bootstrap repeats.
        count: u64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TreeArrays", into = "TreeArrays")]
pub struct DecisionTree {
    nodes: Vec<Node>,
    n_features: usize,
    max_depth: Option<usize>,
    min_samples_leaf: usize,
}

impl DecisionTree {
    pub fn from_nodes(
        nodes: Vec<Node>,
        n_features: usize,
        max_depth: Option<usize>,
        min_samples_leaf: usize,
    ) -> Self {
        Self {
            nodes,
            n_features,
            max_depth,
            min_samples_leaf,
        }
    }

    /// A tree with a single leaf.
    pub fn constant(value: f64, n_features: usize) -> Self {
        Self::from_nodes(
            vec![Node::Leaf {
                value,
                weight: 1.0,
                count: 1,
            }],
            n_features,
            None,
            1,
        )
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn max_depth(&self) -> Option<usize> {
        self.max_depth
    }

    pub fn min_samples_leaf(&self) -> usize {
        self.min_samples_leaf
    }

    pub fn predict_row(&self, x: &[f64]) -> f64 {
        self.predict_with(|f| x[f])
    }

    pub(crate) fn predict_with(&self, x: impl Fn(usize) -> f64) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x(feature) <= threshold { left } else { right },
                Node::Leaf { value, .. } => return value,
            }
        }
    }

    /// Length of the longest root-to-leaf path (a single leaf has depth 0).
    pub fn depth(&self) -> usize {
        let mut best = 0;
        let mut stack = vec![(0usize, 0usize)];
        while let Some((i, d)) = stack.pop() {
            match self.nodes[i] {
                Node::Split { left, right, .. } => {
                    stack.push((left, d + 1));
                    stack.push((right, d + 1));
                }
                Node::Leaf { .. } => best = best.max(d),
            }
        }
        best
    }

    pub fn leaves(&self) -> impl Iterator<Item = (f64, f64, u64)> + '_ {
        self.nodes.iter().filter_map(|n| match *n {
            Node::Leaf {
                value,
                weight,
                count,
            } => Some((value, weight, count)),
            Node::Split { .. } => None,
        })
    }

    /// Features used by at least one split.
    pub fn used_features(&self) -> Vec<usize> {
        let mut f: Vec<usize> = self
            .nodes
            .iter()
            .filter_map(|n| match n {
                Node::Split { feature, .. } => Some(*feature),
                Node::Leaf { .. } => None,
            })
            .collect();
        f.sort_unstable();
        f.dedup();
        f
    }
}

/// Serialized node arrays; `feature`, `left` and `right` are -1 on leaves.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TreeArrays {
    pub n_features: usize,
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    pub feature: Vec<i64>,
    pub threshold: Vec<f64>,
    pub left: Vec<i64>,
    pub right: Vec<i64>,
    pub value: Vec<f64>,
    pub weight: Vec<f64>,
    pub count: Vec<u64>,
}

impl From<DecisionTree> for TreeArrays {
    fn from(t: DecisionTree) -> Self {
        let n = t.nodes.len();
        let mut a = TreeArrays {
            n_features: t.n_features,
            max_depth: t.max_depth,
            min_samples_leaf: t.min_samples_leaf,
            feature: Vec::with_capacity(n),
            threshold: Vec::with_capacity(n),
            left: Vec::with_capacity(n),
            right: Vec::with_capacity(n),
            value: Vec::with_capacity(n),
            weight: Vec::with_capacity(n),
            count: Vec::with_capacity(n),
        };
        for node in &t.nodes {
            match *node {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    a.feature.push(feature as i64);
                    a.threshold.push(threshold);
                    a.left.push(left as i64);
                    a.right.push(right as i64);
                    a.value.push(0.0);
                    a.weight.push(0.0);
                    a.count.push(0);
                }
                Node::Leaf {
                    value,
                    weight,
                    count,
                } => {
                    a.feature.push(-1);
                    a.threshold.push(0.0);
                    a.left.push(-1);
                    a.right.push(-1);
                    a.value.push(value);
                    a.weight.push(weight);
                    a.count.push(count);
                }
            }
        }
        a
    }
}

impl TryFrom<TreeArrays> for DecisionTree {
    type Error = String;

    fn try_from(a: TreeArrays) -> std::result::Result<Self, String> {
        let n = a.feature.len();
        let lens = [
            a.threshold.len(),
            a.left.len(),
            a.right.len(),
            a.value.len(),
            a.weight.len(),
            a.count.len(),
        ];
        if n == 0 || lens.iter().any(|&l| l != n) {
            return Err("tree node arrays are empty or differ in length".into());
        }
        let mut nodes = Vec::with_capacity(n);
        for i in 0..n {
            if a.feature[i] < 0 {
                nodes.push(Node::Leaf {
                    value: a.value[i],
                    weight: a.weight[i],
                    count: a.count[i],
                });
                continue;
            }
            let (f, l, r) = (a.feature[i] as usize, a.left[i], a.right[i]);
            // children are created after their parent
            if f >= a.n_features
                || l <= i as i64
                || r <= i as i64
                || l as usize >= n
                || r as usize >= n
            {
                return Err(format!(
                    "tree node {i} has an invalid feature or child index"
                ));
            }
            nodes.push(Node::Split {
                feature: f,
                threshold: a.threshold[i],
                left: l as usize,
                right: r as usize,
            });
        }
        Ok(DecisionTree::from_nodes(
            nodes,
            a.n_features,
            a.max_depth,
            a.min_samples_leaf,
        ))
    }
}

/// Additive per-row statistics accumulated over a node.
pub(crate) trait NodeStat: Copy + Default + Send + Sync {
    fn add(&mut self, other: &Self);
    fn minus(&self, other: &Self) -> Self;
    fn count(&self) -> u64;
    /// Magnitude used to scale the split tie tolerance.
    fn scale(&self) -> f64;
}

/// Split objective: a split is worth `score(left) + score(right) - score(node)`.
pub(crate) trait Criterion: Sync {
    type Stat: NodeStat;
    fn score(&self, s: &Self::Stat) -> f64;
    fn child_ok(&self, s: &Self::Stat) -> bool;
    fn splittable(&self, s: &Self::Stat) -> bool;
    /// Leaf `(value, weight)`.
    fn leaf(&self, s: &Self::Stat) -> (f64, f64);
}

#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct GiniStat {
    pub pos: f64,
    pub neg: f64,
    pub n: u64,
}

impl NodeStat for GiniStat {
    fn add(&mut self, o: &Self) {
        self.pos += o.pos;
        self.neg += o.neg;
        self.n += o.n;
    }

    fn minus(&self, o: &Self) -> Self {
        Self {
            pos: self.pos - o.pos,
            neg: self.neg - o.neg,
            n: self.n - o.n,
        }
    }

    fn count(&self) -> u64 {
        self.n
    }

    fn scale(&self) -> f64 {
        self.pos + self.neg
    }
}

/// Weighted Gini impurity. Maximizing `(pos^2 + neg^2) / (pos + neg)`
/// summed over children is equivalent to minimizing the weighted impurity.
pub(crate) struct Gini {
    pub min_samples_leaf: u64,
}

impl Criterion for Gini {
    type Stat = GiniStat;

    fn score(&self, s: &GiniStat) -> f64 {
        let w = s.pos + s.neg;
        if w > 0.0 {
            (s.pos * s.pos + s.neg * s.neg) / w
        } else {
            0.0
        }
    }

    fn child_ok(&self, s: &GiniStat) -> bool {
        s.n >= self.min_samples_leaf
    }

    fn splittable(&self, s: &GiniStat) -> bool {
        s.pos > 0.0 && s.neg > 0.0 && s.n >= 2 * self.min_samples_leaf
    }

    fn leaf(&self, s: &GiniStat) -> (f64, f64) {
        let w = s.pos + s.neg;
        (if w > 0.0 { s.pos / w } else { 0.0 }, w)
    }
}

pub(crate) struct GrowParams {
    pub max_depth: Option<usize>,
    /// Number of non-constant features to examine per node.
    pub max_features: usize,
}

#[derive(Clone, Copy)]
struct Candidate {
    gain: f64,
    feature: usize,
    bin: u32,
    threshold: f64,
}

fn midpoint(a: f64, b: f64) -> f64 {
    let m = a + (b - a) / 2.0;
    if m >= b {
        a
    } else {
        m
    }
}

struct Scratch<S> {
    hist: Vec<S>,
    pairs: Vec<(u32, S)>,
    bins: Vec<(u32, S)>,
    buf: Vec<usize>,
    features: Vec<usize>,
}

/// Grows a tree over `rows` (duplicates allowed) with per-row statistics
/// `stats[row]`.
pub(crate) fn grow<C: Criterion>(
    data: &BinnedMatrix,
    mut rows: Vec<usize>,
    stats: &[C::Stat],
    crit: &C,
    params: &GrowParams,
    rng: &mut ChaCha8Rng,
) -> Vec<Node> {
    let n_features = data.n_features();
    let max_bins = data.uniques.iter().map(Vec::len).max().unwrap_or(0);
    let mut scratch = Scratch {
        hist: vec![C::Stat::default(); max_bins],
        pairs: Vec::new(),
        bins: Vec::new(),
        buf: Vec::with_capacity(rows.len()),
        features: (0..n_features).collect(),
    };
    let mut nodes = vec![Node::Leaf {
        value: 0.0,
        weight: 0.0,
        count: 0,
    }];
    let mut stack = vec![(0usize, 0usize, rows.len(), 0usize)];
    while let Some((id, lo, hi, depth)) = stack.pop() {
        let mut total = C::Stat::default();
        for &r in &rows[lo..hi] {
            total.add(&stats[r]);
        }
        let depth_ok = params.max_depth.is_none_or(|d| depth < d);
        let best = if depth_ok && crit.splittable(&total) {
            best_split(
                data,
                &rows[lo..hi],
                stats,
                crit,
                &total,
                params,
                rng,
                &mut scratch,
            )
        } else {
            None
        };
        match best {
            Some(c) => {
                let col = &data.bins[c.feature];
                scratch.buf.clear();
                let seg = &mut rows[lo..hi];
                let mut n_left = 0;
                for k in 0..seg.len() {
                    let r = seg[k];
                    if col[r] <= c.bin {
                        seg[n_left] = r;
                        n_left += 1;
                    } else {
                        scratch.buf.push(r);
                    }
                }
                seg[n_left..].copy_from_slice(&scratch.buf);
                let left = nodes.len();
                let right = left + 1;
                nodes.push(nodes[0]);
                nodes.push(nodes[0]);
                nodes[id] = Node::Split {
                    feature: c.feature,
                    threshold: c.threshold,
                    left,
                    right,
                };
                stack.push((right, lo + n_left, hi, depth + 1));
                stack.push((left, lo, lo + n_left, depth + 1));
            }
            None => {
                let (value, weight) = crit.leaf(&total);
                nodes[id] = Node::Leaf {
                    value,
                    weight,
                    count: total.count(),
                };
            }
        }
    }
    nodes
}

#[allow(clippy::too_many_arguments)]
fn best_split<C: Criterion>(
    data: &BinnedMatrix,
    rows: &[usize],
    stats: &[C::Stat],
    crit: &C,
    total: &C::Stat,
    params: &GrowParams,
    rng: &mut ChaCha8Rng,
    scratch: &mut Scratch<C::Stat>,
) -> Option<Candidate> {
    let n_features = data.n_features();
    let parent = crit.score(total);
    let tol = 1e-12 * total.scale().abs().max(parent.abs());
    let sampled = params.max_features < n_features;
    let mut best: Option<Candidate> = None;
    let mut visited = 0;
    for k in 0..n_features {
        if visited == params.max_features {
            break;
        }
        let f = if sampled {
            let j = rng.random_range(k..n_features);
            scratch.features.swap(k, j);
            scratch.features[k]
        } else {
            k
        };
        let col = &data.bins[f];
        let n_bins = data.uniques[f].len();
        scratch.bins.clear();
        if rows.len() * 4 >= n_bins {
            let hist = &mut scratch.hist[..n_bins];
            hist.fill(C::Stat::default());
            for &r in rows {
                hist[col[r] as usize].add(&stats[r]);
            }
            scratch.bins.extend(
                hist.iter()
                    .enumerate()
                    .filter(|(_, s)| s.count() > 0)
                    .map(|(b, s)| (b as u32, *s)),
            );
        } else {
            scratch.pairs.clear();
            scratch
                .pairs
                .extend(rows.iter().map(|&r| (col[r], stats[r])));
            scratch.pairs.sort_unstable_by_key(|p| p.0);
            for &(b, s) in &scratch.pairs {
                match scratch.bins.last_mut() {
                    Some((lb, ls)) if *lb == b => ls.add(&s),
                    _ => scratch.bins.push((b, s)),
                }
            }
        }
        if scratch.bins.len() < 2 {
            continue;
        }
        visited += 1;
        let mut left = C::Stat::default();
        for w in scratch.bins.windows(2) {
            left.add(&w[0].1);
            let right = total.minus(&left);
            if !crit.child_ok(&left) || !crit.child_ok(&right) {
                continue;
            }
            let gain = crit.score(&left) + crit.score(&right) - parent;
            let threshold = midpoint(
                data.uniques[f][w[0].0 as usize],
                data.uniques[f][w[1].0 as usize],
            );
            let better = match &best {
                None => true,
                Some(b) if gain > b.gain + tol => true,
                Some(b) if (gain - b.gain).abs() <= tol => {
                    (f, threshold) < (b.feature, b.threshold)
                }
                _ => false,
            };
            if better {
                best = Some(Candidate {
                    gain,
                    feature: f,
                    bin: w[0].0,
                    threshold,
                });
            }
        }
    }
    best.filter(|b| b.gain > tol)
}

/// Tree-growing parameters for classification trees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TreeParams {
    /// `None` grows until leaves are pure or cannot be split.
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    /// Features examined per split; `None` examines all of them.
    pub max_features: Option<usize>,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self {
            max_depth: None,
            min_samples_leaf: 1,
            max_features: None,
        }
    }
}

impl TreeParams {
    pub(crate) fn resolved_max_features(&self, n_features: usize) -> Result<usize> {
        match self.max_features {
            None => Ok(n_features),
            Some(m) if (1..=n_features).contains(&m) => Ok(m),
            Some(m) => Err(Error::invalid(format!(
                "max_features {m} outside [1, {n_features}]"
            ))),
        }
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if self.min_samples_leaf == 0 {
            return Err(Error::invalid("min_samples_leaf must be at least 1"));
        }
        if self.max_depth == Some(0) {
            return Err(Error::invalid(
                "max_depth must be at least 1 (or unbounded)",
            ));
        }
        Ok(())
    }
}

/// Checks shared by every fitting routine.
pub(crate) fn validate_training(
    x: &FeatureMatrix,
    y: &[u8],
    weights: Option<&[f64]>,
) -> Result<()> {
    if x.n_rows() == 0 || x.n_cols() == 0 {
        return Err(Error::invalid("training data is empty"));
    }
    if y.len() != x.n_rows() {
        return Err(Error::invalid(format!(
            "{} labels for {} rows",
            y.len(),
            x.n_rows()
        )));
    }
    if let Some(v) = y.iter().find(|&&v| v > 1) {
        return Err(Error::invalid(format!("label {v} is not binary")));
    }
    if let Some(w) = weights {
        if w.len() != y.len() {
            return Err(Error::invalid(format!(
                "{} weights for {} rows",
                w.len(),
                y.len()
            )));
        }
        if w.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::invalid("sample weights must be finite and positive"));
        }
    }
    if x.has_non_finite() {
        return Err(Error::invalid(
            "feature matrix contains NaN or infinite values",
        ));
    }
    Ok(())
}

/// Fits one classification tree on all rows with weighted Gini impurity.
///
/// `seed` only matters when `max_features` is below the feature count.
pub fn fit_tree(
    x: &FeatureMatrix,
    y: &[u8],
    weights: &[f64],
    params: &TreeParams,
    seed: u64,
) -> Result<DecisionTree> {
    validate_training(x, y, Some(weights))?;
    params.validate()?;
    let data = BinnedMatrix::new(x)?;
    let counts = vec![1u32; y.len()];
    fit_tree_binned(
        &data,
        y,
        weights,
        &counts,
        params,
        &mut super::tree_rng(seed, 0),
    )
}

/// Tree on pre-binned data; `counts[i]` is the multiplicity of row `i`
/// (0 drops the row).
pub(crate) fn fit_tree_binned(
    data: &BinnedMatrix,
    y: &[u8],
    weights: &[f64],
    counts: &[u32],
    params: &TreeParams,
    rng: &mut ChaCha8Rng,
) -> Result<DecisionTree> {
    let max_features = params.resolved_max_features(data.n_features())?;
    let stats: Vec<GiniStat> = (0..data.n_rows())
        .map(|i| {
            let w = weights[i] * counts[i] as f64;
            GiniStat {
                pos: if y[i] == 1 { w } else { 0.0 },
                neg: if y[i] == 1 { 0.0 } else { w },
                n: counts[i] as u64,
            }
        })
        .collect();
    let rows: Vec<usize> = (0..data.n_rows()).filter(|&i| counts[i] > 0).collect();
    let crit = Gini {
        min_samples_leaf: params.min_samples_leaf as u64,
    };
    let grow_params = GrowParams {
        max_depth: params.max_depth,
        max_features,
    };
    let nodes = grow(data, rows, &stats, &crit, &grow_params, rng);
    Ok(DecisionTree::from_nodes(
        nodes,
        data.n_features(),
        params.max_depth,
        params.min_samples_leaf,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[&[f64]]) -> FeatureMatrix {
        FeatureMatrix::from_rows(rows).unwrap()
    }

    #[test]
    fn pure_data_gives_single_leaf() {
        let x = m(&[&[1.0], &[2.0], &[3.0]]);
        let t = fit_tree(&x, &[1, 1, 1], &[1.0; 3], &TreeParams::default(), 0).unwrap();
        assert_eq!(t.nodes().len(), 1);
        assert_eq!(t.predict_row(&[10.0]), 1.0);
    }

    #[test]
    fn separable_data_is_fit_exactly() {
        let xs: Vec<Vec<f64>> = [0.5, 1.5, 2.0, 3.1, 4.7, 5.2, 6.0]
            .iter()
            .map(|&v| vec![v])
            .collect();
        let y = [0, 1, 0, 1, 1, 0, 1];
        let x = FeatureMatrix::from_rows(&xs).unwrap();
        let t = fit_tree(&x, &y, &[1.0; 7], &TreeParams::default(), 0).unwrap();
        for (r, &l) in xs.iter().zip(&y) {
            assert_eq!(t.predict_row(r), l as f64);
        }
    }

    #[test]
    fn midpoint_thresholds_and_tie_break() {
        // both features separate the data identically; the lower index wins
        let x = m(&[&[1.0, 10.0], &[2.0, 20.0], &[3.0, 30.0], &[4.0, 40.0]]);
        let t = fit_tree(&x, &[0, 0, 1, 1], &[1.0; 4], &TreeParams::default(), 0).unwrap();
        assert_eq!(
            t.nodes()[0],
            Node::Split {
                feature: 0,
                threshold: 2.5,
                left: 1,
                right: 2
            }
        );
    }

    #[test]
    fn depth_and_leaf_size_limits() {
        let xs: Vec<Vec<f64>> = (0..64)
            .map(|i| vec![i as f64, (i * 7 % 13) as f64])
            .collect();
        let y: Vec<u8> = (0..64).map(|i| ((i * 5 + i / 3) % 2) as u8).collect();
        let x = FeatureMatrix::from_rows(&xs).unwrap();
        let p = TreeParams {
            max_depth: Some(3),
            min_samples_leaf: 4,
            max_features: None,
        };
        let t = fit_tree(&x, &y, &vec![1.0; 64], &p, 0).unwrap();
        assert!(t.depth() <= 3);
        assert!(t
            .leaves()
            .all(|(v, _, c)| c >= 4 && (0.0..=1.0).contains(&v)));
    }

    #[test]
    fn input_errors() {
        let x = m(&[&[1.0], &[f64::NAN]]);
        assert!(fit_tree(&x, &[0, 1], &[1.0; 2], &TreeParams::default(), 0).is_err());
        let x = m(&[&[1.0], &[2.0]]);
        assert!(fit_tree(&x, &[0, 2], &[1.0; 2], &TreeParams::default(), 0).is_err());
        assert!(fit_tree(&x, &[0, 1], &[1.0, 0.0], &TreeParams::default(), 0).is_err());
        assert!(fit_tree(&x, &[0], &[1.0], &TreeParams::default(), 0).is_err());
        let empty = FeatureMatrix::new(0, 1, vec![]).unwrap();
        assert!(fit_tree(&empty, &[], &[], &TreeParams::default(), 0).is_err());
    }

    #[test]
    fn arrays_round_trip() {
        let x = m(&[&[1.0, 0.0], &[2.0, 1.0], &[3.0, 0.0], &[4.0, 1.0]]);
        let t = fit_tree(&x, &[0, 1, 0, 1], &[1.0; 4], &TreeParams::default(), 0).unwrap();
        let back = DecisionTree::try_from(TreeArrays::from(t.clone())).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn rejects_malformed_arrays() {
        let mut a = TreeArrays::from(DecisionTree::constant(0.5, 2));
        a.feature[0] = 0;
        a.left[0] = 0;
        assert!(DecisionTree::try_from(a).is_err());
    }
}
