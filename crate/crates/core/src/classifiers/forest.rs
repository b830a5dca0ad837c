//! Random forest of CART trees grown on bootstrap samples with Gini
//! impurity and per-split random feature subsets.

use ndarray::{Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{check_fit_input, check_predict_input, to_f64};
use crate::error::{Error, Result};
use crate::rng::{rng_for, Rng, TAG_TREE};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaxFeatures {
    Sqrt,
    All,
    Count(usize),
}

impl MaxFeatures {
    pub fn resolve(self, d: usize) -> usize {
        match self {
            MaxFeatures::Sqrt => ((d as f64).sqrt().ceil() as usize).clamp(1, d),
            MaxFeatures::All => d,
            MaxFeatures::Count(k) => k.clamp(1, d),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestParams {
    pub n_trees: usize,
    pub max_features: MaxFeatures,
    pub min_samples_split: usize,
    pub max_depth: Option<usize>,
    pub bootstrap: bool,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_trees: 100,
            max_features: MaxFeatures::Sqrt,
            min_samples_split: 2,
            max_depth: None,
            bootstrap: true,
        }
    }
}

/// Gini impurity `1 - sum p_c^2` of a class histogram.
pub fn gini(counts: &[u32]) -> f64 {
    let n: u32 = counts.iter().sum();
    if n == 0 {
        return 0.0;
    }
    let n = n as f64;
    1.0 - counts.iter().map(|&c| (c as f64 / n).powi(2)).sum::<f64>()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
        /// Weighted impurity decrease `n G - n_l G_l - n_r G_r`.
        gain: f64,
        samples: u32,
    },
    Leaf {
        counts: Vec<u32>,
    },
}

fn argmax_counts(counts: &[u32]) -> usize {
    let mut best = 0;
    for (c, &v) in counts.iter().enumerate() {
        if v > counts[best] {
            best = c;
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn leaf_counts(&self, x: ArrayView1<'_, f64>) -> &[u32] {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => at = if x[*feature] <= *threshold { *left } else { *right },
                Node::Leaf { counts } => return counts,
            }
        }
    }

    pub fn predict_row(&self, x: ArrayView1<'_, f64>) -> usize {
        argmax_counts(self.leaf_counts(x))
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[Node], at: usize) -> usize {
            match &nodes[at] {
                Node::Split { left, right, .. } => 1 + go(nodes, *left).max(go(nodes, *right)),
                Node::Leaf { .. } => 0,
            }
        }
        go(&self.nodes, 0)
    }

    /// Impurity decrease per feature, normalized to sum to 1 (all zero for
    /// a single-leaf tree).
    pub fn importances(&self, n_features: usize) -> Vec<f64> {
        let mut imp = vec![0.0; n_features];
        for node in &self.nodes {
            if let Node::Split { feature, gain, .. } = node {
                imp[*feature] += gain;
            }
        }
        let total: f64 = imp.iter().sum();
        if total > 0.0 {
            imp.iter_mut().for_each(|v| *v /= total);
        }
        imp
    }
}

struct Builder<'a> {
    /// Features as rows (`d x n`) so each feature is contiguous.
    xt: ArrayView2<'a, f64>,
    y: &'a [usize],
    n_classes: usize,
    max_features: usize,
    min_split: usize,
    max_depth: usize,
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    score: f64,
}

impl Builder<'_> {
    fn counts(&self, idx: &[usize]) -> Vec<u32> {
        let mut c = vec![0u32; self.n_classes];
        for &i in idx {
            c[self.y[i]] += 1;
        }
        c
    }

    fn grow(&self, mut idx: Vec<usize>, rng: &mut Rng) -> Tree {
        let d = self.xt.nrows();
        let mut nodes = Vec::new();
        let mut features: Vec<usize> = (0..d).collect();
        let mut buf: Vec<(f64, usize)> = Vec::with_capacity(idx.len());
        // (node slot, start, end, depth)
        let mut stack = vec![(0usize, 0usize, idx.len(), 0usize)];
        nodes.push(Node::Leaf { counts: vec![] });
        while let Some((slot, start, end, depth)) = stack.pop() {
            let counts = self.counts(&idx[start..end]);
            let m = end - start;
            let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
            let split = if pure || m < self.min_split || depth >= self.max_depth {
                None
            } else {
                self.best_split(&idx[start..end], &counts, &mut features, &mut buf, rng)
            };
            let parent_score = counts.iter().map(|&c| (c as f64).powi(2)).sum::<f64>() / m as f64;
            match split {
                Some(s) if s.score - parent_score > 1e-12 * m as f64 => {
                    let row = self.xt.row(s.feature);
                    let seg = &mut idx[start..end];
                    let mut lo = 0;
                    for t in 0..seg.len() {
                        if row[seg[t]] <= s.threshold {
                            seg.swap(lo, t);
                            lo += 1;
                        }
                    }
                    let mid = start + lo;
                    let left = nodes.len();
                    let right = left + 1;
                    nodes.push(Node::Leaf { counts: vec![] });
                    nodes.push(Node::Leaf { counts: vec![] });
                    nodes[slot] = Node::Split {
                        feature: s.feature,
                        threshold: s.threshold,
                        left,
                        right,
                        gain: s.score - parent_score,
                        samples: m as u32,
                    };
                    stack.push((right, mid, end, depth + 1));
                    stack.push((left, start, mid, depth + 1));
                }
                _ => nodes[slot] = Node::Leaf { counts },
            }
        }
        Tree { nodes }
    }

    /// Scans random features until `max_features` non-constant ones have
    /// been evaluated. The score is `sum L_c^2 / n_l + sum R_c^2 / n_r`,
    /// which grows as weighted Gini impurity falls.
    fn best_split(
        &self,
        idx: &[usize],
        counts: &[u32],
        features: &mut [usize],
        buf: &mut Vec<(f64, usize)>,
        rng: &mut Rng,
    ) -> Option<BestSplit> {
        let d = features.len();
        let m = idx.len();
        let mut best: Option<BestSplit> = None;
        let mut visited = 0;
        let mut left = vec![0u32; self.n_classes];
        for t in 0..d {
            if visited >= self.max_features {
                break;
            }
            let pick = rng.random_range(t..d);
            features.swap(t, pick);
            let f = features[t];
            let row = self.xt.row(f);
            buf.clear();
            buf.extend(idx.iter().map(|&i| (row[i], self.y[i])));
            buf.sort_unstable_by(|a, b| a.0.partial_cmp(&b.0).expect("finite features"));
            if buf[0].0 == buf[m - 1].0 {
                continue;
            }
            visited += 1;
            left.iter_mut().for_each(|c| *c = 0);
            let mut sl = 0.0f64;
            let mut sr: f64 = counts.iter().map(|&c| (c as f64).powi(2)).sum();
            for p in 0..m - 1 {
                let c = buf[p].1;
                let lc = left[c] as f64;
                let rc = (counts[c] - left[c]) as f64;
                sl += 2.0 * lc + 1.0;
                sr -= 2.0 * rc - 1.0;
                left[c] += 1;
                if buf[p].0 == buf[p + 1].0 {
                    continue;
                }
                let nl = (p + 1) as f64;
                let score = sl / nl + sr / (m as f64 - nl);
                if best.as_ref().is_none_or(|b| score > b.score) {
                    let (a, b) = (buf[p].0, buf[p + 1].0);
                    let mut thr = a + (b - a) / 2.0;
                    if thr >= b {
                        thr = a;
                    }
                    best = Some(BestSplit {
                        feature: f,
                        threshold: thr,
                        score,
                    });
                }
            }
        }
        best
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    pub n_classes: usize,
    pub n_features: usize,
    pub params: ForestParams,
    pub trees: Vec<Tree>,
    /// Mean decrease in impurity, summing to 1 when any tree split.
    pub importances: Vec<f64>,
    /// Accuracy of out-of-bag votes, when bootstrapping left any sample out.
    pub oob_accuracy: Option<f64>,
}

impl RandomForest {
    pub fn fit<T: Scalar>(
        x: ArrayView2<'_, T>,
        y: &[usize],
        n_classes: usize,
        params: &ForestParams,
        seed: u64,
    ) -> Result<Self> {
        check_fit_input(x, y, n_classes)?;
        if params.n_trees == 0 {
            return Err(Error::invalid("forest needs at least one tree"));
        }
        let xf = to_f64(x);
        let (n, d) = xf.dim();
        let xt = xf.t().as_standard_layout().into_owned();
        let builder = Builder {
            xt: xt.view(),
            y,
            n_classes,
            max_features: params.max_features.resolve(d),
            min_split: params.min_samples_split.max(2),
            max_depth: params.max_depth.unwrap_or(usize::MAX),
        };
        let grown: Vec<(Tree, Vec<bool>)> = (0..params.n_trees)
            .into_par_iter()
            .map(|t| {
                let mut rng = rng_for(seed, &[TAG_TREE, t as u64]);
                let mut in_bag = vec![!params.bootstrap; n];
                let idx: Vec<usize> = if params.bootstrap {
                    (0..n)
                        .map(|_| {
                            let i = rng.random_range(0..n);
                            in_bag[i] = true;
                            i
                        })
                        .collect()
                } else {
                    (0..n).collect()
                };
                (builder.grow(idx, &mut rng), in_bag)
            })
            .collect();

        let mut importances = vec![0.0; d];
        let mut votes = vec![0u32; n * n_classes];
        for (tree, in_bag) in &grown {
            for (acc, v) in importances.iter_mut().zip(tree.importances(d)) {
                *acc += v;
            }
            for i in (0..n).filter(|&i| !in_bag[i]) {
                votes[i * n_classes + tree.predict_row(xf.row(i))] += 1;
            }
        }
        let total: f64 = importances.iter().sum();
        if total > 0.0 {
            importances.iter_mut().for_each(|v| *v /= total);
        }
        let (mut covered, mut correct) = (0usize, 0usize);
        for i in 0..n {
            let v = &votes[i * n_classes..(i + 1) * n_classes];
            if v.iter().any(|&c| c > 0) {
                covered += 1;
                correct += (argmax_counts(v) == y[i]) as usize;
            }
        }
        Ok(RandomForest {
            n_classes,
            n_features: d,
            params: *params,
            trees: grown.into_iter().map(|(t, _)| t).collect(),
            importances,
            oob_accuracy: (covered > 0).then(|| correct as f64 / covered as f64),
        })
    }

    fn votes(&self, x: &Array2<f64>) -> Vec<Vec<u32>> {
        x.axis_iter(Axis(0))
            .map(|row| {
                let mut v = vec![0u32; self.n_classes];
                for t in &self.trees {
                    v[t.predict_row(row)] += 1;
                }
                v
            })
            .collect()
    }

    /// Majority vote over trees; ties go to the smaller class id.
    pub fn predict<T: Scalar>(&self, x: ArrayView2<'_, T>) -> Result<Vec<usize>> {
        check_predict_input(x, self.n_features)?;
        Ok(self.votes(&to_f64(x)).iter().map(|v| argmax_counts(v)).collect())
    }

    /// Fraction of trees voting for each class.
    pub fn predict_proba<T: Scalar>(&self, x: ArrayView2<'_, T>) -> Result<Array2<f64>> {
        check_predict_input(x, self.n_features)?;
        let votes = self.votes(&to_f64(x));
        let k = self.trees.len() as f64;
        let mut p = Array2::zeros((votes.len(), self.n_classes));
        for (i, v) in votes.iter().enumerate() {
            for (c, &n) in v.iter().enumerate() {
                p[[i, c]] = n as f64 / k;
            }
        }
        Ok(p)
    }
}
