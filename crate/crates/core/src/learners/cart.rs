//! Regression tree grown greedily on squared error.
//!
//! Candidate thresholds are midpoints between consecutive distinct sorted
//! feature values; a row goes left when `x[f] <= threshold`. Among equally
//! good splits the first by (feature index, threshold) wins. A node becomes
//! a leaf when its targets are all equal, a constraint blocks splitting, or
//! no split reduces the squared error.

use ndarray::ArrayView2;
use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Rng;

/// Relative margin below which two split scores count as equal.
const TIE_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeParams {
    /// `None` means unlimited.
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            max_depth: None,
            min_samples_split: 2,
            min_samples_leaf: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Leaf {
        value: f64,
        n: usize,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub params: TreeParams,
    pub n_features: usize,
    /// Node 0 is the root.
    pub nodes: Vec<Node>,
}

struct Builder<'a> {
    x: ArrayView2<'a, f64>,
    y: &'a [f64],
    params: TreeParams,
    max_features: Option<usize>,
    nodes: Vec<Node>,
}

#[derive(Debug, Clone, Copy)]
struct BestSplit {
    feature: usize,
    threshold: f64,
    score: f64,
}

impl Builder<'_> {
    fn leaf(&mut self, rows: &[usize]) -> usize {
        let value = rows.iter().map(|&r| self.y[r]).sum::<f64>() / rows.len() as f64;
        self.nodes.push(Node::Leaf {
            value,
            n: rows.len(),
        });
        self.nodes.len() - 1
    }

    /// Maximises `sL²/nL + sR²/nR`, equivalent to minimising child SSE.
    fn best_split(&self, rows: &[usize], features: &[usize]) -> Option<BestSplit> {
        let n = rows.len();
        let min_leaf = self.params.min_samples_leaf.max(1);
        let total: f64 = rows.iter().map(|&r| self.y[r]).sum();
        let mut best: Option<BestSplit> = None;
        let mut order = rows.to_vec();
        for &f in features {
            order.copy_from_slice(rows);
            order.sort_by(|&a, &b| self.x[[a, f]].total_cmp(&self.x[[b, f]]).then(a.cmp(&b)));
            let mut left = 0.0;
            for i in 1..n {
                left += self.y[order[i - 1]];
                let (lo, hi) = (self.x[[order[i - 1], f]], self.x[[order[i], f]]);
                if lo == hi || i < min_leaf || n - i < min_leaf {
                    continue;
                }
                let right = total - left;
                let score = left * left / i as f64 + right * right / (n - i) as f64;
                if best.is_none_or(|b| score > b.score + TIE_EPS * b.score.abs()) {
                    best = Some(BestSplit {
                        feature: f,
                        threshold: lo + (hi - lo) / 2.0,
                        score,
                    });
                }
            }
        }
        let parent = total * total / n as f64;
        let scale: f64 = rows.iter().map(|&r| self.y[r] * self.y[r]).sum();
        best.filter(|b| b.score - parent > TIE_EPS * scale)
    }

    fn grow(&mut self, rows: Vec<usize>, depth: usize, rng: &mut Option<Rng>) -> usize {
        let first = self.y[rows[0]];
        let pure = rows.iter().all(|&r| self.y[r] == first);
        let depth_ok = self.params.max_depth.is_none_or(|d| depth < d);
        if pure || !depth_ok || rows.len() < self.params.min_samples_split.max(2) {
            return self.leaf(&rows);
        }
        let p = self.x.ncols();
        let features: Vec<usize> = match (self.max_features, rng.as_mut()) {
            (Some(m), Some(r)) if m < p => {
                let mut f = sample(r, p, m).into_vec();
                f.sort_unstable();
                f
            }
            _ => (0..p).collect(),
        };
        let Some(split) = self.best_split(&rows, &features) else {
            return self.leaf(&rows);
        };
        let (l, r): (Vec<usize>, Vec<usize>) = rows
            .iter()
            .partition(|&&i| self.x[[i, split.feature]] <= split.threshold);
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf { value: 0.0, n: 0 });
        let left = self.grow(l, depth + 1, rng);
        let right = self.grow(r, depth + 1, rng);
        self.nodes[id] = Node::Split {
            feature: split.feature,
            threshold: split.threshold,
            left,
            right,
        };
        id
    }
}

/// Grows a tree on the given rows (repeats allowed, as in a bootstrap
/// sample). With `max_features` and an RNG each node considers a random
/// feature subset.
pub(crate) fn grow(
    x: ArrayView2<'_, f64>,
    y: &[f64],
    rows: Vec<usize>,
    params: TreeParams,
    max_features: Option<usize>,
    mut rng: Option<Rng>,
) -> Result<Tree> {
    if rows.is_empty() {
        return Err(Error::Empty("no training rows".into()));
    }
    if params.min_samples_leaf == 0 || params.min_samples_split == 0 || params.max_depth == Some(0)
    {
        return Err(Error::InvalidArgument(format!(
            "invalid tree parameters {params:?}"
        )));
    }
    let mut b = Builder {
        x,
        y,
        params,
        max_features,
        nodes: Vec::new(),
    };
    b.grow(rows, 0, &mut rng);
    Ok(Tree {
        params,
        n_features: x.ncols(),
        nodes: b.nodes,
    })
}

pub fn fit(x: ArrayView2<'_, f64>, y: &[f64], params: TreeParams) -> Result<Tree> {
    if x.nrows() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.nrows(),
            got: y.len(),
        });
    }
    grow(x, y, (0..y.len()).collect(), params, None, None)
}

impl Tree {
    pub fn leaf_of(&self, x: &[f64]) -> usize {
        let mut id = 0;
        loop {
            match self.nodes[id] {
                Node::Leaf { .. } => return id,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => id = if x[feature] <= threshold { left } else { right },
            }
        }
    }

    pub fn predict_one(&self, x: &[f64]) -> f64 {
        match self.nodes[self.leaf_of(x)] {
            Node::Leaf { value, .. } => value,
            Node::Split { .. } => unreachable!(),
        }
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, Node::Leaf { .. }))
            .count()
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], id: usize) -> usize {
            match nodes[id] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }
}
