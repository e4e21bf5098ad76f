use serde::{Deserialize, Serialize};

use crate::matrix::Matrix;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
#[serde(rename_all = "snake_case")]
pub enum Node<T: Scalar> {
    Leaf {
        value: T,
    },
    Split {
        feature: usize,
        /// Rows with `x[feature] < threshold` go left.
        threshold: T,
        left: usize,
        right: usize,
    },
}

/// Regression tree stored as a node arena; node 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Tree<T: Scalar> {
    pub nodes: Vec<Node<T>>,
}

impl<T: Scalar> Tree<T> {
    pub fn predict_row(&self, x: &[T]) -> T {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { value } => return *value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x[*feature] < *threshold { *left } else { *right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go<T: Scalar>(t: &Tree<T>, i: usize) -> usize {
            match &t.nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(t, *left).max(go(t, *right)),
            }
        }
        go(self, 0)
    }
}

pub(super) struct TreeBuilder<'a, T: Scalar> {
    pub x: &'a Matrix<T>,
    /// Row indices sorted by each feature, computed once per fit.
    pub sorted: &'a [Vec<usize>],
    pub grad: &'a [T],
    pub hess: &'a [T],
    pub lambda: T,
    pub max_depth: usize,
    pub min_child_hess: T,
}

struct BestSplit<T> {
    gain: T,
    feature: usize,
    threshold: T,
}

impl<T: Scalar> TreeBuilder<'_, T> {
    /// Exact greedy tree on second-order statistics with Newton leaf values
    /// `-G / (H + lambda)`.
    pub fn build(&self) -> Tree<T> {
        let mut tree = Tree { nodes: Vec::new() };
        let member = vec![true; self.x.rows()];
        self.grow(&mut tree, &member, 0);
        tree
    }

    fn leaf_value(&self, g: T, h: T) -> T {
        -g / (h + self.lambda)
    }

    fn score(&self, g: T, h: T) -> T {
        g * g / (h + self.lambda)
    }

    fn grow(&self, tree: &mut Tree<T>, member: &[bool], depth: usize) -> usize {
        let idx = tree.nodes.len();
        let (g, h) = member
            .iter()
            .enumerate()
            .filter(|(_, &m)| m)
            .fold((T::zero(), T::zero()), |(g, h), (i, _)| (g + self.grad[i], h + self.hess[i]));
        tree.nodes.push(Node::Leaf {
            value: self.leaf_value(g, h),
        });
        if depth >= self.max_depth {
            return idx;
        }
        let Some(best) = self.best_split(member, g, h) else {
            return idx;
        };
        let (mut lm, mut rm) = (vec![false; member.len()], vec![false; member.len()]);
        for (i, &m) in member.iter().enumerate() {
            if m {
                if self.x.get(i, best.feature) < best.threshold {
                    lm[i] = true;
                } else {
                    rm[i] = true;
                }
            }
        }
        let left = self.grow(tree, &lm, depth + 1);
        let right = self.grow(tree, &rm, depth + 1);
        tree.nodes[idx] = Node::Split {
            feature: best.feature,
            threshold: best.threshold,
            left,
            right,
        };
        idx
    }

    fn best_split(&self, member: &[bool], g: T, h: T) -> Option<BestSplit<T>> {
        let parent = self.score(g, h);
        let mut best: Option<BestSplit<T>> = None;
        for (f, order) in self.sorted.iter().enumerate() {
            let (mut gl, mut hl) = (T::zero(), T::zero());
            let mut prev: Option<usize> = None;
            for &i in order.iter().filter(|&&i| member[i]) {
                if let Some(p) = prev {
                    let (a, b) = (self.x.get(p, f), self.x.get(i, f));
                    let hr = h - hl;
                    if a < b && hl >= self.min_child_hess && hr >= self.min_child_hess {
                        let gain = self.score(gl, hl) + self.score(g - gl, hr) - parent;
                        if gain > T::zero() && best.as_ref().is_none_or(|s| gain > s.gain) {
                            best = Some(BestSplit {
                                gain,
                                feature: f,
                                threshold: a + (b - a) / T::lit(2.0),
                            });
                        }
                    }
                }
                gl = gl + self.grad[i];
                hl = hl + self.hess[i];
                prev = Some(i);
            }
        }
        best
    }
}
