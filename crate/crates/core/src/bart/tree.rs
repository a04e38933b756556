//! Arena-backed regression tree used by the sampler, and its compact
//! read-only form stored with each posterior draw.

use serde::{Deserialize, Serialize};

use crate::matrix::Matrix;
use crate::tree::{CategorySet, SplitKind, SplitRule};

pub const NO_NODE: u32 = u32::MAX;

#[derive(Clone, Debug, PartialEq)]
pub enum NodeKind {
    Leaf { mu: f64 },
    Internal { rule: SplitRule, left: u32, right: u32 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Node {
    pub parent: u32,
    pub depth: u32,
    pub kind: NodeKind,
}

/// Node 0 is always the root. Pruned ids are recycled.
#[derive(Clone, Debug, PartialEq)]
pub struct Tree {
    nodes: Vec<Option<Node>>,
    free: Vec<u32>,
}

impl Default for Tree {
    fn default() -> Self {
        Self::stump(0.0)
    }
}

impl Tree {
    pub fn stump(mu: f64) -> Self {
        Self {
            nodes: vec![Some(Node {
                parent: NO_NODE,
                depth: 0,
                kind: NodeKind::Leaf { mu },
            })],
            free: Vec::new(),
        }
    }

    /// Upper bound on node ids, for id-indexed scratch buffers.
    pub fn capacity(&self) -> usize {
        self.nodes.len()
    }

    pub fn node(&self, id: u32) -> &Node {
        self.nodes[id as usize].as_ref().expect("live node")
    }

    fn node_mut(&mut self, id: u32) -> &mut Node {
        self.nodes[id as usize].as_mut().expect("live node")
    }

    pub fn ids(&self) -> impl Iterator<Item = u32> + '_ {
        self.nodes
            .iter()
            .enumerate()
            .filter(|(_, n)| n.is_some())
            .map(|(i, _)| i as u32)
    }

    pub fn is_leaf(&self, id: u32) -> bool {
        matches!(self.node(id).kind, NodeKind::Leaf { .. })
    }

    pub fn leaves(&self) -> Vec<u32> {
        self.ids().filter(|&id| self.is_leaf(id)).collect()
    }

    pub fn internal(&self) -> Vec<u32> {
        self.ids().filter(|&id| !self.is_leaf(id)).collect()
    }

    /// Internal nodes whose children are both leaves.
    pub fn nog(&self) -> Vec<u32> {
        self.ids()
            .filter(|&id| match self.node(id).kind {
                NodeKind::Internal { left, right, .. } => self.is_leaf(left) && self.is_leaf(right),
                NodeKind::Leaf { .. } => false,
            })
            .collect()
    }

    pub fn n_leaves(&self) -> usize {
        self.ids().filter(|&id| self.is_leaf(id)).count()
    }

    pub fn depth(&self, id: u32) -> usize {
        self.node(id).depth as usize
    }

    pub fn mu(&self, id: u32) -> f64 {
        match self.node(id).kind {
            NodeKind::Leaf { mu } => mu,
            NodeKind::Internal { .. } => panic!("mu of internal node {id}"),
        }
    }

    pub fn set_mu(&mut self, id: u32, value: f64) {
        match &mut self.node_mut(id).kind {
            NodeKind::Leaf { mu } => *mu = value,
            NodeKind::Internal { .. } => panic!("set_mu on internal node {id}"),
        }
    }

    pub fn rule(&self, id: u32) -> Option<&SplitRule> {
        match &self.node(id).kind {
            NodeKind::Internal { rule, .. } => Some(rule),
            NodeKind::Leaf { .. } => None,
        }
    }

    pub fn children(&self, id: u32) -> Option<(u32, u32)> {
        match self.node(id).kind {
            NodeKind::Internal { left, right, .. } => Some((left, right)),
            NodeKind::Leaf { .. } => None,
        }
    }

    fn alloc(&mut self, node: Node) -> u32 {
        match self.free.pop() {
            Some(id) => {
                self.nodes[id as usize] = Some(node);
                id
            }
            None => {
                self.nodes.push(Some(node));
                (self.nodes.len() - 1) as u32
            }
        }
    }

    /// Splits a leaf; both children start with μ = 0.
    pub fn grow(&mut self, leaf: u32, rule: SplitRule) -> (u32, u32) {
        assert!(self.is_leaf(leaf), "grow on internal node {leaf}");
        let depth = self.node(leaf).depth + 1;
        let child = |parent| Node {
            parent,
            depth,
            kind: NodeKind::Leaf { mu: 0.0 },
        };
        let left = self.alloc(child(leaf));
        let right = self.alloc(child(leaf));
        self.node_mut(leaf).kind = NodeKind::Internal { rule, left, right };
        (left, right)
    }

    /// Collapses an internal node whose children are leaves.
    pub fn prune(&mut self, id: u32) {
        let (left, right) = self.children(id).expect("prune on leaf");
        assert!(self.is_leaf(left) && self.is_leaf(right), "prune above internal child");
        for c in [left, right] {
            self.nodes[c as usize] = None;
            self.free.push(c);
        }
        self.node_mut(id).kind = NodeKind::Leaf { mu: 0.0 };
    }

    pub fn set_rule(&mut self, id: u32, new_rule: SplitRule) {
        match &mut self.node_mut(id).kind {
            NodeKind::Internal { rule, .. } => *rule = new_rule,
            NodeKind::Leaf { .. } => panic!("set_rule on leaf {id}"),
        }
    }

    /// Leaf reached by row `i`, starting from `from`.
    pub fn route(&self, x: &Matrix, i: usize, from: u32) -> u32 {
        let mut id = from;
        loop {
            match &self.node(id).kind {
                NodeKind::Leaf { .. } => return id,
                NodeKind::Internal { rule, left, right } => {
                    id = if rule.goes_left(x.get(i, rule.var)) {
                        *left
                    } else {
                        *right
                    };
                }
            }
        }
    }

    /// Nodes of the subtree rooted at `id`, in preorder.
    pub fn subtree(&self, id: u32) -> Vec<u32> {
        let mut out = Vec::new();
        let mut stack = vec![id];
        while let Some(n) = stack.pop() {
            out.push(n);
            if let Some((l, r)) = self.children(n) {
                stack.push(r);
                stack.push(l);
            }
        }
        out
    }

    /// Canonical description of the partition structure, ignoring leaf
    /// values, node ids and missing-value flags.
    pub fn signature(&self) -> String {
        fn rec(t: &Tree, id: u32, out: &mut String) {
            match &t.node(id).kind {
                NodeKind::Leaf { .. } => out.push('.'),
                NodeKind::Internal { rule, left, right } => {
                    match &rule.kind {
                        SplitKind::Threshold(c) => out.push_str(&format!("(x{}<={c} ", rule.var)),
                        SplitKind::Subset(s) => out.push_str(&format!("(x{} in {:?} ", rule.var, s.codes())),
                    }
                    rec(t, *left, out);
                    out.push(' ');
                    rec(t, *right, out);
                    out.push(')');
                }
            }
        }
        let mut s = String::new();
        rec(self, 0, &mut s);
        s
    }

    pub fn flatten(&self) -> FlatTree {
        let mut flat = FlatTree::default();
        fn rec(t: &Tree, id: u32, flat: &mut FlatTree) -> u32 {
            let slot = flat.nodes.len() as u32;
            match &t.node(id).kind {
                NodeKind::Leaf { mu } => flat.nodes.push(FlatNode::leaf(*mu)),
                NodeKind::Internal { rule, left, right } => {
                    flat.nodes.push(FlatNode::leaf(0.0));
                    let (value, subset) = match &rule.kind {
                        SplitKind::Threshold(c) => (*c, NO_NODE),
                        SplitKind::Subset(s) => {
                            flat.sets.push(s.clone());
                            (0.0, (flat.sets.len() - 1) as u32)
                        }
                    };
                    rec(t, *left, flat);
                    let r = rec(t, *right, flat);
                    flat.nodes[slot as usize] = FlatNode {
                        var: rule.var as u32,
                        right: r,
                        subset,
                        missing_left: rule.missing_left,
                        value,
                    };
                }
            }
            slot
        }
        rec(self, 0, &mut flat);
        flat
    }
}

/// Preorder node: the left child of an internal node immediately follows it.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlatNode {
    /// `NO_NODE` marks a leaf.
    pub var: u32,
    pub right: u32,
    /// Index into `FlatTree::sets`, or `NO_NODE` for a threshold split.
    pub subset: u32,
    pub missing_left: bool,
    /// Leaf value or threshold.
    pub value: f64,
}

impl FlatNode {
    fn leaf(mu: f64) -> Self {
        Self {
            var: NO_NODE,
            right: NO_NODE,
            subset: NO_NODE,
            missing_left: false,
            value: mu,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FlatTree {
    pub nodes: Vec<FlatNode>,
    pub sets: Vec<CategorySet>,
}

impl FlatTree {
    #[inline]
    pub fn eval(&self, x: &Matrix, i: usize) -> f64 {
        let mut k = 0usize;
        loop {
            let n = &self.nodes[k];
            if n.var == NO_NODE {
                return n.value;
            }
            let v = x.get(i, n.var as usize);
            let left = if v.is_nan() {
                n.missing_left
            } else if n.subset == NO_NODE {
                v <= n.value
            } else {
                self.sets[n.subset as usize].contains(v as usize)
            };
            k = if left { k + 1 } else { n.right as usize };
        }
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| n.var == NO_NODE).count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn data() -> Matrix {
        Matrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0], vec![2.0, f64::NAN], vec![3.0, 2.0]]).unwrap()
    }

    #[test]
    fn grow_then_prune_restores_stump() {
        let mut t = Tree::stump(0.0);
        let (l, r) = t.grow(0, SplitRule::threshold(0, 1.5, true));
        assert_eq!(t.depth(l), 1);
        assert_eq!(t.nog(), vec![0]);
        assert_eq!(t.leaves(), vec![l, r]);
        t.prune(0);
        assert_eq!(t.signature(), Tree::stump(0.0).signature());
        assert_eq!(t.n_leaves(), 1);
    }

    #[test]
    fn flat_eval_matches_routing() {
        let x = data();
        let mut t = Tree::stump(0.0);
        let (l, r) = t.grow(0, SplitRule::threshold(0, 1.5, true));
        let (rl, rr) = t.grow(r, SplitRule::threshold(1, 1.0, false));
        for (id, mu) in [(l, -1.0), (rl, 2.0), (rr, 5.0)] {
            t.set_mu(id, mu);
        }
        let flat = t.flatten();
        for i in 0..x.n_rows() {
            assert_eq!(flat.eval(&x, i), t.mu(t.route(&x, i, 0)));
        }
        // row 2 has a missing second predictor and goes right
        assert_eq!(flat.eval(&x, 2), 5.0);
        assert_eq!(flat.n_leaves(), 3);
    }

    #[test]
    fn node_ids_are_recycled() {
        let mut t = Tree::stump(0.0);
        t.grow(0, SplitRule::threshold(0, 1.5, true));
        t.prune(0);
        let (l, r) = t.grow(0, SplitRule::threshold(0, 0.5, true));
        assert!(l.max(r) <= 2);
        assert_eq!(t.capacity(), 3);
    }
}
