//! Rooted trees describing a multi-stage system.
//!
//! Every non-leaf node is a decision stage that forwards the job to one of
//! its children; leaves are the terminal configurations that emit a cost.

use std::collections::VecDeque;
use std::fmt;
use std::path::Path;

use crate::error::{Error, Result};

/// Dense node index. The root is always `NodeId(0)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub usize);

impl NodeId {
    pub const ROOT: NodeId = NodeId(0);

    #[inline]
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Immutable rooted tree.
///
/// Leaves are indexed twice: by their [`NodeId`] and by their position in
/// ascending id order ("leaf index"). Cost vectors are laid out by leaf index.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeTopology {
    children: Vec<Vec<NodeId>>,
    parent: Vec<Option<NodeId>>,
    hops: Vec<usize>,
    leaves: Vec<NodeId>,
    leaf_index: Vec<Option<usize>>,
    depth: usize,
}

impl TreeTopology {
    /// Builds a tree from per-node child lists (`children[i]` are the children
    /// of node `i`). Node 0 must be the root.
    pub fn from_children(children: Vec<Vec<NodeId>>) -> Result<Self> {
        let n = children.len();
        if n < 2 {
            return Err(Error::Topology(
                "a tree needs a root and at least one child".into(),
            ));
        }
        let mut parent = vec![None; n];
        for (i, kids) in children.iter().enumerate() {
            for &c in kids {
                if c.0 >= n {
                    return Err(Error::Topology(format!(
                        "node {i} lists unknown child {c}"
                    )));
                }
                if c.0 == 0 {
                    return Err(Error::Topology(format!(
                        "node {i} lists the root as a child"
                    )));
                }
                if let Some(p) = parent[c.0] {
                    return Err(Error::Topology(format!(
                        "node {c} has two parents ({p} and {i})"
                    )));
                }
                parent[c.0] = Some(NodeId(i));
            }
        }
        if children[0].is_empty() {
            return Err(Error::Topology("the root has no children".into()));
        }

        // Reachability from the root, which also rules out cycles since every
        // node has at most one parent.
        let mut hops = vec![usize::MAX; n];
        hops[0] = 0;
        let mut queue = VecDeque::from([0usize]);
        while let Some(i) = queue.pop_front() {
            for c in &children[i] {
                hops[c.0] = hops[i] + 1;
                queue.push_back(c.0);
            }
        }
        if let Some(orphan) = hops.iter().position(|&h| h == usize::MAX) {
            return Err(Error::Topology(format!(
                "node {orphan} is not reachable from the root"
            )));
        }

        let leaves: Vec<NodeId> = (0..n)
            .filter(|&i| children[i].is_empty())
            .map(NodeId)
            .collect();
        let mut leaf_index = vec![None; n];
        for (k, leaf) in leaves.iter().enumerate() {
            leaf_index[leaf.0] = Some(k);
        }
        let depth = leaves.iter().map(|l| hops[l.0]).max().unwrap_or(0);

        Ok(Self {
            children,
            parent,
            hops,
            leaves,
            leaf_index,
            depth,
        })
    }

    /// Complete `fanout`-ary tree with `depth` non-leaf levels, ids assigned
    /// breadth first.
    pub fn uniform(fanout: usize, depth: usize) -> Result<Self> {
        if fanout < 2 {
            return Err(Error::param("fanout", format!("must be >= 2, got {fanout}")));
        }
        if depth < 1 {
            return Err(Error::param("depth", format!("must be >= 1, got {depth}")));
        }
        let levels = u32::try_from(depth + 1).map_err(|_| Error::param("depth", "too large"))?;
        let count = fanout
            .checked_pow(levels)
            .map(|p| (p - 1) / (fanout - 1))
            .filter(|&c| c <= 1 << 26)
            .ok_or_else(|| Error::param("depth", "tree would exceed 2^26 nodes"))?;
        let internal = count - fanout.pow(depth as u32);
        let children = (0..count)
            .map(|i| {
                if i < internal {
                    (0..fanout).map(|k| NodeId(i * fanout + 1 + k)).collect()
                } else {
                    Vec::new()
                }
            })
            .collect();
        Self::from_children(children)
    }

    /// The two-child chain used for the lower-bound construction.
    ///
    /// Node `k` of the construction (1-based) has id `k - 1`: non-leaves are
    /// ids `0..depth`, leaves are ids `depth..=2 * depth`. For `i < depth`
    /// the non-leaf with id `i - 1` has children `[leaf depth + i - 1, i]`;
    /// the last non-leaf has the two leaves `2 * depth - 1` and `2 * depth`.
    pub fn chain(depth: usize) -> Result<Self> {
        if depth < 2 {
            return Err(Error::param("depth", format!("chain needs depth >= 2, got {depth}")));
        }
        let mut children = vec![Vec::new(); 2 * depth + 1];
        for i in 1..depth {
            children[i - 1] = vec![NodeId(depth + i - 1), NodeId(i)];
        }
        children[depth - 1] = vec![NodeId(2 * depth - 1), NodeId(2 * depth)];
        Self::from_children(children)
    }

    /// Parses an adjacency-list description:
    ///
    /// ```text
    /// # id: child ids
    /// 0: 1 2
    /// 1: 3 4
    /// 2: 5 6
    /// ```
    ///
    /// Nodes not listed on the left are leaves. Ids must be dense.
    pub fn parse_adjacency(text: &str) -> Result<Self> {
        let mut lists: Vec<(usize, Vec<usize>)> = Vec::new();
        let mut max_id = 0usize;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (lhs, rhs) = line.split_once(':').ok_or_else(|| {
                Error::Topology(format!("line {}: expected `id: child ...`", lineno + 1))
            })?;
            let parse = |s: &str| {
                s.trim().parse::<usize>().map_err(|_| {
                    Error::Topology(format!("line {}: `{}` is not a node id", lineno + 1, s.trim()))
                })
            };
            let id = parse(lhs)?;
            let kids = rhs
                .split(|c: char| c.is_whitespace() || c == ',')
                .filter(|s| !s.is_empty())
                .map(parse)
                .collect::<Result<Vec<_>>>()?;
            max_id = kids.iter().copied().fold(max_id.max(id), usize::max);
            lists.push((id, kids));
        }
        let mut children = vec![Vec::new(); max_id + 1];
        let mut seen = vec![false; max_id + 1];
        for (id, kids) in lists {
            if std::mem::replace(&mut seen[id], true) {
                return Err(Error::Topology(format!("node {id} listed twice")));
            }
            children[id] = kids.into_iter().map(NodeId).collect();
        }
        Self::from_children(children)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_adjacency(&text)
    }

    pub fn node_count(&self) -> usize {
        self.children.len()
    }

    /// Number of hops from the root to the deepest leaf.
    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn max_fanout(&self) -> usize {
        self.children.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn children(&self, node: NodeId) -> &[NodeId] {
        &self.children[node.0]
    }

    pub fn parent(&self, node: NodeId) -> Option<NodeId> {
        self.parent[node.0]
    }

    pub fn is_leaf(&self, node: NodeId) -> bool {
        self.children[node.0].is_empty()
    }

    pub fn contains(&self, node: NodeId) -> bool {
        node.0 < self.children.len()
    }

    /// Leaves in ascending id order.
    pub fn leaves(&self) -> &[NodeId] {
        &self.leaves
    }

    pub fn leaf_count(&self) -> usize {
        self.leaves.len()
    }

    /// Position of `node` within [`leaves`](Self::leaves), if it is a leaf.
    pub fn leaf_index(&self, node: NodeId) -> Option<usize> {
        self.leaf_index.get(node.0).copied().flatten()
    }

    pub fn internal_nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..self.node_count())
            .map(NodeId)
            .filter(|&n| !self.is_leaf(n))
    }

    /// True when every child of `node` is a leaf.
    pub fn children_all_leaves(&self, node: NodeId) -> bool {
        self.children(node).iter().all(|&c| self.is_leaf(c))
    }

    pub fn hops_from_root(&self, node: NodeId) -> Result<usize> {
        self.hops
            .get(node.0)
            .copied()
            .ok_or(Error::UnknownNode(node))
    }

    /// Node ids on the path root → `node`, inclusive.
    pub fn path_to(&self, node: NodeId) -> Result<Vec<NodeId>> {
        if !self.contains(node) {
            return Err(Error::UnknownNode(node));
        }
        let mut path = vec![node];
        let mut cur = node;
        while let Some(p) = self.parent(cur) {
            path.push(p);
            cur = p;
        }
        path.reverse();
        Ok(path)
    }

    /// True when every leaf sits exactly `depth()` hops from the root.
    pub fn is_uniform_depth(&self) -> bool {
        self.leaves.iter().all(|l| self.hops[l.0] == self.depth)
    }

    /// Non-leaf ids ordered so that children come before their parents.
    pub(crate) fn bottom_up(&self) -> Vec<NodeId> {
        let mut order: Vec<NodeId> = self.internal_nodes().collect();
        order.sort_by_key(|n| std::cmp::Reverse(self.hops[n.0]));
        order
    }

    /// Adjacency-list text accepted by [`parse_adjacency`](Self::parse_adjacency).
    pub fn to_adjacency(&self) -> String {
        let mut out = String::new();
        for n in self.internal_nodes() {
            let kids: Vec<String> = self.children(n).iter().map(|c| c.to_string()).collect();
            out.push_str(&format!("{n}: {}\n", kids.join(" ")));
        }
        out
    }
}
