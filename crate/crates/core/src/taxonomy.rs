//! Class hierarchy: parsing, validation and path queries.
//!
//! A taxonomy is an immutable rooted tree. Its leaves are the labelable
//! classes and carry dense ordinals `0..leaf_count()`. Every query other
//! modules need (root-to-leaf paths, shared path prefixes, coarsest
//! ancestors, parents of leaves) is answered from tables precomputed at
//! construction.
//!
//! The on-disk format is one `child<TAB>parent` edge per line. Blank lines
//! and lines starting with `#` are ignored. The root is implicit: it is the
//! unique name that never appears as a child.

use std::collections::HashMap;
use std::fmt;

use log::warn;
use thiserror::Error;

use crate::fnv::fnv1a64;

/// Path lengths beyond this leave `2^-j` path weights below `f64` epsilon.
pub const DEPTH_WARNING: usize = 60;

/// Suffix given to the leaves created by [`Taxonomy::augment_with_other`].
pub const OTHER_SUFFIX: &str = "/other";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TaxonomyError {
    #[error("taxonomy is empty")]
    Empty,
    #[error("line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("cycle detected through node `{node}`")]
    Cycle { node: String },
    #[error("multiple roots: {}", roots.join(", "))]
    MultipleRoots { roots: Vec<String> },
    #[error(
        "line {line}: `{child}` already has parent `{first}`, cannot also have parent `{second}`"
    )]
    ConflictingParent {
        line: usize,
        child: String,
        first: String,
        second: String,
    },
    #[error("node name `{name}` already exists")]
    NameCollision { name: String },
    #[error("leaf ordinal {leaf} out of range (taxonomy has {leaves} leaves)")]
    LeafOutOfRange { leaf: usize, leaves: usize },
    #[error("unknown label `{0}`")]
    UnknownLabel(String),
    #[error("label `{0}` names the root")]
    RootLabel(String),
    #[error("label `{0}` names an internal node (try augmenting with \"other\" leaves)")]
    InternalLabel(String),
}

/// Dense handle into a taxonomy's node table. Node 0 is always the root.
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
        write!(f, "#{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Taxonomy {
    names: Vec<String>,
    parent: Vec<Option<NodeId>>,
    children: Vec<Vec<NodeId>>,
    by_name: HashMap<String, NodeId>,
    leaves: Vec<NodeId>,
    leaf_ordinal: Vec<Option<usize>>,
    paths: Vec<Vec<NodeId>>,
    // Breadth-first order from the root; parents always precede children.
    top_down: Vec<NodeId>,
}

impl Taxonomy {
    /// Parses `child<TAB>parent` lines.
    pub fn parse(text: &str) -> Result<Self, TaxonomyError> {
        let mut edges = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let mut fields = raw.split('\t');
            let (child, parent) = match (fields.next(), fields.next(), fields.next()) {
                (Some(c), Some(p), None) => (c.trim(), p.trim()),
                (_, None, _) => {
                    return Err(TaxonomyError::Malformed {
                        line,
                        reason: "expected `child<TAB>parent`, found no tab".into(),
                    })
                }
                _ => {
                    return Err(TaxonomyError::Malformed {
                        line,
                        reason: "expected exactly two tab-separated fields".into(),
                    })
                }
            };
            if child.is_empty() || parent.is_empty() {
                return Err(TaxonomyError::Malformed {
                    line,
                    reason: "empty node name".into(),
                });
            }
            edges.push((child.to_owned(), parent.to_owned(), line));
        }
        Self::build(edges)
    }

    /// Builds a taxonomy from `(child, parent)` pairs, in declaration order.
    /// Errors report the 1-based position of the offending pair as its line.
    pub fn from_edges<I, C, P>(edges: I) -> Result<Self, TaxonomyError>
    where
        I: IntoIterator<Item = (C, P)>,
        C: Into<String>,
        P: Into<String>,
    {
        let edges = edges
            .into_iter()
            .enumerate()
            .map(|(i, (c, p))| (c.into(), p.into(), i + 1))
            .collect();
        Self::build(edges)
    }

    /// A one-level hierarchy: every name is a leaf directly under `root`.
    pub fn flat<S: AsRef<str>>(root: &str, leaves: &[S]) -> Result<Self, TaxonomyError> {
        Self::from_edges(
            leaves
                .iter()
                .map(|l| (l.as_ref().to_owned(), root.to_owned())),
        )
    }

    fn build(edges: Vec<(String, String, usize)>) -> Result<Self, TaxonomyError> {
        if edges.is_empty() {
            return Err(TaxonomyError::Empty);
        }

        // Provisional ids in order of first mention.
        let mut names: Vec<String> = Vec::new();
        let mut index: HashMap<String, usize> = HashMap::new();
        let mut intern = |name: String, names: &mut Vec<String>| -> usize {
            *index.entry(name.clone()).or_insert_with(|| {
                names.push(name);
                names.len() - 1
            })
        };

        let mut parent_of: Vec<Option<usize>> = Vec::new();
        let mut declared: Vec<usize> = Vec::new();
        for (child, parent, line) in edges {
            if child == parent {
                return Err(TaxonomyError::Cycle { node: child });
            }
            let c = intern(child, &mut names);
            let p = intern(parent, &mut names);
            parent_of.resize(names.len(), None);
            match parent_of[c] {
                Some(existing) if existing != p => {
                    return Err(TaxonomyError::ConflictingParent {
                        line,
                        child: names[c].clone(),
                        first: names[existing].clone(),
                        second: names[p].clone(),
                    });
                }
                Some(_) => {}
                None => {
                    parent_of[c] = Some(p);
                    declared.push(c);
                }
            }
        }

        // Walk every parent chain once; a chain that revisits a node of the
        // current walk is a cycle.
        const UNSEEN: usize = usize::MAX;
        const DONE: usize = usize::MAX - 1;
        let mut state = vec![UNSEEN; names.len()];
        for start in 0..names.len() {
            let mut node = start;
            while state[node] == UNSEEN {
                state[node] = start;
                match parent_of[node] {
                    Some(p) => node = p,
                    None => break,
                }
            }
            if state[node] == start && parent_of[node].is_some() {
                return Err(TaxonomyError::Cycle {
                    node: names[node].clone(),
                });
            }
            let mut node = start;
            while state[node] == start {
                state[node] = DONE;
                match parent_of[node] {
                    Some(p) => node = p,
                    None => break,
                }
            }
        }

        let roots: Vec<usize> = (0..names.len())
            .filter(|&i| parent_of[i].is_none())
            .collect();
        if roots.len() != 1 {
            return Err(TaxonomyError::MultipleRoots {
                roots: roots.into_iter().map(|r| names[r].clone()).collect(),
            });
        }

        // Final ids: root first, then nodes in order of their declaring line.
        let mut remap = vec![0usize; names.len()];
        let mut order = Vec::with_capacity(names.len());
        order.push(roots[0]);
        order.extend(declared.iter().copied());
        for (new, &old) in order.iter().enumerate() {
            remap[old] = new;
        }
        let final_names: Vec<String> = order.iter().map(|&old| names[old].clone()).collect();
        let final_parents: Vec<Option<NodeId>> = order
            .iter()
            .map(|&old| parent_of[old].map(|p| NodeId(remap[p])))
            .collect();

        Ok(Self::from_parts(final_names, final_parents))
    }

    /// Assembles the lookup tables. `parent` must describe a validated tree
    /// rooted at node 0. Siblings are ordered by ascending id.
    fn from_parts(names: Vec<String>, parent: Vec<Option<NodeId>>) -> Self {
        let n = names.len();
        let mut children = vec![Vec::new(); n];
        for (id, p) in parent.iter().enumerate() {
            if let Some(p) = p {
                children[p.0].push(NodeId(id));
            }
        }

        let mut top_down = Vec::with_capacity(n);
        top_down.push(NodeId::ROOT);
        let mut head = 0;
        while head < top_down.len() {
            let node = top_down[head];
            top_down.extend(children[node.0].iter().copied());
            head += 1;
        }

        let mut leaves = Vec::new();
        let mut leaf_ordinal = vec![None; n];
        for id in 0..n {
            if children[id].is_empty() && id != 0 {
                leaf_ordinal[id] = Some(leaves.len());
                leaves.push(NodeId(id));
            }
        }

        let paths: Vec<Vec<NodeId>> = leaves
            .iter()
            .map(|&leaf| {
                let mut path = vec![leaf];
                let mut node = leaf;
                while let Some(p) = parent[node.0] {
                    path.push(p);
                    node = p;
                }
                path.reverse();
                path
            })
            .collect();

        let depth = paths.iter().map(Vec::len).max().unwrap_or(1);
        if depth > DEPTH_WARNING {
            warn!(
                "taxonomy path length {depth} exceeds {DEPTH_WARNING}; deep path weights fall below f64 precision"
            );
        }

        let by_name = names
            .iter()
            .enumerate()
            .map(|(i, name)| (name.clone(), NodeId(i)))
            .collect();

        Taxonomy {
            names,
            parent,
            children,
            by_name,
            leaves,
            leaf_ordinal,
            paths,
            top_down,
        }
    }

    /// Adds a leaf `<name>/other` as the last child of every internal
    /// non-root node, so that labels attached to internal nodes become
    /// ordinary leaves. Existing leaf ordinals are preserved.
    pub fn augment_with_other(&self) -> Result<Self, TaxonomyError> {
        let mut names = self.names.clone();
        let mut parent = self.parent.clone();
        for id in 1..self.node_count() {
            if self.children[id].is_empty() {
                continue;
            }
            let name = format!("{}{}", self.names[id], OTHER_SUFFIX);
            if self.by_name.contains_key(&name) {
                return Err(TaxonomyError::NameCollision { name });
            }
            names.push(name);
            parent.push(Some(NodeId(id)));
        }
        Ok(Self::from_parts(names, parent))
    }

    /// Serializes to the `child<TAB>parent` format. Parsing the output yields
    /// an identical taxonomy.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for id in 1..self.node_count() {
            let p = self.parent[id].expect("non-root node has a parent");
            out.push_str(&self.names[id]);
            out.push('\t');
            out.push_str(&self.names[p.0]);
            out.push('\n');
        }
        out
    }

    /// FNV-1a 64 of the canonical serialization; guards against leaf-ordinal
    /// drift between a model and the taxonomy it is used with.
    pub fn checksum(&self) -> u64 {
        fnv1a64(self.to_tsv().as_bytes())
    }

    pub fn node_count(&self) -> usize {
        self.names.len()
    }

    pub fn leaf_count(&self) -> usize {
        self.leaves.len()
    }

    pub fn root(&self) -> NodeId {
        NodeId::ROOT
    }

    pub fn name(&self, node: NodeId) -> &str {
        &self.names[node.0]
    }

    pub fn node(&self, name: &str) -> Option<NodeId> {
        self.by_name.get(name).copied()
    }

    pub fn parent(&self, node: NodeId) -> Option<NodeId> {
        self.parent[node.0]
    }

    pub fn children(&self, node: NodeId) -> &[NodeId] {
        &self.children[node.0]
    }

    pub fn is_leaf(&self, node: NodeId) -> bool {
        self.leaf_ordinal[node.0].is_some()
    }

    /// Node ids in breadth-first order; every parent precedes its children.
    pub fn top_down(&self) -> &[NodeId] {
        &self.top_down
    }

    pub fn leaf_ordinal(&self, node: NodeId) -> Option<usize> {
        self.leaf_ordinal[node.0]
    }

    pub fn leaf_name(&self, leaf: usize) -> Result<&str, TaxonomyError> {
        self.check_leaf(leaf)?;
        Ok(&self.names[self.leaves[leaf].0])
    }

    pub fn leaf_node(&self, leaf: usize) -> Result<NodeId, TaxonomyError> {
        self.check_leaf(leaf)?;
        Ok(self.leaves[leaf])
    }

    pub fn check_leaf(&self, leaf: usize) -> Result<(), TaxonomyError> {
        if leaf < self.leaves.len() {
            Ok(())
        } else {
            Err(TaxonomyError::LeafOutOfRange {
                leaf,
                leaves: self.leaves.len(),
            })
        }
    }

    /// Maps a corpus label to a leaf ordinal. Leaves resolve to themselves,
    /// internal nodes to their `<name>/other` leaf if present.
    pub fn resolve_label(&self, name: &str) -> Result<usize, TaxonomyError> {
        let node = self
            .node(name)
            .ok_or_else(|| TaxonomyError::UnknownLabel(name.to_owned()))?;
        if node == NodeId::ROOT {
            return Err(TaxonomyError::RootLabel(name.to_owned()));
        }
        if let Some(leaf) = self.leaf_ordinal(node) {
            return Ok(leaf);
        }
        // An internal label falls into its `other` leaf when one exists.
        self.node(&format!("{name}/other"))
            .filter(|&o| self.parent(o) == Some(node))
            .and_then(|o| self.leaf_ordinal(o))
            .ok_or_else(|| TaxonomyError::InternalLabel(name.to_owned()))
    }

    /// Nodes from the root to `leaf`, both inclusive.
    pub fn path(&self, leaf: usize) -> Result<&[NodeId], TaxonomyError> {
        self.check_leaf(leaf)?;
        Ok(&self.paths[leaf])
    }

    /// Longest root-to-leaf path, counted in nodes (the root counts as 1).
    pub fn depth(&self) -> usize {
        self.paths.iter().map(Vec::len).max().unwrap_or(1)
    }

    /// Number of leading nodes the two root-to-leaf paths have in common,
    /// counting the root. Equals the path length exactly when `a == b`.
    pub fn shared_prefix_len(&self, a: usize, b: usize) -> Result<usize, TaxonomyError> {
        self.check_leaf(a)?;
        self.check_leaf(b)?;
        Ok(self.shared_prefix_unchecked(a, b))
    }

    #[inline]
    pub(crate) fn shared_prefix_unchecked(&self, a: usize, b: usize) -> usize {
        self.paths[a]
            .iter()
            .zip(&self.paths[b])
            .take_while(|(x, y)| x == y)
            .count()
    }

    /// The child of the root on the leaf's path. For a flat hierarchy this
    /// is the leaf itself.
    pub fn coarsest_ancestor(&self, leaf: usize) -> Result<NodeId, TaxonomyError> {
        Ok(self.path(leaf)?[1])
    }

    /// The node directly above the leaf; the root for a flat hierarchy.
    pub fn parent_of_leaf(&self, leaf: usize) -> Result<NodeId, TaxonomyError> {
        let path = self.path(leaf)?;
        Ok(path[path.len() - 2])
    }

    /// Children of the root, in child order.
    pub fn coarsest_classes(&self) -> &[NodeId] {
        &self.children[0]
    }

    /// Position of the leaf's coarsest ancestor among the root's children.
    pub fn coarse_label(&self, leaf: usize) -> Result<usize, TaxonomyError> {
        let ancestor = self.coarsest_ancestor(leaf)?;
        Ok(self.children[0]
            .iter()
            .position(|&c| c == ancestor)
            .expect("coarsest ancestor is a child of the root"))
    }

    /// Distinct parents of leaves, in node order.
    pub fn leaf_parents(&self) -> Vec<NodeId> {
        let mut seen = vec![false; self.node_count()];
        let mut out = Vec::new();
        for path in &self.paths {
            let p = path[path.len() - 2];
            if !seen[p.0] {
                seen[p.0] = true;
                out.push(p);
            }
        }
        out.sort();
        out
    }

    /// True when every leaf hangs directly off the root.
    pub fn is_flat(&self) -> bool {
        self.paths.iter().all(|p| p.len() == 2)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const T0: &str = "a1\tA\na2\tA\nb1\tB\nb2\tB\nA\tR\nB\tR\n";

    fn t0() -> Taxonomy {
        Taxonomy::parse(T0).unwrap()
    }

    fn leaf(t: &Taxonomy, name: &str) -> usize {
        t.resolve_label(name).unwrap()
    }

    #[test]
    fn parses_t0() {
        let t = t0();
        assert_eq!(t.name(t.root()), "R");
        assert_eq!(t.node_count(), 7);
        assert_eq!(t.leaf_count(), 4);
        let names: Vec<_> = (0..4).map(|l| t.leaf_name(l).unwrap()).collect();
        assert_eq!(names, ["a1", "a2", "b1", "b2"]);
        let internal: Vec<_> = (0..t.node_count())
            .map(NodeId)
            .filter(|&n| n != t.root() && !t.is_leaf(n))
            .map(|n| t.name(n))
            .collect();
        assert_eq!(internal, ["A", "B"]);
        let path: Vec<_> = t.path(0).unwrap().iter().map(|&n| t.name(n)).collect();
        assert_eq!(path, ["R", "A", "a1"]);
        assert_eq!(t.depth(), 3);
    }

    #[test]
    fn minimal_flat_tree() {
        let t = Taxonomy::parse("x\tR\n").unwrap();
        assert_eq!(t.leaf_count(), 1);
        assert_eq!(t.path(0).unwrap().len(), 2);
        assert!(t.is_flat());
    }

    #[test]
    fn comments_and_blank_lines_ignored() {
        let t = Taxonomy::parse("# header\n\nx\tR\n  \n# y\tR\n").unwrap();
        assert_eq!(t.leaf_count(), 1);
    }

    #[test]
    fn two_node_cycle() {
        let err = Taxonomy::parse("A\tB\nB\tA\n").unwrap_err();
        assert!(matches!(err, TaxonomyError::Cycle { .. }), "{err:?}");
    }

    #[test]
    fn cycle_disconnected_from_root() {
        let err = Taxonomy::parse("x\tR\nA\tB\nB\tC\nC\tA\n").unwrap_err();
        assert!(matches!(err, TaxonomyError::Cycle { .. }), "{err:?}");
    }

    #[test]
    fn self_loop() {
        assert!(matches!(
            Taxonomy::parse("A\tA\n"),
            Err(TaxonomyError::Cycle { .. })
        ));
    }

    #[test]
    fn multiple_roots() {
        let err = Taxonomy::parse("a\tR\nb\tS\n").unwrap_err();
        assert_eq!(
            err,
            TaxonomyError::MultipleRoots {
                roots: vec!["R".into(), "S".into()]
            }
        );
    }

    #[test]
    fn conflicting_parent() {
        let err = Taxonomy::parse("a\tA\nA\tR\nB\tR\na\tB\n").unwrap_err();
        assert!(
            matches!(err, TaxonomyError::ConflictingParent { line: 4, .. }),
            "{err:?}"
        );
    }

    #[test]
    fn repeated_identical_edge_is_accepted() {
        let t = Taxonomy::parse("a\tR\na\tR\nb\tR\n").unwrap();
        assert_eq!(t.leaf_count(), 2);
    }

    #[test]
    fn empty_input() {
        assert_eq!(Taxonomy::parse(""), Err(TaxonomyError::Empty));
        assert_eq!(Taxonomy::parse("# nothing\n\n"), Err(TaxonomyError::Empty));
    }

    #[test]
    fn malformed_lines_report_line_numbers() {
        let err = Taxonomy::parse("a\tR\nno-tab-here\n").unwrap_err();
        assert!(matches!(err, TaxonomyError::Malformed { line: 2, .. }));
        let err = Taxonomy::parse("a\tR\tS\n").unwrap_err();
        assert!(matches!(err, TaxonomyError::Malformed { line: 1, .. }));
        let err = Taxonomy::parse("\tR\n").unwrap_err();
        assert!(matches!(err, TaxonomyError::Malformed { line: 1, .. }));
    }

    #[test]
    fn child_order_is_declaration_order() {
        let t = Taxonomy::parse("z\tR\nm\tR\na\tR\n").unwrap();
        let kids: Vec<_> = t.children(t.root()).iter().map(|&n| t.name(n)).collect();
        assert_eq!(kids, ["z", "m", "a"]);
    }

    #[test]
    fn parent_mentioned_before_declared() {
        // A appears as a parent on line 1 but is declared on line 3.
        let t = Taxonomy::parse("a1\tA\nb1\tB\nA\tR\nB\tR\n").unwrap();
        let kids: Vec<_> = t.children(t.root()).iter().map(|&n| t.name(n)).collect();
        assert_eq!(kids, ["A", "B"]);
        assert_eq!(Taxonomy::parse(&t.to_tsv()).unwrap(), t);
    }

    #[test]
    fn augment_t0() {
        let t = t0();
        let a = t.augment_with_other().unwrap();
        assert_eq!(a.leaf_count(), 6);
        for l in 0..4 {
            assert_eq!(a.leaf_name(l).unwrap(), t.leaf_name(l).unwrap());
            let names = |tx: &Taxonomy| -> Vec<String> {
                tx.path(l)
                    .unwrap()
                    .iter()
                    .map(|&n| tx.name(n).to_owned())
                    .collect()
            };
            assert_eq!(names(&a), names(&t));
        }
        let a_node = a.node("A").unwrap();
        let kids: Vec<_> = a.children(a_node).iter().map(|&n| a.name(n)).collect();
        assert_eq!(kids, ["a1", "a2", "A/other"]);
        assert_eq!(a.leaf_name(4).unwrap(), "A/other");
        assert_eq!(a.leaf_name(5).unwrap(), "B/other");
        assert_eq!(a.parent(a.node("B/other").unwrap()), a.node("B"));
        assert!(a.node("R/other").is_none());
    }

    #[test]
    fn augment_flat_is_identity() {
        let t = Taxonomy::flat("R", &["x", "y", "z"]).unwrap();
        assert_eq!(t.augment_with_other().unwrap(), t);
    }

    #[test]
    fn augment_chain() {
        let t = Taxonomy::parse("a1\tA\nA\tR\n").unwrap();
        let a = t.augment_with_other().unwrap();
        let kids: Vec<_> = a
            .children(a.node("A").unwrap())
            .iter()
            .map(|&n| a.name(n))
            .collect();
        assert_eq!(kids, ["a1", "A/other"]);
        assert_eq!(a.leaf_count(), 2);
    }

    #[test]
    fn augment_name_collision() {
        let t = Taxonomy::parse("a1\tA\nA/other\tB\nA\tR\nB\tR\n").unwrap();
        assert_eq!(
            t.augment_with_other(),
            Err(TaxonomyError::NameCollision {
                name: "A/other".into()
            })
        );
    }

    #[test]
    fn shared_prefix_examples() {
        let t = t0();
        let (a1, a2, b1) = (leaf(&t, "a1"), leaf(&t, "a2"), leaf(&t, "b1"));
        assert_eq!(t.shared_prefix_len(a1, a2).unwrap(), 2);
        assert_eq!(t.shared_prefix_len(a1, b1).unwrap(), 1);
        assert_eq!(t.shared_prefix_len(a1, a1).unwrap(), 3);
        assert!(matches!(
            t.shared_prefix_len(0, 4),
            Err(TaxonomyError::LeafOutOfRange { leaf: 4, leaves: 4 })
        ));
    }

    #[test]
    fn ancestor_queries() {
        let t = t0();
        assert_eq!(t.name(t.coarsest_ancestor(leaf(&t, "a2")).unwrap()), "A");
        assert_eq!(t.name(t.coarsest_ancestor(leaf(&t, "b1")).unwrap()), "B");
        assert_eq!(t.name(t.parent_of_leaf(leaf(&t, "a1")).unwrap()), "A");
        assert_eq!(t.coarse_label(leaf(&t, "b2")).unwrap(), 1);

        let flat = Taxonomy::parse("x\tR\n").unwrap();
        assert_eq!(flat.name(flat.coarsest_ancestor(0).unwrap()), "x");
        assert_eq!(flat.parent_of_leaf(0).unwrap(), flat.root());

        let chain = Taxonomy::parse("a1\tA\nA\tR\n").unwrap();
        assert_eq!(chain.name(chain.parent_of_leaf(0).unwrap()), "A");
        assert!(chain.coarsest_ancestor(1).is_err());
    }

    #[test]
    fn label_resolution() {
        let t = t0();
        assert_eq!(t.resolve_label("b1"), Ok(2));
        assert_eq!(
            t.resolve_label("R"),
            Err(TaxonomyError::RootLabel("R".into()))
        );
        assert_eq!(
            t.resolve_label("A"),
            Err(TaxonomyError::InternalLabel("A".into()))
        );
        assert_eq!(
            t.resolve_label("zz"),
            Err(TaxonomyError::UnknownLabel("zz".into()))
        );
        let a = t.augment_with_other().unwrap();
        assert_eq!(a.resolve_label("A/other"), Ok(4));
        assert_eq!(a.resolve_label("A"), Ok(4));
        assert_eq!(a.resolve_label("B"), Ok(5));
    }

    #[test]
    fn summary_counts() {
        let t = t0();
        assert_eq!(t.coarsest_classes().len(), 2);
        assert_eq!(t.leaf_parents().len(), 2);
        let flat =
            Taxonomy::flat("R", &(0..10).map(|i| format!("c{i}")).collect::<Vec<_>>()).unwrap();
        assert_eq!(flat.coarsest_classes().len(), 10);
        assert_eq!(flat.leaf_parents(), vec![flat.root()]);
        assert_eq!(flat.depth(), 2);
    }

    #[test]
    fn checksum_tracks_structure() {
        let t = t0();
        assert_eq!(t.checksum(), Taxonomy::parse(T0).unwrap().checksum());
        assert_ne!(t.checksum(), t.augment_with_other().unwrap().checksum());
    }

    #[test]
    fn top_down_parents_first() {
        let t = Taxonomy::parse("a1\tA\nb1\tB\nA\tR\nB\tR\n").unwrap();
        let pos: HashMap<NodeId, usize> = t
            .top_down()
            .iter()
            .enumerate()
            .map(|(i, &n)| (n, i))
            .collect();
        for id in 1..t.node_count() {
            let n = NodeId(id);
            assert!(pos[&t.parent(n).unwrap()] < pos[&n]);
        }
    }
}
