//! Tree and chain index sets.
//!
//! Nodes carry dense integer ids in breadth-first order, root = 0, so all
//! per-node data lives in flat arrays. Parent/children/generation are
//! arithmetic on generation offsets: a full `arity`-ary tree of a given
//! depth needs no stored adjacency at all.

use crate::error::{Error, Result};

pub type NodeId = usize;

/// A truncated full tree (or chain, `arity == 1`) of eddies.
///
/// Generation 0 holds the single largest eddy; every node of generation
/// `g < depth` has exactly `arity` children; generation `depth` nodes are
/// leaves with no children.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Topology {
    arity: usize,
    depth: u32,
    /// `gen_offsets[g]` is the id of the first node of generation `g`;
    /// a final sentinel holds the total node count.
    gen_offsets: Vec<usize>,
}

impl Topology {
    /// Chain topology: one node per generation, each coupled to the next.
    pub fn chain(depth: u32) -> Result<Self> {
        if depth == 0 {
            return Err(Error::invalid("chain depth must be at least 1"));
        }
        let gen_offsets = (0..=depth as usize + 1).collect();
        Ok(Topology { arity: 1, depth, gen_offsets })
    }

    /// Full 2^d-ary tree down to generation `depth`.
    ///
    /// `d = 0` is accepted and yields the arity-1 chain, so a chain can be
    /// produced either way; `chain(depth)` is the direct route.
    pub fn tree(d: u32, depth: u32) -> Result<Self> {
        if depth == 0 {
            return Err(Error::invalid("tree depth must be at least 1"));
        }
        if d >= 32 {
            return Err(Error::invalid("tree branching exponent d must be below 32"));
        }
        let arity = 1usize << d;
        let required = Self::required_nodes(d, depth);
        if required > usize::MAX as u128 {
            return Err(Error::NodeCountOverflow { required });
        }
        let mut gen_offsets = Vec::with_capacity(depth as usize + 2);
        let mut total: usize = 0;
        let mut gen_size: usize = 1;
        for _ in 0..=depth {
            gen_offsets.push(total);
            total += gen_size;
            gen_size = gen_size.saturating_mul(arity);
        }
        gen_offsets.push(total);
        Ok(Topology { arity, depth, gen_offsets })
    }

    pub fn node_count(&self) -> usize {
        *self.gen_offsets.last().unwrap()
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn is_chain(&self) -> bool {
        self.arity == 1
    }

    pub fn nodes(&self) -> std::ops::Range<NodeId> {
        0..self.node_count()
    }

    /// Number of nodes that a full tree with branching `2^d` and the given
    /// depth would need. Used for budget checks before construction.
    pub fn required_nodes(d: u32, depth: u32) -> u128 {
        let arity = 1u128 << d.min(127);
        let mut total = 0u128;
        let mut gen_size = 1u128;
        for _ in 0..=depth {
            total = total.saturating_add(gen_size);
            gen_size = gen_size.saturating_mul(arity);
        }
        total
    }

    pub fn generation(&self, node: NodeId) -> u32 {
        debug_assert!(node < self.node_count());
        // First offset strictly greater than `node`, minus one.
        (self.gen_offsets.partition_point(|&off| off <= node) - 1) as u32
    }

    pub fn parent(&self, node: NodeId) -> Option<NodeId> {
        if node == 0 {
            return None;
        }
        let g = self.generation(node) as usize;
        let pos = node - self.gen_offsets[g];
        Some(self.gen_offsets[g - 1] + pos / self.arity)
    }

    /// Children of `node` as a contiguous id range; empty at the leaves.
    pub fn children(&self, node: NodeId) -> std::ops::Range<NodeId> {
        let g = self.generation(node) as usize;
        if g as u32 == self.depth {
            return node..node; // leaf
        }
        let pos = node - self.gen_offsets[g];
        let start = self.gen_offsets[g + 1] + pos * self.arity;
        start..start + self.arity
    }

    pub fn generation_nodes(&self, g: u32) -> std::ops::Range<NodeId> {
        let g = g as usize;
        self.gen_offsets[g]..self.gen_offsets[g + 1]
    }

    /// Plain-text key=value description (documented field names).
    pub fn to_kv(&self) -> String {
        format!(
            "topology.arity = {}\ntopology.depth = {}\ntopology.nodes = {}\n",
            self.arity,
            self.depth,
            self.node_count()
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chain_depth_3_structure() {
        let t = Topology::chain(3).unwrap();
        assert_eq!(t.node_count(), 4);
        assert_eq!(t.children(0), 1..2);
        assert_eq!(t.children(3), 3..3);
        assert_eq!(t.parent(0), None);
        assert_eq!(t.parent(3), Some(2));
    }

    #[test]
    fn chain_minimal_and_deep() {
        let t = Topology::chain(1).unwrap();
        assert_eq!(t.node_count(), 2);
        let t = Topology::chain(20).unwrap();
        assert_eq!(t.generation(t.node_count() - 1), 20);
        assert_eq!(t.arity(), 1);
    }

    #[test]
    fn chain_rejects_depth_zero() {
        assert!(Topology::chain(0).is_err());
    }

    #[test]
    fn tree_node_counts() {
        // 8-ary, depth 2: 1 + 8 + 64.
        let t = Topology::tree(3, 2).unwrap();
        assert_eq!(t.node_count(), 73);
        // binary, depth 3: 15 nodes.
        let t = Topology::tree(1, 3).unwrap();
        assert_eq!(t.node_count(), 15);
    }

    #[test]
    fn tree_rejects_bad_parameters() {
        assert!(Topology::tree(3, 0).is_err());
        match Topology::tree(20, 20) {
            Err(Error::NodeCountOverflow { required }) => {
                assert_eq!(required, Topology::required_nodes(20, 20));
            }
            other => panic!("expected overflow, got {other:?}"),
        }
    }

    #[test]
    fn parent_child_consistency_exhaustive() {
        for topo in [
            Topology::chain(6).unwrap(),
            Topology::tree(1, 4).unwrap(),
            Topology::tree(2, 3).unwrap(),
            Topology::tree(3, 2).unwrap(),
        ] {
            for node in topo.nodes() {
                if let Some(p) = topo.parent(node) {
                    assert!(topo.children(p).contains(&node));
                    assert_eq!(topo.generation(p) + 1, topo.generation(node));
                }
                let g = topo.generation(node);
                if g < topo.depth() {
                    assert_eq!(topo.children(node).len(), topo.arity());
                } else {
                    assert!(topo.children(node).is_empty());
                }
                for c in topo.children(node) {
                    assert_eq!(topo.parent(c), Some(node));
                }
            }
            assert_eq!(topo.generation_nodes(0), 0..1);
        }
    }

    #[test]
    fn kv_serialisation_names_the_fields() {
        let t = Topology::tree(2, 3).unwrap();
        let kv = t.to_kv();
        assert!(kv.contains("topology.arity = 4"));
        assert!(kv.contains("topology.depth = 3"));
        assert!(kv.contains("topology.nodes = 85"));
    }

    #[test]
    fn degenerate_tree_is_the_chain() {
        let chain = Topology::chain(7).unwrap();
        let tree = Topology::tree(0, 7).unwrap();
        assert_eq!(chain, tree);
    }
}
