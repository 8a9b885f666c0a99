//! Scale posets and the layer-by-layer S-System construction.
//!
//! A [`ScalePoset`] is a finite partial order over opaque scale ids with a
//! unique minimal scale `s0` (the raw measurement). Networks are built by
//! walking the poset from `s0` upward; a chain yields an ordinary MLP.

mod kernel;
mod spec_file;
mod system;

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};

pub(crate) use kernel::layer_state;
pub use kernel::{conditional_group_law, estimate_indicator, ActivationRule, Field, KernelSpec, LayerState};
pub use spec_file::{LayerEntry, SystemFile};
pub use system::{build_s_system, PlanNode, SSystemPlan, SystemOutput};

/// Finite partial order of scales with a unique minimal element.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalePoset {
    nodes: Vec<String>,
    cover_edges: Vec<(String, String)>,
    minimal: String,
    index: BTreeMap<String, usize>,
    // less[i][j] <=> nodes[i] < nodes[j]
    less: Vec<Vec<bool>>,
}

impl ScalePoset {
    /// Builds a poset from node ids and a generating relation `(lower, upper)`.
    ///
    /// The edges need not be minimal; covers are recomputed from the
    /// transitive closure. Fails when the relation has a cycle, when the
    /// minimal element is not unique, or when an edge names an unknown node.
    pub fn new<S: AsRef<str>>(nodes: &[S], edges: &[(S, S)]) -> Result<Self> {
        let nodes: Vec<String> = nodes.iter().map(|s| s.as_ref().to_string()).collect();
        let mut index = BTreeMap::new();
        for (i, id) in nodes.iter().enumerate() {
            if index.insert(id.clone(), i).is_some() {
                return Err(Error::Domain(format!("duplicate scale id {id:?}")));
            }
        }
        let n = nodes.len();
        if n == 0 {
            return Err(Error::Domain("poset has no nodes".into()));
        }
        let mut less = vec![vec![false; n]; n];
        for (lo, hi) in edges {
            let (lo, hi) = (lo.as_ref(), hi.as_ref());
            let a = *index
                .get(lo)
                .ok_or_else(|| Error::Domain(format!("edge references unknown scale {lo:?}")))?;
            let b = *index
                .get(hi)
                .ok_or_else(|| Error::Domain(format!("edge references unknown scale {hi:?}")))?;
            less[a][b] = true;
        }
        // Warshall closure.
        for k in 0..n {
            let via = less[k].clone();
            for row in less.iter_mut() {
                if row[k] {
                    for (cell, &kj) in row.iter_mut().zip(&via) {
                        *cell |= kj;
                    }
                }
            }
        }
        if let Some(i) = (0..n).find(|&i| less[i][i]) {
            return Err(Error::Domain(format!(
                "scale relation is cyclic through {:?}",
                nodes[i]
            )));
        }
        let minimals: Vec<usize> = (0..n).filter(|&j| (0..n).all(|i| !less[i][j])).collect();
        if minimals.len() != 1 {
            let ids: Vec<&str> = minimals.iter().map(|&i| nodes[i].as_str()).collect();
            return Err(Error::Domain(format!(
                "poset must have exactly one minimal scale, found {ids:?}"
            )));
        }
        let s0 = minimals[0];
        if let Some(j) = (0..n).find(|&j| j != s0 && !less[s0][j]) {
            return Err(Error::Domain(format!(
                "scale {:?} is not comparable with the minimal scale",
                nodes[j]
            )));
        }

        let mut poset = ScalePoset {
            minimal: nodes[s0].clone(),
            nodes,
            cover_edges: Vec::new(),
            index,
            less,
        };
        let mut covers = Vec::new();
        for i in 0..n {
            for j in poset.covers_above(i) {
                covers.push((poset.nodes[i].clone(), poset.nodes[j].clone()));
            }
        }
        poset.cover_edges = covers;
        Ok(poset)
    }

    /// Convenience constructor for a chain `ids[0] < ids[1] < ...`.
    pub fn chain<S: AsRef<str>>(ids: &[S]) -> Result<Self> {
        let edges: Vec<(&str, &str)> = ids.windows(2).map(|w| (w[0].as_ref(), w[1].as_ref())).collect();
        let nodes: Vec<&str> = ids.iter().map(|s| s.as_ref()).collect();
        ScalePoset::new(&nodes, &edges)
    }

    pub fn nodes(&self) -> &[String] {
        &self.nodes
    }

    pub fn cover_edges(&self) -> &[(String, String)] {
        &self.cover_edges
    }

    pub fn minimal(&self) -> &str {
        &self.minimal
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `a < b` in the partial order.
    pub fn less_than(&self, a: &str, b: &str) -> Result<bool> {
        let (i, j) = (self.position(a)?, self.position(b)?);
        Ok(self.less[i][j])
    }

    /// True when every pair of scales is comparable.
    pub fn is_chain(&self) -> bool {
        let n = self.nodes.len();
        (0..n).all(|i| (0..n).all(|j| i == j || self.less[i][j] || self.less[j][i]))
    }

    /// Immediate successors: the minimal elements strictly above `s`.
    pub fn successor(&self, s: &str) -> Result<BTreeSet<String>> {
        let i = self.position(s)?;
        Ok(self
            .covers_above(i)
            .into_iter()
            .map(|j| self.nodes[j].clone())
            .collect())
    }

    /// Immediate predecessors: the maximal elements strictly below `s`.
    pub fn predecessor(&self, s: &str) -> Result<BTreeSet<String>> {
        let j = self.position(s)?;
        let n = self.nodes.len();
        let below: Vec<usize> = (0..n).filter(|&i| self.less[i][j]).collect();
        Ok(below
            .iter()
            .filter(|&&i| !below.iter().any(|&k| self.less[i][k]))
            .map(|&i| self.nodes[i].clone())
            .collect())
    }

    /// Maximal scales (no successor), in id order.
    pub fn maximal(&self) -> Vec<String> {
        let n = self.nodes.len();
        let mut out: Vec<String> = (0..n)
            .filter(|&i| (0..n).all(|j| !self.less[i][j]))
            .map(|i| self.nodes[i].clone())
            .collect();
        out.sort();
        out
    }

    pub(crate) fn position(&self, s: &str) -> Result<usize> {
        self.index
            .get(s)
            .copied()
            .ok_or_else(|| Error::Domain(format!("unknown scale id {s:?}")))
    }

    fn covers_above(&self, i: usize) -> Vec<usize> {
        let n = self.nodes.len();
        let above: Vec<usize> = (0..n).filter(|&j| self.less[i][j]).collect();
        above
            .iter()
            .copied()
            .filter(|&j| !above.iter().any(|&k| self.less[k][j]))
            .collect()
    }
}
