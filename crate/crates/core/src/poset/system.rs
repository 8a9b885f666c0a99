use std::collections::{BTreeMap, BTreeSet};

use nalgebra::DVector;

use super::kernel::{layer_state, ActivationRule, KernelSpec, LayerState};
use super::ScalePoset;
use crate::error::{Error, Result};

/// One constructed scale: its kernel, rule, and the scales it reads from.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanNode {
    pub id: String,
    /// Immediate predecessors, in id order; their outputs are concatenated.
    pub inputs: Vec<String>,
    pub kernel: KernelSpec,
    pub rule: ActivationRule,
    /// Breadth wave of the traversal in which the node was built (1-based).
    pub wave: usize,
}

/// Layered evaluation plan produced by [`build_s_system`].
#[derive(Debug, Clone, PartialEq)]
pub struct SSystemPlan {
    pub minimal: String,
    pub input_dim: usize,
    /// Non-minimal scales in evaluation order.
    pub nodes: Vec<PlanNode>,
    /// Maximal scales whose outputs form the representation, in id order.
    pub outputs: Vec<String>,
}

/// Result of running a plan on one input.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemOutput {
    pub states: BTreeMap<String, LayerState>,
    /// Concatenated outputs of the maximal scales.
    pub output: DVector<f64>,
}

/// Builds the layered plan by walking the poset upward from its minimal scale.
///
/// Scales are visited in breadth waves starting from the successors of `s0`.
/// A scale whose predecessors are not all built yet is carried to the next
/// wave, so the resulting order is always a linear extension of the poset.
/// Each scale reads the concatenated outputs of its immediate predecessors in
/// id order; the minimal scale outputs the raw input.
pub fn build_s_system(
    poset: &ScalePoset,
    input_dim: usize,
    layer_specs: &BTreeMap<String, (KernelSpec, ActivationRule)>,
) -> Result<SSystemPlan> {
    let s0 = poset.minimal().to_string();
    let mut out_dim: BTreeMap<String, usize> = BTreeMap::new();
    out_dim.insert(s0.clone(), input_dim);
    let mut built: BTreeSet<String> = BTreeSet::from([s0.clone()]);
    let mut nodes = Vec::new();

    for id in poset.nodes() {
        if *id != s0 && !layer_specs.contains_key(id) {
            return Err(Error::Domain(format!("no layer spec for scale {id:?}")));
        }
    }

    let mut frontier = poset.successor(&s0)?;
    let mut wave = 0;
    while !frontier.is_empty() {
        wave += 1;
        let mut next = BTreeSet::new();
        for s in &frontier {
            if built.contains(s) {
                continue;
            }
            let preds = poset.predecessor(s)?;
            if !preds.iter().all(|p| built.contains(p)) {
                next.insert(s.clone());
                continue;
            }
            let (kernel, rule) = &layer_specs[s];
            let fan_in: usize = preds.iter().map(|p| out_dim[p]).sum();
            if kernel.input_dim() != fan_in {
                return Err(Error::Shape(format!(
                    "scale {s:?} kernel has {} rows but its predecessors {:?} output {fan_in} values",
                    kernel.input_dim(),
                    preds
                )));
            }
            out_dim.insert(s.clone(), kernel.output_dim());
            built.insert(s.clone());
            nodes.push(PlanNode {
                id: s.clone(),
                inputs: preds.into_iter().collect(),
                kernel: kernel.clone(),
                rule: *rule,
                wave,
            });
            next.extend(poset.successor(s)?);
        }
        frontier = next;
    }

    Ok(SSystemPlan {
        minimal: s0,
        input_dim,
        nodes,
        outputs: poset.maximal(),
    })
}

impl SSystemPlan {
    /// Evaluation order including the minimal scale first.
    pub fn order(&self) -> Vec<String> {
        std::iter::once(self.minimal.clone())
            .chain(self.nodes.iter().map(|n| n.id.clone()))
            .collect()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Dimension of the concatenated representation.
    pub fn output_dim(&self) -> usize {
        self.outputs
            .iter()
            .map(|id| {
                if *id == self.minimal {
                    self.input_dim
                } else {
                    self.node(id).map(|n| n.kernel.output_dim()).unwrap_or(0)
                }
            })
            .sum()
    }

    pub fn node(&self, id: &str) -> Option<&PlanNode> {
        self.nodes.iter().find(|n| n.id == id)
    }

    /// Runs the plan forward on one input realization.
    pub fn evaluate(&self, x: &DVector<f64>) -> Result<SystemOutput> {
        if x.len() != self.input_dim {
            return Err(Error::Shape(format!(
                "input of length {} for a system expecting {}",
                x.len(),
                self.input_dim
            )));
        }
        let mut outputs: BTreeMap<&str, DVector<f64>> = BTreeMap::new();
        outputs.insert(self.minimal.as_str(), x.clone());
        let mut states = BTreeMap::new();
        for node in &self.nodes {
            let parts: Vec<f64> = node
                .inputs
                .iter()
                .flat_map(|p| outputs[p.as_str()].iter().copied())
                .collect();
            let t_in = DVector::from_vec(parts);
            let h_hat = node.kernel.preactivation(&t_in)?;
            let state = layer_state(node.rule, t_in, h_hat)?;
            outputs.insert(node.id.as_str(), state.h_tilde.clone());
            states.insert(node.id.clone(), state);
        }
        let output: Vec<f64> = self
            .outputs
            .iter()
            .flat_map(|id| outputs[id.as_str()].iter().copied())
            .collect();
        Ok(SystemOutput {
            states,
            output: DVector::from_vec(output),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poset::Field;
    use nalgebra::DMatrix;
    use proptest::prelude::*;

    fn spec(rows: usize, cols: usize, fill: f64) -> (KernelSpec, ActivationRule) {
        (
            KernelSpec::new(DMatrix::from_element(rows, cols, fill), Field::ZeroOne),
            ActivationRule::ArgmaxMask01,
        )
    }

    #[test]
    fn chain_is_an_mlp() {
        let poset = ScalePoset::chain(&["x", "l1", "l2", "l3"]).unwrap();
        let w1 = DMatrix::from_row_slice(2, 3, &[1.0, -1.0, 0.5, 0.2, 0.3, -0.4]);
        let w2 = DMatrix::from_row_slice(3, 2, &[0.1, 0.2, -0.3, 0.4, 0.5, -0.6]);
        let w3 = DMatrix::from_row_slice(2, 1, &[1.5, -2.0]);
        let rule = ActivationRule::ArgmaxMask01;
        let specs = BTreeMap::from([
            ("l1".to_string(), (KernelSpec::new(w1.clone(), Field::ZeroOne), rule)),
            ("l2".to_string(), (KernelSpec::new(w2.clone(), Field::ZeroOne), rule)),
            ("l3".to_string(), (KernelSpec::new(w3.clone(), Field::ZeroOne), rule)),
        ]);
        let plan = build_s_system(&poset, 2, &specs).unwrap();
        assert_eq!(plan.order(), vec!["x", "l1", "l2", "l3"]);
        assert_eq!(plan.nodes[1].inputs, vec!["l1".to_string()]);

        let x = DVector::from_vec(vec![0.7, -1.2]);
        let relu = |v: DVector<f64>| v.map(|u| u.max(0.0));
        let expected = relu(w3.tr_mul(&relu(w2.tr_mul(&relu(w1.tr_mul(&x))))));
        let got = plan.evaluate(&x).unwrap();
        assert_eq!(got.output, expected);
        assert_eq!(plan.output_dim(), 1);
    }

    #[test]
    fn single_scale_is_identity() {
        let poset = ScalePoset::new(&["x"], &[]).unwrap();
        let plan = build_s_system(&poset, 3, &BTreeMap::new()).unwrap();
        assert!(plan.is_empty());
        let x = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        assert_eq!(plan.evaluate(&x).unwrap().output, x);
    }

    #[test]
    fn diamond_concatenates_predecessors() {
        let poset = ScalePoset::new(&["0", "a", "b", "2"], &[("0", "a"), ("0", "b"), ("a", "2"), ("b", "2")]).unwrap();
        let specs = BTreeMap::from([
            ("a".to_string(), spec(2, 1, 1.0)),
            ("b".to_string(), spec(2, 2, 2.0)),
            ("2".to_string(), spec(3, 1, 1.0)),
        ]);
        let plan = build_s_system(&poset, 2, &specs).unwrap();
        assert_eq!(plan.order(), vec!["0", "a", "b", "2"]);
        let top = plan.node("2").unwrap();
        assert_eq!(top.inputs, vec!["a".to_string(), "b".to_string()]);
        assert_eq!(top.wave, 2);
        let out = plan.evaluate(&DVector::from_vec(vec![1.0, 1.0])).unwrap();
        // a = 2, b = (4, 4), node 2 input = (2, 4, 4)
        assert_eq!(out.states["2"].t_in.as_slice(), &[2.0, 4.0, 4.0]);
        assert_eq!(out.output.as_slice(), &[10.0]);
    }

    #[test]
    fn uneven_depth_waits_for_all_predecessors() {
        // 0 < a < b, 0 < c < d < b: b is a successor of a in wave 2 but d is built in wave 2 too
        let poset = ScalePoset::new(
            &["0", "a", "b", "c", "d"],
            &[("0", "a"), ("a", "b"), ("0", "c"), ("c", "d"), ("d", "b")],
        )
        .unwrap();
        let specs = BTreeMap::from([
            ("a".to_string(), spec(1, 1, 1.0)),
            ("c".to_string(), spec(1, 1, 1.0)),
            ("d".to_string(), spec(1, 1, 1.0)),
            ("b".to_string(), spec(2, 1, 1.0)),
        ]);
        let plan = build_s_system(&poset, 1, &specs).unwrap();
        let order = plan.order();
        let pos = |s: &str| order.iter().position(|o| o == s).unwrap();
        assert!(pos("d") < pos("b"));
    }

    #[test]
    fn errors() {
        let poset = ScalePoset::chain(&["x", "l1"]).unwrap();
        assert!(matches!(
            build_s_system(&poset, 2, &BTreeMap::new()),
            Err(Error::Domain(_))
        ));
        let specs = BTreeMap::from([("l1".to_string(), spec(3, 1, 1.0))]);
        assert!(matches!(build_s_system(&poset, 2, &specs), Err(Error::Shape(_))));
    }

    // Random poset on up to 6 nodes: node 0 is the bottom, every other node
    // gets a nonempty set of lower-numbered parents.
    fn random_poset() -> impl Strategy<Value = (usize, Vec<(usize, usize)>)> {
        (1usize..=6).prop_flat_map(|n| {
            let parents: Vec<BoxedStrategy<Vec<usize>>> = (1..n)
                .map(|i| {
                    prop::collection::btree_set(0..i, 1..=i)
                        .prop_map(|s| s.into_iter().collect())
                        .boxed()
                })
                .collect();
            (Just(n), parents).prop_map(|(n, ps)| {
                let edges = ps
                    .iter()
                    .enumerate()
                    .flat_map(|(k, p)| p.iter().map(move |&j| (j, k + 1)))
                    .collect();
                (n, edges)
            })
        })
    }

    fn permutations(items: Vec<usize>) -> Vec<Vec<usize>> {
        if items.len() <= 1 {
            return vec![items];
        }
        let mut out = Vec::new();
        for i in 0..items.len() {
            let mut rest = items.clone();
            let head = rest.remove(i);
            for mut tail in permutations(rest) {
                tail.insert(0, head);
                out.push(tail);
            }
        }
        out
    }

    proptest! {
        #[test]
        fn plan_order_is_a_linear_extension((n, edges) in random_poset()) {
            // oracle: reachability by repeated relaxation, all permutations respecting it
            let mut reach = vec![vec![false; n]; n];
            for &(a, b) in &edges { reach[a][b] = true; }
            for _ in 0..n {
                for a in 0..n { for b in 0..n { for c in 0..n {
                    if reach[a][b] && reach[b][c] { reach[a][c] = true; }
                }}}
            }
            let extensions: Vec<Vec<usize>> = permutations((0..n).collect())
                .into_iter()
                .filter(|perm| {
                    (0..n).all(|i| (i + 1..n).all(|j| !reach[perm[j]][perm[i]]))
                })
                .collect();

            let names: Vec<String> = (0..n).map(|i| format!("s{i}")).collect();
            let named: Vec<(String, String)> = edges.iter().map(|&(a, b)| (names[a].clone(), names[b].clone())).collect();
            let poset = ScalePoset::new(&names, &named).unwrap();
            let specs: BTreeMap<String, (KernelSpec, ActivationRule)> = (1..n)
                .map(|i| {
                    let fan_in: usize = (0..n)
                        .filter(|&j| reach[j][i] && !(0..n).any(|k| reach[j][k] && reach[k][i]))
                        .count();
                    (names[i].clone(), spec(fan_in, 1, 0.5))
                })
                .collect();
            let plan = build_s_system(&poset, 1, &specs).unwrap();
            let order: Vec<usize> = plan
                .order()
                .iter()
                .map(|s| s[1..].parse().unwrap())
                .collect();
            prop_assert!(extensions.contains(&order), "order {:?} not a linear extension", order);
            for node in &plan.nodes {
                let i: usize = node.id[1..].parse().unwrap();
                let expected: Vec<String> = (0..n)
                    .filter(|&j| reach[j][i] && !(0..n).any(|k| reach[j][k] && reach[k][i]))
                    .map(|j| names[j].clone())
                    .collect();
                let mut expected = expected;
                expected.sort();
                prop_assert_eq!(&node.inputs, &expected);
            }
        }
    }
}
