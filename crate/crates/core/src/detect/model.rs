//! Gradient-boosted tree ensemble: parsing and probability scoring.
//!
//! Model documents are JSON with the shape
//!
//! ```json
//! {
//!   "base_score": 0.0,
//!   "feature_names": ["zcr", "...16 more...", "mfcc_mean_6"],
//!   "trees": [
//!     {
//!       "root": 0,
//!       "nodes": [
//!         {"id": 0, "split": "zcr", "threshold": 0.5,
//!          "yes": 1, "no": 2, "missing": "yes"},
//!         {"id": 1, "leaf": -1.0},
//!         {"id": 2, "leaf": 1.0}
//!       ]
//!     }
//!   ]
//! }
//! ```
//!
//! An input routes to `yes` when its feature value is strictly below the
//! threshold and to `no` otherwise; `missing` (optional, default `"yes"`)
//! names the branch taken for NaN values. The predicted probability is
//! `logistic(base_score + sum of reached leaves)`.

use super::features::{feature_index, FEATURE_NAMES, N_FEATURES};
use super::AcousticFeatureVector;
use serde_json::Value;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ModelError {
    #[error("syntax error at {location}: {message}")]
    Syntax { location: String, message: String },
    #[error("unknown feature {name:?} at {location}")]
    UnknownFeature { name: String, location: String },
    #[error("cycle through node {node} of tree {tree}")]
    CyclicTree { tree: usize, node: u64 },
}

fn syntax(location: impl Into<String>, message: impl Into<String>) -> ModelError {
    ModelError::Syntax {
        location: location.into(),
        message: message.into(),
    }
}

/// One node of a parsed tree; children are arena indices.
#[derive(Debug, Clone, PartialEq)]
pub enum TreeNode {
    Leaf(f64),
    Split {
        feature: usize,
        threshold: f64,
        yes: usize,
        no: usize,
        missing_goes_yes: bool,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    nodes: Vec<TreeNode>,
    root: usize,
}

impl Tree {
    pub fn root(&self) -> &TreeNode {
        &self.nodes[self.root]
    }

    pub fn node(&self, idx: usize) -> &TreeNode {
        &self.nodes[idx]
    }

    /// Leaf value reached by routing `x` from the root.
    pub fn score(&self, x: &[f64; N_FEATURES]) -> f64 {
        let mut idx = self.root;
        loop {
            match &self.nodes[idx] {
                TreeNode::Leaf(v) => return *v,
                TreeNode::Split {
                    feature,
                    threshold,
                    yes,
                    no,
                    missing_goes_yes,
                } => {
                    let v = x[*feature];
                    idx = if v.is_nan() {
                        if *missing_goes_yes {
                            *yes
                        } else {
                            *no
                        }
                    } else if v < *threshold {
                        *yes
                    } else {
                        *no
                    };
                }
            }
        }
    }
}

/// Parsed ensemble; immutable after [`parse_model`], safe to share across
/// scoring threads.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeEnsembleModel {
    pub base_score: f64,
    trees: Vec<Tree>,
}

impl TreeEnsembleModel {
    pub fn trees(&self) -> &[Tree] {
        &self.trees
    }

    /// Raw margin before the logistic: the base score, accumulating each
    /// tree's leaf value in tree order.
    pub fn margin(&self, x: &[f64; N_FEATURES]) -> f64 {
        self.trees
            .iter()
            .fold(self.base_score, |acc, t| acc + t.score(x))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionResult {
    pub probability: f64,
    pub source_id: String,
}

pub(crate) fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Score the cough probability of one feature vector.
pub fn predict_cough_probability(
    model: &TreeEnsembleModel,
    x: &AcousticFeatureVector,
    source_id: &str,
) -> DetectionResult {
    DetectionResult {
        probability: logistic(model.margin(&x.as_array())),
        source_id: source_id.to_string(),
    }
}

/// Parse and validate a model document.
pub fn parse_model(text: &str) -> Result<TreeEnsembleModel, ModelError> {
    let doc: Value = serde_json::from_str(text)
        .map_err(|e| syntax(format!("line {}, column {}", e.line(), e.column()), e.to_string()))?;
    let obj = doc
        .as_object()
        .ok_or_else(|| syntax("document", "expected a top-level object"))?;

    let base_score = obj
        .get("base_score")
        .ok_or_else(|| syntax("document", "missing field 'base_score'"))?
        .as_f64()
        .ok_or_else(|| syntax("base_score", "expected a number"))?;

    let names = obj
        .get("feature_names")
        .ok_or_else(|| syntax("document", "missing field 'feature_names'"))?
        .as_array()
        .ok_or_else(|| syntax("feature_names", "expected an array"))?;
    if names.len() != N_FEATURES {
        return Err(syntax(
            "feature_names",
            format!("expected {N_FEATURES} names, got {}", names.len()),
        ));
    }
    for (i, (name, expected)) in names.iter().zip(FEATURE_NAMES.iter()).enumerate() {
        let name = name
            .as_str()
            .ok_or_else(|| syntax(format!("feature_names[{i}]"), "expected a string"))?;
        if name != *expected {
            return Err(syntax(
                format!("feature_names[{i}]"),
                format!("expected {expected:?}, got {name:?}"),
            ));
        }
    }

    let trees_json = obj
        .get("trees")
        .ok_or_else(|| syntax("document", "missing field 'trees'"))?
        .as_array()
        .ok_or_else(|| syntax("trees", "expected an array"))?;

    let mut trees = Vec::with_capacity(trees_json.len());
    for (t, tree_json) in trees_json.iter().enumerate() {
        trees.push(parse_tree(t, tree_json)?);
    }
    Ok(TreeEnsembleModel { base_score, trees })
}

struct RawNode {
    id: u64,
    body: RawBody,
}

enum RawBody {
    Leaf(f64),
    Split {
        feature: usize,
        threshold: f64,
        yes: u64,
        no: u64,
        missing_goes_yes: bool,
    },
}

fn parse_tree(t: usize, json: &Value) -> Result<Tree, ModelError> {
    let at = |suffix: &str| format!("trees[{t}]{suffix}");
    let obj = json
        .as_object()
        .ok_or_else(|| syntax(at(""), "expected an object"))?;
    let root_id = obj
        .get("root")
        .ok_or_else(|| syntax(at(""), "missing field 'root'"))?
        .as_u64()
        .ok_or_else(|| syntax(at(".root"), "expected a nonnegative integer"))?;
    let nodes_json = obj
        .get("nodes")
        .ok_or_else(|| syntax(at(""), "missing field 'nodes'"))?
        .as_array()
        .ok_or_else(|| syntax(at(".nodes"), "expected an array"))?;
    if nodes_json.is_empty() {
        return Err(syntax(at(".nodes"), "tree has no nodes"));
    }

    let mut raw = Vec::with_capacity(nodes_json.len());
    for (i, node_json) in nodes_json.iter().enumerate() {
        raw.push(parse_node(&at(&format!(".nodes[{i}]")), node_json)?);
    }

    // id -> arena index, rejecting duplicates
    let mut index_of = std::collections::HashMap::with_capacity(raw.len());
    for (i, node) in raw.iter().enumerate() {
        if index_of.insert(node.id, i).is_some() {
            return Err(syntax(at(".nodes"), format!("duplicate node id {}", node.id)));
        }
    }
    let resolve = |id: u64, loc: &str| -> Result<usize, ModelError> {
        index_of
            .get(&id)
            .copied()
            .ok_or_else(|| syntax(loc, format!("reference to unknown node id {id}")))
    };

    let root = resolve(root_id, &at(".root"))?;
    let mut nodes = Vec::with_capacity(raw.len());
    for (i, node) in raw.iter().enumerate() {
        let loc = at(&format!(".nodes[{i}]"));
        nodes.push(match node.body {
            RawBody::Leaf(v) => TreeNode::Leaf(v),
            RawBody::Split {
                feature,
                threshold,
                yes,
                no,
                missing_goes_yes,
            } => TreeNode::Split {
                feature,
                threshold,
                yes: resolve(yes, &loc)?,
                no: resolve(no, &loc)?,
                missing_goes_yes,
            },
        });
    }

    // Every routing path must terminate: walk from the root and reject
    // back-references.
    let mut state = vec![Visit::Unseen; nodes.len()];
    check_acyclic(&nodes, root, &mut state, t, &raw)?;

    Ok(Tree { nodes, root })
}

#[derive(Clone, Copy, PartialEq)]
enum Visit {
    Unseen,
    InProgress,
    Done,
}

fn check_acyclic(
    nodes: &[TreeNode],
    idx: usize,
    state: &mut [Visit],
    tree: usize,
    raw: &[RawNode],
) -> Result<(), ModelError> {
    match state[idx] {
        Visit::Done => return Ok(()),
        Visit::InProgress => {
            return Err(ModelError::CyclicTree {
                tree,
                node: raw[idx].id,
            })
        }
        Visit::Unseen => {}
    }
    state[idx] = Visit::InProgress;
    if let TreeNode::Split { yes, no, .. } = nodes[idx] {
        check_acyclic(nodes, yes, state, tree, raw)?;
        check_acyclic(nodes, no, state, tree, raw)?;
    }
    state[idx] = Visit::Done;
    Ok(())
}

fn parse_node(loc: &str, json: &Value) -> Result<RawNode, ModelError> {
    let obj = json
        .as_object()
        .ok_or_else(|| syntax(loc, "expected an object"))?;
    let id = obj
        .get("id")
        .ok_or_else(|| syntax(loc, "missing field 'id'"))?
        .as_u64()
        .ok_or_else(|| syntax(loc, "'id' must be a nonnegative integer"))?;

    let body = if let Some(leaf) = obj.get("leaf") {
        for field in ["split", "threshold", "yes", "no", "missing"] {
            if obj.contains_key(field) {
                return Err(syntax(loc, format!("leaf node also carries {field:?}")));
            }
        }
        RawBody::Leaf(
            leaf.as_f64()
                .ok_or_else(|| syntax(loc, "'leaf' must be a number"))?,
        )
    } else {
        let name = obj
            .get("split")
            .ok_or_else(|| syntax(loc, "missing field 'split' (or 'leaf')"))?
            .as_str()
            .ok_or_else(|| syntax(loc, "'split' must be a string"))?;
        let feature = feature_index(name).ok_or_else(|| ModelError::UnknownFeature {
            name: name.to_string(),
            location: loc.to_string(),
        })?;
        let threshold = obj
            .get("threshold")
            .ok_or_else(|| syntax(loc, "missing field 'threshold'"))?
            .as_f64()
            .ok_or_else(|| syntax(loc, "'threshold' must be a number"))?;
        let yes = obj
            .get("yes")
            .ok_or_else(|| syntax(loc, "missing field 'yes'"))?
            .as_u64()
            .ok_or_else(|| syntax(loc, "'yes' must be a node id"))?;
        let no = obj
            .get("no")
            .ok_or_else(|| syntax(loc, "missing field 'no'"))?
            .as_u64()
            .ok_or_else(|| syntax(loc, "'no' must be a node id"))?;
        let missing_goes_yes = match obj.get("missing") {
            None => true,
            Some(v) => match v.as_str() {
                Some("yes") => true,
                Some("no") => false,
                _ => return Err(syntax(loc, "'missing' must be \"yes\" or \"no\"")),
            },
        };
        RawBody::Split {
            feature,
            threshold,
            yes,
            no,
            missing_goes_yes,
        }
    };
    Ok(RawNode { id, body })
}
