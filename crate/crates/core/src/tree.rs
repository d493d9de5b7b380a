//! Questionnaire-style decision tree that leads to a fairness metric.
//!
//! The built-in tree only carries the branches of the lending walkthrough:
//! a boost policy with proportional representation leads to demographic
//! parity; no boost policy, available ground truth, successful label
//! annotation, recall-focused evaluation and false positives as the
//! sensitive error lead to predictive equality. Fuller trees load from a
//! file with the same shape.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::MetricId;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecisionNode {
    pub id: String,
    pub question: String,
    /// Answer token to child node id or leaf metric id.
    pub answers: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecisionTree {
    pub nodes: Vec<DecisionNode>,
    pub root: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PendingQuestion {
    pub node: String,
    pub question: String,
    pub tokens: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "camelCase")]
pub enum TreeOutcome {
    /// A leaf was reached; `path` lists `(node, token)` pairs taken.
    Leaf {
        metric: MetricId,
        path: Vec<(String, String)>,
    },
    /// The answers stop before a leaf. `remaining` starts with the first
    /// unanswered node and lists every node reachable from it.
    Pending {
        path: Vec<(String, String)>,
        remaining: Vec<PendingQuestion>,
    },
}

enum Target<'a> {
    Node(&'a DecisionNode),
    Leaf(MetricId),
}

impl DecisionTree {
    fn node(&self, id: &str) -> Option<&DecisionNode> {
        self.nodes.iter().find(|n| n.id == id)
    }

    fn target(&self, value: &str) -> Option<Target<'_>> {
        match MetricId::from_str(value) {
            Ok(m) => Some(Target::Leaf(m)),
            Err(_) => self.node(value).map(Target::Node),
        }
    }

    /// Checks unique ids, resolvable targets, that no node id shadows a
    /// metric id, and acyclicity from the root.
    pub fn validate(&self) -> Result<()> {
        let mut ids = BTreeSet::new();
        for n in &self.nodes {
            if !ids.insert(n.id.as_str()) {
                return Err(Error::Tree(format!("duplicate node id `{}`", n.id)));
            }
            if MetricId::from_str(&n.id).is_ok() {
                return Err(Error::Tree(format!("node id `{}` collides with a metric id", n.id)));
            }
            if n.answers.is_empty() {
                return Err(Error::Tree(format!("node `{}` has no answers", n.id)));
            }
            for (token, value) in &n.answers {
                if self.target(value).is_none() {
                    return Err(Error::Tree(format!(
                        "answer `{}` of node `{}` points to unknown node or metric `{}`",
                        token, n.id, value
                    )));
                }
            }
        }
        if self.node(&self.root).is_none() {
            return Err(Error::Tree(format!("root `{}` is not a node", self.root)));
        }
        // Depth-first search with an explicit on-path set.
        let mut visited = BTreeSet::new();
        let mut stack: Vec<(&str, bool)> = alloc::vec![(self.root.as_str(), false)];
        let mut on_path = BTreeSet::new();
        while let Some((id, done)) = stack.pop() {
            if done {
                on_path.remove(id);
                continue;
            }
            if on_path.contains(id) {
                return Err(Error::Tree(format!("cycle through node `{}`", id)));
            }
            if !visited.insert(id) {
                continue;
            }
            on_path.insert(id);
            stack.push((id, true));
            let node = self.node(id).expect("validated above");
            for value in node.answers.values() {
                if let Some(Target::Node(child)) = self.target(value) {
                    if on_path.contains(child.id.as_str()) {
                        return Err(Error::Tree(format!("cycle through node `{}`", child.id)));
                    }
                    stack.push((child.id.as_str(), false));
                }
            }
        }
        Ok(())
    }

    fn reachable_from(&self, start: &DecisionNode) -> Vec<PendingQuestion> {
        let mut out = Vec::new();
        let mut seen = BTreeSet::new();
        let mut stack = alloc::vec![start];
        while let Some(node) = stack.pop() {
            if !seen.insert(node.id.as_str()) {
                continue;
            }
            out.push(PendingQuestion {
                node: node.id.clone(),
                question: node.question.clone(),
                tokens: node.answers.keys().cloned().collect(),
            });
            // Reverse so children are visited in token order.
            for value in node.answers.values().rev() {
                if let Some(Target::Node(child)) = self.target(value) {
                    stack.push(child);
                }
            }
        }
        out
    }

    /// Walks from the root using `answers` (node id to token).
    pub fn traverse(&self, answers: &BTreeMap<String, String>) -> Result<TreeOutcome> {
        let mut node = self
            .node(&self.root)
            .ok_or_else(|| Error::Tree(format!("root `{}` is not a node", self.root)))?;
        let mut path = Vec::new();
        let mut steps = 0;
        loop {
            steps += 1;
            if steps > self.nodes.len() + 1 {
                return Err(Error::Tree("cycle detected during traversal".into()));
            }
            let Some(token) = answers.get(&node.id) else {
                return Ok(TreeOutcome::Pending {
                    path,
                    remaining: self.reachable_from(node),
                });
            };
            let value = node.answers.get(token).ok_or_else(|| Error::UnknownAnswer {
                node: node.id.clone(),
                token: token.clone(),
            })?;
            path.push((node.id.clone(), token.clone()));
            match self.target(value) {
                Some(Target::Leaf(metric)) => return Ok(TreeOutcome::Leaf { metric, path }),
                Some(Target::Node(next)) => node = next,
                None => {
                    return Err(Error::Tree(format!(
                        "answer `{}` of node `{}` points to unknown `{}`",
                        token, node.id, value
                    )))
                }
            }
        }
    }
}

fn node(id: &str, question: &str, answers: &[(&str, &str)]) -> DecisionNode {
    DecisionNode {
        id: id.to_string(),
        question: question.to_string(),
        answers: answers
            .iter()
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect(),
    }
}

/// The built-in tree.
pub fn default_tree() -> DecisionTree {
    DecisionTree {
        root: "boost_policy".into(),
        nodes: alloc::vec![
            node(
                "boost_policy",
                "Is there a policy to boost underprivileged groups?",
                &[("yes", "representation"), ("no", "ground_truth")],
            ),
            node(
                "representation",
                "What kind of representation is relevant: equal numbers or proportional?",
                &[("proportional", "demographic_parity")],
            ),
            node(
                "ground_truth",
                "Is a ground truth eventually available?",
                &[("available", "label_annotation")],
            ),
            node(
                "label_annotation",
                "Did label annotation succeed?",
                &[("succeeded", "evaluation")],
            ),
            node(
                "evaluation",
                "Which evaluation focus applies?",
                &[("recall", "sensitive_error")],
            ),
            node(
                "sensitive_error",
                "Which error type is most sensitive to fairness?",
                &[("false_positive", "predictive_equality")],
            ),
        ],
    }
}

/// Parses `node=token,node=token` answer lists.
pub fn parse_answers(list: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for part in list.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (k, v) = part
            .split_once('=')
            .ok_or_else(|| Error::Configuration(format!("answer `{}` is not node=token", part)))?;
        out.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_tree_is_valid() {
        default_tree().validate().unwrap();
    }

    #[test]
    fn boost_path_gives_demographic_parity() {
        let a = parse_answers("boost_policy=yes,representation=proportional").unwrap();
        match default_tree().traverse(&a).unwrap() {
            TreeOutcome::Leaf { metric, path } => {
                assert_eq!(metric, MetricId::DemographicParity);
                assert_eq!(path.len(), 2);
            }
            other => panic!("{:?}", other),
        }
    }

    #[test]
    fn no_boost_path_gives_predictive_equality() {
        let a = parse_answers(
            "boost_policy=no,ground_truth=available,label_annotation=succeeded,evaluation=recall,sensitive_error=false_positive",
        )
        .unwrap();
        assert!(matches!(
            default_tree().traverse(&a).unwrap(),
            TreeOutcome::Leaf { metric: MetricId::PredictiveEquality, .. }
        ));
    }

    #[test]
    fn empty_answers_list_questions_from_root() {
        match default_tree().traverse(&BTreeMap::new()).unwrap() {
            TreeOutcome::Pending { path, remaining } => {
                assert!(path.is_empty());
                assert_eq!(remaining[0].node, "boost_policy");
                assert_eq!(remaining.len(), 6);
            }
            other => panic!("{:?}", other),
        }
    }

    #[test]
    fn unknown_token_names_node_and_token() {
        let a = parse_answers("boost_policy=maybe").unwrap();
        assert_eq!(
            default_tree().traverse(&a),
            Err(Error::UnknownAnswer {
                node: "boost_policy".into(),
                token: "maybe".into()
            })
        );
    }

    #[test]
    fn cycles_and_dangling_targets_rejected() {
        let mut t = default_tree();
        t.nodes[5].answers.insert("false_negative".into(), "boost_policy".into());
        assert!(matches!(t.validate(), Err(Error::Tree(_))));
        let mut t = default_tree();
        t.nodes[1].answers.insert("equal".into(), "nowhere".into());
        assert!(matches!(t.validate(), Err(Error::Tree(_))));
    }

    #[test]
    fn malformed_answer_list_rejected() {
        assert!(parse_answers("boost_policy").is_err());
    }
}
