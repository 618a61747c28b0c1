//! Line-oriented text format for trained ensembles.
//!
//! ```text
//! gbmo-model 1
//! loss=mse
//! mode=mo_dense
//! num_features=2
//! num_outputs=2
//! learning_rate=0.1
//! base_score=0 0
//! feature_names=a,b
//! num_trees=1
//! tree target=all nodes=3
//! split 0 0.5 1 2
//! leaf dense -0.5 0.25
//! leaf sparse 1:0.75
//! end
//! ```
//!
//! Nodes are numbered by position inside their tree. A split line is
//! `split <feature> <threshold> <left> <right>`; rows with `x[feature] <= threshold`
//! go left. Reals use the shortest text that parses back to the same value.
//! `feature_names` is optional. See `docs/model_format.md` for the grammar.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::Path;
use std::str::FromStr;

use crate::booster::{BoostMode, Ensemble, TreeTarget};
use crate::error::{Error, Result};
use crate::losses::LossKind;
use crate::scalar::Scalar;
use crate::tree::{Leaf, Tree, TreeNode};

pub const FORMAT_VERSION: u32 = 1;
const MAGIC: &str = "gbmo-model";

/// Renders an ensemble in the text format.
pub fn write_model<T: Scalar>(ensemble: &Ensemble<T>) -> String {
    let mut s = String::new();
    let join = |v: &[T]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ");
    let _ = writeln!(s, "{MAGIC} {FORMAT_VERSION}");
    let _ = writeln!(s, "loss={}", ensemble.loss());
    let _ = writeln!(s, "mode={}", ensemble.mode());
    let _ = writeln!(s, "num_features={}", ensemble.num_features());
    let _ = writeln!(s, "num_outputs={}", ensemble.num_outputs());
    let _ = writeln!(s, "learning_rate={}", ensemble.learning_rate());
    let _ = writeln!(s, "base_score={}", join(ensemble.base_score()));
    if let Some(names) = ensemble.feature_names() {
        let _ = writeln!(s, "feature_names={}", names.join(","));
    }
    let _ = writeln!(s, "num_trees={}", ensemble.num_trees());
    for (target, tree) in ensemble.trees() {
        let target = match target {
            TreeTarget::All => "all".to_string(),
            TreeTarget::Output(j) => j.to_string(),
        };
        let _ = writeln!(s, "tree target={target} nodes={}", tree.nodes().len());
        for node in tree.nodes() {
            match node {
                TreeNode::Split { feature, threshold, left, right, .. } => {
                    let _ = writeln!(s, "split {feature} {threshold} {left} {right}");
                }
                TreeNode::Leaf(Leaf::Dense(w)) => {
                    let _ = writeln!(s, "leaf dense {}", join(w));
                }
                TreeNode::Leaf(Leaf::Sparse(pairs)) => {
                    s.push_str("leaf sparse");
                    for (j, v) in pairs {
                        let _ = write!(s, " {j}:{v}");
                    }
                    s.push('\n');
                }
            }
        }
    }
    s.push_str("end\n");
    s
}

pub fn save_model<T: Scalar>(ensemble: &Ensemble<T>, path: &Path) -> Result<()> {
    let text = write_model(ensemble);
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
}

pub fn load_model<T: Scalar>(path: &Path) -> Result<Ensemble<T>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    read_model(&text)
}

struct Lines<'a> {
    iter: std::iter::Enumerate<std::str::Lines<'a>>,
    line: usize,
}

impl<'a> Lines<'a> {
    fn next(&mut self) -> Result<&'a str> {
        match self.iter.next() {
            Some((i, l)) => {
                self.line = i + 1;
                Ok(l)
            }
            None => Err(Error::Model {
                line: self.line + 1,
                message: "unexpected end of file".into(),
            }),
        }
    }

    fn err(&self, message: impl Into<String>) -> Error {
        Error::Model {
            line: self.line,
            message: message.into(),
        }
    }

    fn key<'b>(&mut self, key: &'b str) -> Result<&'a str> {
        let line = self.next()?;
        match line.split_once('=') {
            Some((k, v)) if k == key => Ok(v),
            _ => Err(self.err(format!("expected `{key}=...`, found {line:?}"))),
        }
    }

    fn parse<V: FromStr>(&self, what: &str, s: &str) -> Result<V> {
        s.parse().map_err(|_| self.err(format!("invalid {what} {s:?}")))
    }
}

/// Parses the text format, validating every node reference and feature index.
pub fn read_model<T: Scalar>(text: &str) -> Result<Ensemble<T>> {
    let mut lines = Lines {
        iter: text.lines().enumerate(),
        line: 0,
    };
    let header = lines.next()?;
    match header.split_once(' ') {
        Some((MAGIC, v)) => {
            let version: u32 = lines.parse("format version", v)?;
            if version != FORMAT_VERSION {
                return Err(lines.err(format!(
                    "unsupported format version {version} (this build reads {FORMAT_VERSION})"
                )));
            }
        }
        _ => return Err(lines.err(format!("not a model file: expected `{MAGIC} {FORMAT_VERSION}`"))),
    }
    let v = lines.key("loss")?;
    let loss: LossKind = lines.parse("loss", v)?;
    let v = lines.key("mode")?;
    let mode: BoostMode = lines.parse("mode", v)?;
    let v = lines.key("num_features")?;
    let m: usize = lines.parse("feature count", v)?;
    let v = lines.key("num_outputs")?;
    let d: usize = lines.parse("output count", v)?;
    let v = lines.key("learning_rate")?;
    let lr: T = lines.parse("learning rate", v)?;
    let v = lines.key("base_score")?;
    let base: Vec<T> = v
        .split(' ')
        .map(|s| lines.parse("base score", s))
        .collect::<Result<_>>()?;
    if base.len() != d {
        return Err(lines.err(format!("base_score has {} values, num_outputs is {d}", base.len())));
    }
    let mut ensemble = Ensemble::new(loss, mode, m, lr, base).map_err(|e| lines.err(e.to_string()))?;

    let mut line = lines.next()?;
    if let Some(names) = line.strip_prefix("feature_names=") {
        let names: Vec<String> = names.split(',').map(str::to_string).collect();
        if names.len() != m {
            return Err(lines.err(format!("{} feature names for {m} features", names.len())));
        }
        ensemble.set_feature_names(Some(names));
        line = lines.next()?;
    }
    let num_trees: usize = match line.split_once('=') {
        Some(("num_trees", v)) => lines.parse("tree count", v)?,
        _ => return Err(lines.err(format!("expected `num_trees=...`, found {line:?}"))),
    };

    for _ in 0..num_trees {
        let line = lines.next()?;
        let mut parts = line.split(' ');
        let (Some("tree"), Some(target), Some(nodes), None) = (parts.next(), parts.next(), parts.next(), parts.next())
        else {
            return Err(lines.err(format!("expected `tree target=... nodes=...`, found {line:?}")));
        };
        let target = match target.strip_prefix("target=") {
            Some("all") => TreeTarget::All,
            Some(j) => TreeTarget::Output(lines.parse("tree target", j)?),
            None => return Err(lines.err("missing tree target")),
        };
        let count: usize = match nodes.strip_prefix("nodes=") {
            Some(c) => lines.parse("node count", c)?,
            None => return Err(lines.err("missing node count")),
        };
        if count == 0 {
            return Err(lines.err("a tree needs at least one node"));
        }
        let width = match target {
            TreeTarget::All => d,
            TreeTarget::Output(_) => 1,
        };
        let tree_line = lines.line;
        let mut nodes = Vec::with_capacity(count);
        for _ in 0..count {
            let line = lines.next()?;
            nodes.push(parse_node(&lines, line, m, width)?);
        }
        let tree = Tree::from_nodes(nodes, width).map_err(|e| Error::Model {
            line: tree_line,
            message: e.to_string(),
        })?;
        ensemble.push_tree(target, tree).map_err(|e| Error::Model {
            line: tree_line,
            message: e.to_string(),
        })?;
    }
    let line = lines.next()?;
    if line != "end" {
        return Err(lines.err(format!("expected `end`, found {line:?}")));
    }
    if let Some((i, extra)) = lines.iter.find(|(_, l)| !l.trim().is_empty()) {
        return Err(Error::Model {
            line: i + 1,
            message: format!("trailing content after `end`: {extra:?}"),
        });
    }
    Ok(ensemble)
}

fn parse_node<T: Scalar>(lines: &Lines<'_>, line: &str, m: usize, width: usize) -> Result<TreeNode<T>> {
    let mut parts = line.split(' ');
    match (parts.next(), parts.next()) {
        (Some("split"), Some(f)) => {
            let feature: usize = lines.parse("feature", f)?;
            if feature >= m {
                return Err(lines.err(format!("feature {feature} out of range for {m} features")));
            }
            let rest: Vec<&str> = parts.collect();
            let [t, l, r] = rest[..] else {
                return Err(lines.err("split needs feature, threshold, left and right"));
            };
            let threshold: T = lines.parse("threshold", t)?;
            if threshold.is_nan() {
                return Err(lines.err("threshold is NaN"));
            }
            Ok(TreeNode::Split {
                feature,
                bin: 0,
                threshold,
                left: lines.parse("child id", l)?,
                right: lines.parse("child id", r)?,
            })
        }
        (Some("leaf"), Some("dense")) => {
            let w: Vec<T> = parts.map(|s| lines.parse("leaf value", s)).collect::<Result<_>>()?;
            if w.len() != width {
                return Err(lines.err(format!("dense leaf has {} values, expected {width}", w.len())));
            }
            Ok(TreeNode::Leaf(Leaf::Dense(w)))
        }
        (Some("leaf"), Some("sparse")) => {
            let mut pairs = Vec::new();
            for p in parts {
                let Some((j, v)) = p.split_once(':') else {
                    return Err(lines.err(format!("sparse entry {p:?} is not `column:value`")));
                };
                let j: usize = lines.parse("column", j)?;
                if j >= width {
                    return Err(lines.err(format!("sparse column {j} out of range for {width} outputs")));
                }
                if pairs.last().is_some_and(|&(prev, _)| prev >= j) {
                    return Err(lines.err("sparse columns must be strictly increasing"));
                }
                pairs.push((j, lines.parse("leaf value", v)?));
            }
            Ok(TreeNode::Leaf(Leaf::Sparse(pairs)))
        }
        _ => Err(lines.err(format!("expected a `split` or `leaf` record, found {line:?}"))),
    }
}
