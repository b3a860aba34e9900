use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rayon::prelude::*;

use super::ids::{FilterId, HierFeature, CONV3, CONV4, CONV5};
use super::localize::{child_scores, log_score, merge_scores};
use crate::cnn::ActivationTrace;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct TreeNode {
    pub filter: FilterId,
    pub score: f64,
    pub children: Vec<TreeNode>,
}

/// Conv-5 roots, their conv-4 children and those children's conv-3 children.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureTree {
    pub n5: usize,
    pub n4: usize,
    pub n3: usize,
    pub roots: Vec<TreeNode>,
}

/// Sorts by descending score, ties to the lower filter index.
fn top_n(scores: Vec<f64>, tap: &str, n: usize) -> Vec<(FilterId, f64)> {
    let mut v: Vec<(usize, f64)> = scores.into_iter().enumerate().collect();
    v.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    v.into_iter().take(n).map(|(i, s)| (FilterId::new(tap, i), s)).collect()
}

/// Filters of `tap` ranked by `sum ln a` over all activations `a > eps` in
/// all traces; ties go to the lower filter index.
pub fn rank_filters(traces: &[ActivationTrace], tap: &str, n: usize) -> Result<Vec<(FilterId, f64)>> {
    let first = traces.first().ok_or_else(|| Error::Feature("no traces to rank".into()))?;
    if n == 0 {
        return Err(Error::Config("filter count must be at least 1".into()));
    }
    let channels = first.tap_output(tap)?.channels();
    let mut scores = vec![f64::NEG_INFINITY; channels];
    for t in traces {
        let out = t.tap_output(tap)?;
        if out.channels() != channels {
            return Err(Error::Shape("traces come from different networks".into()));
        }
        for (c, s) in scores.iter_mut().enumerate() {
            *s = merge_scores(*s, log_score(out.channel(c).iter().copied()));
        }
    }
    Ok(top_n(scores, tap, n))
}

pub fn rank_conv5_filters(traces: &[ActivationTrace], n5: usize) -> Result<Vec<(FilterId, f64)>> {
    rank_filters(traces, CONV5, n5)
}

/// Children of `parent` in `child_tap` for a single trace, ranked by log
/// gradient score. Empty when the parent is silent.
pub fn expand_feature(
    trace: &ActivationTrace,
    parent: &HierFeature,
    child_tap: &str,
    n_children: usize,
) -> Result<Vec<(FilterId, f64)>> {
    Ok(match child_scores(trace, parent, child_tap)? {
        Some(s) => top_n(s, child_tap, n_children),
        None => Vec::new(),
    })
}

/// Child scores summed over traces.
fn aggregated_children(traces: &[ActivationTrace], parent: &HierFeature, child_tap: &str, n: usize) -> Result<Vec<(FilterId, f64)>> {
    let per_trace: Vec<Option<Vec<f64>>> = traces
        .par_iter()
        .map(|t| child_scores(t, parent, child_tap))
        .collect::<Result<_>>()?;
    let mut total: Option<Vec<f64>> = None;
    for s in per_trace.into_iter().flatten() {
        total = Some(match total {
            None => s,
            Some(acc) => acc.iter().zip(&s).map(|(a, b)| merge_scores(*a, *b)).collect(),
        });
    }
    Ok(match total {
        Some(t) => top_n(t, child_tap, n).into_iter().filter(|(_, s)| s.is_finite()).collect(),
        None => Vec::new(),
    })
}

/// Ranks conv-5 roots, then expands each root into conv-4 and conv-3
/// children with scores aggregated over all traces. Children with no
/// positive gradient anywhere are dropped.
pub fn build_feature_tree(traces: &[ActivationTrace], n5: usize, n4: usize, n3: usize) -> Result<FeatureTree> {
    let roots = rank_conv5_filters(traces, n5)?;
    let mut nodes = Vec::new();
    for (root, score) in roots.into_iter().filter(|(_, s)| s.is_finite()) {
        let parent = HierFeature::root(root.clone());
        let mut children = Vec::new();
        for (c4, s4) in aggregated_children(traces, &parent, CONV4, n4)? {
            let mid = parent.child(c4.clone());
            let leaves = aggregated_children(traces, &mid, CONV3, n3)?
                .into_iter()
                .map(|(c3, s3)| TreeNode {
                    filter: c3,
                    score: s3,
                    children: Vec::new(),
                })
                .collect();
            children.push(TreeNode {
                filter: c4,
                score: s4,
                children: leaves,
            });
        }
        nodes.push(TreeNode {
            filter: root,
            score,
            children,
        });
    }
    Ok(FeatureTree { n5, n4, n3, roots: nodes })
}

impl FeatureTree {
    /// Every root-to-node path with `depth` filters (1 = roots, 2 = conv-4, 3 = conv-3).
    pub fn features(&self, depth: usize) -> Vec<HierFeature> {
        fn walk(node: &TreeNode, prefix: &mut Vec<FilterId>, depth: usize, out: &mut Vec<HierFeature>) {
            prefix.push(node.filter.clone());
            if prefix.len() == depth {
                out.push(HierFeature::from_vec_unchecked(prefix.clone()));
            } else {
                for c in &node.children {
                    walk(c, prefix, depth, out);
                }
            }
            prefix.pop();
        }
        let mut out = Vec::new();
        for r in &self.roots {
            walk(r, &mut Vec::new(), depth, &mut out);
        }
        out
    }

    /// Paths of `depth` filters under one root.
    pub fn features_under(&self, root: &FilterId, depth: usize) -> Vec<HierFeature> {
        self.features(depth).into_iter().filter(|f| f.parent() == root).collect()
    }

    /// True when `feature` is a root-to-node path of this tree.
    pub fn contains(&self, feature: &HierFeature) -> bool {
        let mut level = &self.roots;
        for f in feature.filters() {
            match level.iter().find(|n| &n.filter == f) {
                Some(n) => level = &n.children,
                None => return false,
            }
        }
        true
    }

    pub fn to_text(&self) -> String {
        let mut s = String::from("feature-tree v1\n");
        let _ = writeln!(s, "params {} {} {}", self.n5, self.n4, self.n3);
        fn emit(s: &mut String, node: &TreeNode, depth: usize) {
            let _ = writeln!(s, "{}{} {}", "  ".repeat(depth), node.filter, node.score);
            for c in &node.children {
                emit(s, c, depth + 1);
            }
        }
        for r in &self.roots {
            emit(&mut s, r, 0);
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let ctx = "feature tree";
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        if lines.next().map(str::trim) != Some("feature-tree v1") {
            return Err(Error::parse(ctx, "missing header"));
        }
        let params: Vec<usize> = lines
            .next()
            .and_then(|l| l.strip_prefix("params "))
            .ok_or_else(|| Error::parse(ctx, "missing params line"))?
            .split_whitespace()
            .map(|t| t.parse().map_err(|e| Error::parse(ctx, format!("params: {e}"))))
            .collect::<Result<_>>()?;
        if params.len() != 3 {
            return Err(Error::parse(ctx, "params needs n5 n4 n3"));
        }
        let mut roots: Vec<TreeNode> = Vec::new();
        for line in lines {
            let indent = line.len() - line.trim_start().len();
            if indent % 2 != 0 || indent > 4 {
                return Err(Error::parse(ctx, format!("bad indentation: {line:?}")));
            }
            let (id, score) = line
                .trim()
                .split_once(' ')
                .ok_or_else(|| Error::parse(ctx, format!("expected 'filter score': {line:?}")))?;
            let node = TreeNode {
                filter: id.parse()?,
                score: score
                    .trim()
                    .parse()
                    .map_err(|e| Error::parse(ctx, format!("score {score:?}: {e}")))?,
                children: Vec::new(),
            };
            let orphan = || Error::parse(ctx, format!("node without parent: {line:?}"));
            match indent / 2 {
                0 => roots.push(node),
                1 => roots.last_mut().ok_or_else(orphan)?.children.push(node),
                _ => roots
                    .last_mut()
                    .and_then(|r| r.children.last_mut())
                    .ok_or_else(orphan)?
                    .children
                    .push(node),
            }
        }
        Ok(Self {
            n5: params[0],
            n4: params[1],
            n3: params[2],
            roots,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text)
    }
}
