use std::collections::BTreeMap;

use nalgebra::Vector3;
use rayon::prelude::*;

use super::model::{GraspModel, ModelParams, SelectedFeature, Strategy};
use super::pipeline::Demonstration;
use super::record::{EndEffector, ObjectType, PerEffector};
use crate::cnn::ActivationTrace;
use crate::error::{Error, Result};
use crate::features::{
    localize_feature, rank_filters, FeatureObservation, FeatureTree, FilterId, HierFeature, Localization, CONV5,
};

/// Tuple length that drives each effector under hier-feat.
pub fn tuple_depth(e: EndEffector) -> usize {
    match e {
        EndEffector::HandFrame => 2,
        EndEffector::ThumbTip | EndEffector::IndexTip => 3,
    }
}

/// `obs[f][d]`: feature `f` localized in demonstration `d`.
pub fn observe_features(demos: &[Demonstration], features: &[HierFeature], mode: Localization) -> Result<Vec<Vec<FeatureObservation>>> {
    features
        .par_iter()
        .map(|f| {
            demos
                .iter()
                .map(|d| localize_feature(&d.observation.trace, f, &d.observation.cloud, mode))
                .collect()
        })
        .collect()
}

fn offsets(row: &[FeatureObservation], demos: &[Demonstration], keep: &[bool], e: EndEffector) -> Vec<Vector3<f64>> {
    row.iter()
        .zip(demos)
        .zip(keep)
        .filter(|((o, _), k)| **k && o.is_usable())
        .map(|((o, d), _)| d.effectors[e] - o.position.expect("usable observation has a position"))
        .collect()
}

/// Enough usable samples for a trustworthy variance.
fn covered(samples: usize, demos: usize, coverage: f64) -> bool {
    let need = ((coverage * demos as f64).ceil() as usize).max(demos.min(2)).max(1);
    samples >= need
}

/// Lowest-variance `n`, stable with respect to input order on ties.
fn lowest_variance(mut c: Vec<SelectedFeature>, n: usize) -> Vec<SelectedFeature> {
    c.sort_by(|a, b| a.variance.total_cmp(&b.variance));
    c.truncate(n);
    c
}

/// Demonstrations where at least one feature is usable; the rest are
/// dropped with a warning.
fn usable_demos(demos: &[Demonstration], obs: &[Vec<FeatureObservation>]) -> Result<Vec<bool>> {
    let keep: Vec<bool> = (0..demos.len()).map(|d| obs.iter().any(|row| row[d].is_usable())).collect();
    for (d, k) in demos.iter().zip(&keep) {
        if !k {
            log::warn!("record {} dropped: no feature with valid depth", d.id);
        }
    }
    if !keep.iter().any(|&k| k) {
        return Err(Error::Learning("every record was dropped: no feature with valid depth".into()));
    }
    Ok(keep)
}

/// Candidate pool for one effector: features with enough coverage, with
/// their offset statistics.
fn candidates(
    features: &[HierFeature],
    obs: &[Vec<FeatureObservation>],
    demos: &[Demonstration],
    keep: &[bool],
    e: EndEffector,
    params: &ModelParams,
    require_coverage: bool,
) -> Vec<SelectedFeature> {
    let kept = keep.iter().filter(|&&k| k).count();
    features
        .iter()
        .zip(obs)
        .filter_map(|(f, row)| {
            let off = offsets(row, demos, keep, e);
            if require_coverage && !covered(off.len(), kept, params.min_coverage) {
                return None;
            }
            SelectedFeature::from_offsets(f.clone(), off)
        })
        .collect()
}

fn traces(demos: &[Demonstration]) -> Vec<ActivationTrace> {
    demos.iter().map(|d| d.observation.trace.clone()).collect()
}

fn learn_hier(ty: ObjectType, demos: &[Demonstration], tree: &FeatureTree, params: &ModelParams) -> Result<GraspModel> {
    let mut all: Vec<HierFeature> = tree.features(2);
    all.extend(tree.features(3));
    if all.is_empty() {
        return Err(Error::Learning("feature tree has no conv-4 or conv-3 nodes".into()));
    }
    let obs = observe_features(demos, &all, Localization::SinglePath)?;
    let keep = usable_demos(demos, &obs)?;

    let mut best: Option<(f64, FilterId, PerEffector<Vec<SelectedFeature>>)> = None;
    for root in tree.roots.iter().map(|r| &r.filter) {
        let mut cost = 0.0;
        let mut chosen = PerEffector::<Vec<SelectedFeature>>::default();
        let mut complete = true;
        for e in EndEffector::ALL {
            let (feats, rows): (Vec<HierFeature>, Vec<Vec<FeatureObservation>>) = all
                .iter()
                .zip(&obs)
                .filter(|(f, _)| f.parent() == root && f.len() == tuple_depth(e))
                .map(|(f, r)| (f.clone(), r.clone()))
                .unzip();
            let sel = lowest_variance(candidates(&feats, &rows, demos, &keep, e, params, true), params.n);
            if sel.is_empty() {
                complete = false;
                break;
            }
            cost += sel.iter().map(|s| s.variance).sum::<f64>() / sel.len() as f64;
            chosen[e] = sel;
        }
        if complete && best.as_ref().is_none_or(|(c, _, _)| cost < *c) {
            best = Some((cost, root.clone(), chosen));
        }
    }
    let (_, parent, effectors) = best.ok_or_else(|| {
        Error::Learning("no conv-5 parent has usable features for every effector".into())
    })?;
    Ok(GraspModel {
        object_type: ty,
        strategy: Strategy::HierFeat,
        params: *params,
        parent: Some(parent),
        effectors,
    })
}

/// Re-learns offsets for fixed per-effector feature lists under another localization.
fn relearn(
    demos: &[Demonstration],
    lists: &PerEffector<Vec<HierFeature>>,
    mode: Localization,
    params: &ModelParams,
    select: Option<usize>,
) -> Result<PerEffector<Vec<SelectedFeature>>> {
    let mut uniq: Vec<HierFeature> = lists.iter().flat_map(|(_, v)| v.iter().cloned()).collect();
    uniq.sort();
    uniq.dedup();
    let obs = observe_features(demos, &uniq, mode)?;
    let keep = usable_demos(demos, &obs)?;
    let index: BTreeMap<&HierFeature, usize> = uniq.iter().enumerate().map(|(i, f)| (f, i)).collect();
    Ok(PerEffector::from_fn(|e| {
        let rows: Vec<Vec<FeatureObservation>> = lists[e].iter().map(|f| obs[index[f]].clone()).collect();
        let c = candidates(&lists[e], &rows, demos, &keep, e, params, select.is_some());
        match select {
            Some(n) => lowest_variance(c, n),
            None => c,
        }
    }))
}

fn ranked_pool(demos: &[Demonstration], tap: &str, n: usize) -> Result<Vec<HierFeature>> {
    Ok(rank_filters(&traces(demos), tap, n)?
        .into_iter()
        .filter(|(_, s)| s.is_finite())
        .map(|(f, _)| HierFeature::root(f))
        .collect())
}

/// Learns a grasp model of `strategy` from demonstrations of one object type.
///
/// hier-feat localizes every tree feature in every demonstration, then for
/// each conv-5 root keeps the `N` lowest-variance features per effector
/// (conv-4 tuples for the hand frame, conv-3 tuples for the fingers) and
/// picks the root whose kept features have the smallest summed mean variance.
pub fn learn_model(
    ty: ObjectType,
    demos: &[Demonstration],
    tree: &FeatureTree,
    params: &ModelParams,
    strategy: Strategy,
) -> Result<GraspModel> {
    if demos.len() < 2 {
        return Err(Error::Learning(format!("need at least 2 demonstrations, got {}", demos.len())));
    }
    if params.n == 0 {
        return Err(Error::Config("N must be at least 1".into()));
    }
    let hier = || learn_hier(ty, demos, tree, params);
    let model = |parent, effectors| GraspModel {
        object_type: ty,
        strategy,
        params: *params,
        parent,
        effectors,
    };
    match strategy {
        Strategy::HierFeat => hier(),
        Strategy::Baseline => {
            let h = hier()?;
            let lists = h.effectors.map(|_, v| v.iter().map(|s| s.feature.clone()).collect());
            Ok(model(h.parent, relearn(demos, &lists, Localization::GlobalArgmax, params, None)?))
        }
        Strategy::IndvFilter => {
            let mut lists = PerEffector::default();
            for e in EndEffector::ALL {
                lists[e] = ranked_pool(demos, e.tap(), params.n5 * params.n4)?;
            }
            Ok(model(None, relearn(demos, &lists, Localization::GlobalArgmax, params, Some(params.n))?))
        }
        Strategy::Conv5Filter => {
            let pool = ranked_pool(demos, CONV5, params.n5 * params.n4)?;
            let lists = PerEffector::from_fn(|_| pool.clone());
            Ok(model(None, relearn(demos, &lists, Localization::SinglePath, params, Some(params.n))?))
        }
        Strategy::Conv5Max => {
            let pool = ranked_pool(demos, CONV5, params.n5)?;
            let lists = PerEffector::from_fn(|_| pool.clone());
            Ok(model(None, relearn(demos, &lists, Localization::SinglePath, params, None)?))
        }
    }
}

/// All five strategies from the same demonstrations and tree.
pub fn compare_strategies(ty: ObjectType, demos: &[Demonstration], tree: &FeatureTree, params: &ModelParams) -> Result<Vec<GraspModel>> {
    Strategy::ALL.iter().map(|&s| learn_model(ty, demos, tree, params, s)).collect()
}
