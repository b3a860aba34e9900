use std::fmt::{self, Write as _};
use std::fs;
use std::path::Path;
use std::str::FromStr;

use nalgebra::Vector3;

use super::record::{EndEffector, ObjectType, PerEffector};
use crate::error::{Error, Result};
use crate::features::{FilterId, HierFeature, Localization};

/// How a model picks and localizes its features.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Strategy {
    /// Full tuples under one shared conv-5 parent, located by single-path descent.
    HierFeat,
    /// The hier-feat features, located by the lowest filter's global maximum.
    Baseline,
    /// Independently ranked conv-4 / conv-3 filters, global maximum.
    IndvFilter,
    /// Conv-5 filters only.
    Conv5Filter,
    /// The top conv-5 filters; at test time only the strongest one is used.
    Conv5Max,
}

impl Strategy {
    pub const ALL: [Strategy; 5] = [
        Strategy::HierFeat,
        Strategy::Baseline,
        Strategy::IndvFilter,
        Strategy::Conv5Filter,
        Strategy::Conv5Max,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::HierFeat => "hier-feat",
            Strategy::Baseline => "baseline",
            Strategy::IndvFilter => "indv-filter",
            Strategy::Conv5Filter => "conv5-filter",
            Strategy::Conv5Max => "conv5-max",
        }
    }

    pub fn localization(self) -> Localization {
        match self {
            Strategy::HierFeat | Strategy::Conv5Filter | Strategy::Conv5Max => Localization::SinglePath,
            Strategy::Baseline | Strategy::IndvFilter => Localization::GlobalArgmax,
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Strategy::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| Error::parse("strategy", format!("unknown strategy {s:?}")))
    }
}

/// Whether test-time candidates use each training offset or only their mean.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CandidateMode {
    PerExample,
    MeanOffset,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModelParams {
    pub n5: usize,
    pub n4: usize,
    pub n3: usize,
    /// Features kept per effector.
    pub n: usize,
    /// Fraction of training records in which a feature must be usable
    /// before its variance is trusted.
    pub min_coverage: f64,
    pub candidates: CandidateMode,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            n5: 5,
            n4: 5,
            n3: 5,
            n: 15,
            min_coverage: 0.5,
            candidates: CandidateMode::PerExample,
        }
    }
}

impl ModelParams {
    /// Parses `n5,n4,n3,N`.
    pub fn parse_counts(s: &str) -> Result<Self> {
        let v: Vec<usize> = s
            .split(',')
            .map(|t| t.trim().parse().map_err(|e| Error::Config(format!("params {s:?}: {e}"))))
            .collect::<Result<_>>()?;
        match v[..] {
            [n5, n4, n3, n] if n5 > 0 && n4 > 0 && n3 > 0 && n > 0 => Ok(Self {
                n5,
                n4,
                n3,
                n,
                ..Self::default()
            }),
            _ => Err(Error::Config(format!("params must be four positive counts n5,n4,n3,N, got {s:?}"))),
        }
    }
}

/// One feature kept for an effector, with its offsets to that effector.
#[derive(Clone, Debug, PartialEq)]
pub struct SelectedFeature {
    pub feature: HierFeature,
    /// Effector position minus feature position, one per usable training record.
    pub offsets: Vec<Vector3<f64>>,
    pub mean_offset: Vector3<f64>,
    /// Trace of the offset covariance.
    pub variance: f64,
}

impl SelectedFeature {
    pub fn from_offsets(feature: HierFeature, offsets: Vec<Vector3<f64>>) -> Option<Self> {
        let (mean_offset, variance) = offset_stats(&offsets)?;
        Some(Self {
            feature,
            offsets,
            mean_offset,
            variance,
        })
    }
}

/// Mean and covariance trace (population form) of a set of offsets.
pub fn offset_stats(offsets: &[Vector3<f64>]) -> Option<(Vector3<f64>, f64)> {
    if offsets.is_empty() {
        return None;
    }
    let n = offsets.len() as f64;
    let mean = offsets.iter().fold(Vector3::zeros(), |a, o| a + o) / n;
    let var = offsets.iter().map(|o| (o - mean).norm_squared()).sum::<f64>() / n;
    Some((mean, var))
}

#[derive(Clone, Debug, PartialEq)]
pub struct GraspModel {
    pub object_type: ObjectType,
    pub strategy: Strategy,
    pub params: ModelParams,
    /// Shared conv-5 parent (hier-feat and baseline).
    pub parent: Option<FilterId>,
    pub effectors: PerEffector<Vec<SelectedFeature>>,
}

impl GraspModel {
    pub fn to_text(&self) -> String {
        let mut s = String::from("grasp-model v1\n");
        let p = &self.params;
        let _ = writeln!(s, "object_type {}", self.object_type);
        let _ = writeln!(s, "strategy {}", self.strategy);
        let _ = writeln!(s, "params {} {} {} {} {}", p.n5, p.n4, p.n3, p.n, p.min_coverage);
        let _ = writeln!(
            s,
            "candidates {}",
            match p.candidates {
                CandidateMode::PerExample => "per-example",
                CandidateMode::MeanOffset => "mean-offset",
            }
        );
        match &self.parent {
            Some(f) => {
                let _ = writeln!(s, "parent {f}");
            }
            None => s.push_str("parent none\n"),
        }
        for (e, feats) in self.effectors.iter() {
            let _ = writeln!(s, "effector {e} {}", feats.len());
            for f in feats {
                let m = f.mean_offset;
                let _ = writeln!(s, "feature {} {} {} {} {} {}", f.feature, f.variance, m.x, m.y, m.z, f.offsets.len());
                for o in &f.offsets {
                    let _ = writeln!(s, "offset {} {} {}", o.x, o.y, o.z);
                }
            }
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let ctx = "grasp model";
        let err = |m: String| Error::parse(ctx, m);
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
        let mut next = |key: &str| -> Result<Vec<String>> {
            let line = lines.next().ok_or_else(|| err(format!("missing {key} line")))?;
            let mut t = line.split_whitespace();
            if t.next() != Some(key) {
                return Err(err(format!("expected {key}, got {line:?}")));
            }
            Ok(t.map(String::from).collect())
        };
        let num = |t: &str| t.parse::<f64>().map_err(|e| err(format!("{t:?}: {e}")));
        let count = |t: &str| t.parse::<usize>().map_err(|e| err(format!("{t:?}: {e}")));
        if next("grasp-model")? != ["v1"] {
            return Err(err("unsupported version".into()));
        }
        let object_type: ObjectType = next("object_type")?.first().ok_or_else(|| err("object_type".into()))?.parse()?;
        let strategy: Strategy = next("strategy")?.first().ok_or_else(|| err("strategy".into()))?.parse()?;
        let p = next("params")?;
        if p.len() != 5 {
            return Err(err("params needs n5 n4 n3 N coverage".into()));
        }
        let cand = next("candidates")?;
        let candidates = match cand.first().map(String::as_str) {
            Some("per-example") => CandidateMode::PerExample,
            Some("mean-offset") => CandidateMode::MeanOffset,
            other => return Err(err(format!("unknown candidate mode {other:?}"))),
        };
        let params = ModelParams {
            n5: count(&p[0])?,
            n4: count(&p[1])?,
            n3: count(&p[2])?,
            n: count(&p[3])?,
            min_coverage: num(&p[4])?,
            candidates,
        };
        let parent = match next("parent")?.first().map(String::as_str) {
            Some("none") => None,
            Some(f) => Some(f.parse()?),
            None => return Err(err("parent".into())),
        };
        let mut effectors: PerEffector<Vec<SelectedFeature>> = PerEffector::default();
        for expected in EndEffector::ALL {
            let h = next("effector")?;
            if h.len() != 2 || h[0] != expected.name() {
                return Err(err(format!("expected effector {expected}")));
            }
            for _ in 0..count(&h[1])? {
                let f = next("feature")?;
                if f.len() != 6 {
                    return Err(err("feature line needs tuple, variance, mean xyz, count".into()));
                }
                let mut offsets = Vec::new();
                for _ in 0..count(&f[5])? {
                    let o = next("offset")?;
                    if o.len() != 3 {
                        return Err(err("offset needs 3 values".into()));
                    }
                    offsets.push(Vector3::new(num(&o[0])?, num(&o[1])?, num(&o[2])?));
                }
                effectors[expected].push(SelectedFeature {
                    feature: f[0].parse()?,
                    variance: num(&f[1])?,
                    mean_offset: Vector3::new(num(&f[2])?, num(&f[3])?, num(&f[4])?),
                    offsets,
                });
            }
        }
        Ok(Self {
            object_type,
            strategy,
            params,
            parent,
            effectors,
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
