use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::Vector3;

use super::record::{EndEffector, GraspRecord, ObjectType, PerEffector};
use crate::error::{Error, Result};
use crate::image::RgbImage;
use crate::segmentation::OrganizedPointCloud;

pub const MANIFEST: &str = "dataset.txt";
const IMAGE: &str = "image.ppm";
const CLOUD: &str = "cloud.bin";
const ANNOTATION: &str = "annotation.txt";

fn annotation_text(r: &GraspRecord) -> String {
    let mut s = String::from("annotation v1\n");
    let _ = writeln!(s, "object_type {}", r.object_type);
    let _ = writeln!(s, "instance {}", r.instance);
    let _ = writeln!(s, "clutter {}", r.clutter);
    for (e, p) in r.effectors.iter() {
        let _ = writeln!(s, "{e} {} {} {}", p.x, p.y, p.z);
    }
    s
}

struct Annotation {
    object_type: ObjectType,
    instance: String,
    clutter: bool,
    effectors: PerEffector<Vector3<f64>>,
}

fn parse_annotation(text: &str, ctx: &str) -> Result<Annotation> {
    let err = |m: String| Error::parse(ctx, m);
    let mut object_type = None;
    let mut instance = None;
    let mut clutter = None;
    let mut effectors: PerEffector<Option<Vector3<f64>>> = PerEffector::default();
    let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
    if lines.next() != Some("annotation v1") {
        return Err(err("missing annotation v1 header".into()));
    }
    for line in lines {
        let t: Vec<&str> = line.split_whitespace().collect();
        match t[0] {
            "object_type" if t.len() == 2 => object_type = Some(t[1].parse()?),
            "instance" if t.len() == 2 => instance = Some(t[1].to_string()),
            "clutter" if t.len() == 2 => {
                clutter = Some(t[1].parse::<bool>().map_err(|e| err(format!("clutter: {e}")))?);
            }
            k if t.len() == 4 => {
                let e: EndEffector = k.parse()?;
                let v: Vec<f64> = t[1..]
                    .iter()
                    .map(|x| x.parse::<f64>().map_err(|e| err(format!("{x:?}: {e}"))))
                    .collect::<Result<_>>()?;
                effectors[e] = Some(Vector3::new(v[0], v[1], v[2]));
            }
            _ => return Err(err(format!("unexpected line {line:?}"))),
        }
    }
    Ok(Annotation {
        object_type: object_type.ok_or_else(|| err("missing object_type".into()))?,
        instance: instance.ok_or_else(|| err("missing instance".into()))?,
        clutter: clutter.unwrap_or(false),
        effectors: PerEffector::try_from_fn(|e| effectors[e].ok_or_else(|| err(format!("missing {e}"))))?,
    })
}

/// Writes one directory per record (image, binary cloud, annotation) plus
/// a manifest listing the record ids in order.
pub fn write_dataset(dir: &Path, records: &[GraspRecord]) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut manifest = String::from("dataset v1\n");
    for r in records {
        r.validate()?;
        if r.id.is_empty() || r.id.contains(['/', '\\']) || r.id.chars().any(char::is_whitespace) {
            return Err(Error::Config(format!("record id {:?} is not usable as a directory name", r.id)));
        }
        let rd = dir.join(&r.id);
        fs::create_dir_all(&rd).map_err(|e| Error::io(&rd, e))?;
        r.image.save(&rd.join(IMAGE))?;
        r.cloud.save_binary(&rd.join(CLOUD))?;
        let a = rd.join(ANNOTATION);
        fs::write(&a, annotation_text(r)).map_err(|e| Error::io(&a, e))?;
        manifest.push_str(&r.id);
        manifest.push('\n');
    }
    let m = dir.join(MANIFEST);
    fs::write(&m, manifest).map_err(|e| Error::io(&m, e))
}

pub fn read_dataset(dir: &Path) -> Result<Vec<GraspRecord>> {
    let m = dir.join(MANIFEST);
    let text = fs::read_to_string(&m).map_err(|e| Error::io(&m, e))?;
    let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
    if lines.next() != Some("dataset v1") {
        return Err(Error::parse(m.display().to_string(), "missing dataset v1 header"));
    }
    lines
        .map(|id| {
            let rd = dir.join(id);
            let ap = rd.join(ANNOTATION);
            let text = fs::read_to_string(&ap).map_err(|e| Error::io(&ap, e))?;
            let a = parse_annotation(&text, &ap.display().to_string())?;
            let r = GraspRecord {
                id: id.to_string(),
                image: RgbImage::load(&rd.join(IMAGE))?,
                cloud: OrganizedPointCloud::load(&rd.join(CLOUD))?,
                effectors: a.effectors,
                object_type: a.object_type,
                instance: a.instance,
                clutter: a.clutter,
            };
            r.validate()?;
            Ok(r)
        })
        .collect()
}
