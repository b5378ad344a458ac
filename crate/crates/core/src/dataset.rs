//! Mask datasets on disk, a seeded synthetic generator, and nested fold splits.
//!
//! A manifest is a JSON Lines file, one image per line:
//!
//! ```text
//! {"image":"img000","scan":"synthetic","masks":[{"label":"liver","path":"img000/liver.png","segment":4}, …]}
//! ```
//!
//! Mask paths are relative to the manifest's directory. Each mask is an 8-bit
//! grayscale PNG whose pixel value divided by 255 is the membership degree.
//! `segment` is optional and defaults to the mask's 1-based position.

use std::collections::HashSet;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fuzzy::ScalarField;
use crate::labels::Label;
use crate::scalar::Scalar;
use crate::spatial::{Segment, SegmentId, SegmentSet};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaskEntry {
    /// Absent for images that are to be annotated.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<Label>,
    pub path: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub segment: Option<SegmentId>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub image: String,
    #[serde(default)]
    pub scan: String,
    pub masks: Vec<MaskEntry>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Manifest {
    pub entries: Vec<ManifestEntry>,
    /// Directory that relative mask paths are resolved against.
    pub root: PathBuf,
}

impl Manifest {
    pub fn parse(text: &str, root: impl Into<PathBuf>) -> Result<Self> {
        let mut entries = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let entry: ManifestEntry = serde_json::from_str(line)
                .map_err(|e| Error::Manifest(format!("line {}: {e}", i + 1)))?;
            let mut seen = HashSet::new();
            for l in entry.masks.iter().filter_map(|m| m.label.as_ref()) {
                if !seen.insert(l) {
                    return Err(Error::Manifest(format!(
                        "line {}: image {} lists {l} twice",
                        i + 1,
                        entry.image
                    )));
                }
            }
            entries.push(entry);
        }
        Ok(Self {
            entries,
            root: root.into(),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let root = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, root)
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            out.push_str(&serde_json::to_string(e).expect("manifest entries serialize"));
            out.push('\n');
        }
        out
    }

    pub fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.root.join(path)
        }
    }
}

fn read_mask<T: Scalar>(path: &Path) -> Result<ScalarField<T>> {
    let file_err = |message: String| Error::File {
        path: path.to_path_buf(),
        message,
    };
    let img = image::open(path)
        .map_err(|e| file_err(e.to_string()))?
        .into_luma8();
    let (w, h) = img.dimensions();
    let scale = T::lit(1.0 / 255.0);
    let data = img
        .into_raw()
        .into_iter()
        .map(|v| T::from_usize_lossy(v as usize) * scale)
        .collect();
    ScalarField::from_vec(w as usize, h as usize, data).map_err(|e| file_err(e.to_string()))
}

/// Writes a mask as 8-bit grayscale, rounding degrees to the nearest 1/255.
pub fn write_mask<T: Scalar>(field: &ScalarField<T>, path: &Path) -> Result<()> {
    let data: Vec<u8> = field
        .data()
        .iter()
        .map(|v| (v.as_f64() * 255.0).round().clamp(0.0, 255.0) as u8)
        .collect();
    let img = image::GrayImage::from_raw(field.width() as u32, field.height() as u32, data)
        .expect("buffer matches dimensions");
    img.save_with_format(path, image::ImageFormat::Png)
        .map_err(|e| Error::File {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
}

fn load_entry<T: Scalar>(manifest: &Manifest, entry: &ManifestEntry) -> Result<SegmentSet<T>> {
    let mut segments: Vec<Segment<T>> = Vec::with_capacity(entry.masks.len());
    for (i, m) in entry.masks.iter().enumerate() {
        let path = manifest.resolve(&m.path);
        let mask = read_mask::<T>(&path)?;
        if let Some(first) = segments.first() {
            if first.mask.same_dims(&mask).is_err() {
                return Err(Error::File {
                    path,
                    message: format!(
                        "mask is {}x{} but image {} uses {}x{}",
                        mask.width(),
                        mask.height(),
                        entry.image,
                        first.mask.width(),
                        first.mask.height()
                    ),
                });
            }
        }
        if mask.is_empty() {
            return Err(Error::File {
                path,
                message: "mask has no support".into(),
            });
        }
        segments.push(Segment {
            id: m.segment.unwrap_or(i as SegmentId + 1),
            mask,
            label: m.label.clone(),
        });
    }
    segments.sort_by_key(|s| s.id);
    warn_on_overlap(&entry.image, &segments);
    SegmentSet::new(entry.image.clone(), segments)
}

fn warn_on_overlap<T: Scalar>(image: &str, segments: &[Segment<T>]) {
    let Some(first) = segments.first() else {
        return;
    };
    let n = first.mask.data().len();
    for p in 0..n {
        let owners = segments
            .iter()
            .filter(|s| s.mask.data()[p] > T::zero())
            .count();
        if owners > 1 {
            log::warn!("image {image}: segment masks overlap (first at pixel {p})");
            return;
        }
    }
}

/// One labelled segment set per image that has every label in `labels`;
/// images missing some label are skipped with a warning.
pub fn load_dataset<T: Scalar>(
    manifest_path: &Path,
    labels: &[Label],
) -> Result<Vec<SegmentSet<T>>> {
    let manifest = Manifest::load(manifest_path)?;
    load_manifest(&manifest, labels)
}

pub fn load_manifest<T: Scalar>(
    manifest: &Manifest,
    labels: &[Label],
) -> Result<Vec<SegmentSet<T>>> {
    let complete: Vec<&ManifestEntry> = manifest
        .entries
        .iter()
        .filter(|e| {
            let missing: Vec<&str> = labels
                .iter()
                .filter(|l| !e.masks.iter().any(|m| m.label.as_ref() == Some(*l)))
                .map(Label::key)
                .collect();
            if !missing.is_empty() {
                log::warn!("skipping image {}: missing {}", e.image, missing.join(", "));
            }
            missing.is_empty()
        })
        .collect();
    complete
        .par_iter()
        .map(|e| load_entry(manifest, e))
        .collect()
}

/// Every image of the manifest, labelled or not.
pub fn load_all<T: Scalar>(manifest: &Manifest) -> Result<Vec<SegmentSet<T>>> {
    manifest
        .entries
        .par_iter()
        .map(|e| load_entry(manifest, e))
        .collect()
}

/// Writes `sets` as PNG masks under `dir/<image>/<label>.png` plus `dir/manifest.jsonl`.
pub fn write_dataset<T: Scalar>(sets: &[SegmentSet<T>], dir: &Path, scan: &str) -> Result<PathBuf> {
    let mut entries = Vec::with_capacity(sets.len());
    for set in sets {
        let img_dir = dir.join(set.image_id());
        fs::create_dir_all(&img_dir).map_err(|e| Error::io(&img_dir, e))?;
        let mut masks = Vec::new();
        for s in set.segments() {
            let name = match &s.label {
                Some(l) => l.key().to_string(),
                None => format!("segment{}", s.id),
            };
            let rel = PathBuf::from(set.image_id()).join(format!("{name}.png"));
            write_mask(&s.mask, &dir.join(&rel))?;
            masks.push(MaskEntry {
                label: s.label.clone(),
                path: rel,
                segment: Some(s.id),
            });
        }
        entries.push(ManifestEntry {
            image: set.image_id().to_string(),
            scan: scan.to_string(),
            masks,
        });
    }
    let manifest = Manifest {
        entries,
        root: dir.to_path_buf(),
    };
    let path = dir.join("manifest.jsonl");
    let mut f = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
    f.write_all(manifest.to_jsonl().as_bytes())
        .map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

/// Ellipse of one organ, in fractions of the image width/height.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrganShape {
    pub label: Label,
    pub center: (f64, f64),
    pub axes: (f64, f64),
    pub angle_deg: f64,
}

impl OrganShape {
    fn new(label: &str, center: (f64, f64), axes: (f64, f64), angle_deg: f64) -> Self {
        Self {
            label: Label::new(label),
            center,
            axes,
            angle_deg,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticLayoutConfig {
    pub width: usize,
    pub height: usize,
    pub organs: Vec<OrganShape>,
    /// Uniform jitter of each center coordinate, as a fraction of the image size.
    pub center_jitter: f64,
    /// Relative jitter of each axis length.
    pub axis_jitter: f64,
    pub angle_jitter_deg: f64,
    pub max_retries: usize,
    pub seed: u64,
}

impl Default for SyntheticLayoutConfig {
    /// Left lung on the image left, liver under the right lung, spleen under
    /// the left lung, kidneys and psoas muscles flanking the centre, bladder at
    /// the bottom.
    fn default() -> Self {
        Self {
            width: 128,
            height: 128,
            organs: vec![
                OrganShape::new("liver", (0.70, 0.45), (0.16, 0.08), 0.0),
                OrganShape::new("spleen", (0.27, 0.45), (0.06, 0.05), 0.0),
                OrganShape::new("bladder", (0.50, 0.93), (0.06, 0.035), 0.0),
                OrganShape::new("r_kidney", (0.62, 0.62), (0.045, 0.055), 0.0),
                OrganShape::new("l_kidney", (0.38, 0.62), (0.045, 0.055), 0.0),
                OrganShape::new("r_lung", (0.72, 0.20), (0.12, 0.14), 0.0),
                OrganShape::new("l_lung", (0.28, 0.20), (0.12, 0.14), 0.0),
                OrganShape::new("r_psoas", (0.56, 0.77), (0.028, 0.07), 0.0),
                OrganShape::new("l_psoas", (0.44, 0.77), (0.028, 0.07), 0.0),
            ],
            center_jitter: 0.02,
            axis_jitter: 0.10,
            angle_jitter_deg: 10.0,
            max_retries: 200,
            seed: 0,
        }
    }
}

impl SyntheticLayoutConfig {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }

    pub fn without_jitter(mut self) -> Self {
        self.center_jitter = 0.0;
        self.axis_jitter = 0.0;
        self.angle_jitter_deg = 0.0;
        self
    }
}

fn symmetric(rng: &mut ChaCha8Rng, amplitude: f64) -> f64 {
    if amplitude > 0.0 {
        rng.gen_range(-amplitude..=amplitude)
    } else {
        0.0
    }
}

fn rasterize(w: usize, h: usize, shape: &OrganShape) -> Vec<bool> {
    let (cx, cy) = (shape.center.0 * w as f64, shape.center.1 * h as f64);
    let (a, b) = (shape.axes.0 * w as f64, shape.axes.1 * h as f64);
    let (sin, cos) = shape.angle_deg.to_radians().sin_cos();
    let mut out = vec![false; w * h];
    for y in 0..h {
        for x in 0..w {
            let dx = x as f64 + 0.5 - cx;
            let dy = y as f64 + 0.5 - cy;
            let u = (dx * cos + dy * sin) / a;
            let v = (-dx * sin + dy * cos) / b;
            out[y * w + x] = u * u + v * v <= 1.0;
        }
    }
    out
}

/// `n` images of nine disjoint elliptical organs, deterministic for a seed.
/// Segment ids 1..=9 are shuffled per image so that ids carry no label information.
pub fn synthesize<T: Scalar>(
    config: &SyntheticLayoutConfig,
    n: usize,
) -> Result<Vec<SegmentSet<T>>> {
    if n == 0 {
        return Err(Error::TooSmall("synthesize needs n >= 1".into()));
    }
    let (w, h) = (config.width, config.height);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut out = Vec::with_capacity(n);
    for index in 0..n {
        let mut ids: Vec<SegmentId> = (1..=config.organs.len() as SegmentId).collect();
        ids.shuffle(&mut rng);
        let mut placed = None;
        for _ in 0..config.max_retries.max(1) {
            let shapes: Vec<OrganShape> = config
                .organs
                .iter()
                .map(|o| OrganShape {
                    label: o.label.clone(),
                    center: (
                        o.center.0 + symmetric(&mut rng, config.center_jitter),
                        o.center.1 + symmetric(&mut rng, config.center_jitter),
                    ),
                    axes: (
                        o.axes.0 * (1.0 + symmetric(&mut rng, config.axis_jitter)),
                        o.axes.1 * (1.0 + symmetric(&mut rng, config.axis_jitter)),
                    ),
                    angle_deg: o.angle_deg + symmetric(&mut rng, config.angle_jitter_deg),
                })
                .collect();
            let masks: Vec<Vec<bool>> = shapes.iter().map(|s| rasterize(w, h, s)).collect();
            let mut owner = vec![false; w * h];
            let mut ok = masks.iter().all(|m| m.iter().any(|b| *b));
            'outer: for m in &masks {
                for (p, &b) in m.iter().enumerate() {
                    if b {
                        if owner[p] {
                            ok = false;
                            break 'outer;
                        }
                        owner[p] = true;
                    }
                }
            }
            if ok {
                placed = Some(masks);
                break;
            }
        }
        let masks = placed.ok_or(Error::Placement(config.max_retries.max(1)))?;
        let mut segments: Vec<Segment<T>> = masks
            .into_iter()
            .zip(&config.organs)
            .zip(&ids)
            .map(|((m, o), &id)| Segment {
                id,
                mask: ScalarField::from_raw(
                    w,
                    h,
                    m.into_iter()
                        .map(|b| if b { T::one() } else { T::zero() })
                        .collect(),
                ),
                label: Some(o.label.clone()),
            })
            .collect();
        segments.sort_by_key(|s| s.id);
        out.push(SegmentSet::new(format!("img{index:03}"), segments)?);
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InnerFold {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OuterFold {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
    pub inner: Vec<InnerFold>,
}

/// Splits `items` (already shuffled) into `k` contiguous near-equal chunks,
/// the first `len % k` one larger.
fn chunks(items: &[usize], k: usize) -> Vec<Vec<usize>> {
    let base = items.len() / k;
    let extra = items.len() % k;
    let mut out = Vec::with_capacity(k);
    let mut start = 0;
    for i in 0..k {
        let len = base + usize::from(i < extra);
        out.push(items[start..start + len].to_vec());
        start += len;
    }
    out
}

/// Seeded `k`-fold split of `n` indices into train/validation pairs.
pub fn kfold(n: usize, k: usize, seed: u64) -> Result<Vec<InnerFold>> {
    if k < 2 || n < k {
        return Err(Error::TooSmall(format!("{n} images for {k} folds")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    Ok(chunks(&order, k)
        .into_iter()
        .map(|v| InnerFold {
            train: order.iter().copied().filter(|x| !v.contains(x)).collect(),
            validation: v,
        })
        .collect())
}

/// Seeded nested split of `n` dataset indices.
pub fn nested_folds(n: usize, outer: usize, inner: usize, seed: u64) -> Result<Vec<OuterFold>> {
    if outer < 2 || inner < 2 {
        return Err(Error::TooSmall(format!(
            "need at least 2 folds, got outer {outer}, inner {inner}"
        )));
    }
    if n < outer {
        return Err(Error::TooSmall(format!(
            "{n} images for {outer} outer folds"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let tests = chunks(&order, outer);
    let mut folds = Vec::with_capacity(outer);
    for (i, test) in tests.iter().enumerate() {
        let mut train: Vec<usize> = tests
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != i)
            .flat_map(|(_, t)| t.iter().copied())
            .collect();
        if train.len() < inner {
            return Err(Error::TooSmall(format!(
                "outer fold {i} has {} training images for {inner} inner folds",
                train.len()
            )));
        }
        train.shuffle(&mut rng);
        let validations = chunks(&train, inner);
        let inner_folds = validations
            .iter()
            .map(|v| InnerFold {
                train: train.iter().copied().filter(|x| !v.contains(x)).collect(),
                validation: v.clone(),
            })
            .collect();
        folds.push(OuterFold {
            train,
            test: test.clone(),
            inner: inner_folds,
        });
    }
    Ok(folds)
}
