//! Days of timestamped images, query sets and relevance judgments.
//!
//! The manifest is JSON-lines, one image per line. Queries and judgments are
//! JSON documents holding either a single object or an array of objects.
//! File references inside the manifest are kept verbatim and resolved against
//! the manifest's directory on demand, so a loaded corpus can be written back
//! unchanged.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::format;

/// One captured image.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageRecord {
    pub image_id: String,
    pub day_id: String,
    /// Epoch seconds, UTC.
    pub timestamp: i64,
    pub feature_ref: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub saliency_ref: Option<String>,
}

/// All images of one day, ordered oldest first. Equal timestamps are ordered
/// by ascending image id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DayPartition {
    pub day_id: String,
    pub images: Vec<ImageRecord>,
}

impl DayPartition {
    pub fn new(day_id: impl Into<String>, mut images: Vec<ImageRecord>) -> Self {
        images.sort_by(|a, b| a.timestamp.cmp(&b.timestamp).then_with(|| a.image_id.cmp(&b.image_id)));
        DayPartition {
            day_id: day_id.into(),
            images,
        }
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }
}

/// Inclusive rectangle `(r0, c0, r1, c1)` in assignment-map cell coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(from = "[usize; 4]", into = "[usize; 4]")]
pub struct BBox {
    pub r0: usize,
    pub c0: usize,
    pub r1: usize,
    pub c1: usize,
}

impl BBox {
    pub fn new(r0: usize, c0: usize, r1: usize, c1: usize) -> Self {
        BBox { r0, c0, r1, c1 }
    }

    /// The box covering a whole `rows x cols` grid.
    pub fn full(rows: usize, cols: usize) -> Self {
        BBox::new(0, 0, rows.saturating_sub(1), cols.saturating_sub(1))
    }

    pub fn validate(&self, rows: usize, cols: usize) -> Result<()> {
        if self.r0 <= self.r1 && self.c0 <= self.c1 && self.r1 < rows && self.c1 < cols {
            Ok(())
        } else {
            Err(Error::InvalidBbox {
                bbox: (*self).into(),
                rows,
                cols,
            })
        }
    }

    pub fn contains(&self, r: usize, c: usize) -> bool {
        (self.r0..=self.r1).contains(&r) && (self.c0..=self.c1).contains(&c)
    }
}

impl From<[usize; 4]> for BBox {
    fn from(v: [usize; 4]) -> Self {
        BBox::new(v[0], v[1], v[2], v[3])
    }
}

impl From<BBox> for [usize; 4] {
    fn from(b: BBox) -> Self {
        [b.r0, b.c0, b.r1, b.c1]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryItem {
    pub image_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bbox: Option<BBox>,
}

/// Exemplar images of one personal object.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuerySet {
    pub category: String,
    pub items: Vec<QueryItem>,
}

impl QuerySet {
    pub fn has_all_bboxes(&self) -> bool {
        self.items.iter().all(|item| item.bbox.is_some())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelevanceJudgments {
    pub day_id: String,
    pub category: String,
    pub relevant_ids: Vec<String>,
}

impl RelevanceJudgments {
    pub fn relevant_set(&self) -> HashSet<&str> {
        self.relevant_ids.iter().map(String::as_str).collect()
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T> From<OneOrMany<T>> for Vec<T> {
    fn from(v: OneOrMany<T>) -> Self {
        match v {
            OneOrMany::One(x) => vec![x],
            OneOrMany::Many(xs) => xs,
        }
    }
}

/// A loaded manifest: days plus the directory used to resolve file references.
#[derive(Debug, Clone)]
pub struct Corpus {
    pub base_dir: PathBuf,
    pub days: Vec<DayPartition>,
    index: HashMap<String, (usize, usize)>,
}

impl Corpus {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let days = load_manifest(path)?;
        let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(Corpus::from_days(base_dir, days))
    }

    pub fn from_days(base_dir: impl Into<PathBuf>, days: Vec<DayPartition>) -> Self {
        let mut index = HashMap::new();
        for (d, day) in days.iter().enumerate() {
            for (i, rec) in day.images.iter().enumerate() {
                index.insert(rec.image_id.clone(), (d, i));
            }
        }
        Corpus {
            base_dir: base_dir.into(),
            days,
            index,
        }
    }

    pub fn image(&self, image_id: &str) -> Option<&ImageRecord> {
        self.index.get(image_id).map(|&(d, i)| &self.days[d].images[i])
    }

    pub fn day(&self, day_id: &str) -> Option<&DayPartition> {
        self.days.iter().find(|d| d.day_id == day_id)
    }

    pub fn images(&self) -> impl Iterator<Item = &ImageRecord> {
        self.days.iter().flat_map(|d| d.images.iter())
    }

    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    pub fn resolve(&self, reference: &str) -> PathBuf {
        self.base_dir.join(reference)
    }

    /// Grid dimensions of an image's feature or assignment map, read from
    /// the file header.
    pub fn grid_dims(&self, image_id: &str) -> Result<(usize, usize)> {
        let rec = self
            .image(image_id)
            .ok_or_else(|| Error::UnknownImage(image_id.to_string()))?;
        format::read_grid_dims(self.resolve(&rec.feature_ref))
    }
}

/// Parses a JSON-lines manifest into days sorted by day id.
pub fn load_manifest(path: impl AsRef<Path>) -> Result<Vec<DayPartition>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base_dir = path.parent().unwrap_or(Path::new(""));

    let mut seen = HashSet::new();
    let mut by_day: BTreeMap<String, Vec<ImageRecord>> = BTreeMap::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let parse_err = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line: lineno + 1,
            message,
        };
        let rec: ImageRecord = serde_json::from_str(line).map_err(|e| parse_err(e.to_string()))?;
        if rec.timestamp <= 0 {
            return Err(parse_err(format!(
                "timestamp {} of `{}` is not positive",
                rec.timestamp, rec.image_id
            )));
        }
        if !seen.insert(rec.image_id.clone()) {
            return Err(Error::DuplicateId(rec.image_id));
        }
        let feature = base_dir.join(&rec.feature_ref);
        if !feature.is_file() {
            return Err(Error::MissingFeature {
                image_id: rec.image_id,
                path: feature,
            });
        }
        by_day.entry(rec.day_id.clone()).or_default().push(rec);
    }

    Ok(by_day
        .into_iter()
        .map(|(day_id, images)| DayPartition::new(day_id, images))
        .collect())
}

/// Writes days as a JSON-lines manifest, day by day in stored order.
pub fn write_manifest(path: impl AsRef<Path>, days: &[DayPartition]) -> Result<()> {
    let path = path.as_ref();
    let mut out = Vec::new();
    for rec in days.iter().flat_map(|d| d.images.iter()) {
        serde_json::to_writer(&mut out, rec).expect("records serialize");
        out.push(b'\n');
    }
    write_bytes(path, &out)
}

/// Loads query sets, checking image ids against the corpus and each bbox
/// against the referenced map's grid.
pub fn load_queries(path: impl AsRef<Path>, corpus: &Corpus) -> Result<Vec<QuerySet>> {
    let path = path.as_ref();
    let sets: Vec<QuerySet> = read_json::<OneOrMany<QuerySet>>(path)?.into();
    for set in &sets {
        if set.items.is_empty() {
            return Err(Error::Format {
                path: path.to_path_buf(),
                message: format!("query set `{}` has no items", set.category),
            });
        }
        for item in &set.items {
            if corpus.image(&item.image_id).is_none() {
                return Err(Error::UnknownImage(item.image_id.clone()));
            }
            if let Some(bbox) = item.bbox {
                let (rows, cols) = corpus.grid_dims(&item.image_id)?;
                bbox.validate(rows, cols)?;
            }
        }
    }
    Ok(sets)
}

pub fn load_judgments(path: impl AsRef<Path>, corpus: &Corpus) -> Result<Vec<RelevanceJudgments>> {
    let path = path.as_ref();
    let judgments: Vec<RelevanceJudgments> = read_json::<OneOrMany<RelevanceJudgments>>(path)?.into();
    for j in &judgments {
        let day = corpus.day(&j.day_id).ok_or_else(|| Error::Format {
            path: path.to_path_buf(),
            message: format!("judgments reference unknown day `{}`", j.day_id),
        })?;
        for id in &j.relevant_ids {
            match corpus.image(id) {
                Some(rec) if rec.day_id == day.day_id => {}
                _ => return Err(Error::UnknownImage(id.clone())),
            }
        }
    }
    Ok(judgments)
}

pub fn write_queries(path: impl AsRef<Path>, sets: &[QuerySet]) -> Result<()> {
    write_json(path.as_ref(), sets)
}

pub fn write_judgments(path: impl AsRef<Path>, judgments: &[RelevanceJudgments]) -> Result<()> {
    write_json(path.as_ref(), judgments)
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        line: e.line(),
        message: e.to_string(),
    })
}

fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut out = serde_json::to_vec_pretty(value).expect("value serializes");
    out.push(b'\n');
    write_bytes(path, &out)
}

pub(crate) fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(bytes).map_err(|e| Error::io(path, e))
}
