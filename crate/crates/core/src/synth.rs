//! Seeded synthetic lifelog corpora.
//!
//! Each day is a sequence of scenes. A scene draws its background cells from
//! a small palette of background prototypes; planted objects overwrite the
//! cells of a bounding box with their category's signature descriptors plus
//! Gaussian noise and raise the saliency there. Distractor images carry a
//! small unsalient patch of one signature, which pulls them up the visual
//! ranking without making them relevant.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs;
use std::path::Path;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::Normal;
use rayon::prelude::*;

use crate::codebook::{assign, Codebook, LocalFeatureMap};
use crate::corpus::{self, BBox, Corpus, DayPartition, ImageRecord, QueryItem, QuerySet, RelevanceJudgments};
use crate::encoder::SaliencyMap;
use crate::error::{Error, Result};
use crate::format;
use crate::pipeline::Dataset;

/// 2016-07-01T08:00:00Z
const EPOCH_BASE: i64 = 1_467_360_000;
const SLOT_SECONDS: i64 = 30;
const BACKGROUND_JITTER: f32 = 0.05;
const QUERY_DAY: &str = "query";

#[derive(Debug, Clone, PartialEq)]
pub struct CategorySpec {
    pub name: String,
    pub signatures: Vec<Vec<f32>>,
}

/// An object planted in image `slot` of target day `day`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Appearance {
    pub day: usize,
    pub slot: usize,
    pub category: usize,
    pub bbox: BBox,
}

/// An exemplar image of a category on the query day.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QueryAppearance {
    pub category: usize,
    pub bbox: BBox,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub seed: u64,
    pub days: usize,
    pub images_per_day: usize,
    pub rows: usize,
    pub cols: usize,
    pub dim: usize,
    /// Saliency maps are `rows * s x cols * s`.
    pub saliency_scale: usize,
    pub background_prototypes: usize,
    pub categories: Vec<CategorySpec>,
    pub appearances: Vec<Appearance>,
    pub query_appearances: Vec<QueryAppearance>,
    /// Standard deviation of the Gaussian noise added to planted cells.
    pub noise: f32,
    /// Probability that an image without a planted object carries a
    /// distractor patch.
    pub distractor_rate: f64,
}

/// Knobs for [`SynthSpec::preset`].
#[derive(Debug, Clone, PartialEq)]
pub struct PresetOptions {
    pub days: usize,
    pub images_per_day: usize,
    pub categories: usize,
    pub noise: f32,
    pub distractor_rate: f64,
    pub rows: usize,
    pub cols: usize,
    pub dim: usize,
    pub queries_per_category: usize,
}

impl Default for PresetOptions {
    fn default() -> Self {
        PresetOptions {
            days: 10,
            images_per_day: 200,
            categories: 4,
            noise: 0.4,
            distractor_rate: 0.15,
            rows: 12,
            cols: 16,
            dim: 16,
            queries_per_category: 5,
        }
    }
}

const CATEGORY_NAMES: [&str; 8] = [
    "mobile phone",
    "keys",
    "wallet",
    "glasses",
    "watch",
    "headphones",
    "bag",
    "umbrella",
];

/// A box spanning a quarter to half of each side, or half to three quarters
/// for close-up exemplars.
fn random_bbox(rng: &mut ChaCha8Rng, rows: usize, cols: usize, close_up: bool) -> BBox {
    let (lo, hi) = if close_up { (2, 3) } else { (1, 2) };
    let h = rng.random_range((rows * lo / 4).max(1)..=(rows * hi / 4).max(1));
    let w = rng.random_range((cols * lo / 4).max(1)..=(cols * hi / 4).max(1));
    let r0 = rng.random_range(0..=rows - h);
    let c0 = rng.random_range(0..=cols - w);
    BBox::new(r0, c0, r0 + h - 1, c0 + w - 1)
}

fn uniform_vec(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f32> {
    (0..dim).map(|_| rng.random::<f32>()).collect()
}

impl SynthSpec {
    /// A random corpus: every category shows up in one to three scenes of two
    /// to four consecutive images per day.
    pub fn preset(seed: u64, opts: &PresetOptions) -> Result<Self> {
        if opts.categories == 0 || opts.categories > CATEGORY_NAMES.len() {
            return Err(Error::invalid(format!(
                "between 1 and {} categories supported",
                CATEGORY_NAMES.len()
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_cafe);
        let categories = CATEGORY_NAMES[..opts.categories]
            .iter()
            .map(|name| CategorySpec {
                name: name.to_string(),
                signatures: (0..3).map(|_| uniform_vec(&mut rng, opts.dim)).collect(),
            })
            .collect();

        let mut appearances = Vec::new();
        for day in 0..opts.days {
            let mut taken = vec![false; opts.images_per_day];
            for category in 0..opts.categories {
                let scenes = rng.random_range(1..=3);
                for _ in 0..scenes {
                    let len = rng.random_range(2..=4usize).min(opts.images_per_day);
                    // a few attempts to find a free stretch; crowded days get fewer scenes
                    for _ in 0..20 {
                        let start = rng.random_range(0..=opts.images_per_day - len);
                        if taken[start..start + len].iter().any(|&t| t) {
                            continue;
                        }
                        let bbox = random_bbox(&mut rng, opts.rows, opts.cols, false);
                        for (slot, t) in taken.iter_mut().enumerate().skip(start).take(len) {
                            *t = true;
                            appearances.push(Appearance {
                                day,
                                slot,
                                category,
                                bbox,
                            });
                        }
                        break;
                    }
                }
            }
        }

        let query_appearances = (0..opts.categories)
            .flat_map(|category| (0..opts.queries_per_category).map(move |_| category))
            .map(|category| QueryAppearance {
                category,
                bbox: random_bbox(&mut rng, opts.rows, opts.cols, true),
            })
            .collect();

        let spec = SynthSpec {
            seed,
            days: opts.days,
            images_per_day: opts.images_per_day,
            rows: opts.rows,
            cols: opts.cols,
            dim: opts.dim,
            saliency_scale: 2,
            background_prototypes: 48,
            categories,
            appearances,
            query_appearances,
            noise: opts.noise,
            distractor_rate: opts.distractor_rate,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.rows == 0 || self.cols == 0 || self.dim == 0 || self.saliency_scale == 0 {
            return Err(Error::invalid(
                "grid, descriptor and saliency dimensions must be positive",
            ));
        }
        if self.background_prototypes == 0 {
            return Err(Error::invalid("at least one background prototype is required"));
        }
        if !(self.noise.is_finite() && self.noise >= 0.0) {
            return Err(Error::invalid("noise scale must be finite and non-negative"));
        }
        if !(0.0..=1.0).contains(&self.distractor_rate) {
            return Err(Error::invalid("distractor rate must lie in [0, 1]"));
        }
        for (i, c) in self.categories.iter().enumerate() {
            if c.signatures.is_empty() || c.signatures.iter().any(|s| s.len() != self.dim) {
                return Err(Error::invalid(format!(
                    "category `{}` needs signatures of dimension {}",
                    c.name, self.dim
                )));
            }
            for other in &self.categories[..i] {
                if other.name == c.name {
                    return Err(Error::invalid(format!("duplicate category `{}`", c.name)));
                }
            }
        }
        let all_sigs: Vec<&Vec<f32>> = self.categories.iter().flat_map(|c| &c.signatures).collect();
        for (i, a) in all_sigs.iter().enumerate() {
            if all_sigs[..i].contains(a) {
                return Err(Error::invalid("signatures must be pairwise distinct"));
            }
        }
        let mut occupied = HashSet::new();
        for a in &self.appearances {
            if a.day >= self.days || a.slot >= self.images_per_day {
                return Err(Error::invalid(format!(
                    "appearance at day {} slot {} is outside the corpus",
                    a.day, a.slot
                )));
            }
            if a.category >= self.categories.len() {
                return Err(Error::invalid(format!("unknown category index {}", a.category)));
            }
            a.bbox.validate(self.rows, self.cols)?;
            if !occupied.insert((a.day, a.slot)) {
                return Err(Error::invalid(format!(
                    "two objects planted in day {} slot {}",
                    a.day, a.slot
                )));
            }
        }
        for q in &self.query_appearances {
            if q.category >= self.categories.len() {
                return Err(Error::invalid(format!("unknown category index {}", q.category)));
            }
            q.bbox.validate(self.rows, self.cols)?;
        }
        Ok(())
    }

    pub fn day_id(day: usize) -> String {
        format!("d{day:02}")
    }
}

/// One generated image.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthImage {
    pub record: ImageRecord,
    pub features: LocalFeatureMap,
    pub saliency: SaliencyMap,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthCorpus {
    pub images: Vec<SynthImage>,
    pub queries: Vec<QuerySet>,
    pub judgments: Vec<RelevanceJudgments>,
}

struct Painter<'a> {
    spec: &'a SynthSpec,
    prototypes: Vec<Vec<f32>>,
    jitter: Normal<f32>,
    noise: Option<Normal<f32>>,
}

impl Painter<'_> {
    fn background(&self, rng: &mut ChaCha8Rng, palette: &[usize]) -> Vec<f32> {
        let s = self.spec;
        let mut values = Vec::with_capacity(s.rows * s.cols * s.dim);
        for _ in 0..s.rows * s.cols {
            let proto = &self.prototypes[palette[rng.random_range(0..palette.len())]];
            values.extend(proto.iter().map(|&v| (v + rng.sample(self.jitter)).max(0.0)));
        }
        values
    }

    fn plant(&self, rng: &mut ChaCha8Rng, values: &mut [f32], sigs: &[Vec<f32>], bbox: BBox) {
        let s = self.spec;
        for r in bbox.r0..=bbox.r1 {
            for c in bbox.c0..=bbox.c1 {
                let sig = &sigs[(r * s.cols + c) % sigs.len()];
                let cell = &mut values[(r * s.cols + c) * s.dim..(r * s.cols + c + 1) * s.dim];
                for (v, &base) in cell.iter_mut().zip(sig) {
                    let n = self.noise.map_or(0.0, |d| rng.sample(d));
                    *v = (base + n).max(0.0);
                }
            }
        }
    }

    fn saliency(&self, rng: &mut ChaCha8Rng, hot: Option<BBox>) -> SaliencyMap {
        let s = self.spec;
        let (sr, sc) = (s.rows * s.saliency_scale, s.cols * s.saliency_scale);
        let values = (0..sr * sc)
            .map(|i| {
                let (r, c) = (i / sc / s.saliency_scale, i % sc / s.saliency_scale);
                match hot {
                    Some(b) if b.contains(r, c) => rng.random_range(0.75f32..=1.0),
                    _ => rng.random_range(0.05f32..0.35),
                }
            })
            .collect();
        SaliencyMap::new(sr, sc, values).expect("values in range")
    }
}

/// Builds the corpus described by `spec`. The same spec always yields the
/// same corpus.
pub fn generate(spec: &SynthSpec) -> Result<SynthCorpus> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let painter = Painter {
        spec,
        prototypes: (0..spec.background_prototypes)
            .map(|_| uniform_vec(&mut rng, spec.dim))
            .collect(),
        jitter: Normal::new(0.0, BACKGROUND_JITTER).expect("valid jitter"),
        noise: (spec.noise > 0.0).then(|| Normal::new(0.0, spec.noise).expect("valid noise")),
    };
    let planted: HashMap<(usize, usize), &Appearance> = spec.appearances.iter().map(|a| ((a.day, a.slot), a)).collect();

    let mut images = Vec::new();
    let mut relevant: BTreeMap<(usize, usize), Vec<String>> = BTreeMap::new();
    for day in 0..spec.days {
        let day_id = SynthSpec::day_id(day);
        let mut palette = Vec::new();
        let mut scene_left = 0;
        for slot in 0..spec.images_per_day {
            if scene_left == 0 {
                scene_left = rng.random_range(5..=20);
                palette = (0..4)
                    .map(|_| rng.random_range(0..spec.background_prototypes))
                    .collect();
            }
            scene_left -= 1;

            let image_id = format!("{day_id}_{slot:04}");
            let mut values = painter.background(&mut rng, &palette);
            let hot = match planted.get(&(day, slot)) {
                Some(a) => {
                    let sigs = &spec.categories[a.category].signatures;
                    painter.plant(&mut rng, &mut values, sigs, a.bbox);
                    relevant.entry((day, a.category)).or_default().push(image_id.clone());
                    Some(a.bbox)
                }
                None => {
                    if !spec.categories.is_empty() && rng.random_bool(spec.distractor_rate) {
                        let cat = rng.random_range(0..spec.categories.len());
                        let sigs = &spec.categories[cat].signatures;
                        let sig = rng.random_range(0..sigs.len());
                        let (h, w) = (spec.rows.min(2), spec.cols.min(2));
                        let r0 = rng.random_range(0..=spec.rows - h);
                        let c0 = rng.random_range(0..=spec.cols - w);
                        let patch = BBox::new(r0, c0, r0 + h - 1, c0 + w - 1);
                        painter.plant(&mut rng, &mut values, &sigs[sig..=sig], patch);
                    }
                    None
                }
            };
            let saliency = painter.saliency(&mut rng, hot);
            images.push(SynthImage {
                record: ImageRecord {
                    image_id: image_id.clone(),
                    day_id: day_id.clone(),
                    timestamp: EPOCH_BASE + day as i64 * 86_400 + slot as i64 * SLOT_SECONDS,
                    feature_ref: format!("features/{image_id}.egof"),
                    saliency_ref: Some(format!("saliency/{image_id}.egos")),
                },
                features: LocalFeatureMap::new(spec.rows, spec.cols, spec.dim, values)?,
                saliency,
            });
        }
    }

    let mut items: Vec<Vec<QueryItem>> = vec![Vec::new(); spec.categories.len()];
    for (n, q) in spec.query_appearances.iter().enumerate() {
        let image_id = format!("{QUERY_DAY}_{n:04}");
        let palette: Vec<usize> = (0..4)
            .map(|_| rng.random_range(0..spec.background_prototypes))
            .collect();
        let mut values = painter.background(&mut rng, &palette);
        painter.plant(&mut rng, &mut values, &spec.categories[q.category].signatures, q.bbox);
        let saliency = painter.saliency(&mut rng, Some(q.bbox));
        items[q.category].push(QueryItem {
            image_id: image_id.clone(),
            bbox: Some(q.bbox),
        });
        images.push(SynthImage {
            record: ImageRecord {
                image_id: image_id.clone(),
                day_id: QUERY_DAY.into(),
                timestamp: EPOCH_BASE - 86_400 + n as i64 * SLOT_SECONDS,
                feature_ref: format!("features/{image_id}.egof"),
                saliency_ref: Some(format!("saliency/{image_id}.egos")),
            },
            features: LocalFeatureMap::new(spec.rows, spec.cols, spec.dim, values)?,
            saliency,
        });
    }

    let queries = spec
        .categories
        .iter()
        .zip(items)
        .filter(|(_, items)| !items.is_empty())
        .map(|(c, items)| QuerySet {
            category: c.name.clone(),
            items,
        })
        .collect();
    let mut judgments = Vec::new();
    for day in 0..spec.days {
        for (ci, c) in spec.categories.iter().enumerate() {
            judgments.push(RelevanceJudgments {
                day_id: SynthSpec::day_id(day),
                category: c.name.clone(),
                relevant_ids: relevant.remove(&(day, ci)).unwrap_or_default(),
            });
        }
    }
    Ok(SynthCorpus {
        images,
        queries,
        judgments,
    })
}

impl SynthCorpus {
    pub fn days(&self) -> Vec<DayPartition> {
        let mut by_day: BTreeMap<&str, Vec<ImageRecord>> = BTreeMap::new();
        for img in &self.images {
            by_day.entry(&img.record.day_id).or_default().push(img.record.clone());
        }
        by_day.into_iter().map(|(d, recs)| DayPartition::new(d, recs)).collect()
    }

    pub fn corpus(&self) -> Corpus {
        Corpus::from_days("", self.days())
    }

    /// Every `stride`-th descriptor of every image, for codebook training.
    pub fn descriptor_samples(&self, stride: usize) -> Vec<Vec<f32>> {
        let stride = stride.max(1);
        self.images
            .iter()
            .flat_map(|img| img.features.descriptors())
            .step_by(stride)
            .map(<[f32]>::to_vec)
            .collect()
    }

    /// Quantizes the corpus in memory, skipping the file round trip.
    pub fn to_dataset(&self, codebook: &Codebook) -> Result<Dataset> {
        let maps = self
            .images
            .par_iter()
            .map(|img| Ok((img.record.image_id.clone(), assign(&img.features, codebook)?)))
            .collect::<Result<HashMap<_, _>>>()?;
        let saliency = self
            .images
            .iter()
            .map(|img| (img.record.image_id.clone(), img.saliency.clone()))
            .collect();
        Dataset::new(
            self.corpus(),
            self.queries.clone(),
            self.judgments.clone(),
            codebook.len(),
            maps,
            saliency,
        )
    }

    /// Writes `manifest.jsonl`, `queries.json`, `judgments.json` and the
    /// per-image feature and saliency files under `dir`.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        for sub in ["features", "saliency"] {
            let p = dir.join(sub);
            fs::create_dir_all(&p).map_err(|e| Error::io(&p, e))?;
        }
        for img in &self.images {
            format::write_feature_map(dir.join(&img.record.feature_ref), &img.features)?;
            if let Some(s) = &img.record.saliency_ref {
                format::write_saliency_map(dir.join(s), &img.saliency)?;
            }
        }
        corpus::write_manifest(dir.join("manifest.jsonl"), &self.days())?;
        corpus::write_queries(dir.join("queries.json"), &self.queries)?;
        corpus::write_judgments(dir.join("judgments.json"), &self.judgments)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> PresetOptions {
        PresetOptions {
            days: 2,
            images_per_day: 30,
            categories: 2,
            rows: 6,
            cols: 8,
            dim: 4,
            ..PresetOptions::default()
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let spec = SynthSpec::preset(3, &small()).unwrap();
        assert_eq!(generate(&spec).unwrap(), generate(&spec).unwrap());
    }

    #[test]
    fn judgments_mark_exactly_planted_images() {
        let spec = SynthSpec::preset(11, &small()).unwrap();
        let corpus = generate(&spec).unwrap();
        let planted: HashSet<String> = spec
            .appearances
            .iter()
            .map(|a| format!("{}_{:04}", SynthSpec::day_id(a.day), a.slot))
            .collect();
        let judged: HashSet<String> = corpus.judgments.iter().flat_map(|j| j.relevant_ids.clone()).collect();
        assert_eq!(planted, judged);
        assert_eq!(corpus.judgments.len(), 4);
        assert_eq!(corpus.queries.len(), 2);
        assert!(corpus.queries.iter().all(|q| q.items.len() == 5 && q.has_all_bboxes()));
    }

    #[test]
    fn category_without_appearances_has_empty_judgment() {
        let mut spec = SynthSpec::preset(5, &small()).unwrap();
        spec.appearances.retain(|a| !(a.day == 1 && a.category == 0));
        let corpus = generate(&spec).unwrap();
        let j = corpus
            .judgments
            .iter()
            .find(|j| j.day_id == "d01" && j.category == spec.categories[0].name)
            .unwrap();
        assert!(j.relevant_ids.is_empty());
    }

    #[test]
    fn inconsistent_specs_rejected() {
        let base = SynthSpec::preset(5, &small()).unwrap();
        let mut s = base.clone();
        s.appearances[0].slot = 999;
        assert!(generate(&s).is_err());
        let mut s = base.clone();
        s.categories[1].signatures[0] = s.categories[0].signatures[0].clone();
        assert!(generate(&s).is_err());
        let mut s = base.clone();
        let dup = s.appearances[0];
        s.appearances.push(dup);
        assert!(generate(&s).is_err());
        let mut s = base;
        s.appearances[0].bbox = BBox::new(0, 0, 6, 0);
        assert!(generate(&s).is_err());
    }
}
