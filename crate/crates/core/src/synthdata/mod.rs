//! Seeded synthetic street networks, canyon scenes and labelled image corpora.
//!
//! Every generator is a pure function of its parameters: item `i` draws from
//! its own ChaCha stream, so output does not depend on thread scheduling.

mod canyon;
mod density;
mod networks;

use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::io::{read_image, read_json, write_image, write_json};
use crate::neural::ImageTensor;
use crate::{Error, Result, FORMAT_VERSION};

pub use canyon::{gen_canyon_scene, gen_frontage_corpus, CanyonScene, FrontageClass, FrontageItem, FrontageSpec};
pub use density::{gen_density_corpus, DensityCorpus, DensitySpec, DensityTile, TileLayout};
pub use networks::{gen_grid_network, gen_radial_network};

pub const IMAGES_DIR: &str = "images";
pub const LABELS_FILE: &str = "labels.csv";
pub const SPEC_FILE: &str = "spec.json";

/// Stream `item` of the generator seeded with `seed`.
pub(crate) fn item_rng(seed: u64, item: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(item);
    rng
}

/// Parameters of any generator, tagged by kind.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SynthSpec {
    GridNet {
        rows: usize,
        cols: usize,
        spacing: f64,
        jitter: f64,
        seed: u64,
    },
    RadialNet {
        rings: usize,
        spokes: usize,
        ring_spacing: f64,
        jitter: f64,
        seed: u64,
    },
    CanyonScene {
        h_left: f64,
        h_right: f64,
        half_width_left: f64,
        half_width_right: f64,
        rotation: f64,
    },
    DensityCorpus(DensitySpec),
    FrontageCorpus(FrontageSpec),
}

/// Contents of `spec.json` in a corpus directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorpusMeta {
    pub version: String,
    pub spec: SynthSpec,
    /// `regression` or `classification:<k>`.
    pub task: String,
    pub count: usize,
    pub label_min: f64,
    pub label_max: f64,
}

/// A labelled image set as stored on disk.
#[derive(Clone, Debug, PartialEq)]
pub struct Corpus {
    pub meta: CorpusMeta,
    pub ids: Vec<String>,
    pub images: Vec<ImageTensor>,
    pub labels: Vec<f64>,
    /// Map position of each item.
    pub coords: Vec<(f64, f64)>,
}

#[derive(Debug, Serialize, Deserialize)]
struct LabelRow {
    id: String,
    label: f64,
    label_norm: f64,
    x: f64,
    y: f64,
}

impl Corpus {
    pub fn from_density(c: &DensityCorpus) -> Self {
        let labels = c.labels();
        let (lo, hi) = c.label_range();
        let half = c.spec.tile_side / 2.0;
        Corpus {
            meta: CorpusMeta {
                version: FORMAT_VERSION.into(),
                spec: SynthSpec::DensityCorpus(c.spec),
                task: "regression".into(),
                count: labels.len(),
                label_min: lo,
                label_max: hi,
            },
            ids: c.tiles.iter().map(|t| t.id.clone()).collect(),
            images: c.images(),
            coords: c.tiles.iter().map(|t| (t.origin.0 + half, t.origin.1 + half)).collect(),
            labels,
        }
    }

    pub fn from_frontage(spec: &FrontageSpec, items: &[FrontageItem]) -> Self {
        let width = (items.len() as f64).sqrt().ceil().max(1.0) as usize;
        Corpus {
            meta: CorpusMeta {
                version: FORMAT_VERSION.into(),
                spec: SynthSpec::FrontageCorpus(*spec),
                task: "classification:4".into(),
                count: items.len(),
                label_min: 0.0,
                label_max: 3.0,
            },
            ids: items.iter().map(|i| i.id.clone()).collect(),
            images: items.iter().map(|i| i.image.clone()).collect(),
            labels: items.iter().map(|i| i.class.label() as f64).collect(),
            coords: (0..items.len()).map(|i| ((i % width) as f64, (i / width) as f64)).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    fn file_name(&self, i: usize) -> String {
        let ext = if self.images[i].channels() == 1 { "pgm" } else { "ppm" };
        format!("{}.{ext}", self.ids[i])
    }

    /// Writes `images/`, `labels.csv` and `spec.json` under `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        let images = dir.join(IMAGES_DIR);
        fs::create_dir_all(&images)?;
        for i in 0..self.len() {
            write_image(&self.images[i], &images.join(self.file_name(i)))?;
        }
        let span = self.meta.label_max - self.meta.label_min;
        let mut w = csv::Writer::from_path(dir.join(LABELS_FILE))?;
        for i in 0..self.len() {
            w.serialize(LabelRow {
                id: self.ids[i].clone(),
                label: self.labels[i],
                label_norm: if span > 0.0 { (self.labels[i] - self.meta.label_min) / span } else { 0.0 },
                x: self.coords[i].0,
                y: self.coords[i].1,
            })?;
        }
        w.flush()?;
        write_json(&dir.join(SPEC_FILE), &self.meta)
    }

    pub fn read(dir: &Path) -> Result<Corpus> {
        let meta: CorpusMeta = read_json(&dir.join(SPEC_FILE))?;
        if meta.version != FORMAT_VERSION {
            return Err(Error::format(dir.join(SPEC_FILE), format!("unsupported version '{}'", meta.version)));
        }
        let mut r = csv::Reader::from_path(dir.join(LABELS_FILE))?;
        let mut corpus = Corpus {
            meta,
            ids: Vec::new(),
            images: Vec::new(),
            labels: Vec::new(),
            coords: Vec::new(),
        };
        for row in r.deserialize() {
            let row: LabelRow = row?;
            let images = dir.join(IMAGES_DIR);
            let path = ["pgm", "ppm", "png"]
                .iter()
                .map(|e| images.join(format!("{}.{e}", row.id)))
                .find(|p| p.exists())
                .ok_or_else(|| Error::format(&images, format!("no image for '{}'", row.id)))?;
            corpus.images.push(read_image(&path)?);
            corpus.ids.push(row.id);
            corpus.labels.push(row.label);
            corpus.coords.push((row.x, row.y));
        }
        if corpus.len() != corpus.meta.count {
            return Err(Error::format(
                dir.join(LABELS_FILE),
                format!("{} rows but spec.json declares {}", corpus.len(), corpus.meta.count),
            ));
        }
        Ok(corpus)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn corpus_round_trip() {
        let spec = DensitySpec {
            count: 10,
            raster_size: 16,
            ..DensitySpec::default()
        };
        let c = Corpus::from_density(&gen_density_corpus(&spec).unwrap());
        let dir = tempfile::tempdir().unwrap();
        c.write(dir.path()).unwrap();
        assert!(dir.path().join("images/tile0000.pgm").exists());
        let back = Corpus::read(dir.path()).unwrap();
        assert_eq!(back.ids, c.ids);
        assert_eq!(back.images, c.images);
        assert_eq!(back.meta, c.meta);
        for (a, b) in back.labels.iter().zip(&c.labels) {
            assert_eq!(a, b);
        }
    }

    #[test]
    fn spec_is_tagged_by_kind() {
        let s = SynthSpec::GridNet {
            rows: 2,
            cols: 2,
            spacing: 100.0,
            jitter: 0.0,
            seed: 1,
        };
        let v = serde_json::to_value(&s).unwrap();
        assert_eq!(v["kind"], "grid_net");
        let d = serde_json::to_value(SynthSpec::DensityCorpus(DensitySpec::default())).unwrap();
        assert_eq!(d["kind"], "density_corpus");
        assert_eq!(d["count"], 320);
    }
}
