//! Dataset model: chip samples with aspect-angle metadata, the grouped
//! index, azimuth subset sampling, MSTAR ingestion and the synthetic
//! desk-scale scene generator.

mod phoenix;
mod synthetic;

pub use phoenix::{read_mstar_chip, write_mstar_chip};
pub use synthetic::{
    build_synthetic_dataset, render_synthetic_sample, synthetic_class_models, PointScatterer,
    SyntheticDatasetConfig, SyntheticTargetModel,
};

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::{Rng as _, SeedableRng as _};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::imaging::MagnitudeImage;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("unknown class {label:?}")]
    UnknownClass { label: String },
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("truncated data: expected {expected} bytes, got {got}")]
    TruncatedData { expected: usize, got: usize },
    #[error("bad sample: {0}")]
    BadSample(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad index entry: {0}")]
    BadIndex(String),
    #[error(transparent)]
    Imaging(#[from] crate::imaging::ImagingError),
}

/// One observation: magnitude chip plus (incidence, azimuth) aspect angles in
/// degrees, class label, and a stable source identifier.
#[derive(Debug, Clone, PartialEq)]
pub struct SarSample {
    pub chip: MagnitudeImage,
    pub incidence_deg: f64,
    pub azimuth_deg: f64,
    pub class_label: String,
    pub source_id: String,
}

impl SarSample {
    pub fn validate(&self) -> Result<(), DataError> {
        if !(0.0..=90.0).contains(&self.incidence_deg) {
            return Err(DataError::BadSample(format!(
                "incidence {} outside [0, 90]",
                self.incidence_deg
            )));
        }
        if !(0.0..360.0).contains(&self.azimuth_deg) {
            return Err(DataError::BadSample(format!(
                "azimuth {} outside [0, 360)",
                self.azimuth_deg
            )));
        }
        if self.chip.data.iter().any(|v| *v < 0.0 || !v.is_finite()) {
            return Err(DataError::BadSample("chip has negative or non-finite pixels".into()));
        }
        Ok(())
    }
}

fn incidence_key(deg: f64) -> i64 {
    (deg * 1000.0).round() as i64
}

/// Samples grouped by (class, incidence), each group sorted by azimuth with a
/// stable tie-break on source id.
#[derive(Debug, Clone)]
pub struct DatasetIndex {
    samples: Vec<SarSample>,
    groups: BTreeMap<(String, i64), Vec<usize>>,
}

impl DatasetIndex {
    pub fn from_samples(samples: Vec<SarSample>) -> Self {
        let mut groups: BTreeMap<(String, i64), Vec<usize>> = BTreeMap::new();
        for (i, s) in samples.iter().enumerate() {
            groups
                .entry((s.class_label.clone(), incidence_key(s.incidence_deg)))
                .or_default()
                .push(i);
        }
        for indices in groups.values_mut() {
            indices.sort_by(|&a, &b| {
                samples[a]
                    .azimuth_deg
                    .partial_cmp(&samples[b].azimuth_deg)
                    .unwrap()
                    .then_with(|| samples[a].source_id.cmp(&samples[b].source_id))
            });
        }
        Self { samples, groups }
    }

    pub fn samples(&self) -> &[SarSample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn classes(&self) -> Vec<String> {
        let mut out: Vec<String> = self.groups.keys().map(|(c, _)| c.clone()).collect();
        out.dedup();
        out
    }

    pub fn incidences_of(&self, class: &str) -> Vec<f64> {
        self.groups
            .keys()
            .filter(|(c, _)| c == class)
            .map(|(_, k)| *k as f64 / 1000.0)
            .collect()
    }

    pub fn group(&self, class: &str, incidence_deg: f64) -> Option<&[usize]> {
        self.groups
            .get(&(class.to_string(), incidence_key(incidence_deg)))
            .map(|v| v.as_slice())
    }

    /// Total group sizes partition the input.
    pub fn group_size_sum(&self) -> usize {
        self.groups.values().map(|v| v.len()).sum()
    }
}

/// Output of the azimuth subset sampler.
#[derive(Debug, Clone)]
pub struct SubsetReport {
    /// Indices into the dataset's sample vector.
    pub selected: Vec<usize>,
    /// Steps of the azimuth walk with no in-tolerance sample.
    pub skipped_steps: usize,
}

fn circular_distance_deg(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(360.0);
    d.min(360.0 - d)
}

/// Azimuth subset sampling: per incidence angle, draw a random start
/// phi_0 ~ U(0, spacing) and walk the circle in `spacing_deg` steps, picking
/// one random in-tolerance sample per step when one exists. Deterministic
/// under the seed; never picks the same source twice within a group.
pub fn sample_subset(
    index: &DatasetIndex,
    class: &str,
    spacing_deg: f64,
    tolerance_deg: f64,
    seed: u64,
) -> Result<SubsetReport, DataError> {
    assert!(spacing_deg > 0.0, "spacing must be positive");
    assert!(tolerance_deg >= 0.0, "tolerance must be nonnegative");
    if !index.groups.keys().any(|(c, _)| c == class) {
        return Err(DataError::UnknownClass {
            label: class.to_string(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut selected = Vec::new();
    let mut skipped = 0usize;
    for ((c, _), members) in index.groups.iter() {
        if c != class {
            continue;
        }
        let mut used = vec![false; members.len()];
        let phi0: f64 = rng.gen_range(0.0..spacing_deg);
        let mut phi = phi0;
        while phi < 360.0 {
            let candidates: Vec<usize> = (0..members.len())
                .filter(|&j| {
                    !used[j]
                        && circular_distance_deg(index.samples[members[j]].azimuth_deg, phi)
                            <= tolerance_deg
                })
                .collect();
            if candidates.is_empty() {
                skipped += 1;
            } else {
                let pick = candidates[rng.gen_range(0..candidates.len())];
                used[pick] = true;
                selected.push(members[pick]);
            }
            phi += spacing_deg;
        }
    }
    Ok(SubsetReport {
        selected,
        skipped_steps: skipped,
    })
}

// ---------------------------------------------------------------------------
// Persistence: directory of CIMG chips plus a JSON-lines index
// ---------------------------------------------------------------------------

#[derive(serde::Serialize, serde::Deserialize)]
struct IndexRow {
    class_label: String,
    incidence_deg: f64,
    azimuth_deg: f64,
    source_id: String,
    path: String,
}

/// Persist a dataset as `index.jsonl` plus one CIMG file per chip.
pub fn save_dataset(index: &DatasetIndex, dir: &Path) -> Result<(), DataError> {
    std::fs::create_dir_all(dir.join("chips"))?;
    let mut rows = String::new();
    for (i, s) in index.samples().iter().enumerate() {
        let rel = format!("chips/{:06}.cimg", i);
        let img = crate::imaging::ComplexImage {
            rows: s.chip.rows,
            cols: s.chip.cols,
            pixels: s
                .chip
                .data
                .iter()
                .map(|&m| num_complex::Complex64::new(m, 0.0))
                .collect(),
            ground_spacing: (0.3, 0.3),
        };
        crate::imaging::write_cimg(&img, &dir.join(&rel))?;
        let row = IndexRow {
            class_label: s.class_label.clone(),
            incidence_deg: s.incidence_deg,
            azimuth_deg: s.azimuth_deg,
            source_id: s.source_id.clone(),
            path: rel,
        };
        rows.push_str(&serde_json::to_string(&row).expect("serializable row"));
        rows.push('\n');
    }
    std::fs::write(dir.join("index.jsonl"), rows)?;
    Ok(())
}

/// Parse one JSON-lines index row (exposed for fuzzing).
pub fn parse_index_row(line: &str) -> Result<(String, f64, f64, String, PathBuf), DataError> {
    let row: IndexRow =
        serde_json::from_str(line).map_err(|e| DataError::BadIndex(e.to_string()))?;
    if !row.incidence_deg.is_finite() || !row.azimuth_deg.is_finite() {
        return Err(DataError::BadIndex("non-finite angles".into()));
    }
    if row.path.contains("..") || Path::new(&row.path).is_absolute() {
        return Err(DataError::BadIndex(format!("suspicious path {:?}", row.path)));
    }
    Ok((
        row.class_label,
        row.incidence_deg,
        row.azimuth_deg,
        row.source_id,
        PathBuf::from(row.path),
    ))
}

/// Load a dataset directory written by [`save_dataset`].
pub fn load_dataset(dir: &Path) -> Result<DatasetIndex, DataError> {
    let text = std::fs::read_to_string(dir.join("index.jsonl"))?;
    let mut samples = Vec::new();
    for line in text.lines() {
        if line.trim().is_empty() {
            continue;
        }
        let (class_label, incidence_deg, azimuth_deg, source_id, rel) = parse_index_row(line)?;
        let img = crate::imaging::read_cimg(&dir.join(&rel))?;
        let sample = SarSample {
            chip: img.magnitude(),
            incidence_deg,
            azimuth_deg,
            class_label,
            source_id,
        };
        sample.validate()?;
        samples.push(sample);
    }
    Ok(DatasetIndex::from_samples(samples))
}
