//! Target-model interface, a desk-scale nearest-prototype reference
//! classifier, cross-entropy, fooling-rate metrics, transferability matrices
//! and the partial-knowledge evaluation protocol.

use std::collections::BTreeMap;
use std::io::Write as _;
use std::process::{Command, Stdio};

use thiserror::Error;

use crate::data::SarSample;
use crate::imaging::MagnitudeImage;

#[derive(Debug, Error)]
pub enum ClassifyError {
    #[error("unknown class {label:?}")]
    UnknownClass { label: String },
    #[error("invalid probabilities: {reason}")]
    InvalidProbabilities { reason: String },
    #[error("class {label:?} has no samples")]
    EmptyClass { label: String },
    #[error("evaluation set is empty")]
    EmptyEvaluationSet,
    #[error("rendering adversarial chip failed: {0}")]
    Render(String),
    #[error("external model failed: {0}")]
    ModelFailure(String),
}

/// A pluggable classifier: chips in, probability vectors out. Outputs must be
/// nonnegative and sum to 1 within 1e-6.
pub trait TargetModel {
    fn class_labels(&self) -> &[String];
    fn predict(&self, chip: &MagnitudeImage) -> Result<Vec<f64>, ClassifyError>;

    fn class_count(&self) -> usize {
        self.class_labels().len()
    }

    /// Argmax label of the validated probability vector.
    fn predict_label(&self, chip: &MagnitudeImage) -> Result<usize, ClassifyError> {
        let p = self.predict(chip)?;
        validate_probabilities(&p)?;
        Ok(p.iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .map(|(i, _)| i)
            .unwrap_or(0))
    }
}

pub fn validate_probabilities(p: &[f64]) -> Result<(), ClassifyError> {
    if p.is_empty() {
        return Err(ClassifyError::InvalidProbabilities {
            reason: "empty vector".into(),
        });
    }
    if p.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(ClassifyError::InvalidProbabilities {
            reason: "negative or non-finite entry".into(),
        });
    }
    let sum: f64 = p.iter().sum();
    if (sum - 1.0).abs() > 1e-6 {
        return Err(ClassifyError::InvalidProbabilities {
            reason: format!("sum {sum} not within 1e-6 of 1"),
        });
    }
    Ok(())
}

/// Cross-entropy -ln p[label], with the probability floored at 1e-12.
pub fn cross_entropy(probabilities: &[f64], true_label: usize) -> Result<f64, ClassifyError> {
    validate_probabilities(probabilities)?;
    if true_label >= probabilities.len() {
        return Err(ClassifyError::UnknownClass {
            label: format!("index {true_label}"),
        });
    }
    Ok(-probabilities[true_label].max(1e-12).ln())
}

// ---------------------------------------------------------------------------
// Reference prototype classifier
// ---------------------------------------------------------------------------

/// Nearest-prototype reference model: per class and azimuth bin, the mean of
/// L2-normalized log-magnitude chips downsampled by block averaging. The
/// prediction is a softmax over the negative squared distance to each class's
/// nearest-bin prototype.
#[derive(Debug, Clone)]
pub struct ReferencePrototypeModel {
    labels: Vec<String>,
    bin_width_deg: f64,
    downsample: usize,
    log_floor: f64,
    temperature: f64,
    /// prototypes[class][bin] (absent bins merged into their neighbors by
    /// the nearest-bin minimum at inference).
    prototypes: Vec<Vec<Option<Vec<f64>>>>,
}

/// Per-chip preprocessing shared by training and inference: scale-invariant
/// block-max downsample of the magnitude, log scaling, L2 normalization.
/// Max pooling keeps point scatterers dominant in their block, the property
/// that makes bright localized returns matter to the decision.
fn preprocess(chip: &MagnitudeImage, downsample: usize, floor: f64) -> Vec<f64> {
    let max = chip.max();
    let rows = chip.rows / downsample;
    let cols = chip.cols / downsample;
    let mut out = vec![0.0; rows * cols];
    if max <= 0.0 {
        return out;
    }
    for r in 0..rows {
        for c in 0..cols {
            let mut peak = 0.0f64;
            for dr in 0..downsample {
                for dc in 0..downsample {
                    peak = peak.max(chip.at(r * downsample + dr, c * downsample + dc));
                }
            }
            out[r * cols + c] = (peak / max + floor).log10();
        }
    }
    let norm = out.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 0.0 {
        for v in &mut out {
            *v /= norm;
        }
    }
    out
}

fn distance_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

impl ReferencePrototypeModel {
    /// Train from labeled samples. An automatic softmax temperature is fitted
    /// to the mean margin between best and second-best class distances.
    pub fn train(
        samples: &[&SarSample],
        bin_width_deg: f64,
        downsample: usize,
    ) -> Result<Self, ClassifyError> {
        Self::train_with_floor(samples, bin_width_deg, downsample, 1e-3)
    }

    /// Train with an explicit log floor; smaller floors weight dim structure
    /// more, larger floors emphasize bright returns.
    pub fn train_with_floor(
        samples: &[&SarSample],
        bin_width_deg: f64,
        downsample: usize,
        log_floor: f64,
    ) -> Result<Self, ClassifyError> {
        assert!(bin_width_deg > 0.0 && 360.0 % bin_width_deg < 1e-9);
        let mut labels: Vec<String> = samples.iter().map(|s| s.class_label.clone()).collect();
        labels.sort();
        labels.dedup();
        if labels.is_empty() {
            return Err(ClassifyError::EmptyEvaluationSet);
        }
        let n_bins = (360.0 / bin_width_deg).round() as usize;
        let mut sums: Vec<Vec<Option<(Vec<f64>, usize)>>> = vec![vec![None; n_bins]; labels.len()];
        for s in samples {
            let class = labels.binary_search(&s.class_label).unwrap();
            let bin = ((s.azimuth_deg / bin_width_deg).floor() as usize).min(n_bins - 1);
            let features = preprocess(&s.chip, downsample, log_floor);
            match &mut sums[class][bin] {
                Some((acc, count)) => {
                    for (a, f) in acc.iter_mut().zip(&features) {
                        *a += f;
                    }
                    *count += 1;
                }
                slot => *slot = Some((features, 1)),
            }
        }
        let mut prototypes = Vec::with_capacity(labels.len());
        for (class, label) in labels.iter().enumerate() {
            if sums[class].iter().all(|b| b.is_none()) {
                return Err(ClassifyError::EmptyClass {
                    label: label.clone(),
                });
            }
            let protos: Vec<Option<Vec<f64>>> = sums[class]
                .iter()
                .map(|slot| {
                    slot.as_ref().map(|(acc, count)| {
                        let mut p: Vec<f64> =
                            acc.iter().map(|v| v / *count as f64).collect();
                        let norm = p.iter().map(|v| v * v).sum::<f64>().sqrt();
                        if norm > 0.0 {
                            for v in &mut p {
                                *v /= norm;
                            }
                        }
                        p
                    })
                })
                .collect();
            prototypes.push(protos);
        }
        let mut model = Self {
            labels,
            bin_width_deg,
            downsample,
            log_floor,
            temperature: 1.0,
            prototypes,
        };
        // Fit the temperature to the observed class-distance margins so the
        // softmax is neither saturated nor flat.
        let mut margins = Vec::new();
        for s in samples {
            let d = model.class_distances(&s.chip);
            let mut sorted = d.clone();
            sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
            if sorted.len() >= 2 {
                margins.push(sorted[1] - sorted[0]);
            }
        }
        if !margins.is_empty() {
            let mean = margins.iter().sum::<f64>() / margins.len() as f64;
            model.temperature = (mean / 2.0).max(1e-9);
        }
        Ok(model)
    }

    pub fn bin_width_deg(&self) -> f64 {
        self.bin_width_deg
    }

    /// Squared distance to the nearest-bin prototype of each class.
    fn class_distances(&self, chip: &MagnitudeImage) -> Vec<f64> {
        let x = preprocess(chip, self.downsample, self.log_floor);
        self.prototypes
            .iter()
            .map(|bins| {
                bins.iter()
                    .flatten()
                    .map(|p| distance_sq(&x, p))
                    .fold(f64::INFINITY, f64::min)
            })
            .collect()
    }
}

impl TargetModel for ReferencePrototypeModel {
    fn class_labels(&self) -> &[String] {
        &self.labels
    }

    fn predict(&self, chip: &MagnitudeImage) -> Result<Vec<f64>, ClassifyError> {
        let d = self.class_distances(chip);
        let scores: Vec<f64> = d.iter().map(|v| -v / self.temperature).collect();
        let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
        let sum: f64 = exps.iter().sum();
        Ok(exps.iter().map(|e| e / sum).collect())
    }
}

/// Plain accuracy of a model over labeled samples.
pub fn accuracy(model: &dyn TargetModel, samples: &[&SarSample]) -> Result<f64, ClassifyError> {
    if samples.is_empty() {
        return Err(ClassifyError::EmptyEvaluationSet);
    }
    let mut correct = 0usize;
    for s in samples {
        let predicted = model.predict_label(&s.chip)?;
        if model.class_labels()[predicted] == s.class_label {
            correct += 1;
        }
    }
    Ok(correct as f64 / samples.len() as f64)
}

// ---------------------------------------------------------------------------
// Fooling metrics
// ---------------------------------------------------------------------------

/// Fooling counts of one class: clean-correct denominators and flips.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FoolingCounts {
    pub clean_correct: usize,
    pub flipped: usize,
}

impl FoolingCounts {
    /// Rate with the denominator-zero convention: 0 when nothing was
    /// correctly classified to begin with.
    pub fn rate(&self) -> f64 {
        if self.clean_correct == 0 {
            0.0
        } else {
            self.flipped as f64 / self.clean_correct as f64
        }
    }
}

/// Per-class fooling rates plus their arithmetic mean.
#[derive(Debug, Clone)]
pub struct FoolingReport {
    pub per_class: BTreeMap<String, FoolingCounts>,
    pub average_rate: f64,
}

impl FoolingReport {
    pub fn from_counts(per_class: BTreeMap<String, FoolingCounts>) -> Self {
        let average_rate = if per_class.is_empty() {
            0.0
        } else {
            per_class.values().map(|c| c.rate()).sum::<f64>() / per_class.len() as f64
        };
        Self {
            per_class,
            average_rate,
        }
    }
}

/// Fooling rate of one class: among samples clean-classified as the class,
/// the fraction the adversarial rendering flips away from it.
pub fn fooling_rate<F>(
    model: &dyn TargetModel,
    mut adversarial: F,
    samples: &[&SarSample],
    class_label: &str,
) -> Result<FoolingCounts, ClassifyError>
where
    F: FnMut(&SarSample) -> Result<MagnitudeImage, ClassifyError>,
{
    let label_index = model
        .class_labels()
        .iter()
        .position(|l| l == class_label)
        .ok_or_else(|| ClassifyError::UnknownClass {
            label: class_label.to_string(),
        })?;
    let mut counts = FoolingCounts {
        clean_correct: 0,
        flipped: 0,
    };
    for s in samples.iter().filter(|s| s.class_label == class_label) {
        if model.predict_label(&s.chip)? != label_index {
            continue;
        }
        counts.clean_correct += 1;
        let adv = adversarial(s)?;
        if model.predict_label(&adv)? != label_index {
            counts.flipped += 1;
        }
    }
    Ok(counts)
}

/// Average fooling rates for all surrogate-target pairs. `adversarial_for`
/// renders the adversarial chip of a sample under the attack optimized on
/// the given surrogate; entry (s, t) averages class fooling rates of model t.
pub fn transfer_matrix<F>(
    surrogates_count: usize,
    targets: &[&dyn TargetModel],
    samples: &[&SarSample],
    mut adversarial_for: F,
) -> Result<Vec<Vec<f64>>, ClassifyError>
where
    F: FnMut(usize, &SarSample) -> Result<MagnitudeImage, ClassifyError>,
{
    let mut classes: Vec<String> = samples.iter().map(|s| s.class_label.clone()).collect();
    classes.sort();
    classes.dedup();
    let mut matrix = vec![vec![0.0; targets.len()]; surrogates_count];
    for (s_idx, row) in matrix.iter_mut().enumerate() {
        for (t_idx, target) in targets.iter().enumerate() {
            let mut per_class = BTreeMap::new();
            for class in &classes {
                let counts = fooling_rate(
                    *target,
                    |sample| adversarial_for(s_idx, sample),
                    samples,
                    class,
                )?;
                per_class.insert(class.clone(), counts);
            }
            row[t_idx] = FoolingReport::from_counts(per_class).average_rate;
        }
    }
    Ok(matrix)
}

/// Partial-knowledge evaluation: restrict to samples within the angular
/// bounds |phi - phi_hat| <= Delta and |theta - theta_hat| <= Delta (azimuth
/// circular), then compute the fooling rate.
pub fn partial_knowledge_evaluate<F>(
    attack: &crate::attack::KnownAspectAttack,
    model: &dyn TargetModel,
    samples: &[&SarSample],
    class_label: &str,
    adversarial: F,
) -> Result<FoolingCounts, ClassifyError>
where
    F: FnMut(&SarSample) -> Result<MagnitudeImage, ClassifyError>,
{
    let delta_deg = attack.uncertainty.to_degrees();
    let phi_hat = attack.estimated_azimuth.to_degrees();
    let theta_hat = attack.estimated_incidence.to_degrees();
    let subset: Vec<&SarSample> = samples
        .iter()
        .filter(|s| {
            let dphi = (s.azimuth_deg - phi_hat).rem_euclid(360.0);
            let dphi = dphi.min(360.0 - dphi);
            s.class_label == class_label
                && dphi <= delta_deg + 1e-9
                && (s.incidence_deg - theta_hat).abs() <= delta_deg + 1e-9
        })
        .copied()
        .collect();
    if subset.is_empty() {
        return Err(ClassifyError::EmptyEvaluationSet);
    }
    fooling_rate(model, adversarial, &subset, class_label)
}

// ---------------------------------------------------------------------------
// Subprocess model adapter
// ---------------------------------------------------------------------------

/// External classifier spoken to over a subprocess: the chip goes to stdin in
/// the CIMG binary format (magnitude in the real part), the probability
/// vector comes back as a JSON array on stdout.
pub struct SubprocessModel {
    pub command: Vec<String>,
    pub labels: Vec<String>,
}

impl TargetModel for SubprocessModel {
    fn class_labels(&self) -> &[String] {
        &self.labels
    }

    fn predict(&self, chip: &MagnitudeImage) -> Result<Vec<f64>, ClassifyError> {
        let image = crate::imaging::ComplexImage {
            rows: chip.rows,
            cols: chip.cols,
            pixels: chip
                .data
                .iter()
                .map(|&m| num_complex::Complex64::new(m, 0.0))
                .collect(),
            ground_spacing: (0.3, 0.3),
        };
        let bytes = crate::imaging::write_cimg_bytes(&image);
        let mut child = Command::new(&self.command[0])
            .args(&self.command[1..])
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()
            .map_err(|e| ClassifyError::ModelFailure(e.to_string()))?;
        child
            .stdin
            .take()
            .expect("piped stdin")
            .write_all(&bytes)
            .map_err(|e| ClassifyError::ModelFailure(e.to_string()))?;
        let out = child
            .wait_with_output()
            .map_err(|e| ClassifyError::ModelFailure(e.to_string()))?;
        if !out.status.success() {
            return Err(ClassifyError::ModelFailure(format!(
                "exit status {}",
                out.status
            )));
        }
        let p: Vec<f64> = serde_json::from_slice(&out.stdout)
            .map_err(|e| ClassifyError::ModelFailure(format!("bad JSON: {e}")))?;
        validate_probabilities(&p)?;
        if p.len() != self.labels.len() {
            return Err(ClassifyError::InvalidProbabilities {
                reason: format!("expected {} classes, got {}", self.labels.len(), p.len()),
            });
        }
        Ok(p)
    }
}
