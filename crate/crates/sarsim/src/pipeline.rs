//! End-to-end experiment plumbing shared by the CLI and the acceptance
//! suite: synthetic dataset preparation with transmit calibration,
//! train/test azimuth splits, attack optimization drivers, and fooling
//! evaluation helpers.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::attack::{
    attack_loss, compose_adversarial, AttackError, AttackParams, KnownAspectAttack, Observation,
    ObservationSet, PerturbationRenderer,
};
use crate::classify::{
    fooling_rate, ClassifyError, FoolingCounts, FoolingReport, ReferencePrototypeModel,
    TargetModel,
};
use crate::data::{
    build_synthetic_dataset, sample_subset, DataError, DatasetIndex, SarSample,
    SyntheticDatasetConfig,
};
use crate::geometry::AspectAngles;
use crate::imaging::{
    calibrate_tx_amplitude_with, FastRenderer, ImagingError, SarSystemSpec,
};
use crate::optimize::{
    minimize_de, minimize_pso, DEConfig, OptimizeError, OptimizeTrace, PSOConfig, ParamLayout,
};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Imaging(#[from] ImagingError),
    #[error(transparent)]
    Attack(#[from] AttackError),
    #[error(transparent)]
    Classify(#[from] ClassifyError),
    #[error(transparent)]
    Optimize(#[from] OptimizeError),
    #[error("{0}")]
    Invalid(String),
}

/// A synthetic dataset with a calibrated renderer for the same geometry.
pub struct PreparedExperiment {
    pub dataset: DatasetIndex,
    pub renderer: FastRenderer,
    pub tx_amplitude: f64,
}

/// Build the synthetic dataset and calibrate the transmit amplitude so a
/// boresight trihedral at scene center peaks at the mean per-class maximum
/// pixel intensity.
pub fn prepare_synthetic_experiment(
    config: SyntheticDatasetConfig,
    standoff_range: f64,
) -> Result<PreparedExperiment, PipelineError> {
    let spec = SarSystemSpec::mstar_table(standoff_range);
    spec.validate()?;
    let renderer = FastRenderer::new(spec, config.incidence_deg.to_radians())?;
    let dataset = build_synthetic_dataset(&renderer, config);
    let target = mean_class_peak(&dataset);
    let tx = calibrate_tx_amplitude_with(&renderer, target);
    Ok(PreparedExperiment {
        dataset,
        renderer: renderer.with_tx_amplitude(tx),
        tx_amplitude: tx,
    })
}

/// Mean over classes of the class's maximum pixel intensity.
pub fn mean_class_peak(dataset: &DatasetIndex) -> f64 {
    let mut per_class: BTreeMap<&str, f64> = BTreeMap::new();
    for s in dataset.samples() {
        let entry = per_class.entry(s.class_label.as_str()).or_insert(0.0);
        *entry = entry.max(s.chip.max());
    }
    let n = per_class.len().max(1) as f64;
    per_class.values().sum::<f64>() / n
}

/// Azimuth train/test split: the training subset is drawn first, the test
/// subset from the remainder.
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

pub fn train_test_split(
    dataset: &DatasetIndex,
    class: &str,
    train_spacing_deg: f64,
    train_tolerance_deg: f64,
    test_spacing_deg: f64,
    test_tolerance_deg: f64,
    seed: u64,
) -> Result<Split, PipelineError> {
    let train = sample_subset(dataset, class, train_spacing_deg, train_tolerance_deg, seed)?
        .selected;
    let taken: std::collections::BTreeSet<usize> = train.iter().cloned().collect();
    let remainder: Vec<SarSample> = dataset
        .samples()
        .iter()
        .enumerate()
        .filter(|(i, s)| !taken.contains(i) && s.class_label == class)
        .map(|(_, s)| s.clone())
        .collect();
    let rem_index = DatasetIndex::from_samples(remainder);
    let test_report = sample_subset(
        &rem_index,
        class,
        test_spacing_deg,
        test_tolerance_deg,
        seed.wrapping_add(1),
    )?;
    // Map remainder indices back to the parent dataset by source id.
    let mut by_source: BTreeMap<&str, usize> = BTreeMap::new();
    for (i, s) in dataset.samples().iter().enumerate() {
        by_source.insert(s.source_id.as_str(), i);
    }
    let test = test_report
        .selected
        .iter()
        .map(|&i| by_source[rem_index.samples()[i].source_id.as_str()])
        .collect();
    Ok(Split { train, test })
}

/// Observation set over dataset samples (box offsets default to zero).
pub fn observations_from(
    dataset: &DatasetIndex,
    indices: &[usize],
) -> Result<ObservationSet, PipelineError> {
    let observations = indices
        .iter()
        .map(|&i| {
            let s = &dataset.samples()[i];
            Ok(Observation {
                aspect: AspectAngles::from_degrees(s.incidence_deg, s.azimuth_deg)
                    .map_err(|e| PipelineError::Invalid(e.to_string()))?,
                clean: s.chip.clone(),
                class_label: s.class_label.clone(),
                box_center_offset: (0.0, 0.0),
            })
        })
        .collect::<Result<Vec<_>, PipelineError>>()?;
    Ok(ObservationSet::new(observations)?)
}

/// Which optimizer drives the attack.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OptimizerChoice {
    De(DEConfig),
    Pso(PSOConfig),
}

/// Optimize the attack vector against one class: minimizes the negated mean
/// cross-entropy over the training observations.
pub fn optimize_attack(
    observations: &ObservationSet,
    model: &dyn TargetModel,
    class_label: &str,
    renderer: &FastRenderer,
    layout: ParamLayout,
    optimizer: OptimizerChoice,
) -> Result<(AttackParams, OptimizeTrace), PipelineError> {
    let bounds = layout.bounds();
    let mut objective = |x: &[f64]| -> Result<f64, String> {
        let params = layout.to_attack_params(x);
        attack_loss(&params, observations, model, class_label, renderer)
            .map_err(|e| e.to_string())
    };
    let trace = match optimizer {
        OptimizerChoice::De(config) => minimize_de(&mut objective, &bounds, &config)?,
        OptimizerChoice::Pso(config) => minimize_pso(&mut objective, &bounds, &config)?,
    };
    let params = layout.to_attack_params(&trace.best_params);
    Ok((params, trace))
}

/// Adversarial chip of one sample under a reflector attack.
pub fn adversarial_chip(
    params: &AttackParams,
    sample: &SarSample,
    renderer: &FastRenderer,
) -> Result<crate::imaging::MagnitudeImage, ClassifyError> {
    let aspect = AspectAngles::from_degrees(sample.incidence_deg, sample.azimuth_deg)
        .map_err(|e| ClassifyError::Render(e.to_string()))?;
    let perturbation = renderer
        .render(&params.expand(), aspect)
        .map_err(|e| ClassifyError::Render(e.to_string()))?;
    compose_adversarial(&sample.chip, &perturbation).map_err(|e| ClassifyError::Render(e.to_string()))
}

/// Per-class fooling report of one attack per class over the given samples.
pub fn fooling_report(
    attacks: &BTreeMap<String, AttackParams>,
    model: &dyn TargetModel,
    renderer: &FastRenderer,
    samples: &[&SarSample],
) -> Result<FoolingReport, PipelineError> {
    let mut per_class: BTreeMap<String, FoolingCounts> = BTreeMap::new();
    for (class, params) in attacks {
        let counts = fooling_rate(
            model,
            |s| adversarial_chip(params, s, renderer),
            samples,
            class,
        )?;
        per_class.insert(class.clone(), counts);
    }
    Ok(FoolingReport::from_counts(per_class))
}

/// Optimize the known-aspect single-reflector attack: orientation fixed at
/// the estimate, only the position searched, trained on one observation.
pub fn optimize_known_aspect(
    attack: &KnownAspectAttack,
    observation: &Observation,
    model: &dyn TargetModel,
    class_label: &str,
    renderer: &FastRenderer,
    de: &DEConfig,
    scene: (f64, f64),
) -> Result<((f64, f64), OptimizeTrace), PipelineError> {
    let bounds = crate::optimize::Bounds::new(
        vec![-scene.0 / 2.0, -scene.1 / 2.0],
        vec![scene.0 / 2.0, scene.1 / 2.0],
    )?;
    let mut objective = |x: &[f64]| -> Result<f64, String> {
        crate::attack::known_aspect_loss(
            attack,
            (x[0], x[1]),
            observation,
            model,
            class_label,
            renderer,
        )
        .map_err(|e| e.to_string())
    };
    let trace = minimize_de(&mut objective, &bounds, de)?;
    let position = (trace.best_params[0], trace.best_params[1]);
    Ok((position, trace))
}

/// Train the reference classifier on every even-degree azimuth sample and
/// report held-out accuracy on the odd degrees.
pub fn train_reference_on(
    dataset: &DatasetIndex,
    bin_width_deg: f64,
    downsample: usize,
) -> Result<(ReferencePrototypeModel, f64), PipelineError> {
    train_reference_with_floor(dataset, bin_width_deg, downsample, 1e-3)
}

pub fn train_reference_with_floor(
    dataset: &DatasetIndex,
    bin_width_deg: f64,
    downsample: usize,
    log_floor: f64,
) -> Result<(ReferencePrototypeModel, f64), PipelineError> {
    let (train, held): (Vec<&SarSample>, Vec<&SarSample>) = dataset
        .samples()
        .iter()
        .partition(|s| (s.azimuth_deg.round() as i64) % 2 == 0);
    let model =
        ReferencePrototypeModel::train_with_floor(&train, bin_width_deg, downsample, log_floor)?;
    let acc = crate::classify::accuracy(&model, &held)?;
    Ok((model, acc))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_is_disjoint_and_class_pure() {
        let spec = SarSystemSpec::mstar_table(5000.0);
        let renderer = FastRenderer::new(spec, 75f64.to_radians()).unwrap();
        let dataset = build_synthetic_dataset(
            &renderer,
            SyntheticDatasetConfig {
                azimuth_step_deg: 5.0,
                ..Default::default()
            },
        );
        let class = dataset.classes()[0].clone();
        let split = train_test_split(&dataset, &class, 30.0, 4.0, 10.0, 4.0, 3).unwrap();
        assert!(!split.train.is_empty());
        assert!(!split.test.is_empty());
        for &i in &split.train {
            assert_eq!(dataset.samples()[i].class_label, class);
            assert!(!split.test.contains(&i), "index {i} in both splits");
        }
    }
}
