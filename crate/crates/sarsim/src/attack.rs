//! Reflector parameterization, the constrained attack vector, adversarial
//! image composition, and the aspect-invariant attack loss.
//!
//! The attack vector packs m reflectors as
//! [x_1..x_m, y_1..y_m, theta_1..theta_m, phi_1]; the remaining azimuths are
//! coupled to phi_1 with uniform spacing 2 pi / m, which guarantees at least
//! one reflector faces every azimuth quadrant when m >= 4.

use std::f64::consts::{FRAC_PI_2, TAU};

use thiserror::Error;

use crate::classify::{cross_entropy, ClassifyError, TargetModel};
use crate::geometry::AspectAngles;
use crate::imaging::{ComplexImage, ImagingError, MagnitudeImage};

#[derive(Debug, Error)]
pub enum AttackError {
    #[error("constraint violations: {}", violations.join("; "))]
    ConstraintViolation { violations: Vec<String> },
    #[error("raster geometry mismatch: clean {clean_rows}x{clean_cols}, perturbation {pert_rows}x{pert_cols}")]
    GeometryMismatch {
        clean_rows: usize,
        clean_cols: usize,
        pert_rows: usize,
        pert_cols: usize,
    },
    #[error("observation set is empty")]
    EmptyObservations,
    #[error(transparent)]
    Classify(#[from] ClassifyError),
    #[error(transparent)]
    Imaging(#[from] ImagingError),
}

/// One trihedral reflector: ground position plus boresight orientation.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ReflectorConfig {
    pub x: f64,
    pub y: f64,
    /// Boresight incidence angle theta, radians in [0, pi/2].
    pub boresight_incidence: f64,
    /// Boresight azimuth angle phi, radians.
    pub boresight_azimuth: f64,
}

/// Scene footprint of one 128-pixel chip at 0.3 m spacing.
pub const DEFAULT_SCENE_WIDTH: f64 = 38.4;
pub const DEFAULT_SCENE_HEIGHT: f64 = 38.4;

/// The full attack vector with box constraints and the azimuth coupling.
#[derive(Debug, Clone, PartialEq)]
pub struct AttackParams {
    reflector_count: usize,
    theta: Vec<f64>,
    scene_width: f64,
    scene_height: f64,
}

impl AttackParams {
    /// Validate and wrap a packed vector of dimension 3m + 1.
    pub fn new(
        reflector_count: usize,
        theta: Vec<f64>,
        scene_width: f64,
        scene_height: f64,
    ) -> Result<Self, AttackError> {
        let m = reflector_count;
        let mut violations = Vec::new();
        if m < 4 {
            violations.push(format!("reflector count {m} < 4"));
        }
        if theta.len() != 3 * m + 1 {
            violations.push(format!(
                "theta dimension {} != 3m+1 = {}",
                theta.len(),
                3 * m + 1
            ));
            return Err(AttackError::ConstraintViolation { violations });
        }
        for i in 0..m {
            let x = theta[i];
            let y = theta[m + i];
            let t = theta[2 * m + i];
            if !(-scene_width / 2.0..=scene_width / 2.0).contains(&x) {
                violations.push(format!("x_{} = {x} outside [{:+}, {:+}]", i + 1, -scene_width / 2.0, scene_width / 2.0));
            }
            if !(-scene_height / 2.0..=scene_height / 2.0).contains(&y) {
                violations.push(format!("y_{} = {y} outside box", i + 1));
            }
            if !(0.0..=FRAC_PI_2).contains(&t) {
                violations.push(format!("theta_{} = {t} outside [0, pi/2]", i + 1));
            }
        }
        let phi1 = theta[3 * m];
        if m > 0 && !(0.0..=TAU / m as f64).contains(&phi1) {
            violations.push(format!("phi_1 = {phi1} outside [0, 2pi/m]"));
        }
        if violations.is_empty() {
            Ok(Self {
                reflector_count: m,
                theta,
                scene_width,
                scene_height,
            })
        } else {
            Err(AttackError::ConstraintViolation { violations })
        }
    }

    pub fn reflector_count(&self) -> usize {
        self.reflector_count
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn scene_size(&self) -> (f64, f64) {
        (self.scene_width, self.scene_height)
    }

    pub fn dimension(&self) -> usize {
        3 * self.reflector_count + 1
    }

    /// Expand into per-reflector configs; azimuths are spaced exactly
    /// 2 pi / m starting at phi_1.
    pub fn expand(&self) -> Vec<ReflectorConfig> {
        let m = self.reflector_count;
        (0..m)
            .map(|i| ReflectorConfig {
                x: self.theta[i],
                y: self.theta[m + i],
                boresight_incidence: self.theta[2 * m + i],
                boresight_azimuth: self.theta[3 * m] + i as f64 * TAU / m as f64,
            })
            .collect()
    }

    /// Re-pack reflector configs into the canonical vector layout. The
    /// azimuth of every reflector but the first is discarded (it is implied).
    pub fn pack(
        reflectors: &[ReflectorConfig],
        scene_width: f64,
        scene_height: f64,
    ) -> Result<Self, AttackError> {
        let m = reflectors.len();
        let mut theta = Vec::with_capacity(3 * m + 1);
        theta.extend(reflectors.iter().map(|r| r.x));
        theta.extend(reflectors.iter().map(|r| r.y));
        theta.extend(reflectors.iter().map(|r| r.boresight_incidence));
        theta.push(reflectors.first().map(|r| r.boresight_azimuth).unwrap_or(0.0));
        Self::new(m, theta, scene_width, scene_height)
    }
}

/// One labeled observation: the clean magnitude chip and its aspect angles.
/// `box_center_offset` shifts reflector positions so the perturbation keeps a
/// fixed pose relative to the target's bounding box (meters, scene frame).
#[derive(Debug, Clone)]
pub struct Observation {
    pub aspect: AspectAngles,
    pub clean: MagnitudeImage,
    pub class_label: String,
    pub box_center_offset: (f64, f64),
}

/// Nonempty set of observations sharing one raster geometry.
#[derive(Debug, Clone)]
pub struct ObservationSet {
    observations: Vec<Observation>,
}

impl ObservationSet {
    pub fn new(observations: Vec<Observation>) -> Result<Self, AttackError> {
        if observations.is_empty() {
            return Err(AttackError::EmptyObservations);
        }
        let (r, c) = (observations[0].clean.rows, observations[0].clean.cols);
        for o in &observations {
            if o.clean.rows != r || o.clean.cols != c {
                return Err(AttackError::GeometryMismatch {
                    clean_rows: r,
                    clean_cols: c,
                    pert_rows: o.clean.rows,
                    pert_cols: o.clean.cols,
                });
            }
        }
        Ok(Self { observations })
    }

    pub fn iter(&self) -> impl Iterator<Item = &Observation> {
        self.observations.iter()
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }
}

/// Renders the perturbation image of a reflector set for one observation.
/// Implemented by the cached-PSF fast renderer and by the full chain.
pub trait PerturbationRenderer {
    fn render(
        &self,
        reflectors: &[ReflectorConfig],
        aspect: AspectAngles,
    ) -> Result<ComplexImage, ImagingError>;
}

impl PerturbationRenderer for crate::imaging::FastRenderer {
    fn render(
        &self,
        reflectors: &[ReflectorConfig],
        aspect: AspectAngles,
    ) -> Result<ComplexImage, ImagingError> {
        Ok(self.render_reflectors(aspect.azimuth(), reflectors))
    }
}

/// Full-chain renderer: every echo synthesized, summed, demodulated, focused.
pub struct FullChainRenderer {
    pub spec: crate::imaging::SarSystemSpec,
}

impl PerturbationRenderer for FullChainRenderer {
    fn render(
        &self,
        reflectors: &[ReflectorConfig],
        aspect: AspectAngles,
    ) -> Result<ComplexImage, ImagingError> {
        crate::imaging::image_perturbation(reflectors, aspect, &self.spec)
    }
}

/// Adversarial chip: clean magnitude plus perturbation magnitude, pixelwise.
/// Clean MSTAR chips carry no phase, so superposition acts on magnitudes; no
/// clipping is applied (classifier preprocessing normalizes per chip).
pub fn compose_adversarial(
    clean: &MagnitudeImage,
    perturbation: &ComplexImage,
) -> Result<MagnitudeImage, AttackError> {
    if clean.rows != perturbation.rows || clean.cols != perturbation.cols {
        return Err(AttackError::GeometryMismatch {
            clean_rows: clean.rows,
            clean_cols: clean.cols,
            pert_rows: perturbation.rows,
            pert_cols: perturbation.cols,
        });
    }
    let data = clean
        .data
        .iter()
        .zip(&perturbation.pixels)
        .map(|(c, p)| c + p.norm())
        .collect();
    Ok(MagnitudeImage {
        rows: clean.rows,
        cols: clean.cols,
        data,
    })
}

fn shifted(reflectors: &[ReflectorConfig], offset: (f64, f64)) -> Vec<ReflectorConfig> {
    reflectors
        .iter()
        .map(|r| ReflectorConfig {
            x: r.x + offset.0,
            y: r.y + offset.1,
            ..*r
        })
        .collect()
}

/// The minimized objective: -(1/N) sum_n CE(f(clean_n + perturbation_n), l_c).
/// Lower is better for the attacker (maximizes cross-entropy).
pub fn attack_loss(
    params: &AttackParams,
    observations: &ObservationSet,
    model: &dyn TargetModel,
    class_label: &str,
    renderer: &dyn PerturbationRenderer,
) -> Result<f64, AttackError> {
    let reflectors = params.expand();
    let label_index = model
        .class_labels()
        .iter()
        .position(|l| l == class_label)
        .ok_or_else(|| ClassifyError::UnknownClass {
            label: class_label.to_string(),
        })?;
    let mut total = 0.0;
    for obs in observations.iter() {
        let placed = shifted(&reflectors, obs.box_center_offset);
        let perturbation = renderer.render(&placed, obs.aspect)?;
        let adversarial = compose_adversarial(&obs.clean, &perturbation)?;
        let probabilities = model.predict(&adversarial)?;
        total += cross_entropy(&probabilities, label_index)?;
    }
    Ok(-total / observations.len() as f64)
}

/// Partial-knowledge variant: the attacker estimates the aspect angles with
/// uncertainty Delta and deploys a single reflector whose boresight is fixed
/// at the estimate; only its position is optimized.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KnownAspectAttack {
    pub estimated_azimuth: f64,
    pub estimated_incidence: f64,
    /// Uncertainty Delta, radians in [0, pi/2].
    pub uncertainty: f64,
}

impl KnownAspectAttack {
    pub fn reflector(&self, x: f64, y: f64) -> ReflectorConfig {
        ReflectorConfig {
            x,
            y,
            boresight_incidence: self.estimated_incidence,
            boresight_azimuth: self.estimated_azimuth,
        }
    }
}

/// Single-observation cross-entropy loss of the one-reflector attack.
pub fn known_aspect_loss(
    attack: &KnownAspectAttack,
    position: (f64, f64),
    observation: &Observation,
    model: &dyn TargetModel,
    class_label: &str,
    renderer: &dyn PerturbationRenderer,
) -> Result<f64, AttackError> {
    let label_index = model
        .class_labels()
        .iter()
        .position(|l| l == class_label)
        .ok_or_else(|| ClassifyError::UnknownClass {
            label: class_label.to_string(),
        })?;
    let reflector = attack.reflector(
        position.0 + observation.box_center_offset.0,
        position.1 + observation.box_center_offset.1,
    );
    let perturbation = renderer.render(&[reflector], observation.aspect)?;
    let adversarial = compose_adversarial(&observation.clean, &perturbation)?;
    let probabilities = model.predict(&adversarial)?;
    Ok(-cross_entropy(&probabilities, label_index)?)
}

// ---------------------------------------------------------------------------
// Parameter file format
// ---------------------------------------------------------------------------

/// Serialize to the human-readable text format: one reflector per line,
/// `index x y theta_deg phi_deg`, preceded by a scene-size line.
pub fn params_to_text(params: &AttackParams) -> String {
    let mut out = String::new();
    let (w, h) = params.scene_size();
    out.push_str(&format!("scene {w} {h}\n"));
    for (i, r) in params.expand().iter().enumerate() {
        out.push_str(&format!(
            "{} x={} y={} theta_deg={} phi_deg={}\n",
            i + 1,
            r.x,
            r.y,
            r.boresight_incidence.to_degrees(),
            r.boresight_azimuth.to_degrees()
        ));
    }
    out
}

/// Parse the text format back into validated params.
pub fn params_from_text(text: &str) -> Result<AttackParams, AttackError> {
    let mut scene = (DEFAULT_SCENE_WIDTH, DEFAULT_SCENE_HEIGHT);
    let mut reflectors: Vec<(usize, ReflectorConfig)> = Vec::new();
    let invalid = |line: &str, why: &str| AttackError::ConstraintViolation {
        violations: vec![format!("line {line:?}: {why}")],
    };
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut fields = line.split_whitespace();
        let head = fields.next().unwrap();
        if head == "scene" {
            let w = fields
                .next()
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| invalid(line, "bad scene width"))?;
            let h = fields
                .next()
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| invalid(line, "bad scene height"))?;
            scene = (w, h);
            continue;
        }
        let index: usize = head.parse().map_err(|_| invalid(line, "bad index"))?;
        let mut x = None;
        let mut y = None;
        let mut theta_deg = None;
        let mut phi_deg = None;
        for field in fields {
            let (key, value) = field
                .split_once('=')
                .ok_or_else(|| invalid(line, "expected key=value"))?;
            let value: f64 = value.parse().map_err(|_| invalid(line, "bad number"))?;
            match key {
                "x" => x = Some(value),
                "y" => y = Some(value),
                "theta_deg" => theta_deg = Some(value),
                "phi_deg" => phi_deg = Some(value),
                other => return Err(invalid(line, &format!("unknown key {other}"))),
            }
        }
        let (Some(x), Some(y), Some(t), Some(p)) = (x, y, theta_deg, phi_deg) else {
            return Err(invalid(line, "missing field"));
        };
        reflectors.push((
            index,
            ReflectorConfig {
                x,
                y,
                boresight_incidence: t.to_radians(),
                boresight_azimuth: p.to_radians(),
            },
        ));
    }
    reflectors.sort_by_key(|(i, _)| *i);
    let configs: Vec<ReflectorConfig> = reflectors.into_iter().map(|(_, r)| r).collect();
    AttackParams::pack(&configs, scene.0, scene.1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::wrap_angle;
    use approx::assert_relative_eq;
    use num_complex::Complex64;
    use std::f64::consts::FRAC_PI_2;

    fn params4(phi1_deg: f64) -> AttackParams {
        AttackParams::new(
            4,
            vec![
                0.31, -1.62, -1.55, -0.73, // x
                -2.91, -1.80, 3.18, -2.50, // y
                66.3f64.to_radians(),
                65.0f64.to_radians(),
                69.2f64.to_radians(),
                75.0f64.to_radians(),
                phi1_deg.to_radians(),
            ],
            DEFAULT_SCENE_WIDTH,
            DEFAULT_SCENE_HEIGHT,
        )
        .unwrap()
    }

    #[test]
    fn expand_spaces_azimuths_uniformly() {
        // The study's example configuration: phi_1 = 16.3 deg expands to
        // {16.3, 106.3, 196.3, 286.3} degrees.
        let p = params4(16.3);
        let azimuths: Vec<f64> = p
            .expand()
            .iter()
            .map(|r| r.boresight_azimuth.to_degrees())
            .collect();
        for (got, want) in azimuths.iter().zip([16.3, 106.3, 196.3, 286.3]) {
            assert_relative_eq!(*got, want, epsilon = 1e-9);
        }

        let p0 = params4(0.0);
        let az0: Vec<f64> = p0
            .expand()
            .iter()
            .map(|r| r.boresight_azimuth.to_degrees())
            .collect();
        assert_eq!(az0, vec![0.0, 90.0, 180.0, 270.0]);

        // m = 8 spaces by 45 degrees.
        let mut theta = vec![0.0; 25];
        theta[24] = 10f64.to_radians();
        let p8 = AttackParams::new(8, theta, 38.4, 38.4).unwrap();
        let az8: Vec<f64> = p8
            .expand()
            .iter()
            .map(|r| r.boresight_azimuth.to_degrees())
            .collect();
        for (i, a) in az8.iter().enumerate() {
            assert_relative_eq!(*a, 10.0 + 45.0 * i as f64, epsilon = 1e-9);
        }
    }

    #[test]
    fn round_trip_pack_expand() {
        let p = params4(16.3);
        let packed = AttackParams::pack(&p.expand(), 38.4, 38.4).unwrap();
        assert_eq!(packed.theta(), p.theta());
        // Azimuth pair differences are exact multiples of 2 pi / m.
        let refl = p.expand();
        for i in 0..4 {
            for j in 0..4 {
                let d = wrap_angle(refl[i].boresight_azimuth - refl[j].boresight_azimuth);
                let steps = d / (TAU / 4.0);
                assert!((steps - steps.round()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn constraint_violations_are_listed() {
        let err = AttackParams::new(
            4,
            vec![
                100.0, 0.0, 0.0, 0.0, // x_1 out of box
                0.0, 0.0, 0.0, 0.0,
                -0.1, 0.0, 0.0, 0.0, // theta_1 negative
                7.0, // phi_1 > 2 pi / 4
            ],
            38.4,
            38.4,
        )
        .unwrap_err();
        let AttackError::ConstraintViolation { violations } = err else {
            panic!("wrong error type");
        };
        assert_eq!(violations.len(), 3);
    }

    #[test]
    fn azimuthal_coverage_for_m4() {
        // For any aspect azimuth, at least one of four reflectors sees it
        // inside the phi' strong-return window [0, pi/2].
        let p = params4(16.3);
        let reflectors = p.expand();
        for i in 0..720 {
            let phi_a = i as f64 * TAU / 720.0;
            let visible = reflectors.iter().any(|r| {
                let phi_prime = wrap_angle(
                    phi_a - (r.boresight_azimuth - std::f64::consts::FRAC_PI_4),
                );
                phi_prime <= FRAC_PI_2
            });
            assert!(visible, "no reflector visible at azimuth {phi_a}");
        }
    }

    #[test]
    fn compose_examples() {
        let clean = MagnitudeImage {
            rows: 2,
            cols: 2,
            data: vec![1.0, 2.0, 3.0, 4.0],
        };
        let zero = ComplexImage::zeros(2, 2, (0.3, 0.3));
        let same = compose_adversarial(&clean, &zero).unwrap();
        assert_eq!(same.data, clean.data);

        let mut pert = ComplexImage::zeros(2, 2, (0.3, 0.3));
        pert.pixels[1] = Complex64::new(3.0, 4.0);
        let blank = MagnitudeImage::zeros(2, 2);
        let only = compose_adversarial(&blank, &pert).unwrap();
        assert_eq!(only.data, vec![0.0, 5.0, 0.0, 0.0]);

        let bad = ComplexImage::zeros(3, 2, (0.3, 0.3));
        assert!(matches!(
            compose_adversarial(&clean, &bad),
            Err(AttackError::GeometryMismatch { .. })
        ));
    }

    #[test]
    fn params_text_round_trip() {
        let p = params4(16.3);
        let text = params_to_text(&p);
        let back = params_from_text(&text).unwrap();
        assert_eq!(back.reflector_count(), 4);
        for (a, b) in back.theta().iter().zip(p.theta()) {
            assert_relative_eq!(*a, *b, epsilon = 1e-12);
        }
        assert!(params_from_text("1 x=banana").is_err());
        assert!(params_from_text("").is_err()); // zero reflectors: m < 4
    }

    struct UniformModel {
        labels: Vec<String>,
    }

    impl TargetModel for UniformModel {
        fn class_labels(&self) -> &[String] {
            &self.labels
        }
        fn predict(&self, _chip: &MagnitudeImage) -> Result<Vec<f64>, ClassifyError> {
            Ok(vec![0.1; 10])
        }
    }

    struct ZeroRenderer;

    impl PerturbationRenderer for ZeroRenderer {
        fn render(
            &self,
            _reflectors: &[ReflectorConfig],
            _aspect: AspectAngles,
        ) -> Result<ComplexImage, ImagingError> {
            Ok(ComplexImage::zeros(2, 2, (0.3, 0.3)))
        }
    }

    #[test]
    fn uniform_model_gives_minus_ln10() {
        let model = UniformModel {
            labels: (0..10).map(|i| format!("c{i}")).collect(),
        };
        let obs = ObservationSet::new(vec![
            Observation {
                aspect: AspectAngles::from_degrees(75.0, 10.0).unwrap(),
                clean: MagnitudeImage::zeros(2, 2),
                class_label: "c3".into(),
                box_center_offset: (0.0, 0.0),
            };
            3
        ])
        .unwrap();
        let p = params4(0.0);
        let loss = attack_loss(&p, &obs, &model, "c3", &ZeroRenderer).unwrap();
        assert_relative_eq!(loss, -(10f64.ln()), max_relative = 1e-12);

        // Permutation invariance over the observation order is immediate for
        // an average, but assert it anyway with distinct chips.
        let mut o1 = obs.observations.clone();
        o1.reverse();
        let loss_rev = attack_loss(
            &p,
            &ObservationSet::new(o1).unwrap(),
            &model,
            "c3",
            &ZeroRenderer,
        )
        .unwrap();
        assert_eq!(loss, loss_rev);
    }
}
