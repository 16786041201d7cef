//! Point-spread-function table and the fast scene renderer built on it, plus
//! the transmit-amplitude calibration.
//!
//! The focusing chain is linear, so a focused chip is a superposition of
//! impulse responses. Two position dependences keep a single response from
//! sufficing at the study's parameters: the compressed-pulse shape varies
//! with the sub-gate fraction of the round-trip delay (the chirp bandwidth
//! exceeds the sample rate, so alias cross-terms rotate with delay), and the
//! azimuth response varies slowly with along-track offset (hyperbolic phase
//! truncation). The table therefore stores range profiles binned by sub-gate
//! fraction and azimuth profiles at a few along-track offsets, interpolating
//! between them. Fidelity against the full chain is pinned by tests.

use num_complex::Complex64;

use super::rda::focus_to_slant;
use super::{
    closest_slant_range_incidence, radar_frame_coords, reflector_amplitude, synthesize_point_echo,
    ComplexImage, ImagingError, PointEcho, SarSystemSpec, CHIP_SIZE, DEFAULT_PLATE_SIDE,
};
use crate::attack::ReflectorConfig;
use crate::geometry::{boresight_incidence, AspectAngles};
use crate::scattering::LIGHT_SPEED;

const N_FRAC: usize = 8;
const OS_RANGE: usize = 32;
const OS_AZ: usize = 16;
const HALF_PX: usize = 64;

/// Impulse-response table sampled on fine subpixel grids.
#[derive(Debug, Clone)]
pub struct PsfTable {
    /// Range profiles indexed by sub-gate fraction bin; each normalized to
    /// its own on-peak value.
    range_profiles: Vec<Vec<Complex64>>,
    /// Sub-gate fraction of each range profile's reference target.
    range_fracs: Vec<f64>,
    /// Complex gain of each range profile's reference target, with the
    /// carrier of its range offset removed.
    range_gains: Vec<Complex64>,
    /// Azimuth profiles at the along-track offsets in `az_offsets`.
    az_profiles: Vec<Vec<Complex64>>,
    az_offsets: Vec<f64>,
    /// Gain ratio of each azimuth reference target relative to center.
    az_gain_ratio: Vec<f64>,
    /// Focused complex value at the peak for a unit-amplitude scatterer at
    /// scene center.
    pub chain_gain: Complex64,
    incidence: f64,
}

impl PsfTable {
    /// Build from full-chain impulse responses: one per sub-gate fraction bin
    /// stepped in ground range, plus off-center azimuth references.
    pub fn build(spec: &SarSystemSpec, incidence: f64) -> Result<Self, ImagingError> {
        let aspect = AspectAngles::new(incidence, 0.0)
            .map_err(|e| ImagingError::InvalidSpec(e.to_string()))?;
        let (gsd_r, gsd_a) = spec.ground_sample_distance;
        let render = |x: f64, y: f64| -> Result<super::rda::FocusedSlant, ImagingError> {
            let echo = synthesize_point_echo(
                PointEcho {
                    x,
                    y,
                    amplitude: Complex64::new(1.0, 0.0),
                },
                aspect,
                spec,
                spec.aperture_pulses(),
            )?;
            Ok(focus_to_slant(&echo, spec))
        };

        // Ground step that advances the round-trip delay by 1/N_FRAC gates.
        let gate_ground_step = LIGHT_SPEED / (2.0 * spec.sample_rate)
            / incidence.sin().max(1e-6)
            / N_FRAC as f64;
        let frac_of = |u: f64| -> f64 {
            let r = closest_slant_range_incidence(spec, incidence, u);
            (2.0 * r / LIGHT_SPEED * spec.sample_rate).fract()
        };

        let mut range_profiles = Vec::with_capacity(N_FRAC);
        let mut range_fracs = Vec::with_capacity(N_FRAC);
        let mut range_gains = Vec::with_capacity(N_FRAC);
        let mut chain_gain = Complex64::new(0.0, 0.0);
        let n_r = 2 * HALF_PX * OS_RANGE + 1;
        let two_k = 2.0 * spec.phase_const();
        for k in 0..N_FRAC {
            let u_ref = k as f64 * gate_ground_step;
            let slant = render(u_ref, 0.0)?;
            let gain = slant.sample_ground(spec, u_ref, 0.0);
            if gain.norm() == 0.0 {
                return Err(ImagingError::InvalidSpec(
                    "impulse response collapsed to zero".into(),
                ));
            }
            if k == 0 {
                chain_gain = gain;
            }
            let mut profile = Vec::with_capacity(n_r);
            for i in 0..n_r {
                let du = (i as f64 / OS_RANGE as f64 - HALF_PX as f64) * gsd_r;
                profile.push(slant.sample_ground(spec, u_ref + du, 0.0) / gain);
            }
            range_profiles.push(profile);
            range_fracs.push(frac_of(u_ref));
            let r_ref = closest_slant_range_incidence(spec, incidence, u_ref);
            let carrier =
                Complex64::from_polar(1.0, two_k * (r_ref - spec.standoff_range));
            range_gains.push(gain / carrier);
        }

        // Azimuth references stay well inside the sampled slow-time window.
        let aperture_half_m = 0.5 * spec.platform_speed * spec.aperture_pulses() as f64
            / spec.prf;
        let a_step = (40.0 * gsd_a).min(0.3 * aperture_half_m);
        let az_offsets = vec![-a_step, 0.0, a_step];
        let mut az_profiles = Vec::with_capacity(az_offsets.len());
        let mut az_gain_ratio = Vec::with_capacity(az_offsets.len());
        let n_a = 2 * HALF_PX * OS_AZ + 1;
        for &a_ref in &az_offsets {
            let slant = render(0.0, a_ref)?;
            let gain = slant.sample_ground(spec, 0.0, a_ref);
            if gain.norm() == 0.0 {
                return Err(ImagingError::InvalidSpec(
                    "azimuth reference outside the focused window".into(),
                ));
            }
            let mut profile = Vec::with_capacity(n_a);
            for i in 0..n_a {
                let da = (i as f64 / OS_AZ as f64 - HALF_PX as f64) * gsd_a;
                profile.push(slant.sample_ground(spec, 0.0, a_ref + da) / gain);
            }
            az_profiles.push(profile);
            az_gain_ratio.push(gain.norm() / chain_gain.norm());
        }

        Ok(Self {
            range_profiles,
            range_fracs,
            range_gains,
            az_profiles,
            az_offsets,
            az_gain_ratio,
            chain_gain,
            incidence,
        })
    }

    fn lookup(profile: &[Complex64], os: usize, delta_px: f64) -> Complex64 {
        let pos = (delta_px + HALF_PX as f64) * os as f64;
        if pos < 0.0 || pos >= (profile.len() - 1) as f64 {
            return Complex64::new(0.0, 0.0);
        }
        let i = pos.floor() as usize;
        let f = pos - i as f64;
        profile[i] * (1.0 - f) + profile[i + 1] * f
    }

    /// Blend weights of the two range profiles bracketing a sub-gate frac.
    fn frac_blend(&self, frac: f64) -> ((usize, f64), (usize, f64)) {
        let mut best = (0usize, f64::INFINITY);
        let mut second = (0usize, f64::INFINITY);
        for (k, &f) in self.range_fracs.iter().enumerate() {
            let d = (frac - f).rem_euclid(1.0);
            let d = d.min(1.0 - d);
            if d < best.1 {
                second = best;
                best = (k, d);
            } else if d < second.1 {
                second = (k, d);
            }
        }
        let total = best.1 + second.1;
        if total <= 1e-12 {
            ((best.0, 1.0), (second.0, 0.0))
        } else {
            ((best.0, second.1 / total), (second.0, best.1 / total))
        }
    }

    fn az_blend(&self, a: f64) -> ((usize, f64), (usize, f64)) {
        let n = self.az_offsets.len();
        if a <= self.az_offsets[0] {
            return ((0, 1.0), (0, 0.0));
        }
        if a >= self.az_offsets[n - 1] {
            return ((n - 1, 1.0), (n - 1, 0.0));
        }
        for i in 0..n - 1 {
            if a <= self.az_offsets[i + 1] {
                let span = self.az_offsets[i + 1] - self.az_offsets[i];
                let w = (a - self.az_offsets[i]) / span;
                return ((i, 1.0 - w), (i + 1, w));
            }
        }
        ((n - 1, 1.0), (n - 1, 0.0))
    }

    pub fn incidence(&self) -> f64 {
        self.incidence
    }
}

/// Ground point with a complex reflection amplitude, for the fast renderer.
#[derive(Debug, Clone, Copy)]
pub struct PointTarget {
    pub x: f64,
    pub y: f64,
    pub amplitude: Complex64,
}

/// Renders focused chips by placing the cached impulse responses at each
/// target position. One renderer is valid for one (spec, incidence) pair.
#[derive(Debug, Clone)]
pub struct FastRenderer {
    spec: SarSystemSpec,
    psf: PsfTable,
    scatter_lut: ScatterLut,
    /// Paint radius in pixels around each target's peak; sidelobes beyond it
    /// are below a percent of the peak.
    paint_radius_px: f64,
}

/// HH reflection magnitude of the standard trihedral tabulated over the
/// boresight-frame window on a one-degree grid (unit transmit amplitude at
/// the standoff range), bilinearly interpolated.
#[derive(Debug, Clone)]
struct ScatterLut {
    values: Vec<f64>,
    per_axis: usize,
    range_ref: f64,
}

impl ScatterLut {
    fn build(spec: &SarSystemSpec) -> Self {
        let geom = crate::geometry::TrihedralGeometry::new(DEFAULT_PLATE_SIDE)
            .expect("positive plate side");
        let per_axis = 91usize;
        let k = spec.phase_const();
        let mut values = Vec::with_capacity(per_axis * per_axis);
        for i in 0..per_axis {
            for j in 0..per_axis {
                let angles = crate::geometry::BoresightAngles {
                    incidence_prime: (i as f64).to_radians(),
                    azimuth_prime: (j as f64).to_radians(),
                };
                let s = crate::scattering::total_scatter(
                    angles,
                    &geom,
                    spec.standoff_range,
                    1.0,
                    k,
                );
                values.push(s.e_phi.norm());
            }
        }
        Self {
            values,
            per_axis,
            range_ref: spec.standoff_range,
        }
    }

    fn lookup(&self, incidence_prime: f64, azimuth_prime: f64) -> f64 {
        let phi = crate::geometry::wrap_angle(azimuth_prime).to_degrees();
        let theta = incidence_prime.to_degrees();
        let top = (self.per_axis - 1) as f64;
        if !(0.0..=top).contains(&theta) || phi > top {
            return 0.0;
        }
        let (i0, fi) = (theta.floor() as usize, theta.fract());
        let (j0, fj) = (phi.floor() as usize, phi.fract());
        let i1 = (i0 + 1).min(self.per_axis - 1);
        let j1 = (j0 + 1).min(self.per_axis - 1);
        let at = |i: usize, j: usize| self.values[i * self.per_axis + j];
        at(i0, j0) * (1.0 - fi) * (1.0 - fj)
            + at(i1, j0) * fi * (1.0 - fj)
            + at(i0, j1) * (1.0 - fi) * fj
            + at(i1, j1) * fi * fj
    }
}

impl FastRenderer {
    pub fn new(spec: SarSystemSpec, incidence: f64) -> Result<Self, ImagingError> {
        let psf = PsfTable::build(&spec, incidence)?;
        let scatter_lut = ScatterLut::build(&spec);
        Ok(Self {
            spec,
            psf,
            scatter_lut,
            paint_radius_px: 32.0,
        })
    }

    /// Interpolated HH reflection magnitude for one reflector at the
    /// aperture-center angles (tabulated scattering model).
    pub fn reflector_amplitude_fast(
        &self,
        reflector: &ReflectorConfig,
        aspect: AspectAngles,
    ) -> f64 {
        let angles = crate::geometry::to_boresight_frame(
            aspect,
            reflector.boresight_incidence,
            reflector.boresight_azimuth,
        );
        let base = self.scatter_lut.lookup(angles.incidence_prime, angles.azimuth_prime);
        if base == 0.0 {
            return 0.0;
        }
        let (u, _) = radar_frame_coords(aspect, reflector.x, reflector.y);
        let r = closest_slant_range_incidence(&self.spec, self.psf.incidence, u);
        base * self.spec.tx_amplitude * self.scatter_lut.range_ref / r
    }

    pub fn spec(&self) -> &SarSystemSpec {
        &self.spec
    }

    pub fn incidence(&self) -> f64 {
        self.psf.incidence
    }

    /// Focused complex gain of a unit-amplitude scatterer at scene center.
    pub fn chain_gain(&self) -> Complex64 {
        self.psf.chain_gain
    }

    /// Complex chip of a set of point targets at one observation azimuth.
    /// The incidence angle is the renderer's own.
    pub fn render_points(&self, azimuth: f64, targets: &[PointTarget]) -> ComplexImage {
        let aspect = AspectAngles::new(self.psf.incidence, azimuth).expect("valid incidence");
        let mut image =
            ComplexImage::zeros(CHIP_SIZE, CHIP_SIZE, self.spec.ground_sample_distance);
        let center = (CHIP_SIZE as f64 - 1.0) / 2.0;
        let (gsd_r, gsd_a) = self.spec.ground_sample_distance;
        let two_k = 2.0 * self.spec.phase_const();
        for t in targets {
            if t.amplitude.norm() == 0.0 {
                continue;
            }
            let (u, a) = radar_frame_coords(aspect, t.x, t.y);
            let row0 = center + u / gsd_r;
            let col0 = center + a / gsd_a;
            let r_min = closest_slant_range_incidence(&self.spec, self.psf.incidence, u);
            if (r_min - self.spec.standoff_range).abs() > self.spec.max_slant_offset() {
                continue;
            }
            let frac = (2.0 * r_min / LIGHT_SPEED * self.spec.sample_rate).fract();
            let ((k1, w1), (k2, w2)) = self.psf.frac_blend(frac);
            let ((a1, v1), (a2, v2)) = self.psf.az_blend(a);
            let carrier =
                Complex64::from_polar(1.0, two_k * (r_min - self.spec.standoff_range));
            let gain = self.psf.range_gains[k1] * w1 + self.psf.range_gains[k2] * w2;
            let az_gain =
                self.psf.az_gain_ratio[a1] * v1 + self.psf.az_gain_ratio[a2] * v2;
            let scale = t.amplitude * gain * carrier * az_gain;
            let half = (HALF_PX as f64).min(self.paint_radius_px);
            let row_lo = ((row0 - half).ceil().max(0.0)) as usize;
            let row_hi = ((row0 + half).floor().min((CHIP_SIZE - 1) as f64)) as usize;
            let col_lo = ((col0 - half).ceil().max(0.0)) as usize;
            let col_hi = ((col0 + half).floor().min((CHIP_SIZE - 1) as f64)) as usize;
            if row_lo > row_hi || col_lo > col_hi {
                continue;
            }
            let az_resp: Vec<Complex64> = (col_lo..=col_hi)
                .map(|c| {
                    let d = c as f64 - col0;
                    PsfTable::lookup(&self.psf.az_profiles[a1], OS_AZ, d) * v1
                        + PsfTable::lookup(&self.psf.az_profiles[a2], OS_AZ, d) * v2
                })
                .collect();
            for r in row_lo..=row_hi {
                let d = r as f64 - row0;
                let rr = (PsfTable::lookup(&self.psf.range_profiles[k1], OS_RANGE, d) * w1
                    + PsfTable::lookup(&self.psf.range_profiles[k2], OS_RANGE, d) * w2)
                    * scale;
                let row_px = &mut image.pixels[r * CHIP_SIZE..(r + 1) * CHIP_SIZE];
                for (c, az) in (col_lo..=col_hi).zip(&az_resp) {
                    row_px[c] += rr * az;
                }
            }
        }
        image
    }

    /// Perturbation chip of a reflector set: HH scattering amplitude per
    /// reflector at the aperture-center angles, then impulse placement.
    pub fn render_reflectors(
        &self,
        azimuth: f64,
        reflectors: &[ReflectorConfig],
    ) -> ComplexImage {
        let aspect = AspectAngles::new(self.psf.incidence, azimuth).expect("valid incidence");
        let targets: Vec<PointTarget> = reflectors
            .iter()
            .map(|r| PointTarget {
                x: r.x,
                y: r.y,
                amplitude: Complex64::new(self.reflector_amplitude_fast(r, aspect), 0.0),
            })
            .collect();
        self.render_points(azimuth, &targets)
    }

    /// On-peak focused magnitude of a unit scatterer, for calibration.
    fn unit_peak(&self) -> f64 {
        self.psf.chain_gain.norm()
    }

    /// Same impulse-response table under a different transmit amplitude (the
    /// table is built from a unit-amplitude injection, so it carries over).
    pub fn with_tx_amplitude(&self, tx_amplitude: f64) -> FastRenderer {
        FastRenderer {
            spec: SarSystemSpec {
                tx_amplitude,
                ..self.spec
            },
            psf: self.psf.clone(),
            scatter_lut: self.scatter_lut.clone(),
            paint_radius_px: self.paint_radius_px,
        }
    }

    /// Restrict or widen the per-target paint window (pixels).
    pub fn with_paint_radius(mut self, radius_px: f64) -> FastRenderer {
        self.paint_radius_px = radius_px;
        self
    }
}

/// Bisection against an existing renderer's impulse response.
pub fn calibrate_tx_amplitude_with(renderer: &FastRenderer, target_peak: f64) -> f64 {
    assert!(target_peak > 0.0, "target peak must be positive");
    let incidence = renderer.incidence();
    let peak_of = |tx: f64| -> f64 {
        let reflector = ReflectorConfig {
            x: 0.0,
            y: 0.0,
            boresight_incidence: incidence,
            boresight_azimuth: 0.0,
        };
        let spec_at = SarSystemSpec {
            tx_amplitude: tx,
            ..*renderer.spec()
        };
        let aspect = AspectAngles::new(incidence, 0.0).expect("valid incidence");
        let amp = reflector_amplitude(&reflector, aspect, &spec_at, DEFAULT_PLATE_SIDE);
        amp * renderer.unit_peak()
    };
    let mut lo = 0.0;
    let mut hi = 1.0;
    while peak_of(hi) < target_peak {
        hi *= 2.0;
        assert!(hi < 1e300, "calibration target unreachable");
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if peak_of(mid) < target_peak {
            lo = mid;
        } else {
            hi = mid;
        }
        if (hi - lo) <= 1e-14 * hi {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Solve for the transmit amplitude that makes a boresight-viewed trihedral
/// at scene center produce the requested focused peak intensity. Scalar
/// bisection on the peak-vs-amplitude map.
pub fn calibrate_tx_amplitude(
    spec: &SarSystemSpec,
    incidence: f64,
    target_peak: f64,
) -> Result<f64, ImagingError> {
    assert!(target_peak > 0.0, "target peak must be positive");
    let renderer = FastRenderer::new(
        SarSystemSpec {
            tx_amplitude: 1.0,
            ..*spec
        },
        incidence,
    )?;
    let _ = boresight_incidence();
    Ok(calibrate_tx_amplitude_with(&renderer, target_peak))
}
