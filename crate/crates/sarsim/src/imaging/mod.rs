//! The simulated SAR measurement chain: chirp transmit pulse, per-reflector
//! echo synthesis, horizontal-polarization measurement, quadrature
//! demodulation, and range-Doppler focusing into a complex image chip.
//!
//! Fast time `t` is absolute within a pulse-repetition interval (the delay of
//! a scatterer at slant range R is 2R/c) and slow time `eta` is measured from
//! the aperture center. The transmitted pulse is centered on t = 0.

mod io;
mod rda;
mod render;

pub use io::{read_cimg, read_cimg_bytes, write_cimg, write_cimg_bytes, write_png_log};
pub use rda::focus_rda;
pub use render::{calibrate_tx_amplitude, calibrate_tx_amplitude_with, FastRenderer, PointTarget, PsfTable};

use num_complex::Complex64;
use thiserror::Error;

use crate::attack::ReflectorConfig;
use crate::geometry::{AspectAngles, PlatformPath, TrihedralGeometry, Vec3};
use crate::scattering::{total_scatter, LIGHT_SPEED};

/// Output chip geometry fixed to the MSTAR raster: 128 x 128 pixels.
pub const CHIP_SIZE: usize = 128;
/// Side length in meters of the square trihedral reflectors under study.
pub const DEFAULT_PLATE_SIDE: f64 = 0.3;

#[derive(Debug, Error)]
pub enum ImagingError {
    #[error("reflector at ({x}, {y}) m falls outside the fast-time swath window")]
    OutOfSwath { x: f64, y: f64 },
    #[error("echo geometry mismatch: {0}")]
    EchoMismatch(String),
    #[error("passband sampling requires f0 + 0.55 B < fs/2 (got f0 {f0}, B {bandwidth}, fs {sample_rate})")]
    PassbandUnsampleable {
        f0: f64,
        bandwidth: f64,
        sample_rate: f64,
    },
    #[error("invalid SAR system spec: {0}")]
    InvalidSpec(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad image file: {0}")]
    BadImageFile(String),
}

/// Polarization channel of the simulated system. Only HH is modeled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Polarization {
    HH,
}

/// Platform/waveform constants of the simulated SAR system.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SarSystemSpec {
    /// Standoff range r0 to scene center, meters.
    pub standoff_range: f64,
    /// Platform speed, m/s.
    pub platform_speed: f64,
    /// Center frequency f0, Hz.
    pub center_frequency: f64,
    /// Chirp bandwidth B = K T, Hz.
    pub bandwidth: f64,
    /// Pulse duration T, seconds.
    pub pulse_duration: f64,
    /// Fast-time sample rate, Hz.
    pub sample_rate: f64,
    /// Pulse repetition frequency, Hz.
    pub prf: f64,
    /// Ground sample distance (range, azimuth), meters per pixel.
    pub ground_sample_distance: (f64, f64),
    pub polarization: Polarization,
    /// Transmit field amplitude A_t (set by calibration against a dataset).
    pub tx_amplitude: f64,
}

impl SarSystemSpec {
    /// The simulated-system specification table at the given standoff range
    /// (the study uses 4500 m and 5000 m).
    pub fn mstar_table(standoff_range: f64) -> Self {
        Self {
            standoff_range,
            platform_speed: 50.0,
            center_frequency: 9.6e9,
            bandwidth: 591e6,
            pulse_duration: 5e-6,
            sample_rate: 500e6,
            prf: 1200.0,
            ground_sample_distance: (0.3, 0.3),
            polarization: Polarization::HH,
            tx_amplitude: 1.0,
        }
    }

    pub fn validate(&self) -> Result<(), ImagingError> {
        if self.standoff_range <= 0.0
            || self.platform_speed <= 0.0
            || self.center_frequency <= 0.0
            || self.bandwidth <= 0.0
            || self.pulse_duration <= 0.0
            || self.sample_rate <= 0.0
            || self.prf <= 0.0
        {
            return Err(ImagingError::InvalidSpec(
                "all rates, durations and ranges must be positive".into(),
            ));
        }
        // The study's own table pairs a 591 MHz chirp with a 500 MHz sample
        // rate; the matched filter tolerates that mild wrap, so only reject
        // sampling below 80% of the bandwidth.
        if self.sample_rate < 0.8 * self.bandwidth {
            return Err(ImagingError::InvalidSpec(format!(
                "sample rate {} too low for bandwidth {}",
                self.sample_rate, self.bandwidth
            )));
        }
        if self.ground_sample_distance.0 <= 0.0 || self.ground_sample_distance.1 <= 0.0 {
            return Err(ImagingError::InvalidSpec("ground sample distance".into()));
        }
        Ok(())
    }

    /// Chirp rate K = B / T.
    pub fn chirp_rate(&self) -> f64 {
        self.bandwidth / self.pulse_duration
    }

    pub fn wavelength(&self) -> f64 {
        LIGHT_SPEED / self.center_frequency
    }

    /// Phase constant k = 2 pi f0 / c.
    pub fn phase_const(&self) -> f64 {
        2.0 * std::f64::consts::PI * self.center_frequency / LIGHT_SPEED
    }

    /// Doppler chirp rate K_eta = 2 f0 v^2 / (r c) at slant range r.
    pub fn doppler_rate(&self, range: f64) -> f64 {
        2.0 * self.center_frequency * self.platform_speed * self.platform_speed
            / (range * LIGHT_SPEED)
    }

    /// Synthetic aperture duration making the theoretical azimuth resolution
    /// v / (K_eta T_a) equal to the azimuth ground sample distance.
    pub fn aperture_duration(&self) -> f64 {
        self.platform_speed
            / (self.doppler_rate(self.standoff_range) * self.ground_sample_distance.1)
    }

    /// Default odd pulse count covering one synthetic aperture.
    pub fn aperture_pulses(&self) -> usize {
        let n = (self.aperture_duration() * self.prf).ceil() as usize;
        if n % 2 == 0 {
            n + 1
        } else {
            n
        }
    }

    /// Half-extent in slant range of the synthesized fast-time swath window.
    pub fn swath_half_slant(&self) -> f64 {
        let gsd = self.ground_sample_distance.0;
        (CHIP_SIZE as f64 / 2.0 + 68.0) * gsd + 0.01 * self.standoff_range.min(400.0) + 2.0
    }

    /// Maximum |R_min - r0| accepted for a reflector before OutOfSwath.
    pub fn max_slant_offset(&self) -> f64 {
        (CHIP_SIZE as f64 / 2.0 + 40.0) * self.ground_sample_distance.0
    }
}

/// Real transmitted chirp A_t rect(t/T) cos(2 pi f0 t + pi K t^2).
pub fn chirp(spec: &SarSystemSpec, t: f64) -> f64 {
    if (t / spec.pulse_duration).abs() > 0.5 {
        return 0.0;
    }
    spec.tx_amplitude
        * (2.0 * std::f64::consts::PI * spec.center_frequency * t
            + std::f64::consts::PI * spec.chirp_rate() * t * t)
            .cos()
}

// ---------------------------------------------------------------------------
// Scene <-> image geometry
// ---------------------------------------------------------------------------

/// Ground coordinates of a scene point expressed in the radar frame of one
/// observation: `u` along the ground look direction (positive toward the
/// radar), `a` along the flight track.
pub fn radar_frame_coords(aspect: AspectAngles, x: f64, y: f64) -> (f64, f64) {
    let (s, c) = aspect.azimuth().sin_cos();
    (x * c + y * s, -x * s + y * c)
}

/// Closest-approach slant range of a scene point with toward-radar ground
/// offset `u`: sqrt(r0^2 - 2 r0 u sin(theta) + u^2). Exact for any `u`.
pub fn closest_slant_range(spec: &SarSystemSpec, aspect: AspectAngles, u: f64) -> f64 {
    closest_slant_range_incidence(spec, aspect.incidence(), u)
}

pub(crate) fn closest_slant_range_incidence(spec: &SarSystemSpec, incidence: f64, u: f64) -> f64 {
    let r0 = spec.standoff_range;
    (r0 * r0 - 2.0 * r0 * u * incidence.sin() + u * u).sqrt()
}

/// Fractional chip pixel (row, col) of a ground point. Rows run down-chip
/// toward the radar (near range at the bottom), columns along-track.
pub fn ground_to_pixel(spec: &SarSystemSpec, aspect: AspectAngles, x: f64, y: f64) -> (f64, f64) {
    let (u, a) = radar_frame_coords(aspect, x, y);
    let center = (CHIP_SIZE as f64 - 1.0) / 2.0;
    (
        center + u / spec.ground_sample_distance.0,
        center + a / spec.ground_sample_distance.1,
    )
}

// ---------------------------------------------------------------------------
// Echo matrices
// ---------------------------------------------------------------------------

/// Demodulated complex baseband samples over slow time x fast time, plus the
/// acquisition geometry needed to focus them.
#[derive(Debug, Clone, PartialEq)]
pub struct EchoMatrix {
    /// Row-major [slow_count x fast_count].
    pub samples: Vec<Complex64>,
    pub slow_count: usize,
    pub fast_count: usize,
    /// Absolute fast time of sample 0, seconds.
    pub fast_time_origin: f64,
    /// Total slow-time span (slow_count / prf), seconds.
    pub slow_time_span: f64,
    /// Incidence aspect angle of the acquisition, radians.
    pub incidence: f64,
}

impl EchoMatrix {
    pub fn zeros(spec: &SarSystemSpec, aspect: AspectAngles, aperture_pulses: usize) -> Self {
        let (t0, n_fast) = fast_time_window(spec);
        EchoMatrix {
            samples: vec![Complex64::new(0.0, 0.0); aperture_pulses * n_fast],
            slow_count: aperture_pulses,
            fast_count: n_fast,
            fast_time_origin: t0,
            slow_time_span: aperture_pulses as f64 / spec.prf,
            incidence: aspect.incidence(),
        }
    }

    /// Slow time of pulse `i`, centered on the aperture midpoint.
    pub fn slow_time(&self, i: usize, prf: f64) -> f64 {
        (i as f64 - (self.slow_count as f64 - 1.0) / 2.0) / prf
    }

    pub fn at(&self, slow: usize, fast: usize) -> Complex64 {
        self.samples[slow * self.fast_count + fast]
    }

    /// Pointwise linear combination self = a*self + b*other.
    pub fn axpby(&mut self, a: f64, b: f64, other: &EchoMatrix) -> Result<(), ImagingError> {
        if self.slow_count != other.slow_count || self.fast_count != other.fast_count {
            return Err(ImagingError::EchoMismatch(format!(
                "{}x{} vs {}x{}",
                self.slow_count, self.fast_count, other.slow_count, other.fast_count
            )));
        }
        for (s, o) in self.samples.iter_mut().zip(&other.samples) {
            *s = *s * a + *o * b;
        }
        Ok(())
    }
}

/// Raw real measurement over slow time x fast time (desk-scale passband use).
#[derive(Debug, Clone, PartialEq)]
pub struct RealEchoMatrix {
    pub samples: Vec<f64>,
    pub slow_count: usize,
    pub fast_count: usize,
    pub fast_time_origin: f64,
    pub slow_time_span: f64,
    pub incidence: f64,
}

/// Fast-time window start and sample count for one spec.
pub fn fast_time_window(spec: &SarSystemSpec) -> (f64, usize) {
    let guard = 8.0 / spec.sample_rate;
    let half = spec.swath_half_slant();
    let t0 = 2.0 * (spec.standoff_range - half) / LIGHT_SPEED - spec.pulse_duration / 2.0 - guard;
    let span = 4.0 * half / LIGHT_SPEED + spec.pulse_duration + 2.0 * guard;
    (t0, (span * spec.sample_rate).ceil() as usize)
}

/// A point target on the ground with an externally supplied complex
/// reflection amplitude (held constant over the aperture apart from the
/// range-dependent 1/r factor).
#[derive(Debug, Clone, Copy)]
pub struct PointEcho {
    pub x: f64,
    pub y: f64,
    pub amplitude: Complex64,
}

/// Synthesize the demodulated baseband echo of one point target: per pulse
/// the delayed-chirp closed form
/// |A| rect((t - tau)/T) exp(j pi (2 f0 tau - K (t - tau)^2)).
pub fn synthesize_point_echo(
    point: PointEcho,
    aspect: AspectAngles,
    spec: &SarSystemSpec,
    aperture_pulses: usize,
) -> Result<EchoMatrix, ImagingError> {
    let mut echo = EchoMatrix::zeros(spec, aspect, aperture_pulses);
    accumulate_point_echo(&mut echo, point, aspect, spec)?;
    Ok(echo)
}

/// Add one point target's echo into an existing matrix.
pub fn accumulate_point_echo(
    echo: &mut EchoMatrix,
    point: PointEcho,
    aspect: AspectAngles,
    spec: &SarSystemSpec,
) -> Result<(), ImagingError> {
    let (u, _) = radar_frame_coords(aspect, point.x, point.y);
    let r_min = closest_slant_range(spec, aspect, u);
    if (r_min - spec.standoff_range).abs() > spec.max_slant_offset() {
        return Err(ImagingError::OutOfSwath {
            x: point.x,
            y: point.y,
        });
    }
    let path = PlatformPath::from_aspect(spec.standoff_range, spec.platform_speed, aspect)
        .map_err(|e| ImagingError::InvalidSpec(e.to_string()))?;
    let target = Vec3::new(point.x, point.y, 0.0);
    let k_rate = spec.chirp_rate();
    let fs = spec.sample_rate;
    let f0 = spec.center_frequency;
    let t_half = spec.pulse_duration / 2.0;
    let t0 = echo.fast_time_origin;
    let n_fast = echo.fast_count;
    let r_center = (path.position(0.0) - target).norm();

    for i in 0..echo.slow_count {
        let eta = echo.slow_time(i, spec.prf);
        let r = (path.position(eta) - target).norm();
        let tau = 2.0 * r / LIGHT_SPEED;
        // Fast-time support of the pulse inside the window.
        let m_lo = ((tau - t_half - t0) * fs).ceil().max(0.0) as usize;
        let m_hi = (((tau + t_half - t0) * fs).floor() as isize).min(n_fast as isize - 1);
        if (m_hi as f64) < m_lo as f64 {
            return Err(ImagingError::OutOfSwath {
                x: point.x,
                y: point.y,
            });
        }
        let m_hi = m_hi as usize;
        let amp = point.amplitude * (r_center / r);
        // Phase pi (2 f0 tau - K (t - tau)^2) is quadratic in the sample
        // index: evaluate with a double rotator, renormalizing periodically.
        let dt = 1.0 / fs;
        let ts = t0 + m_lo as f64 * dt - tau;
        let pi = std::f64::consts::PI;
        // theta(n) = theta0 + a n + b n^2; increments a + b (2n + 1) are
        // advanced by a second rotator.
        let theta0 = pi * (2.0 * f0 * tau - k_rate * ts * ts);
        let lin = pi * (-k_rate * 2.0 * ts * dt);
        let quad = pi * (-k_rate * dt * dt);
        let mut z = Complex64::from_polar(1.0, theta0);
        let mut w = Complex64::from_polar(1.0, lin + quad);
        let step = Complex64::from_polar(1.0, 2.0 * quad);
        let row = &mut echo.samples[i * n_fast..(i + 1) * n_fast];
        for (count, sample) in row[m_lo..=m_hi].iter_mut().enumerate() {
            *sample += amp * z;
            z *= w;
            w *= step;
            if count % 512 == 511 {
                z = Complex64::from_polar(1.0, z.arg());
                w = Complex64::from_polar(1.0, w.arg());
            }
        }
    }
    Ok(())
}

/// Complex reflection amplitude of a trihedral reflector for one observation:
/// the HH measurement picks |E_phi|, and the focused response keeps the
/// carrier phase through 2 pi f0 tau, so only the magnitude is carried here.
pub fn reflector_amplitude(
    reflector: &ReflectorConfig,
    aspect: AspectAngles,
    spec: &SarSystemSpec,
    plate_side: f64,
) -> f64 {
    let geom = TrihedralGeometry::new(plate_side).expect("positive plate side");
    let angles = crate::geometry::to_boresight_frame(
        aspect,
        reflector.boresight_incidence,
        reflector.boresight_azimuth,
    );
    let (u, _) = radar_frame_coords(aspect, reflector.x, reflector.y);
    let r = closest_slant_range(spec, aspect, u);
    let result = total_scatter(angles, &geom, r, spec.tx_amplitude, spec.phase_const());
    result.e_phi.norm()
}

/// Synthesize the baseband echo of one trihedral reflector, with the
/// scattering amplitude evaluated at the aperture-center angles.
pub fn synthesize_echo(
    reflector: &ReflectorConfig,
    aspect: AspectAngles,
    spec: &SarSystemSpec,
    aperture_pulses: usize,
) -> Result<EchoMatrix, ImagingError> {
    let amp = reflector_amplitude(reflector, aspect, spec, DEFAULT_PLATE_SIDE);
    synthesize_point_echo(
        PointEcho {
            x: reflector.x,
            y: reflector.y,
            amplitude: Complex64::new(amp, 0.0),
        },
        aspect,
        spec,
        aperture_pulses,
    )
}

/// Real passband measurement of a point target, sampled at spec.sample_rate.
/// Only valid when the passband actually fits below Nyquist.
pub fn synthesize_echo_passband(
    point: PointEcho,
    aspect: AspectAngles,
    spec: &SarSystemSpec,
    aperture_pulses: usize,
) -> Result<RealEchoMatrix, ImagingError> {
    if spec.center_frequency + 0.55 * spec.bandwidth >= spec.sample_rate / 2.0 {
        return Err(ImagingError::PassbandUnsampleable {
            f0: spec.center_frequency,
            bandwidth: spec.bandwidth,
            sample_rate: spec.sample_rate,
        });
    }
    let (t0, n_fast) = fast_time_window(spec);
    let path = PlatformPath::from_aspect(spec.standoff_range, spec.platform_speed, aspect)
        .map_err(|e| ImagingError::InvalidSpec(e.to_string()))?;
    let target = Vec3::new(point.x, point.y, 0.0);
    let mut out = RealEchoMatrix {
        samples: vec![0.0; aperture_pulses * n_fast],
        slow_count: aperture_pulses,
        fast_count: n_fast,
        fast_time_origin: t0,
        slow_time_span: aperture_pulses as f64 / spec.prf,
        incidence: aspect.incidence(),
    };
    let r_center = (path.position(0.0) - target).norm();
    for i in 0..aperture_pulses {
        let eta = (i as f64 - (aperture_pulses as f64 - 1.0) / 2.0) / spec.prf;
        let r = (path.position(eta) - target).norm();
        let tau = 2.0 * r / LIGHT_SPEED;
        let amp = point.amplitude.norm() * (r_center / r);
        let row = &mut out.samples[i * n_fast..(i + 1) * n_fast];
        for (m, sample) in row.iter_mut().enumerate() {
            let t = t0 + m as f64 / spec.sample_rate - tau;
            if (t / spec.pulse_duration).abs() <= 0.5 {
                *sample += amp
                    * (2.0 * std::f64::consts::PI * spec.center_frequency * t
                        + std::f64::consts::PI * spec.chirp_rate() * t * t)
                        .cos();
            }
        }
    }
    Ok(out)
}

/// Quadrature demodulation: mix the measured real signal to baseband with the
/// carrier at f0 and apply an ideal brick-wall low-pass at 1.1 B/2 in the
/// fast-time frequency domain. The 2x gain restores the envelope amplitude.
pub fn quadrature_demodulate(
    echo: &RealEchoMatrix,
    spec: &SarSystemSpec,
) -> EchoMatrix {
    use rustfft::FftPlanner;
    let n = echo.fast_count;
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(n);
    let ifft = planner.plan_fft_inverse(n);
    let cutoff = 0.55 * spec.bandwidth;
    let fs = spec.sample_rate;
    let mut out = vec![Complex64::new(0.0, 0.0); echo.samples.len()];
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    for i in 0..echo.slow_count {
        for (m, b) in buf.iter_mut().enumerate() {
            let t = echo.fast_time_origin + m as f64 / fs;
            // The study's demodulator convention leaves +2 pi f0 tau in the
            // baseband phase, i.e. it retains the exp(-j phi(t)) component.
            let carrier = Complex64::from_polar(
                1.0,
                2.0 * std::f64::consts::PI * spec.center_frequency * t,
            );
            *b = carrier * echo.samples[i * echo.fast_count + m];
        }
        fft.process(&mut buf);
        for (k, b) in buf.iter_mut().enumerate() {
            let f = if k <= n / 2 {
                k as f64 * fs / n as f64
            } else {
                (k as f64 - n as f64) * fs / n as f64
            };
            if f.abs() > cutoff {
                *b = Complex64::new(0.0, 0.0);
            }
        }
        ifft.process(&mut buf);
        let scale = 2.0 / n as f64;
        for (m, b) in buf.iter().enumerate() {
            out[i * echo.fast_count + m] = b * scale;
        }
    }
    EchoMatrix {
        samples: out,
        slow_count: echo.slow_count,
        fast_count: echo.fast_count,
        fast_time_origin: echo.fast_time_origin,
        slow_time_span: echo.slow_time_span,
        incidence: echo.incidence,
    }
}

// ---------------------------------------------------------------------------
// Complex images
// ---------------------------------------------------------------------------

/// Focused complex image raster.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexImage {
    pub rows: usize,
    pub cols: usize,
    /// Row-major pixels.
    pub pixels: Vec<Complex64>,
    /// Meters per pixel in (range, azimuth).
    pub ground_spacing: (f64, f64),
}

impl ComplexImage {
    pub fn zeros(rows: usize, cols: usize, ground_spacing: (f64, f64)) -> Self {
        Self {
            rows,
            cols,
            pixels: vec![Complex64::new(0.0, 0.0); rows * cols],
            ground_spacing,
        }
    }

    pub fn at(&self, row: usize, col: usize) -> Complex64 {
        self.pixels[row * self.cols + col]
    }

    pub fn magnitude(&self) -> MagnitudeImage {
        MagnitudeImage {
            rows: self.rows,
            cols: self.cols,
            data: self.pixels.iter().map(|p| p.norm()).collect(),
        }
    }

    pub fn peak_pixel(&self) -> (usize, usize, f64) {
        let mut best = (0, 0, 0.0);
        for r in 0..self.rows {
            for c in 0..self.cols {
                let m = self.at(r, c).norm();
                if m > best.2 {
                    best = (r, c, m);
                }
            }
        }
        best
    }
}

/// Nonnegative real-valued raster (magnitude chips).
#[derive(Debug, Clone, PartialEq)]
pub struct MagnitudeImage {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl MagnitudeImage {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn at(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.cols + col]
    }

    pub fn max(&self) -> f64 {
        self.data.iter().cloned().fold(0.0, f64::max)
    }
}

/// Focused perturbation image of a reflector set for one observation:
/// synthesize every echo, sum them, and focus with the range-Doppler chain.
pub fn image_perturbation(
    reflectors: &[ReflectorConfig],
    aspect: AspectAngles,
    spec: &SarSystemSpec,
) -> Result<ComplexImage, ImagingError> {
    assert!(!reflectors.is_empty(), "need at least one reflector");
    let pulses = spec.aperture_pulses();
    let mut total = EchoMatrix::zeros(spec, aspect, pulses);
    for r in reflectors {
        let amp = reflector_amplitude(r, aspect, spec, DEFAULT_PLATE_SIDE);
        if amp > 0.0 {
            accumulate_point_echo(
                &mut total,
                PointEcho {
                    x: r.x,
                    y: r.y,
                    amplitude: Complex64::new(amp, 0.0),
                },
                aspect,
                spec,
            )?;
        }
    }
    Ok(focus_rda(&total, spec))
}
