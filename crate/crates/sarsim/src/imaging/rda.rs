//! Range-Doppler focusing: fast-time matched filtering, azimuth FFT,
//! range-cell migration correction by windowed-sinc interpolation, azimuth
//! matched filtering with the Doppler chirp rate, and resampling onto the
//! ground chip raster.

use num_complex::Complex64;
use rustfft::FftPlanner;

use super::{ComplexImage, EchoMatrix, SarSystemSpec, CHIP_SIZE};
use crate::scattering::LIGHT_SPEED;

/// Focused slant-plane image: gate-major rows of azimuth samples, plus the
/// geometry needed to interpolate ground positions out of it.
pub(crate) struct FocusedSlant {
    // gate-major complex samples
    data: Vec<Complex64>,
    n_gates: usize,
    n_az: usize,
    gate0_time: f64,
    sample_rate: f64,
    prf: f64,
    n_pulses: usize,
    incidence: f64,
}

impl FocusedSlant {
    fn at(&self, gate: usize, az: usize) -> Complex64 {
        self.data[gate * self.n_az + az]
    }

    /// Interpolate the focused response of the ground point with toward-radar
    /// offset `u` and along-track offset `a` (meters): windowed sinc across
    /// gates, linear across pulses.
    pub(crate) fn sample_ground(&self, spec: &SarSystemSpec, u: f64, a: f64) -> Complex64 {
        let r = super::closest_slant_range_incidence(spec, self.incidence, u);
        let gate = (2.0 * r / LIGHT_SPEED - self.gate0_time) * self.sample_rate;
        let pulse = a / spec.platform_speed * self.prf + (self.n_pulses as f64 - 1.0) / 2.0;
        if gate < 4.0
            || gate >= (self.n_gates - 5) as f64
            || pulse < 1.0
            || pulse >= (self.n_pulses - 2) as f64
        {
            return Complex64::new(0.0, 0.0);
        }
        let p0 = pulse.floor() as usize;
        let pf = pulse - p0 as f64;
        let g0 = gate.floor() as usize;
        let gf = gate - g0 as f64;
        let w = sinc8_weights(gf);
        let mut acc = Complex64::new(0.0, 0.0);
        for (k, wk) in w.iter().enumerate() {
            let g = g0 + k - 3;
            let v = self.at(g, p0) * (1.0 - pf) + self.at(g, p0 + 1) * pf;
            acc += v * *wk;
        }
        acc
    }
}

/// 8-tap Hamming-windowed sinc interpolation weights for a fractional offset
/// in [0, 1); taps sit at integer offsets -3..=4 around the floor sample.
fn sinc8_weights(frac: f64) -> [f64; 8] {
    let mut w = [0.0; 8];
    let mut sum = 0.0;
    for (k, wk) in w.iter_mut().enumerate() {
        let x = frac - (k as f64 - 3.0);
        let s = if x.abs() < 1e-12 {
            1.0
        } else {
            let px = std::f64::consts::PI * x;
            px.sin() / px
        };
        let window = 0.54 + 0.46 * (std::f64::consts::PI * x / 4.5).cos();
        *wk = s * window;
        sum += *wk;
    }
    for wk in &mut w {
        *wk /= sum;
    }
    w
}

fn next_pow2(n: usize) -> usize {
    let mut p = 1;
    while p < n {
        p <<= 1;
    }
    p
}

/// Run the full range-Doppler chain on a demodulated echo matrix and keep the
/// slant-plane result for interpolation.
pub(crate) fn focus_to_slant(echo: &EchoMatrix, spec: &SarSystemSpec) -> FocusedSlant {
    let n_fast = echo.fast_count;
    let n_pulses = echo.slow_count;
    let fs = spec.sample_rate;
    let n_chirp = (spec.pulse_duration * fs).round() as usize;
    let n_fft = next_pow2(n_fast + n_chirp / 2 + 8);

    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(n_fft);
    let ifft = planner.plan_fft_inverse(n_fft);

    // Range reference: the chirp replica on a circularly centered time axis;
    // multiplying by its conjugate spectrum is correlation with the replica.
    let mut reference = vec![Complex64::new(0.0, 0.0); n_fft];
    for (m, r) in reference.iter_mut().enumerate() {
        let t = if m <= n_fft / 2 {
            m as f64 / fs
        } else {
            (m as f64 - n_fft as f64) / fs
        };
        if (t / spec.pulse_duration).abs() <= 0.5 {
            *r = Complex64::from_polar(1.0, -std::f64::consts::PI * spec.chirp_rate() * t * t);
        }
    }
    fft.process(&mut reference);

    // Crop of range gates kept for azimuth processing.
    let half = spec.swath_half_slant() - 1.0;
    let r0 = spec.standoff_range;
    let g_lo = (((2.0 * (r0 - half) / LIGHT_SPEED) - echo.fast_time_origin) * fs).floor() as usize;
    let g_hi =
        ((((2.0 * (r0 + half) / LIGHT_SPEED) - echo.fast_time_origin) * fs).ceil() as usize)
            .min(n_fast - 1);
    let n_gates = g_hi - g_lo + 1;
    let n_az = next_pow2(n_pulses);

    // Range compression, streaming one pulse at a time into gate-major rows.
    let mut rc = vec![Complex64::new(0.0, 0.0); n_gates * n_az];
    let mut row = vec![Complex64::new(0.0, 0.0); n_fft];
    for pulse in 0..n_pulses {
        row[..n_fast].copy_from_slice(&echo.samples[pulse * n_fast..(pulse + 1) * n_fast]);
        row[n_fast..].fill(Complex64::new(0.0, 0.0));
        fft.process(&mut row);
        for (s, r) in row.iter_mut().zip(&reference) {
            *s *= r.conj();
        }
        ifft.process(&mut row);
        let scale = 1.0 / n_fft as f64;
        for g in 0..n_gates {
            rc[g * n_az + pulse] = row[g_lo + g] * scale;
        }
    }

    // Azimuth FFT per gate.
    let az_fft = planner.plan_fft_forward(n_az);
    let az_ifft = planner.plan_fft_inverse(n_az);
    for g in 0..n_gates {
        az_fft.process(&mut rc[g * n_az..(g + 1) * n_az]);
    }

    // RCMC in the range-Doppler domain: each Doppler bin maps to an offset
    // from closest approach, whose extra delay is pulled back by sinc
    // interpolation across gates.
    let v = spec.platform_speed;
    let mut rcmc = vec![Complex64::new(0.0, 0.0); n_gates * n_az];
    let doppler_freq = |b: usize| -> f64 {
        if b <= n_az / 2 {
            b as f64 * spec.prf / n_az as f64
        } else {
            (b as f64 - n_az as f64) * spec.prf / n_az as f64
        }
    };
    for g in 0..n_gates {
        let r_gate = LIGHT_SPEED * (echo.fast_time_origin + (g_lo + g) as f64 / fs) / 2.0;
        let k_eta = spec.doppler_rate(r_gate);
        for b in 0..n_az {
            let f = doppler_freq(b);
            let eta = f / k_eta;
            let d = (r_gate * r_gate + (v * eta) * (v * eta)).sqrt();
            let shift = 2.0 * (d - r_gate) / LIGHT_SPEED * fs;
            let pos = g as f64 + shift;
            let base = pos.floor() as isize;
            let frac = pos - base as f64;
            let w = sinc8_weights(frac);
            let mut acc = Complex64::new(0.0, 0.0);
            for (k, wk) in w.iter().enumerate() {
                let gg = base + k as isize - 3;
                if gg >= 0 && (gg as usize) < n_gates {
                    acc += rc[gg as usize * n_az + b] * *wk;
                }
            }
            rcmc[g * n_az + b] = acc;
        }
    }
    drop(rc);

    // Azimuth matched filter and inverse transform per gate.
    for g in 0..n_gates {
        let r_gate = LIGHT_SPEED * (echo.fast_time_origin + (g_lo + g) as f64 / fs) / 2.0;
        let k_eta = spec.doppler_rate(r_gate);
        let row = &mut rcmc[g * n_az..(g + 1) * n_az];
        for (b, s) in row.iter_mut().enumerate() {
            let f = doppler_freq(b);
            *s *= Complex64::from_polar(1.0, std::f64::consts::PI * f * f / k_eta);
        }
        az_ifft.process(row);
        let scale = 1.0 / n_az as f64;
        for s in row.iter_mut() {
            *s *= scale;
        }
    }

    FocusedSlant {
        data: rcmc,
        n_gates,
        n_az,
        gate0_time: echo.fast_time_origin + g_lo as f64 / fs,
        sample_rate: fs,
        prf: spec.prf,
        n_pulses,
        incidence: echo.incidence,
    }
}

/// Focus a demodulated echo matrix into the 128 x 128 ground chip.
pub fn focus_rda(echo: &EchoMatrix, spec: &SarSystemSpec) -> ComplexImage {
    let slant = focus_to_slant(echo, spec);
    let mut image = ComplexImage::zeros(CHIP_SIZE, CHIP_SIZE, spec.ground_sample_distance);
    let center = (CHIP_SIZE as f64 - 1.0) / 2.0;
    for row in 0..CHIP_SIZE {
        let u = (row as f64 - center) * spec.ground_sample_distance.0;
        for col in 0..CHIP_SIZE {
            let a = (col as f64 - center) * spec.ground_sample_distance.1;
            image.pixels[row * CHIP_SIZE + col] = slant.sample_ground(spec, u, a);
        }
    }
    image
}

#[cfg(test)]
mod tests {
    use super::super::tests::desk_spec;
    use super::super::{
        ground_to_pixel, synthesize_point_echo, EchoMatrix, PointEcho,
    };
    use super::*;
    use crate::geometry::AspectAngles;
    use rand::{Rng as _, SeedableRng as _};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_echo_focuses_to_zero_image() {
        let spec = desk_spec();
        let aspect = AspectAngles::from_degrees(75.0, 10.0).unwrap();
        let echo = EchoMatrix::zeros(&spec, aspect, 64);
        let img = focus_rda(&echo, &spec);
        assert!(img.pixels.iter().all(|p| p.norm() == 0.0));
    }

    #[test]
    fn center_point_focuses_to_center_pixel() {
        let spec = desk_spec();
        let aspect = AspectAngles::from_degrees(75.0, 40.0).unwrap();
        let echo = synthesize_point_echo(
            PointEcho {
                x: 0.0,
                y: 0.0,
                amplitude: Complex64::new(1.0, 0.0),
            },
            aspect,
            &spec,
            spec.aperture_pulses(),
        )
        .unwrap();
        let img = focus_rda(&echo, &spec);
        let (r, c, _) = img.peak_pixel();
        assert!((r as f64 - 63.5).abs() <= 1.0, "row {r}");
        assert!((c as f64 - 63.5).abs() <= 1.0, "col {c}");
    }

    #[test]
    fn offset_points_land_on_predicted_pixels() {
        let spec = desk_spec();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..4 {
            let aspect = AspectAngles::from_degrees(
                rng.gen_range(30.0..80.0),
                rng.gen_range(0.0..360.0),
            )
            .unwrap();
            let (x, y) = (rng.gen_range(-300.0..300.0), rng.gen_range(-300.0..300.0));
            let echo = synthesize_point_echo(
                PointEcho {
                    x,
                    y,
                    amplitude: Complex64::new(1.0, 0.0),
                },
                aspect,
                &spec,
                spec.aperture_pulses(),
            )
            .unwrap();
            let img = focus_rda(&echo, &spec);
            let (r, c, _) = img.peak_pixel();
            let (pr, pc) = ground_to_pixel(&spec, aspect, x, y);
            assert!(
                (r as f64 - pr).abs() <= 1.0 && (c as f64 - pc).abs() <= 1.0,
                "peak ({r},{c}) vs predicted ({pr:.2},{pc:.2}) at ({x:.1},{y:.1})"
            );
        }
    }

    #[test]
    fn chain_is_linear_in_the_echo_field() {
        let spec = desk_spec();
        let aspect = AspectAngles::from_degrees(60.0, 120.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut x = EchoMatrix::zeros(&spec, aspect, 32);
        let mut y = EchoMatrix::zeros(&spec, aspect, 32);
        for s in x.samples.iter_mut() {
            *s = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        }
        for s in y.samples.iter_mut() {
            *s = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        }
        let (a, b) = (1.7, -0.4);
        let mut combo = x.clone();
        combo.axpby(a, b, &y).unwrap();
        let fx = focus_rda(&x, &spec);
        let fy = focus_rda(&y, &spec);
        let fc = focus_rda(&combo, &spec);
        let mut max_err: f64 = 0.0;
        let mut max_mag: f64 = 0.0;
        for i in 0..fc.pixels.len() {
            let lin = fx.pixels[i] * a + fy.pixels[i] * b;
            max_err = max_err.max((fc.pixels[i] - lin).norm());
            max_mag = max_mag.max(lin.norm());
        }
        assert!(
            max_err < 1e-9 * max_mag,
            "linearity error {max_err:e} vs magnitude {max_mag:e}"
        );
    }

    #[test]
    fn azimuth_translation_moves_peak_by_exact_pixels() {
        let spec = desk_spec();
        let aspect = AspectAngles::from_degrees(75.0, 0.0).unwrap();
        // At azimuth 0 the track direction is +y, so stepping y by one
        // azimuth ground sample moves the peak one column.
        let base = synthesize_point_echo(
            PointEcho {
                x: 0.0,
                y: 37.0,
                amplitude: Complex64::new(1.0, 0.0),
            },
            aspect,
            &spec,
            spec.aperture_pulses(),
        )
        .unwrap();
        let shifted = synthesize_point_echo(
            PointEcho {
                x: 0.0,
                y: 37.0 + spec.ground_sample_distance.1,
                amplitude: Complex64::new(1.0, 0.0),
            },
            aspect,
            &spec,
            spec.aperture_pulses(),
        )
        .unwrap();
        let p0 = focus_rda(&base, &spec).peak_pixel();
        let p1 = focus_rda(&shifted, &spec).peak_pixel();
        assert_eq!(p0.0, p1.0);
        assert_eq!(p1.1, p0.1 + 1);
    }
}
