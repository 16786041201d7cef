//! PO/GO backscatter model for a square trihedral corner reflector.
//!
//! The reflected field is a sum over fifteen reflection paths (three single,
//! six double, six triple bounces). Intermediate bounces are specular
//! geometrical-optics reflections off PEC plates; the final plate carries a
//! physical-optics surface current whose far-field integrals reduce to
//! closed forms: a real trig coefficient times the integral of a
//! linear-phase exponential over the illuminated polygon. That polygon
//! integral is evaluated exactly by triangle decomposition.

use num_complex::Complex64;
use thiserror::Error;

use crate::geometry::{
    clip_polygons, project_polygon, BoresightAngles, GeometryError, Polygon3, TrihedralGeometry,
    Vec3,
};

/// Intrinsic impedance of free space, ohms (CODATA).
pub const FREE_SPACE_IMPEDANCE: f64 = 376.730313668;
/// Speed of light in vacuum, m/s.
pub const LIGHT_SPEED: f64 = 2.99792458e8;

/// Fixed physical constants used by the scattering and imaging chain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalConstants {
    pub free_space_impedance: f64,
    pub light_speed: f64,
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        Self {
            free_space_impedance: FREE_SPACE_IMPEDANCE,
            light_speed: LIGHT_SPEED,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ScatteringError {
    #[error("wave does not illuminate the plate front face (k.n = {dot})")]
    BackfaceIllumination { dot: f64 },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Reflector plate, numbered as in the reflector frame: plate 1 in the x-y
/// plane, plate 2 in the y-z plane, plate 3 in the x-z plane.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlateId {
    P1,
    P2,
    P3,
}

impl PlateId {
    pub fn index(self) -> usize {
        match self {
            PlateId::P1 => 1,
            PlateId::P2 => 2,
            PlateId::P3 => 3,
        }
    }

    /// Front-face normal (points into the interior octant).
    pub fn normal(self) -> Vec3 {
        match self {
            PlateId::P1 => Vec3::Z,
            PlateId::P2 => Vec3::X,
            PlateId::P3 => Vec3::Y,
        }
    }
}

/// One of the fifteen reflection paths: an ordered sequence of 1-3 plates
/// with no immediate repeats.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReflectionPath {
    plates: [PlateId; 3],
    len: usize,
}

impl ReflectionPath {
    pub const fn single(p: PlateId) -> Self {
        Self {
            plates: [p, p, p],
            len: 1,
        }
    }

    pub const fn double(a: PlateId, b: PlateId) -> Self {
        Self {
            plates: [a, b, b],
            len: 2,
        }
    }

    pub const fn triple(a: PlateId, b: PlateId, c: PlateId) -> Self {
        Self {
            plates: [a, b, c],
            len: 3,
        }
    }

    pub fn plates(&self) -> &[PlateId] {
        &self.plates[..self.len]
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn final_plate(&self) -> PlateId {
        self.plates[self.len - 1]
    }

    /// Path label in plate digits, e.g. "123".
    pub fn label(&self) -> String {
        self.plates().iter().map(|p| p.index().to_string()).collect()
    }
}

/// The fifteen paths of the model, in the summation order {1, 2, 3, 12, 21,
/// 13, 31, 23, 32, 123, 132, 213, 231, 312, 321}.
pub const ALL_PATHS: [ReflectionPath; 15] = {
    use PlateId::*;
    [
        ReflectionPath::single(P1),
        ReflectionPath::single(P2),
        ReflectionPath::single(P3),
        ReflectionPath::double(P1, P2),
        ReflectionPath::double(P2, P1),
        ReflectionPath::double(P1, P3),
        ReflectionPath::double(P3, P1),
        ReflectionPath::double(P2, P3),
        ReflectionPath::double(P3, P2),
        ReflectionPath::triple(P1, P2, P3),
        ReflectionPath::triple(P1, P3, P2),
        ReflectionPath::triple(P2, P1, P3),
        ReflectionPath::triple(P2, P3, P1),
        ReflectionPath::triple(P3, P1, P2),
        ReflectionPath::triple(P3, P2, P1),
    ]
};

/// Uniform plane wave described by its travel direction, magnetic-field
/// polarization, field amplitude and phase constant k (rad/m). The magnetic
/// field is H(r) = (amplitude / Z0) * h_pol * exp(-j k travel.r).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlaneWave {
    pub travel: Vec3,
    pub h_pol: Vec3,
    pub amplitude: f64,
    pub phase_const: f64,
}

impl PlaneWave {
    /// Specular PEC reflection off a plate through the origin: both the
    /// travel direction and the H polarization mirror across the normal.
    pub fn reflect(&self, normal: Vec3) -> PlaneWave {
        PlaneWave {
            travel: self.travel.mirror(normal),
            h_pol: self.h_pol.mirror(normal),
            amplitude: self.amplitude,
            phase_const: self.phase_const,
        }
    }
}

/// Unit vector toward the source, i.e. the scattering direction
/// (sin t' cos p', sin t' sin p', cos t').
pub fn look_vector(angles: BoresightAngles) -> Vec3 {
    let (st, ct) = angles.incidence_prime.sin_cos();
    let (sp, cp) = angles.azimuth_prime.sin_cos();
    Vec3::new(st * cp, st * sp, ct)
}

/// Spherical unit vector theta-hat at the boresight-frame angles.
pub fn theta_hat(angles: BoresightAngles) -> Vec3 {
    let (st, ct) = angles.incidence_prime.sin_cos();
    let (sp, cp) = angles.azimuth_prime.sin_cos();
    Vec3::new(ct * cp, ct * sp, -st)
}

/// Spherical unit vector phi-hat at the boresight-frame angles.
pub fn phi_hat(angles: BoresightAngles) -> Vec3 {
    let (sp, cp) = angles.azimuth_prime.sin_cos();
    Vec3::new(-sp, cp, 0.0)
}

/// Incident wave in the reflector frame:
/// k_t = -(sin t' cos p', sin t' sin p', cos t'),
/// h_t = (cos t' cos p', cos t' sin p', -sin t').
pub fn incident_wave(angles: BoresightAngles, amplitude: f64, phase_const: f64) -> PlaneWave {
    PlaneWave {
        travel: -look_vector(angles),
        h_pol: theta_hat(angles),
        amplitude,
        phase_const,
    }
}

/// Physical-optics surface current J(r) = coeff * exp(j phase_vec.r) on the
/// final plate: coeff = 2 (A/Z0) (n x h), phase_vec = -k k_hat.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfaceCurrent {
    pub coeff: Vec3,
    pub phase_vec: Vec3,
}

impl SurfaceCurrent {
    /// Complex current component along `dir` at plate position `r`.
    pub fn component(&self, dir: Vec3, r: Vec3) -> Complex64 {
        let phase = self.phase_vec.dot(r);
        Complex64::from_polar(1.0, phase) * self.coeff.dot(dir)
    }
}

/// J = 2 n x H for a plate with front-face normal `normal` illuminated by
/// `wave`. Fails when the wave hits the back face (k.n >= 0).
pub fn surface_current(wave: &PlaneWave, normal: Vec3) -> Result<SurfaceCurrent, ScatteringError> {
    let dot = wave.travel.dot(normal);
    if dot >= 0.0 {
        return Err(ScatteringError::BackfaceIllumination { dot });
    }
    let scale = 2.0 * wave.amplitude / FREE_SPACE_IMPEDANCE;
    Ok(SurfaceCurrent {
        coeff: normal.cross(wave.h_pol) * scale,
        phase_vec: -wave.travel * wave.phase_const,
    })
}

/// Propagate a multi-bounce path with GO: mirror the wave at each plate in
/// turn and track the lit region by projecting it along the reflected travel
/// direction onto the next plate, then clipping against that plate.
///
/// Single-bounce paths bypass this (the plate is entirely illuminated and the
/// incident wave is unchanged). Returns the wave arriving at the final plate
/// and the illuminated region there; `None` means no illumination, a valid
/// zero-contribution result.
pub fn bounce_path(
    wave: &PlaneWave,
    path: ReflectionPath,
    geometry: &TrihedralGeometry,
) -> (PlaneWave, Option<Polygon3>) {
    assert!(path.len() >= 2, "single-bounce paths bypass bounce_path");
    let plates = path.plates();
    let mut w = *wave;
    let mut lit = geometry.plate(plates[0].index()).clone();
    for step in 0..path.len() - 1 {
        let from = plates[step];
        let to = plates[step + 1];
        w = w.reflect(from.normal());
        let target = geometry.plate(to.index());
        let projected = match project_polygon(&lit, w.travel, target) {
            Ok(p) => p,
            Err(_) => return (w, None), // grazing propagation, nothing arrives
        };
        match clip_polygons(&projected, target) {
            Ok(Some(region)) => lit = region,
            _ => return (w, None),
        }
    }
    (w, Some(lit))
}

// ---------------------------------------------------------------------------
// Exact integral of a linear-phase exponential over a polygon
// ---------------------------------------------------------------------------

/// Exact integral of exp(j q.r) dA over a planar convex polygon, by fan
/// triangulation and the closed form for a linear phase over a triangle.
pub fn polygon_phase_integral(poly: &Polygon3, q: Vec3) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for tri in poly.triangles() {
        acc += triangle_phase_integral(&tri, q);
    }
    acc
}

fn triangle_phase_integral(tri: &[Vec3; 3], q: Vec3) -> Complex64 {
    let e1 = tri[1] - tri[0];
    let e2 = tri[2] - tri[0];
    let area = 0.5 * e1.cross(e2).norm();
    let phi0 = q.dot(tri[0]);
    let a = q.dot(e1);
    let b = q.dot(e2);
    Complex64::from_polar(2.0 * area, phi0) * simplex_phase_kernel(a, b)
}

/// J(a, b) = int_0^1 int_0^{1-s} exp(j (s a + t b)) dt ds.
/// Symmetric in (a, b); equals 1/2 at a = b = 0.
fn simplex_phase_kernel(a: f64, b: f64) -> Complex64 {
    if a.abs() <= 0.8 && b.abs() <= 0.8 {
        // Power series: sum_k j^k sigma_k / (k+2)!, sigma_k = sum a^i b^(k-i).
        let mut sum = Complex64::new(0.0, 0.0);
        let mut sigma = 1.0; // sigma_0
        let mut jk = Complex64::new(1.0, 0.0);
        let mut fact = 2.0; // (k+2)! running value
        let mut bk = 1.0; // b^k
        for k in 0..24u32 {
            sum += jk * (sigma / fact);
            jk *= Complex64::new(0.0, 1.0);
            bk *= b;
            sigma = a * sigma + bk;
            fact *= (k + 3) as f64;
        }
        return sum;
    }
    // Use the larger magnitude as the explicit divisor (J is symmetric).
    let (a, b) = if b.abs() >= a.abs() { (a, b) } else { (b, a) };
    let jb = Complex64::new(0.0, b);
    let e_jb = Complex64::from_polar(1.0, b);
    (e_jb * phi1(Complex64::new(0.0, a - b)) - phi1(Complex64::new(0.0, a))) / jb
}

/// phi1(z) = (exp(z) - 1) / z, stable near z = 0.
fn phi1(z: Complex64) -> Complex64 {
    if z.norm() < 0.5 {
        let mut sum = Complex64::new(0.0, 0.0);
        let mut term = Complex64::new(1.0, 0.0);
        for k in 1..=18u32 {
            sum += term;
            term = term * z / (k + 1) as f64;
        }
        sum
    } else {
        (z.exp() - 1.0) / z
    }
}

// ---------------------------------------------------------------------------
// Closed-form far-field integrals
// ---------------------------------------------------------------------------

/// Far-field integrals N_theta, N_phi of one reflection path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FarFieldComponents {
    pub n_theta: Complex64,
    pub n_phi: Complex64,
}

impl FarFieldComponents {
    pub const ZERO: FarFieldComponents = FarFieldComponents {
        n_theta: Complex64::new(0.0, 0.0),
        n_phi: Complex64::new(0.0, 0.0),
    };
}

/// Trig coefficients (J.theta_hat, J.phi_hat) of the final-plate current for
/// each path, in units of 2 A / Z0. Derived by carrying the incident wave
/// through the GO mirrors and dotting 2 n x h against the spherical unit
/// vectors; single- and triple-bounce theta components cancel identically.
fn path_coefficients(path: ReflectionPath, angles: BoresightAngles) -> (f64, f64) {
    let (s, c) = angles.incidence_prime.sin_cos();
    let (sp, cp) = angles.azimuth_prime.sin_cos();
    let cos2p = (2.0 * angles.azimuth_prime).cos();
    match path.label().as_str() {
        "1" => (0.0, c),
        "2" => (0.0, s * cp),
        "3" => (0.0, s * sp),
        "12" => (-2.0 * s * c * sp, -s * cp),
        "21" => (-2.0 * c * c * sp * cp, -c * cos2p),
        "13" => (2.0 * s * c * cp, -s * sp),
        "31" => (2.0 * c * c * sp * cp, c * cos2p),
        "23" => (-2.0 * s * c * cp, s * sp),
        "32" => (2.0 * s * c * sp, s * cp),
        "123" | "213" => (0.0, -s * sp),
        "132" | "312" => (0.0, -s * cp),
        "231" | "321" => (0.0, -c),
        other => unreachable!("unknown path {other}"),
    }
}

/// Closed-form far-field integrals of one path over its illuminated region.
///
/// The integrand phase k L - k k_p.r collapses to a constant linear phase
/// q = k (look - k_p) over the final plate, so N = (2A/Z0) C * int exp(j q.r).
pub fn far_field_components(
    path: ReflectionPath,
    angles: BoresightAngles,
    geometry: &TrihedralGeometry,
    amplitude: f64,
    phase_const: f64,
) -> FarFieldComponents {
    if !angles.in_window() {
        return FarFieldComponents::ZERO;
    }
    let incident = incident_wave(angles, amplitude, phase_const);
    let (wave, lit) = if path.len() == 1 {
        let plate = geometry.plate(path.final_plate().index()).clone();
        (incident, Some(plate))
    } else {
        bounce_path(&incident, path, geometry)
    };
    let Some(lit) = lit else {
        return FarFieldComponents::ZERO;
    };
    // Zero contribution when the final plate front face is not illuminated.
    if wave.travel.dot(path.final_plate().normal()) >= 0.0 {
        return FarFieldComponents::ZERO;
    }
    let q = (look_vector(angles) - wave.travel) * phase_const;
    let integral = polygon_phase_integral(&lit, q);
    let scale = 2.0 * amplitude / FREE_SPACE_IMPEDANCE;
    let (c_theta, c_phi) = path_coefficients(path, angles);
    FarFieldComponents {
        n_theta: integral * (scale * c_theta),
        n_phi: integral * (scale * c_phi),
    }
}

/// Total backscattered field amplitudes at the receiver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScatterResult {
    pub e_theta: Complex64,
    pub e_phi: Complex64,
    pub amplitude_magnitude: f64,
}

impl ScatterResult {
    pub const ZERO: ScatterResult = ScatterResult {
        e_theta: Complex64::new(0.0, 0.0),
        e_phi: Complex64::new(0.0, 0.0),
        amplitude_magnitude: 0.0,
    };
}

/// Sum the fifteen paths: E_p = (-j k Z0 N_p / 4 pi) exp(-j k r) / r, then
/// |A_r|^2 = |E_theta|^2 + |E_phi|^2. Angles outside [0, pi/2]^2 scatter
/// nothing.
pub fn total_scatter(
    angles: BoresightAngles,
    geometry: &TrihedralGeometry,
    range: f64,
    amplitude: f64,
    phase_const: f64,
) -> ScatterResult {
    assert!(range > 0.0, "range must be positive");
    if !angles.in_window() {
        return ScatterResult::ZERO;
    }
    let mut n_theta = Complex64::new(0.0, 0.0);
    let mut n_phi = Complex64::new(0.0, 0.0);
    for path in ALL_PATHS {
        let ff = far_field_components(path, angles, geometry, amplitude, phase_const);
        n_theta += ff.n_theta;
        n_phi += ff.n_phi;
    }
    let prefactor = Complex64::new(0.0, -phase_const * FREE_SPACE_IMPEDANCE)
        / (4.0 * std::f64::consts::PI)
        * Complex64::from_polar(1.0 / range, -phase_const * range);
    let e_theta = prefactor * n_theta;
    let e_phi = prefactor * n_phi;
    ScatterResult {
        e_theta,
        e_phi,
        amplitude_magnitude: (e_theta.norm_sqr() + e_phi.norm_sqr()).sqrt(),
    }
}
