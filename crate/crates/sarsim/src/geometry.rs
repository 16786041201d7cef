//! Coordinate frames, aspect-angle transforms, the SAR platform trajectory,
//! trihedral plate geometry, and the convex polygon projection/clipping
//! machinery used by the multi-bounce illumination model.
//!
//! All angles are radians. Degrees are accepted only at the CLI boundary.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use thiserror::Error;

/// Coplanarity tolerance in meters for polygon support planes.
pub const PLANE_TOL: f64 = 1e-9;
/// Parallelism tolerance for |direction . normal| in projections.
pub const PARALLEL_TOL: f64 = 1e-12;

/// Boresight incidence of a trihedral: the interior-diagonal angle arctan(sqrt(2)).
pub fn boresight_incidence() -> f64 {
    2.0_f64.sqrt().atan()
}

#[derive(Debug, Error, PartialEq)]
pub enum GeometryError {
    #[error("projection direction is parallel to the target plane (|d.n| = {dot_abs:e})")]
    DegenerateProjection { dot_abs: f64 },
    #[error("polygons are not coplanar (separation {separation:e} m)")]
    NotCoplanar { separation: f64 },
    #[error("polygon needs at least 3 vertices, got {0}")]
    TooFewVertices(usize),
    #[error("vertex {index} is {distance:e} m off the support plane")]
    NonPlanar { index: usize, distance: f64 },
    #[error("angle {name} = {value} outside [{lo}, {hi}]")]
    AngleOutOfRange {
        name: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },
    #[error("{name} must be positive, got {value}")]
    NonPositive { name: &'static str, value: f64 },
}

// ---------------------------------------------------------------------------
// Vectors
// ---------------------------------------------------------------------------

/// 3D vector in meters (or dimensionless for directions).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub const ZERO: Vec3 = Vec3::new(0.0, 0.0, 0.0);
    pub const X: Vec3 = Vec3::new(1.0, 0.0, 0.0);
    pub const Y: Vec3 = Vec3::new(0.0, 1.0, 0.0);
    pub const Z: Vec3 = Vec3::new(0.0, 0.0, 1.0);

    pub fn dot(self, o: Vec3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(self, o: Vec3) -> Vec3 {
        Vec3::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn normalized(self) -> Vec3 {
        let n = self.norm();
        Vec3::new(self.x / n, self.y / n, self.z / n)
    }

    /// Mirror across the plane through the origin with unit normal `n`.
    pub fn mirror(self, n: Vec3) -> Vec3 {
        self - n * (2.0 * self.dot(n))
    }
}

impl std::ops::Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl std::ops::Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl std::ops::Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl std::ops::Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

// ---------------------------------------------------------------------------
// Angles
// ---------------------------------------------------------------------------

/// Aspect angles of the platform relative to the scene: incidence (off-vertical
/// look angle) in [0, pi/2] and azimuth normalized to [0, 2*pi).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AspectAngles {
    incidence: f64,
    azimuth: f64,
}

impl AspectAngles {
    pub fn new(incidence: f64, azimuth: f64) -> Result<Self, GeometryError> {
        if !(0.0..=FRAC_PI_2).contains(&incidence) {
            return Err(GeometryError::AngleOutOfRange {
                name: "incidence",
                value: incidence,
                lo: 0.0,
                hi: FRAC_PI_2,
            });
        }
        Ok(Self {
            incidence,
            azimuth: wrap_angle(azimuth),
        })
    }

    pub fn from_degrees(incidence_deg: f64, azimuth_deg: f64) -> Result<Self, GeometryError> {
        Self::new(incidence_deg.to_radians(), azimuth_deg.to_radians())
    }

    pub fn incidence(&self) -> f64 {
        self.incidence
    }

    pub fn azimuth(&self) -> f64 {
        self.azimuth
    }
}

/// Wrap an angle to [0, 2*pi).
pub fn wrap_angle(a: f64) -> f64 {
    let mut r = a % TAU;
    if r < 0.0 {
        r += TAU;
    }
    // -1e-17 % TAU can round to TAU itself.
    if r >= TAU {
        r -= TAU;
    }
    r
}

/// Aspect angles expressed relative to a reflector boresight. Scattering is
/// defined as zero unless both lie in [0, pi/2]; no clamping happens here.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoresightAngles {
    pub incidence_prime: f64,
    pub azimuth_prime: f64,
}

impl BoresightAngles {
    /// True when the angles fall in the scattering window [0, pi/2]^2.
    /// Azimuth is periodic, so it is wrapped before the test.
    pub fn in_window(&self) -> bool {
        let phi = wrap_angle(self.azimuth_prime);
        (0.0..=FRAC_PI_2).contains(&self.incidence_prime) && phi <= FRAC_PI_2
    }
}

/// phi' = phi_a - (phi - pi/4), theta' = theta_a - (theta - arctan(sqrt(2))).
pub fn to_boresight_frame(
    aspect: AspectAngles,
    boresight_incidence_angle: f64,
    boresight_azimuth_angle: f64,
) -> BoresightAngles {
    BoresightAngles {
        incidence_prime: aspect.incidence() - (boresight_incidence_angle - boresight_incidence()),
        azimuth_prime: aspect.azimuth() - (boresight_azimuth_angle - PI / 4.0),
    }
}

// ---------------------------------------------------------------------------
// Platform trajectory
// ---------------------------------------------------------------------------

/// Straight flight track perpendicular to the line of sight at standoff range
/// r0, parameterized by slow time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlatformPath {
    pub standoff_range: f64,
    pub speed: f64,
    pub azimuth: f64,
    pub incidence: f64,
}

impl PlatformPath {
    pub fn new(
        standoff_range: f64,
        speed: f64,
        azimuth: f64,
        incidence: f64,
    ) -> Result<Self, GeometryError> {
        if standoff_range <= 0.0 {
            return Err(GeometryError::NonPositive {
                name: "standoff_range",
                value: standoff_range,
            });
        }
        if speed <= 0.0 {
            return Err(GeometryError::NonPositive {
                name: "speed",
                value: speed,
            });
        }
        Ok(Self {
            standoff_range,
            speed,
            azimuth,
            incidence,
        })
    }

    pub fn from_aspect(
        standoff_range: f64,
        speed: f64,
        aspect: AspectAngles,
    ) -> Result<Self, GeometryError> {
        Self::new(standoff_range, speed, aspect.azimuth(), aspect.incidence())
    }

    /// Platform position at slow time eta: the rotation by the azimuth angle of
    /// the column (r0 sin(theta_a), eta*v, r0 cos(theta_a)).
    pub fn position(&self, slow_time: f64) -> Vec3 {
        let (s_phi, c_phi) = self.azimuth.sin_cos();
        let (s_th, c_th) = self.incidence.sin_cos();
        let col = Vec3::new(
            self.standoff_range * s_th,
            slow_time * self.speed,
            self.standoff_range * c_th,
        );
        Vec3::new(
            c_phi * col.x - s_phi * col.y,
            s_phi * col.x + c_phi * col.y,
            col.z,
        )
    }
}

// ---------------------------------------------------------------------------
// Planes and polygons
// ---------------------------------------------------------------------------

/// Plane x.n = offset with unit normal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Plane {
    pub normal: Vec3,
    pub offset: f64,
}

impl Plane {
    pub fn new(normal: Vec3, offset: f64) -> Self {
        let n = normal.normalized();
        Self { normal: n, offset }
    }

    pub fn distance(&self, p: Vec3) -> f64 {
        self.normal.dot(p) - self.offset
    }

    /// An orthonormal in-plane basis (u, v) with u x v = normal.
    pub fn basis(&self) -> (Vec3, Vec3) {
        let n = self.normal;
        let seed = if n.x.abs() < 0.9 { Vec3::X } else { Vec3::Y };
        let u = seed.cross(n).normalized();
        let v = n.cross(u);
        (u, v)
    }
}

/// Planar convex polygon in 3D: ordered vertices on a support plane, wound
/// counterclockwise about the plane normal.
#[derive(Debug, Clone, PartialEq)]
pub struct Polygon3 {
    vertices: Vec<Vec3>,
    plane: Plane,
}

impl Polygon3 {
    /// Build from vertices; the support plane normal comes from Newell's rule,
    /// so winding in the input fixes the normal direction.
    pub fn new(vertices: Vec<Vec3>) -> Result<Self, GeometryError> {
        if vertices.len() < 3 {
            return Err(GeometryError::TooFewVertices(vertices.len()));
        }
        let mut normal = Vec3::ZERO;
        for i in 0..vertices.len() {
            let a = vertices[i];
            let b = vertices[(i + 1) % vertices.len()];
            normal = normal
                + Vec3::new(
                    (a.y - b.y) * (a.z + b.z),
                    (a.z - b.z) * (a.x + b.x),
                    (a.x - b.x) * (a.y + b.y),
                );
        }
        let normal = normal.normalized();
        let offset = normal.dot(vertices[0]);
        let plane = Plane { normal, offset };
        Self::on_plane(vertices, plane)
    }

    /// Build on an explicit support plane; vertices are reordered to wind
    /// counterclockwise about `plane.normal` and checked for planarity.
    pub fn on_plane(mut vertices: Vec<Vec3>, plane: Plane) -> Result<Self, GeometryError> {
        if vertices.len() < 3 {
            return Err(GeometryError::TooFewVertices(vertices.len()));
        }
        for (i, v) in vertices.iter().enumerate() {
            let d = plane.distance(*v).abs();
            if d > PLANE_TOL {
                return Err(GeometryError::NonPlanar {
                    index: i,
                    distance: d,
                });
            }
        }
        if signed_area(&vertices, plane.normal) < 0.0 {
            vertices.reverse();
        }
        Ok(Self { vertices, plane })
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn plane(&self) -> Plane {
        self.plane
    }

    pub fn normal(&self) -> Vec3 {
        self.plane.normal
    }

    pub fn area(&self) -> f64 {
        signed_area(&self.vertices, self.plane.normal).abs()
    }

    pub fn centroid(&self) -> Vec3 {
        let mut c = Vec3::ZERO;
        for v in &self.vertices {
            c = c + *v;
        }
        c * (1.0 / self.vertices.len() as f64)
    }

    /// Fan triangulation about the first vertex. Valid because every polygon
    /// produced by this module is convex.
    pub fn triangles(&self) -> Vec<[Vec3; 3]> {
        let v = &self.vertices;
        (1..v.len() - 1).map(|i| [v[0], v[i], v[i + 1]]).collect()
    }
}

fn signed_area(vertices: &[Vec3], normal: Vec3) -> f64 {
    let mut acc = Vec3::ZERO;
    let origin = vertices[0];
    for i in 1..vertices.len() - 1 {
        let a = vertices[i] - origin;
        let b = vertices[i + 1] - origin;
        acc = acc + a.cross(b);
    }
    0.5 * acc.dot(normal)
}

/// Square trihedral corner reflector: three mutually orthogonal plates of side
/// `plate_side` sharing the corner at the origin of the reflector frame.
/// Plate 1 lies in the x-y plane, plate 2 in the y-z plane, plate 3 in the
/// x-z plane; front-face normals point into the interior octant.
#[derive(Debug, Clone, PartialEq)]
pub struct TrihedralGeometry {
    plate_side: f64,
    plates: [Polygon3; 3],
}

impl TrihedralGeometry {
    pub fn new(plate_side: f64) -> Result<Self, GeometryError> {
        if plate_side <= 0.0 {
            return Err(GeometryError::NonPositive {
                name: "plate_side",
                value: plate_side,
            });
        }
        let a = plate_side;
        let p1 = Polygon3::on_plane(
            vec![
                Vec3::ZERO,
                Vec3::new(a, 0.0, 0.0),
                Vec3::new(a, a, 0.0),
                Vec3::new(0.0, a, 0.0),
            ],
            Plane {
                normal: Vec3::Z,
                offset: 0.0,
            },
        )?;
        let p2 = Polygon3::on_plane(
            vec![
                Vec3::ZERO,
                Vec3::new(0.0, a, 0.0),
                Vec3::new(0.0, a, a),
                Vec3::new(0.0, 0.0, a),
            ],
            Plane {
                normal: Vec3::X,
                offset: 0.0,
            },
        )?;
        let p3 = Polygon3::on_plane(
            vec![
                Vec3::ZERO,
                Vec3::new(0.0, 0.0, a),
                Vec3::new(a, 0.0, a),
                Vec3::new(a, 0.0, 0.0),
            ],
            Plane {
                normal: Vec3::Y,
                offset: 0.0,
            },
        )?;
        Ok(Self {
            plate_side,
            plates: [p1, p2, p3],
        })
    }

    pub fn plate_side(&self) -> f64 {
        self.plate_side
    }

    /// Plate by 1-based index (1, 2, 3).
    pub fn plate(&self, index: usize) -> &Polygon3 {
        &self.plates[index - 1]
    }

    pub fn plates(&self) -> &[Polygon3; 3] {
        &self.plates
    }
}

// ---------------------------------------------------------------------------
// Projection and clipping
// ---------------------------------------------------------------------------

/// Move each vertex of `source` along `direction` onto the support plane of
/// `target`. Vertex order (and hence winding) is preserved.
pub fn project_polygon(
    source: &Polygon3,
    direction: Vec3,
    target: &Polygon3,
) -> Result<Polygon3, GeometryError> {
    let d = direction.normalized();
    let plane = target.plane();
    let denom = d.dot(plane.normal);
    if denom.abs() <= PARALLEL_TOL {
        return Err(GeometryError::DegenerateProjection {
            dot_abs: denom.abs(),
        });
    }
    let projected = source
        .vertices()
        .iter()
        .map(|&v| {
            let t = (plane.offset - plane.normal.dot(v)) / denom;
            v + d * t
        })
        .collect();
    Polygon3::on_plane(projected, plane)
}

/// Convex intersection of two coplanar polygons (Sutherland-Hodgman).
/// Returns `None` when the intersection has zero area.
pub fn clip_polygons(
    subject: &Polygon3,
    clip: &Polygon3,
) -> Result<Option<Polygon3>, GeometryError> {
    let plane = clip.plane();
    let mut max_sep: f64 = 0.0;
    for &v in subject.vertices() {
        max_sep = max_sep.max(plane.distance(v).abs());
    }
    if max_sep > PLANE_TOL {
        return Err(GeometryError::NotCoplanar {
            separation: max_sep,
        });
    }

    let (u, v) = plane.basis();
    let to2 = |p: Vec3| -> (f64, f64) { (u.dot(p), v.dot(p)) };
    let anchor = plane.normal * plane.offset;

    let mut points: Vec<(f64, f64)> = subject.vertices().iter().map(|&p| to2(p)).collect();
    let clip2: Vec<(f64, f64)> = clip.vertices().iter().map(|&p| to2(p)).collect();

    for i in 0..clip2.len() {
        if points.is_empty() {
            break;
        }
        let a = clip2[i];
        let b = clip2[(i + 1) % clip2.len()];
        // Inside = left of directed edge a->b (clip polygon is CCW).
        let inside = |p: (f64, f64)| (b.0 - a.0) * (p.1 - a.1) - (b.1 - a.1) * (p.0 - a.0) >= 0.0;
        let mut out = Vec::with_capacity(points.len() + 1);
        let mut prev = *points.last().unwrap();
        let mut prev_in = inside(prev);
        for p in points {
            let p_in = inside(p);
            if p_in != prev_in {
                out.push(edge_intersection(prev, p, a, b));
            }
            if p_in {
                out.push(p);
            }
            prev = p;
            prev_in = p_in;
        }
        points = out;
    }

    dedup_2d(&mut points);
    if points.len() < 3 {
        return Ok(None);
    }
    let verts3: Vec<Vec3> = points
        .iter()
        .map(|&(pu, pv)| anchor + u * pu + v * pv)
        .collect();
    let poly = Polygon3::on_plane(verts3, plane)?;
    if poly.area() < 1e-15 {
        return Ok(None);
    }
    Ok(Some(poly))
}

fn edge_intersection(
    p: (f64, f64),
    q: (f64, f64),
    a: (f64, f64),
    b: (f64, f64),
) -> (f64, f64) {
    let num_p = (b.0 - a.0) * (p.1 - a.1) - (b.1 - a.1) * (p.0 - a.0);
    let num_q = (b.0 - a.0) * (q.1 - a.1) - (b.1 - a.1) * (q.0 - a.0);
    let t = num_p / (num_p - num_q);
    (p.0 + t * (q.0 - p.0), p.1 + t * (q.1 - p.1))
}

fn dedup_2d(points: &mut Vec<(f64, f64)>) {
    if points.len() < 2 {
        return;
    }
    let mut out: Vec<(f64, f64)> = Vec::with_capacity(points.len());
    for &p in points.iter() {
        if let Some(&last) = out.last() {
            if (p.0 - last.0).abs() < 1e-12 && (p.1 - last.1).abs() < 1e-12 {
                continue;
            }
        }
        out.push(p);
    }
    if out.len() >= 2 {
        let first = out[0];
        let last = *out.last().unwrap();
        if (first.0 - last.0).abs() < 1e-12 && (first.1 - last.1).abs() < 1e-12 {
            out.pop();
        }
    }
    *points = out;
}
