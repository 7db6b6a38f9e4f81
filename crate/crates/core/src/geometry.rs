//! Billiard domains and exact ray-boundary collision queries.
//!
//! Collisions are solved in closed form (line/circle quadratics); among the
//! candidate intersection times we keep the smallest one exceeding
//! `eps_t = 1e-12 * diameter / speed`, which prevents immediate re-collision
//! with the wall the ray just left.

use crate::error::{Error, Result};
use crate::vec2::Vec2;
use rand::Rng;

/// Relative tolerance on |direction| for [`Ray`].
pub const UNIT_TOL: f64 = 1e-12;
/// Grazing-incidence threshold: |v.n| < GRAZE_TOL * |v| raises `Tangency`.
pub const GRAZE_TOL: f64 = 1e-9;
/// Collision points within CORNER_TOL * diameter of a corner raise `Tangency`.
pub const CORNER_TOL: f64 = 1e-9;

/// Two-dimensional billiard table.
///
/// Conventions: `Rectangle` spans `[0, lx] x [0, ly]`; `Disk` is centered at
/// the origin; `Stadium` has straight walls at `y = +-r` for `x` in `[-a, a]`
/// with end caps centered at `(+-a, 0)`; `Sinai` is the square `[0, l]^2`
/// with a reflecting disk of radius `r` at the center.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BilliardDomain {
    Rectangle { lx: f64, ly: f64 },
    Disk { r: f64 },
    Stadium { a: f64, r: f64 },
    Sinai { l: f64, r: f64 },
}

impl BilliardDomain {
    pub fn rectangle(lx: f64, ly: f64) -> Result<Self> {
        let d = BilliardDomain::Rectangle { lx, ly };
        d.validate()?;
        Ok(d)
    }

    pub fn disk(r: f64) -> Result<Self> {
        let d = BilliardDomain::Disk { r };
        d.validate()?;
        Ok(d)
    }

    pub fn stadium(a: f64, r: f64) -> Result<Self> {
        let d = BilliardDomain::Stadium { a, r };
        d.validate()?;
        Ok(d)
    }

    pub fn sinai(l: f64, r: f64) -> Result<Self> {
        let d = BilliardDomain::Sinai { l, r };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |x: f64| x.is_finite() && x > 0.0;
        match *self {
            BilliardDomain::Rectangle { lx, ly } => {
                if !ok(lx) || !ok(ly) {
                    return Err(Error::InvalidDomain(format!(
                        "rectangle sides must be positive, got lx={lx}, ly={ly}"
                    )));
                }
            }
            BilliardDomain::Disk { r } => {
                if !ok(r) {
                    return Err(Error::InvalidDomain(format!(
                        "disk radius must be positive, got r={r}"
                    )));
                }
            }
            BilliardDomain::Stadium { a, r } => {
                if !ok(a) || !ok(r) {
                    return Err(Error::InvalidDomain(format!(
                        "stadium parameters must be positive, got a={a}, r={r}"
                    )));
                }
            }
            BilliardDomain::Sinai { l, r } => {
                if !ok(l) || !ok(r) {
                    return Err(Error::InvalidDomain(format!(
                        "sinai parameters must be positive, got l={l}, r={r}"
                    )));
                }
                if 2.0 * r >= l {
                    return Err(Error::InvalidDomain(format!(
                        "sinai requires 2r < l, got l={l}, r={r}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Analytic area of the table.
    pub fn area(&self) -> f64 {
        match *self {
            BilliardDomain::Rectangle { lx, ly } => lx * ly,
            BilliardDomain::Disk { r } => std::f64::consts::PI * r * r,
            BilliardDomain::Stadium { a, r } => 4.0 * a * r + std::f64::consts::PI * r * r,
            BilliardDomain::Sinai { l, r } => l * l - std::f64::consts::PI * r * r,
        }
    }

    pub fn perimeter(&self) -> f64 {
        match *self {
            BilliardDomain::Rectangle { lx, ly } => 2.0 * (lx + ly),
            BilliardDomain::Disk { r } => 2.0 * std::f64::consts::PI * r,
            BilliardDomain::Stadium { a, r } => 4.0 * a + 2.0 * std::f64::consts::PI * r,
            BilliardDomain::Sinai { l, r } => 4.0 * l + 2.0 * std::f64::consts::PI * r,
        }
    }

    /// Length of the longest chord, used to set absolute length scales.
    pub fn diameter(&self) -> f64 {
        match *self {
            BilliardDomain::Rectangle { lx, ly } => lx.hypot(ly),
            BilliardDomain::Disk { r } => 2.0 * r,
            BilliardDomain::Stadium { a, r } => 2.0 * (a + r),
            BilliardDomain::Sinai { l, .. } => l * std::f64::consts::SQRT_2,
        }
    }

    /// Center of the bounding box. For the Sinai table this point is inside
    /// the central disk, hence not a valid interior point.
    pub fn centroid(&self) -> Vec2 {
        match *self {
            BilliardDomain::Rectangle { lx, ly } => Vec2::new(lx / 2.0, ly / 2.0),
            BilliardDomain::Disk { .. } | BilliardDomain::Stadium { .. } => Vec2::ZERO,
            BilliardDomain::Sinai { l, .. } => Vec2::new(l / 2.0, l / 2.0),
        }
    }

    pub fn bounding_box(&self) -> (Vec2, Vec2) {
        match *self {
            BilliardDomain::Rectangle { lx, ly } => (Vec2::ZERO, Vec2::new(lx, ly)),
            BilliardDomain::Disk { r } => (Vec2::new(-r, -r), Vec2::new(r, r)),
            BilliardDomain::Stadium { a, r } => (Vec2::new(-a - r, -r), Vec2::new(a + r, r)),
            BilliardDomain::Sinai { l, .. } => (Vec2::ZERO, Vec2::new(l, l)),
        }
    }

    /// Closed-domain membership test with an absolute tolerance `tol`
    /// (positive `tol` grows the domain).
    pub fn contains_tol(&self, q: Vec2, tol: f64) -> bool {
        match *self {
            BilliardDomain::Rectangle { lx, ly } => {
                q.x >= -tol && q.x <= lx + tol && q.y >= -tol && q.y <= ly + tol
            }
            BilliardDomain::Disk { r } => q.norm() <= r + tol,
            BilliardDomain::Stadium { a, r } => {
                if q.x.abs() <= a {
                    q.y.abs() <= r + tol
                } else {
                    let cx = if q.x > 0.0 { a } else { -a };
                    q.distance(Vec2::new(cx, 0.0)) <= r + tol
                }
            }
            BilliardDomain::Sinai { l, r } => {
                let in_square = q.x >= -tol && q.x <= l + tol && q.y >= -tol && q.y <= l + tol;
                let c = Vec2::new(l / 2.0, l / 2.0);
                in_square && q.distance(c) >= r - tol
            }
        }
    }

    pub fn contains(&self, q: Vec2) -> bool {
        self.contains_tol(q, 0.0)
    }

    /// Uniform point in the interior, by rejection from the bounding box.
    pub fn sample_uniform_point<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec2 {
        let (lo, hi) = self.bounding_box();
        loop {
            let q = Vec2::new(rng.gen_range(lo.x..hi.x), rng.gen_range(lo.y..hi.y));
            if self.contains(q) {
                return q;
            }
        }
    }
}

/// Interior point moving with a given speed along a unit direction.
#[derive(Clone, Copy, Debug)]
pub struct Ray {
    pub origin: Vec2,
    pub direction: Vec2,
    pub speed: f64,
}

impl Ray {
    pub fn new(origin: Vec2, direction: Vec2, speed: f64) -> Result<Self> {
        if (direction.norm() - 1.0).abs() > UNIT_TOL {
            return Err(Error::InvalidInput(format!(
                "ray direction must be unit length, |d| = {}",
                direction.norm()
            )));
        }
        if !(speed > 0.0 && speed.is_finite()) {
            return Err(Error::InvalidInput(format!("ray speed must be positive, got {speed}")));
        }
        Ok(Ray { origin, direction, speed })
    }

    pub fn from_velocity(origin: Vec2, velocity: Vec2) -> Result<Self> {
        let speed = velocity.norm();
        if !(speed > 0.0 && speed.is_finite()) {
            return Err(Error::InvalidInput("ray velocity must be nonzero".into()));
        }
        Ok(Ray { origin, direction: velocity / speed, speed })
    }

    pub fn velocity(&self) -> Vec2 {
        self.direction * self.speed
    }
}

/// First wall hit of a ray: flight time, boundary point, inward unit normal.
#[derive(Clone, Copy, Debug)]
pub struct CollisionEvent {
    pub time: f64,
    pub point: Vec2,
    pub normal: Vec2,
}

/// Specular reflection of `v` at a wall with inward unit normal `n`.
pub fn reflect(v: Vec2, n: Vec2) -> Result<Vec2> {
    let vn = v.dot(n);
    if vn >= 0.0 {
        return Err(Error::NotIncoming(vn));
    }
    Ok(v - n * (2.0 * vn))
}

struct Candidate {
    time: f64,
    point: Vec2,
    normal: Vec2,
}

/// Time to the axis-aligned wall `coord = value`, if the ray moves toward it.
fn wall_candidate(ray: &Ray, axis: usize, value: f64, normal: Vec2, eps_t: f64) -> Option<Candidate> {
    let (o, d) = match axis {
        0 => (ray.origin.x, ray.direction.x),
        _ => (ray.origin.y, ray.direction.y),
    };
    let vd = d * ray.speed;
    if vd == 0.0 {
        return None;
    }
    let t = (value - o) / vd;
    if t <= eps_t {
        return None;
    }
    let mut point = ray.origin + ray.velocity() * t;
    // Snap the hit coordinate exactly onto the wall.
    match axis {
        0 => point.x = value,
        _ => point.y = value,
    }
    Some(Candidate { time: t, point, normal })
}

/// Intersections with the circle |q - center| = radius, as flight times.
/// Returns up to two roots in increasing order.
fn circle_times(ray: &Ray, center: Vec2, radius: f64) -> [Option<f64>; 2] {
    let w = ray.origin - center;
    let v = ray.velocity();
    let a = v.norm_sq();
    let b = w.dot(v);
    let c = w.norm_sq() - radius * radius;
    let disc = b * b - a * c;
    if disc <= 0.0 {
        return [None, None];
    }
    let s = disc.sqrt();
    // Numerically stable quadratic roots.
    let q = if b >= 0.0 { -(b + s) } else { -(b - s) };
    let (mut t1, mut t2) = (q / a, c / q);
    if t1 > t2 {
        std::mem::swap(&mut t1, &mut t2);
    }
    [Some(t1), Some(t2)]
}

fn circle_candidate(
    ray: &Ray,
    center: Vec2,
    radius: f64,
    t: f64,
    inward_is_radial: bool,
    eps_t: f64,
) -> Option<Candidate> {
    if t <= eps_t {
        return None;
    }
    let raw = ray.origin + ray.velocity() * t;
    // Snap the point exactly onto the circle to bound drift over many bounces.
    let point = center + (raw - center).normalized() * radius;
    let radial = (point - center) / radius;
    let normal = if inward_is_radial { radial } else { -radial };
    Some(Candidate { time: t, point, normal })
}

/// First boundary collision of `ray` inside `domain`.
///
/// Errors with [`Error::Tangency`] on grazing incidence at a curved wall or a
/// corner hit (caller resamples), and with [`Error::OutsideDomain`] if the ray
/// origin is not in the domain.
pub fn next_collision(domain: &BilliardDomain, ray: &Ray) -> Result<CollisionEvent> {
    domain.validate()?;
    let diam = domain.diameter();
    if !domain.contains_tol(ray.origin, GRAZE_TOL * diam) {
        return Err(Error::OutsideDomain(ray.origin));
    }
    let eps_t = 1e-12 * diam / ray.speed;

    let mut candidates: Vec<Candidate> = Vec::with_capacity(4);
    match *domain {
        BilliardDomain::Rectangle { lx, ly } => {
            candidates.extend(wall_candidate(ray, 0, 0.0, Vec2::new(1.0, 0.0), eps_t));
            candidates.extend(wall_candidate(ray, 0, lx, Vec2::new(-1.0, 0.0), eps_t));
            candidates.extend(wall_candidate(ray, 1, 0.0, Vec2::new(0.0, 1.0), eps_t));
            candidates.extend(wall_candidate(ray, 1, ly, Vec2::new(0.0, -1.0), eps_t));
        }
        BilliardDomain::Disk { r } => {
            // Origin inside: the larger root is the forward hit.
            if let [_, Some(t)] = circle_times(ray, Vec2::ZERO, r) {
                candidates.extend(circle_candidate(ray, Vec2::ZERO, r, t, false, eps_t));
            }
        }
        BilliardDomain::Stadium { a, r } => {
            let seam_tol = GRAZE_TOL * r;
            for c in [
                wall_candidate(ray, 1, r, Vec2::new(0.0, -1.0), eps_t),
                wall_candidate(ray, 1, -r, Vec2::new(0.0, 1.0), eps_t),
            ]
            .into_iter()
            .flatten()
            {
                // Straight walls exist only for |x| <= a; beyond the seam the
                // boundary is the cap, which is hit earlier.
                if c.point.x.abs() <= a + seam_tol {
                    candidates.push(c);
                }
            }
            for side in [1.0, -1.0] {
                let center = Vec2::new(side * a, 0.0);
                for t in circle_times(ray, center, r).into_iter().flatten() {
                    if let Some(c) = circle_candidate(ray, center, r, t, false, eps_t) {
                        // Cap arcs live at x >= a (right) / x <= -a (left);
                        // circle crossings inside the straight section are
                        // interior points, not boundary.
                        if (c.point.x - side * a) * side >= -seam_tol {
                            candidates.push(c);
                        }
                    }
                }
            }
        }
        BilliardDomain::Sinai { l, r } => {
            candidates.extend(wall_candidate(ray, 0, 0.0, Vec2::new(1.0, 0.0), eps_t));
            candidates.extend(wall_candidate(ray, 0, l, Vec2::new(-1.0, 0.0), eps_t));
            candidates.extend(wall_candidate(ray, 1, 0.0, Vec2::new(0.0, 1.0), eps_t));
            candidates.extend(wall_candidate(ray, 1, l, Vec2::new(0.0, -1.0), eps_t));
            let center = Vec2::new(l / 2.0, l / 2.0);
            // Approaching from outside the disk: the first (smaller) root is
            // the physical hit; the exit root is shadowed.
            if let [Some(t), _] = circle_times(ray, center, r) {
                candidates.extend(circle_candidate(ray, center, r, t, true, eps_t));
            }
        }
    }

    let best = candidates
        .into_iter()
        .min_by(|a, b| a.time.total_cmp(&b.time))
        .ok_or(Error::Tangency { grazing: 0.0 })?;

    let grazing = ray.velocity().dot(best.normal).abs() / ray.speed;
    if grazing < GRAZE_TOL {
        return Err(Error::Tangency { grazing });
    }

    // Corner hits on square tables are degenerate reflections.
    let corners: &[Vec2] = match *domain {
        BilliardDomain::Rectangle { lx, ly } => &[
            Vec2::ZERO,
            Vec2::new(lx, 0.0),
            Vec2::new(0.0, ly),
            Vec2::new(lx, ly),
        ],
        BilliardDomain::Sinai { l, .. } => &[
            Vec2::ZERO,
            Vec2::new(l, 0.0),
            Vec2::new(0.0, l),
            Vec2::new(l, l),
        ],
        _ => &[],
    };
    for corner in corners {
        if best.point.distance(*corner) < CORNER_TOL * diam {
            return Err(Error::Tangency { grazing });
        }
    }

    Ok(CollisionEvent {
        time: best.time,
        point: best.point,
        normal: best.normal,
    })
}
