//! Analytic interface description and per-element cut geometry.
//!
//! The interface is a level set `φ(x, y) = 0`. Points with `φ < 0` belong to
//! the inside sub-domain Ω1, points with `φ > 0` to the outside sub-domain Ω2.
//! A triangle crossed by the interface is split by the chord `DE` joining the
//! two boundary intersection points; the curved part of the interface is
//! recovered on demand by bisecting the arc (see [`ElementCut::region_polygon`]).

use nalgebra::{Point2, Vector2};

use crate::error::{Error, Result};

pub type Point = Point2<f64>;
pub type Vector = Vector2<f64>;

/// One of the two sub-domains separated by the interface.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Side {
    /// Ω1, where `φ < 0`.
    Inside,
    /// Ω2, where `φ > 0`.
    Outside,
}

impl Side {
    pub const BOTH: [Side; 2] = [Side::Inside, Side::Outside];

    pub fn index(self) -> usize {
        match self {
            Side::Inside => 0,
            Side::Outside => 1,
        }
    }
}

/// Level-set description of the interface Γ.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LevelSetInterface {
    /// `φ(x, y) = (x − cx)² + (y − cy)² − r²`.
    Circle { center: Point, radius_squared: f64 },
}

impl LevelSetInterface {
    pub fn circle(center: Point, radius_squared: f64) -> Result<Self> {
        if !(radius_squared > 0.0) || !radius_squared.is_finite() {
            return Err(Error::InvalidInterface(format!(
                "radius_squared must be positive, got {radius_squared}"
            )));
        }
        Ok(LevelSetInterface::Circle {
            center,
            radius_squared,
        })
    }

    /// The interface of the reference experiment: `x² + y² = 1/3`.
    pub fn reference_circle() -> Self {
        LevelSetInterface::Circle {
            center: Point::origin(),
            radius_squared: 1.0 / 3.0,
        }
    }

    pub fn center(&self) -> Point {
        match *self {
            LevelSetInterface::Circle { center, .. } => center,
        }
    }

    pub fn radius(&self) -> f64 {
        match *self {
            LevelSetInterface::Circle { radius_squared, .. } => radius_squared.sqrt(),
        }
    }

    pub fn eval(&self, p: &Point) -> f64 {
        match *self {
            LevelSetInterface::Circle {
                center,
                radius_squared,
            } => (p - center).norm_squared() - radius_squared,
        }
    }

    pub fn gradient(&self, p: &Point) -> Vector {
        match *self {
            LevelSetInterface::Circle { center, .. } => 2.0 * (p - center),
        }
    }

    /// Unit normal `∇φ/|∇φ|`, pointing from Ω1 into Ω2.
    pub fn normal(&self, p: &Point) -> Vector {
        self.gradient(p).normalize()
    }

    /// Signed distance to Γ (negative inside).
    pub fn signed_distance(&self, p: &Point) -> f64 {
        match *self {
            LevelSetInterface::Circle { center, .. } => (p - center).norm() - self.radius(),
        }
    }

    pub fn side(&self, p: &Point) -> Side {
        if self.eval(p) < 0.0 {
            Side::Inside
        } else {
            Side::Outside
        }
    }

    /// Parameters `t ∈ (0, 1)` where `φ(a + t (b − a)) = 0`, sorted ascending.
    /// Roots closer than `tol` (in length) to either endpoint are dropped.
    pub fn segment_roots(&self, a: &Point, b: &Point, tol: f64) -> Vec<f64> {
        let LevelSetInterface::Circle {
            center,
            radius_squared,
        } = *self;
        let d = b - a;
        let len = d.norm();
        let qa = d.norm_squared();
        let qb = 2.0 * d.dot(&(a - center));
        let qc = (a - center).norm_squared() - radius_squared;
        let disc = qb * qb - 4.0 * qa * qc;
        if disc <= 0.0 {
            return Vec::new();
        }
        let sq = disc.sqrt();
        let q = -0.5 * (qb + qb.signum() * sq);
        let mut roots = Vec::with_capacity(2);
        for r in [q / qa, if q != 0.0 { qc / q } else { f64::NAN }] {
            if r.is_finite() {
                roots.push(r);
            }
        }
        roots.sort_by(|x, y| x.total_cmp(y));
        roots.dedup_by(|x, y| (*x - *y).abs() * len <= tol);
        roots
            .into_iter()
            .map(|t| self.polish_root(a, &d, t))
            .filter(|&t| t * len > tol && (1.0 - t) * len > tol)
            .collect()
    }

    fn polish_root(&self, a: &Point, d: &Vector, mut t: f64) -> f64 {
        for _ in 0..3 {
            let p = a + d * t;
            let g = self.gradient(&p).dot(d);
            if g == 0.0 {
                break;
            }
            t -= self.eval(&p) / g;
        }
        t
    }

    /// Arc of Γ from `from` to `to` (both assumed on Γ), taking the shorter way round.
    pub fn arc(&self, from: &Point, to: &Point) -> CircularArc {
        let c = self.center();
        let a0 = (from.y - c.y).atan2(from.x - c.x);
        let a1 = (to.y - c.y).atan2(to.x - c.x);
        let mut sweep = a1 - a0;
        while sweep > std::f64::consts::PI {
            sweep -= 2.0 * std::f64::consts::PI;
        }
        while sweep <= -std::f64::consts::PI {
            sweep += 2.0 * std::f64::consts::PI;
        }
        CircularArc {
            center: c,
            radius: self.radius(),
            start_angle: a0,
            sweep,
        }
    }
}

/// A circular arc parameterized by `s ∈ [0, 1]` at constant speed.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CircularArc {
    pub center: Point,
    pub radius: f64,
    pub start_angle: f64,
    pub sweep: f64,
}

impl CircularArc {
    pub fn point(&self, s: f64) -> Point {
        let a = self.start_angle + s * self.sweep;
        self.center + Vector::new(a.cos(), a.sin()) * self.radius
    }

    /// Outward radial unit normal at parameter `s`.
    pub fn normal(&self, s: f64) -> Vector {
        let a = self.start_angle + s * self.sweep;
        Vector::new(a.cos(), a.sin())
    }

    pub fn length(&self) -> f64 {
        self.radius * self.sweep.abs()
    }

    /// `2^depth + 1` points obtained by repeatedly bisecting the arc; endpoints included.
    pub fn subdivide(&self, depth: usize) -> Vec<Point> {
        let n = 1usize << depth;
        (0..=n).map(|i| self.point(i as f64 / n as f64)).collect()
    }
}

/// Classification of a mesh element against the interface.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ElementClass {
    NonInterface(Side),
    Interface,
}

pub fn signed_area(a: &Point, b: &Point, c: &Point) -> f64 {
    0.5 * ((b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y))
}

pub fn diameter(tri: &[Point; 3]) -> f64 {
    (tri[0] - tri[1])
        .norm()
        .max((tri[1] - tri[2]).norm())
        .max((tri[2] - tri[0]).norm())
}

/// Vertex signs with vertices within `tol` of Γ snapped to zero.
fn vertex_signs(tri: &[Point; 3], iface: &LevelSetInterface, tol: f64) -> [i8; 3] {
    let mut s = [0i8; 3];
    for (i, p) in tri.iter().enumerate() {
        let d = iface.signed_distance(p);
        s[i] = if d.abs() <= tol {
            0
        } else if d < 0.0 {
            -1
        } else {
            1
        };
    }
    s
}

fn side_of_sign(s: i8) -> Side {
    if s < 0 {
        Side::Inside
    } else {
        Side::Outside
    }
}

pub fn classify_element(
    tri: &[Point; 3],
    iface: &LevelSetInterface,
    tol: f64,
) -> Result<ElementClass> {
    let area = signed_area(&tri[0], &tri[1], &tri[2]).abs();
    let h = diameter(tri);
    if area <= tol * h {
        return Err(Error::DegenerateTriangle { area });
    }
    let signs = vertex_signs(tri, iface, tol);
    if signs.contains(&-1) && signs.contains(&1) {
        return Ok(ElementClass::Interface);
    }
    let Some(&s) = signs.iter().find(|&&s| s != 0) else {
        // all three vertices on Γ
        return Ok(ElementClass::Interface);
    };
    // same-sign edge that dips across Γ and back
    for i in 0..3 {
        let (a, b) = (&tri[i], &tri[(i + 1) % 3]);
        if !iface.segment_roots(a, b, tol).is_empty() {
            return Ok(ElementClass::Interface);
        }
    }
    Ok(ElementClass::NonInterface(side_of_sign(s)))
}

/// A point where Γ meets the element boundary.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CutPoint {
    pub point: Point,
    /// Local edge index `i`, the edge running from vertex `i` to vertex `i + 1`.
    pub edge: usize,
    /// Position along that edge in `[0, 1]`.
    pub t: f64,
}

/// Geometry of an interface element split by Γ.
#[derive(Clone, Debug, PartialEq)]
pub struct ElementCut {
    pub element: usize,
    pub vertices: [Point; 3],
    pub interface: LevelSetInterface,
    /// Start of the inside boundary chain.
    pub d: CutPoint,
    /// End of the inside boundary chain.
    pub e: CutPoint,
    /// Unit normal of the chord `DE`, pointing from Ω1 into Ω2.
    pub normal: Vector,
    /// Chord-split sub-polygons, counterclockwise. `inside_poly` runs
    /// `D, …, E`; `outside_poly` runs `E, …, D`.
    pub inside_poly: Vec<Point>,
    pub outside_poly: Vec<Point>,
    /// Index into `outside_poly` of the outside vertex farthest from Γ.
    outside_apex: usize,
}

enum BoundaryItem {
    Vertex(Side),
    Crossing(CutPoint),
}

pub fn compute_cut(
    element: usize,
    tri: &[Point; 3],
    iface: &LevelSetInterface,
    tol: f64,
) -> Result<ElementCut> {
    let signs = vertex_signs(tri, iface, tol);
    if !(signs.contains(&-1) && signs.contains(&1)) {
        // touching or no sign change: either uncut or multiply cut
        return Err(Error::MultipleCrossings);
    }
    let mut items: Vec<(Point, BoundaryItem)> = Vec::with_capacity(6);
    let mut crossings = 0;
    for i in 0..3 {
        let j = (i + 1) % 3;
        if signs[i] == 0 {
            items.push((
                tri[i],
                BoundaryItem::Crossing(CutPoint {
                    point: tri[i],
                    edge: i,
                    t: 0.0,
                }),
            ));
            crossings += 1;
        } else {
            items.push((tri[i], BoundaryItem::Vertex(side_of_sign(signs[i]))));
        }
        let roots = iface.segment_roots(&tri[i], &tri[j], tol);
        let expected = usize::from(signs[i] * signs[j] < 0);
        if roots.len() != expected {
            return Err(Error::MultipleCrossings);
        }
        if let Some(&t) = roots.first() {
            let p = tri[i] + (tri[j] - tri[i]) * t;
            items.push((p, BoundaryItem::Crossing(CutPoint { point: p, edge: i, t })));
            crossings += 1;
        }
    }
    if crossings != 2 {
        return Err(Error::MultipleCrossings);
    }
    let pos: Vec<usize> = items
        .iter()
        .enumerate()
        .filter(|(_, it)| matches!(it.1, BoundaryItem::Crossing(_)))
        .map(|(k, _)| k)
        .collect();
    let n = items.len();
    let chain = |from: usize, to: usize| -> Vec<usize> {
        let mut out = vec![from];
        let mut k = from;
        while k != to {
            k = (k + 1) % n;
            out.push(k);
        }
        out
    };
    let c1 = chain(pos[0], pos[1]);
    let c2 = chain(pos[1], pos[0]);
    let chain_side = |c: &[usize]| -> Option<Side> {
        c[1..c.len() - 1].iter().find_map(|&k| match items[k].1 {
            BoundaryItem::Vertex(s) => Some(s),
            BoundaryItem::Crossing(_) => None,
        })
    };
    let (inside_chain, outside_chain) = match (chain_side(&c1), chain_side(&c2)) {
        (Some(Side::Inside), Some(Side::Outside)) => (c1, c2),
        (Some(Side::Outside), Some(Side::Inside)) => (c2, c1),
        _ => return Err(Error::MultipleCrossings),
    };
    let cut_point = |k: usize| match items[k].1 {
        BoundaryItem::Crossing(c) => c,
        BoundaryItem::Vertex(_) => unreachable!("chain ends are crossings"),
    };
    let d = cut_point(inside_chain[0]);
    let e = cut_point(*inside_chain.last().unwrap());
    let inside_poly: Vec<Point> = inside_chain.iter().map(|&k| items[k].0).collect();
    let outside_poly: Vec<Point> = outside_chain.iter().map(|&k| items[k].0).collect();

    let chord = e.point - d.point;
    let mut normal = Vector::new(-chord.y, chord.x).normalize();
    let mid = Point::from((d.point.coords + e.point.coords) * 0.5);
    if normal.dot(&iface.gradient(&mid)) < 0.0 {
        normal = -normal;
    }
    let outside_apex = (1..outside_poly.len() - 1)
        .max_by(|&a, &b| {
            iface
                .eval(&outside_poly[a])
                .total_cmp(&iface.eval(&outside_poly[b]))
        })
        .unwrap_or(0);
    Ok(ElementCut {
        element,
        vertices: *tri,
        interface: *iface,
        d,
        e,
        normal,
        inside_poly,
        outside_poly,
        outside_apex,
    })
}

impl ElementCut {
    pub fn polygon(&self, side: Side) -> &[Point] {
        match side {
            Side::Inside => &self.inside_poly,
            Side::Outside => &self.outside_poly,
        }
    }

    /// The piece of Γ inside the element, running from `D` to `E`.
    pub fn arc(&self) -> CircularArc {
        self.interface.arc(&self.d.point, &self.e.point)
    }

    pub fn chord_length(&self) -> f64 {
        (self.e.point - self.d.point).norm()
    }

    /// Sub-region polygon on `side` with the chord `DE` replaced by `2^depth`
    /// chords inscribed in the arc, together with the index of the vertex
    /// used as the fan apex for triangulation.
    pub fn region_polygon(&self, side: Side, depth: usize) -> (Vec<Point>, usize) {
        if depth == 0 {
            return match side {
                Side::Inside => (self.inside_poly.clone(), 0),
                Side::Outside => (self.outside_poly.clone(), self.outside_apex),
            };
        }
        let arc_pts = self.arc().subdivide(depth);
        let inner = &arc_pts[1..arc_pts.len() - 1];
        match side {
            Side::Inside => {
                // D … E, then back along the arc E → D
                let mut poly = self.inside_poly.clone();
                poly.extend(inner.iter().rev());
                (poly, 0)
            }
            Side::Outside => {
                // E … D, then along the arc D → E
                let mut poly = self.outside_poly.clone();
                poly.extend(inner.iter());
                (poly, self.outside_apex)
            }
        }
    }

    pub fn area(&self) -> f64 {
        signed_area(&self.vertices[0], &self.vertices[1], &self.vertices[2])
    }
}

pub fn polygon_area(poly: &[Point]) -> f64 {
    let n = poly.len();
    (0..n)
        .map(|i| {
            let (p, q) = (&poly[i], &poly[(i + 1) % n]);
            p.x * q.y - q.x * p.y
        })
        .sum::<f64>()
        * 0.5
}
