//! Quadrature on triangles, polygons, cut sub-regions and (split) segments.

use std::sync::OnceLock;

use crate::geometry::{signed_area, ElementCut, LevelSetInterface, Point, Side};

const MAX_GAUSS: usize = 24;

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (&'static [f64], &'static [f64]) {
    static TABLE: OnceLock<Vec<(Vec<f64>, Vec<f64>)>> = OnceLock::new();
    assert!((1..=MAX_GAUSS).contains(&n), "unsupported Gauss order {n}");
    let table = TABLE.get_or_init(|| (1..=MAX_GAUSS).map(compute_gauss_legendre).collect());
    let (x, w) = &table[n - 1];
    (x, w)
}

fn compute_gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, 0.0);
            for j in 0..n {
                let p2 = p1;
                p1 = p0;
                p0 = ((2 * j + 1) as f64 * z * p1 - j as f64 * p2) / (j + 1) as f64;
            }
            dp = n as f64 * (z * p0 - p1) / (z * z - 1.0);
            let dz = p0 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[n - 1 - i] = z;
        w[n - 1 - i] = 2.0 / ((1.0 - z * z) * dp * dp);
    }
    (x, w)
}

/// Number of Gauss points exact for polynomials of the given degree.
pub fn gauss_points_for(degree: usize) -> usize {
    (degree / 2 + 1).max(1)
}

/// Collapsed (Duffy) tensor rule on the reference triangle `(0,0),(1,0),(0,1)`:
/// `(ξ, η, w)` with weights summing to 1/2.
fn collapsed_reference(degree: usize) -> &'static [(f64, f64, f64)] {
    static TABLE: OnceLock<Vec<Vec<(f64, f64, f64)>>> = OnceLock::new();
    let table = TABLE.get_or_init(|| {
        (0..=2 * MAX_GAUSS - 3)
            .map(|deg| {
                // the Duffy Jacobian adds one degree in the collapsed direction
                let nu = gauss_points_for(deg + 1);
                let nv = gauss_points_for(deg);
                let (xu, wu) = gauss_legendre(nu);
                let (xv, wv) = gauss_legendre(nv);
                let mut pts = Vec::with_capacity(nu * nv);
                for (a, wa) in xu.iter().zip(wu) {
                    let u = 0.5 * (a + 1.0);
                    for (b, wb) in xv.iter().zip(wv) {
                        let v = 0.5 * (b + 1.0);
                        pts.push((u, v * (1.0 - u), 0.25 * wa * wb * (1.0 - u)));
                    }
                }
                pts
            })
            .collect()
    });
    &table[degree]
}

/// Points and weights of a 2D rule (area or arc-length measure).
#[derive(Clone, Debug, Default, PartialEq)]
pub struct QuadratureRule {
    pub points: Vec<Point>,
    pub weights: Vec<f64>,
    pub exactness_degree: usize,
}

impl QuadratureRule {
    pub fn empty(exactness_degree: usize) -> Self {
        QuadratureRule {
            points: Vec::new(),
            weights: Vec::new(),
            exactness_degree,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn measure(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn integrate(&self, mut f: impl FnMut(&Point) -> f64) -> f64 {
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(p, w)| w * f(p))
            .sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Point, f64)> {
        self.points.iter().zip(self.weights.iter().copied())
    }

    fn append(&mut self, other: QuadratureRule) {
        self.points.extend(other.points);
        self.weights.extend(other.weights);
    }
}

/// Rule exact to `degree` on triangle `abc`; weights carry the signed area.
pub fn triangle_rule(a: &Point, b: &Point, c: &Point, degree: usize) -> QuadratureRule {
    let area2 = 2.0 * signed_area(a, b, c);
    let ab = b - a;
    let ac = c - a;
    let reference = collapsed_reference(degree);
    let mut points = Vec::with_capacity(reference.len());
    let mut weights = Vec::with_capacity(reference.len());
    for &(xi, eta, w) in reference {
        points.push(a + ab * xi + ac * eta);
        weights.push(w * area2);
    }
    QuadratureRule {
        points,
        weights,
        exactness_degree: degree,
    }
}

/// Fan triangulation of a simple polygon from vertex `apex`.
///
/// Signed sub-triangle areas make the result exact for polynomials on any
/// simple polygon; weights are positive when the polygon is star-shaped
/// with respect to the apex.
pub fn polygon_rule(poly: &[Point], apex: usize, degree: usize) -> QuadratureRule {
    let n = poly.len();
    let mut rule = QuadratureRule::empty(degree);
    for k in 1..n - 1 {
        let b = &poly[(apex + k) % n];
        let c = &poly[(apex + k + 1) % n];
        rule.append(triangle_rule(&poly[apex], b, c, degree));
    }
    rule
}

/// Rule on one side of a cut element. With `depth > 0` the curved region
/// between the chord and Γ is resolved by `2^depth` inscribed chords.
pub fn quadrature_on_subregion(
    cut: &ElementCut,
    side: Side,
    degree: usize,
    depth: usize,
) -> QuadratureRule {
    let (poly, apex) = cut.region_polygon(side, depth);
    polygon_rule(&poly, apex, degree)
}

/// Gauss–Legendre rule on segment `ab`, exact to `degree`; weights carry the length.
pub fn segment_rule(a: &Point, b: &Point, degree: usize) -> QuadratureRule {
    let (x, w) = gauss_legendre(gauss_points_for(degree));
    let half = 0.5 * (b - a).norm();
    QuadratureRule {
        points: x
            .iter()
            .map(|&s| a + (b - a) * (0.5 * (s + 1.0)))
            .collect(),
        weights: w.iter().map(|wi| wi * half).collect(),
        exactness_degree: degree,
    }
}

/// A piece of an element edge lying on one side of Γ, as the parameter
/// interval `[t0, t1]` of the edge.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EdgePiece {
    pub t0: f64,
    pub t1: f64,
    pub side: Side,
}

/// Split segment `ab` at its interface roots. Without an interface the
/// whole segment is a single piece on `default_side`.
pub fn split_segment(
    a: &Point,
    b: &Point,
    iface: Option<&LevelSetInterface>,
    default_side: Side,
    tol: f64,
) -> Vec<EdgePiece> {
    let Some(iface) = iface else {
        return vec![EdgePiece {
            t0: 0.0,
            t1: 1.0,
            side: default_side,
        }];
    };
    let mut cuts = vec![0.0];
    cuts.extend(iface.segment_roots(a, b, tol));
    cuts.push(1.0);
    cuts.windows(2)
        .map(|w| {
            let mid = a + (b - a) * (0.5 * (w[0] + w[1]));
            EdgePiece {
                t0: w[0],
                t1: w[1],
                side: iface.side(&mid),
            }
        })
        .collect()
}

/// Gauss rule on each piece of `ab` split at the interface, so that
/// piecewise polynomials are integrated exactly.
pub fn quadrature_on_edge(
    a: &Point,
    b: &Point,
    degree: usize,
    iface: Option<&LevelSetInterface>,
    default_side: Side,
    tol: f64,
) -> Vec<(Side, QuadratureRule)> {
    split_segment(a, b, iface, default_side, tol)
        .into_iter()
        .map(|p| {
            let pa = a + (b - a) * p.t0;
            let pb = a + (b - a) * p.t1;
            (p.side, segment_rule(&pa, &pb, degree))
        })
        .collect()
}
