//! Scaled monomial bases for `P_k(T)` and orthonormal Legendre bases on edges.

use crate::geometry::{Point, Vector};

/// Largest supported polynomial dimension (`k = 2`).
pub const MAX_DIM: usize = 6;

/// Monomials `X^a Y^b` (`a + b ≤ k`) in element-local coordinates
/// `X = (x − x_T)/h_T`, `Y = (y − y_T)/h_T`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PolyBasis {
    pub degree: usize,
    pub center: Point,
    pub scale: f64,
}

/// Exponents ordered by total degree: 1, X, Y, X², XY, Y².
const EXPONENTS: [(i32, i32); MAX_DIM] = [(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2)];

pub fn dim_for_degree(k: usize) -> usize {
    (k + 1) * (k + 2) / 2
}

impl PolyBasis {
    pub fn new(degree: usize, center: Point, scale: f64) -> Self {
        assert!((1..=2).contains(&degree), "polynomial degree {degree} unsupported");
        PolyBasis {
            degree,
            center,
            scale,
        }
    }

    pub fn dim(&self) -> usize {
        dim_for_degree(self.degree)
    }

    pub fn exponents(&self) -> &'static [(i32, i32)] {
        &EXPONENTS[..self.dim()]
    }

    fn local(&self, p: &Point) -> (f64, f64) {
        (
            (p.x - self.center.x) / self.scale,
            (p.y - self.center.y) / self.scale,
        )
    }

    pub fn eval(&self, p: &Point) -> [f64; MAX_DIM] {
        let (x, y) = self.local(p);
        let mut v = [0.0; MAX_DIM];
        v[0] = 1.0;
        v[1] = x;
        v[2] = y;
        if self.degree == 2 {
            v[3] = x * x;
            v[4] = x * y;
            v[5] = y * y;
        }
        v
    }

    /// Gradients with respect to global coordinates.
    pub fn grad(&self, p: &Point) -> [Vector; MAX_DIM] {
        let (x, y) = self.local(p);
        let s = 1.0 / self.scale;
        let mut g = [Vector::zeros(); MAX_DIM];
        g[1] = Vector::new(s, 0.0);
        g[2] = Vector::new(0.0, s);
        if self.degree == 2 {
            g[3] = Vector::new(2.0 * x * s, 0.0);
            g[4] = Vector::new(y * s, x * s);
            g[5] = Vector::new(0.0, 2.0 * y * s);
        }
        g
    }

    /// Laplacians with respect to global coordinates (constant per monomial).
    pub fn laplacian(&self) -> [f64; MAX_DIM] {
        let mut l = [0.0; MAX_DIM];
        if self.degree == 2 {
            let s2 = 2.0 / (self.scale * self.scale);
            l[3] = s2;
            l[5] = s2;
        }
        l
    }

    /// `Σ c_i m_i(p)`.
    pub fn value(&self, coeffs: &[f64], p: &Point) -> f64 {
        let v = self.eval(p);
        coeffs.iter().zip(v.iter()).map(|(c, m)| c * m).sum()
    }

    pub fn gradient(&self, coeffs: &[f64], p: &Point) -> Vector {
        let g = self.grad(p);
        coeffs
            .iter()
            .zip(g.iter())
            .fold(Vector::zeros(), |acc, (c, m)| acc + m * *c)
    }
}

/// Orthonormal Legendre polynomials on an edge of length `len`, in the edge
/// parameter `s ∈ [0, 1]`: `ψ_j(s) = √((2j+1)/len) P_j(2s − 1)`.
pub fn edge_legendre(j: usize, s: f64, len: f64) -> f64 {
    let t = 2.0 * s - 1.0;
    let p = match j {
        0 => 1.0,
        1 => t,
        2 => 0.5 * (3.0 * t * t - 1.0),
        _ => panic!("edge Legendre degree {j} unsupported"),
    };
    ((2 * j + 1) as f64 / len).sqrt() * p
}

/// Legendre polynomial `P_j(t)` on `[-1, 1]`.
pub fn legendre(j: usize, t: f64) -> f64 {
    let (mut p0, mut p1) = (1.0, t);
    if j == 0 {
        return 1.0;
    }
    for n in 1..j {
        let p2 = ((2 * n + 1) as f64 * t * p1 - n as f64 * p0) / (n + 1) as f64;
        p0 = p1;
        p1 = p2;
    }
    p1
}
