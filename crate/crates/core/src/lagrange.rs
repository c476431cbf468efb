//! Conforming Lagrange `P_1` / `P_2` elements used on non-interface triangles.
//!
//! Local node order: the three vertices, then (for `k = 2`) the midpoints of
//! local edges `01`, `12`, `20`.

use nalgebra::{DMatrix, DVector};

use crate::geometry::{signed_area, Point, Vector};
use crate::quadrature::{gauss_legendre, gauss_points_for, triangle_rule, QuadratureRule};

pub const MAX_NODES: usize = 6;

pub fn nodes_per_element(k: usize) -> usize {
    match k {
        1 => 3,
        2 => 6,
        _ => panic!("Lagrange degree {k} unsupported"),
    }
}

#[derive(Clone, Copy, Debug)]
pub struct LagrangeElement {
    pub k: usize,
    pub vertices: [Point; 3],
    area: f64,
    grad_lambda: [Vector; 3],
}

impl LagrangeElement {
    pub fn new(k: usize, vertices: [Point; 3]) -> Self {
        let area = signed_area(&vertices[0], &vertices[1], &vertices[2]);
        let grad_lambda = std::array::from_fn(|i| {
            let a = vertices[(i + 1) % 3];
            let b = vertices[(i + 2) % 3];
            // ∇λ_i is the inward normal of the opposite edge over twice the area
            Vector::new(a.y - b.y, b.x - a.x) / (2.0 * area)
        });
        LagrangeElement {
            k,
            vertices,
            area,
            grad_lambda,
        }
    }

    pub fn num_nodes(&self) -> usize {
        nodes_per_element(self.k)
    }

    pub fn area(&self) -> f64 {
        self.area
    }

    pub fn nodes(&self) -> Vec<Point> {
        let v = &self.vertices;
        let mut n = v.to_vec();
        if self.k == 2 {
            for i in 0..3 {
                n.push(Point::from((v[i].coords + v[(i + 1) % 3].coords) * 0.5));
            }
        }
        n
    }

    pub fn barycentric(&self, p: &Point) -> [f64; 3] {
        let v = &self.vertices;
        let l1 = signed_area(&v[0], p, &v[2]) / self.area;
        let l2 = signed_area(&v[0], &v[1], p) / self.area;
        [1.0 - l1 - l2, l1, l2]
    }

    pub fn values(&self, p: &Point) -> [f64; MAX_NODES] {
        let l = self.barycentric(p);
        let mut out = [0.0; MAX_NODES];
        match self.k {
            1 => out[..3].copy_from_slice(&l),
            _ => {
                for i in 0..3 {
                    out[i] = l[i] * (2.0 * l[i] - 1.0);
                    out[3 + i] = 4.0 * l[i] * l[(i + 1) % 3];
                }
            }
        }
        out
    }

    pub fn gradients(&self, p: &Point) -> [Vector; MAX_NODES] {
        let g = &self.grad_lambda;
        let mut out = [Vector::zeros(); MAX_NODES];
        match self.k {
            1 => out[..3].copy_from_slice(g),
            _ => {
                let l = self.barycentric(p);
                for i in 0..3 {
                    let j = (i + 1) % 3;
                    out[i] = g[i] * (4.0 * l[i] - 1.0);
                    out[3 + i] = (g[i] * l[j] + g[j] * l[i]) * 4.0;
                }
            }
        }
        out
    }

    pub fn rule(&self, degree: usize) -> QuadratureRule {
        let v = &self.vertices;
        triangle_rule(&v[0], &v[1], &v[2], degree)
    }

    pub fn value(&self, coeffs: &[f64], p: &Point) -> f64 {
        let phi = self.values(p);
        coeffs.iter().zip(phi.iter()).map(|(c, f)| c * f).sum()
    }

    pub fn gradient(&self, coeffs: &[f64], p: &Point) -> Vector {
        let g = self.gradients(p);
        coeffs
            .iter()
            .zip(g.iter())
            .fold(Vector::zeros(), |acc, (c, d)| acc + d * *c)
    }

    /// `(a ∇φ_i, ∇φ_j)_T`, exact for constant `a`.
    pub fn stiffness(&self, a: f64) -> DMatrix<f64> {
        let n = self.num_nodes();
        let mut m = DMatrix::zeros(n, n);
        for (p, w) in self.rule(2 * self.k - 2).iter() {
            let g = self.gradients(p);
            for i in 0..n {
                for j in 0..n {
                    m[(i, j)] += a * w * g[i].dot(&g[j]);
                }
            }
        }
        m
    }

    pub fn load(&self, f: impl Fn(&Point) -> f64, degree: usize) -> DVector<f64> {
        let n = self.num_nodes();
        let mut b = DVector::zeros(n);
        for (p, w) in self.rule(degree).iter() {
            let fw = w * f(p);
            let phi = self.values(p);
            for i in 0..n {
                b[i] += fw * phi[i];
            }
        }
        b
    }
}

/// One-dimensional Lagrange basis on an edge in the parameter `s ∈ [0, 1]`,
/// ordered (start, end) for `k = 1` and (start, end, midpoint) for `k = 2`.
pub fn edge_lagrange(k: usize, s: f64) -> [f64; 3] {
    match k {
        1 => [1.0 - s, s, 0.0],
        _ => [
            (1.0 - s) * (1.0 - 2.0 * s),
            s * (2.0 * s - 1.0),
            4.0 * s * (1.0 - s),
        ],
    }
}

/// `C[j][n] = ∫_e L_n ψ_j`: Legendre trace coefficients of each edge Lagrange
/// function, i.e. the `Q_b` map applied to a continuous trace.
pub fn edge_coupling_block(k: usize, length: f64) -> DMatrix<f64> {
    let nodes = k + 1;
    let mut c = DMatrix::zeros(k, nodes);
    let (x, w) = gauss_legendre(gauss_points_for(2 * k));
    for (&t, &wt) in x.iter().zip(w) {
        let s = 0.5 * (t + 1.0);
        let l = edge_lagrange(k, s);
        for j in 0..k {
            let psi = crate::poly::edge_legendre(j, s, length);
            for n in 0..nodes {
                c[(j, n)] += 0.5 * wt * length * psi * l[n];
            }
        }
    }
    c
}
