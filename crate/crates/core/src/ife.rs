//! Immersed finite element spaces on cut elements and the local weak Galerkin
//! operators built on top of them.
//!
//! On an interface element `T`, a function of `V_k(T)` is a pair of
//! polynomials `(p1, p2) ∈ P_k × P_k`, `p1` used on the inside sub-region and
//! `p2` on the outside one, tied together by the homogeneous jump conditions
//!
//! * `[u] = p1 − p2 = 0`,
//! * `[A ∂u/∂n] = A1 ∂p1/∂n − A2 ∂p2/∂n = 0`,
//! * for `k = 2`: `[A Δu] = A1 Δp1 − A2 Δp2 = 0`.
//!
//! For `k ∈ {1, 2}` these are exactly `m_k = dim P_k` independent linear
//! conditions, so `dim V_k(T) = m_k`.
//!
//! Local weak Galerkin unknowns are ordered as `m_k` interior coefficients
//! (with respect to the orthonormal basis of `V_k(T)`) followed by `k`
//! Legendre trace coefficients on each of the three local edges.

use nalgebra::{DMatrix, DVector, SymmetricEigen, SVD};

use crate::error::{Error, Result};
use crate::geometry::{ElementCut, Point, Side, Vector};
use crate::poly::{dim_for_degree, edge_legendre, legendre, PolyBasis, MAX_DIM};
use crate::quadrature::{gauss_legendre, quadrature_on_subregion, split_segment, segment_rule, EdgePiece, QuadratureRule};

/// Where the jump conditions are enforced.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConstraintGeometry {
    /// Pointwise on the chord `DE`, with its constant normal.
    Chord,
    /// In the weak sense on the true interface arc: jumps are orthogonal to
    /// Legendre polynomials in the arc parameter.
    Arc,
}

/// Inner product defining the weak gradient in `∇V_k(T)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WeakGradientForm {
    /// `(∇_w v, q) = (∇v_0, q) − ⟨Q_b v_0 − v_b, q·n⟩`.
    Plain,
    /// `(A∇_w v, q) = (A∇v_0, q) − ⟨Q_b v_0 − v_b, A q·n⟩`; identical to
    /// `Plain` when `A1 = A2`.
    Weighted,
}

/// Inner product of the stabilizer `h_T^{-1}⟨Q_b u_0 − u_b, Q_b v_0 − v_b⟩_{∂T}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StabilizerForm {
    /// Plain `L²(∂T)` product.
    Plain,
    /// `L²(∂T)` product weighted by the piecewise coefficient along each edge.
    Weighted,
}

/// Piecewise-constant coefficient `A` (A1 inside, A2 outside).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Coefficients {
    pub a1: f64,
    pub a2: f64,
}

impl Coefficients {
    pub fn new(a1: f64, a2: f64) -> Result<Self> {
        if !(a1 > 0.0 && a2 > 0.0 && a1.is_finite() && a2.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "coefficients must be positive, got ({a1}, {a2})"
            )));
        }
        Ok(Coefficients { a1, a2 })
    }

    pub fn on(&self, side: Side) -> f64 {
        match side {
            Side::Inside => self.a1,
            Side::Outside => self.a2,
        }
    }

    pub fn scaled(&self, s: f64) -> Self {
        Coefficients {
            a1: self.a1 * s,
            a2: self.a2 * s,
        }
    }
}

/// Settings shared by every local space of a discretization.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IfeSettings {
    pub k: usize,
    /// Arc subdivision depth for sub-region quadrature.
    pub depth: usize,
    /// Added to every quadrature degree.
    pub quad_offset: usize,
    pub constraint: ConstraintGeometry,
    pub gradient_form: WeakGradientForm,
    pub stabilizer_form: StabilizerForm,
}

impl IfeSettings {
    pub fn new(k: usize) -> Self {
        IfeSettings {
            k,
            depth: 6,
            quad_offset: 0,
            constraint: ConstraintGeometry::Arc,
            gradient_form: WeakGradientForm::Weighted,
            stabilizer_form: StabilizerForm::Weighted,
        }
    }

    pub fn stiffness_degree(&self) -> usize {
        2 * self.k + self.quad_offset
    }

    pub fn load_degree(&self) -> usize {
        2 * self.k + 2 + self.quad_offset
    }

    pub fn error_degree(&self) -> usize {
        2 * self.k + 4 + self.quad_offset
    }
}

/// Per-edge data of a local weak Galerkin space.
#[derive(Clone, Debug)]
pub struct EdgeTrace {
    /// Start and end in the global edge orientation.
    pub start: Point,
    pub end: Point,
    pub length: f64,
    pub outward_normal: Vector,
    /// Sub-segments on either side of Γ (parameters along `start → end`).
    pub pieces: Vec<EdgePiece>,
    /// `∫_e φ_l ψ_j`: `k × m`, the `Q_b` map from interior coefficients.
    pub trace: DMatrix<f64>,
    /// `∫_e (∇φ_i · n) ψ_j`, `k × (m − 1)`, over non-constant basis functions.
    pub flux: DMatrix<f64>,
    /// `∫_e (A∇φ_i · n) ψ_j`.
    pub weighted_flux: DMatrix<f64>,
    /// Stabilizer Gram of the trace basis: identity, or `∫_e A ψ_i ψ_j`.
    pub stabilizer_gram: DMatrix<f64>,
}

impl EdgeTrace {
    pub fn point(&self, s: f64) -> Point {
        self.start + (self.end - self.start) * s
    }

    /// Gauss rules for each piece, tagged by side.
    pub fn rules(&self, degree: usize) -> Vec<(Side, QuadratureRule)> {
        self.pieces
            .iter()
            .map(|p| (p.side, segment_rule(&self.point(p.t0), &self.point(p.t1), degree)))
            .collect()
    }

    pub fn param(&self, p: &Point) -> f64 {
        (p - self.start).norm() / self.length
    }
}

/// Immersed space `V_k(T)` with its weak-gradient machinery.
#[derive(Clone, Debug)]
pub struct LocalIfeSpace {
    pub element: usize,
    pub settings: IfeSettings,
    pub coeffs: Coefficients,
    pub cut: ElementCut,
    pub poly: PolyBasis,
    /// Element diameter `h_T`.
    pub h: f64,
    /// Normalized constraint rows (`m × 2m`).
    pub constraints: DMatrix<f64>,
    /// Basis coefficients: column `i` holds `p1` (rows `0..m`) and `p2`
    /// (rows `m..2m`) of basis function `φ_i`. `φ_0` is the normalized constant.
    pub basis: DMatrix<f64>,
    pub constraint_residual: f64,
    /// Condition number of the piecewise Gram on the non-constant part.
    pub gram_condition: f64,
    /// `(∇φ_i, ∇φ_j)_T`, `i, j ≥ 1`.
    pub grad_gram: DMatrix<f64>,
    /// `(A ∇φ_i, ∇φ_j)_T`, `i, j ≥ 1`.
    pub weighted_grad_gram: DMatrix<f64>,
    pub edges: [EdgeTrace; 3],
    /// Maps local WG unknowns to coefficients of `∇_w v` in `{∇φ_i}_{i≥1}`.
    pub weak_gradient: DMatrix<f64>,
}

/// Rows of the jump-condition system, each normalized to unit length.
pub fn build_constraint_system(
    cut: &ElementCut,
    coeffs: &Coefficients,
    poly: &PolyBasis,
    geometry: ConstraintGeometry,
) -> DMatrix<f64> {
    let k = poly.degree;
    let m = poly.dim();
    let h = poly.scale;
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(m);

    let value_row = |samples: &[(Point, f64)]| {
        let mut r = vec![0.0; 2 * m];
        for (p, w) in samples {
            let v = poly.eval(p);
            for a in 0..m {
                r[a] += w * v[a];
                r[m + a] -= w * v[a];
            }
        }
        r
    };
    let flux_row = |samples: &[(Point, Vector, f64)]| {
        let mut r = vec![0.0; 2 * m];
        for (p, n, w) in samples {
            let g = poly.grad(p);
            for a in 0..m {
                let dn = h * g[a].dot(n);
                r[a] += w * coeffs.a1 * dn;
                r[m + a] -= w * coeffs.a2 * dn;
            }
        }
        r
    };

    match geometry {
        ConstraintGeometry::Chord => {
            // sample the line through DE at spacing ~h around the chord midpoint
            let d = cut.d.point;
            let tangent = (cut.e.point - d).normalize();
            let mid = Point::from((d.coords + cut.e.point.coords) * 0.5);
            let at = |s: f64| mid + tangent * (s * h);
            let value_offsets: &[f64] = if k == 1 { &[-0.5, 0.5] } else { &[-0.5, 0.0, 0.5] };
            for &s in value_offsets {
                rows.push(value_row(&[(at(s), 1.0)]));
            }
            let flux_offsets: &[f64] = if k == 1 { &[0.0] } else { &[-0.5, 0.5] };
            for &s in flux_offsets {
                rows.push(flux_row(&[(at(s), cut.normal, 1.0)]));
            }
        }
        ConstraintGeometry::Arc => {
            let arc = cut.arc();
            let (x, w) = gauss_legendre(8);
            for j in 0..=k {
                let samples: Vec<(Point, f64)> = x
                    .iter()
                    .zip(w)
                    .map(|(&t, &wt)| (arc.point(0.5 * (t + 1.0)), 0.5 * wt * legendre(j, t)))
                    .collect();
                rows.push(value_row(&samples));
            }
            for j in 0..k {
                let samples: Vec<(Point, Vector, f64)> = x
                    .iter()
                    .zip(w)
                    .map(|(&t, &wt)| {
                        let s = 0.5 * (t + 1.0);
                        (arc.point(s), arc.normal(s), 0.5 * wt * legendre(j, t))
                    })
                    .collect();
                rows.push(flux_row(&samples));
            }
        }
    }
    if k == 2 {
        let lap = poly.laplacian();
        let mut r = vec![0.0; 2 * m];
        for a in 0..m {
            r[a] = coeffs.a1 * lap[a] * h * h;
            r[m + a] = -coeffs.a2 * lap[a] * h * h;
        }
        rows.push(r);
    }

    let mut c = DMatrix::zeros(rows.len(), 2 * m);
    for (i, r) in rows.iter().enumerate() {
        let norm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        for (j, v) in r.iter().enumerate() {
            c[(i, j)] = v / norm;
        }
    }
    c
}

/// Orthonormal basis (columns) of the null space of `c`, which must have
/// dimension exactly `expected`.
pub fn null_space(c: &DMatrix<f64>, expected: usize, element: usize) -> Result<DMatrix<f64>> {
    let n = c.ncols();
    let mut padded = DMatrix::zeros(n.max(c.nrows()), n);
    padded.rows_mut(0, c.nrows()).copy_from(c);
    let svd = SVD::new(padded, false, true);
    let v_t = svd.v_t.expect("requested V^T");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let smax = svd.singular_values[order[0]];
    let rank = order
        .iter()
        .filter(|&&i| svd.singular_values[i] > 1e-9 * smax)
        .count();
    let nullity = n - rank;
    if nullity != expected {
        return Err(Error::RankDeficient {
            element,
            nullity,
            expected,
        });
    }
    let mut ns = DMatrix::zeros(n, nullity);
    for (col, &i) in order[rank..].iter().enumerate() {
        ns.set_column(col, &v_t.row(i).transpose());
    }
    Ok(ns)
}

/// Monomial Gram matrices `∫ m_a m_b` and `∫ ∇m_a·∇m_b` over a rule.
fn monomial_grams(poly: &PolyBasis, rule: &QuadratureRule) -> (DMatrix<f64>, DMatrix<f64>) {
    let m = poly.dim();
    let mut g = DMatrix::zeros(m, m);
    let mut dg = DMatrix::zeros(m, m);
    for (p, w) in rule.iter() {
        let v = poly.eval(p);
        let d = poly.grad(p);
        for a in 0..m {
            for b in 0..m {
                g[(a, b)] += w * v[a] * v[b];
                dg[(a, b)] += w * d[a].dot(&d[b]);
            }
        }
    }
    (g, dg)
}

impl LocalIfeSpace {
    /// Build `V_k(T)` for a cut element. `reversed[i]` tells whether local
    /// edge `i` runs against the global edge orientation used for traces.
    pub fn build(
        cut: &ElementCut,
        coeffs: Coefficients,
        settings: IfeSettings,
        h: f64,
        reversed: [bool; 3],
    ) -> Result<Self> {
        let k = settings.k;
        let m = dim_for_degree(k);
        let element = cut.element;
        let v = &cut.vertices;
        let centroid = Point::from((v[0].coords + v[1].coords + v[2].coords) / 3.0);
        let poly = PolyBasis::new(k, centroid, h);

        let constraints = build_constraint_system(cut, &coeffs, &poly, settings.constraint);
        let ns = null_space(&constraints, m, element)?;

        let degree = settings.stiffness_degree();
        let mut grams = Vec::with_capacity(2);
        for side in Side::BOTH {
            let rule = quadrature_on_subregion(cut, side, degree, settings.depth);
            grams.push(monomial_grams(&poly, &rule));
        }
        let mut g = DMatrix::zeros(2 * m, 2 * m);
        g.view_mut((0, 0), (m, m)).copy_from(&grams[0].0);
        g.view_mut((m, m), (m, m)).copy_from(&grams[1].0);

        // constant first, then the G-orthogonal complement inside the null space
        let mut constant = DVector::zeros(2 * m);
        constant[0] = 1.0;
        constant[m] = 1.0;
        let cgc = (constant.transpose() * &g * &constant)[(0, 0)];
        let proj = (constant.transpose() * &g * &ns) / cgc;
        let complement = &ns - &constant * proj;
        let h_mat = complement.transpose() * &g * &complement;
        let h_mat = (&h_mat + h_mat.transpose()) * 0.5;
        let eig = SymmetricEigen::new(h_mat);
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let mut basis = DMatrix::zeros(2 * m, m);
        basis.set_column(0, &(&constant / cgc.sqrt()));
        for (col, &i) in order[..m - 1].iter().enumerate() {
            let lambda = eig.eigenvalues[i];
            let vec = &complement * eig.eigenvectors.column(i) / lambda.sqrt();
            basis.set_column(col + 1, &vec);
        }
        let gram_condition = eig.eigenvalues[order[0]] / eig.eigenvalues[order[m - 2]];

        // gradient Grams over the non-constant basis functions
        let mut grad_full = DMatrix::zeros(m, m);
        let mut weighted_full = DMatrix::zeros(m, m);
        for side in Side::BOTH {
            let b = basis.rows(side.index() * m, m);
            let dg = &grams[side.index()].1;
            let block = b.transpose() * dg * b;
            grad_full += &block;
            weighted_full += block * coeffs.on(side);
        }
        let grad_gram = grad_full.view((1, 1), (m - 1, m - 1)).into_owned();
        let weighted_grad_gram = weighted_full.view((1, 1), (m - 1, m - 1)).into_owned();

        let mut space = LocalIfeSpace {
            element,
            settings,
            coeffs,
            cut: cut.clone(),
            poly,
            h,
            constraints,
            basis,
            constraint_residual: 0.0,
            gram_condition,
            grad_gram,
            weighted_grad_gram,
            edges: std::array::from_fn(|_| EdgeTrace {
                start: Point::origin(),
                end: Point::origin(),
                length: 0.0,
                outward_normal: Vector::zeros(),
                pieces: Vec::new(),
                trace: DMatrix::zeros(0, 0),
                flux: DMatrix::zeros(0, 0),
                weighted_flux: DMatrix::zeros(0, 0),
                stabilizer_gram: DMatrix::zeros(0, 0),
            }),
            weak_gradient: DMatrix::zeros(0, 0),
        };
        space.constraint_residual = space.jump_residual(settings.constraint);
        for i in 0..3 {
            space.edges[i] = space.build_edge(i, reversed[i]);
        }
        space.weak_gradient = space.build_weak_gradient()?;
        Ok(space)
    }

    pub fn k(&self) -> usize {
        self.settings.k
    }

    /// `m_k`.
    pub fn dim(&self) -> usize {
        self.poly.dim()
    }

    /// Interior plus trace unknowns: `m_k + 3k`.
    pub fn local_dim(&self) -> usize {
        self.dim() + 3 * self.k()
    }

    pub fn trace_offset(&self, local_edge: usize) -> usize {
        self.dim() + local_edge * self.k()
    }

    /// Monomial coefficients on `side` of the function with basis coefficients `a`.
    pub fn side_coefficients(&self, side: Side, a: &[f64]) -> [f64; MAX_DIM] {
        let m = self.dim();
        let mut out = [0.0; MAX_DIM];
        for (i, ai) in a.iter().enumerate().take(m) {
            for r in 0..m {
                out[r] += self.basis[(side.index() * m + r, i)] * ai;
            }
        }
        out
    }

    pub fn value(&self, a: &[f64], p: &Point, side: Side) -> f64 {
        let c = self.side_coefficients(side, a);
        self.poly.value(&c[..self.dim()], p)
    }

    pub fn gradient(&self, a: &[f64], p: &Point, side: Side) -> Vector {
        let c = self.side_coefficients(side, a);
        self.poly.gradient(&c[..self.dim()], p)
    }

    /// All basis values at `p` on `side`.
    pub fn basis_values(&self, p: &Point, side: Side) -> [f64; MAX_DIM] {
        let m = self.dim();
        let mono = self.poly.eval(p);
        let mut out = [0.0; MAX_DIM];
        for (i, o) in out.iter_mut().enumerate().take(m) {
            *o = (0..m)
                .map(|r| self.basis[(side.index() * m + r, i)] * mono[r])
                .sum();
        }
        out
    }

    pub fn basis_gradients(&self, p: &Point, side: Side) -> [Vector; MAX_DIM] {
        let m = self.dim();
        let mono = self.poly.grad(p);
        let mut out = [Vector::zeros(); MAX_DIM];
        for (i, o) in out.iter_mut().enumerate().take(m) {
            *o = (0..m).fold(Vector::zeros(), |acc, r| {
                acc + mono[r] * self.basis[(side.index() * m + r, i)]
            });
        }
        out
    }

    /// Sub-region rules (inside, outside) at the configured arc depth.
    pub fn region_rules(&self, degree: usize) -> [QuadratureRule; 2] {
        Side::BOTH.map(|s| quadrature_on_subregion(&self.cut, s, degree, self.settings.depth))
    }

    fn build_edge(&self, local: usize, reversed: bool) -> EdgeTrace {
        let k = self.k();
        let m = self.dim();
        let v = &self.cut.vertices;
        let (p, q) = (v[local], v[(local + 1) % 3]);
        let (start, end) = if reversed { (q, p) } else { (p, q) };
        let d = q - p;
        let length = d.norm();
        let outward_normal = Vector::new(d.y, -d.x) / length;
        let iface = self.cut.interface;
        let pieces = split_segment(&start, &end, Some(&iface), Side::Inside, 1e-12 * length);
        let mut edge = EdgeTrace {
            start,
            end,
            length,
            outward_normal,
            pieces,
            trace: DMatrix::zeros(k, m),
            flux: DMatrix::zeros(k, m - 1),
            weighted_flux: DMatrix::zeros(k, m - 1),
            stabilizer_gram: DMatrix::zeros(k, k),
        };
        let degree = self.settings.stiffness_degree();
        for (side, rule) in edge.rules(degree) {
            for (x, w) in rule.iter() {
                let s = edge.param(x);
                let vals = self.basis_values(x, side);
                let grads = self.basis_gradients(x, side);
                let a = self.coeffs.on(side);
                for i in 0..k {
                    for j in 0..k {
                        edge.stabilizer_gram[(i, j)] +=
                            w * a * edge_legendre(i, s, length) * edge_legendre(j, s, length);
                    }
                }
                for j in 0..k {
                    let psi = w * edge_legendre(j, s, length);
                    for l in 0..m {
                        edge.trace[(j, l)] += psi * vals[l];
                    }
                    for i in 1..m {
                        let dn = psi * grads[i].dot(&outward_normal);
                        edge.flux[(j, i - 1)] += dn;
                        edge.weighted_flux[(j, i - 1)] += a * dn;
                    }
                }
            }
        }
        if self.settings.stabilizer_form == StabilizerForm::Plain {
            edge.stabilizer_gram = DMatrix::identity(k, k);
        }
        edge
    }

    fn build_weak_gradient(&self) -> Result<DMatrix<f64>> {
        let m = self.dim();
        let k = self.k();
        let n = self.local_dim();
        let weighted = self.settings.gradient_form == WeakGradientForm::Weighted;
        let gram = if weighted { &self.weighted_grad_gram } else { &self.grad_gram };
        let mut rhs = DMatrix::zeros(m - 1, n);
        // (∇v_0, q) for interior unknowns l ≥ 1
        rhs.view_mut((0, 1), (m - 1, m - 1)).copy_from(gram);
        for (e, edge) in self.edges.iter().enumerate() {
            // −⟨Q_b v_0 − v_b, q·n⟩
            let ft = if weighted { edge.weighted_flux.transpose() } else { edge.flux.transpose() };
            let coupling = &ft * &edge.trace;
            let mut interior = rhs.view_mut((0, 0), (m - 1, m));
            interior -= coupling;
            let off = self.trace_offset(e);
            let mut traces = rhs.view_mut((0, off), (m - 1, k));
            traces += &ft;
        }
        let chol = gram.clone().cholesky().ok_or(Error::SingularGram {
            element: self.element,
        })?;
        Ok(chol.solve(&rhs))
    }

    /// `Q_b v_0 − v_b` on local edge `e` as a `k × local_dim` map.
    fn stabilizer_map(&self, e: usize) -> DMatrix<f64> {
        let k = self.k();
        let m = self.dim();
        let mut r = DMatrix::zeros(k, self.local_dim());
        r.view_mut((0, 0), (k, m)).copy_from(&self.edges[e].trace);
        let off = self.trace_offset(e);
        for j in 0..k {
            r[(j, off + j)] = -1.0;
        }
        r
    }

    /// `(A ∇_w u, ∇_w v)_T + h_T^{-1} ⟨Q_b u_0 − u_b, Q_b v_0 − v_b⟩_{∂T}`.
    pub fn local_stiffness(&self) -> DMatrix<f64> {
        let w = &self.weak_gradient;
        let mut k = w.transpose() * &self.weighted_grad_gram * w;
        for e in 0..3 {
            let r = self.stabilizer_map(e);
            k += r.transpose() * &self.edges[e].stabilizer_gram * &r / self.h;
        }
        (&k + k.transpose()) * 0.5
    }

    /// `(f, v_0)_T` for every interior basis function; traces get zero.
    pub fn local_load(&self, f: impl Fn(&Point, Side) -> f64) -> DVector<f64> {
        let mut load = DVector::zeros(self.local_dim());
        let rules = self.region_rules(self.settings.load_degree());
        for side in Side::BOTH {
            for (p, w) in rules[side.index()].iter() {
                let fv = w * f(p, side);
                let vals = self.basis_values(p, side);
                for l in 0..self.dim() {
                    load[l] += fv * vals[l];
                }
            }
        }
        load
    }

    /// Coefficients of `∇_w v` in the basis `{∇φ_i}_{i≥1}`.
    pub fn weak_gradient_of(&self, dofs: &DVector<f64>) -> DVector<f64> {
        &self.weak_gradient * dofs
    }

    /// Evaluate a gradient-space function with coefficients `g` at `p` on `side`.
    pub fn gradient_field(&self, g: &DVector<f64>, p: &Point, side: Side) -> Vector {
        let grads = self.basis_gradients(p, side);
        g.iter()
            .enumerate()
            .fold(Vector::zeros(), |acc, (i, gi)| acc + grads[i + 1] * *gi)
    }

    /// `‖∇_w v‖_T² + h_T^{-1} ‖Q_b v_0 − v_b‖_{∂T}²`.
    pub fn energy_norm_sq(&self, dofs: &DVector<f64>) -> f64 {
        let g = self.weak_gradient_of(dofs);
        let mut s = (g.transpose() * &self.grad_gram * &g)[(0, 0)];
        for e in 0..3 {
            s += (self.stabilizer_map(e) * dofs).norm_squared() / self.h;
        }
        s
    }

    /// `Q_0 f`: coefficients `(f, φ_i)_T` of the L2 projection onto `V_k(T)`.
    pub fn project_q0(&self, f: impl Fn(&Point, Side) -> f64, degree: usize) -> DVector<f64> {
        let mut c = DVector::zeros(self.dim());
        let rules = self.region_rules(degree);
        for side in Side::BOTH {
            for (p, w) in rules[side.index()].iter() {
                let fv = w * f(p, side);
                let vals = self.basis_values(p, side);
                for i in 0..self.dim() {
                    c[i] += fv * vals[i];
                }
            }
        }
        c
    }

    /// `Q_b g` on local edge `e`: Legendre coefficients `∫_e g ψ_j`.
    pub fn project_qb(
        &self,
        e: usize,
        g: impl Fn(&Point, Side) -> f64,
        degree: usize,
    ) -> DVector<f64> {
        let edge = &self.edges[e];
        let mut c = DVector::zeros(self.k());
        for (side, rule) in edge.rules(degree) {
            for (p, w) in rule.iter() {
                let s = edge.param(p);
                let gv = w * g(p, side);
                for j in 0..self.k() {
                    c[j] += gv * edge_legendre(j, s, edge.length);
                }
            }
        }
        c
    }

    /// Local unknowns `{Q_0 f, Q_b f}`.
    pub fn project_qh(&self, f: impl Fn(&Point, Side) -> f64 + Copy, degree: usize) -> DVector<f64> {
        let mut dofs = DVector::zeros(self.local_dim());
        dofs.rows_mut(0, self.dim()).copy_from(&self.project_q0(f, degree));
        for e in 0..3 {
            let off = self.trace_offset(e);
            dofs.rows_mut(off, self.k())
                .copy_from(&self.project_qb(e, f, degree));
        }
        dofs
    }

    /// Local unknowns for `v_0 = Σ a_i φ_i` with matching traces `v_b = Q_b v_0`.
    pub fn matching_traces(&self, a: &DVector<f64>) -> DVector<f64> {
        let mut dofs = DVector::zeros(self.local_dim());
        dofs.rows_mut(0, self.dim()).copy_from(a);
        for e in 0..3 {
            let off = self.trace_offset(e);
            dofs.rows_mut(off, self.k())
                .copy_from(&(&self.edges[e].trace * a));
        }
        dofs
    }

    /// Largest normalized jump residual over all basis functions, measured
    /// for the given constraint geometry. Values are scaled to be
    /// dimensionless: functions by `√|T|`, derivatives by `h_T`, fluxes by `max(A)`.
    pub fn jump_residual(&self, geometry: ConstraintGeometry) -> f64 {
        let m = self.dim();
        let k = self.k();
        let h = self.h;
        let scale = self.cut.area().sqrt();
        let amax = self.coeffs.a1.max(self.coeffs.a2);
        let mut worst: f64 = 0.0;
        for i in 0..m {
            let mut a = vec![0.0; m];
            a[i] = 1.0;
            let c1 = self.side_coefficients(Side::Inside, &a);
            let c2 = self.side_coefficients(Side::Outside, &a);
            let jump = |p: &Point| self.poly.value(&c1[..m], p) - self.poly.value(&c2[..m], p);
            let flux = |p: &Point, n: &Vector| {
                (self.coeffs.a1 * self.poly.gradient(&c1[..m], p).dot(n)
                    - self.coeffs.a2 * self.poly.gradient(&c2[..m], p).dot(n))
                    * h
                    / amax
            };
            match geometry {
                ConstraintGeometry::Chord => {
                    for q in 0..5 {
                        let s = q as f64 / 4.0;
                        let p = self.cut.d.point + (self.cut.e.point - self.cut.d.point) * s;
                        worst = worst.max(jump(&p).abs() * scale);
                        worst = worst.max(flux(&p, &self.cut.normal).abs() * scale);
                    }
                }
                ConstraintGeometry::Arc => {
                    let arc = self.cut.arc();
                    let (x, w) = gauss_legendre(8);
                    for j in 0..=k {
                        let mut vj = 0.0;
                        let mut fj = 0.0;
                        for (&t, &wt) in x.iter().zip(w) {
                            let s = 0.5 * (t + 1.0);
                            let p = arc.point(s);
                            let wl = 0.5 * wt * legendre(j, t);
                            vj += wl * jump(&p);
                            fj += wl * flux(&p, &arc.normal(s));
                        }
                        worst = worst.max(vj.abs() * scale);
                        if j < k {
                            worst = worst.max(fj.abs() * scale);
                        }
                    }
                }
            }
            if k == 2 {
                let lap = self.poly.laplacian();
                let l1: f64 = (0..m).map(|r| lap[r] * c1[r]).sum();
                let l2: f64 = (0..m).map(|r| lap[r] * c2[r]).sum();
                worst = worst.max(((self.coeffs.a1 * l1 - self.coeffs.a2 * l2) * h * h / amax).abs() * scale);
            }
        }
        worst
    }

    pub fn check_conditioning(&self, cond_max: f64) -> Result<()> {
        if self.gram_condition > cond_max || !self.gram_condition.is_finite() {
            return Err(Error::IllConditioned {
                element: self.element,
                condition: self.gram_condition,
            });
        }
        Ok(())
    }
}
