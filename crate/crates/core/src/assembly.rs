//! Global unknowns, element contributions and constraint elimination for the
//! coupled conforming / weak Galerkin scheme.
//!
//! Extended numbering: Lagrange nodes of non-interface elements first, then
//! `m_k` interior unknowns per interface element, then `k` trace unknowns per
//! edge of an interface element. Traces on coupling edges are slaves of the
//! neighboring Lagrange trace; boundary unknowns are pinned to the data.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{ElementClass, Point, Side};
use crate::ife::{Coefficients, IfeSettings, LocalIfeSpace};
use crate::lagrange::{edge_coupling_block, LagrangeElement};
use crate::mesh::{EdgeClass, MeshPartition};
use crate::poly::{dim_for_degree, edge_legendre};
use crate::quadrature::quadrature_on_edge;
use crate::sparse::CsrMatrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DofKind {
    /// Lagrange node: a vertex id, or `#vertices + edge id` for a midpoint.
    CgNode(usize),
    WgInterior { element: usize, index: usize },
    WgTrace { edge: usize, index: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DofRole {
    /// Position in the reduced system.
    Free(usize),
    Dirichlet,
    /// Determined by Lagrange unknowns of the non-interface neighbor.
    Slave,
}

#[derive(Clone, Debug)]
pub struct DofMap {
    pub k: usize,
    pub kinds: Vec<DofKind>,
    pub roles: Vec<DofRole>,
    /// Extended id of each Lagrange node, when the node is used.
    pub cg_dof: Vec<Option<usize>>,
    pub interior_start: Vec<Option<usize>>,
    pub trace_start: Vec<Option<usize>>,
    /// Extended id → combination of non-slave extended ids.
    pub combination: Vec<Vec<(usize, f64)>>,
    pub num_free: usize,
}

impl DofMap {
    pub fn build(mesh: &MeshPartition, k: usize) -> Result<Self> {
        if !(1..=2).contains(&k) {
            return Err(Error::InvalidConfig(format!("k must be 1 or 2, got {k}")));
        }
        let nv = mesh.vertices.len();
        let node_slots = if k == 1 { nv } else { nv + mesh.edges.len() };
        let mut used = vec![false; node_slots];
        let mut boundary = vec![false; node_slots];
        for t in 0..mesh.num_elements() {
            if mesh.is_interface(t) {
                continue;
            }
            for id in element_nodes(mesh, k, t) {
                used[id] = true;
            }
        }
        for v in 0..nv {
            boundary[v] = mesh.is_boundary_vertex(v);
        }
        if k == 2 {
            for (e, edge) in mesh.edges.iter().enumerate() {
                boundary[nv + e] = edge.is_boundary();
            }
        }

        let mut kinds = Vec::new();
        let mut roles = Vec::new();
        let mut cg_dof = vec![None; node_slots];
        for id in 0..node_slots {
            if used[id] {
                cg_dof[id] = Some(kinds.len());
                kinds.push(DofKind::CgNode(id));
                roles.push(if boundary[id] { DofRole::Dirichlet } else { DofRole::Free(0) });
            }
        }
        let m = dim_for_degree(k);
        let mut interior_start = vec![None; mesh.num_elements()];
        for t in mesh.interface_elements() {
            interior_start[t] = Some(kinds.len());
            for index in 0..m {
                kinds.push(DofKind::WgInterior { element: t, index });
                roles.push(DofRole::Free(0));
            }
        }
        let mut trace_start = vec![None; mesh.edges.len()];
        for e in mesh.edge_sets().interface_edges {
            trace_start[e] = Some(kinds.len());
            let role = match mesh.edge_class[e] {
                EdgeClass::CouplingEdge => DofRole::Slave,
                _ if mesh.edges[e].is_boundary() => DofRole::Dirichlet,
                _ => DofRole::Free(0),
            };
            for index in 0..k {
                kinds.push(DofKind::WgTrace { edge: e, index });
                roles.push(role);
            }
        }

        let mut num_free = 0;
        for r in roles.iter_mut() {
            if let DofRole::Free(i) = r {
                *i = num_free;
                num_free += 1;
            }
        }

        let mut combination: Vec<Vec<(usize, f64)>> = (0..kinds.len()).map(|i| vec![(i, 1.0)]).collect();
        for (e, start) in trace_start.iter().enumerate() {
            let Some(start) = *start else { continue };
            if mesh.edge_class[e] != EdgeClass::CouplingEdge {
                continue;
            }
            let [a, b] = mesh.edges[e].vertices;
            let mut nodes = vec![a, b];
            if k == 2 {
                nodes.push(nv + e);
            }
            let node_dofs: Vec<usize> = nodes
                .iter()
                .map(|&n| cg_dof[n].expect("coupling edge nodes belong to a Lagrange element"))
                .collect();
            let len = (mesh.vertices[b] - mesh.vertices[a]).norm();
            let c = edge_coupling_block(k, len);
            for j in 0..k {
                combination[start + j] = node_dofs
                    .iter()
                    .enumerate()
                    .map(|(n, &d)| (d, c[(j, n)]))
                    .collect();
            }
        }

        Ok(DofMap {
            k,
            kinds,
            roles,
            cg_dof,
            interior_start,
            trace_start,
            combination,
            num_free,
        })
    }

    pub fn len(&self) -> usize {
        self.kinds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kinds.is_empty()
    }

    pub fn count(&self, pred: impl Fn(&DofKind, &DofRole) -> bool) -> usize {
        self.kinds.iter().zip(&self.roles).filter(|(k, r)| pred(k, r)).count()
    }

    /// Extended values from free values and pinned (lift) values.
    pub fn expand(&self, free: &[f64], lift: &[f64]) -> Vec<f64> {
        let base: Vec<f64> = self
            .roles
            .iter()
            .enumerate()
            .map(|(i, r)| match r {
                DofRole::Free(f) => free[*f],
                DofRole::Dirichlet => lift[i],
                DofRole::Slave => 0.0,
            })
            .collect();
        self.combination
            .iter()
            .map(|c| c.iter().map(|&(d, w)| w * base[d]).sum())
            .collect()
    }
}

/// Lagrange node ids of element `t` in local node order.
pub fn element_nodes(mesh: &MeshPartition, k: usize, t: usize) -> Vec<usize> {
    let mut ids = mesh.triangles[t].to_vec();
    if k == 2 {
        let nv = mesh.vertices.len();
        ids.extend(mesh.triangle_edges[t].iter().map(|e| nv + e));
    }
    ids
}

/// Location of Lagrange node `id`.
pub fn node_point(mesh: &MeshPartition, id: usize) -> Point {
    let nv = mesh.vertices.len();
    if id < nv {
        mesh.vertices[id]
    } else {
        let [a, b] = mesh.edges[id - nv].vertices;
        Point::from((mesh.vertices[a].coords + mesh.vertices[b].coords) * 0.5)
    }
}

/// Mesh, local spaces and unknown numbering for one `(k, A, level)` run.
#[derive(Clone, Debug)]
pub struct Discretization {
    pub mesh: MeshPartition,
    pub coeffs: Coefficients,
    pub settings: IfeSettings,
    pub spaces: Vec<Option<LocalIfeSpace>>,
    pub dofs: DofMap,
}

impl Discretization {
    pub fn new(mesh: MeshPartition, coeffs: Coefficients, settings: IfeSettings) -> Result<Self> {
        let dofs = DofMap::build(&mesh, settings.k)?;
        let spaces = (0..mesh.num_elements())
            .into_par_iter()
            .map(|t| match &mesh.cuts[t] {
                Some(cut) => {
                    let reversed = std::array::from_fn(|i| mesh.edge_reversed(t, i));
                    LocalIfeSpace::build(cut, coeffs, settings, mesh.element_diameter[t], reversed).map(Some)
                }
                None => Ok(None),
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Discretization {
            mesh,
            coeffs,
            settings,
            spaces,
            dofs,
        })
    }

    pub fn k(&self) -> usize {
        self.settings.k
    }

    /// Side of a non-interface element.
    pub fn element_side(&self, t: usize) -> Side {
        match self.mesh.element_class[t] {
            ElementClass::NonInterface(s) => s,
            ElementClass::Interface => Side::Inside,
        }
    }

    pub fn lagrange(&self, t: usize) -> LagrangeElement {
        LagrangeElement::new(self.k(), self.mesh.triangle_points(t))
    }

    /// Extended unknowns of element `t` in local order.
    pub fn element_dofs(&self, t: usize) -> Vec<usize> {
        if let Some(space) = &self.spaces[t] {
            let start = self.dofs.interior_start[t].unwrap();
            let mut d: Vec<usize> = (start..start + space.dim()).collect();
            for &e in &self.mesh.triangle_edges[t] {
                let s = self.dofs.trace_start[e].unwrap();
                d.extend(s..s + self.k());
            }
            d
        } else {
            element_nodes(&self.mesh, self.k(), t)
                .into_iter()
                .map(|n| self.dofs.cg_dof[n].unwrap())
                .collect()
        }
    }

    /// Pinned values: `g` at boundary Lagrange nodes, `Q_b g` on boundary
    /// traces of interface elements, zero elsewhere.
    pub fn dirichlet_values(&self, g: impl Fn(&Point, Side) -> f64) -> Vec<f64> {
        let mesh = &self.mesh;
        let mut lift = vec![0.0; self.dofs.len()];
        let mut node_side = vec![Side::Inside; self.dofs.cg_dof.len()];
        for t in (0..mesh.num_elements()).filter(|&t| !mesh.is_interface(t)) {
            for n in element_nodes(mesh, self.k(), t) {
                node_side[n] = self.element_side(t);
            }
        }
        for (i, (kind, role)) in self.dofs.kinds.iter().zip(&self.dofs.roles).enumerate() {
            if *role != DofRole::Dirichlet {
                continue;
            }
            match *kind {
                DofKind::CgNode(n) => lift[i] = g(&node_point(mesh, n), node_side[n]),
                DofKind::WgTrace { edge, index } => {
                    lift[i] = self.edge_projection(edge, &g)[index];
                }
                DofKind::WgInterior { .. } => unreachable!("interior unknowns are never pinned"),
            }
        }
        lift
    }

    /// `Q_b g` on a mesh edge, in its global orientation.
    pub fn edge_projection(&self, edge: usize, g: &impl Fn(&Point, Side) -> f64) -> Vec<f64> {
        let [a, b] = self.mesh.edges[edge].vertices;
        let (pa, pb) = (self.mesh.vertices[a], self.mesh.vertices[b]);
        let len = (pb - pa).norm();
        let degree = self.settings.load_degree();
        let mut c = vec![0.0; self.k()];
        let tol = self.mesh.geom_tol;
        for (side, rule) in quadrature_on_edge(&pa, &pb, degree, self.mesh.interface.as_ref(), Side::Inside, tol) {
            for (p, w) in rule.iter() {
                let s = (p - pa).norm() / len;
                let gv = w * g(p, side);
                for (j, cj) in c.iter_mut().enumerate() {
                    *cj += gv * edge_legendre(j, s, len);
                }
            }
        }
        c
    }
}

/// Local matrix and load with the extended unknowns they act on.
#[derive(Clone, Debug)]
pub struct ElementContribution {
    pub element: usize,
    pub dofs: Vec<usize>,
    pub matrix: DMatrix<f64>,
    pub load: DVector<f64>,
}

/// `(A∇φ_i, ∇φ_j)_T` and `(f, φ_i)_T` on every non-interface element.
pub fn assemble_noninterface(
    disc: &Discretization,
    f: &(impl Fn(&Point, Side) -> f64 + Sync),
) -> Vec<ElementContribution> {
    let degree = disc.settings.load_degree();
    (0..disc.mesh.num_elements())
        .into_par_iter()
        .filter(|&t| !disc.mesh.is_interface(t))
        .map(|t| {
            let side = disc.element_side(t);
            let el = disc.lagrange(t);
            ElementContribution {
                element: t,
                dofs: disc.element_dofs(t),
                matrix: el.stiffness(disc.coeffs.on(side)),
                load: el.load(|p| f(p, side), degree),
            }
        })
        .collect()
}

/// Weak Galerkin block and interior load on every interface element.
pub fn assemble_interface(
    disc: &Discretization,
    f: &(impl Fn(&Point, Side) -> f64 + Sync),
) -> Vec<ElementContribution> {
    (0..disc.mesh.num_elements())
        .into_par_iter()
        .filter_map(|t| disc.spaces[t].as_ref().map(|s| (t, s)))
        .map(|(t, space)| ElementContribution {
            element: t,
            dofs: disc.element_dofs(t),
            matrix: space.local_stiffness(),
            load: space.local_load(f),
        })
        .collect()
}

/// Reduced system over free unknowns.
#[derive(Clone, Debug)]
pub struct GlobalSystem {
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
    /// Pinned values in the extended numbering (zero for other unknowns).
    pub lift: Vec<f64>,
}

impl GlobalSystem {
    pub fn write_matrix<W: std::io::Write>(&self, w: W) -> std::io::Result<()> {
        self.matrix.write_coordinate(w)
    }
}

/// Fold slaves into their masters by congruence and move pinned values to
/// the right-hand side: with `v = T v_free + c`, the reduced system is
/// `Tᵀ K T v_free = Tᵀ (F − K c)`.
pub fn apply_constraints(
    dofs: &DofMap,
    contributions: &[ElementContribution],
    lift: Vec<f64>,
) -> Result<GlobalSystem> {
    for (i, role) in dofs.roles.iter().enumerate() {
        if *role != DofRole::Dirichlet && lift[i] != 0.0 {
            return Err(Error::InconsistentConstraint {
                dof: i,
                first: 0.0,
                second: lift[i],
            });
        }
    }
    let constant: Vec<f64> = dofs
        .combination
        .iter()
        .map(|c| {
            c.iter()
                .filter(|(d, _)| dofs.roles[*d] == DofRole::Dirichlet)
                .map(|&(d, w)| w * lift[d])
                .sum()
        })
        .collect();
    let free_part: Vec<Vec<(usize, f64)>> = dofs
        .combination
        .iter()
        .map(|c| {
            c.iter()
                .filter_map(|&(d, w)| match dofs.roles[d] {
                    DofRole::Free(f) => Some((f, w)),
                    _ => None,
                })
                .collect()
        })
        .collect();

    let mut triplets = Vec::new();
    let mut rhs = vec![0.0; dofs.num_free];
    for c in contributions {
        let n = c.dofs.len();
        let local_const = DVector::from_iterator(n, c.dofs.iter().map(|&d| constant[d]));
        let load = &c.load - &c.matrix * local_const;
        for a in 0..n {
            let rows = &free_part[c.dofs[a]];
            for &(fa, wa) in rows {
                rhs[fa] += wa * load[a];
            }
            for b in 0..n {
                let kab = c.matrix[(a, b)];
                if kab == 0.0 {
                    continue;
                }
                for &(fa, wa) in rows {
                    for &(fb, wb) in &free_part[c.dofs[b]] {
                        triplets.push((fa, fb, wa * kab * wb));
                    }
                }
            }
        }
    }
    Ok(GlobalSystem {
        matrix: CsrMatrix::from_triplets(dofs.num_free, dofs.num_free, &triplets),
        rhs,
        lift,
    })
}

/// Assemble and reduce the full system for data `(f, g)`.
pub fn assemble_system(
    disc: &Discretization,
    f: &(impl Fn(&Point, Side) -> f64 + Sync),
    g: impl Fn(&Point, Side) -> f64,
) -> Result<GlobalSystem> {
    let mut contributions = assemble_noninterface(disc, f);
    contributions.extend(assemble_interface(disc, f));
    contributions.sort_by_key(|c| c.element);
    apply_constraints(&disc.dofs, &contributions, disc.dirichlet_values(g))
}
