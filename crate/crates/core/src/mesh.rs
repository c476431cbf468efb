//! Uniform triangulations of `[-1, 1]²` classified against the interface.

use std::collections::HashMap;
use std::io::Write;

use crate::error::{Error, Result};
use crate::geometry::{
    classify_element, compute_cut, diameter, ElementClass, ElementCut, LevelSetInterface, Point,
    Side,
};

pub const DOMAIN_MIN: f64 = -1.0;
pub const DOMAIN_MAX: f64 = 1.0;

/// Root/degeneracy tolerance: `1e-12` times the domain diameter.
pub fn geom_tol() -> f64 {
    1e-12 * (DOMAIN_MAX - DOMAIN_MIN) * std::f64::consts::SQRT_2
}

/// Intervals per side at a refinement level: `N = 2^(level + 1)`.
pub fn intervals_for_level(level: usize) -> usize {
    1 << (level + 1)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EdgeClass {
    /// Shared by two non-interface elements.
    InteriorNonWG,
    /// Edge of an interface element that carries free or boundary WG traces.
    WGInterior,
    /// Shared by an interface and a non-interface element.
    CouplingEdge,
    /// Boundary edge of a non-interface element.
    BoundaryEdge,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MeshEdge {
    /// Global orientation runs from `vertices[0]` to `vertices[1]` (lower index first).
    pub vertices: [usize; 2],
    pub triangles: [Option<usize>; 2],
}

impl MeshEdge {
    pub fn is_boundary(&self) -> bool {
        self.triangles[1].is_none()
    }
}

/// Edge id sets used by the discretization.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct EdgeSets {
    /// All edges of interface elements (E_h).
    pub interface_edges: Vec<usize>,
    /// Edges between an interface and a non-interface element (E_h^I).
    pub coupling_edges: Vec<usize>,
    pub boundary_edges: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MeshPartition {
    pub level: usize,
    pub intervals: usize,
    pub vertices: Vec<Point>,
    /// Counterclockwise vertex triples.
    pub triangles: Vec<[usize; 3]>,
    /// Local edge `i` of a triangle joins its vertices `i` and `i + 1`.
    pub triangle_edges: Vec<[usize; 3]>,
    pub edges: Vec<MeshEdge>,
    pub element_class: Vec<ElementClass>,
    pub edge_class: Vec<EdgeClass>,
    pub cuts: Vec<Option<ElementCut>>,
    pub element_diameter: Vec<f64>,
    pub h: f64,
    pub interface: Option<LevelSetInterface>,
    pub geom_tol: f64,
}

pub fn build_mesh(level: usize, interface: Option<&LevelSetInterface>) -> Result<MeshPartition> {
    build_mesh_with_intervals(level, intervals_for_level(level), interface)
}

/// Like [`build_mesh`] with an explicit number of intervals per side.
pub fn build_mesh_with_intervals(
    level: usize,
    n: usize,
    interface: Option<&LevelSetInterface>,
) -> Result<MeshPartition> {
    if level == 0 || n == 0 {
        return Err(Error::InvalidConfig(format!(
            "mesh level and intervals must be positive (level {level}, N {n})"
        )));
    }
    let tol = geom_tol();
    let step = (DOMAIN_MAX - DOMAIN_MIN) / n as f64;
    let mut vertices = Vec::with_capacity((n + 1) * (n + 1));
    for j in 0..=n {
        for i in 0..=n {
            // exact endpoints keep boundary detection robust
            let coord = |k: usize| {
                if k == n {
                    DOMAIN_MAX
                } else {
                    DOMAIN_MIN + k as f64 * step
                }
            };
            vertices.push(Point::new(coord(i), coord(j)));
        }
    }
    let vid = |i: usize, j: usize| j * (n + 1) + i;
    let mut triangles = Vec::with_capacity(2 * n * n);
    for j in 0..n {
        for i in 0..n {
            let (v00, v10, v11, v01) = (vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1));
            triangles.push([v00, v10, v11]);
            triangles.push([v00, v11, v01]);
        }
    }

    let mut edge_index: HashMap<(usize, usize), usize> = HashMap::new();
    let mut edges: Vec<MeshEdge> = Vec::new();
    let mut triangle_edges = Vec::with_capacity(triangles.len());
    for (t, tri) in triangles.iter().enumerate() {
        let mut local = [0usize; 3];
        for i in 0..3 {
            let (a, b) = (tri[i], tri[(i + 1) % 3]);
            let key = (a.min(b), a.max(b));
            let id = *edge_index.entry(key).or_insert_with(|| {
                edges.push(MeshEdge {
                    vertices: [key.0, key.1],
                    triangles: [None, None],
                });
                edges.len() - 1
            });
            let slot = &mut edges[id].triangles;
            if slot[0].is_none() {
                slot[0] = Some(t);
            } else {
                slot[1] = Some(t);
            }
            local[i] = id;
        }
        triangle_edges.push(local);
    }

    let mut element_class = Vec::with_capacity(triangles.len());
    let mut cuts = Vec::with_capacity(triangles.len());
    let mut element_diameter = Vec::with_capacity(triangles.len());
    for (t, tri) in triangles.iter().enumerate() {
        let pts = [vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]];
        element_diameter.push(diameter(&pts));
        match interface {
            Some(iface) => {
                let class = classify_element(&pts, iface, tol)?;
                let cut = match class {
                    ElementClass::Interface => Some(compute_cut(t, &pts, iface, tol)?),
                    ElementClass::NonInterface(_) => None,
                };
                element_class.push(class);
                cuts.push(cut);
            }
            None => {
                element_class.push(ElementClass::NonInterface(Side::Inside));
                cuts.push(None);
            }
        }
    }

    let is_iface = |t: usize| element_class[t] == ElementClass::Interface;
    let edge_class = edges
        .iter()
        .map(|e| match e.triangles {
            [Some(a), Some(b)] => match (is_iface(a), is_iface(b)) {
                (true, true) => EdgeClass::WGInterior,
                (false, false) => EdgeClass::InteriorNonWG,
                _ => EdgeClass::CouplingEdge,
            },
            [Some(a), None] => {
                if is_iface(a) {
                    EdgeClass::WGInterior
                } else {
                    EdgeClass::BoundaryEdge
                }
            }
            _ => unreachable!("every edge has at least one triangle"),
        })
        .collect();
    let h = element_diameter.iter().copied().fold(0.0, f64::max);

    Ok(MeshPartition {
        level,
        intervals: n,
        vertices,
        triangles,
        triangle_edges,
        edges,
        element_class,
        edge_class,
        cuts,
        element_diameter,
        h,
        interface: interface.copied(),
        geom_tol: tol,
    })
}

impl MeshPartition {
    pub fn num_elements(&self) -> usize {
        self.triangles.len()
    }

    pub fn triangle_points(&self, t: usize) -> [Point; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    pub fn is_interface(&self, t: usize) -> bool {
        self.element_class[t] == ElementClass::Interface
    }

    pub fn interface_elements(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.num_elements()).filter(|&t| self.is_interface(t))
    }

    /// Whether local edge `i` of triangle `t` runs against the global edge orientation.
    pub fn edge_reversed(&self, t: usize, i: usize) -> bool {
        let tri = self.triangles[t];
        tri[i] > tri[(i + 1) % 3]
    }

    pub fn is_boundary_vertex(&self, v: usize) -> bool {
        let p = self.vertices[v];
        p.x == DOMAIN_MIN || p.x == DOMAIN_MAX || p.y == DOMAIN_MIN || p.y == DOMAIN_MAX
    }

    pub fn edge_sets(&self) -> EdgeSets {
        let mut sets = EdgeSets::default();
        for (id, e) in self.edges.iter().enumerate() {
            let touches_iface = e.triangles.iter().flatten().any(|&t| self.is_interface(t));
            if touches_iface {
                sets.interface_edges.push(id);
            }
            if self.edge_class[id] == EdgeClass::CouplingEdge {
                sets.coupling_edges.push(id);
            }
            if e.is_boundary() {
                sets.boundary_edges.push(id);
            }
        }
        sets
    }

    /// Plain-text dump: one `v`, `t` or `e` record per line.
    pub fn write_dump<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "# level {} intervals {} h {:.16e}", self.level, self.intervals, self.h)?;
        for (i, p) in self.vertices.iter().enumerate() {
            writeln!(w, "v {i} {:.16e} {:.16e}", p.x, p.y)?;
        }
        for (i, (tri, class)) in self.triangles.iter().zip(&self.element_class).enumerate() {
            let c = match class {
                ElementClass::Interface => "interface",
                ElementClass::NonInterface(Side::Inside) => "inside",
                ElementClass::NonInterface(Side::Outside) => "outside",
            };
            writeln!(w, "t {i} {} {} {} {c}", tri[0], tri[1], tri[2])?;
        }
        for (i, (e, class)) in self.edges.iter().zip(&self.edge_class).enumerate() {
            writeln!(w, "e {i} {} {} {class:?}", e.vertices[0], e.vertices[1])?;
        }
        Ok(())
    }
}
