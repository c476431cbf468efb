//! Discrete error norms, observed convergence orders and report output.

use std::io::Write;

use nalgebra::DVector;
use rayon::prelude::*;

use crate::assembly::Discretization;
use crate::error::{Error, Result};
use crate::exact::ExactSolution;
use crate::geometry::Side;

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ErrorNorms {
    /// `‖P_h u − u_h‖_{1,h}`.
    pub energy: f64,
    /// `‖e_0‖`: `u − u_h` on non-interface elements, `Q_0 u − u_0` on interface ones.
    pub l2: f64,
    /// `max |u − u_h|` over error-quadrature points (`u_0` on interface elements).
    pub linf: f64,
}

#[derive(Clone, Copy, Default)]
struct Partial {
    energy_sq: f64,
    l2_sq: f64,
    linf: f64,
}

/// Errors of the extended solution vector `ext` against `exact`.
pub fn compute_errors(disc: &Discretization, ext: &[f64], exact: &dyn ExactSolution) -> ErrorNorms {
    let degree = disc.settings.error_degree();
    let parts: Vec<Partial> = (0..disc.mesh.num_elements())
        .into_par_iter()
        .map(|t| {
            let dofs = disc.element_dofs(t);
            let local: Vec<f64> = dofs.iter().map(|&d| ext[d]).collect();
            match &disc.spaces[t] {
                None => {
                    let side = disc.element_side(t);
                    let el = disc.lagrange(t);
                    let mut p = Partial::default();
                    for (x, w) in el.rule(degree).iter() {
                        let e = exact.value(x, side) - el.value(&local, x);
                        let g = exact.gradient(x, side) - el.gradient(&local, x);
                        p.energy_sq += w * g.norm_squared();
                        p.l2_sq += w * e * e;
                        p.linf = p.linf.max(e.abs());
                    }
                    p
                }
                Some(space) => {
                    let uh = DVector::from_vec(local);
                    let qh = space.project_qh(|x, s| exact.value(x, s), degree);
                    let diff = &qh - &uh;
                    let m = space.dim();
                    let d0: Vec<f64> = diff.rows(0, m).iter().copied().collect();
                    let u0: Vec<f64> = uh.rows(0, m).iter().copied().collect();
                    let mut p = Partial {
                        energy_sq: space.energy_norm_sq(&diff),
                        ..Partial::default()
                    };
                    let rules = space.region_rules(degree);
                    for side in Side::BOTH {
                        for (x, w) in rules[side.index()].iter() {
                            let e0 = space.value(&d0, x, side);
                            p.l2_sq += w * e0 * e0;
                            let e = exact.value(x, side) - space.value(&u0, x, side);
                            p.linf = p.linf.max(e.abs());
                        }
                    }
                    p
                }
            }
        })
        .collect();
    let total = parts.iter().fold(Partial::default(), |acc, p| Partial {
        energy_sq: acc.energy_sq + p.energy_sq,
        l2_sq: acc.l2_sq + p.l2_sq,
        linf: acc.linf.max(p.linf),
    });
    ErrorNorms {
        energy: total.energy_sq.max(0.0).sqrt(),
        l2: total.l2_sq.max(0.0).sqrt(),
        linf: total.linf,
    }
}

/// `order_i = log2(e_{i−1} / e_i)` for successive halvings of `h`.
pub fn convergence_orders(errors: &[f64]) -> Result<Vec<f64>> {
    if let Some((index, &value)) = errors.iter().enumerate().find(|(_, &e)| !(e > 0.0)) {
        return Err(Error::NonPositiveError { index, value });
    }
    Ok(errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect())
}

#[derive(Clone, Debug, PartialEq)]
pub struct LevelResult {
    pub level: usize,
    pub intervals: usize,
    pub h: f64,
    pub errors: ErrorNorms,
    pub free_dofs: usize,
    pub interface_elements: usize,
    pub relative_residual: f64,
    pub seconds: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceReport {
    pub k: usize,
    pub a1: f64,
    pub a2: f64,
    pub depth: usize,
    pub quad_offset: usize,
    pub rows: Vec<LevelResult>,
}

/// Order column: empty for the first row.
fn orders_or_blank(values: &[f64]) -> Vec<Option<f64>> {
    let mut out = vec![None];
    match convergence_orders(values) {
        Ok(o) => out.extend(o.into_iter().map(Some)),
        Err(_) => out.extend(values.windows(2).map(|_| None)),
    }
    out.truncate(values.len());
    out
}

impl ConvergenceReport {
    pub fn energy(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.errors.energy).collect()
    }

    pub fn l2(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.errors.l2).collect()
    }

    pub fn linf(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.errors.linf).collect()
    }

    pub fn energy_orders(&self) -> Result<Vec<f64>> {
        convergence_orders(&self.energy())
    }

    pub fn l2_orders(&self) -> Result<Vec<f64>> {
        convergence_orders(&self.l2())
    }

    pub fn linf_orders(&self) -> Result<Vec<f64>> {
        convergence_orders(&self.linf())
    }

    pub fn total_seconds(&self) -> f64 {
        self.rows.iter().map(|r| r.seconds).sum()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "level,h,energy_err,energy_order,l2_err,l2_order,linf_err,linf_order")?;
        let cols = [self.energy(), self.l2(), self.linf()];
        let orders: Vec<Vec<Option<f64>>> = cols.iter().map(|c| orders_or_blank(c)).collect();
        let fmt = |o: Option<f64>| o.map(|v| format!("{v:.4}")).unwrap_or_default();
        for (i, r) in self.rows.iter().enumerate() {
            writeln!(
                w,
                "{},{:.6e},{:.6e},{},{:.6e},{},{:.6e},{}",
                r.level,
                r.h,
                cols[0][i],
                fmt(orders[0][i]),
                cols[1][i],
                fmt(orders[1][i]),
                cols[2][i],
                fmt(orders[2][i]),
            )?;
        }
        Ok(())
    }

    /// `level log10(energy) log10(l2) log10(linf)` per line.
    pub fn write_plot_data<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "# level log10_energy log10_l2 log10_linf")?;
        for r in &self.rows {
            writeln!(
                w,
                "{} {:.6} {:.6} {:.6}",
                r.level,
                r.errors.energy.log10(),
                r.errors.l2.log10(),
                r.errors.linf.log10()
            )?;
        }
        Ok(())
    }

    /// Fixed-width table in the usual error/order layout.
    pub fn summary(&self) -> String {
        let mut s = format!(
            "k = {}, (A1, A2) = ({}, {})\n{:>3} {:>12} {:>7} {:>12} {:>7} {:>12} {:>7}\n",
            self.k, self.a1, self.a2, "n", "energy", "order", "L2", "order", "Linf", "order"
        );
        let cols = [self.energy(), self.l2(), self.linf()];
        let orders: Vec<Vec<Option<f64>>> = cols.iter().map(|c| orders_or_blank(c)).collect();
        let fmt = |o: Option<f64>| o.map(|v| format!("{v:.4}")).unwrap_or_else(|| "-".into());
        for (i, r) in self.rows.iter().enumerate() {
            s += &format!(
                "{:>3} {:>12.4e} {:>7} {:>12.4e} {:>7} {:>12.4e} {:>7}\n",
                r.intervals,
                cols[0][i],
                fmt(orders[0][i]),
                cols[1][i],
                fmt(orders[1][i]),
                cols[2][i],
                fmt(orders[2][i]),
            );
        }
        s
    }
}
