//! End-to-end runs: mesh → local spaces → assembly → solve → errors.

use std::ops::RangeInclusive;
use std::time::Instant;

use crate::analysis::{compute_errors, ConvergenceReport, LevelResult};
use crate::assembly::{assemble_system, Discretization, GlobalSystem};
use crate::error::{Error, Result};
use crate::exact::{CosineInterfaceSolution, ExactSolution};
use crate::geometry::LevelSetInterface;
use crate::ife::{Coefficients, ConstraintGeometry, IfeSettings, StabilizerForm, WeakGradientForm};
use crate::mesh::{build_mesh_with_intervals, intervals_for_level};
use crate::solver::{solve, SolveStats, SolverConfig};

#[derive(Clone, Debug, PartialEq)]
pub struct StudyConfig {
    pub k: usize,
    pub levels: RangeInclusive<usize>,
    pub coeffs: Coefficients,
    pub depth: usize,
    pub quad_offset: usize,
    pub constraint: ConstraintGeometry,
    pub gradient_form: WeakGradientForm,
    pub stabilizer_form: StabilizerForm,
    pub solver: SolverConfig,
    /// Intervals per side at level 1; doubled per level. `None` gives `N = 4`.
    pub base_intervals: Option<usize>,
}

impl StudyConfig {
    pub fn new(k: usize, a1: f64, a2: f64) -> Result<Self> {
        let defaults = IfeSettings::new(k);
        Ok(StudyConfig {
            k,
            levels: 1..=5,
            coeffs: Coefficients::new(a1, a2)?,
            depth: defaults.depth,
            quad_offset: 0,
            constraint: defaults.constraint,
            gradient_form: defaults.gradient_form,
            stabilizer_form: defaults.stabilizer_form,
            solver: SolverConfig::default(),
            base_intervals: None,
        })
    }

    pub fn settings(&self) -> IfeSettings {
        IfeSettings {
            k: self.k,
            depth: self.depth,
            quad_offset: self.quad_offset,
            constraint: self.constraint,
            gradient_form: self.gradient_form,
            stabilizer_form: self.stabilizer_form,
        }
    }

    pub fn intervals(&self, level: usize) -> usize {
        match self.base_intervals {
            Some(n0) => n0 << (level - 1),
            None => intervals_for_level(level),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=2).contains(&self.k) {
            return Err(Error::InvalidConfig(format!("k must be 1 or 2, got {}", self.k)));
        }
        if *self.levels.start() == 0 || self.levels.is_empty() {
            return Err(Error::InvalidConfig(format!(
                "levels must be a non-empty range starting at 1 or above, got {:?}",
                self.levels
            )));
        }
        if *self.levels.end() > 9 {
            return Err(Error::InvalidConfig("levels above 9 are not supported".into()));
        }
        if self.depth > 16 {
            return Err(Error::InvalidConfig(format!("depth {} exceeds 16", self.depth)));
        }
        if self.quad_offset > 8 {
            return Err(Error::InvalidConfig(format!("quadrature offset {} exceeds 8", self.quad_offset)));
        }
        if self.base_intervals == Some(0) {
            return Err(Error::InvalidConfig("base intervals must be positive".into()));
        }
        self.solver.validate()
    }
}

/// A solved level with everything needed for post-processing.
pub struct LevelSolve {
    pub disc: Discretization,
    pub system: GlobalSystem,
    /// Solution in the extended numbering.
    pub solution: Vec<f64>,
    pub stats: SolveStats,
}

pub fn discretize(config: &StudyConfig, level: usize, interface: Option<&LevelSetInterface>) -> Result<Discretization> {
    let mesh = build_mesh_with_intervals(level, config.intervals(level), interface)?;
    Discretization::new(mesh, config.coeffs, config.settings())
}

pub fn solve_discretization(disc: Discretization, exact: &dyn ExactSolution, solver: &SolverConfig) -> Result<LevelSolve> {
    let f = |p: &_, s| exact.source(p, s);
    let system = assemble_system(&disc, &f, |p, s| exact.value(p, s))?;
    let (free, stats) = solve(&system.matrix, &system.rhs, solver)?;
    let solution = disc.dofs.expand(&free, &system.lift);
    Ok(LevelSolve {
        disc,
        system,
        solution,
        stats,
    })
}

pub fn run_level(
    config: &StudyConfig,
    level: usize,
    interface: Option<&LevelSetInterface>,
    exact: &dyn ExactSolution,
) -> Result<(LevelResult, LevelSolve)> {
    let start = Instant::now();
    let disc = discretize(config, level, interface)?;
    let solved = solve_discretization(disc, exact, &config.solver)?;
    let errors = compute_errors(&solved.disc, &solved.solution, exact);
    let mesh = &solved.disc.mesh;
    let result = LevelResult {
        level,
        intervals: mesh.intervals,
        h: mesh.h,
        errors,
        free_dofs: solved.disc.dofs.num_free,
        interface_elements: mesh.interface_elements().count(),
        relative_residual: solved.stats.relative_residual,
        seconds: start.elapsed().as_secs_f64(),
    };
    Ok((result, solved))
}

/// Convergence study with an arbitrary exact solution.
pub fn run_study_with(
    config: &StudyConfig,
    interface: Option<&LevelSetInterface>,
    exact: &dyn ExactSolution,
) -> Result<ConvergenceReport> {
    config.validate()?;
    let mut rows = Vec::new();
    for level in config.levels.clone() {
        rows.push(run_level(config, level, interface, exact)?.0);
    }
    Ok(ConvergenceReport {
        k: config.k,
        a1: config.coeffs.a1,
        a2: config.coeffs.a2,
        depth: config.depth,
        quad_offset: config.quad_offset,
        rows,
    })
}

/// Convergence study for the radial interface problem on `x² + y² = 1/3`.
pub fn run_study(config: &StudyConfig) -> Result<ConvergenceReport> {
    let circle = LevelSetInterface::reference_circle();
    let exact = CosineInterfaceSolution::new(config.coeffs);
    run_study_with(config, Some(&circle), &exact)
}
