//! Manufactured solutions: closed-form `u`, `∇u` and `f = −∇·(A∇u)` per side.

use std::f64::consts::PI;

use crate::geometry::{Point, Side, Vector};
use crate::ife::Coefficients;

pub trait ExactSolution: Sync {
    fn value(&self, p: &Point, side: Side) -> f64;
    fn gradient(&self, p: &Point, side: Side) -> Vector;
    /// `f = −∇·(A ∇u)` on `side`.
    fn source(&self, p: &Point, side: Side) -> f64;
}

/// Radial interface solution on the circle `x² + y² = 1/3`:
/// `u = cos(π r²)/A1` inside, `cos(π r²)/A2 + ½(1/A1 − 1/A2)` outside.
///
/// Both `[u]` and `[A ∂u/∂n]` vanish on the circle, and `A u` has the same
/// Laplacian on both sides, so `f = 4π sin(π r²) + 4π² r² cos(π r²)` is smooth.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CosineInterfaceSolution {
    pub coeffs: Coefficients,
}

impl CosineInterfaceSolution {
    pub fn new(coeffs: Coefficients) -> Self {
        CosineInterfaceSolution { coeffs }
    }
}

impl ExactSolution for CosineInterfaceSolution {
    fn value(&self, p: &Point, side: Side) -> f64 {
        let r2 = p.coords.norm_squared();
        let Coefficients { a1, a2 } = self.coeffs;
        match side {
            Side::Inside => (PI * r2).cos() / a1,
            Side::Outside => (PI * r2).cos() / a2 + 0.5 * (1.0 / a1 - 1.0 / a2),
        }
    }

    fn gradient(&self, p: &Point, side: Side) -> Vector {
        let r2 = p.coords.norm_squared();
        // ∇cos(π r²) = −2π sin(π r²) (x, y)
        p.coords * (-2.0 * PI * (PI * r2).sin() / self.coeffs.on(side))
    }

    fn source(&self, p: &Point, _side: Side) -> f64 {
        let r2 = p.coords.norm_squared();
        4.0 * PI * (PI * r2).sin() + 4.0 * PI * PI * r2 * (PI * r2).cos()
    }
}

/// `u = a + b x + c y` with a single coefficient on both sides, `f = 0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinearSolution {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl ExactSolution for LinearSolution {
    fn value(&self, p: &Point, _side: Side) -> f64 {
        self.a + self.b * p.x + self.c * p.y
    }

    fn gradient(&self, _p: &Point, _side: Side) -> Vector {
        Vector::new(self.b, self.c)
    }

    fn source(&self, _p: &Point, _side: Side) -> f64 {
        0.0
    }
}

/// `u = sin(πx/2) cos(πy/3) + x y` with `A = 1` everywhere; used with the
/// interface disabled.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SmoothSolution;

impl ExactSolution for SmoothSolution {
    fn value(&self, p: &Point, _side: Side) -> f64 {
        (0.5 * PI * p.x).sin() * (PI * p.y / 3.0).cos() + p.x * p.y
    }

    fn gradient(&self, p: &Point, _side: Side) -> Vector {
        let (sx, cx) = (0.5 * PI * p.x).sin_cos();
        let (sy, cy) = (PI * p.y / 3.0).sin_cos();
        Vector::new(0.5 * PI * cx * cy + p.y, -PI / 3.0 * sx * sy + p.x)
    }

    fn source(&self, p: &Point, _side: Side) -> f64 {
        let s = (0.5 * PI * p.x).sin() * (PI * p.y / 3.0).cos();
        (0.25 + 1.0 / 9.0) * PI * PI * s
    }
}
