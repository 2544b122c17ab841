use std::fmt;

use thiserror::Error;

use crate::quadcalc::QuadError;

/// Which scalar equation a solver failure belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Equation {
    /// `∂₂φ(Y₃, y₂, y₃) = y₁`, solved for `Y₃`.
    Determining,
    /// `∂₃Φ(Y₃, Y₂, y₃) + ε ∂₁φ(Y₃, y₂, y₃) = 0`, solved for `Y₂`.
    Compatibility,
    /// `∂ₚH(param, q, p) = v`, solved for `p`.
    Legendre,
}

impl fmt::Display for Equation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Equation::Determining => "determining equation d2 phi(Y3,y2,y3) = y1",
            Equation::Compatibility => "compatibility equation d3 Phi(Y3,Y2,y3) + eps d1 phi(Y3,y2,y3) = 0",
            Equation::Legendre => "Legendre equation dH/dp(param,q,p) = v",
        })
    }
}

fn fmt_point(p: &[f64; 3]) -> String {
    format!("({:e}, {:e}, {:e})", p[0], p[1], p[2])
}

/// Failures of the implicit solves.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolveError {
    #[error("{equation}: no convergence after {iterations} iterations at {}", fmt_point(point))]
    NewtonDivergence {
        equation: Equation,
        iterations: usize,
        point: [f64; 3],
    },
    #[error("{equation}: twist derivative {value:e} below threshold at {}", fmt_point(point))]
    TwistViolation {
        equation: Equation,
        value: f64,
        point: [f64; 3],
    },
    #[error("Legendre inversion failed at param={param:e}, q={q:e}, v={v:e}: {reason}")]
    LegendreFailure {
        param: f64,
        q: f64,
        v: f64,
        reason: String,
    },
    #[error("{equation}: non-finite value at {}", fmt_point(point))]
    NonFinite { equation: Equation, point: [f64; 3] },
    #[error("potential quadrature did not reach tolerance {tol:e} (estimate {estimate:e})")]
    Quadrature { tol: f64, estimate: f64 },
}

impl SolveError {
    /// Point attached to the failure, if any.
    pub fn point(&self) -> Option<[f64; 3]> {
        match self {
            SolveError::NewtonDivergence { point, .. }
            | SolveError::TwistViolation { point, .. }
            | SolveError::NonFinite { point, .. } => Some(*point),
            SolveError::LegendreFailure { .. } | SolveError::Quadrature { .. } => None,
        }
    }
}

/// Errors raised while constructing or running an integrator.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum SchemeError {
    #[error("twist coefficient {name} = {value:e} is degenerate")]
    TwistDegenerate { name: &'static str, value: f64 },
    #[error("step size too large: denominator {name} = {value:e} is within 1e-8 of zero")]
    StepTooLarge { name: &'static str, value: f64 },
    #[error("scheme {scheme} requires {requirement}")]
    Unsupported {
        scheme: String,
        requirement: &'static str,
    },
    #[error("unknown scheme {0}")]
    UnknownScheme(String),
    #[error(transparent)]
    Quad(#[from] QuadError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Field(#[from] FieldError),
}

/// Errors from field construction and potential extraction.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum FieldError {
    #[error("unknown field {0}")]
    UnknownField(String),
    #[error("quadrature did not reach tolerance {tol:e} (estimate {estimate:e})")]
    QuadratureFailure { tol: f64, estimate: f64 },
    #[error("matrix is not trace-free: trace = {0:e}")]
    NotTraceFree(f64),
    #[error("invalid field specification: {0}")]
    InvalidSpec(String),
}
