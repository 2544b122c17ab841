//! Volume-preserving one-step integrators for divergence-free vector fields
//! in ℝ³, built from generating one-forms `λ = φ dx_l + Φ dX_m`.

pub mod cli;
pub mod error;
pub mod fields;
pub mod genmap;
pub mod perm3;
pub mod potential;
pub mod quadcalc;
pub mod schemes;
pub mod verify;

pub use error::{Equation, FieldError, SchemeError, SolveError};
pub use fields::{Field3, FieldSpec, Gauge, LinearField, PotentialTriple};
pub use perm3::{ClassLabel, PairClass, Permutation};
pub use potential::PotentialFn;
pub use quadcalc::{AffineExpr, QuadForm, Sym};
pub use schemes::{AffineMap3, SchemeHandle, SchemeKind};
pub use verify::{OrderReport, VolumeAudit};
