//! Scalar functions on ℝ³ with first (and optionally second) partials.
//!
//! These serve both as the potentials `F¹, F², F³` of a divergence-free
//! field and as the generating functions `φ, Φ` of an implicit map.

use std::fmt;
use std::sync::Arc;

use nalgebra::{Matrix3, Vector3};

use crate::error::SolveError;
use crate::quadcalc::{QuadForm, Sym};

pub type V3 = Vector3<f64>;
pub type M3 = Matrix3<f64>;

/// A scalar function `ℝ³ → ℝ`. Evaluation may fail for potentials that are
/// themselves defined implicitly (discrete Lagrangians).
pub trait Potential: Send + Sync {
    fn value(&self, y: &V3) -> Result<f64, SolveError>;
    fn grad(&self, y: &V3) -> Result<V3, SolveError>;
    /// Analytic second partials, if the potential provides them.
    fn hess(&self, _y: &V3) -> Option<Result<M3, SolveError>> {
        None
    }
    /// True when the function is a polynomial of degree at most two.
    fn is_quadratic(&self) -> bool {
        false
    }
}

/// Shared handle to a [`Potential`].
#[derive(Clone)]
pub struct PotentialFn(Arc<dyn Potential>);

impl fmt::Debug for PotentialFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("PotentialFn")
    }
}

impl PotentialFn {
    pub fn new<P: Potential + 'static>(p: P) -> Self {
        PotentialFn(Arc::new(p))
    }

    pub fn zero() -> Self {
        Self::new(Zero)
    }

    /// From infallible closures for the value and gradient.
    pub fn from_fn<F, G>(value: F, grad: G) -> Self
    where
        F: Fn(&V3) -> f64 + Send + Sync + 'static,
        G: Fn(&V3) -> V3 + Send + Sync + 'static,
    {
        Self::new(Closure {
            value: Box::new(value),
            grad: Box::new(grad),
            hess: None,
        })
    }

    /// As [`PotentialFn::from_fn`] with an analytic Hessian.
    pub fn from_fn_with_hess<F, G, H>(value: F, grad: G, hess: H) -> Self
    where
        F: Fn(&V3) -> f64 + Send + Sync + 'static,
        G: Fn(&V3) -> V3 + Send + Sync + 'static,
        H: Fn(&V3) -> M3 + Send + Sync + 'static,
    {
        Self::new(Closure {
            value: Box::new(value),
            grad: Box::new(grad),
            hess: Some(Box::new(hess)),
        })
    }

    /// Restriction of a quadratic form to three of the six symbols: argument
    /// `i` of the result is symbol `slots[i]`, all other symbols are zero.
    pub fn from_quad(q: QuadForm, slots: [Sym; 3]) -> Self {
        Self::new(QuadPotential { q, slots })
    }

    pub fn value(&self, y: &V3) -> Result<f64, SolveError> {
        self.0.value(y)
    }

    pub fn grad(&self, y: &V3) -> Result<V3, SolveError> {
        self.0.grad(y)
    }

    pub fn analytic_hess(&self, y: &V3) -> Option<Result<M3, SolveError>> {
        self.0.hess(y)
    }

    pub fn is_quadratic(&self) -> bool {
        self.0.is_quadratic()
    }

    /// Second partials, falling back to central differences of the
    /// gradient with relative step `fd_step`.
    pub fn hessian(&self, y: &V3, fd_step: f64) -> Result<M3, SolveError> {
        if let Some(h) = self.0.hess(y) {
            return h;
        }
        fd_hessian(self, y, fd_step)
    }

    /// Single second partial `∂²/∂y_i∂y_j` (0-based), via [`Self::hessian`].
    pub fn second(&self, y: &V3, i: usize, j: usize, fd_step: f64) -> Result<f64, SolveError> {
        if self.0.hess(y).is_none() {
            // One gradient column is enough.
            let delta = fd_step * (1.0 + y[j].abs());
            let mut yp = *y;
            let mut ym = *y;
            yp[j] += delta;
            ym[j] -= delta;
            let gp = self.grad(&yp)?;
            let gm = self.grad(&ym)?;
            return Ok((gp[i] - gm[i]) / (yp[j] - ym[j]));
        }
        Ok(self.hessian(y, fd_step)?[(i, j)])
    }

    /// `g(y) = f(z)` with `z_i = y_{map[i]}` (0-based indices).
    pub fn permuted(&self, map: [usize; 3]) -> Self {
        Self::new(Permuted {
            inner: self.clone(),
            map,
        })
    }

    /// `(f · p)(y₁, y₂, y₃) = f(y₃, y₂, y₁)`.
    pub fn reversed(&self) -> Self {
        self.permuted([2, 1, 0])
    }

    pub fn scaled(&self, k: f64) -> Self {
        Self::new(Combination(vec![(k, self.clone())]))
    }

    /// `Σ kᵢ fᵢ`.
    pub fn combination(terms: Vec<(f64, PotentialFn)>) -> Self {
        Self::new(Combination(terms))
    }
}

fn fd_hessian(f: &PotentialFn, y: &V3, fd_step: f64) -> Result<M3, SolveError> {
    let mut h = M3::zeros();
    for j in 0..3 {
        let delta = fd_step * (1.0 + y[j].abs());
        let mut yp = *y;
        let mut ym = *y;
        yp[j] += delta;
        ym[j] -= delta;
        let col = (f.grad(&yp)? - f.grad(&ym)?) / (yp[j] - ym[j]);
        h.set_column(j, &col);
    }
    Ok((h + h.transpose()) * 0.5)
}

struct Zero;

impl Potential for Zero {
    fn value(&self, _y: &V3) -> Result<f64, SolveError> {
        Ok(0.0)
    }
    fn grad(&self, _y: &V3) -> Result<V3, SolveError> {
        Ok(V3::zeros())
    }
    fn hess(&self, _y: &V3) -> Option<Result<M3, SolveError>> {
        Some(Ok(M3::zeros()))
    }
    fn is_quadratic(&self) -> bool {
        true
    }
}

type ScalarFn = Box<dyn Fn(&V3) -> f64 + Send + Sync>;
type VectorFn = Box<dyn Fn(&V3) -> V3 + Send + Sync>;
type MatrixFn = Box<dyn Fn(&V3) -> M3 + Send + Sync>;

struct Closure {
    value: ScalarFn,
    grad: VectorFn,
    hess: Option<MatrixFn>,
}

impl Potential for Closure {
    fn value(&self, y: &V3) -> Result<f64, SolveError> {
        Ok((self.value)(y))
    }
    fn grad(&self, y: &V3) -> Result<V3, SolveError> {
        Ok((self.grad)(y))
    }
    fn hess(&self, y: &V3) -> Option<Result<M3, SolveError>> {
        self.hess.as_ref().map(|h| Ok(h(y)))
    }
}

struct QuadPotential {
    q: QuadForm,
    slots: [Sym; 3],
}

impl QuadPotential {
    fn embed(&self, y: &V3) -> [f64; 6] {
        let mut s = [0.0; 6];
        for (i, sym) in self.slots.iter().enumerate() {
            s[sym.index() - 1] = y[i];
        }
        s
    }
}

impl Potential for QuadPotential {
    fn value(&self, y: &V3) -> Result<f64, SolveError> {
        Ok(self.q.eval(&self.embed(y)))
    }
    fn grad(&self, y: &V3) -> Result<V3, SolveError> {
        let g = self.q.gradient(&self.embed(y));
        Ok(V3::from_fn(|i, _| g[self.slots[i].index() - 1]))
    }
    fn hess(&self, _y: &V3) -> Option<Result<M3, SolveError>> {
        Some(Ok(M3::from_fn(|i, j| {
            self.q.second(self.slots[i], self.slots[j])
        })))
    }
    fn is_quadratic(&self) -> bool {
        true
    }
}

struct Permuted {
    inner: PotentialFn,
    map: [usize; 3],
}

impl Permuted {
    fn pull(&self, y: &V3) -> V3 {
        V3::new(y[self.map[0]], y[self.map[1]], y[self.map[2]])
    }
}

impl Potential for Permuted {
    fn value(&self, y: &V3) -> Result<f64, SolveError> {
        self.inner.value(&self.pull(y))
    }
    fn grad(&self, y: &V3) -> Result<V3, SolveError> {
        let g = self.inner.grad(&self.pull(y))?;
        let mut out = V3::zeros();
        for i in 0..3 {
            out[self.map[i]] += g[i];
        }
        Ok(out)
    }
    fn hess(&self, y: &V3) -> Option<Result<M3, SolveError>> {
        let h = self.inner.analytic_hess(&self.pull(y))?;
        Some(h.map(|h| {
            let mut out = M3::zeros();
            for i in 0..3 {
                for k in 0..3 {
                    out[(self.map[i], self.map[k])] += h[(i, k)];
                }
            }
            out
        }))
    }
    fn is_quadratic(&self) -> bool {
        self.inner.is_quadratic()
    }
}

struct Combination(Vec<(f64, PotentialFn)>);

impl Potential for Combination {
    fn value(&self, y: &V3) -> Result<f64, SolveError> {
        self.0
            .iter()
            .try_fold(0.0, |acc, (k, f)| Ok(acc + k * f.value(y)?))
    }
    fn grad(&self, y: &V3) -> Result<V3, SolveError> {
        self.0
            .iter()
            .try_fold(V3::zeros(), |acc, (k, f)| Ok(acc + f.grad(y)? * *k))
    }
    fn hess(&self, y: &V3) -> Option<Result<M3, SolveError>> {
        let mut acc = M3::zeros();
        for (k, f) in &self.0 {
            match f.analytic_hess(y)? {
                Ok(h) => acc += h * *k,
                Err(e) => return Some(Err(e)),
            }
        }
        Some(Ok(acc))
    }
    fn is_quadratic(&self) -> bool {
        self.0.iter().all(|(_, f)| f.is_quadratic())
    }
}
