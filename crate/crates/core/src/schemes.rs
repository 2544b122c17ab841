//! Integrator factories.
//!
//! | scheme            | class | `(σ, Σ)`              | fields  |
//! |-------------------|-------|-----------------------|---------|
//! | se-se             | SE    | `(3,2,1), (1,2,3)`    | any     |
//! | dl-se             | SEDL  | `(3,2,1), (1,3,2)`    | any     |
//! | dl-dl             | DL    | `(3,2,1), (3,1,2)`    | any     |
//! | s1-quispel, s1-az | S1    | `(3,2,1), (3,2,1)`    | linear  |
//! | s2-quispel        | S2    | `(3,2,1), (2,3,1)`    | linear  |
//!
//! `quispel-corrected` is the semi-implicit map with Quispel's correction
//! term, and `euler`, `rk4` are the explicit baselines.

use std::fmt;
use std::str::FromStr;

use crate::error::{Equation, SchemeError, SolveError};
use crate::fields::{field_from_potentials, Field3, Gauge, LinearField, PotentialTriple};
use crate::genmap::{
    adjoint, permuted_step, solve_scalar, GeneratingFormSpec, Predictor, SolverConfig,
};
use crate::perm3::{classify, ClassLabel, Permutation};
use crate::potential::{Potential, PotentialFn, M3, V3};
use crate::quadcalc::sym::{x1, x2, x3, X1, X2, X3};
use crate::quadcalc::{AffineExpr, QuadForm, Sym};

mod printed;

pub use printed::{
    fidelity_report, printed_s1_az, printed_s1_quispel, printed_s2_quispel, FidelityEntry,
};

/// Denominators closer than this to zero raise [`SchemeError::StepTooLarge`].
pub const DENOM_GUARD: f64 = 1e-8;
/// Twist coefficients (`a₁₃`, `a₁₂`) below this raise
/// [`SchemeError::TwistDegenerate`].
pub const TWIST_GUARD: f64 = 1e-8;
/// Smallest admissible `|∂²F/∂p²|` in a Legendre inversion.
pub const LEGENDRE_THRESHOLD: f64 = 1e-8;

fn perm(image: [usize; 3]) -> Permutation {
    Permutation::new(image).expect("valid permutation literal")
}

pub fn se_se_pair() -> (Permutation, Permutation) {
    (Permutation::FLIP, Permutation::IDENTITY)
}

pub fn dl_se_pair() -> (Permutation, Permutation) {
    (Permutation::FLIP, perm([1, 3, 2]))
}

pub fn dl_dl_pair() -> (Permutation, Permutation) {
    (Permutation::FLIP, perm([3, 1, 2]))
}

pub fn s1_pair() -> (Permutation, Permutation) {
    (Permutation::FLIP, Permutation::FLIP)
}

pub fn s2_pair() -> (Permutation, Permutation) {
    (Permutation::FLIP, perm([2, 3, 1]))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SchemeKind {
    SeSe,
    DlSe,
    DlDl,
    S1Quispel,
    S1Az,
    S2Quispel,
    QuispelCorrected,
    Euler,
    Rk4,
}

impl SchemeKind {
    pub const ALL: [SchemeKind; 9] = [
        SchemeKind::SeSe,
        SchemeKind::DlSe,
        SchemeKind::DlDl,
        SchemeKind::S1Quispel,
        SchemeKind::S1Az,
        SchemeKind::S2Quispel,
        SchemeKind::QuispelCorrected,
        SchemeKind::Euler,
        SchemeKind::Rk4,
    ];

    /// The volume-preserving schemes.
    pub const PRESERVING: [SchemeKind; 7] = [
        SchemeKind::SeSe,
        SchemeKind::DlSe,
        SchemeKind::DlDl,
        SchemeKind::S1Quispel,
        SchemeKind::S1Az,
        SchemeKind::S2Quispel,
        SchemeKind::QuispelCorrected,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SchemeKind::SeSe => "se-se",
            SchemeKind::DlSe => "dl-se",
            SchemeKind::DlDl => "dl-dl",
            SchemeKind::S1Quispel => "s1-quispel",
            SchemeKind::S1Az => "s1-az",
            SchemeKind::S2Quispel => "s2-quispel",
            SchemeKind::QuispelCorrected => "quispel-corrected",
            SchemeKind::Euler => "euler",
            SchemeKind::Rk4 => "rk4",
        }
    }

    pub fn label(self) -> Option<ClassLabel> {
        match self {
            SchemeKind::SeSe => Some(ClassLabel::SE),
            SchemeKind::DlSe => Some(ClassLabel::SEDL),
            SchemeKind::DlDl => Some(ClassLabel::DL),
            SchemeKind::S1Quispel | SchemeKind::S1Az | SchemeKind::QuispelCorrected => {
                Some(ClassLabel::S1)
            }
            SchemeKind::S2Quispel => Some(ClassLabel::S2),
            SchemeKind::Euler | SchemeKind::Rk4 => None,
        }
    }

    pub fn pair(self) -> Option<(Permutation, Permutation)> {
        match self {
            SchemeKind::SeSe => Some(se_se_pair()),
            SchemeKind::DlSe => Some(dl_se_pair()),
            SchemeKind::DlDl => Some(dl_dl_pair()),
            SchemeKind::S1Quispel | SchemeKind::S1Az | SchemeKind::QuispelCorrected => {
                Some(s1_pair())
            }
            SchemeKind::S2Quispel => Some(s2_pair()),
            SchemeKind::Euler | SchemeKind::Rk4 => None,
        }
    }

    /// Schemes defined only for linear fields.
    pub fn needs_linear(self) -> bool {
        matches!(
            self,
            SchemeKind::S1Quispel
                | SchemeKind::S1Az
                | SchemeKind::S2Quispel
                | SchemeKind::QuispelCorrected
        )
    }

    pub fn is_volume_preserving(self) -> bool {
        !matches!(self, SchemeKind::Euler | SchemeKind::Rk4)
    }
}

impl fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SchemeKind {
    type Err = SchemeError;
    fn from_str(s: &str) -> Result<Self, SchemeError> {
        SchemeKind::ALL
            .into_iter()
            .find(|k| k.name() == s.trim())
            .ok_or_else(|| SchemeError::UnknownScheme(s.to_string()))
    }
}

/// `X = M x + d`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AffineMap3 {
    pub m: M3,
    pub d: V3,
}

impl AffineMap3 {
    pub fn new(m: M3, d: V3) -> Self {
        AffineMap3 { m, d }
    }

    pub fn identity() -> Self {
        AffineMap3::new(M3::identity(), V3::zeros())
    }

    pub fn apply(&self, x: &V3) -> V3 {
        self.m * x + self.d
    }

    pub fn det(&self) -> f64 {
        crate::verify::det3(&self.m)
    }

    pub fn inverse(&self) -> Option<AffineMap3> {
        let mi = self.m.try_inverse()?;
        Some(AffineMap3::new(mi, -(mi * self.d)))
    }

    /// `self ∘ inner`.
    pub fn compose(&self, inner: &AffineMap3) -> AffineMap3 {
        AffineMap3::new(self.m * inner.m, self.m * inner.d + self.d)
    }
}

/// Solves three affine equations `eᵢ(x, X) = 0` for `X` as an affine
/// function of `x`.
pub fn solve_affine_system(eqs: &[AffineExpr; 3]) -> Result<AffineMap3, SchemeError> {
    let mut q = M3::zeros();
    let mut p = M3::zeros();
    let mut r = V3::zeros();
    for (i, e) in eqs.iter().enumerate() {
        for j in 0..3 {
            p[(i, j)] = e.coeff(Sym::old(j + 1));
            q[(i, j)] = e.coeff(Sym::new(j + 1));
        }
        r[i] = e.constant;
    }
    let det = crate::verify::det3(&q);
    let scale = q.abs().max().max(f64::MIN_POSITIVE);
    if !det.is_finite() || det.abs() <= 1e-14 * scale.powi(3) {
        return Err(SchemeError::TwistDegenerate {
            name: "implicit system determinant",
            value: det,
        });
    }
    let lu = q.lu();
    let degenerate = || SchemeError::TwistDegenerate {
        name: "implicit system determinant",
        value: det,
    };
    let m = lu.solve(&(-p)).ok_or_else(degenerate)?;
    let d = lu.solve(&(-r)).ok_or_else(degenerate)?;
    Ok(AffineMap3::new(m, d))
}

struct Roles {
    sign: f64,
    xp: Sym,
    xo: Sym,
    xm: Sym,
    big_p: Sym,
    big_o: Sym,
    big_m: Sym,
}

fn roles(sigma: Permutation, big_sigma: Permutation) -> Roles {
    Roles {
        sign: classify(sigma, big_sigma).sign() as f64,
        xp: Sym::old(sigma.apply(1)),
        xo: Sym::old(sigma.apply(2)),
        xm: Sym::old(sigma.apply(3)),
        big_p: Sym::new(big_sigma.apply(1)),
        big_o: Sym::new(big_sigma.apply(2)),
        big_m: Sym::new(big_sigma.apply(3)),
    }
}

/// The defining equations of the pair, as residuals:
///
/// ```text
/// x₊ − ∂_{x∘}φ,   ∂_{X₋}φ − ∂_{x₋}Φ,   X₊ + sign(τ) ∂_{X∘}Φ
/// ```
pub fn defining_equations(
    phi: &QuadForm,
    big_phi: &QuadForm,
    sigma: Permutation,
    big_sigma: Permutation,
) -> [AffineExpr; 3] {
    let r = roles(sigma, big_sigma);
    [
        AffineExpr::var(r.xp) - phi.partial(r.xo),
        phi.partial(r.big_m) - big_phi.partial(r.xm),
        AffineExpr::var(r.big_p) + big_phi.partial(r.big_o) * r.sign,
    ]
}

/// The affine map generated by quadratic potentials, by linear algebra.
pub fn assemble_affine(
    phi: &QuadForm,
    big_phi: &QuadForm,
    sigma: Permutation,
    big_sigma: Permutation,
) -> Result<AffineMap3, SchemeError> {
    solve_affine_system(&defining_equations(phi, big_phi, sigma, big_sigma))
}

/// Residuals of the defining equations at `(x, X)`.
pub fn defining_residuals(
    phi: &QuadForm,
    big_phi: &QuadForm,
    sigma: Permutation,
    big_sigma: Permutation,
    x: &V3,
    big_x: &V3,
) -> [f64; 3] {
    let s = [x[0], x[1], x[2], big_x[0], big_x[1], big_x[2]];
    defining_equations(phi, big_phi, sigma, big_sigma).map(|e| e.eval(&s))
}

fn guard_denominator(name: &'static str, value: f64) -> Result<f64, SchemeError> {
    if value.abs() < DENOM_GUARD || !value.is_finite() {
        Err(SchemeError::StepTooLarge { name, value })
    } else {
        Ok(value)
    }
}

fn guard_twist(name: &'static str, value: f64) -> Result<f64, SchemeError> {
    if value.abs() < TWIST_GUARD {
        Err(SchemeError::TwistDegenerate { name, value })
    } else {
        Ok(value)
    }
}

fn var(s: Sym) -> AffineExpr {
    AffineExpr::var(s)
}

/// `aᵢ₁ s₁ + aᵢ₂ s₂ + aᵢ₃ s₃`.
fn row(l: &LinearField, i: usize, s: [Sym; 3]) -> AffineExpr {
    AffineExpr::linear(
        &[(l.a(i, 1), s[0]), (l.a(i, 2), s[1]), (l.a(i, 3), s[2])],
        0.0,
    )
}

/// Which semi-implicit system the correction method starts from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Orientation {
    /// `X₁, X₂, X₃` updated from `(x₁,X₂,x₃)`, `(x₁,X₂,x₃)`, `(X₁,X₂,x₃)`;
    /// correction `h²a₁₁a₃₃(X₂ − c)` in the second equation.
    S1,
    /// `X₁, X₂, X₃` updated from `(x₁,x₂,X₃)`, `(X₁,x₂,X₃)`, `(x₁,x₂,X₃)`;
    /// correction `h²a₁₁a₂₂(X₃ − c)` in the third equation.
    S2,
}

/// The semi-implicit system as residuals, with or without the correction.
pub fn quispel_system(
    l: &LinearField,
    h: f64,
    orientation: Orientation,
    corrected: bool,
) -> Result<[AffineExpr; 3], SchemeError> {
    let a = |i, j| l.a(i, j);
    match orientation {
        Orientation::S1 => {
            let g = guard_denominator("1 - h a22", 1.0 - h * a(2, 2))?;
            let e1 = var(X1) - var(x1) - row(l, 1, [x1, X2, x3]) * h;
            let mut e2 = var(X2) - var(x2) - row(l, 2, [x1, X2, x3]) * h;
            let e3 = var(X3) - var(x3) - row(l, 3, [X1, X2, x3]) * h;
            let k = h * h * a(1, 1) * a(3, 3);
            if corrected && k != 0.0 {
                guard_denominator("k1", 1.0 + k - h * a(2, 2))?;
                let c = AffineExpr::linear(&[(h * a(2, 1), x1), (h * a(2, 3), x3)], 0.0) * (1.0 / g);
                e2 = e2 + (var(X2) - c) * k;
            }
            Ok([e1, e2, e3])
        }
        Orientation::S2 => {
            let g = guard_denominator("1 - h a33", 1.0 - h * a(3, 3))?;
            let e1 = var(X1) - var(x1) - row(l, 1, [x1, x2, X3]) * h;
            let e2 = var(X2) - var(x2) - row(l, 2, [X1, x2, X3]) * h;
            let mut e3 = var(X3) - var(x3) - row(l, 3, [x1, x2, X3]) * h;
            let k = h * h * a(1, 1) * a(2, 2);
            if corrected && k != 0.0 {
                guard_denominator("m1", 1.0 + k - h * a(3, 3))?;
                let c = AffineExpr::linear(&[(h * a(3, 1), x1), (h * a(3, 2), x2)], 0.0) * (1.0 / g);
                e3 = e3 + (var(X3) - c) * k;
            }
            Ok([e1, e2, e3])
        }
    }
}

pub fn quispel_map(
    l: &LinearField,
    h: f64,
    orientation: Orientation,
    corrected: bool,
) -> Result<AffineMap3, SchemeError> {
    solve_affine_system(&quispel_system(l, h, orientation, corrected)?)
}

/// One step of the corrected semi-implicit map in the S₁ orientation.
pub fn quispel_corrected_step(l: &LinearField, h: f64, x: &V3) -> Result<V3, SchemeError> {
    Ok(quispel_map(l, h, Orientation::S1, true)?.apply(x))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum S1Variant {
    Quispel,
    Az,
}

/// Quadratic potentials in the form taken by [`assemble_affine`].
#[derive(Clone, Debug, PartialEq)]
pub struct DerivedPotentials {
    pub phi: QuadForm,
    pub big_phi: QuadForm,
    pub sigma: Permutation,
    pub big_sigma: Permutation,
    /// Coefficient of `x₂` discarded when integrating the compatibility
    /// residual. Zero up to round-off when the construction is consistent.
    pub dropped_x2: f64,
}

impl DerivedPotentials {
    pub fn assemble(&self) -> Result<AffineMap3, SchemeError> {
        assemble_affine(&self.phi, &self.big_phi, self.sigma, self.big_sigma)
    }

    pub fn spec(&self) -> GeneratingFormSpec {
        GeneratingFormSpec::from_roles_quads(&self.phi, &self.big_phi, self.sigma, self.big_sigma)
    }
}

/// `C̃` from `r = ∂_{X₁}φ − ∂_{x₁}Φ₀` after eliminating the new variables.
fn gauge_term(r: AffineExpr) -> (QuadForm, f64) {
    let mut r = r;
    let k = x2.index() - 1;
    let dropped = r.coeffs[k];
    r.coeffs[k] = 0.0;
    (r.antiderivative(x1), dropped)
}

pub fn derive_s1_potentials(
    l: &LinearField,
    h: f64,
    variant: S1Variant,
) -> Result<DerivedPotentials, SchemeError> {
    guard_twist("a13", l.a(1, 3))?;
    let (sigma, big_sigma) = s1_pair();
    let (phi, big_phi, dropped_x2) = match variant {
        S1Variant::Quispel => {
            let [e1, e2, e3] = quispel_system(l, h, Orientation::S1, true)?;
            let big_x2 = e2.solve_linear(X2)?;
            let x3_tilde = e1.substitute(X2, &big_x2)?.solve_linear(x3)?;
            let phi = x3_tilde.antiderivative(x2);
            let x3_hat = e1.solve_linear(x3)?;
            let big_x3 = e3.substitute(x3, &x3_hat)?.solve_linear(X3)?;
            let phi0 = -big_x3.antiderivative(X2);
            let r = (phi.partial(X1) - phi0.partial(x1))
                .substitute(X2, &big_x2)?
                .substitute(x3, &x3_tilde)?;
            let (c, dropped) = gauge_term(r);
            (phi, phi0 + c, dropped)
        }
        S1Variant::Az => {
            let a = |i, j| l.a(i, j);
            let e1 = AffineExpr::linear(
                &[
                    (1.0, X1),
                    (-(1.0 + h * a(1, 1)), x1),
                    (-h * a(1, 2), x2),
                    (-h * a(1, 3), x3),
                ],
                0.0,
            );
            let x3_tilde = e1.solve_linear(x3)?;
            let phi = x3_tilde.antiderivative(x2);
            let x3_hat = x3_tilde.substitute(x2, &var(X2))?;
            let l1 = guard_denominator("l1", 1.0 - h * a(1, 2) * a(2, 3) / a(1, 3))?;
            let rhs = x3_hat * (1.0 + h * a(3, 3))
                + AffineExpr::linear(&[(h * a(3, 1), x1), (h * a(3, 2), X2)], 0.0)
                + AffineExpr::linear(&[(a(2, 1), x1), (a(2, 2), X2)], 0.0)
                    * (h * a(1, 2) / a(1, 3));
            let big_x3 = rhs * (1.0 / l1);
            let phi0 = -big_x3.antiderivative(X2);
            let x3_star = x3_tilde.substitute(x2, &AffineExpr::zero())?;
            let c_x1 = (AffineExpr::linear(&[(a(2, 1), x1)], 0.0) + x3_star * a(2, 3))
                * (-1.0 / a(1, 3));
            (phi, phi0 + c_x1.antiderivative(x1), 0.0)
        }
    };
    Ok(DerivedPotentials {
        phi,
        big_phi,
        sigma,
        big_sigma,
        dropped_x2,
    })
}

pub fn derive_s2_potentials(l: &LinearField, h: f64) -> Result<DerivedPotentials, SchemeError> {
    guard_twist("a12", l.a(1, 2))?;
    guard_twist("a13", l.a(1, 3))?;
    let (sigma, big_sigma) = s2_pair();
    let [e1, e2, e3] = quispel_system(l, h, Orientation::S2, true)?;
    let big_x3 = e3.solve_linear(X3)?;
    let x3_tilde = e1.substitute(X3, &big_x3)?.solve_linear(x3)?;
    let phi = x3_tilde.antiderivative(x2);
    let x2_hat = e1.solve_linear(x2)?;
    let big_x2 = e2.substitute(x2, &x2_hat)?.solve_linear(X2)?;
    let phi0 = big_x2.antiderivative(X3);
    let r = (phi.partial(X1) - phi0.partial(x1))
        .substitute(X3, &big_x3)?
        .substitute(x3, &x3_tilde)?;
    let (c, dropped_x2) = gauge_term(r);
    Ok(DerivedPotentials {
        phi,
        big_phi: phi0 + c,
        sigma,
        big_sigma,
        dropped_x2,
    })
}

/// Solves `∂ₚF(param, q, p) = v` for `p`, starting from `seed`. Quadratic
/// `F` is inverted in one exact Newton step.
pub fn legendre(
    f: &PotentialFn,
    param: f64,
    q: f64,
    v: f64,
    seed: f64,
    cfg: &SolverConfig,
) -> Result<f64, SolveError> {
    let fail = |reason: String| SolveError::LegendreFailure { param, q, v, reason };
    let eval = |p: f64| -> Result<(f64, f64), SolveError> {
        let y = V3::new(param, q, p);
        Ok((f.grad(&y)?[2] - v, f.second(&y, 2, 2, cfg.fd_step)?))
    };
    let quadratic = f.is_quadratic();
    // For quadratic F one Newton step from any point is exact; starting at
    // zero avoids cancellation against the seed.
    let mut p = if quadratic { 0.0 } else { seed };
    for _ in 0..cfg.max_iter {
        let (r, d) = eval(p)?;
        if !(d.abs() >= LEGENDRE_THRESHOLD) {
            return Err(fail(format!("d2F/dp2 = {d:e} is below 1e-8")));
        }
        let next = p - r / d;
        if !next.is_finite() {
            return Err(fail("non-finite iterate".into()));
        }
        let dp = next - p;
        p = next;
        if quadratic {
            return Ok(p);
        }
        if r.abs() <= cfg.newton_tol * (1.0 + v.abs()) || dp.abs() <= 4.0 * f64::EPSILON * (1.0 + p.abs()) {
            let (r, d) = eval(p)?;
            if r != 0.0 && d.abs() >= LEGENDRE_THRESHOLD {
                let polished = p - r / d;
                if polished.is_finite() && eval(polished)?.0.abs() <= r.abs() {
                    p = polished;
                }
            }
            return Ok(p);
        }
    }
    Err(fail(format!("no convergence after {} iterations", cfg.max_iter)))
}

/// `L_d(param, q, Q) = h [p̄ v − H(param, q, p̄)]` with `v = (Q − q)/h` and
/// `∂ₚH(param, q, p̄) = v`.
#[derive(Clone, Debug)]
pub struct DiscreteLagrangian {
    pub ham: PotentialFn,
    pub h: f64,
    /// Starting momentum for the Legendre solve.
    pub seed: f64,
    pub cfg: SolverConfig,
}

impl DiscreteLagrangian {
    pub fn new(ham: PotentialFn, h: f64, seed: f64, cfg: SolverConfig) -> Self {
        DiscreteLagrangian { ham, h, seed, cfg }
    }

    /// `p̄` at `(param, q, Q)`.
    pub fn momentum(&self, y: &V3) -> Result<f64, SolveError> {
        let v = (y[2] - y[1]) / self.h;
        legendre(&self.ham, y[0], y[1], v, self.seed, &self.cfg)
    }
}

impl Potential for DiscreteLagrangian {
    fn value(&self, y: &V3) -> Result<f64, SolveError> {
        let p = self.momentum(y)?;
        let v = (y[2] - y[1]) / self.h;
        Ok(self.h * (p * v - self.ham.value(&V3::new(y[0], y[1], p))?))
    }

    fn grad(&self, y: &V3) -> Result<V3, SolveError> {
        let p = self.momentum(y)?;
        let g = self.ham.grad(&V3::new(y[0], y[1], p))?;
        Ok(V3::new(-self.h * g[0], -p - self.h * g[1], p))
    }

    fn hess(&self, y: &V3) -> Option<Result<M3, SolveError>> {
        Some((|| {
            let h = self.h;
            let p = self.momentum(y)?;
            let hh = self.ham.hessian(&V3::new(y[0], y[1], p), self.cfg.fd_step)?;
            let pp = hh[(2, 2)];
            let p_big = 1.0 / (h * pp);
            let p_q = -(1.0 + h * hh[(2, 1)]) / (h * pp);
            let p_par = -hh[(2, 0)] / pp;
            let l_qq = -p_q - h * (hh[(1, 1)] + hh[(1, 2)] * p_q);
            let l_qpar = -p_par - h * (hh[(1, 0)] + hh[(1, 2)] * p_par);
            let l_parpar = -h * (hh[(0, 0)] + hh[(0, 2)] * p_par);
            Ok(M3::new(
                l_parpar, l_qpar, p_par, //
                l_qpar, l_qq, p_q, //
                p_par, p_q, p_big,
            ))
        })())
    }

    fn is_quadratic(&self) -> bool {
        self.ham.is_quadratic()
    }
}

fn from_quad(q: QuadForm, slots: [Sym; 3]) -> PotentialFn {
    PotentialFn::from_quad(q, slots)
}

/// `φ = x₂X₃ + hF¹(x₁,x₂,X₃)`, `Φ = x₁X₂ + hF³(x₁,X₂,X₃)`.
pub fn se_se_spec(f1: &PotentialFn, f3: &PotentialFn, h: f64) -> GeneratingFormSpec {
    let (sigma, big_sigma) = se_se_pair();
    let phi = PotentialFn::combination(vec![
        (1.0, from_quad(QuadForm::monomial(1.0, x2, X3), [x1, x2, X3])),
        (h, f1.clone()),
    ]);
    let big_phi = PotentialFn::combination(vec![
        (1.0, from_quad(QuadForm::monomial(1.0, x1, X2), [x1, X2, X3])),
        (h, f3.clone()),
    ]);
    GeneratingFormSpec::from_roles(&phi, [x1, x2, X3], &big_phi, [x1, X2, X3], sigma, big_sigma)
}

/// The SE+SE potentials as quadratic forms for quadratic `F¹`, `F³`.
pub fn se_se_quads(q1: &QuadForm, q3: &QuadForm, h: f64) -> Result<DerivedPotentials, SchemeError> {
    let (sigma, big_sigma) = se_se_pair();
    let phi = QuadForm::monomial(1.0, x2, X3) + q1.substitute(x3, &var(X3))? * h;
    let big_phi = QuadForm::monomial(1.0, x1, X2)
        + q3.substitute(x2, &var(X2))?.substitute(x3, &var(X3))? * h;
    Ok(DerivedPotentials {
        phi,
        big_phi,
        sigma,
        big_sigma,
        dropped_x2: 0.0,
    })
}

/// `φ = −L_d¹(x₁, x₂, X₂)` with `H¹ = F¹`, `Φ = −x₁X₃ + hF²(x₁,X₂,X₃)`.
pub fn dl_se_spec(
    f1: &PotentialFn,
    f2: &PotentialFn,
    h: f64,
    seed: f64,
    cfg: &SolverConfig,
) -> GeneratingFormSpec {
    let (sigma, big_sigma) = dl_se_pair();
    let ld1 = PotentialFn::new(DiscreteLagrangian::new(f1.clone(), h, seed, *cfg));
    let big_phi = PotentialFn::combination(vec![
        (-1.0, from_quad(QuadForm::monomial(1.0, x1, X3), [x1, X2, X3])),
        (h, f2.clone()),
    ]);
    GeneratingFormSpec::from_roles(
        &ld1.scaled(-1.0),
        [x1, x2, X2],
        &big_phi,
        [x1, X2, X3],
        sigma,
        big_sigma,
    )
}

/// `φ = −L_d¹(x₁, x₂, X₂)`, `Φ = L_d²(X₂, x₁, X₁)` with
/// `H²(param, q, p) = −F²(q, param, p)`.
pub fn dl_dl_spec(
    f1: &PotentialFn,
    f2: &PotentialFn,
    h: f64,
    seed: f64,
    cfg: &SolverConfig,
) -> GeneratingFormSpec {
    let (sigma, big_sigma) = dl_dl_pair();
    let ld1 = PotentialFn::new(DiscreteLagrangian::new(f1.clone(), h, seed, *cfg));
    let h2 = f2.permuted([1, 0, 2]).scaled(-1.0);
    let ld2 = PotentialFn::new(DiscreteLagrangian::new(h2, h, seed, *cfg));
    GeneratingFormSpec::from_roles(
        &ld1.scaled(-1.0),
        [x1, x2, X2],
        &ld2,
        [X2, x1, X1],
        sigma,
        big_sigma,
    )
}

/// Explicit Euler predictor `x + h a(x)` and its reverse `X − h a(X)`.
pub fn euler_predictor(field: &Field3, h: f64) -> Predictor {
    let (f, b) = (field.clone(), field.clone());
    Predictor::new(move |x: &V3| x + f.eval(x) * h, move |x: &V3| x - b.eval(x) * h)
}

fn point(x: &V3) -> [f64; 3] {
    [x[0], x[1], x[2]]
}

fn finite(v: V3, equation: Equation, x: &V3) -> Result<V3, SolveError> {
    if v.iter().all(|c| c.is_finite()) {
        Ok(v)
    } else {
        Err(SolveError::NonFinite {
            equation,
            point: point(x),
        })
    }
}

/// Momentum form of the DL step, with gauge `F³ = 0`:
///
/// ```text
/// x₃ = x̃₃ + h∂₂F¹(x₁,x₂,x̃₃),   X₂ = x₂ + h∂₃F¹(x₁,x₂,x̃₃)
/// X₃ = x̃₃ + h∂₁F²(x₁,X₂,X₃),   X₁ = x₁ − h∂₃F²(x₁,X₂,X₃)
/// ```
pub fn dl_step(
    f1: &PotentialFn,
    f2: &PotentialFn,
    h: f64,
    x: &V3,
    cfg: &SolverConfig,
) -> Result<V3, SolveError> {
    let fd = cfg.fd_step;
    let g1 = |t: f64| -> Result<(f64, f64), SolveError> {
        let y = V3::new(x[0], x[1], t);
        Ok((t + h * f1.grad(&y)?[1] - x[2], 1.0 + h * f1.second(&y, 1, 2, fd)?))
    };
    let (mid, _) = solve_scalar(Equation::Determining, &g1, x[2].abs(), point(x), x[2], cfg)?;
    let big2 = x[1] + h * f1.grad(&V3::new(x[0], x[1], mid))?[2];
    let g2 = |t: f64| -> Result<(f64, f64), SolveError> {
        let y = V3::new(x[0], big2, t);
        Ok((t - mid - h * f2.grad(&y)?[0], 1.0 - h * f2.second(&y, 0, 2, fd)?))
    };
    let (big3, _) = solve_scalar(Equation::Compatibility, &g2, mid.abs(), point(x), mid, cfg)?;
    let big1 = x[0] - h * f2.grad(&V3::new(x[0], big2, big3))?[2];
    finite(V3::new(big1, big2, big3), Equation::Compatibility, x)
}

/// Inverse of [`dl_step`].
pub fn dl_inverse_step(
    f1: &PotentialFn,
    f2: &PotentialFn,
    h: f64,
    big_x: &V3,
    cfg: &SolverConfig,
) -> Result<V3, SolveError> {
    let fd = cfg.fd_step;
    let b = big_x;
    let g1 = |t: f64| -> Result<(f64, f64), SolveError> {
        let y = V3::new(t, b[1], b[2]);
        Ok((t - h * f2.grad(&y)?[2] - b[0], 1.0 - h * f2.second(&y, 2, 0, fd)?))
    };
    let (s1, _) = solve_scalar(Equation::Compatibility, &g1, b[0].abs(), point(b), b[0], cfg)?;
    let mid = b[2] - h * f2.grad(&V3::new(s1, b[1], b[2]))?[0];
    let g2 = |t: f64| -> Result<(f64, f64), SolveError> {
        let y = V3::new(s1, t, mid);
        Ok((t + h * f1.grad(&y)?[2] - b[1], 1.0 + h * f1.second(&y, 2, 1, fd)?))
    };
    let (s2, _) = solve_scalar(Equation::Determining, &g2, b[1].abs(), point(b), b[1], cfg)?;
    let s3 = mid + h * f1.grad(&V3::new(s1, s2, mid))?[1];
    finite(V3::new(s1, s2, s3), Equation::Determining, b)
}

#[derive(Clone, Debug)]
enum Imp {
    Engine(GeneratingFormSpec),
    Dl { f1: PotentialFn, f2: PotentialFn },
    Affine(AffineMap3),
    Euler,
    Rk4,
}

/// A configured integrator. Immutable; `step` is pure.
#[derive(Clone, Debug)]
pub struct SchemeHandle {
    kind: SchemeKind,
    h: f64,
    field: Field3,
    imp: Imp,
    exact: Option<AffineMap3>,
    spec: Option<GeneratingFormSpec>,
}

impl SchemeHandle {
    pub fn kind(&self) -> SchemeKind {
        self.kind
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn field(&self) -> &Field3 {
        &self.field
    }

    pub fn label(&self) -> Option<ClassLabel> {
        self.kind.label()
    }

    fn with_field(mut self, field: &Field3) -> Self {
        self.field = field.clone();
        self
    }

    pub fn step(&self, x: &V3, cfg: &SolverConfig) -> Result<V3, SchemeError> {
        let h = self.h;
        Ok(match &self.imp {
            Imp::Engine(spec) => permuted_step(spec, x, cfg)?,
            Imp::Dl { f1, f2 } => dl_step(f1, f2, h, x, cfg)?,
            Imp::Affine(map) => map.apply(x),
            Imp::Euler => x + self.field.eval(x) * h,
            Imp::Rk4 => rk4_step(&self.field, x, h),
        })
    }

    /// The inverse map. Not available for the explicit baselines.
    pub fn inverse_step(&self, big_x: &V3, cfg: &SolverConfig) -> Result<V3, SchemeError> {
        match &self.imp {
            Imp::Engine(spec) => Ok(permuted_step(&adjoint(spec), big_x, cfg)?),
            Imp::Dl { f1, f2 } => Ok(dl_inverse_step(f1, f2, self.h, big_x, cfg)?),
            Imp::Affine(map) => map.inverse().map(|m| m.apply(big_x)).ok_or(
                SchemeError::TwistDegenerate {
                    name: "det M",
                    value: map.det(),
                },
            ),
            Imp::Euler | Imp::Rk4 => Err(SchemeError::Unsupported {
                scheme: self.kind.name().into(),
                requirement: "an implicit formulation for inversion",
            }),
        }
    }

    /// `n` steps from `x0`.
    pub fn integrate(&self, x0: &V3, n: usize, cfg: &SolverConfig) -> Result<V3, SchemeError> {
        let mut x = *x0;
        for _ in 0..n {
            x = self.step(&x, cfg)?;
        }
        Ok(x)
    }

    /// The step as an affine map: exact when it was assembled symbolically,
    /// probed at the unit vectors for other schemes on linear fields.
    pub fn affine(&self, cfg: &SolverConfig) -> Result<Option<AffineMap3>, SchemeError> {
        if let Some(m) = self.exact {
            return Ok(Some(m));
        }
        if self.field.as_linear().is_none() {
            return Ok(None);
        }
        let d = self.step(&V3::zeros(), cfg)?;
        let mut m = M3::zeros();
        for j in 0..3 {
            let col = self.step(&V3::ith(j, 1.0), cfg)? - d;
            m.set_column(j, &col);
        }
        Ok(Some(AffineMap3::new(m, d)))
    }

    /// True when [`Self::affine`] is exact rather than probed.
    pub fn has_exact_affine(&self) -> bool {
        self.exact.is_some()
    }

    /// The generating-form spec realizing the step near `x`. DL schemes seed
    /// their Legendre solves with `x₃`.
    pub fn spec_at(&self, x: &V3, cfg: &SolverConfig) -> Option<GeneratingFormSpec> {
        let pred = || euler_predictor(&self.field, self.h);
        match (&self.imp, self.kind) {
            (Imp::Dl { f1, f2 }, SchemeKind::DlSe) => {
                Some(dl_se_spec(f1, f2, self.h, x[2], cfg).with_predictor(pred()))
            }
            (Imp::Dl { f1, f2 }, _) => {
                Some(dl_dl_spec(f1, f2, self.h, x[2], cfg).with_predictor(pred()))
            }
            _ => self.spec.clone(),
        }
    }
}

pub(crate) fn rk4_step(field: &Field3, x: &V3, h: f64) -> V3 {
    let k1 = field.eval(x);
    let k2 = field.eval(&(x + k1 * (h / 2.0)));
    let k3 = field.eval(&(x + k2 * (h / 2.0)));
    let k4 = field.eval(&(x + k3 * h));
    x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0)
}

fn handle(kind: SchemeKind, h: f64, field: Field3, imp: Imp) -> SchemeHandle {
    SchemeHandle {
        kind,
        h,
        field,
        imp,
        exact: None,
        spec: None,
    }
}

pub fn make_se_se(f1: &PotentialFn, f3: &PotentialFn, h: f64) -> SchemeHandle {
    let field = field_from_potentials(&PotentialTriple::new(Some(f1.clone()), None, Some(f3.clone())));
    let spec = se_se_spec(f1, f3, h).with_predictor(euler_predictor(&field, h));
    let mut s = handle(SchemeKind::SeSe, h, field, Imp::Engine(spec.clone()));
    s.spec = Some(spec);
    s
}

/// SE+SE for quadratic `F¹`, `F³`, with the exact affine map attached.
pub fn make_se_se_quads(q1: &QuadForm, q3: &QuadForm, h: f64) -> Result<SchemeHandle, SchemeError> {
    let old = [x1, x2, x3];
    let mut s = make_se_se(&from_quad(*q1, old), &from_quad(*q3, old), h);
    s.exact = Some(se_se_quads(q1, q3, h)?.assemble()?);
    Ok(s)
}

pub fn make_dl_se(f1: &PotentialFn, f2: &PotentialFn, h: f64) -> SchemeHandle {
    make_dl(SchemeKind::DlSe, f1, f2, h)
}

pub fn make_dl_dl(f1: &PotentialFn, f2: &PotentialFn, h: f64) -> SchemeHandle {
    make_dl(SchemeKind::DlDl, f1, f2, h)
}

fn make_dl(kind: SchemeKind, f1: &PotentialFn, f2: &PotentialFn, h: f64) -> SchemeHandle {
    let field = field_from_potentials(&PotentialTriple::new(Some(f1.clone()), Some(f2.clone()), None));
    handle(
        kind,
        h,
        field,
        Imp::Dl {
            f1: f1.clone(),
            f2: f2.clone(),
        },
    )
}

fn affine_handle(
    kind: SchemeKind,
    l: &LinearField,
    h: f64,
    map: AffineMap3,
    spec: Option<GeneratingFormSpec>,
) -> SchemeHandle {
    let field = Field3::linear(*l);
    let spec = spec.map(|s| s.with_predictor(euler_predictor(&field, h)));
    let mut s = handle(kind, h, field, Imp::Affine(map));
    s.exact = Some(map);
    s.spec = spec;
    s
}

fn is_zero(l: &LinearField) -> bool {
    l.matrix().iter().all(|&v| v == 0.0)
}

pub fn make_s1(l: &LinearField, h: f64, variant: S1Variant) -> Result<SchemeHandle, SchemeError> {
    let kind = match variant {
        S1Variant::Quispel => SchemeKind::S1Quispel,
        S1Variant::Az => SchemeKind::S1Az,
    };
    if is_zero(l) {
        return Ok(affine_handle(kind, l, h, AffineMap3::identity(), None));
    }
    let d = derive_s1_potentials(l, h, variant)?;
    Ok(affine_handle(kind, l, h, d.assemble()?, Some(d.spec())))
}

pub fn make_s2(l: &LinearField, h: f64) -> Result<SchemeHandle, SchemeError> {
    if is_zero(l) {
        return Ok(affine_handle(SchemeKind::S2Quispel, l, h, AffineMap3::identity(), None));
    }
    let d = derive_s2_potentials(l, h)?;
    Ok(affine_handle(SchemeKind::S2Quispel, l, h, d.assemble()?, Some(d.spec())))
}

/// The corrected semi-implicit map. Its generating spec is attached when
/// `a₁₃ ≠ 0`.
pub fn make_quispel_corrected(l: &LinearField, h: f64) -> Result<SchemeHandle, SchemeError> {
    let map = quispel_map(l, h, Orientation::S1, true)?;
    let spec = derive_s1_potentials(l, h, S1Variant::Quispel)
        .ok()
        .map(|d| d.spec());
    Ok(affine_handle(SchemeKind::QuispelCorrected, l, h, map, spec))
}

pub fn make_euler(field: &Field3, h: f64) -> SchemeHandle {
    let mut s = handle(SchemeKind::Euler, h, field.clone(), Imp::Euler);
    if let Some(l) = field.as_linear() {
        s.exact = Some(AffineMap3::new(M3::identity() + l.matrix() * h, V3::zeros()));
    }
    s
}

pub fn make_rk4(field: &Field3, h: f64) -> SchemeHandle {
    handle(SchemeKind::Rk4, h, field.clone(), Imp::Rk4)
}

/// Builds `kind` for `field`, extracting potentials in the gauge the scheme
/// uses.
pub fn make_scheme(kind: SchemeKind, field: &Field3, h: f64) -> Result<SchemeHandle, SchemeError> {
    let linear = || {
        field.as_linear().ok_or_else(|| SchemeError::Unsupported {
            scheme: kind.name().into(),
            requirement: "a linear field",
        })
    };
    Ok(match kind {
        SchemeKind::SeSe => {
            let t = field.potentials(Gauge::G13)?;
            match &t.quad {
                Some(q) => make_se_se_quads(&q[0], &q[2], h)?,
                None => make_se_se(&t.get(1), &t.get(3), h),
            }
            .with_field(field)
        }
        SchemeKind::DlSe | SchemeKind::DlDl => {
            let t = field.potentials(Gauge::G12)?;
            make_dl(kind, &t.get(1), &t.get(2), h).with_field(field)
        }
        SchemeKind::S1Quispel => make_s1(linear()?, h, S1Variant::Quispel)?,
        SchemeKind::S1Az => make_s1(linear()?, h, S1Variant::Az)?,
        SchemeKind::S2Quispel => make_s2(linear()?, h)?,
        SchemeKind::QuispelCorrected => make_quispel_corrected(linear()?, h)?,
        SchemeKind::Euler => make_euler(field, h),
        SchemeKind::Rk4 => make_rk4(field, h),
    })
}
