//! Divergence-free vector fields on ℝ³ and their potentials.
//!
//! A field is described by three scalar potentials through
//!
//! ```text
//! a₁ = ∂₂F³ − ∂₃F²,   a₂ = ∂₃F¹ − ∂₁F³,   a₃ = ∂₁F² − ∂₂F¹.
//! ```
//!
//! Only two of them are needed; [`Gauge`] names the pair kept nonzero.

use std::fmt;
use std::sync::Arc;

use nalgebra::Matrix3;
use serde::Deserialize;

use crate::error::{FieldError, SolveError};
use crate::potential::{PotentialFn, M3, V3};
use crate::quadcalc::{sym, AffineExpr, QuadForm, Sym, QUAD_SERIALIZED_LEN};

type VecFn = Arc<dyn Fn(&V3) -> V3 + Send + Sync>;
type MatFn = Arc<dyn Fn(&V3) -> M3 + Send + Sync>;

/// Relative finite-difference step, `cbrt(machine eps)`.
pub fn fd_step() -> f64 {
    f64::EPSILON.cbrt()
}

/// Which two potentials are kept; the third is zero.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Gauge {
    /// `F² = 0`.
    #[default]
    G13,
    /// `F³ = 0`.
    G12,
    /// `F¹ = 0`.
    G23,
}

impl Gauge {
    /// Index (0-based) of the potential forced to zero.
    fn absent(self) -> usize {
        match self {
            Gauge::G13 => 1,
            Gauge::G12 => 2,
            Gauge::G23 => 0,
        }
    }
}

/// Trace-free 3×3 matrix field `a(x) = A x`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinearField {
    a: M3,
}

impl LinearField {
    pub fn new(a: M3) -> Result<Self, FieldError> {
        let tr = a.trace();
        if tr.abs() > 1e-12 * (1.0 + a.norm()) {
            return Err(FieldError::NotTraceFree(tr));
        }
        Ok(LinearField { a })
    }

    pub fn from_rows(rows: [[f64; 3]; 3]) -> Result<Self, FieldError> {
        Self::new(Matrix3::from_fn(|i, j| rows[i][j]))
    }

    pub fn zero() -> Self {
        LinearField { a: M3::zeros() }
    }

    pub fn matrix(&self) -> &M3 {
        &self.a
    }

    /// Entry `a_ij`, 1-based.
    pub fn a(&self, i: usize, j: usize) -> f64 {
        self.a[(i - 1, j - 1)]
    }

    pub fn apply(&self, x: &V3) -> V3 {
        self.a * x
    }
}

/// The potentials `(F¹, F², F³)` as functions of `(x₁, x₂, x₃)`. Absent
/// entries are zero.
#[derive(Clone, Debug, Default)]
pub struct PotentialTriple {
    pub f: [Option<PotentialFn>; 3],
    /// Exact quadratic forms over `x₁, x₂, x₃`, when known.
    pub quad: Option<[QuadForm; 3]>,
}

const OLD: [Sym; 3] = [sym::x1, sym::x2, sym::x3];

impl PotentialTriple {
    pub fn new(f1: Option<PotentialFn>, f2: Option<PotentialFn>, f3: Option<PotentialFn>) -> Self {
        PotentialTriple {
            f: [f1, f2, f3],
            quad: None,
        }
    }

    pub fn from_quads(q: [QuadForm; 3]) -> Self {
        let f = q.map(|qi| Some(PotentialFn::from_quad(qi, OLD)));
        PotentialTriple { f, quad: Some(q) }
    }

    /// `Fⁱ` (1-based), zero when absent.
    pub fn get(&self, i: usize) -> PotentialFn {
        self.f[i - 1].clone().unwrap_or_else(PotentialFn::zero)
    }

    fn fits(&self, gauge: Gauge) -> bool {
        let k = gauge.absent();
        match &self.quad {
            Some(q) => q[k].max_abs_coeff() == 0.0,
            None => self.f[k].is_none(),
        }
    }
}

#[derive(Clone, Debug)]
enum FieldKind {
    Generic,
    Linear(LinearField),
    Abc { a: f64, b: f64, c: f64 },
    Potentials(PotentialTriple),
}

/// A divergence-free vector field.
#[derive(Clone)]
pub struct Field3 {
    name: String,
    a: VecFn,
    jac: Option<MatFn>,
    kind: FieldKind,
}

impl fmt::Debug for Field3 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Field3").field("name", &self.name).finish()
    }
}

impl Field3 {
    pub fn new<F>(name: impl Into<String>, a: F) -> Self
    where
        F: Fn(&V3) -> V3 + Send + Sync + 'static,
    {
        Field3 {
            name: name.into(),
            a: Arc::new(a),
            jac: None,
            kind: FieldKind::Generic,
        }
    }

    pub fn with_jacobian<J>(mut self, jac: J) -> Self
    where
        J: Fn(&V3) -> M3 + Send + Sync + 'static,
    {
        self.jac = Some(Arc::new(jac));
        self
    }

    pub fn linear(l: LinearField) -> Self {
        let m = *l.matrix();
        Field3 {
            name: "linear".into(),
            a: Arc::new(move |x| m * x),
            jac: Some(Arc::new(move |_| m)),
            kind: FieldKind::Linear(l),
        }
    }

    /// The ABC flow `(A sin x₃ + C cos x₂, B sin x₁ + A cos x₃, C sin x₂ + B cos x₁)`.
    pub fn abc(a: f64, b: f64, c: f64) -> Self {
        Field3 {
            name: "abc".into(),
            a: Arc::new(move |x| {
                V3::new(
                    a * x[2].sin() + c * x[1].cos(),
                    b * x[0].sin() + a * x[2].cos(),
                    c * x[1].sin() + b * x[0].cos(),
                )
            }),
            jac: Some(Arc::new(move |x| {
                M3::new(
                    0.0,
                    -c * x[1].sin(),
                    a * x[2].cos(),
                    b * x[0].cos(),
                    0.0,
                    -a * x[2].sin(),
                    -b * x[0].sin(),
                    c * x[1].cos(),
                    0.0,
                )
            })),
            kind: FieldKind::Abc { a, b, c },
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn eval(&self, x: &V3) -> V3 {
        (self.a)(x)
    }

    /// Analytic Jacobian if known, central differences otherwise.
    pub fn jacobian(&self, x: &V3) -> M3 {
        if let Some(j) = &self.jac {
            return j(x);
        }
        let mut m = M3::zeros();
        for j in 0..3 {
            let d = fd_step() * (1.0 + x[j].abs());
            let mut xp = *x;
            let mut xm = *x;
            xp[j] += d;
            xm[j] -= d;
            m.set_column(j, &((self.eval(&xp) - self.eval(&xm)) / (xp[j] - xm[j])));
        }
        m
    }

    pub fn divergence(&self, x: &V3) -> f64 {
        self.jacobian(x).trace()
    }

    pub fn as_linear(&self) -> Option<&LinearField> {
        match &self.kind {
            FieldKind::Linear(l) => Some(l),
            _ => None,
        }
    }

    /// Potentials in the requested gauge: closed form for the builtins and
    /// quadratic triples, Weyl quadrature otherwise.
    pub fn potentials(&self, gauge: Gauge) -> Result<PotentialTriple, FieldError> {
        match &self.kind {
            FieldKind::Linear(l) => Ok(linear_potentials_in(l, gauge)),
            FieldKind::Abc { a, b, c } if gauge != Gauge::G23 => {
                Ok(abc_potentials(*a, *b, *c, gauge))
            }
            FieldKind::Potentials(t) if t.fits(gauge) => Ok(t.clone()),
            FieldKind::Potentials(PotentialTriple { quad: Some(q), .. }) => {
                Ok(weyl_affine(affine_components(q), gauge))
            }
            _ => extract_potentials(self, gauge),
        }
    }
}

/// `a₁ = ∂₂F³ − ∂₃F²`, `a₂ = ∂₃F¹ − ∂₁F³`, `a₃ = ∂₁F² − ∂₂F¹`.
pub fn field_from_potentials(p: &PotentialTriple) -> Field3 {
    let [f1, f2, f3] = [p.get(1), p.get(2), p.get(3)];
    let (g1, g2, g3) = (f1.clone(), f2.clone(), f3.clone());
    let a = move |x: &V3| {
        let d1 = g1.grad(x).unwrap_or_else(|_| V3::from_element(f64::NAN));
        let d2 = g2.grad(x).unwrap_or_else(|_| V3::from_element(f64::NAN));
        let d3 = g3.grad(x).unwrap_or_else(|_| V3::from_element(f64::NAN));
        V3::new(d3[1] - d2[2], d1[2] - d3[0], d2[0] - d1[1])
    };
    let jac = move |x: &V3| {
        let h = |f: &PotentialFn| {
            f.hessian(x, fd_step())
                .unwrap_or_else(|_| M3::from_element(f64::NAN))
        };
        let (h1, h2, h3) = (h(&f1), h(&f2), h(&f3));
        M3::from_fn(|i, k| match i {
            0 => h3[(1, k)] - h2[(2, k)],
            1 => h1[(2, k)] - h3[(0, k)],
            _ => h2[(0, k)] - h1[(1, k)],
        })
    };
    Field3 {
        name: "potentials".into(),
        a: Arc::new(a),
        jac: Some(Arc::new(jac)),
        kind: FieldKind::Potentials(p.clone()),
    }
}

/// Field components of a quadratic triple, as affine expressions in `x`.
fn affine_components(q: &[QuadForm; 3]) -> [AffineExpr; 3] {
    let d = |k: usize, s: Sym| q[k].partial(s);
    [
        d(2, sym::x2) - d(1, sym::x3),
        d(0, sym::x3) - d(2, sym::x1),
        d(1, sym::x1) - d(0, sym::x2),
    ]
}

fn at_zero(e: &AffineExpr, s: Sym) -> AffineExpr {
    e.substitute(s, &AffineExpr::zero())
        .expect("zero never references a symbol")
}

/// Symbolic Weyl construction for an affine field.
fn weyl_affine(a: [AffineExpr; 3], gauge: Gauge) -> PotentialTriple {
    use sym::{x1, x2, x3};
    let zero = QuadForm::zero();
    let q = match gauge {
        Gauge::G13 => {
            let f3 = a[0].antiderivative(x2);
            let f1 = at_zero(&a[1], x2).antiderivative(x3) - a[2].antiderivative(x2);
            [f1, zero, f3]
        }
        Gauge::G12 => {
            let f2 = -a[0].antiderivative(x3);
            let f1 = a[1].antiderivative(x3) - at_zero(&a[2], x3).antiderivative(x2);
            [f1, f2, zero]
        }
        Gauge::G23 => {
            let f3 = at_zero(&a[0], x1).antiderivative(x2) - a[1].antiderivative(x1);
            let f2 = a[2].antiderivative(x1);
            [zero, f2, f3]
        }
    };
    PotentialTriple::from_quads(q)
}

/// Closed-form quadratic potentials of a linear field, gauge `F² = 0`.
pub fn linear_potentials(l: &LinearField) -> PotentialTriple {
    linear_potentials_in(l, Gauge::G13)
}

pub fn linear_potentials_in(l: &LinearField, gauge: Gauge) -> PotentialTriple {
    let row = |i: usize| {
        AffineExpr::linear(
            &[
                (l.a(i, 1), sym::x1),
                (l.a(i, 2), sym::x2),
                (l.a(i, 3), sym::x3),
            ],
            0.0,
        )
    };
    weyl_affine([row(1), row(2), row(3)], gauge)
}

fn abc_potentials(a: f64, b: f64, c: f64, gauge: Gauge) -> PotentialTriple {
    match gauge {
        Gauge::G13 => {
            let f1 = PotentialFn::from_fn_with_hess(
                move |x| a * x[2].sin() + c * x[1].cos() - x[1] * b * x[0].cos(),
                move |x| {
                    V3::new(
                        x[1] * b * x[0].sin(),
                        -c * x[1].sin() - b * x[0].cos(),
                        a * x[2].cos(),
                    )
                },
                move |x| {
                    M3::new(
                        x[1] * b * x[0].cos(),
                        b * x[0].sin(),
                        0.0,
                        b * x[0].sin(),
                        -c * x[1].cos(),
                        0.0,
                        0.0,
                        0.0,
                        -a * x[2].sin(),
                    )
                },
            );
            let f3 = PotentialFn::from_fn_with_hess(
                move |x| c * x[1].sin() + b * x[0].cos() + x[1] * a * x[2].sin(),
                move |x| {
                    V3::new(
                        -b * x[0].sin(),
                        c * x[1].cos() + a * x[2].sin(),
                        x[1] * a * x[2].cos(),
                    )
                },
                move |x| {
                    M3::new(
                        -b * x[0].cos(),
                        0.0,
                        0.0,
                        0.0,
                        -c * x[1].sin(),
                        a * x[2].cos(),
                        0.0,
                        a * x[2].cos(),
                        -x[1] * a * x[2].sin(),
                    )
                },
            );
            PotentialTriple::new(Some(f1), None, Some(f3))
        }
        _ => {
            let f1 = PotentialFn::from_fn_with_hess(
                move |x| a * x[2].sin() + c * x[1].cos() + x[2] * b * x[0].sin(),
                move |x| {
                    V3::new(
                        x[2] * b * x[0].cos(),
                        -c * x[1].sin(),
                        a * x[2].cos() + b * x[0].sin(),
                    )
                },
                move |x| {
                    M3::new(
                        -x[2] * b * x[0].sin(),
                        0.0,
                        b * x[0].cos(),
                        0.0,
                        -c * x[1].cos(),
                        0.0,
                        b * x[0].cos(),
                        0.0,
                        -a * x[2].sin(),
                    )
                },
            );
            let f2 = PotentialFn::from_fn_with_hess(
                move |x| b * x[0].sin() + a * x[2].cos() - x[2] * c * x[1].cos(),
                move |x| {
                    V3::new(
                        b * x[0].cos(),
                        x[2] * c * x[1].sin(),
                        -a * x[2].sin() - c * x[1].cos(),
                    )
                },
                move |x| {
                    M3::new(
                        -b * x[0].sin(),
                        0.0,
                        0.0,
                        0.0,
                        x[2] * c * x[1].cos(),
                        c * x[1].sin(),
                        0.0,
                        c * x[1].sin(),
                        -a * x[2].cos(),
                    )
                },
            );
            PotentialTriple::new(Some(f1), Some(f2), None)
        }
    }
}

// Gauss-Kronrod 7/15 nodes and weights on [-1, 1].
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<const N: usize>(f: &impl Fn(f64) -> [f64; N], a: f64, b: f64) -> ([f64; N], f64) {
    let c = 0.5 * (a + b);
    let r = 0.5 * (b - a);
    let mut k = [0.0; N];
    let mut g = [0.0; N];
    for (i, (&x, &w)) in XGK.iter().zip(WGK.iter()).enumerate() {
        let pts: &[f64] = if x == 0.0 { &[0.0] } else { &[-1.0, 1.0] };
        for &s in pts {
            let v = f(c + s * r * x);
            for n in 0..N {
                k[n] += w * v[n];
                if i % 2 == 1 {
                    g[n] += WG[i / 2] * v[n];
                }
            }
        }
    }
    let err = (0..N)
        .map(|n| ((k[n] - g[n]) * r).abs())
        .fold(0.0, f64::max);
    (k.map(|v| v * r), err)
}

/// Adaptive Gauss-Kronrod quadrature of a vector integrand over `[a, b]`
/// with absolute tolerance `tol` on every component.
pub fn integrate<const N: usize>(
    f: impl Fn(f64) -> [f64; N],
    a: f64,
    b: f64,
    tol: f64,
) -> Result<[f64; N], FieldError> {
    let mut total = [0.0; N];
    if a == b {
        return Ok(total);
    }
    let width = (b - a).abs();
    let mut stack = vec![(a, b)];
    let mut worst = 0.0f64;
    let mut evaluations = 0usize;
    while let Some((lo, hi)) = stack.pop() {
        let (v, err) = gk15(&f, lo, hi);
        evaluations += 1;
        let share = tol * (hi - lo).abs() / width;
        if err <= share.max(f64::EPSILON * 8.0) || evaluations > 2000 {
            if err > share {
                worst = worst.max(err);
            }
            for n in 0..N {
                total[n] += v[n];
            }
        } else {
            let mid = 0.5 * (lo + hi);
            stack.push((lo, mid));
            stack.push((mid, hi));
        }
    }
    if worst > tol {
        return Err(FieldError::QuadratureFailure {
            tol,
            estimate: worst,
        });
    }
    Ok(total)
}

pub const QUAD_TOL: f64 = 1e-10;

/// `∫₀^{x_axis} [a_c, ∂₁a_c, ∂₂a_c, ∂₃a_c](y(s)) ds` where `y` is `x` with
/// coordinate `axis` replaced by `s` and coordinate `zeroed` (if any) by 0.
fn line(
    field: &Field3,
    comp: usize,
    x: &V3,
    axis: usize,
    zeroed: Option<usize>,
    with_partials: bool,
) -> Result<[f64; 4], FieldError> {
    let mut base = *x;
    if let Some(z) = zeroed {
        base[z] = 0.0;
    }
    let point = |s: f64| {
        let mut y = base;
        y[axis] = s;
        y
    };
    if with_partials {
        integrate(
            |s| {
                let y = point(s);
                let j = field.jacobian(&y);
                [field.eval(&y)[comp], j[(comp, 0)], j[(comp, 1)], j[(comp, 2)]]
            },
            0.0,
            x[axis],
            QUAD_TOL,
        )
    } else {
        integrate(|s| [field.eval(&point(s))[comp]], 0.0, x[axis], QUAD_TOL)
            .map(|[v]| [v, 0.0, 0.0, 0.0])
    }
}

/// Value (and gradient) of one extracted potential.
fn extracted(
    field: &Field3,
    gauge: Gauge,
    which: usize,
    x: &V3,
    grad: bool,
) -> Result<(f64, V3), FieldError> {
    let a = field.eval(x);
    let at = |z: usize| {
        let mut y = *x;
        y[z] = 0.0;
        field.eval(&y)
    };
    let (v, g) = match (gauge, which) {
        (Gauge::G13, 3) => {
            let i = line(field, 0, x, 1, None, grad)?;
            (i[0], V3::new(i[1], a[0], i[3]))
        }
        (Gauge::G13, 1) => {
            let i = line(field, 2, x, 1, None, grad)?;
            let j = line(field, 1, x, 2, Some(1), grad)?;
            (j[0] - i[0], V3::new(j[1] - i[1], -a[2], at(1)[1] - i[3]))
        }
        (Gauge::G12, 2) => {
            let i = line(field, 0, x, 2, None, grad)?;
            (-i[0], V3::new(-i[1], -i[2], -a[0]))
        }
        (Gauge::G12, 1) => {
            let i = line(field, 1, x, 2, None, grad)?;
            let j = line(field, 2, x, 1, Some(2), grad)?;
            (i[0] - j[0], V3::new(i[1] - j[1], i[2] - at(2)[2], a[1]))
        }
        (Gauge::G23, 3) => {
            let i = line(field, 1, x, 0, None, grad)?;
            let j = line(field, 0, x, 1, Some(0), grad)?;
            (j[0] - i[0], V3::new(-a[1], at(0)[0] - i[2], j[3] - i[3]))
        }
        (Gauge::G23, 2) => {
            let i = line(field, 2, x, 0, None, grad)?;
            (i[0], V3::new(a[2], i[2], i[3]))
        }
        _ => (0.0, V3::zeros()),
    };
    Ok((v, g))
}

fn quad_err(e: FieldError) -> SolveError {
    match e {
        FieldError::QuadratureFailure { tol, estimate } => SolveError::Quadrature { tol, estimate },
        _ => SolveError::Quadrature {
            tol: QUAD_TOL,
            estimate: f64::NAN,
        },
    }
}

struct Extracted {
    field: Field3,
    gauge: Gauge,
    which: usize,
}

impl crate::potential::Potential for Extracted {
    fn value(&self, y: &V3) -> Result<f64, SolveError> {
        extracted(&self.field, self.gauge, self.which, y, false)
            .map(|r| r.0)
            .map_err(quad_err)
    }
    fn grad(&self, y: &V3) -> Result<V3, SolveError> {
        extracted(&self.field, self.gauge, self.which, y, true)
            .map(|r| r.1)
            .map_err(quad_err)
    }
}

/// Weyl-normalized potentials by line integrals from the origin.
///
/// In the default gauge `F² = 0`,
/// `F³ = ∫₀^{x₂} a₁(x₁,s,x₃) ds` and
/// `F¹ = −∫₀^{x₂} a₃(x₁,s,x₃) ds + ∫₀^{x₃} a₂(x₁,0,s) ds`.
/// Gradients combine the field values with integrals of its Jacobian.
pub fn extract_potentials(f: &Field3, gauge: Gauge) -> Result<PotentialTriple, FieldError> {
    let mut out = PotentialTriple::default();
    for which in 1..=3 {
        if which - 1 == gauge.absent() {
            continue;
        }
        // Probe once so that quadrature trouble surfaces at construction.
        extracted(f, gauge, which, &V3::new(1.0, 1.0, 1.0), true)?;
        out.f[which - 1] = Some(PotentialFn::new(Extracted {
            field: f.clone(),
            gauge,
            which,
        }));
    }
    Ok(out)
}

/// Builtin test fields: `"linear"` with 9 row-major matrix entries or
/// `"abc"` with `A, B, C`.
pub fn builtin(name: &str, params: &[f64]) -> Result<Field3, FieldError> {
    match name {
        "linear" => {
            if params.len() != 9 {
                return Err(FieldError::InvalidSpec(format!(
                    "linear needs 9 matrix entries, got {}",
                    params.len()
                )));
            }
            let l = LinearField::new(M3::from_row_slice(params))?;
            Ok(Field3::linear(l))
        }
        "abc" => match params {
            [a, b, c] => Ok(Field3::abc(*a, *b, *c)),
            _ => Err(FieldError::InvalidSpec(format!(
                "abc needs A, B, C, got {} values",
                params.len()
            ))),
        },
        other => Err(FieldError::UnknownField(other.to_string())),
    }
}

/// JSON field description.
#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FieldSpec {
    Linear {
        matrix: [[f64; 3]; 3],
    },
    Abc {
        #[serde(rename = "A")]
        a: f64,
        #[serde(rename = "B")]
        b: f64,
        #[serde(rename = "C")]
        c: f64,
    },
    QuadPotentials {
        #[serde(rename = "F1", default)]
        f1: Option<Vec<f64>>,
        #[serde(rename = "F2", default)]
        f2: Option<Vec<f64>>,
        #[serde(rename = "F3", default)]
        f3: Option<Vec<f64>>,
    },
}

impl FieldSpec {
    pub fn from_json(text: &str) -> Result<Self, FieldError> {
        serde_json::from_str(text).map_err(|e| FieldError::InvalidSpec(e.to_string()))
    }

    pub fn build(&self) -> Result<Field3, FieldError> {
        match self {
            FieldSpec::Linear { matrix } => Ok(Field3::linear(LinearField::from_rows(*matrix)?)),
            FieldSpec::Abc { a, b, c } => Ok(Field3::abc(*a, *b, *c)),
            FieldSpec::QuadPotentials { f1, f2, f3 } => {
                let parse = |v: &Option<Vec<f64>>, name: &str| -> Result<QuadForm, FieldError> {
                    let Some(v) = v else {
                        return Ok(QuadForm::zero());
                    };
                    if v.len() != QUAD_SERIALIZED_LEN {
                        return Err(FieldError::InvalidSpec(format!(
                            "{name} needs {QUAD_SERIALIZED_LEN} values, got {}",
                            v.len()
                        )));
                    }
                    let q = QuadForm::from_flat(v)
                        .map_err(|e| FieldError::InvalidSpec(e.to_string()))?;
                    if [sym::X1, sym::X2, sym::X3].iter().any(|&s| q.references(s)) {
                        return Err(FieldError::InvalidSpec(format!(
                            "{name} may only use x1, x2, x3"
                        )));
                    }
                    Ok(q)
                };
                let q = [parse(f1, "F1")?, parse(f2, "F2")?, parse(f3, "F3")?];
                Ok(field_from_potentials(&PotentialTriple::from_quads(q)))
            }
        }
    }
}
