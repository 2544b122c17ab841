//! Exact calculus of polynomials of degree at most two in the six symbols
//! `(x₁, x₂, x₃, X₁, X₂, X₃)`.
//!
//! Coefficients are `f64`; "exact" means every operation acts on
//! coefficients directly, so results are correct up to round-off.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use thiserror::Error;

use crate::perm3::Permutation;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuadError {
    #[error("substitution of {0} references the symbol itself")]
    SelfReference(Sym),
    #[error("coefficient of {sym} is {coeff:e}, below degeneracy threshold {threshold:e}")]
    DegenerateCoefficient { sym: Sym, coeff: f64, threshold: f64 },
    #[error("expected {expected} serialized values, got {got}")]
    BadLength { expected: usize, got: usize },
}

/// One of the six canonical symbols. Index 1..=3 are the old variables
/// `x₁..x₃`, 4..=6 the new variables `X₁..X₃`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Sym(u8);

impl Sym {
    pub fn old(i: usize) -> Sym {
        assert!((1..=3).contains(&i), "old symbol index {i} out of range");
        Sym(i as u8 - 1)
    }

    pub fn new(i: usize) -> Sym {
        assert!((1..=3).contains(&i), "new symbol index {i} out of range");
        Sym(i as u8 + 2)
    }

    /// From the 1-based canonical position (1..=6).
    pub fn from_index(k: usize) -> Option<Sym> {
        (1..=6).contains(&k).then(|| Sym(k as u8 - 1))
    }

    /// 1-based canonical position.
    pub fn index(self) -> usize {
        self.0 as usize + 1
    }

    pub(crate) fn slot(self) -> usize {
        self.0 as usize
    }

    pub fn is_new(self) -> bool {
        self.0 >= 3
    }

    /// Coordinate index 1..=3 ignoring old/new.
    pub fn coordinate(self) -> usize {
        (self.0 as usize % 3) + 1
    }

    pub fn all() -> [Sym; 6] {
        [Sym(0), Sym(1), Sym(2), Sym(3), Sym(4), Sym(5)]
    }
}

impl fmt::Debug for Sym {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl fmt::Display for Sym {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        const NAMES: [&str; 6] = ["x1", "x2", "x3", "X1", "X2", "X3"];
        f.write_str(NAMES[self.0 as usize])
    }
}

/// Short names for the six symbols.
#[allow(non_upper_case_globals)]
pub mod sym {
    use super::Sym;
    pub const x1: Sym = Sym(0);
    pub const x2: Sym = Sym(1);
    pub const x3: Sym = Sym(2);
    pub const X1: Sym = Sym(3);
    pub const X2: Sym = Sym(4);
    pub const X3: Sym = Sym(5);
}

/// Affine expression `Σ cᵢ sᵢ + c₀` over the six symbols.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct AffineExpr {
    pub coeffs: [f64; 6],
    pub constant: f64,
}

impl AffineExpr {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: f64) -> Self {
        AffineExpr {
            coeffs: [0.0; 6],
            constant: c,
        }
    }

    pub fn var(s: Sym) -> Self {
        let mut e = Self::zero();
        e.coeffs[s.slot()] = 1.0;
        e
    }

    /// `Σ terms[i].0 · terms[i].1 + constant`.
    pub fn linear(terms: &[(f64, Sym)], constant: f64) -> Self {
        let mut e = Self::constant(constant);
        for &(c, s) in terms {
            e.coeffs[s.slot()] += c;
        }
        e
    }

    pub fn coeff(&self, s: Sym) -> f64 {
        self.coeffs[s.slot()]
    }

    pub fn references(&self, s: Sym) -> bool {
        self.coeffs[s.slot()] != 0.0
    }

    pub fn eval(&self, s: &[f64; 6]) -> f64 {
        self.coeffs
            .iter()
            .zip(s)
            .map(|(c, v)| c * v)
            .sum::<f64>()
            + self.constant
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.coeffs.iter().fold(0.0f64, |m, c| m.max(c.abs()))
    }

    /// Replaces `s` by `e`. `e` must not reference `s`.
    pub fn substitute(&self, s: Sym, e: &AffineExpr) -> Result<AffineExpr, QuadError> {
        if e.references(s) {
            return Err(QuadError::SelfReference(s));
        }
        let c = self.coeff(s);
        let mut out = *self;
        out.coeffs[s.slot()] = 0.0;
        Ok(out + *e * c)
    }

    /// Affine expression for `s` making `self ≡ 0`, with the default
    /// threshold `1e−10 · max|coeff|`.
    pub fn solve_linear(&self, s: Sym) -> Result<AffineExpr, QuadError> {
        self.solve_linear_with(s, 1e-10 * self.max_abs_coeff())
    }

    pub fn solve_linear_with(&self, s: Sym, threshold: f64) -> Result<AffineExpr, QuadError> {
        let c = self.coeff(s);
        if c.abs() <= threshold || c == 0.0 {
            return Err(QuadError::DegenerateCoefficient {
                sym: s,
                coeff: c,
                threshold,
            });
        }
        let mut rest = *self;
        rest.coeffs[s.slot()] = 0.0;
        Ok(rest * (-1.0 / c))
    }

    /// `∫₀^{s} e ds`, so that the result differentiates back to `e` in `s`.
    pub fn antiderivative(&self, s: Sym) -> QuadForm {
        let k = s.slot();
        let mut q = QuadForm::zero();
        for j in 0..6 {
            let c = self.coeffs[j];
            if j == k {
                q.q[k][k] += c;
            } else {
                q.q[k][j] += c;
                q.q[j][k] += c;
            }
        }
        q.b[k] = self.constant;
        q
    }

    /// Renames symbols: old `x_i` becomes `x_{p(i)}` and new `X_i` becomes
    /// `X_{P(i)}`.
    pub fn relabel(&self, p: Permutation, big_p: Permutation) -> AffineExpr {
        let map = relabel_map(p, big_p);
        let mut out = AffineExpr::constant(self.constant);
        for (j, &c) in self.coeffs.iter().enumerate() {
            out.coeffs[map[j]] += c;
        }
        out
    }
}

fn relabel_map(p: Permutation, big_p: Permutation) -> [usize; 6] {
    let mut map = [0usize; 6];
    for i in 1..=3 {
        map[i - 1] = p.apply(i) - 1;
        map[i + 2] = big_p.apply(i) + 2;
    }
    map
}

impl Add for AffineExpr {
    type Output = AffineExpr;
    fn add(mut self, rhs: AffineExpr) -> AffineExpr {
        for (a, b) in self.coeffs.iter_mut().zip(rhs.coeffs) {
            *a += b;
        }
        self.constant += rhs.constant;
        self
    }
}

impl Sub for AffineExpr {
    type Output = AffineExpr;
    fn sub(self, rhs: AffineExpr) -> AffineExpr {
        self + (-rhs)
    }
}

impl Neg for AffineExpr {
    type Output = AffineExpr;
    fn neg(self) -> AffineExpr {
        self * -1.0
    }
}

impl Mul<f64> for AffineExpr {
    type Output = AffineExpr;
    fn mul(mut self, k: f64) -> AffineExpr {
        for c in &mut self.coeffs {
            *c *= k;
        }
        self.constant *= k;
        self
    }
}

/// `q(s) = ½ sᵀQs + bᵀs + c` with `Q` symmetric.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct QuadForm {
    q: [[f64; 6]; 6],
    pub b: [f64; 6],
    pub c: f64,
}

/// Number of reals in the flat serialization.
pub const QUAD_SERIALIZED_LEN: usize = 28;

impl QuadForm {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: f64) -> Self {
        QuadForm {
            c,
            ..Self::default()
        }
    }

    /// Symmetrizes `q` on construction.
    pub fn new(q: [[f64; 6]; 6], b: [f64; 6], c: f64) -> Self {
        let mut sym = [[0.0; 6]; 6];
        for i in 0..6 {
            for j in 0..6 {
                sym[i][j] = 0.5 * (q[i][j] + q[j][i]);
            }
        }
        QuadForm { q: sym, b, c }
    }

    pub fn from_affine(e: &AffineExpr) -> Self {
        QuadForm {
            q: [[0.0; 6]; 6],
            b: e.coeffs,
            c: e.constant,
        }
    }

    /// The product of two affine expressions.
    pub fn product(a: &AffineExpr, b: &AffineExpr) -> Self {
        let mut out = QuadForm::zero();
        for i in 0..6 {
            for j in 0..6 {
                // ½ Q_ij s_i s_j summed over i,j must equal a_i b_j s_i s_j.
                out.q[i][j] += a.coeffs[i] * b.coeffs[j] + a.coeffs[j] * b.coeffs[i];
            }
            out.b[i] = a.coeffs[i] * b.constant + b.coeffs[i] * a.constant;
        }
        out.c = a.constant * b.constant;
        out
    }

    /// Monomial `k · s_i s_j` (or `k · s_i²` when `i == j`).
    pub fn monomial(k: f64, i: Sym, j: Sym) -> Self {
        QuadForm::product(&(AffineExpr::var(i) * k), &AffineExpr::var(j))
    }

    pub fn hessian(&self) -> &[[f64; 6]; 6] {
        &self.q
    }

    /// Second partial `∂²q/∂s_i∂s_j`.
    pub fn second(&self, i: Sym, j: Sym) -> f64 {
        self.q[i.slot()][j.slot()]
    }

    pub fn eval(&self, s: &[f64; 6]) -> f64 {
        let mut acc = self.c;
        for i in 0..6 {
            let mut row = 0.0;
            for j in 0..6 {
                row += self.q[i][j] * s[j];
            }
            acc += 0.5 * s[i] * row + self.b[i] * s[i];
        }
        acc
    }

    pub fn partial(&self, s: Sym) -> AffineExpr {
        let k = s.slot();
        AffineExpr {
            coeffs: self.q[k],
            constant: self.b[k],
        }
    }

    pub fn gradient(&self, s: &[f64; 6]) -> [f64; 6] {
        let mut g = [0.0; 6];
        for (k, gk) in g.iter_mut().enumerate() {
            *gk = self.b[k] + (0..6).map(|j| self.q[k][j] * s[j]).sum::<f64>();
        }
        g
    }

    pub fn references(&self, s: Sym) -> bool {
        let k = s.slot();
        self.b[k] != 0.0 || self.q[k].iter().any(|&v| v != 0.0)
    }

    /// Polynomial substitution `s ← e`. `e` must not reference `s`.
    pub fn substitute(&self, s: Sym, e: &AffineExpr) -> Result<QuadForm, QuadError> {
        if e.references(s) {
            return Err(QuadError::SelfReference(s));
        }
        let k = s.slot();
        // s' = T s + t with T = I except row k = e.coeffs, t = e.constant e_k.
        let mut t_mat = [[0.0; 6]; 6];
        for (i, row) in t_mat.iter_mut().enumerate() {
            row[i] = 1.0;
        }
        t_mat[k] = e.coeffs;
        let mut t = [0.0; 6];
        t[k] = e.constant;

        // Q' = Tᵀ Q T
        let mut qt = [[0.0; 6]; 6];
        for i in 0..6 {
            for j in 0..6 {
                qt[i][j] = (0..6).map(|l| self.q[i][l] * t_mat[l][j]).sum();
            }
        }
        let mut q_new = [[0.0; 6]; 6];
        for i in 0..6 {
            for j in 0..6 {
                q_new[i][j] = (0..6).map(|l| t_mat[l][i] * qt[l][j]).sum();
            }
        }
        // b' = Tᵀ (Q t + b)
        let qt_plus_b: Vec<f64> = (0..6)
            .map(|i| (0..6).map(|l| self.q[i][l] * t[l]).sum::<f64>() + self.b[i])
            .collect();
        let mut b_new = [0.0; 6];
        for (i, bi) in b_new.iter_mut().enumerate() {
            *bi = (0..6).map(|l| t_mat[l][i] * qt_plus_b[l]).sum();
        }
        let quad_t: f64 = (0..6)
            .map(|i| t[i] * (0..6).map(|l| self.q[i][l] * t[l]).sum::<f64>())
            .sum();
        let c_new = self.c + 0.5 * quad_t + (0..6).map(|i| self.b[i] * t[i]).sum::<f64>();
        Ok(QuadForm::new(q_new, b_new, c_new))
    }

    /// Renames symbols as [`AffineExpr::relabel`].
    pub fn relabel(&self, p: Permutation, big_p: Permutation) -> QuadForm {
        let map = relabel_map(p, big_p);
        let mut out = QuadForm::constant(self.c);
        for i in 0..6 {
            out.b[map[i]] += self.b[i];
            for j in 0..6 {
                out.q[map[i]][map[j]] += self.q[i][j];
            }
        }
        out
    }

    /// Drops every monomial built only from symbols in `only`, the constant
    /// included. Used to compare potentials modulo gauge
    /// terms that no defining equation sees.
    pub fn without_terms_in(&self, only: &[Sym]) -> QuadForm {
        let inside = |k: usize| only.iter().any(|s| s.slot() == k);
        let mut out = *self;
        out.c = 0.0;
        for i in 0..6 {
            if inside(i) {
                out.b[i] = 0.0;
            }
            for j in 0..6 {
                if inside(i) && inside(j) {
                    out.q[i][j] = 0.0;
                }
            }
        }
        out
    }

    pub fn max_abs_coeff(&self) -> f64 {
        let mut m = self.c.abs();
        for i in 0..6 {
            m = m.max(self.b[i].abs());
            for j in 0..6 {
                m = m.max(self.q[i][j].abs());
            }
        }
        m
    }

    /// Flat form: 21 upper-triangle `Q` entries row-major, 6 linear
    /// coefficients, then the constant.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(QUAD_SERIALIZED_LEN);
        for i in 0..6 {
            for j in i..6 {
                out.push(self.q[i][j]);
            }
        }
        out.extend_from_slice(&self.b);
        out.push(self.c);
        out
    }

    pub fn from_flat(v: &[f64]) -> Result<QuadForm, QuadError> {
        if v.len() != QUAD_SERIALIZED_LEN {
            return Err(QuadError::BadLength {
                expected: QUAD_SERIALIZED_LEN,
                got: v.len(),
            });
        }
        let mut q = [[0.0; 6]; 6];
        let mut it = v.iter().copied();
        for i in 0..6 {
            for j in i..6 {
                let val = it.next().unwrap();
                q[i][j] = val;
                q[j][i] = val;
            }
        }
        let mut b = [0.0; 6];
        for bi in &mut b {
            *bi = it.next().unwrap();
        }
        let c = it.next().unwrap();
        Ok(QuadForm { q, b, c })
    }
}

impl Add for QuadForm {
    type Output = QuadForm;
    fn add(mut self, rhs: QuadForm) -> QuadForm {
        for i in 0..6 {
            for j in 0..6 {
                self.q[i][j] += rhs.q[i][j];
            }
            self.b[i] += rhs.b[i];
        }
        self.c += rhs.c;
        self
    }
}

impl Sub for QuadForm {
    type Output = QuadForm;
    fn sub(self, rhs: QuadForm) -> QuadForm {
        self + rhs * -1.0
    }
}

impl Neg for QuadForm {
    type Output = QuadForm;
    fn neg(self) -> QuadForm {
        self * -1.0
    }
}

impl Mul<f64> for QuadForm {
    type Output = QuadForm;
    fn mul(mut self, k: f64) -> QuadForm {
        for i in 0..6 {
            for j in 0..6 {
                self.q[i][j] *= k;
            }
            self.b[i] *= k;
        }
        self.c *= k;
        self
    }
}

impl Add<AffineExpr> for QuadForm {
    type Output = QuadForm;
    fn add(self, rhs: AffineExpr) -> QuadForm {
        self + QuadForm::from_affine(&rhs)
    }
}

#[cfg(test)]
mod tests {
    use super::sym::*;
    use super::*;
    use proptest::prelude::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
    }

    /// Term-by-term evaluation independent of the matrix form.
    fn naive_eval(q: &QuadForm, s: &[f64; 6]) -> f64 {
        let h = q.hessian();
        let mut acc = q.c;
        for i in 0..6 {
            acc += q.b[i] * s[i];
            acc += 0.5 * h[i][i] * s[i] * s[i];
            for j in (i + 1)..6 {
                acc += h[i][j] * s[i] * s[j];
            }
        }
        acc
    }

    #[test]
    fn partial_examples() {
        let q = QuadForm::monomial(1.0, x1, x2);
        assert_eq!(q.partial(x1), AffineExpr::var(x2));
        let q = QuadForm::monomial(0.5, x2, x2);
        assert_eq!(q.partial(x2), AffineExpr::var(x2));
        let q = QuadForm::monomial(1.0, x2, X3) + AffineExpr::var(x1);
        assert_eq!(q.partial(X3), AffineExpr::var(x2));
    }

    #[test]
    fn substitute_examples() {
        let q = QuadForm::monomial(1.0, x1, x2);
        let r = q.substitute(x2, &AffineExpr::var(X1)).unwrap();
        assert_eq!(r, QuadForm::monomial(1.0, x1, X1));

        // ½x₃² with x₃ ← (X₁ − x₁)/h expands to ½(X₁² − 2X₁x₁ + x₁²)/h².
        let h = 0.3;
        let q = QuadForm::monomial(0.5, x3, x3);
        let e = AffineExpr::linear(&[(1.0 / h, X1), (-1.0 / h, x1)], 0.0);
        let r = q.substitute(x3, &e).unwrap();
        let expected = QuadForm::monomial(0.5 / (h * h), X1, X1)
            + QuadForm::monomial(-1.0 / (h * h), X1, x1)
            + QuadForm::monomial(0.5 / (h * h), x1, x1);
        for i in Sym::all() {
            for j in Sym::all() {
                assert!(close(r.second(i, j), expected.second(i, j), 1e-12));
            }
        }
        assert!(!r.references(x3));

        let q = QuadForm::monomial(2.0, x1, X2) + AffineExpr::constant(1.0);
        assert_eq!(q.substitute(x3, &AffineExpr::var(X1)).unwrap(), q);

        let err = q.substitute(x1, &AffineExpr::var(x1)).unwrap_err();
        assert_eq!(err, QuadError::SelfReference(x1));
    }

    #[test]
    fn solve_linear_examples() {
        let e = AffineExpr::var(x3) - AffineExpr::var(x1);
        assert_eq!(e.solve_linear(x3).unwrap(), AffineExpr::var(x1));
        let e = AffineExpr::linear(&[(2.0, x2)], 4.0);
        assert_eq!(e.solve_linear(x2).unwrap(), AffineExpr::constant(-2.0));
        let e = AffineExpr::linear(&[(1e-14, x2), (1.0, x1)], 0.0);
        assert!(matches!(
            e.solve_linear(x2),
            Err(QuadError::DegenerateCoefficient { .. })
        ));
    }

    #[test]
    fn solve_forward_euler_for_x3() {
        // X₁ = (1 + h a₁₁) x₁ + h a₁₂ x₂ + h a₁₃ x₃
        let (h, a11, a12, a13) = (0.1, 0.3, -0.7, 0.9);
        let e = AffineExpr::var(X1)
            - AffineExpr::linear(&[(1.0 + h * a11, x1), (h * a12, x2), (h * a13, x3)], 0.0);
        let sol = e.solve_linear(x3).unwrap();
        assert!(close(sol.coeff(X1), 1.0 / (h * a13), 1e-14));
        assert!(close(sol.coeff(x1), -(1.0 + h * a11) / (h * a13), 1e-14));
        assert!(close(sol.coeff(x2), -h * a12 / (h * a13), 1e-14));
    }

    #[test]
    fn antiderivative_examples() {
        let q = AffineExpr::var(x2).antiderivative(x2);
        assert_eq!(q, QuadForm::monomial(0.5, x2, x2));
        let q = AffineExpr::var(X1).antiderivative(x2);
        assert_eq!(q, QuadForm::monomial(1.0, X1, x2));
        let q = AffineExpr::constant(3.0).antiderivative(X2);
        assert_eq!(q, QuadForm::from_affine(&AffineExpr::linear(&[(3.0, X2)], 0.0)));
    }

    #[test]
    fn eval_examples() {
        let q = QuadForm::monomial(1.0, x1, x2);
        assert_eq!(q.eval(&[2.0, 3.0, 0.0, 0.0, 0.0, 0.0]), 6.0);
        let q = QuadForm::constant(5.0);
        assert_eq!(q.eval(&[1.0, -2.0, 3.0, 4.0, 9.0, 1.0]), 5.0);
    }

    #[test]
    fn flat_round_trip_length() {
        let q = QuadForm::monomial(1.5, x1, X3) + AffineExpr::linear(&[(2.0, x2)], -1.0);
        let flat = q.to_flat();
        assert_eq!(flat.len(), QUAD_SERIALIZED_LEN);
        assert_eq!(QuadForm::from_flat(&flat).unwrap(), q);
        assert!(QuadForm::from_flat(&flat[..5]).is_err());
    }

    fn arb_affine() -> impl Strategy<Value = AffineExpr> {
        (prop::array::uniform6(-2.0f64..2.0), -2.0f64..2.0)
            .prop_map(|(coeffs, constant)| AffineExpr { coeffs, constant })
    }

    fn arb_quad() -> impl Strategy<Value = QuadForm> {
        (
            prop::array::uniform6(prop::array::uniform6(-2.0f64..2.0)),
            prop::array::uniform6(-2.0f64..2.0),
            -2.0f64..2.0,
        )
            .prop_map(|(q, b, c)| QuadForm::new(q, b, c))
    }

    fn arb_point() -> impl Strategy<Value = [f64; 6]> {
        prop::array::uniform6(-3.0f64..3.0)
    }

    fn arb_perm() -> impl Strategy<Value = Permutation> {
        (0usize..6).prop_map(|i| Permutation::all()[i])
    }

    proptest! {
        #[test]
        fn eval_matches_naive(q in arb_quad(), s in arb_point()) {
            prop_assert!(close(q.eval(&s), naive_eval(&q, &s), 1e-13));
        }

        #[test]
        fn substitute_then_eval_matches_numeric(
            q in arb_quad(), e in arb_affine(), s in arb_point(), k in 0usize..6
        ) {
            let sym = Sym::all()[k];
            let mut e = e;
            e.coeffs[k] = 0.0;
            let r = q.substitute(sym, &e).unwrap();
            let mut s2 = s;
            s2[k] = e.eval(&s);
            prop_assert!(close(r.eval(&s), q.eval(&s2), 1e-12));
        }

        #[test]
        fn chain_rule_after_substitution(
            q in arb_quad(), e in arb_affine(), k in 0usize..6, t in 0usize..6
        ) {
            let sym = Sym::all()[k];
            let tsym = Sym::all()[t];
            let mut e = e;
            e.coeffs[k] = 0.0;
            let lhs = q.substitute(sym, &e).unwrap().partial(tsym);
            // ∂_t (q∘s) = (∂_t q)∘s + (∂_k q)∘s · ∂_t e, with ∂_t q zero when t = k.
            let direct = if t == k { AffineExpr::zero() } else { q.partial(tsym) };
            let rhs = direct.substitute(sym, &e).unwrap()
                + q.partial(sym).substitute(sym, &e).unwrap() * e.coeff(tsym);
            for j in 0..6 {
                prop_assert!(close(lhs.coeffs[j], rhs.coeffs[j], 1e-13));
            }
            prop_assert!(close(lhs.constant, rhs.constant, 1e-13));
        }

        #[test]
        fn antiderivative_inverts_partial(q in arb_quad(), k in 0usize..6, s in arb_point()) {
            let sym = Sym::all()[k];
            let back = q.partial(sym).antiderivative(sym);
            prop_assert_eq!(back.partial(sym), q.partial(sym));
            // The difference does not depend on the symbol.
            let mut s2 = s;
            s2[k] += 1.7;
            let d1 = q.eval(&s) - back.eval(&s);
            let d2 = q.eval(&s2) - back.eval(&s2);
            prop_assert!(close(d1, d2, 1e-12));
        }

        #[test]
        fn relabel_commutes_with_eval_and_partial(
            q in arb_quad(), p in arb_perm(), bp in arb_perm(), s in arb_point(), k in 0usize..6
        ) {
            let r = q.relabel(p, bp);
            // r evaluated at the relabeled point equals q at the original one.
            let mut s_new = [0.0; 6];
            for i in 1..=3 {
                s_new[p.apply(i) - 1] = s[i - 1];
                s_new[bp.apply(i) + 2] = s[i + 2];
            }
            prop_assert!(close(r.eval(&s_new), q.eval(&s), 1e-13));
            let sym = Sym::all()[k];
            let target = Sym::from_index(relabel_map(p, bp)[k] + 1).unwrap();
            prop_assert_eq!(r.partial(target), q.partial(sym).relabel(p, bp));
        }
    }
}
