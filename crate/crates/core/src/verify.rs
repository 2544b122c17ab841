//! Numerical checks: Jacobians, determinants, reference flows, convergence
//! orders and volume audits.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::SchemeError;
use crate::fields::Field3;
use crate::genmap::SolverConfig;
use crate::potential::{M3, V3};
use crate::schemes::{rk4_step, SchemeHandle};

/// Central-difference step used by the audits, `cbrt(eps)·(1 + ‖x‖)`.
pub fn fd_eps(x: &V3) -> f64 {
    f64::EPSILON.cbrt() * (1.0 + x.norm())
}

/// Central-difference Jacobian of `f` at `x` with absolute step `eps`.
pub fn jacobian_fd<E>(f: impl Fn(&V3) -> Result<V3, E>, x: &V3, eps: f64) -> Result<M3, E> {
    let mut j = M3::zeros();
    for k in 0..3 {
        let dx = V3::ith(k, eps);
        let col = (f(&(x + dx))? - f(&(x - dx))?) / (2.0 * eps);
        j.set_column(k, &col);
    }
    Ok(j)
}

/// Cofactor expansion along the first row.
pub fn det3(m: &M3) -> f64 {
    m[(0, 0)] * (m[(1, 1)] * m[(2, 2)] - m[(1, 2)] * m[(2, 1)])
        - m[(0, 1)] * (m[(1, 0)] * m[(2, 2)] - m[(1, 2)] * m[(2, 0)])
        + m[(0, 2)] * (m[(1, 0)] * m[(2, 1)] - m[(1, 1)] * m[(2, 0)])
}

/// `exp(tA)` by scaling and squaring with a degree-18 Taylor kernel.
pub fn expm3(a: &M3, t: f64) -> M3 {
    let b = a * t;
    let norm = b.abs().row_sum().max();
    let mut s = 0;
    while norm / 2f64.powi(s) > 0.5 {
        s += 1;
    }
    let b = b / 2f64.powi(s);
    let mut sum = M3::identity();
    let mut term = M3::identity();
    for k in 1..=18 {
        term = term * b / k as f64;
        sum += term;
    }
    for _ in 0..s {
        sum = sum * sum;
    }
    sum
}

/// Classical RK4 endpoint with `n` uniform steps.
pub fn rk4_reference(f: &Field3, x0: &V3, t: f64, n: usize) -> V3 {
    let h = t / n as f64;
    (0..n).fold(*x0, |x, _| rk4_step(f, &x, h))
}

/// RK4 endpoint, doubling the step count from `n` until halving the step
/// changes the result by less than `1e−10` (at most 2²⁰ steps).
pub fn rk4_reference_guarded(f: &Field3, x0: &V3, t: f64, n: usize) -> (V3, usize) {
    let mut n = n.max(1);
    let mut prev = rk4_reference(f, x0, t, n);
    loop {
        let next = rk4_reference(f, x0, t, 2 * n);
        n *= 2;
        if (next - prev).norm() < 1e-10 || n >= 1 << 20 {
            return (next, n);
        }
        prev = next;
    }
}

/// The exact flow for linear fields, guarded RK4 otherwise.
pub fn reference(f: &Field3, x0: &V3, t: f64) -> V3 {
    match f.as_linear() {
        Some(l) => expm3(l.matrix(), t) * x0,
        None => rk4_reference_guarded(f, x0, t, 1000).0,
    }
}

/// Global errors at a fixed horizon for a sequence of step sizes.
#[derive(Clone, Debug, PartialEq)]
pub struct OrderReport {
    pub hs: Vec<f64>,
    pub errors: Vec<f64>,
    /// `log₂(e(hᵢ)/e(hᵢ₊₁)) / log₂(hᵢ/hᵢ₊₁)`; empty for a single level.
    pub orders: Vec<f64>,
    /// Least-squares slope of `log e` against `log h`; `None` for a single
    /// level.
    pub slope: Option<f64>,
}

impl OrderReport {
    pub fn from_errors(hs: Vec<f64>, errors: Vec<f64>) -> Self {
        let orders = hs
            .windows(2)
            .zip(errors.windows(2))
            .map(|(h, e)| (e[0] / e[1]).ln() / (h[0] / h[1]).ln())
            .collect();
        let slope = (hs.len() >= 2).then(|| {
            let xs: Vec<f64> = hs.iter().map(|h| h.ln()).collect();
            let ys: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
            let n = xs.len() as f64;
            let mx = xs.iter().sum::<f64>() / n;
            let my = ys.iter().sum::<f64>() / n;
            let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
            let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
            sxy / sxx
        });
        OrderReport {
            hs,
            errors,
            orders,
            slope,
        }
    }

    /// Plain-text table `h error order`, then the fitted slope.
    pub fn render(&self) -> String {
        let mut s = String::from("h error order\n");
        for (i, (h, e)) in self.hs.iter().zip(&self.errors).enumerate() {
            let o = match i.checked_sub(1).and_then(|k| self.orders.get(k)) {
                Some(o) => format!("{o:.6}"),
                None => "-".into(),
            };
            let _ = writeln!(s, "{h:.16e} {e:.16e} {o}");
        }
        match self.slope {
            Some(p) => {
                let _ = writeln!(s, "slope {p:.6}");
            }
            None => s.push_str("slope -\n"),
        }
        s
    }
}

/// Runs `make(h)` to time `t` from `x0` for each `h` and compares with
/// [`reference`]. Each `h` must divide `t` to within 1e−9 relative.
pub fn observed_order(
    make: impl Fn(f64) -> Result<SchemeHandle, SchemeError>,
    x0: &V3,
    t: f64,
    hs: &[f64],
    cfg: &SolverConfig,
) -> Result<OrderReport, SchemeError> {
    let mut errors = Vec::with_capacity(hs.len());
    let mut exact = None;
    for &h in hs {
        let s = make(h)?;
        let n = (t / h).round() as usize;
        let r = *exact.get_or_insert_with(|| reference(s.field(), x0, t));
        let x = s.integrate(x0, n, cfg)?;
        errors.push((x - r).norm());
    }
    Ok(OrderReport::from_errors(hs.to_vec(), errors))
}

/// Per-point `|det J − 1|`.
#[derive(Clone, Debug, PartialEq)]
pub struct VolumeAudit {
    pub points: Vec<V3>,
    pub defects: Vec<f64>,
    pub max: f64,
    pub mean: f64,
    /// `None` when the scheme's matrix was used directly; otherwise the
    /// step at the first point (it scales with `‖x‖`).
    pub fd_step: Option<f64>,
}

impl VolumeAudit {
    /// CSV with header `x1,x2,x3,defect`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("x1,x2,x3,defect\n");
        for (p, d) in self.points.iter().zip(&self.defects) {
            let _ = writeln!(s, "{:.16e},{:.16e},{:.16e},{:.16e}", p[0], p[1], p[2], d);
        }
        s
    }
}

/// Audits `scheme` at `points`. Schemes with an exact affine form are
/// audited through their matrix; the rest by central differences with step
/// `eps` (default [`fd_eps`]).
pub fn volume_audit(
    scheme: &SchemeHandle,
    points: &[V3],
    eps: Option<f64>,
    cfg: &SolverConfig,
) -> Result<VolumeAudit, SchemeError> {
    let (defects, fd_step) = if let Some(m) = scheme.affine(cfg)? {
        (vec![(det3(&m.m) - 1.0).abs(); points.len()], None)
    } else {
        let mut d = Vec::with_capacity(points.len());
        for p in points {
            let e = eps.unwrap_or_else(|| fd_eps(p));
            let j = jacobian_fd(|x| scheme.step(x, cfg), p, e)?;
            d.push((det3(&j) - 1.0).abs());
        }
        (d, Some(eps.unwrap_or_else(|| points.first().map_or(0.0, fd_eps))))
    };
    let max = defects.iter().fold(0.0f64, |m, d| m.max(*d));
    let mean = if defects.is_empty() {
        0.0
    } else {
        defects.iter().sum::<f64>() / defects.len() as f64
    };
    Ok(VolumeAudit {
        points: points.to_vec(),
        defects,
        max,
        mean,
        fd_step,
    })
}

/// `n` points uniform in `[lo, hi]³` from a ChaCha8 stream seeded with
/// `seed`.
pub fn random_points(n: usize, seed: u64, lo: f64, hi: f64) -> Vec<V3> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| V3::from_fn(|_, _| rng.gen_range(lo..=hi)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::LinearField;
    use crate::schemes::{make_euler, make_rk4, make_scheme, SchemeKind};
    use proptest::prelude::*;

    fn leibniz(m: &M3) -> f64 {
        let perms = [
            ([0, 1, 2], 1.0),
            ([1, 2, 0], 1.0),
            ([2, 0, 1], 1.0),
            ([0, 2, 1], -1.0),
            ([2, 1, 0], -1.0),
            ([1, 0, 2], -1.0),
        ];
        perms
            .iter()
            .map(|(p, s)| s * m[(0, p[0])] * m[(1, p[1])] * m[(2, p[2])])
            .sum()
    }

    fn mat() -> impl Strategy<Value = M3> {
        prop::array::uniform9(-1.0f64..1.0).prop_map(|a| M3::from_row_slice(&a))
    }

    fn trace_free() -> impl Strategy<Value = M3> {
        mat().prop_map(|mut m| {
            let t = m.trace() / 3.0;
            for i in 0..3 {
                m[(i, i)] -= t;
            }
            m
        })
    }

    proptest! {
        #[test]
        fn det3_matches_leibniz(m in mat()) {
            let a = det3(&m);
            let b = leibniz(&m);
            let scale = m.abs().max().powi(3).max(1e-300);
            prop_assert!((a - b).abs() <= 1e-13 * scale);
        }

        #[test]
        fn expm_group_property(a in mat(), s in -1.0f64..1.0, t in -1.0f64..1.0) {
            let lhs = expm3(&a, s) * expm3(&a, t);
            let rhs = expm3(&a, s + t);
            prop_assert!((lhs - rhs).abs().max() <= 1e-11);
        }

        #[test]
        fn expm_trace_free_has_unit_det(a in trace_free(), t in -2.0f64..2.0) {
            prop_assert!((det3(&expm3(&a, t)) - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn det3_examples() {
        assert_eq!(det3(&M3::identity()), 1.0);
        assert!((det3(&M3::from_diagonal(&V3::new(2.0, 3.0, 1.0 / 6.0))) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn expm_examples() {
        assert_eq!(expm3(&M3::zeros(), 1.0), M3::identity());
        let n = M3::new(0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
        assert!((expm3(&n, 1.0) - (M3::identity() + n)).abs().max() < 1e-15);
        // Rotation about x₃.
        let r = M3::new(0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0);
        let e = expm3(&r, 2.5);
        assert!((e[(0, 0)] - 2.5f64.cos()).abs() < 1e-14);
        assert!((e[(1, 0)] - 2.5f64.sin()).abs() < 1e-14);
    }

    #[test]
    fn jacobian_examples() {
        let m = M3::new(1.0, 2.0, 0.5, -1.0, 0.3, 0.2, 0.0, 4.0, 1.0);
        let j = jacobian_fd(|x: &V3| Ok::<_, ()>(m * x + V3::new(1.0, 2.0, 3.0)), &V3::new(0.2, 0.1, -0.4), 1e-3)
            .unwrap();
        assert!((j - m).abs().max() < 1e-10);
        let sq = jacobian_fd(|x: &V3| Ok::<_, ()>(V3::new(x[0] * x[0], x[1], x[2])), &V3::new(1.0, 0.0, 0.0), 1e-5)
            .unwrap();
        assert!((sq[(0, 0)] - 2.0).abs() < 1e-8);
    }

    fn field() -> Field3 {
        Field3::linear(
            LinearField::from_rows([[0.3, 0.5, -0.4], [0.2, -0.1, 0.6], [-0.7, 0.25, -0.2]]).unwrap(),
        )
    }

    #[test]
    fn rk4_agrees_with_expm() {
        let f = field();
        let x0 = V3::new(0.3, -0.2, 0.5);
        let a = rk4_reference(&f, &x0, 1.0, 10_000);
        let b = expm3(f.as_linear().unwrap().matrix(), 1.0) * x0;
        assert!((a - b).norm() < 1e-10);
        let zero = Field3::linear(LinearField::zero());
        assert_eq!(rk4_reference(&zero, &x0, 1.0, 10), x0);
        let abc = Field3::abc(1.0, 0.7, 0.43);
        let (r, n) = rk4_reference_guarded(&abc, &x0, 1.0, 100);
        let half = rk4_reference(&abc, &x0, 1.0, n / 2);
        assert!((r - half).norm() < 1e-10);
    }

    #[test]
    fn baseline_orders() {
        let f = field();
        let x0 = V3::new(0.3, -0.2, 0.5);
        let hs = [0.2, 0.1, 0.05, 0.025];
        let cfg = SolverConfig::default();
        let e = observed_order(|h| Ok(make_euler(&f, h)), &x0, 1.0, &hs, &cfg).unwrap();
        assert!((e.slope.unwrap() - 1.0).abs() < 0.1, "{e:?}");
        let r = observed_order(|h| Ok(make_rk4(&f, h)), &x0, 1.0, &hs, &cfg).unwrap();
        assert!((r.slope.unwrap() - 4.0).abs() < 0.3, "{r:?}");
        let one = observed_order(|h| Ok(make_euler(&f, h)), &x0, 1.0, &[0.1], &cfg).unwrap();
        assert!(one.orders.is_empty() && one.slope.is_none());
        assert!(one.render().contains("slope -"));
    }

    #[test]
    fn audits() {
        let cfg = SolverConfig::default();
        let pts = random_points(20, 7, -1.0, 1.0);
        let zero = Field3::linear(LinearField::zero());
        let id = volume_audit(&make_scheme(SchemeKind::SeSe, &zero, 0.1).unwrap(), &pts, None, &cfg).unwrap();
        assert_eq!(id.max, 0.0);
        let f = field();
        let eu = volume_audit(&make_euler(&f, 0.1), &pts, None, &cfg).unwrap();
        let a = f.as_linear().unwrap().matrix();
        let expect = (det3(&(M3::identity() + a * 0.1)) - 1.0).abs();
        assert!(expect > 0.0 && (eu.max - expect).abs() < 1e-15);
        let abc = Field3::abc(1.0, 0.7, 0.43);
        let se = volume_audit(&make_scheme(SchemeKind::SeSe, &abc, 0.01).unwrap(), &pts, None, &cfg).unwrap();
        assert!(se.max <= 1e-8, "{}", se.max);
        assert!(se.to_csv().starts_with("x1,x2,x3,defect\n"));
    }

    #[test]
    fn random_points_are_reproducible() {
        let a = random_points(5, 42, -1.0, 1.0);
        assert_eq!(a, random_points(5, 42, -1.0, 1.0));
        assert_ne!(a, random_points(5, 43, -1.0, 1.0));
        assert!(a.iter().all(|p| p.iter().all(|v| v.abs() <= 1.0)));
    }
}
