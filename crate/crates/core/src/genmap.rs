//! The implicit map generated by a one-form `λ = φ dx_l + Φ dX_m`.
//!
//! In base coordinates the map `y ↦ Y` is defined by
//!
//! ```text
//! ∂₂φ(Y₃, y₂, y₃) = y₁
//! ∂₃Φ(Y₃, Y₂, y₃) + ε ∂₁φ(Y₃, y₂, y₃) = 0
//! Y₁ = ∂₂Φ(Y₃, Y₂, y₃)
//! ```
//!
//! which is triangular: a scalar solve for `Y₃`, a scalar solve for `Y₂`,
//! then an explicit `Y₁`. The permuted map is `X = permact(σ, Σ, base)(x)`,
//! i.e. `y = x·σ` and `Y = X·Σ`.

use std::fmt;
use std::sync::Arc;

use crate::error::{Equation, SolveError};
use crate::perm3::{classify, Permutation};
use crate::potential::{PotentialFn, V3};
use crate::quadcalc::{QuadForm, Sym};

/// Solver settings shared by every implicit step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverConfig {
    pub newton_tol: f64,
    pub max_iter: usize,
    pub fd_step: f64,
    pub bracket_fallback: bool,
    /// Twist derivatives below this magnitude are treated as zero.
    pub twist_tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            newton_tol: 1e-12,
            max_iter: 50,
            fd_step: f64::EPSILON.cbrt(),
            bracket_fallback: true,
            twist_tol: 1e-12,
        }
    }
}

impl SolverConfig {
    pub fn with_newton_tol(mut self, tol: f64) -> Self {
        self.newton_tol = tol;
        self
    }
}

type PointMap = Arc<dyn Fn(&V3) -> V3 + Send + Sync>;

/// Initial guesses for the new point, one per direction of the map.
#[derive(Clone)]
pub struct Predictor {
    pub forward: PointMap,
    pub backward: PointMap,
}

impl fmt::Debug for Predictor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("Predictor")
    }
}

impl Predictor {
    pub fn new<F, B>(forward: F, backward: B) -> Self
    where
        F: Fn(&V3) -> V3 + Send + Sync + 'static,
        B: Fn(&V3) -> V3 + Send + Sync + 'static,
    {
        Predictor {
            forward: Arc::new(forward),
            backward: Arc::new(backward),
        }
    }

    fn swapped(&self) -> Self {
        Predictor {
            forward: self.backward.clone(),
            backward: self.forward.clone(),
        }
    }
}

/// `(φ, Φ, ε, σ, Σ)` in engine form. Without a predictor the Newton solves
/// start from `X = x`.
#[derive(Clone, Debug)]
pub struct GeneratingFormSpec {
    pub phi: PotentialFn,
    pub big_phi: PotentialFn,
    pub eps: i32,
    pub sigma: Permutation,
    pub big_sigma: Permutation,
    pub predictor: Option<Predictor>,
}

/// Slot contents of `φ` for the pair: `[X_{Σ(3)}, x_{σ(2)}, x_{σ(3)}]`.
pub fn phi_slots(sigma: Permutation, big_sigma: Permutation) -> [Sym; 3] {
    [
        Sym::new(big_sigma.apply(3)),
        Sym::old(sigma.apply(2)),
        Sym::old(sigma.apply(3)),
    ]
}

/// Slot contents of `Φ` for the pair: `[X_{Σ(3)}, X_{Σ(2)}, x_{σ(3)}]`.
pub fn big_phi_slots(sigma: Permutation, big_sigma: Permutation) -> [Sym; 3] {
    [
        Sym::new(big_sigma.apply(3)),
        Sym::new(big_sigma.apply(2)),
        Sym::old(sigma.apply(3)),
    ]
}

/// Re-expresses a potential whose arguments are the symbols `args` as a
/// function of the slot symbols `slots`.
pub fn on_slots(f: &PotentialFn, args: [Sym; 3], slots: [Sym; 3]) -> PotentialFn {
    if args == slots {
        return f.clone();
    }
    let map = args.map(|a| {
        slots
            .iter()
            .position(|&s| s == a)
            .unwrap_or_else(|| panic!("{a} is not one of the slots {slots:?}"))
    });
    f.permuted(map)
}

impl GeneratingFormSpec {
    pub fn new(
        phi: PotentialFn,
        big_phi: PotentialFn,
        eps: i32,
        sigma: Permutation,
        big_sigma: Permutation,
    ) -> Self {
        GeneratingFormSpec {
            phi,
            big_phi,
            eps,
            sigma,
            big_sigma,
            predictor: None,
        }
    }

    /// Builds the engine spec from potentials written in the form
    ///
    /// ```text
    /// x₊ = ∂_{x∘} φ,   ∂_{X₋} φ = ∂_{x₋} Φ,   X₊ = −sign(τ) ∂_{X∘} Φ
    /// ```
    ///
    /// with `x₊ = x_{σ(1)}`, `x∘ = x_{σ(2)}`, `x₋ = x_{σ(3)}` and likewise for
    /// `X` and `Σ`. This fixes `ε = sign(τ)` and `Φ_engine = −sign(τ) Φ`.
    pub fn from_roles(
        phi: &PotentialFn,
        phi_args: [Sym; 3],
        big_phi: &PotentialFn,
        big_phi_args: [Sym; 3],
        sigma: Permutation,
        big_sigma: Permutation,
    ) -> Self {
        let s = classify(sigma, big_sigma).sign();
        let phi_e = on_slots(phi, phi_args, phi_slots(sigma, big_sigma));
        let big_phi_e = on_slots(big_phi, big_phi_args, big_phi_slots(sigma, big_sigma));
        let big_phi_e = if s == 1 {
            big_phi_e.scaled(-1.0)
        } else {
            big_phi_e
        };
        GeneratingFormSpec::new(phi_e, big_phi_e, s, sigma, big_sigma)
    }

    /// As [`Self::from_roles`] for quadratic forms over the six symbols.
    /// Terms in symbols outside the slots are ignored.
    pub fn from_roles_quads(
        phi: &QuadForm,
        big_phi: &QuadForm,
        sigma: Permutation,
        big_sigma: Permutation,
    ) -> Self {
        let ps = phi_slots(sigma, big_sigma);
        let bs = big_phi_slots(sigma, big_sigma);
        let s = classify(sigma, big_sigma).sign();
        let big = if s == 1 { -*big_phi } else { *big_phi };
        GeneratingFormSpec::new(
            PotentialFn::from_quad(*phi, ps),
            PotentialFn::from_quad(big, bs),
            s,
            sigma,
            big_sigma,
        )
    }

    pub fn with_predictor(mut self, p: Predictor) -> Self {
        self.predictor = Some(p);
        self
    }

    /// Initial guess for `X` given `x`.
    pub fn guess(&self, x: &V3) -> V3 {
        match &self.predictor {
            Some(p) => (p.forward)(x),
            None => *x,
        }
    }
}

/// Per-step diagnostics.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepStats {
    /// Newton iterations for the determining and compatibility solves.
    pub iterations: [usize; 2],
    pub phi_21: f64,
    pub big_phi_32: f64,
}

struct Scalar<'a> {
    equation: Equation,
    g: &'a dyn Fn(f64) -> Result<(f64, f64), SolveError>,
    scale: f64,
    point: [f64; 3],
}

impl Scalar<'_> {
    fn converged(&self, r: f64, cfg: &SolverConfig) -> bool {
        r.abs() <= cfg.newton_tol * (1.0 + self.scale)
    }

    fn check(&self, v: f64) -> Result<f64, SolveError> {
        if v.is_finite() {
            Ok(v)
        } else {
            Err(SolveError::NonFinite {
                equation: self.equation,
                point: self.point,
            })
        }
    }

    /// Newton from `t0`, with one polishing step after convergence and a
    /// bracketing fallback when Newton stalls.
    fn solve(&self, t0: f64, cfg: &SolverConfig) -> Result<(f64, usize), SolveError> {
        let mut t = t0;
        for it in 1..=cfg.max_iter {
            let (r, d) = (self.g)(t)?;
            if it == 1 && d.abs() < cfg.twist_tol {
                return Err(SolveError::TwistViolation {
                    equation: self.equation,
                    value: d,
                    point: self.point,
                });
            }
            if !r.is_finite() || !d.is_finite() || d.abs() < cfg.twist_tol {
                break;
            }
            let dt = r / d;
            if !(t - dt).is_finite() {
                break;
            }
            t -= dt;
            if self.converged(r, cfg) || dt.abs() <= 4.0 * f64::EPSILON * (1.0 + t.abs()) {
                return Ok((self.check(self.polish(t, 1, cfg)?)?, it));
            }
        }
        if cfg.bracket_fallback {
            if let Some(t) = self.bracket(t0, cfg)? {
                return Ok((self.polish(t, 3, cfg)?, cfg.max_iter));
            }
        }
        Err(SolveError::NewtonDivergence {
            equation: self.equation,
            iterations: cfg.max_iter,
            point: self.point,
        })
    }

    /// Up to `steps` Newton steps, each kept only if it does not increase
    /// the residual.
    fn polish(&self, mut t: f64, steps: usize, cfg: &SolverConfig) -> Result<f64, SolveError> {
        for _ in 0..steps {
            let (r, d) = (self.g)(t)?;
            if r == 0.0 || d.abs() < cfg.twist_tol || !d.is_finite() {
                break;
            }
            let next = t - r / d;
            if !next.is_finite() || (self.g)(next)?.0.abs() > r.abs() {
                break;
            }
            t = next;
        }
        Ok(t)
    }

    fn bracket(&self, t0: f64, cfg: &SolverConfig) -> Result<Option<f64>, SolveError> {
        let r0 = (self.g)(t0)?.0;
        if r0 == 0.0 {
            return Ok(Some(t0));
        }
        let mut w = 1e-3 * (1.0 + t0.abs());
        let mut found = None;
        for _ in 0..60 {
            for t in [t0 - w, t0 + w] {
                let r = (self.g)(t)?.0;
                if r.is_finite() && r.signum() != r0.signum() {
                    found = Some((t0.min(t), t0.max(t)));
                    break;
                }
            }
            if found.is_some() {
                break;
            }
            w *= 2.0;
        }
        let Some((mut lo, mut hi)) = found else {
            return Ok(None);
        };
        let r_lo = (self.g)(lo)?.0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            let r = (self.g)(mid)?.0;
            if self.converged(r, cfg) {
                return Ok(Some(mid));
            }
            if r.signum() == r_lo.signum() {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        // Bracket collapsed to adjacent floats: this is the root.
        Ok(Some(0.5 * (lo + hi)))
    }
}

/// Newton solve of the scalar equation `g(t) = 0` from `t0`, where `g`
/// returns the residual and its derivative.
pub(crate) fn solve_scalar(
    equation: Equation,
    g: &dyn Fn(f64) -> Result<(f64, f64), SolveError>,
    scale: f64,
    point: [f64; 3],
    t0: f64,
    cfg: &SolverConfig,
) -> Result<(f64, usize), SolveError> {
    Scalar {
        equation,
        g,
        scale,
        point,
    }
    .solve(t0, cfg)
}

fn pt(a: f64, b: f64, c: f64) -> V3 {
    V3::new(a, b, c)
}

/// One step of the base map from `y`, starting Newton at `guess` (`Y`).
pub fn base_step_from(
    phi: &PotentialFn,
    big_phi: &PotentialFn,
    eps: i32,
    y: &V3,
    guess: &V3,
    cfg: &SolverConfig,
) -> Result<(V3, StepStats), SolveError> {
    let fd = cfg.fd_step;
    let e = eps as f64;

    let g_a = |t: f64| -> Result<(f64, f64), SolveError> {
        let p = pt(t, y[1], y[2]);
        Ok((phi.grad(&p)?[1] - y[0], phi.second(&p, 1, 0, fd)?))
    };
    let a = Scalar {
        equation: Equation::Determining,
        g: &g_a,
        scale: y[0].abs(),
        point: [y[0], y[1], y[2]],
    };
    let (y3, it_a) = a.solve(guess[2], cfg)?;
    let phi_at = pt(y3, y[1], y[2]);
    let phi_21 = phi.second(&phi_at, 1, 0, fd)?;
    if phi_21.abs() < cfg.twist_tol {
        return Err(SolveError::TwistViolation {
            equation: Equation::Determining,
            value: phi_21,
            point: [y[0], y[1], y[2]],
        });
    }

    let shift = e * phi.grad(&phi_at)?[0];
    let g_b = |t: f64| -> Result<(f64, f64), SolveError> {
        let p = pt(y3, t, y[2]);
        Ok((big_phi.grad(&p)?[2] + shift, big_phi.second(&p, 2, 1, fd)?))
    };
    let b = Scalar {
        equation: Equation::Compatibility,
        g: &g_b,
        scale: shift.abs(),
        point: [y[0], y[1], y[2]],
    };
    let (y2, it_b) = b.solve(guess[1], cfg)?;
    let big_at = pt(y3, y2, y[2]);
    let big_phi_32 = big_phi.second(&big_at, 2, 1, fd)?;
    if big_phi_32.abs() < cfg.twist_tol {
        return Err(SolveError::TwistViolation {
            equation: Equation::Compatibility,
            value: big_phi_32,
            point: [y[0], y[1], y[2]],
        });
    }
    let y1 = big_phi.grad(&big_at)?[1];
    let out = pt(y1, y2, y3);
    if !out.iter().all(|v| v.is_finite()) {
        return Err(SolveError::NonFinite {
            equation: Equation::Compatibility,
            point: [y[0], y[1], y[2]],
        });
    }
    Ok((
        out,
        StepStats {
            iterations: [it_a, it_b],
            phi_21,
            big_phi_32,
        },
    ))
}

/// The base map with Newton started at `Y = y`.
pub fn base_step(spec: &GeneratingFormSpec, y: &V3, cfg: &SolverConfig) -> Result<V3, SolveError> {
    base_step_from(&spec.phi, &spec.big_phi, spec.eps, y, y, cfg).map(|r| r.0)
}

/// `X = permact(σ, Σ, base)(x)`, with diagnostics.
pub fn permuted_step_stats(
    spec: &GeneratingFormSpec,
    x: &V3,
    cfg: &SolverConfig,
) -> Result<(V3, StepStats), SolveError> {
    let y = spec.sigma.act(x);
    let guess = spec.big_sigma.act(&spec.guess(x));
    let (big_y, stats) = base_step_from(&spec.phi, &spec.big_phi, spec.eps, &y, &guess, cfg)?;
    Ok((spec.big_sigma.inverse().act(&big_y), stats))
}

pub fn permuted_step(
    spec: &GeneratingFormSpec,
    x: &V3,
    cfg: &SolverConfig,
) -> Result<V3, SolveError> {
    permuted_step_stats(spec, x, cfg).map(|r| r.0)
}

/// The spec generating the inverse map: `φ' = Φ∘p`, `Φ' = φ∘p` with `p` the
/// argument reversal, `(σ', Σ') = (Σ, σ)`, same `ε`.
pub fn adjoint(spec: &GeneratingFormSpec) -> GeneratingFormSpec {
    GeneratingFormSpec {
        phi: spec.big_phi.reversed(),
        big_phi: spec.phi.reversed(),
        eps: spec.eps,
        sigma: spec.big_sigma,
        big_sigma: spec.sigma,
        predictor: spec.predictor.as_ref().map(Predictor::swapped),
    }
}

/// Twist diagnostics at the solved point of one step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TwistReport {
    pub phi_21: f64,
    pub big_phi_32: f64,
    pub iterations: [usize; 2],
    pub solved: bool,
    pub degenerate: bool,
}

/// Runs one permuted step from `x` and reports the twist quantities. When
/// the step fails they are evaluated at the initial guess instead.
pub fn twist_report(spec: &GeneratingFormSpec, x: &V3, cfg: &SolverConfig) -> TwistReport {
    match permuted_step_stats(spec, x, cfg) {
        Ok((_, s)) => TwistReport {
            phi_21: s.phi_21,
            big_phi_32: s.big_phi_32,
            iterations: s.iterations,
            solved: true,
            degenerate: false,
        },
        Err(_) => {
            let y = spec.sigma.act(x);
            let g = spec.big_sigma.act(&spec.guess(x));
            let fd = cfg.fd_step;
            let phi_21 = spec
                .phi
                .second(&pt(g[2], y[1], y[2]), 1, 0, fd)
                .unwrap_or(f64::NAN);
            let big_phi_32 = spec
                .big_phi
                .second(&pt(g[2], g[1], y[2]), 2, 1, fd)
                .unwrap_or(f64::NAN);
            let degenerate = !(phi_21.abs() >= cfg.twist_tol && big_phi_32.abs() >= cfg.twist_tol);
            TwistReport {
                phi_21,
                big_phi_32,
                iterations: [0, 0],
                solved: false,
                degenerate,
            }
        }
    }
}
