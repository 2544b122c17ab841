//! The closed-form S₁/S₂ potentials exactly as published, for comparison
//! with the symbolic derivation. `Δ` alone is read as the step size.

use crate::fields::LinearField;
use crate::quadcalc::sym::{x1, x2, X1, X2, X3};
use crate::quadcalc::{AffineExpr, QuadForm, Sym};

use super::{
    assemble_affine, derive_s1_potentials, derive_s2_potentials, s1_pair, s2_pair, S1Variant,
};

fn mono(k: f64, i: Sym, j: Sym) -> QuadForm {
    QuadForm::monomial(k, i, j)
}

/// `s · (c₁ X₁ + c₀ x₁)`.
fn times(s: Sym, c1: f64, c0: f64) -> QuadForm {
    QuadForm::product(
        &AffineExpr::var(s),
        &AffineExpr::linear(&[(c1, X1), (c0, x1)], 0.0),
    )
}

pub fn printed_s1_quispel(l: &LinearField, h: f64) -> (QuadForm, QuadForm) {
    let a = |i, j| l.a(i, j);
    let k1 = 1.0 + h * h * a(1, 1) * a(3, 3) - h * a(2, 2);
    let k2 = 1.0 + h * h * a(1, 1) * a(3, 3) / (1.0 - h * a(2, 2));
    let k3 = h * a(1, 3) * (h * a(1, 3) + k2 / k1 * h * a(1, 2) * a(2, 3));
    let den = h * a(1, 3) + h * h * a(2, 3) * a(1, 2) * k2 / k1;
    let phi = times(
        x2,
        1.0,
        -1.0 - h * a(1, 1) - h * h * a(2, 1) * a(1, 2) * k2 / k1,
    ) * (1.0 / den)
        + mono(-a(1, 2) / (k1 * a(1, 3) + h * a(2, 3) * a(1, 2) * k2) / 2.0, x2, x2);
    let big_phi = times(X2, 1.0, -1.0 - h * a(1, 1)) * (-(1.0 + h * a(3, 3)) / (h * a(1, 3)))
        + mono(-h * a(3, 2) / 2.0 + a(1, 2) / (2.0 * a(1, 3)) * (1.0 + h * a(3, 3)), X2, X2)
        + mono(-h * a(3, 1), X1, X2)
        - (mono(2.0, X1, x1)
            + mono(-(1.0 + h * a(1, 1)) * h * a(2, 3) * k2 + h * h * a(1, 3) * a(2, 1) * k2, x1, x1))
            * (1.0 / (2.0 * k3));
    (phi, big_phi)
}

pub fn printed_s1_az(l: &LinearField, h: f64) -> (QuadForm, QuadForm) {
    let a = |i, j| l.a(i, j);
    let l1 = 1.0 - h * a(1, 2) / a(1, 3) * a(2, 3);
    let phi = times(x2, 1.0, -(1.0 + h * a(1, 1))) * (1.0 / (h * a(1, 3)))
        + mono(-0.5 * a(1, 2) / a(1, 3), x2, x2);
    let inner = (times(X2, 1.0, -(1.0 + h * a(1, 1))) * (1.0 / (h * a(3, 3)))
        + mono(-0.5 * a(1, 2) / a(1, 3), X2, X2))
        * (1.0 + h * a(3, 3))
        + mono(h * a(3, 1), x1, X2)
        + mono(0.5 * h * a(3, 2), X2, X2)
        + (mono(a(2, 1), x1, X1) + mono(0.5 * a(2, 2), X2, X2)) * (h * a(1, 2) / a(1, 3));
    let big_phi = inner * (-1.0 / l1)
        + mono(h * a(2, 1) / 2.0, x1, x1)
        + (mono(2.0, X1, x1) + mono(-(1.0 + h * a(1, 1)), x1, x1)) * (h * a(2, 3) / (2.0 * h * a(1, 3)));
    (phi, big_phi)
}

pub fn printed_s2_quispel(l: &LinearField, h: f64) -> (QuadForm, QuadForm) {
    let a = |i, j| l.a(i, j);
    let m1 = 1.0 - h * a(3, 3) + h * h * a(1, 1) * a(2, 2);
    let m2 = 1.0 + h * h * a(1, 1) * a(2, 2) / (1.0 - h * a(3, 3));
    let phi = times(
        x2,
        m1,
        -m1 * (1.0 + h * a(1, 1)) - h * h * a(3, 1) * a(1, 3) * m2,
    ) * (1.0 / (h * a(1, 3)))
        + mono(-m1 * a(1, 2) / (2.0 * a(1, 3)) - h * a(3, 2) * m2 / 2.0, x2, x2);
    let big_phi = times(X3, 1.0, -(1.0 + h * a(1, 1))) * ((1.0 + h * a(2, 2)) / (h * a(1, 2)))
        + mono(-a(1, 3) * (1.0 + h * a(2, 2)) / (2.0 * a(1, 2)), X3, X3)
        + mono(h * a(2, 1), X1, X3)
        + mono(h * a(2, 3) / 2.0, X3, X3)
        + (mono(2.0, X1, x1) + mono(-(1.0 + h * a(1, 1)), x1, x1))
            * (m1 / (2.0 * h * h * a(1, 2) * a(1, 3)));
    (phi, big_phi)
}

/// One comparison between a printed potential and the derived one.
#[derive(Clone, Debug, PartialEq)]
pub struct FidelityEntry {
    pub formula: &'static str,
    /// Largest coefficient difference in `φ`, ignoring monomials in `x₁` alone.
    pub phi_diff: f64,
    /// Largest coefficient difference in `Φ`, ignoring monomials in `X₁` alone.
    pub big_phi_diff: f64,
    /// Largest entry of the difference of the generated maps, or `None`
    /// when the printed pair does not define a map.
    pub map_diff: Option<f64>,
}

impl FidelityEntry {
    pub fn agrees(&self, tol: f64) -> bool {
        self.phi_diff <= tol && self.big_phi_diff <= tol && self.map_diff.is_some_and(|d| d <= tol)
    }

    pub fn render(&self) -> String {
        let map = match self.map_diff {
            Some(d) => format!("{d:.3e}"),
            None => "undefined".into(),
        };
        format!(
            "{}: phi coefficient diff {:.3e}, Phi coefficient diff {:.3e}, map diff {}",
            self.formula, self.phi_diff, self.big_phi_diff, map
        )
    }
}

fn diff(a: &QuadForm, b: &QuadForm, ignore: Sym) -> f64 {
    let d = (*a - *b).without_terms_in(&[ignore]).max_abs_coeff();
    if d.is_finite() {
        d
    } else {
        f64::INFINITY
    }
}

/// Compares each printed pair with the derivation. Entries whose derivation
/// fails (for instance a vanishing twist coefficient) are omitted.
pub fn fidelity_report(l: &LinearField, h: f64) -> Vec<FidelityEntry> {
    let mut out = Vec::new();
    let s1 = s1_pair();
    let s2 = s2_pair();
    let cases: [(&'static str, Option<super::DerivedPotentials>, (QuadForm, QuadForm), _); 3] = [
        (
            "S1 Quispel",
            derive_s1_potentials(l, h, S1Variant::Quispel).ok(),
            printed_s1_quispel(l, h),
            s1,
        ),
        (
            "S1 forward Euler",
            derive_s1_potentials(l, h, S1Variant::Az).ok(),
            printed_s1_az(l, h),
            s1,
        ),
        ("S2 Quispel", derive_s2_potentials(l, h).ok(), printed_s2_quispel(l, h), s2),
    ];
    for (formula, derived, (phi, big_phi), (sigma, big_sigma)) in cases {
        let Some(d) = derived else { continue };
        let map_diff = match (
            d.assemble(),
            assemble_affine(&phi, &big_phi, sigma, big_sigma),
        ) {
            (Ok(a), Ok(b)) => {
                let m = (a.m - b.m).abs().max().max((a.d - b.d).abs().max());
                m.is_finite().then_some(m)
            }
            _ => None,
        };
        out.push(FidelityEntry {
            formula,
            phi_diff: diff(&phi, &d.phi, x1),
            big_phi_diff: diff(&big_phi, &d.big_phi, X1),
            map_diff,
        });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn report_covers_three_formulas() {
        let l = LinearField::from_rows([[0.3, 0.5, -0.4], [0.2, -0.1, 0.6], [-0.7, 0.25, -0.2]])
            .unwrap();
        let r = fidelity_report(&l, 0.1);
        assert_eq!(r.len(), 3);
        for e in &r {
            println!("{}", e.render());
        }
    }
}
