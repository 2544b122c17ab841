//! The symmetric group on three letters and the reduction of the 36
//! `(σ, Σ)` pairs to five classes.
//!
//! A [`Permutation`] maps a role slot to a coordinate index. Slots are the
//! roles `(+, ∘, −)` in that order, so `σ = (3,2,1)` reads `σ(+) = 3`,
//! `σ(∘) = 2`, `σ(−) = 1`. All indices in the public API are 1-based.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use nalgebra::Vector3;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PermError {
    #[error("not a permutation: {0}")]
    NotAPermutation(String),
}

/// A bijection of `{1,2,3}` stored as its image `(p(1), p(2), p(3))`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Permutation([u8; 3]);

impl Permutation {
    pub const IDENTITY: Permutation = Permutation([1, 2, 3]);
    /// The flip `p` exchanging the first and last entries.
    pub const FLIP: Permutation = Permutation([3, 2, 1]);

    pub fn new(image: [usize; 3]) -> Result<Self, PermError> {
        let mut seen = [false; 3];
        for &v in &image {
            if !(1..=3).contains(&v) || seen[v - 1] {
                return Err(PermError::NotAPermutation(format!(
                    "{},{},{}",
                    image[0], image[1], image[2]
                )));
            }
            seen[v - 1] = true;
        }
        Ok(Permutation([image[0] as u8, image[1] as u8, image[2] as u8]))
    }

    /// All six elements, identity first, in lexicographic order.
    pub fn all() -> [Permutation; 6] {
        [
            Permutation([1, 2, 3]),
            Permutation([1, 3, 2]),
            Permutation([2, 1, 3]),
            Permutation([2, 3, 1]),
            Permutation([3, 1, 2]),
            Permutation([3, 2, 1]),
        ]
    }

    /// `p(i)` for `i ∈ {1,2,3}`.
    pub fn apply(self, i: usize) -> usize {
        self.0[i - 1] as usize
    }

    pub fn image(self) -> [usize; 3] {
        [self.0[0] as usize, self.0[1] as usize, self.0[2] as usize]
    }

    /// 0-based image, for internal array indexing.
    pub(crate) fn zero_based(self) -> [usize; 3] {
        [
            self.0[0] as usize - 1,
            self.0[1] as usize - 1,
            self.0[2] as usize - 1,
        ]
    }

    /// `(self ∘ other)(i) = self(other(i))`.
    pub fn compose(self, other: Permutation) -> Permutation {
        Permutation([
            self.0[other.0[0] as usize - 1],
            self.0[other.0[1] as usize - 1],
            self.0[other.0[2] as usize - 1],
        ])
    }

    pub fn inverse(self) -> Permutation {
        let mut inv = [0u8; 3];
        for (i, &v) in self.0.iter().enumerate() {
            inv[v as usize - 1] = i as u8 + 1;
        }
        Permutation(inv)
    }

    /// Parity, `+1` for even and `−1` for odd permutations.
    pub fn sign(self) -> i32 {
        let mut inversions = 0;
        for i in 0..3 {
            for j in (i + 1)..3 {
                if self.0[i] > self.0[j] {
                    inversions += 1;
                }
            }
        }
        if inversions % 2 == 0 {
            1
        } else {
            -1
        }
    }

    pub fn is_identity(self) -> bool {
        self == Self::IDENTITY
    }

    /// Right action on points: `(x · p)_i = x_{p(i)}`.
    pub fn act(self, x: &Vector3<f64>) -> Vector3<f64> {
        let [a, b, c] = self.zero_based();
        Vector3::new(x[a], x[b], x[c])
    }

    /// Right action on fixed-size arrays, same rule as [`Permutation::act`].
    pub fn act_array<T: Copy>(self, x: [T; 3]) -> [T; 3] {
        let [a, b, c] = self.zero_based();
        [x[a], x[b], x[c]]
    }
}

impl Default for Permutation {
    fn default() -> Self {
        Self::IDENTITY
    }
}

impl fmt::Debug for Permutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{},{})", self.0[0], self.0[1], self.0[2])
    }
}

impl fmt::Display for Permutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{},{}", self.0[0], self.0[1], self.0[2])
    }
}

impl FromStr for Permutation {
    type Err = PermError;

    /// Parses the textual form `"a,b,c"`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        if parts.len() != 3 {
            return Err(PermError::NotAPermutation(s.to_string()));
        }
        let mut image = [0usize; 3];
        for (slot, part) in image.iter_mut().zip(&parts) {
            *slot = part
                .parse()
                .map_err(|_| PermError::NotAPermutation(s.to_string()))?;
        }
        Permutation::new(image).map_err(|_| PermError::NotAPermutation(s.to_string()))
    }
}

/// Right action on points, `result_i = x_{p(i)}`.
pub fn act_vec(x: &Vector3<f64>, p: Permutation) -> Vector3<f64> {
    p.act(x)
}

/// `permact(σ, Σ, f)(x) = f(x · σ) · Σ⁻¹`.
pub fn permact<F, E>(
    sigma: Permutation,
    big_sigma: Permutation,
    f: F,
) -> impl Fn(&Vector3<f64>) -> Result<Vector3<f64>, E>
where
    F: Fn(&Vector3<f64>) -> Result<Vector3<f64>, E>,
{
    let back = big_sigma.inverse();
    move |x| f(&sigma.act(x)).map(|y| back.act(&y))
}

/// The five classes of generating one-forms.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ClassLabel {
    S1,
    SE,
    DL,
    S2,
    SEDL,
}

impl ClassLabel {
    pub const ALL: [ClassLabel; 5] = [
        ClassLabel::S1,
        ClassLabel::SE,
        ClassLabel::DL,
        ClassLabel::S2,
        ClassLabel::SEDL,
    ];

    /// Class of the relative permutation `τ = σ⁻¹ ∘ Σ`.
    ///
    /// Mirrors are named by the role they fix: SE fixes `∘`, DL fixes `+`,
    /// S2 fixes `−`.
    pub fn of_tau(tau: Permutation) -> ClassLabel {
        match tau.image() {
            [1, 2, 3] => ClassLabel::S1,
            [3, 2, 1] => ClassLabel::SE,
            [1, 3, 2] => ClassLabel::DL,
            [2, 1, 3] => ClassLabel::S2,
            _ => ClassLabel::SEDL,
        }
    }

    /// The `τ*` of the canonical representative `(1, τ*)`.
    pub fn canonical_tau(self) -> Permutation {
        let image = match self {
            ClassLabel::S1 => [1, 2, 3],
            ClassLabel::SE => [3, 2, 1],
            ClassLabel::DL => [1, 3, 2],
            ClassLabel::S2 => [2, 1, 3],
            ClassLabel::SEDL => [2, 3, 1],
        };
        Permutation::new(image).expect("static permutation")
    }

    pub fn name(self) -> &'static str {
        match self {
            ClassLabel::S1 => "S1",
            ClassLabel::SE => "SE",
            ClassLabel::DL => "DL",
            ClassLabel::S2 => "S2",
            ClassLabel::SEDL => "SEDL",
        }
    }
}

impl fmt::Display for ClassLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Classification of a pair `(σ, Σ)` together with the recipe reducing it
/// to its canonical representative `(1, τ*)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PairClass {
    pub label: ClassLabel,
    pub tau: Permutation,
    /// `ρ` such that the pair is `(ρ·a, ρ·b)` where `(a, b)` is `(1, τ*)`,
    /// or `(τ*, 1)` when `adjoint_flag` is set.
    pub relabel: Permutation,
    /// Whether the reduction passes through adjunction (swap of the pair).
    pub adjoint_flag: bool,
}

impl PairClass {
    pub fn sign(&self) -> i32 {
        self.tau.sign()
    }

    /// Rebuilds `(σ, Σ)` from the canonical representative and the recipe.
    pub fn reconstruct(&self) -> (Permutation, Permutation) {
        let canon = self.label.canonical_tau();
        let (a, b) = if self.adjoint_flag {
            (canon, Permutation::IDENTITY)
        } else {
            (Permutation::IDENTITY, canon)
        };
        (self.relabel.compose(a), self.relabel.compose(b))
    }
}

pub fn classify(sigma: Permutation, big_sigma: Permutation) -> PairClass {
    let tau = sigma.inverse().compose(big_sigma);
    let label = ClassLabel::of_tau(tau);
    let canon = label.canonical_tau();
    if tau == canon {
        PairClass {
            label,
            tau,
            relabel: sigma,
            adjoint_flag: false,
        }
    } else {
        // Only the second rotation lands here: τ = τ*⁻¹. Adjunction turns
        // (1, τ*) into (τ*, 1), and relabeling by Σ gives (Στ*, Σ) = (σ, Σ).
        debug_assert_eq!(tau, canon.inverse());
        PairClass {
            label,
            tau,
            relabel: big_sigma,
            adjoint_flag: true,
        }
    }
}

/// Partition of all 36 pairs by class label.
pub fn enumerate_classes() -> BTreeMap<ClassLabel, Vec<(Permutation, Permutation)>> {
    let mut classes: BTreeMap<ClassLabel, Vec<(Permutation, Permutation)>> = BTreeMap::new();
    for sigma in Permutation::all() {
        for big_sigma in Permutation::all() {
            classes
                .entry(classify(sigma, big_sigma).label)
                .or_default()
                .push((sigma, big_sigma));
        }
    }
    classes
}

const OLD: [&str; 3] = ["x₁", "x₂", "x₃"];
const NEW: [&str; 3] = ["X₁", "X₂", "X₃"];

/// Sorted argument list, old variables first, each group by index.
fn arg_list(args: &[(bool, usize)]) -> String {
    let mut sorted = args.to_vec();
    sorted.sort();
    sorted
        .iter()
        .map(|&(is_new, i)| if is_new { NEW[i - 1] } else { OLD[i - 1] })
        .collect::<Vec<_>>()
        .join(",")
}

fn var(is_new: bool, i: usize) -> &'static str {
    if is_new {
        NEW[i - 1]
    } else {
        OLD[i - 1]
    }
}

/// Symbolic determining, compatibility and twist conditions of the pair,
/// with the potentials named `φ` and `Φ`.
pub fn render_conditions(sigma: Permutation, big_sigma: Permutation) -> String {
    render_conditions_named(sigma, big_sigma, "φ", "Φ")
}

/// As [`render_conditions`] with custom potential names.
///
/// The equations are written with the second potential normalized so that
/// the compatibility condition carries no sign; the last determining
/// condition then carries `−sign(τ)`.
pub fn render_conditions_named(
    sigma: Permutation,
    big_sigma: Permutation,
    phi: &str,
    big_phi: &str,
) -> String {
    let class = classify(sigma, big_sigma);
    let (xp, xz, xm) = (sigma.apply(1), sigma.apply(2), sigma.apply(3));
    let (bp, bz, bm) = (big_sigma.apply(1), big_sigma.apply(2), big_sigma.apply(3));
    let phi_args = arg_list(&[(true, bm), (false, xz), (false, xm)]);
    let big_args = arg_list(&[(true, bm), (true, bz), (false, xm)]);
    let sign = if class.sign() > 0 { "−" } else { "" };

    let mut out = String::new();
    out.push_str(&format!(
        "pair: sigma={} Sigma={} tau={:?} sign(tau)={:+} class={}\n",
        sigma,
        big_sigma,
        class.tau,
        class.sign(),
        class.label
    ));
    out.push_str(&format!(
        "form: λ = {phi}({phi_args}) d{} + {big_phi}({big_args}) d{}\n",
        var(false, xm),
        var(true, bm)
    ));
    out.push_str(&format!(
        "determining: {} = ∂{} {phi}({phi_args})\n",
        var(false, xp),
        var(false, xz)
    ));
    out.push_str(&format!(
        "compatibility: ∂{} {phi}({phi_args}) = ∂{} {big_phi}({big_args})\n",
        var(true, bm),
        var(false, xm)
    ));
    out.push_str(&format!(
        "determining: {} = {sign}∂{} {big_phi}({big_args})\n",
        var(true, bp),
        var(true, bz)
    ));
    out.push_str(&format!(
        "twist: ∂²{phi}/∂{}∂{} ≠ 0, ∂²{big_phi}/∂{}∂{} ≠ 0\n",
        var(false, xz),
        var(true, bm),
        var(false, xm),
        var(true, bz)
    ));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(a: usize, b: usize, c: usize) -> Permutation {
        Permutation::new([a, b, c]).unwrap()
    }

    #[test]
    fn compose_examples() {
        assert_eq!(Permutation::FLIP.compose(Permutation::FLIP), Permutation::IDENTITY);
        for q in Permutation::all() {
            assert_eq!(q.compose(Permutation::IDENTITY), q);
        }
        assert_eq!(p(2, 3, 1).compose(p(2, 3, 1)), p(3, 1, 2));
    }

    #[test]
    fn inverse_examples() {
        assert_eq!(Permutation::IDENTITY.inverse(), Permutation::IDENTITY);
        assert_eq!(p(2, 3, 1).inverse(), p(3, 1, 2));
        assert_eq!(Permutation::FLIP.inverse(), p(3, 2, 1));
        for q in Permutation::all() {
            assert_eq!(q.compose(q.inverse()), Permutation::IDENTITY);
            assert_eq!(q.inverse().inverse(), q);
        }
    }

    #[test]
    fn sign_examples() {
        assert_eq!(Permutation::IDENTITY.sign(), 1);
        assert_eq!(p(3, 2, 1).sign(), -1);
        assert_eq!(p(2, 3, 1).sign(), 1);
    }

    #[test]
    fn act_vec_examples() {
        let x = Vector3::new(7.0, 8.0, 9.0);
        assert_eq!(act_vec(&x, p(3, 2, 1)), Vector3::new(9.0, 8.0, 7.0));
        assert_eq!(act_vec(&x, Permutation::IDENTITY), x);
        let y = Vector3::new(1.0, 2.0, 3.0);
        assert_eq!(act_vec(&y, p(2, 3, 1)), Vector3::new(2.0, 3.0, 1.0));
    }

    #[test]
    fn parse_rejects_non_permutations() {
        assert!("1,1,2".parse::<Permutation>().is_err());
        assert!("1,2".parse::<Permutation>().is_err());
        assert!("0,1,2".parse::<Permutation>().is_err());
        assert!("a,b,c".parse::<Permutation>().is_err());
        assert_eq!("3, 2, 1".parse::<Permutation>().unwrap(), Permutation::FLIP);
    }

    #[test]
    fn classify_worked_pairs() {
        let id = Permutation::IDENTITY;
        assert_eq!(classify(id, id).label, ClassLabel::S1);
        // σ(+)=3, σ(∘)=2, σ(−)=1 with Σ(+)=1, Σ(∘)=2, Σ(−)=3.
        let se = classify(p(3, 2, 1), id);
        assert_eq!(se.label, ClassLabel::SE);
        assert_eq!(se.sign(), -1);
        // Σ(+)=1, Σ(∘)=3, Σ(−)=2.
        let sedl = classify(p(3, 2, 1), p(1, 3, 2));
        assert_eq!(sedl.label, ClassLabel::SEDL);
        assert_eq!(sedl.sign(), 1);
        // Σ(+)=3, Σ(∘)=1, Σ(−)=2.
        assert_eq!(classify(p(3, 2, 1), p(3, 1, 2)).label, ClassLabel::DL);
        // Σ(+)=2, Σ(∘)=3, Σ(−)=1.
        assert_eq!(classify(p(3, 2, 1), p(2, 3, 1)).label, ClassLabel::S2);
        assert_eq!(classify(p(3, 2, 1), p(3, 2, 1)).label, ClassLabel::S1);
    }

    #[test]
    fn reduction_recipe_reconstructs_pair() {
        for s in Permutation::all() {
            for b in Permutation::all() {
                let c = classify(s, b);
                assert_eq!(c.reconstruct(), (s, b), "pair {s:?} {b:?}");
            }
        }
    }

    #[test]
    fn labels_have_expected_signs() {
        for s in Permutation::all() {
            for b in Permutation::all() {
                let c = classify(s, b);
                let expected = match c.label {
                    ClassLabel::S1 | ClassLabel::SEDL => 1,
                    _ => -1,
                };
                assert_eq!(c.sign(), expected);
            }
        }
    }

    #[test]
    fn render_se_pair() {
        let text = render_conditions(p(3, 2, 1), Permutation::IDENTITY);
        assert!(text.contains("x₃ = ∂x₂ φ(x₁,x₂,X₃)"), "{text}");
        assert!(text.contains("X₁ = ∂X₂ Φ(x₁,X₂,X₃)"), "{text}");
        assert!(text.contains("∂X₃ φ(x₁,x₂,X₃) = ∂x₁ Φ(x₁,X₂,X₃)"), "{text}");
    }

    #[test]
    fn render_s1_pair() {
        let text = render_conditions(p(3, 2, 1), p(3, 2, 1));
        assert!(text.contains("X₃ = −∂X₂ Φ(x₁,X₁,X₂)"), "{text}");
        assert!(text.contains("λ = φ(x₁,x₂,X₁) dx₁ + Φ(x₁,X₁,X₂) dX₁"), "{text}");
    }
}
