//! Parameters of the binary v-structure X -> Y <- Z, the eight cell
//! probabilities indexed `i = 4X + 2Z + Y`, and sampling designs.

use num_rational::BigRational;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::Scalar;

/// Index of the `(X, Z)` stratum in `p_Y`: `2X + Z`.
#[inline]
pub const fn stratum(x: usize, z: usize) -> usize {
    2 * x + z
}

/// Cell index `4X + 2Z + Y`.
#[inline]
pub const fn cell(x: usize, z: usize, y: usize) -> usize {
    4 * x + 2 * z + y
}

fn check_unit<T: Scalar>(name: &str, v: &T) -> Result<()> {
    if *v < T::zero() || *v > T::one() {
        return Err(Error::domain(
            name,
            format!("{:?} is not in [0, 1]", v.to_f64()),
        ));
    }
    Ok(())
}

/// `p_X`, `p_Z` and the four outcome probabilities `p_{Y,2X+Z}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VStructParams<T = f64> {
    pub px: T,
    pub pz: T,
    pub py: [T; 4],
}

impl<T: Scalar> VStructParams<T> {
    pub fn new(px: T, pz: T, py: [T; 4]) -> Result<Self> {
        check_unit("px", &px)?;
        check_unit("pz", &pz)?;
        for (j, v) in py.iter().enumerate() {
            check_unit(&format!("py{j}"), v)?;
        }
        Ok(VStructParams { px, pz, py })
    }

    /// Probability of stratum `z` within an arm.
    pub fn z_prob(&self, z: usize) -> T {
        if z == 1 {
            self.pz.clone()
        } else {
            T::one() - self.pz.clone()
        }
    }

    /// Probability of arm `x`.
    pub fn x_prob(&self, x: usize) -> T {
        if x == 1 {
            self.px.clone()
        } else {
            T::one() - self.px.clone()
        }
    }

    /// Multinomial cell probabilities for randomly assigned X.
    pub fn cell_probs(&self) -> CellProbs<T> {
        let p = std::array::from_fn(|i| {
            let (x, z, y) = (i >> 2, (i >> 1) & 1, i & 1);
            self.x_prob(x) * self.cell_within_arm(x, z, y)
        });
        CellProbs {
            p,
            kind: CellKind::Random,
        }
    }

    /// Per-arm cell probabilities `rho` for block-randomised X.
    pub fn cell_probs_fixed(&self) -> CellProbs<T> {
        let p = std::array::from_fn(|i| {
            let (x, z, y) = (i >> 2, (i >> 1) & 1, i & 1);
            self.cell_within_arm(x, z, y)
        });
        CellProbs {
            p,
            kind: CellKind::Fixed,
        }
    }

    fn cell_within_arm(&self, x: usize, z: usize, y: usize) -> T {
        let a = self.py[stratum(x, z)].clone();
        let py = if y == 1 { a } else { T::one() - a };
        self.z_prob(z) * py
    }

    /// Average causal effect of X on Y:
    /// `p_Z (p_{Y,3} - p_{Y,1}) + (1 - p_Z)(p_{Y,2} - p_{Y,0})`.
    pub fn true_effect(&self) -> T {
        let [a0, a1, a2, a3] = self.py.clone();
        self.pz.clone() * (a3 - a1) + (T::one() - self.pz.clone()) * (a2 - a0)
    }

    /// `P(Y = 1 | X = x)`.
    pub fn outcome_rate(&self, x: usize) -> T {
        self.z_prob(0) * self.py[stratum(x, 0)].clone()
            + self.z_prob(1) * self.py[stratum(x, 1)].clone()
    }

    /// Relabel `X -> 1 - X`.
    pub fn mirrored(&self) -> Self {
        let [a0, a1, a2, a3] = self.py.clone();
        VStructParams {
            px: T::one() - self.px.clone(),
            pz: self.pz.clone(),
            py: [a2, a3, a0, a1],
        }
    }

    pub fn to_f64(&self) -> VStructParams<f64> {
        VStructParams {
            px: self.px.to_f64(),
            pz: self.pz.to_f64(),
            py: std::array::from_fn(|j| self.py[j].to_f64()),
        }
    }
}

pub fn cell_probs<T: Scalar>(params: &VStructParams<T>) -> CellProbs<T> {
    params.cell_probs()
}

pub fn cell_probs_fixed<T: Scalar>(params: &VStructParams<T>) -> CellProbs<T> {
    params.cell_probs_fixed()
}

pub fn true_effect<T: Scalar>(params: &VStructParams<T>) -> T {
    params.true_effect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CellKind {
    /// One multinomial over all eight cells.
    Random,
    /// Two multinomials, cells 0..4 and 4..8, each summing to one.
    Fixed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellProbs<T = f64> {
    pub p: [T; 8],
    pub kind: CellKind,
}

pub const NORMALISATION_TOL: f64 = 1e-14;

impl<T: Scalar> CellProbs<T> {
    /// Validated constructor for externally supplied probabilities.
    pub fn new(p: [T; 8], kind: CellKind) -> Result<Self> {
        for (i, v) in p.iter().enumerate() {
            if *v < T::zero() {
                return Err(Error::domain(format!("p{i}"), "negative cell probability"));
            }
        }
        let sum = |r: std::ops::Range<usize>| p[r].iter().map(Scalar::to_f64).sum::<f64>();
        let ok = match kind {
            CellKind::Random => (sum(0..8) - 1.0).abs() <= NORMALISATION_TOL,
            CellKind::Fixed => {
                (sum(0..4) - 1.0).abs() <= NORMALISATION_TOL
                    && (sum(4..8) - 1.0).abs() <= NORMALISATION_TOL
            }
        };
        if !ok {
            return Err(Error::domain(
                "cells",
                format!("{kind:?} probabilities do not normalise"),
            ));
        }
        Ok(CellProbs { p, kind })
    }

    /// Total probability, or the per-arm totals for the fixed kind.
    pub fn totals(&self) -> Vec<T> {
        let sum =
            |r: std::ops::Range<usize>| self.p[r].iter().cloned().fold(T::zero(), |a, b| a + b);
        match self.kind {
            CellKind::Random => vec![sum(0..8)],
            CellKind::Fixed => vec![sum(0..4), sum(4..8)],
        }
    }

    pub fn to_f64(&self) -> CellProbs<f64> {
        CellProbs {
            p: std::array::from_fn(|i| self.p[i].to_f64()),
            kind: self.kind,
        }
    }
}

/// Outcome parametrisation by baseline rates `q0`, `q1`, a Z-effect `c` and
/// an X-by-Z interaction `d`. `px` doubles as the design fraction for the
/// block-randomised regime.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EffectParams<T = f64> {
    pub q0: T,
    pub q1: T,
    pub c: T,
    pub d: T,
    pub pz: T,
    pub px: T,
}

impl<T: Scalar> EffectParams<T> {
    /// The induced `p_Y`, unchecked.
    pub fn induced_py(&self) -> [T; 4] {
        let (q0, q1, c, d) = (
            self.q0.clone(),
            self.q1.clone(),
            self.c.clone(),
            self.d.clone(),
        );
        let pz = self.pz.clone();
        let qz = T::one() - pz.clone();
        [
            q0.clone() - c.clone() - d.clone() * pz.clone(),
            q0 + c.clone() + d.clone() * qz.clone(),
            q1.clone() - c.clone() + d.clone() * pz,
            q1 + c - d * qz,
        ]
    }

    pub fn to_params(&self) -> Result<VStructParams<T>> {
        from_effect_params(self)
    }
}

/// Map effect parameters to the probability tables, rejecting the first
/// induced probability that leaves `[0, 1]`.
pub fn from_effect_params<T: Scalar>(e: &EffectParams<T>) -> Result<VStructParams<T>> {
    check_unit("pz", &e.pz)?;
    check_unit("px", &e.px)?;
    let py = e.induced_py();
    for (j, v) in py.iter().enumerate() {
        if *v < T::zero() || *v > T::one() {
            return Err(Error::domain(
                format!("py{j}"),
                format!("induced probability {} is not in [0, 1]", v.to_f64()),
            ));
        }
    }
    Ok(VStructParams {
        px: e.px.clone(),
        pz: e.pz.clone(),
        py,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    Random,
    Fixed,
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Regime::Random => "random",
            Regime::Fixed => "fixed",
        })
    }
}

impl std::str::FromStr for Regime {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random" => Ok(Regime::Random),
            "fixed" => Ok(Regime::Fixed),
            other => Err(Error::Parse(format!("unknown regime {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "design", rename_all = "lowercase")]
pub enum Design {
    Random { n: u32 },
    Fixed { n0: u32, n1: u32 },
}

impl Design {
    pub fn random(n: u32) -> Result<Self> {
        if n < 2 {
            return Err(Error::domain("n", format!("need n >= 2, got {n}")));
        }
        Ok(Design::Random { n })
    }

    pub fn fixed(n0: u32, n1: u32) -> Result<Self> {
        if n0 + n1 < 2 {
            return Err(Error::domain(
                "n0",
                format!("need n0 + n1 >= 2, got {}", n0 + n1),
            ));
        }
        Ok(Design::Fixed { n0, n1 })
    }

    pub fn n(&self) -> u32 {
        match *self {
            Design::Random { n } => n,
            Design::Fixed { n0, n1 } => n0 + n1,
        }
    }

    pub fn regime(&self) -> Regime {
        match self {
            Design::Random { .. } => Regime::Random,
            Design::Fixed { .. } => Regime::Fixed,
        }
    }

    /// `N1 / N` for the fixed design.
    pub fn xi(&self) -> Option<f64> {
        match *self {
            Design::Random { .. } => None,
            Design::Fixed { n0, n1 } => Some(n1 as f64 / (n0 + n1) as f64),
        }
    }
}

/// Exact-rational parameters from text (fractions or decimals).
pub fn parse_params(px: &str, pz: &str, py: [&str; 4]) -> Result<VStructParams<BigRational>> {
    use crate::numeric::parse_rational;
    let named =
        |name: &str, s: &str| parse_rational(s).map_err(|e| Error::domain(name, e.to_string()));
    VStructParams::new(
        named("px", px)?,
        named("pz", pz)?,
        [
            named("py0", py[0])?,
            named("py1", py[1])?,
            named("py2", py[2])?,
            named("py3", py[3])?,
        ],
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigInt;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    fn setting() -> VStructParams<BigRational> {
        VStructParams::new(q(1, 3), q(2, 3), [q(1, 6), q(1, 2), q(1, 3), q(5, 6)]).unwrap()
    }

    #[test]
    fn cell_probs_reference_setting() {
        let p = setting().cell_probs();
        let want = [
            q(5, 27),
            q(1, 27),
            q(2, 9),
            q(2, 9),
            q(2, 27),
            q(1, 27),
            q(1, 27),
            q(5, 27),
        ];
        assert_eq!(p.p, want);
        assert_eq!(p.totals(), vec![q(1, 1)]);
    }

    #[test]
    fn cell_probs_zero_treatment_and_symmetry() {
        let p = VStructParams::new(0.0, 0.3, [0.1, 0.2, 0.3, 0.4])
            .unwrap()
            .cell_probs();
        assert!(p.p[4..].iter().all(|&v| v == 0.0));
        let p = VStructParams::new(0.5, 0.5, [0.5; 4]).unwrap().cell_probs();
        assert!(p.p.iter().all(|&v| v == 0.125));
    }

    #[test]
    fn fixed_cells_reference_setting() {
        let r = setting().cell_probs_fixed();
        let want = [
            q(5, 18),
            q(1, 18),
            q(1, 3),
            q(1, 3),
            q(2, 9),
            q(1, 9),
            q(1, 9),
            q(5, 9),
        ];
        assert_eq!(r.p, want);
        assert_eq!(r.totals(), vec![q(1, 1), q(1, 1)]);

        let r = VStructParams::new(0.4, 0.0, [0.1, 0.2, 0.3, 0.4])
            .unwrap()
            .cell_probs_fixed();
        for i in [2, 3, 6, 7] {
            assert_eq!(r.p[i], 0.0);
        }
        let r = VStructParams::new(0.4, 0.5, [0.5; 4])
            .unwrap()
            .cell_probs_fixed();
        assert!(r.p.iter().all(|&v| v == 0.25));
    }

    #[test]
    fn effect_parametrisation() {
        let e = EffectParams {
            q0: q(1, 3),
            q1: q(2, 3),
            c: q(0, 1),
            d: q(0, 1),
            pz: q(2, 3),
            px: q(1, 2),
        };
        assert_eq!(
            e.to_params().unwrap().py,
            [q(1, 3), q(1, 3), q(2, 3), q(2, 3)]
        );

        let e = EffectParams { c: q(1, 6), ..e };
        let p = e.to_params().unwrap();
        assert_eq!(p.py, [q(1, 6), q(1, 2), q(1, 2), q(5, 6)]);
        assert_eq!(p.true_effect(), q(1, 3));

        let bad = EffectParams {
            q0: 0.0,
            q1: 1.0,
            c: 0.125,
            d: 0.0,
            pz: 0.5,
            px: 0.5,
        };
        match from_effect_params(&bad) {
            Err(Error::Domain { name, .. }) => assert_eq!(name, "py0"),
            other => panic!("expected domain error, got {other:?}"),
        }
    }

    #[test]
    fn true_effect_examples() {
        assert_eq!(setting().true_effect(), q(5, 18));
        let flat = VStructParams::new(0.3, 0.6, [0.4; 4]).unwrap();
        assert_eq!(flat.true_effect(), 0.0);
    }

    #[test]
    fn rejects_out_of_range() {
        assert!(VStructParams::new(1.5, 0.5, [0.5; 4]).is_err());
        assert!(VStructParams::new(0.5, -0.1, [0.5; 4]).is_err());
        match VStructParams::new(0.5, 0.5, [0.5, 0.5, 2.0, 0.5]) {
            Err(Error::Domain { name, .. }) => assert_eq!(name, "py2"),
            other => panic!("{other:?}"),
        }
        assert!(CellProbs::new([0.2; 8], CellKind::Random).is_err());
        assert!(CellProbs::new([0.25; 8], CellKind::Fixed).is_ok());
        assert!(Design::random(1).is_err());
        assert!(Design::fixed(1, 0).is_err());
        assert_eq!(Design::fixed(66, 33).unwrap().xi(), Some(1.0 / 3.0));
    }

    #[test]
    fn mirror_swaps_arms() {
        let p = setting();
        let m = p.mirrored();
        let (a, b) = (p.cell_probs().p, m.cell_probs().p);
        for i in 0..4 {
            assert_eq!(a[i], b[i + 4]);
        }
        assert_eq!(m.true_effect(), -p.true_effect());
    }

    #[test]
    fn parses_text_parameters() {
        let p = parse_params("1/3", "2/3", ["1/6", "0.5", "1/3", "5/6"]).unwrap();
        assert_eq!(p, setting());
        assert!(parse_params("1/3", "x", ["0", "0", "0", "0"]).is_err());
    }
}
