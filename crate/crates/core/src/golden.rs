//! Reference values bundled from `fixtures/golden.toml`, and their
//! re-evaluation.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::analytic::{cov_rm_random_family, fixed_summary, Family};
use crate::combine::CombineReport;
use crate::error::{Error, Result};
use crate::model::{parse_params, Regime, VStructParams};
use crate::oracles::mixture_random_family;

pub const GOLDEN_TOML: &str = include_str!("../fixtures/golden.toml");

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Setting {
    pub regime: Regime,
    #[serde(default)]
    pub px: Option<String>,
    pub pz: String,
    pub py: [String; 4],
    #[serde(default)]
    pub n: Option<u32>,
    #[serde(default)]
    pub n0: Option<u32>,
    #[serde(default)]
    pub n1: Option<u32>,
}

impl Setting {
    /// Parameters in floating point. The fixed design has no `p_X`; the
    /// placeholder `1/2` is never read.
    pub fn params(&self) -> Result<VStructParams<f64>> {
        let px = self.px.as_deref().unwrap_or("1/2");
        let py = [&self.py[0], &self.py[1], &self.py[2], &self.py[3]].map(|s| s.as_str());
        Ok(parse_params(px, &self.pz, py)?.to_f64())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    Published,
    Derived,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GoldenValue {
    pub setting: String,
    pub quantity: String,
    pub family: Family,
    pub value: f64,
    pub tolerance: f64,
    pub provenance: Provenance,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GoldenSet {
    pub settings: BTreeMap<String, Setting>,
    pub value: Vec<GoldenValue>,
}

pub fn load() -> Result<GoldenSet> {
    parse(GOLDEN_TOML)
}

pub fn parse(text: &str) -> Result<GoldenSet> {
    let set: GoldenSet = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    for v in &set.value {
        if !set.settings.contains_key(&v.setting) {
            return Err(Error::Parse(format!(
                "golden value refers to unknown setting {:?}",
                v.setting
            )));
        }
    }
    Ok(set)
}

/// The five headline quantities of one setting in one family.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Headline {
    pub sqrt_var_r: f64,
    pub sqrt_var_m: f64,
    pub sqrt_cov_rm: f64,
    pub alpha_star: f64,
    pub sqrt_var_p_star: f64,
}

impl Headline {
    pub fn get(&self, quantity: &str) -> Option<f64> {
        Some(match quantity {
            "sqrt_var_r" => self.sqrt_var_r,
            "sqrt_var_m" => self.sqrt_var_m,
            "sqrt_cov_rm" => self.sqrt_cov_rm,
            "alpha_star" => self.alpha_star,
            "sqrt_var_p_star" => self.sqrt_var_p_star,
            _ => return None,
        })
    }
}

/// Random X: analytic `C[R, M]` and mixture variances. Fixed X: the
/// analytic set.
pub fn headline(setting: &Setting, family: Family, workers: usize) -> Result<Headline> {
    let params = setting.params()?;
    let (vr, vm, c) = match setting.regime {
        Regime::Random => {
            let n = setting
                .n
                .ok_or_else(|| Error::Parse("random setting without n".into()))?;
            let mix = mixture_random_family(&params, n, family, workers)?.summary();
            (
                mix.var_r,
                mix.var_m,
                cov_rm_random_family(&params, n, family)?,
            )
        }
        Regime::Fixed => {
            let (n0, n1) = setting
                .n0
                .zip(setting.n1)
                .ok_or_else(|| Error::Parse("fixed setting without n0/n1".into()))?;
            let s = fixed_summary(&params, n0, n1, family)?;
            (s.var_r, s.var_m, s.cov_rm)
        }
    };
    let r = CombineReport::new(vr, vm, c)?;
    Ok(Headline {
        sqrt_var_r: vr.sqrt(),
        sqrt_var_m: vm.sqrt(),
        sqrt_cov_rm: c.sqrt(),
        alpha_star: r.alpha_star,
        sqrt_var_p_star: r.sqrt_var_p_star,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GoldenCheck {
    #[serde(flatten)]
    pub golden: GoldenValue,
    pub computed: f64,
    pub pass: bool,
}

pub fn check_all(set: &GoldenSet, workers: usize) -> Result<Vec<GoldenCheck>> {
    let mut cache: BTreeMap<(String, Family), Headline> = BTreeMap::new();
    let mut out = Vec::with_capacity(set.value.len());
    for g in &set.value {
        let key = (g.setting.clone(), g.family);
        if !cache.contains_key(&key) {
            cache.insert(
                key.clone(),
                headline(&set.settings[&g.setting], g.family, workers)?,
            );
        }
        let computed = cache[&key]
            .get(&g.quantity)
            .ok_or_else(|| Error::Parse(format!("unknown golden quantity {:?}", g.quantity)))?;
        out.push(GoldenCheck {
            golden: g.clone(),
            computed,
            pass: (computed - g.value).abs() <= g.tolerance,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixtures_parse() {
        let set = load().unwrap();
        assert_eq!(set.settings.len(), 2);
        assert!(set
            .value
            .iter()
            .any(|v| v.provenance == Provenance::Published));
        assert!(parse("[settings]\n[[value]]\nsetting = \"x\"\nquantity = \"alpha_star\"\nfamily = \"exact\"\nvalue = 0.0\ntolerance = 0.0\nprovenance = \"derived\"\n").is_err());
    }
}
