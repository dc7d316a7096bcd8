//! Grid sweeps over the treatment fraction and the Z-effect `C`.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::analytic::{fixed_summary, Family, Summary};
use crate::combine::CombineReport;
use crate::error::{Error, Result};
use crate::model::{Design, EffectParams, Regime, VStructParams};
use crate::oracles::{enumerate_fixed, enumerate_random, mixture_random_family, EnumCaps};
use crate::par::map_ordered;
use crate::report::Method;
use crate::simulate::{run_simulation, SimConfig};

/// Inclusive, equispaced axis.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub from: f64,
    pub to: f64,
    pub steps: u32,
}

impl Axis {
    pub fn new(from: f64, to: f64, steps: u32) -> Result<Self> {
        if steps == 0 {
            return Err(Error::domain("steps", "need at least one grid point"));
        }
        if !(from.is_finite() && to.is_finite()) {
            return Err(Error::domain("range", "axis ends must be finite"));
        }
        if steps == 1 && from != to {
            return Err(Error::domain("steps", "a one-point axis needs from == to"));
        }
        Ok(Axis { from, to, steps })
    }

    pub fn point(&self, i: u32) -> f64 {
        if self.steps == 1 {
            return self.from;
        }
        let t = i as f64 / (self.steps - 1) as f64;
        self.from + (self.to - self.from) * t
    }
}

/// `C` interval keeping all four induced `p_Y` in `[0, 1]`.
pub fn valid_c_range(q0: f64, q1: f64, d: f64, pz: f64) -> Option<(f64, f64)> {
    // p_Y = base + sign * C
    let qz = 1.0 - pz;
    let cells = [
        (q0 - d * pz, -1.0),
        (q0 + d * qz, 1.0),
        (q1 + d * pz, -1.0),
        (q1 - d * qz, 1.0),
    ];
    let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
    for (base, sign) in cells {
        // 0 <= base + sign * C <= 1
        let (a, b) = if sign > 0.0 {
            (-base, 1.0 - base)
        } else {
            (base - 1.0, base)
        };
        lo = lo.max(a);
        hi = hi.min(b);
    }
    (lo <= hi).then_some((lo, hi))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub regime: Regime,
    pub n: u32,
    /// `p_X` (random) or `xi` (fixed); outer axis.
    pub fraction: Axis,
    /// `C` before the zoom divisor; inner axis.
    pub c: Axis,
    /// Every `C` is divided by this, as in zoomed plots at larger `N`.
    pub zoom: f64,
    pub d: f64,
    pub q0: f64,
    pub q1: f64,
    pub pz: f64,
    pub method: Method,
    pub family: Family,
    /// Monte Carlo settings, used only with `Method::MonteCarlo`.
    pub reps: u64,
    pub seed: u64,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.zoom.is_finite() && self.zoom > 0.0) {
            return Err(Error::domain("zoom", "divisor must be positive"));
        }
        if self.n < 2 {
            return Err(Error::domain("n", "need n >= 2"));
        }
        if self.regime == Regime::Random && self.method == Method::Analytic {
            return Err(Error::domain(
                "method",
                "analytic moments give only C[R,M] for random X; use mixture, enumeration or monte-carlo",
            ));
        }
        if self.regime == Regime::Fixed && self.method == Method::Mixture {
            return Err(Error::domain(
                "method",
                "the mixture oracle applies to random X only",
            ));
        }
        if self.method == Method::MonteCarlo && self.reps < 2 {
            return Err(Error::domain("reps", "need at least two repetitions"));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.fraction.steps as usize * self.c.steps as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn method_label(&self) -> String {
        match self.method {
            Method::Analytic | Method::Mixture => format!("{}:{}", self.method, self.family),
            m => m.to_string(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub regime: Regime,
    pub n: u32,
    pub n0: Option<u32>,
    pub n1: Option<u32>,
    /// `p_X`, or the realised `N1 / N` for the fixed design.
    pub px_or_xi: f64,
    pub pz: f64,
    pub q0: f64,
    pub q1: f64,
    pub c_param: f64,
    pub d_param: f64,
    pub var_r: f64,
    pub var_m: f64,
    pub cov_rm: f64,
    pub alpha_star: f64,
    pub var_p_star: f64,
    pub delta_combined: f64,
    pub delta_mr: f64,
    pub method: String,
    pub dominance: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SkippedPoint {
    /// Row-major grid index.
    pub index: usize,
    pub px_or_xi: f64,
    pub c_param: f64,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    pub skipped: Vec<SkippedPoint>,
}

pub const CSV_HEADER: &str = "regime,n,n0,n1,px_or_xi,pz,q0,q1,c_param,d_param,var_r,var_m,cov_rm,\
alpha_star,var_p_star,delta_combined,delta_mr,method,dominance";

fn point_moments(spec: &SweepSpec, params: &VStructParams<f64>, design: Design) -> Result<Summary> {
    let caps = EnumCaps::default();
    match (spec.method, design) {
        (Method::Mixture, Design::Random { n }) => {
            Ok(mixture_random_family(params, n, spec.family, 1)?.summary())
        }
        (Method::Analytic, Design::Fixed { n0, n1 }) => fixed_summary(params, n0, n1, spec.family),
        (Method::Enumeration, Design::Random { n }) => {
            Ok(enumerate_random(&params.cell_probs(), n, &caps, 1)?.summary())
        }
        (Method::Enumeration, Design::Fixed { n0, n1 }) => {
            Ok(enumerate_fixed(&params.cell_probs_fixed(), n0, n1, &caps, 1)?.summary())
        }
        (Method::MonteCarlo, design) => {
            let mut cfg = SimConfig::new(design, spec.reps, spec.seed);
            cfg.chunk_size = spec.reps;
            let r = run_simulation(&cfg, params)?;
            let get = |e: crate::simulate::Estimate| e.value.unwrap_or(f64::NAN);
            Ok(Summary {
                e_r: get(r.mean_r),
                e_m: get(r.mean_m),
                var_r: get(r.var_r),
                var_m: get(r.var_m),
                cov_rm: get(r.cov_rm),
            })
        }
        (m, d) => Err(Error::domain(
            "method",
            format!("{m} does not apply to the {} design", d.regime()),
        )),
    }
}

fn evaluate(spec: &SweepSpec, index: usize) -> std::result::Result<SweepRow, SkippedPoint> {
    let i = (index / spec.c.steps as usize) as u32;
    let j = (index % spec.c.steps as usize) as u32;
    let frac = spec.fraction.point(i);
    let c = spec.c.point(j) / spec.zoom;
    let skip = |px_or_xi: f64, reason: String| SkippedPoint {
        index,
        px_or_xi,
        c_param: c,
        reason,
    };
    let (design, fraction) = match spec.regime {
        Regime::Random => (Design::Random { n: spec.n }, frac),
        Regime::Fixed => {
            if !(frac > 0.0 && frac < 1.0) {
                return Err(skip(frac, format!("xi = {frac} must lie in (0, 1)")));
            }
            let n1 = (frac * spec.n as f64).round() as u32;
            if n1 == 0 || n1 >= spec.n {
                return Err(skip(
                    frac,
                    format!("xi = {frac} rounds to an empty arm at n = {}", spec.n),
                ));
            }
            (
                Design::Fixed {
                    n0: spec.n - n1,
                    n1,
                },
                n1 as f64 / spec.n as f64,
            )
        }
    };
    let effect = EffectParams {
        q0: spec.q0,
        q1: spec.q1,
        c,
        d: spec.d,
        pz: spec.pz,
        px: fraction,
    };
    let result = effect.to_params().and_then(|params| {
        let s = point_moments(spec, &params, design)?;
        let report = CombineReport::new(s.var_r, s.var_m, s.cov_rm)?;
        Ok((s, report))
    });
    let (s, report) = result.map_err(|e| skip(fraction, e.to_string()))?;
    let values = [
        s.var_r,
        s.var_m,
        s.cov_rm,
        report.alpha_star,
        report.var_p_star,
        report.delta_combined,
        report.delta_mr,
    ];
    if values.iter().any(|v| !v.is_finite()) {
        return Err(skip(fraction, "non-finite moment".into()));
    }
    let (n0, n1) = match design {
        Design::Random { .. } => (None, None),
        Design::Fixed { n0, n1 } => (Some(n0), Some(n1)),
    };
    Ok(SweepRow {
        regime: spec.regime,
        n: spec.n,
        n0,
        n1,
        px_or_xi: fraction,
        pz: spec.pz,
        q0: spec.q0,
        q1: spec.q1,
        c_param: c,
        d_param: spec.d,
        var_r: s.var_r,
        var_m: s.var_m,
        cov_rm: s.cov_rm,
        alpha_star: report.alpha_star,
        var_p_star: report.var_p_star,
        delta_combined: report.delta_combined,
        delta_mr: report.delta_mr,
        method: spec.method_label(),
        dominance: report.dominance,
    })
}

/// Evaluate every grid point, row-major over (fraction, C). Points whose
/// parameters or moments are invalid are recorded and skipped.
pub fn sweep(spec: &SweepSpec, workers: usize) -> Result<SweepResult> {
    spec.validate()?;
    let mut out = SweepResult {
        rows: Vec::new(),
        skipped: Vec::new(),
    };
    for r in map_ordered(spec.len(), workers, |k| evaluate(spec, k)) {
        match r {
            Ok(row) => out.rows.push(row),
            Err(s) => out.skipped.push(s),
        }
    }
    Ok(out)
}

fn fmt_float(v: f64) -> String {
    format!("{v:.8e}")
}

pub fn write_csv<W: Write>(rows: &[SweepRow], mut w: W) -> std::io::Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    let opt = |v: Option<u32>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in rows {
        let floats = [
            r.px_or_xi,
            r.pz,
            r.q0,
            r.q1,
            r.c_param,
            r.d_param,
            r.var_r,
            r.var_m,
            r.cov_rm,
            r.alpha_star,
            r.var_p_star,
            r.delta_combined,
            r.delta_mr,
        ]
        .map(fmt_float)
        .join(",");
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            r.regime,
            r.n,
            opt(r.n0),
            opt(r.n1),
            floats,
            r.method,
            r.dominance
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(regime: Regime, method: Method) -> SweepSpec {
        SweepSpec {
            regime,
            n: 20,
            fraction: Axis::new(0.2, 0.8, 3).unwrap(),
            c: Axis::new(-0.3, 0.3, 3).unwrap(),
            zoom: 1.0,
            d: 0.0,
            q0: 1.0 / 3.0,
            q1: 2.0 / 3.0,
            pz: 2.0 / 3.0,
            method,
            family: Family::Exact,
            reps: 0,
            seed: 0,
        }
    }

    #[test]
    fn valid_range_at_zero_interaction() {
        let (lo, hi) = valid_c_range(1.0 / 3.0, 2.0 / 3.0, 0.0, 2.0 / 3.0).unwrap();
        assert!((lo + 1.0 / 3.0).abs() < 1e-15 && (hi - 1.0 / 3.0).abs() < 1e-15);
        assert!(valid_c_range(0.5, 0.5, 3.0, 0.5).is_none());
    }

    #[test]
    fn grid_order_is_row_major() {
        let r = sweep(&spec(Regime::Random, Method::Mixture), 2).unwrap();
        assert_eq!(r.rows.len(), 9);
        assert!(r.skipped.is_empty());
        assert_eq!(r.rows[1].px_or_xi, 0.2);
        assert!((r.rows[1].c_param).abs() < 1e-15);
        assert_eq!(r.rows[3].px_or_xi, 0.5);
    }

    #[test]
    fn invalid_points_are_skipped_not_fatal() {
        let mut s = spec(Regime::Random, Method::Mixture);
        s.c = Axis::new(-0.5, 0.5, 3).unwrap();
        let r = sweep(&s, 1).unwrap();
        assert_eq!(r.rows.len(), 3);
        assert_eq!(r.skipped.len(), 6);
        assert!(r.skipped[0].reason.contains("py"));
    }

    #[test]
    fn fixed_records_realised_fraction() {
        let mut s = spec(Regime::Fixed, Method::Analytic);
        s.n = 7;
        s.fraction = Axis::new(0.3, 0.3, 1).unwrap();
        let r = sweep(&s, 1).unwrap();
        assert_eq!(r.rows[0].n1, Some(2));
        assert_eq!(r.rows[0].px_or_xi, 2.0 / 7.0);
    }

    #[test]
    fn single_point_matches_direct_report() {
        let mut s = spec(Regime::Random, Method::Mixture);
        s.fraction = Axis::new(0.4, 0.4, 1).unwrap();
        s.c = Axis::new(0.1, 0.1, 1).unwrap();
        let row = sweep(&s, 1).unwrap().rows.remove(0);
        let e = EffectParams {
            q0: s.q0,
            q1: s.q1,
            c: 0.1,
            d: 0.0,
            pz: s.pz,
            px: 0.4,
        };
        let m = mixture_random_family(&e.to_params().unwrap(), 20, Family::Exact, 1)
            .unwrap()
            .summary();
        let rep = CombineReport::new(m.var_r, m.var_m, m.cov_rm).unwrap();
        assert_eq!(row.alpha_star, rep.alpha_star);
        assert_eq!(row.delta_combined, rep.delta_combined);
    }

    #[test]
    fn method_regime_mismatch_is_rejected() {
        assert!(sweep(&spec(Regime::Random, Method::Analytic), 1).is_err());
        assert!(sweep(&spec(Regime::Fixed, Method::Mixture), 1).is_err());
    }

    #[test]
    fn csv_layout() {
        let r = sweep(&spec(Regime::Fixed, Method::Analytic), 1).unwrap();
        let mut buf = Vec::new();
        write_csv(&r.rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), CSV_HEADER);
        let first: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(first.len(), 19);
        assert_eq!(first[0], "fixed");
        assert_eq!(first[17], "analytic:exact");
    }
}
