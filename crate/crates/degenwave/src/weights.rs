//! The degenerate stiffness coefficient a(x) and every explicit constant
//! derived from it: degeneracy exponents, Friedrichs/Poincare constants,
//! the observability time, and the observability constant.
//!
//! The coefficient vanishes at the interior point x = 1 and is positive
//! elsewhere on [c, d], monotone toward the degeneracy on (x1*, 1) and
//! (1, x2*). The degeneration is *weak* when 1/a is integrable across the
//! singular point and *strong* otherwise; the two regimes carry different
//! transmission behavior at x = 1.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Spatial domain [c, d] with 0 <= c < 1 < d <= 2, plus the monotonicity
/// onset points x1* in [c, 1) and x2* in (1, d].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec {
    pub c: f64,
    pub d: f64,
    pub x1star: f64,
    pub x2star: f64,
}

impl DomainSpec {
    pub fn new(c: f64, d: f64, x1star: f64, x2star: f64) -> Result<Self> {
        let dom = DomainSpec { c, d, x1star, x2star };
        dom.validate()?;
        Ok(dom)
    }

    /// Domain with the monotonicity onsets at the outer boundary
    /// (x1* = c, x2* = d), the usual situation for pure power weights.
    pub fn whole_interval(c: f64, d: f64) -> Result<Self> {
        Self::new(c, d, c, d)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0 <= self.c && self.c < 1.0 && 1.0 < self.d && self.d <= 2.0) {
            return Err(Error::InvalidDomain(format!(
                "need 0 <= c < 1 < d <= 2, got c = {}, d = {}",
                self.c, self.d
            )));
        }
        if !(self.c <= self.x1star && self.x1star < 1.0) {
            return Err(Error::InvalidDomain(format!(
                "need c <= x1* < 1, got x1* = {}",
                self.x1star
            )));
        }
        if !(1.0 < self.x2star && self.x2star <= self.d) {
            return Err(Error::InvalidDomain(format!(
                "need 1 < x2* <= d, got x2* = {}",
                self.x2star
            )));
        }
        Ok(())
    }

    pub fn contains(&self, x: f64) -> bool {
        self.c <= x && x <= self.d
    }
}

/// Weak or strong degeneration: whether 1/a is integrable across x = 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DegeneracyClass {
    Weak,
    Strong,
}

/// Tabulated coefficient samples with monotone-cubic (Hermite) interpolation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabulatedWeight {
    pub nodes: Vec<f64>,
    pub values: Vec<f64>,
    /// Interpolation slopes: supplied by the caller or filled in by the
    /// Fritsch-Carlson monotone construction.
    pub slopes: Vec<f64>,
    /// Index of the singular node (the node nearest 1, where a = 0).
    pub singular_index: usize,
}

impl TabulatedWeight {
    /// Build from (x, a) samples; slopes from monotone-cubic fitting.
    pub fn from_samples(nodes: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        let slopes = pchip_slopes(&nodes, &values)?;
        Self::with_slopes(nodes, values, slopes)
    }

    /// Build from (x, a, a') samples.
    pub fn with_slopes(nodes: Vec<f64>, values: Vec<f64>, slopes: Vec<f64>) -> Result<Self> {
        if nodes.len() < 4 {
            return Err(Error::InvalidWeight(format!(
                "tabulated weight needs at least 4 nodes, got {}",
                nodes.len()
            )));
        }
        if values.len() != nodes.len() || slopes.len() != nodes.len() {
            return Err(Error::InvalidWeight(
                "tabulated weight columns have mismatched lengths".into(),
            ));
        }
        if nodes.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidWeight(
                "tabulated nodes must be strictly increasing".into(),
            ));
        }
        let singular_index = nodes
            .iter()
            .enumerate()
            .min_by(|a, b| {
                (a.1 - 1.0)
                    .abs()
                    .partial_cmp(&(b.1 - 1.0).abs())
                    .unwrap()
            })
            .map(|(i, _)| i)
            .unwrap();
        for (i, &v) in values.iter().enumerate() {
            if v < 0.0 {
                return Err(Error::InvalidWeight(format!(
                    "negative sample a({}) = {v}",
                    nodes[i]
                )));
            }
            if v == 0.0 && i != singular_index {
                return Err(Error::InvalidWeight(format!(
                    "a vanishes at x = {} away from the singular node",
                    nodes[i]
                )));
            }
        }
        if values[singular_index] != 0.0 {
            return Err(Error::InvalidWeight(format!(
                "a({}) = {} at the node nearest 1; expected exactly 0",
                nodes[singular_index], values[singular_index]
            )));
        }
        Ok(TabulatedWeight {
            nodes,
            values,
            slopes,
            singular_index,
        })
    }

    /// Parse two- or three-column numeric text: x, a, and optionally a'.
    pub fn parse_text(text: &str) -> Result<Self> {
        let mut nodes = Vec::new();
        let mut values = Vec::new();
        let mut slopes = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line.split_whitespace().collect();
            if cols.len() != 2 && cols.len() != 3 {
                return Err(Error::InvalidWeight(format!(
                    "line {}: expected 2 or 3 columns, got {}",
                    lineno + 1,
                    cols.len()
                )));
            }
            let parse = |s: &str| -> Result<f64> {
                s.parse::<f64>().map_err(|_| {
                    Error::InvalidWeight(format!("line {}: bad number {s:?}", lineno + 1))
                })
            };
            nodes.push(parse(cols[0])?);
            values.push(parse(cols[1])?);
            if cols.len() == 3 {
                slopes.push(parse(cols[2])?);
            }
        }
        if slopes.is_empty() {
            Self::from_samples(nodes, values)
        } else if slopes.len() == nodes.len() {
            Self::with_slopes(nodes, values, slopes)
        } else {
            Err(Error::InvalidWeight(
                "derivative column present on some lines but not all".into(),
            ))
        }
    }

    fn eval(&self, x: f64) -> (f64, f64) {
        let n = self.nodes.len();
        if x <= self.nodes[0] {
            return (self.values[0], self.slopes[0]);
        }
        if x >= self.nodes[n - 1] {
            return (self.values[n - 1], self.slopes[n - 1]);
        }
        let k = match self
            .nodes
            .binary_search_by(|probe| probe.partial_cmp(&x).unwrap())
        {
            Ok(k) => return (self.values[k], self.slopes[k]),
            Err(k) => k - 1,
        };
        let h = self.nodes[k + 1] - self.nodes[k];
        let t = (x - self.nodes[k]) / h;
        let (a0, a1) = (self.values[k], self.values[k + 1]);
        let (m0, m1) = (self.slopes[k] * h, self.slopes[k + 1] * h);
        let t2 = t * t;
        let t3 = t2 * t;
        let value = a0 * (2.0 * t3 - 3.0 * t2 + 1.0)
            + m0 * (t3 - 2.0 * t2 + t)
            + a1 * (-2.0 * t3 + 3.0 * t2)
            + m1 * (t3 - t2);
        let deriv = (a0 * (6.0 * t2 - 6.0 * t)
            + m0 * (3.0 * t2 - 4.0 * t + 1.0)
            + a1 * (-6.0 * t2 + 6.0 * t)
            + m1 * (3.0 * t2 - 2.0 * t))
            / h;
        (value.max(0.0), deriv)
    }
}

/// Fritsch-Carlson monotone cubic slopes.
fn pchip_slopes(nodes: &[f64], values: &[f64]) -> Result<Vec<f64>> {
    let n = nodes.len();
    if n < 2 || values.len() != n {
        return Err(Error::InvalidWeight("too few samples for interpolation".into()));
    }
    let h: Vec<f64> = nodes.windows(2).map(|w| w[1] - w[0]).collect();
    let delta: Vec<f64> = (0..n - 1).map(|k| (values[k + 1] - values[k]) / h[k]).collect();
    let mut m = vec![0.0; n];
    for k in 1..n - 1 {
        if delta[k - 1] * delta[k] <= 0.0 {
            m[k] = 0.0;
        } else {
            let w1 = 2.0 * h[k] + h[k - 1];
            let w2 = h[k] + 2.0 * h[k - 1];
            m[k] = (w1 + w2) / (w1 / delta[k - 1] + w2 / delta[k]);
        }
    }
    m[0] = endpoint_slope(h[0], h.get(1).copied().unwrap_or(h[0]), delta[0], delta.get(1).copied().unwrap_or(delta[0]));
    m[n - 1] = endpoint_slope(
        h[n - 2],
        if n >= 3 { h[n - 3] } else { h[n - 2] },
        delta[n - 2],
        if n >= 3 { delta[n - 3] } else { delta[n - 2] },
    );
    Ok(m)
}

fn endpoint_slope(h0: f64, h1: f64, d0: f64, d1: f64) -> f64 {
    let m = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if m * d0 <= 0.0 {
        0.0
    } else if d0 * d1 < 0.0 && m.abs() > 3.0 * d0.abs() {
        3.0 * d0
    } else {
        m
    }
}

/// The degenerate coefficient a(x).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum WeightSpec {
    /// a(x) = (1-x)^(2 p1) left of 1, (x-1)^(2 p2) right of 1, with
    /// 0 < p_i < 1 so the degeneracy exponents 2 p_i stay below 2.
    TwoSidedPower { p1: f64, p2: f64 },
    /// a(x) = |x-1|^p with p in (0, 2).
    SymmetricPower { p: f64 },
    /// Sampled coefficient with monotone-cubic interpolation.
    Tabulated(TabulatedWeight),
    /// Constant coefficient for nondegenerate calibration runs. Not a
    /// degenerate weight: the exponent/constant operations reject it.
    Uniform { value: f64 },
}

impl WeightSpec {
    pub fn validate(&self, dom: &DomainSpec) -> Result<()> {
        dom.validate()?;
        match self {
            WeightSpec::TwoSidedPower { p1, p2 } => {
                for p in [p1, p2] {
                    if !(*p > 0.0 && *p < 1.0) {
                        return Err(Error::InvalidWeight(format!(
                            "two-sided power exponent p = {p} outside (0, 1); \
                             the degeneracy exponent 2p must lie in (0, 2)"
                        )));
                    }
                }
                Ok(())
            }
            WeightSpec::SymmetricPower { p } => {
                if !(*p > 0.0 && *p < 2.0) {
                    return Err(Error::InvalidWeight(format!(
                        "symmetric power exponent p = {p} outside (0, 2)"
                    )));
                }
                Ok(())
            }
            WeightSpec::Tabulated(t) => {
                if t.nodes[0] > dom.c || *t.nodes.last().unwrap() < dom.d {
                    return Err(Error::InvalidWeight(format!(
                        "tabulated nodes cover [{}, {}] but the domain is [{}, {}]",
                        t.nodes[0],
                        t.nodes.last().unwrap(),
                        dom.c,
                        dom.d
                    )));
                }
                Ok(())
            }
            WeightSpec::Uniform { value } => {
                if *value > 0.0 {
                    Ok(())
                } else {
                    Err(Error::InvalidWeight(format!("uniform value {value} <= 0")))
                }
            }
        }
    }

    pub fn is_degenerate(&self) -> bool {
        !matches!(self, WeightSpec::Uniform { .. })
    }

    /// Coefficient value and one-sided derivative at x. At exactly x = 1 the
    /// derivative of a degenerate weight is reported as 0 (the coefficient
    /// value there is what matters downstream).
    pub fn eval(&self, dom: &DomainSpec, x: f64) -> Result<(f64, f64)> {
        if !dom.contains(x) {
            return Err(Error::OutsideDomain { x, c: dom.c, d: dom.d });
        }
        Ok(self.eval_unchecked(x))
    }

    pub(crate) fn eval_unchecked(&self, x: f64) -> (f64, f64) {
        match self {
            WeightSpec::TwoSidedPower { p1, p2 } => {
                if x < 1.0 {
                    let s = 1.0 - x;
                    (s.powf(2.0 * p1), -2.0 * p1 * s.powf(2.0 * p1 - 1.0))
                } else if x > 1.0 {
                    let s = x - 1.0;
                    (s.powf(2.0 * p2), 2.0 * p2 * s.powf(2.0 * p2 - 1.0))
                } else {
                    (0.0, 0.0)
                }
            }
            WeightSpec::SymmetricPower { p } => {
                if x < 1.0 {
                    let s = 1.0 - x;
                    (s.powf(*p), -p * s.powf(p - 1.0))
                } else if x > 1.0 {
                    let s = x - 1.0;
                    (s.powf(*p), p * s.powf(p - 1.0))
                } else {
                    (0.0, 0.0)
                }
            }
            WeightSpec::Tabulated(t) => t.eval(x),
            WeightSpec::Uniform { value } => (*value, 0.0),
        }
    }
}

/// Everything the toolkit derives from a weight in closed form (or by dense
/// sampling for tabulated weights): exponents, explicit Friedrichs constants,
/// the Poincare constant, the observability time, and the slope conditions
/// under which the boundary observability inequality is proved.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DegeneracyReport {
    pub mu1: f64,
    pub kappa1: f64,
    pub mu2: f64,
    pub kappa2: f64,
    pub class: DegeneracyClass,
    pub d1a: f64,
    pub d2a: f64,
    /// C_a with C_a^2 = 4 max of the four envelope ratios.
    pub ca: f64,
    /// D_a = max(sqrt(D_1a), sqrt(D_2a)).
    pub da: f64,
    /// Poincare constant min(D_a, C_a).
    pub poincare: f64,
    /// Minimal observability horizon T_a.
    pub ta: f64,
    pub slope_conditions_ok: bool,
    /// Value of a at the left and right boundary.
    pub a_c: f64,
    pub a_d: f64,
    /// For tabulated weights, the sample spacing used for the suprema and
    /// minima; exact closed forms carry no tolerance.
    pub sampling_tolerance: Option<f64>,
}

impl DegeneracyReport {
    pub fn mu_max(&self) -> f64 {
        self.mu1.max(self.mu2)
    }
}

/// Friedrichs-type constants computed from the exponents.
#[derive(Debug, Clone, Copy)]
pub struct FriedrichsConstants {
    pub d1a: f64,
    pub d2a: f64,
    pub ca: f64,
    pub da: f64,
    pub poincare: f64,
}

const TABULATED_EXCLUSION: f64 = 1e-12;

fn sample_count_for(w: &WeightSpec) -> usize {
    match w {
        WeightSpec::Tabulated(t) => (10 * t.nodes.len()).max(4096),
        _ => 4096,
    }
}

/// Supremum of |x-1| |a'(x)| / a(x) over [lo, hi], sampled densely and
/// excluding a relative neighborhood of the singular point where the ratio
/// is 0/0. The monotonicity properties make the supremum a one-sided limit,
/// approximated by the nearest admissible sample.
///
/// For tabulated weights the two cells on each side of the singular node are
/// also excluded: a C1 interpolant vanishing at a node has an artificial local
/// exponent there regardless of the data, and the fitted slopes at the
/// immediately adjacent nodes carry O(1) relative error when the true
/// derivative is unbounded. The nearest admissible samples converge to the
/// one-sided limit as the table refines.
fn sampled_ratio_sup(w: &WeightSpec, lo: f64, hi: f64, samples: usize) -> f64 {
    let mut sup: f64 = 0.0;
    if hi <= lo {
        return 0.0;
    }
    let excluded = match w {
        WeightSpec::Tabulated(t) => {
            let s = t.singular_index;
            let left = t.nodes[s.saturating_sub(2)];
            let right = t.nodes[(s + 2).min(t.nodes.len() - 1)];
            Some((left, right))
        }
        _ => None,
    };
    for k in 0..=samples {
        let x = lo + (hi - lo) * (k as f64) / (samples as f64);
        if (x - 1.0).abs() < TABULATED_EXCLUSION {
            continue;
        }
        if let Some((sl, sr)) = excluded {
            if x >= sl && x <= sr {
                continue;
            }
        }
        let (a, da) = w.eval_unchecked(x);
        if a <= 0.0 {
            continue;
        }
        sup = sup.max((x - 1.0).abs() * da.abs() / a);
    }
    sup
}

fn sampled_min(w: &WeightSpec, lo: f64, hi: f64, samples: usize) -> f64 {
    if hi <= lo {
        let (a, _) = w.eval_unchecked(lo);
        return a;
    }
    let mut min = f64::INFINITY;
    for k in 0..=samples {
        let x = lo + (hi - lo) * (k as f64) / (samples as f64);
        let (a, _) = w.eval_unchecked(x);
        min = min.min(a);
    }
    min
}

/// Degeneracy exponents: mu_i is the supremum of |x-1||a'|/a over the inner
/// monotone interval on side i, and kappa_i * mu_i the supremum over the
/// whole side, with kappa_i >= 1. Closed forms for the analytic variants
/// (kappa = 1), dense sampling for tabulated ones.
pub fn compute_mu_kappa(w: &WeightSpec, dom: &DomainSpec) -> Result<(f64, f64, f64, f64)> {
    w.validate(dom)?;
    match w {
        WeightSpec::SymmetricPower { p } => Ok((*p, 1.0, *p, 1.0)),
        WeightSpec::TwoSidedPower { p1, p2 } => Ok((2.0 * p1, 1.0, 2.0 * p2, 1.0)),
        WeightSpec::Uniform { .. } => Err(Error::InvalidWeight(
            "uniform weight has no degeneracy exponents".into(),
        )),
        WeightSpec::Tabulated(t) => {
            // a = 0 anywhere except the singular node is structurally
            // rejected at construction; re-check the sampled evaluations.
            let samples = sample_count_for(w);
            for k in 0..=samples {
                let x = dom.c + (dom.d - dom.c) * (k as f64) / (samples as f64);
                if (x - 1.0).abs() < TABULATED_EXCLUSION {
                    continue;
                }
                let (a, _) = w.eval_unchecked(x);
                if a <= 0.0 && (x - t.nodes[t.singular_index]).abs() > TABULATED_EXCLUSION {
                    return Err(Error::InvalidWeight(format!(
                        "interpolated weight vanishes at x = {x} away from the singularity"
                    )));
                }
            }
            let mu1 = sampled_ratio_sup(w, dom.x1star, 1.0, samples);
            let full1 = sampled_ratio_sup(w, dom.c, 1.0, samples);
            let mu2 = sampled_ratio_sup(w, 1.0, dom.x2star, samples);
            let full2 = sampled_ratio_sup(w, 1.0, dom.d, samples);
            if mu1 <= 0.0 || mu2 <= 0.0 {
                return Err(Error::InvalidWeight(
                    "sampled degeneracy exponent is zero; weight does not degenerate at 1".into(),
                ));
            }
            let kappa1 = (full1 / mu1).max(1.0);
            let kappa2 = (full2 / mu2).max(1.0);
            Ok((mu1, kappa1, mu2, kappa2))
        }
    }
}

/// Weak iff 1/a is integrable over the domain. Analytic variants classify by
/// the exponent of a at the singularity; tabulated weights by a log-log
/// regression of the local exponent on the nodes nearest 1 (a fit of sigma in
/// a ~ C |x-1|^sigma, which is resolution-independent where quadrature of the
/// near-singular integrand is not). The tie sigma = 1 counts as strong.
pub fn classify(w: &WeightSpec, dom: &DomainSpec) -> Result<DegeneracyClass> {
    w.validate(dom)?;
    match w {
        WeightSpec::SymmetricPower { p } => Ok(if *p < 1.0 {
            DegeneracyClass::Weak
        } else {
            DegeneracyClass::Strong
        }),
        WeightSpec::TwoSidedPower { p1, p2 } => Ok(if 2.0 * p1 < 1.0 && 2.0 * p2 < 1.0 {
            DegeneracyClass::Weak
        } else {
            DegeneracyClass::Strong
        }),
        WeightSpec::Uniform { .. } => Ok(DegeneracyClass::Weak),
        WeightSpec::Tabulated(t) => {
            let sigma_left = local_exponent(t, dom, true)?;
            let sigma_right = local_exponent(t, dom, false)?;
            Ok(if sigma_left < 1.0 && sigma_right < 1.0 {
                DegeneracyClass::Weak
            } else {
                DegeneracyClass::Strong
            })
        }
    }
}

/// Log-log regression slope of a against |x-1| over the 8 tabulated nodes
/// nearest the singular node on one side.
fn local_exponent(t: &TabulatedWeight, dom: &DomainSpec, left: bool) -> Result<f64> {
    let mut pts: Vec<(f64, f64)> = Vec::new();
    let idx = t.singular_index;
    let range: Box<dyn Iterator<Item = usize>> = if left {
        Box::new((0..idx).rev())
    } else {
        Box::new(idx + 1..t.nodes.len())
    };
    for i in range {
        if pts.len() == 8 {
            break;
        }
        let x = t.nodes[i];
        if !dom.contains(x) {
            continue;
        }
        let s = (x - 1.0).abs();
        let a = t.values[i];
        if s > 0.0 && a > 0.0 {
            pts.push((s.ln(), a.ln()));
        }
    }
    if pts.len() < 4 {
        return Err(Error::ClassificationFailure(format!(
            "only {} usable nodes on the {} side of the singularity (need 4)",
            pts.len(),
            if left { "left" } else { "right" }
        )));
    }
    let n = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    let denom = n * sxx - sx * sx;
    if denom.abs() < 1e-14 {
        return Err(Error::ClassificationFailure(
            "degenerate abscissae in exponent regression".into(),
        ));
    }
    Ok((n * sxy - sx * sy) / denom)
}

/// Explicit Friedrichs constants.
///
/// D_1a and D_2a combine the minimum of a over the outer closed intervals
/// with the inner power envelope; C_a^2 is 4 times the largest of the four
/// envelope ratios; the Poincare constant is min(D_a, C_a).
pub fn friedrichs_constants(
    w: &WeightSpec,
    dom: &DomainSpec,
    mu1: f64,
    mu2: f64,
) -> Result<FriedrichsConstants> {
    for mu in [mu1, mu2] {
        if !(mu > 0.0 && mu < 2.0) {
            return Err(Error::InvalidExponent { mu });
        }
    }
    let samples = sample_count_for(w);
    // The analytic variants are monotone toward the singularity, so their
    // minima sit at the interval end nearest 1; sampling covers tabulated
    // weights and agrees with the closed forms elsewhere.
    let (min1, min2) = match w {
        WeightSpec::Tabulated(_) => (
            sampled_min(w, dom.c, dom.x1star, samples),
            sampled_min(w, dom.x2star, dom.d, samples),
        ),
        _ => (
            w.eval_unchecked(dom.x1star).0,
            w.eval_unchecked(dom.x2star).0,
        ),
    };
    let a_x1 = w.eval_unchecked(dom.x1star).0;
    let a_x2 = w.eval_unchecked(dom.x2star).0;
    if min1 <= 0.0 || min2 <= 0.0 || a_x1 <= 0.0 || a_x2 <= 0.0 {
        return Err(Error::InvalidWeight(
            "weight vanishes on the outer intervals; constants are undefined".into(),
        ));
    }
    let d1a = (dom.x1star - dom.c) * (2.0 - dom.x1star - dom.c) / (2.0 * min1)
        + (1.0 - dom.x1star).powi(2) / (a_x1 * (2.0 - mu1));
    let d2a = (dom.d - dom.x2star) * (dom.d + dom.x2star - 2.0) / (2.0 * min2)
        + (dom.x2star - 1.0).powi(2) / (a_x2 * (2.0 - mu2));
    let ca_sq = 4.0
        * [
            (1.0 - dom.c).powf(mu1) / min1,
            (1.0 - dom.x1star).powf(mu1) / a_x1,
            (dom.d - 1.0).powf(mu2) / min2,
            (dom.x2star - 1.0).powf(mu2) / a_x2,
        ]
        .into_iter()
        .fold(f64::NEG_INFINITY, f64::max);
    let ca = ca_sq.sqrt();
    let da = d1a.max(d2a).sqrt();
    Ok(FriedrichsConstants {
        d1a,
        d2a,
        ca,
        da,
        poincare: da.min(ca),
    })
}

/// Minimal horizon beyond which the boundary observability inequality holds
/// with a positive constant:
/// T_a = [max(4, C_a^2) + min(D_a, C_a) max(mu1, mu2)] / (2 - max(mu1, mu2)).
pub fn observability_time(w: &WeightSpec, dom: &DomainSpec) -> Result<f64> {
    let (mu1, _, mu2, _) = compute_mu_kappa(w, dom)?;
    let fc = friedrichs_constants(w, dom, mu1, mu2)?;
    Ok(observability_time_from(&fc, mu1, mu2))
}

pub fn observability_time_from(fc: &FriedrichsConstants, mu1: f64, mu2: f64) -> f64 {
    let mu = mu1.max(mu2);
    (4.0f64.max(fc.ca * fc.ca) + fc.poincare * mu) / (2.0 - mu)
}

/// Observability constant for horizon T:
/// C_T = [(2 - max mu) T - max(4, C_a^2) - min(D_a, C_a) max mu]
///       / max((1-c) a(c), (d-1) a(d)).
/// Nonpositive values signal that no observability is guaranteed at this T.
pub fn observability_constant(report: &DegeneracyReport, dom: &DomainSpec, t_horizon: f64) -> f64 {
    let mu = report.mu_max();
    let bracket =
        (2.0 - mu) * t_horizon - 4.0f64.max(report.ca * report.ca) - report.poincare * mu;
    bracket / ((1.0 - dom.c) * report.a_c).max((dom.d - 1.0) * report.a_d)
}

/// The coefficient multiplying E(0) on the right-hand side of the
/// observability inequality at horizon T (the bracket of the C_T formula,
/// before normalizing by the boundary weights).
pub fn observability_bound_coefficient(report: &DegeneracyReport, t_horizon: f64) -> f64 {
    let mu = report.mu_max();
    (2.0 - mu) * t_horizon - 4.0f64.max(report.ca * report.ca) - report.poincare * mu
}

/// Check the logarithmic slope conditions on the outer intervals:
/// a'/a >= -mu1/(1-x) on [c, x1*] and a'/a <= mu2/(x-1) on [x2*, d],
/// sampled at 256+ points per interval. Degenerate intervals are vacuous.
pub fn check_slope_conditions(w: &WeightSpec, dom: &DomainSpec) -> Result<bool> {
    let (mu1, _, mu2, _) = compute_mu_kappa(w, dom)?;
    let samples = 256.max(sample_count_for(w));
    let tol = 1e-9;
    if dom.x1star > dom.c {
        for k in 0..=samples {
            let x = dom.c + (dom.x1star - dom.c) * (k as f64) / (samples as f64);
            let (a, da) = w.eval_unchecked(x);
            if a <= 0.0 {
                return Ok(false);
            }
            let lhs = da / a;
            let rhs = -mu1 / (1.0 - x);
            if lhs < rhs - tol * (lhs.abs() + rhs.abs() + 1.0) {
                return Ok(false);
            }
        }
    }
    if dom.x2star < dom.d {
        for k in 0..=samples {
            let x = dom.x2star + (dom.d - dom.x2star) * (k as f64) / (samples as f64);
            let (a, da) = w.eval_unchecked(x);
            if a <= 0.0 {
                return Ok(false);
            }
            let lhs = da / a;
            let rhs = mu2 / (x - 1.0);
            if lhs > rhs + tol * (lhs.abs() + rhs.abs() + 1.0) {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Power-law lower envelopes of the weight.
#[derive(Debug, Clone, Copy)]
pub struct EnvelopeBounds {
    /// Envelope with exponent kappa*mu, valid on the whole side.
    pub global: f64,
    /// Envelope with exponent mu, valid only on the inner monotone interval;
    /// None outside it.
    pub inner: Option<f64>,
}

/// Evaluate the envelope lower bounds at x:
/// a(x) >= a(c) ((1-x)/(1-c))^(kappa1 mu1) on [c, 1] and the mirrored bound
/// on [1, d]; the inner envelopes use exponent mu_i and anchor at x_i*.
pub fn envelope_lower_bounds(w: &WeightSpec, dom: &DomainSpec, x: f64) -> Result<EnvelopeBounds> {
    if !dom.contains(x) {
        return Err(Error::OutsideDomain { x, c: dom.c, d: dom.d });
    }
    let (mu1, kappa1, mu2, kappa2) = compute_mu_kappa(w, dom)?;
    let a_c = w.eval_unchecked(dom.c).0;
    let a_d = w.eval_unchecked(dom.d).0;
    if x <= 1.0 {
        let global = a_c * ((1.0 - x) / (1.0 - dom.c)).powf(kappa1 * mu1);
        let inner = if x >= dom.x1star {
            let a_x1 = w.eval_unchecked(dom.x1star).0;
            Some(a_x1 * ((1.0 - x) / (1.0 - dom.x1star)).powf(mu1))
        } else {
            None
        };
        Ok(EnvelopeBounds { global, inner })
    } else {
        let global = a_d * ((x - 1.0) / (dom.d - 1.0)).powf(kappa2 * mu2);
        let inner = if x <= dom.x2star {
            let a_x2 = w.eval_unchecked(dom.x2star).0;
            Some(a_x2 * ((x - 1.0) / (dom.x2star - 1.0)).powf(mu2))
        } else {
            None
        };
        Ok(EnvelopeBounds { global, inner })
    }
}

/// Assemble the full degeneracy report for a weight.
pub fn analyze(w: &WeightSpec, dom: &DomainSpec) -> Result<DegeneracyReport> {
    let (mu1, kappa1, mu2, kappa2) = compute_mu_kappa(w, dom)?;
    let class = classify(w, dom)?;
    let fc = friedrichs_constants(w, dom, mu1, mu2)?;
    let ta = observability_time_from(&fc, mu1, mu2);
    let slope_conditions_ok = check_slope_conditions(w, dom)?;
    let a_c = w.eval_unchecked(dom.c).0;
    let a_d = w.eval_unchecked(dom.d).0;
    let sampling_tolerance = match w {
        WeightSpec::Tabulated(_) => {
            Some((dom.d - dom.c) / sample_count_for(w) as f64)
        }
        _ => None,
    };
    Ok(DegeneracyReport {
        mu1,
        kappa1,
        mu2,
        kappa2,
        class,
        d1a: fc.d1a,
        d2a: fc.d2a,
        ca: fc.ca,
        da: fc.da,
        poincare: fc.poincare,
        ta,
        slope_conditions_ok,
        a_c,
        a_d,
        sampling_tolerance,
    })
}
