//! The inequality checks. Each check evaluates a list of named terms, either
//! Loewner comparisons `lhs ≤ rhs` or scalar norm comparisons.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::backend::{Affine, Backend, Comparison};
use crate::constants::{beta, gamma, kantorovich, kantorovich_classic, specht};
use crate::error::{MeansError, Result};
use crate::means_n::BaseMean;
use crate::spd::SpectralBounds;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckKind {
    Sandwich,
    InfoMono,
    ReverseInfoMono,
    Imah,
    Abr,
    Ahr,
    OrderInterp,
    NormMono,
    KarcherAh,
}

impl CheckKind {
    pub const ALL: [CheckKind; 9] = [
        CheckKind::Sandwich,
        CheckKind::InfoMono,
        CheckKind::ReverseInfoMono,
        CheckKind::Imah,
        CheckKind::Abr,
        CheckKind::Ahr,
        CheckKind::OrderInterp,
        CheckKind::NormMono,
        CheckKind::KarcherAh,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CheckKind::Sandwich => "sandwich",
            CheckKind::InfoMono => "info_mono",
            CheckKind::ReverseInfoMono => "reverse_info_mono",
            CheckKind::Imah => "imah",
            CheckKind::Abr => "abr",
            CheckKind::Ahr => "ahr",
            CheckKind::OrderInterp => "order_interp",
            CheckKind::NormMono => "norm_mono",
            CheckKind::KarcherAh => "karcher_ah",
        }
    }
}

/// A registered check: the inequality family, evaluated either on a dense
/// instance or as the commuting twin (diagonal instance, compared against
/// the scalar reference backend).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CheckId {
    pub kind: CheckKind,
    pub twin: bool,
}

impl CheckId {
    pub fn matrix(kind: CheckKind) -> Self {
        CheckId { kind, twin: false }
    }

    pub fn twin(kind: CheckKind) -> Self {
        CheckId { kind, twin: true }
    }

    /// Every registered check: the nine matrix checks followed by their twins.
    pub fn registry() -> Vec<CheckId> {
        CheckKind::ALL
            .iter()
            .map(|&k| CheckId::matrix(k))
            .chain(CheckKind::ALL.iter().map(|&k| CheckId::twin(k)))
            .collect()
    }

    pub fn registry_names() -> Vec<String> {
        Self::registry().iter().map(|c| c.to_string()).collect()
    }
}

impl fmt::Display for CheckId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.twin {
            write!(f, "{}_twin", self.kind.name())
        } else {
            f.write_str(self.kind.name())
        }
    }
}

impl FromStr for CheckId {
    type Err = MeansError;

    fn from_str(s: &str) -> Result<Self> {
        let (base, twin) = match s.strip_suffix("_twin") {
            Some(b) => (b, true),
            None => (s, false),
        };
        CheckKind::ALL
            .iter()
            .find(|k| k.name() == base)
            .map(|&kind| CheckId { kind, twin })
            .ok_or_else(|| {
                MeansError::validation(format!(
                    "unknown check `{s}`; valid names: {}",
                    CheckId::registry_names().join(", ")
                ))
            })
    }
}

impl Serialize for CheckId {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for CheckId {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Parameter grids. Unset fields use the defaults listed on each accessor.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CheckParams {
    /// Multipliers `α > 0` for the reverse-type bounds. The vanishing-constant
    /// multiplier of each bound is always added.
    pub alpha: Option<Vec<f64>>,
    /// Exponents `r`.
    pub r: Option<Vec<f64>>,
    /// Exponent pairs `(q, p)` with `0 < q < p`.
    pub qp: Option<Vec<(f64, f64)>>,
    /// Exponents `p` for the `q → 0` Specht-ratio bounds.
    pub specht_p: Option<Vec<f64>>,
}

impl CheckParams {
    /// Default `{0.25, 0.5, 1, 2}`.
    pub fn alphas(&self) -> Vec<f64> {
        self.alpha.clone().unwrap_or_else(|| vec![0.25, 0.5, 1.0, 2.0])
    }

    /// Default depends on the check: `{0.25, 0.5, 0.75}` for `imah`,
    /// `{1.5, 2, 3}` for `abr` and `karcher_ah`, both for `ahr`.
    pub fn rs(&self, kind: CheckKind) -> Vec<f64> {
        if let Some(r) = &self.r {
            return r.clone();
        }
        match kind {
            CheckKind::Imah => vec![0.25, 0.5, 0.75],
            CheckKind::Ahr => vec![0.25, 0.5, 0.75, 1.5, 2.0, 3.0],
            _ => vec![1.5, 2.0, 3.0],
        }
    }

    /// Default `{(1, 2), (1.5, 3), (0.5, 1), (0.25, 2)}`.
    pub fn qps(&self) -> Vec<(f64, f64)> {
        self.qp.clone().unwrap_or_else(|| vec![(1.0, 2.0), (1.5, 3.0), (0.5, 1.0), (0.25, 2.0)])
    }

    /// Default `{0.5, 1, 2}`.
    pub fn specht_ps(&self) -> Vec<f64> {
        self.specht_p.clone().unwrap_or_else(|| vec![0.5, 1.0, 2.0])
    }

    pub fn validate(&self, kind: CheckKind) -> Result<()> {
        let bad = |what: String| Err(MeansError::validation(format!("{}: {what}", kind.name())));
        if self.alphas().iter().any(|a| !(*a > 0.0 && a.is_finite())) {
            return bad("alpha values must be positive".into());
        }
        let rs = self.rs(kind);
        let r_ok = |r: f64| match kind {
            CheckKind::Imah => r > 0.0 && r <= 1.0,
            CheckKind::Abr | CheckKind::KarcherAh => (1.0..=64.0).contains(&r),
            _ => r > 0.0 && r <= 64.0,
        };
        if let Some(r) = rs.iter().find(|r| !r_ok(**r)) {
            let domain = match kind {
                CheckKind::Imah => "(0, 1]",
                CheckKind::Abr | CheckKind::KarcherAh => "[1, 64]",
                _ => "(0, 64]",
            };
            return bad(format!("r = {r} outside {domain}"));
        }
        if let Some((q, p)) = self.qps().into_iter().find(|(q, p)| !(*q > 0.0 && q < p && *p <= 16.0)) {
            return bad(format!("(q, p) = ({q}, {p}) must satisfy 0 < q < p <= 16"));
        }
        if let Some(p) = self.specht_ps().into_iter().find(|p| !(*p > 0.0 && *p <= 16.0)) {
            return bad(format!("Specht exponent p = {p} must lie in (0, 16]"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub enum Evaluation {
    Loewner(Comparison),
    Norm { lhs: f64, rhs: f64 },
}

impl Evaluation {
    pub fn margin(&self) -> f64 {
        match self {
            Evaluation::Loewner(c) => c.margin,
            Evaluation::Norm { lhs, rhs } => rhs - lhs,
        }
    }

    pub fn scale(&self) -> f64 {
        match self {
            Evaluation::Loewner(c) => c.scale,
            Evaluation::Norm { lhs, rhs } => 1f64.max(lhs.abs()).max(rhs.abs()),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Evaluated {
    pub label: String,
    pub params: BTreeMap<String, f64>,
    pub value: Evaluation,
}

struct Terms {
    out: Vec<Evaluated>,
}

impl Terms {
    fn new() -> Self {
        Terms { out: Vec::new() }
    }

    fn loewner(&mut self, label: &str, params: &[(&str, f64)], c: Comparison) {
        self.push(label, params, Evaluation::Loewner(c));
    }

    fn norm(&mut self, label: &str, params: &[(&str, f64)], lhs: f64, rhs: f64) {
        self.push(label, params, Evaluation::Norm { lhs, rhs });
    }

    fn push(&mut self, label: &str, params: &[(&str, f64)], value: Evaluation) {
        self.out.push(Evaluated {
            label: label.to_string(),
            params: params.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
            value,
        });
    }
}

/// Evaluates every term of `kind` with backend `b` under the prescribed bounds.
pub fn evaluate<B: Backend>(kind: CheckKind, b: &B, bounds: SpectralBounds, params: &CheckParams) -> Result<Vec<Evaluated>> {
    params.validate(kind)?;
    let mut t = Terms::new();
    match kind {
        CheckKind::Sandwich => sandwich(b, &mut t)?,
        CheckKind::InfoMono => info_mono(b, &mut t)?,
        CheckKind::ReverseInfoMono => reverse_info_mono(b, bounds, params, &mut t)?,
        CheckKind::Imah => imah(b, bounds, params, &mut t)?,
        CheckKind::Abr => abr(b, bounds, params, &mut t)?,
        CheckKind::Ahr => ahr(b, bounds, params, &mut t)?,
        CheckKind::OrderInterp => order_interp(b, bounds, params, &mut t)?,
        CheckKind::NormMono => norm_mono(b, bounds, params, &mut t)?,
        CheckKind::KarcherAh => karcher_ah(b, params, &mut t)?,
    }
    Ok(t.out)
}

fn with_special(mut grid: Vec<f64>, special: f64) -> Vec<f64> {
    if !grid.iter().any(|a| (a - special).abs() <= 1e-15 * special) {
        grid.push(special);
    }
    grid
}

fn sandwich<B: Backend>(b: &B, t: &mut Terms) -> Result<()> {
    let xs = b.inputs();
    let mean = b.mean(xs)?;
    let h = b.base_mean(BaseMean::Harmonic, xs)?;
    let a = b.base_mean(BaseMean::Arithmetic, xs)?;
    t.loewner("harmonic <= mean", &[], b.compare(Affine::of(&h), Affine::of(&mean))?);
    t.loewner("mean <= arithmetic", &[], b.compare(Affine::of(&mean), Affine::of(&a))?);
    Ok(())
}

fn info_mono<B: Backend>(b: &B, t: &mut Terms) -> Result<()> {
    let xs = b.inputs();
    let lhs = b.apply_map(&b.mean(xs)?)?;
    let rhs = b.mean(&b.map_all(xs)?)?;
    t.loewner("phi(mean) <= mean(phi)", &[], b.compare(Affine::of(&lhs), Affine::of(&rhs))?);
    Ok(())
}

fn reverse_info_mono<B: Backend>(b: &B, bounds: SpectralBounds, params: &CheckParams, t: &mut Terms) -> Result<()> {
    let (m, big_m) = (bounds.m, bounds.big_m);
    let xs = b.inputs();
    let lhs = b.mean(&b.map_all(xs)?)?;
    let phi_mean = b.apply_map(&b.mean(xs)?)?;
    for alpha in with_special(params.alphas(), kantorovich_classic(m, big_m)) {
        let shift = beta(m, big_m, alpha)?;
        let c = b.compare(Affine::of(&lhs), Affine::shifted(alpha, &phi_mean, shift))?;
        t.loewner("mean(phi) <= alpha phi(mean) + beta", &[("alpha", alpha)], c);
    }
    Ok(())
}

/// `𝔐_σ(Φ(A₁^r), …)` and `Φ(𝔐_σ(A₁, …)^r)`.
fn mapped_power_pair<B: Backend>(b: &B, mean: &B::Op, r: f64) -> Result<(B::Op, B::Op)> {
    let xs = b.inputs();
    let lhs = b.mean(&b.map_all(&b.pow_all(xs, r)?)?)?;
    let rhs = b.apply_map(&b.pow(mean, r)?)?;
    Ok((lhs, rhs))
}

fn imah<B: Backend>(b: &B, bounds: SpectralBounds, params: &CheckParams, t: &mut Terms) -> Result<()> {
    let (m, big_m) = (bounds.m, bounds.big_m);
    let h = big_m / m;
    let mean = b.mean(b.inputs())?;
    for r in params.rs(CheckKind::Imah) {
        let (lhs, phi_pow) = mapped_power_pair(b, &mean, r)?;
        let k = kantorovich(h, -r)?;
        for alpha in with_special(params.alphas(), k) {
            let shift = gamma(1.0 / big_m, 1.0 / m, -r, alpha)?;
            let c = b.compare(Affine::of(&lhs), Affine::shifted(alpha, &phi_pow, shift))?;
            t.loewner("mean(phi(A^r)) <= alpha phi(mean^r) + gamma", &[("r", r), ("alpha", alpha)], c);
        }
        if r < 1.0 {
            t.loewner("mean(phi(A^r)) <= K(h,-r) phi(mean^r)", &[("r", r)], b.compare(Affine::of(&lhs), Affine::scaled(k, &phi_pow))?);
            let low = 1.0 / (kantorovich_classic(m, big_m) * k);
            t.loewner("ratio lower bound <= mean(phi(A^r))", &[("r", r)], b.compare(Affine::scaled(low, &phi_pow), Affine::of(&lhs))?);
        }
    }
    Ok(())
}

fn abr<B: Backend>(b: &B, bounds: SpectralBounds, params: &CheckParams, t: &mut Terms) -> Result<()> {
    let (m, big_m) = (bounds.m, bounds.big_m);
    let h = big_m / m;
    let mean = b.mean(b.inputs())?;
    for r in params.rs(CheckKind::Abr) {
        let (lhs, phi_pow) = mapped_power_pair(b, &mean, r)?;
        let k_pos = kantorovich(h, r)?;
        let k_neg = kantorovich(h, -r)?;
        let ratio = k_pos * k_neg;
        for alpha in with_special(params.alphas(), ratio) {
            let shift = gamma(1.0 / big_m, 1.0 / m, -r, alpha / k_pos)?;
            let c = b.compare(Affine::of(&lhs), Affine::shifted(alpha, &phi_pow, shift))?;
            t.loewner("mean(phi(A^r)) <= alpha phi(mean^r) + gamma", &[("r", r), ("alpha", alpha)], c);
        }
        t.loewner("mean(phi(A^r)) <= K(h,-r)K(h,r) phi(mean^r)", &[("r", r)], b.compare(Affine::of(&lhs), Affine::scaled(ratio, &phi_pow))?);
        let low = 1.0 / (kantorovich_classic(m.powf(r), big_m.powf(r)) * ratio);
        t.loewner("ratio lower bound <= mean(phi(A^r))", &[("r", r)], b.compare(Affine::scaled(low, &phi_pow), Affine::of(&lhs))?);
    }
    Ok(())
}

/// Two-sided constant for `𝔐_σ(A^r)` against `𝔐_σ(A)^r` without a map.
fn ahr_constant(h: f64, r: f64) -> Result<f64> {
    if r < 1.0 {
        kantorovich(h, -r)
    } else {
        Ok(kantorovich(h, -r)? * kantorovich(h, r)?)
    }
}

fn ahr<B: Backend>(b: &B, bounds: SpectralBounds, params: &CheckParams, t: &mut Terms) -> Result<()> {
    let h = bounds.h();
    let xs = b.inputs();
    let mean = b.mean(xs)?;
    let unit = 1.0 / b.norm(&mean);
    let normalized = b.scale_all(xs, unit)?;
    for r in params.rs(CheckKind::Ahr) {
        let c = ahr_constant(h, r)?;
        let mean_pow = b.pow(&mean, r)?;
        let of_pow = b.mean(&b.pow_all(xs, r)?)?;
        t.loewner("mean^r / c <= mean(A^r)", &[("r", r)], b.compare(Affine::scaled(1.0 / c, &mean_pow), Affine::of(&of_pow))?);
        t.loewner("mean(A^r) <= c mean^r", &[("r", r)], b.compare(Affine::of(&of_pow), Affine::scaled(c, &mean_pow))?);
        if r < 1.0 {
            let classic = kantorovich(h, -1.0)?.powf(r);
            t.loewner("mean(A^r) <= K(h,-1)^r mean^r", &[("r", r)], b.compare(Affine::of(&of_pow), Affine::scaled(classic, &mean_pow))?);
        }
        let implied = b.mean(&b.pow_all(&normalized, r)?)?;
        t.loewner("mean <= I implies mean(A^r) <= c I", &[("r", r)], b.compare(Affine::of(&implied), Affine::identity(c))?);
    }
    Ok(())
}

/// `𝔐_σ(A₁^p, …)^{1/p}`.
fn power_root<B: Backend>(b: &B, p: f64) -> Result<B::Op> {
    let m = b.mean(&b.pow_all(b.inputs(), p)?)?;
    b.pow(&m, 1.0 / p)
}

fn order_constant(h: f64, q: f64, p: f64) -> Result<f64> {
    let base = kantorovich(h.powf(p), -q / p)?.powf(1.0 / q);
    if q >= 1.0 {
        Ok(base)
    } else {
        Ok(kantorovich(h.powf(q), 1.0 / q)? * base)
    }
}

fn order_interp<B: Backend>(b: &B, bounds: SpectralBounds, params: &CheckParams, t: &mut Terms) -> Result<()> {
    let h = bounds.h();
    for (q, p) in params.qps() {
        let xp = power_root(b, p)?;
        let xq = power_root(b, q)?;
        let c = order_constant(h, q, p)?;
        let pq = [("q", q), ("p", p)];
        t.loewner("X_p / c <= X_q", &pq, b.compare(Affine::scaled(1.0 / c, &xp), Affine::of(&xq))?);
        t.loewner("X_q <= c X_p", &pq, b.compare(Affine::of(&xq), Affine::scaled(c, &xp))?);
    }
    let le = b.log_euclidean(b.inputs())?;
    for p in params.specht_ps() {
        let xp = power_root(b, p)?;
        let c = specht(h)? * specht(h.powf(p))?.powf(1.0 / p);
        t.loewner("X_p / (S(h) S(h^p)^(1/p)) <= log-euclidean", &[("p", p)], b.compare(Affine::scaled(1.0 / c, &xp), Affine::of(&le))?);
        t.loewner("log-euclidean <= S(h) S(h^p)^(1/p) X_p", &[("p", p)], b.compare(Affine::of(&le), Affine::scaled(c, &xp))?);
    }
    Ok(())
}

fn norm_mono<B: Backend>(b: &B, bounds: SpectralBounds, params: &CheckParams, t: &mut Terms) -> Result<()> {
    let h = bounds.h();
    let xs = b.inputs();
    let norm_root = |x: &B::Op, p: f64| b.norm(x).powf(1.0 / p);
    let mean_norm = |p: f64| -> Result<f64> { Ok(norm_root(&b.mean(&b.pow_all(xs, p)?)?, p)) };
    let karcher_norm = |p: f64| -> Result<f64> { Ok(norm_root(&b.karcher(&b.pow_all(xs, p)?)?, p)) };
    for (q, p) in params.qps() {
        let c = kantorovich(h.powf(p), -q / p)?.powf(1.0 / q);
        let (nq, np) = (mean_norm(q)?, mean_norm(p)?);
        let pq = [("q", q), ("p", p)];
        t.norm("|X_p| / c <= |X_q|", &pq, np / c, nq);
        t.norm("|X_q| <= c |X_p|", &pq, nq, c * np);
        let (gq, gp) = (karcher_norm(q)?, karcher_norm(p)?);
        t.norm("|G_q| <= c |G_p|", &pq, gq, c * gp);
        let classic = kantorovich(h.powf(p), -1.0)?.powf(1.0 / p);
        t.norm("|G_q| <= K(h^p,-1)^(1/p) |G_p|", &pq, gq, classic * gp);
    }
    let le = b.norm(&b.log_euclidean(xs)?);
    for p in params.specht_ps() {
        let s = specht(h.powf(p))?.powf(1.0 / p);
        let np = mean_norm(p)?;
        t.norm("|X_p| / S(h^p)^(1/p) <= |log-euclidean|", &[("p", p)], np / s, le);
        t.norm("|log-euclidean| <= S(h^p)^(1/p) |X_p|", &[("p", p)], le, s * np);
        t.norm("|log-euclidean| <= S(h^p)^(1/p) |G_p|", &[("p", p)], le, s * karcher_norm(p)?);
    }
    Ok(())
}

fn karcher_ah<B: Backend>(b: &B, params: &CheckParams, t: &mut Terms) -> Result<()> {
    let xs = b.inputs();
    let g = b.karcher(xs)?;
    let normalized = b.scale_all(xs, 1.0 / b.norm(&g))?;
    let h = b.base_mean(BaseMean::Harmonic, xs)?;
    let (g_norm, h_norm) = (b.norm(&g), b.norm(&h));
    for r in params.rs(CheckKind::KarcherAh) {
        let rr = [("r", r)];
        let implied = b.karcher(&b.pow_all(&normalized, r)?)?;
        t.loewner("G <= I implies G(A^r) <= I", &rr, b.compare(Affine::of(&implied), Affine::identity(1.0))?);
        let powered = b.pow_all(xs, r)?;
        let g_pow = b.karcher(&powered)?;
        t.loewner("G(A^r) <= |G|^(r-1) G", &rr, b.compare(Affine::of(&g_pow), Affine::scaled(g_norm.powf(r - 1.0), &g))?);
        let h_pow = b.base_mean(BaseMean::Harmonic, &powered)?;
        t.loewner("H(A^r) <= |H|^(r-1) H", &rr, b.compare(Affine::of(&h_pow), Affine::scaled(h_norm.powf(r - 1.0), &h))?);
        // Reverse direction at exponent s = 1/r ∈ (0, 1).
        let s = 1.0 / r;
        let ss = [("s", s)];
        let rooted = b.pow_all(xs, s)?;
        let g_root = b.karcher(&rooted)?;
        t.loewner("|G|^(s-1) G <= G(A^s)", &ss, b.compare(Affine::scaled(g_norm.powf(s - 1.0), &g), Affine::of(&g_root))?);
        let h_root = b.base_mean(BaseMean::Harmonic, &rooted)?;
        t.loewner("|H|^(s-1) H <= H(A^s)", &ss, b.compare(Affine::scaled(h_norm.powf(s - 1.0), &h), Affine::of(&h_root))?);
    }
    Ok(())
}
