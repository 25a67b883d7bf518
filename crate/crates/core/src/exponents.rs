//! Critical exponents of `u_t = Δu + u^p` and the constants derived from them.
//!
//! Everything here is closed form. The Hardy margin `(n-2)²/4 - λ` is evaluated
//! through the factored quadratic in `y = 1/(p-1)`, which keeps `σ` accurate
//! near the Joseph–Lundgren exponent where the square root is ill-conditioned.

use serde::{Serialize, Serializer};

use crate::error::{Error, Result};

/// Spatial dimension and nonlinearity exponent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProblemParams {
    pub n: u32,
    pub p: f64,
}

impl ProblemParams {
    pub fn new(n: u32, p: f64) -> Result<Self> {
        if !(p.is_finite() && p > 1.0) {
            return Err(Error::Domain(format!("p = {p} must be a finite value > 1")));
        }
        if n == 0 {
            return Err(Error::Domain("dimension must be positive".into()));
        }
        Ok(Self { n, p })
    }

    fn nf(&self) -> f64 {
        self.n as f64
    }

    /// Fujita exponent `1 + 2/n`.
    pub fn p_fujita(&self) -> f64 {
        1.0 + 2.0 / self.nf()
    }

    /// Existence threshold of the singular steady state, `n/(n-2)`.
    pub fn p_singular(&self) -> f64 {
        if self.n <= 2 {
            f64::INFINITY
        } else {
            self.nf() / (self.nf() - 2.0)
        }
    }

    /// Sobolev exponent `(n+2)/(n-2)`.
    pub fn p_sobolev(&self) -> f64 {
        if self.n <= 2 {
            f64::INFINITY
        } else {
            (self.nf() + 2.0) / (self.nf() - 2.0)
        }
    }

    /// Joseph–Lundgren exponent; `+∞` below dimension 11.
    pub fn p_jl(&self) -> f64 {
        joseph_lundgren(self.n)
    }

    /// `m = 2/(p-1)`, the homogeneity of the singular steady state.
    pub fn m(&self) -> f64 {
        2.0 / (self.p - 1.0)
    }

    /// Checks the existence condition for `v_∞`: `n ≥ 3` and `p > n/(n-2)`.
    pub fn require_singular_state(&self) -> Result<()> {
        if self.n < 3 {
            return Err(Error::Domain(format!("n = {} < 3: no singular steady state", self.n)));
        }
        if self.p <= self.p_singular() {
            return Err(Error::Domain(format!(
                "p = {} must exceed n/(n-2) = {}",
                self.p,
                self.p_singular()
            )));
        }
        Ok(())
    }

    /// Prefactor `L = (m (n-2-m))^{1/(p-1)}` of `v_∞ = L r^{-m}`.
    pub fn prefactor(&self) -> Result<f64> {
        self.require_singular_state()?;
        let m = self.m();
        Ok((m * (self.nf() - 2.0 - m)).powf(1.0 / (self.p - 1.0)))
    }

    /// Hardy coefficient `λ = 2p/(p-1) (n-2-2/(p-1)) = p L^{p-1}`.
    pub fn lambda(&self) -> f64 {
        let m = self.m();
        self.p * m * (self.nf() - 2.0 - m)
    }
}

pub fn joseph_lundgren(n: u32) -> f64 {
    if n < 11 {
        return f64::INFINITY;
    }
    let nf = n as f64;
    let root = 2.0 * (nf - 1.0).sqrt();
    (nf - root) / (nf - 4.0 - root)
}

/// Which side of the Hardy threshold `λ ≤ (n-2)²/4` a pair `(n, p)` falls on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum HardyBranch {
    /// `p ≥ p_JL` (only possible for `n ≥ 11`).
    JlBranch,
    /// `1/(p-1)` at or above the upper root of the admissibility quadratic.
    LowBranch,
    Inadmissible,
}

impl HardyBranch {
    pub fn is_admissible(self) -> bool {
        !matches!(self, HardyBranch::Inadmissible)
    }
}

/// `16y² + (32-8n)y + n² - 12n + 20`, which equals `4((n-2)²/4 - λ)` at `y = 1/(p-1)`.
pub fn admissibility_quadratic(n: u32, y: f64) -> f64 {
    let nf = n as f64;
    16.0 * y * y + (32.0 - 8.0 * nf) * y + nf * nf - 12.0 * nf + 20.0
}

/// Roots `(n-4 ∓ 2√(n-1))/4` of the admissibility quadratic.
pub fn admissibility_roots(n: u32) -> (f64, f64) {
    let nf = n as f64;
    let r = 2.0 * (nf - 1.0).sqrt();
    ((nf - 4.0 - r) / 4.0, (nf - 4.0 + r) / 4.0)
}

/// Distances `(y - y_lo, y - y_hi)` with values within a few ulps of a root snapped to it.
///
/// A double nearest to `p_JL` maps to a `y` that misses the root by rounding only;
/// treating it as the root keeps `σ(n, p_JL) = (n-2)/2` exact.
fn root_offsets(n: u32, p: f64) -> (f64, f64) {
    let y = 1.0 / (p - 1.0);
    let (lo, hi) = admissibility_roots(n);
    let snap = |d: f64, root: f64| {
        if d.abs() <= 8.0 * f64::EPSILON * y.abs().max(root.abs()) {
            0.0
        } else {
            d
        }
    };
    (snap(y - lo, lo), snap(y - hi, hi))
}

/// `(n-2)²/4 - λ(n,p)` in factored form.
pub fn hardy_margin(params: &ProblemParams) -> f64 {
    let (dl, dh) = root_offsets(params.n, params.p);
    4.0 * dl * dh
}

pub fn hardy_admissible(params: &ProblemParams) -> HardyBranch {
    let (dl, dh) = root_offsets(params.n, params.p);
    let (lo, _) = admissibility_roots(params.n);
    if dl <= 0.0 && lo > 0.0 {
        HardyBranch::JlBranch
    } else if dh >= 0.0 {
        HardyBranch::LowBranch
    } else {
        HardyBranch::Inadmissible
    }
}

fn serialize_extended<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else {
        s.serialize_none()
    }
}

/// The full exponent landscape for one admissible `(n, p)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExponentSet {
    pub n: u32,
    pub p: f64,
    pub p_f: f64,
    pub p_st: f64,
    pub p_s: f64,
    /// `null` in JSON when `n < 11`.
    #[serde(serialize_with = "serialize_extended")]
    pub p_jl: f64,
    pub m: f64,
    #[serde(rename = "L")]
    pub l: f64,
    pub lambda: f64,
    pub sigma: f64,
    pub lambda1: f64,
    pub ell_window: (f64, f64),
    pub branch: HardyBranch,
}

impl ExponentSet {
    pub fn params(&self) -> ProblemParams {
        ProblemParams { n: self.n, p: self.p }
    }

    /// `n - 2 - 2σ = 2√((n-2)²/4 - λ)`, the drift of the log-radial operator.
    pub fn drift(&self) -> f64 {
        self.n as f64 - 2.0 - 2.0 * self.sigma
    }

    /// `σ - m`: exponent of `r^σ v_∞ = L r^{σ-m}`.
    pub fn cap_exponent(&self) -> f64 {
        self.sigma - self.m
    }

    pub fn v_infinity(&self, r: f64) -> f64 {
        self.l * r.powf(-self.m)
    }

    pub fn in_ell_window(&self, ell: f64) -> bool {
        ell > self.ell_window.0 && ell < self.ell_window.1
    }
}

pub fn compute_exponents(params: ProblemParams) -> Result<ExponentSet> {
    params.require_singular_state()?;
    let nf = params.n as f64;
    let branch = hardy_admissible(&params);
    if !branch.is_admissible() {
        return Err(Error::Admissibility(format!(
            "λ = {} exceeds (n-2)²/4 = {} for (n, p) = ({}, {})",
            params.lambda(),
            (nf - 2.0).powi(2) / 4.0,
            params.n,
            params.p
        )));
    }
    let m = params.m();
    let margin = hardy_margin(&params);
    // √((n-2)²/4 - λ); the λ₁ discriminant is four times the margin.
    let root = margin.max(0.0).sqrt();
    let sigma = (nf - 2.0) / 2.0 - root;
    let lambda = if margin == 0.0 {
        (nf - 2.0).powi(2) / 4.0
    } else {
        params.lambda()
    };
    let lambda1 = 0.5 * ((nf - 2.0 - 2.0 * m) - 2.0 * root);
    Ok(ExponentSet {
        n: params.n,
        p: params.p,
        p_f: params.p_fujita(),
        p_st: params.p_singular(),
        p_s: params.p_sobolev(),
        p_jl: params.p_jl(),
        m,
        l: params.prefactor()?,
        lambda,
        sigma,
        lambda1,
        ell_window: (sigma, nf - sigma),
        branch,
    })
}

/// Location and height of the maximum of `F(r,t) = L r^{-m} - b φ_σ(r,t) t^{-ℓ/2}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnvelopeMax {
    pub argmax_radius: f64,
    pub max_value: f64,
}

fn check_envelope_inputs(b_eff: f64, exps: &ExponentSet, ell: f64, t: f64) -> Result<()> {
    if !(t > 0.0 && b_eff > 0.0) {
        return Err(Error::Domain(format!("need t > 0 and b > 0, got t = {t}, b = {b_eff}")));
    }
    if !exps.in_ell_window(ell) {
        return Err(Error::Domain(format!(
            "ℓ = {ell} outside ({}, {})",
            exps.ell_window.0, exps.ell_window.1
        )));
    }
    if exps.sigma * (exps.p - 1.0) <= 2.0 {
        return Err(Error::Domain("σ(p-1) must exceed 2".into()));
    }
    Ok(())
}

/// `F(r, t)` itself.
pub fn envelope(b_eff: f64, exps: &ExponentSet, ell: f64, r: f64, t: f64) -> f64 {
    exps.v_infinity(r) - b_eff * crate::semigroup::phi(r, t, exps.sigma) * t.powf(-ell / 2.0)
}

/// Closed-form maximiser of the envelope.
///
/// On `r ≤ √t` the critical point is `r* = (σB/(mL))^{1/(σ-m)}` with `B = b t^{(σ-ℓ)/2}`,
/// giving `F(r*) = L (1 - m/σ) r*^{-m}`. Outside `√t` the envelope decreases, so when
/// `r* > √t` the maximum sits at `√t`.
pub fn envelope_max(b_eff: f64, exps: &ExponentSet, ell: f64, t: f64) -> Result<EnvelopeMax> {
    check_envelope_inputs(b_eff, exps, ell, t)?;
    let (m, sigma, l) = (exps.m, exps.sigma, exps.l);
    let amplitude = b_eff * t.powf((sigma - ell) / 2.0);
    let r_star = (sigma * amplitude / (m * l)).powf(1.0 / (sigma - m));
    let out = if r_star <= t.sqrt() {
        EnvelopeMax { argmax_radius: r_star, max_value: l * (1.0 - m / sigma) * r_star.powf(-m) }
    } else {
        let r = t.sqrt();
        EnvelopeMax { argmax_radius: r, max_value: envelope(b_eff, exps, ell, r, t) }
    };
    if !(out.max_value > 0.0) {
        return Err(Error::Degenerate(format!(
            "envelope maximum {} ≤ 0: b = {b_eff} too large",
            out.max_value
        )));
    }
    Ok(out)
}

/// Golden-section search of the envelope over `ln r`; the numerical twin of [`envelope_max`].
pub fn envelope_max_search(b_eff: f64, exps: &ExponentSet, ell: f64, t: f64) -> Result<EnvelopeMax> {
    check_envelope_inputs(b_eff, exps, ell, t)?;
    let f = |s: f64| envelope(b_eff, exps, ell, s.exp(), t);
    let (s, value) = golden_section_max(f, -80.0, 80.0, 1e-12);
    if !(value > 0.0) {
        return Err(Error::Degenerate(format!("envelope maximum {value} ≤ 0")));
    }
    Ok(EnvelopeMax { argmax_radius: s.exp(), max_value: value })
}

/// Maximises a unimodal function on `[lo, hi]`.
pub fn golden_section_max(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while hi - lo > tol * (1.0 + lo.abs().max(hi.abs())) {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1);
        }
    }
    let x = 0.5 * (lo + hi);
    (x, f(x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn set(n: u32, p: f64) -> ExponentSet {
        compute_exponents(ProblemParams::new(n, p).unwrap()).unwrap()
    }

    #[test]
    fn eleven_seven_is_rational() {
        let e = set(11, 7.0);
        assert_relative_eq!(e.lambda, 182.0 / 9.0, max_relative = 1e-12);
        assert_relative_eq!(e.sigma, 13.0 / 3.0, max_relative = 1e-12);
        assert_relative_eq!(e.l, (26.0f64 / 9.0).powf(1.0 / 6.0), max_relative = 1e-12);
        assert_relative_eq!(e.lambda1, 4.0, max_relative = 1e-12);
        assert_relative_eq!(e.ell_window.1, 20.0 / 3.0, max_relative = 1e-12);
        assert_relative_eq!(e.drift(), 1.0 / 3.0, max_relative = 1e-12);
        assert_relative_eq!(e.p_f, 13.0 / 11.0, max_relative = 1e-15);
        assert_relative_eq!(e.p_st, 11.0 / 9.0, max_relative = 1e-15);
        assert_relative_eq!(e.p_s, 13.0 / 9.0, max_relative = 1e-15);
        assert_eq!(e.branch, HardyBranch::JlBranch);
    }

    #[test]
    fn joseph_lundgren_boundary() {
        for n in 11..=20 {
            let e = set(n, joseph_lundgren(n));
            let half = (n as f64 - 2.0) / 2.0;
            assert_relative_eq!(e.lambda, half * half, max_relative = 1e-12);
            assert_relative_eq!(e.sigma, half, max_relative = 1e-12);
            assert_eq!(e.branch, HardyBranch::JlBranch);
        }
        assert!(joseph_lundgren(10).is_infinite());
    }

    #[test]
    fn branches() {
        let p = |n, p| hardy_admissible(&ProblemParams::new(n, p).unwrap());
        assert_eq!(p(11, 7.0), HardyBranch::JlBranch);
        assert_eq!(p(11, 2.0), HardyBranch::Inadmissible);
        // y = (n-4-2√(n-1))/4 exactly on the root
        let (lo, _) = admissibility_roots(11);
        assert_eq!(p(11, 1.0 + 1.0 / lo), HardyBranch::JlBranch);
        assert!(admissibility_quadratic(11, lo).abs() < 1e-12);
        // low branch: p close to 1 gives large y
        assert_eq!(p(11, 1.2), HardyBranch::LowBranch);
        assert_eq!(p(5, 3.0), HardyBranch::Inadmissible);
    }

    #[test]
    fn domain_errors() {
        let low = ProblemParams::new(11, 1.1).unwrap();
        assert!(matches!(compute_exponents(low), Err(Error::Domain(_))));
        let flat = ProblemParams::new(2, 3.0).unwrap();
        assert!(matches!(compute_exponents(flat), Err(Error::Domain(_))));
        let inad = ProblemParams::new(11, 3.0).unwrap();
        assert!(matches!(compute_exponents(inad), Err(Error::Admissibility(_))));
        assert!(ProblemParams::new(11, 1.0).is_err());
    }

    #[test]
    fn singular_state_solves_steady_equation() {
        let e = set(11, 7.0);
        // v = L r^{-m}: v'' + (n-1)/r v' + v^p, differentiated symbolically
        for k in 0..100 {
            let r = 10f64.powf(-3.0 + 6.0 * k as f64 / 99.0);
            let v = e.v_infinity(r);
            let d1 = -e.m * v / r;
            let d2 = e.m * (e.m + 1.0) * v / (r * r);
            let residual = d2 + (e.n as f64 - 1.0) / r * d1 + v.powf(e.p);
            assert!(residual.abs() <= 1e-9 * d2.abs(), "r = {r}: {residual}");
        }
    }

    #[test]
    fn envelope_exponents_and_search() {
        let e = set(11, 7.0);
        let b = 0.05;
        let a = envelope_max(b, &e, 5.0, 1e2).unwrap();
        let c = envelope_max(b, &e, 5.0, 1e4).unwrap();
        let growth = (c.max_value / a.max_value).ln() / 100f64.ln();
        let drift = (c.argmax_radius / a.argmax_radius).ln() / 100f64.ln();
        assert_relative_eq!(growth, 1.0 / 36.0, max_relative = 1e-10);
        assert_relative_eq!(drift, -1.0 / 12.0, max_relative = 1e-10);

        for &(bb, t) in &[(0.05, 1.0), (0.2, 1.0), (0.01, 1e3), (0.5, 17.0)] {
            let closed = envelope_max(bb, &e, 5.0, t).unwrap();
            let found = envelope_max_search(bb, &e, 5.0, t).unwrap();
            assert_relative_eq!(closed.max_value, found.max_value, max_relative = 1e-8);
            assert_relative_eq!(closed.argmax_radius, found.argmax_radius, max_relative = 1e-5);
        }
    }

    #[test]
    fn envelope_small_b_limit() {
        let e = set(11, 7.0);
        let big = envelope_max(1e-12, &e, 5.0, 1.0).unwrap();
        let small = envelope_max(1e-3, &e, 5.0, 1.0).unwrap();
        assert!(big.argmax_radius < small.argmax_radius);
        assert!(big.max_value > small.max_value);
        assert!(big.argmax_radius < 1e-2);
    }

    #[test]
    fn envelope_degenerate() {
        let e = set(11, 7.0);
        assert!(matches!(envelope_max(1e6, &e, 5.0, 1.0), Err(Error::Degenerate(_))));
        assert!(matches!(envelope_max(0.1, &e, 8.0, 1.0), Err(Error::Domain(_))));
    }
}
