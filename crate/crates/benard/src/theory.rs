//! Computable quantities from the rigorous synchronization analysis: the
//! attractor bound, the lower bound on the relaxation coefficient, the upper
//! bound on the observation scale, and the guaranteed decay rate. The unknown
//! order-one prefactors are configuration-exposed and default to 1, so every
//! report is an order-of-magnitude statement.

use crate::benard::PhysParams;

/// `lambda_1 = 2 pi min(1, 1/L)`, the smallest eigenvalue scale of the domain.
pub fn lambda1(l: f64) -> f64 {
    2.0 * std::f64::consts::PI * 1.0f64.min(1.0 / l)
}

/// Attractor bound `rho = a nu^-3 exp(b nu^-8)` for Pr near 1. Overflows to
/// +inf at realistic Rayleigh numbers, which the report flags as vacuous.
pub fn attractor_rho(nu: f64, a_coeff: f64, b_coeff: f64) -> f64 {
    a_coeff * nu.powi(-3) * (b_coeff * nu.powi(-8)).exp()
}

/// Rigorous lower bound on the nudging coefficient:
/// `1/(kappa lambda1) + rho/nu + rho^2/(kappa^2 lambda1 nu)`.
pub fn mu_lower_bound(nu: f64, kappa: f64, lam1: f64, rho: f64) -> f64 {
    1.0 / (kappa * lam1) + rho / nu + rho * rho / (kappa * kappa * lam1 * nu)
}

/// Resolution bound given mu: `h_max = sqrt(nu / (mu c0^2))`.
pub fn h_max(mu: f64, nu: f64, c0: f64) -> f64 {
    (nu / (mu * c0 * c0)).sqrt()
}

/// Guaranteed error decay rate: `lambda1 min(nu, kappa)`.
pub fn decay_rate_bound(nu: f64, kappa: f64, lam1: f64) -> f64 {
    lam1 * nu.min(kappa)
}

/// Order-one constants the analysis leaves unspecified.
#[derive(Clone, Copy, Debug)]
pub struct BoundConfig {
    pub a_coeff: f64,
    pub b_coeff: f64,
    pub c0: f64,
}

impl Default for BoundConfig {
    fn default() -> Self {
        BoundConfig {
            a_coeff: 1.0,
            b_coeff: 1.0,
            c0: 1.0,
        }
    }
}

/// Comparison of the parameters actually used against the rigorous thresholds.
#[derive(Clone, Copy, Debug)]
pub struct BoundReport {
    pub lambda1: f64,
    pub rho: f64,
    pub rho_overflow: bool,
    pub mu_min: f64,
    pub h_max: f64,
    pub decay_rate: f64,
    pub mu_used: f64,
    pub h_used: f64,
    /// `mu_used / mu_min` (0 when the bound is vacuous).
    pub mu_ratio: f64,
    /// `h_used / h_max`.
    pub h_ratio: f64,
    pub mu_insufficient: bool,
    pub h_too_coarse: bool,
}

impl BoundReport {
    pub fn evaluate(pp: &PhysParams, mu_used: f64, h_used: f64, cfg: &BoundConfig) -> Self {
        let nu = pp.nu();
        let kappa = pp.kappa();
        let lam1 = lambda1(pp.lx);
        let rho = attractor_rho(nu, cfg.a_coeff, cfg.b_coeff);
        let rho_overflow = !rho.is_finite();
        let mu_min = mu_lower_bound(nu, kappa, lam1, rho);
        let hm = h_max(mu_used, nu, cfg.c0);
        let mu_ratio = if mu_min.is_finite() {
            mu_used / mu_min
        } else {
            0.0
        };
        BoundReport {
            lambda1: lam1,
            rho,
            rho_overflow,
            mu_min,
            h_max: hm,
            decay_rate: decay_rate_bound(nu, kappa, lam1),
            mu_used,
            h_used,
            mu_ratio,
            h_ratio: h_used / hm,
            mu_insufficient: !(mu_used >= mu_min),
            h_too_coarse: h_used > hm,
        }
    }

    /// Plain-text rendering.
    pub fn to_text(&self) -> String {
        let rho = if self.rho_overflow {
            "overflow (bound vacuous at this Ra)".to_string()
        } else {
            format!("{:.6e}", self.rho)
        };
        let mu_min = if self.mu_min.is_finite() {
            format!("{:.6e}", self.mu_min)
        } else {
            "overflow (bound vacuous at this Ra)".to_string()
        };
        format!(
            "rigorous synchronization conditions (order-of-magnitude, unit prefactors)\n\
             lambda1              = {:.6e}\n\
             attractor bound rho  = {rho}\n\
             required mu_min      = {mu_min}\n\
             allowed h_max        = {:.6e}\n\
             guaranteed decay rate= {:.6e}\n\
             used mu              = {:.6e}   (mu/mu_min = {:.3e}){}\n\
             used h               = {:.6e}   (h/h_max  = {:.3e}){}\n",
            self.lambda1,
            self.h_max,
            self.decay_rate,
            self.mu_used,
            self.mu_ratio,
            if self.mu_insufficient {
                "  [below rigorous requirement]"
            } else {
                ""
            },
            self.h_used,
            self.h_ratio,
            if self.h_too_coarse {
                "  [coarser than rigorous requirement]"
            } else {
                ""
            },
        )
    }

    /// Machine-readable key=value rendering.
    pub fn to_kv(&self) -> String {
        format!(
            "lambda1={:.17e}\nrho={:.17e}\nrho_overflow={}\nmu_min={:.17e}\nh_max={:.17e}\n\
             decay_rate={:.17e}\nmu_used={:.17e}\nh_used={:.17e}\nmu_ratio={:.17e}\n\
             h_ratio={:.17e}\nmu_insufficient={}\nh_too_coarse={}\n",
            self.lambda1,
            self.rho,
            self.rho_overflow,
            self.mu_min,
            self.h_max,
            self.decay_rate,
            self.mu_used,
            self.h_used,
            self.mu_ratio,
            self.h_ratio,
            self.mu_insufficient,
            self.h_too_coarse,
        )
    }
}
