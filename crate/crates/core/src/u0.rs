//! Closed-form Green's functions and steady-state occupations of the
//! non-interacting (U = 0) dimer, used as independent references for the
//! exact-diagonalization engine.
//!
//! Rates enter only through the combinations `Gamma_-i = Gamma_i - P_i`
//! (dissipative width) and `Gamma_+i = Gamma_i + P_i` (noise strength).

use num_complex::Complex64 as C64;

use crate::error::{DimerError, Result};
use crate::fock::Site;

/// Parameters of the quadratic dimer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct U0Params {
    pub omega_l: f64,
    pub omega_r: f64,
    pub gamma_minus_l: f64,
    pub gamma_minus_r: f64,
    pub gamma_plus_l: f64,
    pub gamma_plus_r: f64,
}

impl U0Params {
    /// Build from bare loss and pump rates.
    pub fn from_rates(
        omega_l: f64,
        omega_r: f64,
        gamma_l: f64,
        pump_l: f64,
        gamma_r: f64,
        pump_r: f64,
    ) -> Result<Self> {
        let p = Self {
            omega_l,
            omega_r,
            gamma_minus_l: gamma_l - pump_l,
            gamma_minus_r: gamma_r - pump_r,
            gamma_plus_l: gamma_l + pump_l,
            gamma_plus_r: gamma_r + pump_r,
        };
        if p.gamma_minus_l <= 0.0 {
            return Err(DimerError::InvalidArgument(
                "left cavity needs net loss".into(),
            ));
        }
        if p.gamma_minus_r < 0.0 {
            return Err(DimerError::InvalidArgument(
                "right cavity cannot have net gain".into(),
            ));
        }
        Ok(p)
    }

    /// The lossless-right limit, regularized as prescribed: `P_R = 0` and
    /// `Gamma_R = epsilon`.
    pub fn lossless_right(
        omega_l: f64,
        omega_r: f64,
        gamma_l: f64,
        pump_l: f64,
        epsilon: f64,
    ) -> Result<Self> {
        Self::from_rates(omega_l, omega_r, gamma_l, pump_l, epsilon, 0.0)
    }

    fn gamma_minus(&self, site: Site) -> f64 {
        match site {
            Site::L => self.gamma_minus_l,
            Site::R => self.gamma_minus_r,
        }
    }

    fn gamma_plus(&self, site: Site) -> f64 {
        match site {
            Site::L => self.gamma_plus_l,
            Site::R => self.gamma_plus_r,
        }
    }

    fn omega(&self, site: Site) -> f64 {
        match site {
            Site::L => self.omega_l,
            Site::R => self.omega_r,
        }
    }

    /// Uncoupled occupation `n_0i = P_i / (Gamma_i - P_i)`.
    pub fn bare_occupation(&self, site: Site) -> f64 {
        let gm = self.gamma_minus(site);
        let gp = self.gamma_plus(site);
        // P = (gp - gm) / 2
        (gp - gm) / (2.0 * gm)
    }
}

/// Retarded and Keldysh components of a single driven-dissipative cavity:
/// `G^R = 1 / (w - w0 + i (Gamma - P))`,
/// `G^K = -2 i (Gamma + P) / ((w - w0)^2 + (Gamma - P)^2)`.
pub fn single_cavity_gf(omega0: f64, gamma: f64, pump: f64, omega: f64) -> (C64, C64) {
    let gm = gamma - pump;
    let gp = gamma + pump;
    let delta = omega - omega0;
    let retarded = C64::new(1.0, 0.0) / C64::new(delta, gm);
    let keldysh = C64::new(0.0, -2.0 * gp) / C64::new(delta * delta + gm * gm, 0.0);
    (retarded, keldysh)
}

/// Coupled-dimer Green's functions for one site.
///
/// The Keldysh weight carries the noise of the partner cavity transferred
/// through the hybridization bubble `J^2 / (Delta^2 + Gamma_-^2)`.
pub fn coupled_gf(params: &U0Params, j: f64, omega: f64, site: Site) -> (C64, C64) {
    let here = site;
    let there = site.other();
    let delta_here = omega - params.omega(here);
    let delta_there = omega - params.omega(there);
    let gm_here = params.gamma_minus(here);
    let gm_there = params.gamma_minus(there);

    let self_energy = C64::new(j * j, 0.0) / C64::new(delta_there, gm_there);
    let retarded = C64::new(1.0, 0.0) / (C64::new(delta_here, gm_here) - self_energy);

    let noise = params.gamma_plus(here)
        + j * j * params.gamma_plus(there) / (delta_there * delta_there + gm_there * gm_there);
    let keldysh = C64::new(0.0, -2.0 * noise) * retarded.norm_sqr();
    (retarded, keldysh)
}

/// Hybridized pole positions of the coupled retarded function,
/// `w_pm = (w_L + w_R)/2 pm sqrt((w_L - w_R)^2/4 + J^2 + Gamma_-L Gamma_-R)`.
pub fn hybridized_frequencies(params: &U0Params, j: f64) -> (f64, f64) {
    let mid = 0.5 * (params.omega_l + params.omega_r);
    let half_det = 0.5 * (params.omega_l - params.omega_r);
    let split = (half_det * half_det + j * j + params.gamma_minus_l * params.gamma_minus_r).sqrt();
    (mid + split, mid - split)
}

/// Regimes with closed-form steady-state occupations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum U0Regime {
    /// `J = 0`: each cavity keeps its bare occupation.
    Uncoupled,
    /// `J` much larger than every rate, degenerate cavities: both sites
    /// relax to the loss-weighted average of the bare occupations.
    StrongHopping,
    /// `Gamma_{+-R} = 0` (regularized): the left environment fixes both.
    LosslessRight,
}

/// Closed-form steady-state occupations `(n_L, n_R)` in the given regime.
pub fn u0_occupations(params: &U0Params, regime: U0Regime) -> Result<(f64, f64)> {
    match regime {
        U0Regime::Uncoupled => Ok((
            params.bare_occupation(Site::L),
            params.bare_occupation(Site::R),
        )),
        U0Regime::StrongHopping => {
            if (params.omega_l - params.omega_r).abs() > 1e-12 {
                return Err(DimerError::InvalidArgument(
                    "the strong-hopping closed form assumes degenerate cavities".into(),
                ));
            }
            if params.gamma_minus_r <= 0.0 {
                return Err(DimerError::InvalidArgument(
                    "strong-hopping average needs net loss on both sites".into(),
                ));
            }
            let n0l = params.bare_occupation(Site::L);
            let n0r = params.bare_occupation(Site::R);
            let n = (params.gamma_minus_l * n0l + params.gamma_minus_r * n0r)
                / (params.gamma_minus_l + params.gamma_minus_r);
            Ok((n, n))
        }
        U0Regime::LosslessRight => {
            // for any J > 0 the only environments are on the left
            let n0l = params.bare_occupation(Site::L);
            Ok((n0l, n0l))
        }
    }
}
