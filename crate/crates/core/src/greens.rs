//! Steady-state retarded and Keldysh Green's functions as exact sums of
//! simple poles at Lindbladian eigenvalues, plus the spectral and correlation
//! functions derived from them, their analytic sum rules, and the stationary
//! current.
//!
//! Operator promotions follow the vectorization convention of
//! [`crate::liouvillian`]: a bare operator always acts from the left (ket
//! side). With `A = a_i` and `B = a_j^+`, the frequency-domain components
//! split into groups carried by the nu = +1 and nu = -1 sectors:
//!
//! ```text
//! G^R = S[A, B; +1, w - iL] - conj S[A^+, B^+; -1, w + iL]
//! G^K = S[A, B; +1, w - iL] - S[B, A; -1, w + iL]
//!     + conj S[A^+, B^+; -1, w + iL] - conj S[B^+, A^+; +1, w - iL]
//! ```
//!
//! where `S[X, Y; nu, d]` is `sum_a <I|X|r_a><l_a|Y|rho_ss> / d` over the
//! eigenmodes of sector `nu`. Every group reduces to a list of complex poles
//! with complex weights, so frequency evaluation and integrals over the whole
//! real line are closed-form per term.

use num_complex::Complex64 as C64;

use crate::error::{DimerError, Result};
use crate::fock::{
    annihilation, current_operator, kinetic_operator, number_operator, DimerParams, FockBasis,
    OperatorMatrix, Site,
};
use crate::par;
use crate::spectral::{DensityMatrix, SpectralDecomposition};

/// Terms with `|weight|` below this are dropped from pole sums.
pub const DEFAULT_WEIGHT_PRUNE: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GfKind {
    Retarded,
    Keldysh,
}

/// One simple pole. `conjugated` terms enter the sum under an outer complex
/// conjugation, evaluated at real frequency.
#[derive(Debug, Clone, Copy)]
pub struct PoleTerm {
    pub pole: C64,
    pub weight: C64,
    pub conjugated: bool,
}

/// A Green's function as a finite list of simple poles.
#[derive(Debug, Clone)]
pub struct PoleSum {
    pub kind: GfKind,
    pub site_a: Site,
    pub site_b: Site,
    terms: Vec<PoleTerm>,
}

impl PoleSum {
    pub fn terms(&self) -> &[PoleTerm] {
        &self.terms
    }

    /// `G(omega)` at one real frequency.
    pub fn evaluate(&self, omega: f64) -> C64 {
        let mut direct = C64::ZERO;
        let mut conjugated = C64::ZERO;
        for term in &self.terms {
            let contrib = term.weight / (C64::new(omega, 0.0) - term.pole);
            if term.conjugated {
                conjugated += contrib;
            } else {
                direct += contrib;
            }
        }
        direct + conjugated.conj()
    }

    /// `G` over a frequency grid, parallel over points.
    pub fn evaluate_grid(&self, omegas: &[f64]) -> Vec<C64> {
        par::par_map(omegas, |&w| self.evaluate(w))
    }

    /// `\int G(omega) d omega` over the whole real line, from the
    /// principal-value integral `iπ sign(Im p)` of each pole term.
    pub fn integral(&self) -> C64 {
        let mut direct = C64::ZERO;
        let mut conjugated = C64::ZERO;
        for term in &self.terms {
            let contrib = term.weight * C64::new(0.0, std::f64::consts::PI * term.pole.im.signum());
            if term.conjugated {
                conjugated += contrib;
            } else {
                direct += contrib;
            }
        }
        direct + conjugated.conj()
    }

    /// Smallest `|Im pole|` distance from the real axis; poles sit strictly
    /// off-axis for a gapped Lindbladian.
    pub fn min_pole_distance(&self) -> f64 {
        self.terms
            .iter()
            .map(|t| t.pole.im.abs())
            .fold(f64::INFINITY, f64::min)
    }

    /// `-(1/pi) Im \int_{-inf}^{omega_max} G(omega) d omega`, the spectral
    /// weight accumulated below `omega_max`, from the per-pole antiderivative
    /// `w ln(omega - p)`.
    ///
    /// The logarithmic cutoff dependence carried by each term cancels in the
    /// sum because the total `1/omega` coefficient of `G` is real; what is
    /// left per term is the branch constant `i pi sign(Im p)` of the lower
    /// integration limit.
    pub fn spectral_weight_below(&self, omega_max: f64) -> f64 {
        let c = C64::new(omega_max, 0.0);
        let mut acc = 0.0;
        for term in &self.terms {
            let upper = (term.weight * (c - term.pole).ln()).im;
            let branch = if term.pole.im < 0.0 { 1.0 } else { -1.0 };
            acc += if term.conjugated {
                // the outer conjugation flips the imaginary part
                upper / std::f64::consts::PI - branch * term.weight.re
            } else {
                -upper / std::f64::consts::PI + branch * term.weight.re
            };
        }
        acc
    }
}

fn ladder_op(basis: &FockBasis, site: Site, dagger: bool) -> OperatorMatrix {
    let a = annihilation(basis, site);
    if dagger {
        a.dagger()
    } else {
        a
    }
}

/// Uniform gauge-sector shift of a promoted operator, `N(row) - N(col)`.
fn promotion_shift(basis: &FockBasis, op: &OperatorMatrix) -> Result<i64> {
    let mut shift: Option<i64> = None;
    for (r, c, _) in op.iter() {
        let s = basis.total_photons(r) as i64 - basis.total_photons(c) as i64;
        match shift {
            None => shift = Some(s),
            Some(prev) if prev != s => {
                return Err(DimerError::InvalidArgument(
                    "operator does not carry a uniform gauge-sector shift".into(),
                ))
            }
            _ => {}
        }
    }
    shift.ok_or_else(|| DimerError::InvalidArgument("zero operator has no sector shift".into()))
}

/// Which sign the eigenvalue enters the denominator with.
#[derive(Clone, Copy)]
enum Denominator {
    /// `1 / (omega - i L_a)`, pole at `+ i L_a`
    OmegaMinus,
    /// `1 / (omega + i L_a)`, pole at `- i L_a`
    OmegaPlus,
}

struct Group<'a> {
    first: &'a OperatorMatrix,
    second: &'a OperatorMatrix,
    denom: Denominator,
    sign: f64,
    conjugated: bool,
}

/// The decompositions a Green's-function evaluation needs: the two
/// single-excitation sectors. The steady state itself comes from nu = 0.
pub struct GfSectors<'a> {
    plus: &'a SpectralDecomposition,
    minus: &'a SpectralDecomposition,
}

impl<'a> GfSectors<'a> {
    pub fn new(plus: &'a SpectralDecomposition, minus: &'a SpectralDecomposition) -> Result<Self> {
        if plus.nu() != 1 || minus.nu() != -1 {
            return Err(DimerError::InvalidArgument(format!(
                "Green's functions need sectors +1 and -1, got {} and {}",
                plus.nu(),
                minus.nu()
            )));
        }
        Ok(Self { plus, minus })
    }

    fn sector(&self, nu: i64) -> Result<&'a SpectralDecomposition> {
        match nu {
            1 => Ok(self.plus),
            -1 => Ok(self.minus),
            _ => Err(DimerError::InvalidArgument(format!(
                "operator promotion requires sector {nu}, which is not provided"
            ))),
        }
    }
}

/// Assemble the pole sum of `G^{R/K}_{ij}` for `A = a_i`, `B = a_j^+`.
pub fn greens_pole_sum(
    sectors: &GfSectors<'_>,
    basis: &FockBasis,
    rho_ss: &DensityMatrix,
    site_i: Site,
    site_j: Site,
    kind: GfKind,
    prune_threshold: f64,
) -> Result<PoleSum> {
    let a = ladder_op(basis, site_i, false);
    let a_dag = ladder_op(basis, site_i, true);
    let b = ladder_op(basis, site_j, true);
    let b_dag = ladder_op(basis, site_j, false);

    let groups: Vec<Group> = match kind {
        GfKind::Retarded => vec![
            Group {
                first: &a,
                second: &b,
                denom: Denominator::OmegaMinus,
                sign: 1.0,
                conjugated: false,
            },
            Group {
                first: &a_dag,
                second: &b_dag,
                denom: Denominator::OmegaPlus,
                sign: -1.0,
                conjugated: true,
            },
        ],
        GfKind::Keldysh => vec![
            Group {
                first: &a,
                second: &b,
                denom: Denominator::OmegaMinus,
                sign: 1.0,
                conjugated: false,
            },
            Group {
                first: &b,
                second: &a,
                denom: Denominator::OmegaPlus,
                sign: -1.0,
                conjugated: false,
            },
            Group {
                first: &a_dag,
                second: &b_dag,
                denom: Denominator::OmegaPlus,
                sign: 1.0,
                conjugated: true,
            },
            Group {
                first: &b_dag,
                second: &a_dag,
                denom: Denominator::OmegaMinus,
                sign: -1.0,
                conjugated: true,
            },
        ],
    };

    let mut terms = Vec::new();
    for group in groups {
        let nu = promotion_shift(basis, group.second)?;
        if promotion_shift(basis, group.first)? + nu != 0 {
            return Err(DimerError::InvalidArgument(
                "group operators do not connect back to the trace sector".into(),
            ));
        }
        let decomp = sectors.sector(nu)?;
        let iden = decomp.identity_functional(group.first);
        let left = decomp.left_functional(group.second, rho_ss);
        for (alpha, lambda) in decomp.eigenvalues().iter().enumerate() {
            let weight = group.sign * iden[alpha] * left[alpha];
            if weight.norm() < prune_threshold {
                continue;
            }
            let il = C64::new(0.0, 1.0) * lambda;
            let pole = match group.denom {
                Denominator::OmegaMinus => il,
                Denominator::OmegaPlus => -il,
            };
            terms.push(PoleTerm {
                pole,
                weight,
                conjugated: group.conjugated,
            });
        }
    }

    Ok(PoleSum {
        kind,
        site_a: site_i,
        site_b: site_j,
        terms,
    })
}

/// Spectral function `A_ij` and correlation function `C_ij` on a grid.
#[derive(Debug, Clone)]
pub struct SpectralSeries {
    pub frequencies: Vec<f64>,
    pub a_ij: Vec<f64>,
    pub c_ij: Vec<C64>,
}

/// Evaluate `A = -(1/pi) Im G^R` and `C = -(1/(2 pi i)) G^K` on a grid.
pub fn spectral_series(
    retarded: &PoleSum,
    keldysh: &PoleSum,
    frequencies: &[f64],
) -> SpectralSeries {
    let gr = retarded.evaluate_grid(frequencies);
    let gk = keldysh.evaluate_grid(frequencies);
    let a_ij = gr.iter().map(|g| -g.im / std::f64::consts::PI).collect();
    let c_ij = gk
        .iter()
        .map(|g| C64::new(0.0, 1.0) * g / (2.0 * std::f64::consts::PI))
        .collect();
    SpectralSeries {
        frequencies: frequencies.to_vec(),
        a_ij,
        c_ij,
    }
}

/// `\int A_ij d omega` from the analytic pole integrals.
pub fn spectral_norm(retarded: &PoleSum) -> f64 {
    -retarded.integral().im / std::f64::consts::PI
}

/// `\int C_ij d omega` from the analytic pole integrals (complex for i != j).
pub fn correlation_integral(keldysh: &PoleSum) -> C64 {
    C64::new(0.0, 1.0) * keldysh.integral() / (2.0 * std::f64::consts::PI)
}

/// Stationary current from the rate balance,
/// `<I> = Delta P - n_L Gamma^eff_L + n_R Gamma^eff_R`.
pub fn stationary_current(params: &DimerParams, n_l: f64, n_r: f64) -> f64 {
    params.pump_diff() - n_l * params.gamma_eff(Site::L) + n_r * params.gamma_eff(Site::R)
}

/// The five pole sums the sum rules need.
pub struct GreensSet {
    pub ret_ll: PoleSum,
    pub ret_rr: PoleSum,
    pub kel_ll: PoleSum,
    pub kel_rr: PoleSum,
    pub kel_lr: PoleSum,
}

/// Assemble all pole sums used by the sum-rule report, fanned out in
/// parallel.
pub fn build_greens_set(
    sectors: &GfSectors<'_>,
    basis: &FockBasis,
    rho_ss: &DensityMatrix,
    prune_threshold: f64,
) -> Result<GreensSet> {
    let specs = [
        (Site::L, Site::L, GfKind::Retarded),
        (Site::R, Site::R, GfKind::Retarded),
        (Site::L, Site::L, GfKind::Keldysh),
        (Site::R, Site::R, GfKind::Keldysh),
        (Site::L, Site::R, GfKind::Keldysh),
    ];
    let mut sums = par::par_map(&specs, |&(i, j, kind)| {
        greens_pole_sum(sectors, basis, rho_ss, i, j, kind, prune_threshold)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?
    .into_iter();
    Ok(GreensSet {
        ret_ll: sums.next().unwrap(),
        ret_rr: sums.next().unwrap(),
        kel_ll: sums.next().unwrap(),
        kel_rr: sums.next().unwrap(),
        kel_lr: sums.next().unwrap(),
    })
}

/// Sum-rule integrals against their independent steady-state expectations.
///
/// Integrals are evaluated analytically per pole, never by grid quadrature.
/// The `direct_*` fields are plain operator expectations in the same
/// truncated space, which is what the integrals resolve to through the
/// completeness of the eigenbasis.
#[derive(Debug, Clone, Copy)]
pub struct SumRuleReport {
    /// `\int A_i`, one per site.
    pub norm_l: f64,
    pub norm_r: f64,
    /// `(\int C_i - 1) / 2`.
    pub occupation_l: f64,
    pub occupation_r: f64,
    /// `J \int Re C_LR`.
    pub kinetic: f64,
    /// `J \int Im C_LR`.
    pub current: f64,
    /// Rate-balance current `Delta P - n_L G^eff_L + n_R G^eff_R`.
    pub current_rate_formula: f64,
    pub direct_occupation_l: f64,
    pub direct_occupation_r: f64,
    pub direct_kinetic: f64,
    pub direct_current: f64,
}

pub fn sum_rules(
    set: &GreensSet,
    basis: &FockBasis,
    params: &DimerParams,
    rho_ss: &DensityMatrix,
) -> SumRuleReport {
    let c_ll = correlation_integral(&set.kel_ll);
    let c_rr = correlation_integral(&set.kel_rr);
    let c_lr = correlation_integral(&set.kel_lr);

    let n_l = rho_ss.expectation(&number_operator(basis, Site::L)).re;
    let n_r = rho_ss.expectation(&number_operator(basis, Site::R)).re;

    SumRuleReport {
        norm_l: spectral_norm(&set.ret_ll),
        norm_r: spectral_norm(&set.ret_rr),
        occupation_l: (c_ll.re - 1.0) / 2.0,
        occupation_r: (c_rr.re - 1.0) / 2.0,
        kinetic: params.j * c_lr.re,
        current: params.j * c_lr.im,
        current_rate_formula: stationary_current(params, n_l, n_r),
        direct_occupation_l: n_l,
        direct_occupation_r: n_r,
        direct_kinetic: rho_ss.expectation(&kinetic_operator(basis, params.j)).re,
        direct_current: rho_ss.expectation(&current_operator(basis, params.j)).re,
    }
}

/// Default output grid: 2001 points covering the hybridization scale and the
/// Kerr ladder around the bare cavity frequency.
pub fn default_frequency_grid(params: &DimerParams, mean_occupation: f64) -> Vec<f64> {
    let mut half_width = 2.0 * (params.j + 4.0 * params.u * mean_occupation);
    if half_width <= 0.0 {
        half_width = 1.0;
    }
    linspace(params.omega0 - half_width, params.omega0 + half_width, 2001)
}

pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(n >= 2);
    (0..n)
        .map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64)
        .collect()
}

/// Indices of strict local maxima of `values` that exceed `threshold`.
pub fn local_maxima(values: &[f64], threshold: f64) -> Vec<usize> {
    let mut peaks = Vec::new();
    for k in 1..values.len().saturating_sub(1) {
        if values[k] > threshold && values[k] >= values[k - 1] && values[k] > values[k + 1] {
            peaks.push(k);
        }
    }
    peaks
}

/// Golden-section maximizer of a smooth unimodal function on `[lo, hi]`.
pub fn golden_max<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let inv_phi = 0.5 * (5.0f64.sqrt() - 1.0);
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while hi - lo > tol {
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
    0.5 * (lo + hi)
}
