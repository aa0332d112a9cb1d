//! Semiclassical companion solver: coherent-state equations of motion for the
//! total occupation `N`, imbalance `Z` and relative phase `phi`, the
//! closed-system self-trapping analytics (critical coupling, turning points,
//! oscillation period), and open-system diagnostics.

use crate::elliptic::elliptic_k;
use crate::error::{DimerError, Result};
use crate::ode::{integrate, DenseSolution, OdeOptions};

/// Couplings of the semiclassical system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SCParams {
    pub u: f64,
    pub j: f64,
    /// Detuning `omega_L - omega_R`.
    pub delta_omega: f64,
    pub gamma_eff_l: f64,
    pub gamma_eff_r: f64,
}

impl SCParams {
    pub fn new(
        u: f64,
        j: f64,
        delta_omega: f64,
        gamma_eff_l: f64,
        gamma_eff_r: f64,
    ) -> Result<Self> {
        for v in [u, j, delta_omega, gamma_eff_l, gamma_eff_r] {
            if !v.is_finite() {
                return Err(DimerError::InvalidArgument(
                    "non-finite semiclassical parameter".into(),
                ));
            }
        }
        if gamma_eff_l < 0.0 || gamma_eff_r < 0.0 {
            return Err(DimerError::InvalidArgument(
                "effective losses must be non-negative".into(),
            ));
        }
        Ok(Self {
            u,
            j,
            delta_omega,
            gamma_eff_l,
            gamma_eff_r,
        })
    }

    /// Closed system: no losses, no detuning.
    pub fn closed(u: f64, j: f64) -> Result<Self> {
        Self::new(u, j, 0.0, 0.0, 0.0)
    }

    pub fn is_closed(&self) -> bool {
        self.gamma_eff_l == 0.0 && self.gamma_eff_r == 0.0
    }
}

/// Semiclassical state `(N, Z, phi)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SCState {
    pub n: f64,
    pub z: f64,
    pub phi: f64,
}

impl SCState {
    pub fn new(n: f64, z: f64, phi: f64) -> Result<Self> {
        if !(n.is_finite() && z.is_finite() && phi.is_finite()) || n < 0.0 {
            return Err(DimerError::InvalidArgument(
                "invalid semiclassical state".into(),
            ));
        }
        if z.abs() > n {
            return Err(DimerError::InvalidArgument(format!(
                "|Z| = {} exceeds N = {n}",
                z.abs()
            )));
        }
        Ok(Self { n, z, phi })
    }
}

// relative clamp width at the |Z| = N boundary
const BOUNDARY_CLAMP: f64 = 1e-12;

/// Right-hand side of the semiclassical equations of motion.
pub fn sc_rhs(state: &SCState, params: &SCParams) -> Result<[f64; 3]> {
    let SCState { n, z, phi } = *state;
    let mut s = n * n - z * z;
    if s < 0.0 {
        if -s <= BOUNDARY_CLAMP * n * n {
            s = 0.0;
        } else {
            return Err(DimerError::BoundarySingularity { z, n });
        }
    }
    let root = s.sqrt();
    let g_sum = params.gamma_eff_l + params.gamma_eff_r;
    let g_diff = params.gamma_eff_l - params.gamma_eff_r;

    let n_dot = -g_sum * n - g_diff * z;
    let z_dot = -g_sum * z - g_diff * n - 2.0 * params.j * root * phi.sin();
    let hop = 2.0 * params.j * z * phi.cos();
    let phi_dot = if hop == 0.0 {
        -params.delta_omega - 2.0 * params.u * z
    } else {
        if root == 0.0 {
            return Err(DimerError::BoundarySingularity { z, n });
        }
        -params.delta_omega - 2.0 * params.u * z + hop / root
    };
    Ok([n_dot, z_dot, phi_dot])
}

/// Conserved energy of the closed system (up to the constant `(omega-U) N`):
/// `U (N^2 + Z^2) / 2 + J sqrt(N^2 - Z^2) cos phi + delta_omega Z / 2`.
pub fn closed_energy(state: &SCState, params: &SCParams) -> f64 {
    let s = (state.n * state.n - state.z * state.z).max(0.0);
    0.5 * params.u * (state.n * state.n + state.z * state.z)
        + params.j * s.sqrt() * state.phi.cos()
        + 0.5 * params.delta_omega * state.z
}

/// Dense semiclassical trajectory.
#[derive(Debug, Clone)]
pub struct ScTrajectory {
    solution: DenseSolution,
    pub state0: SCState,
    pub params: SCParams,
}

impl ScTrajectory {
    pub fn t_end(&self) -> f64 {
        self.solution.t_end
    }

    pub fn state_at(&self, t: f64) -> SCState {
        let y = self.solution.eval(t);
        SCState {
            n: y[0],
            z: y[1],
            phi: y[2],
        }
    }

    pub fn z_at(&self, t: f64) -> f64 {
        self.solution.eval(t)[1]
    }

    /// Sample `(t, N, Z, phi)` on a uniform grid of `n_points`.
    pub fn sample(&self, n_points: usize) -> Vec<(f64, f64, f64, f64)> {
        let t1 = self.t_end();
        (0..n_points)
            .map(|k| {
                let t = t1 * k as f64 / (n_points - 1).max(1) as f64;
                let y = self.solution.eval(t);
                (t, y[0], y[1], y[2])
            })
            .collect()
    }

    /// First time the imbalance crosses zero, or `None` within this horizon.
    pub fn crossing_time(&self) -> Option<f64> {
        self.solution.first_root(|y| y[1], 8, 1e-9)
    }

    /// `(1/T) \int_0^T Z dt` by composite trapezoid on the dense output.
    pub fn time_averaged_imbalance(&self, t_avg: f64) -> Result<f64> {
        if t_avg <= 0.0 || t_avg > self.t_end() + 1e-9 {
            return Err(DimerError::InvalidArgument(format!(
                "averaging window {t_avg} outside the trajectory horizon {}",
                self.t_end()
            )));
        }
        // subdivide each accepted step so the quadrature error stays far
        // below the integrator tolerance
        let mut acc = 0.0;
        let mut t_prev = 0.0;
        let mut z_prev = self.z_at(0.0);
        const SUBDIV: usize = 8;
        'outer: for seg in &self.solution.segments {
            for k in 1..=SUBDIV {
                let t = seg.t0 + (seg.t1 - seg.t0) * k as f64 / SUBDIV as f64;
                let t = t.min(t_avg);
                let z = self.z_at(t);
                acc += 0.5 * (z + z_prev) * (t - t_prev);
                t_prev = t;
                z_prev = z;
                if t >= t_avg {
                    break 'outer;
                }
            }
        }
        Ok(acc / t_avg)
    }

    /// Mean spacing between successive maxima of `Z(t)`, for period checks.
    pub fn measured_period(&self) -> Option<f64> {
        let n = 20_000;
        let samples = self.sample(n);
        let mut peaks = Vec::new();
        for k in 1..n - 1 {
            let (tm, _, zm, _) = samples[k - 1];
            let (t, _, z, _) = samples[k];
            let (tp, _, zp, _) = samples[k + 1];
            if z >= zm && z > zp {
                // parabolic refinement through the three samples
                let denom = zm - 2.0 * z + zp;
                let dt = samples[1].0 - samples[0].0;
                let shift = if denom == 0.0 {
                    0.0
                } else {
                    0.5 * (zm - zp) / denom * dt
                };
                let _ = (tm, tp);
                peaks.push(t + shift);
            }
        }
        if peaks.len() < 2 {
            return None;
        }
        Some((peaks[peaks.len() - 1] - peaks[0]) / (peaks.len() - 1) as f64)
    }
}

/// Integrate the semiclassical equations up to `t_end` with dense output.
pub fn integrate_sc(state0: &SCState, params: &SCParams, t_end: f64) -> Result<ScTrajectory> {
    if t_end <= 0.0 {
        return Err(DimerError::InvalidArgument(
            "integration horizon must be positive".into(),
        ));
    }
    let opts = OdeOptions {
        rtol: 1e-10,
        atol: 1e-12,
        ..Default::default()
    };
    let params_copy = *params;
    let solution = integrate(
        move |_t, y, dy| {
            let state = SCState {
                n: y[0],
                z: y[1],
                phi: y[2],
            };
            let rhs = sc_rhs(&state, &params_copy)?;
            dy.copy_from_slice(&rhs);
            Ok(())
        },
        0.0,
        t_end,
        &[state0.n, state0.z, state0.phi],
        &opts,
    )?;
    Ok(ScTrajectory {
        solution,
        state0: *state0,
        params: *params,
    })
}

/// Critical hopping-to-interaction ratio of the closed system,
/// `(J/U)_c = N0 (sqrt(1 - (Z0/N0)^2) + 1) / 2`.
pub fn critical_ratio(n0: f64, z0: f64) -> Result<f64> {
    if n0 <= 0.0 {
        return Err(DimerError::InvalidArgument("N0 must be positive".into()));
    }
    if z0.abs() > n0 {
        return Err(DimerError::InvalidArgument(format!(
            "|Z0| = {} exceeds N0 = {n0}",
            z0.abs()
        )));
    }
    let ratio = z0 / n0;
    Ok(n0 * ((1.0 - ratio * ratio).sqrt() + 1.0) / 2.0)
}

/// Radicand of the second turning point,
/// `Z1^2 = Z0^2 + 4 (J/U) sqrt(N0^2 - Z0^2) - 4 (J/U)^2`.
///
/// A negative value signals the delocalized regime where `Z` sweeps through
/// zero.
pub fn turning_point(n0: f64, z0: f64, j_over_u: f64) -> Result<f64> {
    if n0 <= 0.0 {
        return Err(DimerError::InvalidArgument("N0 must be positive".into()));
    }
    if z0.abs() > n0 {
        return Err(DimerError::InvalidArgument(format!(
            "|Z0| = {} exceeds N0 = {n0}",
            z0.abs()
        )));
    }
    Ok(z0 * z0 + 4.0 * j_over_u * (n0 * n0 - z0 * z0).sqrt() - 4.0 * j_over_u * j_over_u)
}

/// Closed-system oscillation period of the imbalance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Period {
    Finite(f64),
    /// Logarithmic divergence exactly at the critical coupling.
    Infinite,
}

impl Period {
    pub fn finite(self) -> Option<f64> {
        match self {
            Period::Finite(t) => Some(t),
            Period::Infinite => None,
        }
    }
}

/// Analytic oscillation period of the closed system, starting from the
/// turning point `Z0` at `phi = 0`.
///
/// Both branches are complete-elliptic-integral reductions of the quartic
/// quadrature `T = \int dZ / sqrt(p(Z))`; the parameter convention was fixed
/// by checking against direct quadrature of that defining integral, which
/// also resolves how the printed closed form is to be read below the
/// critical coupling, where its literal arguments leave the real domain.
pub fn oscillation_period(n0: f64, z0: f64, j_over_u: f64, u: f64) -> Result<Period> {
    if u <= 0.0 {
        return Err(DimerError::InvalidArgument(
            "the period needs U > 0; the linear system does not self-trap".into(),
        ));
    }
    if z0 == 0.0 {
        return Err(DimerError::InvalidArgument(
            "Z0 = 0 sits at the symmetric fixed point".into(),
        ));
    }
    let z1_sq = turning_point(n0, z0, j_over_u)?;
    let z0_sq = z0 * z0;
    // Z1 -> 0 exactly at the critical coupling; below machine resolution of
    // the radicand the branch choice is meaningless and the period diverges.
    let radicand_scale =
        z0_sq + 4.0 * j_over_u.abs() * (n0 * n0 - z0_sq).sqrt() + 4.0 * j_over_u * j_over_u;
    if z1_sq.abs() <= 64.0 * f64::EPSILON * radicand_scale {
        return Ok(Period::Infinite);
    }
    let period = if z1_sq < 0.0 {
        // delocalized: Z sweeps [-Z0, Z0] against the imaginary pair +- i|Z1|
        let c_sq = -z1_sq;
        let m = z0_sq / (z0_sq + c_sq);
        4.0 * elliptic_k(m) / (u * (z0_sq + c_sq).sqrt())
    } else {
        // localized: Z oscillates between Z0 and Z1 without changing sign
        let (lo_sq, hi_sq) = if z1_sq < z0_sq {
            (z1_sq, z0_sq)
        } else {
            (z0_sq, z1_sq)
        };
        let m = 1.0 - lo_sq / hi_sq;
        2.0 * elliptic_k(m) / (u * hi_sq.sqrt())
    };
    if period.is_finite() {
        Ok(Period::Finite(period))
    } else {
        Ok(Period::Infinite)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn symmetric_fixed_point_only_precesses() {
        let p = SCParams::new(0.1, 0.2, 0.3, 0.0, 0.0).unwrap();
        let s = SCState::new(2.0, 0.0, 0.0).unwrap();
        let rhs = sc_rhs(&s, &p).unwrap();
        assert_eq!(rhs[0], 0.0);
        assert_eq!(rhs[1], 0.0);
        assert_relative_eq!(rhs[2], -0.3, epsilon = 1e-15);
    }

    #[test]
    fn closed_system_conserves_n() {
        let p = SCParams::closed(0.1, 0.25).unwrap();
        let s = SCState::new(3.0, 1.0, 0.4).unwrap();
        let rhs = sc_rhs(&s, &p).unwrap();
        assert_eq!(rhs[0], 0.0);
    }

    #[test]
    fn equal_losses_decay_n_at_twice_the_rate() {
        let g = 4e-4;
        let p = SCParams::new(0.1, 0.25, 0.0, g, g).unwrap();
        let s0 = SCState::new(3.0, 1.0, 0.0).unwrap();
        let traj = integrate_sc(&s0, &p, 500.0).unwrap();
        for &t in &[50.0, 200.0, 500.0] {
            let n = traj.state_at(t).n;
            assert_relative_eq!(n, 3.0 * (-2.0 * g * t).exp(), max_relative = 1e-8);
        }
    }

    #[test]
    fn closed_run_conserves_number_and_energy() {
        let u = 0.1;
        let p = SCParams::closed(u, 2.0 * u).unwrap();
        let s0 = SCState::new(3.0, 1.0, 0.0).unwrap();
        let traj = integrate_sc(&s0, &p, 500.0 / u).unwrap();
        let e0 = closed_energy(&s0, &p);
        for k in 1..=20 {
            let t = traj.t_end() * k as f64 / 20.0;
            let s = traj.state_at(t);
            assert_relative_eq!(s.n, 3.0, max_relative = 1e-8);
            assert_relative_eq!(closed_energy(&s, &p), e0, max_relative = 1e-8);
        }
    }

    #[test]
    fn critical_ratio_reference_points() {
        assert_relative_eq!(critical_ratio(4.0, 2.0).unwrap(), 3.7320508, epsilon = 1e-6);
        assert_relative_eq!(critical_ratio(3.0, 1.0).unwrap(), 2.9142136, epsilon = 1e-6);
        assert_relative_eq!(critical_ratio(5.0, 0.0).unwrap(), 5.0, epsilon = 1e-15);
        assert!(critical_ratio(3.0, 4.0).is_err());
    }

    #[test]
    fn turning_point_values() {
        // J/U -> 0 freezes the imbalance band onto Z0
        assert_relative_eq!(turning_point(3.0, 1.0, 0.0).unwrap(), 1.0, epsilon = 1e-15);
        // frozen from direct arithmetic: 4 + 20 sqrt(12) - 100
        assert_relative_eq!(
            turning_point(4.0, 2.0, 5.0).unwrap(),
            -26.7179676972449,
            epsilon = 1e-10
        );
        // vanishes exactly at the critical coupling
        let c = critical_ratio(3.0, 1.0).unwrap();
        assert!(turning_point(3.0, 1.0, c).unwrap().abs() < 1e-12);
    }

    #[test]
    fn above_critical_oscillates_around_zero_and_below_stays_trapped() {
        let u = 0.1;
        let c = critical_ratio(3.0, 1.0).unwrap();
        let s0 = SCState::new(3.0, 1.0, 0.0).unwrap();

        let above = integrate_sc(&s0, &SCParams::closed(u, (c + 0.1) * u).unwrap(), 600.0).unwrap();
        assert!(above.crossing_time().is_some());

        let below = integrate_sc(&s0, &SCParams::closed(u, (c - 0.1) * u).unwrap(), 600.0).unwrap();
        assert!(below.crossing_time().is_none());
    }

    #[test]
    fn band_confinement_of_the_closed_orbits() {
        let u = 0.1;
        let s0 = SCState::new(3.0, 1.0, 0.0).unwrap();

        // localized branch: Z in [min(Z0, Z1), max(Z0, Z1)]
        let j_over_u = 2.0;
        let z1 = turning_point(3.0, 1.0, j_over_u).unwrap().sqrt();
        let traj = integrate_sc(&s0, &SCParams::closed(u, j_over_u * u).unwrap(), 400.0).unwrap();
        let (lo, hi) = (1.0f64.min(z1), 1.0f64.max(z1));
        for (_, _, z, _) in traj.sample(4000) {
            assert!(
                z > lo - 1e-6 && z < hi + 1e-6,
                "Z = {z} outside [{lo}, {hi}]"
            );
        }

        // delocalized branch: Z in [-Z0, Z0]
        let traj = integrate_sc(&s0, &SCParams::closed(u, 3.5 * u).unwrap(), 400.0).unwrap();
        for (_, _, z, _) in traj.sample(4000) {
            assert!(z.abs() < 1.0 + 1e-6);
        }
    }

    #[test]
    fn analytic_period_matches_the_measured_one() {
        let u = 0.1;
        let s0 = SCState::new(3.0, 1.0, 0.0).unwrap();
        for &j_over_u in &[2.0, 3.5] {
            let expected = oscillation_period(3.0, 1.0, j_over_u, u)
                .unwrap()
                .finite()
                .unwrap();
            let traj = integrate_sc(
                &s0,
                &SCParams::closed(u, j_over_u * u).unwrap(),
                12.0 * expected,
            )
            .unwrap();
            let measured = traj.measured_period().unwrap();
            assert_relative_eq!(measured, expected, max_relative = 1e-4);
        }
    }

    #[test]
    fn period_scales_inversely_with_u() {
        let t1 = oscillation_period(3.0, 1.0, 2.0, 0.1)
            .unwrap()
            .finite()
            .unwrap();
        let t2 = oscillation_period(3.0, 1.0, 2.0, 0.2)
            .unwrap()
            .finite()
            .unwrap();
        assert_relative_eq!(t1, 2.0 * t2, max_relative = 1e-12);
    }

    #[test]
    fn period_diverges_at_the_critical_coupling() {
        let c = critical_ratio(3.0, 1.0).unwrap();
        assert_eq!(
            oscillation_period(3.0, 1.0, c, 0.1).unwrap(),
            Period::Infinite
        );
        // close to critical the period grows logarithmically
        let near = oscillation_period(3.0, 1.0, c + 1e-9, 0.1)
            .unwrap()
            .finite()
            .unwrap();
        let far = oscillation_period(3.0, 1.0, c + 0.5, 0.1)
            .unwrap()
            .finite()
            .unwrap();
        assert!(near > 2.0 * far);
    }

    #[test]
    fn open_system_eventually_crosses_below_the_closed_critical_point() {
        let u = 0.1;
        let g = 4e-4;
        let c = critical_ratio(3.0, 1.0).unwrap();
        let j_over_u = c - 0.1; // self-trapped for the closed system
        let s0 = SCState::new(3.0, 1.0, 0.0).unwrap();
        let p = SCParams::new(u, j_over_u * u, 0.0, g, g).unwrap();
        let traj = integrate_sc(&s0, &p, 400.0).unwrap();
        let t_cross = traj.crossing_time();
        assert!(t_cross.is_some(), "losses should unlock the trapped orbit");
    }

    #[test]
    fn zero_initial_imbalance_crosses_immediately() {
        let p = SCParams::closed(0.1, 0.3).unwrap();
        let s0 = SCState::new(2.0, 0.0, 0.3).unwrap();
        let traj = integrate_sc(&s0, &p, 10.0).unwrap();
        assert_eq!(traj.crossing_time(), Some(0.0));
    }

    #[test]
    fn constant_imbalance_averages_to_itself() {
        // J = 0 freezes Z; the average must equal Z0
        let p = SCParams::closed(0.1, 0.0).unwrap();
        let s0 = SCState::new(3.0, 1.0, 0.0).unwrap();
        let traj = integrate_sc(&s0, &p, 50.0).unwrap();
        let avg = traj.time_averaged_imbalance(50.0).unwrap();
        assert_relative_eq!(avg, 1.0, max_relative = 1e-9);
    }

    #[test]
    fn boundary_state_is_rejected() {
        assert!(SCState::new(2.0, 2.5, 0.0).is_err());
        let p = SCParams::closed(0.1, 0.2).unwrap();
        let s = SCState {
            n: 2.0,
            z: 2.0 + 1e-6,
            phi: 0.3,
        };
        assert!(sc_rhs(&s, &p).is_err());
    }
}
