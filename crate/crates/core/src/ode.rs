//! Adaptive Dormand-Prince 5(4) integrator with dense output.
//!
//! Small and self-contained: the engine needs exactly one explicit embedded
//! pair, used for the direct Lindblad-integration oracle and for the
//! semiclassical equations, where the dense output drives event detection.

use crate::error::{DimerError, Result};

// Dormand-Prince tableau
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
// E is the difference between the 5th-order weights (the last A row) and the
// embedded 4th-order solution.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];
// dense-output coefficients (Hairer's contd5)
const D: [f64; 7] = [
    -12715105075.0 / 11282082432.0,
    0.0,
    87487479700.0 / 32700410799.0,
    -10690763975.0 / 1880347072.0,
    701980252875.0 / 199316789632.0,
    -1453857185.0 / 822651844.0,
    69997945.0 / 29380423.0,
];

/// One accepted step with its quartic interpolant.
#[derive(Debug, Clone)]
pub struct DenseSegment {
    pub t0: f64,
    pub t1: f64,
    cont: [Vec<f64>; 5],
}

impl DenseSegment {
    /// Interpolated state at `t` within `[t0, t1]`.
    pub fn eval(&self, t: f64) -> Vec<f64> {
        let mut y = vec![0.0; self.cont[0].len()];
        self.eval_into(t, &mut y);
        y
    }

    pub fn eval_into(&self, t: f64, y: &mut [f64]) {
        let theta = if self.t1 == self.t0 {
            0.0
        } else {
            (t - self.t0) / (self.t1 - self.t0)
        };
        let omt = 1.0 - theta;
        for (i, out) in y.iter_mut().enumerate() {
            *out = self.cont[0][i]
                + theta
                    * (self.cont[1][i]
                        + omt
                            * (self.cont[2][i]
                                + theta * (self.cont[3][i] + omt * self.cont[4][i])));
        }
    }
}

/// Tolerances and step-size limits.
#[derive(Debug, Clone, Copy)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    pub h_initial: Option<f64>,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-10,
            atol: 1e-12,
            h_initial: None,
            max_steps: 50_000_000,
        }
    }
}

/// Core stepper. Calls `on_step` with every accepted step's dense segment.
fn integrate_with<F, S>(
    mut f: F,
    t0: f64,
    t1: f64,
    y0: &[f64],
    opts: &OdeOptions,
    mut on_step: S,
) -> Result<(f64, Vec<f64>, usize, usize)>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
    S: FnMut(&DenseSegment),
{
    assert!(t1 > t0, "integration interval must be forward in time");
    let n = y0.len();
    let mut t = t0;
    let mut y = y0.to_vec();
    let mut k = vec![vec![0.0; n]; 7];
    f(t, &y, &mut k[0])?;

    let mut h = opts.h_initial.unwrap_or_else(|| {
        // crude first guess from the initial derivative scale
        let dy_norm = k[0].iter().map(|v| v * v).sum::<f64>().sqrt();
        let y_norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        let scale = (y_norm + opts.atol) / (dy_norm + 1e-30);
        (1e-2 * scale).min(t1 - t0)
    });

    let mut n_steps = 0usize;
    let mut n_rejected = 0usize;
    let mut y_stage = vec![0.0; n];
    let mut y_next = vec![0.0; n];

    while t < t1 {
        if n_steps + n_rejected > opts.max_steps {
            return Err(DimerError::StepSizeUnderflow { t });
        }
        h = h.min(t1 - t);
        if h < f64::EPSILON * t.abs().max(1.0) * 4.0 {
            return Err(DimerError::StepSizeUnderflow { t });
        }

        let mut failed_rhs = false;
        for stage in 1..7 {
            for i in 0..n {
                let mut acc = 0.0;
                for (s, ks) in k.iter().enumerate().take(stage) {
                    let a = A[stage][s];
                    if a != 0.0 {
                        acc += a * ks[i];
                    }
                }
                y_stage[i] = y[i] + h * acc;
            }
            let (head, tail) = k.split_at_mut(stage);
            let _ = head;
            if f(t + C[stage] * h, &y_stage, &mut tail[0]).is_err() {
                failed_rhs = true;
                break;
            }
        }
        if failed_rhs {
            h *= 0.25;
            n_rejected += 1;
            continue;
        }

        // 5th-order solution (FSAL: stage 7 already evaluated it)
        for i in 0..n {
            let mut acc = 0.0;
            for (s, ks) in k.iter().enumerate().take(6) {
                acc += A[6][s] * ks[i];
            }
            y_next[i] = y[i] + h * acc;
        }

        let mut err = 0.0f64;
        for i in 0..n {
            let mut e = 0.0;
            for (s, ks) in k.iter().enumerate() {
                if E[s] != 0.0 {
                    e += E[s] * ks[i];
                }
            }
            let scale = opts.atol + opts.rtol * y[i].abs().max(y_next[i].abs());
            err += (h * e / scale).powi(2);
        }
        err = (err / n as f64).sqrt();

        if err <= 1.0 {
            let mut cont = [
                y.clone(),
                vec![0.0; n],
                vec![0.0; n],
                vec![0.0; n],
                vec![0.0; n],
            ];
            for i in 0..n {
                let ydiff = y_next[i] - y[i];
                let bspl = h * k[0][i] - ydiff;
                cont[1][i] = ydiff;
                cont[2][i] = bspl;
                cont[3][i] = ydiff - h * k[6][i] - bspl;
                let mut d_acc = 0.0;
                for (s, ks) in k.iter().enumerate() {
                    if D[s] != 0.0 {
                        d_acc += D[s] * ks[i];
                    }
                }
                cont[4][i] = h * d_acc;
            }
            on_step(&DenseSegment {
                t0: t,
                t1: t + h,
                cont,
            });

            t += h;
            std::mem::swap(&mut y, &mut y_next);
            k.swap(0, 6); // FSAL
            n_steps += 1;

            let factor = if err == 0.0 {
                5.0
            } else {
                (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
            };
            h *= factor;
        } else {
            n_rejected += 1;
            h *= (0.9 * err.powf(-0.2)).clamp(0.1, 1.0);
        }
    }

    Ok((t, y, n_steps, n_rejected))
}

/// Dense solution over the whole integration interval.
#[derive(Debug, Clone)]
pub struct DenseSolution {
    pub segments: Vec<DenseSegment>,
    pub t_end: f64,
    pub y_end: Vec<f64>,
    pub n_steps: usize,
    pub n_rejected: usize,
}

impl DenseSolution {
    pub fn t_start(&self) -> f64 {
        self.segments.first().map(|s| s.t0).unwrap_or(self.t_end)
    }

    /// State at any `t` inside the integration interval.
    pub fn eval(&self, t: f64) -> Vec<f64> {
        match self
            .segments
            .binary_search_by(|s| match (s.t0 <= t, t <= s.t1) {
                (true, true) => std::cmp::Ordering::Equal,
                (false, _) => std::cmp::Ordering::Greater,
                _ => std::cmp::Ordering::Less,
            }) {
            Ok(k) => self.segments[k].eval(t),
            Err(_) => {
                if t >= self.t_end {
                    self.y_end.clone()
                } else {
                    self.segments
                        .first()
                        .map(|s| s.eval(s.t0))
                        .unwrap_or_else(|| self.y_end.clone())
                }
            }
        }
    }

    /// First root of `g(y(t))` located by bisection on the dense output,
    /// scanning `samples_per_segment` points per accepted step.
    pub fn first_root<G: Fn(&[f64]) -> f64>(
        &self,
        g: G,
        samples_per_segment: usize,
        t_tol: f64,
    ) -> Option<f64> {
        let mut t_prev = self.t_start();
        let mut g_prev = g(&self.eval(t_prev));
        if g_prev == 0.0 {
            return Some(t_prev);
        }
        for seg in &self.segments {
            for k in 1..=samples_per_segment {
                let t = seg.t0 + (seg.t1 - seg.t0) * k as f64 / samples_per_segment as f64;
                let gv = g(&seg.eval(t));
                if gv == 0.0 {
                    return Some(t);
                }
                if g_prev.signum() != gv.signum() {
                    let (mut lo, mut hi, mut glo) = (t_prev, t, g_prev);
                    while hi - lo > t_tol {
                        let mid = 0.5 * (lo + hi);
                        let gm = g(&self.eval(mid));
                        if gm == 0.0 {
                            return Some(mid);
                        }
                        if glo.signum() != gm.signum() {
                            hi = mid;
                        } else {
                            lo = mid;
                            glo = gm;
                        }
                    }
                    return Some(0.5 * (lo + hi));
                }
                t_prev = t;
                g_prev = gv;
            }
        }
        None
    }
}

/// Integrate `dy/dt = f(t, y)` from `t0` to `t1`, keeping the dense output.
///
/// The right-hand side may fail (e.g. on a domain boundary); a failed
/// evaluation rejects the step and retries with a smaller one, so transient
/// excursions outside the domain during trial steps are harmless.
pub fn integrate<F>(f: F, t0: f64, t1: f64, y0: &[f64], opts: &OdeOptions) -> Result<DenseSolution>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
{
    let mut segments = Vec::new();
    let (t_end, y_end, n_steps, n_rejected) =
        integrate_with(f, t0, t1, y0, opts, |seg| segments.push(seg.clone()))?;
    Ok(DenseSolution {
        segments,
        t_end,
        y_end,
        n_steps,
        n_rejected,
    })
}

/// Integrate and sample the solution at the given increasing `times`,
/// without retaining the dense output. `observer` is called once per sample.
pub fn integrate_sampled<F, O>(
    f: F,
    y0: &[f64],
    times: &[f64],
    opts: &OdeOptions,
    mut observer: O,
) -> Result<()>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
    O: FnMut(f64, &[f64]),
{
    if times.is_empty() {
        return Ok(());
    }
    let t0 = times[0];
    let t1 = *times.last().unwrap();
    observer(t0, y0);
    let mut next = 1usize;
    if t1 == t0 {
        return Ok(());
    }
    let mut buf = vec![0.0; y0.len()];
    integrate_with(f, t0, t1, y0, opts, |seg| {
        while next < times.len() && times[next] <= seg.t1 {
            seg.eval_into(times[next], &mut buf);
            observer(times[next], &buf);
            next += 1;
        }
    })?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn exponential_decay_matches_closed_form() {
        let opts = OdeOptions::default();
        let sol = integrate(
            |_t, y, dy| {
                dy[0] = -0.7 * y[0];
                Ok(())
            },
            0.0,
            10.0,
            &[2.0],
            &opts,
        )
        .unwrap();
        assert_relative_eq!(sol.y_end[0], 2.0 * (-7.0f64).exp(), max_relative = 1e-9);
        let y_mid = sol.eval(3.2)[0];
        assert_relative_eq!(y_mid, 2.0 * (-0.7f64 * 3.2).exp(), max_relative = 1e-8);
    }

    #[test]
    fn harmonic_oscillator_conserves_energy() {
        let opts = OdeOptions {
            rtol: 1e-12,
            atol: 1e-14,
            ..Default::default()
        };
        let sol = integrate(
            |_t, y, dy| {
                dy[0] = y[1];
                dy[1] = -y[0];
                Ok(())
            },
            0.0,
            50.0,
            &[1.0, 0.0],
            &opts,
        )
        .unwrap();
        let e = sol.y_end[0].powi(2) + sol.y_end[1].powi(2);
        assert_relative_eq!(e, 1.0, max_relative = 1e-9);
    }

    #[test]
    fn first_root_finds_cosine_zero() {
        let opts = OdeOptions::default();
        let sol = integrate(
            |_t, y, dy| {
                dy[0] = y[1];
                dy[1] = -y[0];
                Ok(())
            },
            0.0,
            5.0,
            &[1.0, 0.0],
            &opts,
        )
        .unwrap();
        let root = sol.first_root(|y| y[0], 8, 1e-11).unwrap();
        assert_relative_eq!(root, std::f64::consts::FRAC_PI_2, epsilon = 1e-9);
    }

    #[test]
    fn sampled_integration_hits_grid_points() {
        let times: Vec<f64> = (0..=40).map(|k| k as f64 * 0.25).collect();
        let mut got = Vec::new();
        integrate_sampled(
            |_t, y, dy| {
                dy[0] = -y[0];
                Ok(())
            },
            &[1.0],
            &times,
            &OdeOptions::default(),
            |t, y| got.push((t, y[0])),
        )
        .unwrap();
        assert_eq!(got.len(), times.len());
        for &(t, y) in &got {
            assert_relative_eq!(y, (-t).exp(), max_relative = 1e-8);
        }
    }

    #[test]
    fn failing_rhs_near_boundary_shrinks_the_step() {
        // integrand defined only for y < 1; solution approaches it slowly
        let opts = OdeOptions::default();
        let sol = integrate(
            |_t, y, dy| {
                if y[0] >= 1.0 {
                    return Err(crate::error::DimerError::BoundarySingularity { z: y[0], n: 1.0 });
                }
                dy[0] = 0.1 * (1.0 - y[0]);
                Ok(())
            },
            0.0,
            20.0,
            &[0.0],
            &opts,
        )
        .unwrap();
        assert!(sol.y_end[0] < 1.0);
        assert_relative_eq!(sol.y_end[0], 1.0 - (-2.0f64).exp(), max_relative = 1e-8);
    }
}
