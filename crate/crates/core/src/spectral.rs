//! Full spectral decomposition of Liouvillian blocks, steady-state
//! extraction, and dissipative dynamics via the eigenmode expansion
//! `rho(t) = sum_a e^{L_a t} <l_a|rho(0)> |r_a>`.

use faer::linalg::solvers::DenseSolveCore;
use faer::Mat;
use num_complex::Complex64 as C64;

use crate::error::{DimerError, Result};
use crate::fock::{number_operator, FockBasis, OperatorMatrix, Site};
use crate::liouvillian::{LiouvillianBlock, SuperOp, VectorizedIndex};
use crate::ode::{integrate_sampled, OdeOptions};
use crate::par;

/// Bi-orthogonality residual above which a decomposition is rejected.
pub const BIORTH_RESIDUAL_LIMIT: f64 = 1e-6;
/// Relative tolerance identifying the zero mode of the nu = 0 sector.
pub const ZERO_MODE_RELATIVE_TOL: f64 = 1e-9;

/// Conditioning diagnostics of one block decomposition.
#[derive(Debug, Clone, Copy)]
pub struct ConditionReport {
    /// Largest entry of `L R - 1` over the block.
    pub max_biorth_residual: f64,
    /// Largest eigenvalue real part (should not exceed roundoff).
    pub max_real_part: f64,
    pub spectral_radius: f64,
}

/// Bi-normalized eigensystem of one gauge-sector block.
///
/// Right eigenvectors are the columns of `right`; left eigenvectors are the
/// rows of `left`, obtained by inverting the right-eigenvector matrix in one
/// LU solve. The construction pairs left and right vectors consistently and
/// keeps `<l_a|r_b> = delta_ab` down to solver roundoff, degenerate clusters
/// included, as long as the right eigenbasis itself is well conditioned;
/// `condition` records the residual actually achieved.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    nu: i64,
    pairs: Vec<VectorizedIndex>,
    eigenvalues: Vec<C64>,
    right: Mat<C64>,
    left: Mat<C64>,
    condition: ConditionReport,
}

impl SpectralDecomposition {
    pub fn nu(&self) -> i64 {
        self.nu
    }

    pub fn size(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn pairs(&self) -> &[VectorizedIndex] {
        &self.pairs
    }

    pub fn eigenvalues(&self) -> &[C64] {
        &self.eigenvalues
    }

    pub fn right(&self) -> &Mat<C64> {
        &self.right
    }

    pub fn left(&self) -> &Mat<C64> {
        &self.left
    }

    pub fn condition(&self) -> ConditionReport {
        self.condition
    }

    /// Indices of eigenvalues inside the zero-mode tolerance.
    pub fn zero_modes(&self) -> Vec<usize> {
        let tol = ZERO_MODE_RELATIVE_TOL * self.condition.spectral_radius;
        self.eigenvalues
            .iter()
            .enumerate()
            .filter(|(_, l)| l.norm() < tol)
            .map(|(k, _)| k)
            .collect()
    }

    /// `<l_a|v>` for every mode, with `v` over this block's pairs.
    pub fn project(&self, v: &[C64]) -> Vec<C64> {
        assert_eq!(v.len(), self.size());
        let n = self.size();
        (0..n)
            .map(|a| (0..n).map(|p| self.left[(a, p)] * v[p]).sum())
            .collect()
    }

    /// `<I| X |r_a>` for every mode: the vectorized-identity functional after
    /// promoting `X` to a left multiplication.
    pub fn identity_functional(&self, x: &OperatorMatrix) -> Vec<C64> {
        // <I| L[X] |v> = sum_{j,k} X[j,k] v[(ket=k, bra=j)]
        let mut coeff = vec![C64::ZERO; self.size()];
        for (p, pair) in self.pairs.iter().enumerate() {
            coeff[p] = x.get(pair.bra, pair.ket);
        }
        let n = self.size();
        par::par_map_range(n, |a| (0..n).map(|p| coeff[p] * self.right[(p, a)]).sum())
    }

    /// `<l_a| X |rho>` for every mode: `rho` promoted through the left
    /// multiplication `rho -> X rho`, restricted to this block's sector.
    pub fn left_functional(&self, x: &OperatorMatrix, rho: &DensityMatrix) -> Vec<C64> {
        let u: Vec<C64> = self
            .pairs
            .iter()
            .map(|pair| {
                // (X rho)[ket, bra]
                (0..rho.dim())
                    .map(|k| x.get(pair.ket, k) * rho.mat()[(k, pair.bra)])
                    .sum()
            })
            .collect();
        self.project(&u)
    }
}

/// Diagonalize one Liouvillian block, producing bi-normalized left and right
/// eigenvectors.
pub fn diagonalize_block(block: &LiouvillianBlock) -> Result<SpectralDecomposition> {
    let n = block.size();
    let evd = block
        .matrix
        .eigen()
        .map_err(|e| DimerError::Eigensolver(format!("{e:?}")))?;
    let right = evd.U().to_owned();
    let eigenvalues: Vec<C64> = (0..n).map(|k| evd.S()[k]).collect();
    let left = right.partial_piv_lu().inverse();

    let product = &left * &right;
    let mut max_biorth_residual = 0.0f64;
    for r in 0..n {
        for c in 0..n {
            let expected = if r == c {
                C64::new(1.0, 0.0)
            } else {
                C64::ZERO
            };
            max_biorth_residual = max_biorth_residual.max((product[(r, c)] - expected).norm());
        }
    }
    if max_biorth_residual > BIORTH_RESIDUAL_LIMIT {
        return Err(DimerError::IllConditionedSpectrum {
            residual: max_biorth_residual,
            limit: BIORTH_RESIDUAL_LIMIT,
        });
    }

    let max_real_part = eigenvalues
        .iter()
        .map(|l| l.re)
        .fold(f64::NEG_INFINITY, f64::max);
    let spectral_radius = eigenvalues.iter().map(|l| l.norm()).fold(0.0, f64::max);

    Ok(SpectralDecomposition {
        nu: block.nu,
        pairs: block.pairs.clone(),
        eigenvalues,
        right,
        left,
        condition: ConditionReport {
            max_biorth_residual,
            max_real_part,
            spectral_radius,
        },
    })
}

/// Diagonalize several blocks, in parallel when the `parallel` feature is on.
pub fn diagonalize_blocks(blocks: &[LiouvillianBlock]) -> Result<Vec<SpectralDecomposition>> {
    par::par_map(blocks, diagonalize_block)
        .into_iter()
        .collect()
}

/// Dense Hilbert-space density matrix.
#[derive(Debug, Clone)]
pub struct DensityMatrix {
    mat: Mat<C64>,
}

impl DensityMatrix {
    pub fn from_matrix(mat: Mat<C64>) -> Self {
        assert_eq!(mat.nrows(), mat.ncols());
        Self { mat }
    }

    /// Pure Fock state `|n_l, n_r><n_l, n_r|`.
    pub fn from_fock_state(basis: &FockBasis, n_l: usize, n_r: usize) -> Result<Self> {
        let k = basis.index_of(n_l, n_r).ok_or_else(|| {
            DimerError::InvalidArgument(format!(
                "Fock state |{n_l}, {n_r}> lies outside cutoff {}",
                basis.cutoff()
            ))
        })?;
        let mut mat = Mat::<C64>::zeros(basis.dim(), basis.dim());
        mat[(k, k)] = C64::new(1.0, 0.0);
        Ok(Self { mat })
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn mat(&self) -> &Mat<C64> {
        &self.mat
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim()).map(|k| self.mat[(k, k)]).sum()
    }

    /// `Tr(op * rho)`.
    pub fn expectation(&self, op: &OperatorMatrix) -> C64 {
        let mut acc = C64::ZERO;
        for (i, k, v) in op.iter() {
            acc += v * self.mat[(k, i)];
        }
        acc
    }

    pub fn hermiticity_residual(&self) -> f64 {
        let mut max = 0.0f64;
        for i in 0..self.dim() {
            for j in i..self.dim() {
                max = max.max((self.mat[(i, j)] - self.mat[(j, i)].conj()).norm());
            }
        }
        max
    }

    /// Smallest eigenvalue of the Hermitized matrix.
    pub fn min_eigenvalue(&self) -> f64 {
        let h = self.hermitized();
        let evd = h
            .self_adjoint_eigen(faer::Side::Lower)
            .expect("self-adjoint eigendecomposition of a finite matrix");
        (0..self.dim())
            .map(|k| evd.S()[k].re)
            .fold(f64::INFINITY, f64::min)
    }

    fn hermitized(&self) -> Mat<C64> {
        let n = self.dim();
        Mat::from_fn(n, n, |i, j| {
            0.5 * (self.mat[(i, j)] + self.mat[(j, i)].conj())
        })
    }

    /// Trace distance `(1/2) || rho - other ||_1`.
    pub fn trace_distance(&self, other: &Self) -> f64 {
        assert_eq!(self.dim(), other.dim());
        let n = self.dim();
        let diff = Mat::from_fn(n, n, |i, j| {
            let d = self.mat[(i, j)] - other.mat[(i, j)];
            let dt = (self.mat[(j, i)] - other.mat[(j, i)]).conj();
            0.5 * (d + dt)
        });
        let evd = diff
            .self_adjoint_eigen(faer::Side::Lower)
            .expect("self-adjoint eigendecomposition of a finite matrix");
        0.5 * (0..n).map(|k| evd.S()[k].re.abs()).sum::<f64>()
    }

    /// Restriction of the vectorized matrix to a list of pairs.
    pub fn vectorize_onto(&self, pairs: &[VectorizedIndex]) -> Vec<C64> {
        pairs.iter().map(|p| self.mat[(p.ket, p.bra)]).collect()
    }

    /// Total weight on vectorized elements outside the given sector.
    pub fn off_sector_weight(&self, basis: &FockBasis, nu: i64) -> f64 {
        let mut acc = 0.0;
        for ket in 0..self.dim() {
            for bra in 0..self.dim() {
                let s = basis.total_photons(ket) as i64 - basis.total_photons(bra) as i64;
                if s != nu {
                    acc += self.mat[(ket, bra)].norm();
                }
            }
        }
        acc
    }
}

/// Unique steady state of the nu = 0 sector: the zero-mode right eigenvector,
/// devectorized, Hermitized and normalized to unit trace.
pub fn steady_state(decomp: &SpectralDecomposition, basis: &FockBasis) -> Result<DensityMatrix> {
    if decomp.nu != 0 {
        return Err(DimerError::InvalidArgument(format!(
            "steady state lives in sector 0, got a decomposition of sector {}",
            decomp.nu
        )));
    }
    let zeros = decomp.zero_modes();
    if zeros.len() != 1 {
        return Err(DimerError::DegenerateSteadyState(zeros.len()));
    }
    let mode = zeros[0];

    let dim = basis.dim();
    let mut mat = Mat::<C64>::zeros(dim, dim);
    for (p, pair) in decomp.pairs.iter().enumerate() {
        mat[(pair.ket, pair.bra)] = decomp.right[(p, mode)];
    }
    // roundoff breaks exact Hermiticity; restore it before normalizing
    let mut rho = Mat::from_fn(dim, dim, |i, j| 0.5 * (mat[(i, j)] + mat[(j, i)].conj()));
    let trace: C64 = (0..dim).map(|k| rho[(k, k)]).sum();
    if trace.norm() < 1e-300 {
        return Err(DimerError::Eigensolver(
            "zero-mode eigenvector has vanishing trace".into(),
        ));
    }
    let inv = C64::new(1.0, 0.0) / trace;
    for i in 0..dim {
        for j in 0..dim {
            rho[(i, j)] *= inv;
        }
    }
    Ok(DensityMatrix::from_matrix(rho))
}

/// Named observable series along a time grid.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub n_l: Vec<f64>,
    pub n_r: Vec<f64>,
    pub z: Vec<f64>,
    pub n_total: Vec<f64>,
}

impl Trajectory {
    fn from_occupations(times: Vec<f64>, n_l: Vec<f64>, n_r: Vec<f64>) -> Self {
        let z = n_l.iter().zip(&n_r).map(|(l, r)| l - r).collect();
        let n_total = n_l.iter().zip(&n_r).map(|(l, r)| l + r).collect();
        Self {
            times,
            n_l,
            n_r,
            z,
            n_total,
        }
    }
}

fn check_time_grid(times: &[f64]) -> Result<()> {
    if times.is_empty() {
        return Err(DimerError::InvalidArgument("empty time grid".into()));
    }
    if times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(DimerError::InvalidArgument(
            "time grid must be strictly increasing".into(),
        ));
    }
    Ok(())
}

fn check_initial_state(
    decomp: &SpectralDecomposition,
    basis: &FockBasis,
    rho0: &DensityMatrix,
) -> Result<()> {
    if decomp.nu != 0 {
        return Err(DimerError::InvalidArgument(
            "time evolution requires the nu = 0 decomposition".into(),
        ));
    }
    if rho0.dim() != basis.dim() {
        return Err(DimerError::InvalidArgument(
            "initial state dimension does not match the basis".into(),
        ));
    }
    let off = rho0.off_sector_weight(basis, 0);
    if off > 1e-12 {
        return Err(DimerError::InvalidArgument(format!(
            "initial state has weight {off:.3e} outside the nu = 0 sector; \
             evolving it needs those sectors too"
        )));
    }
    Ok(())
}

/// Spectral-expansion time evolution of the cavity occupations.
pub fn evolve(
    decomp: &SpectralDecomposition,
    basis: &FockBasis,
    rho0: &DensityMatrix,
    times: &[f64],
) -> Result<Trajectory> {
    check_time_grid(times)?;
    check_initial_state(decomp, basis, rho0)?;

    let coeffs = decomp.project(&rho0.vectorize_onto(&decomp.pairs));
    let w_l = decomp.identity_functional(&number_operator(basis, Site::L));
    let w_r = decomp.identity_functional(&number_operator(basis, Site::R));

    let lambda = &decomp.eigenvalues;
    let occ: Vec<(f64, f64)> = par::par_map(times, |&t| {
        let mut l = C64::ZERO;
        let mut r = C64::ZERO;
        for a in 0..lambda.len() {
            let amp = coeffs[a] * (lambda[a] * t).exp();
            l += w_l[a] * amp;
            r += w_r[a] * amp;
        }
        (l.re, r.re)
    });
    let (n_l, n_r) = occ.into_iter().unzip();
    Ok(Trajectory::from_occupations(times.to_vec(), n_l, n_r))
}

/// Density matrix at a single time from the spectral expansion
/// (no Hermitization or renormalization applied).
pub fn propagate_density(
    decomp: &SpectralDecomposition,
    basis: &FockBasis,
    rho0: &DensityMatrix,
    t: f64,
) -> Result<DensityMatrix> {
    check_initial_state(decomp, basis, rho0)?;
    let coeffs = decomp.project(&rho0.vectorize_onto(&decomp.pairs));
    let dim = basis.dim();
    let mut mat = Mat::<C64>::zeros(dim, dim);
    for (p, pair) in decomp.pairs.iter().enumerate() {
        let mut v = C64::ZERO;
        for (a, coeff) in coeffs.iter().enumerate() {
            v += coeff * (decomp.eigenvalues[a] * t).exp() * decomp.right[(p, a)];
        }
        mat[(pair.ket, pair.bra)] = v;
    }
    Ok(DensityMatrix::from_matrix(mat))
}

/// Direct-integration result with conservation diagnostics.
#[derive(Debug, Clone)]
pub struct DirectEvolution {
    pub trajectory: Trajectory,
    pub max_trace_deviation: f64,
    pub max_hermiticity_residual: f64,
}

/// Independent verification path: integrate `d rho/dt = L rho` directly on
/// the vectorized density matrix with the adaptive 5(4) pair.
///
/// Cost grows as the fourth power of the cutoff, so this oracle is
/// restricted to small truncations.
pub fn evolve_direct(
    sop: &SuperOp,
    basis: &FockBasis,
    rho0: &DensityMatrix,
    times: &[f64],
    rtol: f64,
) -> Result<DirectEvolution> {
    check_time_grid(times)?;
    if basis.cutoff() > 6 {
        return Err(DimerError::InvalidArgument(
            "direct integration oracle is limited to cutoff <= 6".into(),
        ));
    }
    let dim = basis.dim();
    let vdim = dim * dim;

    // complex state packed as [re..., im...]
    let mut y0 = vec![0.0; 2 * vdim];
    for ket in 0..dim {
        for bra in 0..dim {
            let v = ket * dim + bra;
            let z = rho0.mat()[(ket, bra)];
            y0[v] = z.re;
            y0[vdim + v] = z.im;
        }
    }

    let mut zbuf = vec![C64::ZERO; vdim];
    let mut dzbuf = vec![C64::ZERO; vdim];
    let opts = OdeOptions {
        rtol,
        atol: rtol * 1e-2,
        ..Default::default()
    };

    let mut n_l = Vec::with_capacity(times.len());
    let mut n_r = Vec::with_capacity(times.len());
    let mut max_trace_dev = 0.0f64;
    let mut max_herm = 0.0f64;
    let num_l = number_operator(basis, Site::L);
    let num_r = number_operator(basis, Site::R);

    integrate_sampled(
        |_t, y, dy| {
            for v in 0..vdim {
                zbuf[v] = C64::new(y[v], y[vdim + v]);
            }
            sop.apply(&zbuf, &mut dzbuf);
            for v in 0..vdim {
                dy[v] = dzbuf[v].re;
                dy[vdim + v] = dzbuf[v].im;
            }
            Ok(())
        },
        &y0,
        times,
        &opts,
        |_t, y| {
            let rho: Vec<C64> = (0..vdim).map(|v| C64::new(y[v], y[vdim + v])).collect();
            let trace: C64 = (0..dim).map(|k| rho[k * dim + k]).sum();
            max_trace_dev = max_trace_dev.max((trace - C64::new(1.0, 0.0)).norm());
            for i in 0..dim {
                for j in i..dim {
                    max_herm = max_herm.max((rho[i * dim + j] - rho[j * dim + i].conj()).norm());
                }
            }
            n_l.push(num_l.trace_with(&rho).re);
            n_r.push(num_r.trace_with(&rho).re);
        },
    )?;

    Ok(DirectEvolution {
        trajectory: Trajectory::from_occupations(times.to_vec(), n_l, n_r),
        max_trace_deviation: max_trace_dev,
        max_hermiticity_residual: max_herm,
    })
}

/// Time-averaged imbalance `(1/(t1 - t0)) \int Z dt` by trapezoid on the
/// stored grid, with linear interpolation at the window edges.
pub fn time_averaged_imbalance(traj: &Trajectory, t0: f64, t1: f64) -> Result<f64> {
    let times = &traj.times;
    if t1 <= t0 || t0 < times[0] - 1e-12 || t1 > times[times.len() - 1] + 1e-12 {
        return Err(DimerError::InvalidArgument(format!(
            "window [{t0}, {t1}] not inside the trajectory support"
        )));
    }
    let z_at = |t: f64| -> f64 {
        match times.binary_search_by(|x| x.partial_cmp(&t).unwrap()) {
            Ok(k) => traj.z[k],
            Err(k) => {
                let (k0, k1) = (k - 1, k.min(times.len() - 1));
                let w = (t - times[k0]) / (times[k1] - times[k0]);
                traj.z[k0] * (1.0 - w) + traj.z[k1] * w
            }
        }
    };
    let mut acc = 0.0;
    let mut t_prev = t0;
    let mut z_prev = z_at(t0);
    for (k, &t) in times.iter().enumerate() {
        if t <= t0 || t >= t1 {
            continue;
        }
        acc += 0.5 * (z_prev + traj.z[k]) * (t - t_prev);
        t_prev = t;
        z_prev = traj.z[k];
    }
    acc += 0.5 * (z_prev + z_at(t1)) * (t1 - t_prev);
    Ok(acc / (t1 - t0))
}

/// How the late-time decay rate is extracted from `Z(t)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecayFit {
    /// Least-squares slope of `ln |Z(t)|`; rejected if `Z` changes sign
    /// inside the window.
    LogSlope,
    /// Least-squares slope through the local maxima of `ln |Z(t)|`, immune
    /// to zero crossings of underdamped oscillations.
    Envelope,
}

/// Default fit window: the last decade of the grid where `|Z|` is resolvable.
pub fn default_fit_window(traj: &Trajectory) -> (f64, f64) {
    let t_end = traj
        .times
        .iter()
        .zip(&traj.z)
        .rev()
        .find(|(_, z)| z.abs() > 1e-12)
        .map(|(t, _)| *t)
        .unwrap_or(*traj.times.last().unwrap());
    (t_end / 10.0, t_end)
}

/// Fitted exponential decay rate of the imbalance over `[t0, t1]`.
pub fn late_decay_rate(traj: &Trajectory, t0: f64, t1: f64, fit: DecayFit) -> Result<f64> {
    let mut pts: Vec<(f64, f64)> = Vec::new();
    match fit {
        DecayFit::LogSlope => {
            let mut sign = 0.0f64;
            for (k, &t) in traj.times.iter().enumerate() {
                if t < t0 || t > t1 {
                    continue;
                }
                let z = traj.z[k];
                if z.abs() <= 1e-12 {
                    continue;
                }
                if sign == 0.0 {
                    sign = z.signum();
                } else if z.signum() != sign {
                    return Err(DimerError::FitRejected(
                        "Z(t) crosses zero inside the fit window; use the envelope fit".into(),
                    ));
                }
                pts.push((t, z.abs().ln()));
            }
        }
        DecayFit::Envelope => {
            for k in 1..traj.times.len().saturating_sub(1) {
                let t = traj.times[k];
                if t < t0 || t > t1 {
                    continue;
                }
                let (a, b, c) = (traj.z[k - 1].abs(), traj.z[k].abs(), traj.z[k + 1].abs());
                if b >= a && b >= c && b > 1e-12 {
                    pts.push((t, b.ln()));
                }
            }
        }
    }
    if pts.len() < 2 {
        return Err(DimerError::FitRejected(format!(
            "only {} usable points in the fit window",
            pts.len()
        )));
    }
    // least squares slope
    let n = pts.len() as f64;
    let (st, sy): (f64, f64) = pts.iter().fold((0.0, 0.0), |(a, b), (t, y)| (a + t, b + y));
    let (tm, ym) = (st / n, sy / n);
    let (mut num, mut den) = (0.0, 0.0);
    for (t, y) in &pts {
        num += (t - tm) * (y - ym);
        den += (t - tm) * (t - tm);
    }
    if den == 0.0 {
        return Err(DimerError::FitRejected("degenerate fit window".into()));
    }
    Ok(-(num / den))
}
