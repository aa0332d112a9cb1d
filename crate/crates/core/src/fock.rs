//! Truncated two-mode Fock space and the Hilbert-space operators built on it:
//! ladder operators, number operators, the dimer Hamiltonian, and the kinetic
//! and current observables.

use num_complex::Complex64 as C64;

use crate::error::{DimerError, Result};

/// One of the two cavities.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Site {
    L,
    R,
}

impl Site {
    pub fn other(self) -> Self {
        match self {
            Site::L => Site::R,
            Site::R => Site::L,
        }
    }
}

/// Two-mode Fock basis with a per-mode photon cutoff.
///
/// States are ordered lexicographically in `(n_l, n_r)`, which makes the
/// enumeration deterministic and regression tests byte-stable.
#[derive(Debug, Clone)]
pub struct FockBasis {
    cutoff: usize,
    states: Vec<(usize, usize)>,
    index: Vec<usize>,
}

impl FockBasis {
    /// Enumerate all `(cutoff + 1)^2` Fock states `|n_l, n_r>`.
    pub fn enumerate(cutoff: usize) -> Result<Self> {
        if cutoff < 1 {
            return Err(DimerError::InvalidArgument(format!(
                "cutoff must be at least 1, got {cutoff}"
            )));
        }
        let per_mode = cutoff + 1;
        let mut states = Vec::with_capacity(per_mode * per_mode);
        let mut index = vec![0usize; per_mode * per_mode];
        for n_l in 0..per_mode {
            for n_r in 0..per_mode {
                index[n_l * per_mode + n_r] = states.len();
                states.push((n_l, n_r));
            }
        }
        Ok(Self {
            cutoff,
            states,
            index,
        })
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    /// Hilbert-space dimension `(cutoff + 1)^2`.
    pub fn dim(&self) -> usize {
        self.states.len()
    }

    pub fn states(&self) -> &[(usize, usize)] {
        &self.states
    }

    /// Dense index of `|n_l, n_r>`, or `None` outside the truncation.
    pub fn index_of(&self, n_l: usize, n_r: usize) -> Option<usize> {
        if n_l > self.cutoff || n_r > self.cutoff {
            return None;
        }
        Some(self.index[n_l * (self.cutoff + 1) + n_r])
    }

    /// Total photon number of the state at dense index `k`.
    pub fn total_photons(&self, k: usize) -> usize {
        let (n_l, n_r) = self.states[k];
        n_l + n_r
    }

    pub fn occupation(&self, k: usize, site: Site) -> usize {
        let (n_l, n_r) = self.states[k];
        match site {
            Site::L => n_l,
            Site::R => n_r,
        }
    }

    /// Dense index obtained by swapping the two modes of state `k`.
    pub fn swapped_index(&self, k: usize) -> usize {
        let (n_l, n_r) = self.states[k];
        self.index_of(n_r, n_l).unwrap()
    }
}

/// Hamiltonian and dissipative couplings of the dimer.
///
/// Loss rates must strictly dominate the pump rates on both sites; outside
/// that regime single-particle jump operators stop being a valid description
/// and construction fails.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DimerParams {
    pub omega0: f64,
    pub u: f64,
    pub j: f64,
    pub gamma_l: f64,
    pub gamma_r: f64,
    pub pump_l: f64,
    pub pump_r: f64,
}

impl DimerParams {
    pub fn new(
        omega0: f64,
        u: f64,
        j: f64,
        gamma_l: f64,
        gamma_r: f64,
        pump_l: f64,
        pump_r: f64,
    ) -> Result<Self> {
        let params = Self {
            omega0,
            u,
            j,
            gamma_l,
            gamma_r,
            pump_l,
            pump_r,
        };
        params.validate()?;
        Ok(params)
    }

    /// Site-symmetric rates: `gamma` and `pump` on both cavities.
    pub fn symmetric(omega0: f64, u: f64, j: f64, gamma: f64, pump: f64) -> Result<Self> {
        Self::new(omega0, u, j, gamma, gamma, pump, pump)
    }

    fn validate(&self) -> Result<()> {
        for v in [
            self.omega0,
            self.u,
            self.j,
            self.gamma_l,
            self.gamma_r,
            self.pump_l,
            self.pump_r,
        ] {
            if !v.is_finite() {
                return Err(DimerError::InvalidArgument(
                    "non-finite dimer parameter".into(),
                ));
            }
        }
        for (site, gamma, pump) in [
            ("L", self.gamma_l, self.pump_l),
            ("R", self.gamma_r, self.pump_r),
        ] {
            if gamma < 0.0 || pump < 0.0 {
                return Err(DimerError::InvalidArgument(format!(
                    "negative rate on site {site}"
                )));
            }
            if pump >= gamma {
                return Err(DimerError::InvalidArgument(format!(
                    "pump must stay below loss on site {site}: P = {pump}, Gamma = {gamma}"
                )));
            }
        }
        Ok(())
    }

    pub fn gamma(&self, site: Site) -> f64 {
        match site {
            Site::L => self.gamma_l,
            Site::R => self.gamma_r,
        }
    }

    pub fn pump(&self, site: Site) -> f64 {
        match site {
            Site::L => self.pump_l,
            Site::R => self.pump_r,
        }
    }

    /// Mean loss rate `(Gamma_L + Gamma_R) / 2`.
    pub fn gamma_mean(&self) -> f64 {
        0.5 * (self.gamma_l + self.gamma_r)
    }

    /// Loss asymmetry `Gamma_L - Gamma_R`.
    pub fn gamma_diff(&self) -> f64 {
        self.gamma_l - self.gamma_r
    }

    /// Mean pump rate `(P_L + P_R) / 2`.
    pub fn pump_mean(&self) -> f64 {
        0.5 * (self.pump_l + self.pump_r)
    }

    /// Pump asymmetry `P_L - P_R`.
    pub fn pump_diff(&self) -> f64 {
        self.pump_l - self.pump_r
    }

    /// Effective loss rate `Gamma_i - P_i`.
    pub fn gamma_eff(&self, site: Site) -> f64 {
        self.gamma(site) - self.pump(site)
    }

    pub fn is_symmetric(&self) -> bool {
        self.gamma_diff() == 0.0 && self.pump_diff() == 0.0
    }
}

/// Sparse complex matrix over a Fock basis, stored row-wise with sorted
/// column indices.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorMatrix {
    dim: usize,
    rows: Vec<Vec<(usize, C64)>>,
}

impl OperatorMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            rows: vec![Vec::new(); dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.rows[i].push((i, C64::new(1.0, 0.0)));
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    /// Add `value` to entry `(row, col)`, keeping columns sorted.
    pub fn add_entry(&mut self, row: usize, col: usize, value: C64) {
        if value == C64::ZERO {
            return;
        }
        let entries = &mut self.rows[row];
        match entries.binary_search_by_key(&col, |&(c, _)| c) {
            Ok(pos) => entries[pos].1 += value,
            Err(pos) => entries.insert(pos, (col, value)),
        }
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.rows[row]
            .binary_search_by_key(&col, |&(c, _)| c)
            .map(|pos| self.rows[row][pos].1)
            .unwrap_or(C64::ZERO)
    }

    /// Iterate over all stored entries as `(row, col, value)`.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, C64)> + '_ {
        self.rows
            .iter()
            .enumerate()
            .flat_map(|(r, cols)| cols.iter().map(move |&(c, v)| (r, c, v)))
    }

    /// Conjugate transpose.
    pub fn dagger(&self) -> Self {
        let mut out = Self::zeros(self.dim);
        for (r, c, v) in self.iter() {
            out.add_entry(c, r, v.conj());
        }
        out
    }

    pub fn scaled(&self, factor: C64) -> Self {
        let mut out = self.clone();
        for row in &mut out.rows {
            for (_, v) in row.iter_mut() {
                *v *= factor;
            }
        }
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim);
        let mut out = self.clone();
        for (r, c, v) in other.iter() {
            out.add_entry(r, c, v);
        }
        out
    }

    /// Matrix product `self * other`.
    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim);
        let mut out = Self::zeros(self.dim);
        for r in 0..self.dim {
            for &(k, a) in &self.rows[r] {
                for &(c, b) in &other.rows[k] {
                    out.add_entry(r, c, a * b);
                }
            }
        }
        out
    }

    /// `Tr(self * rho)` for a dense `rho` given as a row-major slice.
    pub fn trace_with(&self, rho: &[C64]) -> C64 {
        debug_assert_eq!(rho.len(), self.dim * self.dim);
        let mut acc = C64::ZERO;
        for (i, k, a) in self.iter() {
            acc += a * rho[k * self.dim + i];
        }
        acc
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        for (r, c, v) in self.iter() {
            if (v - self.get(c, r).conj()).norm() > tol {
                return false;
            }
        }
        true
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        let mut max = 0.0f64;
        for (r, c, v) in self.iter() {
            max = max.max((v - other.get(r, c)).norm());
        }
        for (r, c, v) in other.iter() {
            max = max.max((v - self.get(r, c)).norm());
        }
        max
    }
}

/// Annihilation operator for one mode: `<n_l - 1, n_r| a_L |n_l, n_r> = sqrt(n_l)`
/// (mirrored for the right mode). Transitions out of the truncated space are
/// dropped.
pub fn annihilation(basis: &FockBasis, site: Site) -> OperatorMatrix {
    let mut op = OperatorMatrix::zeros(basis.dim());
    for (k, &(n_l, n_r)) in basis.states().iter().enumerate() {
        let (n, lowered) = match site {
            Site::L => (n_l, n_l.checked_sub(1).map(|m| (m, n_r))),
            Site::R => (n_r, n_r.checked_sub(1).map(|m| (n_l, m))),
        };
        if let Some((m_l, m_r)) = lowered {
            let row = basis.index_of(m_l, m_r).unwrap();
            op.add_entry(row, k, C64::new((n as f64).sqrt(), 0.0));
        }
    }
    op
}

/// Number operator `n_site` as a diagonal matrix.
pub fn number_operator(basis: &FockBasis, site: Site) -> OperatorMatrix {
    let mut op = OperatorMatrix::zeros(basis.dim());
    for k in 0..basis.dim() {
        let n = basis.occupation(k, site) as f64;
        op.add_entry(k, k, C64::new(n, 0.0));
    }
    op
}

/// Dimer Hamiltonian
/// `H = omega0 (n_L + n_R) + U (n_L^2 + n_R^2) + J (a_L^+ a_R + a_R^+ a_L)`.
pub fn build_hamiltonian(basis: &FockBasis, params: &DimerParams) -> OperatorMatrix {
    let mut h = OperatorMatrix::zeros(basis.dim());
    for (k, &(n_l, n_r)) in basis.states().iter().enumerate() {
        let n_l = n_l as f64;
        let n_r = n_r as f64;
        let diag = params.omega0 * (n_l + n_r) + params.u * (n_l * n_l + n_r * n_r);
        h.add_entry(k, k, C64::new(diag, 0.0));
    }
    let a_l = annihilation(basis, Site::L);
    let a_r = annihilation(basis, Site::R);
    let hop = a_l.dagger().matmul(&a_r);
    let j = C64::new(params.j, 0.0);
    h = h.add(&hop.scaled(j));
    h = h.add(&hop.dagger().scaled(j));
    h
}

/// Kinetic-energy operator `T = J (a_L^+ a_R + a_R^+ a_L)`.
pub fn kinetic_operator(basis: &FockBasis, j: f64) -> OperatorMatrix {
    let a_l = annihilation(basis, Site::L);
    let a_r = annihilation(basis, Site::R);
    let hop = a_l.dagger().matmul(&a_r);
    hop.scaled(C64::new(j, 0.0))
        .add(&hop.dagger().scaled(C64::new(j, 0.0)))
}

/// Current operator `I = -i J (a_R^+ a_L - a_L^+ a_R)`, flowing from L to R.
pub fn current_operator(basis: &FockBasis, j: f64) -> OperatorMatrix {
    let a_l = annihilation(basis, Site::L);
    let a_r = annihilation(basis, Site::R);
    let lr = a_r.dagger().matmul(&a_l);
    let m = lr.add(&lr.dagger().scaled(C64::new(-1.0, 0.0)));
    m.scaled(C64::new(0.0, -j))
}

/// Single-site Kerr transition frequencies `Delta_n = omega0 + U + 2 U n`
/// for `n = 0..=n_max`, the expected spectral-peak ladder.
pub fn kerr_transition_frequencies(params: &DimerParams, n_max: usize) -> Vec<f64> {
    (0..=n_max)
        .map(|n| params.omega0 + params.u + 2.0 * params.u * n as f64)
        .collect()
}
