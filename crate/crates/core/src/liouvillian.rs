//! Vectorized Lindbladian assembly and its gauge-sector block structure.
//!
//! Density matrices are flattened with the pair `(ket, bra)` mapping to the
//! vectorized index `ket * dim + bra`. Under this convention a sandwich
//! `rho -> A rho B` becomes the Kronecker product `A (x) B^T`, so the
//! Hamiltonian part of the evolution is `-i (H (x) 1 - 1 (x) H^T)`. The same
//! convention fixes every operator promotion used by the Green's-function
//! weights, where plain `A` always means left multiplication `rho -> A rho`.
//!
//! The total-photon-number superoperator `[N, .]` commutes with the
//! Lindbladian, so the full matrix is block-diagonal over sectors labelled by
//! `nu = N(ket) - N(bra)`. Assembly is exact in exact arithmetic; any
//! cross-sector matrix element is an indexing bug and reported as an error
//! rather than rounded away.

use num_complex::Complex64 as C64;

use crate::error::{DimerError, Result};
use crate::fock::{annihilation, build_hamiltonian, DimerParams, FockBasis, OperatorMatrix, Site};
use crate::par;

/// Absolute magnitude above which a cross-sector element is treated as a bug.
pub const SECTOR_LEAKAGE_TOL: f64 = 1e-12;

/// One vectorized basis element `|ket><bra|`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VectorizedIndex {
    pub ket: usize,
    pub bra: usize,
    /// Gauge sector `N(ket) - N(bra)`.
    pub nu: i64,
}

/// Sparse superoperator over the vectorized space, stored as triplets.
#[derive(Debug, Clone)]
pub struct SuperOp {
    hilbert_dim: usize,
    triplets: Vec<(u32, u32, C64)>,
}

impl SuperOp {
    fn new(hilbert_dim: usize) -> Self {
        Self {
            hilbert_dim,
            triplets: Vec::new(),
        }
    }

    pub fn hilbert_dim(&self) -> usize {
        self.hilbert_dim
    }

    /// Dimension of the vectorized space, `hilbert_dim^2`.
    pub fn dim(&self) -> usize {
        self.hilbert_dim * self.hilbert_dim
    }

    pub fn triplets(&self) -> &[(u32, u32, C64)] {
        &self.triplets
    }

    fn vec_index(&self, ket: usize, bra: usize) -> u32 {
        (ket * self.hilbert_dim + bra) as u32
    }

    /// Accumulate the superoperator of `rho -> scale * A rho B`.
    fn add_sandwich(&mut self, a: &OperatorMatrix, b: &OperatorMatrix, scale: C64) {
        for (i, k, va) in a.iter() {
            for (l, j, vb) in b.iter() {
                let row = self.vec_index(i, j);
                let col = self.vec_index(k, l);
                self.triplets.push((row, col, scale * va * vb));
            }
        }
    }

    /// Accumulate `rho -> scale * A rho`.
    fn add_left(&mut self, a: &OperatorMatrix, scale: C64) {
        for (i, k, va) in a.iter() {
            for j in 0..self.hilbert_dim {
                let row = self.vec_index(i, j);
                let col = self.vec_index(k, j);
                self.triplets.push((row, col, scale * va));
            }
        }
    }

    /// Accumulate `rho -> scale * rho B`.
    fn add_right(&mut self, b: &OperatorMatrix, scale: C64) {
        for (l, j, vb) in b.iter() {
            for i in 0..self.hilbert_dim {
                let row = self.vec_index(i, j);
                let col = self.vec_index(i, l);
                self.triplets.push((row, col, scale * vb));
            }
        }
    }

    pub fn append(&mut self, other: SuperOp) {
        assert_eq!(self.hilbert_dim, other.hilbert_dim);
        self.triplets.extend(other.triplets);
    }

    /// Dense action on a vectorized density matrix.
    pub fn apply(&self, v: &[C64], out: &mut [C64]) {
        assert_eq!(v.len(), self.dim());
        assert_eq!(out.len(), self.dim());
        out.fill(C64::ZERO);
        for &(r, c, val) in &self.triplets {
            out[r as usize] += val * v[c as usize];
        }
    }

    /// Largest column sum against the vectorized identity, i.e. the residual
    /// of trace preservation `<I| L = 0`.
    pub fn identity_left_residual(&self) -> f64 {
        let mut col_sums = vec![C64::ZERO; self.dim()];
        let d = self.hilbert_dim;
        for &(r, c, val) in &self.triplets {
            let (ket, bra) = ((r as usize) / d, (r as usize) % d);
            if ket == bra {
                col_sums[c as usize] += val;
            }
        }
        col_sums.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

/// Superoperator of the Hermitian part, `rho -> -i [H, rho]`.
pub fn hamiltonian_superop(h: &OperatorMatrix) -> Result<SuperOp> {
    if !h.is_hermitian(1e-12) {
        return Err(DimerError::InvalidArgument(
            "Hamiltonian passed to the superoperator builder is not Hermitian".into(),
        ));
    }
    let dim = h.dim();
    let mut sop = SuperOp::new(dim);
    let minus_i = C64::new(0.0, -1.0);
    sop.add_left(h, minus_i);
    sop.add_right(h, -minus_i);
    Ok(sop)
}

/// Superoperator of the dissipator,
/// `rho -> 2 sum_i { Gamma_i D[a_i] rho + P_i D[a_i^+] rho }`,
/// with `D[c] rho = c rho c^+ - {c^+ c, rho} / 2`. The overall factor 2 is
/// part of the rate convention and kept exactly.
pub fn dissipator_superop(basis: &FockBasis, params: &DimerParams) -> SuperOp {
    let dim = basis.dim();
    let mut sop = SuperOp::new(dim);
    let one = C64::new(1.0, 0.0);
    for site in [Site::L, Site::R] {
        let a = annihilation(basis, site);
        let adag = a.dagger();
        let gamma = C64::new(2.0 * params.gamma(site), 0.0);
        let pump = C64::new(2.0 * params.pump(site), 0.0);

        if gamma != C64::ZERO {
            let n = adag.matmul(&a);
            sop.add_sandwich(&a, &adag, gamma);
            sop.add_left(&n, -0.5 * gamma * one);
            sop.add_right(&n, -0.5 * gamma * one);
        }
        if pump != C64::ZERO {
            let m = a.matmul(&adag);
            sop.add_sandwich(&adag, &a, pump);
            sop.add_left(&m, -0.5 * pump * one);
            sop.add_right(&m, -0.5 * pump * one);
        }
    }
    sop
}

/// Full Lindbladian as a sparse superoperator.
pub fn lindbladian_superop(basis: &FockBasis, params: &DimerParams) -> Result<SuperOp> {
    let h = build_hamiltonian(basis, params);
    let mut sop = hamiltonian_superop(&h)?;
    sop.append(dissipator_superop(basis, params));
    Ok(sop)
}

/// Dense restriction of the Lindbladian to one gauge sector.
#[derive(Debug, Clone)]
pub struct LiouvillianBlock {
    pub nu: i64,
    pub pairs: Vec<VectorizedIndex>,
    pub matrix: faer::Mat<C64>,
}

impl LiouvillianBlock {
    pub fn size(&self) -> usize {
        self.pairs.len()
    }

    /// Position of the vectorized pair `(ket, bra)` inside this block.
    pub fn position_of(&self, ket: usize, bra: usize) -> Option<usize> {
        self.pairs.iter().position(|p| p.ket == ket && p.bra == bra)
    }
}

/// Enumerate the vectorized pairs of one sector in deterministic
/// (ket-major) order.
pub fn sector_pairs(basis: &FockBasis, nu: i64) -> Vec<VectorizedIndex> {
    let dim = basis.dim();
    let mut pairs = Vec::new();
    for ket in 0..dim {
        for bra in 0..dim {
            let s = basis.total_photons(ket) as i64 - basis.total_photons(bra) as i64;
            if s == nu {
                pairs.push(VectorizedIndex { ket, bra, nu });
            }
        }
    }
    pairs
}

/// Build dense Liouvillian blocks for the requested gauge sectors.
///
/// The full sparse Lindbladian is assembled once; every triplet is routed to
/// its sector, and an element connecting two different sectors with magnitude
/// above [`SECTOR_LEAKAGE_TOL`] aborts the build.
pub fn build_blocks(
    basis: &FockBasis,
    params: &DimerParams,
    sectors: &[i64],
) -> Result<Vec<LiouvillianBlock>> {
    let max_nu = 2 * basis.cutoff() as i64;
    for &nu in sectors {
        if nu.abs() > max_nu {
            return Err(DimerError::InvalidArgument(format!(
                "sector {nu} outside the valid range [-{max_nu}, {max_nu}]"
            )));
        }
    }
    let sop = lindbladian_superop(basis, params)?;
    blocks_from_superop(basis, &sop, sectors)
}

/// Sector decomposition of an already-assembled superoperator.
pub fn blocks_from_superop(
    basis: &FockBasis,
    sop: &SuperOp,
    sectors: &[i64],
) -> Result<Vec<LiouvillianBlock>> {
    let dim = basis.dim();
    let vdim = dim * dim;

    // nu and in-sector position for every vectorized index
    let mut nu_of = vec![0i64; vdim];
    let mut pos_of = vec![0u32; vdim];
    let mut counts: std::collections::HashMap<i64, u32> = std::collections::HashMap::new();
    for ket in 0..dim {
        for bra in 0..dim {
            let v = ket * dim + bra;
            let nu = basis.total_photons(ket) as i64 - basis.total_photons(bra) as i64;
            let count = counts.entry(nu).or_insert(0);
            nu_of[v] = nu;
            pos_of[v] = *count;
            *count += 1;
        }
    }

    for &(r, c, val) in sop.triplets() {
        let (nu_row, nu_col) = (nu_of[r as usize], nu_of[c as usize]);
        if nu_row != nu_col && val.norm() > SECTOR_LEAKAGE_TOL {
            return Err(DimerError::SectorLeakage {
                nu_row,
                nu_col,
                magnitude: val.norm(),
            });
        }
    }

    let blocks = par::par_map(sectors, |&nu| {
        let pairs = sector_pairs(basis, nu);
        let n = pairs.len();
        let mut matrix = faer::Mat::<C64>::zeros(n, n);
        for &(r, c, val) in sop.triplets() {
            if nu_of[r as usize] == nu && nu_of[c as usize] == nu {
                let (pr, pc) = (pos_of[r as usize] as usize, pos_of[c as usize] as usize);
                matrix[(pr, pc)] += val;
            }
        }
        LiouvillianBlock { nu, pairs, matrix }
    });
    Ok(blocks)
}

/// Number of two-mode states with total photon number `n` under the cutoff.
pub fn shell_dimension(cutoff: usize, n: usize) -> usize {
    if n <= cutoff {
        n + 1
    } else if n <= 2 * cutoff {
        2 * cutoff + 1 - n
    } else {
        0
    }
}

/// Size of sector `nu` predicted from the shell dimensions,
/// `sum_n d_n d_{n - nu}`.
pub fn sector_size(cutoff: usize, nu: i64) -> usize {
    (0..=2 * cutoff)
        .map(|n_ket| {
            let n_bra = n_ket as i64 - nu;
            if n_bra < 0 {
                0
            } else {
                shell_dimension(cutoff, n_ket) * shell_dimension(cutoff, n_bra as usize)
            }
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn small_params() -> DimerParams {
        DimerParams::new(1.0, 0.1, 0.05, 3e-2, 2e-2, 1e-2, 5e-3).unwrap()
    }

    fn vectorize(rho: &OperatorMatrix) -> Vec<C64> {
        let d = rho.dim();
        let mut v = vec![C64::ZERO; d * d];
        for (i, j, val) in rho.iter() {
            v[i * d + j] = val;
        }
        v
    }

    #[test]
    fn sector_sizes_at_cutoff_one() {
        let basis = FockBasis::enumerate(1).unwrap();
        let sizes: Vec<usize> = [-2i64, -1, 0, 1, 2]
            .iter()
            .map(|&nu| sector_pairs(&basis, nu).len())
            .collect();
        assert_eq!(sizes, vec![1, 4, 6, 4, 1]);
        assert_eq!(sizes.iter().sum::<usize>(), 16);
    }

    #[test]
    fn sector_size_formula_matches_enumeration() {
        for cutoff in [1usize, 2, 3, 5] {
            let basis = FockBasis::enumerate(cutoff).unwrap();
            let mut total = 0;
            for nu in -(2 * cutoff as i64)..=(2 * cutoff as i64) {
                let enumerated = sector_pairs(&basis, nu).len();
                assert_eq!(enumerated, sector_size(cutoff, nu), "nu = {nu}");
                total += enumerated;
            }
            assert_eq!(total, basis.dim() * basis.dim());
        }
    }

    #[test]
    fn hamiltonian_superop_rejects_non_hermitian() {
        let basis = FockBasis::enumerate(1).unwrap();
        let a = annihilation(&basis, Site::L);
        assert!(hamiltonian_superop(&a).is_err());
    }

    #[test]
    fn commuting_diagonals_give_zero_action() {
        let basis = FockBasis::enumerate(2).unwrap();
        let p = DimerParams::symmetric(1.0, 0.1, 0.0, 1e-2, 1e-3).unwrap();
        let h = build_hamiltonian(&basis, &p);
        let sop = hamiltonian_superop(&h).unwrap();

        // diagonal rho in the same basis
        let mut rho = OperatorMatrix::zeros(basis.dim());
        rho.add_entry(0, 0, C64::new(0.25, 0.0));
        rho.add_entry(3, 3, C64::new(0.75, 0.0));
        let v = vectorize(&rho);
        let mut out = vec![C64::ZERO; v.len()];
        sop.apply(&v, &mut out);
        assert!(out.iter().all(|z| z.norm() < 1e-14));
    }

    #[test]
    fn coherence_rotates_at_omega0() {
        // single occupied mode: the |1,0><0,0| element evolves at -i omega0
        let basis = FockBasis::enumerate(1).unwrap();
        let p = DimerParams::symmetric(0.7, 0.0, 0.0, 1e-2, 1e-3).unwrap();
        let h = build_hamiltonian(&basis, &p);
        let sop = hamiltonian_superop(&h).unwrap();

        let ket = basis.index_of(1, 0).unwrap();
        let bra = basis.index_of(0, 0).unwrap();
        let mut v = vec![C64::ZERO; basis.dim() * basis.dim()];
        v[ket * basis.dim() + bra] = C64::new(1.0, 0.0);
        let mut out = vec![C64::ZERO; v.len()];
        sop.apply(&v, &mut out);
        let got = out[ket * basis.dim() + bra];
        assert_relative_eq!(got.re, 0.0, epsilon = 1e-14);
        assert_relative_eq!(got.im, -0.7, max_relative = 1e-12);
    }

    #[test]
    fn hamiltonian_superop_preserves_trace() {
        let basis = FockBasis::enumerate(2).unwrap();
        let h = build_hamiltonian(&basis, &small_params());
        let sop = hamiltonian_superop(&h).unwrap();
        assert!(sop.identity_left_residual() < 1e-12);
    }

    #[test]
    fn dissipator_annihilates_vacuum_under_pure_loss() {
        let basis = FockBasis::enumerate(2).unwrap();
        let p = DimerParams::new(1.0, 0.1, 0.0, 3e-2, 2e-2, 0.0, 0.0).unwrap();
        let sop = dissipator_superop(&basis, &p);

        let vac = basis.index_of(0, 0).unwrap();
        let mut v = vec![C64::ZERO; basis.dim() * basis.dim()];
        v[vac * basis.dim() + vac] = C64::new(1.0, 0.0);
        let mut out = vec![C64::ZERO; v.len()];
        sop.apply(&v, &mut out);
        assert!(out.iter().all(|z| z.norm() < 1e-14));
    }

    #[test]
    fn single_site_loss_decays_occupation_at_two_gamma() {
        // d<n_L>/dt on |1,0><1,0| under loss only: -2 Gamma n
        let basis = FockBasis::enumerate(2).unwrap();
        let gamma = 0.37;
        let p = DimerParams::new(1.0, 0.0, 0.0, gamma, gamma, 0.0, 0.0).unwrap();
        let sop = dissipator_superop(&basis, &p);

        let k = basis.index_of(1, 0).unwrap();
        let mut v = vec![C64::ZERO; basis.dim() * basis.dim()];
        v[k * basis.dim() + k] = C64::new(1.0, 0.0);
        let mut out = vec![C64::ZERO; v.len()];
        sop.apply(&v, &mut out);

        // d rho / dt traced against n_L
        let n_l = crate::fock::number_operator(&basis, Site::L);
        let dn = n_l.trace_with(&out);
        assert_relative_eq!(dn.re, -2.0 * gamma, max_relative = 1e-12);
        assert_relative_eq!(dn.im, 0.0, epsilon = 1e-14);
    }

    #[test]
    fn dissipator_preserves_trace() {
        let basis = FockBasis::enumerate(2).unwrap();
        let sop = dissipator_superop(&basis, &small_params());
        assert!(sop.identity_left_residual() < 1e-12);
    }

    #[test]
    fn full_lindbladian_preserves_trace() {
        let basis = FockBasis::enumerate(3).unwrap();
        let sop = lindbladian_superop(&basis, &small_params()).unwrap();
        assert!(sop.identity_left_residual() < 1e-11);
    }

    #[test]
    fn blocks_cover_requested_sectors_without_leakage() {
        let basis = FockBasis::enumerate(2).unwrap();
        let blocks = build_blocks(&basis, &small_params(), &[0, 1, -1]).unwrap();
        assert_eq!(blocks.len(), 3);
        for block in &blocks {
            assert_eq!(block.size(), sector_size(2, block.nu));
            assert!(block.pairs.iter().all(|p| p.nu == block.nu));
        }
    }

    #[test]
    fn out_of_range_sector_is_rejected() {
        let basis = FockBasis::enumerate(2).unwrap();
        assert!(build_blocks(&basis, &small_params(), &[5]).is_err());
    }

    #[test]
    fn opposite_sectors_are_complex_conjugates_under_pair_transposition() {
        let basis = FockBasis::enumerate(2).unwrap();
        let blocks = build_blocks(&basis, &small_params(), &[1, -1]).unwrap();
        let plus = &blocks[0];
        let minus = &blocks[1];
        assert_eq!(plus.size(), minus.size());

        // map each (ket, bra) pair of nu = +1 to (bra, ket) in nu = -1
        let transposed: Vec<usize> = plus
            .pairs
            .iter()
            .map(|p| minus.position_of(p.bra, p.ket).unwrap())
            .collect();
        let n = plus.size();
        let mut max_diff = 0.0f64;
        for r in 0..n {
            for c in 0..n {
                let lhs = plus.matrix[(r, c)];
                let rhs = minus.matrix[(transposed[r], transposed[c])].conj();
                max_diff = max_diff.max((lhs - rhs).norm());
            }
        }
        assert!(max_diff < 1e-12, "max difference {max_diff}");
    }
}
