//! Exact reference computations for small systems.
//!
//! These build explicit wavefunctions and reduced density matrices, so they
//! share no code path with the closed-form singlet entropy or with the
//! decimation engine that they are used to check.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

/// Largest Hilbert space the singlet-product oracle will build.
pub const MAX_PRODUCT_DIM: usize = 1 << 16;

/// Largest chain accepted by the exact ground-state oracle.
pub const MAX_ED_SITES: usize = 12;

/// Eigenvalues below this are treated as exact zeros.
const SPECTRUM_CUTOFF: f64 = 1e-12;

/// A product of singlets on `n_sites` spins, cut into `[0, block_len)` and
/// its complement.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SingletLayout {
    pub n_sites: usize,
    pub pairs: Vec<(usize, usize)>,
    pub block_len: usize,
}

impl SingletLayout {
    pub fn new(n_sites: usize, pairs: Vec<(usize, usize)>, block_len: usize) -> Result<Self> {
        let mut seen = vec![false; n_sites];
        for &(a, b) in &pairs {
            for p in [a, b] {
                if p >= n_sites {
                    return Err(Error::PositionOutOfRange { pos: p, n_sites });
                }
                if std::mem::replace(&mut seen[p], true) {
                    return Err(Error::InvalidParameter(format!(
                        "site {p} appears in two pairs"
                    )));
                }
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::InvalidParameter(
                "pairing must cover every site".into(),
            ));
        }
        if block_len > n_sites {
            return Err(Error::InvalidParameter(format!(
                "block of {block_len} sites exceeds chain of {n_sites}"
            )));
        }
        Ok(Self {
            n_sites,
            pairs,
            block_len,
        })
    }

    /// Pairs with exactly one site inside the block.
    pub fn crossing_count(&self) -> u32 {
        self.pairs
            .iter()
            .filter(|&&(a, b)| (a < self.block_len) != (b < self.block_len))
            .count() as u32
    }
}

/// Every perfect matching of `n` sites (`n` even), in lexicographic order.
pub fn all_pairings(n: usize) -> Vec<Vec<(usize, usize)>> {
    fn rec(
        free: &mut Vec<usize>,
        cur: &mut Vec<(usize, usize)>,
        out: &mut Vec<Vec<(usize, usize)>>,
    ) {
        if free.is_empty() {
            out.push(cur.clone());
            return;
        }
        let a = free.remove(0);
        for i in 0..free.len() {
            let b = free.remove(i);
            cur.push((a, b));
            rec(free, cur, out);
            cur.pop();
            free.insert(i, b);
        }
        free.insert(0, a);
    }
    let mut out = Vec::new();
    if n.is_multiple_of(2) {
        rec(&mut (0..n).collect(), &mut Vec::new(), &mut out);
    }
    out
}

/// Real amplitudes of the singlet product in the `S^z` product basis,
/// site 0 most significant. Local state `k` has `m = S - k`.
fn singlet_product_state(layout: &SingletLayout, dim: usize) -> Result<Vec<f64>> {
    let n = layout.n_sites;
    let total = (dim as u128).checked_pow(n as u32).unwrap_or(u128::MAX);
    if total > MAX_PRODUCT_DIM as u128 {
        return Err(Error::OracleLimit(format!(
            "{dim}^{n} amplitudes exceed the {MAX_PRODUCT_DIM} limit"
        )));
    }
    let total = total as usize;
    let stride: Vec<usize> = (0..n).map(|i| dim.pow((n - 1 - i) as u32)).collect();
    let norm = (dim as f64).powf(-(layout.pairs.len() as f64) / 2.0);
    let mut psi = vec![0.0; total];
    // Each pair (a, b) contributes (-1)^k |k>_a |D-1-k>_b / sqrt(D).
    let n_pairs = layout.pairs.len();
    let mut choice = vec![0usize; n_pairs];
    loop {
        let mut idx = 0;
        let mut sign = 1.0;
        for (&(a, b), &k) in layout.pairs.iter().zip(&choice) {
            idx += k * stride[a] + (dim - 1 - k) * stride[b];
            if k % 2 == 1 {
                sign = -sign;
            }
        }
        psi[idx] = sign * norm;
        let mut p = 0;
        loop {
            if p == n_pairs {
                return Ok(psi);
            }
            choice[p] += 1;
            if choice[p] < dim {
                break;
            }
            choice[p] = 0;
            p += 1;
        }
    }
}

/// `rho = Psi Psi^T` for the rows selected by `row_of` (block index) and
/// columns by `col_of` (environment index).
fn reduced_from_amplitudes(
    psi: &[f64],
    rows: usize,
    cols: usize,
    split: impl Fn(usize) -> (usize, usize),
) -> DMatrix<f64> {
    let mut m = DMatrix::<f64>::zeros(rows, cols);
    for (idx, &amp) in psi.iter().enumerate() {
        if amp != 0.0 {
            let (r, c) = split(idx);
            m[(r, c)] += amp;
        }
    }
    if rows <= cols {
        &m * m.transpose()
    } else {
        // Same nonzero spectrum, smaller matrix.
        m.transpose() * &m
    }
}

/// Reduced density matrix of the block (or of its complement, whichever is
/// smaller; both share the nonzero spectrum).
pub fn singlet_reduced_density(layout: &SingletLayout, two_s: u32) -> Result<DMatrix<f64>> {
    let dim = (two_s + 1) as usize;
    let psi = singlet_product_state(layout, dim)?;
    let rest = dim.pow((layout.n_sites - layout.block_len) as u32);
    let rows = dim.pow(layout.block_len as u32);
    Ok(reduced_from_amplitudes(&psi, rows, rest, |idx| {
        (idx / rest, idx % rest)
    }))
}

pub fn spectrum(rho: &DMatrix<f64>) -> Vec<f64> {
    SymmetricEigen::new(rho.clone())
        .eigenvalues
        .iter()
        .copied()
        .collect()
}

/// Tsallis entropy `(Tr rho^q - 1) / (1 - q)` of a spectrum, von Neumann at
/// `q = 1`. Zero eigenvalues are dropped.
pub fn tsallis_of_spectrum(eigenvalues: &[f64], q: f64) -> f64 {
    let nonzero = eigenvalues.iter().copied().filter(|&l| l > SPECTRUM_CUTOFF);
    if q == 1.0 {
        -nonzero.map(|l| l * l.ln()).sum::<f64>()
    } else {
        (nonzero.map(|l| l.powf(q)).sum::<f64>() - 1.0) / (1.0 - q)
    }
}

/// Exact Tsallis entropy of the block of a singlet product state.
pub fn exact_block_entropy(layout: &SingletLayout, q: f64, two_s: u32) -> Result<f64> {
    let rho = singlet_reduced_density(layout, two_s)?;
    Ok(tsallis_of_spectrum(&spectrum(&rho), q))
}

/// Ground state of the periodic spin-1/2 Heisenberg ring
/// `H = sum_i J_i S_i . S_{i+1}` in the `S^z_total = 0` sector.
///
/// Returns the amplitudes over the full `2^N` basis (bit `i` set = site `i`
/// up) and the gap to the next level in the sector.
pub fn heisenberg_ground_state(couplings: &[f64]) -> Result<(Vec<f64>, f64)> {
    let n = couplings.len();
    if n < 2 || !n.is_multiple_of(2) || n > MAX_ED_SITES {
        return Err(Error::OracleLimit(format!(
            "exact diagonalization needs an even ring of 2..={MAX_ED_SITES} sites, got {n}"
        )));
    }
    let basis: Vec<u32> = (0u32..1 << n)
        .filter(|s| s.count_ones() as usize == n / 2)
        .collect();
    let mut index = vec![usize::MAX; 1 << n];
    for (i, &s) in basis.iter().enumerate() {
        index[s as usize] = i;
    }
    let dim = basis.len();
    let mut h = DMatrix::<f64>::zeros(dim, dim);
    for (col, &s) in basis.iter().enumerate() {
        for (i, &j) in couplings.iter().enumerate() {
            let k = (i + 1) % n;
            let bi = (s >> i) & 1;
            let bk = (s >> k) & 1;
            if bi == bk {
                h[(col, col)] += 0.25 * j;
            } else {
                h[(col, col)] -= 0.25 * j;
                let flipped = s ^ (1 << i) ^ (1 << k);
                h[(index[flipped as usize], col)] += 0.5 * j;
            }
        }
    }
    let eig = SymmetricEigen::new(h);
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let gap = if dim > 1 {
        eig.eigenvalues[order[1]] - eig.eigenvalues[order[0]]
    } else {
        f64::INFINITY
    };
    let scale = couplings.iter().fold(0.0f64, |m, j| m.max(j.abs()));
    if gap <= 1e-10 * scale.max(1e-300) {
        return Err(Error::DegenerateGroundState { gap });
    }
    let gs = eig.eigenvectors.column(order[0]);
    let mut psi = vec![0.0; 1 << n];
    for (i, &s) in basis.iter().enumerate() {
        psi[s as usize] = gs[i];
    }
    Ok((psi, gap))
}

/// Tsallis entropy of sites `[anchor, anchor + block_len)` (mod N) in the
/// exact ground state of the spin-1/2 Heisenberg ring.
pub fn exact_ground_block_entropy(
    couplings: &[f64],
    q: f64,
    anchor: usize,
    block_len: usize,
) -> Result<f64> {
    let n = couplings.len();
    if block_len == 0 || block_len >= n || anchor >= n {
        return Err(Error::InvalidParameter(format!(
            "block [{anchor}, {anchor}+{block_len}) invalid for {n} sites"
        )));
    }
    let (psi, _) = heisenberg_ground_state(couplings)?;
    let in_block: Vec<bool> = (0..n).map(|i| (i + n - anchor) % n < block_len).collect();
    let rows = 1usize << block_len;
    let cols = 1usize << (n - block_len);
    let rho = reduced_from_amplitudes(&psi, rows, cols, |idx| {
        let (mut r, mut c, mut rb, mut cb) = (0, 0, 0, 0);
        for (site, &inside) in in_block.iter().enumerate() {
            let bit = (idx >> site) & 1;
            if inside {
                r |= bit << rb;
                rb += 1;
            } else {
                c |= bit << cb;
                cb += 1;
            }
        }
        (r, c)
    });
    Ok(tsallis_of_spectrum(&spectrum(&rho), q))
}
