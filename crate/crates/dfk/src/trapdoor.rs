//! Trapdoor lattice algebra: the public gadget trapdoor and the five
//! algorithms TrapGen, ExtBasisLeft, ExtBasisRight, SampleD (preimage
//! sampling) and RandBasis.
//!
//! A `LatticeBasis` is a square integer basis T of the q-ary lattice
//! Lambda-perp_q(M) = { x : M x = 0 (mod q) } for its parent matrix M.
//! Quality is measured by the Gram-Schmidt norm max_i ||b~_i||.

use crate::gauss::{sample_gpv_coeffs, sample_z, sigma_floor, GaussError, GaussParam, RngStream};
use crate::zq_core::{
    bit_decompose_rows, gadget_matrix_padded, gram_schmidt, GramSchmidtData, IntMatrix, Modulus,
    ZqMatrix, ZqError,
};
use once_cell::sync::OnceCell;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TrapdoorError {
    #[error("basis is not annihilated by its parent matrix")]
    NotInLattice,
    #[error("basis does not generate the full q-ary lattice of its parent")]
    NotFullLattice,
    #[error("linear system unsolvable (parent not full row-rank mod q)")]
    Unsolvable,
    #[error("shift h must be nonzero (invertible mod prime q)")]
    ZeroShift,
    #[error(transparent)]
    Gauss(#[from] GaussError),
    #[error(transparent)]
    Zq(#[from] ZqError),
}

/// Integer short basis of Lambda-perp_q(parent) with cached Gram-Schmidt data.
#[derive(Clone, Debug)]
pub struct LatticeBasis {
    parent: ZqMatrix,
    matrix: IntMatrix,
    gs: OnceCell<GramSchmidtData>,
}

impl LatticeBasis {
    /// Basic construction: checks dimensions and parent * matrix == 0 (mod q).
    /// Full-lattice coverage is verified separately by the trapdoor
    /// constructors (determinant check) and, in debug builds at small
    /// dimension, by HNF comparison against the canonical kernel basis.
    pub fn new(parent: ZqMatrix, matrix: IntMatrix) -> Result<Self, TrapdoorError> {
        assert_eq!(matrix.rows(), matrix.cols(), "basis must be square");
        assert_eq!(parent.cols(), matrix.rows(), "parent/basis dimension mismatch");
        if !parent.matmul_int(&matrix).is_zero() {
            return Err(TrapdoorError::NotInLattice);
        }
        Ok(LatticeBasis {
            parent,
            matrix,
            gs: OnceCell::new(),
        })
    }

    fn with_gs(parent: ZqMatrix, matrix: IntMatrix, gs: GramSchmidtData) -> Result<Self, TrapdoorError> {
        let b = Self::new(parent, matrix)?;
        let _ = b.gs.set(gs);
        Ok(b)
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    pub fn parent(&self) -> &ZqMatrix {
        &self.parent
    }

    pub fn matrix(&self) -> &IntMatrix {
        &self.matrix
    }

    /// Gram-Schmidt data (computed on first use, then cached).
    pub fn gs(&self) -> &GramSchmidtData {
        self.gs
            .get_or_init(|| gram_schmidt(&self.matrix).expect("basis rank-deficient"))
    }

    pub fn gs_norm(&self) -> f64 {
        self.gs().gs_norm
    }

    /// basis * z with exact integer arithmetic.
    pub fn mul_coeffs(&self, z: &[i64]) -> Vec<i64> {
        assert_eq!(z.len(), self.dim());
        let dim = self.dim();
        let mut out = vec![0i128; dim];
        for (j, &zj) in z.iter().enumerate() {
            if zj == 0 {
                continue;
            }
            for i in 0..dim {
                out[i] += self.matrix.get(i, j) as i128 * zj as i128;
            }
        }
        out.into_iter()
            .map(|v| i64::try_from(v).expect("lattice vector overflow"))
            .collect()
    }

    /// Canonical HNF of the generated q-ary lattice (with q*I adjoined, which
    /// is sound because Lambda-perp_q always contains q*Z^dim).
    pub fn lattice_hnf(&self) -> IntMatrix {
        hnf_qary(&self.matrix, self.parent.modulus().q())
    }

    /// True iff the columns generate the full lattice of the parent matrix,
    /// decided by HNF comparison with the canonical kernel basis.
    pub fn spans_full_lattice(&self) -> bool {
        let canon = kernel_hnf(&self.parent);
        self.lattice_hnf() == canon
    }

    fn debug_verify_full(&self) -> Result<(), TrapdoorError> {
        #[cfg(debug_assertions)]
        {
            // HNF verification is cubic; cap the dimension so debug builds of
            // the full scheme stay usable.
            if self.dim() <= 192 && !self.spans_full_lattice() {
                return Err(TrapdoorError::NotFullLattice);
            }
        }
        Ok(())
    }
}

/// Column-style Hermite normal form of the q-ary lattice generated by the
/// given columns together with q*Z^dim. Lower triangular, positive diagonal,
/// off-diagonal entries in a pivot row reduced into [0, diagonal).
///
/// Because q*e_i is always available, every intermediate entry can be reduced
/// mod q, so the computation never leaves 128-bit range.
pub fn hnf_qary(gens: &IntMatrix, q: u64) -> IntMatrix {
    let dim = gens.rows();
    let qi = q as i128;
    // Working columns, entries kept in [0, q).
    let mut cols: Vec<Vec<i128>> = (0..gens.cols())
        .map(|j| {
            (0..dim)
                .map(|i| {
                    let mut v = gens.get(i, j) as i128 % qi;
                    if v < 0 {
                        v += qi;
                    }
                    v
                })
                .collect()
        })
        .collect();
    // Adjoin q*e_i explicitly. Without these, the mod-q entry reductions
    // below would not be column operations within the generated lattice and
    // the result could describe a proper sublattice.
    for i in 0..dim {
        let mut col = vec![0i128; dim];
        col[i] = qi;
        cols.push(col);
    }
    let mut h: Vec<Vec<i128>> = Vec::with_capacity(dim);
    for r in 0..dim {
        // Euclid across the row-r entries of the remaining columns.
        loop {
            let mut nz: Vec<usize> = (0..cols.len()).filter(|&c| cols[c][r] != 0).collect();
            if nz.len() <= 1 {
                break;
            }
            nz.sort_by_key(|&c| cols[c][r]);
            let min_c = nz[0];
            for &c in &nz[1..] {
                let f = cols[c][r] / cols[min_c][r];
                for i in 0..dim {
                    let mut v = (cols[c][i] - f * cols[min_c][i]) % qi;
                    if v < 0 {
                        v += qi;
                    }
                    cols[c][i] = v;
                }
            }
        }
        let pivot_col = match (0..cols.len()).find(|&c| cols[c][r] != 0) {
            Some(c) => {
                let col = cols.swap_remove(c);
                // Clearing the pivot row below other rows happens naturally:
                // remaining columns have 0 at row r now.
                col
            }
            None => {
                // No generator hits this row any more; q*e_r is the pivot.
                let mut col = vec![0i128; dim];
                col[r] = qi;
                col
            }
        };
        h.push(pivot_col);
    }
    // Normalize: reduce row-r entries of earlier pivot columns mod diag r.
    for r in 0..dim {
        let d = h[r][r];
        debug_assert!(d > 0);
        for c in 0..r {
            let f = h[c][r].div_euclid(d);
            if f != 0 {
                for i in 0..dim {
                    let mut v = (h[c][i] - f * h[r][i]) % qi;
                    // Rows below r may be reduced mod q (q*e_i is a lattice
                    // vector); the row-r entry is already in [0, d) and rows
                    // above r stay zero, so this keeps the form canonical
                    // while bounding entry growth.
                    if v < 0 {
                        v += qi;
                    }
                    h[c][i] = v;
                }
            }
        }
    }
    IntMatrix::from_fn(dim, dim, |i, j| i64::try_from(h[j][i]).expect("hnf overflow"))
}

/// Canonical HNF of Lambda-perp_q(M): mod-q kernel basis lifted to integers,
/// with q*I adjoined.
pub fn kernel_hnf(m: &ZqMatrix) -> IntMatrix {
    let q = m.modulus();
    let dim = m.cols();
    // Row-echelon form of M mod q.
    let mut a: Vec<Vec<u64>> = (0..m.rows())
        .map(|i| (0..dim).map(|j| m.get(i, j)).collect())
        .collect();
    let rows = a.len();
    let mut pivots: Vec<usize> = Vec::new();
    let mut rank = 0usize;
    for col in 0..dim {
        if rank == rows {
            break;
        }
        let piv = (rank..rows).find(|&r| a[r][col] != 0);
        let Some(piv) = piv else { continue };
        a.swap(rank, piv);
        let inv = q.inv(a[rank][col]).unwrap();
        for v in a[rank].iter_mut() {
            *v = q.mul(*v, inv);
        }
        for r in 0..rows {
            if r != rank && a[r][col] != 0 {
                let f = a[r][col];
                for cc in 0..dim {
                    let t = q.mul(f, a[rank][cc]);
                    a[r][cc] = q.sub(a[r][cc], t);
                }
            }
        }
        pivots.push(col);
        rank += 1;
    }
    let free: Vec<usize> = (0..dim).filter(|c| !pivots.contains(c)).collect();
    let mut gens = IntMatrix::zero(dim, free.len().max(1));
    for (gj, &fc) in free.iter().enumerate() {
        gens.set(fc, gj, 1);
        for (r, &pc) in pivots.iter().enumerate() {
            // x_pc = -a[r][fc] * x_fc
            gens.set(pc, gj, q.neg(a[r][fc]) as i64);
        }
    }
    hnf_qary(&gens, q.q())
}

/// Solve M * X == RHS (mod q) by Gaussian elimination; free variables are
/// fixed to zero and entries are lifted to [0, q). Fails when the system is
/// inconsistent (M not full row-rank over the reached rows).
pub fn solve_mod(m: &ZqMatrix, rhs: &ZqMatrix) -> Result<IntMatrix, TrapdoorError> {
    assert_eq!(m.rows(), rhs.rows());
    let q = m.modulus();
    let rows = m.rows();
    let cols = m.cols();
    let w = rhs.cols();
    let mut a: Vec<Vec<u64>> = (0..rows)
        .map(|i| {
            let mut row: Vec<u64> = (0..cols).map(|j| m.get(i, j)).collect();
            row.extend((0..w).map(|j| rhs.get(i, j)));
            row
        })
        .collect();
    let total = cols + w;
    let mut pivots: Vec<(usize, usize)> = Vec::new(); // (row, col)
    let mut rank = 0usize;
    for col in 0..cols {
        if rank == rows {
            break;
        }
        let Some(piv) = (rank..rows).find(|&r| a[r][col] != 0) else {
            continue;
        };
        a.swap(rank, piv);
        let inv = q.inv(a[rank][col]).unwrap();
        for v in a[rank].iter_mut() {
            *v = q.mul(*v, inv);
        }
        for r in 0..rows {
            if r != rank && a[r][col] != 0 {
                let f = a[r][col];
                for cc in col..total {
                    let t = q.mul(f, a[rank][cc]);
                    a[r][cc] = q.sub(a[r][cc], t);
                }
            }
        }
        pivots.push((rank, col));
        rank += 1;
    }
    // Inconsistent rows: all-zero coefficients but nonzero rhs.
    for r in rank..rows {
        if (cols..total).any(|c| a[r][c] != 0) {
            return Err(TrapdoorError::Unsolvable);
        }
    }
    let mut x = IntMatrix::zero(cols, w);
    for &(r, c) in &pivots {
        for j in 0..w {
            x.set(c, j, a[r][cols + j] as i64);
        }
    }
    Ok(x)
}

/// Determinant of a square integer matrix modulo a prime p.
fn det_mod_p(m: &IntMatrix, p: u64) -> u64 {
    let dim = m.rows();
    let pi = p as u128;
    let mut a: Vec<Vec<u64>> = (0..dim)
        .map(|i| {
            (0..dim)
                .map(|j| {
                    let v = m.get(i, j) as i128 % p as i128;
                    (if v < 0 { v + p as i128 } else { v }) as u64
                })
                .collect()
        })
        .collect();
    let mulp = |x: u64, y: u64| ((x as u128 * y as u128) % pi) as u64;
    let mut det = 1u64;
    for col in 0..dim {
        let Some(piv) = (col..dim).find(|&r| a[r][col] != 0) else {
            return 0;
        };
        if piv != col {
            a.swap(col, piv);
            det = p - det; // sign flip
            if det == p {
                det = 0;
            }
        }
        let d = a[col][col];
        det = mulp(det, d);
        // inverse via Fermat
        let mut inv = 1u64;
        let mut base = d;
        let mut e = p - 2;
        while e > 0 {
            if e & 1 == 1 {
                inv = mulp(inv, base);
            }
            base = mulp(base, base);
            e >>= 1;
        }
        for r in col + 1..dim {
            if a[r][col] != 0 {
                let f = mulp(a[r][col], inv);
                for c in col..dim {
                    let t = mulp(f, a[col][c]);
                    a[r][c] = (a[r][c] + p - t) % p;
                }
            }
        }
    }
    det
}

/// Cheap full-lattice certificate: the basis columns all lie in the lattice
/// (checked by the constructor) and |det| equals q^n, the determinant of the
/// full lattice when the parent has row rank n. Determinants are compared
/// modulo two fixed large primes with a consistent sign.
fn verify_det_full_lattice(parent: &ZqMatrix, basis: &IntMatrix) -> Result<(), TrapdoorError> {
    let q = parent.modulus();
    let n = parent.rows();
    const P1: u64 = 2_305_843_009_213_693_951; // 2^61 - 1
    const P2: u64 = 4_611_686_018_427_387_847; // largest prime below 2^62
    let mut sign_fixed: Option<bool> = None;
    for p in [P1, P2] {
        let det = det_mod_p(basis, p);
        let mut target = 1u64;
        for _ in 0..n {
            target = ((target as u128 * (q.q() % p) as u128) % p as u128) as u64;
        }
        let neg_target = (p - target) % p;
        let plus = det == target;
        let minus = det == neg_target;
        match sign_fixed {
            None => {
                if plus {
                    sign_fixed = Some(true);
                } else if minus {
                    sign_fixed = Some(false);
                } else {
                    return Err(TrapdoorError::NotFullLattice);
                }
            }
            Some(true) if !plus => return Err(TrapdoorError::NotFullLattice),
            Some(false) if !minus => return Err(TrapdoorError::NotFullLattice),
            _ => {}
        }
    }
    Ok(())
}

/// Public short basis for Lambda-perp_q(G), G the (unpadded) n-row gadget.
/// Block diagonal I_n (tensor) S_k with S_k carrying 2 on the diagonal, -1 on
/// the subdiagonal, and the bits of q as its last column. gs_norm <= sqrt(5).
pub fn gadget_basis(modulus: Modulus, n: usize) -> LatticeBasis {
    let k = modulus.k() as usize;
    let dim = n * k;
    let mut t = IntMatrix::zero(dim, dim);
    for blk in 0..n {
        let o = blk * k;
        for j in 0..k - 1 {
            t.set(o + j, o + j, 2);
            t.set(o + j + 1, o + j, -1);
        }
        let mut qv = modulus.q();
        for i in 0..k {
            t.set(o + i, o + k - 1, (qv & 1) as i64);
            qv >>= 1;
        }
    }
    let g = crate::zq_core::gadget_matrix(modulus, n);
    let b = LatticeBasis::new(g, t).expect("gadget basis construction");
    b.debug_verify_full().expect("gadget basis spans its lattice");
    b
}

/// Gadget trapdoor for the zero-padded gadget of width m: block diagonal
/// (I_n tensor S_k, I_{m-nk}).
pub fn gadget_basis_padded(modulus: Modulus, n: usize, m: usize) -> LatticeBasis {
    let k = modulus.k() as usize;
    assert!(m >= n * k);
    let inner = gadget_basis(modulus, n);
    let mut t = IntMatrix::identity(m);
    for i in 0..n * k {
        for j in 0..n * k {
            t.set(i, j, inner.matrix().get(i, j));
        }
    }
    for j in n * k..m {
        t.set(j, j, 1);
    }
    let g = gadget_matrix_padded(modulus, n, m);
    LatticeBasis::new(g, t).expect("padded gadget basis construction")
}

/// Internal MP12-style trapdoor: A = [Abar | G - Abar*R] with R short.
pub struct GTrapdoor {
    pub r: IntMatrix,
}

/// TrapGen: near-uniform A in Z_q^{n x m} (m = 2nk) together with a short
/// basis of Lambda-perp_q(A).
///
/// Construction: Abar uniform n x nk, R with i.i.d. D_{Z,2} entries,
/// A = [Abar | G - Abar*R]. The returned basis columns are
/// { [R v; v] : v in T_G } followed by { [e_i + R p_i; p_i] } with
/// p_i = G^{-1}(-Abar e_i); this set has determinant +-q^n, hence is already
/// a basis of the full lattice.
pub fn trap_gen(
    modulus: Modulus,
    n: usize,
    m: usize,
    rng: &mut RngStream,
) -> Result<(ZqMatrix, LatticeBasis), TrapdoorError> {
    let k = modulus.k() as usize;
    let w = n * k;
    assert_eq!(m, 2 * w, "trap_gen expects m = 2nk (mbar = w = nk)");
    let abar = ZqMatrix::uniform(modulus, n, w, rng);
    let sigma_r = GaussParam::new(2.0).expect("sigma_r");
    let r = IntMatrix::from_fn(w, w, |_, _| sample_z(0.0, sigma_r, rng));
    let g = crate::zq_core::gadget_matrix(modulus, n);
    let a_right = g.sub(&abar.matmul_int(&r));
    let a = abar.hconcat(&a_right);

    let tg = gadget_basis(modulus, n);
    let v = tg.matrix(); // w x w
    // p_i = bits(-Abar e_i), assembled for all i at once.
    let p = crate::zq_core::bit_decompose(modulus, &abar.neg()); // w x w
    let rv = r.matmul(v);
    let rp_plus_i = r.matmul(&p).add(&IntMatrix::identity(w));
    let top = rv.hconcat(&rp_plus_i);
    let bottom = v.hconcat(&p);
    let t = top.vconcat(&bottom);
    verify_det_full_lattice(&a, &t)?;
    let basis = LatticeBasis::new(a.clone(), t)?;
    Ok((a, basis))
}

/// ExtBasisLeft: from a basis of Lambda-perp_q(M) to one of
/// Lambda-perp_q([M | B]) with identical Gram-Schmidt norm.
///
/// Layout [[T, W], [0, I]] where M * W == -B (mod q), W lifted to [0, q).
pub fn ext_basis_left(
    m_mat: &ZqMatrix,
    b: &ZqMatrix,
    t: &LatticeBasis,
) -> Result<LatticeBasis, TrapdoorError> {
    assert_eq!(m_mat.rows(), b.rows());
    assert_eq!(t.dim(), m_mat.cols());
    let w = solve_mod(m_mat, &b.neg())?;
    let dim0 = t.dim();
    let add = b.cols();
    let dim = dim0 + add;
    let mut out = IntMatrix::zero(dim, dim);
    for i in 0..dim0 {
        for j in 0..dim0 {
            out.set(i, j, t.matrix().get(i, j));
        }
        for j in 0..add {
            out.set(i, dim0 + j, w.get(i, j));
        }
    }
    for j in 0..add {
        out.set(dim0 + j, dim0 + j, 1);
    }
    // The Gram-Schmidt data extends exactly: the first block spans all of the
    // top coordinates, so the appended columns orthogonalize to unit vectors.
    let gs0 = t.gs();
    let mut vectors: Vec<Vec<f64>> = gs0
        .vectors
        .iter()
        .map(|v| {
            let mut vv = v.clone();
            vv.resize(dim, 0.0);
            vv
        })
        .collect();
    let mut norms_sq = gs0.norms_sq.clone();
    for j in 0..add {
        let mut e = vec![0.0; dim];
        e[dim0 + j] = 1.0;
        vectors.push(e);
        norms_sq.push(1.0);
    }
    let gs = GramSchmidtData {
        vectors,
        norms_sq,
        gs_norm: gs0.gs_norm.max(1.0),
    };
    let parent = m_mat.hconcat(b);
    let basis = LatticeBasis::with_gs(parent, out, gs)?;
    basis.debug_verify_full()?;
    Ok(basis)
}

/// ExtBasisRight for the gadget-shifted case: a public basis of
/// Lambda-perp_q([A | A*S + h*G]) built from the gadget trapdoor alone,
/// for any invertible shift h != 0.
///
/// Columns { [-S v; v] : v in T_G } followed by { [e_i - S v_i; v_i] } with
/// v_i = G^{-1}(-h^{-1} A e_i); determinant +-q^n, hence a full basis.
pub fn ext_basis_right(
    a: &ZqMatrix,
    s: &IntMatrix,
    h: u64,
    tg_padded: &LatticeBasis,
) -> Result<LatticeBasis, TrapdoorError> {
    let q = a.modulus();
    let n = a.rows();
    let m = a.cols();
    assert_eq!((s.rows(), s.cols()), (m, m), "S must be m x m");
    assert_eq!(tg_padded.dim(), m, "gadget trapdoor width mismatch");
    if h % q.q() == 0 {
        return Err(TrapdoorError::ZeroShift);
    }
    let g = gadget_matrix_padded(q, n, m);
    let d_right = a.matmul_int(s).add(&g.scalar_mul(h));
    let parent = a.hconcat(&d_right);

    let hinv_neg = q.neg(q.inv(h).unwrap());
    let p = bit_decompose_rows(q, &a.scalar_mul(hinv_neg), m); // m x m
    let v = tg_padded.matrix(); // m x m
    let sv = s.matmul(v);
    let sp = s.matmul(&p);
    let top = sv.scale(-1).hconcat(&IntMatrix::identity(m).sub(&sp));
    let bottom = v.hconcat(&p);
    let t = top.vconcat(&bottom);
    verify_det_full_lattice(&parent, &t)?;
    let basis = LatticeBasis::new(parent, t)?;
    Ok(basis)
}

/// Iteratively size-reduce a coset representative against the basis (exact
/// integer updates, nearest-plane coefficients in double precision). Keeps
/// the coset fixed while shrinking the norm so Klein's sampler sees an
/// accurately representable center.
fn reduce_coset(basis: &LatticeBasis, x: &mut Vec<i64>) {
    let gs = basis.gs();
    let dim = basis.dim();
    for _pass in 0..3 {
        let mut c: Vec<f64> = x.iter().map(|&v| v as f64).collect();
        let mut z = vec![0i64; dim];
        for i in (0..dim).rev() {
            let bt = &gs.vectors[i];
            let mu = c.iter().zip(bt).map(|(a, b)| a * b).sum::<f64>() / gs.norms_sq[i];
            let zi = mu.round();
            if zi != 0.0 {
                z[i] = zi as i64;
                let col = basis.matrix().column(i);
                for (cj, bj) in c.iter_mut().zip(&col) {
                    *cj -= zi * *bj as f64;
                }
            }
        }
        if z.iter().all(|&v| v == 0) {
            break;
        }
        let shift = basis.mul_coeffs(&z);
        for (xi, si) in x.iter_mut().zip(&shift) {
            *xi = xi.checked_sub(*si).expect("coset reduction overflow");
        }
    }
}

/// SampleD: preimage sampling. Returns R with M * R == U (mod q), each column
/// drawn statistically close to the discrete Gaussian of width sigma over its
/// solution coset.
pub fn sample_pre(
    m_mat: &ZqMatrix,
    t: &LatticeBasis,
    u: &ZqMatrix,
    sigma: f64,
    rng: &mut RngStream,
) -> Result<IntMatrix, TrapdoorError> {
    assert_eq!(m_mat.rows(), u.rows());
    assert_eq!(t.dim(), m_mat.cols());
    let floor = sigma_floor(t.gs_norm(), t.dim());
    if sigma < floor {
        return Err(TrapdoorError::Gauss(GaussError::SigmaTooSmall {
            sigma,
            floor,
        }));
    }
    let p = GaussParam::new(sigma).map_err(TrapdoorError::Gauss)?;
    let x0 = solve_mod(m_mat, u)?;
    let dim = t.dim();
    let mut out = IntMatrix::zero(dim, u.cols());
    for j in 0..u.cols() {
        let mut x = x0.column(j);
        reduce_coset(t, &mut x);
        let center: Vec<f64> = x.iter().map(|&v| v as f64).collect();
        let z = sample_gpv_coeffs(t, p, &center, rng)?;
        let v = t.mul_coeffs(&z);
        let col: Vec<i64> = x.iter().zip(&v).map(|(a, b)| a - b).collect();
        out.set_column(j, &col);
    }
    Ok(out)
}

/// RandBasis: a seeded re-randomization of a trapdoor basis.
///
/// The output basis is T' = (T + T*N) * D with N strictly upper triangular
/// (entries discrete-Gaussian, width sigma divided by the receiving column's
/// GS norm) and D a random diagonal sign matrix. The transform is unimodular,
/// so the lattice is unchanged, and adding earlier columns never alters the
/// Gram-Schmidt profile, so gs_norm(T') = gs_norm(T) <= sigma (well under the
/// sigma * sqrt(dim) contract). The input is size-reduced first so entries
/// stay far from 64-bit range.
pub fn rand_basis(
    m_mat: &ZqMatrix,
    t: &LatticeBasis,
    sigma: f64,
    rng: &mut RngStream,
) -> Result<LatticeBasis, TrapdoorError> {
    assert_eq!(t.dim(), m_mat.cols());
    let dim = t.dim();
    let floor = sigma_floor(t.gs_norm(), dim);
    if sigma < floor {
        return Err(TrapdoorError::Gauss(GaussError::SigmaTooSmall {
            sigma,
            floor,
        }));
    }
    let gs_in = t.gs();
    // Size-reduce the input columns (exact, GS profile unchanged).
    let mut cols: Vec<Vec<i64>> = (0..dim).map(|j| t.matrix().column(j)).collect();
    size_reduce(&mut cols, gs_in);
    // Mix scaled earlier (size-reduced input) columns into later ones.
    // Mixing input rather than already-mixed columns keeps entry growth
    // additive instead of compounding geometrically across columns.
    let mut out_cols: Vec<Vec<i64>> = Vec::with_capacity(dim);
    let mut vectors: Vec<Vec<f64>> = Vec::with_capacity(dim);
    for j in 0..dim {
        let mut col = cols[j].clone();
        for i in 0..j {
            let width = (sigma / gs_in.norms_sq[i].sqrt()).clamp(2.0, 4096.0);
            let nij = sample_z(0.0, GaussParam::new(width).unwrap(), rng);
            if nij != 0 {
                for (cv, ov) in col.iter_mut().zip(&cols[i]) {
                    *cv = cv
                        .checked_add(nij.checked_mul(*ov).expect("rand_basis overflow"))
                        .expect("rand_basis overflow");
                }
            }
        }
        let sign: i64 = if rng.gen_bool() { 1 } else { -1 };
        if sign < 0 {
            for cv in col.iter_mut() {
                *cv = -*cv;
            }
        }
        out_cols.push(col);
        vectors.push(
            gs_in.vectors[j]
                .iter()
                .map(|&v| v * sign as f64)
                .collect(),
        );
    }
    // One more size-reduction pass keeps the mixed columns short.
    let gs = GramSchmidtData {
        vectors,
        norms_sq: gs_in.norms_sq.clone(),
        gs_norm: gs_in.gs_norm,
    };
    size_reduce(&mut out_cols, &gs);
    let mut mat = IntMatrix::zero(dim, dim);
    for (j, col) in out_cols.iter().enumerate() {
        mat.set_column(j, col);
    }
    LatticeBasis::with_gs(m_mat.clone(), mat, gs)
}

trait GenBool {
    fn gen_bool(&mut self) -> bool;
}

impl GenBool for RngStream {
    fn gen_bool(&mut self) -> bool {
        use rand::RngCore;
        self.next_u32() & 1 == 1
    }
}

/// In-place size reduction of columns against earlier columns using the given
/// (fixed) GS data. Exact integer updates; two refinement passes absorb the
/// double-precision rounding of the nearest-plane coefficients.
fn size_reduce(cols: &mut [Vec<i64>], gs: &GramSchmidtData) {
    let dim = cols.len();
    for j in 1..dim {
        for _pass in 0..2 {
            let mut changed = false;
            let cf: Vec<f64> = cols[j].iter().map(|&v| v as f64).collect();
            let mut c = cf;
            for i in (0..j).rev() {
                let mu = c
                    .iter()
                    .zip(&gs.vectors[i])
                    .map(|(a, b)| a * b)
                    .sum::<f64>()
                    / gs.norms_sq[i];
                let zi = mu.round();
                if zi != 0.0 {
                    changed = true;
                    let z = zi as i64;
                    // exact update on the integer column, approximate on c
                    for idx in 0..c.len() {
                        let sub = z.checked_mul(cols[i][idx]).expect("size reduction overflow");
                        cols[j][idx] = cols[j][idx].checked_sub(sub).expect("size reduction overflow");
                        c[idx] -= zi * cols[i][idx] as f64;
                    }
                }
            }
            if !changed {
                break;
            }
        }
    }
}
