//! Exact modular linear algebra over Z_q, the gadget matrix G with its
//! bit-decomposition inverse, and the Gram-Schmidt / operator-norm utilities
//! the rest of the crate is built on.
//!
//! Entries are stored as 64-bit words in canonical form `[0, q)`; q is an odd
//! prime below 2^62 so products fit in 128-bit intermediates. A separate
//! centered accessor maps into `(-q/2, q/2]` for norm accounting and the
//! decryption threshold test.

use rand::Rng;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ZqError {
    #[error("modulus {0} is not an odd prime in [3, 2^62)")]
    BadModulus(u64),
    #[error("dimension mismatch: {0}")]
    DimMismatch(String),
    #[error("matrix is rank-deficient over the rationals")]
    RankDeficient,
}

/// An odd prime modulus q with its bit length k = ceil(log2 q).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Modulus {
    q: u64,
    k: u32,
}

impl Modulus {
    pub fn new(q: u64) -> Result<Self, ZqError> {
        if q < 3 || q >= (1u64 << 62) || q % 2 == 0 || !is_prime_u64(q) {
            return Err(ZqError::BadModulus(q));
        }
        // k = ceil(log2 q); q is odd so q is never an exact power of two.
        let k = 64 - (q - 1).leading_zeros();
        Ok(Modulus { q, k })
    }

    pub fn q(&self) -> u64 {
        self.q
    }

    /// Bit length k = ceil(log2 q).
    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn add(&self, a: u64, b: u64) -> u64 {
        let s = a + b; // a, b < q < 2^62, no overflow
        if s >= self.q {
            s - self.q
        } else {
            s
        }
    }

    pub fn sub(&self, a: u64, b: u64) -> u64 {
        if a >= b {
            a - b
        } else {
            a + self.q - b
        }
    }

    pub fn neg(&self, a: u64) -> u64 {
        if a == 0 {
            0
        } else {
            self.q - a
        }
    }

    pub fn mul(&self, a: u64, b: u64) -> u64 {
        ((a as u128 * b as u128) % self.q as u128) as u64
    }

    pub fn pow(&self, mut base: u64, mut e: u64) -> u64 {
        let mut acc = 1u64;
        base %= self.q;
        while e > 0 {
            if e & 1 == 1 {
                acc = self.mul(acc, base);
            }
            base = self.mul(base, base);
            e >>= 1;
        }
        acc
    }

    /// Multiplicative inverse; q is prime so every nonzero element has one.
    pub fn inv(&self, a: u64) -> Option<u64> {
        if a % self.q == 0 {
            None
        } else {
            Some(self.pow(a, self.q - 2))
        }
    }

    /// Reduce a signed 128-bit value to canonical form.
    pub fn reduce_i128(&self, x: i128) -> u64 {
        let q = self.q as i128;
        let r = x % q;
        if r < 0 {
            (r + q) as u64
        } else {
            r as u64
        }
    }

    pub fn reduce_i64(&self, x: i64) -> u64 {
        self.reduce_i128(x as i128)
    }

    /// Centered representative in (-q/2, q/2].
    pub fn centered(&self, a: u64) -> i64 {
        debug_assert!(a < self.q);
        if a * 2 > self.q {
            a as i64 - self.q as i64
        } else {
            a as i64
        }
    }
}

fn is_prime_u64(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    for p in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        if n == p {
            return true;
        }
        if n % p == 0 {
            return false;
        }
    }
    // Deterministic Miller-Rabin for 64-bit inputs.
    let mut d = n - 1;
    let mut s = 0u32;
    while d % 2 == 0 {
        d /= 2;
        s += 1;
    }
    let mulmod = |a: u64, b: u64| ((a as u128 * b as u128) % n as u128) as u64;
    let powmod = |mut a: u64, mut e: u64| {
        let mut acc = 1u64;
        a %= n;
        while e > 0 {
            if e & 1 == 1 {
                acc = mulmod(acc, a);
            }
            a = mulmod(a, a);
            e >>= 1;
        }
        acc
    };
    'witness: for a in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        let mut x = powmod(a, d);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 0..s - 1 {
            x = mulmod(x, x);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// Smallest prime strictly greater than `n` (panics past u64 range).
pub fn next_prime(mut n: u64) -> u64 {
    loop {
        n = n.checked_add(1).expect("prime search overflow");
        if is_prime_u64(n) {
            return n;
        }
    }
}

/// Dense matrix over Z_q, row-major, entries canonical in [0, q).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ZqMatrix {
    rows: usize,
    cols: usize,
    modulus: Modulus,
    data: Vec<u64>,
}

impl ZqMatrix {
    pub fn zero(modulus: Modulus, rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "matrix dimensions must be positive");
        ZqMatrix {
            rows,
            cols,
            modulus,
            data: vec![0; rows * cols],
        }
    }

    pub fn from_fn(
        modulus: Modulus,
        rows: usize,
        cols: usize,
        mut f: impl FnMut(usize, usize) -> u64,
    ) -> Self {
        let mut m = Self::zero(modulus, rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m.data[i * cols + j] = f(i, j) % modulus.q();
            }
        }
        m
    }

    pub fn uniform(modulus: Modulus, rows: usize, cols: usize, rng: &mut impl Rng) -> Self {
        let mut m = Self::zero(modulus, rows, cols);
        for e in m.data.iter_mut() {
            *e = rng.gen_range(0..modulus.q());
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn modulus(&self) -> Modulus {
        self.modulus
    }

    pub fn get(&self, i: usize, j: usize) -> u64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: u64) {
        self.data[i * self.cols + j] = v % self.modulus.q();
    }

    pub fn entries(&self) -> &[u64] {
        &self.data
    }

    pub fn add(&self, other: &ZqMatrix) -> ZqMatrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let mut out = self.clone();
        for (a, b) in out.data.iter_mut().zip(&other.data) {
            *a = self.modulus.add(*a, *b);
        }
        out
    }

    pub fn sub(&self, other: &ZqMatrix) -> ZqMatrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let mut out = self.clone();
        for (a, b) in out.data.iter_mut().zip(&other.data) {
            *a = self.modulus.sub(*a, *b);
        }
        out
    }

    pub fn neg(&self) -> ZqMatrix {
        let mut out = self.clone();
        for a in out.data.iter_mut() {
            *a = self.modulus.neg(*a);
        }
        out
    }

    pub fn scalar_mul(&self, c: u64) -> ZqMatrix {
        let c = c % self.modulus.q();
        let mut out = self.clone();
        for a in out.data.iter_mut() {
            *a = self.modulus.mul(*a, c);
        }
        out
    }

    pub fn matmul(&self, other: &ZqMatrix) -> ZqMatrix {
        assert_eq!(self.cols, other.rows, "matmul dimension mismatch");
        let q = self.modulus;
        let mut out = ZqMatrix::zero(q, self.rows, other.cols);
        for i in 0..self.rows {
            for kk in 0..self.cols {
                let a = self.data[i * self.cols + kk];
                if a == 0 {
                    continue;
                }
                let row = &other.data[kk * other.cols..(kk + 1) * other.cols];
                let dst = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (o, &b) in dst.iter_mut().zip(row) {
                    *o = q.add(*o, q.mul(a, b));
                }
            }
        }
        out
    }

    /// Multiply by an integer matrix on the right, reducing mod q.
    pub fn matmul_int(&self, other: &IntMatrix) -> ZqMatrix {
        assert_eq!(self.cols, other.rows, "matmul dimension mismatch");
        let q = self.modulus;
        let mut out = ZqMatrix::zero(q, self.rows, other.cols);
        for i in 0..self.rows {
            for kk in 0..self.cols {
                let a = self.data[i * self.cols + kk];
                if a == 0 {
                    continue;
                }
                let row = &other.data[kk * other.cols..(kk + 1) * other.cols];
                let dst = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (o, &b) in dst.iter_mut().zip(row) {
                    let term = q.reduce_i128(a as i128 * b as i128);
                    *o = q.add(*o, term);
                }
            }
        }
        out
    }

    pub fn transpose(&self) -> ZqMatrix {
        let mut out = ZqMatrix::zero(self.modulus, self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        out
    }

    /// Horizontal concatenation [self | other].
    pub fn hconcat(&self, other: &ZqMatrix) -> ZqMatrix {
        assert_eq!(self.rows, other.rows);
        let cols = self.cols + other.cols;
        let mut out = ZqMatrix::zero(self.modulus, self.rows, cols);
        for i in 0..self.rows {
            out.data[i * cols..i * cols + self.cols]
                .copy_from_slice(&self.data[i * self.cols..(i + 1) * self.cols]);
            out.data[i * cols + self.cols..(i + 1) * cols]
                .copy_from_slice(&other.data[i * other.cols..(i + 1) * other.cols]);
        }
        out
    }

    pub fn column(&self, j: usize) -> Vec<u64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&e| e == 0)
    }

    /// Centered representatives of all entries, row-major.
    pub fn centered_entries(&self) -> Vec<i64> {
        self.data.iter().map(|&e| self.modulus.centered(e)).collect()
    }
}

/// Dense integer matrix, row-major. Holds short vectors, trapdoor bases and
/// preimages, where magnitude (not residue) is what matters.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntMatrix {
    rows: usize,
    cols: usize,
    data: Vec<i64>,
}

impl IntMatrix {
    pub fn zero(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "matrix dimensions must be positive");
        IntMatrix {
            rows,
            cols,
            data: vec![0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zero(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> i64) -> Self {
        let mut m = Self::zero(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m.data[i * cols + j] = f(i, j);
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> i64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: i64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn entries(&self) -> &[i64] {
        &self.data
    }

    pub fn add(&self, other: &IntMatrix) -> IntMatrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let mut out = self.clone();
        for (a, b) in out.data.iter_mut().zip(&other.data) {
            *a = a.checked_add(*b).expect("integer matrix overflow");
        }
        out
    }

    pub fn sub(&self, other: &IntMatrix) -> IntMatrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let mut out = self.clone();
        for (a, b) in out.data.iter_mut().zip(&other.data) {
            *a = a.checked_sub(*b).expect("integer matrix overflow");
        }
        out
    }

    pub fn scale(&self, c: i64) -> IntMatrix {
        let mut out = self.clone();
        for a in out.data.iter_mut() {
            *a = a.checked_mul(c).expect("integer matrix overflow");
        }
        out
    }

    pub fn matmul(&self, other: &IntMatrix) -> IntMatrix {
        assert_eq!(self.cols, other.rows, "matmul dimension mismatch");
        let mut out = IntMatrix::zero(self.rows, other.cols);
        for i in 0..self.rows {
            for kk in 0..self.cols {
                let a = self.data[i * self.cols + kk];
                if a == 0 {
                    continue;
                }
                let row = &other.data[kk * other.cols..(kk + 1) * other.cols];
                let dst = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (o, &b) in dst.iter_mut().zip(row) {
                    let term = (a as i128) * (b as i128);
                    let sum = (*o as i128) + term;
                    *o = i64::try_from(sum).expect("integer matrix overflow");
                }
            }
        }
        out
    }

    /// Multiply by a Z_q matrix on the right, reducing the result mod q.
    pub fn matmul_zq(&self, other: &ZqMatrix) -> ZqMatrix {
        assert_eq!(self.cols, other.rows(), "matmul dimension mismatch");
        let q = other.modulus();
        let mut out = ZqMatrix::zero(q, self.rows, other.cols());
        for i in 0..self.rows {
            for kk in 0..self.cols {
                let a = self.data[i * self.cols + kk];
                if a == 0 {
                    continue;
                }
                for j in 0..other.cols() {
                    let term = q.reduce_i128(a as i128 * other.get(kk, j) as i128);
                    let cur = out.get(i, j);
                    out.set(i, j, q.add(cur, term));
                }
            }
        }
        out
    }

    pub fn transpose(&self) -> IntMatrix {
        let mut out = IntMatrix::zero(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        out
    }

    pub fn hconcat(&self, other: &IntMatrix) -> IntMatrix {
        assert_eq!(self.rows, other.rows);
        let cols = self.cols + other.cols;
        let mut out = IntMatrix::zero(self.rows, cols);
        for i in 0..self.rows {
            out.data[i * cols..i * cols + self.cols]
                .copy_from_slice(&self.data[i * self.cols..(i + 1) * self.cols]);
            out.data[i * cols + self.cols..(i + 1) * cols]
                .copy_from_slice(&other.data[i * other.cols..(i + 1) * other.cols]);
        }
        out
    }

    /// Stack `self` on top of `other`.
    pub fn vconcat(&self, other: &IntMatrix) -> IntMatrix {
        assert_eq!(self.cols, other.cols);
        let mut out = IntMatrix::zero(self.rows + other.rows, self.cols);
        out.data[..self.data.len()].copy_from_slice(&self.data);
        out.data[self.data.len()..].copy_from_slice(&other.data);
        out
    }

    pub fn column(&self, j: usize) -> Vec<i64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn set_column(&mut self, j: usize, col: &[i64]) {
        assert_eq!(col.len(), self.rows);
        for (i, &v) in col.iter().enumerate() {
            self.set(i, j, v);
        }
    }

    pub fn column_norm(&self, j: usize) -> f64 {
        (0..self.rows)
            .map(|i| {
                let v = self.get(i, j) as f64;
                v * v
            })
            .sum::<f64>()
            .sqrt()
    }

    pub fn max_abs(&self) -> i64 {
        self.data.iter().map(|e| e.abs()).max().unwrap_or(0)
    }

    /// Reduce every entry mod q into canonical form.
    pub fn to_zq(&self, modulus: Modulus) -> ZqMatrix {
        ZqMatrix::from_fn(modulus, self.rows, self.cols, |i, j| {
            modulus.reduce_i64(self.get(i, j))
        })
    }
}

/// Real Gram-Schmidt data for an integer matrix, processed in column order.
#[derive(Debug, Clone)]
pub struct GramSchmidtData {
    /// Orthogonalized columns (double precision).
    pub vectors: Vec<Vec<f64>>,
    /// Squared norms of the orthogonalized columns.
    pub norms_sq: Vec<f64>,
    /// max_i ||b~_i||.
    pub gs_norm: f64,
}

/// Classical Gram-Schmidt over the reals, column by column.
///
/// Fails on rank-deficient input (an orthogonalized column collapsing below
/// 1e-9 of its source column's norm).
pub fn gram_schmidt(b: &IntMatrix) -> Result<GramSchmidtData, ZqError> {
    let rows = b.rows();
    let cols = b.cols();
    let mut vectors: Vec<Vec<f64>> = Vec::with_capacity(cols);
    let mut norms_sq = Vec::with_capacity(cols);
    for j in 0..cols {
        let mut v: Vec<f64> = (0..rows).map(|i| b.get(i, j) as f64).collect();
        let orig_sq: f64 = v.iter().map(|x| x * x).sum();
        // Modified-GS update order for numerical stability; the result is the
        // same orthogonalization as the classical column-order recurrence.
        for (w, &w_sq) in vectors.iter().zip(&norms_sq) {
            let mu = dot(&v, w) / w_sq;
            for (vi, wi) in v.iter_mut().zip(w) {
                *vi -= mu * wi;
            }
        }
        let n_sq: f64 = v.iter().map(|x| x * x).sum();
        if orig_sq == 0.0 || n_sq < (1e-9f64).powi(2) * orig_sq {
            return Err(ZqError::RankDeficient);
        }
        vectors.push(v);
        norms_sq.push(n_sq);
    }
    let gs_norm = norms_sq.iter().fold(0.0f64, |a, &b| a.max(b)).sqrt();
    Ok(GramSchmidtData {
        vectors,
        norms_sq,
        gs_norm,
    })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Operator 2-norm (largest singular value) by power iteration on M^T M.
///
/// Deterministic all-ones start vector, at most 200 iterations, relative
/// tolerance 1e-6 on the eigenvalue estimate.
pub fn sup_norm(m: &IntMatrix) -> f64 {
    let rows = m.rows();
    let cols = m.cols();
    let mf: Vec<f64> = m.entries().iter().map(|&e| e as f64).collect();
    let mut v = vec![1.0f64; cols];
    let mut lambda = 0.0f64;
    let mut tmp = vec![0.0f64; rows];
    for _ in 0..200 {
        // tmp = M v
        for i in 0..rows {
            tmp[i] = dot(&mf[i * cols..(i + 1) * cols], &v);
        }
        // w = M^T tmp
        let mut w = vec![0.0f64; cols];
        for i in 0..rows {
            let t = tmp[i];
            if t != 0.0 {
                for (wj, &mij) in w.iter_mut().zip(&mf[i * cols..(i + 1) * cols]) {
                    *wj += t * mij;
                }
            }
        }
        let norm = dot(&w, &w).sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        let new_lambda = dot(&w, &v);
        for wj in w.iter_mut() {
            *wj /= norm;
        }
        v = w;
        if lambda > 0.0 && (new_lambda - lambda).abs() <= 1e-6 * new_lambda.abs() {
            lambda = new_lambda;
            break;
        }
        lambda = new_lambda;
    }
    lambda.max(0.0).sqrt()
}

/// The gadget matrix G = I_n (tensor) g^T with g = (1, 2, ..., 2^{k-1});
/// n rows, n*k columns.
pub fn gadget_matrix(modulus: Modulus, n: usize) -> ZqMatrix {
    let k = modulus.k() as usize;
    let mut g = ZqMatrix::zero(modulus, n, n * k);
    for i in 0..n {
        for j in 0..k {
            g.set(i, i * k + j, (1u64 << j) % modulus.q());
        }
    }
    g
}

/// G padded with zero columns to width `m` (the scheme works with n x m
/// matrices throughout; G occupies the first n*k columns).
pub fn gadget_matrix_padded(modulus: Modulus, n: usize, m: usize) -> ZqMatrix {
    let k = modulus.k() as usize;
    assert!(m >= n * k, "padded gadget width below n*k");
    let mut g = ZqMatrix::zero(modulus, n, m);
    for i in 0..n {
        for j in 0..k {
            g.set(i, i * k + j, (1u64 << j) % modulus.q());
        }
    }
    g
}

/// Bit decomposition G^{-1}(M): entries in {0,1} with
/// gadget_matrix(q, n) * result == M (mod q). Input n x w, output nk x w.
pub fn bit_decompose(modulus: Modulus, m: &ZqMatrix) -> IntMatrix {
    bit_decompose_rows(modulus, m, m.rows() * modulus.k() as usize)
}

/// Bit decomposition against the zero-padded gadget: output has `out_rows`
/// rows, the trailing rows (beyond n*k) all zero.
pub fn bit_decompose_rows(modulus: Modulus, m: &ZqMatrix, out_rows: usize) -> IntMatrix {
    let k = modulus.k() as usize;
    let n = m.rows();
    assert!(out_rows >= n * k, "output rows below n*k");
    let mut out = IntMatrix::zero(out_rows, m.cols());
    for i in 0..n {
        for j in 0..m.cols() {
            let mut v = m.get(i, j);
            for b in 0..k {
                out.set(i * k + b, j, (v & 1) as i64);
                v >>= 1;
            }
        }
    }
    out
}
