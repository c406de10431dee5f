//! Delegatable fully key-homomorphic encryption over plain LWE lattices:
//! key generation, key homomorphism (first delegation), key delegation,
//! encryption, extended ciphertext evaluation, and decryption.
//!
//! Keys are self-describing: a delegated key stores its target value y and
//! circuit list, and every consumer recomputes the extended parent matrix
//! [A | yG+B_f1 | ... | yG+B_fk] from the public key rather than trusting
//! stored matrices.

use crate::circuit::{Circuit, CircuitError};
use crate::gauss::RngStream;
use crate::params::Profile;
use crate::trapdoor::{ext_basis_left, rand_basis, sample_pre, trap_gen, LatticeBasis, TrapdoorError};
use crate::zq_core::{gadget_matrix_padded, IntMatrix, ZqMatrix};
use once_cell::sync::OnceCell;
use rand::Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DfkheError {
    #[error("expected {expected} {what}, got {got}")]
    Arity {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("delegated key targets y = {key_y}, delegation requested y = {requested}")]
    YMismatch { key_y: u64, requested: u64 },
    #[error("key level {level} at eta_max {eta_max}: cannot delegate further")]
    LevelOverflow { level: usize, eta_max: u32 },
    #[error("stored evaluated matrix differs from recomputation; key corrupt")]
    KeyInconsistent,
    #[error("ciphertext rejected: circuit {index} evaluates to {got}, key requires {want}")]
    Reject { index: usize, got: u64, want: u64 },
    #[error(transparent)]
    Trapdoor(#[from] TrapdoorError),
    #[error(transparent)]
    Circuit(#[from] CircuitError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DfkhePublicKey {
    pub profile: Profile,
    /// n x m, from trap_gen.
    pub a: ZqMatrix,
    /// One n x m matrix per input wire.
    pub b: Vec<ZqMatrix>,
    /// n x m; the plaintext-masking matrix.
    pub u: ZqMatrix,
}

impl DfkhePublicKey {
    pub fn gadget(&self) -> ZqMatrix {
        gadget_matrix_padded(self.profile.modulus(), self.profile.n, self.profile.m())
    }
}

#[derive(Debug)]
pub struct DfkheMasterKey {
    pub t_a: LatticeBasis,
    dec_seed: [u8; 32],
    r_cache: OnceCell<IntMatrix>,
}

/// A key for [A | yG+B_f1 | ... | yG+B_fk]. Level = number of circuits;
/// level 0 (empty circuit list) is the master key viewed uniformly.
#[derive(Debug)]
pub struct DelegatedKey {
    pub y: u64,
    pub circuits: Vec<Circuit>,
    /// Evaluated matrices B_fj, cached from eval_pk; consumers verify them.
    pub b_f: Vec<ZqMatrix>,
    pub t: LatticeBasis,
    dec_seed: [u8; 32],
    r_cache: OnceCell<IntMatrix>,
}

impl DelegatedKey {
    pub fn level(&self) -> usize {
        self.circuits.len()
    }

    /// Reassemble from parts (deserialization); the caller supplies the seed
    /// that makes dec deterministic for this key.
    pub fn from_parts(
        y: u64,
        circuits: Vec<Circuit>,
        b_f: Vec<ZqMatrix>,
        t: LatticeBasis,
        dec_seed: [u8; 32],
    ) -> DelegatedKey {
        DelegatedKey {
            y,
            circuits,
            b_f,
            t,
            dec_seed,
            r_cache: OnceCell::new(),
        }
    }

    pub fn dec_seed(&self) -> [u8; 32] {
        self.dec_seed
    }
}

impl DfkheMasterKey {
    pub fn from_parts(t_a: LatticeBasis, dec_seed: [u8; 32]) -> DfkheMasterKey {
        DfkheMasterKey {
            t_a,
            dec_seed,
            r_cache: OnceCell::new(),
        }
    }

    pub fn dec_seed(&self) -> [u8; 32] {
        self.dec_seed
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DfkheCiphertext {
    pub c_in: Vec<u64>,
    /// One length-m vector per input wire.
    pub c: Vec<Vec<u64>>,
    pub c_out: Vec<u64>,
    /// Public attribute values, one per wire.
    pub t: Vec<u64>,
}

/// KGen: trapdoored A plus uniform wire matrices B_i and masking matrix U.
/// The plaintext space is {0,1}^m.
pub fn kgen(profile: &Profile, rng: &mut RngStream) -> Result<(DfkhePublicKey, DfkheMasterKey), DfkheError> {
    let modulus = profile.modulus();
    let n = profile.n;
    let m = profile.m();
    let (a, t_a) = trap_gen(modulus, n, m, rng)?;
    let b = (0..profile.wires())
        .map(|_| ZqMatrix::uniform(modulus, n, m, rng))
        .collect();
    let u = ZqMatrix::uniform(modulus, n, m, rng);
    let pk = DfkhePublicKey {
        profile: profile.clone(),
        a,
        b,
        u,
    };
    let msk = DfkheMasterKey::from_parts(t_a, rng.derive_seed());
    Ok((pk, msk))
}

/// The extended parent [A | yG+B_f1 | ... | yG+B_fk] with each B_fj
/// recomputed from the public key; also returns the recomputed B_fj list.
pub fn extended_parent(
    pk: &DfkhePublicKey,
    y: u64,
    circuits: &[Circuit],
) -> Result<(ZqMatrix, Vec<ZqMatrix>), DfkheError> {
    let g = pk.gadget();
    let yg = g.scalar_mul(y);
    let mut parent = pk.a.clone();
    let mut b_f = Vec::with_capacity(circuits.len());
    for f in circuits {
        let bf = f.eval_pk(&pk.b)?;
        parent = parent.hconcat(&yg.add(&bf));
        b_f.push(bf);
    }
    Ok((parent, b_f))
}

fn delegate(
    pk: &DfkhePublicKey,
    base: &LatticeBasis,
    y: u64,
    mut circuits: Vec<Circuit>,
    f_new: Circuit,
    rng: &mut RngStream,
) -> Result<DelegatedKey, DfkheError> {
    let new_level = circuits.len() + 1;
    if new_level > pk.profile.eta_max as usize {
        return Err(DfkheError::LevelOverflow {
            level: circuits.len(),
            eta_max: pk.profile.eta_max,
        });
    }
    circuits.push(f_new);
    let (parent, b_f) = extended_parent(pk, y, &circuits)?;
    // The new block is the last m columns of the recomputed parent.
    let m = pk.profile.m();
    let old_cols = parent.cols() - m;
    let new_block = ZqMatrix::from_fn(pk.profile.modulus(), pk.profile.n, m, |i, j| {
        parent.get(i, old_cols + j)
    });
    let extended = ext_basis_left(base.parent(), &new_block, base)?;
    let sigma = pk.profile.sigma(new_level as u32);
    let t = rand_basis(&parent, &extended, sigma, rng)?;
    Ok(DelegatedKey {
        y,
        circuits,
        b_f,
        t,
        dec_seed: rng.derive_seed(),
        r_cache: OnceCell::new(),
    })
}

/// KHom: first delegation, from the master key to (y, f1).
pub fn khom(
    pk: &DfkhePublicKey,
    msk: &DfkheMasterKey,
    y: u64,
    f1: Circuit,
    rng: &mut RngStream,
) -> Result<DelegatedKey, DfkheError> {
    delegate(pk, &msk.t_a, y, Vec::new(), f1, rng)
}

/// KDel: extend a level-(k-1) key by one more circuit under the same y.
pub fn kdel(
    pk: &DfkhePublicKey,
    dk: &DelegatedKey,
    y: u64,
    fk: Circuit,
    rng: &mut RngStream,
) -> Result<DelegatedKey, DfkheError> {
    if dk.y != y {
        return Err(DfkheError::YMismatch {
            key_y: dk.y,
            requested: y,
        });
    }
    // Structural soundness: the stored basis must belong to the parent
    // recomputed from (pk, y, circuits), and stored B_f must match.
    let (parent, b_f) = extended_parent(pk, y, &dk.circuits)?;
    if parent != *dk.t.parent() || b_f != dk.b_f {
        return Err(DfkheError::KeyInconsistent);
    }
    delegate(pk, &dk.t, y, dk.circuits.clone(), fk, rng)
}

/// Enc: c_in = A^T s + e_in, c_i = (t_i G + B_i)^T s + S_i^T e_in with
/// S_i uniform +-1, c_out = U^T s + e_out + mu * ceil(q/2). Noise is
/// chi0-bounded uniform.
pub fn enc(
    pk: &DfkhePublicKey,
    mu: &[u8],
    t: &[u64],
    rng: &mut RngStream,
) -> Result<DfkheCiphertext, DfkheError> {
    let profile = &pk.profile;
    let q = profile.modulus();
    let m = profile.m();
    let wires = profile.wires();
    if mu.len() != m {
        return Err(DfkheError::Arity {
            what: "plaintext bits",
            expected: m,
            got: mu.len(),
        });
    }
    if t.len() != wires {
        return Err(DfkheError::Arity {
            what: "attributes",
            expected: wires,
            got: t.len(),
        });
    }
    assert!(mu.iter().all(|&b| b <= 1), "plaintext must be bits");
    let chi0 = profile.chi0 as i64;
    let s = ZqMatrix::uniform(q, profile.n, 1, rng);
    let e_in: Vec<i64> = (0..m).map(|_| rng.gen_range(-chi0..=chi0)).collect();
    let g = pk.gadget();
    let a_ts = pk.a.transpose().matmul(&s);
    let c_in: Vec<u64> = (0..m)
        .map(|i| q.add(a_ts.get(i, 0), q.reduce_i64(e_in[i])))
        .collect();
    let mut c = Vec::with_capacity(wires);
    for (i, b_i) in pk.b.iter().enumerate() {
        let h_i = g.scalar_mul(t[i] % q.q()).add(b_i);
        let clean = h_i.transpose().matmul(&s);
        // S_i^T e_in with S_i entries +-1, drawn row-major.
        let mut noise = vec![0i64; m];
        for &e in &e_in {
            for nv in noise.iter_mut() {
                let sign: i64 = if rng.gen::<bool>() { 1 } else { -1 };
                *nv += sign * e;
            }
        }
        let ci: Vec<u64> = (0..m)
            .map(|j| q.add(clean.get(j, 0), q.reduce_i64(noise[j])))
            .collect();
        c.push(ci);
    }
    let e_out: Vec<i64> = (0..m).map(|_| rng.gen_range(-chi0..=chi0)).collect();
    let half = q.q() / 2 + 1; // ceil(q/2) for odd q
    let u_ts = pk.u.transpose().matmul(&s);
    let c_out: Vec<u64> = (0..m)
        .map(|i| {
            let base = q.add(u_ts.get(i, 0), q.reduce_i64(e_out[i]));
            if mu[i] == 1 {
                q.add(base, half)
            } else {
                base
            }
        })
        .collect();
    Ok(DfkheCiphertext {
        c_in,
        c,
        c_out,
        t: t.iter().map(|&v| v % q.q()).collect(),
    })
}

/// ExtEval: evaluate each circuit on the ciphertext's wire encodings,
/// producing one evaluated vector per circuit.
pub fn ext_eval(
    pk: &DfkhePublicKey,
    f_list: &[Circuit],
    ct: &DfkheCiphertext,
) -> Result<Vec<Vec<u64>>, DfkheError> {
    let wires = pk.profile.wires();
    if ct.t.len() != wires || ct.c.len() != wires {
        return Err(DfkheError::Arity {
            what: "ciphertext wires",
            expected: wires,
            got: ct.t.len(),
        });
    }
    let inputs: Vec<(u64, ZqMatrix, Vec<u64>)> = (0..wires)
        .map(|i| (ct.t[i], pk.b[i].clone(), ct.c[i].clone()))
        .collect();
    let mut out = Vec::with_capacity(f_list.len());
    for f in f_list {
        out.push(f.eval_ct(&inputs)?);
    }
    Ok(out)
}

fn dec_core(
    pk: &DfkhePublicKey,
    basis: &LatticeBasis,
    circuits: &[Circuit],
    y: u64,
    dec_seed: [u8; 32],
    r_cache: &OnceCell<IntMatrix>,
    ct: &DfkheCiphertext,
    check_policy: bool,
) -> Result<Vec<u8>, DfkheError> {
    let profile = &pk.profile;
    let q = profile.modulus();
    let m = profile.m();
    if check_policy {
        for (j, f) in circuits.iter().enumerate() {
            let v = f.eval_value(&ct.t)?;
            if v != y {
                return Err(DfkheError::Reject {
                    index: j,
                    got: v,
                    want: y,
                });
            }
        }
    }
    let evaluated = ext_eval(pk, circuits, ct)?;
    let sigma = profile.sigma(circuits.len() as u32);
    let r = r_cache
        .get_or_try_init(|| {
            let mut rng = RngStream::new(dec_seed, 0);
            sample_pre(basis.parent(), basis, &pk.u, sigma, &mut rng)
        })
        .map_err(|e: TrapdoorError| DfkheError::from(e))?;
    // concatenated (c_in | c_f1 | ... | c_fk)
    let mut cvec = ct.c_in.clone();
    for ev in &evaluated {
        cvec.extend_from_slice(ev);
    }
    debug_assert_eq!(cvec.len(), r.rows());
    let mut mu = Vec::with_capacity(m);
    let quarter = q.q() / 4;
    for l in 0..m {
        let mut acc: u64 = 0;
        for (i, &cv) in cvec.iter().enumerate() {
            let rv = r.get(i, l);
            acc = q.add(acc, q.mul(q.reduce_i64(rv), cv));
        }
        let mu_bar = q.centered(q.sub(ct.c_out[l], acc));
        // |mu_bar| < q/4 decodes 0; the >= q/4 boundary decodes 1.
        mu.push(if mu_bar.unsigned_abs() < quarter { 0 } else { 1 });
    }
    Ok(mu)
}

/// Max per-slot decoding noise |μ̄ − μ·⌈q/2⌉| for a known plaintext,
/// using a delegated key. Instrumentation for the noise benchmark; the
/// policy check still applies so only legitimately decryptable
/// ciphertexts are measured.
pub fn dec_noise(
    pk: &DfkhePublicKey,
    dk: &DelegatedKey,
    ct: &DfkheCiphertext,
    mu: &[u8],
) -> Result<i64, DfkheError> {
    dec(pk, dk, ct)?;
    noise_from(pk, &dk.t, &dk.circuits, dk.dec_seed, &dk.r_cache, ct, mu)
}

/// Same instrumentation with the master key.
pub fn dec_noise_master(
    pk: &DfkhePublicKey,
    msk: &DfkheMasterKey,
    ct: &DfkheCiphertext,
    mu: &[u8],
) -> Result<i64, DfkheError> {
    dec_master(pk, msk, ct)?;
    noise_from(pk, &msk.t_a, &[], msk.dec_seed, &msk.r_cache, ct, mu)
}

#[allow(clippy::too_many_arguments)]
fn noise_from(
    pk: &DfkhePublicKey,
    basis: &LatticeBasis,
    circuits: &[Circuit],
    dec_seed: [u8; 32],
    r_cache: &OnceCell<IntMatrix>,
    ct: &DfkheCiphertext,
    mu: &[u8],
) -> Result<i64, DfkheError> {
    let profile = &pk.profile;
    let q = profile.modulus();
    let m = profile.m();
    if mu.len() != m {
        return Err(DfkheError::Arity {
            what: "plaintext bits",
            expected: m,
            got: mu.len(),
        });
    }
    let evaluated = ext_eval(pk, circuits, ct)?;
    let sigma = profile.sigma(circuits.len() as u32);
    let r = r_cache
        .get_or_try_init(|| {
            let mut rng = RngStream::new(dec_seed, 0);
            sample_pre(basis.parent(), basis, &pk.u, sigma, &mut rng)
        })
        .map_err(DfkheError::from)?;
    let mut cvec = ct.c_in.clone();
    for ev in &evaluated {
        cvec.extend_from_slice(ev);
    }
    let half = q.q() / 2 + 1;
    let mut worst: i64 = 0;
    for l in 0..m {
        let mut acc: u64 = 0;
        for (i, &cv) in cvec.iter().enumerate() {
            acc = q.add(acc, q.mul(q.reduce_i64(r.get(i, l)), cv));
        }
        let mu_bar = q.sub(ct.c_out[l], acc);
        let expect = if mu[l] & 1 == 1 { half } else { 0 };
        let resid = q.centered(q.sub(mu_bar, expect)).abs();
        worst = worst.max(resid);
    }
    Ok(worst)
}

/// Dec with a delegated key: rejects unless every stored circuit evaluates
/// to y on the ciphertext attributes, then strips U^T s with a sampled
/// preimage R of U under the extended parent.
pub fn dec(
    pk: &DfkhePublicKey,
    dk: &DelegatedKey,
    ct: &DfkheCiphertext,
) -> Result<Vec<u8>, DfkheError> {
    dec_core(pk, &dk.t, &dk.circuits, dk.y, dk.dec_seed, &dk.r_cache, ct, true)
}

/// Dec with the master key: no policy, parent is A alone.
pub fn dec_master(
    pk: &DfkhePublicKey,
    msk: &DfkheMasterKey,
    ct: &DfkheCiphertext,
) -> Result<Vec<u8>, DfkheError> {
    dec_core(pk, &msk.t_a, &[], 0, msk.dec_seed, &msk.r_cache, ct, true)
}

/// Dec with the policy check disabled: decodes against the wrong-slot
/// encoding when some f_j(t) != y. Exists so tests and the noise benchmark
/// can demonstrate that bypassing the reject path yields garbage rather
/// than plaintext; not reachable from the CLI.
pub fn dec_unchecked(
    pk: &DfkhePublicKey,
    dk: &DelegatedKey,
    ct: &DfkheCiphertext,
) -> Result<Vec<u8>, DfkheError> {
    dec_core(pk, &dk.t, &dk.circuits, dk.y, dk.dec_seed, &dk.r_cache, ct, false)
}
