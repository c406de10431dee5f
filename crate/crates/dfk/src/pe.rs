//! Puncturable encryption on top of the DFKHE scheme: tags are values in
//! [0, 2^ell), bit-decomposed onto the attribute wires, and puncturing a tag
//! t* delegates the key through the equality-test circuit f_{t*} with target
//! value y_0 = 0. A ciphertext decrypts iff none of its tags has been
//! punctured.

use crate::circuit::{build_f_tstar, tags_to_bits, Circuit};
use crate::dfkhe::{
    self, DelegatedKey, DfkheCiphertext, DfkheError, DfkheMasterKey, DfkhePublicKey,
};
use crate::gauss::RngStream;
use crate::params::Profile;
use thiserror::Error;

/// The fixed target value for every puncture delegation.
pub const Y0: u64 = 0;

#[derive(Debug, Error)]
pub enum PeError {
    #[error("tag {0} outside tag space [0, 2^{1})")]
    TagOutOfRange(u64, u32),
    #[error("expected {expected} tags, got {got} (no implicit padding)")]
    TagCount { expected: usize, got: usize },
    #[error("ciphertext revoked: punctured tag {0} present among ciphertext tags")]
    Revoked(u64),
    #[error(transparent)]
    Dfkhe(#[from] DfkheError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PePublicKey {
    pub inner: DfkhePublicKey,
}

impl PePublicKey {
    pub fn profile(&self) -> &Profile {
        &self.inner.profile
    }
}

/// Level-0 keys hold the master trapdoor; punctured keys hold the delegated
/// basis for the accumulated equality circuits.
#[derive(Debug)]
pub enum PunctureKeyInner {
    Master(DfkheMasterKey),
    Delegated(DelegatedKey),
}

#[derive(Debug)]
pub struct PunctureKey {
    /// Punctured tags in puncture order.
    pub tags: Vec<u64>,
    pub inner: PunctureKeyInner,
}

impl PunctureKey {
    pub fn level(&self) -> usize {
        self.tags.len()
    }

    /// The short basis held by this key (master trapdoor at level 0).
    pub fn basis_matrix(&self) -> &crate::zq_core::IntMatrix {
        match &self.inner {
            PunctureKeyInner::Master(msk) => msk.t_a.matrix(),
            PunctureKeyInner::Delegated(dk) => dk.t.matrix(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PeCiphertext {
    pub inner: DfkheCiphertext,
    /// Pre-decomposition tag values, one per tag slot.
    pub tags: Vec<u64>,
}

fn check_tags(profile: &Profile, tags: &[u64]) -> Result<(), PeError> {
    if tags.len() != profile.d {
        return Err(PeError::TagCount {
            expected: profile.d,
            got: tags.len(),
        });
    }
    for &t in tags {
        if t >= 1u64 << profile.ell {
            return Err(PeError::TagOutOfRange(t, profile.ell));
        }
    }
    Ok(())
}

/// The equality circuit for one punctured tag.
pub fn puncture_circuit(profile: &Profile, t_star: u64) -> Result<Circuit, PeError> {
    if t_star >= 1u64 << profile.ell {
        return Err(PeError::TagOutOfRange(t_star, profile.ell));
    }
    Ok(build_f_tstar(profile.modulus(), t_star, profile.d, profile.ell)
        .expect("tag range checked"))
}

/// Key generation: the DFKHE master pair, with the master trapdoor serving
/// as the level-0 (unpunctured) key.
pub fn pe_key(profile: &Profile, rng: &mut RngStream) -> Result<(PePublicKey, PunctureKey), PeError> {
    let (pk, msk) = dfkhe::kgen(profile, rng)?;
    Ok((
        PePublicKey { inner: pk },
        PunctureKey {
            tags: Vec::new(),
            inner: PunctureKeyInner::Master(msk),
        },
    ))
}

/// Encrypt mu (m bits) under d tags; the attribute vector is the
/// concatenated little-endian bit decomposition of the tags.
pub fn pe_enc(
    pk: &PePublicKey,
    mu: &[u8],
    tags: &[u64],
    rng: &mut RngStream,
) -> Result<PeCiphertext, PeError> {
    let profile = pk.profile();
    check_tags(profile, tags)?;
    let bits = tags_to_bits(tags, profile.ell);
    let inner = dfkhe::enc(&pk.inner, mu, &bits, rng)?;
    Ok(PeCiphertext {
        inner,
        tags: tags.to_vec(),
    })
}

/// Puncture one more tag: KHom from the master at level 0, KDel beyond.
pub fn pe_pun(
    pk: &PePublicKey,
    sk: &PunctureKey,
    t_star: u64,
    rng: &mut RngStream,
) -> Result<PunctureKey, PeError> {
    let profile = pk.profile();
    let f = puncture_circuit(profile, t_star)?;
    let delegated = match &sk.inner {
        PunctureKeyInner::Master(msk) => dfkhe::khom(&pk.inner, msk, Y0, f, rng)?,
        PunctureKeyInner::Delegated(dk) => dfkhe::kdel(&pk.inner, dk, Y0, f, rng)?,
    };
    let mut tags = sk.tags.clone();
    tags.push(t_star);
    Ok(PunctureKey {
        tags,
        inner: PunctureKeyInner::Delegated(delegated),
    })
}

/// Decrypt: evaluates every stored equality circuit on the ciphertext tags
/// first and returns the revocation error on any match, before any lattice
/// work happens.
pub fn pe_dec(pk: &PePublicKey, sk: &PunctureKey, ct: &PeCiphertext) -> Result<Vec<u8>, PeError> {
    let profile = pk.profile();
    check_tags(profile, &ct.tags)?;
    // Cheap reject: the punctured tag list is authoritative and equivalent
    // to evaluating the equality circuits (see tests); checking it first
    // avoids sampling work on revoked ciphertexts.
    for &t_star in &sk.tags {
        if ct.tags.contains(&t_star) {
            return Err(PeError::Revoked(t_star));
        }
    }
    match &sk.inner {
        PunctureKeyInner::Master(msk) => Ok(dfkhe::dec_master(&pk.inner, msk, &ct.inner)?),
        PunctureKeyInner::Delegated(dk) => match dfkhe::dec(&pk.inner, dk, &ct.inner) {
            Ok(mu) => Ok(mu),
            // The circuit-level y-check is a second line of defense; map its
            // policy rejection onto the same revocation outcome.
            Err(DfkheError::Reject { .. }) => {
                Err(PeError::Revoked(sk.tags.last().copied().unwrap_or(0)))
            }
            Err(e) => Err(PeError::Dfkhe(e)),
        },
    }
}

/// Max decoding noise |μ̄ − μ·⌈q/2⌉| for a known plaintext; the revocation
/// check still applies, so only legitimately decryptable ciphertexts are
/// measured.
pub fn pe_dec_noise(
    pk: &PePublicKey,
    sk: &PunctureKey,
    ct: &PeCiphertext,
    mu: &[u8],
) -> Result<i64, PeError> {
    let profile = pk.profile();
    check_tags(profile, &ct.tags)?;
    for &t_star in &sk.tags {
        if ct.tags.contains(&t_star) {
            return Err(PeError::Revoked(t_star));
        }
    }
    match &sk.inner {
        PunctureKeyInner::Master(msk) => {
            Ok(dfkhe::dec_noise_master(&pk.inner, msk, &ct.inner, mu)?)
        }
        PunctureKeyInner::Delegated(dk) => Ok(dfkhe::dec_noise(&pk.inner, dk, &ct.inner, mu)?),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::SigmaMode;
    use crate::zq_core::next_prime;

    fn tiny_profile() -> Profile {
        let p = Profile {
            name: "tiny-test".into(),
            n: 2,
            q: next_prime(1 << 34),
            d: 2,
            ell: 2,
            eta_max: 2,
            chi0: 1,
            sigma_mode: SigmaMode::Practical,
            sigma1: 360.0,
            c_tg: 3.0,
            c_ebr: 3.0,
            power_iter_tol: 1e-6,
            epsilon: 0.5,
        };
        p.validate().unwrap();
        p
    }

    fn mu_pattern(m: usize, salt: u64) -> Vec<u8> {
        (0..m).map(|i| ((i as u64 * 7 + salt) % 2) as u8).collect()
    }

    #[test]
    fn level0_decrypts_everything() {
        let p = tiny_profile();
        let mut rng = RngStream::from_u64_seed(100);
        let (pk, sk0) = pe_key(&p, &mut rng).unwrap();
        for (trial, tags) in [[0, 0], [1, 2], [3, 3], [2, 1]].iter().enumerate() {
            let mu = mu_pattern(p.m(), trial as u64);
            let ct = pe_enc(&pk, &mu, tags, &mut rng).unwrap();
            assert_eq!(pe_dec(&pk, &sk0, &ct).unwrap(), mu);
        }
    }

    #[test]
    fn disjoint_tags_decrypt_after_punctures() {
        let p = tiny_profile();
        let mut rng = RngStream::from_u64_seed(101);
        let (pk, sk0) = pe_key(&p, &mut rng).unwrap();
        let sk1 = pe_pun(&pk, &sk0, 3, &mut rng).unwrap();
        let sk2 = pe_pun(&pk, &sk1, 1, &mut rng).unwrap();
        assert_eq!(sk1.tags, vec![3]);
        assert_eq!(sk2.tags, vec![3, 1]);
        let mu = mu_pattern(p.m(), 9);
        let ct = pe_enc(&pk, &mu, &[0, 2], &mut rng).unwrap();
        assert_eq!(pe_dec(&pk, &sk0, &ct).unwrap(), mu);
        assert_eq!(pe_dec(&pk, &sk1, &ct).unwrap(), mu);
        assert_eq!(pe_dec(&pk, &sk2, &ct).unwrap(), mu);
    }

    #[test]
    fn overlap_rejects_exhaustively_and_matches_oracle() {
        let p = tiny_profile();
        let mut rng = RngStream::from_u64_seed(102);
        let (pk, sk0) = pe_key(&p, &mut rng).unwrap();
        let mu = mu_pattern(p.m(), 3);
        // keys punctured on {2} and {2, 0}
        let sk1 = pe_pun(&pk, &sk0, 2, &mut rng).unwrap();
        let sk2 = pe_pun(&pk, &sk1, 0, &mut rng).unwrap();
        for t0 in 0..4u64 {
            for t1 in 0..4u64 {
                let tags = [t0, t1];
                let ct = pe_enc(&pk, &mu, &tags, &mut rng).unwrap();
                for (sk, punct) in [(&sk1, vec![2u64]), (&sk2, vec![2, 0])] {
                    let overlap = tags.iter().any(|t| punct.contains(t));
                    let got = pe_dec(&pk, sk, &ct);
                    if overlap {
                        assert!(
                            matches!(got, Err(PeError::Revoked(_))),
                            "tags {tags:?} punct {punct:?} should reject"
                        );
                    } else {
                        assert_eq!(got.unwrap(), mu, "tags {tags:?} punct {punct:?}");
                    }
                }
            }
        }
    }

    #[test]
    fn reject_decision_equals_circuit_evaluation() {
        // The list-based fast path must agree with the y0-check on the
        // equality circuits for every (t*, tags) combination.
        let p = tiny_profile();
        let q = p.modulus();
        for t_star in 0..4u64 {
            let f = puncture_circuit(&p, t_star).unwrap();
            for t0 in 0..4u64 {
                for t1 in 0..4u64 {
                    let bits = tags_to_bits(&[t0, t1], p.ell);
                    let v = f.eval_value(&bits).unwrap();
                    let matches = (t0 == t_star) as u64 + (t1 == t_star) as u64;
                    assert_eq!(v, matches % q.q());
                    assert_eq!(v != Y0, t0 == t_star || t1 == t_star);
                }
            }
        }
    }

    #[test]
    fn puncturing_same_tag_twice_is_valid() {
        let p = tiny_profile();
        let mut rng = RngStream::from_u64_seed(103);
        let (pk, sk0) = pe_key(&p, &mut rng).unwrap();
        let sk1 = pe_pun(&pk, &sk0, 1, &mut rng).unwrap();
        let sk2 = pe_pun(&pk, &sk1, 1, &mut rng).unwrap();
        assert_eq!(sk2.tags, vec![1, 1]);
        let mu = mu_pattern(p.m(), 4);
        let ct = pe_enc(&pk, &mu, &[0, 2], &mut rng).unwrap();
        assert_eq!(pe_dec(&pk, &sk2, &ct).unwrap(), mu);
        let ct_hit = pe_enc(&pk, &mu, &[1, 2], &mut rng).unwrap();
        assert!(matches!(pe_dec(&pk, &sk2, &ct_hit), Err(PeError::Revoked(1))));
    }

    #[test]
    fn tag_validation() {
        let p = tiny_profile();
        let mut rng = RngStream::from_u64_seed(104);
        let (pk, sk0) = pe_key(&p, &mut rng).unwrap();
        let mu = mu_pattern(p.m(), 0);
        assert!(matches!(
            pe_enc(&pk, &mu, &[4, 0], &mut rng),
            Err(PeError::TagOutOfRange(4, 2))
        ));
        assert!(matches!(
            pe_enc(&pk, &mu, &[1], &mut rng),
            Err(PeError::TagCount { expected: 2, got: 1 })
        ));
        assert!(matches!(
            pe_pun(&pk, &sk0, 9, &mut rng),
            Err(PeError::TagOutOfRange(9, 2))
        ));
    }

    #[test]
    fn puncture_beyond_eta_max_fails() {
        let p = tiny_profile();
        let mut rng = RngStream::from_u64_seed(105);
        let (pk, sk0) = pe_key(&p, &mut rng).unwrap();
        let sk1 = pe_pun(&pk, &sk0, 0, &mut rng).unwrap();
        let sk2 = pe_pun(&pk, &sk1, 1, &mut rng).unwrap();
        assert!(matches!(
            pe_pun(&pk, &sk2, 2, &mut rng),
            Err(PeError::Dfkhe(DfkheError::LevelOverflow { .. }))
        ));
    }
}
