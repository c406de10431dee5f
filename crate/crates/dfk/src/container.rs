//! The DFK1 binary container: magic "DFK1", version u16, kind u8, a fixed
//! numeric header, a kind-specific payload built from a shared matrix
//! wire format, and a trailing CRC32 of all preceding bytes.
//!
//! Kinds: 1 profile (raw profile text), 2 pe-public-key, 3 puncture-key,
//! 4 ciphertext-blocks. All integers little-endian. The `eta` header field
//! holds the key level for kind 3 and the final-block byte length for
//! kind 4; it is zero otherwise.
//!
//! Physical storage is u64/i64 per entry; the logical packed size at k bits
//! per Z_q entry is computed by the size report, not by this format.

use crate::circuit::tags_to_bits;
use crate::dfkhe::{DelegatedKey, DfkheCiphertext, DfkheMasterKey};
use crate::params::{ParamsError, Profile};
use crate::pe::{puncture_circuit, PeCiphertext, PeError, PePublicKey, PunctureKey, PunctureKeyInner, Y0};
use crate::trapdoor::{LatticeBasis, TrapdoorError};
use crate::zq_core::{IntMatrix, Modulus, ZqMatrix};
use crate::dfkhe::extended_parent;
use thiserror::Error;

pub const MAGIC: [u8; 4] = *b"DFK1";
pub const VERSION: u16 = 1;

pub const KIND_PROFILE: u8 = 1;
pub const KIND_PUBLIC_KEY: u8 = 2;
pub const KIND_PUNCTURE_KEY: u8 = 3;
pub const KIND_CIPHERTEXT: u8 = 4;

#[derive(Debug, Error)]
pub enum ContainerError {
    #[error("bad magic: expected \"DFK1\"")]
    BadMagic,
    #[error("unsupported container version {0}")]
    BadVersion(u16),
    #[error("unknown container kind {0}")]
    BadKind(u8),
    #[error("container kind {got} where {expected} expected")]
    WrongKind { expected: u8, got: u8 },
    #[error("container truncated: {needed} bytes missing before the CRC32 trailer")]
    Truncated { needed: usize },
    #[error("{0} trailing bytes after payload")]
    TrailingBytes(usize),
    #[error("CRC32 mismatch: stored {stored:#010x}, computed {computed:#010x}")]
    CrcMismatch { stored: u32, computed: u32 },
    #[error("header inconsistent with payload: {0}")]
    HeaderMismatch(String),
    #[error("matrix entry {0} not a canonical Z_q residue")]
    EntryOutOfRange(u64),
    #[error(transparent)]
    Params(#[from] ParamsError),
    #[error(transparent)]
    Trapdoor(#[from] TrapdoorError),
    #[error(transparent)]
    Pe(#[from] PeError),
}

/// Fixed numeric header present in every container.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Header {
    pub n: u32,
    pub q: u64,
    pub d: u32,
    pub ell: u32,
    pub eta: u32,
    pub block_count: u32,
}

impl Header {
    fn for_profile(p: &Profile, eta: u32, block_count: u32) -> Header {
        Header {
            n: p.n as u32,
            q: p.q,
            d: p.d as u32,
            ell: p.ell,
            eta,
            block_count,
        }
    }

    fn check_profile(&self, p: &Profile) -> Result<(), ContainerError> {
        if self.n as usize != p.n || self.q != p.q || self.d as usize != p.d || self.ell != p.ell {
            return Err(ContainerError::HeaderMismatch(format!(
                "header (n={}, q={}, d={}, ell={}) vs profile (n={}, q={}, d={}, ell={})",
                self.n, self.q, self.d, self.ell, p.n, p.q, p.d, p.ell
            )));
        }
        Ok(())
    }
}

// ---- byte-level writer/reader -------------------------------------------

struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    fn new() -> Writer {
        Writer { buf: Vec::new() }
    }

    fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }

    fn u16(&mut self, v: u16) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    fn i64(&mut self, v: i64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    fn bytes(&mut self, v: &[u8]) {
        self.buf.extend_from_slice(v);
    }

    fn zq_matrix(&mut self, m: &ZqMatrix) {
        self.u32(m.rows() as u32);
        self.u32(m.cols() as u32);
        for &e in m.entries() {
            self.u64(e);
        }
    }

    fn zq_vec(&mut self, v: &[u64]) {
        self.u32(1);
        self.u32(v.len() as u32);
        for &e in v {
            self.u64(e);
        }
    }

    fn int_matrix(&mut self, m: &IntMatrix) {
        self.u32(m.rows() as u32);
        self.u32(m.cols() as u32);
        for &e in m.entries() {
            self.i64(e);
        }
    }
}

struct Reader<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(data: &'a [u8]) -> Reader<'a> {
        Reader { data, pos: 0 }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], ContainerError> {
        if self.pos + n > self.data.len() {
            return Err(ContainerError::Truncated {
                needed: self.pos + n - self.data.len(),
            });
        }
        let s = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8, ContainerError> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16, ContainerError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32, ContainerError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, ContainerError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn i64(&mut self) -> Result<i64, ContainerError> {
        Ok(i64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    /// Bytes left; dimension fields are checked against this before any
    /// allocation so hostile headers cannot force large reserves.
    fn remaining(&self) -> usize {
        self.data.len() - self.pos
    }

    fn check_len(&self, entries: usize) -> Result<(), ContainerError> {
        let need = entries.checked_mul(8).ok_or(ContainerError::Truncated {
            needed: usize::MAX,
        })?;
        if need > self.remaining() {
            return Err(ContainerError::Truncated {
                needed: need - self.remaining(),
            });
        }
        Ok(())
    }

    fn zq_matrix(&mut self, modulus: Modulus) -> Result<ZqMatrix, ContainerError> {
        let rows = self.u32()? as usize;
        let cols = self.u32()? as usize;
        let count = rows.checked_mul(cols).ok_or(ContainerError::Truncated {
            needed: usize::MAX,
        })?;
        self.check_len(count)?;
        let mut entries = Vec::with_capacity(count);
        for _ in 0..count {
            let e = self.u64()?;
            if e >= modulus.q() {
                return Err(ContainerError::EntryOutOfRange(e));
            }
            entries.push(e);
        }
        let mut it = entries.into_iter();
        Ok(ZqMatrix::from_fn(modulus, rows, cols, |_, _| {
            it.next().unwrap()
        }))
    }

    fn zq_vec(&mut self, modulus: Modulus, expect_len: usize) -> Result<Vec<u64>, ContainerError> {
        let m = self.zq_matrix(modulus)?;
        if m.rows() != 1 || m.cols() != expect_len {
            return Err(ContainerError::HeaderMismatch(format!(
                "vector dims {}x{}, expected 1x{expect_len}",
                m.rows(),
                m.cols()
            )));
        }
        Ok(m.entries().to_vec())
    }

    fn int_matrix(&mut self) -> Result<IntMatrix, ContainerError> {
        let rows = self.u32()? as usize;
        let cols = self.u32()? as usize;
        let count = rows.checked_mul(cols).ok_or(ContainerError::Truncated {
            needed: usize::MAX,
        })?;
        self.check_len(count)?;
        let mut entries = Vec::with_capacity(count);
        for _ in 0..count {
            entries.push(self.i64()?);
        }
        let mut it = entries.into_iter();
        Ok(IntMatrix::from_fn(rows, cols, |_, _| it.next().unwrap()))
    }
}

fn seal(kind: u8, header: Header, payload: &[u8]) -> Vec<u8> {
    let mut w = Writer::new();
    w.bytes(&MAGIC);
    w.u16(VERSION);
    w.u8(kind);
    w.u32(header.n);
    w.u64(header.q);
    w.u32(header.d);
    w.u32(header.ell);
    w.u32(header.eta);
    w.u32(header.block_count);
    w.bytes(payload);
    let crc = crc32fast::hash(&w.buf);
    w.u32(crc);
    w.buf
}

/// Validate magic/version/CRC and split into (kind, header, payload).
pub fn open(data: &[u8]) -> Result<(u8, Header, &[u8]), ContainerError> {
    let mut r = Reader::new(data);
    let magic = r.take(4)?;
    if magic != MAGIC {
        return Err(ContainerError::BadMagic);
    }
    let version = r.u16()?;
    if version != VERSION {
        return Err(ContainerError::BadVersion(version));
    }
    let kind = r.u8()?;
    if !(KIND_PROFILE..=KIND_CIPHERTEXT).contains(&kind) {
        return Err(ContainerError::BadKind(kind));
    }
    let header = Header {
        n: r.u32()?,
        q: r.u64()?,
        d: r.u32()?,
        ell: r.u32()?,
        eta: r.u32()?,
        block_count: r.u32()?,
    };
    if data.len() < r.pos + 4 {
        return Err(ContainerError::Truncated {
            needed: r.pos + 4 - data.len(),
        });
    }
    let body_end = data.len() - 4;
    let stored = u32::from_le_bytes(data[body_end..].try_into().unwrap());
    let computed = crc32fast::hash(&data[..body_end]);
    if stored != computed {
        return Err(ContainerError::CrcMismatch { stored, computed });
    }
    Ok((kind, header, &data[r.pos..body_end]))
}

fn open_kind(data: &[u8], expected: u8) -> Result<(Header, &[u8]), ContainerError> {
    let (kind, header, payload) = open(data)?;
    if kind != expected {
        return Err(ContainerError::WrongKind {
            expected,
            got: kind,
        });
    }
    Ok((header, payload))
}

fn finish_reader(r: Reader<'_>) -> Result<(), ContainerError> {
    let rest = r.data.len() - r.pos;
    if rest != 0 {
        return Err(ContainerError::TrailingBytes(rest));
    }
    Ok(())
}

// ---- profile (kind 1) ----------------------------------------------------

/// Seal a profile, preserving the raw text byte-exactly.
pub fn write_profile(text: &str) -> Result<Vec<u8>, ContainerError> {
    let profile = Profile::parse(text)?;
    let mut w = Writer::new();
    w.u32(text.len() as u32);
    w.bytes(text.as_bytes());
    Ok(seal(
        KIND_PROFILE,
        Header::for_profile(&profile, 0, 0),
        &w.buf,
    ))
}

pub fn read_profile(data: &[u8]) -> Result<(Profile, String), ContainerError> {
    let (header, payload) = open_kind(data, KIND_PROFILE)?;
    let mut r = Reader::new(payload);
    let len = r.u32()? as usize;
    let text = String::from_utf8(r.take(len)?.to_vec())
        .map_err(|e| ContainerError::HeaderMismatch(format!("profile text not UTF-8: {e}")))?;
    finish_reader(r)?;
    let profile = Profile::parse(&text)?;
    header.check_profile(&profile)?;
    Ok((profile, text))
}

// ---- public key (kind 2) -------------------------------------------------

pub fn write_public_key(pk: &PePublicKey) -> Vec<u8> {
    let profile = pk.profile();
    let text = profile.render();
    let mut w = Writer::new();
    w.u32(text.len() as u32);
    w.bytes(text.as_bytes());
    w.zq_matrix(&pk.inner.a);
    for b in &pk.inner.b {
        w.zq_matrix(b);
    }
    w.zq_matrix(&pk.inner.u);
    seal(KIND_PUBLIC_KEY, Header::for_profile(profile, 0, 0), &w.buf)
}

pub fn read_public_key(data: &[u8]) -> Result<PePublicKey, ContainerError> {
    let (header, payload) = open_kind(data, KIND_PUBLIC_KEY)?;
    let mut r = Reader::new(payload);
    let len = r.u32()? as usize;
    let text = String::from_utf8(r.take(len)?.to_vec())
        .map_err(|e| ContainerError::HeaderMismatch(format!("profile text not UTF-8: {e}")))?;
    let profile = Profile::parse(&text)?;
    header.check_profile(&profile)?;
    let modulus = profile.modulus();
    let n = profile.n;
    let m = profile.m();
    let expect = |mat: &ZqMatrix| -> Result<(), ContainerError> {
        if mat.rows() != n || mat.cols() != m {
            return Err(ContainerError::HeaderMismatch(format!(
                "matrix dims {}x{}, expected {n}x{m}",
                mat.rows(),
                mat.cols()
            )));
        }
        Ok(())
    };
    let a = r.zq_matrix(modulus)?;
    expect(&a)?;
    let mut b = Vec::with_capacity(profile.wires());
    for _ in 0..profile.wires() {
        let bi = r.zq_matrix(modulus)?;
        expect(&bi)?;
        b.push(bi);
    }
    let u = r.zq_matrix(modulus)?;
    expect(&u)?;
    finish_reader(r)?;
    Ok(PePublicKey {
        inner: crate::dfkhe::DfkhePublicKey { profile, a, b, u },
    })
}

// ---- puncture key (kind 3) -----------------------------------------------

/// Payload: dec seed (32 bytes), punctured tags, then the basis matrix.
/// Circuits, evaluated matrices and the parent matrix are recomputed from
/// the public key on read, so a tampered key cannot smuggle a mismatched
/// basis past deserialization.
pub fn write_puncture_key(sk: &PunctureKey, profile: &Profile) -> Vec<u8> {
    let (dec_seed, basis): (&[u8; 32], &LatticeBasis) = match &sk.inner {
        PunctureKeyInner::Master(msk) => (&msk_seed(msk), &msk.t_a),
        PunctureKeyInner::Delegated(dk) => (&dk_seed(dk), &dk.t),
    };
    let mut w = Writer::new();
    w.bytes(dec_seed);
    w.u32(sk.tags.len() as u32);
    for &t in &sk.tags {
        w.u64(t);
    }
    w.int_matrix(basis.matrix());
    seal(
        KIND_PUNCTURE_KEY,
        Header::for_profile(profile, sk.level() as u32, 0),
        &w.buf,
    )
}

// Seed accessors return arrays by value; keep the borrow shape uniform.
fn msk_seed(msk: &DfkheMasterKey) -> [u8; 32] {
    msk.dec_seed()
}

fn dk_seed(dk: &DelegatedKey) -> [u8; 32] {
    dk.dec_seed()
}

pub fn read_puncture_key(data: &[u8], pk: &PePublicKey) -> Result<PunctureKey, ContainerError> {
    let (header, payload) = open_kind(data, KIND_PUNCTURE_KEY)?;
    let profile = pk.profile();
    header.check_profile(profile)?;
    let mut r = Reader::new(payload);
    let dec_seed: [u8; 32] = r.take(32)?.try_into().unwrap();
    let count = r.u32()? as usize;
    if count != header.eta as usize {
        return Err(ContainerError::HeaderMismatch(format!(
            "header level {} vs {} stored tags",
            header.eta, count
        )));
    }
    r.check_len(count)?;
    let mut tags = Vec::with_capacity(count);
    for _ in 0..count {
        tags.push(r.u64()?);
    }
    let matrix = r.int_matrix()?;
    finish_reader(r)?;
    let inner = if tags.is_empty() {
        let basis = LatticeBasis::new(pk.inner.a.clone(), matrix)?;
        PunctureKeyInner::Master(DfkheMasterKey::from_parts(basis, dec_seed))
    } else {
        let mut circuits = Vec::with_capacity(tags.len());
        for &t in &tags {
            circuits.push(puncture_circuit(profile, t)?);
        }
        let (parent, b_f) = extended_parent(&pk.inner, Y0, &circuits)
            .map_err(PeError::Dfkhe)?;
        let basis = LatticeBasis::new(parent, matrix)?;
        PunctureKeyInner::Delegated(DelegatedKey::from_parts(Y0, circuits, b_f, basis, dec_seed))
    };
    Ok(PunctureKey { tags, inner })
}

// ---- ciphertext blocks (kind 4) ------------------------------------------

/// Payload: shared tag list, then per block c_in, the wire vectors, c_out.
/// The header's eta field holds the final block's plaintext byte length.
pub fn write_ciphertexts(
    blocks: &[PeCiphertext],
    final_len: u32,
    profile: &Profile,
) -> Vec<u8> {
    let mut w = Writer::new();
    let tags: &[u64] = blocks.first().map(|b| b.tags.as_slice()).unwrap_or(&[]);
    w.u32(tags.len() as u32);
    for &t in tags {
        w.u64(t);
    }
    for b in blocks {
        assert_eq!(b.tags.as_slice(), tags, "blocks must share the tag list");
        w.zq_vec(&b.inner.c_in);
        for c in &b.inner.c {
            w.zq_vec(c);
        }
        w.zq_vec(&b.inner.c_out);
    }
    seal(
        KIND_CIPHERTEXT,
        Header::for_profile(profile, final_len, blocks.len() as u32),
        &w.buf,
    )
}

pub fn read_ciphertexts(
    data: &[u8],
    profile: &Profile,
) -> Result<(Vec<PeCiphertext>, u32), ContainerError> {
    let (header, payload) = open_kind(data, KIND_CIPHERTEXT)?;
    header.check_profile(profile)?;
    let modulus = profile.modulus();
    let m = profile.m();
    let wires = profile.wires();
    let mut r = Reader::new(payload);
    let tag_count = r.u32()? as usize;
    if tag_count != profile.d && !(tag_count == 0 && header.block_count == 0) {
        return Err(ContainerError::HeaderMismatch(format!(
            "{tag_count} tags for d = {}",
            profile.d
        )));
    }
    r.check_len(tag_count)?;
    let mut tags = Vec::with_capacity(tag_count);
    for _ in 0..tag_count {
        let t = r.u64()?;
        if t >= 1u64 << profile.ell {
            return Err(ContainerError::Pe(PeError::TagOutOfRange(t, profile.ell)));
        }
        tags.push(t);
    }
    let bits = tags_to_bits(&tags, profile.ell);
    let mut blocks = Vec::new();
    for _ in 0..header.block_count {
        let c_in = r.zq_vec(modulus, m)?;
        let mut c = Vec::with_capacity(wires);
        for _ in 0..wires {
            c.push(r.zq_vec(modulus, m)?);
        }
        let c_out = r.zq_vec(modulus, m)?;
        blocks.push(PeCiphertext {
            inner: DfkheCiphertext {
                c_in,
                c,
                c_out,
                t: bits.clone(),
            },
            tags: tags.clone(),
        });
    }
    finish_reader(r)?;
    Ok((blocks, header.eta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gauss::RngStream;
    use crate::params::SigmaMode;
    use crate::pe::{pe_dec, pe_enc, pe_key, pe_pun};
    use crate::zq_core::next_prime;

    fn tiny_profile() -> Profile {
        Profile {
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
        }
    }

    #[test]
    fn profile_round_trip_byte_exact() {
        let text = tiny_profile().render();
        let sealed = write_profile(&text).unwrap();
        let (profile, back) = read_profile(&sealed).unwrap();
        assert_eq!(back, text);
        assert_eq!(profile, tiny_profile());
        // re-seal is byte-identical
        assert_eq!(write_profile(&back).unwrap(), sealed);
    }

    #[test]
    fn public_key_round_trip() {
        let p = tiny_profile();
        let mut rng = RngStream::from_u64_seed(7);
        let (pk, _) = pe_key(&p, &mut rng).unwrap();
        let sealed = write_public_key(&pk);
        let back = read_public_key(&sealed).unwrap();
        assert_eq!(back, pk);
        assert_eq!(write_public_key(&back), sealed);
    }

    #[test]
    fn puncture_key_round_trip_and_use() {
        let p = tiny_profile();
        let mut rng = RngStream::from_u64_seed(8);
        let (pk, sk0) = pe_key(&p, &mut rng).unwrap();
        let sk1 = pe_pun(&pk, &sk0, 2, &mut rng).unwrap();
        for sk in [&sk0, &sk1] {
            let sealed = write_puncture_key(sk, &p);
            let back = read_puncture_key(&sealed, &pk).unwrap();
            assert_eq!(back.tags, sk.tags);
            assert_eq!(write_puncture_key(&back, &p), sealed);
            // The reloaded key decrypts like the original, byte for byte.
            let mu: Vec<u8> = (0..p.m()).map(|i| (i % 2) as u8).collect();
            let ct = pe_enc(&pk, &mu, &[0, 1], &mut rng).unwrap();
            assert_eq!(pe_dec(&pk, &back, &ct).unwrap(), mu);
            assert_eq!(pe_dec(&pk, sk, &ct).unwrap(), mu);
        }
    }

    #[test]
    fn ciphertext_round_trip() {
        let p = tiny_profile();
        let mut rng = RngStream::from_u64_seed(9);
        let (pk, _) = pe_key(&p, &mut rng).unwrap();
        let mu: Vec<u8> = vec![1; p.m()];
        let blocks: Vec<PeCiphertext> = (0..3)
            .map(|_| pe_enc(&pk, &mu, &[3, 1], &mut rng).unwrap())
            .collect();
        let sealed = write_ciphertexts(&blocks, 5, &p);
        let (back, final_len) = read_ciphertexts(&sealed, &p).unwrap();
        assert_eq!(final_len, 5);
        assert_eq!(back, blocks);
        assert_eq!(write_ciphertexts(&back, final_len, &p), sealed);
    }

    #[test]
    fn single_byte_corruption_always_detected() {
        let text = tiny_profile().render();
        let sealed = write_profile(&text).unwrap();
        for i in 0..sealed.len() {
            for flip in [0x01u8, 0x80] {
                let mut bad = sealed.clone();
                bad[i] ^= flip;
                assert!(
                    read_profile(&bad).is_err(),
                    "flip {flip:#x} at byte {i} undetected"
                );
            }
        }
    }

    #[test]
    fn truncation_and_wrong_kind_rejected() {
        let text = tiny_profile().render();
        let sealed = write_profile(&text).unwrap();
        for cut in [0, 3, 10, sealed.len() - 1] {
            assert!(open(&sealed[..cut]).is_err());
        }
        assert!(matches!(
            read_public_key(&sealed),
            Err(ContainerError::WrongKind {
                expected: KIND_PUBLIC_KEY,
                got: KIND_PROFILE
            })
        ));
        let mut wrong_magic = sealed.clone();
        wrong_magic[0] = b'X';
        assert!(matches!(open(&wrong_magic), Err(ContainerError::BadMagic)));
    }

    #[test]
    fn tampered_puncture_key_matrix_is_rejected() {
        let p = tiny_profile();
        let mut rng = RngStream::from_u64_seed(10);
        let (pk, sk0) = pe_key(&p, &mut rng).unwrap();
        let sk1 = pe_pun(&pk, &sk0, 1, &mut rng).unwrap();
        let sealed = write_puncture_key(&sk1, &p);
        // Flip one basis entry and re-seal with a fresh CRC so only the
        // algebraic check can catch it.
        let (kind, header, payload) = open(&sealed).unwrap();
        assert_eq!(kind, KIND_PUNCTURE_KEY);
        let mut bad_payload = payload.to_vec();
        let off = bad_payload.len() - 8;
        bad_payload[off] ^= 0x01;
        let resealed = seal(KIND_PUNCTURE_KEY, header, &bad_payload);
        assert!(matches!(
            read_puncture_key(&resealed, &pk),
            Err(ContainerError::Trapdoor(TrapdoorError::NotInLattice))
        ));
    }
}
