//! Randomized property tests for the arithmetic core, the profile text
//! format, and the container format.

use dfk::circuit::tags_to_bits;
use dfk::container;
use dfk::dfkhe::DfkheCiphertext;
use dfk::gauss::{sample_z, GaussParam, RngStream};
use dfk::params::{Profile, SigmaMode};
use dfk::pe::PeCiphertext;
use dfk::zq_core::{
    bit_decompose, gadget_matrix, next_prime, Modulus, ZqMatrix,
};
use proptest::prelude::*;

fn modulus_strategy() -> impl Strategy<Value = Modulus> {
    (8u64..1 << 30).prop_map(|lo| Modulus::new(next_prime(lo)).unwrap())
}

proptest! {
    #[test]
    fn modular_arithmetic_matches_wide_reference(
        m in modulus_strategy(),
        a in any::<u64>(),
        b in any::<u64>(),
        e in 0u64..1000,
    ) {
        let q = m.q() as i128;
        let a_r = a % m.q();
        let b_r = b % m.q();
        prop_assert_eq!(m.add(a_r, b_r) as i128, (a_r as i128 + b_r as i128).rem_euclid(q));
        prop_assert_eq!(m.sub(a_r, b_r) as i128, (a_r as i128 - b_r as i128).rem_euclid(q));
        prop_assert_eq!(m.mul(a_r, b_r) as i128, (a_r as i128 * b_r as i128).rem_euclid(q));
        // centered representative round-trips and lies in (-q/2, q/2]
        let c = m.centered(a_r);
        prop_assert!(2 * c.abs() as u64 <= m.q());
        prop_assert_eq!(m.reduce_i64(c), a_r);
        // Fermat: pow agrees with repeated multiplication
        let mut acc = 1u64;
        for _ in 0..e {
            acc = m.mul(acc, a_r);
        }
        prop_assert_eq!(m.pow(a_r, e), acc);
        if a_r != 0 {
            let inv = m.inv(a_r).unwrap();
            prop_assert_eq!(m.mul(a_r, inv), 1);
        }
    }

    #[test]
    fn gadget_recomposes_bit_decomposition(
        m in modulus_strategy(),
        n in 1usize..3,
        cols in 1usize..5,
        seed in any::<u64>(),
    ) {
        let mut rng = RngStream::from_u64_seed(seed);
        let target = ZqMatrix::uniform(m, n, cols, &mut rng);
        let bits = bit_decompose(m, &target);
        let g = gadget_matrix(m, n);
        prop_assert_eq!(g.matmul_int(&bits), target);
        // decomposition really is binary
        prop_assert!(bits.entries().iter().all(|&e| e == 0 || e == 1));
    }

    #[test]
    fn tag_bits_recompose(tags in proptest::collection::vec(0u64..1 << 8, 1..4)) {
        let ell = 8u32;
        let bits = tags_to_bits(&tags, ell);
        prop_assert_eq!(bits.len(), tags.len() * ell as usize);
        for (i, &t) in tags.iter().enumerate() {
            let back: u64 = (0..ell as usize)
                .map(|j| bits[i * ell as usize + j] << j)
                .sum();
            prop_assert_eq!(back, t);
        }
    }

    #[test]
    fn profile_render_parse_round_trip(
        n in 1usize..6,
        qlo in 16u64..1 << 40,
        d in 1usize..4,
        ell in 1u32..5,
        eta_max in 0u32..4,
        chi0 in 1u64..5,
        sigma1 in 50.0f64..5000.0,
    ) {
        let p = Profile {
            name: "prop".into(),
            n,
            q: next_prime(qlo),
            d,
            ell,
            eta_max,
            chi0,
            sigma_mode: SigmaMode::Practical,
            sigma1,
            c_tg: 3.0,
            c_ebr: 3.0,
            power_iter_tol: 1e-6,
            epsilon: 0.5,
        };
        prop_assume!(p.validate().is_ok());
        let text = p.render();
        let back = Profile::parse(&text).unwrap();
        prop_assert_eq!(&back, &p);
        // sealing preserves the text byte-exactly
        let sealed = container::write_profile(&text).unwrap();
        let (again, text2) = container::read_profile(&sealed).unwrap();
        prop_assert_eq!(text2, text);
        prop_assert_eq!(again, p);
    }

    #[test]
    fn ciphertext_container_round_trip(
        seed in any::<u64>(),
        blocks in 0usize..4,
        final_len in 0u32..29,
    ) {
        let p = Profile::parse(include_str!("../profiles/toy.profile")).unwrap();
        let m = p.m();
        let q = p.modulus();
        let mut rng = RngStream::from_u64_seed(seed);
        use rand::Rng;
        let tags = vec![rng.gen_range(0..4u64), rng.gen_range(0..4u64)];
        let bits = tags_to_bits(&tags, p.ell);
        let mk_vec = |rng: &mut RngStream| -> Vec<u64> {
            (0..m).map(|_| rng.gen_range(0..q.q())).collect()
        };
        let cts: Vec<PeCiphertext> = (0..blocks)
            .map(|_| PeCiphertext {
                inner: DfkheCiphertext {
                    c_in: mk_vec(&mut rng),
                    c: (0..p.wires()).map(|_| mk_vec(&mut rng)).collect(),
                    c_out: mk_vec(&mut rng),
                    t: bits.clone(),
                },
                tags: tags.clone(),
            })
            .collect();
        let sealed = container::write_ciphertexts(&cts, final_len, &p);
        let (back, flen) = container::read_ciphertexts(&sealed, &p).unwrap();
        prop_assert_eq!(flen, final_len);
        prop_assert_eq!(&back, &cts);
        prop_assert_eq!(container::write_ciphertexts(&back, flen, &p), sealed);
    }

    #[test]
    fn sample_z_respects_tail_cut(
        sigma in 0.5f64..50.0,
        center in -100.0f64..100.0,
        seed in any::<u64>(),
    ) {
        let p = GaussParam::new(sigma).unwrap();
        let mut rng = RngStream::from_u64_seed(seed);
        for _ in 0..50 {
            let x = sample_z(center, p, &mut rng) as f64;
            prop_assert!((x - center).abs() <= p.tail_cut * sigma + 1.0);
        }
    }

    #[test]
    fn corrupted_containers_never_parse(
        seed in any::<u64>(),
        pos_frac in 0.0f64..1.0,
        bit in 0u8..8,
    ) {
        let p = Profile::parse(include_str!("../profiles/toy.profile")).unwrap();
        let _ = seed;
        let sealed = container::write_profile(&p.render()).unwrap();
        let pos = ((sealed.len() - 1) as f64 * pos_frac) as usize;
        let mut bad = sealed.clone();
        bad[pos] ^= 1 << bit;
        prop_assert!(container::read_profile(&bad).is_err());
    }
}
