//! Arithmetic circuits over Z_q and the three key-homomorphic evaluation
//! algorithms: Eval_pk on public matrices, Eval_ct on ciphertext vectors,
//! Eval_sim on simulation matrices. Also the builders for equality-test
//! functions over bit-decomposed tags and a per-instance noise estimator.
//!
//! Gate rules (B public matrix, c ciphertext vector, S simulation matrix,
//! x attribute value, G the padded gadget):
//!
//! | gate        | B_out                     | c_out                         | S_out                      |
//! |-------------|---------------------------|-------------------------------|----------------------------|
//! | Add         | B_l + B_r                 | c_l + c_r                     | S_l + S_r                  |
//! | ConstAdd(a) | B - a*G                   | c                             | S                          |
//! | ConstMul(a) | B * G^{-1}(a*G)           | G^{-1}(a*G)^T * c             | S * G^{-1}(a*G)            |
//! | Mul         | -B_l * G^{-1}(B_r)        | x_l*c_r - G^{-1}(B_r)^T * c_l | x_l*S_r - S_l*G^{-1}(B_r)  |

use crate::zq_core::{bit_decompose_rows, gadget_matrix_padded, IntMatrix, Modulus, ZqMatrix};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum CircuitError {
    #[error("expected {expected} inputs, got {got}")]
    ArityMismatch { expected: usize, got: usize },
    #[error("t_star {0} out of the tag space [0, 2^{1})")]
    TagOutOfRange(u64, u32),
    #[error("Fermat circuit requires q <= 64, got {0}")]
    FermatModulusTooLarge(u64),
}

/// One gate of a circuit. Operand fields are indices of earlier gates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Gate {
    Input(usize),
    ConstAdd(u64, usize),
    ConstMul(u64, usize),
    Add(usize, usize),
    Mul(usize, usize),
}

/// Topologically ordered gate DAG over Z_q with a single output wire.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Circuit {
    modulus: Modulus,
    gates: Vec<Gate>,
    output: usize,
    num_inputs: usize,
}

impl Circuit {
    pub fn builder(modulus: Modulus, num_inputs: usize) -> CircuitBuilder {
        CircuitBuilder {
            modulus,
            gates: Vec::new(),
            num_inputs,
        }
    }

    pub fn modulus(&self) -> Modulus {
        self.modulus
    }

    pub fn num_inputs(&self) -> usize {
        self.num_inputs
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn output(&self) -> usize {
        self.output
    }

    /// Maximum multiplicative depth from any input to the output.
    pub fn depth(&self) -> usize {
        let mut d = vec![0usize; self.gates.len()];
        for (i, g) in self.gates.iter().enumerate() {
            d[i] = match *g {
                Gate::Input(_) => 0,
                Gate::ConstAdd(_, s) | Gate::ConstMul(_, s) => d[s],
                Gate::Add(l, r) => d[l].max(d[r]),
                Gate::Mul(l, r) => d[l].max(d[r]) + 1,
            };
        }
        d[self.output]
    }

    /// Deterministic one-gate-per-line debug dump: `idx kind operands`.
    pub fn dump(&self) -> String {
        use std::fmt::Write;
        let mut s = String::new();
        for (i, g) in self.gates.iter().enumerate() {
            match *g {
                Gate::Input(k) => writeln!(s, "{i} input {k}").unwrap(),
                Gate::ConstAdd(a, src) => writeln!(s, "{i} const_add {a} {src}").unwrap(),
                Gate::ConstMul(a, src) => writeln!(s, "{i} const_mul {a} {src}").unwrap(),
                Gate::Add(l, r) => writeln!(s, "{i} add {l} {r}").unwrap(),
                Gate::Mul(l, r) => writeln!(s, "{i} mul {l} {r}").unwrap(),
            }
        }
        s
    }

    fn check_arity(&self, got: usize) -> Result<(), CircuitError> {
        if got != self.num_inputs {
            return Err(CircuitError::ArityMismatch {
                expected: self.num_inputs,
                got,
            });
        }
        Ok(())
    }

    /// Plain evaluation in Z_q.
    pub fn eval_value(&self, x: &[u64]) -> Result<u64, CircuitError> {
        self.check_arity(x.len())?;
        let q = self.modulus;
        let mut vals = vec![0u64; self.gates.len()];
        for (i, g) in self.gates.iter().enumerate() {
            vals[i] = match *g {
                Gate::Input(k) => x[k] % q.q(),
                Gate::ConstAdd(a, s) => q.add(vals[s], a % q.q()),
                Gate::ConstMul(a, s) => q.mul(vals[s], a),
                Gate::Add(l, r) => q.add(vals[l], vals[r]),
                Gate::Mul(l, r) => q.mul(vals[l], vals[r]),
            };
        }
        Ok(vals[self.output])
    }

    /// Eval_pk: fold the public matrices B_i through the circuit.
    pub fn eval_pk(&self, b_list: &[ZqMatrix]) -> Result<ZqMatrix, CircuitError> {
        self.check_arity(b_list.len())?;
        let q = self.modulus;
        let n = b_list[0].rows();
        let m = b_list[0].cols();
        let g = gadget_matrix_padded(q, n, m);
        let mut mats: Vec<Option<ZqMatrix>> = vec![None; self.gates.len()];
        for (i, gate) in self.gates.iter().enumerate() {
            let out = match *gate {
                Gate::Input(k) => b_list[k].clone(),
                Gate::ConstAdd(a, s) => mats[s].as_ref().unwrap().sub(&g.scalar_mul(a)),
                Gate::ConstMul(a, s) => {
                    let ag_bits = bit_decompose_rows(q, &g.scalar_mul(a), m);
                    mats[s].as_ref().unwrap().matmul_int(&ag_bits)
                }
                Gate::Add(l, r) => mats[l].as_ref().unwrap().add(mats[r].as_ref().unwrap()),
                Gate::Mul(l, r) => {
                    let br_bits = bit_decompose_rows(q, mats[r].as_ref().unwrap(), m);
                    mats[l].as_ref().unwrap().neg().matmul_int(&br_bits)
                }
            };
            mats[i] = Some(out);
        }
        Ok(mats[self.output].take().unwrap())
    }

    /// Eval_ct: fold encoded ciphertext vectors through the circuit.
    ///
    /// Each input is (x_i, B_i, c_i) with c_i an encoding of x_i under B_i;
    /// the output vector encodes f(x) under Eval_pk's B_f.
    pub fn eval_ct(&self, inputs: &[(u64, ZqMatrix, Vec<u64>)]) -> Result<Vec<u64>, CircuitError> {
        self.check_arity(inputs.len())?;
        let q = self.modulus;
        let n = inputs[0].1.rows();
        let m = inputs[0].1.cols();
        let g = gadget_matrix_padded(q, n, m);
        let mut vals = vec![0u64; self.gates.len()];
        let mut mats: Vec<Option<ZqMatrix>> = vec![None; self.gates.len()];
        let mut cts: Vec<Option<Vec<u64>>> = vec![None; self.gates.len()];
        for (i, gate) in self.gates.iter().enumerate() {
            let (v, b, c) = match *gate {
                Gate::Input(k) => (
                    inputs[k].0 % q.q(),
                    inputs[k].1.clone(),
                    inputs[k].2.clone(),
                ),
                Gate::ConstAdd(a, s) => (
                    q.add(vals[s], a % q.q()),
                    mats[s].as_ref().unwrap().sub(&g.scalar_mul(a)),
                    cts[s].clone().unwrap(),
                ),
                Gate::ConstMul(a, s) => {
                    let ag_bits = bit_decompose_rows(q, &g.scalar_mul(a), m);
                    (
                        q.mul(vals[s], a),
                        mats[s].as_ref().unwrap().matmul_int(&ag_bits),
                        int_transpose_mul_vec(&ag_bits, cts[s].as_ref().unwrap(), q),
                    )
                }
                Gate::Add(l, r) => (
                    q.add(vals[l], vals[r]),
                    mats[l].as_ref().unwrap().add(mats[r].as_ref().unwrap()),
                    cts[l]
                        .as_ref()
                        .unwrap()
                        .iter()
                        .zip(cts[r].as_ref().unwrap())
                        .map(|(&a, &b)| q.add(a, b))
                        .collect(),
                ),
                Gate::Mul(l, r) => {
                    let br_bits = bit_decompose_rows(q, mats[r].as_ref().unwrap(), m);
                    let xl = vals[l];
                    let scaled: Vec<u64> = cts[r]
                        .as_ref()
                        .unwrap()
                        .iter()
                        .map(|&cv| q.mul(xl, cv))
                        .collect();
                    let folded = int_transpose_mul_vec(&br_bits, cts[l].as_ref().unwrap(), q);
                    let c: Vec<u64> = scaled
                        .iter()
                        .zip(&folded)
                        .map(|(&a, &b)| q.sub(a, b))
                        .collect();
                    (
                        q.mul(vals[l], vals[r]),
                        mats[l].as_ref().unwrap().neg().matmul_int(&br_bits),
                        c,
                    )
                }
            };
            vals[i] = v;
            mats[i] = Some(b);
            cts[i] = Some(c);
        }
        Ok(cts[self.output].take().unwrap())
    }

    /// Eval_sim: fold simulation matrices S_i with A*S_i - x_i*G = B_i.
    /// The output S_f satisfies A*S_f - f(x*)*G = B_f exactly, with B_f the
    /// Eval_pk result on those B_i.
    pub fn eval_sim(
        &self,
        inputs: &[(u64, IntMatrix)],
        a: &ZqMatrix,
    ) -> Result<IntMatrix, CircuitError> {
        self.check_arity(inputs.len())?;
        let q = self.modulus;
        let n = a.rows();
        let m = a.cols();
        let g = gadget_matrix_padded(q, n, m);
        let mut vals = vec![0u64; self.gates.len()];
        let mut sims: Vec<Option<IntMatrix>> = vec![None; self.gates.len()];
        for (i, gate) in self.gates.iter().enumerate() {
            let (v, s) = match *gate {
                Gate::Input(k) => (inputs[k].0 % q.q(), inputs[k].1.clone()),
                Gate::ConstAdd(a_c, src) => {
                    (q.add(vals[src], a_c % q.q()), sims[src].clone().unwrap())
                }
                Gate::ConstMul(a_c, src) => {
                    let ag_bits = bit_decompose_rows(q, &g.scalar_mul(a_c), m);
                    (
                        q.mul(vals[src], a_c),
                        sims[src].as_ref().unwrap().matmul(&ag_bits),
                    )
                }
                Gate::Add(l, r) => (
                    q.add(vals[l], vals[r]),
                    sims[l].as_ref().unwrap().add(sims[r].as_ref().unwrap()),
                ),
                Gate::Mul(l, r) => {
                    // B_r recomputed from the simulation relation.
                    let b_r = a
                        .matmul_int(sims[r].as_ref().unwrap())
                        .sub(&g.scalar_mul(vals[r]));
                    let br_bits = bit_decompose_rows(q, &b_r, m);
                    let xl = q.centered(vals[l]);
                    let s = sims[r]
                        .as_ref()
                        .unwrap()
                        .scale(xl)
                        .sub(&sims[l].as_ref().unwrap().matmul(&br_bits));
                    (q.mul(vals[l], vals[r]), s)
                }
            };
            vals[i] = v;
            sims[i] = Some(s);
        }
        Ok(sims[self.output].take().unwrap())
    }

    /// eval_sim with 128-bit entries, for circuit families (the Fermat
    /// equality at larger moduli, deep multiplication chains) whose exact
    /// simulation matrices outgrow i64. Same recurrence as eval_sim; the
    /// result is returned as dense row-major i128 entries, m*m per matrix.
    pub fn eval_sim_wide(
        &self,
        inputs: &[(u64, IntMatrix)],
        a: &ZqMatrix,
    ) -> Result<Vec<i128>, CircuitError> {
        self.check_arity(inputs.len())?;
        let q = self.modulus;
        let n = a.rows();
        let m = a.cols();
        let g = gadget_matrix_padded(q, n, m);
        let wide = |s: &IntMatrix| -> Vec<i128> { s.entries().iter().map(|&e| e as i128).collect() };
        let mul_bits = |s: &[i128], bits: &IntMatrix| -> Vec<i128> {
            let mut out = vec![0i128; m * m];
            for i in 0..m {
                for k in 0..m {
                    let sv = s[i * m + k];
                    if sv == 0 {
                        continue;
                    }
                    for j in 0..m {
                        out[i * m + j] += sv * bits.get(k, j) as i128;
                    }
                }
            }
            out
        };
        let mut vals = vec![0u64; self.gates.len()];
        let mut sims: Vec<Option<Vec<i128>>> = vec![None; self.gates.len()];
        for (i, gate) in self.gates.iter().enumerate() {
            let (v, s) = match *gate {
                Gate::Input(k) => (inputs[k].0 % q.q(), wide(&inputs[k].1)),
                Gate::ConstAdd(a_c, src) => {
                    (q.add(vals[src], a_c % q.q()), sims[src].clone().unwrap())
                }
                Gate::ConstMul(a_c, src) => {
                    let ag_bits = bit_decompose_rows(q, &g.scalar_mul(a_c), m);
                    (
                        q.mul(vals[src], a_c),
                        mul_bits(sims[src].as_ref().unwrap(), &ag_bits),
                    )
                }
                Gate::Add(l, r) => (
                    q.add(vals[l], vals[r]),
                    sims[l]
                        .as_ref()
                        .unwrap()
                        .iter()
                        .zip(sims[r].as_ref().unwrap())
                        .map(|(&x, &y)| x + y)
                        .collect(),
                ),
                Gate::Mul(l, r) => {
                    // B_r recomputed from the simulation relation, mod q.
                    let sr = sims[r].as_ref().unwrap();
                    let b_r = ZqMatrix::from_fn(q, n, m, |row, col| {
                        let mut acc: i128 = 0;
                        for kk in 0..m {
                            acc += a.get(row, kk) as i128 * sr[kk * m + col];
                            acc %= q.q() as i128;
                        }
                        let gv = g.get(row, col) as i128 * vals[r] as i128 % q.q() as i128;
                        let centered = (acc - gv).rem_euclid(q.q() as i128);
                        centered as u64
                    });
                    let br_bits = bit_decompose_rows(q, &b_r, m);
                    let xl = q.centered(vals[l]) as i128;
                    let folded = mul_bits(sims[l].as_ref().unwrap(), &br_bits);
                    let s: Vec<i128> = sr
                        .iter()
                        .zip(&folded)
                        .map(|(&sv, &fv)| xl * sv - fv)
                        .collect();
                    (q.mul(vals[l], vals[r]), s)
                }
            };
            vals[i] = v;
            sims[i] = Some(s);
        }
        Ok(sims[self.output].take().unwrap())
    }

    /// Per-instance 2-norm noise bound: Input -> delta_in; Add -> b_l + b_r;
    /// ConstAdd -> b; ConstMul -> m*b; Mul -> |x_l|_centered * b_r + m * b_l.
    pub fn noise_bound(&self, x: &[u64], m: usize, delta_in: f64) -> Result<f64, CircuitError> {
        self.check_arity(x.len())?;
        let q = self.modulus;
        let mut vals = vec![0u64; self.gates.len()];
        let mut bounds = vec![0f64; self.gates.len()];
        for (i, gate) in self.gates.iter().enumerate() {
            let (v, b) = match *gate {
                Gate::Input(k) => (x[k] % q.q(), delta_in),
                Gate::ConstAdd(a, s) => (q.add(vals[s], a % q.q()), bounds[s]),
                Gate::ConstMul(a, s) => (q.mul(vals[s], a), m as f64 * bounds[s]),
                Gate::Add(l, r) => (q.add(vals[l], vals[r]), bounds[l] + bounds[r]),
                Gate::Mul(l, r) => (
                    q.mul(vals[l], vals[r]),
                    q.centered(vals[l]).unsigned_abs() as f64 * bounds[r] + m as f64 * bounds[l],
                ),
            };
            vals[i] = v;
            bounds[i] = b;
        }
        Ok(bounds[self.output])
    }

    /// Input-independent noise bound: every Mul left value is assumed to have
    /// centered magnitude `p_bound` (use 1 for the bit-product family).
    pub fn noise_bound_worst(&self, m: usize, delta_in: f64, p_bound: f64) -> f64 {
        let mut bounds = vec![0f64; self.gates.len()];
        for (i, gate) in self.gates.iter().enumerate() {
            bounds[i] = match *gate {
                Gate::Input(_) => delta_in,
                Gate::ConstAdd(_, s) => bounds[s],
                Gate::ConstMul(_, s) => m as f64 * bounds[s],
                Gate::Add(l, r) => bounds[l] + bounds[r],
                Gate::Mul(l, r) => p_bound * bounds[r] + m as f64 * bounds[l],
            };
        }
        bounds[self.output]
    }
}

/// bits^T * c over Z_q (bits is a 0/1 integer matrix, c a vector).
fn int_transpose_mul_vec(bits: &IntMatrix, c: &[u64], q: Modulus) -> Vec<u64> {
    assert_eq!(bits.rows(), c.len());
    let mut out = vec![0u64; bits.cols()];
    for i in 0..bits.rows() {
        let cv = c[i];
        if cv == 0 {
            continue;
        }
        for j in 0..bits.cols() {
            let b = bits.get(i, j);
            if b != 0 {
                debug_assert!(b == 1, "bit matrix entry out of {{0,1}}");
                out[j] = q.add(out[j], cv);
            }
        }
    }
    out
}

pub struct CircuitBuilder {
    modulus: Modulus,
    gates: Vec<Gate>,
    num_inputs: usize,
}

impl CircuitBuilder {
    pub fn input(&mut self, k: usize) -> usize {
        assert!(k < self.num_inputs);
        self.push(Gate::Input(k))
    }

    pub fn const_add(&mut self, a: u64, src: usize) -> usize {
        self.push(Gate::ConstAdd(a % self.modulus.q(), src))
    }

    pub fn const_mul(&mut self, a: u64, src: usize) -> usize {
        self.push(Gate::ConstMul(a % self.modulus.q(), src))
    }

    pub fn add(&mut self, l: usize, r: usize) -> usize {
        self.push(Gate::Add(l, r))
    }

    pub fn mul(&mut self, l: usize, r: usize) -> usize {
        self.push(Gate::Mul(l, r))
    }

    fn push(&mut self, g: Gate) -> usize {
        if let Gate::ConstAdd(_, s) | Gate::ConstMul(_, s) = g {
            assert!(s < self.gates.len());
        }
        if let Gate::Add(l, r) | Gate::Mul(l, r) = g {
            assert!(l < self.gates.len() && r < self.gates.len());
        }
        self.gates.push(g);
        self.gates.len() - 1
    }

    pub fn finish(self, output: usize) -> Circuit {
        assert!(output < self.gates.len());
        Circuit {
            modulus: self.modulus,
            gates: self.gates,
            output,
            num_inputs: self.num_inputs,
        }
    }
}

/// Equality-test circuit over bit-decomposed tags:
/// f_{t*}(t_1, ..., t_d) = sum_i eq_{t*}(t_i), where each eq block is the
/// product over `ell` per-bit match wires. Bit j of tag i arrives on input
/// wire i*ell + j. A match wire is the raw input when bit j of t* is 1 and
/// 1 - input (via ConstMul(q-1) then ConstAdd(1)) otherwise, so every Mul
/// gate's left operand is a fresh {0,1}-valued wire.
pub fn build_f_tstar(
    modulus: Modulus,
    t_star: u64,
    d: usize,
    ell: u32,
) -> Result<Circuit, CircuitError> {
    if ell as u64 >= 64 || t_star >= (1u64 << ell) {
        return Err(CircuitError::TagOutOfRange(t_star, ell));
    }
    let q = modulus.q();
    let num_inputs = d * ell as usize;
    let mut b = Circuit::builder(modulus, num_inputs);
    let mut blocks = Vec::with_capacity(d);
    for tag in 0..d {
        let mut acc: Option<usize> = None;
        for j in 0..ell as usize {
            let inp = b.input(tag * ell as usize + j);
            let w = if (t_star >> j) & 1 == 1 {
                inp
            } else {
                let neg = b.const_mul(q - 1, inp);
                b.const_add(1, neg)
            };
            acc = Some(match acc {
                None => w,
                // Fresh match wire on the left keeps the value multiplying
                // accumulated noise in {0,1}.
                Some(prev) => b.mul(w, prev),
            });
        }
        blocks.push(acc.unwrap());
    }
    let mut out = blocks[0];
    for &blk in &blocks[1..] {
        out = b.add(out, blk);
    }
    Ok(b.finish(out))
}

/// Literal Fermat equality circuit over whole-tag inputs (oracle/test use;
/// capped at q <= 4096 since the gate count grows with log q and the noise
/// growth makes it useless for real parameters):
/// eq(t) = 1 - (t - t*)^{q-1}, summed over d tags.
pub fn build_eq_fermat(modulus: Modulus, t_star: u64, d: usize) -> Result<Circuit, CircuitError> {
    let q = modulus.q();
    if q > 4096 {
        return Err(CircuitError::FermatModulusTooLarge(q));
    }
    let mut b = Circuit::builder(modulus, d);
    let neg_tstar = (q - t_star % q) % q;
    let mut blocks = Vec::with_capacity(d);
    for tag in 0..d {
        let inp = b.input(tag);
        let shifted = b.const_add(neg_tstar, inp);
        // (t - t*)^{q-1} by square and multiply.
        let e = q - 1;
        let mut pow: Option<usize> = None; // running result
        let mut sq = shifted;
        let mut bits = e;
        while bits > 0 {
            if bits & 1 == 1 {
                pow = Some(match pow {
                    None => sq,
                    Some(p) => b.mul(sq, p),
                });
            }
            bits >>= 1;
            if bits > 0 {
                sq = b.mul(sq, sq);
            }
        }
        let neg_pow = b.const_mul(q - 1, pow.unwrap());
        let eq = b.const_add(1, neg_pow);
        blocks.push(eq);
    }
    let mut out = blocks[0];
    for &blk in &blocks[1..] {
        out = b.add(out, blk);
    }
    Ok(b.finish(out))
}

/// Bit-decompose tag values into the circuit's input layout.
pub fn tags_to_bits(tags: &[u64], ell: u32) -> Vec<u64> {
    let mut out = Vec::with_capacity(tags.len() * ell as usize);
    for &t in tags {
        for j in 0..ell {
            out.push((t >> j) & 1);
        }
    }
    out
}
