//! dfk: puncturable encryption CLI over the DFK1 container format.
//!
//! Exit codes: 0 success, 2 revoked tag, 3 format or I/O error,
//! 4 parameter or capacity error.

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};
use dfk::container::{
    self, ContainerError, KIND_CIPHERTEXT, KIND_PUBLIC_KEY, KIND_PUNCTURE_KEY,
};
use dfk::dfkhe::DfkheError;
use dfk::gauss::RngStream;
use dfk::params::{
    beta_analytic, equality_circuit_bounds, practical_check, size_formulas, theorem2_check,
    ParamsError, Profile,
};
use dfk::pe::{pe_dec, pe_enc, pe_key, pe_pun, PeCiphertext, PeError, PePublicKey, PunctureKey};
use rand::Rng;
use std::fmt;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

const BUILTIN_PROFILES: &[(&str, &str)] =
    &[("toy", include_str!("../profiles/toy.profile"))];

const EXIT_REVOKED: u8 = 2;
const EXIT_FORMAT: u8 = 3;
const EXIT_CAPACITY: u8 = 4;

#[derive(Debug)]
struct CliError {
    message: String,
    code: u8,
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

fn format_err(message: impl Into<String>) -> CliError {
    CliError {
        message: message.into(),
        code: EXIT_FORMAT,
    }
}

fn capacity_err(message: impl Into<String>) -> CliError {
    CliError {
        message: message.into(),
        code: EXIT_CAPACITY,
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> CliError {
        format_err(e.to_string())
    }
}

impl From<ContainerError> for CliError {
    fn from(e: ContainerError) -> CliError {
        format_err(e.to_string())
    }
}

impl From<ParamsError> for CliError {
    fn from(e: ParamsError) -> CliError {
        capacity_err(e.to_string())
    }
}

impl From<PeError> for CliError {
    fn from(e: PeError) -> CliError {
        let code = match &e {
            PeError::Revoked(_) => EXIT_REVOKED,
            PeError::TagOutOfRange(..) | PeError::TagCount { .. } => EXIT_FORMAT,
            PeError::Dfkhe(inner) => match inner {
                DfkheError::Reject { .. } => EXIT_REVOKED,
                DfkheError::LevelOverflow { .. } => EXIT_CAPACITY,
                _ => EXIT_FORMAT,
            },
        };
        CliError {
            message: e.to_string(),
            code,
        }
    }
}

#[derive(Parser)]
#[command(name = "dfk", version, about = "puncturable encryption toolkit")]
struct Cli {
    /// Deterministic RNG seed; omit for system entropy.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate pk.dfk and sk0.dfk for a profile.
    Keygen {
        /// Built-in profile name (toy) or path to a profile file.
        #[arg(long)]
        profile: String,
        /// Output directory.
        #[arg(long, short = 'o', default_value = ".")]
        out: PathBuf,
    },
    /// Encrypt a file under d tags.
    Encrypt {
        #[arg(long)]
        pk: PathBuf,
        /// Comma-separated decimal tags, exactly d of them.
        #[arg(long)]
        tags: String,
        /// Output ciphertext container.
        #[arg(long, short = 'o')]
        out: PathBuf,
        /// Input plaintext file.
        input: PathBuf,
    },
    /// Puncture a key on one more tag.
    Puncture {
        #[arg(long)]
        pk: PathBuf,
        /// Existing puncture-key container.
        #[arg(long)]
        key: PathBuf,
        /// Tag to revoke, decimal.
        #[arg(long)]
        tag: u64,
        #[arg(long, short = 'o')]
        out: PathBuf,
    },
    /// Decrypt a ciphertext container.
    Decrypt {
        #[arg(long)]
        pk: PathBuf,
        #[arg(long)]
        key: PathBuf,
        #[arg(long, short = 'o')]
        out: PathBuf,
        input: PathBuf,
    },
    /// Evaluate the noise budget for every puncture level of a profile.
    ParamsCheck {
        #[arg(long)]
        profile: String,
    },
    /// Measure decryption noise empirically against the analytic budget.
    BenchNoise {
        #[arg(long)]
        profile: String,
        #[arg(long, default_value_t = 100)]
        trials: u32,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => EXIT_FORMAT,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code)
        }
    }
}

fn make_rng(seed: Option<u64>) -> RngStream {
    match seed {
        Some(s) => RngStream::from_u64_seed(s),
        None => RngStream::from_entropy(),
    }
}

/// Resolve a built-in name, a profile text file, or a sealed DFK1 profile
/// container to a validated profile.
fn resolve_profile(name: &str) -> Result<Profile, CliError> {
    if let Some((_, text)) = BUILTIN_PROFILES.iter().find(|(n, _)| *n == name) {
        return Profile::parse(text).map_err(|e| format_err(e.to_string()));
    }
    let path = Path::new(name);
    if !path.exists() {
        return Err(format_err(format!(
            "profile not found: {name} (not a built-in name or readable file)"
        )));
    }
    let bytes = std::fs::read(path)?;
    if bytes.starts_with(&container::MAGIC) {
        let (profile, _) = container::read_profile(&bytes)?;
        Ok(profile)
    } else {
        let text = String::from_utf8(bytes)
            .map_err(|_| format_err(format!("profile file {name} is not UTF-8 or DFK1")))?;
        Profile::parse(&text).map_err(|e| format_err(e.to_string()))
    }
}

/// Write via a temp file in the destination directory plus an atomic
/// rename, so failed or rejected runs leave nothing behind.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    let dir = dir.unwrap_or_else(|| Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.flush()?;
    tmp.persist(path)
        .map_err(|e| format_err(format!("cannot persist {}: {}", path.display(), e.error)))?;
    Ok(())
}

fn load_kind(path: &Path, kind: u8) -> Result<Vec<u8>, CliError> {
    let bytes = std::fs::read(path)
        .map_err(|e| format_err(format!("cannot read {}: {e}", path.display())))?;
    let (got, _, _) = container::open(&bytes)?;
    if got != kind {
        return Err(format_err(format!(
            "{}: container kind {got}, expected {kind}",
            path.display()
        )));
    }
    Ok(bytes)
}

fn load_pk(path: &Path) -> Result<PePublicKey, CliError> {
    let bytes = load_kind(path, KIND_PUBLIC_KEY)?;
    Ok(container::read_public_key(&bytes)?)
}

fn load_key(path: &Path, pk: &PePublicKey) -> Result<PunctureKey, CliError> {
    let bytes = load_kind(path, KIND_PUNCTURE_KEY)?;
    Ok(container::read_puncture_key(&bytes, pk)?)
}

fn parse_tags(spec: &str) -> Result<Vec<u64>, CliError> {
    spec.split(',')
        .map(|s| {
            s.trim()
                .parse::<u64>()
                .map_err(|_| format_err(format!("bad tag {s:?}: expected decimal u64")))
        })
        .collect()
}

/// Measured logical size of integer key material: entries at the width
/// needed for the largest observed magnitude.
fn key_logical_bits(sk: &PunctureKey) -> u64 {
    let m = sk.basis_matrix();
    let max_entry = m.max_abs().max(1) as f64;
    let per_entry = (2.0 * max_entry).log2().ceil().max(1.0) as u64;
    (m.rows() as u64) * (m.cols() as u64) * per_entry
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.cmd {
        Cmd::Keygen { profile, out } => cmd_keygen(&profile, &out, cli.seed),
        Cmd::Encrypt {
            pk,
            tags,
            out,
            input,
        } => cmd_encrypt(&pk, &tags, &input, &out, cli.seed),
        Cmd::Puncture { pk, key, tag, out } => cmd_puncture(&pk, &key, tag, &out, cli.seed),
        Cmd::Decrypt {
            pk,
            key,
            out,
            input,
        } => cmd_decrypt(&pk, &key, &input, &out),
        Cmd::ParamsCheck { profile } => cmd_params_check(&profile),
        Cmd::BenchNoise { profile, trials } => cmd_bench_noise(&profile, trials, cli.seed),
    }
}

fn cmd_keygen(profile_name: &str, out: &Path, seed: Option<u64>) -> Result<(), CliError> {
    let profile = resolve_profile(profile_name)?;
    let formulas = size_formulas(&profile, 0);
    for eta in 0..=profile.eta_max {
        let bounds = equality_circuit_bounds(&profile, eta);
        let (ok, report) = practical_check(&profile, eta, &bounds);
        if !ok {
            return Err(capacity_err(format!(
                "profile {} infeasible at eta = {eta}: bound_dec = {} >= q/4 = {}",
                profile.name, report.bound_dec, report.q_over_4
            )));
        }
    }
    let mut rng = make_rng(seed);
    let (pk, sk0) = pe_key(&profile, &mut rng)?;
    std::fs::create_dir_all(out)?;
    let pk_bytes = container::write_public_key(&pk);
    let sk_bytes = container::write_puncture_key(&sk0, &profile);
    write_atomic(&out.join("pk.dfk"), &pk_bytes)?;
    write_atomic(&out.join("sk0.dfk"), &sk_bytes)?;
    let k = profile.k() as u64;
    let pk_entries = (profile.wires() as u64 + 2) * profile.n as u64 * profile.m() as u64;
    let pk_measured = pk_entries * k;
    let sk_measured = key_logical_bits(&sk0);
    println!("profile = {}", profile.name);
    println!("pk_file = {}", out.join("pk.dfk").display());
    println!("sk0_file = {}", out.join("sk0.dfk").display());
    println!("pk_bits_measured = {pk_measured}");
    println!("pk_bits_formula = {}", formulas.pk_bits);
    println!("pk_match = {}", pk_measured == formulas.pk_bits);
    println!("sk0_bits_measured = {sk_measured}");
    println!("sk0_bits_formula = {}", formulas.sk0_bits);
    println!(
        "ct_bits_formula = {} (per block of {} plaintext bytes)",
        formulas.ct_bits,
        profile.m() / 8
    );
    Ok(())
}

fn bytes_to_bits(chunk: &[u8], m: usize) -> Vec<u8> {
    let mut bits = vec![0u8; m];
    for (i, &byte) in chunk.iter().enumerate() {
        for j in 0..8 {
            bits[i * 8 + j] = (byte >> j) & 1;
        }
    }
    bits
}

fn bits_to_bytes(bits: &[u8], len: usize) -> Vec<u8> {
    let mut out = vec![0u8; len];
    for (i, byte) in out.iter_mut().enumerate() {
        for j in 0..8 {
            *byte |= (bits[i * 8 + j] & 1) << j;
        }
    }
    out
}

fn cmd_encrypt(
    pk_path: &Path,
    tag_spec: &str,
    input: &Path,
    out: &Path,
    seed: Option<u64>,
) -> Result<(), CliError> {
    let pk = load_pk(pk_path)?;
    let profile = pk.profile().clone();
    let tags = parse_tags(tag_spec)?;
    let data = std::fs::read(input)
        .map_err(|e| format_err(format!("cannot read {}: {e}", input.display())))?;
    let block_bytes = profile.m() / 8;
    let rng = make_rng(seed);
    let mut blocks: Vec<PeCiphertext> = Vec::new();
    let mut final_len = 0u32;
    for (i, chunk) in data.chunks(block_bytes).enumerate() {
        let bits = bytes_to_bits(chunk, profile.m());
        let mut block_rng = rng.substream(i as u64);
        blocks.push(pe_enc(&pk, &bits, &tags, &mut block_rng)?);
        final_len = chunk.len() as u32;
    }
    let sealed = container::write_ciphertexts(&blocks, final_len, &profile);
    write_atomic(out, &sealed)?;
    println!("blocks = {}", blocks.len());
    println!("ct_file = {}", out.display());
    println!(
        "ct_bits_logical = {}",
        blocks.len() as u64 * size_formulas(&profile, 0).ct_bits
    );
    Ok(())
}

fn cmd_puncture(
    pk_path: &Path,
    key_path: &Path,
    tag: u64,
    out: &Path,
    seed: Option<u64>,
) -> Result<(), CliError> {
    let pk = load_pk(pk_path)?;
    let profile = pk.profile().clone();
    let sk = load_key(key_path, &pk)?;
    let mut rng = make_rng(seed);
    let sk_next = pe_pun(&pk, &sk, tag, &mut rng)?;
    let old_bytes = std::fs::metadata(key_path)?.len();
    let sealed = container::write_puncture_key(&sk_next, &profile);
    write_atomic(out, &sealed)?;
    println!("level = {}", sk_next.level());
    println!("tags = {:?}", sk_next.tags);
    println!("key_file = {}", out.display());
    println!("key_bytes_previous = {old_bytes}");
    println!("key_bytes = {}", sealed.len());
    println!("key_bits_logical = {}", key_logical_bits(&sk_next));
    println!(
        "key_bits_formula = {}",
        size_formulas(&profile, sk_next.level() as u32).pkey_bits
    );
    Ok(())
}

fn cmd_decrypt(
    pk_path: &Path,
    key_path: &Path,
    input: &Path,
    out: &Path,
) -> Result<(), CliError> {
    let pk = load_pk(pk_path)?;
    let profile = pk.profile().clone();
    let sk = load_key(key_path, &pk)?;
    let ct_bytes = load_kind(input, KIND_CIPHERTEXT)?;
    let (blocks, final_len) = container::read_ciphertexts(&ct_bytes, &profile)?;
    let block_bytes = profile.m() / 8;
    let mut plain = Vec::new();
    let count = blocks.len();
    for (i, block) in blocks.iter().enumerate() {
        let bits = pe_dec(&pk, &sk, block)?;
        let len = if i + 1 == count {
            final_len as usize
        } else {
            block_bytes
        };
        if len > block_bytes {
            return Err(format_err(format!(
                "final block length {len} exceeds block capacity {block_bytes}"
            )));
        }
        plain.extend_from_slice(&bits_to_bytes(&bits, len));
    }
    write_atomic(out, &plain)?;
    println!("bytes = {}", plain.len());
    println!("out_file = {}", out.display());
    Ok(())
}

fn cmd_params_check(profile_name: &str) -> Result<(), CliError> {
    let profile = resolve_profile(profile_name)?;
    let beta = beta_analytic(
        2,
        profile.wires() as u32,
        profile.m(),
        profile.d as u32,
    )
    .unwrap_or(f64::INFINITY);
    println!("profile = {}", profile.name);
    println!("beta_analytic = {beta}");
    let mut all_pass = true;
    for eta in 0..=profile.eta_max {
        let bounds = equality_circuit_bounds(&profile, eta);
        let (ok, report) = practical_check(&profile, eta, &bounds);
        all_pass &= ok;
        print!("{report}");
        println!(
            "theorem2_analytic_eta_{eta} = {}",
            theorem2_check(&profile, eta, beta)
        );
    }
    if all_pass {
        Ok(())
    } else {
        Err(capacity_err(format!(
            "profile {} fails the practical noise budget",
            profile.name
        )))
    }
}

fn cmd_bench_noise(profile_name: &str, trials: u32, seed: Option<u64>) -> Result<(), CliError> {
    if trials < 1 {
        return Err(capacity_err("trials must be >= 1"));
    }
    let profile = resolve_profile(profile_name)?;
    let mut rng = make_rng(seed);
    let (pk, sk0) = pe_key(&profile, &mut rng)?;
    // Ciphertext tags all zero; punctures walk up from tag 1, so every
    // level decrypts and the measured noise is the legitimate-path noise.
    let enc_tags = vec![0u64; profile.d];
    if profile.eta_max as u64 >= (1u64 << profile.ell) {
        return Err(capacity_err("tag space too small for disjoint punctures"));
    }
    println!("profile = {}", profile.name);
    println!("trials = {trials}");
    println!("q_over_4 = {}", profile.q as f64 / 4.0);
    let mut key = sk0;
    for eta in 0..=profile.eta_max {
        if eta > 0 {
            key = pe_pun(&pk, &key, eta as u64, &mut rng)?;
        }
        let bounds = equality_circuit_bounds(&profile, eta);
        let (_, report) = practical_check(&profile, eta, &bounds);
        let mut max_observed: i64 = 0;
        for _ in 0..trials {
            let mu: Vec<u8> = (0..profile.m()).map(|_| rng.gen_range(0..2u8)).collect();
            let ct = pe_enc(&pk, &mu, &enc_tags, &mut rng)?;
            let noise = dfk::pe::pe_dec_noise(&pk, &key, &ct, &mu)?;
            max_observed = max_observed.max(noise);
        }
        println!("eta_{eta}_max_observed = {max_observed}");
        println!("eta_{eta}_bound_dec = {}", report.bound_dec);
        println!(
            "eta_{eta}_observed_lt_bound = {}",
            (max_observed as f64) < report.bound_dec
        );
        println!(
            "eta_{eta}_observed_lt_q4 = {}",
            (max_observed as f64) < profile.q as f64 / 4.0
        );
    }
    Ok(())
}
