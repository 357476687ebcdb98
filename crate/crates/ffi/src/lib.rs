//! C ABI for the `hybrid-qkd` simulator.
//!
//! Every fallible function returns an [`HqStatus`]; on failure a message is
//! kept per thread and can be read with [`hq_last_error_message`]. Objects
//! are handed out as opaque pointers and must be released with their
//! matching `*_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use hybrid_qkd::channel::{self, ClassicalMessage, CodecError};
use hybrid_qkd::optics::NoiseParams;
use hybrid_qkd::protocol::{self, Basis, Encoding, Optics, ProtocolConfig, SessionTally, SiftedKey};
use hybrid_qkd::rng::{domain, stream_rng};
use hybrid_qkd::source::{self, SourceParams};
use hybrid_qkd::spinorbit::Polarization;
use hybrid_qkd::tomography::{self, CountRecord, MleOptions};
use hybrid_qkd::QkdError;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HqStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Truncation = 3,
    InvalidState = 4,
    InsufficientStatistics = 5,
    EmptyKey = 6,
    MissingSetting = 7,
    DegenerateCounts = 8,
    Codec = 9,
    BufferTooSmall = 10,
    Panic = 11,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HqEncoding {
    PolarizationOnly = 0,
    Hybrid = 1,
}

fn encoding_from(raw: u32) -> Result<Encoding, Failure> {
    match raw {
        x if x == HqEncoding::PolarizationOnly as u32 => Ok(Encoding::PolarizationOnly),
        x if x == HqEncoding::Hybrid as u32 => Ok(Encoding::Hybrid),
        other => Err(bad(format!("unknown encoding {other}"))),
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HqSourceParams {
    pub rep_rate: f64,
    pub mean_photon_mu: f64,
    pub g2: f64,
    pub eta_det: f64,
    pub dark_rate: f64,
    pub gate_seconds: f64,
}

impl From<SourceParams> for HqSourceParams {
    fn from(p: SourceParams) -> Self {
        Self {
            rep_rate: p.rep_rate,
            mean_photon_mu: p.mean_photon_mu,
            g2: p.g2,
            eta_det: p.eta_det,
            dark_rate: p.dark_rate,
            gate_seconds: p.gate_seconds,
        }
    }
}

impl From<HqSourceParams> for SourceParams {
    fn from(p: HqSourceParams) -> Self {
        Self {
            rep_rate: p.rep_rate,
            mean_photon_mu: p.mean_photon_mu,
            g2: p.g2,
            eta_det: p.eta_det,
            dark_rate: p.dark_rate,
            gate_seconds: p.gate_seconds,
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct HqQberReport {
    pub sample_size: u64,
    pub error_count: u64,
    pub qber: f64,
    pub std_error: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct HqSessionStats {
    pub rounds: u64,
    pub detected: u64,
    pub multiphoton: u64,
    pub key_length: u64,
}

/// Count record for one tomography setting. `setting` is 0..=5 for
/// H, V, D, A, R, L.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HqCount {
    pub setting: u8,
    pub shots: u64,
    pub clicks: u64,
}

/// Reconstructed 2x2 density matrix, row-major in the (H, V) basis.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct HqTomographyResult {
    pub rho_re: [f64; 4],
    pub rho_im: [f64; 4],
    pub log_likelihood: f64,
    pub iterations: u64,
    pub converged: bool,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct HqHbtResult {
    pub g2: f64,
    pub n_pulses: u64,
    pub zero_delay: u64,
    pub adjacent: u64,
}

/// Protocol configuration.
pub struct HqConfig {
    inner: ProtocolConfig,
}

/// Completed session: tallies and the current sifted key.
pub struct HqSession {
    tally: SessionTally,
    key: SiftedKey,
}

/// Classical-channel message.
pub struct HqMessage {
    inner: ClassicalMessage,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure(HqStatus, String);

impl From<QkdError> for Failure {
    fn from(e: QkdError) -> Self {
        let status = match &e {
            QkdError::Truncation { .. } => HqStatus::Truncation,
            QkdError::InvalidDensityMatrix(_)
            | QkdError::NormViolation { .. }
            | QkdError::ZeroNorm
            | QkdError::IncompleteProjectors { .. } => HqStatus::InvalidState,
            QkdError::InsufficientStatistics { .. } => HqStatus::InsufficientStatistics,
            QkdError::EmptyKey => HqStatus::EmptyKey,
            QkdError::MissingSetting(_) => HqStatus::MissingSetting,
            QkdError::DegenerateCounts(_) => HqStatus::DegenerateCounts,
            QkdError::Codec(_) => HqStatus::Codec,
            _ => HqStatus::InvalidArgument,
        };
        Failure(status, e.to_string())
    }
}

impl From<CodecError> for Failure {
    fn from(e: CodecError) -> Self {
        Failure(HqStatus::Codec, e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(HqStatus::NullPointer, format!("{what} is null"))
}

fn bad(msg: impl Into<String>) -> Failure {
    Failure(HqStatus::InvalidArgument, msg.into())
}

/// Runs `f`, converting errors and panics into a status code.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> HqStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => HqStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(_) => {
            set_last_error("internal panic".into());
            HqStatus::Panic
        }
    }
}

unsafe fn out_ref<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn in_ref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn in_slice<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        Ok(&[])
    } else if p.is_null() {
        Err(null(what))
    } else {
        Ok(slice::from_raw_parts(p, len))
    }
}

fn boxed<T>(value: T) -> *mut T {
    Box::into_raw(Box::new(value))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn hq_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies the calling thread's last error message into `buf` (NUL
/// terminated, truncated to fit) and returns the full message length in
/// bytes, excluding the NUL. Returns 0 if there is no error.
///
/// # Safety
/// `buf` must be valid for `len` bytes or null.
#[no_mangle]
pub unsafe extern "C" fn hq_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let Some(msg) = e.as_ref() else { return 0 };
        let bytes = msg.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            ptr::copy_nonoverlapping(bytes.as_ptr().cast(), buf, n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

#[no_mangle]
pub extern "C" fn hq_clear_last_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

/// Polarization-only QBER `sin^2(theta) / 2`.
#[no_mangle]
pub extern "C" fn hq_theoretical_qber(theta: f64) -> f64 {
    protocol::theoretical_qber(theta)
}

/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hq_secret_key_fraction(qber: f64, out: *mut f64) -> HqStatus {
    guard(|| {
        *out_ref(out, "out")? = protocol::secret_key_fraction(qber)?;
        Ok(())
    })
}

/// # Safety
/// `fidelities` must hold `len` values; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn hq_qber_from_fidelities(fidelities: *const f64, len: usize, out: *mut f64) -> HqStatus {
    guard(|| {
        let f = in_slice(fidelities, len, "fidelities")?;
        *out_ref(out, "out")? = protocol::qber_from_fidelities(f)?;
        Ok(())
    })
}

/// Exact sifted-key QBER with ideal detectors. `encoding` is an
/// [`HqEncoding`] value.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hq_exact_qber(
    encoding: u32,
    theta: f64,
    depolarizing_p: f64,
    basis_bias: f64,
    out: *mut f64,
) -> HqStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        if !(basis_bias > 0.0 && basis_bias < 1.0) {
            return Err(bad("basis_bias must lie in (0, 1)"));
        }
        let noise = NoiseParams::new(depolarizing_p)?;
        *out = protocol::exact_qber(&Optics::default(), encoding_from(encoding)?, theta, &noise, basis_bias)?;
        Ok(())
    })
}

#[no_mangle]
pub extern "C" fn hq_source_params_default() -> HqSourceParams {
    SourceParams::default().into()
}

#[no_mangle]
pub extern "C" fn hq_source_params_ideal() -> HqSourceParams {
    SourceParams::ideal().into()
}

/// New configuration with default values; free with [`hq_config_free`].
#[no_mangle]
pub extern "C" fn hq_config_new() -> *mut HqConfig {
    boxed(HqConfig {
        inner: ProtocolConfig::default(),
    })
}

/// # Safety
/// `config` must come from [`hq_config_new`] or be null.
#[no_mangle]
pub unsafe extern "C" fn hq_config_free(config: *mut HqConfig) {
    if !config.is_null() {
        drop(Box::from_raw(config));
    }
}

unsafe fn with_config(config: *mut HqConfig, f: impl FnOnce(&mut ProtocolConfig) -> Result<(), Failure>) -> HqStatus {
    guard(|| f(&mut out_ref(config, "config")?.inner))
}

/// # Safety
/// `config` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn hq_config_set_rounds(config: *mut HqConfig, n_rounds: u64) -> HqStatus {
    with_config(config, |c| {
        if n_rounds == 0 {
            return Err(bad("n_rounds must be at least 1"));
        }
        c.n_rounds = n_rounds;
        Ok(())
    })
}

/// `encoding` is an [`HqEncoding`] value.
///
/// # Safety
/// `config` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn hq_config_set_encoding(config: *mut HqConfig, encoding: u32) -> HqStatus {
    with_config(config, |c| {
        c.encoding = encoding_from(encoding)?;
        Ok(())
    })
}

/// Bob's platform angle in radians.
///
/// # Safety
/// `config` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn hq_config_set_theta(config: *mut HqConfig, theta: f64) -> HqStatus {
    with_config(config, |c| {
        if !theta.is_finite() {
            return Err(bad("theta must be finite"));
        }
        c.theta = theta;
        Ok(())
    })
}

/// # Safety
/// `config` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn hq_config_set_seed(config: *mut HqConfig, seed: u64) -> HqStatus {
    with_config(config, |c| {
        c.seed = seed;
        Ok(())
    })
}

/// # Safety
/// `config` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn hq_config_set_depolarizing(config: *mut HqConfig, p: f64) -> HqStatus {
    with_config(config, |c| {
        c.noise = NoiseParams::new(p)?;
        Ok(())
    })
}

/// # Safety
/// `config` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn hq_config_set_source(config: *mut HqConfig, source: HqSourceParams) -> HqStatus {
    with_config(config, |c| {
        let s = SourceParams::from(source);
        s.validate()?;
        c.source = s;
        Ok(())
    })
}

/// # Safety
/// `config` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn hq_config_set_basis_bias(config: *mut HqConfig, z_probability: f64) -> HqStatus {
    with_config(config, |c| {
        if !(z_probability > 0.0 && z_probability < 1.0) {
            return Err(bad("basis bias must lie in (0, 1)"));
        }
        c.basis_bias = z_probability;
        Ok(())
    })
}

/// # Safety
/// `config` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn hq_config_set_discard_multiphoton(config: *mut HqConfig, discard: bool) -> HqStatus {
    with_config(config, |c| {
        c.discard_multiphoton = discard;
        Ok(())
    })
}

/// Simulates and sifts a full session.
///
/// # Safety
/// `config` must be a live handle and `out` a valid pointer. On success
/// `*out` receives a session to release with [`hq_session_free`].
#[no_mangle]
pub unsafe extern "C" fn hq_session_run(config: *const HqConfig, out: *mut *mut HqSession) -> HqStatus {
    guard(|| {
        let config = in_ref(config, "config")?;
        let out = out_ref(out, "out")?;
        *out = ptr::null_mut();
        let (tally, key) = protocol::run_sifted(&config.inner)?;
        *out = boxed(HqSession { tally, key });
        Ok(())
    })
}

/// # Safety
/// `session` must come from [`hq_session_run`] or be null.
#[no_mangle]
pub unsafe extern "C" fn hq_session_free(session: *mut HqSession) {
    if !session.is_null() {
        drop(Box::from_raw(session));
    }
}

/// # Safety
/// `session` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hq_session_stats(session: *const HqSession, out: *mut HqSessionStats) -> HqStatus {
    guard(|| {
        let s = in_ref(session, "session")?;
        *out_ref(out, "out")? = HqSessionStats {
            rounds: s.tally.rounds,
            detected: s.tally.detected,
            multiphoton: s.tally.multiphoton,
            key_length: s.key.len() as u64,
        };
        Ok(())
    })
}

/// Samples `fraction` of the key for QBER estimation and discards the
/// sampled bits from the session's key.
///
/// # Safety
/// `session` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hq_session_estimate_qber(
    session: *mut HqSession,
    fraction: f64,
    seed: u64,
    out: *mut HqQberReport,
) -> HqStatus {
    guard(|| {
        let s = out_ref(session, "session")?;
        let out = out_ref(out, "out")?;
        let mut rng = stream_rng(seed, domain::QBER_SAMPLE, 0);
        let (report, remaining) = protocol::estimate_qber(&s.key, fraction, &mut rng)?;
        s.key = remaining;
        *out = HqQberReport {
            sample_size: report.sample_size,
            error_count: report.error_count,
            qber: report.qber,
            std_error: report.std_error,
        };
        Ok(())
    })
}

/// Copies the current key as 0/1 bytes. `len` must equal the key length.
///
/// # Safety
/// `alice` and `bob` must each be valid for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn hq_session_key(
    session: *const HqSession,
    alice: *mut u8,
    bob: *mut u8,
    len: usize,
) -> HqStatus {
    guard(|| {
        let s = in_ref(session, "session")?;
        if len != s.key.len() {
            return Err(Failure(
                HqStatus::BufferTooSmall,
                format!("key has {} bits, buffers hold {len}", s.key.len()),
            ));
        }
        if len == 0 {
            return Ok(());
        }
        if alice.is_null() || bob.is_null() {
            return Err(null("key buffer"));
        }
        let (a, b) = (slice::from_raw_parts_mut(alice, len), slice::from_raw_parts_mut(bob, len));
        for i in 0..len {
            a[i] = u8::from(s.key.alice_bits[i]);
            b[i] = u8::from(s.key.bob_bits[i]);
        }
        Ok(())
    })
}

unsafe fn bits_from(values: *const u8, len: usize) -> Result<Vec<bool>, Failure> {
    in_slice(values, len, "values")?
        .iter()
        .map(|&v| match v {
            0 => Ok(false),
            1 => Ok(true),
            other => Err(bad(format!("bit value {other} is not 0 or 1"))),
        })
        .collect()
}

unsafe fn new_message(out: *mut *mut HqMessage, build: impl FnOnce() -> Result<ClassicalMessage, Failure>) -> HqStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = ptr::null_mut();
        *out = boxed(HqMessage { inner: build()? });
        Ok(())
    })
}

/// Basis announcement; each entry is 0 for Z or 1 for Y.
///
/// # Safety
/// `bases` must hold `len` bytes; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn hq_message_basis_announce(bases: *const u8, len: usize, out: *mut *mut HqMessage) -> HqStatus {
    new_message(out, || {
        let bits = bits_from(bases, len)?;
        Ok(ClassicalMessage::BasisAnnounce(
            bits.into_iter().map(|y| if y { Basis::Y } else { Basis::Z }).collect(),
        ))
    })
}

/// # Safety
/// `mask` must hold `len` bytes (0 or 1); `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn hq_message_detected_mask(mask: *const u8, len: usize, out: *mut *mut HqMessage) -> HqStatus {
    new_message(out, || Ok(ClassicalMessage::DetectedMask(bits_from(mask, len)?)))
}

/// # Safety
/// `indices` must hold `len` values; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn hq_message_sample_indices(indices: *const u32, len: usize, out: *mut *mut HqMessage) -> HqStatus {
    new_message(out, || Ok(ClassicalMessage::SampleIndices(in_slice(indices, len, "indices")?.to_vec())))
}

/// # Safety
/// `bits` must hold `len` bytes (0 or 1); `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn hq_message_sample_bits(bits: *const u8, len: usize, out: *mut *mut HqMessage) -> HqStatus {
    new_message(out, || Ok(ClassicalMessage::SampleBits(bits_from(bits, len)?)))
}

/// # Safety
/// `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn hq_message_qber_report(
    qber: f64,
    sample_size: u32,
    error_count: u32,
    out: *mut *mut HqMessage,
) -> HqStatus {
    new_message(out, || {
        Ok(ClassicalMessage::QberReport {
            qber,
            sample_size,
            error_count,
        })
    })
}

/// # Safety
/// `message` must be a handle from this library or null.
#[no_mangle]
pub unsafe extern "C" fn hq_message_free(message: *mut HqMessage) {
    if !message.is_null() {
        drop(Box::from_raw(message));
    }
}

/// Wire type tag (0x01..=0x05), or 0 for a null handle.
///
/// # Safety
/// `message` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn hq_message_type(message: *const HqMessage) -> u8 {
    message.as_ref().map_or(0, |m| m.inner.type_tag())
}

/// Number of items (bases, bits or indices); 1 for a QBER report.
///
/// # Safety
/// `message` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn hq_message_len(message: *const HqMessage) -> usize {
    match message.as_ref().map(|m| &m.inner) {
        None => 0,
        Some(ClassicalMessage::BasisAnnounce(v)) => v.len(),
        Some(ClassicalMessage::DetectedMask(v) | ClassicalMessage::SampleBits(v)) => v.len(),
        Some(ClassicalMessage::SampleIndices(v)) => v.len(),
        Some(ClassicalMessage::QberReport { .. }) => 1,
    }
}

/// Copies the items of a list message as `u32` (bits and bases as 0/1).
///
/// # Safety
/// `out` must be valid for `len` values, where `len` is [`hq_message_len`].
#[no_mangle]
pub unsafe extern "C" fn hq_message_items(message: *const HqMessage, out: *mut u32, len: usize) -> HqStatus {
    guard(|| {
        let m = in_ref(message, "message")?;
        let items: Vec<u32> = match &m.inner {
            ClassicalMessage::BasisAnnounce(v) => v.iter().map(|&b| u32::from(b == Basis::Y)).collect(),
            ClassicalMessage::DetectedMask(v) | ClassicalMessage::SampleBits(v) => v.iter().map(|&b| u32::from(b)).collect(),
            ClassicalMessage::SampleIndices(v) => v.clone(),
            ClassicalMessage::QberReport { .. } => return Err(bad("QBER reports have no item list")),
        };
        if len < items.len() {
            return Err(Failure(HqStatus::BufferTooSmall, format!("need {} items", items.len())));
        }
        if !items.is_empty() {
            if out.is_null() {
                return Err(null("out"));
            }
            ptr::copy_nonoverlapping(items.as_ptr(), out, items.len());
        }
        Ok(())
    })
}

/// # Safety
/// `message` must be a live handle; output pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn hq_message_get_qber_report(
    message: *const HqMessage,
    qber: *mut f64,
    sample_size: *mut u32,
    error_count: *mut u32,
) -> HqStatus {
    guard(|| {
        match in_ref(message, "message")?.inner {
            ClassicalMessage::QberReport {
                qber: q,
                sample_size: n,
                error_count: e,
            } => {
                *out_ref(qber, "qber")? = q;
                *out_ref(sample_size, "sample_size")? = n;
                *out_ref(error_count, "error_count")? = e;
                Ok(())
            }
            _ => Err(bad("message is not a QBER report")),
        }
    })
}

/// Encodes one frame. `*written` receives the frame size; if `cap` is too
/// small nothing is copied and [`HqStatus::BufferTooSmall`] is returned.
///
/// # Safety
/// `buf` must be valid for `cap` bytes (or null with `cap == 0`);
/// `written` must be valid.
#[no_mangle]
pub unsafe extern "C" fn hq_message_encode(
    message: *const HqMessage,
    buf: *mut u8,
    cap: usize,
    written: *mut usize,
) -> HqStatus {
    guard(|| {
        let m = in_ref(message, "message")?;
        let written = out_ref(written, "written")?;
        let bytes = channel::encode(&m.inner)?;
        *written = bytes.len();
        if cap < bytes.len() {
            return Err(Failure(
                HqStatus::BufferTooSmall,
                format!("frame needs {} bytes", bytes.len()),
            ));
        }
        if buf.is_null() {
            return Err(null("buf"));
        }
        ptr::copy_nonoverlapping(bytes.as_ptr(), buf, bytes.len());
        Ok(())
    })
}

/// Decodes exactly one frame.
///
/// # Safety
/// `bytes` must hold `len` bytes; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn hq_message_decode(bytes: *const u8, len: usize, out: *mut *mut HqMessage) -> HqStatus {
    new_message(out, || Ok(channel::decode(in_slice(bytes, len, "bytes")?)?))
}

/// Maximum-likelihood reconstruction of the analysis qubit.
///
/// # Safety
/// `counts` must hold `len` records; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn hq_mle_reconstruct(
    counts: *const HqCount,
    len: usize,
    max_iters: u64,
    tol: f64,
    seed: u64,
    out: *mut HqTomographyResult,
) -> HqStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let records = in_slice(counts, len, "counts")?
            .iter()
            .map(|c| {
                let setting = Polarization::ALL
                    .get(usize::from(c.setting))
                    .copied()
                    .ok_or_else(|| bad(format!("setting {} outside 0..=5", c.setting)))?;
                Ok(CountRecord::new(setting, c.shots, c.clicks)?)
            })
            .collect::<Result<Vec<_>, Failure>>()?;
        let opts = MleOptions {
            max_iters: usize::try_from(max_iters).map_err(|_| bad("max_iters too large"))?,
            tol,
            seed,
            ..MleOptions::default()
        };
        let result = tomography::mle_reconstruct(&records, &opts)?;
        let m = result.rho.matrix();
        *out = HqTomographyResult {
            rho_re: [m[(0, 0)].re, m[(0, 1)].re, m[(1, 0)].re, m[(1, 1)].re],
            rho_im: [m[(0, 0)].im, m[(0, 1)].im, m[(1, 0)].im, m[(1, 1)].im],
            log_likelihood: result.log_likelihood,
            iterations: result.iterations as u64,
            converged: result.converged,
        };
        Ok(())
    })
}

/// Hanbury-Brown-Twiss estimate of g2(0) from `n_pulses` simulated pulses.
///
/// # Safety
/// `source` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn hq_hbt_estimate(
    source: *const HqSourceParams,
    n_pulses: u64,
    seed: u64,
    out: *mut HqHbtResult,
) -> HqStatus {
    guard(|| {
        let params = SourceParams::from(*in_ref(source, "source")?);
        let out = out_ref(out, "out")?;
        let mut rng = stream_rng(seed, domain::HBT_CHUNK, u64::MAX);
        let est = source::hbt_g2_estimate(n_pulses, &params, &mut rng)?;
        *out = HqHbtResult {
            g2: est.g2,
            n_pulses: est.n_pulses,
            zero_delay: est.zero_delay,
            adjacent: est.adjacent,
        };
        Ok(())
    })
}
