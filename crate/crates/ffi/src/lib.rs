//! C ABI for the dagdecode lattice decoders.
//!
//! Instances and hypotheses are opaque heap handles owned by the caller and
//! released with the matching `*_free` function. Every fallible call returns
//! a [`DagStatus`]; on failure, [`dag_last_error_message`] describes the
//! error for the calling thread. Positions are 1-based, token ids 0-based,
//! and `-INFINITY` encodes impossible transitions.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use dagdecode::generator::{generate_instance, GeneratorConfig};
use dagdecode::io::parse_instance;
use dagdecode::scoring;
use dagdecode::{DecodingPath, Error, Hypothesis, Instance, Strategy, Translation};

/// Result codes returned by every fallible function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DagStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Parse = 3,
    Shape = 4,
    Validation = 5,
    Vocab = 6,
    Infeasible = 7,
    DeadEnd = 8,
    Panic = 9,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DagStrategy {
    Greedy = 0,
    Lookahead = 1,
    Viterbi = 2,
    JointViterbi = 3,
}

impl From<DagStrategy> for Strategy {
    fn from(s: DagStrategy) -> Self {
        match s {
            DagStrategy::Greedy => Strategy::Greedy,
            DagStrategy::Lookahead => Strategy::Lookahead,
            DagStrategy::Viterbi => Strategy::Viterbi,
            DagStrategy::JointViterbi => Strategy::JointViterbi,
        }
    }
}

/// Log-probabilities of a (path, tokens) pair.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct DagScores {
    pub path_logprob: f64,
    pub emission_logprob: f64,
    pub joint_logprob: f64,
}

/// Opaque lattice instance.
pub struct DagInstance(Instance);

/// Opaque decoded hypothesis.
pub struct DagHypothesis(Hypothesis);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes replaced");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> DagStatus {
    match e {
        Error::Parse(_) => DagStatus::Parse,
        Error::Shape(_) | Error::PathShape(_) => DagStatus::Shape,
        Error::Invalid(_) => DagStatus::Validation,
        Error::Vocab { .. } | Error::Position { .. } => DagStatus::Vocab,
        Error::InfeasibleLength { .. } | Error::UnreachableTerminal => DagStatus::Infeasible,
        Error::DeadEnd(_) => DagStatus::DeadEnd,
        Error::CapExceeded { .. } | Error::Config(_) | Error::Precondition(_) | Error::Io(_) => {
            DagStatus::InvalidArgument
        }
    }
}

enum Failure {
    Null(&'static str),
    Arg(String),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

/// Runs `f`, mapping errors and panics onto status codes and the thread's
/// last-error message.
fn guard<F>(f: F) -> DagStatus
where
    F: FnOnce() -> Result<(), Failure>,
{
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            DagStatus::Ok
        }
        Ok(Err(Failure::Null(what))) => {
            set_last_error(format!("null pointer: {what}"));
            DagStatus::NullPointer
        }
        Ok(Err(Failure::Arg(msg))) => {
            set_last_error(msg);
            DagStatus::InvalidArgument
        }
        Ok(Err(Failure::Lib(e))) => {
            set_last_error(e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_last_error("internal panic".into());
            DagStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or(Failure::Null(what))
}

unsafe fn slice_of<'a, T>(p: *const T, len: usize, what: &'static str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    Ok(slice::from_raw_parts(p, len))
}

unsafe fn emit<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure::Null("out"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

/// Message for the last failed call on this thread, or NULL. The pointer
/// stays valid until the next call into this library from the same thread.
#[no_mangle]
pub extern "C" fn dag_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Parses a JSON instance document (NUL-terminated UTF-8).
///
/// # Safety
/// `json` must be a valid C string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dag_instance_from_json(
    json: *const c_char,
    validate: bool,
    out: *mut *mut DagInstance,
) -> DagStatus {
    guard(|| {
        if json.is_null() {
            return Err(Failure::Null("json"));
        }
        let text = CStr::from_ptr(json)
            .to_str()
            .map_err(|e| Failure::Lib(Error::Parse(e.to_string())))?;
        let instance = parse_instance(text, validate)?;
        emit(out, DagInstance(instance))
    })
}

/// Builds an instance from row-major tables: `length * length` transition
/// log-probabilities (source-major) and `length * vocab_size` emission
/// log-probabilities.
///
/// # Safety
/// The table pointers must reference arrays of the stated sizes.
#[no_mangle]
pub unsafe extern "C" fn dag_instance_from_tables(
    length: usize,
    vocab_size: usize,
    log_transitions: *const f64,
    log_emissions: *const f64,
    validate: bool,
    out: *mut *mut DagInstance,
) -> DagStatus {
    guard(|| {
        let n_trans = length
            .checked_mul(length)
            .ok_or_else(|| Failure::Arg("length overflows".into()))?;
        let n_emis = length
            .checked_mul(vocab_size)
            .ok_or_else(|| Failure::Arg("vocab_size overflows".into()))?;
        let trans = slice_of(log_transitions, n_trans, "log_transitions")?;
        let emis = slice_of(log_emissions, n_emis, "log_emissions")?;
        let rows = |flat: &[f64], width: usize| -> Vec<Vec<f64>> {
            if width == 0 {
                return vec![Vec::new(); length];
            }
            flat.chunks(width).map(<[f64]>::to_vec).collect()
        };
        let instance = Instance::new(length, vocab_size, rows(trans, length), rows(emis, vocab_size))?;
        if validate {
            instance.ensure_valid()?;
        }
        emit(out, DagInstance(instance))
    })
}

/// Generates a seeded synthetic instance with Dirichlet rows.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dag_instance_generate(
    length: usize,
    vocab_size: usize,
    seed: u64,
    transition_concentration: f64,
    emission_concentration: f64,
    sparsity: f64,
    out: *mut *mut DagInstance,
) -> DagStatus {
    guard(|| {
        let config = GeneratorConfig {
            length,
            vocab_size,
            seed,
            transition_concentration,
            emission_concentration,
            sparsity,
        };
        emit(out, DagInstance(generate_instance(&config)?))
    })
}

/// # Safety
/// `instance` must come from this library and not be freed twice. NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn dag_instance_free(instance: *mut DagInstance) {
    if !instance.is_null() {
        drop(Box::from_raw(instance));
    }
}

/// Lattice length, or 0 for NULL.
///
/// # Safety
/// `instance` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn dag_instance_length(instance: *const DagInstance) -> usize {
    instance.as_ref().map_or(0, |i| i.0.length())
}

/// Vocabulary size, or 0 for NULL.
///
/// # Safety
/// `instance` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn dag_instance_vocab_size(instance: *const DagInstance) -> usize {
    instance.as_ref().map_or(0, |i| i.0.vocab_size())
}

/// Number of invariant violations (0 for a valid instance).
///
/// # Safety
/// `instance` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dag_instance_violation_count(
    instance: *const DagInstance,
    out: *mut usize,
) -> DagStatus {
    guard(|| {
        let inst = deref(instance, "instance")?;
        if out.is_null() {
            return Err(Failure::Null("out"));
        }
        *out = inst.0.validate().len();
        Ok(())
    })
}

/// Decodes with the given strategy; `beta` is the length penalty for the
/// Viterbi family.
///
/// # Safety
/// `instance` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dag_decode(
    instance: *const DagInstance,
    strategy: DagStrategy,
    beta: f64,
    out: *mut *mut DagHypothesis,
) -> DagStatus {
    guard(|| {
        let inst = deref(instance, "instance")?;
        let decoded = Strategy::from(strategy).decode(&inst.0, beta)?;
        emit(out, DagHypothesis(decoded.hypothesis))
    })
}

/// # Safety
/// `hypothesis` must come from this library and not be freed twice. NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn dag_hypothesis_free(hypothesis: *mut DagHypothesis) {
    if !hypothesis.is_null() {
        drop(Box::from_raw(hypothesis));
    }
}

/// Number of positions (and tokens), or 0 for NULL.
///
/// # Safety
/// `hypothesis` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn dag_hypothesis_length(hypothesis: *const DagHypothesis) -> usize {
    hypothesis.as_ref().map_or(0, |h| h.0.len())
}

unsafe fn copy_out(src: &[usize], buf: *mut usize, cap: usize) -> usize {
    if !buf.is_null() {
        let n = src.len().min(cap);
        ptr::copy_nonoverlapping(src.as_ptr(), buf, n);
    }
    src.len()
}

/// Copies up to `cap` 1-based path positions into `buf` and returns the
/// full path length. Pass `buf = NULL` to query the length.
///
/// # Safety
/// `hypothesis` must be a live handle; `buf` must hold `cap` elements.
#[no_mangle]
pub unsafe extern "C" fn dag_hypothesis_path(
    hypothesis: *const DagHypothesis,
    buf: *mut usize,
    cap: usize,
) -> usize {
    hypothesis
        .as_ref()
        .map_or(0, |h| copy_out(h.0.path.positions(), buf, cap))
}

/// Copies up to `cap` token ids into `buf` and returns the token count.
///
/// # Safety
/// `hypothesis` must be a live handle; `buf` must hold `cap` elements.
#[no_mangle]
pub unsafe extern "C" fn dag_hypothesis_tokens(
    hypothesis: *const DagHypothesis,
    buf: *mut usize,
    cap: usize,
) -> usize {
    hypothesis
        .as_ref()
        .map_or(0, |h| copy_out(h.0.tokens.tokens(), buf, cap))
}

/// # Safety
/// `hypothesis` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dag_hypothesis_scores(
    hypothesis: *const DagHypothesis,
    out: *mut DagScores,
) -> DagStatus {
    guard(|| {
        let h = &deref(hypothesis, "hypothesis")?.0;
        let out = out.as_mut().ok_or(Failure::Null("out"))?;
        *out = DagScores {
            path_logprob: h.path_logprob,
            emission_logprob: h.emission_logprob,
            joint_logprob: h.joint_logprob,
        };
        Ok(())
    })
}

/// Scores `tokens` along `path` (both of length `len`).
///
/// # Safety
/// `path` and `tokens` must reference `len` elements each.
#[no_mangle]
pub unsafe extern "C" fn dag_score(
    instance: *const DagInstance,
    path: *const usize,
    tokens: *const usize,
    len: usize,
    out: *mut DagScores,
) -> DagStatus {
    guard(|| {
        let inst = &deref(instance, "instance")?.0;
        let positions = slice_of(path, len, "path")?.to_vec();
        let tokens = Translation(slice_of(tokens, len, "tokens")?.to_vec());
        let out = out.as_mut().ok_or(Failure::Null("out"))?;
        let path = DecodingPath::new(positions, inst.length())?;
        let h = Hypothesis::scored(inst, path, tokens)?;
        *out = DagScores {
            path_logprob: h.path_logprob,
            emission_logprob: h.emission_logprob,
            joint_logprob: h.joint_logprob,
        };
        Ok(())
    })
}

/// `log P(Y|X)` of `tokens`, summed over every path of matching length.
///
/// # Safety
/// `tokens` must reference `len` elements; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dag_marginal_log_prob(
    instance: *const DagInstance,
    tokens: *const usize,
    len: usize,
    out: *mut f64,
) -> DagStatus {
    guard(|| {
        let inst = &deref(instance, "instance")?.0;
        let tokens = Translation(slice_of(tokens, len, "tokens")?.to_vec());
        let out = out.as_mut().ok_or(Failure::Null("out"))?;
        *out = scoring::marginal_translation_log_prob(inst, &tokens)?;
        Ok(())
    })
}
