//! C ABI surface. Handles are opaque, results travel as JSON strings owned by
//! this library, and every fallible call returns an `NlqStatus` code with the
//! message retrievable from `nlq_last_error`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::ptr;

use nlqual::error::NlqualError;
use nlqual::kkt;
use nlqual::model::{parse_problem, NormKind, ProblemSpec};
use nlqual::penalty;
use nlqual::proxsolve::{self, SolverConfig};
use nlqual::qualify::{self, QualOptions};
use nlqual::rational::{parse_rat, Rat};
use nlqual::subdiff;

pub const NLQ_OK: i32 = 0;
pub const NLQ_ERR_ARGUMENT: i32 = 1;
pub const NLQ_ERR_PARSE: i32 = 2;
pub const NLQ_ERR_PRECONDITION: i32 = 3;
pub const NLQ_ERR_INTERNAL: i32 = 4;

pub struct NlqProblem {
    spec: ProblemSpec,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn code_for(err: &NlqualError) -> i32 {
    match err {
        NlqualError::Parse(_) | NlqualError::Schema(_) => NLQ_ERR_PARSE,
        NlqualError::Domain(_)
        | NlqualError::DimMismatch(_)
        | NlqualError::PhiInfinite(_)
        | NlqualError::HypothesisViolated(_) => NLQ_ERR_PRECONDITION,
        _ => NLQ_ERR_INTERNAL,
    }
}

fn fail(err: NlqualError) -> i32 {
    set_error(&err.to_string());
    code_for(&err)
}

/// # Safety
/// `s` must be a valid NUL-terminated string or null.
unsafe fn read_str<'a>(s: *const c_char) -> Result<&'a str, i32> {
    if s.is_null() {
        set_error("null string argument");
        return Err(NLQ_ERR_ARGUMENT);
    }
    CStr::from_ptr(s).to_str().map_err(|_| {
        set_error("string argument is not valid UTF-8");
        NLQ_ERR_ARGUMENT
    })
}

fn read_point(csv: &str, dim: usize) -> Result<Vec<Rat>, i32> {
    let coords: Vec<Rat> = csv
        .split(',')
        .map(|c| parse_rat(c.trim()))
        .collect::<Result<_, _>>()
        .map_err(|e: NlqualError| fail(e))?;
    if coords.len() != dim {
        set_error("point length does not match the problem dimension");
        return Err(NLQ_ERR_PRECONDITION);
    }
    Ok(coords)
}

/// # Safety
/// `out` must be a valid pointer to writable memory or null.
unsafe fn emit(out: *mut *mut c_char, json: serde_json::Value) -> i32 {
    if out.is_null() {
        set_error("null output pointer");
        return NLQ_ERR_ARGUMENT;
    }
    let text = serde_json::to_string(&json).unwrap_or_else(|_| "null".into());
    match CString::new(text) {
        Ok(c) => {
            *out = c.into_raw();
            NLQ_OK
        }
        Err(_) => {
            set_error("report contains an interior NUL byte");
            NLQ_ERR_INTERNAL
        }
    }
}

/// Returns the message for the last failing call on this thread. The pointer
/// stays valid until the next failing call.
#[no_mangle]
pub extern "C" fn nlq_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Frees a string returned through any `out_json` parameter.
///
/// # Safety
/// `s` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn nlq_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parses a problem document; on success writes an owned handle to `out`.
///
/// # Safety
/// `json` must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nlq_problem_parse(
    json: *const c_char,
    out: *mut *mut NlqProblem,
) -> i32 {
    if out.is_null() {
        set_error("null output pointer");
        return NLQ_ERR_ARGUMENT;
    }
    *out = ptr::null_mut();
    let src = match read_str(json) {
        Ok(s) => s,
        Err(c) => return c,
    };
    match parse_problem(src) {
        Ok(spec) => {
            *out = Box::into_raw(Box::new(NlqProblem { spec }));
            NLQ_OK
        }
        Err(e) => fail(e),
    }
}

/// # Safety
/// `h` must come from `nlq_problem_parse` and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn nlq_problem_free(h: *mut NlqProblem) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

/// # Safety
/// `h` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn nlq_problem_dim(h: *const NlqProblem) -> usize {
    h.as_ref().map(|p| p.spec.dim).unwrap_or(0)
}

unsafe fn with_problem<'a>(h: *const NlqProblem) -> Result<&'a ProblemSpec, i32> {
    match h.as_ref() {
        Some(p) => Ok(&p.spec),
        None => {
            set_error("null problem handle");
            Err(NLQ_ERR_ARGUMENT)
        }
    }
}

/// Subdifferential bundle of the composite term at `point_csv`.
///
/// # Safety
/// Pointer arguments follow the conventions above.
#[no_mangle]
pub unsafe extern "C" fn nlq_subdiff(
    h: *const NlqProblem,
    point_csv: *const c_char,
    out_json: *mut *mut c_char,
) -> i32 {
    let p = match with_problem(h) {
        Ok(p) => p,
        Err(c) => return c,
    };
    let csv = match read_str(point_csv) {
        Ok(s) => s,
        Err(c) => return c,
    };
    let x = match read_point(csv, p.dim) {
        Ok(x) => x,
        Err(c) => return c,
    };
    match subdiff::phi_bundle(p, &x) {
        Ok(b) => emit(out_json, b.to_json()),
        Err(e) => fail(e),
    }
}

/// Runs one qualification check. `condition` is one of: nnamcq, qn, rcpld,
/// dqn, bq, cond13, impl28, std-qn, std-rcpld.
///
/// # Safety
/// Pointer arguments follow the conventions above.
#[no_mangle]
pub unsafe extern "C" fn nlq_check(
    h: *const NlqProblem,
    point_csv: *const c_char,
    condition: *const c_char,
    seed: u64,
    out_json: *mut *mut c_char,
) -> i32 {
    let p = match with_problem(h) {
        Ok(p) => p,
        Err(c) => return c,
    };
    let csv = match read_str(point_csv) {
        Ok(s) => s,
        Err(c) => return c,
    };
    let cond = match read_str(condition) {
        Ok(s) => s,
        Err(c) => return c,
    };
    let x = match read_point(csv, p.dim) {
        Ok(x) => x,
        Err(c) => return c,
    };
    let opts = QualOptions {
        seed,
        ..QualOptions::default()
    };
    let rep = match cond.to_ascii_lowercase().as_str() {
        "nnamcq" => qualify::check_nnamcq(p, &x),
        "qn" => qualify::check_quasinormality_horizon(p, &x, &opts),
        "rcpld" => qualify::check_rcpld_horizon(p, &x, &opts),
        "dqn" => qualify::check_quasinormality_coderiv(p, &x, &opts),
        "bq" => qualify::check_bq(p, &x),
        "cond13" => qualify::check_cond13(p, &x),
        "impl28" => qualify::check_implication28(p, &x),
        "std-qn" => qualify::check_standard_quasinormality(p, &x, &opts),
        "std-rcpld" => qualify::check_standard_rcpld(p, &x, &opts),
        other => {
            set_error(&format!("unknown condition {other:?}"));
            return NLQ_ERR_ARGUMENT;
        }
    };
    match rep {
        Ok(r) => emit(out_json, serde_json::to_value(&r).unwrap_or_default()),
        Err(e) => fail(e),
    }
}

/// Searches for KKT multipliers at `point_csv`.
///
/// # Safety
/// Pointer arguments follow the conventions above.
#[no_mangle]
pub unsafe extern "C" fn nlq_kkt_find(
    h: *const NlqProblem,
    point_csv: *const c_char,
    out_json: *mut *mut c_char,
) -> i32 {
    let p = match with_problem(h) {
        Ok(p) => p,
        Err(c) => return c,
    };
    let csv = match read_str(point_csv) {
        Ok(s) => s,
        Err(c) => return c,
    };
    let x = match read_point(csv, p.dim) {
        Ok(x) => x,
        Err(c) => return c,
    };
    match kkt::find_kkt_multipliers(p, &x) {
        Ok(r) => emit(out_json, serde_json::to_value(&r).unwrap_or_default()),
        Err(e) => fail(e),
    }
}

/// Verifies supplied multipliers: `lambda_csv` for the inequalities, `mu_csv`
/// for the equalities (either may be an empty string).
///
/// # Safety
/// Pointer arguments follow the conventions above.
#[no_mangle]
pub unsafe extern "C" fn nlq_kkt_verify(
    h: *const NlqProblem,
    point_csv: *const c_char,
    lambda_csv: *const c_char,
    mu_csv: *const c_char,
    out_json: *mut *mut c_char,
) -> i32 {
    let p = match with_problem(h) {
        Ok(p) => p,
        Err(c) => return c,
    };
    let (csv, lcsv, mcsv) = match (read_str(point_csv), read_str(lambda_csv), read_str(mu_csv)) {
        (Ok(a), Ok(b), Ok(c)) => (a, b, c),
        (Err(c), _, _) | (_, Err(c), _) | (_, _, Err(c)) => return c,
    };
    let x = match read_point(csv, p.dim) {
        Ok(x) => x,
        Err(c) => return c,
    };
    let parse_vec = |s: &str, len: usize, what: &str| -> Result<Vec<Rat>, i32> {
        let v: Vec<Rat> = if s.trim().is_empty() {
            vec![]
        } else {
            s.split(',')
                .map(|c| parse_rat(c.trim()))
                .collect::<Result<_, _>>()
                .map_err(|e: NlqualError| fail(e))?
        };
        if v.len() != len {
            set_error(&format!("expected {len} {what} multipliers, got {}", v.len()));
            return Err(NLQ_ERR_PRECONDITION);
        }
        Ok(v)
    };
    let lambda = match parse_vec(lcsv, p.ineq.len(), "inequality") {
        Ok(v) => v,
        Err(c) => return c,
    };
    let mu = match parse_vec(mcsv, p.eq.len(), "equality") {
        Ok(v) => v,
        Err(c) => return c,
    };
    match kkt::verify_kkt(p, &x, &kkt::MultiplierVector { lambda, mu }) {
        Ok(r) => emit(out_json, serde_json::to_value(&r).unwrap_or_default()),
        Err(e) => fail(e),
    }
}

/// Doubles rho from 1 until local exactness validates around `point_csv`.
///
/// # Safety
/// Pointer arguments follow the conventions above.
#[no_mangle]
pub unsafe extern "C" fn nlq_find_rho0(
    h: *const NlqProblem,
    point_csv: *const c_char,
    radius: f64,
    samples: usize,
    seed: u64,
    rho_cap: f64,
    out_json: *mut *mut c_char,
) -> i32 {
    let p = match with_problem(h) {
        Ok(p) => p,
        Err(c) => return c,
    };
    let csv = match read_str(point_csv) {
        Ok(s) => s,
        Err(c) => return c,
    };
    let x = match read_point(csv, p.dim) {
        Ok(x) => x,
        Err(c) => return c,
    };
    match penalty::find_rho0(p, &x, radius, samples, seed, rho_cap) {
        Ok(r) => emit(out_json, serde_json::to_value(&r).unwrap_or_default()),
        Err(e) => fail(e),
    }
}

/// Minimizes the rho-penalized problem by proximal gradient. `norm` is one of
/// "l1", "l2", "linf"; `start_csv` may be null for an origin start.
///
/// # Safety
/// Pointer arguments follow the conventions above.
#[no_mangle]
pub unsafe extern "C" fn nlq_solve(
    h: *const NlqProblem,
    rho: f64,
    norm: *const c_char,
    start_csv: *const c_char,
    seed: u64,
    out_json: *mut *mut c_char,
) -> i32 {
    let p = match with_problem(h) {
        Ok(p) => p,
        Err(c) => return c,
    };
    let norm = match read_str(norm) {
        Ok(s) => s,
        Err(c) => return c,
    };
    let nk = match norm.to_ascii_lowercase().as_str() {
        "l1" => NormKind::L1,
        "l2" => NormKind::L2,
        "linf" => NormKind::Linf,
        other => {
            set_error(&format!("unknown norm {other:?}"));
            return NLQ_ERR_ARGUMENT;
        }
    };
    let x0: Vec<f64> = if start_csv.is_null() {
        vec![0.0; p.dim]
    } else {
        let csv = match read_str(start_csv) {
            Ok(s) => s,
            Err(c) => return c,
        };
        let parsed: Result<Vec<f64>, _> = csv.split(',').map(|c| c.trim().parse()).collect();
        match parsed {
            Ok(v) if v.len() == p.dim => v,
            Ok(_) => {
                set_error("start length does not match the problem dimension");
                return NLQ_ERR_PRECONDITION;
            }
            Err(_) => {
                set_error("start point is not a float csv");
                return NLQ_ERR_PARSE;
            }
        }
    };
    let pp = match penalty::build_penalty(p, rho, nk) {
        Ok(pp) => pp,
        Err(e) => return fail(e),
    };
    let cfg = SolverConfig {
        seed,
        ..SolverConfig::default()
    };
    match proxsolve::solve(&pp, &x0, &cfg) {
        Ok(r) => emit(out_json, serde_json::to_value(&r).unwrap_or_default()),
        Err(e) => fail(e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::ffi::CString;

    fn c(s: &str) -> CString {
        CString::new(s).unwrap()
    }

    const EXAMPLE1: &str = r#"{
        "dim": 4, "smooth": "0",
        "phi": [
            {"outer": {"kind": "pow_abs", "p": "1/2"},
             "inner": {"kind": "affine", "a": ["1","0","0","0"], "b": "0"}},
            {"outer": {"kind": "pow_abs", "p": "1/2"},
             "inner": {"kind": "affine", "a": ["0","1","0","0"], "b": "0"}},
            {"outer": {"kind": "pow_abs", "p": "1/2"},
             "inner": {"kind": "affine", "a": ["0","0","1","0"], "b": "0"}},
            {"outer": {"kind": "pow_abs", "p": "1/2"},
             "inner": {"kind": "affine", "a": ["0","0","0","1"], "b": "0"}}
        ],
        "ineq": [{"kind": "affine", "a": ["1","1","1","1"], "b": "-2", "sense": ">="}],
        "eq": [
            {"kind": "affine", "a": ["1","1","0","0"], "b": "-1"},
            {"kind": "affine", "a": ["0","0","1","1"], "b": "-1"}
        ],
        "omega": {"kind": "whole"}
    }"#;

    unsafe fn parse(src: &str) -> *mut NlqProblem {
        let mut h = std::ptr::null_mut();
        assert_eq!(nlq_problem_parse(c(src).as_ptr(), &mut h), NLQ_OK);
        assert!(!h.is_null());
        h
    }

    unsafe fn take(out: *mut c_char) -> serde_json::Value {
        let v = serde_json::from_str(CStr::from_ptr(out).to_str().unwrap()).unwrap();
        nlq_string_free(out);
        v
    }

    #[test]
    fn parse_check_and_free_round_trip() {
        unsafe {
            let h = parse(EXAMPLE1);
            assert_eq!(nlq_problem_dim(h), 4);
            let mut out = std::ptr::null_mut();
            let rc = nlq_check(h, c("1,0,1,0").as_ptr(), c("nnamcq").as_ptr(), 42, &mut out);
            assert_eq!(rc, NLQ_OK);
            let doc = take(out);
            assert_eq!(doc["verdict"], "CERTIFIED_FAILS");
            nlq_problem_free(h);
        }
    }

    #[test]
    fn kkt_find_and_verify_through_the_ffi() {
        unsafe {
            let h = parse(EXAMPLE1);
            let mut out = std::ptr::null_mut();
            assert_eq!(nlq_kkt_find(h, c("1,0,1,0").as_ptr(), &mut out), NLQ_OK);
            assert_eq!(take(out)["status"], "FOUND");
            let rc = nlq_kkt_verify(
                h,
                c("1,0,1,0").as_ptr(),
                c("0").as_ptr(),
                c("-1/2,-1/2").as_ptr(),
                &mut out,
            );
            assert_eq!(rc, NLQ_OK);
            assert_eq!(take(out)["status"], "VERIFIED");
            nlq_problem_free(h);
        }
    }

    #[test]
    fn error_paths_set_codes_and_messages() {
        unsafe {
            let mut h = std::ptr::null_mut();
            assert_eq!(nlq_problem_parse(c("{ bad").as_ptr(), &mut h), NLQ_ERR_PARSE);
            assert!(h.is_null());
            let msg = CStr::from_ptr(nlq_last_error()).to_str().unwrap();
            assert!(msg.contains("parse"), "message was {msg:?}");

            let h = parse(EXAMPLE1);
            let mut out = std::ptr::null_mut();
            let rc = nlq_kkt_find(h, c("9,9,9,9").as_ptr(), &mut out);
            assert_eq!(rc, NLQ_ERR_PRECONDITION);
            let rc = nlq_check(h, c("1,0,1,0").as_ptr(), c("nope").as_ptr(), 42, &mut out);
            assert_eq!(rc, NLQ_ERR_ARGUMENT);
            nlq_problem_free(h);
        }
    }

    #[test]
    fn solve_through_the_ffi_reaches_the_anchor() {
        unsafe {
            let h = parse(EXAMPLE1);
            let mut out = std::ptr::null_mut();
            let rc = nlq_solve(
                h,
                64.0,
                c("l1").as_ptr(),
                c("1.05,0.02,0.95,-0.02").as_ptr(),
                42,
                &mut out,
            );
            assert_eq!(rc, NLQ_OK);
            let doc = take(out);
            assert!(doc["objective"].as_f64().unwrap() <= 2.0 + 1e-6);
            nlq_problem_free(h);
        }
    }
}
