//! C ABI for `comp-outage`.
//!
//! Conventions:
//! * every fallible function returns a [`CompStatus`]; results go through
//!   out-pointers that are only written on success,
//! * links and set selections are opaque heap handles released with their
//!   `*_free` function,
//! * the message of the last failure on the calling thread is available from
//!   [`comp_last_error_message`].
//!
//! The header `include/comp_outage.h` is generated by cbindgen at build time.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use comp_outage::analytic::{self, Conditioning, LinkProfile, OutageModel, PowerSet};
use comp_outage::optimize::{self, Criterion, OptimizerSettings, SearchBounds, SetSelection};
use comp_outage::Error;

/// Status code returned by every fallible function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CompStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DegeneratePowers = 3,
    IllConditioned = 4,
    NoSolution = 5,
    ZeroObjective = 6,
    Panic = 7,
}

/// Selection criterion for [`comp_select_best_set`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CompCriterion {
    Goodput = 0,
    FixedOutage = 1,
}

/// Numerical-conditioning policy; obtain defaults from
/// [`comp_conditioning_default`].
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct CompConditioning {
    pub min_relative_gap: f64,
    pub perturb: bool,
    pub cancellation_limit: f64,
    pub allow_fallback: bool,
    pub fallback_samples: usize,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct CompConditioningReport {
    pub min_relative_gap: f64,
    pub perturbed: bool,
    pub fell_back_to_oracle: bool,
    pub cancellation_ratio: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct CompRateOptimum {
    pub gamma_star: f64,
    pub rate_star: f64,
    pub goodput: f64,
    pub outage_at_optimum: f64,
    pub saturated: bool,
    pub fell_back_to_oracle: bool,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct CompFixedOutage {
    pub gamma_o: f64,
    pub capacity: f64,
    pub outage_at_gamma_o: f64,
    pub fell_back_to_oracle: bool,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct CompCandidateScore {
    pub size: usize,
    pub goodput: f64,
    pub spectral_efficiency: f64,
    pub gamma: f64,
    pub outage: f64,
    pub saturated: bool,
    pub fell_back_to_oracle: bool,
}

/// Opaque link: serving powers, interferer powers and noise.
pub struct CompLink {
    link: LinkProfile,
}

/// Opaque result of [`comp_select_best_set`].
pub struct CompSetSelection {
    selection: SetSelection,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> CompStatus {
    match e {
        Error::DegeneratePowers { .. } => CompStatus::DegeneratePowers,
        Error::IllConditioned { .. } => CompStatus::IllConditioned,
        Error::NoSolution { .. } => CompStatus::NoSolution,
        Error::ZeroObjective { .. } => CompStatus::ZeroObjective,
        _ => CompStatus::InvalidArgument,
    }
}

/// Runs `f`, converting errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), CompStatus>) -> CompStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CompStatus::Ok,
        Ok(Err(status)) => status,
        Err(_) => {
            set_last_error("internal panic".into());
            CompStatus::Panic
        }
    }
}

fn fail(e: Error) -> CompStatus {
    let status = status_of(&e);
    set_last_error(e.to_string());
    status
}

fn null(what: &str) -> CompStatus {
    set_last_error(format!("{what} is null"));
    CompStatus::NullPointer
}

/// # Safety
/// `data` must point to `len` readable doubles, or be null when `len == 0`.
unsafe fn slice<'a>(data: *const f64, len: usize, what: &str) -> Result<&'a [f64], CompStatus> {
    if len == 0 {
        Ok(&[])
    } else if data.is_null() {
        Err(null(what))
    } else {
        Ok(std::slice::from_raw_parts(data, len))
    }
}

fn conditioning_from(c: *const CompConditioning) -> Conditioning {
    if c.is_null() {
        return Conditioning::default();
    }
    // SAFETY: non-null pointers must reference a valid struct per the API contract.
    let c = unsafe { &*c };
    Conditioning {
        min_relative_gap: c.min_relative_gap,
        perturb: c.perturb,
        cancellation_limit: c.cancellation_limit,
        allow_fallback: c.allow_fallback,
        fallback_samples: c.fallback_samples,
    }
}

fn report_to_c(r: &analytic::ConditioningReport) -> CompConditioningReport {
    CompConditioningReport {
        min_relative_gap: r.min_relative_gap,
        perturbed: r.perturbed,
        fell_back_to_oracle: r.fell_back_to_oracle,
        cancellation_ratio: r.cancellation_ratio,
    }
}

/// Default conditioning policy.
#[no_mangle]
pub extern "C" fn comp_conditioning_default() -> CompConditioning {
    let c = Conditioning::default();
    CompConditioning {
        min_relative_gap: c.min_relative_gap,
        perturb: c.perturb,
        cancellation_limit: c.cancellation_limit,
        allow_fallback: c.allow_fallback,
        fallback_samples: c.fallback_samples,
    }
}

/// Message of the last failure on this thread, or null. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn comp_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| match &*e.borrow() {
        Some(c) => c.as_ptr(),
        None => ptr::null(),
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn comp_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Creates a link handle.
///
/// # Safety
/// `serving` and `interferers` must point to `n_serving` and
/// `n_interferers` doubles (either may be null when its length is 0).
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn comp_link_new(
    serving: *const f64,
    n_serving: usize,
    interferers: *const f64,
    n_interferers: usize,
    noise_power: f64,
    out: *mut *mut CompLink,
) -> CompStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let s = slice(serving, n_serving, "serving")?;
        let i = slice(interferers, n_interferers, "interferers")?;
        let link = LinkProfile::from_slices(s, i, noise_power).map_err(fail)?;
        *out = Box::into_raw(Box::new(CompLink { link }));
        Ok(())
    })
}

/// Releases a link handle; null is ignored.
///
/// # Safety
/// `link` must come from [`comp_link_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn comp_link_free(link: *mut CompLink) {
    if !link.is_null() {
        drop(Box::from_raw(link));
    }
}

/// Outage probability `P(SINR <= gamma)` of a link.
///
/// # Safety
/// `link` and `out_probability` must be valid; `conditioning` and
/// `out_report` may be null (defaults / not reported).
#[no_mangle]
pub unsafe extern "C" fn comp_outage_probability(
    link: *const CompLink,
    gamma: f64,
    conditioning: *const CompConditioning,
    out_probability: *mut f64,
    out_report: *mut CompConditioningReport,
) -> CompStatus {
    guard(|| {
        let link = link.as_ref().ok_or_else(|| null("link"))?;
        if out_probability.is_null() {
            return Err(null("out_probability"));
        }
        let cond = conditioning_from(conditioning);
        let est = OutageModel::new(&link.link, &cond)
            .and_then(|m| m.evaluate(gamma))
            .map_err(fail)?;
        *out_probability = est.probability;
        if !out_report.is_null() {
            *out_report = report_to_c(&est.report);
        }
        Ok(())
    })
}

/// Outage of a single-server link by direct evaluation.
///
/// # Safety
/// `interferers` must point to `n_interferers` doubles; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn comp_siso_outage(
    serving_power: f64,
    interferers: *const f64,
    n_interferers: usize,
    noise_power: f64,
    gamma: f64,
    out: *mut f64,
) -> CompStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let i = PowerSet::new(slice(interferers, n_interferers, "interferers")?.to_vec())
            .map_err(fail)?;
        *out = analytic::siso_outage(serving_power, &i, noise_power, gamma).map_err(fail)?;
        Ok(())
    })
}

/// `P(sum_n H_n > x)` for independent exponentials with the given means.
///
/// # Safety
/// `powers` must point to `n` doubles; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn comp_gen_chi2_ccdf(
    powers: *const f64,
    n: usize,
    x: f64,
    out: *mut f64,
) -> CompStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let p = PowerSet::new(slice(powers, n, "powers")?.to_vec()).map_err(fail)?;
        *out = analytic::gen_chi2_ccdf(&p, x).map_err(fail)?;
        Ok(())
    })
}

/// Density of `sum_n H_n` at `x`.
///
/// # Safety
/// `powers` must point to `n` doubles; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn comp_gen_chi2_pdf(
    powers: *const f64,
    n: usize,
    x: f64,
    out: *mut f64,
) -> CompStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let p = PowerSet::new(slice(powers, n, "powers")?.to_vec()).map_err(fail)?;
        *out = analytic::gen_chi2_pdf(&p, x).map_err(fail)?;
        Ok(())
    })
}

/// Goodput-maximising threshold over `[gamma_lo, gamma_hi]` with the default
/// grid and refinement.
///
/// # Safety
/// `link` and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn comp_maximize_goodput(
    link: *const CompLink,
    gamma_lo: f64,
    gamma_hi: f64,
    out: *mut CompRateOptimum,
) -> CompStatus {
    guard(|| {
        let link = link.as_ref().ok_or_else(|| null("link"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let bounds = SearchBounds {
            gamma_lo,
            gamma_hi,
            ..SearchBounds::default()
        };
        let opt = optimize::maximize_goodput(&link.link, &bounds, &Conditioning::default())
            .map_err(fail)?;
        *out = CompRateOptimum {
            gamma_star: opt.gamma_star,
            rate_star: opt.rate_star,
            goodput: opt.goodput,
            outage_at_optimum: opt.outage_at_optimum,
            saturated: opt.saturated,
            fell_back_to_oracle: opt.fell_back_to_oracle,
        };
        Ok(())
    })
}

/// Threshold reaching outage `target` and the matching capacity with outage.
///
/// # Safety
/// `link` and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn comp_capacity_at_fixed_outage(
    link: *const CompLink,
    target: f64,
    gamma_cap: f64,
    out: *mut CompFixedOutage,
) -> CompStatus {
    guard(|| {
        let link = link.as_ref().ok_or_else(|| null("link"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let fo = optimize::capacity_at_fixed_outage(
            &link.link,
            target,
            gamma_cap,
            &Conditioning::default(),
        )
        .map_err(fail)?;
        *out = CompFixedOutage {
            gamma_o: fo.gamma_o,
            capacity: fo.capacity,
            outage_at_gamma_o: fo.outage_at_gamma_o,
            fell_back_to_oracle: fo.fell_back_to_oracle,
        };
        Ok(())
    })
}

/// Best nested cooperating set among the `K` strongest of `powers_desc`
/// (sorted descending), `K = 1..=n_max`. Station ids are array indices.
/// `target` is used only with [`CompCriterion::FixedOutage`].
///
/// # Safety
/// `powers_desc` must point to `n` doubles; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn comp_select_best_set(
    powers_desc: *const f64,
    n: usize,
    noise_power: f64,
    n_max: usize,
    criterion: CompCriterion,
    target: f64,
    out: *mut *mut CompSetSelection,
) -> CompStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let powers = slice(powers_desc, n, "powers_desc")?;
        let candidates: Vec<(u32, f64)> = powers
            .iter()
            .enumerate()
            .map(|(i, &p)| (i as u32, p))
            .collect();
        let criterion = match criterion {
            CompCriterion::Goodput => Criterion::Goodput,
            CompCriterion::FixedOutage => Criterion::FixedOutage(target),
        };
        let selection = optimize::select_best_set(
            &candidates,
            noise_power,
            n_max,
            criterion,
            &OptimizerSettings::default(),
        )
        .map_err(fail)?;
        *out = Box::into_raw(Box::new(CompSetSelection { selection }));
        Ok(())
    })
}

/// Size `N*` of the chosen set; 0 for a null handle.
///
/// # Safety
/// `sel` must be null or come from [`comp_select_best_set`].
#[no_mangle]
pub unsafe extern "C" fn comp_selection_size(sel: *const CompSetSelection) -> usize {
    sel.as_ref().map_or(0, |s| s.selection.set_size)
}

/// Per-BS spectral efficiency of the chosen set; NaN for a null handle.
///
/// # Safety
/// `sel` must be null or come from [`comp_select_best_set`].
#[no_mangle]
pub unsafe extern "C" fn comp_selection_spectral_efficiency(sel: *const CompSetSelection) -> f64 {
    sel.as_ref()
        .map_or(f64::NAN, |s| s.selection.per_bs_spectral_efficiency)
}

/// Number of evaluated candidates (set sizes `1..=count`).
///
/// # Safety
/// `sel` must be null or come from [`comp_select_best_set`].
#[no_mangle]
pub unsafe extern "C" fn comp_selection_candidate_count(sel: *const CompSetSelection) -> usize {
    sel.as_ref()
        .map_or(0, |s| s.selection.per_candidate_scores.len())
}

/// Score of the candidate with `size` stations.
///
/// # Safety
/// `sel` and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn comp_selection_candidate(
    sel: *const CompSetSelection,
    size: usize,
    out: *mut CompCandidateScore,
) -> CompStatus {
    guard(|| {
        let sel = sel.as_ref().ok_or_else(|| null("selection"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let scores = &sel.selection.per_candidate_scores;
        let c = size
            .checked_sub(1)
            .and_then(|i| scores.get(i))
            .ok_or_else(|| {
                set_last_error(format!("no candidate of size {size}"));
                CompStatus::InvalidArgument
            })?;
        *out = CompCandidateScore {
            size: c.size,
            goodput: c.goodput,
            spectral_efficiency: c.spectral_efficiency,
            gamma: c.gamma,
            outage: c.outage,
            saturated: c.saturated,
            fell_back_to_oracle: c.fell_back_to_oracle,
        };
        Ok(())
    })
}

/// Releases a selection handle; null is ignored.
///
/// # Safety
/// `sel` must come from [`comp_select_best_set`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn comp_selection_free(sel: *mut CompSetSelection) {
    if !sel.is_null() {
        drop(Box::from_raw(sel));
    }
}
