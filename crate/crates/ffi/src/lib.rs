//! C ABI over `gw-core`.
//!
//! Every function returns a [`GwStatus`]; results come back through out
//! pointers. On failure, [`gw_last_error_message`] describes the error for
//! the calling thread. Handles are created by `*_new`/`*_parse`/`*_simulate`
//! functions and released with the matching `*_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use gw_core::dp::{dp_posterior, DpPrior};
use gw_core::estimators::{
    agnostic_dirichlet_prior, heyde_p_supercritical_with, mle_mean, AgnosticVariant, DEFAULT_EPS,
};
use gw_core::gibbs::{chain_summary, run_chain, GibbsConfig, GibbsPrior, Imputation};
use gw_core::offspring::AGNOSTIC_POISSON_LAMBDA;
use gw_core::process::{simulate_complete, OffspringCounts};
use gw_core::{extinction_probability, GenerationSeries, GwError, HeydeVariant, OffspringDistribution, SeedSpec};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GwStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidDistribution = 3,
    InvalidData = 4,
    NoConvergence = 5,
    Infeasible = 6,
    RetriesExhausted = 7,
    PopulationExplosion = 8,
    BufferTooSmall = 9,
    Panic = 10,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GwHeydeVariant {
    AsPrinted = 0,
    Cumulative = 1,
    CumulativeParents = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GwGibbsPrior {
    /// Agnostic Dirichlet (variant A) over {0..k_trunc}.
    Dirichlet = 0,
    /// DP(a, base); a null base means the agnostic Poisson.
    Dp = 1,
}

/// Sampler settings for [`gw_gibbs_mean`]. Start from [`gw_gibbs_options_default`].
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct GwGibbsOptions {
    /// A `GwGibbsPrior` value.
    pub prior: i32,
    pub a: f64,
    pub k_trunc: usize,
    pub iterations: usize,
    pub burn_in: usize,
    pub max_tries: u64,
    /// Nonzero selects exact imputation instead of accept-reject.
    pub exact_imputation: i32,
    pub seed: u64,
    pub stream: u64,
}

/// Opaque offspring law.
pub struct GwOffspring(OffspringDistribution);

/// Opaque series of generation totals.
pub struct GwSeries(GenerationSeries);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &GwError) -> GwStatus {
    match err {
        GwError::InvalidDistribution(_) | GwError::DistributionSpec { .. } => GwStatus::InvalidDistribution,
        GwError::InvalidSeries(_)
        | GwError::InvalidCounts(_)
        | GwError::SupportMismatch { .. }
        | GwError::Input { .. } => GwStatus::InvalidData,
        GwError::NoConvergence { .. } => GwStatus::NoConvergence,
        GwError::Infeasible { .. } => GwStatus::Infeasible,
        GwError::RetriesExhausted { .. } => GwStatus::RetriesExhausted,
        GwError::PopulationExplosion { .. } => GwStatus::PopulationExplosion,
        _ => GwStatus::InvalidArgument,
    }
}

struct Failure(GwStatus, String);

impl From<GwError> for Failure {
    fn from(e: GwError) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn null(name: &str) -> Failure {
    Failure(GwStatus::NullPointer, format!("{name} is null"))
}

fn guard<F: FnOnce() -> Result<(), Failure>>(f: F) -> GwStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            GwStatus::Ok
        }
        Ok(Err(Failure(status, message))) => {
            set_error(message);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            GwStatus::Panic
        }
    }
}

unsafe fn borrow<'a, T>(p: *const T, name: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(name))
}

unsafe fn write_out<T>(p: *mut T, value: T, name: &str) -> Result<(), Failure> {
    if p.is_null() {
        return Err(null(name));
    }
    p.write(value);
    Ok(())
}

/// Message for the last failed call on this thread, or null. Valid until the
/// next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn gw_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Parse `poisson:<λ>`, `geometric:<p>`, `finite:<p0,...>`, `poisson:agnostic`
/// or `geometric:agnostic`.
///
/// # Safety
/// `spec` must be a nul-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gw_offspring_parse(spec: *const c_char, out: *mut *mut GwOffspring) -> GwStatus {
    guard(|| {
        if spec.is_null() {
            return Err(null("spec"));
        }
        let text = CStr::from_ptr(spec)
            .to_str()
            .map_err(|_| Failure(GwStatus::InvalidArgument, "spec is not UTF-8".into()))?;
        let dist: OffspringDistribution = text.parse()?;
        write_out(out, Box::into_raw(Box::new(GwOffspring(dist))), "out")
    })
}

/// Finite law from probabilities p_0..p_{len-1}.
///
/// # Safety
/// `probs` must point to `len` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gw_offspring_finite(probs: *const f64, len: usize, out: *mut *mut GwOffspring) -> GwStatus {
    guard(|| {
        if probs.is_null() {
            return Err(null("probs"));
        }
        let dist = OffspringDistribution::finite(std::slice::from_raw_parts(probs, len).to_vec())?;
        write_out(out, Box::into_raw(Box::new(GwOffspring(dist))), "out")
    })
}

/// # Safety
/// `h` must come from this library and not be freed twice. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn gw_offspring_free(h: *mut GwOffspring) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

/// # Safety
/// `h` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gw_offspring_pmf(h: *const GwOffspring, j: usize, out: *mut f64) -> GwStatus {
    guard(|| write_out(out, borrow(h, "offspring")?.0.pmf(j), "out"))
}

/// # Safety
/// `h` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gw_offspring_pgf(h: *const GwOffspring, s: f64, out: *mut f64) -> GwStatus {
    guard(|| {
        if !(0.0..=1.0).contains(&s) {
            return Err(Failure(GwStatus::InvalidArgument, format!("pgf argument {s} outside [0, 1]")));
        }
        write_out(out, borrow(h, "offspring")?.0.pgf(s), "out")
    })
}

/// # Safety
/// `h` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gw_offspring_mean(h: *const GwOffspring, out: *mut f64) -> GwStatus {
    guard(|| write_out(out, borrow(h, "offspring")?.0.mean(), "out"))
}

/// Smallest root of G(q) = q. `residual` may be null.
///
/// # Safety
/// `h` must be a live handle; `q` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gw_extinction_probability(
    h: *const GwOffspring,
    tol: f64,
    q: *mut f64,
    residual: *mut f64,
) -> GwStatus {
    guard(|| {
        let res = extinction_probability(&borrow(h, "offspring")?.0, tol)?;
        write_out(q, res.q, "q")?;
        if !residual.is_null() {
            residual.write(res.residual);
        }
        Ok(())
    })
}

/// Series from generation totals z_0..z_{len-1}.
///
/// # Safety
/// `z` must point to `len` values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gw_series_new(z: *const u64, len: usize, out: *mut *mut GwSeries) -> GwStatus {
    guard(|| {
        if z.is_null() {
            return Err(null("z"));
        }
        let series = GenerationSeries::new(std::slice::from_raw_parts(z, len).to_vec())?;
        write_out(out, Box::into_raw(Box::new(GwSeries(series))), "out")
    })
}

/// Simulate `generations` parent generations from `z0` ancestors.
///
/// # Safety
/// `h` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gw_simulate_series(
    h: *const GwOffspring,
    z0: u64,
    generations: usize,
    seed: u64,
    stream: u64,
    out: *mut *mut GwSeries,
) -> GwStatus {
    guard(|| {
        let counts = simulate_complete(&borrow(h, "offspring")?.0, z0, generations, SeedSpec::new(seed, stream))?;
        write_out(out, Box::into_raw(Box::new(GwSeries(counts.collapse()?))), "out")
    })
}

/// # Safety
/// `h` must come from this library and not be freed twice. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn gw_series_free(h: *mut GwSeries) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

/// Copy the totals into `buf`. `len` receives the series length even when
/// `cap` is too small (status BUFFER_TOO_SMALL); `buf` may then be null.
///
/// # Safety
/// `h` must be a live handle; `buf` must hold `cap` values; `len` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gw_series_get(h: *const GwSeries, buf: *mut u64, cap: usize, len: *mut usize) -> GwStatus {
    guard(|| {
        let z = borrow(h, "series")?.0.sizes();
        write_out(len, z.len(), "len")?;
        if cap < z.len() || buf.is_null() {
            return Err(Failure(GwStatus::BufferTooSmall, format!("need room for {} values", z.len())));
        }
        ptr::copy_nonoverlapping(z.as_ptr(), buf, z.len());
        Ok(())
    })
}

/// # Safety
/// `h` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gw_mle_mean(h: *const GwSeries, out: *mut f64) -> GwStatus {
    guard(|| write_out(out, mle_mean(&borrow(h, "series")?.0)?, "out"))
}

/// Heyde's chi-square approximation to P(m > 1); `variant` is a `GwHeydeVariant`.
///
/// # Safety
/// `h` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gw_heyde_p_supercritical(h: *const GwSeries, variant: i32, out: *mut f64) -> GwStatus {
    guard(|| {
        let v = match variant {
            x if x == GwHeydeVariant::AsPrinted as i32 => HeydeVariant::AsPrinted,
            x if x == GwHeydeVariant::Cumulative as i32 => HeydeVariant::Cumulative,
            x if x == GwHeydeVariant::CumulativeParents as i32 => HeydeVariant::CumulativeParents,
            x => return Err(Failure(GwStatus::InvalidArgument, format!("unknown Heyde variant {x}"))),
        };
        write_out(out, heyde_p_supercritical_with(&borrow(h, "series")?.0, v)?, "out")
    })
}

/// Posterior mean of m under DP(a, base) given pooled offspring counts:
/// `counts[j]` parents had exactly j children.
///
/// # Safety
/// `base` must be a live handle; `counts` must point to `len` values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gw_dp_posterior_mean_m(
    base: *const GwOffspring,
    a: f64,
    counts: *const u64,
    len: usize,
    out: *mut f64,
) -> GwStatus {
    guard(|| {
        let base = borrow(base, "base")?.0.clone();
        if counts.is_null() && len > 0 {
            return Err(null("counts"));
        }
        let row = if len == 0 { Vec::new() } else { std::slice::from_raw_parts(counts, len).to_vec() };
        let counts = if row.iter().all(|&c| c == 0) {
            OffspringCounts::empty(len.saturating_sub(1))
        } else {
            OffspringCounts::new(vec![row])?
        };
        let post = dp_posterior(&DpPrior::new(a, base)?, &counts);
        write_out(out, post.posterior_mean_m(), "out")
    })
}

/// Defaults: DP prior with a = 1, k_trunc 10, 2000 iterations, 500 burn-in,
/// 10^6 tries, accept-reject imputation, seed 0.
#[no_mangle]
pub extern "C" fn gw_gibbs_options_default() -> GwGibbsOptions {
    GwGibbsOptions {
        prior: GwGibbsPrior::Dp as i32,
        a: 1.0,
        k_trunc: gw_core::gibbs::DEFAULT_K_TRUNC,
        iterations: gw_core::gibbs::DEFAULT_ITERATIONS,
        burn_in: gw_core::gibbs::DEFAULT_BURN_IN,
        max_tries: gw_core::gibbs::DEFAULT_MAX_TRIES,
        exact_imputation: 0,
        seed: 0,
        stream: 0,
    }
}

/// Blocked Gibbs sampler on totals; writes the chain mean and variance of m.
/// `base` is used by the DP prior and may be null. `m_var` may be null.
///
/// # Safety
/// `series` must be a live handle; `options` must be valid; `m_hat` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gw_gibbs_mean(
    series: *const GwSeries,
    options: *const GwGibbsOptions,
    base: *const GwOffspring,
    m_hat: *mut f64,
    m_var: *mut f64,
) -> GwStatus {
    guard(|| {
        let series = &borrow(series, "series")?.0;
        let opts = *borrow(options, "options")?;
        let prior = match opts.prior {
            x if x == GwGibbsPrior::Dirichlet as i32 => {
                GibbsPrior::Dirichlet(agnostic_dirichlet_prior(opts.k_trunc, AgnosticVariant::A, DEFAULT_EPS)?)
            }
            x if x == GwGibbsPrior::Dp as i32 => {
                let base_law = match base.as_ref() {
                    Some(b) => b.0.clone(),
                    None => OffspringDistribution::poisson(AGNOSTIC_POISSON_LAMBDA)?,
                };
                GibbsPrior::Dp(DpPrior::new(opts.a, base_law)?)
            }
            x => return Err(Failure(GwStatus::InvalidArgument, format!("unknown Gibbs prior {x}"))),
        };
        let config = GibbsConfig {
            iterations: opts.iterations,
            burn_in: opts.burn_in,
            k_trunc: opts.k_trunc,
            max_tries: opts.max_tries,
            prior,
            imputation: if opts.exact_imputation != 0 { Imputation::Exact } else { Imputation::AcceptReject },
            keep_pi: false,
        };
        let summary = chain_summary(&run_chain(series, &config, SeedSpec::new(opts.seed, opts.stream))?)?;
        write_out(m_hat, summary.m_hat, "m_hat")?;
        if !m_var.is_null() {
            m_var.write(summary.m_var);
        }
        Ok(())
    })
}
