//! C ABI over `seqdetect`.
//!
//! Every fallible function returns an [`SdStatus`] and writes its result
//! through an out-pointer. On failure a message is kept per thread and can be
//! read with [`sd_last_error`]. Handles are created by `*_new`/`*_fit` and
//! must be released with the matching `*_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use seqdetect::data::{AlarmTrack, LabelTrack, SegmentSet, TimeSeries};
use seqdetect::detector::{
    ball_volume_constant, calibrate_threshold, compute_omega0, far_bound, fit_knn, lambert_w,
    Branch, CusumDetector, KnnCalibration, KnnOptions,
};
use seqdetect::metrics::{
    adjusted_prf, average_detection_delay, instance_prf, sequence_alarm_precision, PrfResult,
};
use seqdetect::randomguess::expected_adjusted_pr;
use seqdetect::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SdStatus {
    Ok = 0,
    Validation = 1,
    Io = 2,
    NullPointer = 3,
    Domain = 4,
    Degenerate = 5,
    Undefined = 6,
    Panic = 7,
}

/// Precision, recall and F1 with the underlying counts.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SdPrf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub tp: f64,
    pub fp: f64,
    pub fn_: f64,
}

impl From<PrfResult> for SdPrf {
    fn from(r: PrfResult) -> Self {
        Self {
            precision: r.precision,
            recall: r.recall,
            f1: r.f1,
            tp: r.tp as f64,
            fp: r.fp as f64,
            fn_: r.fn_ as f64,
        }
    }
}

/// Fitted kNN calibration.
pub struct SdCalibration(KnnCalibration);

/// Streaming CUSUM detector.
pub struct SdCusum(CusumDetector);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> SdStatus {
    match err {
        Error::Io { .. } => SdStatus::Io,
        Error::Domain(_) => SdStatus::Domain,
        Error::DegenerateCalibration(_) => SdStatus::Degenerate,
        Error::UndefinedMetric(_) | Error::EmptyCurve => SdStatus::Undefined,
        _ => SdStatus::Validation,
    }
}

enum Failure {
    Null(&'static str),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> SdStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SdStatus::Ok,
        Ok(Err(Failure::Null(name))) => {
            set_error(format!("null pointer passed as {name}"));
            SdStatus::NullPointer
        }
        Ok(Err(Failure::Lib(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_error("internal panic".into());
            SdStatus::Panic
        }
    }
}

unsafe fn out<'a, T>(p: *mut T, name: &'static str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or(Failure::Null(name))
}

unsafe fn input<'a, T>(p: *const T, len: usize, name: &'static str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Failure::Null(name));
    }
    Ok(slice::from_raw_parts(p, len))
}

unsafe fn labels(p: *const u8, len: usize, name: &'static str) -> Result<LabelTrack, Failure> {
    Ok(LabelTrack::from_binary(input(p, len, name)?)?)
}

/// Message of the last failure on this thread, or null. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn sd_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Lambert W. `branch` is 0 for the principal branch and -1 for the lower one.
///
/// # Safety
/// `out_w` must be null or point to writable memory for one `double`.
#[no_mangle]
pub unsafe extern "C" fn sd_lambert_w(x: f64, branch: i32, out_w: *mut f64) -> SdStatus {
    guard(|| {
        let b = match branch {
            0 => Branch::Principal,
            -1 => Branch::MinusOne,
            other => return Err(Error::Validation(format!("unknown branch {other}")).into()),
        };
        *out(out_w, "out_w")? = lambert_w(x, b)?;
        Ok(())
    })
}

/// Volume of the unit ball in `m` dimensions.
///
/// # Safety
/// `out_v` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn sd_ball_volume(m: usize, out_v: *mut f64) -> SdStatus {
    guard(|| {
        *out(out_v, "out_v")? = ball_volume_constant(m)?;
        Ok(())
    })
}

/// # Safety
/// `out_omega0` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn sd_compute_omega0(
    m: usize,
    d_alpha: f64,
    phi: f64,
    out_omega0: *mut f64,
) -> SdStatus {
    guard(|| {
        *out(out_omega0, "out_omega0")? = compute_omega0(m, d_alpha, phi)?;
        Ok(())
    })
}

/// # Safety
/// `out_h` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn sd_calibrate_threshold(
    far_target: f64,
    omega0: f64,
    out_h: *mut f64,
) -> SdStatus {
    guard(|| {
        *out(out_h, "out_h")? = calibrate_threshold(far_target, omega0)?;
        Ok(())
    })
}

/// Upper bound `e^{-omega0 h}` on the false-alarm rate.
#[no_mangle]
pub extern "C" fn sd_far_bound(h: f64, omega0: f64) -> f64 {
    far_bound(h, omega0)
}

/// Fits a kNN calibration on `rows x dims` row-major nominal features.
///
/// # Safety
/// `data` must hold `rows * dims` doubles; `out_handle` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sd_calibration_fit(
    data: *const f64,
    rows: usize,
    dims: usize,
    k: usize,
    alpha: f64,
    split_ratio: f64,
    seed: u64,
    out_handle: *mut *mut SdCalibration,
) -> SdStatus {
    guard(|| {
        let slot = out(out_handle, "out_handle")?;
        *slot = ptr::null_mut();
        let n = rows
            .checked_mul(dims)
            .ok_or_else(|| Error::Validation("rows * dims overflows".into()))?;
        let values = input(data, n, "data")?.to_vec();
        let series = TimeSeries::from_flat(rows, dims, values)?;
        let opts = KnnOptions {
            k,
            alpha,
            ..Default::default()
        };
        let calib = fit_knn(&series, split_ratio, opts, seed)?;
        *slot = Box::into_raw(Box::new(SdCalibration(calib)));
        Ok(())
    })
}

/// # Safety
/// `handle` must come from `sd_calibration_fit` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn sd_calibration_free(handle: *mut SdCalibration) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}

/// # Safety
/// `handle` must be live; outputs must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn sd_calibration_params(
    handle: *const SdCalibration,
    out_d_alpha: *mut f64,
    out_phi: *mut f64,
    out_dims: *mut usize,
) -> SdStatus {
    guard(|| {
        let c = &handle.as_ref().ok_or(Failure::Null("handle"))?.0;
        *out(out_d_alpha, "out_d_alpha")? = c.d_alpha;
        *out(out_phi, "out_phi")? = c.phi;
        *out(out_dims, "out_dims")? = c.dims();
        Ok(())
    })
}

/// Evidence `d^m - d_alpha^m` for one feature vector of length `dims`.
///
/// # Safety
/// `handle` must be live, `x` must hold `dims` doubles, `out_d` writable.
#[no_mangle]
pub unsafe extern "C" fn sd_calibration_evidence(
    handle: *const SdCalibration,
    x: *const f64,
    dims: usize,
    out_d: *mut f64,
) -> SdStatus {
    guard(|| {
        let c = &handle.as_ref().ok_or(Failure::Null("handle"))?.0;
        *out(out_d, "out_d")? = c.evidence(input(x, dims, "x")?)?;
        Ok(())
    })
}

/// # Safety
/// `handle` must be live and `out_omega0` writable.
#[no_mangle]
pub unsafe extern "C" fn sd_calibration_omega0(
    handle: *const SdCalibration,
    out_omega0: *mut f64,
) -> SdStatus {
    guard(|| {
        let c = &handle.as_ref().ok_or(Failure::Null("handle"))?.0;
        *out(out_omega0, "out_omega0")? = compute_omega0(c.dims(), c.d_alpha, c.phi)?;
        Ok(())
    })
}

/// # Safety
/// `out_handle` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sd_cusum_new(threshold: f64, out_handle: *mut *mut SdCusum) -> SdStatus {
    guard(|| {
        let slot = out(out_handle, "out_handle")?;
        *slot = ptr::null_mut();
        if !(threshold.is_finite() && threshold > 0.0) {
            return Err(Error::Validation(format!("threshold {threshold} must be positive")).into());
        }
        *slot = Box::into_raw(Box::new(SdCusum(CusumDetector::new(threshold))));
        Ok(())
    })
}

/// Feeds one evidence value; `out_alarm` is set to 1 when an alarm fires.
///
/// # Safety
/// `handle` must be live and `out_alarm` writable.
#[no_mangle]
pub unsafe extern "C" fn sd_cusum_push(handle: *mut SdCusum, d: f64, out_alarm: *mut u8) -> SdStatus {
    guard(|| {
        let det = &mut handle.as_mut().ok_or(Failure::Null("handle"))?.0;
        *out(out_alarm, "out_alarm")? = det.push(d) as u8;
        Ok(())
    })
}

/// # Safety
/// `handle` must be live and `out_s` writable.
#[no_mangle]
pub unsafe extern "C" fn sd_cusum_statistic(handle: *const SdCusum, out_s: *mut f64) -> SdStatus {
    guard(|| {
        let det = &handle.as_ref().ok_or(Failure::Null("handle"))?.0;
        *out(out_s, "out_s")? = det.state().s;
        Ok(())
    })
}

/// # Safety
/// `handle` must come from `sd_cusum_new` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn sd_cusum_free(handle: *mut SdCusum) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}

/// Average detection delay of strictly increasing alarm times against 0/1
/// labels of length `len`.
///
/// # Safety
/// Arrays must hold the stated number of elements; `out_add` writable.
#[no_mangle]
pub unsafe extern "C" fn sd_average_detection_delay(
    alarms: *const usize,
    n_alarms: usize,
    labels_ptr: *const u8,
    len: usize,
    delta_max: usize,
    out_add: *mut f64,
) -> SdStatus {
    guard(|| {
        let alarms = AlarmTrack::new(input(alarms, n_alarms, "alarms")?.to_vec())?;
        let segs = SegmentSet::from_labels(&labels(labels_ptr, len, "labels")?);
        *out(out_add, "out_add")? = average_detection_delay(&alarms, &segs, delta_max)?;
        Ok(())
    })
}

/// # Safety
/// Arrays must hold the stated number of elements; `out_precision` writable.
#[no_mangle]
pub unsafe extern "C" fn sd_sequence_alarm_precision(
    alarms: *const usize,
    n_alarms: usize,
    labels_ptr: *const u8,
    len: usize,
    delta_max: usize,
    out_precision: *mut f64,
) -> SdStatus {
    guard(|| {
        let alarms = AlarmTrack::new(input(alarms, n_alarms, "alarms")?.to_vec())?;
        let segs = SegmentSet::from_labels(&labels(labels_ptr, len, "labels")?);
        *out(out_precision, "out_precision")? =
            sequence_alarm_precision(&alarms, &segs, delta_max)?;
        Ok(())
    })
}

/// Point-adjusted scores of 0/1 predictions.
///
/// # Safety
/// Both arrays must hold `len` bytes; `out_prf` writable.
#[no_mangle]
pub unsafe extern "C" fn sd_adjusted_prf(
    pred: *const u8,
    truth: *const u8,
    len: usize,
    out_prf: *mut SdPrf,
) -> SdStatus {
    guard(|| {
        let r = adjusted_prf(&labels(pred, len, "pred")?, &labels(truth, len, "truth")?)?;
        *out(out_prf, "out_prf")? = r.into();
        Ok(())
    })
}

/// Plain instance-level scores of 0/1 predictions.
///
/// # Safety
/// Both arrays must hold `len` bytes; `out_prf` writable.
#[no_mangle]
pub unsafe extern "C" fn sd_instance_prf(
    pred: *const u8,
    truth: *const u8,
    len: usize,
    out_prf: *mut SdPrf,
) -> SdStatus {
    guard(|| {
        let r = instance_prf(&labels(pred, len, "pred")?, &labels(truth, len, "truth")?)?;
        *out(out_prf, "out_prf")? = r.into();
        Ok(())
    })
}

/// Expected point-adjusted scores of Random Guess; the count fields hold
/// expectations.
///
/// # Safety
/// `lengths` must hold `n_segments` values; `out_prf` writable.
#[no_mangle]
pub unsafe extern "C" fn sd_expected_adjusted_pr(
    p: f64,
    lengths: *const usize,
    n_segments: usize,
    n_nominal: usize,
    out_prf: *mut SdPrf,
) -> SdStatus {
    guard(|| {
        let r = expected_adjusted_pr(p, input(lengths, n_segments, "lengths")?, n_nominal)?;
        *out(out_prf, "out_prf")? = SdPrf {
            precision: r.precision,
            recall: r.recall,
            f1: r.f1,
            tp: r.expected_tp,
            fp: r.expected_fp,
            fn_: r.expected_fn,
        };
        Ok(())
    })
}
