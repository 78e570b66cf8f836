//! C ABI over the tubeflow library: opaque chart and metric handles,
//! status-code errors, and a thread-local error string.
//!
//! Conventions: every fallible call returns a `TfStatus`; out parameters are
//! written only on `TF_STATUS_OK`; `tf_last_error` describes the most recent
//! failure on the calling thread. Handles are freed with the matching
//! `*_free` call and must not be used afterwards.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use tubeflow::chart::ChartMetric;
use tubeflow::flow::{integrate, unit_speed_seed};
use tubeflow::metric2d::InducedMetric2D;
use tubeflow::section::ellipse_tube_metric;
use tubeflow::spaceform::{circular_tube_metric, ScalarFn, SpaceFormTag};
use tubeflow::TubeError;

/// Result of a C API call.
#[repr(C)]
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum TfStatus {
    /// Success.
    TfStatusOk = 0,
    /// Invalid configuration or arguments (bad parameters, parse errors).
    TfStatusConfigError = 2,
    /// Numerical failure (degenerate metric, step failure, domain exit).
    TfStatusNumericError = 3,
    /// A required pointer argument was null.
    TfStatusNullArgument = 4,
    /// Internal panic; the handle state is still valid but the call did
    /// nothing.
    TfStatusPanic = 5,
}

/// A three-manifold chart with its metric (opaque).
pub struct TfChart {
    inner: ChartMetric,
}

/// An induced tube metric on the (s, psi) cylinder (opaque).
pub struct TfMetric {
    inner: InducedMetric2D,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let sanitized: Vec<u8> = msg.bytes().map(|b| if b == 0 { b' ' } else { b }).collect();
    LAST_ERROR.with(|e| {
        *e.borrow_mut() = CString::new(sanitized).unwrap_or_default();
    });
}

fn status_of(err: &TubeError) -> TfStatus {
    set_error(&err.to_string());
    match err.exit_code() {
        2 => TfStatus::TfStatusConfigError,
        _ => TfStatus::TfStatusNumericError,
    }
}

fn guarded(f: impl FnOnce() -> TfStatus) -> TfStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => {
            set_error("internal panic");
            TfStatus::TfStatusPanic
        }
    }
}

fn null_arg(name: &str) -> TfStatus {
    set_error(&format!("null argument: {name}"));
    TfStatus::TfStatusNullArgument
}

unsafe fn c_str<'a>(ptr: *const c_char, name: &str) -> Result<&'a str, TfStatus> {
    if ptr.is_null() {
        return Err(null_arg(name));
    }
    CStr::from_ptr(ptr).to_str().map_err(|_| {
        set_error(&format!("argument {name} is not valid UTF-8"));
        TfStatus::TfStatusConfigError
    })
}

/// Most recent error message on this thread, or an empty string. The
/// pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn tf_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

// ----- charts -----

fn chart_out(chart: ChartMetric, out: *mut *mut TfChart) -> TfStatus {
    unsafe {
        *out = Box::into_raw(Box::new(TfChart { inner: chart }));
    }
    TfStatus::TfStatusOk
}

/// Euclidean 3-space in Cartesian coordinates.
#[no_mangle]
pub extern "C" fn tf_chart_euclidean3(out: *mut *mut TfChart) -> TfStatus {
    guarded(|| {
        if out.is_null() {
            return null_arg("out");
        }
        chart_out(ChartMetric::euclidean3(), out)
    })
}

/// Unit 3-sphere in Hopf coordinates (eta, theta, phi).
#[no_mangle]
pub extern "C" fn tf_chart_sphere3_hopf(out: *mut *mut TfChart) -> TfStatus {
    guarded(|| {
        if out.is_null() {
            return null_arg("out");
        }
        chart_out(ChartMetric::sphere3_hopf(), out)
    })
}

/// Hyperbolic 3-space in upper half-space coordinates (x, y, z > 0).
#[no_mangle]
pub extern "C" fn tf_chart_hyperbolic3_halfspace(out: *mut *mut TfChart) -> TfStatus {
    guarded(|| {
        if out.is_null() {
            return null_arg("out");
        }
        chart_out(ChartMetric::hyperbolic3_halfspace(), out)
    })
}

/// Degenerate 3-ellipsoid with axis pairs (a, a, b, b) in Hopf-style
/// coordinates.
#[no_mangle]
pub extern "C" fn tf_chart_ellipsoid3(a: f64, b: f64, out: *mut *mut TfChart) -> TfStatus {
    guarded(|| {
        if out.is_null() {
            return null_arg("out");
        }
        match ChartMetric::ellipsoid3(a, b) {
            Ok(chart) => chart_out(chart, out),
            Err(e) => status_of(&e),
        }
    })
}

/// Chart from metric component expressions in three named coordinates.
/// `g12`, `g13`, `g23` may be null (zero); the diagonal is required.
/// Christoffel symbols are finite-differenced.
///
/// # Safety
/// String arguments must be null-terminated and outlive the call.
#[no_mangle]
pub unsafe extern "C" fn tf_chart_user(
    c1: *const c_char,
    c2: *const c_char,
    c3: *const c_char,
    g11: *const c_char,
    g12: *const c_char,
    g13: *const c_char,
    g22: *const c_char,
    g23: *const c_char,
    g33: *const c_char,
    out: *mut *mut TfChart,
) -> TfStatus {
    guarded(|| {
        if out.is_null() {
            return null_arg("out");
        }
        let names = match (c_str(c1, "c1"), c_str(c2, "c2"), c_str(c3, "c3")) {
            (Ok(a), Ok(b), Ok(c)) => [a, b, c],
            (Err(s), _, _) | (_, Err(s), _) | (_, _, Err(s)) => return s,
        };
        let mut entries: Vec<(usize, usize, &str)> = Vec::new();
        for (i, j, ptr, name) in [
            (0usize, 0usize, g11, "g11"),
            (0, 1, g12, "g12"),
            (0, 2, g13, "g13"),
            (1, 1, g22, "g22"),
            (1, 2, g23, "g23"),
            (2, 2, g33, "g33"),
        ] {
            let required = i == j;
            if ptr.is_null() {
                if required {
                    return null_arg(name);
                }
                continue;
            }
            match c_str(ptr, name) {
                Ok(text) => entries.push((i, j, text)),
                Err(s) => return s,
            }
        }
        match ChartMetric::from_expressions(names, &entries) {
            Ok(chart) => chart_out(chart, out),
            Err(e) => status_of(&e),
        }
    })
}

/// Release a chart handle. Null is a no-op.
///
/// # Safety
/// `chart` must be null or a handle from a `tf_chart_*` constructor that
/// has not already been freed.
#[no_mangle]
pub unsafe extern "C" fn tf_chart_free(chart: *mut TfChart) {
    if !chart.is_null() {
        drop(Box::from_raw(chart));
    }
}

/// Metric tensor at a chart point, written to `g_out` in row-major order
/// (9 doubles).
///
/// # Safety
/// `x` must point to 3 readable doubles and `g_out` to 9 writable doubles.
#[no_mangle]
pub unsafe extern "C" fn tf_chart_metric(
    chart: *const TfChart,
    x: *const f64,
    g_out: *mut f64,
) -> TfStatus {
    guarded(|| {
        if chart.is_null() {
            return null_arg("chart");
        }
        if x.is_null() {
            return null_arg("x");
        }
        if g_out.is_null() {
            return null_arg("g_out");
        }
        let point = [*x, *x.add(1), *x.add(2)];
        match (*chart).inner.metric_at(&point) {
            Ok(m) => {
                for i in 0..3 {
                    for j in 0..3 {
                        *g_out.add(3 * i + j) = m.g[(i, j)];
                    }
                }
                TfStatus::TfStatusOk
            }
            Err(e) => status_of(&e),
        }
    })
}

/// Christoffel symbols at a chart point, written to `gamma_out` as 27
/// doubles indexed `gamma_out[9 i + 3 j + k]` for Gamma^i_jk.
///
/// # Safety
/// `x` must point to 3 readable doubles and `gamma_out` to 27 writable
/// doubles.
#[no_mangle]
pub unsafe extern "C" fn tf_chart_christoffel(
    chart: *const TfChart,
    x: *const f64,
    gamma_out: *mut f64,
) -> TfStatus {
    guarded(|| {
        if chart.is_null() {
            return null_arg("chart");
        }
        if x.is_null() {
            return null_arg("x");
        }
        if gamma_out.is_null() {
            return null_arg("gamma_out");
        }
        let point = [*x, *x.add(1), *x.add(2)];
        match (*chart).inner.christoffel_at(&point) {
            Ok(g) => {
                for i in 0..3 {
                    for j in 0..3 {
                        for k in 0..3 {
                            *gamma_out.add(9 * i + 3 * j + k) = g[i][j][k];
                        }
                    }
                }
                TfStatus::TfStatusOk
            }
            Err(e) => status_of(&e),
        }
    })
}

/// Sectional curvature of the plane spanned by `u`, `v` at `x`.
///
/// # Safety
/// `x`, `u`, `v` must each point to 3 readable doubles; `k_out` must be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn tf_chart_sectional_curvature(
    chart: *const TfChart,
    x: *const f64,
    u: *const f64,
    v: *const f64,
    k_out: *mut f64,
) -> TfStatus {
    guarded(|| {
        if chart.is_null() {
            return null_arg("chart");
        }
        if x.is_null() || u.is_null() || v.is_null() {
            return null_arg("x/u/v");
        }
        if k_out.is_null() {
            return null_arg("k_out");
        }
        let point = [*x, *x.add(1), *x.add(2)];
        let uu = [*u, *u.add(1), *u.add(2)];
        let vv = [*v, *v.add(1), *v.add(2)];
        match (*chart).inner.sectional_curvature(&point, &uu, &vv) {
            Ok(k) => {
                *k_out = k;
                TfStatus::TfStatusOk
            }
            Err(e) => status_of(&e),
        }
    })
}

// ----- induced tube metrics -----

fn metric_out(metric: InducedMetric2D, out: *mut *mut TfMetric) -> TfStatus {
    unsafe {
        *out = Box::into_raw(Box::new(TfMetric { inner: metric }));
    }
    TfStatus::TfStatusOk
}

/// Induced metric of the circular tube of radius `rho0` about the ellipse
/// with semi-axes (`a_semi`, `b_semi`) in Euclidean 3-space.
#[no_mangle]
pub extern "C" fn tf_metric_ellipse_tube(
    a_semi: f64,
    b_semi: f64,
    rho0: f64,
    out: *mut *mut TfMetric,
) -> TfStatus {
    guarded(|| {
        if out.is_null() {
            return null_arg("out");
        }
        match ellipse_tube_metric(a_semi, b_semi, rho0) {
            Ok(m) => metric_out(m, out),
            Err(e) => status_of(&e),
        }
    })
}

/// Induced metric of the circular tube of radius `rho0` about a curve with
/// constant curvature scalars `k1`, `k2` in the space form of curvature
/// `k0` (-1, 0, or 1), with the given period in arc length.
#[no_mangle]
pub extern "C" fn tf_metric_circular_tube(
    k0: i32,
    k1: f64,
    k2: f64,
    rho0: f64,
    s_period: f64,
    out: *mut *mut TfMetric,
) -> TfStatus {
    guarded(|| {
        if out.is_null() {
            return null_arg("out");
        }
        let tag = match SpaceFormTag::new(k0) {
            Ok(t) => t,
            Err(e) => return status_of(&e),
        };
        if !(s_period > 0.0) {
            set_error(&format!("s_period must be positive, got {s_period}"));
            return TfStatus::TfStatusConfigError;
        }
        match circular_tube_metric(
            tag,
            ScalarFn::constant(k1),
            ScalarFn::constant(k2),
            rho0,
            s_period,
        ) {
            Ok(m) => metric_out(m, out),
            Err(e) => status_of(&e),
        }
    })
}

/// Load a sampled metric from a CSV grid previously written by the
/// library (columns s, psi, E, F, G with '#' headers).
///
/// # Safety
/// `path` must be a null-terminated string.
#[no_mangle]
pub unsafe extern "C" fn tf_metric_from_csv(
    path: *const c_char,
    out: *mut *mut TfMetric,
) -> TfStatus {
    guarded(|| {
        if out.is_null() {
            return null_arg("out");
        }
        let path = match c_str(path, "path") {
            Ok(p) => p,
            Err(s) => return s,
        };
        match InducedMetric2D::from_csv(std::path::Path::new(path)) {
            Ok(m) => metric_out(m, out),
            Err(e) => status_of(&e),
        }
    })
}

/// Release a metric handle. Null is a no-op.
///
/// # Safety
/// `metric` must be null or a handle from a `tf_metric_*` constructor that
/// has not already been freed.
#[no_mangle]
pub unsafe extern "C" fn tf_metric_free(metric: *mut TfMetric) {
    if !metric.is_null() {
        drop(Box::from_raw(metric));
    }
}

/// Arc-length period of the metric's s coordinate. NaN on a null handle.
///
/// # Safety
/// `metric` must be null or a live handle from a `tf_metric_*` constructor.
#[no_mangle]
pub unsafe extern "C" fn tf_metric_s_period(metric: *const TfMetric) -> f64 {
    if metric.is_null() {
        return f64::NAN;
    }
    (*metric).inner.s_period
}

/// First fundamental form coefficients at (s, psi), written as
/// `efg_out = [E, F, G]`.
///
/// # Safety
/// `efg_out` must point to 3 writable doubles.
#[no_mangle]
pub unsafe extern "C" fn tf_metric_coeffs(
    metric: *const TfMetric,
    s: f64,
    psi: f64,
    efg_out: *mut f64,
) -> TfStatus {
    guarded(|| {
        if metric.is_null() {
            return null_arg("metric");
        }
        if efg_out.is_null() {
            return null_arg("efg_out");
        }
        let (e, f, g) = (*metric).inner.coeffs(s, psi);
        *efg_out.add(0) = e;
        *efg_out.add(1) = f;
        *efg_out.add(2) = g;
        TfStatus::TfStatusOk
    })
}

/// Integrate the unit-speed geodesic from (s0, psi0) at the given launch
/// angle for the given arc length. On success writes the final phase-space
/// state `state_out = [tau, s, psi, p_s, p_psi]` and the largest observed
/// drifts of the Hamiltonian and of p_s.
///
/// # Safety
/// `state_out` must point to 5 writable doubles; drift pointers to one
/// writable double each (either may be null to skip).
#[no_mangle]
pub unsafe extern "C" fn tf_geodesic_integrate(
    metric: *const TfMetric,
    s0: f64,
    psi0: f64,
    angle: f64,
    length: f64,
    tol: f64,
    state_out: *mut f64,
    h_drift_out: *mut f64,
    ps_drift_out: *mut f64,
) -> TfStatus {
    guarded(|| {
        if metric.is_null() {
            return null_arg("metric");
        }
        if state_out.is_null() {
            return null_arg("state_out");
        }
        let m = &(*metric).inner;
        let seed = match unit_speed_seed(m, [s0, psi0], angle) {
            Ok(s) => s,
            Err(e) => return status_of(&e),
        };
        match integrate(m, &seed, length, tol) {
            Ok(traj) => {
                let last = traj.last();
                *state_out.add(0) = last.tau;
                *state_out.add(1) = last.q[0];
                *state_out.add(2) = last.q[1];
                *state_out.add(3) = last.p[0];
                *state_out.add(4) = last.p[1];
                if !h_drift_out.is_null() {
                    *h_drift_out = traj.max_h_drift;
                }
                if !ps_drift_out.is_null() {
                    *ps_drift_out = traj.max_ps_drift;
                }
                TfStatus::TfStatusOk
            }
            Err(e) => status_of(&e),
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::ffi::CString;
    use std::ptr;

    fn last_error_string() -> String {
        unsafe { CStr::from_ptr(tf_last_error()).to_string_lossy().into_owned() }
    }

    #[test]
    fn torus_metric_coefficients_match_the_closed_form() {
        let mut metric: *mut TfMetric = ptr::null_mut();
        let status = tf_metric_ellipse_tube(2.0, 2.0, 1.0, &mut metric);
        assert_eq!(status, TfStatus::TfStatusOk);
        let mut efg = [0.0f64; 3];
        let status = unsafe { tf_metric_coeffs(metric, 0.3, 1.1, efg.as_mut_ptr()) };
        assert_eq!(status, TfStatus::TfStatusOk);
        let want_e = (1.0 - 0.5 * 1.1f64.cos()).powi(2);
        assert!((efg[0] - want_e).abs() < 1e-9, "E = {}", efg[0]);
        assert!(efg[1].abs() < 1e-9 && (efg[2] - 1.0).abs() < 1e-9);
        tf_metric_free(metric);
    }

    #[test]
    fn degenerate_tube_reports_numeric_error() {
        let mut metric: *mut TfMetric = ptr::null_mut();
        let status = tf_metric_ellipse_tube(2.0, 2.0, 2.0, &mut metric);
        assert_eq!(status, TfStatus::TfStatusNumericError);
        assert!(last_error_string().contains("degenerate"));
        assert!(metric.is_null());
    }

    #[test]
    fn sphere_chart_reports_unit_curvature() {
        let mut chart: *mut TfChart = ptr::null_mut();
        assert_eq!(tf_chart_sphere3_hopf(&mut chart), TfStatus::TfStatusOk);
        let x = [0.7, 0.2, -0.4];
        let u = [1.0, 0.3, 0.0];
        let v = [0.0, 1.0, 0.8];
        let mut k = 0.0;
        let status = unsafe {
            tf_chart_sectional_curvature(chart, x.as_ptr(), u.as_ptr(), v.as_ptr(), &mut k)
        };
        assert_eq!(status, TfStatus::TfStatusOk);
        assert!((k - 1.0).abs() < 1e-9, "K = {k}");
        tf_chart_free(chart);
    }

    #[test]
    fn user_chart_matches_builtin_sphere_metric() {
        let c = |s: &str| CString::new(s).unwrap();
        let (c1, c2, c3) = (c("eta"), c("theta"), c("phi"));
        let (g11, g22, g33) = (c("1"), c("sin(eta)^2"), c("cos(eta)^2"));
        let mut chart: *mut TfChart = ptr::null_mut();
        let status = unsafe {
            tf_chart_user(
                c1.as_ptr(),
                c2.as_ptr(),
                c3.as_ptr(),
                g11.as_ptr(),
                ptr::null(),
                ptr::null(),
                g22.as_ptr(),
                ptr::null(),
                g33.as_ptr(),
                &mut chart,
            )
        };
        assert_eq!(status, TfStatus::TfStatusOk);
        let x = [0.6, 1.0, 2.0];
        let mut g = [0.0f64; 9];
        let status = unsafe { tf_chart_metric(chart, x.as_ptr(), g.as_mut_ptr()) };
        assert_eq!(status, TfStatus::TfStatusOk);
        assert!((g[0] - 1.0).abs() < 1e-12);
        assert!((g[4] - 0.6f64.sin().powi(2)).abs() < 1e-12);
        assert!((g[8] - 0.6f64.cos().powi(2)).abs() < 1e-12);
        tf_chart_free(chart);
    }

    #[test]
    fn null_arguments_are_rejected_not_crashed() {
        assert_eq!(tf_chart_euclidean3(ptr::null_mut()), TfStatus::TfStatusNullArgument);
        let mut efg = [0.0f64; 3];
        let status = unsafe { tf_metric_coeffs(ptr::null(), 0.0, 0.0, efg.as_mut_ptr()) };
        assert_eq!(status, TfStatus::TfStatusNullArgument);
        assert!(last_error_string().contains("null argument"));
        tf_chart_free(ptr::null_mut());
        tf_metric_free(ptr::null_mut());
    }

    #[test]
    fn geodesic_run_conserves_energy_on_the_torus_tube() {
        let mut metric: *mut TfMetric = ptr::null_mut();
        let status =
            tf_metric_circular_tube(0, 0.5, 0.0, 1.0, 4.0 * std::f64::consts::PI, &mut metric);
        assert_eq!(status, TfStatus::TfStatusOk);
        let mut state = [0.0f64; 5];
        let (mut dh, mut dps) = (0.0f64, 0.0f64);
        let status = unsafe {
            tf_geodesic_integrate(
                metric,
                0.0,
                1.2,
                0.4,
                50.0,
                1e-11,
                state.as_mut_ptr(),
                &mut dh,
                &mut dps,
            )
        };
        assert_eq!(status, TfStatus::TfStatusOk);
        assert!((state[0] - 50.0).abs() < 1e-9, "tau = {}", state[0]);
        assert!(dh < 1e-9 && dps < 1e-9, "drifts {dh}, {dps}");
        tf_metric_free(metric);
    }

    #[test]
    fn metric_csv_round_trip_through_the_c_surface() {
        let dir = std::env::temp_dir().join("tubeflow_ffi_csv_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("metric.csv");
        let mut metric: *mut TfMetric = ptr::null_mut();
        assert_eq!(tf_metric_ellipse_tube(2.0, 2.5, 1.0, &mut metric), TfStatus::TfStatusOk);
        unsafe { (*metric).inner.to_csv(&path, 48, 48).unwrap() };
        let c_path = CString::new(path.to_str().unwrap()).unwrap();
        let mut replayed: *mut TfMetric = ptr::null_mut();
        let status = unsafe { tf_metric_from_csv(c_path.as_ptr(), &mut replayed) };
        assert_eq!(status, TfStatus::TfStatusOk);
        let mut a = [0.0f64; 3];
        let mut b = [0.0f64; 3];
        unsafe {
            tf_metric_coeffs(metric, 1.0, 0.7, a.as_mut_ptr());
            tf_metric_coeffs(replayed, 1.0, 0.7, b.as_mut_ptr());
        }
        for i in 0..3 {
            assert!((a[i] - b[i]).abs() < 1e-4, "coefficient {i}: {} vs {}", a[i], b[i]);
        }
        tf_metric_free(metric);
        tf_metric_free(replayed);
        let _ = std::fs::remove_dir_all(&dir);
    }
}
