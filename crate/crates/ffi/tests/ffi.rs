use std::ffi::{CStr, CString};
use std::ptr;

use maxconv_ffi::*;

fn last_error() -> String {
    let p = maxconv_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn lens_area_and_errors() {
    let mut a = 0.0;
    assert_eq!(
        unsafe { maxconv_lens_area(1.0, 1.0, 1.0, &mut a) },
        MaxconvStatus::Ok
    );
    assert!((a - 1.228370).abs() < 1e-6);
    assert!(maxconv_last_error().is_null());
    assert_eq!(
        unsafe { maxconv_lens_area(-1.0, 1.0, 1.0, &mut a) },
        MaxconvStatus::InvalidInput
    );
    assert!(!last_error().is_empty());
    assert_eq!(
        unsafe { maxconv_lens_area(1.0, 1.0, 1.0, ptr::null_mut()) },
        MaxconvStatus::NullPointer
    );
    assert!(last_error().contains("out"));
    let v = unsafe { CStr::from_ptr(maxconv_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn model_round_trip_and_copula() {
    let mut m = ptr::null_mut();
    assert_eq!(
        unsafe { maxconv_model_disk(0.1, 0.4, 1.0, &mut m) },
        MaxconvStatus::Ok
    );
    let mut fam = MaxconvFamily::M1;
    assert_eq!(
        unsafe { maxconv_model_family(m, &mut fam) },
        MaxconvStatus::Ok
    );
    assert_eq!(fam, MaxconvFamily::M3);
    let mut js = ptr::null_mut();
    assert_eq!(
        unsafe { maxconv_model_to_json(m, &mut js) },
        MaxconvStatus::Ok
    );
    let text = unsafe { CStr::from_ptr(js) }.to_owned();
    unsafe { maxconv_string_free(js) };
    let mut m2 = ptr::null_mut();
    assert_eq!(
        unsafe { maxconv_model_from_json(text.as_ptr(), &mut m2) },
        MaxconvStatus::Ok
    );
    let (mut c1, mut c2, mut d) = (0.0, 0.0, 0.0);
    unsafe {
        assert_eq!(
            maxconv_copula_cdf(m, 0.2, 0.3, 0.7, &mut c1),
            MaxconvStatus::Ok
        );
        assert_eq!(
            maxconv_copula_cdf(m2, 0.2, 0.3, 0.7, &mut c2),
            MaxconvStatus::Ok
        );
        assert_eq!(
            maxconv_copula_pdf(m, 0.2, 0.3, 0.7, &mut d),
            MaxconvStatus::Ok
        );
    }
    assert_eq!(c1, c2);
    assert!(c1 > 0.3 * 0.7 && c1 < 0.3);
    assert!(d > 0.0);
    let mut t = [0.0; 3];
    assert_eq!(
        unsafe { maxconv_tail_summary(m, 0.9, t.as_mut_ptr()) },
        MaxconvStatus::Ok
    );
    assert_eq!(t, [0.0, 0.0, 2.0]);
    let bad = CString::new("{\"family\":\"M9\"}").unwrap();
    let mut m3 = ptr::null_mut();
    assert_eq!(
        unsafe { maxconv_model_from_json(bad.as_ptr(), &mut m3) },
        MaxconvStatus::InvalidInput
    );
    assert!(m3.is_null());
    unsafe {
        maxconv_model_free(m);
        maxconv_model_free(m2);
        maxconv_model_free(ptr::null_mut());
    }
}

#[test]
fn simulate_and_fit() {
    let xy: Vec<f64> = (0..8)
        .flat_map(|i| [0.1 * i as f64, 0.05 * (i % 3) as f64])
        .collect();
    let mut s = ptr::null_mut();
    assert_eq!(
        unsafe { maxconv_sites_new(xy.as_ptr(), 8, MaxconvMetric::Euclidean, &mut s) },
        MaxconvStatus::Ok
    );
    assert_eq!(unsafe { maxconv_sites_len(s) }, 8);
    let mut m = ptr::null_mut();
    assert_eq!(
        unsafe { maxconv_model_disk(0.0, 0.4, 0.25, &mut m) },
        MaxconvStatus::Ok
    );
    let n = 200;
    let mut a = vec![0.0; n * 8];
    let mut b = vec![0.0; n * 8];
    unsafe {
        assert_eq!(
            maxconv_simulate(m, s, n, 7, a.as_mut_ptr(), a.len()),
            MaxconvStatus::Ok
        );
        assert_eq!(
            maxconv_simulate(m, s, n, 7, b.as_mut_ptr(), b.len()),
            MaxconvStatus::Ok
        );
        assert_eq!(
            maxconv_simulate(m, s, n, 7, b.as_mut_ptr(), 3),
            MaxconvStatus::InvalidInput
        );
    }
    assert_eq!(a, b);
    assert!(a.iter().all(|v| *v > 0.0));
    let mut fit = ptr::null_mut();
    let st = unsafe { maxconv_fit(a.as_ptr(), n, s, MaxconvFamily::M3, 0.5, 1.0, 3, &mut fit) };
    assert_eq!(st, MaxconvStatus::Ok);
    let mut obj = 0.0;
    assert_eq!(
        unsafe { maxconv_fit_objective(fit, &mut obj) },
        MaxconvStatus::Ok
    );
    assert!(obj.is_finite() && obj > 0.0);
    let mut fm = ptr::null_mut();
    assert_eq!(
        unsafe { maxconv_fit_model(fit, &mut fm) },
        MaxconvStatus::Ok
    );
    let mut js = ptr::null_mut();
    assert_eq!(
        unsafe { maxconv_fit_to_json(fit, &mut js) },
        MaxconvStatus::Ok
    );
    let text = unsafe { CStr::from_ptr(js) }.to_str().unwrap().to_owned();
    assert!(text.contains("\"r_upper\""));
    let mut none = ptr::null_mut();
    let st = unsafe { maxconv_fit(a.as_ptr(), n, s, MaxconvFamily::M3, 1e-4, 1.0, 3, &mut none) };
    assert_eq!(st, MaxconvStatus::InvalidInput);
    assert!(last_error().contains("pair"));
    unsafe {
        maxconv_string_free(js);
        maxconv_model_free(fm);
        maxconv_fit_free(fit);
        maxconv_model_free(m);
        maxconv_sites_free(s);
    }
}

#[test]
fn header_declares_every_export() {
    let h = include_str!("../include/maxconv.h");
    for name in [
        "maxconv_last_error",
        "maxconv_version",
        "maxconv_lens_area",
        "maxconv_sites_new",
        "maxconv_sites_free",
        "maxconv_model_from_json",
        "maxconv_model_disk",
        "maxconv_model_to_json",
        "maxconv_model_free",
        "maxconv_copula_cdf",
        "maxconv_copula_pdf",
        "maxconv_tail_summary",
        "maxconv_simulate",
        "maxconv_fit",
        "maxconv_fit_to_json",
        "maxconv_fit_free",
        "maxconv_string_free",
    ] {
        assert!(
            h.contains(&format!("{name}(")),
            "{name} missing from header"
        );
    }
    assert!(h.contains("typedef struct MaxconvModel MaxconvModel;"));
}
