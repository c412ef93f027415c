use std::ffi::{c_char, CString};
use std::ptr;

use colearn_ffi::*;

fn last_error() -> String {
    let len = unsafe { colearn_last_error_message(ptr::null_mut(), 0) };
    let mut buf = vec![0 as c_char; len + 1];
    unsafe { colearn_last_error_message(buf.as_mut_ptr(), buf.len()) };
    let bytes: Vec<u8> = buf[..len].iter().map(|&c| c as u8).collect();
    String::from_utf8(bytes).unwrap()
}

fn hemimetric(n: usize, r: f64) -> *mut ColearnHemimetric {
    let mut h = ptr::null_mut();
    assert_eq!(unsafe { colearn_hemimetric_new(n, r, &mut h) }, ColearnStatus::Ok);
    h
}

#[test]
fn projection_solves_three_item_instance() {
    let h = hemimetric(3, 9.0);
    let len = unsafe { colearn_hemimetric_len(h) };
    assert_eq!(len, 6);
    let idx = |i, j| {
        let mut z = 0;
        assert_eq!(unsafe { colearn_hemimetric_pair_index(h, i, j, &mut z) }, ColearnStatus::Ok);
        z
    };
    let mut d = vec![1.0; len];
    d[idx(0, 1)] = 8.0;
    let mut info = ColearnProjectionInfo::default();
    let status = unsafe { colearn_hemimetric_project(h, d.as_ptr(), ptr::null(), len, 1e-12, d.as_mut_ptr(), &mut info) };
    assert_eq!(status, ColearnStatus::Ok);
    assert!((d[idx(0, 1)] - 6.0).abs() < 1e-6);
    assert!((d[idx(0, 2)] - 3.0).abs() < 1e-6);
    assert!((d[idx(2, 1)] - 3.0).abs() < 1e-6);
    assert!(info.gap <= 1e-12 && info.primal >= info.dual && !info.capped);
    unsafe { colearn_hemimetric_free(h) };
}

#[test]
fn repair_lowers_long_pair() {
    let h = hemimetric(3, 9.0);
    let mut d = [9.0; 6];
    let mut z = [0; 3];
    for (slot, (i, j)) in z.iter_mut().zip([(0, 1), (0, 2), (2, 1)]) {
        unsafe { colearn_hemimetric_pair_index(h, i, j, slot) };
    }
    d[z[0]] = 7.0;
    d[z[1]] = 2.0;
    d[z[2]] = 3.0;
    let mut out = [0.0; 6];
    assert_eq!(unsafe { colearn_hemimetric_repair(h, d.as_ptr(), 6, out.as_mut_ptr()) }, ColearnStatus::Ok);
    assert_eq!(out[z[0]], 5.0);
    unsafe { colearn_hemimetric_free(h) };
}

#[test]
fn errors_carry_codes_and_messages() {
    let mut h = ptr::null_mut();
    assert_eq!(unsafe { colearn_hemimetric_new(1, 9.0, &mut h) }, ColearnStatus::InvalidArgument);
    assert!(h.is_null());
    assert!(!last_error().is_empty());

    let h = hemimetric(3, 9.0);
    let d = [1.0; 5];
    let mut out = [0.0; 5];
    let status = unsafe { colearn_hemimetric_project(h, d.as_ptr(), ptr::null(), 5, 0.0, out.as_mut_ptr(), ptr::null_mut()) };
    assert_eq!(status, ColearnStatus::DimensionMismatch);
    assert!(last_error().contains("expected 6"), "{}", last_error());
    let mut z = 0;
    assert_eq!(unsafe { colearn_hemimetric_pair_index(h, 1, 1, &mut z) }, ColearnStatus::InvalidArgument);
    assert_eq!(
        unsafe { colearn_hemimetric_project(h, ptr::null(), ptr::null(), 6, 0.0, out.as_mut_ptr(), ptr::null_mut()) },
        ColearnStatus::NullPointer
    );
    unsafe { colearn_hemimetric_free(h) };
    unsafe { colearn_hemimetric_free(ptr::null_mut()) };

    let mut buf = [0 as c_char; 4];
    let full = unsafe { colearn_last_error_message(buf.as_mut_ptr(), buf.len()) };
    assert!(full > 3);
    assert_eq!(buf[3], 0);
}

#[test]
fn simulation_round_trip() {
    let json = CString::new(r#"{"scenario": {"kind": "hemimetric", "n": 4, "r_in": 1, "r_out": 9}, "steps": 50, "runs": 3, "timing": false}"#).unwrap();
    let mut s = ptr::null_mut();
    assert_eq!(unsafe { colearn_simulation_new(json.as_ptr(), &mut s) }, ColearnStatus::Ok);
    let mut regret = 0.0;
    assert_eq!(unsafe { colearn_simulation_final_regret(s, 0, &mut regret) }, ColearnStatus::NotRun);
    assert_eq!(unsafe { colearn_simulation_run(s) }, ColearnStatus::Ok);

    let (mut runs, mut steps) = (0, 0);
    assert_eq!(unsafe { colearn_simulation_shape(s, &mut runs, &mut steps) }, ColearnStatus::Ok);
    assert_eq!((runs, steps), (3, 50));
    let mut path = vec![0.0; steps];
    assert_eq!(unsafe { colearn_simulation_cumulative_regret(s, 2, path.as_mut_ptr(), steps) }, ColearnStatus::Ok);
    assert_eq!(unsafe { colearn_simulation_final_regret(s, 2, &mut regret) }, ColearnStatus::Ok);
    assert_eq!(path[steps - 1], regret);
    assert!(path.windows(2).all(|w| w[1] >= w[0]));
    assert_eq!(unsafe { colearn_simulation_final_regret(s, 3, &mut regret) }, ColearnStatus::InvalidArgument);

    let mut violations = 9;
    assert_eq!(unsafe { colearn_simulation_bound_violations(s, &mut violations) }, ColearnStatus::Ok);
    assert_eq!(violations, 0);
    unsafe { colearn_simulation_free(s) };
}

#[test]
fn bad_configuration_is_rejected() {
    let json = CString::new(r#"{"alpha": 3}"#).unwrap();
    let mut s = ptr::null_mut();
    assert_eq!(unsafe { colearn_simulation_new(json.as_ptr(), &mut s) }, ColearnStatus::InvalidConfig);
    let json = CString::new(r#"{"stepz": 3}"#).unwrap();
    assert_eq!(unsafe { colearn_simulation_new(json.as_ptr(), &mut s) }, ColearnStatus::InvalidConfig);
    assert!(last_error().contains("stepz"));
    assert!(s.is_null());
}

#[test]
fn bound_helpers() {
    assert!((colearn_iol_bound(500, 90, 9.0, 1.0) - 2863.8).abs() < 0.05);
    assert_eq!(colearn_ocp_bound(100, 9.0, 1.0), 135.0);
    let b = colearn_required_batch(1.0, 0.25);
    assert_eq!(b, 21);
    assert!((colearn_batch_bound(b, 1.0, 1.0) - 6.874).abs() < 1e-3);
}
