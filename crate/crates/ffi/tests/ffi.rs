use std::ffi::{c_char, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use osclab_ffi::*;

fn last_error() -> String {
    let mut buf = vec![0 as c_char; 512];
    let n = unsafe { osclab_last_error_message(buf.as_mut_ptr(), buf.len()) };
    let bytes: Vec<u8> = buf[..n.min(511)].iter().map(|&c| c as u8).collect();
    String::from_utf8_lossy(&bytes).into_owned()
}

fn even_example() -> *mut OsclabInstance {
    let name = CString::new("paper-even-d2").unwrap();
    let mut inst = ptr::null_mut();
    assert_eq!(unsafe { osclab_instance_builtin(name.as_ptr(), &mut inst) }, OsclabStatus::Ok);
    inst
}

#[test]
fn instance_round_trip() {
    let inst = even_example();
    let mut dim = 0;
    let (mut a, mut b, mut c, mut d) = (0.0, 0.0, 0.0, 0.0);
    unsafe {
        assert_eq!(osclab_instance_dim(inst, &mut dim), OsclabStatus::Ok);
        assert_eq!(osclab_instance_constants(inst, &mut a, &mut b, &mut c, &mut d), OsclabStatus::Ok);
        assert_eq!(osclab_check_lambda(inst, 100.0), OsclabStatus::Ok);
        assert_eq!(osclab_check_lambda(inst, 0.5), OsclabStatus::ConstraintViolation);
        assert!(last_error().contains("constraint"));
        osclab_instance_free(inst);
    }
    assert_eq!(dim, 4);
    assert!(a * b > 0.0);
}

#[test]
fn unknown_instance_and_nulls() {
    let name = CString::new("nope").unwrap();
    let mut inst = 0x1 as *mut OsclabInstance;
    unsafe {
        assert_eq!(osclab_instance_builtin(name.as_ptr(), &mut inst), OsclabStatus::InvalidInput);
        assert!(inst.is_null());
        assert!(last_error().contains("nope"));
        let mut dim = 0;
        assert_eq!(osclab_instance_dim(ptr::null(), &mut dim), OsclabStatus::NullPointer);
        assert_eq!(osclab_instance_builtin(ptr::null(), &mut inst), OsclabStatus::NullPointer);
        osclab_instance_free(ptr::null_mut());
    }
}

#[test]
fn truncated_message() {
    unsafe {
        osclab_tiling_new(0.0, 10.0, &mut ptr::null_mut());
        let mut buf = [1 as c_char; 4];
        let n = osclab_last_error_message(buf.as_mut_ptr(), 4);
        assert!(n > 3);
        assert_eq!(buf[3], 0);
    }
}

#[test]
fn tiling_cells_cover_and_locate() {
    let mut t = ptr::null_mut();
    unsafe {
        assert_eq!(osclab_tiling_new(100.0, 2000.0, &mut t), OsclabStatus::Ok);
        let mut n = 0;
        osclab_tiling_len(t, &mut n);
        assert!(n > 0);
        let (mut prev_hi, mut lo, mut hi) = (i64::MIN, 0, 0);
        for i in 0..n {
            assert_eq!(osclab_tiling_cell(t, i, &mut lo, &mut hi), OsclabStatus::Ok);
            assert!(lo < hi);
            if prev_hi != i64::MIN {
                assert_eq!(lo, prev_hi);
            }
            prev_hi = hi;
        }
        assert_eq!(osclab_tiling_cell(t, n, &mut lo, &mut hi), OsclabStatus::InvalidInput);
        assert_eq!(osclab_tiling_locate(t, 537.25, &mut lo, &mut hi), OsclabStatus::Ok);
        assert!(lo as f64 <= 537.25 && 537.25 < hi as f64);
        assert_eq!(osclab_tiling_locate(t, lo as f64, &mut lo, &mut hi), OsclabStatus::BoundaryFrequency);
        osclab_tiling_free(t);
    }
}

#[test]
fn window_and_kernel() {
    let inst = even_example();
    let (mut w, mut t) = (ptr::null_mut(), ptr::null_mut());
    unsafe {
        assert_eq!(osclab_window_default(&mut w), OsclabStatus::Ok);
        let (mut v, mut floor) = (0.0, 0.0);
        assert_eq!(osclab_window_eval(w, 0.0, &mut v, &mut floor), OsclabStatus::Ok);
        assert!(v > 0.0 && floor > 0.0);
        assert_eq!(osclab_window_eval(w, 0.75, &mut v, ptr::null_mut()), OsclabStatus::Ok);
        assert_eq!(v, 0.0);

        assert_eq!(osclab_tiling_new(100.0, 4000.0, &mut t), OsclabStatus::Ok);
        let y = [0.01, -0.02, 0.03, 0.01];
        let far = [1e5, 0.5, 0.5, 0.5];
        let (mut re, mut im) = (1.0, 1.0);
        let s = osclab_kernel_eval(inst, w, t, y.as_ptr(), far.as_ptr(), 4, 100.0, &mut re, &mut im);
        assert_eq!(s, OsclabStatus::OutOfCap);
        let xi = [1030.5, 10.5, -20.5, 40.5];
        let s = osclab_kernel_eval(inst, w, t, y.as_ptr(), xi.as_ptr(), 4, 100.0, &mut re, &mut im);
        assert_eq!(s, OsclabStatus::Ok, "{}", last_error());
        assert!(re.is_finite() && im.is_finite());
        let s = osclab_kernel_eval(inst, w, t, ptr::null(), far.as_ptr(), 4, 100.0, &mut re, &mut im);
        assert_eq!(s, OsclabStatus::NullPointer);

        osclab_tiling_free(t);
        osclab_window_free(w);
        osclab_instance_free(inst);
    }
}

#[test]
fn extremizer_and_certify() {
    let inst = even_example();
    unsafe {
        let (mut re, mut im) = (0.0, 0.0);
        assert_eq!(osclab_extremizer_value(inst, 50.0, &mut re, &mut im), OsclabStatus::Ok, "{}", last_error());
        assert!(re.hypot(im) > 0.0);
        let (mut c, mut f) = (0.0, 1);
        assert_eq!(osclab_certify(inst, 5, 16, &mut c, &mut f), OsclabStatus::Ok);
        assert!(c > 0.0);
        assert_eq!(f, 0);
        assert_eq!(osclab_certify(inst, 0, 16, &mut c, &mut f), OsclabStatus::InvalidInput);
        osclab_instance_free(inst);
    }
}

/// Compiles a C program against the generated header and the static library.
#[test]
fn c_program_links_against_header() {
    let manifest = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let target = std::env::current_exe().unwrap().parent().unwrap().parent().unwrap().to_path_buf();
    let lib = target.join("libosclab_ffi.a");
    if !lib.exists() {
        eprintln!("static library not found at {}; skipping", lib.display());
        return;
    }
    let exe = target.join("osclab_ffi_smoke");
    let status = Command::new("cc")
        .arg(manifest.join("tests/c/smoke.c"))
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status();
    let Ok(status) = status else {
        eprintln!("no C compiler; skipping");
        return;
    };
    assert!(status.success(), "C compile failed");
    let out = Command::new(&exe).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("ok "));
}
