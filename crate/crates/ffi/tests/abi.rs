use std::ffi::{CStr, CString};
use std::ptr;

use nbesov_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(nb_last_error()) }.to_string_lossy().into_owned()
}

#[test]
fn basis_lifecycle() {
    let mut b: *mut NbBasis = ptr::null_mut();
    assert_eq!(nb_basis_interval(std::f64::consts::PI, 16, 64, &mut b), NbStatus::Ok);
    assert!(!b.is_null());
    let (mut modes, mut points) = (0usize, 0usize);
    unsafe {
        assert_eq!(nb_basis_size(b, &mut modes, &mut points), NbStatus::Ok);
        assert_eq!((modes, points), (16, 64));
        let mut ev = vec![0.0; 16];
        assert_eq!(nb_basis_eigenvalues(b, ev.as_mut_ptr(), 4), NbStatus::BufferTooSmall);
        assert!(last_error().contains("16"));
        assert_eq!(nb_basis_eigenvalues(b, ev.as_mut_ptr(), ev.len()), NbStatus::Ok);
        assert!(last_error().is_empty());
        assert!((ev[1] - 1.0).abs() < 1e-12 && (ev[3] - 9.0).abs() < 1e-12);

        let dir = tempfile::tempdir().unwrap();
        let path = CString::new(dir.path().join("b.nbb").to_str().unwrap()).unwrap();
        assert_eq!(nb_basis_save(b, path.as_ptr()), NbStatus::Ok);
        let mut c: *mut NbBasis = ptr::null_mut();
        assert_eq!(nb_basis_load(path.as_ptr(), &mut c), NbStatus::Ok);
        let mut ev2 = vec![0.0; 16];
        assert_eq!(nb_basis_eigenvalues(c, ev2.as_mut_ptr(), 16), NbStatus::Ok);
        assert_eq!(ev, ev2);
        nb_basis_free(c);
        nb_basis_free(b);
        nb_basis_free(ptr::null_mut());
    }
}

#[test]
fn error_codes() {
    let mut b: *mut NbBasis = ptr::null_mut();
    assert_eq!(nb_basis_interval(1.0, 64, 16, &mut b), NbStatus::Resolution);
    assert!(b.is_null());
    assert!(!last_error().is_empty());
    assert_eq!(nb_basis_interval(-1.0, 4, 16, &mut b), NbStatus::InvalidArgument);
    assert_eq!(nb_basis_interval(1.0, 4, 16, ptr::null_mut()), NbStatus::NullPointer);
    unsafe {
        let missing = CString::new("/nonexistent/basis.nbb").unwrap();
        assert_eq!(nb_basis_load(missing.as_ptr(), &mut b), NbStatus::Io);
        assert_eq!(nb_basis_size(ptr::null(), ptr::null_mut(), ptr::null_mut()), NbStatus::NullPointer);
    }
}

#[test]
fn norms_and_heat() {
    let mut b: *mut NbBasis = ptr::null_mut();
    assert_eq!(nb_basis_rectangle(1.0, 2.0, 40, 16, 32, &mut b), NbStatus::Ok);
    let n = 16 * 32;
    let constant = vec![3.0; n];
    let (mut v, mut tail) = (f64::NAN, f64::NAN);
    unsafe {
        let st = nb_besov_norm(b, constant.as_ptr(), n, 0.5, 2.0, f64::INFINITY, 1, NbPartition::Standard, &mut v, &mut tail);
        assert_eq!(st, NbStatus::Ok);
        assert!(v.abs() < 1e-12 && tail == 0.0);
        let st = nb_besov_norm(b, constant.as_ptr(), n - 1, 0.5, 2.0, 2.0, 0, NbPartition::Standard, &mut v, ptr::null_mut());
        assert_eq!(st, NbStatus::InvalidArgument);
        let st = nb_besov_norm(b, constant.as_ptr(), n, 0.5, 0.5, 2.0, 0, NbPartition::Standard, &mut v, ptr::null_mut());
        assert_eq!(st, NbStatus::InvalidArgument);

        let mut out = vec![0.0; n];
        assert_eq!(nb_heat(b, 0.3, constant.as_ptr(), n, out.as_mut_ptr()), NbStatus::Ok);
        assert!(out.iter().all(|x| (x - 3.0).abs() < 1e-12));

        let mut phi = 0.0;
        assert_eq!(nb_phi_j(NbPartition::Standard, -2, 1.0, &mut phi), NbStatus::Ok);
        assert_eq!(phi, 0.0);
        nb_basis_free(b);
    }
}

#[test]
fn experiments_report_verdicts() {
    let id = CString::new("exp_partition").unwrap();
    let mut verdict = -1;
    let mut json: *mut std::ffi::c_char = ptr::null_mut();
    unsafe {
        assert_eq!(nb_run_experiment(id.as_ptr(), 1, 0, &mut verdict, &mut json), NbStatus::Ok);
        assert_eq!(verdict, 0);
        let text = CStr::from_ptr(json).to_str().unwrap().to_owned();
        assert!(text.contains("\"id\": \"exp_partition\""));
        nb_string_free(json);
        assert_eq!(nb_run_experiment(id.as_ptr(), 1, 1, &mut verdict, ptr::null_mut()), NbStatus::Ok);
        assert_eq!(verdict, 3);
        let bad = CString::new("exp_nothing").unwrap();
        assert_eq!(nb_run_experiment(bad.as_ptr(), 1, 0, &mut verdict, ptr::null_mut()), NbStatus::InvalidArgument);
    }
}

/// The shipped header declares every exported function and parses as C.
#[test]
fn header_matches_exports() {
    let root = env!("CARGO_MANIFEST_DIR");
    let src = std::fs::read_to_string(format!("{root}/src/lib.rs")).unwrap();
    let header = std::fs::read_to_string(format!("{root}/include/nbesov.h")).unwrap();
    let names: Vec<&str> = src
        .lines()
        .filter_map(|l| l.split("extern \"C\" fn ").nth(1))
        .map(|rest| rest.split('(').next().unwrap())
        .collect();
    assert!(names.len() >= 10);
    for name in names {
        assert!(header.contains(&format!("{name}(")), "{name} missing from header");
    }
    if let Ok(out) = std::process::Command::new("cc")
        .args(["-fsyntax-only", "-Wall", "-Werror", "-x", "c", &format!("{root}/include/nbesov.h")])
        .output()
    {
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
}
