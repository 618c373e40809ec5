use std::ffi::{CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use mixpinn_ffi::*;

const HOMOGENEOUS: &str = r#"
problem = "thermal"
[domain.homogeneous]
nx = 4
ny = 4
lx = 1.0
ly = 1.0
phase = 1
[sampling]
interior = 40
per_edge = 5
[network]
hidden_layers = 1
neurons = 4
[training]
epochs = 3
[eval]
nx = 6
ny = 5
"#;

fn parse(text: &str) -> *mut MpConfig {
    let c = CString::new(text).unwrap();
    let mut cfg = ptr::null_mut();
    assert_eq!(unsafe { mp_config_parse(c.as_ptr(), &mut cfg) }, MpStatus::Ok);
    cfg
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(mp_last_error()) }.to_string_lossy().into_owned()
}

#[test]
fn fem_field_through_handles() {
    let cfg = parse(HOMOGENEOUS);
    let mut field = ptr::null_mut();
    unsafe {
        assert_eq!(mp_solve_fem(cfg, &mut field), MpStatus::Ok);
        let (mut nx, mut ny) = (0, 0);
        assert_eq!(mp_field_dims(field, &mut nx, &mut ny), MpStatus::Ok);
        assert_eq!((nx, ny), (6, 5));
        let mut x = vec![0.0; 30];
        let mut t = vec![0.0; 30];
        let xn = CString::new("x").unwrap();
        let tn = CString::new("T").unwrap();
        assert_eq!(mp_field_column(field, xn.as_ptr(), x.as_mut_ptr(), 30), MpStatus::Ok);
        assert_eq!(mp_field_column(field, tn.as_ptr(), t.as_mut_ptr(), 30), MpStatus::Ok);
        for (x, t) in x.iter().zip(&t) {
            assert!((t - (1.0 - x)).abs() < 1e-10);
        }
        let (mut max, mut mean) = (1.0, 1.0);
        let group = CString::new("flux").unwrap();
        assert_eq!(mp_compare(field, field, group.as_ptr(), &mut max, &mut mean), MpStatus::Ok);
        assert_eq!((max, mean), (0.0, 0.0));
        mp_field_free(field);
        mp_config_free(cfg);
    }
}

#[test]
fn pinn_field_round_trips_through_csv() {
    let cfg = parse(HOMOGENEOUS);
    let dir = tempfile::tempdir().unwrap();
    let path = CString::new(dir.path().join("f.csv").to_str().unwrap()).unwrap();
    unsafe {
        let mut field = ptr::null_mut();
        assert_eq!(mp_config_set_epochs(cfg, 2), MpStatus::Ok);
        assert_eq!(mp_solve_pinn(cfg, 7, &mut field), MpStatus::Ok);
        assert_eq!(mp_field_write_csv(field, path.as_ptr()), MpStatus::Ok);
        let mut back = ptr::null_mut();
        assert_eq!(mp_field_read_csv(path.as_ptr(), &mut back), MpStatus::Ok);
        let (mut max, mut mean) = (1.0, 1.0);
        let name = CString::new("T").unwrap();
        assert_eq!(mp_compare(back, field, name.as_ptr(), &mut max, &mut mean), MpStatus::Ok);
        assert_eq!(max, 0.0);
        mp_field_free(back);
        mp_field_free(field);
        mp_config_free(cfg);
    }
}

#[test]
fn errors_are_reported() {
    let mut cfg = ptr::null_mut();
    let bad = CString::new("problem = \"plasma\"").unwrap();
    assert_eq!(unsafe { mp_config_parse(bad.as_ptr(), &mut cfg) }, MpStatus::Config);
    assert!(last_error().contains("plasma"), "{}", last_error());
    assert!(cfg.is_null());

    assert_eq!(unsafe { mp_config_parse(ptr::null(), &mut cfg) }, MpStatus::NullPointer);
    let missing = CString::new("/nonexistent/run.toml").unwrap();
    assert_eq!(unsafe { mp_config_load(missing.as_ptr(), &mut cfg) }, MpStatus::Io);

    let cfg = parse(HOMOGENEOUS);
    unsafe {
        let mut field = ptr::null_mut();
        assert_eq!(mp_solve_fem(cfg, &mut field), MpStatus::Ok);
        let mut buf = vec![0.0; 3];
        let name = CString::new("T").unwrap();
        assert_eq!(mp_field_column(field, name.as_ptr(), buf.as_mut_ptr(), 3), MpStatus::InvalidArgument);
        let other = CString::new("u_x").unwrap();
        let mut full = vec![0.0; 30];
        assert_eq!(mp_field_column(field, other.as_ptr(), full.as_mut_ptr(), 30), MpStatus::InvalidArgument);
        mp_field_free(field);
        mp_config_free(cfg);
        mp_config_free(ptr::null_mut());
    }
}

#[test]
fn header_is_valid_c() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/mixpinn.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for f in ["mp_solve_fem", "mp_solve_pinn", "mp_last_error", "MP_STATUS_TRAINING"] {
        assert!(text.contains(f), "{f} missing from header");
    }
    let Ok(out) = Command::new("cc").args(["-fsyntax-only", "-x", "c"]).arg(&header).output() else {
        eprintln!("no C compiler available, syntax check skipped");
        return;
    };
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}
