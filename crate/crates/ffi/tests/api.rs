use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use heom_dpt_ffi::*;

fn last_error() -> String {
    let p = hd_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn lmg_steady_state_round_trip() {
    unsafe {
        let mut model = ptr::null_mut();
        assert_eq!(hd_model_lmg(4, 0.5, 1.0, 1.0, 1.0, &mut model), HdStatus::Ok);
        assert_eq!(hd_model_system_dim(model), 5);

        let mut l = ptr::null_mut();
        assert_eq!(hd_liouvillian_assemble(model, 3, &mut l), HdStatus::Ok);
        assert!(hd_liouvillian_dim(l) > 25);

        let mut state = ptr::null_mut();
        assert_eq!(hd_steady_state(l, &mut state), HdStatus::Ok);
        let d = hd_state_dim(state);
        assert_eq!(d, 5);
        let mut buf = vec![0.0; 2 * d * d];
        assert_eq!(hd_state_matrix(state, buf.as_mut_ptr(), buf.len() - 1), HdStatus::BufferTooSmall);
        assert_eq!(hd_state_matrix(state, buf.as_mut_ptr(), buf.len()), HdStatus::Ok);
        let trace: f64 = (0..d).map(|i| buf[2 * (i * d + i)]).sum();
        assert!((trace - 1.0).abs() < 1e-10);

        let (mut re, mut im) = (0.0, 0.0);
        let name = CString::new("Sz").unwrap();
        assert_eq!(hd_state_expectation(state, model, name.as_ptr(), &mut re, &mut im), HdStatus::Ok);
        let direct: f64 = (0..d).map(|i| buf[2 * (i * d + i)] * (2.0 - i as f64)).sum();
        assert!((re - direct).abs() < 1e-10 || (re + direct).abs() < 1e-10);
        assert!(im.abs() < 1e-10);

        let unknown = CString::new("Q").unwrap();
        assert_eq!(hd_state_expectation(state, model, unknown.as_ptr(), &mut re, &mut im), HdStatus::InvalidArgument);
        assert!(!last_error().is_empty());

        assert_eq!(hd_gap(l, &mut re, &mut im), HdStatus::Ok);
        assert!(re < 0.0);

        hd_state_free(state);
        hd_liouvillian_free(l);
        hd_model_free(model);
    }
}

#[test]
fn errors_set_status_and_message() {
    unsafe {
        let mut model = ptr::null_mut();
        assert_eq!(hd_model_lmg(4, 0.5, 1.0, -1.0, 1.0, &mut model), HdStatus::InvalidArgument);
        assert!(model.is_null());
        assert!(!last_error().is_empty());

        assert_eq!(hd_model_lmg(4, 0.5, 1.0, 1.0, 1.0, ptr::null_mut()), HdStatus::NullPointer);
        let mut l = ptr::null_mut();
        assert_eq!(hd_liouvillian_assemble(ptr::null(), 2, &mut l), HdStatus::NullPointer);
        assert!(last_error().contains("model"));

        // Successful calls clear the message.
        assert_eq!(hd_model_qubit_decay(1.0, 0.2, 0.0, 1.0, 1.0, &mut model), HdStatus::Ok);
        assert!(hd_last_error().is_null());
        assert_eq!(hd_model_system_dim(ptr::null()), 0);
        hd_model_free(model);
        hd_model_free(ptr::null_mut());
    }
}

#[test]
fn version_matches_crate() {
    let v = unsafe { CStr::from_ptr(hd_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

fn header_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include")
}

#[test]
fn header_declares_the_api() {
    let header = std::fs::read_to_string(header_dir().join("heom_dpt.h")).unwrap();
    for symbol in [
        "typedef struct HdModel HdModel",
        "HD_STATUS_NULL_POINTER = 1",
        "hd_last_error(void)",
        "hd_liouvillian_assemble",
        "hd_steady_state",
        "hd_state_expectation",
        "size_t",
    ] {
        assert!(header.contains(symbol), "missing {symbol}");
    }
}

#[test]
fn header_compiles_as_c() {
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    let dir = tempfile_dir();
    let src = dir.join("use_header.c");
    std::fs::write(
        &src,
        "#include \"heom_dpt.h\"\nint main(void) { HdModel *m = 0; HdStatus s = hd_model_lmg(4, 0.5, 1, 1, 1, &m); hd_model_free(m); return (int)s; }\n",
    )
    .unwrap();
    match Command::new(&cc).arg("-fsyntax-only").arg("-Wall").arg("-Werror").arg("-I").arg(header_dir()).arg(&src).output() {
        Ok(out) => assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr)),
        Err(e) => eprintln!("skipping C compile check, no compiler: {e}"),
    }
}

fn tempfile_dir() -> PathBuf {
    let dir = std::env::temp_dir().join(format!("heom-dpt-ffi-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}
