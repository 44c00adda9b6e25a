use std::ffi::{CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use betaqual_ffi::*;

fn last_error() -> String {
    let p = bq_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn two_period_dataset() -> *mut BqDataset {
    let x = [0.2, 0.7, 0.5, 0.5, 0.9, 0.6, 0.4, 0.1, 0.7, 0.8, 0.3, 0.3];
    let y = [0.45, 0.5, 0.75, 0.3, 0.7, 0.35];
    let period = [1u8, 1, 1, 2, 2, 2];
    let mut data = ptr::null_mut();
    let status = unsafe { bq_dataset_new(2, 6, x.as_ptr(), y.as_ptr(), period.as_ptr(), &mut data) };
    assert_eq!(status, BqStatus::Ok);
    data
}

#[test]
fn version_matches_the_crate() {
    let v = unsafe { CStr::from_ptr(bq_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn shape_round_trip_and_support_errors() {
    let (mut a, mut b) = (0.0, 0.0);
    assert_eq!(unsafe { bq_moments_to_shape(0.6, 0.02, &mut a, &mut b) }, BqStatus::Ok);
    let (mut mu, mut s2) = (0.0, 0.0);
    assert_eq!(unsafe { bq_shape_to_moments(a, b, &mut mu, &mut s2) }, BqStatus::Ok);
    assert!((mu - 0.6).abs() < 1e-12 && (s2 - 0.02).abs() < 1e-12);

    let status = unsafe { bq_moments_to_shape(0.5, 0.3, &mut a, &mut b) };
    assert_eq!(status, BqStatus::SupportViolation);
    assert!(last_error().contains("support"));

    let status = unsafe { bq_moments_to_shape(0.5, 0.01, ptr::null_mut(), &mut b) };
    assert_eq!(status, BqStatus::NullPointer);
    assert!(last_error().contains('a'));
}

#[test]
fn dataset_handles_report_dimensions_and_reject_bad_input() {
    let data = two_period_dataset();
    unsafe {
        assert_eq!(bq_dataset_n(data), 6);
        assert_eq!(bq_dataset_k(data), 2);
        assert_eq!(bq_dataset_n(ptr::null()), 0);
        bq_dataset_free(data);
        bq_dataset_free(ptr::null_mut());
    }

    let y = [1.0];
    let x = [0.5];
    let period = [1u8];
    let mut out = ptr::null_mut();
    let status = unsafe { bq_dataset_new(1, 1, x.as_ptr(), y.as_ptr(), period.as_ptr(), &mut out) };
    assert_ne!(status, BqStatus::Ok);
    assert!(out.is_null());

    let status = unsafe { bq_dataset_new(1, 1, ptr::null(), y.as_ptr(), period.as_ptr(), &mut out) };
    assert_eq!(status, BqStatus::NullPointer);
}

#[test]
fn chain_traces_and_dic() {
    let data = two_period_dataset();
    let config = BqSamplerConfig {
        iterations: 2000,
        burnin: 500,
        seed: 9,
        ..bq_sampler_config_default()
    };
    let mut chain = ptr::null_mut();
    unsafe {
        assert_eq!(bq_chain_run(data, BqModel::Period2, &config, &mut chain), BqStatus::Ok);
        let len = bq_chain_len(chain);
        assert_eq!(len, 1500);
        assert_eq!(bq_chain_weight_count(chain), 3);

        let mut total = vec![0.0; len];
        for l in 0..3 {
            let mut w = vec![0.0; len];
            assert_eq!(bq_chain_weight_trace(chain, l, w.as_mut_ptr(), len), BqStatus::Ok);
            for (t, v) in total.iter_mut().zip(&w) {
                *t += v;
            }
        }
        assert!(total.iter().all(|t| (t - 1.0).abs() < 1e-9));

        let mut short = vec![0.0; 10];
        let status = bq_chain_sigma2_trace(chain, short.as_mut_ptr(), short.len());
        assert_eq!(status, BqStatus::BufferTooSmall);
        assert_eq!(
            bq_chain_weight_trace(chain, 3, short.as_mut_ptr(), len),
            BqStatus::InvalidInput
        );

        let mut dic = BqDic::default();
        assert_eq!(bq_chain_dic(chain, data, &mut dic), BqStatus::Ok);
        assert!((dic.p_d - (dic.dbar - dic.d_at_mean)).abs() < 1e-9);
        assert!((dic.dic - (dic.dbar + dic.p_d)).abs() < 1e-9);

        bq_chain_free(chain);
        bq_dataset_free(data);
    }
}

#[test]
fn invalid_sampler_config_is_rejected() {
    let data = two_period_dataset();
    let config = BqSamplerConfig {
        iterations: 100,
        burnin: 100,
        ..bq_sampler_config_default()
    };
    let mut chain = ptr::null_mut();
    unsafe {
        assert_eq!(bq_chain_run(data, BqModel::Joint, &config, &mut chain), BqStatus::InvalidInput);
        assert!(chain.is_null());
        bq_dataset_free(data);
    }
}

#[test]
fn tail_area_of_differences() {
    let d = [-0.2, 0.1, 0.3, 0.4];
    let mut p = 0.0;
    assert_eq!(unsafe { bq_tail_area_pi0(d.as_ptr(), 4, &mut p) }, BqStatus::Ok);
    assert_eq!(p, 0.25);
    assert_eq!(unsafe { bq_tail_area_pi0(d.as_ptr(), 0, &mut p) }, BqStatus::InvalidInput);
}

#[test]
fn csv_loading_and_full_fit_from_a_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("survey.csv");
    std::fs::write(
        &csv,
        "q1,q2,overall,period\n3,8,6,1\n5,5,5,1\n9,6,8,1\n2,4,3,2\n7,8,7,2\n4,3,10,2\n",
    )
    .unwrap();
    let path = CString::new(csv.to_str().unwrap()).unwrap();
    let mut data = ptr::null_mut();
    unsafe {
        assert_eq!(bq_dataset_load_csv(path.as_ptr(), ptr::null(), ptr::null(), &mut data), BqStatus::Ok);
        // the boundary row is dropped by default
        assert_eq!(bq_dataset_n(data), 5);
        bq_dataset_free(data);

        let bad = CString::new("sideways").unwrap();
        let status = bq_dataset_load_csv(path.as_ptr(), bad.as_ptr(), ptr::null(), &mut data);
        assert_eq!(status, BqStatus::InvalidInput);

        let missing = CString::new(dir.path().join("none.csv").to_str().unwrap()).unwrap();
        let status = bq_dataset_load_csv(missing.as_ptr(), ptr::null(), ptr::null(), &mut data);
        assert_eq!(status, BqStatus::Io);
    }

    let out = dir.path().join("out");
    let config = dir.path().join("run.cfg");
    std::fs::write(
        &config,
        format!(
            "input_path = {}\nmodel_kind = separated\niterations = 600\nburnin = 200\noutput_dir = {}\n",
            csv.display(),
            out.display()
        ),
    )
    .unwrap();
    let config = CString::new(config.to_str().unwrap()).unwrap();
    assert_eq!(unsafe { bq_fit_config_file(config.as_ptr()) }, BqStatus::Ok);
    assert!(out.join("summary.csv").exists());
    assert!(out.join("differences.csv").exists());
}

fn header() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("include").join("betaqual.h")
}

#[test]
fn header_declares_the_exported_api() {
    let text = std::fs::read_to_string(header()).unwrap();
    for name in [
        "bq_version",
        "bq_last_error_message",
        "bq_moments_to_shape",
        "bq_shape_to_moments",
        "bq_dataset_new",
        "bq_dataset_load_csv",
        "bq_dataset_free",
        "bq_sampler_config_default",
        "bq_chain_run",
        "bq_chain_weight_trace",
        "bq_chain_sigma2_trace",
        "bq_chain_dic",
        "bq_chain_free",
        "bq_tail_area_pi0",
        "bq_fit_config_file",
        "typedef struct BqDataset BqDataset;",
        "typedef struct BqChain BqChain;",
        "BQ_STATUS_OK = 0",
    ] {
        assert!(text.contains(name), "{name} missing from header");
    }
}

#[test]
fn header_compiles_as_c() {
    let Some(cc) = ["cc", "gcc", "clang"]
        .into_iter()
        .find(|c| Command::new(c).arg("--version").output().is_ok())
    else {
        eprintln!("no C compiler found; skipping");
        return;
    };
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("use_header.c");
    std::fs::write(
        &src,
        r#"#include "betaqual.h"
int main(void) {
    BqSamplerConfig config = bq_sampler_config_default();
    BqDataset *data = NULL;
    BqChain *chain = NULL;
    BqStatus s = bq_chain_run(data, BQ_MODEL_JOINT, &config, &chain);
    bq_chain_free(chain);
    bq_dataset_free(data);
    return s == BQ_STATUS_OK ? 0 : 1;
}
"#,
    )
    .unwrap();
    let status = Command::new(cc)
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(header().parent().unwrap())
        .arg(&src)
        .status()
        .unwrap();
    assert!(status.success());
}
