use proptest::prelude::*;
use rdim::bounds::RdConfig;
use rdim::io::{
    read_bundle, read_idx, read_idx_dataset, write_bundle, write_report, write_report_to, IdxTensor,
    MatrixBundle, ReportFormat, CSV_HEADER,
};
use rdim::network::FcnModel;
use rdim::pipeline::{analyze, AnalysisConfig};
use rdim::trainer::synth_blobs;
use rdim::{Error, Matrix, Rng};

fn finite_f64() -> impl Strategy<Value = f64> {
    any::<u64>().prop_map(f64::from_bits).prop_filter("finite", |v| v.is_finite())
}

fn matrix() -> impl Strategy<Value = Matrix> {
    (0usize..5, 0usize..5).prop_flat_map(|(r, c)| {
        prop::collection::vec(finite_f64(), r * c).prop_map(move |d| Matrix::new(r, c, d).unwrap())
    })
}

proptest! {
    #[test]
    fn bundle_round_trip_is_bitwise(entries in prop::collection::btree_map("[a-zA-Z0-9_]{0,12}", matrix(), 0..5)) {
        let mut b = MatrixBundle::new();
        for (name, m) in entries {
            b.insert(name, m).unwrap();
        }
        let bytes = b.to_bytes();
        let back = MatrixBundle::from_bytes(&bytes).unwrap();
        prop_assert_eq!(back.to_bytes(), bytes);
        for ((n1, m1), (n2, m2)) in back.entries().iter().zip(b.entries()) {
            prop_assert_eq!(n1, n2);
            prop_assert!(m1.data().iter().zip(m2.data()).all(|(x, y)| x.to_bits() == y.to_bits()));
        }
    }

    #[test]
    fn arbitrary_bytes_never_panic(bytes in prop::collection::vec(any::<u8>(), 0..200)) {
        let _ = MatrixBundle::from_bytes(&bytes);
        let _ = IdxTensor::from_bytes(&bytes);
    }
}

#[test]
fn bundle_files() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.rdmb");
    let model = FcnModel::kaiming_uniform(&[4, 6, 2], &mut Rng::new(1)).unwrap();
    write_bundle(&path, &MatrixBundle::from_model(&model)).unwrap();
    assert_eq!(read_bundle(&path).unwrap().to_model().unwrap(), model);
    assert!(matches!(read_bundle(dir.path().join("missing")), Err(Error::Io(_))));
}

fn idx_file(magic: [u8; 4], dims: &[u32], payload: &[u8]) -> Vec<u8> {
    let mut v = magic.to_vec();
    for d in dims {
        v.extend_from_slice(&d.to_be_bytes());
    }
    v.extend_from_slice(payload);
    v
}

#[test]
fn idx_matches_hand_parse() {
    let dir = tempfile::tempdir().unwrap();
    let images: Vec<u8> = (0..3 * 2 * 3).map(|i| (i * 13 % 256) as u8).collect();
    let img_path = dir.path().join("img.idx");
    let lbl_path = dir.path().join("lbl.idx");
    std::fs::write(&img_path, idx_file([0, 0, 8, 3], &[3, 2, 3], &images)).unwrap();
    std::fs::write(&lbl_path, idx_file([0, 0, 8, 1], &[3], &[2, 0, 1])).unwrap();

    let t = read_idx(&img_path).unwrap();
    assert_eq!(t.dims, vec![3, 2, 3]);
    assert_eq!(t.data, images);
    let ds = read_idx_dataset(&img_path, &lbl_path).unwrap();
    assert_eq!(ds.inputs.shape(), (6, 3));
    assert_eq!(ds.labels, vec![2, 0, 1]);
    assert_eq!(ds.num_classes, 3);
    // Item 1, pixel (row 1, col 2) sits at byte 6 + 1·3 + 2.
    assert_eq!(ds.inputs.get(5, 1), images[11] as f64 / 255.0);

    std::fs::write(&lbl_path, idx_file([0, 0, 8, 1], &[2], &[0, 1])).unwrap();
    assert!(matches!(read_idx_dataset(&img_path, &lbl_path), Err(Error::ShapeMismatch(_))));
}

#[test]
fn csv_report_layout() {
    let data = synth_blobs(50, 3, 2, 0.5, 2).unwrap();
    let model = FcnModel::kaiming_uniform(&[3, 5, 5, 2], &mut Rng::new(3)).unwrap();
    let mut report = analyze(&model, &data.inputs, &AnalysisConfig::default(), &mut Rng::new(0)).unwrap();
    let mut buf = Vec::new();
    write_report_to(&mut buf, &report, ReportFormat::Csv).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], CSV_HEADER.join(","));
    assert_eq!(lines.len(), 1 + 3 + 1);
    assert!(lines[1].starts_with("1,3,5,"));
    assert!(lines[4].starts_with("Total,,,"));
    let total: f64 = lines[4].split(',').nth(4).unwrap().parse().unwrap();
    assert_eq!(total, report.d_r_total);

    report.per_layer.clear();
    let mut buf = Vec::new();
    write_report_to(&mut buf, &report, ReportFormat::Csv).unwrap();
    assert_eq!(String::from_utf8(buf).unwrap().trim_end(), CSV_HEADER.join(","));
}

#[test]
fn json_report_file() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth_blobs(40, 2, 2, 0.5, 2).unwrap();
    let model = FcnModel::kaiming_uniform(&[2, 4, 2], &mut Rng::new(3)).unwrap();
    let cfg = AnalysisConfig {
        rd: RdConfig { include_log_terms: false, ..RdConfig::default() },
        ..AnalysisConfig::default()
    };
    let report = analyze(&model, &data.inputs, &cfg, &mut Rng::new(0)).unwrap();
    let path = dir.path().join("r.json");
    write_report(&path, &report, ReportFormat::Json).unwrap();
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(v["per_layer"].as_array().unwrap().len(), 2);
    assert_eq!(v["d_r_total"].as_f64().unwrap(), report.d_r_total);
    assert_eq!(v["include_log_terms"], false);
    assert!("xml".parse::<ReportFormat>().is_err());
}

fn corpus(target: &str) -> Vec<(String, Vec<u8>)> {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target);
    let mut files: Vec<_> = std::fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| e.unwrap().path())
        .collect();
    files.sort();
    files
        .into_iter()
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect()
}

#[test]
fn fuzz_seeds_replay() {
    let bundles = corpus("read_bundle");
    assert!(!bundles.is_empty());
    for (name, bytes) in &bundles {
        if let Ok(b) = MatrixBundle::from_bytes(bytes) {
            assert_eq!(&b.to_bytes(), bytes, "{name}");
            let _ = b.to_model();
        }
    }
    let model = &bundles.iter().find(|(n, _)| n == "model_2_3_2").unwrap().1;
    assert_eq!(MatrixBundle::from_bytes(model).unwrap().to_model().unwrap().widths(), &[2, 3, 2]);

    for (name, bytes) in corpus("read_idx") {
        if let Ok(t) = IdxTensor::from_bytes(&bytes) {
            assert_eq!(t.to_bytes(), bytes, "{name}");
            let _ = t.to_columns(true);
            let _ = t.labels();
        }
    }
    for (name, bytes) in corpus("parse_synthetic_spec") {
        let parsed = std::str::from_utf8(&bytes).unwrap().parse::<rdim::trainer::SyntheticSpec>();
        assert_eq!(parsed.is_ok(), matches!(name.as_str(), "default" | "spaces" | "zero_spread"), "{name}");
    }
}
