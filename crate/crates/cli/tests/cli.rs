mod common;

use common::{code, fixture, p, soba, stdout, H, W};
use serde_json::Value;

fn json(out: &std::process::Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", stdout(out)))
}

#[test]
fn gt_replay_scores_perfectly() {
    let dir = tempfile::tempdir().unwrap();
    let m = fixture(dir.path(), 4);
    let report = dir.path().join("report.json");
    let out = soba(&["eval", "--gt", p(&m), "--pred", p(&m), "--out", p(&report), "--json"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    for mode in ["segm", "bbox"] {
        for key in ["soap", "soap50", "soap75", "association_ap", "instance_ap"] {
            assert_eq!(v[mode][key].as_f64(), Some(100.0), "{mode}.{key}");
        }
        assert_eq!(v[mode]["per_threshold"].as_array().unwrap().len(), 10);
    }
    let written: Value = serde_json::from_slice(&std::fs::read(&report).unwrap()).unwrap();
    assert_eq!(written, v);
    // Fixed four-decimal formatting.
    assert!(String::from_utf8_lossy(&out.stdout).contains("100.0000"));
}

#[test]
fn summary_names_every_metric() {
    let dir = tempfile::tempdir().unwrap();
    let m = fixture(dir.path(), 2);
    let out = soba(&["eval", "--gt", p(&m), "--pred", p(&m), "--mode", "segm"]);
    assert_eq!(code(&out), 0);
    let s = stdout(&out);
    assert!(s.contains("SOAP 100.0"), "{s}");
    assert!(!s.contains("bbox"), "{s}");
}

#[test]
fn validate_flags_corruption_with_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let m = fixture(dir.path(), 2);
    assert_eq!(code(&soba(&["validate", "--manifest", p(&m)])), 0);

    let mut v: Value = serde_json::from_slice(&std::fs::read(&m).unwrap()).unwrap();
    v["instances"][0]["bbox"] = serde_json::json!([0.0, 0.0, 3.0, 3.0]);
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, serde_json::to_vec(&v).unwrap()).unwrap();
    let out = soba(&["validate", "--manifest", p(&bad), "--json"]);
    assert_eq!(code(&out), 2);
    let report = json(&out);
    let violations = report["violations"].as_array().unwrap();
    assert_eq!(violations.len(), 1);
    assert_eq!(violations[0]["kind"], "box_mismatch");
    assert_eq!(violations[0]["record"], "instance 1");
}

#[test]
fn exit_codes() {
    assert_eq!(code(&soba(&["--help"])), 0);
    assert_eq!(code(&soba(&["--version"])), 0);
    assert_eq!(code(&soba(&[])), 1);
    assert_eq!(code(&soba(&["eval", "--gt"])), 1);
    assert_eq!(code(&soba(&["augment", "--in", "x", "--out", "y", "--prob", "1.5"])), 1);
    assert_eq!(code(&soba(&["--threads", "0", "loss-check"])), 1);

    let out = soba(&["validate", "--manifest", "/nonexistent/manifest.json"]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("/nonexistent/manifest.json"));

    let dir = tempfile::tempdir().unwrap();
    let m = fixture(dir.path(), 1);
    let junk = dir.path().join("junk.json");
    std::fs::write(&junk, br#"{"format":"something-else"}"#).unwrap();
    let out = soba(&["eval", "--gt", p(&m), "--pred", p(&junk)]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown format"));
}

#[test]
fn stats_totals_over_manifests() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    // 3 pairs on even images, 2 on odd ones.
    let ma = fixture(a.path(), 4);
    let mb = fixture(b.path(), 1);
    let out = soba(&["stats", "--manifest", p(&ma), p(&mb)]);
    assert_eq!(code(&out), 0);
    let s = stdout(&out);
    assert!(s.contains("4 images / 10 pairs"), "{s}");
    assert!(s.contains("total: 5 images / 12 pairs (2.40 pairs per image)"), "{s}");
}

#[test]
fn augment_is_thread_count_invariant_and_valid() {
    let dir = tempfile::tempdir().unwrap();
    let m = fixture(dir.path(), 6);
    let mut outputs = Vec::new();
    for threads in ["1", "8"] {
        let out_dir = dir.path().join(format!("aug{threads}"));
        let out = soba(&[
            "--threads",
            threads,
            "augment",
            "--in",
            p(&m),
            "--out",
            p(&out_dir),
            "--strategy",
            "full",
            "--seed",
            "11",
            "--prob",
            "1",
        ]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        let s = stdout(&out);
        assert!(
            s.ends_with(&format!("wrote {}\n", out_dir.join("manifest.json").display())),
            "{s}"
        );
        assert!(s.contains(" 0 violations") && !s.starts_with("0 pastes"), "{s}");
        let mut files: Vec<_> = std::fs::read_dir(&out_dir)
            .unwrap()
            .map(|e| e.unwrap().path())
            .collect();
        files.sort();
        let contents: Vec<_> = files
            .iter()
            .map(|f| (f.file_name().unwrap().to_owned(), std::fs::read(f).unwrap()))
            .collect();
        let aug = out_dir.join("manifest.json");
        assert_eq!(code(&soba(&["validate", "--manifest", p(&aug)])), 0);
        outputs.push(contents);
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn augment_without_selection_copies_dataset() {
    let dir = tempfile::tempdir().unwrap();
    let m = fixture(dir.path(), 3);
    let out_dir = dir.path().join("aug");
    let out = soba(&["augment", "--in", p(&m), "--out", p(&out_dir), "--prob", "0", "--json"]);
    assert_eq!(code(&out), 0);
    let v = json(&out);
    assert_eq!(v["pastes"], 0);
    assert_eq!(v["pairs_before"], v["pairs_after"]);
    for i in 1..=3 {
        let name = format!("img{i:03}.png");
        assert_eq!(
            std::fs::read(dir.path().join(&name)).unwrap(),
            std::fs::read(out_dir.join(&name)).unwrap()
        );
    }
}

#[test]
fn loss_check_passes() {
    let out = soba(&["loss-check", "--seed", "3"]);
    assert_eq!(code(&out), 0, "{}", stdout(&out));
    let s = stdout(&out);
    assert!(s.contains("PASS") && !s.contains("FAIL"), "{s}");
}

#[test]
fn light_points_from_shadow_to_object() {
    let dir = tempfile::tempdir().unwrap();
    let m = fixture(dir.path(), 2);
    let out = soba(&["light", "--pred", p(&m), "--image-id", "2", "--json"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    // Object box 6x10 at (x, y); shadow box 9x3 at (x + 2, y + 10).
    let expected = (-6.5f64).atan2(-3.5).to_degrees().rem_euclid(360.0);
    assert_eq!(v["pairs"].as_array().unwrap().len(), 3);
    for pair in v["pairs"].as_array().unwrap() {
        assert!((pair["light"]["angle_deg"].as_f64().unwrap() - expected).abs() < 1e-3);
    }
    assert!((v["aggregate"]["angle_deg"].as_f64().unwrap() - expected).abs() < 1e-3);
    assert_eq!(v["aggregate"]["circular_std_deg"].as_f64(), Some(0.0));

    assert_eq!(code(&soba(&["light", "--pred", p(&m), "--image-id", "9"])), 2);
}

fn gray(path: &std::path::Path) -> image::GrayImage {
    image::open(path).unwrap().to_luma8()
}

#[test]
fn remove_writes_mask_and_fills() {
    let dir = tempfile::tempdir().unwrap();
    let m = fixture(dir.path(), 1);
    let mask = dir.path().join("mask.png");
    let filled = dir.path().join("filled.png");
    let out = soba(&[
        "edit",
        "remove",
        "--manifest",
        p(&m),
        "--assoc",
        "1",
        "--out-mask",
        p(&mask),
        "--out-image",
        p(&filled),
        "--json",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let mask_img = gray(&mask);
    let area = mask_img.pixels().filter(|p| p.0[0] == 255).count();
    assert_eq!(area, 6 * 10 + 9 * 3);
    assert!(mask_img.pixels().all(|p| p.0[0] == 0 || p.0[0] == 255));
    assert_eq!(json(&out)["mask_area"], area);

    let src = image::open(dir.path().join("img001.png")).unwrap().to_rgb8();
    let dst = image::open(&filled).unwrap().to_rgb8();
    for (x, y, px) in src.enumerate_pixels() {
        if mask_img.get_pixel(x, y).0[0] == 0 {
            assert_eq!(dst.get_pixel(x, y), px);
        }
    }

    let dilated = dir.path().join("dilated.png");
    let out = soba(&[
        "edit",
        "remove",
        "--manifest",
        p(&m),
        "--assoc",
        "1",
        "--dilate",
        "2",
        "--out-mask",
        p(&dilated),
    ]);
    assert_eq!(code(&out), 0);
    assert!(gray(&dilated).pixels().filter(|p| p.0[0] == 255).count() > area);

    assert_eq!(
        code(&soba(&[
            "edit",
            "remove",
            "--manifest",
            p(&m),
            "--assoc",
            "99",
            "--out-mask",
            p(&mask)
        ])),
        2
    );
}

#[test]
fn remove_runs_external_inpainter() {
    let dir = tempfile::tempdir().unwrap();
    let m = fixture(dir.path(), 1);
    let mask = dir.path().join("mask.png");
    let filled = dir.path().join("filled.png");
    let out = soba(&[
        "edit",
        "remove",
        "--manifest",
        p(&m),
        "--assoc",
        "2",
        "--out-mask",
        p(&mask),
        "--out-image",
        p(&filled),
        "--inpaint-cmd",
        "test -f {mask} && cp {image} {output}",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(
        std::fs::read(&filled).unwrap(),
        std::fs::read(dir.path().join("img001.png")).unwrap()
    );

    let out = soba(&[
        "edit",
        "remove",
        "--manifest",
        p(&m),
        "--assoc",
        "2",
        "--out-mask",
        p(&mask),
        "--out-image",
        p(&filled),
        "--inpaint-cmd",
        "false",
    ]);
    assert_eq!(code(&out), 2);
}

#[test]
fn transfer_with_matching_light_is_a_translation() {
    let dir = tempfile::tempdir().unwrap();
    let m = fixture(dir.path(), 2);
    let result = dir.path().join("moved.png");
    let out = soba(&[
        "edit",
        "transfer",
        "--src",
        p(&m),
        "--src-assoc",
        "1",
        "--dst",
        p(&m),
        "--dst-image-id",
        "2",
        "--at",
        "30,40",
        "--out-image",
        p(&result),
        "--json",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    assert_eq!(v["rotation_deg"].as_f64(), Some(0.0));
    assert_eq!(v["resampled"], false);
    assert_eq!(v["object"]["counts"].as_array().map(|_| ()), Some(()));
    let img = image::open(&result).unwrap().to_rgb8();
    assert_eq!((img.width(), img.height()), (W, H));
    // Source object colour from image 1, bottom edge resting on y = 40.
    assert_eq!(img.get_pixel(30, 39).0, [200, 30, 40]);
    assert_ne!(img.get_pixel(30, 41).0, [200, 30, 40]);
}

#[test]
fn transfer_rotates_shadow_to_destination_light() {
    let dir = tempfile::tempdir().unwrap();
    let m = fixture(dir.path(), 2);
    let result = dir.path().join("moved.png");
    let out = soba(&[
        "edit",
        "transfer",
        "--src",
        p(&m),
        "--src-assoc",
        "1",
        "--dst",
        p(&m),
        "--dst-image-id",
        "2",
        "--at",
        "30,40",
        "--dst-light-angle",
        "270",
        "--scale",
        "0.6",
        "--out-image",
        p(&result),
        "--json",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    let src_angle = (-6.5f64).atan2(-3.5).to_degrees().rem_euclid(360.0);
    let rotation = v["rotation_deg"].as_f64().unwrap();
    assert!(
        ((src_angle + rotation).rem_euclid(360.0) - 270.0).abs() < 1e-3,
        "{rotation}"
    );
    assert_eq!(v["resampled"], true);

    let bad_scale = soba(&[
        "edit",
        "transfer",
        "--src",
        p(&m),
        "--src-assoc",
        "1",
        "--dst",
        p(&m),
        "--dst-image-id",
        "2",
        "--at",
        "30,40",
        "--scale",
        "0",
        "--out-image",
        p(&result),
    ]);
    assert_eq!(code(&bad_scale), 1);
    let missing = soba(&[
        "edit",
        "transfer",
        "--src",
        p(&m),
        "--src-assoc",
        "1",
        "--dst",
        p(&m),
        "--dst-image-id",
        "7",
        "--at",
        "30,40",
        "--out-image",
        p(&result),
    ]);
    assert_eq!(code(&missing), 2);
}
