use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ckm_sr::baselines::bicubic_upsample;
use ckm_sr::data::{DatasetManifest, Split};
use ckm_sr::metrics::{evaluate, EvalPair};
use ckm_sr::sampling::downsample;
use ckm_sr::{PixelImage, SamplingSpec};

fn ckm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ckm"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = ckm(args);
    assert!(
        out.status.success(),
        "ckm {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Synthetic 32x32 dataset with an 8 / 4 split; returns the split manifest path.
fn dataset(dir: &Path, size: usize) -> PathBuf {
    let data = dir.join("data");
    let split = dir.join("split");
    ok(&["generate-synthetic", "--scenes", "2", "--transmitters", "6", "--size", &size.to_string(), "--seed", "3", "--out", s(&data)]);
    ok(&["split", "--manifest", s(&data.join("pathloss.manifest")), "--train", "8", "--test", "4", "--out", s(&split)]);
    split.join("split.manifest")
}

#[test]
fn compare_two_methods_table() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = dataset(dir.path(), 32);
    let out = dir.path().join("cmp");
    let stdout = ok(&["compare", "--manifest", s(&manifest), "--methods", "nearest,bicubic", "--out", s(&out)]);
    assert!(stdout.contains("sampled fraction 1/16"));
    let csv = fs::read_to_string(out.join("compare.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "method,psnr,ssim,mse_pixel,rmse_dB");
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("nearest,") && lines[2].starts_with("bicubic,"));
    assert!(lines[1..].iter().all(|l| l.split(',').count() == 5));

    // Same numbers as calling the library directly.
    let m = DatasetManifest::load(&manifest).unwrap();
    let codec = m.codec().unwrap();
    let spec = SamplingSpec::new(4).unwrap();
    let pairs: Vec<EvalPair> = m
        .entries_in(Split::Test)
        .map(|e| {
            let truth = m.load_grid(e, &codec).unwrap();
            EvalPair {
                id: e.transmitter.clone(),
                reconstructed: bicubic_upsample(&downsample(&truth, &spec).unwrap(), 4, -0.5).unwrap(),
                truth,
            }
        })
        .collect();
    let direct = evaluate(&pairs, &codec, false).unwrap().aggregate;
    let fields: Vec<f64> = lines[2].split(',').skip(1).map(|v| v.parse().unwrap()).collect();
    assert_eq!(fields, [direct.psnr, direct.ssim, direct.mse_pixel, direct.rmse_physical]);
}

#[test]
fn factor_sixteen_header() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = dataset(dir.path(), 32);
    let out = dir.path().join("cmp");
    ok(&["compare", "--manifest", s(&manifest), "--factor", "16", "--out", s(&out)]);
    let text = fs::read_to_string(out.join("compare.txt")).unwrap();
    assert!(text.lines().next().unwrap().contains("sampled fraction 1/256"));
}

#[test]
fn documented_errors_exit_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = dataset(dir.path(), 32);
    let out = s(&dir.path().join("x")).to_string();
    // Empty test split.
    let unsplit = dir.path().join("data/pathloss.manifest");
    assert!(!ckm(&["compare", "--manifest", s(&unsplit), "--out", &out]).status.success());
    // srresnet without a checkpoint.
    assert!(!ckm(&["compare", "--manifest", s(&manifest), "--methods", "srresnet", "--out", &out]).status.success());
    // Non power-of-two sweep factor.
    assert!(!ckm(&["sweep", "--manifest", s(&manifest), "--factors", "2,3", "--out", &out]).status.success());
    // Factor that does not divide the map size.
    assert!(!ckm(&["compare", "--manifest", s(&manifest), "--factor", "64", "--out", &out]).status.success());
    // Infeasible split.
    let data = dir.path().join("data/pathloss.manifest");
    assert!(!ckm(&["split", "--manifest", s(&data), "--train", "12", "--test", "1", "--out", &out]).status.success());
}

#[test]
fn sweep_rows_per_method() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = dataset(dir.path(), 32);
    let out = dir.path().join("sweep");
    ok(&["sweep", "--manifest", s(&manifest), "--out", s(&out)]);
    let csv = fs::read_to_string(out.join("sweep.csv")).unwrap();
    for method in ["nearest", "bicubic"] {
        let factors: Vec<&str> = csv
            .lines()
            .filter(|l| l.starts_with(&format!("{method},")))
            .map(|l| l.split(',').nth(1).unwrap())
            .collect();
        assert_eq!(factors, ["2", "4", "8", "16"]);
    }
}

#[test]
fn montage_strip() {
    let dir = tempfile::tempdir().unwrap();
    let truth = dir.path().join("truth.png");
    let recon = dir.path().join("recon.png");
    PixelImage::filled(128, 128, 100).unwrap().save_png(&truth).unwrap();
    PixelImage::filled(128, 128, 90).unwrap().save_png(&recon).unwrap();
    let out = dir.path().join("fig");
    ok(&["montage", "--truth", s(&truth), "--panel", &format!("bicubic={}", s(&recon)), "--out", s(&out)]);
    let fig = PixelImage::load_png(out.join("montage.png")).unwrap();
    assert_eq!((fig.width(), fig.height()), (384, 128));

    let small = dir.path().join("small.png");
    PixelImage::filled(64, 64, 0).unwrap().save_png(&small).unwrap();
    let bad = ckm(&["montage", "--truth", s(&truth), "--panel", &format!("x={}", s(&small)), "--out", s(&out)]);
    assert!(!bad.status.success());
}

#[test]
fn downsample_then_upsample_sizes() {
    let dir = tempfile::tempdir().unwrap();
    let img = dir.path().join("map.png");
    let pixels = (0..128 * 128).map(|i| (i % 251) as u8).collect();
    PixelImage::new(128, 128, pixels).unwrap().save_png(&img).unwrap();
    let lr = dir.path().join("lr");
    ok(&["downsample", "--input", s(&img), "--factor", "16", "--phase", "3,5", "--out", s(&lr)]);
    let small = PixelImage::load_png(lr.join("map_x16.png")).unwrap();
    assert_eq!((small.width(), small.height()), (8, 8));
    let src = PixelImage::load_png(&img).unwrap();
    assert_eq!(small.get(1, 2), src.get(16 + 3, 32 + 5));

    let up = dir.path().join("up");
    ok(&["upsample", "--codec", "ckmimagenet_pathloss", "--method", "nearest", "--factor", "16", "--input", s(&lr.join("map_x16.png")), "--out", s(&up)]);
    let back = PixelImage::load_png(up.join("map_x16_nearest_x16.png")).unwrap();
    assert_eq!((back.width(), back.height()), (128, 128));
    assert_eq!(back.get(31, 47), small.get(1, 2));
    // Upsampling raw images needs a codec.
    assert!(!ckm(&["upsample", "--input", s(&lr.join("map_x16.png")), "--out", s(&up)]).status.success());
}

#[test]
fn seeded_commands_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = dataset(dir.path(), 16);
    let mut logs = Vec::new();
    for run in ["a", "b"] {
        let out = dir.path().join(run);
        ok(&[
            "train", "--manifest", s(&manifest), "--preset", "economy", "--blocks", "1", "--iterations", "4",
            "--batch-size", "4", "--seed", "5", "--out", s(&out),
        ]);
        logs.push(fs::read_to_string(out.join("loss.csv")).unwrap());
        assert!(out.join("model.ckpt").exists());
    }
    assert_eq!(logs[0], logs[1]);
    assert_eq!(logs[0].lines().next().unwrap(), "iteration,epoch,loss");
    assert_eq!(logs[0].lines().count(), 5);

    // The trained model plugs into compare at its own factor only.
    let ckpt = dir.path().join("a/model.ckpt");
    let out = dir.path().join("cmp");
    ok(&["compare", "--manifest", s(&manifest), "--methods", "bicubic,srresnet", "--checkpoint", s(&ckpt), "--out", s(&out)]);
    assert_eq!(fs::read_to_string(out.join("compare.csv")).unwrap().lines().count(), 3);
    assert!(!ckm(&["compare", "--manifest", s(&manifest), "--factor", "2", "--methods", "srresnet", "--checkpoint", s(&ckpt), "--out", s(&out)]).status.success());

    let g1 = dir.path().join("g1");
    let g2 = dir.path().join("g2");
    for g in [&g1, &g2] {
        ok(&["generate-synthetic", "--scenes", "1", "--transmitters", "2", "--size", "16", "--seed", "9", "--out", s(g)]);
    }
    for f in ["pathloss/000_00.png", "aoa/000_01.png"] {
        assert_eq!(fs::read(g1.join(f)).unwrap(), fs::read(g2.join(f)).unwrap());
    }
}

#[test]
fn ingest_radiomapseer_layout() {
    let dir = tempfile::tempdir().unwrap();
    let dpm = dir.path().join("RadioMapSeer/gain/DPM");
    fs::create_dir_all(&dpm).unwrap();
    for name in ["0_0", "0_1", "1_0"] {
        PixelImage::filled(16, 16, 7).unwrap().save_png(dpm.join(format!("{name}.png"))).unwrap();
    }
    let out = dir.path().join("m");
    ok(&["ingest", "--root", s(&dir.path().join("RadioMapSeer")), "--layout", "radiomapseer-dpm", "--out", s(&out)]);
    let m = DatasetManifest::load(out.join("radiomapseer-dpm.manifest")).unwrap();
    assert_eq!(m.codec, "radiomapseer_pathloss");
    assert_eq!(m.entries.len(), 3);
    let empty = dir.path().join("empty");
    fs::create_dir_all(&empty).unwrap();
    assert!(!ckm(&["ingest", "--root", s(&empty), "--layout", "ckmimagenet-pathloss", "--out", s(&out)]).status.success());
}
