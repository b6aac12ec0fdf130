use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, ensure, Context, Result};
use rayon::prelude::*;

use ckm_sr::atomic::write_bytes;
use ckm_sr::baselines::{bicubic_upsample, nn_resample, nn_upsample};
use ckm_sr::checkpoint::{load_checkpoint, save_checkpoint};
use ckm_sr::data::{
    generate_dataset, ingest, split, write_dataset, DatasetManifest, Disjointness, Layout, Split,
    SyntheticDatasetSpec,
};
use ckm_sr::metrics::{evaluate, EvalPair, MetricsRecord, MetricsTable};
use ckm_sr::montage::montage;
use ckm_sr::sampling::{downsample, downsample_values};
use ckm_sr::training::{infer, train, LossRecord, TrainConfig, TrainObserver, TrainingSet};
use ckm_sr::{
    decode_image, encode_grid, lookup_codec, ChannelCodec, CkmGrid, PixelImage, SamplingSpec, SrResNet,
    SrResNetConfig,
};

use crate::{Cli, Command, DisjointnessArg, GlobalArgs, LayoutArg, Method, Preset};

pub fn run(cli: Cli) -> Result<()> {
    let g = &cli.global;
    match cli.command {
        Command::Ingest { root, layout, out } => cmd_ingest(&root, layout, &out),
        Command::Split { manifest, train, test, disjoint, out } => {
            cmd_split(g, &manifest, train, test, disjoint, &out)
        }
        Command::GenerateSynthetic { scenes, transmitters, size, buildings, exponent, reference_loss, wall_loss, out } => {
            let spec = SyntheticDatasetSpec {
                scenes,
                transmitters_per_scene: transmitters,
                width: size,
                height: size,
                buildings_per_scene: buildings,
                exponent,
                reference_loss,
                wall_loss,
                seed: g.seed,
            };
            cmd_generate(&spec, &out)
        }
        Command::Downsample { input, phase, out } => cmd_downsample(g, &input, phase, &out),
        Command::Upsample { input, method, checkpoint, out } => {
            cmd_upsample(g, &input, method, checkpoint.as_deref(), &out)
        }
        Command::Train { manifest, iterations, batch_size, lr, preset, blocks, checkpoint_every, out } => {
            let cfg = TrainConfig {
                batch_size,
                iterations,
                learning_rate: lr,
                upscale_factor: g.factor,
                seed: g.seed,
                checkpoint_interval: checkpoint_every,
                ..TrainConfig::default()
            };
            cmd_train(g, &manifest, &cfg, preset, blocks, &out)
        }
        Command::Evaluate { truth, reconstructed, mask_buildings, out } => {
            cmd_evaluate(g, &truth, &reconstructed, mask_buildings, &out)
        }
        Command::Compare { manifest, methods, checkpoint, mask_buildings, out } => {
            cmd_compare(g, &manifest, &methods, checkpoint.as_deref(), mask_buildings, &out)
        }
        Command::Sweep { manifest, factors, methods, checkpoints, mask_buildings, out } => {
            cmd_sweep(g, &manifest, &factors, &methods, &checkpoints, mask_buildings, &out)
        }
        Command::Montage { truth, panels, out } => cmd_montage(g, &truth, &panels, &out),
    }
}

fn out_dir(out: &Path) -> Result<()> {
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    write_bytes(path, text.as_bytes())?;
    Ok(())
}

fn resolve_codec(g: &GlobalArgs, manifest: Option<&DatasetManifest>) -> Result<ChannelCodec> {
    match (&g.codec, manifest) {
        (Some(name), _) => Ok(lookup_codec(name)?),
        (None, Some(m)) => Ok(m.codec()?),
        (None, None) => bail!("--codec is required for this command"),
    }
}

fn stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "image".into())
}

fn load_model(path: &Path, factor: usize) -> Result<SrResNet<f32>> {
    let (model, header) =
        load_checkpoint::<f32>(path).with_context(|| format!("loading checkpoint {}", path.display()))?;
    ensure!(
        model.upscale_factor() == factor,
        "checkpoint {} was trained for factor {}, but --factor is {factor}",
        path.display(),
        header.config.upscale_factor
    );
    Ok(model)
}

fn reconstruct(
    method: Method,
    sparse: &CkmGrid,
    k: usize,
    model: Option<&SrResNet<f32>>,
    codec: &ChannelCodec,
) -> Result<CkmGrid> {
    Ok(match method {
        Method::Nearest => nn_upsample(sparse, k)?,
        Method::Bicubic => bicubic_upsample(sparse, k, -0.5)?,
        Method::Srresnet => {
            let model = model.ok_or_else(|| anyhow!("srresnet needs --checkpoint"))?;
            infer(model, sparse, codec)?
        }
    })
}

fn cmd_ingest(root: &Path, layout: LayoutArg, out: &Path) -> Result<()> {
    let layout = match layout {
        LayoutArg::RadiomapseerDpm => Layout::RadioMapSeerDpm,
        LayoutArg::CkmimagenetPathloss => Layout::CkmImageNetPathLoss,
        LayoutArg::CkmimagenetAoa => Layout::CkmImageNetAoA,
    };
    let manifest = ingest(root, layout)?;
    out_dir(out)?;
    let path = out.join(format!("{}.manifest", layout.name()));
    manifest.save(&path)?;
    println!(
        "{} images of {}x{} ({}) -> {}",
        manifest.entries.len(),
        manifest.width,
        manifest.height,
        manifest.codec,
        path.display()
    );
    Ok(())
}

fn cmd_split(
    g: &GlobalArgs,
    manifest: &Path,
    train: usize,
    test: usize,
    disjoint: DisjointnessArg,
    out: &Path,
) -> Result<()> {
    let m = DatasetManifest::load(manifest)?;
    let disjointness = match disjoint {
        DisjointnessArg::Transmitter => Disjointness::ByTransmitter,
        DisjointnessArg::Scene => Disjointness::ByScene,
        DisjointnessArg::Random => Disjointness::Random,
    };
    let s = split(&m, train, test, disjointness, g.seed)?;
    out_dir(out)?;
    let path = out.join("split.manifest");
    s.save(&path)?;
    println!(
        "{} train / {} test -> {}",
        s.count(Split::Train),
        s.count(Split::Test),
        path.display()
    );
    Ok(())
}

fn cmd_generate(spec: &SyntheticDatasetSpec, out: &Path) -> Result<()> {
    let maps = generate_dataset(spec)?;
    out_dir(out)?;
    let (pl, aoa) = write_dataset(&maps, out)?;
    println!(
        "{} synthetic maps of {}x{} -> {} ({} and {} manifests)",
        maps.len(),
        spec.width,
        spec.height,
        out.display(),
        pl.name,
        aoa.name
    );
    Ok(())
}

fn cmd_downsample(g: &GlobalArgs, inputs: &[PathBuf], (row, col): (usize, usize), out: &Path) -> Result<()> {
    let spec = SamplingSpec::with_phase(g.factor, row, col)?;
    out_dir(out)?;
    inputs.par_iter().try_for_each(|input| -> Result<()> {
        let img = PixelImage::load_png(input)?;
        let (lw, lh) = spec.check_dims(img.width(), img.height())?;
        let pixels = downsample_values(img.pixels(), img.width(), img.height(), &spec)?;
        let path = out.join(format!("{}_x{}.png", stem(input), g.factor));
        PixelImage::new(lw, lh, pixels)?.save_png(&path)?;
        Ok(())
    })?;
    println!("downsampled {} images by {} -> {}", inputs.len(), g.factor, out.display());
    Ok(())
}

fn cmd_upsample(
    g: &GlobalArgs,
    inputs: &[PathBuf],
    method: Method,
    checkpoint: Option<&Path>,
    out: &Path,
) -> Result<()> {
    let codec = resolve_codec(g, None)?;
    let model = match (method, checkpoint) {
        (Method::Srresnet, None) => bail!("method srresnet needs --checkpoint"),
        (Method::Srresnet, Some(p)) => Some(load_model(p, g.factor)?),
        _ => None,
    };
    out_dir(out)?;
    inputs.par_iter().try_for_each(|input| -> Result<()> {
        let sparse = decode_image(&PixelImage::load_png(input)?, &codec);
        let up = reconstruct(method, &sparse, g.factor, model.as_ref(), &codec)?;
        let path = out.join(format!("{}_{}_x{}.png", stem(input), method.name(), g.factor));
        encode_grid(&up, &codec)?.save_png(&path)?;
        Ok(())
    })?;
    println!("upsampled {} images with {} -> {}", inputs.len(), method.name(), out.display());
    Ok(())
}

struct TrainLog<'a> {
    dir: &'a Path,
    csv: String,
    every: usize,
}

impl TrainObserver<f32> for TrainLog<'_> {
    fn on_step(&mut self, r: &LossRecord) -> ckm_sr::Result<()> {
        let _ = writeln!(self.csv, "{},{},{}", r.iteration, r.epoch, r.loss);
        if r.iteration % self.every == 0 {
            eprintln!("iteration {:>7}  epoch {:>4}  loss {:.6e}", r.iteration, r.epoch, r.loss);
        }
        Ok(())
    }

    fn on_checkpoint(&mut self, iteration: usize, model: &SrResNet<f32>) -> ckm_sr::Result<()> {
        let dir = self.dir.join("checkpoints");
        fs::create_dir_all(&dir).map_err(|e| ckm_sr::Error::Io { path: dir.clone(), source: e })?;
        save_checkpoint(model, iteration as u64, dir.join(format!("iter_{iteration:07}.ckpt")))
    }
}

fn cmd_train(
    g: &GlobalArgs,
    manifest: &Path,
    cfg: &TrainConfig,
    preset: Preset,
    blocks: Option<usize>,
    out: &Path,
) -> Result<()> {
    let m = DatasetManifest::load(manifest)?;
    let codec = resolve_codec(g, Some(&m))?;
    let entries: Vec<_> = m.entries_in(Split::Train).collect();
    ensure!(!entries.is_empty(), "{} has no train entries; run `split` first", manifest.display());
    let grids = entries
        .par_iter()
        .map(|e| m.load_grid(e, &codec))
        .collect::<ckm_sr::Result<Vec<_>>>()?;
    let data = TrainingSet::from_grids(&grids)?;

    let mut model_cfg = match preset {
        Preset::Reference => SrResNetConfig::reference(g.factor),
        Preset::Economy => SrResNetConfig::economy(g.factor),
    };
    if let Some(b) = blocks {
        model_cfg.num_residual_blocks = b;
    }
    let mut model = SrResNet::<f32>::build(&model_cfg, g.seed)?;
    out_dir(out)?;
    let run = serde_json::json!({ "model": model_cfg, "training": cfg, "codec": codec.name, "manifest": manifest });
    write_text(&out.join("config.json"), &serde_json::to_string_pretty(&run)?)?;

    let mut log = TrainLog {
        dir: out,
        csv: "iteration,epoch,loss\n".into(),
        every: (cfg.iterations / 50).max(1),
    };
    let report = train(&mut model, &data, cfg, &mut log)?;
    write_text(&out.join("loss.csv"), &log.csv)?;
    let final_iter = report.history.last().map_or(0, |r| r.iteration);
    save_checkpoint(&model, final_iter as u64, out.join("model.ckpt"))?;
    println!(
        "trained {} parameters for {} updates ({} epochs of {}); final loss {:.6e} -> {}",
        model.count_parameters(),
        final_iter,
        report.schedule.epochs,
        report.schedule.iterations_per_epoch,
        report.history.last().map_or(f64::NAN, |r| r.loss),
        out.join("model.ckpt").display()
    );
    Ok(())
}

fn records_csv(unit: &str, rows: &[(String, MetricsRecord)]) -> String {
    let mut s = format!("method,id,psnr,ssim,mse_pixel,rmse_{unit}\n");
    for (method, r) in rows {
        let _ = writeln!(s, "{method},{},{},{},{},{}", r.id, r.psnr, r.ssim, r.mse_pixel, r.rmse_physical);
    }
    s
}

fn png_files(dir: &Path) -> Result<BTreeMap<String, PathBuf>> {
    let mut files = BTreeMap::new();
    for entry in fs::read_dir(dir).with_context(|| format!("reading {}", dir.display()))? {
        let path = entry?.path();
        if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("png")) {
            files.insert(stem(&path), path);
        }
    }
    Ok(files)
}

fn cmd_evaluate(g: &GlobalArgs, truth: &Path, recon: &Path, mask_buildings: bool, out: &Path) -> Result<()> {
    let codec = resolve_codec(g, None)?;
    let truths = png_files(truth)?;
    let recons = png_files(recon)?;
    ensure!(!truths.is_empty(), "no PNG images in {}", truth.display());
    let pairs = truths
        .par_iter()
        .map(|(name, t)| -> Result<EvalPair> {
            let r = recons
                .get(name)
                .ok_or_else(|| anyhow!("no reconstruction named {name}.png in {}", recon.display()))?;
            Ok(EvalPair {
                id: name.clone(),
                reconstructed: decode_image(&PixelImage::load_png(r)?, &codec),
                truth: decode_image(&PixelImage::load_png(t)?, &codec),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let report = evaluate(&pairs, &codec, mask_buildings)?;
    out_dir(out)?;
    let unit = codec.kind.unit();
    let rows: Vec<_> = report.records.iter().map(|r| ("given".to_string(), r.clone())).collect();
    write_text(&out.join("evaluate_images.csv"), &records_csv(unit, &rows))?;
    let mut table = MetricsTable::new(format!("{} image pairs ({})", pairs.len(), codec.name), unit);
    table.push("given", report.aggregate);
    write_text(&out.join("evaluate.csv"), &table.to_csv())?;
    write_text(&out.join("evaluate.txt"), &table.to_text())?;
    print!("{}", table.to_text());
    Ok(())
}

fn load_test_grids(m: &DatasetManifest, codec: &ChannelCodec) -> Result<Vec<(String, CkmGrid)>> {
    let entries: Vec<_> = m.entries_in(Split::Test).collect();
    ensure!(!entries.is_empty(), "manifest {} has an empty test split", m.name);
    entries
        .par_iter()
        .map(|e| Ok((e.transmitter.clone(), m.load_grid(e, codec)?)))
        .collect()
}

fn score(
    method: Method,
    truths: &[(String, CkmGrid)],
    k: usize,
    model: Option<&SrResNet<f32>>,
    codec: &ChannelCodec,
    mask_buildings: bool,
) -> Result<ckm_sr::metrics::MetricsReport> {
    let spec = SamplingSpec::new(k)?;
    let pairs = truths
        .par_iter()
        .map(|(id, truth)| -> Result<EvalPair> {
            let sparse = downsample(truth, &spec)?;
            Ok(EvalPair {
                id: id.clone(),
                reconstructed: reconstruct(method, &sparse, k, model, codec)?,
                truth: truth.clone(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(evaluate(&pairs, codec, mask_buildings)?)
}

fn cmd_compare(
    g: &GlobalArgs,
    manifest: &Path,
    methods: &[Method],
    checkpoint: Option<&Path>,
    mask_buildings: bool,
    out: &Path,
) -> Result<()> {
    ensure!(!methods.is_empty(), "no methods given");
    let m = DatasetManifest::load(manifest)?;
    let codec = resolve_codec(g, Some(&m))?;
    let k = g.factor;
    let spec = SamplingSpec::new(k)?;
    spec.check_dims(m.width, m.height)?;
    let model = if methods.contains(&Method::Srresnet) {
        let path = checkpoint.ok_or_else(|| anyhow!("method srresnet needs --checkpoint"))?;
        Some(load_model(path, k)?)
    } else {
        None
    };
    let truths = load_test_grids(&m, &codec)?;

    let (num, den) = spec.sampled_fraction();
    let unit = codec.kind.unit();
    let mut table = MetricsTable::new(
        format!(
            "{}: {k}x super-resolution, sampled fraction {num}/{den}, {} test maps",
            m.name,
            truths.len()
        ),
        unit,
    );
    let mut rows = Vec::new();
    for &method in methods {
        let report = score(method, &truths, k, model.as_ref(), &codec, mask_buildings)?;
        rows.extend(report.records.into_iter().map(|r| (method.name().to_string(), r)));
        table.push(method.name(), report.aggregate);
    }
    out_dir(out)?;
    write_text(&out.join("compare.csv"), &table.to_csv())?;
    write_text(&out.join("compare.txt"), &table.to_text())?;
    write_text(&out.join("compare_images.csv"), &records_csv(unit, &rows))?;
    print!("{}", table.to_text());
    Ok(())
}

fn parse_checkpoints(specs: &[String]) -> Result<BTreeMap<usize, PathBuf>> {
    specs
        .iter()
        .map(|s| {
            let (k, p) = s
                .split_once('=')
                .ok_or_else(|| anyhow!("checkpoint `{s}` must look like FACTOR=PATH"))?;
            Ok((k.parse().with_context(|| format!("bad factor in `{s}`"))?, PathBuf::from(p)))
        })
        .collect()
}

fn cmd_sweep(
    g: &GlobalArgs,
    manifest: &Path,
    factors: &[usize],
    methods: &[Method],
    checkpoints: &[String],
    mask_buildings: bool,
    out: &Path,
) -> Result<()> {
    ensure!(!factors.is_empty() && !methods.is_empty(), "need at least one factor and one method");
    let m = DatasetManifest::load(manifest)?;
    let codec = resolve_codec(g, Some(&m))?;
    for &k in factors {
        ensure!(k >= 2 && k.is_power_of_two(), "factor {k} rejected: factors must be powers of two");
        SamplingSpec::new(k)?.check_dims(m.width, m.height)?;
    }
    let checkpoints = parse_checkpoints(checkpoints)?;
    let truths = load_test_grids(&m, &codec)?;
    let unit = codec.kind.unit();

    let mut csv = format!("method,factor,sampled_fraction,rmse_{unit}\n");
    let mut grid: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for &method in methods {
        for &k in factors {
            let model = match method {
                Method::Srresnet => {
                    let p = checkpoints
                        .get(&k)
                        .ok_or_else(|| anyhow!("srresnet at factor {k} needs --checkpoint {k}=PATH"))?;
                    Some(load_model(p, k)?)
                }
                _ => None,
            };
            let rmse = score(method, &truths, k, model.as_ref(), &codec, mask_buildings)?
                .aggregate
                .rmse_physical;
            let _ = writeln!(csv, "{},{k},1/{},{rmse}", method.name(), k * k);
            grid.entry(k).or_default().push(rmse);
        }
    }
    let mut text = format!("RMSE ({unit}) by factor, {} test maps\n{:>8}", truths.len(), "factor");
    for method in methods {
        let _ = write!(text, " {:>10}", method.name());
    }
    text.push('\n');
    for (k, row) in &grid {
        let _ = write!(text, "{k:>8}");
        for v in row {
            let _ = write!(text, " {v:>10.3}");
        }
        text.push('\n');
    }
    out_dir(out)?;
    write_text(&out.join("sweep.csv"), &csv)?;
    write_text(&out.join("sweep.txt"), &text)?;
    print!("{text}");
    Ok(())
}

fn cmd_montage(g: &GlobalArgs, truth: &Path, panels: &[String], out: &Path) -> Result<()> {
    let truth_img = PixelImage::load_png(truth)?;
    let (w, h) = (truth_img.width(), truth_img.height());
    let spec = SamplingSpec::new(g.factor)?;
    let (lw, lh) = spec.check_dims(w, h)?;
    let low = downsample_values(truth_img.pixels(), w, h, &spec)?;
    let lr = PixelImage::new(w, h, nn_resample(&low, lw, lh, g.factor))?;

    let mut strip = vec![(format!("LR x{}", g.factor), lr)];
    for p in panels {
        let (label, path) = p
            .split_once('=')
            .ok_or_else(|| anyhow!("panel `{p}` must look like LABEL=PATH"))?;
        strip.push((label.to_string(), PixelImage::load_png(path)?));
    }
    strip.push(("Truth".to_string(), truth_img));
    let figure = montage(&strip)?;
    out_dir(out)?;
    let path = out.join("montage.png");
    figure.save_png(&path)?;
    println!("{} panels -> {}", strip.len(), path.display());
    Ok(())
}
