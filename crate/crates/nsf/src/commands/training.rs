use std::path::PathBuf;

use nsf_core::stats::theoretical_variance_map;
use nsf_core::train::{EpochRecord, Sample};
use nsf_core::{
    gen_clean, make_training_pair, metrics::metrics, sample_noise, train as fit, usr_train, wiener_oracle, ConvLayer,
    ConvNetModel, DegradationSpec, ImageGrid, LossSpec, NoiseSpec, Optimizer, RngSeed, SpectralDiagonalModel,
    TargetMode, TrainConfig, UsrConfig,
};

use super::analysis::read_penalty;
use super::{flag, list_images, read_grid, read_image_out, spectrum_energy, Grid, ImageOut};
use crate::config::{split_list, Resolver};
use crate::error::{CliError, Result};
use crate::image_io::{read_image, write_image};
use crate::model_io::SavedModel;
use crate::noise_config::NoiseDesc;
use crate::parallel::map_ordered;
use crate::report::{curve_svg, num, OutDir};

type Job = Box<dyn FnOnce(&OutDir) -> Result<Vec<String>>>;

/// Offset between the seed of a clean image and the seed of its noise draws.
const NOISE_SEED_OFFSET: u64 = 1000;

/// Energy of the `k = 0` row without the DC term.
pub fn k0_energy(x: &ImageGrid) -> f64 {
    spectrum_energy(x, |k, l| k == 0 && l != 0)
}

/// Energy of every row but `k = 0`.
pub fn off_row_energy(x: &ImageGrid) -> f64 {
    spectrum_energy(x, |k, _| k != 0)
}

fn parse_layers(text: &str) -> std::result::Result<Vec<ConvLayer>, String> {
    split_list(text)
        .map(|item| {
            let parts: Vec<&str> = item.split(':').map(str::trim).collect();
            let [k, i, o] = parts[..] else {
                return Err(format!("expected `kernel:in:out`, got `{item}`"));
            };
            let n = |s: &str| s.parse::<usize>().map_err(|e| format!("`{item}`: {e}"));
            Ok(ConvLayer::new(n(k)?, n(i)?, n(o)?))
        })
        .collect()
}

const DEFAULT_LAYERS: &str = "3:1:8, 3:8:8, 3:8:1";

fn read_convnet(r: &mut Resolver) -> Result<ConvNetModel> {
    let text: String = r.get("train", "layers", DEFAULT_LAYERS.to_string())?;
    let layers = parse_layers(&text).map_err(|m| CliError::config(r.line_of("train", "layers"), m))?;
    let init_seed: u64 = r.get("train", "init_seed", 0u64)?;
    let zero_last = flag(r, "train", "zero_last", false)?;
    Ok(ConvNetModel::init(&layers, RngSeed::new(init_seed, 0), zero_last)?)
}

fn read_optimizer(r: &mut Resolver) -> Result<Optimizer> {
    let kind: String = r.get("train", "optimizer", "adam".to_string())?;
    let lr: f64 = r.get("train", "lr", 1e-3)?;
    let opt = match kind.as_str() {
        "adam" => Optimizer::Adam {
            lr,
            beta1: r.get("train", "beta1", 0.9)?,
            beta2: r.get("train", "beta2", 0.999)?,
            eps: r.get("train", "adam_eps", 1e-8)?,
        },
        "sgd" => Optimizer::Sgd { lr },
        other => {
            return Err(CliError::config(
                r.line_of("train", "optimizer"),
                format!("unknown optimizer `{other}`; expected adam or sgd"),
            ))
        }
    };
    opt.validate()?;
    Ok(opt)
}

fn read_loss(r: &mut Resolver) -> Result<LossSpec> {
    let kind: String = r.get("train", "loss", "fourier_full".to_string())?;
    Ok(match kind.as_str() {
        "fourier_full" => LossSpec::FourierFull(read_penalty(r, "train", 0.03)?),
        "fourier_k0" => LossSpec::FourierK0(read_penalty(r, "train", 0.03)?),
        "spatial_l2" => LossSpec::SpatialL2,
        other => {
            return Err(CliError::config(
                r.line_of("train", "loss"),
                format!("unknown loss `{other}`; expected fourier_full, fourier_k0 or spatial_l2"),
            ))
        }
    })
}

fn read_patch(r: &mut Resolver, default: usize) -> Result<Option<usize>> {
    let p: usize = r.get("train", "patch", default)?;
    Ok((p > 0).then_some(p))
}

#[derive(Clone, Debug)]
enum Dataset {
    Procedural { complexity: usize },
    Stationary { signal: NoiseSpec },
}

impl Dataset {
    fn clean(&self, g: &Grid, seed: RngSeed) -> Result<ImageGrid> {
        Ok(match self {
            Dataset::Procedural { complexity } => gen_clean(seed, g.height, g.width, *complexity)?,
            Dataset::Stationary { signal } => sample_noise(signal, g.height, g.width, seed)?,
        })
    }
}

fn read_complexity(r: &mut Resolver) -> Result<usize> {
    let c: usize = r.get("io", "complexity", 8usize)?;
    if c == 0 {
        return Err(CliError::config(r.line_of("io", "complexity"), "complexity must be at least 1"));
    }
    Ok(c)
}

fn read_dataset(r: &mut Resolver, g: &Grid) -> Result<Dataset> {
    let kind: String = r.get("io", "dataset", "procedural".to_string())?;
    match kind.as_str() {
        "procedural" => Ok(Dataset::Procedural {
            complexity: read_complexity(r)?,
        }),
        "stationary" => Ok(Dataset::Stationary {
            signal: NoiseDesc::read(r, "noise", "signal.")?.resolve(g.height, g.width)?,
        }),
        other => Err(CliError::config(
            r.line_of("io", "dataset"),
            format!("unknown dataset `{other}`; expected procedural or stationary"),
        )),
    }
}

/// `count` triples `(x, y, z)`: clean image `i` from `RngSeed(seed, i)`, its
/// noise from `RngSeed(seed + 1000, i)`.
fn make_pairs(
    data: &Dataset,
    g: &Grid,
    seed: u64,
    count: usize,
    input: &Option<NoiseSpec>,
    target: &NoiseSpec,
) -> Result<Vec<Sample>> {
    let indices: Vec<u64> = (0..count as u64).collect();
    let degradation = DegradationSpec::Identity { noise: input.clone() };
    map_ordered(&indices, |_, &i| {
        let z = data.clean(g, RngSeed::new(seed, i))?;
        let (x, y) = make_training_pair(&z, &degradation, target, RngSeed::new(seed + NOISE_SEED_OFFSET, i))?;
        Ok(Sample {
            input: x,
            noisy: y,
            clean: Some(z),
        })
    })
}

fn held_out(samples: Vec<Sample>) -> Vec<(ImageGrid, ImageGrid)> {
    samples
        .into_iter()
        .map(|s| (s.input, s.clean.expect("procedural samples carry the clean image")))
        .collect()
}

fn positive(r: &Resolver, section: &str, key: &str, v: usize) -> Result<usize> {
    if v == 0 {
        return Err(CliError::config(r.line_of(section, key), format!("`{key}` must be positive")));
    }
    Ok(v)
}

#[derive(Clone, Debug)]
enum ModelChoice {
    Diagonal,
    ConvNet(ConvNetModel),
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Targets {
    Clean,
    Noisy,
    Paired,
}

/// Per-image metrics of `model` on held-out pairs.
struct Evaluation {
    rows: Vec<Vec<String>>,
    mean_psnr: f64,
    mean_ssim: f64,
    mean_input_psnr: f64,
    outputs: Vec<ImageGrid>,
}

fn evaluate(model: &SavedModel, pairs: &[(ImageGrid, ImageGrid)]) -> Result<Evaluation> {
    let per = map_ordered(pairs, |_, (x, z)| {
        let f = model.forward(x)?;
        let m = metrics(&f, z, 1.0)?;
        let before = metrics(x, z, 1.0)?;
        Ok((f, m, before))
    })?;
    let n = per.len().max(1) as f64;
    let mut eval = Evaluation {
        rows: Vec::with_capacity(per.len()),
        mean_psnr: 0.0,
        mean_ssim: 0.0,
        mean_input_psnr: 0.0,
        outputs: Vec::with_capacity(per.len()),
    };
    for (i, (f, m, before)) in per.into_iter().enumerate() {
        eval.rows.push(vec![i.to_string(), num(before.psnr), num(m.psnr), num(before.ssim), num(m.ssim)]);
        eval.mean_psnr += m.psnr / n;
        eval.mean_ssim += m.ssim / n;
        eval.mean_input_psnr += before.psnr / n;
        eval.outputs.push(f);
    }
    Ok(eval)
}

const METRICS_HEADER: [&str; 5] = ["index", "psnr_input", "psnr", "ssim_input", "ssim"];

fn write_curve(out: &OutDir, curve: &[EpochRecord]) -> Result<()> {
    out.write_csv(
        "curve.csv",
        &["epoch", "loss", "psnr"],
        curve.iter().map(|e| [e.epoch.to_string(), num(e.loss), num(e.psnr)]),
    )?;
    out.write_text(
        "curve.svg",
        &curve_svg(&[("held-out psnr", curve.iter().map(|e| (e.epoch as f64, e.psnr)).collect())], "epoch", "psnr (dB)"),
    )
}

struct TrainJob {
    grid: Grid,
    model: ModelChoice,
    config: TrainConfig,
    train: Vec<Sample>,
    test: Vec<(ImageGrid, ImageGrid)>,
    corrupted_bins: Vec<(usize, usize)>,
    wiener: Option<SpectralDiagonalModel>,
}

impl TrainJob {
    fn run(&self, out: &OutDir, target: TargetMode) -> Result<(f64, Vec<String>)> {
        let config = TrainConfig { target, ..self.config };
        let (saved, curve) = match &self.model {
            ModelChoice::Diagonal => {
                let m = SpectralDiagonalModel::identity(self.grid.height, self.grid.width);
                let o = fit(m, &self.train, &self.test, &config)?;
                (SavedModel::Diagonal(o.model), o.curve)
            }
            ModelChoice::ConvNet(m) => {
                let o = fit(m.clone(), &self.train, &self.test, &config)?;
                (SavedModel::ConvNet(o.model), o.curve)
            }
        };
        write_curve(out, &curve)?;
        saved.save(&out.path("model.nsfm"))?;
        let eval = evaluate(&saved, &self.test)?;
        out.write_csv("metrics.csv", &METRICS_HEADER, eval.rows.clone())?;
        let last = curve.last().copied();
        let final_psnr = last.map_or(eval.mean_psnr, |e| e.psnr);
        let mut summary = vec![
            ("target", if target == TargetMode::Clean { "clean" } else { "noisy" }.to_string()),
            ("epochs", curve.len().to_string()),
            ("final_loss", num(last.map_or(f64::NAN, |e| e.loss))),
            ("final_psnr", num(final_psnr)),
            ("mean_psnr", num(eval.mean_psnr)),
            ("mean_ssim", num(eval.mean_ssim)),
            ("mean_input_psnr", num(eval.mean_input_psnr)),
        ];
        let mut lines = vec![format!(
            "final held-out psnr {} dB (input {} dB)",
            num(final_psnr),
            num(eval.mean_input_psnr)
        )];
        if !self.corrupted_bins.is_empty() {
            let mut energy = 0.0;
            for (f, (_, z)) in eval.outputs.iter().zip(&self.test) {
                let spectrum = nsf_core::dft_forward(&f.sub(z)?);
                energy += self.corrupted_bins.iter().map(|&(k, l)| spectrum.get(k, l).norm_sqr()).sum::<f64>()
                    / self.corrupted_bins.len() as f64;
            }
            energy /= self.test.len().max(1) as f64;
            summary.push(("corrupted_bin_energy", num(energy)));
            lines.push(format!("corrupted_bin_energy {}", num(energy)));
        }
        if let (Some(oracle), SavedModel::Diagonal(learned)) = (&self.wiener, &saved) {
            let (a, b) = (learned.gains(), oracle.gains());
            let (h, w) = a.shape();
            let mut rows = Vec::with_capacity(h * w);
            let (mut diff, mut norm) = (0.0, 0.0);
            for k in 0..h {
                for l in 0..w {
                    let (x, y) = (a.get(k, l), b.get(k, l));
                    diff += (x - y).norm_sqr();
                    norm += y.norm_sqr();
                    rows.push(vec![k.to_string(), l.to_string(), num(x.re), num(x.im), num(y.re)]);
                }
            }
            out.write_csv("wiener.csv", &["k", "l", "learned_re", "learned_im", "oracle"], rows)?;
            let rel = (diff / norm).sqrt();
            summary.push(("wiener_relative_rms", num(rel)));
            lines.push(format!("wiener_relative_rms {}", num(rel)));
        }
        out.write_summary("summary.csv", &summary)?;
        Ok((final_psnr, lines))
    }
}

pub(super) fn train(r: &mut Resolver) -> Result<Job> {
    let g = read_grid(r)?;
    let data = read_dataset(r, &g)?;
    let images: usize = r.get("io", "images", 200usize)?;
    let images = positive(r, "io", "images", images)?;
    let test_images: usize = r.get("io", "test_images", 20usize)?;
    let target_desc = NoiseDesc::read(r, "noise", "")?;
    let target_noise = target_desc.resolve(g.height, g.width)?;
    let input_noise = if r.has("noise", "input.family") {
        let desc = NoiseDesc::read(r, "noise", "input.")?;
        Some(desc.resolve(g.height, g.width)?)
    } else {
        Some(target_noise.clone())
    };

    let kind: String = r.get("train", "model", "convnet".to_string())?;
    let model = match kind.as_str() {
        "diagonal" => ModelChoice::Diagonal,
        "convnet" => ModelChoice::ConvNet(read_convnet(r)?),
        other => {
            return Err(CliError::config(
                r.line_of("train", "model"),
                format!("unknown model `{other}`; expected diagonal or convnet"),
            ))
        }
    };
    let targets: String = r.get("train", "target", "noisy".to_string())?;
    let targets = match targets.as_str() {
        "clean" => Targets::Clean,
        "noisy" => Targets::Noisy,
        "paired" => Targets::Paired,
        other => {
            return Err(CliError::config(
                r.line_of("train", "target"),
                format!("unknown target `{other}`; expected clean, noisy or paired"),
            ))
        }
    };
    let config = TrainConfig {
        loss: read_loss(r)?,
        optimizer: read_optimizer(r)?,
        epochs: r.get("train", "epochs", 20usize)?,
        batch: r.get("train", "batch", 8usize)?,
        patch: read_patch(r, 0)?,
        seed: r.get("train", "seed", 7u64)?,
        target: TargetMode::Noisy,
    };
    config.validate()?;
    if matches!(model, ModelChoice::Diagonal) && config.patch.is_some() {
        return Err(CliError::config(
            r.line_of("train", "patch"),
            "the diagonal model is tied to the image size; set patch = 0",
        ));
    }

    Ok(Box::new(move |out: &OutDir| {
        let train = make_pairs(&data, &g, g.seed, images, &input_noise, &target_noise)?;
        let test = held_out(make_pairs(&data, &g, g.seed + 1, test_images, &input_noise, &target_noise)?);
        let wiener = match (&model, &data, &input_noise) {
            (ModelChoice::Diagonal, Dataset::Stationary { signal }, Some(noise)) => Some(wiener_oracle(
                &theoretical_variance_map(signal, g.height, g.width)?,
                &theoretical_variance_map(noise, g.height, g.width)?,
            )?),
            _ => None,
        };
        let job = TrainJob {
            grid: g,
            model,
            config,
            train,
            test,
            corrupted_bins: target_desc.periodic_bins(g.height, g.width),
            wiener,
        };
        match targets {
            Targets::Clean => Ok(job.run(out, TargetMode::Clean)?.1),
            Targets::Noisy => Ok(job.run(out, TargetMode::Noisy)?.1),
            Targets::Paired => {
                let (clean, mut lines) = job.run(&out.sub("clean")?, TargetMode::Clean)?;
                let (noisy, more) = job.run(&out.sub("noisy")?, TargetMode::Noisy)?;
                let gap = (clean - noisy).abs();
                out.write_summary(
                    "summary.csv",
                    &[
                        ("clean_final_psnr", num(clean)),
                        ("noisy_final_psnr", num(noisy)),
                        ("psnr_gap", num(gap)),
                    ],
                )?;
                lines.iter_mut().for_each(|l| l.insert_str(0, "clean: "));
                lines.extend(more.into_iter().map(|l| format!("noisy: {l}")));
                lines.push(format!("psnr_gap {} dB", num(gap)));
                Ok(lines)
            }
        }
    }))
}

/// Noisy images and, when known, their clean versions.
struct StripeSet {
    noisy: Vec<ImageGrid>,
    clean: Option<Vec<ImageGrid>>,
}

fn procedural_stripes(g: &Grid, seed: u64, count: usize, complexity: usize, noise: &NoiseSpec) -> Result<StripeSet> {
    let data = Dataset::Procedural { complexity };
    let samples = make_pairs(&data, g, seed, count, &None, noise)?;
    let (noisy, clean) = samples.into_iter().map(|s| (s.noisy, s.clean.expect("procedural"))).unzip();
    Ok(StripeSet {
        noisy,
        clean: Some(clean),
    })
}

fn read_directory(dir: &std::path::Path) -> Result<Vec<ImageGrid>> {
    list_images(dir)?.iter().map(|p| read_image(p)).collect()
}

fn write_images(out: &OutDir, stem: &str, images: &[ImageGrid], fmt: &ImageOut) -> Result<()> {
    let dir = out.sub("images")?;
    for (i, img) in images.iter().enumerate() {
        write_image(&dir.path(&format!("{stem}_{i:04}.{}", fmt.extension)), img, fmt.depth)?;
    }
    Ok(())
}

/// Stripe metrics of restored images. The `k = 0` energies are of the
/// residual against the clean image when it is known, of the images
/// themselves otherwise; the off-row change is `|f - y|` on rows `k != 0`
/// relative to the off-row energy of `y`.
fn stripe_report(
    out: &OutDir,
    noisy: &[ImageGrid],
    restored: &[ImageGrid],
    clean: Option<&[ImageGrid]>,
) -> Result<Vec<String>> {
    let mut rows = Vec::with_capacity(noisy.len());
    let (mut k0_before, mut k0_after, mut off_input, mut off_change) = (0.0, 0.0, 0.0, 0.0);
    let (mut psnr_before, mut psnr_after) = (0.0, 0.0);
    let n = noisy.len().max(1) as f64;
    for (i, (y, f)) in noisy.iter().zip(restored).enumerate() {
        let (e0, e1, p0, p1) = match clean {
            Some(c) => {
                let z = &c[i];
                (
                    k0_energy(&y.sub(z)?),
                    k0_energy(&f.sub(z)?),
                    nsf_core::psnr(y, z, 1.0)?,
                    nsf_core::psnr(f, z, 1.0)?,
                )
            }
            None => (k0_energy(y), k0_energy(f), f64::NAN, f64::NAN),
        };
        let (o0, o1) = (off_row_energy(y), off_row_energy(&f.sub(y)?));
        k0_before += e0;
        k0_after += e1;
        off_input += o0;
        off_change += o1;
        psnr_before += p0 / n;
        psnr_after += p1 / n;
        rows.push(vec![i.to_string(), num(e0), num(e1), num(o0), num(o1), num(p0), num(p1)]);
    }
    out.write_csv(
        "metrics.csv",
        &["index", "k0_energy_input", "k0_energy_output", "off_row_energy_input", "off_row_energy_change", "psnr_input", "psnr"],
        rows,
    )?;
    let reduction = 1.0 - k0_after / k0_before;
    let gain = psnr_after - psnr_before;
    let collateral = off_change / off_input;
    let basis = if clean.is_some() { "residual" } else { "image" };
    out.write_summary(
        "summary.csv",
        &[
            ("energy_basis", basis.to_string()),
            ("k0_energy_reduction", num(reduction)),
            ("off_row_relative_change", num(collateral)),
            ("psnr_input", num(psnr_before)),
            ("psnr_output", num(psnr_after)),
            ("psnr_gain", num(gain)),
        ],
    )?;
    Ok(vec![
        format!("k0_energy_reduction {}", num(reduction)),
        format!("psnr_gain {} dB", num(gain)),
        format!("off_row_relative_change {}", num(collateral)),
    ])
}

pub(super) fn destripe(r: &mut Resolver) -> Result<Job> {
    let g = read_grid(r)?;
    let fmt = read_image_out(r)?;
    let input: Option<PathBuf> = r.optional("io", "input").map(PathBuf::from);
    let procedural = match &input {
        None => {
            let complexity = read_complexity(r)?;
            let images: usize = r.get("io", "images", 200usize)?;
            let test_images: usize = r.get("io", "test_images", 20usize)?;
            let noise = NoiseDesc::read(r, "noise", "")?.resolve(g.height, g.width)?;
            Some((complexity, images, test_images, noise))
        }
        Some(_) => None,
    };
    let epsilon: f64 = r.get("train", "epsilon", nsf_core::train::DEFAULT_EPSILON)?;
    let model = read_convnet(r)?;
    let usr = UsrConfig {
        penalty: read_penalty(r, "train", 0.03)?,
        optimizer: read_optimizer(r)?,
        steps: r.get("train", "steps", 2000usize)?,
        batch: r.get("train", "batch", 8usize)?,
        patch: read_patch(r, 32)?,
        seed: r.get("train", "seed", 7u64)?,
        log_every: r.get("train", "log_every", 50usize)?,
    };

    Ok(Box::new(move |out: &OutDir| {
        let (train, test) = match (&input, procedural) {
            (Some(dir), _) => {
                let images = read_directory(dir)?;
                (images.clone(), StripeSet { noisy: images, clean: None })
            }
            (None, Some((complexity, images, test_images, noise))) => {
                let train = procedural_stripes(&g, g.seed, images, complexity, &noise)?;
                (train.noisy, procedural_stripes(&g, g.seed + 1, test_images, complexity, &noise)?)
            }
            (None, None) => unreachable!("procedural settings are read whenever no input directory is given"),
        };
        let (model, curve) = usr_train(&train, model, epsilon, &usr)?;
        out.write_csv("curve.csv", &["step", "loss"], curve.iter().map(|c| [c.step.to_string(), num(c.loss)]))?;
        out.write_text(
            "curve.svg",
            &curve_svg(&[("k=0 loss", curve.iter().map(|c| (c.step as f64, c.loss)).collect())], "step", "loss"),
        )?;
        let saved = SavedModel::ConvNet(model);
        saved.save(&out.path("model.nsfm"))?;
        let restored = map_ordered(&test.noisy, |_, y| Ok(saved.forward(y)?))?;
        write_images(out, "destriped", &restored, &fmt)?;
        stripe_report(out, &test.noisy, &restored, test.clean.as_deref())
    }))
}

pub(super) fn eval(r: &mut Resolver) -> Result<Job> {
    let g = read_grid(r)?;
    let fmt = read_image_out(r)?;
    let model_path: PathBuf = PathBuf::from(r.require::<String>("io", "model")?);
    let input: Option<PathBuf> = r.optional("io", "input").map(PathBuf::from);
    let clean_dir: Option<PathBuf> = r.optional("io", "clean").map(PathBuf::from);
    let procedural = match &input {
        None => {
            let data = read_dataset(r, &g)?;
            let test_images: usize = r.get("io", "test_images", 20usize)?;
            let target = NoiseDesc::read(r, "noise", "")?.resolve(g.height, g.width)?;
            let input_noise = if r.has("noise", "input.family") {
                NoiseDesc::read(r, "noise", "input.")?.resolve(g.height, g.width)?
            } else {
                target.clone()
            };
            Some((data, test_images, target, input_noise))
        }
        Some(_) => None,
    };
    Ok(Box::new(move |out: &OutDir| {
        let model = SavedModel::load(&model_path)?;
        let mut lines = vec![format!("model {} from {}", model.kind(), model_path.display())];
        match (input, procedural) {
            (Some(dir), _) => {
                let images = read_directory(&dir)?;
                let restored = map_ordered(&images, |_, y| Ok(model.forward(y)?))?;
                write_images(out, "restored", &restored, &fmt)?;
                match clean_dir {
                    Some(c) => {
                        let clean = read_directory(&c)?;
                        if clean.len() != images.len() {
                            return Err(CliError::Invalid(format!(
                                "{} inputs but {} clean images",
                                images.len(),
                                clean.len()
                            )));
                        }
                        let pairs: Vec<_> = images.into_iter().zip(clean).collect();
                        let e = evaluate(&model, &pairs)?;
                        out.write_csv("metrics.csv", &METRICS_HEADER, e.rows)?;
                        out.write_summary(
                            "summary.csv",
                            &[
                                ("images", pairs.len().to_string()),
                                ("mean_psnr", num(e.mean_psnr)),
                                ("mean_ssim", num(e.mean_ssim)),
                                ("mean_input_psnr", num(e.mean_input_psnr)),
                            ],
                        )?;
                        lines.push(format!("mean psnr {} dB (input {} dB)", num(e.mean_psnr), num(e.mean_input_psnr)));
                    }
                    None => lines.extend(stripe_report(out, &images, &restored, None)?),
                }
            }
            (None, Some((data, count, target, input_noise))) => {
                let pairs = held_out(make_pairs(&data, &g, g.seed + 1, count, &Some(input_noise), &target)?);
                let e = evaluate(&model, &pairs)?;
                out.write_csv("metrics.csv", &METRICS_HEADER, e.rows)?;
                out.write_summary(
                    "summary.csv",
                    &[
                        ("images", pairs.len().to_string()),
                        ("mean_psnr", num(e.mean_psnr)),
                        ("mean_ssim", num(e.mean_ssim)),
                        ("mean_input_psnr", num(e.mean_input_psnr)),
                    ],
                )?;
                write_images(out, "restored", &e.outputs, &fmt)?;
                lines.push(format!("mean psnr {} dB (input {} dB)", num(e.mean_psnr), num(e.mean_input_psnr)));
            }
            (None, None) => unreachable!("procedural settings are read whenever no input directory is given"),
        }
        Ok(lines)
    }))
}
