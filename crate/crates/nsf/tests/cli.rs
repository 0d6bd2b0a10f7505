use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use nsf::image_io::{read_image, write_image, BitDepth};
use nsf::model_io::SavedModel;
use nsf::report::summary_value;
use nsf_core::{gen_clean, RngSeed};

fn nsf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nsf")).args(args).output().expect("run nsf")
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn run_ok(cmd: &str, config: &Path, out: &Path, extra: &[&str]) -> String {
    let mut args = vec![cmd, "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    let o = nsf(&args);
    assert!(o.status.success(), "{cmd}: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout).unwrap()
}

fn stderr_and_code(o: &Output) -> (String, i32) {
    (String::from_utf8_lossy(&o.stderr).into_owned(), o.status.code().unwrap())
}

const SMALL_NOISE: &str = "\
[noise]
family = uniform
halfwidth = 0.5

[analysis]
samples = 600
bins = random:4

[io]
seed = 4
height = 16
width = 16
";

#[test]
fn config_errors_exit_with_2_and_name_the_line() {
    let tmp = tempfile::tempdir().unwrap();
    let typo = write_config(tmp.path(), "typo.ini", &SMALL_NOISE.replace("samples = 600", "sampels = 600"));
    let (err, code) = stderr_and_code(&nsf(&["analyze-noise", "--config", typo.to_str().unwrap(), "--out", "x"]));
    assert_eq!(code, 2);
    assert!(err.contains("line 6") && err.contains("sampels"), "{err}");

    let missing = write_config(tmp.path(), "missing.ini", "[noise]\nfamily = gaussian\n\n[io]\nheight = 8\n");
    let (err, code) = stderr_and_code(&nsf(&["variance-map", "--config", missing.to_str().unwrap()]));
    assert_eq!(code, 2);
    assert!(err.contains("sigma") && err.contains("line 1"), "{err}");

    let bad_value = write_config(tmp.path(), "bad.ini", "[noise]\nfamily = gaussian\nsigma = -1\n");
    assert_eq!(nsf(&["variance-map", "--config", bad_value.to_str().unwrap()]).status.code(), Some(2));

    let out = tmp.path().join("never");
    let o = nsf(&["analyze-noise", "--config", typo.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!out.exists(), "nothing is written before the config validates");
}

#[test]
fn io_errors_exit_with_4() {
    let tmp = tempfile::tempdir().unwrap();
    let o = nsf(&["analyze-noise", "--config", tmp.path().join("absent.ini").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(4));

    std::fs::write(tmp.path().join("broken.nsfm"), b"NSFM\x01").unwrap();
    let cfg = write_config(
        tmp.path(),
        "eval.ini",
        &format!(
            "[noise]\nfamily = gaussian\nsigma = 0.1\n\n[io]\nheight = 8\nwidth = 8\ntest_images = 2\nmodel = {}\n",
            tmp.path().join("broken.nsfm").display()
        ),
    );
    let (err, code) = stderr_and_code(&nsf(&["eval", "--config", cfg.to_str().unwrap(), "--out", tmp.path().join("e").to_str().unwrap()]));
    assert_eq!(code, 4);
    assert!(err.contains("byte 5"), "{err}");
}

#[test]
fn divergence_exits_with_3() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "diverge.ini",
        "[noise]\nfamily = gaussian\nsigma = 0.1\n\n[train]\nmodel = convnet\nloss = spatial_l2\noptimizer = sgd\n\
         lr = 1e200\nepochs = 3\nbatch = 2\n\n[io]\nheight = 8\nwidth = 8\nimages = 4\ntest_images = 1\n",
    );
    let (err, code) = stderr_and_code(&nsf(&["train", "--config", cfg.to_str().unwrap(), "--out", tmp.path().join("o").to_str().unwrap()]));
    assert_eq!(code, 3, "{err}");
    assert!(err.contains("epoch 1"), "{err}");
}

#[test]
fn outputs_depend_only_on_config_and_seed() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "a.ini", SMALL_NOISE);
    let (a, b, c, d) = (tmp.path().join("a"), tmp.path().join("b"), tmp.path().join("c"), tmp.path().join("d"));
    run_ok("analyze-noise", &cfg, &a, &["--threads", "1"]);
    run_ok("analyze-noise", &cfg, &b, &["--threads", "3"]);
    run_ok("analyze-noise", &cfg, &c, &["--seed", "5"]);
    for f in ["gaussianity.csv", "independence.csv", "histogram_fourier.csv", "histogram_spatial.csv", "summary.csv"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
    assert_ne!(std::fs::read(a.join("gaussianity.csv")).unwrap(), std::fs::read(c.join("gaussianity.csv")).unwrap());

    // the echo is itself a complete configuration reproducing the run
    let echo = std::fs::read_to_string(a.join("config.resolved")).unwrap();
    assert!(echo.contains("histogram_bins = 41"));
    run_ok("analyze-noise", &a.join("config.resolved"), &d, &[]);
    assert_eq!(std::fs::read(a.join("gaussianity.csv")).unwrap(), std::fs::read(d.join("gaussianity.csv")).unwrap());
    assert!(std::fs::read_to_string(c.join("config.resolved")).unwrap().contains("seed = 5"));
}

#[test]
fn variance_map_of_stripes_prints_a_small_sparsity_index() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "s.ini",
        "[noise]\nfamily = stripe\nsigma = 0.2\n\n[analysis]\nsamples = 300\n\n[io]\nheight = 16\nwidth = 16\n",
    );
    let stdout = run_ok("variance-map", &cfg, &tmp.path().join("o"), &[]);
    let idx: usize = stdout.lines().next().unwrap().split_whitespace().nth(1).unwrap().parse().unwrap();
    assert!(idx <= 16, "{stdout}");
    let svg = std::fs::read_to_string(tmp.path().join("o/heatmap_empirical.svg")).unwrap();
    assert!(svg.starts_with("<svg"));
}

#[test]
fn zero_learning_rate_keeps_the_model_and_eval_reproduces_it() {
    let tmp = tempfile::tempdir().unwrap();
    let common = "[noise]\nfamily = gaussian\nsigma = 0.1\n\n[io]\nheight = 16\nwidth = 16\nimages = 4\ntest_images = 3\n";
    let cfg = write_config(
        tmp.path(),
        "t.ini",
        &format!("{common}\n[train]\nmodel = diagonal\nlr = 0\nepochs = 3\nbatch = 2\ntarget = noisy\n"),
    );
    let out = tmp.path().join("t");
    run_ok("train", &cfg, &out, &[]);
    let model = SavedModel::load(&out.join("model.nsfm")).unwrap();
    assert_eq!(model, SavedModel::Diagonal(nsf_core::SpectralDiagonalModel::identity(16, 16)));
    let curve = std::fs::read_to_string(out.join("curve.csv")).unwrap();
    let psnrs: Vec<&str> = curve.lines().skip(1).map(|l| l.rsplit(',').next().unwrap()).collect();
    assert_eq!(psnrs.len(), 3);
    assert!(psnrs.windows(2).all(|w| w[0] == w[1]), "{curve}");

    let eval_cfg = write_config(
        tmp.path(),
        "e.ini",
        &format!("{}model = {}\n", common.replace("images = 4\n", ""), out.join("model.nsfm").display()),
    );
    let e = tmp.path().join("e");
    run_ok("eval", &eval_cfg, &e, &[]);
    assert_eq!(
        summary_value(&e.join("summary.csv"), "mean_psnr").unwrap(),
        summary_value(&out.join("summary.csv"), "mean_psnr").unwrap()
    );
    assert!(e.join("images/restored_0002.pgm").exists());
}

#[test]
fn destripe_reads_a_directory_of_images() {
    let tmp = tempfile::tempdir().unwrap();
    let input = tmp.path().join("in");
    std::fs::create_dir(&input).unwrap();
    for i in 0..3 {
        let mut z = gen_clean(RngSeed::new(9, i), 16, 16, 3).unwrap();
        for u in 0..16 {
            for v in 0..16 {
                z.set(u, v, (z.get(u, v) + if v % 3 == 0 { 0.05 } else { 0.0 }).min(1.0));
            }
        }
        let ext = if i == 1 { "png" } else { "pgm" };
        write_image(&input.join(format!("img{i}.{ext}")), &z, BitDepth::Sixteen).unwrap();
    }
    std::fs::write(input.join("notes.txt"), "ignored").unwrap();
    let cfg = write_config(
        tmp.path(),
        "d.ini",
        &format!(
            "[train]\nsteps = 6\nbatch = 2\npatch = 8\nlog_every = 2\n\n[io]\ninput = {}\nformat = png\ndepth = 8\n",
            input.display()
        ),
    );
    let out = tmp.path().join("o");
    let stdout = run_ok("destripe", &cfg, &out, &[]);
    assert!(stdout.contains("k0_energy_reduction"));
    assert_eq!(std::fs::read_to_string(out.join("curve.csv")).unwrap().lines().count(), 4);
    let restored = read_image(&out.join("images/destriped_0002.png")).unwrap();
    assert_eq!(restored.shape(), (16, 16));

    let single = tmp.path().join("single");
    std::fs::create_dir(&single).unwrap();
    std::fs::copy(input.join("img0.pgm"), single.join("a.pgm")).unwrap();
    let cfg = write_config(tmp.path(), "s.ini", &format!("[train]\nsteps = 2\n\n[io]\ninput = {}\n", single.display()));
    let o = nsf(&["destripe", "--config", cfg.to_str().unwrap(), "--out", tmp.path().join("s").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("at least two"));
}

#[test]
fn missing_config_flag_is_a_usage_error() {
    let o = nsf(&["train"]);
    assert_eq!(o.status.code(), Some(2));
}
