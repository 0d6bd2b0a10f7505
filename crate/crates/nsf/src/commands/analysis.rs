use nsf_core::equivalence::gap_from_estimate;
use nsf_core::grid::{conjugate_bin, is_self_conjugate};
use nsf_core::stats::{gaussianity_of, row_mass_fraction, theoretical_variance_map, GaussianityThresholds};
use nsf_core::{
    argmin_check, gen_clean, independence_test, penalty_curve, sample_noise, sparsity_index, BlurredPenalty,
    Component, NoiseSpec, Penalty, RngSeed, SigmaMap,
};
use rand::Rng;

use super::{read_grid, Grid};
use crate::config::{split_list, Resolver};
use crate::error::{CliError, Result};
use crate::noise_config::NoiseDesc;
use crate::parallel;
use crate::report::{curve_svg, heatmap_svg, num, OutDir};

type Job = Box<dyn FnOnce(&OutDir) -> Result<Vec<String>>>;

const BIN_STREAM: u64 = 0x62_696e;

#[derive(Clone, Debug, PartialEq)]
enum BinChoice {
    Random(usize),
    Fixed(Vec<(usize, usize)>),
}

fn read_bins(r: &mut Resolver) -> Result<BinChoice> {
    let text: String = r.get("analysis", "bins", "random:20".to_string())?;
    let line = r.line_of("analysis", "bins");
    let bad = |m: String| CliError::config(line, m);
    if let Some(n) = text.strip_prefix("random:") {
        let n: usize = n.trim().parse().map_err(|_| bad(format!("bad bin count in `{text}`")))?;
        if n == 0 {
            return Err(bad("need at least one bin".into()));
        }
        return Ok(BinChoice::Random(n));
    }
    let bins = text
        .split(';')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|pair| {
            let (k, l) = pair.split_once(',').ok_or_else(|| bad(format!("expected `k,l`, got `{pair}`")))?;
            let k = k.trim().parse().map_err(|_| bad(format!("bad k in `{pair}`")))?;
            let l = l.trim().parse().map_err(|_| bad(format!("bad l in `{pair}`")))?;
            Ok((k, l))
        })
        .collect::<Result<Vec<_>>>()?;
    if bins.is_empty() {
        return Err(bad("empty bin list".into()));
    }
    Ok(BinChoice::Fixed(bins))
}

/// `n` distinct bins with `k != 0` and `l != 0`, none self-conjugate and no
/// two forming a conjugate pair.
fn random_bins(n: usize, height: usize, width: usize, seed: u64) -> Result<Vec<(usize, usize)>> {
    let available = (1..height)
        .flat_map(|k| (1..width).map(move |l| (k, l)))
        .filter(|&(k, l)| !is_self_conjugate(k, l, height, width))
        .count()
        / 2;
    if n > available {
        return Err(CliError::Invalid(format!(
            "a {height}x{width} grid has only {available} independent bins with kl != 0, {n} requested"
        )));
    }
    let mut rng = RngSeed::new(seed, BIN_STREAM).rng();
    let mut bins: Vec<(usize, usize)> = Vec::with_capacity(n);
    while bins.len() < n {
        let b = (rng.random_range(1..height), rng.random_range(1..width));
        if is_self_conjugate(b.0, b.1, height, width) {
            continue;
        }
        let c = conjugate_bin(b.0, b.1, height, width);
        if !bins.contains(&b) && !bins.contains(&c) {
            bins.push(b);
        }
    }
    Ok(bins)
}

fn read_thresholds(r: &mut Resolver) -> Result<GaussianityThresholds> {
    let d = GaussianityThresholds::default();
    Ok(GaussianityThresholds {
        skewness: r.get("analysis", "skew_max", d.skewness)?,
        excess_kurtosis: r.get("analysis", "kurt_max", d.excess_kurtosis)?,
        ks_scale: r.get("analysis", "ks_scale", d.ks_scale)?,
    })
}

fn read_noise(r: &mut Resolver, g: &Grid) -> Result<(NoiseDesc, NoiseSpec)> {
    let desc = NoiseDesc::read(r, "noise", "")?;
    let spec = desc.resolve(g.height, g.width)?;
    Ok((desc, spec))
}

/// Counts on `bins` equal-width cells over `mean +- 4 sd`, with the expected
/// count of the fitted Gaussian at each centre.
fn histogram(samples: &[f64], bins: usize) -> Vec<[String; 3]> {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0).max(1.0);
    let sd = var.sqrt();
    let (lo, hi) = if sd > 0.0 { (mean - 4.0 * sd, mean + 4.0 * sd) } else { (mean - 0.5, mean + 0.5) };
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    for &x in samples {
        let i = ((x - lo) / width).floor();
        if i >= 0.0 && (i as usize) < bins {
            counts[i as usize] += 1;
        }
    }
    counts
        .iter()
        .enumerate()
        .map(|(i, &c)| {
            let centre = lo + (i as f64 + 0.5) * width;
            let expected = if sd > 0.0 {
                let z = (centre - mean) / sd;
                n * width * (-0.5 * z * z).exp() / (sd * (2.0 * std::f64::consts::PI).sqrt())
            } else {
                0.0
            };
            [num(centre), c.to_string(), num(expected)]
        })
        .collect()
}

pub(super) fn analyze_noise(r: &mut Resolver) -> Result<Job> {
    let g = read_grid(r)?;
    let (_, spec) = read_noise(r, &g)?;
    let m: usize = r.get("analysis", "samples", 10_000usize)?;
    if m < 100 {
        return Err(CliError::config(r.line_of("analysis", "samples"), "need at least 100 samples"));
    }
    let choice = read_bins(r)?;
    let thresholds = read_thresholds(r)?;
    let hist_bins: usize = r.get("analysis", "histogram_bins", 41usize)?;
    let spatial_draws: usize = r.get("analysis", "spatial_realizations", 16usize)?;
    if hist_bins == 0 || spatial_draws == 0 {
        return Err(CliError::Invalid("histogram_bins and spatial_realizations must be positive".into()));
    }
    let bins = match choice {
        BinChoice::Random(n) => random_bins(n, g.height, g.width, g.seed)?,
        BinChoice::Fixed(b) => {
            for &(k, l) in &b {
                if k >= g.height || l >= g.width {
                    return Err(nsf_core::Error::InvalidBin {
                        k,
                        l,
                        height: g.height,
                        width: g.width,
                    }
                    .into());
                }
            }
            b
        }
    };
    Ok(Box::new(move |out: &OutDir| {
        let sets = parallel::coeff_samples(&spec, g.height, g.width, &bins, m, g.seed)?;
        let mut rows = Vec::new();
        let (mut tested, mut passed, mut max_ks) = (0usize, 0usize, 0.0f64);
        for s in &sets {
            for c in [Component::Real, Component::Imag] {
                let rep = gaussianity_of(s.component(c), &thresholds)?;
                if !rep.degenerate {
                    tested += 1;
                    passed += rep.pass as usize;
                    max_ks = max_ks.max(rep.ks_statistic);
                }
                rows.push(vec![
                    s.bin.0.to_string(),
                    s.bin.1.to_string(),
                    c.label().to_string(),
                    num(rep.mean),
                    num(rep.variance),
                    num(rep.skewness),
                    num(rep.excess_kurtosis),
                    num(rep.ks_statistic),
                    rep.degenerate.to_string(),
                    rep.pass.to_string(),
                ]);
            }
        }
        out.write_csv(
            "gaussianity.csv",
            &["k", "l", "component", "mean", "variance", "skewness", "excess_kurtosis", "ks", "degenerate", "pass"],
            rows,
        )?;

        let mut ind = Vec::new();
        let mut pairs: Vec<(usize, usize, Component, Component)> = Vec::new();
        for i in 0..sets.len() {
            pairs.push((i, i, Component::Real, Component::Imag));
            if i + 1 < sets.len() {
                pairs.push((i, i + 1, Component::Real, Component::Real));
                pairs.push((i, i + 1, Component::Imag, Component::Imag));
            }
        }
        for (i, j, ci, cj) in pairs {
            let (a, b) = (&sets[i], &sets[j]);
            if i != j && conjugate_bin(a.bin.0, a.bin.1, g.height, g.width) == b.bin {
                continue;
            }
            let rep = independence_test(a, b, (ci, cj))?;
            ind.push(vec![
                a.bin.0.to_string(),
                a.bin.1.to_string(),
                ci.label().to_string(),
                b.bin.0.to_string(),
                b.bin.1.to_string(),
                cj.label().to_string(),
                num(rep.correlation),
                num(rep.threshold),
                rep.degenerate.to_string(),
                rep.pass.to_string(),
            ]);
        }
        out.write_csv(
            "independence.csv",
            &["k1", "l1", "c1", "k2", "l2", "c2", "correlation", "threshold", "degenerate", "pass"],
            ind,
        )?;

        out.write_csv("histogram_fourier.csv", &["center", "count", "gaussian"], histogram(&sets[0].a, hist_bins))?;
        let pixels: Vec<f64> = (0..spatial_draws.min(m) as u64)
            .map(|i| sample_noise(&spec, g.height, g.width, RngSeed::new(g.seed, i)).map(|n| n.into_data()))
            .collect::<nsf_core::Result<Vec<_>>>()?
            .concat();
        out.write_csv("histogram_spatial.csv", &["center", "count", "gaussian"], histogram(&pixels, hist_bins))?;

        let ks_limit = thresholds.ks_scale / (m as f64).sqrt();
        let rate = if tested == 0 { f64::NAN } else { passed as f64 / tested as f64 };
        let mut summary = vec![
            ("samples", m.to_string()),
            ("bins", bins.len().to_string()),
            ("tested", tested.to_string()),
            ("passed", passed.to_string()),
            ("pass_rate", num(rate)),
            ("max_ks", num(max_ks)),
            ("ks_limit", num(ks_limit)),
        ];
        if let Some(v) = spec.iid_variance() {
            summary.push(("iid_coefficient_variance", num(v / (2 * g.height * g.width) as f64)));
        }
        out.write_summary("summary.csv", &summary)?;
        Ok(vec![
            format!("gaussianity pass_rate {} ({passed}/{tested} non-degenerate components)", num(rate)),
            format!("max_ks {} (limit {})", num(max_ks), num(ks_limit)),
        ])
    }))
}

pub(super) fn variance_map(r: &mut Resolver) -> Result<Job> {
    let g = read_grid(r)?;
    let (_, spec) = read_noise(r, &g)?;
    let m: usize = r.get("analysis", "samples", 2000usize)?;
    if m < 2 {
        return Err(CliError::config(r.line_of("analysis", "samples"), "need at least 2 samples"));
    }
    let p: f64 = r.get("analysis", "sparsity_p", 0.99)?;
    let floor: f64 = r.get("analysis", "theory_floor", 1e-8)?;
    Ok(Box::new(move |out: &OutDir| {
        let (h, w) = (g.height, g.width);
        let emp = parallel::variance_map(&spec, h, w, m, g.seed)?;
        let theory = theoretical_variance_map(&spec, h, w)?;
        let table = |map: &nsf_core::VarianceMap| {
            let mut rows = Vec::with_capacity(h * w);
            for k in 0..h {
                for l in 0..w {
                    let (a, b) = map.components(k, l);
                    rows.push(vec![k.to_string(), l.to_string(), num(map.get(k, l)), num(a), num(b)]);
                }
            }
            rows
        };
        let header = ["k", "l", "variance", "var_a", "var_b"];
        out.write_csv("variance_empirical.csv", &header, table(&emp))?;
        out.write_csv("variance_theoretical.csv", &header, table(&theory))?;
        out.write_text("heatmap_empirical.svg", &heatmap_svg(&emp.values(), h, w, "empirical variance map"))?;
        out.write_text("heatmap_theoretical.svg", &heatmap_svg(&theory.values(), h, w, "theoretical variance map"))?;
        let mut worst = 0.0f64;
        let mut compared = 0usize;
        for k in 0..h {
            for l in 0..w {
                let t = theory.get(k, l);
                if t > floor {
                    worst = worst.max((emp.get(k, l) / t - 1.0).abs());
                    compared += 1;
                }
            }
        }
        let sparsity = sparsity_index(&emp, p)?;
        let row0 = row_mass_fraction(&emp, 0);
        out.write_summary(
            "summary.csv",
            &[
                ("samples", m.to_string()),
                ("sparsity_p", num(p)),
                ("sparsity_index", sparsity.to_string()),
                ("row0_mass_fraction", num(row0)),
                ("compared_bins", compared.to_string()),
                ("max_relative_deviation", num(worst)),
            ],
        )?;
        Ok(vec![
            format!("sparsity_index {sparsity} (p = {})", num(p)),
            format!("row0_mass_fraction {}", num(row0)),
            format!("max_relative_deviation {} over {compared} bins", num(worst)),
        ])
    }))
}

pub(super) fn read_penalty(r: &mut Resolver, section: &str, default_delta: f64) -> Result<Penalty> {
    let kind: String = r.get(section, "penalty", "huber".to_string())?;
    let line = r.line_of(section, "penalty");
    let phi = match kind.as_str() {
        "huber" => Penalty::huber(r.get(section, "delta", default_delta)?),
        "abspow" => Penalty::abs_pow(r.get(section, "q", 1.0)?),
        other => return Err(CliError::config(line, format!("unknown penalty `{other}`; expected huber or abspow"))),
    };
    Ok(phi?)
}

pub(super) fn verify_equivalence(r: &mut Resolver) -> Result<Job> {
    let g = read_grid(r)?;
    let complexity: usize = r.get("io", "complexity", 8usize)?;
    let (_, spec) = read_noise(r, &g)?;
    let phi = read_penalty(r, "analysis", 0.05)?;
    let rms: f64 = r.get("analysis", "residual_rms", 0.2)?;
    let m: usize = r.get("analysis", "samples", 20_000usize)?;
    let sigma_kind: String = r.get("analysis", "sigma_map", "per_bin".to_string())?;
    if sigma_kind != "per_bin" && sigma_kind != "pooled" {
        return Err(CliError::config(r.line_of("analysis", "sigma_map"), "sigma_map must be per_bin or pooled"));
    }
    let curve_sigma: f64 = r.get("analysis", "curve_sigma", 0.2)?;
    let lo: f64 = r.get("analysis", "curve_lo", -1.0)?;
    let hi: f64 = r.get("analysis", "curve_hi", 1.0)?;
    let points: usize = r.get("analysis", "curve_points", 401usize)?;
    let sigmas_text: String = r.get("analysis", "argmin_sigmas", "0.05, 0.2, 0.5".to_string())?;
    let sigmas = split_list(&sigmas_text)
        .map(|s| s.parse::<f64>())
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| CliError::config(r.line_of("analysis", "argmin_sigmas"), e.to_string()))?;
    if m < 2 {
        return Err(CliError::config(r.line_of("analysis", "samples"), "need at least 2 samples"));
    }
    Ok(Box::new(move |out: &OutDir| {
        let (h, w) = (g.height, g.width);
        let base = RngSeed::new(g.seed, 0);
        let z = gen_clean(base.derive(1), h, w, complexity)?;
        let f = z.add(&sample_noise(&NoiseSpec::gaussian(rms), h, w, base.derive(2))?)?;
        let per_bin = SigmaMap::from_variance_map(&theoretical_variance_map(&spec, h, w)?);
        let sigma = if sigma_kind == "pooled" { per_bin.pooled() } else { per_bin };
        let mc = parallel::expected_loss(&f, &z, &spec, &phi, m, g.seed)?;
        let gap = gap_from_estimate(&f, &z, &phi, &sigma, mc)?;

        let bp = BlurredPenalty::new(phi, SigmaMap::Uniform(0.0))?;
        let curve = penalty_curve(&bp, curve_sigma, lo, hi, points)?;
        out.write_csv(
            "curve.csv",
            &["t", "phi", "phi_blurred", "phi_blurred_derivative"],
            curve.iter().map(|p| [num(p.t), num(p.phi), num(p.blurred), num(p.derivative)]),
        )?;
        out.write_text(
            "curve.svg",
            &curve_svg(
                &[
                    ("phi", curve.iter().map(|p| (p.t, p.phi)).collect()),
                    ("blurred", curve.iter().map(|p| (p.t, p.blurred)).collect()),
                ],
                "t",
                "penalty",
            ),
        )?;
        let mut lines = Vec::new();
        let mut argmin_rows = Vec::new();
        for &s in &sigmas {
            let pass = argmin_check(&bp, s)?;
            argmin_rows.push([num(s), pass.to_string()]);
            lines.push(format!("argmin sigma={} {}", num(s), if pass { "PASS" } else { "FAIL" }));
        }
        out.write_csv("argmin.csv", &["sigma", "pass"], argmin_rows)?;
        out.write_summary(
            "summary.csv",
            &[
                ("gap", num(gap.gap)),
                ("se", num(gap.mc.std_error / gap.blurred_loss)),
                ("M", gap.mc.draws.to_string()),
                ("mc_mean", num(gap.mc.mean)),
                ("mc_std_error", num(gap.mc.std_error)),
                ("blurred_loss", num(gap.blurred_loss)),
            ],
        )?;
        lines.insert(
            0,
            format!(
                "gap {} se {} M {}",
                num(gap.gap),
                num(gap.mc.std_error / gap.blurred_loss),
                gap.mc.draws
            ),
        );
        Ok(lines)
    }))
}
