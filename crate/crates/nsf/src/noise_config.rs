//! Noise models as config lines: one key per parameter, nested models under
//! dotted prefixes (`inner.family`, `part2.sigma`, ...).

use std::fmt::Write as _;
use std::path::PathBuf;

use nsf_core::fourier::{box_kernel, kernel_from_taps};
use nsf_core::noise::{PeriodicComponent, StripeAxis};
use nsf_core::{gen_clean, ImageGrid, NoiseSpec, RngSeed};

use crate::config::{split_list, Resolver};
use crate::error::{CliError, Result};

/// Clean image a signal-dependent family is drawn around.
#[derive(Clone, Debug, PartialEq)]
pub enum Reference {
    Procedural { complexity: usize, seed: u64 },
    File(PathBuf),
}

#[derive(Clone, Debug, PartialEq)]
pub enum KernelDesc {
    /// Normalized `size x size` box centred on the origin.
    Box(usize),
    /// `(du, dv, weight)` taps, wrapped onto the grid.
    Taps(Vec<(isize, isize, f64)>),
}

/// Grid-independent description of a [`NoiseSpec`].
#[derive(Clone, Debug, PartialEq)]
pub enum NoiseDesc {
    Gaussian { sigma: f64 },
    Uniform { halfwidth: f64 },
    Laplace { scale: f64 },
    Poisson { peak: f64, reference: Reference },
    HetGaussian { alpha: f64, beta: f64, reference: Reference },
    Stationary { kernel: KernelDesc, inner: Box<NoiseDesc> },
    Stripe { sigma: f64, axis: StripeAxis },
    Periodic { components: Vec<PeriodicComponent> },
    Mixture(Vec<NoiseDesc>),
}

fn key(prefix: &str, name: &str) -> String {
    format!("{prefix}{name}")
}

impl NoiseDesc {
    /// Reads the model rooted at `prefix` (empty for the top level) from `section`.
    pub fn read(r: &mut Resolver, section: &str, prefix: &str) -> Result<Self> {
        let family: String = r.require(section, &key(prefix, "family"))?;
        let line = r.line_of(section, &key(prefix, "family"));
        let desc = match family.as_str() {
            "gaussian" => NoiseDesc::Gaussian {
                sigma: r.require(section, &key(prefix, "sigma"))?,
            },
            "uniform" => NoiseDesc::Uniform {
                halfwidth: r.require(section, &key(prefix, "halfwidth"))?,
            },
            "laplace" => NoiseDesc::Laplace {
                scale: r.require(section, &key(prefix, "scale"))?,
            },
            "poisson" => NoiseDesc::Poisson {
                peak: r.require(section, &key(prefix, "peak"))?,
                reference: read_reference(r, section, prefix)?,
            },
            "hetgaussian" => NoiseDesc::HetGaussian {
                alpha: r.require(section, &key(prefix, "alpha"))?,
                beta: r.require(section, &key(prefix, "beta"))?,
                reference: read_reference(r, section, prefix)?,
            },
            "stationary" => {
                let kind: String = r.require(section, &key(prefix, "kernel"))?;
                let kline = r.line_of(section, &key(prefix, "kernel"));
                let kernel = match kind.as_str() {
                    "box" => KernelDesc::Box(r.require(section, &key(prefix, "kernel_size"))?),
                    "taps" => {
                        let k = key(prefix, "taps");
                        let text: String = r.require(section, &k)?;
                        KernelDesc::Taps(parse_taps(&text).map_err(|m| CliError::config(r.line_of(section, &k), m))?)
                    }
                    other => {
                        return Err(CliError::config(kline, format!("unknown kernel `{other}`; expected box or taps")))
                    }
                };
                let inner = NoiseDesc::read(r, section, &key(prefix, "inner."))?;
                NoiseDesc::Stationary {
                    kernel,
                    inner: Box::new(inner),
                }
            }
            "stripe" => {
                let k = key(prefix, "axis");
                let axis: String = r.get(section, &k, "column".to_string())?;
                let axis = match axis.as_str() {
                    "column" => StripeAxis::Column,
                    "row" => StripeAxis::Row,
                    other => {
                        return Err(CliError::config(
                            r.line_of(section, &k),
                            format!("unknown axis `{other}`; expected column or row"),
                        ))
                    }
                };
                NoiseDesc::Stripe {
                    sigma: r.require(section, &key(prefix, "sigma"))?,
                    axis,
                }
            }
            "periodic" => {
                let k = key(prefix, "components");
                let text: String = r.require(section, &k)?;
                NoiseDesc::Periodic {
                    components: parse_components(&text).map_err(|m| CliError::config(r.line_of(section, &k), m))?,
                }
            }
            "mixture" => {
                let k = key(prefix, "parts");
                let n: usize = r.require(section, &k)?;
                if n == 0 {
                    return Err(CliError::config(r.line_of(section, &k), "a mixture needs at least one part"));
                }
                let parts = (1..=n)
                    .map(|i| NoiseDesc::read(r, section, &format!("{prefix}part{i}.")))
                    .collect::<Result<Vec<_>>>()?;
                NoiseDesc::Mixture(parts)
            }
            other => {
                return Err(CliError::config(
                    line,
                    format!(
                        "unknown noise family `{other}`; expected gaussian, uniform, laplace, poisson, \
                         hetgaussian, stationary, stripe, periodic or mixture"
                    ),
                ))
            }
        };
        Ok(desc)
    }

    /// The config lines that [`NoiseDesc::read`] turns back into `self`.
    pub fn to_lines(&self, prefix: &str) -> Vec<(String, String)> {
        let mut out = Vec::new();
        self.push_lines(prefix, &mut out);
        out
    }

    fn push_lines(&self, prefix: &str, out: &mut Vec<(String, String)>) {
        let mut put = |name: &str, value: String| out.push((key(prefix, name), value));
        match self {
            NoiseDesc::Gaussian { sigma } => {
                put("family", "gaussian".into());
                put("sigma", sigma.to_string());
            }
            NoiseDesc::Uniform { halfwidth } => {
                put("family", "uniform".into());
                put("halfwidth", halfwidth.to_string());
            }
            NoiseDesc::Laplace { scale } => {
                put("family", "laplace".into());
                put("scale", scale.to_string());
            }
            NoiseDesc::Poisson { peak, reference } => {
                put("family", "poisson".into());
                put("peak", peak.to_string());
                reference_lines(reference, &mut put);
            }
            NoiseDesc::HetGaussian { alpha, beta, reference } => {
                put("family", "hetgaussian".into());
                put("alpha", alpha.to_string());
                put("beta", beta.to_string());
                reference_lines(reference, &mut put);
            }
            NoiseDesc::Stationary { kernel, inner } => {
                put("family", "stationary".into());
                match kernel {
                    KernelDesc::Box(size) => {
                        put("kernel", "box".into());
                        put("kernel_size", size.to_string());
                    }
                    KernelDesc::Taps(taps) => {
                        put("kernel", "taps".into());
                        let text: Vec<String> = taps.iter().map(|(u, v, w)| format!("{u}:{v}:{w}")).collect();
                        put("taps", text.join(", "));
                    }
                }
                inner.push_lines(&key(prefix, "inner."), out);
            }
            NoiseDesc::Stripe { sigma, axis } => {
                put("family", "stripe".into());
                put("sigma", sigma.to_string());
                put(
                    "axis",
                    match axis {
                        StripeAxis::Column => "column",
                        StripeAxis::Row => "row",
                    }
                    .into(),
                );
            }
            NoiseDesc::Periodic { components } => {
                put("family", "periodic".into());
                let text: Vec<String> = components
                    .iter()
                    .map(|c| format!("{}:{}:{}", c.k0, c.l0, c.amplitude))
                    .collect();
                put("components", text.join(", "));
            }
            NoiseDesc::Mixture(parts) => {
                put("family", "mixture".into());
                put("parts", parts.len().to_string());
                for (i, p) in parts.iter().enumerate() {
                    p.push_lines(&format!("{prefix}part{}.", i + 1), out);
                }
            }
        }
    }

    /// Renders [`NoiseDesc::to_lines`] as a `[noise]` section.
    pub fn to_section(&self) -> String {
        let mut s = String::from("[noise]\n");
        for (k, v) in self.to_lines("") {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }

    /// The concrete noise model on a `height x width` grid.
    pub fn resolve(&self, height: usize, width: usize) -> Result<NoiseSpec> {
        let spec = match self {
            NoiseDesc::Gaussian { sigma } => NoiseSpec::IidGaussian { sigma: *sigma },
            NoiseDesc::Uniform { halfwidth } => NoiseSpec::IidUniform { halfwidth: *halfwidth },
            NoiseDesc::Laplace { scale } => NoiseSpec::IidLaplace { scale: *scale },
            NoiseDesc::Poisson { peak, reference } => NoiseSpec::PoissonCentered {
                peak: *peak,
                reference: load_reference(reference, height, width)?,
            },
            NoiseDesc::HetGaussian { alpha, beta, reference } => NoiseSpec::HetGaussian {
                alpha: *alpha,
                beta: *beta,
                reference: load_reference(reference, height, width)?,
            },
            NoiseDesc::Stationary { kernel, inner } => NoiseSpec::Stationary {
                kernel: match kernel {
                    KernelDesc::Box(size) => box_kernel(height, width, *size),
                    KernelDesc::Taps(taps) => kernel_from_taps(height, width, taps),
                },
                inner: Box::new(inner.resolve(height, width)?),
            },
            NoiseDesc::Stripe { sigma, axis } => NoiseSpec::Stripe {
                sigma: *sigma,
                axis: *axis,
            },
            NoiseDesc::Periodic { components } => NoiseSpec::Periodic {
                components: components.clone(),
            },
            NoiseDesc::Mixture(parts) => NoiseSpec::Mixture(
                parts
                    .iter()
                    .map(|p| p.resolve(height, width))
                    .collect::<Result<Vec<_>>>()?,
            ),
        };
        spec.validate(height, width)?;
        Ok(spec)
    }

    /// Bins carrying periodic components, with their conjugates.
    pub fn periodic_bins(&self, height: usize, width: usize) -> Vec<(usize, usize)> {
        let mut bins = Vec::new();
        self.collect_periodic(height, width, &mut bins);
        bins.sort_unstable();
        bins.dedup();
        bins
    }

    fn collect_periodic(&self, height: usize, width: usize, out: &mut Vec<(usize, usize)>) {
        match self {
            NoiseDesc::Periodic { components } => {
                for c in components {
                    out.push((c.k0, c.l0));
                    out.push(((height - c.k0) % height, (width - c.l0) % width));
                }
            }
            NoiseDesc::Mixture(parts) => parts.iter().for_each(|p| p.collect_periodic(height, width, out)),
            _ => {}
        }
    }
}

fn read_reference(r: &mut Resolver, section: &str, prefix: &str) -> Result<Reference> {
    let source: String = r.get(section, &key(prefix, "reference"), "procedural".to_string())?;
    if source == "procedural" {
        Ok(Reference::Procedural {
            complexity: r.get(section, &key(prefix, "reference_complexity"), 8usize)?,
            seed: r.get(section, &key(prefix, "reference_seed"), 0u64)?,
        })
    } else {
        Ok(Reference::File(PathBuf::from(source)))
    }
}

fn reference_lines(reference: &Reference, put: &mut impl FnMut(&str, String)) {
    match reference {
        Reference::Procedural { complexity, seed } => {
            put("reference", "procedural".into());
            put("reference_complexity", complexity.to_string());
            put("reference_seed", seed.to_string());
        }
        Reference::File(path) => put("reference", path.display().to_string()),
    }
}

fn load_reference(reference: &Reference, height: usize, width: usize) -> Result<ImageGrid> {
    match reference {
        Reference::Procedural { complexity, seed } => Ok(gen_clean(RngSeed::new(*seed, 0), height, width, *complexity)?),
        Reference::File(path) => {
            let img = crate::image_io::read_image(path)?;
            if img.shape() != (height, width) {
                return Err(CliError::Invalid(format!(
                    "reference {} is {}x{}, expected {height}x{width}",
                    path.display(),
                    img.height(),
                    img.width()
                )));
            }
            Ok(img)
        }
    }
}

fn parse_triple<A: std::str::FromStr, B: std::str::FromStr>(item: &str) -> std::result::Result<(A, A, B), String> {
    let parts: Vec<&str> = item.split(':').map(str::trim).collect();
    let bad = || format!("expected `a:b:value`, got `{item}`");
    if parts.len() != 3 {
        return Err(bad());
    }
    Ok((
        parts[0].parse().map_err(|_| bad())?,
        parts[1].parse().map_err(|_| bad())?,
        parts[2].parse().map_err(|_| bad())?,
    ))
}

/// `du:dv:weight, ...`
pub fn parse_taps(text: &str) -> std::result::Result<Vec<(isize, isize, f64)>, String> {
    let taps: Vec<_> = split_list(text).map(parse_triple::<isize, f64>).collect::<std::result::Result<_, _>>()?;
    if taps.is_empty() {
        return Err("kernel needs at least one tap".into());
    }
    Ok(taps)
}

/// `k0:l0:amplitude, ...`
pub fn parse_components(text: &str) -> std::result::Result<Vec<PeriodicComponent>, String> {
    let comps: Vec<_> = split_list(text)
        .map(|item| parse_triple::<usize, f64>(item).map(|(k0, l0, amplitude)| PeriodicComponent { k0, l0, amplitude }))
        .collect::<std::result::Result<_, _>>()?;
    if comps.is_empty() {
        return Err("periodic noise needs at least one component".into());
    }
    Ok(comps)
}
