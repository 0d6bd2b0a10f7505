//! The six subcommands. Each is a pure function of its configuration: settings
//! are resolved and validated first, the resolved configuration is echoed to
//! `config.resolved`, and only then does any computation start.

mod analysis;
mod training;

use std::path::{Path, PathBuf};

use nsf_core::{dft_forward, ImageGrid};

use crate::config::{Flag, RawConfig, Resolver};
use crate::error::{CliError, Result};
use crate::image_io::BitDepth;
use crate::report::OutDir;

pub use training::{k0_energy, off_row_energy};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    AnalyzeNoise,
    VarianceMap,
    VerifyEquivalence,
    Train,
    Destripe,
    Eval,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::AnalyzeNoise => "analyze-noise",
            Command::VarianceMap => "variance-map",
            Command::VerifyEquivalence => "verify-equivalence",
            Command::Train => "train",
            Command::Destripe => "destripe",
            Command::Eval => "eval",
        }
    }
}

/// Name of the resolved-configuration echo in every output directory.
pub const RESOLVED_CONFIG: &str = "config.resolved";

/// Runs `command` and returns the summary lines it reports.
pub fn run(command: Command, mut raw: RawConfig, out: &Path, seed: Option<u64>) -> Result<Vec<String>> {
    if let Some(s) = seed {
        raw.set("io", "seed", s.to_string());
    }
    let mut r = Resolver::new(raw);
    let job: Box<dyn FnOnce(&OutDir) -> Result<Vec<String>>> = match command {
        Command::AnalyzeNoise => analysis::analyze_noise(&mut r)?,
        Command::VarianceMap => analysis::variance_map(&mut r)?,
        Command::VerifyEquivalence => analysis::verify_equivalence(&mut r)?,
        Command::Train => training::train(&mut r)?,
        Command::Destripe => training::destripe(&mut r)?,
        Command::Eval => training::eval(&mut r)?,
    };
    r.finish()?;
    let dir = OutDir::create(out)?;
    dir.write_text(RESOLVED_CONFIG, &r.echo())?;
    job(&dir)
}

/// Reads the config file and runs the command.
pub fn run_file(command: Command, config: &Path, out: &Path, seed: Option<u64>) -> Result<Vec<String>> {
    run(command, RawConfig::load(config)?, out, seed)
}

/// Grid and seed shared by every command.
#[derive(Clone, Copy, Debug)]
struct Grid {
    seed: u64,
    height: usize,
    width: usize,
}

fn read_grid(r: &mut Resolver) -> Result<Grid> {
    let g = Grid {
        seed: r.get("io", "seed", 1u64)?,
        height: r.get("io", "height", 64usize)?,
        width: r.get("io", "width", 64usize)?,
    };
    if g.height == 0 || g.width == 0 {
        return Err(CliError::config(r.line_of("io", "height").max(r.line_of("io", "width")), "image size must be positive"));
    }
    Ok(g)
}

/// Where and how images are written.
#[derive(Clone, Debug)]
struct ImageOut {
    depth: BitDepth,
    extension: String,
}

fn read_image_out(r: &mut Resolver) -> Result<ImageOut> {
    let bits: u32 = r.get("io", "depth", 16)?;
    let depth = BitDepth::from_bits(bits)
        .ok_or_else(|| CliError::config(r.line_of("io", "depth"), format!("depth must be 8 or 16, got {bits}")))?;
    let extension: String = r.get("io", "format", "pgm".to_string())?;
    if extension != "pgm" && extension != "png" {
        return Err(CliError::config(r.line_of("io", "format"), format!("format must be pgm or png, got `{extension}`")));
    }
    Ok(ImageOut { depth, extension })
}

fn flag(r: &mut Resolver, section: &str, key: &str, default: bool) -> Result<bool> {
    Ok(r.get(section, key, Flag(default))?.0)
}

/// Sorted `.pgm` / `.png` files of a directory.
fn list_images(dir: &Path) -> Result<Vec<PathBuf>> {
    let entries = std::fs::read_dir(dir).map_err(|e| CliError::io(dir, e))?;
    let mut files = Vec::new();
    for e in entries {
        let p = e.map_err(|e| CliError::io(dir, e))?.path();
        let ext = p.extension().and_then(|s| s.to_str()).map(str::to_ascii_lowercase);
        if matches!(ext.as_deref(), Some("pgm") | Some("png")) {
            files.push(p);
        }
    }
    files.sort();
    if files.is_empty() {
        return Err(CliError::Invalid(format!("{}: no .pgm or .png images", dir.display())));
    }
    Ok(files)
}

fn spectrum_energy(x: &ImageGrid, keep: impl Fn(usize, usize) -> bool) -> f64 {
    let f = dft_forward(x);
    let (h, w) = x.shape();
    let mut e = 0.0;
    for k in 0..h {
        for l in 0..w {
            if keep(k, l) {
                e += f.get(k, l).norm_sqr();
            }
        }
    }
    e
}
