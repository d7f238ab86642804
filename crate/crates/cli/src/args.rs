use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum, ValueHint};
use meshsplat::fit::Stage;
use meshsplat::splat::BindingMode;

#[derive(Debug, Parser)]
#[command(name = "meshsplat", version, about = "Mesh-bound Gaussian splatting")]
pub struct Cli {
    /// TOML file whose keys mirror the flags; flags given on the command line win.
    #[arg(long, global = true, value_hint = ValueHint::FilePath)]
    pub config: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true, value_parser = clap::value_parser!(u32).range(1..))]
    pub threads: Option<u32>,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Repeat for more logging.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Seed Gaussians on every triangle of a mesh.
    Bind(BindArgs),
    /// Optimise a scene bundle against its training images.
    Fit(FitArgs),
    /// Render a scene, optionally following a deformed frame sequence.
    Render(RenderArgs),
    /// Turn free Gaussians into a mesh or an oriented point set.
    ExtractMesh(ExtractArgs),
    /// PSNR and SSIM of renders against ground truth.
    Eval(EvalArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Bind(_) => "bind",
            Command::Fit(_) => "fit",
            Command::Render(_) => "render",
            Command::ExtractMesh(_) => "extract-mesh",
            Command::Eval(_) => "eval",
        }
    }
}

fn parse_mode(s: &str) -> Result<BindingMode, String> {
    s.parse().map_err(|e: meshsplat::Error| e.to_string())
}

fn parse_stage(s: &str) -> Result<Stage, String> {
    s.parse().map_err(|e: meshsplat::Error| e.to_string())
}

/// `r,g,b` in `[0, 1]`, or one of `black` / `white`.
pub fn parse_color(s: &str) -> Result<[f64; 3], String> {
    match s {
        "black" => return Ok([0.0; 3]),
        "white" => return Ok([1.0; 3]),
        _ => {}
    }
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|_| format!("bad color component '{p}'")))
        .collect::<Result<_, _>>()?;
    match parts[..] {
        [r, g, b] if parts.iter().all(|v| (0.0..=1.0).contains(v)) => Ok([r, g, b]),
        [v] if (0.0..=1.0).contains(&v) => Ok([v; 3]),
        _ => Err(format!("expected r,g,b in [0, 1], got '{s}'")),
    }
}

#[derive(Debug, Args)]
pub struct BindArgs {
    #[arg(long, value_hint = ValueHint::FilePath)]
    pub mesh: PathBuf,
    #[arg(long, default_value = "shape-aware", value_parser = parse_mode)]
    pub mode: BindingMode,
    /// Gaussians per triangle.
    #[arg(long = "per-tri", default_value_t = 3, value_parser = clap::value_parser!(u16).range(1..))]
    pub per_tri: u16,
    #[arg(long, default_value_t = 10.0)]
    pub beta: f64,
    /// Thickness of on-mesh-flat Gaussians.
    #[arg(long = "flat-eps", default_value_t = 1e-5)]
    pub flat_eps: f64,
    #[arg(long = "sh-degree", default_value_t = 3, value_parser = clap::value_parser!(u8).range(0..=3))]
    pub sh_degree: u8,
    #[arg(long, value_hint = ValueHint::FilePath)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Scene bundle (TOML).
    #[arg(long, value_hint = ValueHint::FilePath)]
    pub scene: PathBuf,
    #[arg(long, value_parser = parse_stage)]
    pub stage: Stage,
    #[arg(long, default_value_t = 2000)]
    pub steps: usize,
    /// Training width in pixels; height keeps the aspect ratio.
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    pub res: Option<u32>,
    #[arg(long, default_value = "black", value_parser = parse_color)]
    pub bg: [f64; 3],
    /// Output checkpoint.
    #[arg(long, value_hint = ValueHint::FilePath)]
    pub out: PathBuf,
    /// Loss trace. Defaults to `<out>.loss.txt`.
    #[arg(long, value_hint = ValueHint::FilePath)]
    pub trace: Option<PathBuf>,
    /// Preview directory. Defaults to `<out>.previews`.
    #[arg(long = "preview-dir", value_hint = ValueHint::DirPath)]
    pub preview_dir: Option<PathBuf>,
    #[arg(long = "no-preview")]
    pub no_preview: bool,
    /// Free Gaussians seeded when a stage-1 bundle has no checkpoint.
    #[arg(long = "init-count", default_value_t = 5000)]
    pub init_count: usize,
    #[arg(long = "init-radius", default_value_t = 1.0)]
    pub init_radius: f64,
    #[arg(long = "sh-degree", default_value_t = 3, value_parser = clap::value_parser!(u8).range(0..=3))]
    pub sh_degree: u8,
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    #[arg(long, value_hint = ValueHint::FilePath)]
    pub scene: PathBuf,
    /// Cameras to render; defaults to the bundle's.
    #[arg(long, value_hint = ValueHint::FilePath)]
    pub cameras: Option<PathBuf>,
    /// Directory of `frame_NNNN.obj` deformations of the bound mesh.
    #[arg(long, value_hint = ValueHint::DirPath)]
    pub frames: Option<PathBuf>,
    #[arg(long, default_value = "black", value_parser = parse_color)]
    pub bg: [f64; 3],
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    pub res: Option<u32>,
    /// Also write depth, normal and alpha maps.
    #[arg(long)]
    pub aux: bool,
    #[arg(long, value_hint = ValueHint::DirPath)]
    pub out: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ExtractMethod {
    Mc,
    PoissonExport,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Placement {
    Midpoint,
    Interpolate,
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    /// Free-Gaussian checkpoint.
    #[arg(long, value_hint = ValueHint::FilePath)]
    pub ckpt: PathBuf,
    #[arg(long, value_enum, default_value = "mc")]
    pub method: ExtractMethod,
    #[arg(long, default_value_t = meshsplat::meshx::DEFAULT_RESOLUTION)]
    pub res: usize,
    #[arg(long, default_value_t = meshsplat::meshx::DEFAULT_TAU)]
    pub tau: f64,
    #[arg(long, default_value_t = meshsplat::meshx::DEFAULT_ISO)]
    pub iso: f64,
    #[arg(long, value_enum, default_value = "midpoint")]
    pub placement: Placement,
    #[arg(long, value_hint = ValueHint::FilePath)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long, value_hint = ValueHint::DirPath)]
    pub renders: PathBuf,
    #[arg(long, value_hint = ValueHint::DirPath)]
    pub gt: PathBuf,
    /// Background used to flatten images with alpha.
    #[arg(long, default_value = "black", value_parser = parse_color)]
    pub bg: [f64; 3],
    /// Also write the report here.
    #[arg(long, value_hint = ValueHint::FilePath)]
    pub out: Option<PathBuf>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn colors() {
        assert_eq!(parse_color("white").unwrap(), [1.0; 3]);
        assert_eq!(parse_color("0.1, 0.2,0.3").unwrap(), [0.1, 0.2, 0.3]);
        assert_eq!(parse_color("0.5").unwrap(), [0.5; 3]);
        assert!(parse_color("1,2,3").is_err());
        assert!(parse_color("1,1").is_err());
        assert!(parse_color("red").is_err());
    }

    #[test]
    fn clap_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
