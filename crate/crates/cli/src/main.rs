//! `mpf` — multi-pose fusion CT reconstruction pipeline.
//!
//! Subcommands mirror the pipeline stages and compose through files in the
//! output directory: `phantom` → `simulate` → `reconstruct` → `evaluate`,
//! with `render` for ad-hoc slice images and `run-all` for the whole
//! experiment in one go.

use clap::{Args, Parser, Subcommand};
use mpf_core::config::ExperimentConfig;
use mpf_core::denoise::Plane;
use mpf_core::error::Error;
use mpf_core::experiment::{self, experiment_jobs, Method, ReconJob};
use mpf_core::render::render_slice;
use std::path::PathBuf;

#[derive(Parser)]
#[command(
    name = "mpf",
    version,
    about = "Joint sparse-view CT reconstruction from multiple object poses"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Experiment config file (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output.dir` from the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the noise seed from the config.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the phantom volume and its reference renders.
    Phantom(CommonArgs),
    /// Simulate the per-pose sinograms from the phantom file.
    Simulate(CommonArgs),
    /// Run reconstruction jobs from the sinogram files.
    Reconstruct {
        #[command(flatten)]
        common: CommonArgs,
        /// One of mbir, pnp, mpf; omit to run every job.
        #[arg(long)]
        method: Option<String>,
        /// 1-based pose for single-pose methods.
        #[arg(long)]
        pose: Option<usize>,
    },
    /// Compute the NRMSE results table from the phantom and reconstructions.
    Evaluate(CommonArgs),
    /// Render one slice of a volume file as an 8-bit grayscale PNG.
    Render {
        #[command(flatten)]
        common: CommonArgs,
        /// Volume file to render.
        #[arg(long)]
        input: PathBuf,
        /// Slice family: xy, xz or yz.
        #[arg(long, default_value = "xy")]
        plane: String,
        /// Slice index; defaults to the central slice.
        #[arg(long)]
        index: Option<usize>,
        /// Window low edge; defaults to the config render window.
        #[arg(long)]
        lo: Option<f64>,
        /// Window high edge; defaults to the config render window.
        #[arg(long)]
        hi: Option<f64>,
        /// Output PNG path; defaults under <out>/renders/.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Run the whole experiment: phantom, scans, all reconstructions,
    /// evaluation and renders.
    RunAll(CommonArgs),
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::Shape { .. } => 1,
        Error::Solver { .. } | Error::Agent { .. } => 2,
        Error::Io { .. } | Error::Format { .. } => 3,
    }
}

fn load_config(common: &CommonArgs) -> Result<(ExperimentConfig, PathBuf), Error> {
    let mut cfg = ExperimentConfig::load(&common.config)?;
    if let Some(seed) = common.seed {
        cfg.noise.seed = Some(seed);
    }
    let out = common
        .out
        .clone()
        .or_else(|| cfg.output.dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));
    Ok((cfg, out))
}

fn parse_plane(s: &str) -> Result<Plane, Error> {
    match s {
        "xy" => Ok(Plane::Xy),
        "xz" => Ok(Plane::Xz),
        "yz" => Ok(Plane::Yz),
        other => Err(Error::config(format!(
            "unknown plane `{other}`, expected xy, xz or yz"
        ))),
    }
}

fn select_jobs(
    cfg: &ExperimentConfig,
    method: Option<&str>,
    pose: Option<usize>,
) -> Result<Vec<ReconJob>, Error> {
    let num_poses = cfg.poses.len();
    let Some(method) = method else {
        return Ok(experiment_jobs(num_poses));
    };
    let method = Method::parse(method)?;
    let job = match method {
        Method::Mpf => ReconJob {
            method,
            pose_index: None,
        },
        Method::Mbir | Method::Pnp => {
            let pose = pose.ok_or_else(|| {
                Error::config("--pose <1-based index> is required for single-pose methods")
            })?;
            if pose == 0 || pose > num_poses {
                return Err(Error::config(format!(
                    "--pose {pose} out of range, config has {num_poses} poses"
                )));
            }
            ReconJob {
                method,
                pose_index: Some(pose - 1),
            }
        }
    };
    Ok(vec![job])
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Phantom(common) => {
            let (cfg, out) = load_config(&common)?;
            experiment::stage_phantom(&cfg, &out)?;
            println!("wrote {}", experiment::phantom_path(&out).display());
        }
        Command::Simulate(common) => {
            let (cfg, out) = load_config(&common)?;
            let sinograms = experiment::stage_simulate(&cfg, &out)?;
            println!(
                "wrote {} sinograms under {}",
                sinograms.len(),
                out.join("sinograms").display()
            );
        }
        Command::Reconstruct {
            common,
            method,
            pose,
        } => {
            let (cfg, out) = load_config(&common)?;
            let jobs = select_jobs(&cfg, method.as_deref(), pose)?;
            for job in &jobs {
                experiment::stage_reconstruct(&cfg, &out, job)?;
                println!(
                    "wrote {}",
                    experiment::recon_path(&out, &job.label()).display()
                );
            }
        }
        Command::Evaluate(common) => {
            let (cfg, out) = load_config(&common)?;
            let table = experiment::stage_evaluate(&cfg, &out)?;
            print!("{}", table.render());
        }
        Command::Render {
            common,
            input,
            plane,
            index,
            lo,
            hi,
            output,
        } => {
            let (cfg, out) = load_config(&common)?;
            let plane = parse_plane(&plane)?;
            let v = mpf_core::io::read_volume(&input)?;
            let (nx, ny, nz) = v.dims();
            let index = index.unwrap_or(match plane {
                Plane::Xy => nz / 2,
                Plane::Xz => ny / 2,
                Plane::Yz => nx / 2,
            });
            let window = (
                lo.unwrap_or(cfg.render.window[0]),
                hi.unwrap_or(cfg.render.window[1]),
            );
            let path = match output {
                Some(p) => p,
                None => {
                    let dir = out.join("renders");
                    std::fs::create_dir_all(&dir)
                        .map_err(|e| Error::io(dir.display().to_string(), e))?;
                    let stem = input
                        .file_stem()
                        .map(|s| s.to_string_lossy().into_owned())
                        .unwrap_or_else(|| "volume".into());
                    dir.join(format!("{stem}_{}{}.png", plane_name(plane), index))
                }
            };
            render_slice(&v, plane, index, window, &path)?;
            println!("wrote {}", path.display());
        }
        Command::RunAll(common) => {
            let (cfg, out) = load_config(&common)?;
            let table = experiment::run_all(&cfg, &out)?;
            print!("{}", table.render());
            println!("artifacts under {}", out.display());
        }
    }
    Ok(())
}

fn plane_name(plane: Plane) -> &'static str {
    match plane {
        Plane::Xy => "xy",
        Plane::Xz => "xz",
        Plane::Yz => "yz",
    }
}

fn main() {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => {}
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(exit_code(&e));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_follow_error_class() {
        assert_eq!(exit_code(&Error::config("x")), 1);
        assert_eq!(
            exit_code(&Error::Solver {
                reason: "x".into(),
                trace: vec![]
            }),
            2
        );
        assert_eq!(exit_code(&Error::format("f", "magic", "bad")), 3);
    }

    #[test]
    fn plane_parsing() {
        assert!(parse_plane("xy").is_ok());
        assert!(parse_plane("zz").is_err());
    }
}
