//! End-to-end experiment orchestration: phantom, per-pose scans, the three
//! reconstruction variants, evaluation and rendering.
//!
//! Stages compose through files so the CLI subcommands can run them
//! separately; `run_all` chains them in memory and writes every artifact.
//!
//! Reconstruction variants per experiment:
//! - `mbir` (one per pose): that pose's data agent plus a single xy-plane TV
//!   prior agent.
//! - `pnp` (one per pose): that pose's data agent plus the three-plane
//!   denoiser prior.
//! - `mpf` (one per experiment): every pose's data agent plus the
//!   three-plane denoiser prior.

use crate::agents::{Agent, ConjugateProxAgent, ProxConfig, SliceDenoiserAgent};
use crate::config::ExperimentConfig;
use crate::denoise::{DenoiserConfig, DenoiserMethod, Plane};
use crate::error::{Error, Result};
use crate::io;
use crate::mace::{make_weights, make_weights_with_priors, mann_solve, ConvergenceReport};
use crate::phantom::generate_phantom;
use crate::projector::normal_operator_diag_mean;
use crate::render::render_slice;
use crate::simulate::simulate_pose_scan;
use crate::sinogram::Sinogram;
use crate::volume::{nrmse, Volume};
use rayon::prelude::*;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Mbir,
    Pnp,
    Mpf,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Mbir => "mbir",
            Method::Pnp => "pnp",
            Method::Mpf => "mpf",
        }
    }

    pub fn parse(s: &str) -> Result<Method> {
        match s {
            "mbir" => Ok(Method::Mbir),
            "pnp" => Ok(Method::Pnp),
            "mpf" => Ok(Method::Mpf),
            other => Err(Error::config(format!(
                "unknown method `{other}`, expected mbir, pnp or mpf"
            ))),
        }
    }
}

/// One reconstruction task: a method and, for single-pose methods, the
/// 0-based pose index.
#[derive(Debug, Clone, Copy)]
pub struct ReconJob {
    pub method: Method,
    pub pose_index: Option<usize>,
}

impl ReconJob {
    /// Stable label used for file names and the results table.
    pub fn label(&self) -> String {
        match self.pose_index {
            Some(k) => format!("{}_pose{}", self.method.as_str(), k + 1),
            None => self.method.as_str().to_string(),
        }
    }

    pub fn pose_label(&self) -> String {
        match self.pose_index {
            Some(k) => format!("pose_{}", k + 1),
            None => "all".to_string(),
        }
    }
}

/// The full job list for an experiment, in results-table order.
pub fn experiment_jobs(num_poses: usize) -> Vec<ReconJob> {
    let mut jobs = Vec::new();
    for method in [Method::Mbir, Method::Pnp] {
        for k in 0..num_poses {
            jobs.push(ReconJob {
                method,
                pose_index: Some(k),
            });
        }
    }
    jobs.push(ReconJob {
        method: Method::Mpf,
        pose_index: None,
    });
    jobs
}

#[derive(Debug, Clone)]
pub struct ResultRow {
    pub method: String,
    pub pose: String,
    pub nrmse: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Default)]
pub struct ResultsTable {
    pub rows: Vec<ResultRow>,
}

impl ResultsTable {
    /// Deterministic plain-text rendering (no timings, no paths).
    pub fn render(&self) -> String {
        let mut out = String::from("method  pose    nrmse\n");
        for row in &self.rows {
            let value = match (&row.nrmse, &row.error) {
                (Some(v), _) => format!("{v:.6}"),
                (None, Some(e)) => format!("failed: {e}"),
                (None, None) => "missing".to_string(),
            };
            out.push_str(&format!("{:<7} {:<7} {}\n", row.method, row.pose, value));
        }
        out.push_str(
            "\nnote: mbir rows run the consensus solver with a single xy-plane TV prior agent\n",
        );
        out
    }

    pub fn find(&self, method: &str, pose: &str) -> Option<&ResultRow> {
        self.rows
            .iter()
            .find(|r| r.method == method && r.pose == pose)
    }
}

pub fn phantom_path(out: &Path) -> PathBuf {
    out.join("phantom.mpfv")
}

pub fn sinogram_path(out: &Path, pose_index: usize) -> PathBuf {
    out.join("sinograms")
        .join(format!("pose_{}.mpfs", pose_index + 1))
}

pub fn recon_path(out: &Path, label: &str) -> PathBuf {
    out.join("recon").join(format!("{label}.mpfv"))
}

pub fn log_path(out: &Path, label: &str) -> PathBuf {
    out.join("logs").join(format!("{label}.txt"))
}

pub fn results_path(out: &Path) -> PathBuf {
    out.join("results.txt")
}

fn ensure_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| Error::io(path.display().to_string(), e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path.display().to_string(), e))
}

/// The reconstruction grid described by the config.
pub fn template_volume(cfg: &ExperimentConfig) -> Volume {
    let d = &cfg.phantom;
    Volume::centered((d.dims[0], d.dims[1], d.dims[2]), d.voxel_size_mm)
}

/// Generates the phantom and writes `phantom.mpfv` plus reference renders.
pub fn stage_phantom(cfg: &ExperimentConfig, out: &Path) -> Result<Volume> {
    ensure_dir(out)?;
    let phantom = generate_phantom(&cfg.phantom)?;
    io::write_volume(&phantom_path(out), &phantom)?;
    render_standard_slices(cfg, out, "phantom", &phantom)?;
    Ok(phantom)
}

/// Simulates every pose's scan from a phantom volume and writes the
/// sinogram files.
pub fn simulate_scans(cfg: &ExperimentConfig, phantom: &Volume, out: &Path) -> Result<Vec<Sinogram>> {
    ensure_dir(&out.join("sinograms"))?;
    let geometry = cfg.scan_geometry()?;
    let poses = cfg.rigid_poses()?;
    let seed = cfg.noise.seed.unwrap_or(0);
    let mut sinograms = Vec::with_capacity(poses.len());
    for (k, pose) in poses.iter().enumerate() {
        let sino = simulate_pose_scan(
            phantom,
            pose,
            &geometry,
            cfg.noise.alpha,
            seed.wrapping_add(k as u64),
        )?;
        io::write_sinogram(&sinogram_path(out, k), &sino)?;
        sinograms.push(sino);
    }
    Ok(sinograms)
}

/// File-composed variant: reads `phantom.mpfv` from the output directory.
pub fn stage_simulate(cfg: &ExperimentConfig, out: &Path) -> Result<Vec<Sinogram>> {
    let phantom = io::read_volume(&phantom_path(out))?;
    simulate_scans(cfg, &phantom, out)
}

fn read_sinograms(cfg: &ExperimentConfig, out: &Path) -> Result<Vec<Sinogram>> {
    (0..cfg.poses.len())
        .map(|k| io::read_sinogram(&sinogram_path(out, k)))
        .collect()
}

/// Resolves the global proximal strength: the configured value, or σ such
/// that σ⁻² equals the mean diagonal of the weighted normal operator of the
/// first pose's scan.
pub fn resolve_sigma(cfg: &ExperimentConfig, sinograms: &[Sinogram], template: &Volume) -> Result<f64> {
    if let Some(sigma) = cfg.solver.sigma {
        return Ok(sigma);
    }
    let s = &sinograms[0];
    let mean = normal_operator_diag_mean(s.weights(), &s.geometry, template);
    if !(mean > 0.0) {
        return Err(Error::config(
            "cannot derive solver.sigma automatically: the weighted normal operator is zero; \
             set solver.sigma explicitly",
        ));
    }
    Ok(1.0 / mean.sqrt())
}

fn prox_config(cfg: &ExperimentConfig, sigma: f64, sinogram: Sinogram) -> ProxConfig {
    ProxConfig {
        sigma,
        cg_tol: cfg.solver.cg_tol,
        cg_max_iters: cfg.solver.cg_max_iters,
        sinogram,
    }
}

/// Builds the agent stack and weights for one job.
fn build_stack(
    cfg: &ExperimentConfig,
    sinograms: &[Sinogram],
    sigma: f64,
    job: &ReconJob,
) -> Result<(Vec<Box<dyn Agent>>, Vec<f64>)> {
    let poses = cfg.rigid_poses()?;
    let beta = cfg.solver.beta;
    let mut agents: Vec<Box<dyn Agent>> = Vec::new();

    let data_indices: Vec<usize> = match job.pose_index {
        Some(k) => {
            if k >= poses.len() {
                return Err(Error::config(format!(
                    "pose index {} out of range for {} poses",
                    k + 1,
                    poses.len()
                )));
            }
            vec![k]
        }
        None => (0..poses.len()).collect(),
    };
    for &k in &data_indices {
        agents.push(Box::new(ConjugateProxAgent {
            cfg: prox_config(cfg, sigma, sinograms[k].clone()),
            pose: poses[k].clone(),
        }));
    }

    let weights = match job.method {
        Method::Mbir => {
            agents.push(Box::new(SliceDenoiserAgent {
                cfg: DenoiserConfig::new(
                    DenoiserMethod::Tv2d,
                    cfg.solver.denoiser.strength,
                    Plane::Xy,
                ),
            }));
            make_weights_with_priors(data_indices.len(), 1, beta)
        }
        Method::Pnp | Method::Mpf => {
            for d in cfg.prior_denoisers() {
                agents.push(Box::new(SliceDenoiserAgent { cfg: d }));
            }
            make_weights(data_indices.len(), beta)
        }
    };
    Ok((agents, weights))
}

/// Runs one reconstruction job from already-loaded sinograms.
pub fn reconstruct(
    cfg: &ExperimentConfig,
    sinograms: &[Sinogram],
    job: &ReconJob,
) -> Result<(Volume, ConvergenceReport)> {
    let template = template_volume(cfg);
    let sigma = resolve_sigma(cfg, sinograms, &template)?;
    let (agents, weights) = build_stack(cfg, sinograms, sigma, job)?;
    let solver_cfg = cfg.solver_config();
    mann_solve(&template, &agents, &weights, &solver_cfg)
}

/// File-composed variant: reads sinograms, writes the volume and the
/// convergence log.
pub fn stage_reconstruct(cfg: &ExperimentConfig, out: &Path, job: &ReconJob) -> Result<Volume> {
    let sinograms = read_sinograms(cfg, out)?;
    let (volume, report) = reconstruct(cfg, &sinograms, job)?;
    ensure_dir(&out.join("recon"))?;
    ensure_dir(&out.join("logs"))?;
    let label = job.label();
    io::write_volume(&recon_path(out, &label), &volume)?;
    write_text(&log_path(out, &label), &report.render_table())?;
    render_standard_slices(cfg, out, &label, &volume)?;
    Ok(volume)
}

/// Reads the phantom and every reconstruction, writes `results.txt`.
pub fn stage_evaluate(cfg: &ExperimentConfig, out: &Path) -> Result<ResultsTable> {
    let phantom = io::read_volume(&phantom_path(out))?;
    let mut table = ResultsTable::default();
    for job in experiment_jobs(cfg.poses.len()) {
        let label = job.label();
        let row = match io::read_volume(&recon_path(out, &label))
            .and_then(|v| nrmse(&v, &phantom))
        {
            Ok(stats) => ResultRow {
                method: job.method.as_str().to_string(),
                pose: job.pose_label(),
                nrmse: Some(stats.nrmse),
                error: None,
            },
            Err(e) => ResultRow {
                method: job.method.as_str().to_string(),
                pose: job.pose_label(),
                nrmse: None,
                error: Some(e.to_string()),
            },
        };
        table.rows.push(row);
    }
    write_text(&results_path(out), &table.render())?;
    Ok(table)
}

/// Central-slice renders (xy and yz) of a volume under the config window.
pub fn render_standard_slices(
    cfg: &ExperimentConfig,
    out: &Path,
    label: &str,
    v: &Volume,
) -> Result<()> {
    ensure_dir(&out.join("renders"))?;
    let window = (cfg.render.window[0], cfg.render.window[1]);
    let (nx, _, nz) = v.dims();
    let z = nz / 2;
    let x = nx / 2;
    render_slice(
        v,
        Plane::Xy,
        z,
        window,
        &out.join("renders").join(format!("{label}_xy{z}.png")),
    )?;
    render_slice(
        v,
        Plane::Yz,
        x,
        window,
        &out.join("renders").join(format!("{label}_yz{x}.png")),
    )?;
    Ok(())
}

/// The whole experiment in memory: phantom, scans, every reconstruction row
/// (run concurrently), evaluation, renders, results table. Failures of
/// individual rows are recorded in the table; upstream failures abort.
pub fn run_all(cfg: &ExperimentConfig, out: &Path) -> Result<ResultsTable> {
    ensure_dir(out)?;
    let phantom = stage_phantom(cfg, out)?;
    let sinograms = simulate_scans(cfg, &phantom, out)?;
    ensure_dir(&out.join("recon"))?;
    ensure_dir(&out.join("logs"))?;

    let jobs = experiment_jobs(cfg.poses.len());
    let outcomes: Vec<(ReconJob, Result<(Volume, ConvergenceReport)>)> = jobs
        .par_iter()
        .map(|job| (*job, reconstruct(cfg, &sinograms, job)))
        .collect();

    let mut table = ResultsTable::default();
    for (job, outcome) in outcomes {
        let label = job.label();
        let row = match outcome {
            Ok((volume, report)) => {
                io::write_volume(&recon_path(out, &label), &volume)?;
                write_text(&log_path(out, &label), &report.render_table())?;
                render_standard_slices(cfg, out, &label, &volume)?;
                match nrmse(&volume, &phantom) {
                    Ok(stats) => ResultRow {
                        method: job.method.as_str().to_string(),
                        pose: job.pose_label(),
                        nrmse: Some(stats.nrmse),
                        error: None,
                    },
                    Err(e) => ResultRow {
                        method: job.method.as_str().to_string(),
                        pose: job.pose_label(),
                        nrmse: None,
                        error: Some(e.to_string()),
                    },
                }
            }
            Err(e) => ResultRow {
                method: job.method.as_str().to_string(),
                pose: job.pose_label(),
                nrmse: None,
                error: Some(e.to_string()),
            },
        };
        table.rows.push(row);
    }
    write_text(&results_path(out), &table.render())?;
    Ok(table)
}
