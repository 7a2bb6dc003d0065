//! Config-driven runs: optional simulation, LiDAR preprocessing, label
//! refinement, projection, odometry, map localization and evaluation, with
//! a hashed manifest of every output.

mod ablation;
mod config;
mod manifest;
mod stages;
mod synth;

use std::path::Path;

pub use ablation::{ablation_table, AblationCell, AblationTable};
pub use config::{
    DatasetPaths, EvalStage, ExperimentConfig, LocateStage, OdomStage, PreprocessStage, ProjectStage, RasterSource,
    RefineStage, SynthStage,
};
pub use manifest::{sha256_file, Failure, FileRecord, Manifest, StageRecord};
pub use synth::{write_synthetic, SynthOutput};

use crate::error::Error;
use crate::io::{list_files, read_crs, read_imu, read_psc, read_trajectory, write_atomic, write_json};
use manifest::RunDir;
use stages::{Inputs, StageFailure, StageResult};

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    /// The config was rejected before anything ran.
    #[error("invalid configuration: {0}")]
    Validation(Error),
    #[error("stage {stage} failed{}: {source}", frame.as_ref().map(|f| format!(" on frame {f}")).unwrap_or_default())]
    Stage {
        stage: String,
        frame: Option<String>,
        #[source]
        source: Error,
    },
}

impl PipelineError {
    /// 2 for a rejected config, 3 for a failed stage.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Validation(_) => 2,
            Self::Stage { .. } => 3,
        }
    }
}

type Stage = fn(&ExperimentConfig, &mut RunDir, &mut Inputs) -> StageResult<usize>;

fn with_workers<R: Send>(workers: usize, f: impl FnOnce() -> R + Send) -> Result<R, PipelineError> {
    if workers == 0 {
        return Ok(f());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| PipelineError::Validation(Error::Invalid(format!("worker pool: {e}"))))?;
    Ok(pool.install(f))
}

fn stage_error(stage: &str, f: StageFailure) -> PipelineError {
    PipelineError::Stage {
        stage: stage.to_string(),
        frame: f.frame,
        source: f.error,
    }
}

/// Validates `config`, then runs the enabled stages in order under
/// `config.output_dir`. A failing stage stops the run; the manifest written
/// so far records the failure.
pub fn run_pipeline(config: &ExperimentConfig) -> Result<Manifest, PipelineError> {
    config.validate().map_err(PipelineError::Validation)?;
    with_workers(config.workers, || run_stages(config))?
}

fn run_stages(config: &ExperimentConfig) -> Result<Manifest, PipelineError> {
    let setup = |e: Error| stage_error("setup", e.into());
    let mut dir = RunDir::new(&config.output_dir).map_err(setup)?;
    let cfg_path = dir.path("config.json");
    write_json(&cfg_path, config).map_err(setup)?;
    dir.track(&cfg_path).map_err(setup)?;
    dir.take_stage_files();

    let plan: [(&str, bool, Stage); 7] = [
        ("synth", config.synth.enabled, stages::synth),
        ("preprocess", config.preprocess.enabled, stages::preprocess),
        ("refine", config.refine.enabled, stages::refine),
        ("project", config.project.enabled, stages::project),
        ("odom", config.odom.enabled, stages::odom),
        ("locate", config.locate.enabled, stages::locate),
        ("eval", config.eval.enabled, stages::eval),
    ];
    let mut inputs = Inputs::from_dataset(config);
    let mut records = Vec::new();
    for (name, enabled, stage) in plan {
        if !enabled {
            continue;
        }
        match stage(config, &mut dir, &mut inputs) {
            Ok(frames) => records.push(StageRecord {
                stage: name.to_string(),
                frames,
                files: dir.take_stage_files(),
            }),
            Err(f) => {
                let failure = Failure {
                    stage: name.to_string(),
                    frame: f.frame.clone(),
                    error: f.error.to_string(),
                };
                // best effort: the stage error matters more than a manifest write error
                let _ = dir.finish(config, records, Some(failure));
                return Err(stage_error(name, f));
            }
        }
    }
    dir.finish(config, records, None).map_err(setup)
}

/// Runs the mask-mode by IMU drift table on the config's sequence, the
/// simulated one when `synth` is enabled. Writes `ablation/table.json`,
/// `table.md` and `drift.svg` plus the manifest.
pub fn run_ablation(config: &ExperimentConfig, modes: &[crate::radarproc::MaskMode], imus: &[bool]) -> Result<AblationTable, PipelineError> {
    if modes.is_empty() || imus.is_empty() {
        return Err(PipelineError::Validation(Error::Invalid(
            "ablation needs at least one mask mode and one IMU setting".into(),
        )));
    }
    config.validate().map_err(PipelineError::Validation)?;
    let d = &config.dataset;
    if !config.synth.enabled {
        let missing = [
            (d.scans_dir.is_none(), "dataset.scans_dir"),
            (d.rasters_dir.is_none(), "dataset.rasters_dir"),
            (d.ground_truth.is_none(), "dataset.ground_truth"),
            (imus.contains(&true) && d.imu.is_none(), "dataset.imu"),
        ];
        if let Some((_, what)) = missing.iter().find(|(m, _)| *m) {
            return Err(PipelineError::Validation(Error::Invalid(format!("ablation needs {what}"))));
        }
    }
    with_workers(config.workers, || ablation_in(config, modes, imus))?
}

fn ablation_in(config: &ExperimentConfig, modes: &[crate::radarproc::MaskMode], imus: &[bool]) -> Result<AblationTable, PipelineError> {
    let setup = |e: Error| stage_error("setup", e.into());
    let mut dir = RunDir::new(&config.output_dir).map_err(setup)?;
    let cfg_path = dir.path("config.json");
    write_json(&cfg_path, config).map_err(setup)?;
    dir.track(&cfg_path).map_err(setup)?;
    dir.take_stage_files();
    let mut inputs = Inputs::from_dataset(config);
    let mut records = Vec::new();
    if config.synth.enabled {
        let frames = stages::synth(config, &mut dir, &mut inputs).map_err(|f| stage_error("synth", f))?;
        records.push(StageRecord {
            stage: "synth".into(),
            frames,
            files: dir.take_stage_files(),
        });
    }
    let result = (|| -> StageResult<(AblationTable, usize)> {
        let need = |p: &Option<std::path::PathBuf>, what: &str| {
            p.clone().ok_or_else(|| StageFailure::from(Error::Invalid(format!("no {what}"))))
        };
        let scans = list_files(&need(&inputs.scans, "scans")?, "psc")?
            .iter()
            .map(|f| read_psc::<f64>(f))
            .collect::<crate::Result<Vec<_>>>()?;
        let rasters = list_files(&need(&inputs.rasters, "rasters")?, "crs")?
            .iter()
            .map(|f| read_crs::<f64>(f))
            .collect::<crate::Result<Vec<_>>>()?;
        let gt = read_trajectory::<f64>(&need(&inputs.ground_truth, "ground truth")?)?;
        let imu = match &inputs.imu {
            Some(p) if imus.contains(&true) => read_imu(p)?,
            _ => Vec::new(),
        };
        let table = ablation_table(&scans, &rasters, &gt, &imu, &config.odom.params, modes, imus, &config.eval.lengths)?;
        for (rel, body) in [
            ("ablation/table.json", serde_json::to_string_pretty(&table).map_err(Error::from)?),
            ("ablation/table.md", table.to_markdown()),
            ("ablation/drift.svg", table.to_svg()),
        ] {
            let p = dir.path(rel);
            write_atomic(&p, body.as_bytes())?;
            dir.track(&p)?;
        }
        Ok((table, scans.len()))
    })();
    match result {
        Ok((table, frames)) => {
            records.push(StageRecord {
                stage: "ablation".into(),
                frames,
                files: dir.take_stage_files(),
            });
            dir.finish(config, records, None).map_err(setup)?;
            Ok(table)
        }
        Err(f) => {
            let failure = Failure {
                stage: "ablation".into(),
                frame: f.frame.clone(),
                error: f.error.to_string(),
            };
            let _ = dir.finish(config, records, Some(failure));
            Err(stage_error("ablation", f))
        }
    }
}

/// Reads a run manifest back.
pub fn read_manifest(output_dir: &Path) -> crate::Result<Manifest> {
    crate::io::read_json(&output_dir.join(Manifest::FILE_NAME))
}
