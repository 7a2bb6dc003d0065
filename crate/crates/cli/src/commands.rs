use std::path::Path;

use rsl_core::eval::{ape_report, iou, kitti_drift, length_range, plot};
use rsl_core::io::{
    list_files, read_crs, read_imu, read_json, read_lpc, read_lpc_raw, read_psc, read_trajectory, read_truth, write_atomic,
    write_crs, write_json, write_lpc, write_trajectory, write_truth, GridFile,
};
use rsl_core::osmloc::{localize_sequence, parse_osm, GeoOrigin, LocalizeParams, MapIndex};
use rsl_core::pipeline::{run_ablation, run_pipeline, write_synthetic, ExperimentConfig, PipelineError, SynthStage};
use rsl_core::preprocess::{align_to_radar, consolidate_labels, fov_filter, remove_ground, Extrinsic, ExtrinsicFile, FovSpec, LabelMap16to4};
use rsl_core::project::{accumulate_window, project_all, WindowSpec};
use rsl_core::radarproc::{apply_semantic_mask, k_strongest, mse, read_rps, write_rps, MaskMode};
use rsl_core::refine::{refine_labels, RefineParams};
use rsl_core::synthworld::TrajectoryKind;
use rsl_core::{Cloud, Error, OdomParams, Odometry, Raster, SemanticClass};
use serde_json::{json, Value};

use crate::overrides;
use crate::{AblationArgs, Command, ConfigArgs, EvalCommand, LocateArgs, OdomArgs, PreprocessArgs, ProjectArgs, RadarCommand, RefineArgs, SynthArgs};

/// Exit 2 for bad input or configuration, 3 for a failure while processing.
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Contract(_) | Error::Invalid(_) | Error::GridMismatch { .. } | Error::Json(_) => 2,
            _ => 3,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        Self {
            code: e.exit_code() as u8,
            message: e.to_string(),
        }
    }
}

fn invalid(message: impl Into<String>) -> CliError {
    CliError {
        code: 2,
        message: message.into(),
    }
}

type CliResult = Result<(), CliError>;

pub fn dispatch(command: Command) -> CliResult {
    match command {
        Command::Preprocess(a) => preprocess(a),
        Command::Refine(a) => refine(a),
        Command::Project(a) => project(a),
        Command::Radar { command } => radar(command),
        Command::Odom(a) => odom(a),
        Command::Locate(a) => locate(a),
        Command::Synth(a) => synth(a),
        Command::Eval { command } => eval(command),
        Command::Run(a) => run(&a.config),
        Command::Ablation(a) => ablation(a),
    }
}

/// JSON to a file, or pretty-printed to stdout.
fn emit(out: Option<&Path>, value: &impl serde::Serialize) -> CliResult {
    match out {
        Some(p) => write_json(p, value)?,
        None => println!("{}", serde_json::to_string_pretty(value).map_err(Error::from)?),
    }
    Ok(())
}

fn preprocess(a: PreprocessArgs) -> CliResult {
    let extrinsic = match &a.extrinsic {
        Some(p) => read_json::<ExtrinsicFile>(p)?.to_extrinsic::<f64>()?,
        None => Extrinsic::identity(),
    };
    let fov = FovSpec::new((0.5 * a.fov_deg).to_radians(), a.min_range, a.max_range)?;
    let (points, ids) = read_lpc_raw::<f64>(&a.input)?;
    let truth = read_truth(&a.input, points.len())?;
    let cloud = match &a.labelmap {
        Some(p) => consolidate_labels(points, &ids, &LabelMap16to4::from_json(&read_json::<Value>(p)?)?)?,
        None => {
            let labels = ids
                .iter()
                .map(|&id| SemanticClass::from_id(id).ok_or(Error::UnmappedLabel(id as u16)))
                .collect::<Result<Vec<_>, _>>()?;
            Cloud::new(points, labels)?
        }
    };
    let steps = |c: &Cloud| -> Result<Cloud, Error> {
        let aligned = align_to_radar(c, &extrinsic);
        Ok(fov_filter(&remove_ground(&aligned, a.ground_cell, a.ground_margin)?, &fov))
    };
    let out = steps(&cloud)?;
    write_lpc(&a.output, &out)?;
    if let Some(t) = truth {
        // the selection ignores labels, so the truth cloud keeps the same points
        write_truth(&a.output, steps(&cloud.with_labels(t)?)?.labels())?;
    }
    eprintln!("{} of {} points kept", out.len(), cloud.len());
    Ok(())
}

fn refine(a: RefineArgs) -> CliResult {
    let params: RefineParams<f64> = match &a.params {
        Some(p) => read_json(p)?,
        None => RefineParams::default(),
    };
    let cloud = read_lpc::<f64>(&a.input)?;
    let (refined, report) = refine_labels(&cloud, &params)?;
    write_lpc(&a.output, &refined)?;
    if let Some(t) = read_truth(&a.input, cloud.len())? {
        write_truth(&a.output, &t)?;
    }
    emit(a.report.as_deref(), &report)
}

fn project(a: ProjectArgs) -> CliResult {
    let grid = match &a.grid {
        Some(p) => read_json::<GridFile>(p)?,
        None => rsl_core::pipeline::ProjectStage::default().grid,
    }
    .grid::<f64>()?;
    let Some(poses) = &a.poses else {
        let cloud = read_lpc::<f64>(&a.input)?;
        write_crs(&a.output, &project_all(&cloud, &grid, 0.0)?)?;
        return Ok(());
    };
    let traj = read_trajectory::<f64>(poses)?;
    let dir = a.input.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let frames = list_files(dir, "lpc")?;
    let i = frames
        .iter()
        .position(|f| f.file_name() == a.input.file_name())
        .ok_or_else(|| invalid(format!("{} not found among its siblings", a.input.display())))?;
    if traj.len() != frames.len() {
        return Err(invalid(format!("{} poses for {} frames in {}", traj.len(), frames.len(), dir.display())));
    }
    let lo = i.saturating_sub(a.window);
    let hi = (i + a.window).min(frames.len() - 1);
    let raster = |j: usize| -> Result<Raster, Error> { project_all(&read_lpc::<f64>(&frames[j])?, &grid, traj.stamps()[j]) };
    let neighbors: Vec<usize> = (lo..=hi).filter(|&j| j != i).collect();
    let window = WindowSpec {
        frames_before: i - lo,
        frames_after: hi - i,
        relative_poses: neighbors.iter().map(|&j| traj.poses()[i].between(&traj.poses()[j])).collect(),
    };
    let rasters = neighbors.iter().map(|&j| raster(j)).collect::<Result<Vec<_>, _>>()?;
    write_crs(&a.output, &accumulate_window(&raster(i)?, &rasters, &window)?)?;
    Ok(())
}

fn radar(c: RadarCommand) -> CliResult {
    match c {
        RadarCommand::Filter {
            k,
            min_power,
            scan,
            output,
        } => {
            let set = k_strongest(&read_psc::<f64>(&scan)?, k, min_power)?;
            write_rps(&output, &set)?;
            eprintln!("{} returns kept", set.len());
        }
        RadarCommand::Mask {
            mode,
            raster,
            dilation,
            input,
            output,
        } => {
            let mode: MaskMode = mode.parse()?;
            let set = read_rps::<f64>(&input)?;
            let kept = apply_semantic_mask(&set, &read_crs::<f64>(&raster)?, mode, dilation)?;
            write_rps(&output, &kept)?;
            eprintln!("{} of {} returns kept", kept.len(), set.len());
        }
        RadarCommand::Mse { a, b } => {
            println!("{:.6}", mse(&read_psc::<f64>(&a)?, &read_psc::<f64>(&b)?)?);
        }
    }
    Ok(())
}

fn load_scans(dir: &Path) -> Result<Vec<rsl_core::Scan>, Error> {
    list_files(dir, "psc")?.iter().map(|f| read_psc::<f64>(f)).collect()
}

fn load_rasters(dir: &Path, expected: usize) -> Result<Vec<Raster>, CliError> {
    let files = list_files(dir, "crs")?;
    if files.len() != expected {
        return Err(invalid(format!("{expected} scans but {} rasters in {}", files.len(), dir.display())));
    }
    Ok(files.iter().map(|f| read_crs::<f64>(f)).collect::<Result<_, _>>()?)
}

fn odom(a: OdomArgs) -> CliResult {
    let mut p: OdomParams = match &a.params {
        Some(f) => read_json(f)?,
        None => OdomParams::default(),
    };
    if let Some(m) = &a.mode {
        p.mode = m.parse()?;
    }
    p.k = a.k.unwrap_or(p.k);
    p.keyframes = a.keyframes.unwrap_or(p.keyframes);
    p.min_power = a.min_power.unwrap_or(p.min_power);
    p.imu_prior_weight = a.imu_weight.unwrap_or(p.imu_prior_weight);
    if p.mode != MaskMode::NoneRemoved && a.rasters.is_none() {
        return Err(invalid(format!("mask mode {} needs --rasters", p.mode.label())));
    }
    let scans = load_scans(&a.scans)?;
    let rasters = a.rasters.as_deref().map(|d| load_rasters(d, scans.len())).transpose()?;
    let imu = a.imu.as_deref().map(read_imu).transpose()?;
    let mut odo = Odometry::new(p)?;
    for (i, scan) in scans.iter().enumerate() {
        odo.step(scan, rasters.as_ref().map(|r| &r[i]), imu.as_deref())
            .map_err(|e| CliError::from(Error::Frame { frame: i.to_string(), reason: e.to_string() }))?;
    }
    let (traj, reports) = odo.into_parts();
    write_trajectory(&a.out, &traj)?;
    let fallbacks = reports.iter().filter(|r| r.fallback).count();
    eprintln!("{} poses, {fallbacks} fallbacks", traj.len());
    emit(
        a.report.as_deref(),
        &json!({"params": p, "frames": reports.len(), "fallbacks": fallbacks, "reports": reports}),
    )
}

fn locate(a: LocateArgs) -> CliResult {
    let params: LocalizeParams<f64> = match &a.params {
        Some(f) => read_json(f)?,
        None => LocalizeParams::default(),
    };
    let origin = GeoOrigin::parse(&a.origin)?;
    let doc = std::fs::read_to_string(&a.map).map_err(|e| Error::Io { path: a.map.clone(), source: e })?;
    let map = MapIndex::new(parse_osm::<f64>(&doc, &origin)?, params.map_cell)?;
    let scans = load_scans(&a.scans)?;
    let rasters = load_rasters(&a.rasters, scans.len())?;
    let odom = read_trajectory::<f64>(&a.odom)?;
    let gt = a.gt.as_deref().map(read_trajectory::<f64>).transpose()?;
    let loc = localize_sequence(&scans, &rasters, &odom, &map, &params, gt.as_ref())?;
    write_trajectory(&a.out, &loc.trajectory)?;
    let applied = loc.frames.iter().filter(|f| f.applied).count();
    eprintln!("{} poses, {applied} map corrections", loc.trajectory.len());
    emit(
        a.report.as_deref(),
        &json!({
            "walls": map.segments().len(),
            "frames": loc.frames.len(),
            "corrections_applied": applied,
            "walls_tracked": loc.tracks.len(),
            "ape": loc.ape,
            "reports": loc.frames,
        }),
    )
}

fn synth(a: SynthArgs) -> CliResult {
    let spec = SynthStage {
        enabled: true,
        scene: a.scene,
        trajectory: a.traj.parse::<TrajectoryKind>()?,
        length_m: a.length,
        speed_m_s: a.speed,
        dt_s: a.dt,
        lidar: !a.no_lidar,
        corruption: rsl_core::synthworld::CorruptionSpec {
            building_to_vegetation_rate: a.building_to_vegetation,
            vegetation_to_building_rate: a.vegetation_to_building,
        },
        ..SynthStage::default()
    };
    spec.corruption.validate()?;
    let out = write_synthetic(&spec, a.seed, &a.out)?;
    eprintln!("{} frames written to {}", out.frames, a.out.display());
    Ok(())
}

fn parse_lengths(s: &str) -> Result<Vec<f64>, CliError> {
    let num = |v: &str| v.trim().parse::<f64>().map_err(|_| invalid(format!("bad length list '{s}'")));
    let parts: Vec<&str> = s.split(':').collect();
    match parts.as_slice() {
        [a, b, c] => Ok(length_range(num(a)?, num(b)?, num(c)?)?),
        [_] => s.split(',').map(num).collect(),
        _ => Err(invalid(format!("lengths '{s}' are neither start:stop:step nor a comma list"))),
    }
}

fn write_svg(path: &Path, svg: String) -> CliResult {
    Ok(write_atomic(path, svg.as_bytes())?)
}

fn eval(c: EvalCommand) -> CliResult {
    match c {
        EvalCommand::Drift {
            est,
            gt,
            lengths,
            out,
            svg,
        } => {
            let d = kitti_drift(&read_trajectory::<f64>(&est)?, &read_trajectory::<f64>(&gt)?, &parse_lengths(&lengths)?)?;
            if let Some(svg) = svg {
                let labels: Vec<String> = d.per_length.iter().map(|l| format!("{} m", l.length_m)).collect();
                let t: Vec<f64> = d.per_length.iter().map(|l| l.translation_pct).collect();
                write_svg(&svg, plot::bars_svg("Translation drift per length", "%", &labels, &[("estimate", t)]))?;
            }
            emit(out.as_deref(), &d)
        }
        EvalCommand::Ape { est, gt, out, svg } => {
            let (e, g) = (read_trajectory::<f64>(&est)?, read_trajectory::<f64>(&gt)?);
            let r = ape_report(&e, &g)?;
            if let Some(svg) = svg {
                let xy = |t: &rsl_core::Traj| t.poses().iter().map(|p| [p.x, p.y]).collect::<Vec<_>>();
                write_svg(&svg, plot::trajectory_svg("Trajectories", &[("ground truth", xy(&g)), ("estimate", xy(&e))]))?;
            }
            emit(out.as_deref(), &r)
        }
        EvalCommand::Iou { pred, gt, class, out } => {
            let class = SemanticClass::parse(&class)
                .filter(|c| SemanticClass::PROJECTED.contains(c))
                .ok_or_else(|| invalid(format!("class '{class}' has no raster channel")))?;
            let (p, g) = (read_crs::<f64>(&pred)?, read_crs::<f64>(&gt)?);
            let v = iou(p.channel(class).expect("projected"), g.channel(class).expect("projected"))?;
            emit(out.as_deref(), &json!({"class": class, "iou": v}))
        }
        EvalCommand::MsePlot { table, svg } => {
            let mut reader = csv::Reader::from_path(&table).map_err(Error::from)?;
            let (mut labels, mut mses, mut gains) = (Vec::new(), Vec::new(), Vec::new());
            for row in reader.deserialize::<(String, f64, f64)>() {
                let (l, m, g) = row.map_err(Error::from)?;
                labels.push(l);
                mses.push(m);
                gains.push(g);
            }
            if labels.is_empty() {
                return Err(invalid(format!("{} has no rows", table.display())));
            }
            write_svg(&svg, plot::bar_line_svg("MSE and improvement", &labels, ("MSE", &mses), ("improvement %", &gains)))
        }
    }
}

/// The config file with command-line overrides applied.
fn load_config(a: &ConfigArgs) -> Result<ExperimentConfig, CliError> {
    let text = std::fs::read_to_string(&a.config).map_err(|e| Error::Io { path: a.config.clone(), source: e })?;
    let mut doc: Value = serde_json::from_str(&text).map_err(|e| invalid(format!("{}: {e}", a.config.display())))?;
    for s in &a.set {
        overrides::apply(&mut doc, s).map_err(invalid)?;
    }
    if let Some(seed) = a.seed {
        doc["seed"] = json!(seed);
    }
    if let Some(out) = &a.out {
        doc["output_dir"] = json!(out);
    }
    if let Some(w) = a.workers {
        doc["workers"] = json!(w);
    }
    ExperimentConfig::from_json(doc).map_err(|e| invalid(format!("{}: {e}", a.config.display())))
}

fn run(a: &ConfigArgs) -> CliResult {
    let config = load_config(a)?;
    let m = run_pipeline(&config)?;
    for s in &m.stages {
        eprintln!("{:<10} {:>6} frames {:>6} files", s.stage, s.frames, s.files);
    }
    eprintln!("manifest: {}", config.output_dir.join(rsl_core::pipeline::Manifest::FILE_NAME).display());
    Ok(())
}

fn parse_switch(s: &str) -> Result<bool, CliError> {
    match s.trim().to_ascii_lowercase().as_str() {
        "on" | "true" | "yes" => Ok(true),
        "off" | "false" | "no" => Ok(false),
        other => Err(invalid(format!("IMU setting '{other}' is not on or off"))),
    }
}

fn ablation(a: AblationArgs) -> CliResult {
    let config = load_config(&a.config)?;
    let modes = a
        .modes
        .iter()
        .filter(|m| !m.trim().is_empty())
        .map(|m| m.trim().parse::<MaskMode>())
        .collect::<Result<Vec<_>, _>>()?;
    let imus = a.imu.iter().filter(|s| !s.trim().is_empty()).map(|s| parse_switch(s)).collect::<Result<Vec<_>, _>>()?;
    let table = run_ablation(&config, &modes, &imus)?;
    print!("{}", table.to_markdown());
    Ok(())
}
