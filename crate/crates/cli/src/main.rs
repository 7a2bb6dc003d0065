mod commands;
mod overrides;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "rsl", version, about = "Semantic radar toolkit: label refinement, projection, odometry and map localization")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Align a labeled LiDAR cloud to the radar, drop ground and points
    /// outside the radar's field of view, consolidate labels.
    Preprocess(PreprocessArgs),
    /// Correct building/vegetation labels.
    Refine(RefineArgs),
    /// Rasterize a labeled cloud onto the radar's polar grid.
    Project(ProjectArgs),
    /// Radar scan filtering, semantic masking and image comparison.
    Radar {
        #[command(subcommand)]
        command: RadarCommand,
    },
    /// Radar odometry over a directory of scans.
    Odom(OdomArgs),
    /// Localize odometry against OpenStreetMap building footprints.
    Locate(LocateArgs),
    /// Simulate a labeled LiDAR and radar sequence.
    Synth(SynthArgs),
    /// Trajectory and raster metrics.
    Eval {
        #[command(subcommand)]
        command: EvalCommand,
    },
    /// Run the stages enabled in an experiment config.
    Run(RunArgs),
    /// Odometry drift for every mask mode and IMU setting.
    Ablation(AblationArgs),
}

#[derive(Args)]
struct PreprocessArgs {
    /// JSON with `translation` and either `rotation` or `rpy_deg`.
    #[arg(long)]
    extrinsic: Option<PathBuf>,
    /// Full vertical opening, degrees.
    #[arg(long, default_value_t = 10.0)]
    fov_deg: f64,
    #[arg(long, default_value_t = 2.0)]
    min_range: f64,
    #[arg(long, default_value_t = 80.0)]
    max_range: f64,
    /// JSON object mapping source ids to class names.
    #[arg(long)]
    labelmap: Option<PathBuf>,
    #[arg(long, default_value_t = 1.0)]
    ground_cell: f64,
    #[arg(long, default_value_t = 0.3)]
    ground_margin: f64,
    input: PathBuf,
    output: PathBuf,
}

#[derive(Args)]
struct RefineArgs {
    #[arg(long)]
    params: Option<PathBuf>,
    input: PathBuf,
    output: PathBuf,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct ProjectArgs {
    /// JSON with azimuth_bins, range_bins and range_resolution_m.
    #[arg(long)]
    grid: Option<PathBuf>,
    /// Neighboring frames accumulated on each side; they are the sibling
    /// .lpc files in the input's directory, in name order.
    #[arg(long, default_value_t = 0, requires = "poses")]
    window: usize,
    /// One pose per sibling frame.
    #[arg(long)]
    poses: Option<PathBuf>,
    input: PathBuf,
    output: PathBuf,
}

#[derive(Subcommand)]
enum RadarCommand {
    /// Keep the k strongest returns per azimuth.
    Filter {
        #[arg(long, default_value_t = 12)]
        k: usize,
        #[arg(long, default_value_t = 0.0)]
        min_power: f64,
        scan: PathBuf,
        output: PathBuf,
    },
    /// Drop returns by class raster.
    Mask {
        /// none, vehicle or only-building.
        #[arg(long)]
        mode: String,
        #[arg(long)]
        raster: PathBuf,
        #[arg(long, default_value_t = 1)]
        dilation: usize,
        input: PathBuf,
        output: PathBuf,
    },
    /// Mean squared difference of two power images.
    Mse { a: PathBuf, b: PathBuf },
}

#[derive(Args)]
struct OdomArgs {
    /// Odometry parameters JSON; flags below override it.
    #[arg(long)]
    params: Option<PathBuf>,
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    keyframes: Option<usize>,
    #[arg(long)]
    min_power: Option<f64>,
    /// Gyro CSV "timestamp_s,yaw_rate_rad_s".
    #[arg(long)]
    imu: Option<PathBuf>,
    #[arg(long)]
    imu_weight: Option<f64>,
    #[arg(long)]
    scans: PathBuf,
    #[arg(long)]
    rasters: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct LocateArgs {
    #[arg(long)]
    map: PathBuf,
    /// "lat,lon" of the local tangent plane origin.
    #[arg(long)]
    origin: String,
    #[arg(long)]
    scans: PathBuf,
    #[arg(long)]
    rasters: PathBuf,
    #[arg(long)]
    odom: PathBuf,
    #[arg(long)]
    gt: Option<PathBuf>,
    #[arg(long)]
    params: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    scene: Option<PathBuf>,
    /// straight, square-loop or s-curve.
    #[arg(long, default_value = "square-loop")]
    traj: String,
    #[arg(long, default_value_t = 200.0)]
    length: f64,
    #[arg(long, default_value_t = 5.0)]
    speed: f64,
    #[arg(long, default_value_t = 0.25)]
    dt: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Radar only.
    #[arg(long)]
    no_lidar: bool,
    /// Fraction of building points labeled vegetation.
    #[arg(long, default_value_t = 0.0)]
    building_to_vegetation: f64,
    #[arg(long, default_value_t = 0.0)]
    vegetation_to_building: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum EvalCommand {
    /// Relative drift per subsequence length.
    Drift {
        est: PathBuf,
        gt: PathBuf,
        /// start:stop:step or a comma list, meters.
        #[arg(long, default_value = "10:80:10")]
        lengths: String,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Per-length drift bars.
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Mean position error over matched stamps.
    Ape {
        est: PathBuf,
        gt: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Trajectory overlay.
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Intersection over union of one class channel.
    Iou {
        pred: PathBuf,
        gt: PathBuf,
        #[arg(long, default_value = "building")]
        class: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Bars of MSE with a line of improvement from a CSV with columns
    /// label,mse,improvement.
    MsePlot {
        table: PathBuf,
        #[arg(long)]
        svg: PathBuf,
    },
}

#[derive(Args)]
struct ConfigArgs {
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
    /// key.path=value, value parsed as JSON when possible; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    config: ConfigArgs,
}

#[derive(Args)]
struct AblationArgs {
    #[command(flatten)]
    config: ConfigArgs,
    #[arg(long, value_delimiter = ',', default_value = "none,vehicle,building")]
    modes: Vec<String>,
    /// on, off or both.
    #[arg(long, value_delimiter = ',', default_value = "on,off")]
    imu: Vec<String>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
