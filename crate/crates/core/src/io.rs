//! On-disk formats.
//!
//! * `.lpc` labeled cloud: little-endian, magic `LPC1`, `u32` point count,
//!   then per point `f32 x, y, z, intensity` and a `u8` class id.
//! * `.psc` polar scan: row-major little-endian `f32` power values with a
//!   JSON sidecar at `<file>.json`.
//! * `.crs` class raster: three row-major `u8` channels (building, vehicle,
//!   vegetation) with the same sidecar plus a `channels` field.
//! * `.lpc` ground truth: one `u8` class id per point at `<file>.truth`,
//!   written by the simulator for scoring.
//! * trajectory CSV `timestamp_s,x_m,y_m,theta_rad` and IMU CSV
//!   `timestamp_s,yaw_rate_rad_s`.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::se2::Pose2;
use crate::types::{ClassRaster, GridSpec, LabeledCloud, Mask, Point3, PolarScan, SemanticClass, Trajectory};

pub const LPC_MAGIC: &[u8; 4] = b"LPC1";
const LPC_RECORD: usize = 17;

pub const CHANNEL_NAMES: [&str; 3] = ["building", "vehicle", "vegetation"];

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

/// Writes through a temporary file so readers never see partial output.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let tmp = path.with_extension(format!(
        "{}.tmp",
        path.extension().and_then(|e| e.to_str()).unwrap_or("")
    ));
    let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    f.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
    drop(f);
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

fn format_err(kind: &'static str, path: &Path, reason: impl Into<String>) -> Error {
    Error::Format {
        kind,
        path: path.to_path_buf(),
        reason: reason.into(),
    }
}

/// Encodes points and raw `u8` class ids.
pub fn encode_lpc<T: Real>(points: &[Point3<T>], ids: &[u8]) -> Vec<u8> {
    let mut buf = Vec::with_capacity(8 + points.len() * LPC_RECORD);
    buf.extend_from_slice(LPC_MAGIC);
    buf.extend_from_slice(&(points.len() as u32).to_le_bytes());
    for (p, id) in points.iter().zip(ids) {
        for v in [p.x, p.y, p.z, p.intensity] {
            buf.extend_from_slice(&v.as_f32().to_le_bytes());
        }
        buf.push(*id);
    }
    buf
}

/// Decodes an `.lpc` payload into points and raw class ids without
/// interpreting the ids.
pub fn decode_lpc_raw<T: Real>(bytes: &[u8], path: &Path) -> Result<(Vec<Point3<T>>, Vec<u8>)> {
    if bytes.len() < 8 || &bytes[..4] != LPC_MAGIC {
        return Err(format_err("lpc", path, "missing LPC1 header"));
    }
    let n = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let body = &bytes[8..];
    if body.len() != n * LPC_RECORD {
        return Err(format_err(
            "lpc",
            path,
            format!("expected {} bytes for {n} points, found {}", n * LPC_RECORD, body.len()),
        ));
    }
    let mut points = Vec::with_capacity(n);
    let mut ids = Vec::with_capacity(n);
    for rec in body.chunks_exact(LPC_RECORD) {
        let f = |i: usize| T::lit(f32::from_le_bytes(rec[i * 4..i * 4 + 4].try_into().unwrap()) as f64);
        let p = Point3 {
            x: f(0),
            y: f(1),
            z: f(2),
            intensity: f(3),
        };
        if !p.is_finite() {
            return Err(format_err("lpc", path, format!("point {} is not finite", points.len())));
        }
        points.push(p);
        ids.push(rec[16]);
    }
    Ok((points, ids))
}

pub fn read_lpc_raw<T: Real>(path: &Path) -> Result<(Vec<Point3<T>>, Vec<u8>)> {
    decode_lpc_raw(&read(path)?, path)
}

pub fn read_lpc<T: Real>(path: &Path) -> Result<LabeledCloud<T>> {
    let (points, ids) = read_lpc_raw(path)?;
    let labels = ids
        .iter()
        .enumerate()
        .map(|(i, &id)| {
            SemanticClass::from_id(id)
                .ok_or_else(|| format_err("lpc", path, format!("point {i} has class id {id}")))
        })
        .collect::<Result<Vec<_>>>()?;
    LabeledCloud::new(points, labels)
}

pub fn write_lpc<T: Real>(path: &Path, cloud: &LabeledCloud<T>) -> Result<()> {
    let ids: Vec<u8> = cloud.labels().iter().map(|l| l.id()).collect();
    write_atomic(path, &encode_lpc(cloud.points(), &ids))
}

pub fn truth_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".truth");
    PathBuf::from(s)
}

pub fn write_truth(path: &Path, labels: &[SemanticClass]) -> Result<()> {
    let ids: Vec<u8> = labels.iter().map(|l| l.id()).collect();
    write_atomic(&truth_path(path), &ids)
}

/// True labels for the cloud at `path`, if its sidecar exists.
pub fn read_truth(path: &Path, points: usize) -> Result<Option<Vec<SemanticClass>>> {
    let side = truth_path(path);
    if !side.exists() {
        return Ok(None);
    }
    let ids = read(&side)?;
    if ids.len() != points {
        return Err(format_err("truth", &side, format!("{} labels for {points} points", ids.len())));
    }
    ids.iter()
        .map(|&id| SemanticClass::from_id(id).ok_or_else(|| format_err("truth", &side, format!("class id {id}"))))
        .collect::<Result<Vec<_>>>()
        .map(Some)
}

/// JSON sidecar describing a polar grid file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSidecar {
    pub azimuth_bins: usize,
    pub range_bins: usize,
    pub range_resolution_m: f64,
    pub timestamp_s: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub channels: Option<Vec<String>>,
}

impl GridSidecar {
    pub fn grid<T: Real>(&self) -> Result<GridSpec<T>> {
        GridSpec::new(self.azimuth_bins, self.range_bins, T::lit(self.range_resolution_m))
    }
}

/// Grid description used by `--grid` arguments: sidecar without timestamp.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridFile {
    pub azimuth_bins: usize,
    pub range_bins: usize,
    pub range_resolution_m: f64,
}

impl GridFile {
    pub fn grid<T: Real>(&self) -> Result<GridSpec<T>> {
        GridSpec::new(self.azimuth_bins, self.range_bins, T::lit(self.range_resolution_m))
    }

    pub fn from_grid<T: Real>(g: &GridSpec<T>) -> Self {
        Self {
            azimuth_bins: g.azimuth_bins,
            range_bins: g.range_bins,
            range_resolution_m: g.range_resolution.as_f64(),
        }
    }
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

fn read_sidecar(path: &Path) -> Result<GridSidecar> {
    let side = sidecar_path(path);
    let text = read(&side)?;
    serde_json::from_slice(&text).map_err(|e| format_err("sidecar", &side, e.to_string()))
}

fn write_sidecar(path: &Path, sidecar: &GridSidecar) -> Result<()> {
    let mut text = serde_json::to_vec_pretty(sidecar)?;
    text.push(b'\n');
    write_atomic(&sidecar_path(path), &text)
}

pub fn write_psc<T: Real>(path: &Path, scan: &PolarScan<T>) -> Result<()> {
    let mut buf = Vec::with_capacity(scan.power().len() * 4);
    for v in scan.power() {
        buf.extend_from_slice(&v.as_f32().to_le_bytes());
    }
    write_atomic(path, &buf)?;
    write_sidecar(
        path,
        &GridSidecar {
            azimuth_bins: scan.grid.azimuth_bins,
            range_bins: scan.grid.range_bins,
            range_resolution_m: scan.grid.range_resolution.as_f64(),
            timestamp_s: scan.timestamp,
            channels: None,
        },
    )
}

pub fn read_psc<T: Real>(path: &Path) -> Result<PolarScan<T>> {
    let side = read_sidecar(path)?;
    let grid = side.grid::<T>()?;
    let bytes = read(path)?;
    if bytes.len() != grid.cells() * 4 {
        return Err(format_err(
            "psc",
            path,
            format!("{} bytes do not match grid {}", bytes.len(), grid.describe()),
        ));
    }
    let power = bytes
        .chunks_exact(4)
        .map(|c| T::lit(f32::from_le_bytes(c.try_into().unwrap()) as f64))
        .collect();
    PolarScan::new(grid, power, side.timestamp_s).map_err(|e| format_err("psc", path, e.to_string()))
}

pub fn write_crs<T: Real>(path: &Path, raster: &ClassRaster<T>) -> Result<()> {
    let mut buf = Vec::with_capacity(raster.grid.cells() * 3);
    for ch in raster.channels() {
        buf.extend(ch.cells().iter().map(|&c| c as u8));
    }
    write_atomic(path, &buf)?;
    write_sidecar(
        path,
        &GridSidecar {
            azimuth_bins: raster.grid.azimuth_bins,
            range_bins: raster.grid.range_bins,
            range_resolution_m: raster.grid.range_resolution.as_f64(),
            timestamp_s: raster.timestamp,
            channels: Some(CHANNEL_NAMES.iter().map(|s| s.to_string()).collect()),
        },
    )
}

pub fn read_crs<T: Real>(path: &Path) -> Result<ClassRaster<T>> {
    let side = read_sidecar(path)?;
    match &side.channels {
        Some(ch) if ch.iter().map(String::as_str).eq(CHANNEL_NAMES) => {}
        other => {
            return Err(format_err(
                "crs",
                path,
                format!("expected channels {CHANNEL_NAMES:?}, found {other:?}"),
            ))
        }
    }
    let grid = side.grid::<T>()?;
    let bytes = read(path)?;
    let n = grid.cells();
    if bytes.len() != 3 * n {
        return Err(format_err(
            "crs",
            path,
            format!("{} bytes do not match 3 channels of grid {}", bytes.len(), grid.describe()),
        ));
    }
    let mut channels = Vec::with_capacity(3);
    for chunk in bytes.chunks_exact(n) {
        if let Some(v) = chunk.iter().find(|&&b| b > 1) {
            return Err(format_err("crs", path, format!("non-binary cell value {v}")));
        }
        channels.push(Mask::from_cells(
            grid.azimuth_bins,
            grid.range_bins,
            chunk.iter().map(|&b| b == 1).collect(),
        )?);
    }
    let vegetation = channels.pop().unwrap();
    let vehicle = channels.pop().unwrap();
    let building = channels.pop().unwrap();
    Ok(ClassRaster {
        grid,
        timestamp: side.timestamp_s,
        building,
        vehicle,
        vegetation,
    })
}

#[derive(Debug, Serialize, Deserialize)]
struct TrajectoryRow {
    timestamp_s: f64,
    x_m: f64,
    y_m: f64,
    theta_rad: f64,
}

pub fn write_trajectory<T: Real>(path: &Path, traj: &Trajectory<T>) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for (t, p) in traj.iter() {
        w.serialize(TrajectoryRow {
            timestamp_s: t,
            x_m: p.x.as_f64(),
            y_m: p.y.as_f64(),
            theta_rad: p.theta.as_f64(),
        })?;
    }
    if traj.is_empty() {
        w.write_record(["timestamp_s", "x_m", "y_m", "theta_rad"])?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Invalid(e.to_string()))?;
    write_atomic(path, &bytes)
}

pub fn read_trajectory<T: Real>(path: &Path) -> Result<Trajectory<T>> {
    let bytes = read(path)?;
    let mut r = csv::Reader::from_reader(bytes.as_slice());
    let headers = r.headers()?.clone();
    if headers.iter().ne(["timestamp_s", "x_m", "y_m", "theta_rad"]) {
        return Err(format_err("trajectory", path, format!("unexpected header {headers:?}")));
    }
    let mut traj = Trajectory::new();
    for row in r.deserialize::<TrajectoryRow>() {
        let row = row?;
        traj.push(
            row.timestamp_s,
            Pose2::new(T::lit(row.x_m), T::lit(row.y_m), T::lit(row.theta_rad)),
        )
        .map_err(|e| format_err("trajectory", path, e.to_string()))?;
    }
    Ok(traj)
}

/// One gyro reading.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImuSample {
    pub timestamp_s: f64,
    pub yaw_rate_rad_s: f64,
}

pub fn write_imu(path: &Path, samples: &[ImuSample]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for s in samples {
        w.serialize(s)?;
    }
    if samples.is_empty() {
        w.write_record(["timestamp_s", "yaw_rate_rad_s"])?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Invalid(e.to_string()))?;
    write_atomic(path, &bytes)
}

pub fn read_imu(path: &Path) -> Result<Vec<ImuSample>> {
    let bytes = read(path)?;
    let mut r = csv::Reader::from_reader(bytes.as_slice());
    let headers = r.headers()?.clone();
    if headers.iter().ne(["timestamp_s", "yaw_rate_rad_s"]) {
        return Err(format_err("imu", path, format!("unexpected header {headers:?}")));
    }
    let samples = r.deserialize().collect::<std::result::Result<Vec<ImuSample>, _>>()?;
    if samples.windows(2).any(|w| !(w[1].timestamp_s > w[0].timestamp_s)) {
        return Err(format_err("imu", path, "timestamps must increase"));
    }
    Ok(samples)
}

pub fn read_json<D: serde::de::DeserializeOwned>(path: &Path) -> Result<D> {
    let bytes = read(path)?;
    serde_json::from_slice(&bytes).map_err(|e| format_err("json", path, e.to_string()))
}

pub fn write_json<S: Serialize>(path: &Path, value: &S) -> Result<()> {
    let mut text = serde_json::to_vec_pretty(value)?;
    text.push(b'\n');
    write_atomic(path, &text)
}

/// Sorted files in `dir` with the given extension.
pub fn list_files(dir: &Path, ext: &str) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let p = entry.map_err(|e| Error::io(dir, e))?.path();
        if p.extension().and_then(|e| e.to_str()) == Some(ext) {
            out.push(p);
        }
    }
    out.sort();
    Ok(out)
}
