//! Polar bird's-eye-view rasterization of labeled clouds.

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::se2::Pose2;
use crate::types::{ClassRaster, LabeledCloud, Mask, SemanticClass};

pub use crate::types::GridSpec;

/// Neighbor frames accumulated into a reference raster. `relative_poses[i]`
/// is the pose of neighbor `i` expressed in the reference frame; the first
/// `frames_before` entries are past frames, the rest future ones.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowSpec<T> {
    pub frames_before: usize,
    pub frames_after: usize,
    pub relative_poses: Vec<Pose2<T>>,
}

impl<T: Real> WindowSpec<T> {
    pub fn empty() -> Self {
        Self {
            frames_before: 0,
            frames_after: 0,
            relative_poses: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.frames_before + self.frames_after
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Binary occupancy of one class. Height is discarded; a cell is set when
/// any point of `class` falls in it.
pub fn rasterize_class<T: Real>(
    cloud: &LabeledCloud<T>,
    class: SemanticClass,
    grid: &GridSpec<T>,
) -> Result<Mask> {
    if class == SemanticClass::Noise {
        return Err(Error::contract("noise is never rasterized"));
    }
    grid.validate()?;
    let mut mask = Mask::new(grid.azimuth_bins, grid.range_bins);
    for (p, l) in cloud.iter() {
        if l != class {
            continue;
        }
        if let Some((a, r)) = grid.bin_of(p.x, p.y) {
            mask.set(a, r, true);
        }
    }
    Ok(mask)
}

pub fn project_all<T: Real>(cloud: &LabeledCloud<T>, grid: &GridSpec<T>, timestamp: f64) -> Result<ClassRaster<T>> {
    let mut raster = ClassRaster::empty(*grid, timestamp);
    for class in SemanticClass::PROJECTED {
        *raster.channel_mut(class).expect("projected class") = rasterize_class(cloud, class, grid)?;
    }
    Ok(raster)
}

/// ORs neighbor rasters into `reference` after moving each occupied cell
/// center through the neighbor's relative pose. Nearest-cell assignment,
/// cells leaving the grid are dropped.
pub fn accumulate_window<T: Real>(
    reference: &ClassRaster<T>,
    neighbors: &[ClassRaster<T>],
    window: &WindowSpec<T>,
) -> Result<ClassRaster<T>> {
    if neighbors.len() != window.relative_poses.len() || neighbors.len() != window.len() {
        return Err(Error::contract(format!(
            "window expects {} neighbors with {} poses, got {} rasters",
            window.len(),
            window.relative_poses.len(),
            neighbors.len()
        )));
    }
    let grid = reference.grid;
    let mut out = reference.clone();
    for (raster, pose) in neighbors.iter().zip(&window.relative_poses) {
        grid.ensure_matches(&raster.grid)?;
        for class in SemanticClass::PROJECTED {
            let src = raster.channel(class).expect("projected class");
            let dst = out.channel_mut(class).expect("projected class");
            for (a, r) in src.occupied() {
                let q = pose.apply(grid.cell_center(a, r));
                if let Some((qa, qr)) = grid.bin_of(q[0], q[1]) {
                    dst.set(qa, qr, true);
                }
            }
        }
    }
    Ok(out)
}
