use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::scalar::Real;

use super::spatial::HashGrid;

/// Result of density-based clustering. Every input index appears in exactly
/// one cluster or in `noise`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Clustering {
    /// Member indices of each cluster, ascending.
    pub clusters: Vec<Vec<usize>>,
    pub noise: Vec<usize>,
    /// Cluster id per input index, `None` for noise.
    pub assignment: Vec<Option<usize>>,
    /// Whether each index is a core point.
    pub core: Vec<bool>,
}

#[derive(Clone, Copy, PartialEq)]
enum Mark {
    Unvisited,
    Noise,
    Cluster(usize),
}

/// DBSCAN with an `eps` ball (inclusive, counting the point itself) and a
/// `min_pts` core threshold.
///
/// Points are seeded in index order and each expansion visits neighbors in
/// ascending index order, so a border point joins the first cluster that
/// reaches it and the output is reproducible.
pub fn dbscan<T: Real>(points: &[[T; 3]], eps: T, min_pts: usize) -> Result<Clustering> {
    if !(eps > T::zero()) {
        return Err(Error::contract("dbscan eps must be positive"));
    }
    if min_pts == 0 {
        return Err(Error::contract("dbscan min_pts must be at least 1"));
    }
    let grid = HashGrid::new(points, eps);
    let n = points.len();
    let mut marks = vec![Mark::Unvisited; n];
    let mut core = vec![false; n];
    let mut next_id = 0;

    for seed in 0..n {
        if marks[seed] != Mark::Unvisited {
            continue;
        }
        let neighbors = grid.within(&points[seed], eps);
        if neighbors.len() < min_pts {
            marks[seed] = Mark::Noise;
            continue;
        }
        let id = next_id;
        next_id += 1;
        marks[seed] = Mark::Cluster(id);
        core[seed] = true;
        let mut queue: VecDeque<usize> = neighbors.into();
        while let Some(j) = queue.pop_front() {
            match marks[j] {
                Mark::Noise => marks[j] = Mark::Cluster(id),
                Mark::Unvisited => {
                    marks[j] = Mark::Cluster(id);
                    let nb = grid.within(&points[j], eps);
                    if nb.len() >= min_pts {
                        core[j] = true;
                        queue.extend(nb);
                    }
                }
                Mark::Cluster(_) => {}
            }
        }
    }

    let mut clusters = vec![Vec::new(); next_id];
    let mut noise = Vec::new();
    let mut assignment = Vec::with_capacity(n);
    for (i, m) in marks.iter().enumerate() {
        match *m {
            Mark::Cluster(c) => {
                clusters[c].push(i);
                assignment.push(Some(c));
            }
            _ => {
                noise.push(i);
                assignment.push(None);
            }
        }
    }
    Ok(Clustering {
        clusters,
        noise,
        assignment,
        core,
    })
}
