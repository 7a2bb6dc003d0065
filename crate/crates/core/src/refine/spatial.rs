use std::collections::HashMap;

use crate::scalar::Real;

/// Uniform hash grid over 3-D points for fixed-radius queries.
#[derive(Debug, Clone)]
pub struct HashGrid<'a, T> {
    points: &'a [[T; 3]],
    cell: T,
    cells: HashMap<[i64; 3], Vec<usize>>,
}

impl<'a, T: Real> HashGrid<'a, T> {
    pub fn new(points: &'a [[T; 3]], cell: T) -> Self {
        assert!(cell > T::zero(), "grid cell size must be positive");
        let mut cells: HashMap<[i64; 3], Vec<usize>> = HashMap::new();
        for (i, p) in points.iter().enumerate() {
            cells.entry(Self::key_of(p, cell)).or_default().push(i);
        }
        Self {
            points,
            cell,
            cells,
        }
    }

    fn key_of(p: &[T; 3], cell: T) -> [i64; 3] {
        p.map(|v| (v / cell).floor().to_i64().unwrap_or(0))
    }

    pub fn points(&self) -> &'a [[T; 3]] {
        self.points
    }

    /// Indices of all points with `|p - center| <= radius`, ascending.
    pub fn within(&self, center: &[T; 3], radius: T) -> Vec<usize> {
        let r2 = radius * radius;
        let lo = center.map(|v| ((v - radius) / self.cell).floor().to_i64().unwrap_or(0));
        let hi = center.map(|v| ((v + radius) / self.cell).floor().to_i64().unwrap_or(0));
        let mut out = Vec::new();
        for x in lo[0]..=hi[0] {
            for y in lo[1]..=hi[1] {
                for z in lo[2]..=hi[2] {
                    let Some(bucket) = self.cells.get(&[x, y, z]) else {
                        continue;
                    };
                    for &i in bucket {
                        if dist2(&self.points[i], center) <= r2 {
                            out.push(i);
                        }
                    }
                }
            }
        }
        out.sort_unstable();
        out
    }
}

pub(crate) fn dist2<T: Real>(a: &[T; 3], b: &[T; 3]) -> T {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    dx * dx + dy * dy + dz * dz
}
