//! Grid tessellation of the site and GN-UAV link geometry.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::Point3;

/// Integer voxel coordinates `(ix, iy, iz)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct VoxelIndex {
    pub ix: usize,
    pub iy: usize,
    pub iz: usize,
}

impl VoxelIndex {
    pub const fn new(ix: usize, iy: usize, iz: usize) -> Self {
        VoxelIndex { ix, iy, iz }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SiteConfig {
    pub x_max: f64,
    pub y_max: f64,
    pub z_max: f64,
    pub dx: f64,
    pub dy: f64,
    pub dz: f64,
    /// Takeoff/landing pads. Every tour starts and ends at one of these.
    pub depots: Vec<[f64; 3]>,
}

impl Default for SiteConfig {
    fn default() -> Self {
        SiteConfig {
            x_max: 3000.0,
            y_max: 3000.0,
            z_max: 150.0,
            dx: 10.0,
            dy: 10.0,
            dz: 10.0,
            depots: vec![[0.0, 0.0, 0.0]],
        }
    }
}

fn divides(total: f64, edge: f64) -> bool {
    let n = total / edge;
    (n - n.round()).abs() < 1e-9 * n.max(1.0)
}

impl SiteConfig {
    pub(crate) fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("x_max", self.x_max),
            ("y_max", self.y_max),
            ("z_max", self.z_max),
            ("dx", self.dx),
            ("dy", self.dy),
            ("dz", self.dz),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::invalid(format!("site.{name}"), "dimension must be positive"));
            }
        }
        for (name, total, edge) in
            [("dx", self.x_max, self.dx), ("dy", self.y_max, self.dy), ("dz", self.z_max, self.dz)]
        {
            if !divides(total, edge) {
                return Err(Error::invalid(
                    format!("site.{name}"),
                    "voxel edge must divide the site dimension evenly",
                ));
            }
        }
        if self.depots.is_empty() {
            return Err(Error::invalid("site.depots", "at least one depot is required"));
        }
        for (i, d) in self.depots.iter().enumerate() {
            let p = Point3::new(d[0], d[1], d[2]);
            if d[2] != 0.0 || !self.contains(&p) {
                return Err(Error::invalid(
                    format!("site.depots[{i}]"),
                    "depot must lie inside the site at z = 0",
                ));
            }
        }
        Ok(())
    }

    /// Voxel counts along x, y, z.
    pub fn dims(&self) -> (usize, usize, usize) {
        (
            (self.x_max / self.dx).round() as usize,
            (self.y_max / self.dy).round() as usize,
            (self.z_max / self.dz).round() as usize,
        )
    }

    pub fn voxel_count(&self) -> usize {
        let (nx, ny, nz) = self.dims();
        nx * ny * nz
    }

    pub fn contains(&self, p: &Point3) -> bool {
        (0.0..=self.x_max).contains(&p.x)
            && (0.0..=self.y_max).contains(&p.y)
            && (0.0..=self.z_max).contains(&p.z)
    }

    pub fn clamp(&self, p: &Point3) -> Point3 {
        Point3::new(p.x.clamp(0.0, self.x_max), p.y.clamp(0.0, self.y_max), p.z.clamp(0.0, self.z_max))
    }

    pub fn depot(&self, i: usize) -> Point3 {
        let d = self.depots[i % self.depots.len()];
        Point3::new(d[0], d[1], d[2])
    }

    /// Lower-inclusive floor indexing; the far faces of the site map to the last voxel.
    pub fn voxel_index(&self, p: &Point3) -> Result<VoxelIndex> {
        if !self.contains(p) {
            return Err(Error::OutOfSite([p.x, p.y, p.z]));
        }
        let (nx, ny, nz) = self.dims();
        let idx = |v: f64, edge: f64, n: usize| ((v / edge).floor() as usize).min(n - 1);
        Ok(VoxelIndex::new(idx(p.x, self.dx, nx), idx(p.y, self.dy, ny), idx(p.z, self.dz, nz)))
    }

    pub fn voxel_center(&self, v: VoxelIndex) -> Point3 {
        Point3::new(
            (v.ix as f64 + 0.5) * self.dx,
            (v.iy as f64 + 0.5) * self.dy,
            (v.iz as f64 + 0.5) * self.dz,
        )
    }

    /// Every voxel in lexicographic `(ix, iy, iz)` order.
    pub fn all_voxels(&self) -> Vec<VoxelIndex> {
        let (nx, ny, nz) = self.dims();
        let mut out = Vec::with_capacity(nx * ny * nz);
        for ix in 0..nx {
            for iy in 0..ny {
                for iz in 0..nz {
                    out.push(VoxelIndex::new(ix, iy, iz));
                }
            }
        }
        out
    }
}

/// Distance and elevation angle (degrees) between a UAV and a GN.
pub fn link_geometry(p_u: &Point3, p_g: &Point3) -> Result<(f64, f64)> {
    let d = (p_u - p_g).norm();
    if d <= 0.0 {
        return Err(Error::CoincidentPoints);
    }
    let rise = p_u.z - p_g.z;
    let theta = (rise / d).clamp(-1.0, 1.0).asin().to_degrees();
    Ok((d, theta))
}
