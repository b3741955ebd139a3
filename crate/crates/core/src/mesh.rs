//! Structured polar triangulations of the disk `r <= r2`.
//!
//! Node 0 is the centre. Ring `k = 1..=n_rings` holds `n_theta` nodes at
//! angles `2 pi j / n_theta`; node `(k, j)` has index `1 + (k - 1) n_theta + j`.
//! The centre fans to ring 1 and every ring cell is split into two triangles
//! along the diagonal from `(k, j)` to `(k + 1, j + 1)`. Rings sit at `r0`,
//! `r1` and `r2`, so every material interface is a polygon of mesh edges.
//!
//! Radial node placement per region, with `n` the region's ring count:
//!
//! - wire: `r0 i / n`
//! - air: `r0 + (r1 - r0) i / n`
//! - tube: `r1 + (r2 - r1) (q^(n_0 i / n) - 1) / (q^(n_0) - 1)`, graded
//!   toward `r1` with ratio `q` between consecutive level-0 cells.
//!
//! The tube map is the same at every level, so level `l + 1` halves each
//! level-`l` cell both radially and angularly.

use std::f64::consts::PI;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ModelParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Region {
    /// Conducting wire, carries the source current.
    Wire,
    /// Air gap.
    Air,
    /// Steel tube, the only conducting and permeable region.
    Tube,
}

impl Region {
    pub const ALL: [Region; 3] = [Region::Wire, Region::Air, Region::Tube];

    pub fn index(self) -> usize {
        match self {
            Region::Wire => 0,
            Region::Air => 1,
            Region::Tube => 2,
        }
    }

    pub fn roman(self) -> &'static str {
        match self {
            Region::Wire => "I",
            Region::Air => "II",
            Region::Tube => "III",
        }
    }

    pub fn relative_mu(self, p: &ModelParams) -> f64 {
        match self {
            Region::Wire => p.mu_wire,
            Region::Air => p.mu_air,
            Region::Tube => p.mu_tube,
        }
    }

    pub fn sigma(self, p: &ModelParams) -> f64 {
        match self {
            Region::Tube => p.sigma,
            _ => 0.0,
        }
    }
}

/// Level-0 resolution of the mesh family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeshConfig {
    pub n_theta: usize,
    pub n_r_wire: usize,
    pub n_r_air: usize,
    pub n_r_tube: usize,
    /// Ratio between consecutive level-0 radial cells in the tube.
    pub tube_grading: f64,
}

impl Default for MeshConfig {
    fn default() -> Self {
        MeshConfig {
            n_theta: 16,
            n_r_wire: 2,
            n_r_air: 4,
            n_r_tube: 4,
            tube_grading: 1.2,
        }
    }
}

impl MeshConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_theta < 3 {
            return Err(Error::config("mesh.n_theta must be at least 3"));
        }
        if self.n_r_wire == 0 || self.n_r_air == 0 || self.n_r_tube == 0 {
            return Err(Error::config("every region needs at least one radial cell"));
        }
        if !(self.tube_grading.is_finite() && self.tube_grading > 0.0) {
            return Err(Error::config("mesh.tube_grading must be positive"));
        }
        Ok(())
    }

    pub fn level(&self, level: usize) -> LevelSpec {
        LevelSpec { level, base: *self }
    }
}

/// Resolution of one level: every level-0 count times `2^level`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelSpec {
    pub level: usize,
    pub base: MeshConfig,
}

impl LevelSpec {
    pub fn new(level: usize) -> Self {
        MeshConfig::default().level(level)
    }

    fn scale(&self) -> usize {
        1usize << self.level
    }

    pub fn n_theta(&self) -> usize {
        self.base.n_theta * self.scale()
    }

    pub fn n_r(&self, region: Region) -> usize {
        let n = match region {
            Region::Wire => self.base.n_r_wire,
            Region::Air => self.base.n_r_air,
            Region::Tube => self.base.n_r_tube,
        };
        n * self.scale()
    }

    pub fn n_rings(&self) -> usize {
        Region::ALL.iter().map(|&r| self.n_r(r)).sum()
    }

    pub fn node_count(&self) -> usize {
        1 + self.n_theta() * self.n_rings()
    }

    /// Unconstrained nodes: everything except the outer ring.
    pub fn dof_count(&self) -> usize {
        self.node_count() - self.n_theta()
    }

    /// Ring radii `rho_1 < ... < rho_n = r2` (the centre is not included).
    pub fn ring_radii(&self, params: &ModelParams) -> Vec<f64> {
        let (nw, na, nt) = (self.n_r(Region::Wire), self.n_r(Region::Air), self.n_r(Region::Tube));
        let mut radii = Vec::with_capacity(self.n_rings());
        radii.extend((1..=nw).map(|i| params.r0 * i as f64 / nw as f64));
        radii.extend((1..=na).map(|i| params.r0 + (params.r1 - params.r0) * i as f64 / na as f64));
        let q = self.base.tube_grading;
        let n0 = self.base.n_r_tube as f64;
        let width = params.r2 - params.r1;
        radii.extend((1..=nt).map(|i| {
            let t = i as f64 / nt as f64;
            if i == nt {
                params.r2
            } else if (q - 1.0).abs() < 1e-12 {
                params.r1 + width * t
            } else {
                params.r1 + width * (q.powf(n0 * t) - 1.0) / (q.powf(n0) - 1.0)
            }
        }));
        // Interfaces land exactly on r0 and r1.
        radii[nw - 1] = params.r0;
        radii[nw + na - 1] = params.r1;
        radii
    }

    /// Region of the cell between ring `k - 1` and ring `k` (ring 0 is the centre).
    pub fn cell_region(&self, k: usize) -> Region {
        let nw = self.n_r(Region::Wire);
        let na = self.n_r(Region::Air);
        if k <= nw {
            Region::Wire
        } else if k <= nw + na {
            Region::Air
        } else {
            Region::Tube
        }
    }
}

/// Number of unconstrained nodes of a level without building the mesh.
pub fn dof_count(spec: &LevelSpec) -> usize {
    spec.dof_count()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Triangle {
    pub nodes: [usize; 3],
    pub region: Region,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    pub nodes: Vec<[f64; 2]>,
    pub triangles: Vec<Triangle>,
    /// Outer-ring nodes on `r = r2`, all Dirichlet-constrained.
    pub boundary_nodes: Vec<usize>,
    pub dof_count: usize,
    pub spec: LevelSpec,
    /// Ring radii, excluding the centre.
    pub ring_radii: Vec<f64>,
    /// Geometry the mesh was built for, `[r0, r1, r2]`.
    pub radii: [f64; 3],
}

/// Build the level mesh for the geometry in `params`.
pub fn build_mesh(params: &ModelParams, spec: &LevelSpec) -> Result<Mesh> {
    params.validate()?;
    spec.base.validate()?;
    let n_rings = spec.n_rings();
    let h = params.r2 / n_rings as f64;
    if params.r1 - params.r0 < h || params.r2 - params.r1 < h {
        return Err(Error::Mesh(format!(
            "r1 = {} lies within one cell width ({h}) of r0 = {} or r2 = {} on level {}",
            params.r1, params.r0, params.r2, spec.level
        )));
    }

    let n_theta = spec.n_theta();
    let ring_radii = spec.ring_radii(params);
    debug_assert!(ring_radii.windows(2).all(|w| w[0] < w[1]));

    let mut nodes = Vec::with_capacity(spec.node_count());
    nodes.push([0.0, 0.0]);
    let angles: Vec<(f64, f64)> = (0..n_theta)
        .map(|j| {
            let phi = 2.0 * PI * j as f64 / n_theta as f64;
            (phi.cos(), phi.sin())
        })
        .collect();
    for &rho in &ring_radii {
        nodes.extend(angles.iter().map(|&(c, s)| [rho * c, rho * s]));
    }

    let idx = |k: usize, j: usize| 1 + (k - 1) * n_theta + (j % n_theta);
    let mut triangles = Vec::with_capacity(n_theta * (2 * n_rings - 1));
    let fan_region = spec.cell_region(1);
    for j in 0..n_theta {
        triangles.push(Triangle { nodes: [0, idx(1, j), idx(1, j + 1)], region: fan_region });
    }
    for k in 1..n_rings {
        let region = spec.cell_region(k + 1);
        for j in 0..n_theta {
            let a = idx(k, j);
            let b = idx(k, j + 1);
            let c = idx(k + 1, j + 1);
            let d = idx(k + 1, j);
            triangles.push(Triangle { nodes: [a, d, c], region });
            triangles.push(Triangle { nodes: [a, c, b], region });
        }
    }

    let boundary_nodes: Vec<usize> = (0..n_theta).map(|j| idx(n_rings, j)).collect();
    let dof_count = nodes.len() - boundary_nodes.len();
    debug_assert_eq!(dof_count, spec.dof_count());

    Ok(Mesh {
        nodes,
        triangles,
        boundary_nodes,
        dof_count,
        spec: *spec,
        ring_radii,
        radii: [params.r0, params.r1, params.r2],
    })
}

impl Mesh {
    /// Signed area of triangle `t` (positive for counter-clockwise order).
    pub fn signed_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t].nodes.map(|i| self.nodes[i]);
        0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
    }

    pub fn total_area(&self) -> f64 {
        (0..self.triangles.len()).map(|t| self.signed_area(t)).sum()
    }

    pub fn region_area(&self, region: Region) -> f64 {
        (0..self.triangles.len())
            .filter(|&t| self.triangles[t].region == region)
            .map(|t| self.signed_area(t))
            .sum()
    }

    pub fn is_boundary(&self, node: usize) -> bool {
        node >= self.dof_count
    }

    /// Plain-text dump for external viewers.
    ///
    /// ```text
    /// # eddy-mlmc mesh level <l>
    /// NODES <n>
    /// <index> <x> <y>                 one line per node
    /// TRIANGLES <m>
    /// <index> <a> <b> <c> <region>    region is I, II or III; a, b, c counter-clockwise
    /// BOUNDARY <k>
    /// <node index>                    Dirichlet nodes on r = r2
    /// ```
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# eddy-mlmc mesh level {}", self.spec.level);
        let _ = writeln!(out, "NODES {}", self.nodes.len());
        for (i, p) in self.nodes.iter().enumerate() {
            let _ = writeln!(out, "{i} {:e} {:e}", p[0], p[1]);
        }
        let _ = writeln!(out, "TRIANGLES {}", self.triangles.len());
        for (i, t) in self.triangles.iter().enumerate() {
            let [a, b, c] = t.nodes;
            let _ = writeln!(out, "{i} {a} {b} {c} {}", t.region.roman());
        }
        let _ = writeln!(out, "BOUNDARY {}", self.boundary_nodes.len());
        for n in &self.boundary_nodes {
            let _ = writeln!(out, "{n}");
        }
        out
    }
}

/// Angles below this are flagged by [`mesh_quality`].
pub const MIN_ANGLE_DEG: f64 = 10.0;

#[derive(Debug, Clone, PartialEq)]
pub struct MeshQuality {
    pub min_angle_deg: f64,
    /// Longest edge over shortest altitude, maximized over triangles.
    pub max_aspect_ratio: f64,
    /// Triangles with a non-positive area or an angle below [`MIN_ANGLE_DEG`].
    pub flagged: Vec<usize>,
}

pub fn triangle_angles_deg(p: [[f64; 2]; 3]) -> [f64; 3] {
    let len = |a: [f64; 2], b: [f64; 2]| ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
    let (a, b, c) = (len(p[1], p[2]), len(p[0], p[2]), len(p[0], p[1]));
    let ang = |opp: f64, s1: f64, s2: f64| {
        ((s1 * s1 + s2 * s2 - opp * opp) / (2.0 * s1 * s2)).clamp(-1.0, 1.0).acos().to_degrees()
    };
    [ang(a, b, c), ang(b, a, c), ang(c, a, b)]
}

pub fn mesh_quality(mesh: &Mesh) -> MeshQuality {
    quality_of(&mesh.nodes, mesh.triangles.iter().map(|t| t.nodes))
}

pub(crate) fn quality_of(
    nodes: &[[f64; 2]],
    triangles: impl Iterator<Item = [usize; 3]>,
) -> MeshQuality {
    let mut min_angle = f64::INFINITY;
    let mut max_aspect: f64 = 0.0;
    let mut flagged = Vec::new();
    for (t, tri) in triangles.enumerate() {
        let p = tri.map(|i| nodes[i]);
        let area2 = (p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]);
        let angles = triangle_angles_deg(p);
        let tmin = angles.iter().cloned().fold(f64::INFINITY, f64::min);
        let longest = (0..3)
            .map(|i| {
                let (a, b) = (p[i], p[(i + 1) % 3]);
                ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
            })
            .fold(0.0, f64::max);
        let aspect = if area2 > 0.0 { longest * longest / area2 } else { f64::INFINITY };
        if area2 <= 0.0 || !(tmin >= MIN_ANGLE_DEG) {
            flagged.push(t);
        }
        min_angle = min_angle.min(if area2 > 0.0 { tmin } else { 0.0 });
        max_aspect = max_aspect.max(aspect);
    }
    MeshQuality { min_angle_deg: min_angle, max_aspect_ratio: max_aspect, flagged }
}
