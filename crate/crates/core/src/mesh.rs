//! Tensor-product finite-volume grids on the scaled domain.
//!
//! Cells are numbered `i + nx * j`. A 1D grid is stored as `nx × 1` with unit
//! cross-section, so one set of assembly routines serves both dimensions.

use std::io::{BufRead, Write};
use std::sync::Arc;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BoundaryTag {
    Neumann,
    Contact1,
    Contact2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    XMin,
    XMax,
    YMin,
    YMax,
}

/// A contact covering the part of `side` whose tangential coordinate lies in
/// `[from, to]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContactSegment {
    pub side: Side,
    pub from: f64,
    pub to: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ContactLayout {
    /// Γ_D1 covers the x-min face and Γ_D2 the x-max face.
    XFaces,
    /// Γ_D1 covers the y-min face and Γ_D2 the y-max face (2D only).
    YFaces,
    Segments {
        first: ContactSegment,
        second: ContactSegment,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub cells: Vec<usize>,
    pub extent: Vec<f64>,
    pub contacts: ContactLayout,
}

impl GridSpec {
    pub fn line(n: usize) -> Self {
        GridSpec {
            cells: vec![n],
            extent: vec![1.0],
            contacts: ContactLayout::XFaces,
        }
    }

    pub fn rect(nx: usize, ny: usize, height: f64) -> Self {
        GridSpec {
            cells: vec![nx, ny],
            extent: vec![1.0, height],
            contacts: ContactLayout::XFaces,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Face {
    /// Cell on the low-coordinate side, or the only cell for a boundary face.
    pub inner: usize,
    /// Cell on the high-coordinate side; `None` on the boundary.
    pub outer: Option<usize>,
    pub area: f64,
    /// Distance from the inner cell center to the outer center (or to the face).
    pub distance: f64,
    pub axis: usize,
    pub center: [f64; 2],
    pub tag: Option<BoundaryTag>,
}

impl Face {
    /// area / distance
    pub fn transmissibility(&self) -> f64 {
        self.area / self.distance
    }

    pub fn is_boundary(&self) -> bool {
        self.outer.is_none()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    dim: usize,
    nx: usize,
    ny: usize,
    widths: [f64; 2],
    extent: [f64; 2],
    centers: Vec<[f64; 2]>,
    volumes: Vec<f64>,
    faces: Vec<Face>,
}

pub fn build_grid(spec: &GridSpec) -> Result<Grid> {
    let dim = spec.cells.len();
    if !(1..=2).contains(&dim) || spec.extent.len() != dim {
        return Err(Error::InvalidGrid(format!(
            "need 1 or 2 axes with matching extents, got {} cell counts and {} extents",
            spec.cells.len(),
            spec.extent.len()
        )));
    }
    if spec.cells.iter().any(|&n| n < 2) {
        return Err(Error::InvalidGrid("at least 2 cells per axis".into()));
    }
    if spec.extent.iter().any(|&e| !(e.is_finite() && e > 0.0)) {
        return Err(Error::InvalidGrid("extents must be finite and positive".into()));
    }
    let nx = spec.cells[0];
    let ny = if dim == 2 { spec.cells[1] } else { 1 };
    let extent = [spec.extent[0], if dim == 2 { spec.extent[1] } else { 1.0 }];
    let widths = [extent[0] / nx as f64, extent[1] / ny as f64];
    if dim == 1 && spec.contacts != ContactLayout::XFaces {
        return Err(Error::InvalidGrid("1D grids only support x-face contacts".into()));
    }

    let mut centers = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            centers.push([(i as f64 + 0.5) * widths[0], (j as f64 + 0.5) * widths[1]]);
        }
    }
    let volumes = vec![widths[0] * widths[1]; nx * ny];

    let tag_of = |side: Side, t: f64| -> BoundaryTag {
        let on = |seg: &ContactSegment| seg.side == side && t >= seg.from && t <= seg.to;
        match spec.contacts {
            ContactLayout::XFaces => match side {
                Side::XMin => BoundaryTag::Contact1,
                Side::XMax => BoundaryTag::Contact2,
                _ => BoundaryTag::Neumann,
            },
            ContactLayout::YFaces => match side {
                Side::YMin => BoundaryTag::Contact1,
                Side::YMax => BoundaryTag::Contact2,
                _ => BoundaryTag::Neumann,
            },
            ContactLayout::Segments { first, second } => {
                if on(&first) {
                    BoundaryTag::Contact1
                } else if on(&second) {
                    BoundaryTag::Contact2
                } else {
                    BoundaryTag::Neumann
                }
            }
        }
    };

    let idx = |i: usize, j: usize| i + nx * j;
    let mut faces = Vec::new();
    // x-normal faces
    for j in 0..ny {
        let y = centers[idx(0, j)][1];
        for i in 0..=nx {
            let x = i as f64 * widths[0];
            let area = widths[1];
            let face = if i == 0 {
                Face {
                    inner: idx(0, j),
                    outer: None,
                    area,
                    distance: 0.5 * widths[0],
                    axis: 0,
                    center: [x, y],
                    tag: Some(tag_of(Side::XMin, y)),
                }
            } else if i == nx {
                Face {
                    inner: idx(nx - 1, j),
                    outer: None,
                    area,
                    distance: 0.5 * widths[0],
                    axis: 0,
                    center: [x, y],
                    tag: Some(tag_of(Side::XMax, y)),
                }
            } else {
                Face {
                    inner: idx(i - 1, j),
                    outer: Some(idx(i, j)),
                    area,
                    distance: widths[0],
                    axis: 0,
                    center: [x, y],
                    tag: None,
                }
            };
            faces.push(face);
        }
    }
    if dim == 2 {
        for i in 0..nx {
            let x = centers[idx(i, 0)][0];
            for j in 0..=ny {
                let y = j as f64 * widths[1];
                let area = widths[0];
                let face = if j == 0 {
                    Face {
                        inner: idx(i, 0),
                        outer: None,
                        area,
                        distance: 0.5 * widths[1],
                        axis: 1,
                        center: [x, y],
                        tag: Some(tag_of(Side::YMin, x)),
                    }
                } else if j == ny {
                    Face {
                        inner: idx(i, ny - 1),
                        outer: None,
                        area,
                        distance: 0.5 * widths[1],
                        axis: 1,
                        center: [x, y],
                        tag: Some(tag_of(Side::YMax, x)),
                    }
                } else {
                    Face {
                        inner: idx(i, j - 1),
                        outer: Some(idx(i, j)),
                        area,
                        distance: widths[1],
                        axis: 1,
                        center: [x, y],
                        tag: None,
                    }
                };
                faces.push(face);
            }
        }
    }

    let grid = Grid {
        dim,
        nx,
        ny,
        widths,
        extent,
        centers,
        volumes,
        faces,
    };
    for tag in [BoundaryTag::Contact1, BoundaryTag::Contact2] {
        if grid.boundary_faces(tag).next().is_none() {
            return Err(Error::InvalidGrid(format!("contact {tag:?} covers no boundary face")));
        }
    }
    Ok(grid)
}

impl Grid {
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Cell counts per axis (`[nx, 1]` in 1D).
    pub fn shape(&self) -> [usize; 2] {
        [self.nx, self.ny]
    }

    pub fn cell_count(&self) -> usize {
        self.nx * self.ny
    }

    pub fn widths(&self) -> [f64; 2] {
        self.widths
    }

    pub fn extent(&self) -> [f64; 2] {
        self.extent
    }

    pub fn centers(&self) -> &[[f64; 2]] {
        &self.centers
    }

    pub fn volumes(&self) -> &[f64] {
        &self.volumes
    }

    pub fn faces(&self) -> &[Face] {
        &self.faces
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        i + self.nx * j
    }

    pub fn total_volume(&self) -> f64 {
        self.volumes.iter().sum()
    }

    pub fn boundary_faces(&self, tag: BoundaryTag) -> impl Iterator<Item = (usize, &Face)> {
        self.faces
            .iter()
            .enumerate()
            .filter(move |(_, f)| f.tag == Some(tag))
    }

    pub fn contact_area(&self, tag: BoundaryTag) -> f64 {
        self.boundary_faces(tag).map(|(_, f)| f.area).sum()
    }

    /// Cell index containing the point (clamped to the domain).
    pub fn locate(&self, x: f64, y: f64) -> usize {
        let i = ((x / self.widths[0]).floor().max(0.0) as usize).min(self.nx - 1);
        let j = ((y / self.widths[1]).floor().max(0.0) as usize).min(self.ny - 1);
        self.index(i, j)
    }
}

/// Cell-centered scalar field.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: Arc<Grid>,
    values: Vec<f64>,
}

impl Field {
    pub fn new(grid: Arc<Grid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.cell_count() {
            return Err(Error::FieldMismatch {
                expected: grid.cell_count(),
                got: values.len(),
            });
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "field",
                reason: format!("non-finite entry {v}"),
            });
        }
        Ok(Field { grid, values })
    }

    pub fn constant(grid: Arc<Grid>, value: f64) -> Self {
        let n = grid.cell_count();
        Field {
            grid,
            values: vec![value; n],
        }
    }

    pub fn from_fn(grid: Arc<Grid>, f: impl Fn(f64, f64) -> f64) -> Self {
        let values = grid.centers().iter().map(|c| f(c[0], c[1])).collect();
        Field { grid, values }
    }

    /// Internal constructor for solver output that is finite by construction.
    pub(crate) fn from_vec(grid: Arc<Grid>, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.cell_count());
        Field { grid, values }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field {
            grid: self.grid.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Field, f: impl Fn(f64, f64) -> f64) -> Field {
        debug_assert!(self.same_grid(other));
        Field {
            grid: self.grid.clone(),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn same_grid(&self, other: &Field) -> bool {
        Arc::ptr_eq(&self.grid, &other.grid) || *self.grid == *other.grid
    }

    pub fn max_abs_diff(&self, other: &Field) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Writes the plain-text dump: a `# shape` header, then `x [y] value` rows.
    pub fn dump<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let [nx, ny] = self.grid.shape();
        if self.grid.dim() == 1 {
            writeln!(out, "# shape {nx}")?;
        } else {
            writeln!(out, "# shape {nx} {ny}")?;
        }
        for (c, v) in self.grid.centers().iter().zip(&self.values) {
            if self.grid.dim() == 1 {
                writeln!(out, "{:.16e} {:.16e}", c[0], v)?;
            } else {
                writeln!(out, "{:.16e} {:.16e} {:.16e}", c[0], c[1], v)?;
            }
        }
        Ok(())
    }

    /// Reads a dump produced by [`Field::dump`] onto `grid`; shapes must match.
    pub fn load<R: BufRead>(grid: Arc<Grid>, input: R) -> Result<Field> {
        let mut lines = input.lines().enumerate();
        let (_, header) = lines.next().ok_or(Error::Parse {
            line: 1,
            reason: "empty field dump".into(),
        })?;
        let header = header?;
        let shape: Vec<usize> = header
            .strip_prefix("# shape")
            .ok_or(Error::Parse {
                line: 1,
                reason: "missing `# shape` header".into(),
            })?
            .split_whitespace()
            .map(|t| {
                t.parse().map_err(|_| Error::Parse {
                    line: 1,
                    reason: format!("bad shape entry `{t}`"),
                })
            })
            .collect::<Result<_>>()?;
        let [nx, ny] = grid.shape();
        let expected: Vec<usize> = if grid.dim() == 1 { vec![nx] } else { vec![nx, ny] };
        if shape != expected {
            return Err(Error::Parse {
                line: 1,
                reason: format!("shape {shape:?} does not match grid {expected:?}"),
            });
        }
        let mut values = Vec::with_capacity(grid.cell_count());
        for (k, line) in lines {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let last = line.split_whitespace().last().unwrap_or_default();
            let v: f64 = last.parse().map_err(|_| Error::Parse {
                line: k + 1,
                reason: format!("bad value `{last}`"),
            })?;
            values.push(v);
        }
        Field::new(grid, values)
    }
}

/// Sum over faces carrying `tag` of value × area; `values` has one entry per face.
pub fn boundary_integral(grid: &Grid, values: &[f64], tag: BoundaryTag) -> f64 {
    grid.boundary_faces(tag).map(|(k, f)| values[k] * f.area).sum()
}
