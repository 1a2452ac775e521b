//! Uniform space-time grids and fields sampled on them.

use std::io::{Read, Write};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Uniform grid on the cube `[-h, h]^d` with `2n + 1` nodes per axis, `h = n·dx`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub dim: usize,
    pub dx: f64,
    /// Nodes on each side of the origin along every axis.
    pub half_nodes: usize,
}

impl Grid {
    pub fn new(dim: usize, dx: f64, half_nodes: usize) -> Result<Self> {
        if dim == 0 || dim > 3 {
            return Err(invalid(format!("grid dimension must be 1, 2 or 3, got {dim}")));
        }
        if !(dx > 0.0 && dx.is_finite()) {
            return Err(invalid("grid spacing must be positive"));
        }
        Ok(Grid { dim, dx, half_nodes })
    }

    /// Smallest grid with spacing `dx` covering `[-half_width, half_width]^d`.
    pub fn covering(dim: usize, dx: f64, half_width: f64) -> Result<Self> {
        let n = (half_width / dx - 1e-9).ceil().max(0.0) as usize;
        Grid::new(dim, dx, n)
    }

    pub fn half_width(&self) -> f64 {
        self.half_nodes as f64 * self.dx
    }

    pub fn nodes_per_axis(&self) -> usize {
        2 * self.half_nodes + 1
    }

    pub fn len(&self) -> usize {
        self.nodes_per_axis().pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Signed integer coordinates of node `i` (first axis varies slowest).
    pub fn index_coords(&self, mut i: usize) -> Vec<i64> {
        let n = self.nodes_per_axis();
        let mut c = vec![0i64; self.dim];
        for j in (0..self.dim).rev() {
            c[j] = (i % n) as i64 - self.half_nodes as i64;
            i /= n;
        }
        c
    }

    pub fn point(&self, i: usize) -> Vec<f64> {
        self.index_coords(i).iter().map(|&c| c as f64 * self.dx).collect()
    }

    /// Flat index of integer coordinates, clamping each to the grid.
    pub fn clamped_index(&self, coords: &[i64]) -> usize {
        let n = self.nodes_per_axis() as i64;
        let h = self.half_nodes as i64;
        coords.iter().fold(0usize, |acc, &c| acc * n as usize + (c.clamp(-h, h) + h) as usize)
    }

    /// Flat index of integer coordinates, or `None` outside the grid.
    pub fn index(&self, coords: &[i64]) -> Option<usize> {
        let h = self.half_nodes as i64;
        if coords.iter().all(|c| c.abs() <= h) {
            Some(self.clamped_index(coords))
        } else {
            None
        }
    }

    /// Nodes whose coordinates all lie in `[-half_width, half_width]`.
    pub fn nodes_within(&self, half_width: f64) -> Vec<usize> {
        let lim = half_width + 1e-9 * self.dx;
        (0..self.len())
            .filter(|&i| self.index_coords(i).iter().all(|&c| (c as f64 * self.dx).abs() <= lim))
            .collect()
    }
}

/// Uniform time grid `0, dt, …, steps·dt` paired with a spatial grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpaceTimeGrid {
    pub dt: f64,
    pub steps: usize,
    pub space: Grid,
}

impl SpaceTimeGrid {
    pub fn new(dt: f64, steps: usize, space: Grid) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(invalid("time step must be positive"));
        }
        if steps == 0 {
            return Err(invalid("at least one time step is required"));
        }
        Ok(SpaceTimeGrid { dt, steps, space })
    }

    pub fn horizon(&self) -> f64 {
        self.dt * self.steps as f64
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.steps).map(|i| i as f64 * self.dt).collect()
    }
}

/// Real values on a space-time grid; row `i` holds time `i·dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    pub grid: SpaceTimeGrid,
    pub values: Array2<f64>,
}

const MAGIC: &[u8; 8] = b"SPDEFLD1";

impl Field {
    pub fn zeros(grid: SpaceTimeGrid) -> Self {
        Field { grid, values: Array2::zeros((grid.steps + 1, grid.space.len())) }
    }

    pub fn from_fn(grid: SpaceTimeGrid, f: impl Fn(f64, &[f64]) -> f64) -> Self {
        let mut field = Field::zeros(grid);
        for i in 0..=grid.steps {
            let t = i as f64 * grid.dt;
            for k in 0..grid.space.len() {
                field.values[[i, k]] = f(t, &grid.space.point(k));
            }
        }
        field
    }

    pub fn at(&self, step: usize, node: usize) -> f64 {
        self.values[[step, node]]
    }

    /// `max |self - other|` over all grid values.
    pub fn sup_distance(&self, other: &Field) -> f64 {
        self.values.iter().zip(other.values.iter()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).fold(0.0, f64::max)
    }

    /// Values at `half_width`-bounded nodes, as a new field on the smaller grid.
    pub fn restrict(&self, half_width: f64) -> Field {
        let g = self.grid.space;
        let n = (half_width / g.dx + 1e-9).floor() as usize;
        let n = n.min(g.half_nodes);
        let small = Grid { half_nodes: n, ..g };
        let grid = SpaceTimeGrid { space: small, ..self.grid };
        let mut out = Field::zeros(grid);
        for k in 0..small.len() {
            let src = g.clamped_index(&small.index_coords(k));
            for i in 0..=grid.steps {
                out.values[[i, k]] = self.values[[i, src]];
            }
        }
        out
    }

    /// CSV with columns `t, x1..xd, value`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut w = std::io::BufWriter::new(w);
        let d = self.grid.space.dim;
        let mut header = String::from("t");
        for j in 1..=d {
            header.push_str(&format!(",x{j}"));
        }
        header.push_str(",value\n");
        w.write_all(header.as_bytes())?;
        for i in 0..=self.grid.steps {
            let t = i as f64 * self.grid.dt;
            for k in 0..self.grid.space.len() {
                let mut line = format!("{t}");
                for x in self.grid.space.point(k) {
                    line.push_str(&format!(",{x}"));
                }
                line.push_str(&format!(",{}\n", self.values[[i, k]]));
                w.write_all(line.as_bytes())?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Little-endian binary layout: magic, `dim`, `half_nodes`, `steps` (u64),
    /// `dx`, `dt` (f64), `seed` (u64), then the values row by row.
    pub fn write_binary<W: Write>(&self, w: W, seed: u64) -> Result<()> {
        let mut w = std::io::BufWriter::new(w);
        w.write_all(MAGIC)?;
        let g = self.grid;
        for v in [g.space.dim as u64, g.space.half_nodes as u64, g.steps as u64] {
            w.write_all(&v.to_le_bytes())?;
        }
        w.write_all(&g.space.dx.to_le_bytes())?;
        w.write_all(&g.dt.to_le_bytes())?;
        w.write_all(&seed.to_le_bytes())?;
        for v in self.values.iter() {
            w.write_all(&v.to_le_bytes())?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads one field written by [`Field::write_binary`], returning it with its seed.
    pub fn read_binary<R: Read>(mut r: R) -> Result<(Field, u64)> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Io("not a field file".into()));
        }
        let mut b = [0u8; 8];
        let mut next = |r: &mut R| -> Result<[u8; 8]> {
            r.read_exact(&mut b)?;
            Ok(b)
        };
        let dim = u64::from_le_bytes(next(&mut r)?) as usize;
        let half_nodes = u64::from_le_bytes(next(&mut r)?) as usize;
        let steps = u64::from_le_bytes(next(&mut r)?) as usize;
        let dx = f64::from_le_bytes(next(&mut r)?);
        let dt = f64::from_le_bytes(next(&mut r)?);
        let seed = u64::from_le_bytes(next(&mut r)?);
        let grid = SpaceTimeGrid::new(dt, steps, Grid::new(dim, dx, half_nodes)?)?;
        let mut field = Field::zeros(grid);
        for v in field.values.iter_mut() {
            *v = f64::from_le_bytes(next(&mut r)?);
        }
        Ok((field, seed))
    }
}
