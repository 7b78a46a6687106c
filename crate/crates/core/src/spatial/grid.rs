//! Square-cell raster fields with a validity mask.
//!
//! Values are stored row-major with row 0 at the northern edge, matching the
//! ESRI ASCII layout. Masked-out cells hold NaN in memory and the no-data
//! sentinel on disk.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::polygon::Polygon;
use crate::error::{Error, Result};

pub const NODATA: f64 = -9999.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridGeometry {
    /// Lower-left corner longitude.
    pub xll: f64,
    /// Lower-left corner latitude.
    pub yll: f64,
    /// Cell edge in degrees.
    pub cell: f64,
    pub nx: usize,
    pub ny: usize,
}

impl GridGeometry {
    pub fn new(xll: f64, yll: f64, cell: f64, nx: usize, ny: usize) -> Result<Self> {
        if !(cell > 0.0)
            || !cell.is_finite()
            || nx == 0
            || ny == 0
            || !xll.is_finite()
            || !yll.is_finite()
        {
            return Err(Error::Geometry(format!(
                "invalid grid: origin ({xll}, {yll}), cell {cell}, {nx}x{ny}"
            )));
        }
        Ok(GridGeometry {
            xll,
            yll,
            cell,
            nx,
            ny,
        })
    }

    /// `nx` × `ny` square cells covering the box; the longer side sets the
    /// cell size and the box is centred along the other.
    pub fn covering(bbox: (f64, f64, f64, f64), nx: usize, ny: usize) -> Result<Self> {
        let (x0, y0, x1, y1) = bbox;
        if !(x1 > x0) || !(y1 > y0) || nx == 0 || ny == 0 {
            return Err(Error::Geometry(format!("degenerate bounding box {bbox:?}")));
        }
        let cell = ((x1 - x0) / nx as f64).max((y1 - y0) / ny as f64);
        let xll = x0 - (nx as f64 * cell - (x1 - x0)) / 2.0;
        let yll = y0 - (ny as f64 * cell - (y1 - y0)) / 2.0;
        GridGeometry::new(xll, yll, cell, nx, ny)
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Centre of cell (col, row).
    pub fn centre(&self, col: usize, row: usize) -> (f64, f64) {
        (
            self.xll + (col as f64 + 0.5) * self.cell,
            self.yll + ((self.ny - row) as f64 - 0.5) * self.cell,
        )
    }

    /// (col, row) of the cell containing the point.
    pub fn locate(&self, x: f64, y: f64) -> Option<(usize, usize)> {
        let c = ((x - self.xll) / self.cell).floor();
        let r = ((y - self.yll) / self.cell).floor();
        if !(c >= 0.0 && r >= 0.0 && c < self.nx as f64 && r < self.ny as f64) {
            return None;
        }
        Some((c as usize, self.ny - 1 - r as usize))
    }

    pub fn index(&self, col: usize, row: usize) -> usize {
        row * self.nx + col
    }

    pub fn centres(&self) -> Vec<(f64, f64)> {
        (0..self.ny)
            .flat_map(|r| (0..self.nx).map(move |c| (c, r)))
            .map(|(c, r)| self.centre(c, r))
            .collect()
    }

    /// Cells whose centre falls inside the polygon.
    pub fn mask(&self, polygon: &Polygon) -> Vec<bool> {
        self.centres()
            .iter()
            .map(|&(x, y)| polygon.contains(x, y))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridField {
    pub geometry: GridGeometry,
    pub mask: Vec<bool>,
    pub values: Vec<f64>,
}

impl GridField {
    /// Field filled with `f(x, y)` inside the mask and NaN elsewhere.
    pub fn from_fn(
        geometry: GridGeometry,
        mask: Vec<bool>,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<Self> {
        if mask.len() != geometry.len() {
            return Err(Error::DimensionMismatch {
                expected: geometry.len(),
                got: mask.len(),
            });
        }
        let values = geometry
            .centres()
            .iter()
            .zip(&mask)
            .map(|(&(x, y), &m)| if m { f(x, y) } else { f64::NAN })
            .collect();
        Ok(GridField {
            geometry,
            mask,
            values,
        })
    }

    /// Takes values for the masked-in cells, in row-major order.
    pub fn from_masked_values(
        geometry: GridGeometry,
        mask: Vec<bool>,
        inside: &[f64],
    ) -> Result<Self> {
        let count = mask.iter().filter(|m| **m).count();
        if mask.len() != geometry.len() || inside.len() != count {
            return Err(Error::DimensionMismatch {
                expected: count,
                got: inside.len(),
            });
        }
        let mut it = inside.iter();
        let values = mask
            .iter()
            .map(|&m| {
                if m {
                    *it.next().expect("counted")
                } else {
                    f64::NAN
                }
            })
            .collect();
        Ok(GridField {
            geometry,
            mask,
            values,
        })
    }

    pub fn same_frame(&self, other: &GridField) -> bool {
        self.geometry == other.geometry && self.mask == other.mask
    }

    pub fn get(&self, col: usize, row: usize) -> f64 {
        self.values[self.geometry.index(col, row)]
    }

    /// Value of the cell containing the point; `None` outside the grid or mask.
    pub fn sample(&self, x: f64, y: f64) -> Option<f64> {
        let (c, r) = self.geometry.locate(x, y)?;
        let i = self.geometry.index(c, r);
        self.mask[i].then_some(self.values[i])
    }

    pub fn masked_values(&self) -> Vec<f64> {
        self.values
            .iter()
            .zip(&self.mask)
            .filter(|(_, m)| **m)
            .map(|(v, _)| *v)
            .collect()
    }

    /// True when every masked-in cell is finite and every other cell is not.
    pub fn hygienic(&self) -> bool {
        self.values
            .iter()
            .zip(&self.mask)
            .all(|(v, &m)| v.is_finite() == m)
    }

    pub fn write_ascii<W: Write>(&self, mut w: W) -> Result<()> {
        let g = &self.geometry;
        let io = |e| Error::io("<ascii grid>", e);
        write!(
            w,
            "NCOLS {}\nNROWS {}\nXLLCORNER {}\nYLLCORNER {}\nCELLSIZE {}\nNODATA_VALUE {}\n",
            g.nx, g.ny, g.xll, g.yll, g.cell, NODATA
        )
        .map_err(io)?;
        for row in self.values.chunks(g.nx).zip(self.mask.chunks(g.nx)) {
            let line: Vec<String> = row
                .0
                .iter()
                .zip(row.1)
                .map(|(v, &m)| {
                    if m {
                        format!("{v}")
                    } else {
                        format!("{NODATA}")
                    }
                })
                .collect();
            writeln!(w, "{}", line.join(" ")).map_err(io)?;
        }
        w.flush().map_err(io)
    }

    /// Reads an ESRI ASCII grid; no-data cells become the mask.
    pub fn read_ascii<R: BufRead>(r: R) -> Result<Self> {
        let bad = |m: String| Error::Parse {
            path: "<ascii grid>".into(),
            message: m,
        };
        let mut header = std::collections::HashMap::new();
        let mut values = Vec::new();
        for line in r.lines() {
            let line = line.map_err(|e| Error::io("<ascii grid>", e))?;
            let mut tokens = line.split_whitespace().peekable();
            let Some(first) = tokens.peek() else { continue };
            if first
                .chars()
                .next()
                .is_some_and(|c| c.is_ascii_alphabetic())
                && values.is_empty()
            {
                let key = tokens.next().expect("peeked").to_ascii_uppercase();
                let val: f64 = tokens
                    .next()
                    .and_then(|v| v.parse().ok())
                    .ok_or_else(|| bad(format!("bad header line `{line}`")))?;
                header.insert(key, val);
                continue;
            }
            for t in tokens {
                values.push(
                    t.parse::<f64>()
                        .map_err(|_| bad(format!("bad value `{t}`")))?,
                );
            }
        }
        let get = |k: &str| {
            header
                .get(k)
                .copied()
                .ok_or_else(|| bad(format!("missing {k}")))
        };
        let nx = get("NCOLS")? as usize;
        let ny = get("NROWS")? as usize;
        let cell = get("CELLSIZE")?;
        let (xll, yll) = match (header.get("XLLCORNER"), header.get("YLLCORNER")) {
            (Some(&x), Some(&y)) => (x, y),
            _ => (
                get("XLLCENTER")? - cell / 2.0,
                get("YLLCENTER")? - cell / 2.0,
            ),
        };
        let nodata = header.get("NODATA_VALUE").copied().unwrap_or(NODATA);
        let geometry = GridGeometry::new(xll, yll, cell, nx, ny)?;
        if values.len() != geometry.len() {
            return Err(bad(format!(
                "expected {} values, got {}",
                geometry.len(),
                values.len()
            )));
        }
        let mask: Vec<bool> = values.iter().map(|&v| v != nodata).collect();
        let values = values
            .iter()
            .zip(&mask)
            .map(|(&v, &m)| if m { v } else { f64::NAN })
            .collect();
        Ok(GridField {
            geometry,
            mask,
            values,
        })
    }

    /// `x,y,value` for masked-in cells.
    pub fn write_csv<W: Write>(&self, w: W, value_name: &str) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["x", "y", value_name])?;
        for (i, (x, y)) in self.geometry.centres().into_iter().enumerate() {
            if self.mask[i] {
                out.write_record([x.to_string(), y.to_string(), self.values[i].to_string()])?;
            }
        }
        out.flush().map_err(|e| Error::io("<grid csv>", e))
    }
}
