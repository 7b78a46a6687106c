//! Basin mask polygons and even-odd point-in-polygon tests.
//!
//! File format: one vertex per line as `lon lat` or `lon,lat`, blank lines
//! separate rings, `#` starts a comment. Rings are closed implicitly.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polygon {
    pub rings: Vec<Vec<(f64, f64)>>,
}

impl Polygon {
    pub fn new(rings: Vec<Vec<(f64, f64)>>) -> Result<Self> {
        let rings: Vec<_> = rings
            .into_iter()
            .map(|mut r| {
                if r.len() > 1 && r.first() == r.last() {
                    r.pop();
                }
                r
            })
            .collect();
        if rings.is_empty() {
            return Err(Error::Geometry("polygon has no rings".into()));
        }
        for (i, r) in rings.iter().enumerate() {
            if r.len() < 3 {
                return Err(Error::Geometry(format!(
                    "ring {i} has {} vertices, need 3",
                    r.len()
                )));
            }
            if r.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
                return Err(Error::Geometry(format!("ring {i} has a non-finite vertex")));
            }
        }
        Ok(Polygon { rings })
    }

    /// Even-odd rule over all rings, so inner rings act as holes.
    pub fn contains(&self, x: f64, y: f64) -> bool {
        let mut inside = false;
        for ring in &self.rings {
            let mut j = ring.len() - 1;
            for i in 0..ring.len() {
                let (xi, yi) = ring[i];
                let (xj, yj) = ring[j];
                if (yi > y) != (yj > y) && x < (xj - xi) * (y - yi) / (yj - yi) + xi {
                    inside = !inside;
                }
                j = i;
            }
        }
        inside
    }

    /// (min_x, min_y, max_x, max_y).
    pub fn bbox(&self) -> (f64, f64, f64, f64) {
        let mut b = (
            f64::INFINITY,
            f64::INFINITY,
            f64::NEG_INFINITY,
            f64::NEG_INFINITY,
        );
        for &(x, y) in self.rings.iter().flatten() {
            b = (b.0.min(x), b.1.min(y), b.2.max(x), b.3.max(y));
        }
        b
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut rings = Vec::new();
        let mut ring = Vec::new();
        for (ln, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                if !ring.is_empty() {
                    rings.push(std::mem::take(&mut ring));
                }
                continue;
            }
            let parts: Vec<&str> = line
                .split(|c: char| c == ',' || c.is_whitespace())
                .filter(|s| !s.is_empty())
                .collect();
            let bad = || Error::Parse {
                path: "<polygon>".into(),
                message: format!("line {}: expected `lon lat`, got `{line}`", ln + 1),
            };
            if parts.len() != 2 {
                return Err(bad());
            }
            let x: f64 = parts[0].parse().map_err(|_| bad())?;
            let y: f64 = parts[1].parse().map_err(|_| bad())?;
            ring.push((x, y));
        }
        if !ring.is_empty() {
            rings.push(ring);
        }
        Polygon::new(rings)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Polygon::parse(&text).map_err(|e| match e {
            Error::Parse { message, .. } => Error::Parse {
                path: path.to_path_buf(),
                message,
            },
            other => other,
        })
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (i, ring) in self.rings.iter().enumerate() {
            if i > 0 {
                out.push('\n');
            }
            for (x, y) in ring {
                writeln!(out, "{x} {y}").expect("write to string");
            }
        }
        out
    }
}
