//! Seeded synthetic data: a basin with spatially smooth lognormal metal
//! fields, a regression benchmark with mixed structure, and a clustering
//! fixture with Fe-heavy groups.
//!
//! Concentrations follow `max(0.001, exp(mu + sigma * L))` where the latent
//! `L` mixes a smooth spatial field with sample-level noise. Fe and Mn share
//! part of both, so they are positively correlated.

use ndarray::Array2;
use rand::Rng as _;
use rand_distr::StandardNormal;

use crate::cv::Dataset;
use crate::data::{Metal, SampleTable, METAL_COUNT};
use crate::error::Result;
use crate::rng;
use crate::spatial::Polygon;

/// Reporting limit, mg/L.
pub const REPORTING_LIMIT: f64 = 0.001;

/// Latent-scale (mu, sigma) per metal; tuned for roughly 40% of values at
/// the reporting limit and a long right tail.
const LOG_PARAMS: [(f64, f64); METAL_COUNT] = [
    (-6.15, 3.0),
    (-6.33, 2.3),
    (-6.40, 2.0),
    (-6.45, 1.8),
    (-6.55, 1.4),
    (-6.58, 1.3),
];

/// Share of latent variance carried by the smooth spatial field.
const SPATIAL_SHARE: f64 = 0.6;
/// Correlation of the Mn latent components with Fe's.
const FE_MN_COUPLING: f64 = 0.8;
const BUMPS: usize = 6;
const LENGTH_SCALE: f64 = 0.09;

/// Irregular basin outline, (lon, lat) degrees.
pub fn basin_polygon() -> Polygon {
    Polygon::new(vec![vec![
        (-0.55, 5.52),
        (-0.30, 5.50),
        (-0.18, 5.62),
        (-0.20, 5.90),
        (-0.26, 6.10),
        (-0.35, 6.32),
        (-0.48, 6.25),
        (-0.58, 6.00),
        (-0.52, 5.75),
    ]])
    .expect("static polygon")
}

/// Sum of Gaussian bumps plus a linear trend, rescaled to mean 0 and unit
/// variance over the basin bounding box.
#[derive(Debug, Clone)]
struct SmoothField {
    bumps: Vec<(f64, f64, f64)>,
    trend: (f64, f64),
    centre: (f64, f64),
    mean: f64,
    sd: f64,
}

impl SmoothField {
    fn new(r: &mut rng::Rng, bbox: (f64, f64, f64, f64)) -> Self {
        let (x0, y0, x1, y1) = bbox;
        let bumps = (0..BUMPS)
            .map(|_| {
                (
                    x0 + r.random::<f64>() * (x1 - x0),
                    y0 + r.random::<f64>() * (y1 - y0),
                    r.sample::<f64, _>(StandardNormal),
                )
            })
            .collect();
        let trend = (r.sample(StandardNormal), r.sample(StandardNormal));
        let mut f = SmoothField {
            bumps,
            trend,
            centre: ((x0 + x1) / 2.0, (y0 + y1) / 2.0),
            mean: 0.0,
            sd: 1.0,
        };
        let m = 40;
        let vals: Vec<f64> = (0..m * m)
            .map(|k| {
                let x = x0 + (k % m) as f64 / (m - 1) as f64 * (x1 - x0);
                let y = y0 + (k / m) as f64 / (m - 1) as f64 * (y1 - y0);
                f.raw(x, y)
            })
            .collect();
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / vals.len() as f64;
        f.mean = mean;
        f.sd = var.sqrt().max(1e-12);
        f
    }

    fn raw(&self, x: f64, y: f64) -> f64 {
        let mut s =
            self.trend.0 * (x - self.centre.0) / 0.2 + self.trend.1 * (y - self.centre.1) / 0.4;
        for &(bx, by, a) in &self.bumps {
            let d2 = (x - bx).powi(2) + (y - by).powi(2);
            s += 2.0 * a * (-d2 / (2.0 * LENGTH_SCALE * LENGTH_SCALE)).exp();
        }
        s
    }

    fn eval(&self, x: f64, y: f64) -> f64 {
        (self.raw(x, y) - self.mean) / self.sd
    }
}

/// Synthetic basin: fixed spatial fields from which any number of samples
/// can be drawn.
#[derive(Debug, Clone)]
pub struct Basin {
    pub polygon: Polygon,
    seed: u64,
    fields: Vec<SmoothField>,
}

impl Basin {
    pub fn new(seed: u64) -> Self {
        let polygon = basin_polygon();
        let mut r = rng::stream(seed, 0);
        let fields = (0..METAL_COUNT)
            .map(|_| SmoothField::new(&mut r, polygon.bbox()))
            .collect();
        Basin {
            polygon,
            seed,
            fields,
        }
    }

    /// Smooth latent component per metal at a location.
    fn spatial(&self, x: f64, y: f64) -> [f64; METAL_COUNT] {
        let mut s: [f64; METAL_COUNT] = std::array::from_fn(|j| self.fields[j].eval(x, y));
        let c = FE_MN_COUPLING;
        s[Metal::Mn.index()] =
            c * s[Metal::Fe.index()] + (1.0 - c * c).sqrt() * s[Metal::Mn.index()];
        s
    }

    /// Noise-free median concentration at a location (mg/L).
    pub fn median_field(&self, metal: Metal, x: f64, y: f64) -> f64 {
        let j = metal.index();
        let (mu, sigma) = LOG_PARAMS[j];
        (mu + sigma * SPATIAL_SHARE.sqrt() * self.spatial(x, y)[j])
            .exp()
            .max(REPORTING_LIMIT)
    }

    /// `n` samples inside the basin; different `stream`s give independent
    /// draws from the same fields. Ids are prefixed with `prefix`.
    pub fn sample(&self, n: usize, stream: u64, prefix: &str) -> Result<SampleTable> {
        let mut r = rng::stream(self.seed, 1 + stream);
        let (x0, y0, x1, y1) = self.polygon.bbox();
        let mut coords = Vec::with_capacity(n);
        while coords.len() < n {
            let x = x0 + r.random::<f64>() * (x1 - x0);
            let y = y0 + r.random::<f64>() * (y1 - y0);
            if self.polygon.contains(x, y) {
                coords.push((x, y));
            }
        }
        let mut metals = Array2::zeros((n, METAL_COUNT));
        let (ws, wn) = (SPATIAL_SHARE.sqrt(), (1.0 - SPATIAL_SHARE).sqrt());
        for (i, &(x, y)) in coords.iter().enumerate() {
            let s = self.spatial(x, y);
            let mut e: [f64; METAL_COUNT] = std::array::from_fn(|_| r.sample(StandardNormal));
            let c = FE_MN_COUPLING;
            e[Metal::Mn.index()] =
                c * e[Metal::Fe.index()] + (1.0 - c * c).sqrt() * e[Metal::Mn.index()];
            for j in 0..METAL_COUNT {
                let (mu, sigma) = LOG_PARAMS[j];
                let v = (mu + sigma * (ws * s[j] + wn * e[j])).exp();
                // Round to the laboratory's 1 µg/L resolution.
                metals[[i, j]] = ((v * 1000.0).round() / 1000.0).max(REPORTING_LIMIT);
            }
        }
        let ids = (0..n).map(|i| format!("{prefix}{:03}", i + 1)).collect();
        SampleTable::new(ids, coords, metals)
    }
}

/// 96 basin samples, the default fixture.
pub fn synthetic_basin(seed: u64) -> Result<SampleTable> {
    Basin::new(seed).sample(96, 0, "GW")
}

/// Regression benchmark with a piecewise-linear part, smooth terms, an
/// interaction and a right-skewed response `exp(g(x) / 2)`.
pub fn heterogeneous_benchmark(n: usize, seed: u64) -> Dataset {
    let mut r = rng::stream(seed, 0);
    let x = Array2::from_shape_fn((n, METAL_COUNT), |_| r.random::<f64>());
    let y = (0..n)
        .map(|i| {
            let v = |j: usize| x[[i, j]];
            let piecewise = if v(0) < 0.4 {
                0.5 * v(0)
            } else {
                0.2 + 3.0 * (v(0) - 0.4)
            };
            let smooth = (std::f64::consts::TAU * v(1)).sin() + 1.5 * (v(2) - 0.5).powi(2);
            let g = piecewise + smooth + v(3) * v(4) + 0.15 * r.sample::<f64, _>(StandardNormal);
            (g / 2.0).exp()
        })
        .collect();
    let names = (1..=METAL_COUNT).map(|j| format!("x{j}")).collect();
    Dataset::new(x, y, names).expect("consistent shapes")
}

/// Three tight groups of 30 samples, each with Fe the largest concentration,
/// plus six scattered Fe-rich outliers.
pub fn fe_dominant_fixture(seed: u64) -> Result<SampleTable> {
    const GROUPS: [[f64; METAL_COUNT]; 3] = [
        [0.40, 0.10, 0.010, 0.004, 0.002, 0.002],
        [1.00, 0.30, 0.030, 0.010, 0.004, 0.003],
        [2.00, 0.20, 0.015, 0.020, 0.003, 0.008],
    ];
    let mut r = rng::stream(seed, 0);
    let mut rows = Vec::new();
    for g in GROUPS {
        for _ in 0..30 {
            rows.push(g.map(|v| v * (1.0 + 0.03 * r.sample::<f64, _>(StandardNormal))));
        }
    }
    for _ in 0..6 {
        let fe = 2.5 + 1.5 * r.random::<f64>();
        rows.push(std::array::from_fn(|j| {
            if j == 0 {
                fe
            } else {
                GROUPS[1][j] * (0.5 + 2.0 * r.random::<f64>())
            }
        }));
    }
    let n = rows.len();
    let metals = Array2::from_shape_fn((n, METAL_COUNT), |(i, j)| rows[i][j]);
    let coords = (0..n).map(|i| (-0.4 + 0.001 * i as f64, 5.9)).collect();
    SampleTable::new((0..n).map(|i| format!("F{i:03}")).collect(), coords, metals)
}
