//! Sample ingestion, standards configuration, splitting and z-scoring.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// The six metals, in the fixed column order used everywhere.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Metal {
    Fe,
    Mn,
    Ni,
    Pb,
    Cd,
    As,
}

impl Metal {
    pub const ALL: [Metal; 6] = [
        Metal::Fe,
        Metal::Mn,
        Metal::Ni,
        Metal::Pb,
        Metal::Cd,
        Metal::As,
    ];

    pub fn symbol(self) -> &'static str {
        match self {
            Metal::Fe => "Fe",
            Metal::Mn => "Mn",
            Metal::Ni => "Ni",
            Metal::Pb => "Pb",
            Metal::Cd => "Cd",
            Metal::As => "As",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Metal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

impl FromStr for Metal {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Metal::ALL
            .iter()
            .copied()
            .find(|m| m.symbol().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::InvalidArgument(format!("unknown metal `{s}`")))
    }
}

pub const METAL_COUNT: usize = 6;

/// Header names for the sample CSV.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnMap {
    pub id: String,
    pub lon: String,
    pub lat: String,
    pub metals: [String; METAL_COUNT],
}

impl Default for ColumnMap {
    fn default() -> Self {
        ColumnMap {
            id: "id".into(),
            lon: "lon".into(),
            lat: "lat".into(),
            metals: Metal::ALL.map(|m| m.symbol().to_string()),
        }
    }
}

/// Validated groundwater samples.
///
/// Concentrations are in mg/L, one row per sample, columns in [`Metal::ALL`]
/// order. Values at the laboratory reporting limit are kept as recorded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleTable {
    pub ids: Vec<String>,
    /// (lon, lat) in degrees.
    pub coords: Vec<(f64, f64)>,
    pub metals: Array2<f64>,
}

impl SampleTable {
    pub fn new(ids: Vec<String>, coords: Vec<(f64, f64)>, metals: Array2<f64>) -> Result<Self> {
        let n = ids.len();
        if coords.len() != n || metals.nrows() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: coords.len().min(metals.nrows()),
            });
        }
        if metals.ncols() != METAL_COUNT {
            return Err(Error::DimensionMismatch {
                expected: METAL_COUNT,
                got: metals.ncols(),
            });
        }
        for (i, row) in metals.outer_iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                if !v.is_finite() || v <= 0.0 {
                    return Err(Error::Validation {
                        row: i + 1,
                        column: Metal::ALL[j].symbol().into(),
                        message: format!("concentration must be finite and > 0, got {v}"),
                    });
                }
            }
        }
        Ok(SampleTable {
            ids,
            coords,
            metals,
        })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn column(&self, metal: Metal) -> Array1<f64> {
        self.metals.column(metal.index()).to_owned()
    }

    pub fn coord_matrix(&self) -> Array2<f64> {
        let mut m = Array2::zeros((self.len(), 2));
        for (i, &(lon, lat)) in self.coords.iter().enumerate() {
            m[[i, 0]] = lon;
            m[[i, 1]] = lat;
        }
        m
    }

    /// Rows at `idx`, in the given order.
    pub fn subset(&self, idx: &[usize]) -> SampleTable {
        SampleTable {
            ids: idx.iter().map(|&i| self.ids[i].clone()).collect(),
            coords: idx.iter().map(|&i| self.coords[i]).collect(),
            metals: self.metals.select(Axis(0), idx),
        }
    }
}

/// Reads a sample CSV (`id,lon,lat,Fe,Mn,Ni,Pb,Cd,As` by default).
pub fn load_samples(path: impl AsRef<Path>, schema: &ColumnMap) -> Result<SampleTable> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_samples(file, schema)
}

pub fn read_samples<R: std::io::Read>(reader: R, schema: &ColumnMap) -> Result<SampleTable> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Schema(format!("missing column `{name}`")))
    };
    let id_col = find(&schema.id)?;
    let lon_col = find(&schema.lon)?;
    let lat_col = find(&schema.lat)?;
    let metal_cols = schema
        .metals
        .iter()
        .map(|m| find(m))
        .collect::<Result<Vec<_>>>()?;

    let mut ids = Vec::new();
    let mut coords = Vec::new();
    let mut values = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let row = i + 1;
        let record = record?;
        let field = |col: usize, name: &str| -> Result<f64> {
            let raw = record.get(col).unwrap_or("");
            raw.parse::<f64>().map_err(|_| Error::Validation {
                row,
                column: name.to_string(),
                message: format!("not a number: `{raw}`"),
            })
        };
        ids.push(record.get(id_col).unwrap_or("").to_string());
        let lon = field(lon_col, &schema.lon)?;
        let lat = field(lat_col, &schema.lat)?;
        if !lon.is_finite() || !lat.is_finite() {
            return Err(Error::Validation {
                row,
                column: schema.lon.clone(),
                message: "coordinates must be finite".into(),
            });
        }
        coords.push((lon, lat));
        for (&col, name) in metal_cols.iter().zip(schema.metals.iter()) {
            let v = field(col, name)?;
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::Validation {
                    row,
                    column: name.clone(),
                    message: format!("concentration must be finite and > 0, got {v}"),
                });
            }
            values.push(v);
        }
    }
    if ids.is_empty() {
        return Err(Error::Empty("sample file has no data rows".into()));
    }
    let n = ids.len();
    let metals = Array2::from_shape_vec((n, METAL_COUNT), values).expect("row-major shape");
    SampleTable::new(ids, coords, metals)
}

pub fn write_samples<W: std::io::Write>(table: &SampleTable, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["id".to_string(), "lon".into(), "lat".into()];
    header.extend(Metal::ALL.iter().map(|m| m.symbol().to_string()));
    w.write_record(&header)?;
    for i in 0..table.len() {
        let mut rec = vec![
            table.ids[i].clone(),
            format!("{}", table.coords[i].0),
            format!("{}", table.coords[i].1),
        ];
        rec.extend(table.metals.row(i).iter().map(|v| format!("{v}")));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}

/// Permissible limit and ideal value for one metal, mg/L.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetalStandard {
    #[serde(rename = "S")]
    pub limit: f64,
    #[serde(rename = "I", default)]
    pub ideal: f64,
}

/// Per-metal limits plus the proportionality constant `k` of the unit weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandardsTable {
    pub k: f64,
    pub metals: BTreeMap<Metal, MetalStandard>,
}

impl StandardsTable {
    pub fn new(k: f64, metals: BTreeMap<Metal, MetalStandard>) -> Result<Self> {
        if !(k > 0.0) || !k.is_finite() {
            return Err(Error::InvalidArgument(format!("k must be > 0, got {k}")));
        }
        for (m, s) in &metals {
            if !(s.ideal >= 0.0) || !(s.limit > s.ideal) {
                return Err(Error::InvalidArgument(format!(
                    "{m}: need S > I >= 0, got S={} I={}",
                    s.limit, s.ideal
                )));
            }
        }
        Ok(StandardsTable { k, metals })
    }

    /// WHO drinking-water guideline values with `I = 0` and `k = 1`.
    pub fn who_default() -> Self {
        let limits = [0.3, 0.08, 0.07, 0.01, 0.003, 0.01];
        let metals = Metal::ALL
            .iter()
            .zip(limits)
            .map(|(&m, limit)| (m, MetalStandard { limit, ideal: 0.0 }))
            .collect();
        StandardsTable { k: 1.0, metals }
    }

    pub fn get(&self, metal: Metal) -> Result<&MetalStandard> {
        self.metals
            .get(&metal)
            .ok_or_else(|| Error::MissingMetal(metal.symbol().into()))
    }

    /// Parses the TOML standards file:
    ///
    /// ```toml
    /// k = 1.0
    /// [Fe]
    /// S = 0.3
    /// I = 0.0   # optional, defaults to 0
    /// ```
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Parse {
            path: "<standards>".into(),
            message: e.to_string(),
        })?;
        let mut k = 1.0;
        let mut metals = BTreeMap::new();
        for (key, value) in table {
            if key == "k" {
                k = value
                    .as_float()
                    .or_else(|| value.as_integer().map(|i| i as f64))
                    .ok_or_else(|| Error::InvalidArgument("k must be numeric".into()))?;
                continue;
            }
            let metal: Metal = key.parse()?;
            let std: MetalStandard =
                value
                    .try_into()
                    .map_err(|e: toml::de::Error| Error::Parse {
                        path: "<standards>".into(),
                        message: format!("{key}: {e}"),
                    })?;
            metals.insert(metal, std);
        }
        StandardsTable::new(k, metals)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Parse { message, .. } => Error::Parse {
                path: path.to_path_buf(),
                message,
            },
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> String {
        let mut out = format!("k = {:?}\n", self.k);
        for (m, s) in &self.metals {
            out.push_str(&format!("\n[{m}]\nS = {:?}\nI = {:?}\n", s.limit, s.ideal));
        }
        out
    }
}

/// Column-wise z-score map fitted on training rows (sample std, ddof = 1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardiser {
    pub names: Vec<String>,
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
}

impl Standardiser {
    pub fn fit(x: ArrayView2<'_, f64>, names: &[String]) -> Result<Self> {
        crate::audit::count_fit();
        let n = x.nrows();
        if n < 2 {
            return Err(Error::InvalidArgument(format!(
                "standardiser needs >= 2 rows, got {n}"
            )));
        }
        if names.len() != x.ncols() {
            return Err(Error::DimensionMismatch {
                expected: x.ncols(),
                got: names.len(),
            });
        }
        let mut means = Vec::with_capacity(x.ncols());
        let mut stds = Vec::with_capacity(x.ncols());
        for (j, col) in x.columns().into_iter().enumerate() {
            let mean = col.sum() / n as f64;
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            let sd = var.sqrt();
            if !(sd > 0.0) || !sd.is_finite() {
                return Err(Error::ConstantColumn(names[j].clone()));
            }
            means.push(mean);
            stds.push(sd);
        }
        Ok(Standardiser {
            names: names.to_vec(),
            means,
            stds,
        })
    }

    pub fn n_features(&self) -> usize {
        self.means.len()
    }

    pub fn apply(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        self.check(x.ncols())?;
        let mut out = x.to_owned();
        for (j, mut col) in out.columns_mut().into_iter().enumerate() {
            let (m, s) = (self.means[j], self.stds[j]);
            col.mapv_inplace(|v| (v - m) / s);
        }
        Ok(out)
    }

    pub fn inverse(&self, z: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        self.check(z.ncols())?;
        let mut out = z.to_owned();
        for (j, mut col) in out.columns_mut().into_iter().enumerate() {
            let (m, s) = (self.means[j], self.stds[j]);
            col.mapv_inplace(|v| v * s + m);
        }
        Ok(out)
    }

    fn check(&self, cols: usize) -> Result<()> {
        if cols != self.n_features() {
            return Err(Error::DimensionMismatch {
                expected: self.n_features(),
                got: cols,
            });
        }
        Ok(())
    }
}

pub fn metal_names() -> Vec<String> {
    Metal::ALL.iter().map(|m| m.symbol().to_string()).collect()
}

pub fn fit_standardiser(train: &SampleTable) -> Result<Standardiser> {
    Standardiser::fit(train.metals.view(), &metal_names())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            train_fraction: 0.7,
            seed: 42,
        }
    }
}

/// Disjoint, exhaustive train/test index lists, each sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

pub fn split_indices(n: usize, spec: &SplitSpec) -> Result<Split> {
    if !(spec.train_fraction > 0.0 && spec.train_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "train fraction must lie in (0, 1), got {}",
            spec.train_fraction
        )));
    }
    if n < 4 {
        return Err(Error::InvalidArgument(format!(
            "split needs n >= 4, got {n}"
        )));
    }
    let n_train = (spec.train_fraction * n as f64).round() as usize;
    if n_train == 0 || n_train == n {
        return Err(Error::InvalidArgument(format!(
            "fraction {} leaves an empty side for n = {n}",
            spec.train_fraction
        )));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng::stream(spec.seed, 0x5117));
    let mut train = idx[..n_train].to_vec();
    let mut test = idx[n_train..].to_vec();
    train.sort_unstable();
    test.sort_unstable();
    Ok(Split { train, test })
}

pub fn split(table: &SampleTable, spec: &SplitSpec) -> Result<(SampleTable, SampleTable)> {
    let s = split_indices(table.len(), spec)?;
    Ok((table.subset(&s.train), table.subset(&s.test)))
}
