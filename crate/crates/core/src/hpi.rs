//! Heavy Metal Pollution Index.
//!
//! Sub-index `Q = (M − I)/(S − I)·100`, unit weight `W = k/S`, and
//! `HPI = ΣWQ / ΣW`. Quality bands are half-open so every real value maps to
//! exactly one class: `[0,15)`, `[15,31)`, `[31,76)`, `[76,100]`, `(100,∞)`.

use serde::{Deserialize, Serialize};

use crate::data::{Metal, MetalStandard, SampleTable, StandardsTable, METAL_COUNT};
use crate::error::{Error, Result};

pub fn sub_index(measured: f64, limit: f64, ideal: f64) -> Result<f64> {
    if limit == ideal {
        return Err(Error::InvalidArgument(
            "permissible limit equals ideal value".into(),
        ));
    }
    Ok((measured - ideal) / (limit - ideal) * 100.0)
}

pub fn unit_weight(limit: f64, k: f64) -> Result<f64> {
    if !(limit > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "permissible limit must be > 0, got {limit}"
        )));
    }
    if !(k > 0.0) {
        return Err(Error::InvalidArgument(format!("k must be > 0, got {k}")));
    }
    Ok(k / limit)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HpiClass {
    Excellent,
    GoodToIntermediate,
    PoorToUnsuitable,
    VeryPoor,
    UnsuitableForDrinking,
}

impl HpiClass {
    pub fn of(hpi: f64) -> HpiClass {
        if hpi < 15.0 {
            HpiClass::Excellent
        } else if hpi < 31.0 {
            HpiClass::GoodToIntermediate
        } else if hpi < 76.0 {
            HpiClass::PoorToUnsuitable
        } else if hpi <= 100.0 {
            HpiClass::VeryPoor
        } else {
            HpiClass::UnsuitableForDrinking
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            HpiClass::Excellent => "excellent",
            HpiClass::GoodToIntermediate => "good_to_intermediate",
            HpiClass::PoorToUnsuitable => "poor_to_unsuitable",
            HpiClass::VeryPoor => "very_poor",
            HpiClass::UnsuitableForDrinking => "unsuitable_for_drinking",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HpiResult {
    pub sub_indices: [f64; METAL_COUNT],
    pub weights: [f64; METAL_COUNT],
    pub hpi: f64,
    pub class: HpiClass,
}

/// Weighted mean of sub-indices over any set of metals.
///
/// Returns `(HPI, Q, W)`.
pub fn weighted_index(
    measured: &[f64],
    standards: &[MetalStandard],
    k: f64,
) -> Result<(f64, Vec<f64>, Vec<f64>)> {
    if measured.len() != standards.len() {
        return Err(Error::DimensionMismatch {
            expected: standards.len(),
            got: measured.len(),
        });
    }
    if measured.is_empty() {
        return Err(Error::Empty("no metals to aggregate".into()));
    }
    let mut q = Vec::with_capacity(measured.len());
    let mut w = Vec::with_capacity(measured.len());
    for (&m, s) in measured.iter().zip(standards) {
        q.push(sub_index(m, s.limit, s.ideal)?);
        w.push(unit_weight(s.limit, k)?);
    }
    let wsum: f64 = w.iter().sum();
    // Offset from the first sub-index so that equal sub-indices give that
    // value exactly.
    let q0 = q[0];
    let value = q0 + w.iter().zip(&q).map(|(w, q)| w * (q - q0)).sum::<f64>() / wsum;
    Ok((value, q, w))
}

/// HPI of one sample; `metals` is in [`Metal::ALL`] order.
pub fn hpi(metals: &[f64], standards: &StandardsTable) -> Result<HpiResult> {
    if metals.len() != METAL_COUNT {
        return Err(Error::DimensionMismatch {
            expected: METAL_COUNT,
            got: metals.len(),
        });
    }
    let stds = Metal::ALL
        .iter()
        .map(|&m| standards.get(m).copied())
        .collect::<Result<Vec<_>>>()?;
    let (value, q, w) = weighted_index(metals, &stds, standards.k)?;
    Ok(HpiResult {
        sub_indices: q.try_into().expect("six metals"),
        weights: w.try_into().expect("six metals"),
        hpi: value,
        class: HpiClass::of(value),
    })
}

pub fn hpi_column(table: &SampleTable, standards: &StandardsTable) -> Result<Vec<f64>> {
    table
        .metals
        .outer_iter()
        .map(|row| hpi(row.as_slice().expect("standard layout"), standards).map(|r| r.hpi))
        .collect()
}

/// `id,HPI,class` rows.
pub fn write_hpi_csv<W: std::io::Write>(
    table: &SampleTable,
    values: &[f64],
    writer: W,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["id", "HPI", "class"])?;
    for (id, &v) in table.ids.iter().zip(values) {
        w.write_record([id.as_str(), &format!("{v}"), HpiClass::of(v).label()])?;
    }
    w.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::collections::BTreeMap;

    fn standards(limits: [f64; 6], k: f64) -> StandardsTable {
        let metals: BTreeMap<_, _> = Metal::ALL
            .iter()
            .zip(limits)
            .map(|(&m, limit)| (m, MetalStandard { limit, ideal: 0.0 }))
            .collect();
        StandardsTable::new(k, metals).unwrap()
    }

    #[test]
    fn sub_index_cases() {
        assert_eq!(sub_index(0.0, 0.01, 0.0).unwrap(), 0.0);
        assert_eq!(sub_index(0.01, 0.01, 0.0).unwrap(), 100.0);
        assert_abs_diff_eq!(sub_index(0.005, 0.01, 0.0).unwrap(), 50.0, epsilon = 1e-12);
        assert!(sub_index(1.0, 0.5, 0.5).is_err());
    }

    #[test]
    fn unit_weight_cases() {
        assert_abs_diff_eq!(unit_weight(0.01, 1.0).unwrap(), 100.0, epsilon = 1e-12);
        assert_abs_diff_eq!(
            unit_weight(0.3, 1.0).unwrap(),
            3.3333333333333335,
            epsilon = 1e-12
        );
        assert_eq!(
            unit_weight(0.3, 2.0).unwrap(),
            2.0 * unit_weight(0.3, 1.0).unwrap()
        );
        assert!(unit_weight(0.0, 1.0).is_err());
    }

    #[test]
    fn zero_and_at_limit() {
        let s = StandardsTable::who_default();
        let r = hpi(&[0.0; 6], &s).unwrap();
        assert_eq!(r.hpi, 0.0);
        assert_eq!(r.class, HpiClass::Excellent);
        let at: Vec<f64> = Metal::ALL
            .iter()
            .map(|&m| s.get(m).unwrap().limit)
            .collect();
        let r = hpi(&at, &s).unwrap();
        assert_eq!(r.hpi, 100.0);
        assert_eq!(r.class, HpiClass::VeryPoor);
    }

    #[test]
    fn two_metal_hand_case() {
        let stds = [
            MetalStandard {
                limit: 0.01,
                ideal: 0.0,
            },
            MetalStandard {
                limit: 0.1,
                ideal: 0.0,
            },
        ];
        let (v, q, w) = weighted_index(&[0.01, 0.0], &stds, 1.0).unwrap();
        assert_eq!(q, vec![100.0, 0.0]);
        assert_abs_diff_eq!(w[1], 10.0, epsilon = 1e-12);
        assert_abs_diff_eq!(v, 10000.0 / 110.0, epsilon = 1e-9);
        assert_eq!(HpiClass::of(v), HpiClass::VeryPoor);
    }

    #[test]
    fn missing_metal_named() {
        let mut metals = BTreeMap::new();
        metals.insert(
            Metal::Fe,
            MetalStandard {
                limit: 0.3,
                ideal: 0.0,
            },
        );
        let s = StandardsTable::new(1.0, metals).unwrap();
        match hpi(&[0.1; 6], &s).unwrap_err() {
            Error::MissingMetal(m) => assert_eq!(m, "Mn"),
            e => panic!("{e}"),
        }
    }

    #[test]
    fn class_boundaries() {
        let cases = [
            (0.0, HpiClass::Excellent),
            (14.999, HpiClass::Excellent),
            (15.0, HpiClass::GoodToIntermediate),
            (30.0, HpiClass::GoodToIntermediate),
            (30.5, HpiClass::GoodToIntermediate),
            (31.0, HpiClass::PoorToUnsuitable),
            (75.0, HpiClass::PoorToUnsuitable),
            (75.5, HpiClass::PoorToUnsuitable),
            (76.0, HpiClass::VeryPoor),
            (100.0, HpiClass::VeryPoor),
            (100.0001, HpiClass::UnsuitableForDrinking),
        ];
        for (v, c) in cases {
            assert_eq!(HpiClass::of(v), c, "{v}");
        }
    }

    #[test]
    fn csv_export() {
        let t = SampleTable::new(
            vec!["a".into()],
            vec![(0.0, 0.0)],
            ndarray::array![[0.3, 0.08, 0.07, 0.01, 0.003, 0.01]],
        )
        .unwrap();
        let v = hpi_column(&t, &StandardsTable::who_default()).unwrap();
        let mut buf = Vec::new();
        write_hpi_csv(&t, &v, &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "id,HPI,class\na,100,very_poor\n"
        );
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn limits() -> impl Strategy<Value = [f64; 6]> {
            prop::array::uniform6(1e-3f64..1.0)
        }

        proptest! {
            #[test]
            fn k_invariance(l in limits(), m in prop::array::uniform6(0.0f64..2.0)) {
                let base = hpi(&m, &standards(l, 1.0)).unwrap().hpi;
                for k in [0.1, 7.3] {
                    let v = hpi(&m, &standards(l, k)).unwrap().hpi;
                    prop_assert!((v - base).abs() <= 1e-12 * base.abs().max(1.0));
                }
            }

            #[test]
            fn monotone_in_each_metal(l in limits(), m in prop::array::uniform6(0.0f64..2.0), j in 0usize..6, dv in 0.0f64..1.0) {
                let s = standards(l, 1.0);
                let a = hpi(&m, &s).unwrap().hpi;
                let mut m2 = m;
                m2[j] += dv;
                prop_assert!(hpi(&m2, &s).unwrap().hpi >= a - 1e-12);
            }

            #[test]
            fn convex_combination_bounds(l in limits(), m in prop::array::uniform6(0.0f64..2.0)) {
                let r = hpi(&m, &standards(l, 1.0)).unwrap();
                let lo = r.sub_indices.iter().cloned().fold(f64::INFINITY, f64::min);
                let hi = r.sub_indices.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                prop_assert!(r.hpi >= lo - 1e-9 && r.hpi <= hi + 1e-9);
                prop_assert!(r.hpi >= 0.0);
            }
        }
    }
}
