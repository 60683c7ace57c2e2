//! JSON form of complex matrices: a row-major array of `[re, im]` pairs.

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::linalg::{CMat, C64};

pub fn to_rows(m: &CMat) -> Vec<Vec<[f64; 2]>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
        .collect()
}

pub fn from_rows(rows: &[Vec<[f64; 2]>]) -> Result<CMat, String> {
    let r = rows.len();
    let c = rows.first().map_or(0, |row| row.len());
    if rows.iter().any(|row| row.len() != c) {
        return Err("ragged matrix rows".into());
    }
    let mut m = crate::linalg::zeros(r, c);
    for (i, row) in rows.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            m[(i, j)] = C64::new(v[0], v[1]);
        }
    }
    Ok(m)
}

pub fn serialize<S: Serializer>(m: &CMat, s: S) -> Result<S::Ok, S::Error> {
    to_rows(m).serialize(s)
}

pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<CMat, D::Error> {
    let rows = Vec::<Vec<[f64; 2]>>::deserialize(d)?;
    from_rows(&rows).map_err(D::Error::custom)
}

pub mod list {
    use super::*;

    pub fn serialize<S: Serializer>(ms: &[CMat], s: S) -> Result<S::Ok, S::Error> {
        ms.iter().map(to_rows).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<CMat>, D::Error> {
        let raw = Vec::<Vec<Vec<[f64; 2]>>>::deserialize(d)?;
        raw.iter().map(|rows| from_rows(rows).map_err(D::Error::custom)).collect()
    }
}
