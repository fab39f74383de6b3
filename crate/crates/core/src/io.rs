//! JSON encodings: complex numbers as `[re, im]`, matrices as row-major
//! lists of rows.

use crate::linalg::{Mat, C};
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub fn c_to_pair(z: C) -> [f64; 2] {
    [z.re, z.im]
}

pub fn mat_to_rows(m: &Mat) -> Vec<Vec<[f64; 2]>> {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| c_to_pair(m[(i, j)])).collect()).collect()
}

pub fn rows_to_mat(rows: &[Vec<[f64; 2]>]) -> Result<Mat, String> {
    let r = rows.len();
    let cols = rows.first().map_or(0, |x| x.len());
    if rows.iter().any(|x| x.len() != cols) {
        return Err("ragged matrix rows".into());
    }
    Ok(Mat::from_fn(r, cols, |i, j| C::new(rows[i][j][0], rows[i][j][1])))
}

/// Serde adapter for `Vec<C>`.
pub mod cvec {
    use super::*;

    pub fn serialize<S: Serializer>(v: &[C], s: S) -> Result<S::Ok, S::Error> {
        v.iter().map(|z| c_to_pair(*z)).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<C>, D::Error> {
        let raw: Vec<[f64; 2]> = Vec::deserialize(d)?;
        Ok(raw.into_iter().map(|p| C::new(p[0], p[1])).collect())
    }
}

/// Serde adapter for `C`.
pub mod cnum {
    use super::*;

    pub fn serialize<S: Serializer>(z: &C, s: S) -> Result<S::Ok, S::Error> {
        c_to_pair(*z).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<C, D::Error> {
        let p: [f64; 2] = Deserialize::deserialize(d)?;
        Ok(C::new(p[0], p[1]))
    }
}

/// Serde adapter for `Mat`.
pub mod cmat {
    use super::*;

    pub fn serialize<S: Serializer>(m: &Mat, s: S) -> Result<S::Ok, S::Error> {
        mat_to_rows(m).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Mat, D::Error> {
        let rows: Vec<Vec<[f64; 2]>> = Vec::deserialize(d)?;
        rows_to_mat(&rows).map_err(D::Error::custom)
    }
}

/// Serde adapter for `Vec<Mat>`.
pub mod cmats {
    use super::*;

    pub fn serialize<S: Serializer>(v: &[Mat], s: S) -> Result<S::Ok, S::Error> {
        v.iter().map(mat_to_rows).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Mat>, D::Error> {
        let raw: Vec<Vec<Vec<[f64; 2]>>> = Vec::deserialize(d)?;
        raw.iter().map(|r| rows_to_mat(r).map_err(D::Error::custom)).collect()
    }
}

/// Serde adapter for `Vec<Vec<Mat>>`.
pub mod cmatss {
    use super::*;

    pub fn serialize<S: Serializer>(v: &[Vec<Mat>], s: S) -> Result<S::Ok, S::Error> {
        v.iter().map(|row| row.iter().map(mat_to_rows).collect::<Vec<_>>()).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Vec<Mat>>, D::Error> {
        let raw: Vec<Vec<Vec<Vec<[f64; 2]>>>> = Vec::deserialize(d)?;
        raw.iter()
            .map(|row| row.iter().map(|r| rows_to_mat(r).map_err(D::Error::custom)).collect())
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::irregular::{IrregularType, Term};

    #[test]
    fn irregular_type_round_trip() {
        let q = IrregularType::new(2, vec![Term { k: 1, a: vec![C::new(1.0, 0.5), C::new(-1.0, 0.0)] }]).unwrap();
        let s = serde_json::to_string(&q).unwrap();
        assert_eq!(s, r#"{"n":2,"terms":[{"k":1,"A":[[1.0,0.5],[-1.0,0.0]]}]}"#);
        let back: IrregularType = serde_json::from_str(&s).unwrap();
        assert_eq!(back, q);
    }

    #[test]
    fn matrix_rows_are_row_major() {
        let m = Mat::from_row_slice(1, 2, &[C::new(1.0, 0.0), C::new(0.0, 2.0)]);
        assert_eq!(mat_to_rows(&m), vec![vec![[1.0, 0.0], [0.0, 2.0]]]);
        assert!(rows_to_mat(&[vec![[0.0, 0.0]], vec![]]).is_err());
    }
}
