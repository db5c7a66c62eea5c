//! JSON file format for states and observables:
//! `{"kind": "pure"|"mixed"|"observable", "dims": [d] or [m, n], "data": [[re, im], ...]}`.
//! Matrices are stored row major.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::linalg::CMatrix;
use super::{DensityOperator, Observable, PureState, Tolerances};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ObjectKind {
    Pure,
    Mixed,
    Observable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateFile {
    pub kind: ObjectKind,
    pub dims: Vec<usize>,
    pub data: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LoadedObject {
    Pure(PureState),
    Mixed(DensityOperator),
    Observable(Observable),
}

impl StateFile {
    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Json(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("plain data serializes")
    }

    fn total_dim(&self) -> Result<(usize, Option<(usize, usize)>)> {
        match self.dims.as_slice() {
            [d] => Ok((*d, None)),
            [m, n] => Ok((m * n, Some((*m, *n)))),
            other => Err(Error::Json(format!("dims must have 1 or 2 entries, got {}", other.len()))),
        }
    }

    fn amplitudes(&self) -> Vec<Complex64> {
        self.data.iter().map(|[re, im]| Complex64::new(*re, *im)).collect()
    }

    fn matrix(&self, d: usize) -> Result<CMatrix> {
        if self.data.len() != d * d {
            return Err(Error::Json(format!(
                "expected {} matrix entries for dimension {d}, got {}",
                d * d,
                self.data.len()
            )));
        }
        Ok(CMatrix::from_row_slice(d, d, &self.amplitudes()))
    }

    /// Validates the contents against the invariants of the declared kind.
    pub fn load(&self, tol: &Tolerances) -> Result<LoadedObject> {
        let (d, split) = self.total_dim()?;
        match self.kind {
            ObjectKind::Pure => {
                if self.data.len() != d {
                    return Err(Error::Json(format!(
                        "expected {d} amplitudes, got {}",
                        self.data.len()
                    )));
                }
                let mut s = PureState::with_tolerances(self.amplitudes(), tol)?;
                if let Some((m, n)) = split {
                    s = s.with_bipartite(m, n)?;
                }
                Ok(LoadedObject::Pure(s))
            }
            ObjectKind::Mixed => {
                let mut rho = DensityOperator::with_tolerances(self.matrix(d)?, tol)?;
                if let Some((m, n)) = split {
                    rho = rho.with_bipartite(m, n)?;
                }
                Ok(LoadedObject::Mixed(rho))
            }
            ObjectKind::Observable => {
                Ok(LoadedObject::Observable(Observable::with_tolerances(self.matrix(d)?, tol)?))
            }
        }
    }

    pub fn from_pure(s: &PureState) -> Self {
        Self {
            kind: ObjectKind::Pure,
            dims: dims_of(s.dim(), s.bipartite_dims()),
            data: s.amplitudes().iter().map(|z| [z.re, z.im]).collect(),
        }
    }

    pub fn from_density(rho: &DensityOperator) -> Self {
        Self {
            kind: ObjectKind::Mixed,
            dims: dims_of(rho.dim(), rho.bipartite_dims()),
            data: row_major(rho.matrix()),
        }
    }

    pub fn from_observable(a: &Observable) -> Self {
        Self { kind: ObjectKind::Observable, dims: vec![a.dim()], data: row_major(a.matrix()) }
    }
}

fn dims_of(d: usize, split: Option<(usize, usize)>) -> Vec<usize> {
    match split {
        Some((m, n)) => vec![m, n],
        None => vec![d],
    }
}

fn row_major(m: &CMatrix) -> Vec<[f64; 2]> {
    let mut out = Vec::with_capacity(m.len());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            out.push([m[(i, j)].re, m[(i, j)].im]);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{random_density, random_pure};

    #[test]
    fn roundtrip_all_kinds() {
        let tol = Tolerances::default();
        let s = random_pure(4, 1).unwrap().with_bipartite(2, 2).unwrap();
        let f = StateFile::parse(&StateFile::from_pure(&s).to_json()).unwrap();
        assert_eq!(f.load(&tol).unwrap(), LoadedObject::Pure(s));

        let rho = random_density(3, 2, 2).unwrap();
        let f = StateFile::parse(&StateFile::from_density(&rho).to_json()).unwrap();
        assert_eq!(f.load(&tol).unwrap(), LoadedObject::Mixed(rho));

        let a = Observable::pauli_y();
        let f = StateFile::parse(&StateFile::from_observable(&a).to_json()).unwrap();
        assert_eq!(f.load(&tol).unwrap(), LoadedObject::Observable(a));
    }

    #[test]
    fn rejects_bad_files() {
        let tol = Tolerances::default();
        let f = StateFile::parse(r#"{"kind":"pure","dims":[2],"data":[[1,0],[1,0]]}"#).unwrap();
        assert!(matches!(f.load(&tol), Err(Error::NotNormalized { .. })));
        let f = StateFile::parse(r#"{"kind":"observable","dims":[2],"data":[[0,0],[1,0],[0,0],[0,0]]}"#)
            .unwrap();
        assert!(matches!(f.load(&tol), Err(Error::NotHermitian { .. })));
        let f = StateFile::parse(r#"{"kind":"mixed","dims":[2],"data":[[1,0]]}"#).unwrap();
        assert!(matches!(f.load(&tol), Err(Error::Json(_))));
        assert!(StateFile::parse(r#"{"kind":"ket","dims":[2],"data":[]}"#).is_err());
    }
}
