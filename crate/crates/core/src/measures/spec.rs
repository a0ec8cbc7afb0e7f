//! Declarative family descriptions, as they appear in experiment configs.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::group::GroupElem;
use crate::measures::{BlockFamily, Example33, Example33Params, MeasureFamily, ProbVector};

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableEntry {
    pub at: Vec<i64>,
    pub p: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FamilySpec {
    Stationary {
        p: Vec<f64>,
        #[serde(default = "one")]
        dim: usize,
    },
    Table {
        #[serde(default = "one")]
        dim: usize,
        default: Vec<f64>,
        #[serde(default)]
        entries: Vec<TableEntry>,
        #[serde(default)]
        symmetric: bool,
    },
    Blocks {
        lambda: f64,
        a: Vec<i64>,
        alpha: Vec<f64>,
    },
    Example33 {
        lambda: f64,
        xi: f64,
        a1: u64,
        rho: f64,
        #[serde(default)]
        levels: Option<usize>,
    },
}

impl FamilySpec {
    pub fn example33(&self) -> Option<Result<Example33>> {
        match *self {
            FamilySpec::Example33 {
                lambda,
                xi,
                a1,
                rho,
                levels,
            } => {
                let mut params = Example33Params::new(lambda, xi, a1, rho);
                if let Some(l) = levels {
                    params.levels = l;
                }
                Some(Example33::build(params))
            }
            _ => None,
        }
    }

    pub fn build(&self) -> Result<MeasureFamily> {
        match self {
            FamilySpec::Stationary { p, dim } => {
                if *dim == 0 {
                    return Err(Error::param("dim", "must be at least 1"));
                }
                Ok(MeasureFamily::stationary(ProbVector::new(p.iter().copied())?, *dim))
            }
            FamilySpec::Table {
                dim,
                default,
                entries,
                symmetric,
            } => {
                if *dim == 0 {
                    return Err(Error::param("dim", "must be at least 1"));
                }
                let mut map = BTreeMap::new();
                for e in entries {
                    if e.at.len() != *dim {
                        return Err(Error::DimensionMismatch {
                            left: *dim,
                            right: e.at.len(),
                        });
                    }
                    let g = GroupElem::new(e.at.iter().copied());
                    if map.insert(g.clone(), ProbVector::new(e.p.iter().copied())?).is_some() {
                        return Err(Error::param("entries", format!("duplicate index {g}")));
                    }
                }
                Ok(MeasureFamily::table(*dim, map, ProbVector::new(default.iter().copied())?)?
                    .with_symmetric(*symmetric))
            }
            FamilySpec::Blocks { lambda, a, alpha } => Ok(MeasureFamily::blocks(
                BlockFamily::new(*lambda, a.clone(), alpha.clone())?,
            )),
            FamilySpec::Example33 { .. } => Ok(self.example33().unwrap()?.family()),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            FamilySpec::Stationary { dim, .. } | FamilySpec::Table { dim, .. } => *dim,
            _ => 1,
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            FamilySpec::Stationary { .. } => "stationary",
            FamilySpec::Table { .. } => "table",
            FamilySpec::Blocks { .. } => "blocks",
            FamilySpec::Example33 { .. } => "example33",
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builds_each_kind() {
        let st = FamilySpec::Stationary {
            p: vec![0.3, 0.7],
            dim: 1,
        };
        assert_eq!(st.build().unwrap().prob_z(5, 1), 0.7);

        let tb = FamilySpec::Table {
            dim: 1,
            default: vec![0.5, 0.5],
            entries: vec![TableEntry {
                at: vec![0],
                p: vec![0.3, 0.7],
            }],
            symmetric: false,
        };
        assert_eq!(tb.build().unwrap().prob_z(0, 0), 0.3);

        let ex = FamilySpec::Example33 {
            lambda: 0.4,
            xi: 33.0,
            a1: 10,
            rho: 9.0,
            levels: Some(30),
        };
        assert_eq!(ex.build().unwrap().prob_z(0, 0), 0.4);
    }

    #[test]
    fn rejects_bad_parameters() {
        let bad = FamilySpec::Example33 {
            lambda: 0.6,
            xi: 33.0,
            a1: 10,
            rho: 9.0,
            levels: None,
        };
        assert!(bad.build().unwrap_err().to_string().contains("(0, 1/2)"));
        let dup = FamilySpec::Table {
            dim: 1,
            default: vec![0.5, 0.5],
            entries: vec![
                TableEntry { at: vec![0], p: vec![0.3, 0.7] },
                TableEntry { at: vec![0], p: vec![0.2, 0.8] },
            ],
            symmetric: false,
        };
        assert!(dup.build().is_err());
    }
}
