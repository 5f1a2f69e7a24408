//! JSON model files.
//!
//! ```json
//! {"kappa": 2, "seasons": [{"type": "poisson", "lambda": 1.0, "shift": 0},
//!                          {"type": "table", "probs": [0.5, 0.5]}]}
//! ```

use serde::{Deserialize, Serialize};
use serde_json::error::Category;

use crate::dist::DiscreteDist;
use crate::error::{Error, Result};
use crate::model::RiskModel;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub kappa: i64,
    pub seasons: Vec<DiscreteDist>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
}

fn invalid(path: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Validation {
        path: path.into(),
        message: message.into(),
    }
}

impl ModelFile {
    pub fn into_model(self) -> Result<RiskModel> {
        if self.kappa < 1 {
            return Err(invalid(
                "kappa",
                format!("must be at least 1, got {}", self.kappa),
            ));
        }
        if self.seasons.is_empty() {
            return Err(invalid("seasons", "at least one season is required"));
        }
        for (i, d) in self.seasons.iter().enumerate() {
            if let Err(e) = d.validate() {
                let field = match d {
                    DiscreteDist::FiniteTable { .. } => "probs",
                    DiscreteDist::DisplacedPoisson { .. } => "lambda",
                };
                let msg = match e {
                    Error::InvalidDistribution(m) => m,
                    other => other.to_string(),
                };
                return Err(invalid(format!("seasons[{i}].{field}"), msg));
            }
        }
        Ok(RiskModel {
            kappa: self.kappa as usize,
            seasons: self.seasons,
            name: self.name,
            description: self.description,
        })
    }
}

impl From<&RiskModel> for ModelFile {
    fn from(m: &RiskModel) -> Self {
        ModelFile {
            kappa: m.kappa as i64,
            seasons: m.seasons.clone(),
            name: m.name.clone(),
            description: m.description.clone(),
        }
    }
}

/// Parses and validates a model file. Syntax errors map to [`Error::Parse`],
/// everything else to [`Error::Validation`] with the offending field path.
pub fn parse_model(text: &str) -> Result<RiskModel> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let file: ModelFile = match serde_path_to_error::deserialize(de) {
        Ok(f) => f,
        Err(e) => {
            let path = e.path().to_string();
            let inner = e.into_inner();
            return Err(match inner.classify() {
                Category::Data => invalid(path, inner.to_string()),
                _ => Error::Parse(inner.to_string()),
            });
        }
    };
    file.into_model()
}

pub fn emit_model(model: &RiskModel) -> String {
    serde_json::to_string_pretty(&ModelFile::from(model)).expect("model serializes")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_paper_examples() {
        let m = parse_model(
            r#"{"kappa":2,"seasons":[{"type":"poisson","lambda":1.0,"shift":0},{"type":"poisson","lambda":2.0,"shift":0}]}"#,
        )
        .unwrap();
        assert_eq!(m.kappa, 2);
        assert_eq!(m.seasons[1], DiscreteDist::poisson(2.0, 0).unwrap());
        let m = parse_model(
            r#"{"kappa":3,"seasons":[{"type":"table","probs":[0.4096,0.4096,0.1536,0.0256,0.0016]},{"type":"table","probs":[0.04,0.32,0.64]}]}"#,
        )
        .unwrap();
        assert_eq!(m.n_seasons(), 2);
    }

    #[test]
    fn validation_paths() {
        let err = |t: &str| parse_model(t).unwrap_err();
        let path = |e: Error| match e {
            Error::Validation { path, .. } => path,
            other => panic!("expected validation error, got {other:?}"),
        };
        assert_eq!(
            path(err(r#"{"kappa":0,"seasons":[{"type":"table","probs":[1.0]}]}"#)),
            "kappa"
        );
        assert_eq!(path(err(r#"{"kappa":1,"seasons":[]}"#)), "seasons");
        assert_eq!(
            path(err(
                r#"{"kappa":1,"seasons":[{"type":"table","probs":[1.0]},{"type":"table","probs":[0.5,0.6]}]}"#
            )),
            "seasons[1].probs"
        );
        assert_eq!(
            path(err(
                r#"{"kappa":1,"seasons":[{"type":"table","probs":[-0.5,1.5]}]}"#
            )),
            "seasons[0].probs"
        );
        assert!(matches!(err(r#"{"kappa":1,"#), Error::Parse(_)));
    }

    #[test]
    fn unknown_fields_rejected() {
        let e = parse_model(r#"{"kappa":1,"seasons":[{"type":"table","probs":[1.0],"x":2}]}"#).unwrap_err();
        assert!(matches!(e, Error::Validation { .. }));
        let e = parse_model(r#"{"kappa":1,"seasons":[{"type":"table","probs":[1.0]}],"colour":"red"}"#)
            .unwrap_err();
        assert!(matches!(e, Error::Validation { .. }));
    }

    #[test]
    fn round_trip() {
        let mut m = RiskModel::new(
            3,
            vec![
                DiscreteDist::table(vec![0.1, 0.2, 0.7]).unwrap(),
                DiscreteDist::poisson(0.123456789012345, 2).unwrap(),
            ],
        )
        .unwrap();
        m.name = Some("mixed".into());
        assert_eq!(parse_model(&emit_model(&m)).unwrap(), m);
    }
}
