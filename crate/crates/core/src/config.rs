//! Assessment configuration: dialect, weights, grade scales, rounding mode
//! and representations. One TOML file drives both the CLI and the service.
//!
//! ```toml
//! rounding_mode = "exact-2dp"          # or "truncate-error-percentage"
//! default_scale = "freshman"
//!
//! [taxonomy]
//! name = "content-form-style"
//! version = "1"
//! severity_attribute = "weight"
//! [[taxonomy.categories]]
//! id = "content"
//! tag_name = "content_mistake"
//! label = "Content mistake"
//! allowed_severities = ["minor", "major", "critical"]
//!
//! [weights.defaults]
//! minor = 1
//! major = 2
//! critical = 3
//! [[weights.overrides]]
//! category = "content"
//! severity = "major"
//! points = "5/2"
//!
//! [[scales]]
//! name = "freshman"
//! bands = [
//!   { lower = 0, upper = 85, label = "satisfactory" },
//!   { lower = 85, upper = 100, label = "good" },
//! ]
//!
//! [[representations]]
//! name = "critical-only"
//! include_severities = ["critical"]
//! styles.critical = { background = "red", bold = true }
//! ```
//!
//! Missing sections fall back to the built-in defaults.

use std::path::Path;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Taxonomy, TaxonomyError};
use crate::render::Representation;
use crate::scoring::{RoundingMode, ScaleError, WeightError};
use crate::{GradeScale, Rational, WeightConfig};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("cannot parse config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error(transparent)]
    Taxonomy(#[from] TaxonomyError),
    #[error(transparent)]
    Weights(#[from] WeightError),
    #[error(transparent)]
    Scale(#[from] ScaleError),
    #[error("duplicate scale `{0}`")]
    DuplicateScale(String),
    #[error("duplicate representation `{0}`")]
    DuplicateRepresentation(String),
    #[error("default scale `{0}` is not defined")]
    MissingDefaultScale(String),
    #[error("representation `{0}` names unknown categories: {1}")]
    Representation(String, String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AssessmentConfig {
    pub taxonomy: Taxonomy,
    pub weights: WeightConfig,
    pub scales: Vec<GradeScale>,
    pub default_scale: String,
    pub rounding_mode: RoundingMode,
    pub representations: Vec<Representation>,
}

fn r(n: i64) -> Rational {
    Ratio::from_integer(n)
}

impl Default for AssessmentConfig {
    /// Content/form/style dialect, weights 1/2/3, freshman (default) and
    /// senior scales, exact-2dp rounding and the stock representations.
    fn default() -> Self {
        let freshman = GradeScale::from_thresholds(
            "freshman",
            &[(r(0), "unsatisfactory"), (r(70), "satisfactory"), (r(85), "good"), (r(95), "excellent")],
        );
        let senior = GradeScale::from_thresholds(
            "senior",
            &[(r(0), "unsatisfactory"), (r(80), "satisfactory"), (r(92), "good"), (r(98), "excellent")],
        );
        let taxonomy = Taxonomy::default_dialect();
        let mut representations = vec![
            Representation::severity_highlight(),
            Representation::critical_only(),
            Representation::plain(),
        ];
        representations.extend(taxonomy.categories.iter().map(|c| Representation::category_only(&c.id)));
        AssessmentConfig {
            taxonomy,
            weights: WeightConfig::default(),
            scales: vec![freshman, senior],
            default_scale: "freshman".to_string(),
            rounding_mode: RoundingMode::Exact2dp,
            representations,
        }
    }
}

impl AssessmentConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let config: AssessmentConfig = toml::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config is representable as TOML")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.taxonomy.validate()?;
        self.weights.validate()?;
        for (i, s) in self.scales.iter().enumerate() {
            s.validate()?;
            if self.scales[..i].iter().any(|o| o.name == s.name) {
                return Err(ConfigError::DuplicateScale(s.name.clone()));
            }
        }
        if self.scale(&self.default_scale).is_none() {
            return Err(ConfigError::MissingDefaultScale(self.default_scale.clone()));
        }
        for (i, rep) in self.representations.iter().enumerate() {
            if self.representations[..i].iter().any(|o| o.name == rep.name) {
                return Err(ConfigError::DuplicateRepresentation(rep.name.clone()));
            }
            let unknown = rep.unknown_categories(&self.taxonomy);
            if !unknown.is_empty() {
                return Err(ConfigError::Representation(rep.name.clone(), unknown.join(", ")));
            }
        }
        Ok(())
    }

    pub fn scale(&self, name: &str) -> Option<&GradeScale> {
        self.scales.iter().find(|s| s.name == name)
    }

    pub fn representation(&self, name: &str) -> Option<&Representation> {
        self.representations.iter().find(|r| r.name == name)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Severity;
    use crate::render::{Color, Filter};

    #[test]
    fn default_is_valid_and_round_trips() {
        let c = AssessmentConfig::default();
        c.validate().unwrap();
        let back = AssessmentConfig::from_toml(&c.to_toml()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn partial_file_uses_defaults() {
        let c = AssessmentConfig::from_toml(
            r#"
rounding_mode = "truncate-error-percentage"

[weights.defaults]
minor = 1
major = 2.5
critical = "7/2"

[[weights.overrides]]
category = "content"
severity = "major"
points = 5
"#,
        )
        .unwrap();
        assert_eq!(c.rounding_mode, RoundingMode::TruncateErrorPercentage);
        assert_eq!(c.weights.defaults.major, Ratio::new(5, 2));
        assert_eq!(c.weights.defaults.critical, Ratio::new(7, 2));
        assert_eq!(c.weights.points_for("content", Severity::Major), r(5));
        assert_eq!(c.taxonomy, Taxonomy::default_dialect());
        assert!(c.scale("senior").is_some());
    }

    #[test]
    fn representation_from_toml() {
        let c = AssessmentConfig::from_toml(
            r#"
[[representations]]
name = "content-view"
include_categories = ["content"]
include_severities = "all"
mode = "ansi"
styles.minor = { background = "green", bold = false }
"#,
        )
        .unwrap();
        let rep = c.representation("content-view").unwrap();
        assert_eq!(rep.include_categories, Filter::Only(["content".to_string()].into_iter().collect()));
        assert_eq!(rep.styles[&Severity::Minor].background, Color::Green);
        assert!(c.representation("plain").is_none(), "explicit list replaces defaults");
    }

    #[test]
    fn rejects_bad_configs() {
        let bad_scale = r#"
default_scale = "x"
[[scales]]
name = "x"
bands = [{ lower = 0, upper = 50, label = "a" }, { lower = 60, upper = 100, label = "b" }]
"#;
        assert!(matches!(AssessmentConfig::from_toml(bad_scale), Err(ConfigError::Scale(_))));
        assert!(matches!(
            AssessmentConfig::from_toml("default_scale = \"nope\""),
            Err(ConfigError::MissingDefaultScale(_))
        ));
        let bad_rep = r#"
[[representations]]
name = "r"
include_categories = ["term"]
"#;
        assert!(matches!(AssessmentConfig::from_toml(bad_rep), Err(ConfigError::Representation(..))));
        assert!(matches!(
            AssessmentConfig::from_toml("[weights.defaults]\nminor = -1\nmajor = 1\ncritical = 1"),
            Err(ConfigError::Weights(_))
        ));
        assert!(matches!(AssessmentConfig::from_toml("rounding_mode = 3"), Err(ConfigError::Parse(_))));
    }
}
