use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::DataError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnRole {
    Numeric,
    Categorical,
    Label,
    Sensitive,
}

impl ColumnRole {
    pub fn is_feature(self) -> bool {
        matches!(self, ColumnRole::Numeric | ColumnRole::Categorical)
    }
}

/// Column roles plus the values that define the positive class and the
/// privileged group.
///
/// On disk this is a TOML document:
///
/// ```toml
/// positive_label_value = "good"
/// privileged_value = "male"
///
/// [columns]
/// age = "numeric"
/// purpose = "categorical"
/// sex = "sensitive"
/// credit = "label"
/// ```
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetSchema {
    pub columns: BTreeMap<String, ColumnRole>,
    pub positive_label_value: String,
    pub privileged_value: String,
}

impl DatasetSchema {
    pub fn from_toml_str(text: &str) -> Result<Self, DataError> {
        let schema: DatasetSchema =
            toml::from_str(text).map_err(|e| DataError::InvalidSchema(e.to_string()))?;
        schema.validate()?;
        Ok(schema)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self, DataError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| DataError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        Self::from_toml_str(&text)
    }

    /// Exactly one label column and exactly one sensitive column.
    pub fn validate(&self) -> Result<(), DataError> {
        let count = |role| self.columns.values().filter(|r| **r == role).count();
        let labels = count(ColumnRole::Label);
        let sensitive = count(ColumnRole::Sensitive);
        if labels != 1 {
            return Err(DataError::InvalidSchema(format!(
                "expected exactly one label column, found {labels}"
            )));
        }
        if sensitive != 1 {
            return Err(DataError::InvalidSchema(format!(
                "expected exactly one sensitive column, found {sensitive}"
            )));
        }
        Ok(())
    }

    pub fn label_column(&self) -> &str {
        self.column_with(ColumnRole::Label)
    }

    pub fn sensitive_column(&self) -> &str {
        self.column_with(ColumnRole::Sensitive)
    }

    fn column_with(&self, role: ColumnRole) -> &str {
        self.columns
            .iter()
            .find(|(_, r)| **r == role)
            .map(|(name, _)| name.as_str())
            .expect("validated schema")
    }
}
