use serde::{Deserialize, Serialize};

use super::ErgFit;

/// Schema tag written into every fit report.
pub const FIT_SCHEMA: &str = "pcnlab.ergm-fit/1";

/// A set of fit reports as written by `ergm fit` and the pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitSet {
    pub schema: String,
    pub fits: Vec<ErgFit>,
}

impl FitSet {
    pub fn new(fits: Vec<ErgFit>) -> Self {
        FitSet {
            schema: FIT_SCHEMA.to_string(),
            fits,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("fit reports always serialize")
    }

    pub fn from_json(text: &str) -> Result<Self, String> {
        let set: FitSet = serde_json::from_str(text).map_err(|e| e.to_string())?;
        if set.schema != FIT_SCHEMA {
            return Err(format!("unsupported fit schema `{}` (expected `{FIT_SCHEMA}`)", set.schema));
        }
        Ok(set)
    }
}
