use serde::{Deserialize, Serialize};

use super::cv::PerformanceRecord;
use super::model::FittedModel;
use super::MappingError;
use crate::data::ValidatedDataset;
use crate::json::to_canonical_string;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CatalogueEntry {
    pub model: FittedModel,
    pub performance: PerformanceRecord,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CatalogueMeta {
    pub dataset_fingerprint: String,
    pub instrument: String,
    pub created_utc: String,
    pub identifier: Option<String>,
}

impl CatalogueMeta {
    /// Metadata for models trained on `ds`, stamped with the current time.
    pub fn new(ds: &ValidatedDataset, instrument: &str) -> Self {
        Self {
            dataset_fingerprint: ds.validation_stamp().to_string(),
            instrument: instrument.into(),
            created_utc: chrono::Utc::now().format("%Y-%m-%dT%H:%M:%SZ").to_string(),
            identifier: None,
        }
    }

    pub fn created_at(mut self, utc: &str) -> Self {
        self.created_utc = utc.into();
        self
    }
}

/// Shareable bundle of fitted models and their performance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelCatalogue {
    pub toolkit_version: String,
    pub dataset_fingerprint: String,
    pub instrument: String,
    pub created_utc: String,
    pub identifier: Option<String>,
    pub models: Vec<CatalogueEntry>,
}

fn check_record_free(models: &[CatalogueEntry]) -> Result<(), MappingError> {
    if let Some(i) = models.iter().position(|e| e.model.diagnostics.is_some()) {
        return Err(MappingError::RecordFree(format!("model {} carries row-level diagnostics; strip it first", i + 1)));
    }
    Ok(())
}

pub fn build_catalogue(models: Vec<CatalogueEntry>, meta: CatalogueMeta) -> Result<ModelCatalogue, MappingError> {
    if models.is_empty() {
        return Err(MappingError::Catalogue("at least one model is required".into()));
    }
    check_record_free(&models)?;
    for (i, e) in models.iter().enumerate() {
        if e.model.family.kind != e.performance.family {
            return Err(MappingError::Catalogue(format!(
                "model {}: family {} does not match its performance record ({})",
                i + 1,
                e.model.family.kind,
                e.performance.family
            )));
        }
    }
    Ok(ModelCatalogue {
        toolkit_version: crate::TOOLKIT_VERSION.into(),
        dataset_fingerprint: meta.dataset_fingerprint,
        instrument: meta.instrument,
        created_utc: meta.created_utc,
        identifier: meta.identifier,
        models,
    })
}

impl ModelCatalogue {
    pub fn to_json(&self) -> String {
        to_canonical_string(self).expect("catalogue serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, crate::Error> {
        let cat: ModelCatalogue = serde_json::from_str(text)?;
        check_record_free(&cat.models)?;
        Ok(cat)
    }
}
