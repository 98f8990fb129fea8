use serde::{Deserialize, Serialize};

use crate::data::DatasetSplit;
use crate::decoding::Hypothesis;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalEntry {
    pub image_id: String,
    pub hypothesis: Vec<String>,
    pub references: Vec<Vec<String>>,
}

/// One hypothesis and its references per image, all tokens lowercase.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalCorpus {
    entries: Vec<EvalEntry>,
}

fn lower(tokens: &[String]) -> Vec<String> {
    tokens.iter().map(|t| t.to_lowercase()).collect()
}

impl EvalCorpus {
    pub fn new(entries: Vec<EvalEntry>) -> Result<Self> {
        let entries = entries
            .into_iter()
            .map(|e| {
                if e.references.is_empty() {
                    return Err(Error::Integrity(format!("image {} has no references", e.image_id)));
                }
                Ok(EvalEntry {
                    hypothesis: lower(&e.hypothesis),
                    references: e.references.iter().map(|r| lower(r)).collect(),
                    image_id: e.image_id,
                })
            })
            .collect::<Result<_>>()?;
        Ok(EvalCorpus { entries })
    }

    /// Pairs each hypothesis with the captions of its image in `dataset`.
    pub fn from_hypotheses(hyps: &[Hypothesis], dataset: &DatasetSplit) -> Result<Self> {
        let entries = hyps
            .iter()
            .map(|h| {
                let image = dataset
                    .find(&h.image_id)
                    .ok_or_else(|| Error::Integrity(format!("hypothesis for unknown image {}", h.image_id)))?;
                Ok(EvalEntry {
                    image_id: h.image_id.clone(),
                    hypothesis: h.tokens.clone(),
                    references: image.captions.iter().map(|c| c.tokens.clone()).collect(),
                })
            })
            .collect::<Result<_>>()?;
        Self::new(entries)
    }

    pub fn entries(&self) -> &[EvalEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}
