//! Hypothesis file: one `image_id<TAB>space separated tokens` line per image.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hypothesis {
    pub image_id: String,
    pub tokens: Vec<String>,
}

pub fn write_hypotheses(path: impl AsRef<Path>, hyps: &[Hypothesis]) -> Result<()> {
    let path = path.as_ref();
    let mut text = String::new();
    for h in hyps {
        if h.image_id.contains(['\t', '\n']) {
            return Err(Error::usage(format!(
                "image id {:?} contains a tab or newline",
                h.image_id
            )));
        }
        text.push_str(&h.image_id);
        text.push('\t');
        text.push_str(&h.tokens.join(" "));
        text.push('\n');
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_hypotheses(path: impl AsRef<Path>) -> Result<Vec<Hypothesis>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut offset = 0u64;
    let mut out = Vec::new();
    for line in text.split_terminator('\n') {
        let Some((id, caption)) = line.split_once('\t') else {
            return Err(Error::format(path, Some(offset), "expected image_id<TAB>caption"));
        };
        out.push(Hypothesis {
            image_id: id.to_owned(),
            tokens: caption.split_whitespace().map(str::to_owned).collect(),
        });
        offset += line.len() as u64 + 1;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_including_empty_caption() {
        let hyps = vec![
            Hypothesis {
                image_id: "1.jpg".into(),
                tokens: vec!["a".into(), "dog".into()],
            },
            Hypothesis {
                image_id: "2.jpg".into(),
                tokens: vec![],
            },
        ];
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("h.tsv");
        write_hypotheses(&path, &hyps).unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap(), "1.jpg\ta dog\n2.jpg\t\n");
        assert_eq!(read_hypotheses(&path).unwrap(), hyps);
    }

    #[test]
    fn missing_tab_reports_offset() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("h.tsv");
        fs::write(&path, "1.jpg\ta\nbroken line\n").unwrap();
        match read_hypotheses(&path) {
            Err(Error::Format { offset, .. }) => assert_eq!(offset, Some(8)),
            other => panic!("{other:?}"),
        }
    }
}
