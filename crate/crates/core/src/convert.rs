//! Conversion of dataset annotation files to the plain onset-list format.
//!
//! The field mapping is supplied as JSON, e.g.
//! `{"format": "xml_tag", "tag": "onsetSec"}` or
//! `{"format": "delimited", "delimiter": ",", "column": 0, "skip_lines": 1}`.

use std::path::Path;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::OnsetList;

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "format", rename_all = "snake_case", deny_unknown_fields)]
pub enum AnnotationMapping {
    /// Text content of every `<tag>...</tag>` element.
    XmlTag {
        tag: String,
        /// Multiplier taking the stored unit to seconds.
        #[serde(default = "one")]
        scale: f64,
    },
    /// One column of a delimited text file. Whitespace-delimited when
    /// `delimiter` is absent.
    Delimited {
        #[serde(default)]
        delimiter: Option<char>,
        column: usize,
        #[serde(default)]
        skip_lines: usize,
        #[serde(default = "one")]
        scale: f64,
        /// Keep only rows whose `filter_column` matches this regex.
        #[serde(default)]
        filter_pattern: Option<String>,
        #[serde(default)]
        filter_column: Option<usize>,
    },
}

impl AnnotationMapping {
    pub fn from_json(text: &str) -> Result<Self> {
        let m: Self = serde_json::from_str(text)?;
        m.validate()?;
        Ok(m)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| e.in_file(path))
    }

    fn validate(&self) -> Result<()> {
        let scale = match self {
            Self::XmlTag { tag, scale } => {
                if tag.is_empty() || !tag.chars().all(|c| c.is_alphanumeric() || "_-:.".contains(c)) {
                    return Err(Error::InvalidConfig(format!("invalid XML tag name `{tag}`")));
                }
                *scale
            }
            Self::Delimited { scale, .. } => *scale,
        };
        if scale.is_finite() && scale > 0.0 {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("scale must be > 0, got {scale}")))
        }
    }
}

fn parse_value(raw: &str, line: usize, scale: f64) -> Result<f64> {
    raw.trim()
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .map(|v| v * scale)
        .ok_or_else(|| Error::NonNumericLine {
            line,
            content: raw.to_string(),
        })
}

/// Extract onset times from annotation text.
pub fn convert_annotation_text(text: &str, mapping: &AnnotationMapping) -> Result<OnsetList> {
    mapping.validate()?;
    let mut times = Vec::new();
    match mapping {
        AnnotationMapping::XmlTag { tag, scale } => {
            let tag = regex::escape(tag);
            let re = Regex::new(&format!(r"<{tag}(?:\s[^>]*)?>([^<]*)</{tag}\s*>"))
                .map_err(|e| Error::InvalidConfig(e.to_string()))?;
            for cap in re.captures_iter(text) {
                let m = cap.get(1).expect("group 1 always participates");
                let line = text[..m.start()].matches('\n').count() + 1;
                times.push(parse_value(m.as_str(), line, *scale)?);
            }
        }
        AnnotationMapping::Delimited {
            delimiter,
            column,
            skip_lines,
            scale,
            filter_pattern,
            filter_column,
        } => {
            let filter = filter_pattern
                .as_deref()
                .map(Regex::new)
                .transpose()
                .map_err(|e| Error::InvalidConfig(e.to_string()))?;
            for (idx, line) in text.lines().enumerate().skip(*skip_lines) {
                let line = line.trim_end_matches('\r');
                if line.trim().is_empty() || line.trim_start().starts_with('#') {
                    continue;
                }
                let fields: Vec<&str> = match delimiter {
                    Some(d) => line.split(*d).collect(),
                    None => line.split_whitespace().collect(),
                };
                if let Some(re) = &filter {
                    let col = filter_column.unwrap_or(*column);
                    if !fields.get(col).is_some_and(|f| re.is_match(f.trim())) {
                        continue;
                    }
                }
                let raw = fields.get(*column).ok_or_else(|| Error::NonNumericLine {
                    line: idx + 1,
                    content: line.to_string(),
                })?;
                times.push(parse_value(raw, idx + 1, *scale)?);
            }
        }
    }
    Ok(OnsetList::from_unsorted(times))
}

pub fn convert_annotation_file(
    input: impl AsRef<Path>,
    mapping: &AnnotationMapping,
) -> Result<OnsetList> {
    let input = input.as_ref();
    let text = std::fs::read_to_string(input).map_err(|e| Error::io(input, e))?;
    convert_annotation_text(&text, mapping).map_err(|e| e.in_file(input))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn xml_tags() {
        let xml = "<transcription>\n<event><onsetSec>1.25</onsetSec><pitch>40</pitch></event>\n\
                   <event><onsetSec> 0.5 </onsetSec></event></transcription>";
        let m = AnnotationMapping::from_json(r#"{"format":"xml_tag","tag":"onsetSec"}"#).unwrap();
        assert_eq!(convert_annotation_text(xml, &m).unwrap().times(), &[0.5, 1.25]);

        let bad = "<onsetSec>\nx</onsetSec>";
        assert!(matches!(
            convert_annotation_text(bad, &m),
            Err(Error::NonNumericLine { line: 1, .. })
        ));
    }

    #[test]
    fn delimited_columns() {
        let csv = "start,end,note\n0.10,0.30,60\n0.50,0.90,62\n0.10,0.20,64\n";
        let m = AnnotationMapping::from_json(
            r#"{"format":"delimited","delimiter":",","column":0,"skip_lines":1}"#,
        )
        .unwrap();
        assert_eq!(convert_annotation_text(csv, &m).unwrap().times(), &[0.1, 0.5]);

        let samples = "22050 a\n44100 b\n";
        let m = AnnotationMapping::from_json(
            r#"{"format":"delimited","column":0,"scale":2.2675736961451248e-5,"filter_pattern":"^b$","filter_column":1}"#,
        )
        .unwrap();
        let t = convert_annotation_text(samples, &m).unwrap();
        assert_eq!(t.len(), 1);
        assert!((t.times()[0] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn mapping_errors() {
        assert!(AnnotationMapping::from_json(r#"{"format":"yaml"}"#).is_err());
        assert!(AnnotationMapping::from_json(r#"{"format":"xml_tag","tag":"a>b"}"#).is_err());
        assert!(AnnotationMapping::from_json(r#"{"format":"xml_tag","tag":"t","scale":0}"#).is_err());
    }
}
