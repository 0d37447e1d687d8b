//! JSON-lines manifest records consumed by the CLI pipeline stages.

use std::io::BufRead;

use serde::Deserialize;

use super::PipelineError;

/// One utterance in a `build` manifest. `plan` carries the vocal-plan JSON
/// inline and is required for the SFT stage.
#[derive(Debug, Clone, Deserialize)]
pub struct BuildRecord {
    #[serde(default)]
    pub id: Option<String>,
    pub transcript: String,
    pub speech_tokens: Vec<u32>,
    #[serde(default)]
    pub plan: Option<serde_json::Value>,
}

/// One synthesis candidate in a `pref` manifest. Rows carrying a plan are
/// chosen-pool candidates (generated under that plan); rows without one
/// are rejected-pool candidates.
#[derive(Debug, Clone, Deserialize)]
pub struct PrefRecord {
    pub text: String,
    pub hypothesis: String,
    pub duration: f64,
    pub speech_tokens: Vec<u32>,
    #[serde(default)]
    pub plan: Option<serde_json::Value>,
}

/// Reads one JSON record per line, skipping blank lines; errors carry the
/// 1-based line number.
pub fn read_jsonl<T: serde::de::DeserializeOwned>(
    reader: impl BufRead,
) -> Result<Vec<T>, PipelineError> {
    let mut records = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(&line).map_err(|source| PipelineError::JsonLine {
            line: i + 1,
            source,
        })?;
        records.push(record);
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn build_records_parse() {
        let text = concat!(
            "{\"transcript\":\"hello\",\"speech_tokens\":[1,2]}\n",
            "\n",
            "{\"id\":\"u2\",\"transcript\":\"hi\",\"speech_tokens\":[3],\"plan\":[{\"word\":\"hi\"}]}\n",
        );
        let records: Vec<BuildRecord> = read_jsonl(text.as_bytes()).unwrap();
        assert_eq!(records.len(), 2);
        assert!(records[0].plan.is_none());
        assert_eq!(records[1].id.as_deref(), Some("u2"));
    }

    #[test]
    fn bad_line_reports_number() {
        let text = "{\"transcript\":\"ok\",\"speech_tokens\":[1]}\nnot json\n";
        match read_jsonl::<BuildRecord>(text.as_bytes()) {
            Err(PipelineError::JsonLine { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected: {other:?}"),
        }
    }
}
