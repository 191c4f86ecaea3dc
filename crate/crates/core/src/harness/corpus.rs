use std::collections::HashSet;
use std::path::Path;

use serde::Deserialize;

use super::HarnessError;

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolutionRecord {
    pub source: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CandidateRecord {
    pub id: String,
    pub source: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResponseRecord {
    pub id: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProblem {
    id: String,
    #[serde(default)]
    description: String,
    solution: SolutionRecord,
    candidates: Option<Vec<CandidateRecord>>,
    responses: Option<Vec<ResponseRecord>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCorpus {
    problems: Vec<serde_json::Value>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProblemRecord {
    pub id: String,
    pub description: String,
    pub solution: String,
    pub candidates: Vec<CandidateRecord>,
    pub responses: Vec<ResponseRecord>,
}

/// What a run needs from every record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CorpusRequirements {
    pub candidates: bool,
    pub responses: bool,
}

/// Ids become directory names, so they are restricted to a safe alphabet.
fn valid_id(id: &str) -> bool {
    !id.is_empty()
        && id != "."
        && id != ".."
        && id.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.'))
}

pub fn parse_corpus(text: &str, req: CorpusRequirements) -> Result<Vec<ProblemRecord>, HarnessError> {
    let raw: RawCorpus =
        serde_json::from_str(text).map_err(|e| HarnessError::schema(None, format!("corpus document: {e}")))?;
    let mut seen = HashSet::new();
    let mut out = Vec::with_capacity(raw.problems.len());
    for (index, value) in raw.problems.into_iter().enumerate() {
        let label = value
            .get("id")
            .and_then(|v| v.as_str())
            .map(str::to_string)
            .unwrap_or_else(|| format!("#{index}"));
        let p: RawProblem =
            serde_json::from_value(value).map_err(|e| HarnessError::schema(Some(&label), e.to_string()))?;
        if !valid_id(&p.id) {
            return Err(HarnessError::schema(
                Some(&p.id),
                "ids may only use ASCII letters, digits, `_`, `-` and `.`",
            ));
        }
        if !seen.insert(p.id.clone()) {
            return Err(HarnessError::schema(Some(&p.id), "duplicate problem id"));
        }
        if req.candidates && p.candidates.as_ref().is_none_or(Vec::is_empty) {
            return Err(HarnessError::schema(Some(&p.id), "selection runs need a non-empty `candidates` list"));
        }
        if req.responses && p.responses.as_ref().is_none_or(Vec::is_empty) {
            return Err(HarnessError::schema(Some(&p.id), "reward runs need a non-empty `responses` list"));
        }
        let candidates = p.candidates.unwrap_or_default();
        let responses = p.responses.unwrap_or_default();
        for ids in [
            candidates.iter().map(|c| c.id.as_str()).collect::<Vec<_>>(),
            responses.iter().map(|r| r.id.as_str()).collect(),
        ] {
            let mut local = HashSet::new();
            if let Some(dup) = ids.into_iter().find(|id| !local.insert(*id)) {
                return Err(HarnessError::schema(Some(&p.id), format!("duplicate entry id `{dup}`")));
            }
        }
        out.push(ProblemRecord {
            id: p.id,
            description: p.description,
            solution: p.solution.source,
            candidates,
            responses,
        });
    }
    Ok(out)
}

pub fn load_corpus(path: &Path, req: CorpusRequirements) -> Result<Vec<ProblemRecord>, HarnessError> {
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    parse_corpus(&text, req)
}
