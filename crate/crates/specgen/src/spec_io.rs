//! Parsing of raw model output into structured postcondition candidates.
//!
//! Model output is messy: the YAML answer block may be wrapped in code
//! fences and preceded by free-form or `<think>`-delimited reasoning.
//! Extraction is lenient; shape validation is strict (a candidate without
//! a condition is a parse failure).

use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CandidateId {
    pub task_id: String,
    /// 1-based sample index.
    pub sample: u32,
}

impl std::fmt::Display for CandidateId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}/{}", self.task_id, self.sample)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpecCandidate {
    pub candidate_id: CandidateId,
    /// Full `import x.y.Z;` statements.
    pub imports: Vec<String>,
    /// Statements run before the wrapped call; may be empty.
    pub pre_ghost: String,
    /// Statements run after the wrapped call; may be empty.
    pub post_ghost: String,
    /// Boolean expression over `ret`, parameters, and ghosts.
    pub condition: String,
    pub reasoning: String,
    pub raw: String,
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum ParseFailure {
    #[error("no YAML answer block found in model output")]
    NoYamlBlock,
    #[error("answer block has no condition")]
    MissingCondition,
    #[error("YAML syntax error in answer block: {0}")]
    YamlSyntax(String),
}

const KEYS: [&str; 4] = ["import", "pre-ghost", "post-ghost", "condition"];

/// Split raw model output into reasoning text and the four-key answer
/// block. Total: every input yields a candidate or a `ParseFailure`.
pub fn parse_model_output(raw: &str, id: CandidateId) -> Result<SpecCandidate, ParseFailure> {
    let (think, rest) = strip_think(raw);
    let (before, block) = locate_block(&rest).ok_or(ParseFailure::NoYamlBlock)?;

    let doc: serde_yaml::Value =
        serde_yaml::from_str(&block).map_err(|e| ParseFailure::YamlSyntax(e.to_string()))?;
    let map = doc.as_mapping().ok_or(ParseFailure::NoYamlBlock)?;

    let get = |key: &str| -> Option<&serde_yaml::Value> { map.get(serde_yaml::Value::from(key)) };
    let scalar = |key: &str| -> String {
        match get(key) {
            Some(serde_yaml::Value::String(s)) => s.trim_end().to_string(),
            Some(serde_yaml::Value::Null) | None => String::new(),
            Some(v) => serde_yaml::to_string(v).unwrap_or_default().trim_end().to_string(),
        }
    };

    let imports = match get("import") {
        Some(serde_yaml::Value::Sequence(items)) => items
            .iter()
            .filter_map(|v| v.as_str())
            .flat_map(|s| s.lines())
            .filter_map(normalize_import)
            .collect(),
        Some(serde_yaml::Value::String(s)) => s.lines().filter_map(normalize_import).collect(),
        _ => Vec::new(),
    };

    let condition = scalar("condition").trim().to_string();
    if condition.is_empty() {
        return Err(ParseFailure::MissingCondition);
    }

    let mut reasoning = String::new();
    if !think.trim().is_empty() {
        reasoning.push_str(think.trim());
    }
    let pre = before.trim();
    if !pre.is_empty() {
        if !reasoning.is_empty() {
            reasoning.push('\n');
        }
        reasoning.push_str(pre);
    }
    // candidate files carry reasoning as an explicit key
    if reasoning.is_empty() {
        if let Some(serde_yaml::Value::String(r)) = get("reasoning") {
            reasoning = r.trim().to_string();
        }
    }

    Ok(SpecCandidate {
        candidate_id: id,
        imports,
        pre_ghost: scalar("pre-ghost"),
        post_ghost: scalar("post-ghost"),
        condition,
        reasoning,
        raw: raw.to_string(),
    })
}

/// Whitespace-delimited token count of the reasoning trace. A monotone
/// proxy used for rank analysis; no model tokenizer involved.
pub fn reasoning_length(c: &SpecCandidate) -> usize {
    c.reasoning.split_whitespace().count()
}

/// Render a candidate back into model-output shape: reasoning text, then
/// the four-key YAML block.
pub fn serialize_candidate(c: &SpecCandidate) -> String {
    let mut out = String::new();
    if !c.reasoning.is_empty() {
        out.push_str(&c.reasoning);
        out.push_str("\n\n");
    }
    out.push_str(&render_block(c));
    out
}

fn render_block(c: &SpecCandidate) -> String {
    let mut out = String::new();
    out.push_str("import: |\n");
    for imp in &c.imports {
        out.push_str("  ");
        out.push_str(imp);
        out.push('\n');
    }
    for (key, val) in [("pre-ghost", &c.pre_ghost), ("post-ghost", &c.post_ghost)] {
        out.push_str(key);
        out.push_str(": |\n");
        for line in val.lines() {
            out.push_str("  ");
            out.push_str(line);
            out.push('\n');
        }
    }
    out.push_str("condition: |\n");
    for line in c.condition.lines() {
        out.push_str("  ");
        out.push_str(line);
        out.push('\n');
    }
    out
}

/// On-disk form: `<task_id>/<sample>.candidate.yaml`.
#[derive(Debug, Serialize, Deserialize)]
struct CandidateFile {
    import: Vec<String>,
    #[serde(rename = "pre-ghost")]
    pre_ghost: String,
    #[serde(rename = "post-ghost")]
    post_ghost: String,
    condition: String,
    reasoning: String,
    raw: String,
}

pub fn save_candidate(c: &SpecCandidate, dir: &Path) -> anyhow::Result<std::path::PathBuf> {
    let task_dir = dir.join(&c.candidate_id.task_id);
    std::fs::create_dir_all(&task_dir)?;
    let path = task_dir.join(format!("{}.candidate.yaml", c.candidate_id.sample));
    let file = CandidateFile {
        import: c.imports.clone(),
        pre_ghost: c.pre_ghost.clone(),
        post_ghost: c.post_ghost.clone(),
        condition: c.condition.clone(),
        reasoning: c.reasoning.clone(),
        raw: c.raw.clone(),
    };
    std::fs::write(&path, serde_yaml::to_string(&file)?)?;
    Ok(path)
}

pub fn load_candidate(path: &Path, id: CandidateId) -> anyhow::Result<SpecCandidate> {
    let file: CandidateFile = serde_yaml::from_str(&std::fs::read_to_string(path)?)?;
    Ok(SpecCandidate {
        candidate_id: id,
        imports: file.import,
        pre_ghost: file.pre_ghost,
        post_ghost: file.post_ghost,
        condition: file.condition,
        reasoning: file.reasoning,
        raw: file.raw,
    })
}

/// Remove `<think>...</think>` regions, returning their concatenated
/// contents and the remaining text. A dangling `</think>` treats the
/// prefix as think content.
fn strip_think(raw: &str) -> (String, String) {
    let mut think = String::new();
    let mut rest = String::new();
    let mut cursor = raw;
    loop {
        if let Some(open) = cursor.find("<think>") {
            rest.push_str(&cursor[..open]);
            let after = &cursor[open + 7..];
            if let Some(close) = after.find("</think>") {
                think.push_str(&after[..close]);
                cursor = &after[close + 8..];
            } else {
                think.push_str(after);
                cursor = "";
            }
        } else if let Some(close) = cursor.find("</think>") {
            think.push_str(&cursor[..close]);
            cursor = &cursor[close + 8..];
        } else {
            rest.push_str(cursor);
            break;
        }
        if cursor.is_empty() {
            break;
        }
    }
    (think, rest)
}

/// Find the YAML answer block. Fenced code blocks containing a
/// `condition:` line win; otherwise the block starts at the first
/// top-level answer key line. Returns (text before the block, block).
fn locate_block(text: &str) -> Option<(String, String)> {
    // fenced blocks, last one containing a condition key wins
    let mut best: Option<(usize, usize, usize)> = None; // (fence_start, body_start, body_end)
    let mut search = 0;
    while let Some(open_rel) = text[search..].find("```") {
        let open = search + open_rel;
        let body_start = match text[open + 3..].find('\n') {
            Some(nl) => open + 3 + nl + 1,
            None => break,
        };
        let Some(close_rel) = text[body_start..].find("```") else { break };
        let body_end = body_start + close_rel;
        let body = &text[body_start..body_end];
        if has_key_line(body, "condition") {
            best = Some((open, body_start, body_end));
        }
        search = body_end + 3;
    }
    if let Some((fence_start, body_start, body_end)) = best {
        return Some((
            text[..fence_start].to_string(),
            text[body_start..body_end].to_string(),
        ));
    }

    // unfenced: block starts at the first answer-key line from which a
    // condition key is still reachable
    let mut offset = 0;
    for line in text.split_inclusive('\n') {
        if KEYS.iter().any(|k| is_key_line(line, k)) && has_key_line(&text[offset..], "condition") {
            return Some((text[..offset].to_string(), text[offset..].to_string()));
        }
        offset += line.len();
    }
    None
}

fn is_key_line(line: &str, key: &str) -> bool {
    let line = line.trim_end();
    line.strip_prefix(key)
        .map(|rest| rest.starts_with(':'))
        .unwrap_or(false)
}

fn has_key_line(text: &str, key: &str) -> bool {
    text.lines().any(|l| is_key_line(l, key))
}

fn normalize_import(line: &str) -> Option<String> {
    let line = line.trim().trim_end_matches(';').trim();
    if line.is_empty() {
        return None;
    }
    let body = line.strip_prefix("import ").unwrap_or(line).trim();
    Some(format!("import {body};"))
}
