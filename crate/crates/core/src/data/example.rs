use std::collections::HashSet;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One record of an unlearning corpus.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnlearningExample {
    pub id: String,
    pub input: String,
    pub output: String,
    pub task: String,
}

impl UnlearningExample {
    pub fn new(
        id: impl Into<String>,
        input: impl Into<String>,
        output: impl Into<String>,
        task: impl Into<String>,
    ) -> Self {
        UnlearningExample {
            id: id.into(),
            input: input.into(),
            output: output.into(),
            task: task.into(),
        }
    }

    pub fn kind(&self) -> TaskKind {
        TaskKind::of(&self.task)
    }
}

/// How a task is scored: free-form completions by ROUGE-L, question
/// answering by exact match.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TaskKind {
    Completion,
    QuestionAnswer,
}

impl TaskKind {
    /// Tags ending in `qa` are question answering; everything else is a
    /// completion.
    pub fn of(task: &str) -> TaskKind {
        if task.ends_with("qa") {
            TaskKind::QuestionAnswer
        } else {
            TaskKind::Completion
        }
    }
}

/// Disjoint retain and forget splits.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct SplitDataset {
    pub retain: Vec<UnlearningExample>,
    pub forget: Vec<UnlearningExample>,
}

impl SplitDataset {
    pub fn new(retain: Vec<UnlearningExample>, forget: Vec<UnlearningExample>) -> Result<Self> {
        let d = SplitDataset { retain, forget };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        let retain_ids = unique_ids(&self.retain, "within retain split")?;
        unique_ids(&self.forget, "within forget split")?;
        if let Some(e) = self.forget.iter().find(|e| retain_ids.contains(e.id.as_str())) {
            return Err(Error::DuplicateId {
                id: e.id.clone(),
                context: "present in both retain and forget",
            });
        }
        Ok(())
    }

    pub fn is_empty(&self) -> bool {
        self.retain.is_empty() && self.forget.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &UnlearningExample> {
        self.retain.iter().chain(&self.forget)
    }
}

fn unique_ids<'a>(examples: &'a [UnlearningExample], context: &'static str) -> Result<HashSet<&'a str>> {
    let mut seen = HashSet::with_capacity(examples.len());
    for e in examples {
        if !seen.insert(e.id.as_str()) {
            return Err(Error::DuplicateId {
                id: e.id.clone(),
                context,
            });
        }
    }
    Ok(seen)
}

#[derive(Deserialize)]
struct RawExample {
    id: Option<String>,
    input: Option<String>,
    output: Option<String>,
    task: Option<String>,
}

/// Parse a JSON-lines file of examples. Blank lines are skipped; line
/// numbers in errors are 1-based.
pub fn read_jsonl(path: &Path) -> Result<Vec<UnlearningExample>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let at = |reason: String| Error::DatasetLine {
            path: path.to_path_buf(),
            line: i + 1,
            reason,
        };
        let raw: RawExample = serde_json::from_str(line).map_err(|e| at(e.to_string()))?;
        let field = |v: Option<String>, name: &str| v.ok_or_else(|| at(format!("missing field `{name}`")));
        out.push(UnlearningExample {
            id: field(raw.id, "id")?,
            input: field(raw.input, "input")?,
            output: field(raw.output, "output")?,
            task: field(raw.task, "task")?,
        });
    }
    Ok(out)
}

pub fn write_jsonl(path: &Path, examples: &[UnlearningExample]) -> Result<()> {
    let mut buf = Vec::new();
    for e in examples {
        serde_json::to_writer(&mut buf, e)?;
        buf.push(b'\n');
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&buf).map_err(|e| Error::io(path, e))
}

/// Load retain and forget splits, enforcing id uniqueness and
/// disjointness. File order is preserved.
pub fn load_dataset(retain_path: &Path, forget_path: &Path) -> Result<SplitDataset> {
    let retain = read_jsonl(retain_path)?;
    let forget = read_jsonl(forget_path)?;
    SplitDataset::new(retain, forget)
}

pub fn save_dataset(dataset: &SplitDataset, retain_path: &Path, forget_path: &Path) -> Result<()> {
    write_jsonl(retain_path, &dataset.retain)?;
    write_jsonl(forget_path, &dataset.forget)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ex(id: &str) -> UnlearningExample {
        UnlearningExample::new(id, "a b", "c", "task1_completion")
    }

    #[test]
    fn loads_counts_and_preserves_order() {
        let dir = tempfile::tempdir().unwrap();
        let (r, f) = (dir.path().join("retain.jsonl"), dir.path().join("forget.jsonl"));
        let retain: Vec<_> = (0..32).map(|i| ex(&format!("r{i}"))).collect();
        let forget: Vec<_> = (0..32).map(|i| ex(&format!("f{i}"))).collect();
        write_jsonl(&r, &retain).unwrap();
        write_jsonl(&f, &forget).unwrap();
        let d = load_dataset(&r, &f).unwrap();
        assert_eq!(d.retain.len(), 32);
        assert_eq!(d.forget.len(), 32);
        assert_eq!(d.retain, retain);
    }

    #[test]
    fn shared_id_is_rejected_by_name() {
        let dir = tempfile::tempdir().unwrap();
        let (r, f) = (dir.path().join("retain.jsonl"), dir.path().join("forget.jsonl"));
        write_jsonl(&r, &[ex("a"), ex("shared")]).unwrap();
        write_jsonl(&f, &[ex("shared")]).unwrap();
        match load_dataset(&r, &f) {
            Err(Error::DuplicateId { id, .. }) => assert_eq!(id, "shared"),
            other => panic!("expected duplicate id, got {other:?}"),
        }
    }

    #[test]
    fn empty_forget_file_is_valid() {
        let dir = tempfile::tempdir().unwrap();
        let (r, f) = (dir.path().join("retain.jsonl"), dir.path().join("forget.jsonl"));
        write_jsonl(&r, &[ex("a")]).unwrap();
        std::fs::write(&f, "").unwrap();
        let d = load_dataset(&r, &f).unwrap();
        assert!(d.forget.is_empty());
    }

    #[test]
    fn missing_field_reports_line() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.jsonl");
        std::fs::write(
            &p,
            "{\"id\":\"a\",\"input\":\"x\",\"output\":\"y\",\"task\":\"t\"}\n{\"id\":\"b\",\"input\":\"x\",\"task\":\"t\"}\n",
        )
        .unwrap();
        match read_jsonl(&p) {
            Err(Error::DatasetLine { line, reason, .. }) => {
                assert_eq!(line, 2);
                assert!(reason.contains("output"));
            }
            other => panic!("expected line error, got {other:?}"),
        }
    }

    #[test]
    fn task_kind_from_tag() {
        assert_eq!(TaskKind::of("task2_pii_qa"), TaskKind::QuestionAnswer);
        assert_eq!(TaskKind::of("task1_completion"), TaskKind::Completion);
    }
}
