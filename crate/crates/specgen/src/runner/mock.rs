//! Hermetic adapter for tests and demos. A mock project is a directory
//! with `fixed/` and `buggy/` source trees plus a `mock_tests.json`
//! scenario file. Instead of invoking a JVM, the "test run" evaluates
//! any injected postcondition guard against the scenario values.

use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::adapter::{
    copy_tree, ensure_empty, Adapter, ExecResult, TestFailure, TestOutcome, Version, WorkingCopy,
};
use super::expr;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MockTest {
    pub id: String,
    /// Value the instrumented method returns on the fixed version.
    pub fixed_ret: i64,
    /// Value it returns on the buggy version.
    pub buggy_ret: i64,
    /// What the (version-independent) test asserts the result to be.
    pub expected: i64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MockScenario {
    pub tests: Vec<MockTest>,
}

/// Adapter rooted at a mock project directory.
#[derive(Debug, Clone)]
pub struct MockAdapter {
    pub root: PathBuf,
}

impl MockAdapter {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        MockAdapter { root: root.into() }
    }

    fn scenario(&self) -> anyhow::Result<MockScenario> {
        let path = self.root.join("mock_tests.json");
        let text = std::fs::read_to_string(&path)
            .map_err(|e| anyhow::anyhow!("reading {}: {e}", path.display()))?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// A guard found in an instrumented source file.
#[derive(Debug, Clone, PartialEq)]
pub struct Guard {
    pub condition: String,
    pub marker: String,
}

/// Scan a working copy for injected `if (!(<cond>)) { throw new
/// IllegalStateException("<marker>"` guards.
pub fn find_guards(root: &Path) -> anyhow::Result<Vec<Guard>> {
    let mut guards = Vec::new();
    for entry in walkdir::WalkDir::new(root).sort_by_file_name() {
        let entry = entry?;
        if entry.file_type().is_file()
            && entry.path().extension().is_some_and(|e| e == "java")
        {
            let text = std::fs::read_to_string(entry.path())?;
            guards.extend(guards_in_source(&text));
        }
    }
    Ok(guards)
}

fn guards_in_source(source: &str) -> Vec<Guard> {
    let mut out = Vec::new();
    let mut rest = source;
    while let Some(start) = rest.find("if (!(") {
        rest = &rest[start + "if (!(".len()..];
        // condition runs to the matching `))` of the negation wrapper
        let mut depth = 1usize;
        let mut end = None;
        for (i, ch) in rest.char_indices() {
            match ch {
                '(' => depth += 1,
                ')' => {
                    depth -= 1;
                    if depth == 0 {
                        end = Some(i);
                        break;
                    }
                }
                _ => {}
            }
        }
        let Some(end) = end else { break };
        let condition = rest[..end].trim().to_string();
        let after = &rest[end..];
        let Some(thr) = after.find("new IllegalStateException(\"") else { continue };
        let msg = &after[thr + "new IllegalStateException(\"".len()..];
        let Some(q) = msg.find('"') else { continue };
        out.push(Guard { condition, marker: msg[..q].to_string() });
        rest = after;
    }
    out
}

impl Adapter for MockAdapter {
    fn checkout(
        &self,
        project: &str,
        bug_id: &str,
        version: Version,
        workdir: &Path,
    ) -> anyhow::Result<WorkingCopy> {
        ensure_empty(workdir)?;
        let src = self.root.join(version.name());
        anyhow::ensure!(src.is_dir(), "mock project has no {} tree", version.name());
        copy_tree(&src, workdir)?;
        Ok(WorkingCopy {
            root: workdir.to_path_buf(),
            version,
            project: project.to_string(),
            bug_id: bug_id.to_string(),
        })
    }

    /// "Compilation" checks that every injected guard condition parses
    /// and evaluates to a boolean.
    fn compile(&self, copy: &WorkingCopy, _timeout: Duration) -> anyhow::Result<ExecResult> {
        let guards = find_guards(&copy.root)?;
        for guard in &guards {
            if let Err(e) = expr::eval_condition(&guard.condition, 0) {
                return Ok(ExecResult {
                    ok: false,
                    timed_out: false,
                    output: format!("error: condition `{}` does not compile: {e}", guard.condition),
                });
            }
        }
        Ok(ExecResult { ok: true, timed_out: false, output: "BUILD SUCCESSFUL".into() })
    }

    fn test(
        &self,
        copy: &WorkingCopy,
        _relevant_class: Option<&str>,
        _timeout: Duration,
    ) -> anyhow::Result<TestOutcome> {
        let scenario = self.scenario()?;
        let guards = find_guards(&copy.root)?;
        let mut outcome = TestOutcome { ran: scenario.tests.len(), ..Default::default() };
        for test in &scenario.tests {
            let ret = match copy.version {
                Version::Fixed => test.fixed_ret,
                Version::Buggy => test.buggy_ret,
            };
            // guard fires before the test's own assertion, as in the
            // instrumented wrapper
            let mut failed = false;
            for guard in &guards {
                let holds = expr::eval_condition(&guard.condition, ret)
                    .map_err(|e| anyhow::anyhow!("guard failed to evaluate at runtime: {e}"))?;
                if !holds {
                    outcome.failures.push(TestFailure {
                        id: test.id.clone(),
                        message: format!("java.lang.IllegalStateException: {}", guard.marker),
                    });
                    failed = true;
                    break;
                }
            }
            if failed {
                continue;
            }
            if ret != test.expected {
                outcome.failures.push(TestFailure {
                    id: test.id.clone(),
                    message: format!("expected {} but was {}", test.expected, ret),
                });
            }
        }
        outcome.raw_log = outcome
            .failures
            .iter()
            .map(|f| format!("FAIL {}: {}", f.id, f.message))
            .collect::<Vec<_>>()
            .join("\n");
        Ok(outcome)
    }
}
