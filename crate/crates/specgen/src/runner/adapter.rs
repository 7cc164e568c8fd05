//! Project adapters: how working copies are materialized, compiled, and
//! tested. The command adapter shells out with a template per step; the
//! mock adapter lives in `mock.rs`.

use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Version {
    Fixed,
    Buggy,
}

impl Version {
    pub fn name(self) -> &'static str {
        match self {
            Version::Fixed => "fixed",
            Version::Buggy => "buggy",
        }
    }

    /// Defects4J checkout suffix.
    pub fn suffix(self) -> &'static str {
        match self {
            Version::Fixed => "f",
            Version::Buggy => "b",
        }
    }
}

#[derive(Debug, Clone)]
pub struct WorkingCopy {
    pub root: PathBuf,
    pub version: Version,
    pub project: String,
    pub bug_id: String,
}

#[derive(Debug, Clone)]
pub struct ExecResult {
    pub ok: bool,
    pub timed_out: bool,
    pub output: String,
}

#[derive(Debug, Clone, Default)]
pub struct TestFailure {
    pub id: String,
    pub message: String,
}

#[derive(Debug, Clone, Default)]
pub struct TestOutcome {
    pub ran: usize,
    pub failures: Vec<TestFailure>,
    pub timed_out: bool,
    pub raw_log: String,
}

impl TestOutcome {
    pub fn passed(&self) -> bool {
        !self.timed_out && self.failures.is_empty()
    }

    /// True when some failure message or the raw log carries `marker`.
    pub fn mentions(&self, marker: &str) -> bool {
        self.failures.iter().any(|f| f.message.contains(marker) || f.id.contains(marker))
            || self.raw_log.contains(marker)
    }
}

pub trait Adapter: Send + Sync {
    fn checkout(
        &self,
        project: &str,
        bug_id: &str,
        version: Version,
        workdir: &Path,
    ) -> anyhow::Result<WorkingCopy>;

    fn compile(&self, copy: &WorkingCopy, timeout: Duration) -> anyhow::Result<ExecResult>;

    fn test(
        &self,
        copy: &WorkingCopy,
        relevant_class: Option<&str>,
        timeout: Duration,
    ) -> anyhow::Result<TestOutcome>;
}

/// Shell-template adapter. Placeholders: `{project}`, `{bug_id}`,
/// `{version}` (fixed/buggy), `{vsuffix}` (f/b), `{workdir}`, and
/// `{class}` in the relevant-tests template.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CommandAdapter {
    pub checkout_cmd: String,
    pub compile_cmd: String,
    pub test_cmd: String,
    /// Used instead of `test_cmd` when the caller restricts the run to
    /// tests relevant to one class.
    pub relevant_test_cmd: Option<String>,
}

impl CommandAdapter {
    /// Preset for a local Defects4J installation.
    pub fn defects4j() -> Self {
        CommandAdapter {
            checkout_cmd: "defects4j checkout -p {project} -v {bug_id}{vsuffix} -w {workdir}".into(),
            compile_cmd: "cd {workdir} && defects4j compile".into(),
            test_cmd: "cd {workdir} && defects4j test".into(),
            relevant_test_cmd: Some("cd {workdir} && defects4j test -r".into()),
        }
    }

    fn fill(
        &self,
        template: &str,
        project: &str,
        bug_id: &str,
        version: Version,
        workdir: &Path,
        class: Option<&str>,
    ) -> String {
        template
            .replace("{project}", project)
            .replace("{bug_id}", bug_id)
            .replace("{version}", version.name())
            .replace("{vsuffix}", version.suffix())
            .replace("{workdir}", &workdir.to_string_lossy())
            .replace("{class}", class.unwrap_or(""))
    }
}

impl Adapter for CommandAdapter {
    fn checkout(
        &self,
        project: &str,
        bug_id: &str,
        version: Version,
        workdir: &Path,
    ) -> anyhow::Result<WorkingCopy> {
        ensure_empty(workdir)?;
        let cmd = self.fill(&self.checkout_cmd, project, bug_id, version, workdir, None);
        let result = run_with_timeout(&cmd, None, Duration::from_secs(600))?;
        anyhow::ensure!(
            result.ok,
            "checkout command failed for {project}-{bug_id} {}: {}",
            version.name(),
            result.output
        );
        Ok(WorkingCopy {
            root: workdir.to_path_buf(),
            version,
            project: project.to_string(),
            bug_id: bug_id.to_string(),
        })
    }

    fn compile(&self, copy: &WorkingCopy, timeout: Duration) -> anyhow::Result<ExecResult> {
        let cmd = self.fill(
            &self.compile_cmd,
            &copy.project,
            &copy.bug_id,
            copy.version,
            &copy.root,
            None,
        );
        run_with_timeout(&cmd, Some(&copy.root), timeout)
    }

    fn test(
        &self,
        copy: &WorkingCopy,
        relevant_class: Option<&str>,
        timeout: Duration,
    ) -> anyhow::Result<TestOutcome> {
        let template = match (relevant_class, &self.relevant_test_cmd) {
            (Some(_), Some(t)) => t.clone(),
            _ => self.test_cmd.clone(),
        };
        let cmd = self.fill(
            &template,
            &copy.project,
            &copy.bug_id,
            copy.version,
            &copy.root,
            relevant_class,
        );
        let result = run_with_timeout(&cmd, Some(&copy.root), timeout)?;
        let mut outcome = parse_test_output(&result.output);
        outcome.timed_out = result.timed_out;
        if !result.ok && outcome.failures.is_empty() && !result.timed_out {
            // nonzero exit without a parseable failure list still fails
            outcome.failures.push(TestFailure {
                id: "test-command".into(),
                message: format!("test command exited nonzero: {cmd}"),
            });
        }
        outcome.ran = outcome.ran.max(outcome.failures.len());
        outcome.raw_log = result.output;
        Ok(outcome)
    }
}

pub fn ensure_empty(workdir: &Path) -> anyhow::Result<()> {
    if workdir.exists() {
        let occupied = std::fs::read_dir(workdir)?.next().is_some();
        anyhow::ensure!(!occupied, "workdir {} is occupied", workdir.display());
    } else {
        std::fs::create_dir_all(workdir)?;
    }
    Ok(())
}

/// Parse failures out of build-tool output. Understands the Defects4J
/// `Failing tests: N` list and plain `FAIL <id>: <message>` lines.
fn parse_test_output(output: &str) -> TestOutcome {
    let mut outcome = TestOutcome::default();
    let mut in_failing_list = false;
    for line in output.lines() {
        let trimmed = line.trim();
        if let Some(rest) = trimmed.strip_prefix("Failing tests:") {
            in_failing_list = true;
            if let Ok(n) = rest.trim().parse::<usize>() {
                outcome.ran = outcome.ran.max(n);
            }
            continue;
        }
        if in_failing_list {
            if let Some(id) = trimmed.strip_prefix("- ") {
                outcome.failures.push(TestFailure { id: id.to_string(), message: String::new() });
                continue;
            }
            if !trimmed.is_empty() {
                in_failing_list = false;
            }
        }
        if let Some(rest) = trimmed.strip_prefix("FAIL ") {
            let (id, message) = rest.split_once(':').unwrap_or((rest, ""));
            outcome.failures.push(TestFailure {
                id: id.trim().to_string(),
                message: message.trim().to_string(),
            });
            outcome.ran += 1;
        } else if trimmed.starts_with("PASS ") {
            outcome.ran += 1;
        }
        if let Some(rest) = trimmed.strip_prefix("Tests run:") {
            if let Some(n) = rest.split(',').next().and_then(|s| s.trim().parse::<usize>().ok()) {
                outcome.ran = outcome.ran.max(n);
            }
        }
    }
    outcome.ran = outcome.ran.max(outcome.failures.len());
    outcome
}

/// Run `sh -c <cmd>`, capturing interleaved stdout/stderr, killing the
/// process after `timeout`.
pub fn run_with_timeout(
    cmd: &str,
    cwd: Option<&Path>,
    timeout: Duration,
) -> anyhow::Result<ExecResult> {
    let mut command = Command::new("sh");
    command.arg("-c").arg(cmd).stdin(Stdio::null()).stdout(Stdio::piped()).stderr(Stdio::piped());
    if let Some(dir) = cwd {
        command.current_dir(dir);
    }
    // own process group, so a timeout can kill the whole build tree
    #[cfg(unix)]
    std::os::unix::process::CommandExt::process_group(&mut command, 0);
    let mut child = command.spawn()?;

    let mut stdout = child.stdout.take().unwrap();
    let mut stderr = child.stderr.take().unwrap();
    let out_handle = std::thread::spawn(move || {
        let mut buf = String::new();
        let _ = stdout.read_to_string(&mut buf);
        buf
    });
    let err_handle = std::thread::spawn(move || {
        let mut buf = String::new();
        let _ = stderr.read_to_string(&mut buf);
        buf
    });

    let deadline = Instant::now() + timeout;
    let mut timed_out = false;
    let status = loop {
        if let Some(status) = child.try_wait()? {
            break Some(status);
        }
        if Instant::now() >= deadline {
            timed_out = true;
            #[cfg(unix)]
            unsafe {
                libc::killpg(child.id() as i32, libc::SIGKILL);
            }
            let _ = child.kill();
            let _ = child.wait();
            break None;
        }
        std::thread::sleep(Duration::from_millis(25));
    };

    let mut output = out_handle.join().unwrap_or_default();
    let err = err_handle.join().unwrap_or_default();
    if !err.is_empty() {
        if !output.is_empty() {
            output.push('\n');
        }
        output.push_str(&err);
    }
    Ok(ExecResult {
        ok: status.map(|s| s.success()).unwrap_or(false),
        timed_out,
        output,
    })
}

/// Recursive directory copy used by checkout implementations.
pub fn copy_tree(from: &Path, to: &Path) -> anyhow::Result<()> {
    std::fs::create_dir_all(to)?;
    for entry in walkdir::WalkDir::new(from).sort_by_file_name() {
        let entry = entry?;
        let rel = entry.path().strip_prefix(from)?;
        if rel.as_os_str().is_empty() {
            continue;
        }
        let dest = to.join(rel);
        if entry.file_type().is_dir() {
            std::fs::create_dir_all(&dest)?;
        } else {
            std::fs::copy(entry.path(), &dest)?;
        }
    }
    Ok(())
}
