//! Code interpreter: runs a snippet in a fresh child process rooted at a
//! run-private working directory, with a wall-clock timeout and an output
//! cap. stdout and stderr are merged in arrival order.

use std::io::Read;
use std::path::PathBuf;
use std::process::{Command, Stdio};
use std::sync::mpsc;
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::text::truncate_chars;

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(60);
pub const DEFAULT_OUTPUT_CAP: usize = 10_000;
pub const OUTPUT_TRUNCATION_MARKER: &str = "\n...[output truncated]";

#[derive(Debug, Clone)]
pub struct ExecutionRequest {
    pub code: String,
    pub timeout: Duration,
    /// Cap on captured output, in characters.
    pub output_cap: usize,
    /// Run-private directory the process is rooted at; created if missing.
    pub workdir: PathBuf,
}

impl ExecutionRequest {
    pub fn new(code: impl Into<String>, workdir: impl Into<PathBuf>) -> Self {
        Self {
            code: code.into(),
            timeout: DEFAULT_TIMEOUT,
            output_cap: DEFAULT_OUTPUT_CAP,
            workdir: workdir.into(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExecutionResult {
    /// Merged stdout+stderr, truncated at the cap with a marker.
    pub stdout_stderr: String,
    /// Process exit code; -1 when the process was killed (timeout) or the
    /// code is unavailable.
    pub exit_status: i32,
    pub timed_out: bool,
    pub duration: Duration,
}

#[derive(Debug, Error)]
pub enum TerminalError {
    #[error("interpreter `{0}` not found")]
    InterpreterMissing(String),
    #[error("failed to start interpreter: {0}")]
    Spawn(String),
    #[error("i/o failure: {0}")]
    Io(#[from] std::io::Error),
}

/// Interpreter configuration. Holds no mutable state; executions are
/// independent and may run concurrently with distinct workdirs.
#[derive(Debug, Clone)]
pub struct Terminal {
    /// Interpreter argv; the snippet file path is appended.
    pub interpreter: Vec<String>,
    /// Name for the snippet file inside the workdir.
    pub code_file_name: String,
    /// Extra slack past the timeout for teardown.
    pub grace: Duration,
    /// Best effort: prepend a prelude that disables sockets (Python only).
    pub deny_network: bool,
}

impl Default for Terminal {
    fn default() -> Self {
        Self {
            interpreter: vec!["python3".into()],
            code_file_name: "snippet.py".into(),
            grace: Duration::from_secs(2),
            deny_network: false,
        }
    }
}

const PYTHON_DENY_NETWORK_PRELUDE: &str = r"import socket as _socket
def _no_network(*args, **kwargs):
    raise OSError('network access is disabled')
_socket.socket = _no_network
_socket.create_connection = _no_network

";

impl Terminal {
    pub fn execute(&self, request: &ExecutionRequest) -> Result<ExecutionResult, TerminalError> {
        let program = self
            .interpreter
            .first()
            .ok_or_else(|| TerminalError::Spawn("empty interpreter command".into()))?;
        std::fs::create_dir_all(&request.workdir)?;

        let mut code = String::new();
        if self.deny_network && self.code_file_name.ends_with(".py") {
            code.push_str(PYTHON_DENY_NETWORK_PRELUDE);
        }
        code.push_str(&request.code);
        let code_path = request.workdir.join(&self.code_file_name);
        std::fs::write(&code_path, code)?;

        let started = Instant::now();
        let mut child = Command::new(program)
            .args(&self.interpreter[1..])
            .arg(&code_path)
            .current_dir(&request.workdir)
            .stdin(Stdio::null())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| match e.kind() {
                std::io::ErrorKind::NotFound => TerminalError::InterpreterMissing(program.clone()),
                _ => TerminalError::Spawn(e.to_string()),
            })?;

        let (sender, receiver) = mpsc::channel::<Vec<u8>>();
        let mut readers = Vec::new();
        if let Some(stdout) = child.stdout.take() {
            readers.push(spawn_reader(stdout, sender.clone()));
        }
        if let Some(stderr) = child.stderr.take() {
            readers.push(spawn_reader(stderr, sender.clone()));
        }
        drop(sender);

        // Keep at most a bounded prefix in memory; past that we only track
        // that more output arrived.
        let byte_bound = request.output_cap.saturating_mul(4).saturating_add(4096);
        let mut collected: Vec<u8> = Vec::new();
        let mut overflowed = false;
        let deadline = started + request.timeout;
        let mut timed_out = false;

        loop {
            match receiver.recv_timeout(Duration::from_millis(20)) {
                Ok(chunk) => {
                    if collected.len() < byte_bound {
                        let room = byte_bound - collected.len();
                        if chunk.len() > room {
                            collected.extend_from_slice(&chunk[..room]);
                            overflowed = true;
                        } else {
                            collected.extend_from_slice(&chunk);
                        }
                    } else if !chunk.is_empty() {
                        overflowed = true;
                    }
                }
                Err(mpsc::RecvTimeoutError::Timeout) => {
                    if !timed_out && Instant::now() >= deadline {
                        timed_out = true;
                        let _ = child.kill();
                    }
                }
                Err(mpsc::RecvTimeoutError::Disconnected) => break,
            }
            if !timed_out && Instant::now() >= deadline {
                timed_out = true;
                let _ = child.kill();
            }
        }
        for reader in readers {
            let _ = reader.join();
        }
        // Closed streams do not mean the process exited; keep the deadline
        // while waiting for it.
        let status = loop {
            if let Some(status) = child.try_wait()? {
                break status;
            }
            if Instant::now() >= deadline {
                timed_out = true;
                let _ = child.kill();
                break child.wait()?;
            }
            std::thread::sleep(Duration::from_millis(10));
        };
        let duration = started.elapsed();

        let text = String::from_utf8_lossy(&collected);
        let head = truncate_chars(&text, request.output_cap);
        let truncated = overflowed || head.len() < text.len();
        let stdout_stderr = if truncated {
            format!("{head}{OUTPUT_TRUNCATION_MARKER}")
        } else {
            head.to_string()
        };

        let exit_status = if timed_out {
            -1
        } else {
            status.code().unwrap_or(-1)
        };
        Ok(ExecutionResult {
            stdout_stderr,
            exit_status,
            timed_out,
            duration,
        })
    }
}

fn spawn_reader<R: Read + Send + 'static>(
    mut source: R,
    sender: mpsc::Sender<Vec<u8>>,
) -> std::thread::JoinHandle<()> {
    std::thread::spawn(move || {
        let mut buffer = [0u8; 8192];
        loop {
            match source.read(&mut buffer) {
                Ok(0) | Err(_) => break,
                Ok(n) => {
                    if sender.send(buffer[..n].to_vec()).is_err() {
                        break;
                    }
                }
            }
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(code: &str, timeout: Duration, cap: usize) -> ExecutionResult {
        let dir = tempfile::tempdir().unwrap();
        let request = ExecutionRequest {
            code: code.into(),
            timeout,
            output_cap: cap,
            workdir: dir.path().to_path_buf(),
        };
        Terminal::default().execute(&request).unwrap()
    }

    #[test]
    fn captures_simple_output() {
        let result = run("print(1+1)", DEFAULT_TIMEOUT, DEFAULT_OUTPUT_CAP);
        assert_eq!(result.stdout_stderr, "2\n");
        assert_eq!(result.exit_status, 0);
        assert!(!result.timed_out);
    }

    #[test]
    fn merges_stderr_into_the_stream() {
        let result = run(
            "import sys\nsys.stderr.write('oops\\n')\nsys.stderr.flush()\nsys.exit(3)",
            DEFAULT_TIMEOUT,
            DEFAULT_OUTPUT_CAP,
        );
        assert!(result.stdout_stderr.contains("oops"));
        assert_eq!(result.exit_status, 3);
    }

    #[test]
    fn infinite_loop_is_killed_at_the_timeout() {
        let started = Instant::now();
        let result = run(
            "while True:\n    pass",
            Duration::from_secs(1),
            DEFAULT_OUTPUT_CAP,
        );
        assert!(result.timed_out);
        assert_eq!(result.exit_status, -1);
        // DEFAULT grace is 2s; the whole call must fit in timeout + grace.
        assert!(
            started.elapsed() < Duration::from_secs(3),
            "took {:?}",
            started.elapsed()
        );
        assert!(result.duration >= Duration::from_millis(900));
    }

    #[test]
    fn output_cap_arithmetic_is_exact() {
        // One million characters against a cap of 10000.
        let result = run(
            "import sys\nsys.stdout.write('x' * 1000000)",
            DEFAULT_TIMEOUT,
            10_000,
        );
        assert_eq!(
            result.stdout_stderr.chars().count(),
            10_000 + OUTPUT_TRUNCATION_MARKER.chars().count()
        );
        assert!(result.stdout_stderr.ends_with(OUTPUT_TRUNCATION_MARKER));
        assert!(result.stdout_stderr.starts_with("xxxx"));
    }

    #[test]
    fn uncapped_output_has_no_marker() {
        let result = run("print('abc')", DEFAULT_TIMEOUT, 10_000);
        assert!(!result
            .stdout_stderr
            .contains(OUTPUT_TRUNCATION_MARKER.trim()));
    }

    #[test]
    fn executions_are_isolated_per_workdir() {
        let terminal = Terminal::default();
        let dir_a = tempfile::tempdir().unwrap();
        let dir_b = tempfile::tempdir().unwrap();

        let write = ExecutionRequest::new("open('made_here.txt', 'w').write('hi')", dir_a.path());
        terminal.execute(&write).unwrap();
        assert!(dir_a.path().join("made_here.txt").exists());

        let list = ExecutionRequest::new("import os\nprint(sorted(os.listdir('.')))", dir_b.path());
        let result = terminal.execute(&list).unwrap();
        assert!(!result.stdout_stderr.contains("made_here.txt"));
    }

    #[test]
    fn deterministic_code_yields_identical_text() {
        let code = "for i in range(5):\n    print(i * i)";
        let first = run(code, DEFAULT_TIMEOUT, DEFAULT_OUTPUT_CAP);
        let second = run(code, DEFAULT_TIMEOUT, DEFAULT_OUTPUT_CAP);
        assert_eq!(first.stdout_stderr, second.stdout_stderr);
    }

    #[test]
    fn closed_streams_do_not_outlive_the_timeout() {
        // The child closes stdout and stderr, then keeps running. The
        // readers see EOF immediately; the deadline must still fire.
        let started = Instant::now();
        let result = run(
            "import os, time\nos.close(1)\nos.close(2)\ntime.sleep(30)",
            Duration::from_secs(1),
            DEFAULT_OUTPUT_CAP,
        );
        assert!(result.timed_out);
        assert!(
            started.elapsed() < Duration::from_secs(3),
            "took {:?}",
            started.elapsed()
        );
    }

    #[test]
    fn missing_interpreter_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let terminal = Terminal {
            interpreter: vec!["definitely-not-an-interpreter-9000".into()],
            ..Terminal::default()
        };
        let request = ExecutionRequest::new("print(1)", dir.path());
        assert!(matches!(
            terminal.execute(&request),
            Err(TerminalError::InterpreterMissing(_))
        ));
    }

    #[test]
    fn deny_network_blocks_sockets() {
        let dir = tempfile::tempdir().unwrap();
        let terminal = Terminal {
            deny_network: true,
            ..Terminal::default()
        };
        let request = ExecutionRequest::new(
            "import socket\ntry:\n    socket.socket()\nexcept OSError as e:\n    print('blocked:', e)",
            dir.path(),
        );
        let result = terminal.execute(&request).unwrap();
        assert!(result.stdout_stderr.contains("blocked:"));
    }
}
