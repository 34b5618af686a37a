//! Subprocess execution with console capture, wall-clock timeout and
//! process-group termination.

use std::io::Read;
use std::path::Path;
use std::process::{Command, Stdio};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

/// Cooperative cancellation flag shared with running firings.
#[derive(Debug, Clone, Default)]
pub struct CancelToken(Arc<AtomicBool>);

impl CancelToken {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn cancel(&self) {
        self.0.store(true, Ordering::SeqCst);
    }

    pub fn is_cancelled(&self) -> bool {
        self.0.load(Ordering::SeqCst)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProcessEnd {
    Exited(i32),
    /// Killed after exceeding its wall-clock budget.
    TimedOut,
    /// Terminated after a cancel request (SIGTERM, 10 s grace, SIGKILL).
    Cancelled,
}

pub struct ProcessOutcome {
    pub end: ProcessEnd,
    pub wall_clock: Duration,
}

const CANCEL_GRACE: Duration = Duration::from_secs(10);
const POLL_INTERVAL: Duration = Duration::from_millis(10);

/// Runs `argv` with `cwd` as working directory, appending console output
/// to the shared buffers. The child gets its own process group so a kill
/// reaches the whole tree.
pub fn run_process(
    argv: &[String],
    cwd: &Path,
    budget: Duration,
    cancel: &CancelToken,
    stdout_buf: &Arc<Mutex<Vec<u8>>>,
    stderr_buf: &Arc<Mutex<Vec<u8>>>,
    on_console: Option<&crate::runner::ConsoleSink>,
) -> std::io::Result<ProcessOutcome> {
    let started = Instant::now();
    let mut command = Command::new(&argv[0]);
    command
        .args(&argv[1..])
        .current_dir(cwd)
        .stdin(Stdio::null())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped());
    #[cfg(unix)]
    {
        use std::os::unix::process::CommandExt;
        command.process_group(0);
    }
    let mut child = command.spawn()?;
    let pid = child.id() as i32;

    let out_reader = spawn_reader(
        child.stdout.take().expect("stdout piped"),
        Arc::clone(stdout_buf),
        crate::runner::ConsoleStream::Stdout,
        on_console.cloned(),
    );
    let err_reader = spawn_reader(
        child.stderr.take().expect("stderr piped"),
        Arc::clone(stderr_buf),
        crate::runner::ConsoleStream::Stderr,
        on_console.cloned(),
    );

    let mut term_sent_at: Option<Instant> = None;
    let end = loop {
        if let Some(status) = child.try_wait()? {
            break match term_sent_at {
                Some(_) => ProcessEnd::Cancelled,
                None => ProcessEnd::Exited(status.code().unwrap_or(-1)),
            };
        }
        let elapsed = started.elapsed();
        if elapsed >= budget {
            kill_group(pid, libc::SIGKILL);
            child.wait()?;
            break ProcessEnd::TimedOut;
        }
        match term_sent_at {
            None if cancel.is_cancelled() => {
                kill_group(pid, libc::SIGTERM);
                term_sent_at = Some(Instant::now());
            }
            Some(at) if at.elapsed() >= CANCEL_GRACE => {
                kill_group(pid, libc::SIGKILL);
                child.wait()?;
                break ProcessEnd::Cancelled;
            }
            _ => {}
        }
        std::thread::sleep(POLL_INTERVAL);
    };

    let _ = out_reader.join();
    let _ = err_reader.join();
    Ok(ProcessOutcome { end, wall_clock: started.elapsed() })
}

fn spawn_reader<R: Read + Send + 'static>(
    mut source: R,
    buffer: Arc<Mutex<Vec<u8>>>,
    stream: crate::runner::ConsoleStream,
    sink: Option<crate::runner::ConsoleSink>,
) -> std::thread::JoinHandle<()> {
    std::thread::spawn(move || {
        let mut chunk = [0u8; 8192];
        loop {
            match source.read(&mut chunk) {
                Ok(0) | Err(_) => break,
                Ok(n) => {
                    buffer.lock().expect("console buffer").extend_from_slice(&chunk[..n]);
                    if let Some(sink) = &sink {
                        sink(stream, &chunk[..n]);
                    }
                }
            }
        }
    })
}

fn kill_group(pid: i32, signal: i32) {
    // Negative pid addresses the process group created at spawn.
    unsafe {
        libc::kill(-pid, signal);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn buffers() -> (Arc<Mutex<Vec<u8>>>, Arc<Mutex<Vec<u8>>>) {
        (Arc::new(Mutex::new(Vec::new())), Arc::new(Mutex::new(Vec::new())))
    }

    #[test]
    fn captures_console_and_exit_code() {
        let dir = tempfile::tempdir().unwrap();
        let (out, err) = buffers();
        let argv: Vec<String> =
            ["sh", "-c", "echo hello; echo oops >&2; exit 3"].iter().map(|s| s.to_string()).collect();
        let outcome = run_process(
            &argv,
            dir.path(),
            Duration::from_secs(5),
            &CancelToken::new(),
            &out,
            &err,
            None,
        )
        .unwrap();
        assert_eq!(outcome.end, ProcessEnd::Exited(3));
        assert_eq!(String::from_utf8_lossy(&out.lock().unwrap()), "hello\n");
        assert_eq!(String::from_utf8_lossy(&err.lock().unwrap()), "oops\n");
    }

    #[test]
    fn timeout_kills_process_tree() {
        let dir = tempfile::tempdir().unwrap();
        let (out, err) = buffers();
        let argv: Vec<String> = ["sh", "-c", "sleep 30 & wait"].iter().map(|s| s.to_string()).collect();
        let started = Instant::now();
        let outcome = run_process(
            &argv,
            dir.path(),
            Duration::from_millis(200),
            &CancelToken::new(),
            &out,
            &err,
            None,
        )
        .unwrap();
        assert_eq!(outcome.end, ProcessEnd::TimedOut);
        assert!(started.elapsed() < Duration::from_secs(5));
    }

    #[test]
    fn cancel_terminates_promptly() {
        let dir = tempfile::tempdir().unwrap();
        let (out, err) = buffers();
        let cancel = CancelToken::new();
        let cancel_clone = cancel.clone();
        std::thread::spawn(move || {
            std::thread::sleep(Duration::from_millis(100));
            cancel_clone.cancel();
        });
        let argv: Vec<String> = ["sleep", "30"].iter().map(|s| s.to_string()).collect();
        let started = Instant::now();
        let outcome = run_process(
            &argv,
            dir.path(),
            Duration::from_secs(60),
            &cancel,
            &out,
            &err,
            None,
        )
        .unwrap();
        assert_eq!(outcome.end, ProcessEnd::Cancelled);
        assert!(started.elapsed() < Duration::from_secs(15));
    }
}
