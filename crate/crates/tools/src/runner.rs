//! The tool run pipeline: stage inputs, run pre-script → command →
//! post-script, harvest declared outputs.

use std::collections::BTreeMap;
use std::fs;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use thiserror::Error;

use flowmesh_core::{BlobError, BlobRead, BlobWrite, DataType, DataValue, PortName, PortSpec};

use crate::exchange::{self, ExchangeError};
use crate::manifest::ToolManifest;
use crate::process::{run_process, CancelToken, ProcessEnd};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConsoleStream {
    Stdout,
    Stderr,
}

/// Incremental console forwarding; the final authoritative copy is in
/// [`ToolRunContext`] regardless.
pub type ConsoleSink = Arc<dyn Fn(ConsoleStream, &[u8]) + Send + Sync>;

/// Everything one firing needs from its node.
pub struct RunEnv<'a> {
    /// Fresh directory for this firing; never reused.
    pub run_dir: PathBuf,
    /// Interpreter command for script stages, e.g. `["python3"]`.
    pub interpreter: Vec<String>,
    pub blobs_read: &'a dyn BlobRead,
    pub blobs_write: &'a dyn BlobWrite,
    pub cancel: CancelToken,
    pub console: Option<ConsoleSink>,
}

/// Observed facts of one firing.
#[derive(Debug)]
pub struct ToolRunContext {
    pub run_dir: PathBuf,
    pub staged_inputs: BTreeMap<PortName, DataValue>,
    pub stdout: Vec<u8>,
    pub stderr: Vec<u8>,
    /// Exit code of the command stage; `None` when there was none.
    pub exit_code: Option<i32>,
    pub wall_clock: Duration,
}

#[derive(Debug, Error)]
pub enum ToolRunError {
    #[error("required input port {0} not supplied")]
    MissingInput(PortName),
    #[error("input {port}: expected {expected}, got {actual}")]
    InputTypeError { port: PortName, expected: DataType, actual: DataType },
    #[error("pre-script failed with exit code {exit_code:?}")]
    PreScriptFailed { exit_code: Option<i32>, context: Box<ToolRunContext> },
    #[error("tool failed with exit code {exit_code:?}")]
    ToolFailed { exit_code: Option<i32>, context: Box<ToolRunContext> },
    #[error("post-script failed with exit code {exit_code:?}")]
    PostScriptFailed { exit_code: Option<i32>, context: Box<ToolRunContext> },
    #[error("script failed with exit code {exit_code:?}")]
    ScriptFailed { exit_code: Option<i32>, context: Box<ToolRunContext> },
    #[error("firing exceeded its {0} s budget in the {1} stage")]
    Timeout(u64, &'static str),
    #[error("firing cancelled in the {0} stage")]
    Cancelled(&'static str),
    #[error("output harvest: {0}")]
    OutputTypeError(String),
    #[error("intepreter not configured but the manifest has script stages")]
    NoInterpreter,
    #[error("run directory {0:?} already exists; firing directories are never reused")]
    RunDirReused(PathBuf),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("blob: {0}")]
    Blob(#[from] BlobError),
}

struct Pipeline<'a> {
    env: &'a RunEnv<'a>,
    stdout: Arc<Mutex<Vec<u8>>>,
    stderr: Arc<Mutex<Vec<u8>>>,
    deadline: Instant,
    budget_seconds: u64,
    exit_code: Option<i32>,
    started: Instant,
}

impl<'a> Pipeline<'a> {
    fn new(env: &'a RunEnv<'a>, budget_seconds: u64) -> Self {
        let started = Instant::now();
        Pipeline {
            env,
            stdout: Arc::new(Mutex::new(Vec::new())),
            stderr: Arc::new(Mutex::new(Vec::new())),
            deadline: started + Duration::from_secs(budget_seconds),
            budget_seconds,
            exit_code: None,
            started,
        }
    }

    fn remaining(&self) -> Duration {
        self.deadline.saturating_duration_since(Instant::now())
    }

    fn run_stage(
        &mut self,
        argv: &[String],
        stage: &'static str,
    ) -> Result<Option<i32>, ToolRunError> {
        let outcome = run_process(
            argv,
            &self.env.run_dir,
            self.remaining(),
            &self.env.cancel,
            &self.stdout,
            &self.stderr,
            self.env.console.as_ref(),
        )?;
        match outcome.end {
            ProcessEnd::Exited(code) => Ok(Some(code)),
            ProcessEnd::TimedOut => Err(ToolRunError::Timeout(self.budget_seconds, stage)),
            ProcessEnd::Cancelled => Err(ToolRunError::Cancelled(stage)),
        }
    }

    fn script_argv(&self, file: &str) -> Result<Vec<String>, ToolRunError> {
        if self.env.interpreter.is_empty() {
            return Err(ToolRunError::NoInterpreter);
        }
        let mut argv = self.env.interpreter.clone();
        argv.push(self.env.run_dir.join(file).to_string_lossy().into_owned());
        Ok(argv)
    }

    fn context(&self, staged_inputs: BTreeMap<PortName, DataValue>) -> ToolRunContext {
        ToolRunContext {
            run_dir: self.env.run_dir.clone(),
            staged_inputs,
            stdout: self.stdout.lock().expect("stdout buffer").clone(),
            stderr: self.stderr.lock().expect("stderr buffer").clone(),
            exit_code: self.exit_code,
            wall_clock: self.started.elapsed(),
        }
    }
}

fn check_inputs(
    input_ports: &[&PortSpec],
    inputs: &BTreeMap<PortName, DataValue>,
) -> Result<(), ToolRunError> {
    for port in input_ports {
        match inputs.get(&port.name) {
            Some(value) => {
                if value.datatype() != port.datatype {
                    return Err(ToolRunError::InputTypeError {
                        port: port.name.clone(),
                        expected: port.datatype,
                        actual: value.datatype(),
                    });
                }
            }
            None if port.is_required() => {
                return Err(ToolRunError::MissingInput(port.name.clone()))
            }
            None => {}
        }
    }
    Ok(())
}

fn prepare_run_dir(env: &RunEnv<'_>) -> Result<(), ToolRunError> {
    if env.run_dir.exists() {
        return Err(ToolRunError::RunDirReused(env.run_dir.clone()));
    }
    fs::create_dir_all(&env.run_dir)?;
    Ok(())
}

fn substitute_command(
    command: &[String],
    env: &RunEnv<'_>,
    inputs: &BTreeMap<PortName, DataValue>,
) -> Vec<String> {
    let run_dir = env.run_dir.to_string_lossy().into_owned();
    command
        .iter()
        .map(|arg| {
            let mut arg = arg.replace("${run_dir}", &run_dir);
            for (port, value) in inputs {
                let pattern = format!("${{input:{port}}}");
                if arg.contains(&pattern) {
                    arg = arg.replace(&pattern, &exchange::placeholder_text(port, value));
                }
            }
            arg
        })
        .collect()
}

/// Runs the full integration pipeline for one firing.
///
/// Steps: write `inputs.json`; run the pre-script (which may rewrite
/// `tool_inputs.json`, pre-seeded with a copy of the inputs); run the
/// command with placeholders substituted; run the post-script, which
/// must write `outputs.json`; parse and type-check declared outputs.
pub fn execute_tool_run(
    manifest: &ToolManifest,
    inputs: &BTreeMap<PortName, DataValue>,
    env: &RunEnv<'_>,
) -> Result<(BTreeMap<PortName, DataValue>, ToolRunContext), ToolRunError> {
    let input_ports: Vec<&PortSpec> = manifest.inputs().collect();
    check_inputs(&input_ports, inputs)?;
    prepare_run_dir(env)?;

    let mut pipeline = Pipeline::new(env, manifest.timeout_seconds);

    let inputs_doc = exchange::stage_inputs(&env.run_dir, inputs, env.blobs_read)
        .map_err(exchange_to_run_error)?;
    let inputs_text = serde_json::to_string_pretty(&inputs_doc).expect("doc encodes");
    fs::write(env.run_dir.join("inputs.json"), &inputs_text)?;
    fs::write(env.run_dir.join("tool_inputs.json"), &inputs_text)?;

    if let Some(script) = &manifest.pre_script {
        fs::write(env.run_dir.join("pre_script"), script)?;
        let argv = pipeline.script_argv("pre_script")?;
        let code = pipeline.run_stage(&argv, "pre-script")?;
        if code != Some(0) {
            return Err(ToolRunError::PreScriptFailed {
                exit_code: code,
                context: Box::new(pipeline.context(inputs.clone())),
            });
        }
    }

    let argv = substitute_command(&manifest.command, env, inputs);
    let code = pipeline.run_stage(&argv, "command")?;
    pipeline.exit_code = code;
    if !manifest.expected_exit_codes.contains(&code.unwrap_or(-1)) {
        return Err(ToolRunError::ToolFailed {
            exit_code: code,
            context: Box::new(pipeline.context(inputs.clone())),
        });
    }

    if let Some(script) = &manifest.post_script {
        fs::write(env.run_dir.join("post_script"), script)?;
        let argv = pipeline.script_argv("post_script")?;
        let code = pipeline.run_stage(&argv, "post-script")?;
        if code != Some(0) {
            return Err(ToolRunError::PostScriptFailed {
                exit_code: code,
                context: Box::new(pipeline.context(inputs.clone())),
            });
        }
    }

    let declared: Vec<(PortName, DataType)> =
        manifest.outputs().map(|p| (p.name.clone(), p.datatype)).collect();
    let outputs = exchange::harvest_outputs(&env.run_dir, &declared, env.blobs_write)
        .map_err(exchange_to_run_error)?;
    Ok((outputs, pipeline.context(inputs.clone())))
}

/// Runs a bare script firing: `inputs.json` in, `outputs.json` out, no
/// command stage. Used by the script builtin.
pub fn run_script(
    script: &str,
    inputs: &BTreeMap<PortName, DataValue>,
    input_ports: &[PortSpec],
    output_ports: &[(PortName, DataType)],
    timeout_seconds: u64,
    env: &RunEnv<'_>,
) -> Result<(BTreeMap<PortName, DataValue>, ToolRunContext), ToolRunError> {
    let ports: Vec<&PortSpec> = input_ports.iter().collect();
    check_inputs(&ports, inputs)?;
    prepare_run_dir(env)?;

    let mut pipeline = Pipeline::new(env, timeout_seconds);
    let inputs_doc = exchange::stage_inputs(&env.run_dir, inputs, env.blobs_read)
        .map_err(exchange_to_run_error)?;
    fs::write(
        env.run_dir.join("inputs.json"),
        serde_json::to_string_pretty(&inputs_doc).expect("doc encodes"),
    )?;

    fs::write(env.run_dir.join("script"), script)?;
    let argv = pipeline.script_argv("script")?;
    let code = pipeline.run_stage(&argv, "script")?;
    pipeline.exit_code = code;
    if code != Some(0) {
        return Err(ToolRunError::ScriptFailed {
            exit_code: code,
            context: Box::new(pipeline.context(inputs.clone())),
        });
    }

    let outputs = exchange::harvest_outputs(&env.run_dir, output_ports, env.blobs_write)
        .map_err(exchange_to_run_error)?;
    Ok((outputs, pipeline.context(inputs.clone())))
}

fn exchange_to_run_error(e: ExchangeError) -> ToolRunError {
    match e {
        ExchangeError::Io(e) => ToolRunError::Io(e),
        ExchangeError::Blob(e) => ToolRunError::Blob(e),
        other => ToolRunError::OutputTypeError(other.to_string()),
    }
}
