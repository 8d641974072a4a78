//! One-subprocess-per-call protocol for external tools.
//!
//! The request is a single JSON document on stdin, `{tool, args, workdir}`;
//! the response on stdout is `{"status": "ok", "value": ...}` or
//! `{"status": "error", "message": ...}`. Rasters and masks travel as
//! sidecar files inside `workdir`.

use std::io::{Read, Write};
use std::path::Path;
use std::process::{Command, Stdio};
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::Value as Json;

use super::invoke::ToolError;
use crate::value::{Value, WireError};

const POLL_INTERVAL: Duration = Duration::from_millis(5);
const STDERR_TAIL: usize = 2048;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolRequest {
    pub tool: String,
    pub args: Vec<Json>,
    pub workdir: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum ToolResponse {
    Ok { value: Json },
    Error { message: String },
}

pub fn encode_request(tool: &str, args: &[Value], workdir: &Path) -> Result<ToolRequest, WireError> {
    Ok(ToolRequest {
        tool: tool.to_string(),
        args: args
            .iter()
            .map(|a| a.to_wire(workdir))
            .collect::<Result<_, _>>()?,
        workdir: workdir.to_string_lossy().into_owned(),
    })
}

/// Parses a response document; `Err(message)` carries a tool-reported error.
pub fn decode_response(stdout: &[u8], base: &Path) -> Result<Result<Value, String>, WireError> {
    let resp: ToolResponse = serde_json::from_slice(stdout)
        .map_err(|e| WireError::Malformed(format!("response is not a valid document: {e}")))?;
    Ok(match resp {
        ToolResponse::Ok { value } => Ok(Value::from_wire(&value, base)?),
        ToolResponse::Error { message } => Err(message),
    })
}

fn tail(bytes: &[u8]) -> String {
    let s = String::from_utf8_lossy(bytes);
    let start = s.len().saturating_sub(STDERR_TAIL);
    let start = (start..s.len()).find(|i| s.is_char_boundary(*i)).unwrap_or(s.len());
    s[start..].to_string()
}

fn drain<R: Read + Send + 'static>(mut r: R) -> thread::JoinHandle<Vec<u8>> {
    thread::spawn(move || {
        let mut buf = Vec::new();
        let _ = r.read_to_end(&mut buf);
        buf
    })
}

pub(crate) fn run_external(
    cmd: &[String],
    timeout: Duration,
    tool: &str,
    args: &[Value],
) -> Result<Value, ToolError> {
    let crashed = |status: String, stderr: String| ToolError::ToolCrashed {
        tool: tool.to_string(),
        status,
        stderr,
    };
    let malformed = |message: String| ToolError::MalformedToolOutput {
        tool: tool.to_string(),
        message,
    };

    let workdir = tempfile::Builder::new()
        .prefix("geoscript-tool-")
        .tempdir()
        .map_err(|e| crashed("no workdir".into(), e.to_string()))?;
    let request = encode_request(tool, args, workdir.path())
        .map_err(|e| ToolError::mismatch(tool, e.to_string()))?;
    let body = serde_json::to_vec(&request).expect("request serializes");

    let (program, rest) = cmd.split_first().expect("validated non-empty command");
    let mut child = Command::new(program)
        .args(rest)
        .current_dir(workdir.path())
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .map_err(|e| crashed("spawn failed".into(), format!("{program}: {e}")))?;

    let mut stdin = child.stdin.take().expect("piped stdin");
    let writer = thread::spawn(move || {
        // a tool may exit without reading its input; a broken pipe is fine
        let _ = stdin.write_all(&body);
    });
    let stdout = drain(child.stdout.take().expect("piped stdout"));
    let stderr = drain(child.stderr.take().expect("piped stderr"));

    let deadline = Instant::now() + timeout;
    let status = loop {
        match child.try_wait() {
            Ok(Some(status)) => break status,
            Ok(None) if Instant::now() >= deadline => {
                let _ = child.kill();
                let _ = child.wait();
                let _ = writer.join();
                return Err(ToolError::ToolTimeout {
                    tool: tool.to_string(),
                    seconds: timeout.as_secs_f64(),
                });
            }
            Ok(None) => thread::sleep(POLL_INTERVAL),
            Err(e) => return Err(crashed("wait failed".into(), e.to_string())),
        }
    };
    let _ = writer.join();
    let out = stdout.join().unwrap_or_default();
    let err = stderr.join().unwrap_or_default();

    if !status.success() {
        let code = match status.code() {
            Some(c) => format!("exit status {c}"),
            None => "killed by signal".to_string(),
        };
        return Err(crashed(code, tail(&err)));
    }
    match decode_response(&out, workdir.path()) {
        Ok(Ok(value)) => Ok(value),
        Ok(Err(message)) => Err(ToolError::failed(tool, message)),
        Err(e) => Err(malformed(e.to_string())),
    }
}
