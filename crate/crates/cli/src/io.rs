//! JSON plumbing: the result envelope, input files, atomic output.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{json, Value};

#[derive(Serialize)]
pub struct CommandResult {
    pub status: &'static str,
    pub payload: Value,
    pub diagnostics: Vec<String>,
}

/// Successful command output.
pub struct Outcome {
    pub payload: Value,
    pub diagnostics: Vec<String>,
}

impl Outcome {
    pub fn new<T: Serialize>(payload: &T) -> Result<Self, Failure> {
        Ok(Self {
            payload: to_value(payload)?,
            diagnostics: Vec::new(),
        })
    }

    pub fn note(mut self, line: impl Into<String>) -> Self {
        self.diagnostics.push(line.into());
        self
    }
}

/// A failed command: exit code, error name and an optional structured payload.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub name: String,
    pub message: String,
    pub detail: Option<Value>,
}

impl Failure {
    pub fn usage(name: &str, message: impl Into<String>) -> Self {
        Self {
            code: 2,
            name: name.into(),
            message: message.into(),
            detail: None,
        }
    }

    pub fn domain(name: &str, message: impl Into<String>) -> Self {
        Self {
            code: 1,
            name: name.into(),
            message: message.into(),
            detail: None,
        }
    }

    pub fn with_detail(mut self, detail: Value) -> Self {
        self.detail = Some(detail);
        self
    }

    pub fn into_result(self) -> CommandResult {
        let mut payload = json!({ "error": self.name, "message": self.message });
        if let Some(detail) = self.detail {
            payload["detail"] = detail;
        }
        CommandResult {
            status: "error",
            payload,
            diagnostics: vec![self.name, self.message],
        }
    }
}

macro_rules! domain_error {
    ($($ty:ty),*) => {$(
        impl From<$ty> for Failure {
            fn from(e: $ty) -> Self {
                Failure::domain(e.name(), e.to_string())
            }
        }
    )*};
}

domain_error!(
    equivar::group::GroupError,
    equivar::catalog::CatalogError,
    equivar::engine::EngineError,
    equivar::certifier::CertifyError,
    equivar::fit::FitError
);

pub fn to_value<T: Serialize>(v: &T) -> Result<Value, Failure> {
    serde_json::to_value(v).map_err(|e| Failure::domain("SerializationError", e.to_string()))
}

/// Reads a JSON file (`-` for stdin). A `CommandResult` envelope is
/// unwrapped to its payload, so one command's output feeds the next.
pub fn read_json<T: DeserializeOwned>(path: &Path, what: &str) -> Result<T, Failure> {
    let text = if path == Path::new("-") {
        let mut s = String::new();
        std::io::stdin()
            .read_to_string(&mut s)
            .map_err(|e| Failure::usage("InputUnreadable", format!("{what} from stdin: {e}")))?;
        s
    } else {
        fs::read_to_string(path)
            .map_err(|e| Failure::usage("InputUnreadable", format!("{what} {}: {e}", path.display())))?
    };
    let malformed = |e: serde_json::Error| Failure::usage("MalformedInput", format!("{what} {}: {e}", path.display()));
    let mut value: Value = serde_json::from_str(&text).map_err(malformed)?;
    if let Value::Object(map) = &mut value {
        if map.contains_key("status") && map.contains_key("payload") {
            value = map.remove("payload").unwrap_or(Value::Null);
        }
    }
    serde_json::from_value(value).map_err(malformed)
}

/// Replaces `path` with `contents` via a temporary file in the same directory.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), Failure> {
    let io = |e: std::io::Error| Failure::domain("OutputError", format!("{}: {e}", path.display()));
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(contents).map_err(io)?;
    tmp.as_file().sync_all().map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

pub fn print_result(result: &CommandResult) {
    let text = serde_json::to_string_pretty(result).expect("values serialize");
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{text}");
    let _ = out.flush();
}
