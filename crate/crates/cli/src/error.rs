use std::fmt;
use std::path::Path;

pub const EXIT_VALIDATION: u8 = 1;
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_IO: u8 = 3;

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub msg: String,
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        CliError {
            code: EXIT_USAGE,
            msg: msg.into(),
        }
    }

    pub fn io(path: &Path, e: std::io::Error) -> Self {
        CliError {
            code: EXIT_IO,
            msg: format!("{}: {e}", path.display()),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.msg)
    }
}

impl From<tmn::Error> for CliError {
    fn from(e: tmn::Error) -> Self {
        let code = match e {
            tmn::Error::Io(_) => EXIT_IO,
            _ => EXIT_USAGE,
        };
        CliError {
            code,
            msg: e.to_string(),
        }
    }
}

/// Attaches the path to I/O failures of a library call.
pub fn at<T>(path: &Path, r: tmn::Result<T>) -> Result<T, CliError> {
    r.map_err(|e| match e {
        tmn::Error::Io(io) => CliError::io(path, io),
        other => CliError::from(other).with_context(path),
    })
}

impl CliError {
    fn with_context(mut self, path: &Path) -> Self {
        self.msg = format!("{}: {}", path.display(), self.msg);
        self
    }
}
