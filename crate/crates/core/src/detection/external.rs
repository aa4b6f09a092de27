use std::fs::{self, File};
use std::io;
use std::process::{Command, Stdio};
use std::time::Duration;

use wait_timeout::ChildExt;

use crate::error::{Error, Result};
use crate::image::{f32_to_u8, save_png, ImageF32, PerturbationMap};
use crate::pmap;

use super::Reconstructor;

/// Longest captured stream kept in an adapter error.
const DIAGNOSTIC_LIMIT: usize = 4096;

/// Delegates reconstruction to a subprocess invoked as
/// `<program> <args..> <input.png> <output.pmap>`.
///
/// The tool must write a single-channel PMAP with the input's height and
/// width. Exit status, PMAP framing and shape are all checked; failures
/// carry the tool's stdout and stderr.
#[derive(Clone, Debug)]
pub struct ExternalReconstructor {
    program: String,
    args: Vec<String>,
    timeout: Duration,
}

impl ExternalReconstructor {
    pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(120);

    pub fn new(program: impl Into<String>, args: Vec<String>, timeout: Duration) -> Self {
        Self {
            program: program.into(),
            args,
            timeout,
        }
    }

    /// Splits `cmd` on whitespace. No shell quoting is interpreted.
    pub fn from_command(cmd: &str, timeout: Duration) -> Result<Self> {
        let mut parts = cmd.split_whitespace().map(str::to_string);
        let program = parts
            .next()
            .ok_or_else(|| Error::arg("external reconstructor command is empty"))?;
        Ok(Self::new(program, parts.collect(), timeout))
    }

    fn adapter_err(&self, message: String, dir: &std::path::Path) -> Error {
        let read = |name: &str| {
            let mut s = fs::read_to_string(dir.join(name)).unwrap_or_default();
            if s.len() > DIAGNOSTIC_LIMIT {
                let mut cut = DIAGNOSTIC_LIMIT;
                while !s.is_char_boundary(cut) {
                    cut -= 1;
                }
                s.truncate(cut);
                s.push_str("...");
            }
            s
        };
        Error::Adapter {
            message: format!("{}: {message}", self.program),
            diagnostics: format!("stdout:\n{}\nstderr:\n{}", read("stdout.txt"), read("stderr.txt")),
        }
    }
}

impl Reconstructor for ExternalReconstructor {
    fn reconstruct(&self, image: &ImageF32, _: Option<&ImageF32>) -> Result<PerturbationMap> {
        let dir = tempfile::tempdir().map_err(|e| Error::io(std::env::temp_dir(), e))?;
        let input = dir.path().join("input.png");
        let output = dir.path().join("output.pmap");
        save_png(&f32_to_u8(image), &input)?;
        let stdout = File::create(dir.path().join("stdout.txt")).map_err(|e| Error::io(dir.path(), e))?;
        let stderr = File::create(dir.path().join("stderr.txt")).map_err(|e| Error::io(dir.path(), e))?;

        let mut child = Command::new(&self.program)
            .args(&self.args)
            .arg(&input)
            .arg(&output)
            .stdin(Stdio::null())
            .stdout(stdout)
            .stderr(stderr)
            .spawn()
            .map_err(|e| match e.kind() {
                io::ErrorKind::NotFound => {
                    Error::Dependency(format!("external reconstructor {:?} not found", self.program))
                }
                _ => Error::io(&self.program, e),
            })?;

        let status = match child.wait_timeout(self.timeout).map_err(|e| Error::io(&self.program, e))? {
            Some(status) => status,
            None => {
                let _ = child.kill();
                let _ = child.wait();
                return Err(self.adapter_err(
                    format!("timed out after {:.1}s", self.timeout.as_secs_f64()),
                    dir.path(),
                ));
            }
        };
        if !status.success() {
            return Err(self.adapter_err(format!("exited with {status}"), dir.path()));
        }
        let bytes = match fs::read(&output) {
            Ok(b) => b,
            Err(e) => return Err(self.adapter_err(format!("no output map: {e}"), dir.path())),
        };
        let plane = match pmap::decode(&bytes) {
            Ok(p) => p,
            Err(e) => return Err(self.adapter_err(format!("malformed output map: {e}"), dir.path())),
        };
        if (plane.height(), plane.width()) != (image.height(), image.width()) {
            return Err(self.adapter_err(
                format!(
                    "output map is {}x{}, expected {}x{}",
                    plane.height(),
                    plane.width(),
                    image.height(),
                    image.width()
                ),
                dir.path(),
            ));
        }
        PerturbationMap::from_plane(&plane)
            .map_err(|e| self.adapter_err(format!("unusable output map: {e}"), dir.path()))
    }

    fn id(&self) -> String {
        let mut parts = vec![self.program.clone()];
        parts.extend(self.args.iter().cloned());
        format!("external:{}", parts.join(" "))
    }
}
