//! Sequence files, run manifests and atomic output.
//!
//! Sequences are stored as phases, either in units of `2π/n` (`repr = "s"`,
//! the default) or in radians (`repr = "theta"`). Values are written with
//! 12 significant digits.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::seqcore::{ComplexSequence, PhaseSequence, SRepresentation};

pub const SIGNIFICANT_DIGITS: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Repr {
    #[default]
    S,
    Theta,
}

impl fmt::Display for Repr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Repr::S => "s",
            Repr::Theta => "theta",
        })
    }
}

impl FromStr for Repr {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "s" => Ok(Repr::S),
            "theta" => Ok(Repr::Theta),
            other => Err(Error::InvalidParameter(format!("unknown repr `{other}` (expected s or theta)"))),
        }
    }
}

/// Provenance attached to every output file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config: BTreeMap<String, Value>,
    pub version: String,
    pub rng_seed: Option<u64>,
    pub started_unix_ms: u128,
    pub finished_unix_ms: Option<u128>,
}

impl RunManifest {
    pub fn new(command: impl Into<String>, rng_seed: Option<u64>) -> Self {
        Self {
            command: command.into(),
            config: BTreeMap::new(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            rng_seed,
            started_unix_ms: unix_ms(),
            finished_unix_ms: None,
        }
    }

    pub fn with(mut self, key: &str, value: impl Serialize) -> Self {
        self.set(key, value);
        self
    }

    pub fn set(&mut self, key: &str, value: impl Serialize) {
        let v = serde_json::to_value(value).unwrap_or(Value::Null);
        self.config.insert(key.to_string(), v);
    }

    pub fn finish(&mut self) {
        self.finished_unix_ms = Some(unix_ms());
    }

    /// True when both manifests describe the same run, ignoring timestamps.
    pub fn same_run(&self, other: &Self) -> bool {
        self.command == other.command
            && self.config == other.config
            && self.version == other.version
            && self.rng_seed == other.rng_seed
    }
}

fn unix_ms() -> u128 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis())
        .unwrap_or(0)
}

/// On-disk sequence record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceFile {
    pub n: usize,
    pub repr: Repr,
    pub values: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub manifest: Option<RunManifest>,
}

impl SequenceFile {
    /// Records the phases of `x` in the given representation.
    pub fn from_sequence(x: &ComplexSequence, repr: Repr) -> Result<Self> {
        let phases = PhaseSequence::new(x.phases())?;
        let values = match repr {
            Repr::S => phases.to_s().values().to_vec(),
            Repr::Theta => phases.thetas().to_vec(),
        };
        Ok(Self {
            n: x.len(),
            repr,
            values: values.into_iter().map(round_sig).collect(),
            manifest: None,
        })
    }

    pub fn with_manifest(mut self, manifest: RunManifest) -> Self {
        self.manifest = Some(manifest);
        self
    }

    pub fn to_sequence(&self) -> Result<ComplexSequence> {
        if self.values.len() != self.n {
            return Err(Error::LengthMismatch {
                expected: self.n,
                got: self.values.len(),
            });
        }
        match self.repr {
            Repr::S => Ok(SRepresentation::new(self.values.clone())?.to_complex()),
            Repr::Theta => Ok(PhaseSequence::new(self.values.clone())?.to_complex()),
        }
    }

    pub fn to_json(&self, compact: bool) -> Result<String> {
        Ok(if compact {
            serde_json::to_string(self)?
        } else {
            serde_json::to_string_pretty(self)?
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse {
            line: e.line(),
            message: e.to_string(),
        })
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!("# n={} repr={}\n", self.n, self.repr);
        for v in &self.values {
            out.push_str(&format_sig(*v));
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut header: Option<(usize, Repr)> = None;
        let mut values = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() {
                continue;
            }
            if let Some(rest) = trimmed.strip_prefix('#') {
                if header.is_none() && values.is_empty() {
                    header = Some(parse_header(rest, line)?);
                }
                continue;
            }
            if header.is_none() {
                return Err(Error::Parse {
                    line,
                    message: "expected header `# n=<n> repr=<s|theta>` before values".into(),
                });
            }
            let v: f64 = trimmed.parse().map_err(|_| Error::Parse {
                line,
                message: format!("invalid number `{trimmed}`"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    line,
                    message: format!("non-finite value `{trimmed}`"),
                });
            }
            values.push(v);
        }
        let (n, repr) = header.ok_or(Error::Parse {
            line: 1,
            message: "missing header `# n=<n> repr=<s|theta>`".into(),
        })?;
        if values.len() != n {
            return Err(Error::Parse {
                line: text.lines().count().max(1),
                message: format!("header declares n={n} but {} value(s) follow", values.len()),
            });
        }
        Ok(Self {
            n,
            repr,
            values,
            manifest: None,
        })
    }

    /// Parses JSON or CSV, chosen by the first non-blank character.
    pub fn parse(text: &str) -> Result<Self> {
        if text.trim_start().starts_with('{') {
            Self::from_json(text)
        } else {
            Self::from_csv(text)
        }
    }
}

fn parse_header(rest: &str, line: usize) -> Result<(usize, Repr)> {
    let mut n = None;
    let mut repr = Repr::S;
    for field in rest.split_whitespace() {
        let (key, value) = field.split_once('=').ok_or_else(|| Error::Parse {
            line,
            message: format!("malformed header field `{field}`"),
        })?;
        match key {
            "n" => {
                n = Some(value.parse::<usize>().map_err(|_| Error::Parse {
                    line,
                    message: format!("invalid length `{value}`"),
                })?)
            }
            "repr" => {
                repr = value.parse().map_err(|e: Error| Error::Parse {
                    line,
                    message: e.to_string(),
                })?
            }
            _ => {}
        }
    }
    let n = n.ok_or_else(|| Error::Parse {
        line,
        message: "header lacks `n=`".into(),
    })?;
    Ok((n, repr))
}

/// Rounds to [`SIGNIFICANT_DIGITS`] significant digits.
pub fn round_sig(x: f64) -> f64 {
    format_sig(x).parse().unwrap_or(x)
}

pub fn format_sig(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let s = format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x);
    let v: f64 = s.parse().unwrap_or(x);
    format!("{v}")
}

/// Writes `contents` to a temporary sibling of `path` and renames it into place.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let name = path
        .file_name()
        .ok_or_else(|| Error::InvalidParameter(format!("not a file path: {}", path.display())))?
        .to_string_lossy();
    let tmp = dir.join(format!(".{name}.{}.tmp", std::process::id()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(contents)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path).map_err(|e| {
        let _ = fs::remove_file(&tmp);
        Error::Io(e)
    })
}

/// `out.csv` → `out.csv.manifest.json`.
pub fn manifest_sidecar(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_os_string();
    s.push(".manifest.json");
    PathBuf::from(s)
}

/// Writes a CSV body next to its manifest sidecar.
pub fn write_csv_with_manifest(path: &Path, body: &str, manifest: &RunManifest) -> Result<()> {
    write_atomic(path, body.as_bytes())?;
    let json = serde_json::to_string_pretty(manifest)?;
    write_atomic(&manifest_sidecar(path), json.as_bytes())
}

/// Reads a sequence file, choosing the format from the contents.
pub fn read_sequence_file(path: &Path) -> Result<SequenceFile> {
    let text = fs::read_to_string(path)?;
    SequenceFile::parse(&text)
}

pub fn write_sequence_file(path: &Path, file: &SequenceFile, compact: bool) -> Result<()> {
    let is_csv = path
        .extension()
        .map(|e| e.eq_ignore_ascii_case("csv"))
        .unwrap_or(false);
    if is_csv {
        let mut bare = file.clone();
        let manifest = bare.manifest.take();
        match manifest {
            Some(m) => write_csv_with_manifest(path, &bare.to_csv(), &m),
            None => write_atomic(path, bare.to_csv().as_bytes()),
        }
    } else {
        write_atomic(path, file.to_json(compact)?.as_bytes())
    }
}
