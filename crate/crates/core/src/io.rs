//! JSON files for models, policies, solutions and reports.
//!
//! Floats are always written with 17 significant digits (`{:.16e}`), which
//! round-trips every finite `f64` exactly; parsing uses serde_json's
//! correctly-rounded float path.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::ser::{Formatter, PrettyFormatter};

use crate::error::{Error, Result};
use crate::mdp::{Mdp, Policy};
use crate::solver::ValueSolution;

/// Pretty JSON with every float written as `d.dddddddddddddddde±x`.
pub struct SigDigitsFormatter {
    inner: PrettyFormatter<'static>,
}

impl Default for SigDigitsFormatter {
    fn default() -> Self {
        Self {
            inner: PrettyFormatter::new(),
        }
    }
}

impl Formatter for SigDigitsFormatter {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        if value.is_finite() {
            write!(writer, "{value:.16e}")
        } else {
            writer.write_all(b"null")
        }
    }

    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, f64::from(value))
    }

    fn begin_array<W: ?Sized + Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.inner.begin_array(writer)
    }

    fn end_array<W: ?Sized + Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.inner.end_array(writer)
    }

    fn begin_array_value<W: ?Sized + Write>(&mut self, writer: &mut W, first: bool) -> io::Result<()> {
        self.inner.begin_array_value(writer, first)
    }

    fn end_array_value<W: ?Sized + Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.inner.end_array_value(writer)
    }

    fn begin_object<W: ?Sized + Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.inner.begin_object(writer)
    }

    fn end_object<W: ?Sized + Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.inner.end_object(writer)
    }

    fn begin_object_key<W: ?Sized + Write>(&mut self, writer: &mut W, first: bool) -> io::Result<()> {
        self.inner.begin_object_key(writer, first)
    }

    fn begin_object_value<W: ?Sized + Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.inner.begin_object_value(writer)
    }

    fn end_object_value<W: ?Sized + Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.inner.end_object_value(writer)
    }
}

/// Serializes `value` with [`SigDigitsFormatter`], newline-terminated.
pub fn to_json_string<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, SigDigitsFormatter::default());
    value.serialize(&mut ser)?;
    buf.push(b'\n');
    Ok(String::from_utf8(buf).expect("serde_json emits UTF-8"))
}

pub fn write_json<T: Serialize + ?Sized>(value: &T, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, to_json_string(value)?)?;
    Ok(())
}

/// On-disk layout of an [`Mdp`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MdpFile {
    pub n_states: usize,
    pub n_actions: usize,
    pub discount: f64,
    pub reward: Vec<Vec<f64>>,
    pub transition: Vec<Vec<Vec<f64>>>,
    pub initial_dist: Vec<f64>,
}

impl From<&Mdp> for MdpFile {
    fn from(m: &Mdp) -> Self {
        let (ns, na) = (m.n_states(), m.n_actions());
        Self {
            n_states: ns,
            n_actions: na,
            discount: m.discount(),
            reward: (0..ns).map(|s| m.reward_row(s).to_vec()).collect(),
            transition: (0..ns)
                .map(|s| (0..na).map(|a| m.transition_row(s, a).to_vec()).collect())
                .collect(),
            initial_dist: m.initial_dist().to_vec(),
        }
    }
}

impl TryFrom<MdpFile> for Mdp {
    type Error = Error;

    fn try_from(f: MdpFile) -> Result<Self> {
        let (ns, na) = (f.n_states, f.n_actions);
        let shape = |field: &str, detail: String| Error::Shape(format!("field `{field}`: {detail}"));
        if f.reward.len() != ns {
            return Err(shape("reward", format!("{} rows, expected {ns}", f.reward.len())));
        }
        if let Some(s) = f.reward.iter().position(|r| r.len() != na) {
            return Err(shape("reward", format!("row {s} has {} entries, expected {na}", f.reward[s].len())));
        }
        if f.transition.len() != ns {
            return Err(shape("transition", format!("{} rows, expected {ns}", f.transition.len())));
        }
        for (s, per_state) in f.transition.iter().enumerate() {
            if per_state.len() != na {
                return Err(shape("transition", format!("state {s} has {} actions, expected {na}", per_state.len())));
            }
            if let Some(a) = per_state.iter().position(|row| row.len() != ns) {
                return Err(shape("transition", format!("row ({s}, {a}) has {} entries, expected {ns}", per_state[a].len())));
            }
        }
        if f.initial_dist.len() != ns {
            return Err(shape("initial_dist", format!("{} entries, expected {ns}", f.initial_dist.len())));
        }
        let transition = f.transition.into_iter().flatten().flatten().collect();
        Mdp::new(ns, na, transition, f.reward.concat(), f.initial_dist, f.discount)
    }
}

pub fn mdp_to_string(m: &Mdp) -> Result<String> {
    to_json_string(&MdpFile::from(m))
}

/// Parses and validates an MDP document.
pub fn mdp_from_str(text: &str) -> Result<Mdp> {
    let file: MdpFile = serde_json::from_str(text)?;
    Mdp::try_from(file)
}

pub fn load_mdp(path: impl AsRef<Path>) -> Result<Mdp> {
    mdp_from_str(&fs::read_to_string(path)?)
}

pub fn save_mdp(m: &Mdp, path: impl AsRef<Path>) -> Result<()> {
    write_json(&MdpFile::from(m), path)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PolicyFile {
    pub probs: Vec<Vec<f64>>,
}

impl From<&Policy> for PolicyFile {
    fn from(p: &Policy) -> Self {
        Self {
            probs: p.rows().map(<[f64]>::to_vec).collect(),
        }
    }
}

pub fn policy_from_str(text: &str) -> Result<Policy> {
    let file: PolicyFile = serde_json::from_str(text)?;
    Policy::from_rows(&file.probs)
}

pub fn load_policy(path: impl AsRef<Path>) -> Result<Policy> {
    policy_from_str(&fs::read_to_string(path)?)
}

pub fn save_policy(p: &Policy, path: impl AsRef<Path>) -> Result<()> {
    write_json(&PolicyFile::from(p), path)
}

/// On-disk layout of a [`ValueSolution`].
#[derive(Debug, Clone, Serialize)]
pub struct SolutionFile {
    pub q: Vec<Vec<f64>>,
    pub v: Vec<f64>,
    pub policy: Vec<Vec<f64>>,
    pub iterations: usize,
    pub residual: f64,
    pub interior_flags: Vec<bool>,
}

impl From<&ValueSolution> for SolutionFile {
    fn from(sol: &ValueSolution) -> Self {
        Self {
            q: (0..sol.n_states()).map(|s| sol.q_row(s).to_vec()).collect(),
            v: sol.v.clone(),
            policy: sol.policy.rows().map(<[f64]>::to_vec).collect(),
            iterations: sol.iterations,
            residual: sol.residual,
            interior_flags: sol.interior_flags.clone(),
        }
    }
}
