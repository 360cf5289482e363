//! Binary snapshots.
//!
//! Layout, all little-endian: magic `MKG4`, format version `u32`, `n` as
//! `u64`, then `L`, `t`, `mass` as `f64`, then twelve position-space fields
//! of `n⁴` `f64` each in the order of [`FIELD_NAMES`], row-major over
//! `(x¹, x², x³, x⁴)`.

use std::path::Path;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::evolution::State;
use crate::lattice::{GridSpec, ScalarField, VectorField};

pub const MAGIC: &[u8; 4] = b"MKG4";
pub const FORMAT_VERSION: u32 = 1;
pub const FIELD_NAMES: [&str; 12] = [
    "A1", "A2", "A3", "A4", "At1", "At2", "At3", "At4", "Re phi", "Im phi", "Re phit", "Im phit",
];
const HEADER_LEN: usize = 4 + 4 + 8 + 3 * 8;

/// Position samples of a state, exactly as stored on disk.
#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub n: usize,
    pub box_length: f64,
    pub t: f64,
    pub mass: f64,
    pub fields: [Vec<f64>; 12],
}

impl Snapshot {
    pub fn from_state(s: &State, mass: f64) -> Self {
        let re = |f: &ScalarField| f.position().values().iter().map(|v| v.re).collect();
        let im = |f: &ScalarField| f.position().values().iter().map(|v| v.im).collect();
        let a = s.a.components();
        let at = s.at.components();
        Self {
            n: s.grid().n(),
            box_length: s.grid().box_length(),
            t: s.t,
            mass,
            fields: [
                re(&a[0]),
                re(&a[1]),
                re(&a[2]),
                re(&a[3]),
                re(&at[0]),
                re(&at[1]),
                re(&at[2]),
                re(&at[3]),
                re(&s.phi),
                im(&s.phi),
                re(&s.phit),
                im(&s.phit),
            ],
        }
    }

    pub fn grid(&self) -> Result<GridSpec> {
        GridSpec::new(self.n, self.box_length)
    }

    pub fn to_state(&self) -> Result<State> {
        let grid = self.grid()?;
        let real = |i: usize| ScalarField::from_real_position(grid, &self.fields[i]);
        let complex = |i: usize| {
            let v = self.fields[i]
                .iter()
                .zip(&self.fields[i + 1])
                .map(|(&r, &m)| Complex64::new(r, m))
                .collect();
            ScalarField::from_position(grid, v, false)
        };
        let a = VectorField::new([real(0)?, real(1)?, real(2)?, real(3)?])?;
        let at = VectorField::new([real(4)?, real(5)?, real(6)?, real(7)?])?;
        State::new(self.t, a, at, complex(8)?, complex(10)?)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let len = self.n.pow(4);
        let mut out = Vec::with_capacity(HEADER_LEN + 12 * 8 * len);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.n as u64).to_le_bytes());
        for v in [self.box_length, self.t, self.mass] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for f in &self.fields {
            for v in f {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let fail = |msg: String| Err(Error::Format(msg));
        if bytes.len() < HEADER_LEN {
            return fail(format!("truncated header ({} bytes)", bytes.len()));
        }
        if &bytes[..4] != MAGIC {
            return fail("bad magic bytes".into());
        }
        let word = |at: usize| -> [u8; 8] { bytes[at..at + 8].try_into().expect("8 bytes") };
        let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
        if version != FORMAT_VERSION {
            return fail(format!(
                "format version {version} not supported (reader expects {FORMAT_VERSION})"
            ));
        }
        let n = u64::from_le_bytes(word(8)) as usize;
        let grid_len = n.checked_pow(4).filter(|_| n > 0 && n <= 1 << 12);
        let Some(len) = grid_len else {
            return fail(format!("implausible grid size n = {n}"));
        };
        let expected = HEADER_LEN + 12 * 8 * len;
        if bytes.len() != expected {
            return fail(format!("expected {expected} bytes for n = {n}, found {}", bytes.len()));
        }
        let box_length = f64::from_le_bytes(word(16));
        let t = f64::from_le_bytes(word(24));
        let mass = f64::from_le_bytes(word(32));
        let fields = std::array::from_fn(|f| {
            let start = HEADER_LEN + f * 8 * len;
            (0..len).map(|i| f64::from_le_bytes(word(start + 8 * i))).collect()
        });
        Ok(Self {
            n,
            box_length,
            t,
            mass,
            fields,
        })
    }

    pub fn summary(&self) -> SnapshotSummary {
        let fields = FIELD_NAMES
            .iter()
            .zip(&self.fields)
            .map(|(&name, f)| FieldSummary {
                name,
                min: f.iter().cloned().fold(f64::INFINITY, f64::min),
                max: f.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
                rms: (f.iter().map(|v| v * v).sum::<f64>() / f.len() as f64).sqrt(),
            })
            .collect();
        SnapshotSummary {
            format_version: FORMAT_VERSION,
            n: self.n,
            box_length: self.box_length,
            t: self.t,
            mass: self.mass,
            fields,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct FieldSummary {
    pub name: &'static str,
    pub min: f64,
    pub max: f64,
    pub rms: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct SnapshotSummary {
    pub format_version: u32,
    pub n: usize,
    #[serde(rename = "L")]
    pub box_length: f64,
    pub t: f64,
    pub mass: f64,
    pub fields: Vec<FieldSummary>,
}

pub fn persist(snapshot: &Snapshot, path: &Path) -> Result<()> {
    std::fs::write(path, snapshot.to_bytes())?;
    Ok(())
}

pub fn persist_state(s: &State, mass: f64, path: &Path) -> Result<()> {
    persist(&Snapshot::from_state(s, mass), path)
}

pub fn load(path: &Path) -> Result<Snapshot> {
    Snapshot::from_bytes(&std::fs::read(path)?)
}
