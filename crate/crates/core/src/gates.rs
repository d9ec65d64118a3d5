//! Single-site measurement rotations and basis assignments.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};

/// Most non-reference sites a single rotated amplitude may enumerate.
pub const DEFAULT_ROTATED_SITES_LIMIT: usize = 16;

const UNITARITY_TOLERANCE: f64 = 1e-8;

pub type GateMatrix = [[Complex64; 2]; 2];

const fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// A 2×2 unitary, indexed `(outcome, reference state)`.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitaryGate {
    label: String,
    entries: GateMatrix,
}

impl UnitaryGate {
    /// Validates unitarity to within `1e-8`.
    pub fn new(label: impl Into<String>, entries: GateMatrix) -> Result<Self> {
        let label = label.into();
        if label.is_empty() || label.chars().any(char::is_whitespace) {
            return Err(Error::invalid(format!(
                "gate label {label:?} must be a single non-empty token"
            )));
        }
        let gate = Self { label, entries };
        let deviation = gate.unitarity_deviation();
        if deviation.is_nan() || deviation > UNITARITY_TOLERANCE {
            return Err(Error::NonUnitary {
                label: gate.label,
                deviation,
            });
        }
        Ok(gate)
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn entries(&self) -> &GateMatrix {
        &self.entries
    }

    pub fn entry(&self, row: usize, col: usize) -> Complex64 {
        self.entries[row][col]
    }

    /// Largest entry-wise deviation of `U†U` from the identity.
    pub fn unitarity_deviation(&self) -> f64 {
        let u = &self.entries;
        let mut worst = 0.0f64;
        for i in 0..2 {
            for j in 0..2 {
                let mut s = Complex64::new(0.0, 0.0);
                for row in u {
                    s += row[i].conj() * row[j];
                }
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((s - target).norm());
            }
        }
        worst
    }

    pub fn is_identity(&self) -> bool {
        self.entries == [[c(1.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(1.0, 0.0)]]
    }
}

/// Gates by label. Labels are case-sensitive.
#[derive(Debug, Clone, PartialEq)]
pub struct GateRegistry {
    gates: BTreeMap<String, UnitaryGate>,
}

/// `Z` is the identity, `X` the Hadamard gate and `Y` the gate rotating into
/// the σ^y eigenbasis, `(1/√2)[[1, -i], [1, i]]`.
pub fn default_gate_registry() -> GateRegistry {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut gates = BTreeMap::new();
    let mut put = |label: &str, entries: GateMatrix| {
        gates.insert(
            label.to_string(),
            UnitaryGate {
                label: label.to_string(),
                entries,
            },
        );
    };
    put(
        "Z",
        [[c(1.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(1.0, 0.0)]],
    );
    put("X", [[c(s, 0.0), c(s, 0.0)], [c(s, 0.0), c(-s, 0.0)]]);
    put("Y", [[c(s, 0.0), c(0.0, -s)], [c(s, 0.0), c(0.0, s)]]);
    GateRegistry { gates }
}

impl Default for GateRegistry {
    fn default() -> Self {
        default_gate_registry()
    }
}

impl GateRegistry {
    /// Adds or replaces the gate stored under `label`.
    pub fn register_gate(&mut self, label: &str, entries: GateMatrix) -> Result<()> {
        let gate = UnitaryGate::new(label, entries)?;
        self.gates.insert(label.to_string(), gate);
        Ok(())
    }

    /// Builder-style [`GateRegistry::register_gate`].
    pub fn with_gate(mut self, label: &str, entries: GateMatrix) -> Result<Self> {
        self.register_gate(label, entries)?;
        Ok(self)
    }

    pub fn get(&self, label: &str) -> Result<&UnitaryGate> {
        self.gates
            .get(label)
            .ok_or_else(|| Error::UnknownGate(label.to_string()))
    }

    pub fn contains(&self, label: &str) -> bool {
        self.gates.contains_key(label)
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.gates.keys().map(String::as_str)
    }
}

/// One basis label per site.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BasisAssignment(Vec<String>);

impl BasisAssignment {
    pub fn new<S: Into<String>>(labels: impl IntoIterator<Item = S>) -> Result<Self> {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        if labels.is_empty() {
            return Err(Error::invalid("a basis assignment needs at least one site"));
        }
        if let Some(bad) = labels
            .iter()
            .find(|l| l.is_empty() || l.chars().any(char::is_whitespace))
        {
            return Err(Error::invalid(format!("malformed basis label {bad:?}")));
        }
        Ok(Self(labels))
    }

    /// All sites measured in the reference (`Z`) basis.
    pub fn reference(n: usize) -> Self {
        Self(vec!["Z".to_string(); n])
    }

    pub fn labels(&self) -> &[String] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl FromStr for BasisAssignment {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::new(s.split_whitespace())
    }
}

impl fmt::Display for BasisAssignment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0.join(" "))
    }
}

/// Resolved form of a [`BasisAssignment`]: only the sites whose gate is not
/// the identity, with their matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct RotationPlan {
    num_sites: usize,
    sites: Vec<usize>,
    gates: Vec<GateMatrix>,
}

impl RotationPlan {
    pub fn new(registry: &GateRegistry, basis: &BasisAssignment) -> Result<Self> {
        Self::with_limit(registry, basis, DEFAULT_ROTATED_SITES_LIMIT)
    }

    pub fn with_limit(
        registry: &GateRegistry,
        basis: &BasisAssignment,
        limit: usize,
    ) -> Result<Self> {
        let mut sites = Vec::new();
        let mut gates = Vec::new();
        for (j, label) in basis.labels().iter().enumerate() {
            let gate = registry.get(label)?;
            if !gate.is_identity() {
                sites.push(j);
                gates.push(gate.entries);
            }
        }
        if sites.len() > limit {
            return Err(Error::Intractable {
                n: sites.len(),
                limit,
            });
        }
        Ok(Self {
            num_sites: basis.len(),
            sites,
            gates,
        })
    }

    pub fn num_sites(&self) -> usize {
        self.num_sites
    }

    /// Sites carrying a non-identity gate, ascending.
    pub fn rotated_sites(&self) -> &[usize] {
        &self.sites
    }

    pub fn gates(&self) -> &[GateMatrix] {
        &self.gates
    }

    pub fn is_identity(&self) -> bool {
        self.sites.is_empty()
    }

    /// Applies the product rotation to a dense amplitude vector in canonical
    /// order, one site at a time.
    pub fn apply_dense(&self, amplitudes: &[Complex64]) -> Result<Vec<Complex64>> {
        check_len(
            "amplitude vector",
            1usize << self.num_sites,
            amplitudes.len(),
        )?;
        let mut out = amplitudes.to_vec();
        for (&site, u) in self.sites.iter().zip(&self.gates) {
            let mask = 1usize << (self.num_sites - 1 - site);
            for i0 in 0..out.len() {
                if i0 & mask != 0 {
                    continue;
                }
                let i1 = i0 | mask;
                let (a0, a1) = (out[i0], out[i1]);
                out[i0] = u[0][0] * a0 + u[0][1] * a1;
                out[i1] = u[1][0] * a0 + u[1][1] * a1;
            }
        }
        Ok(out)
    }
}
