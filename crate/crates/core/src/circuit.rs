//! Encoding-circuit representation.
//!
//! A circuit is an ordered gate list over `n` qubits. Parameterized gates
//! carry indices into the flattened `k x k` patch; the simulator turns them
//! into angles `scale * x[d]` (single-qubit rotations) or
//! `scale * x[d1] * x[d2]` (`RZZ`). Gate order is execution order and is
//! never rewritten.
//!
//! The text format is line based:
//!
//! ```text
//! qubits 4
//! scale 1.0
//! RX q0 x0
//! RZZ q0 q1 x0 x1
//! CNOT q1 q2   # comment
//! ```

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The gate pool.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum GateKind {
    RX,
    RY,
    RZ,
    RZZ,
    H,
    CNOT,
}

impl GateKind {
    pub const ALL: [GateKind; 6] = [
        GateKind::RX,
        GateKind::RY,
        GateKind::RZ,
        GateKind::RZZ,
        GateKind::H,
        GateKind::CNOT,
    ];

    pub fn num_qubits(self) -> usize {
        match self {
            GateKind::RZZ | GateKind::CNOT => 2,
            _ => 1,
        }
    }

    pub fn num_data(self) -> usize {
        match self {
            GateKind::RX | GateKind::RY | GateKind::RZ => 1,
            GateKind::RZZ => 2,
            GateKind::H | GateKind::CNOT => 0,
        }
    }

    pub fn is_parameterized(self) -> bool {
        self.num_data() > 0
    }

    pub fn name(self) -> &'static str {
        match self {
            GateKind::RX => "RX",
            GateKind::RY => "RY",
            GateKind::RZ => "RZ",
            GateKind::RZZ => "RZZ",
            GateKind::H => "H",
            GateKind::CNOT => "CNOT",
        }
    }
}

impl fmt::Display for GateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for GateKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        GateKind::ALL
            .iter()
            .copied()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown gate `{s}`"))
    }
}

/// One gate with its qubit operands and patch-pixel wiring.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Gate {
    pub kind: GateKind,
    pub qubits: Vec<usize>,
    pub data: Vec<usize>,
}

impl Gate {
    pub fn new(kind: GateKind, qubits: Vec<usize>, data: Vec<usize>) -> Self {
        Gate { kind, qubits, data }
    }

    pub fn rx(q: usize, d: usize) -> Self {
        Gate::new(GateKind::RX, vec![q], vec![d])
    }

    pub fn ry(q: usize, d: usize) -> Self {
        Gate::new(GateKind::RY, vec![q], vec![d])
    }

    pub fn rz(q: usize, d: usize) -> Self {
        Gate::new(GateKind::RZ, vec![q], vec![d])
    }

    pub fn rzz(q0: usize, q1: usize, d0: usize, d1: usize) -> Self {
        Gate::new(GateKind::RZZ, vec![q0, q1], vec![d0, d1])
    }

    pub fn h(q: usize) -> Self {
        Gate::new(GateKind::H, vec![q], vec![])
    }

    pub fn cnot(control: usize, target: usize) -> Self {
        Gate::new(GateKind::CNOT, vec![control, target], vec![])
    }

    /// Builds a gate with the default wiring: pixel `q` drives the rotation
    /// on qubit `q`, and pixels `(i, j)` drive `RZZ` on qubits `(i, j)`.
    pub fn wired(kind: GateKind, qubits: &[usize]) -> Self {
        let data = if kind.is_parameterized() {
            qubits.to_vec()
        } else {
            Vec::new()
        };
        Gate::new(kind, qubits.to_vec(), data)
    }

    fn violations(&self, n_qubits: usize) -> Vec<String> {
        let mut out = Vec::new();
        let kind = self.kind;
        if self.qubits.len() != kind.num_qubits() {
            out.push(format!(
                "{kind} requires {} qubit(s), got {}",
                kind.num_qubits(),
                self.qubits.len()
            ));
        }
        if self.data.len() != kind.num_data() {
            out.push(format!(
                "{kind} requires {} data indices, got {}",
                kind.num_data(),
                self.data.len()
            ));
        }
        for &q in &self.qubits {
            if q >= n_qubits {
                out.push(format!("qubit index {q} out of range"));
            }
        }
        for &d in &self.data {
            if d >= n_qubits {
                out.push(format!("data index {d} out of range"));
            }
        }
        if self.qubits.len() == 2 && self.qubits[0] == self.qubits[1] {
            out.push("duplicate qubit".to_string());
        }
        out
    }
}

impl fmt::Display for Gate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.kind)?;
        for q in &self.qubits {
            write!(f, " q{q}")?;
        }
        for d in &self.data {
            write!(f, " x{d}")?;
        }
        Ok(())
    }
}

/// A single invariant violation reported by [`EncodingCircuit::validate`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    /// Offending gate, or `None` for circuit-level violations.
    pub gate: Option<usize>,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.gate {
            Some(i) => write!(f, "gate {i}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

/// Edit applied by the search to move between circuits.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Action {
    Add { gate: Gate, position: usize },
    Remove { position: usize },
    Replace { position: usize, gate: Gate },
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Action::Add { gate, position } => write!(f, "add {gate} @{position}"),
            Action::Remove { position } => write!(f, "remove @{position}"),
            Action::Replace { position, gate } => write!(f, "replace @{position} {gate}"),
        }
    }
}

pub const MAX_GATES_PER_QUBIT: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodingCircuit {
    pub n_qubits: usize,
    pub gates: Vec<Gate>,
    pub scale: f64,
    pub max_gates: usize,
}

impl EncodingCircuit {
    /// Empty circuit with scale 1 and the default gate cap of `5 n`.
    pub fn new(n_qubits: usize) -> Self {
        EncodingCircuit {
            n_qubits,
            gates: Vec::new(),
            scale: 1.0,
            max_gates: MAX_GATES_PER_QUBIT * n_qubits,
        }
    }

    pub fn with_gates(n_qubits: usize, gates: Vec<Gate>) -> Self {
        let mut c = EncodingCircuit::new(n_qubits);
        c.max_gates = c.max_gates.max(gates.len());
        c.gates = gates;
        c
    }

    pub fn with_scale(mut self, scale: f64) -> Self {
        self.scale = scale;
        self
    }

    pub fn with_max_gates(mut self, max_gates: usize) -> Self {
        self.max_gates = max_gates;
        self
    }

    /// One `RX` per qubit, pixel `q` on qubit `q`.
    pub fn rx_layer(n_qubits: usize) -> Self {
        EncodingCircuit::with_gates(n_qubits, (0..n_qubits).map(|q| Gate::rx(q, q)).collect())
    }

    pub fn len(&self) -> usize {
        self.gates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gates.is_empty()
    }

    pub fn validate(&self) -> std::result::Result<(), Vec<Violation>> {
        let mut out = Vec::new();
        if self.n_qubits == 0 {
            out.push(Violation {
                gate: None,
                message: "circuit needs at least one qubit".into(),
            });
        }
        if self.max_gates == 0 {
            out.push(Violation {
                gate: None,
                message: "max_gates must be positive".into(),
            });
        }
        if self.gates.len() > self.max_gates {
            out.push(Violation {
                gate: None,
                message: format!("{} gates exceed max_gates {}", self.gates.len(), self.max_gates),
            });
        }
        if !self.scale.is_finite() {
            out.push(Violation {
                gate: None,
                message: "scale must be finite".into(),
            });
        }
        for (i, g) in self.gates.iter().enumerate() {
            out.extend(g.violations(self.n_qubits).into_iter().map(|message| Violation {
                gate: Some(i),
                message,
            }));
        }
        if out.is_empty() {
            Ok(())
        } else {
            Err(out)
        }
    }

    pub fn is_valid(&self) -> bool {
        self.validate().is_ok()
    }

    /// Returns the edited circuit; `self` is left untouched.
    pub fn apply(&self, action: &Action) -> Result<EncodingCircuit> {
        let len = self.gates.len();
        let check_gate = |g: &Gate| -> Result<()> {
            match g.violations(self.n_qubits).first() {
                Some(v) => Err(Error::InvalidCircuit(v.clone())),
                None => Ok(()),
            }
        };
        let mut out = self.clone();
        match action {
            Action::Add { gate, position } => {
                if *position > len {
                    return Err(Error::PositionOutOfRange {
                        position: *position,
                        len,
                    });
                }
                if len >= self.max_gates {
                    return Err(Error::MaxGatesExceeded {
                        max_gates: self.max_gates,
                    });
                }
                check_gate(gate)?;
                out.gates.insert(*position, gate.clone());
            }
            Action::Remove { position } => {
                if *position >= len {
                    return Err(Error::PositionOutOfRange {
                        position: *position,
                        len,
                    });
                }
                out.gates.remove(*position);
            }
            Action::Replace { position, gate } => {
                if *position >= len {
                    return Err(Error::PositionOutOfRange {
                        position: *position,
                        len,
                    });
                }
                check_gate(gate)?;
                out.gates[*position] = gate.clone();
            }
        }
        Ok(out)
    }

    pub fn count_kind(&self, kind: GateKind) -> usize {
        self.gates.iter().filter(|g| g.kind == kind).count()
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("qubits {}\nscale {:?}\n", self.n_qubits, self.scale);
        for g in &self.gates {
            s.push_str(&g.to_string());
            s.push('\n');
        }
        s
    }

    /// Parses the line format. The gate cap is not part of the text and is
    /// set to `max(5 n, len)`.
    pub fn parse(text: &str) -> Result<EncodingCircuit> {
        let mut n_qubits: Option<usize> = None;
        let mut scale: Option<f64> = None;
        let mut gates = Vec::new();

        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |token: &str, message: String| Error::Parse {
                line: line_no,
                token: token.to_string(),
                message,
            };
            let tokens: Vec<&str> = line.split_whitespace().collect();
            let head = tokens[0];

            let Some(n) = n_qubits else {
                if head != "qubits" || tokens.len() != 2 {
                    return Err(err(head, "expected `qubits <n>` header".into()));
                }
                let n: usize = tokens[1]
                    .parse()
                    .map_err(|_| err(tokens[1], "qubit count must be a positive integer".into()))?;
                if n == 0 {
                    return Err(err(tokens[1], "qubit count must be positive".into()));
                }
                n_qubits = Some(n);
                continue;
            };
            if scale.is_none() {
                if head != "scale" || tokens.len() != 2 {
                    return Err(err(head, "expected `scale <f>` header".into()));
                }
                let f: f64 = tokens[1]
                    .parse()
                    .map_err(|_| err(tokens[1], "scale must be a decimal number".into()))?;
                if !f.is_finite() {
                    return Err(err(tokens[1], "scale must be finite".into()));
                }
                scale = Some(f);
                continue;
            }

            let kind: GateKind = head.parse().map_err(|m| err(head, m))?;
            let expected = 1 + kind.num_qubits() + kind.num_data();
            if tokens.len() != expected {
                let tok = tokens.get(expected).copied().unwrap_or(head);
                return Err(err(
                    tok,
                    format!(
                        "{kind} takes {} qubit(s) and {} data indices",
                        kind.num_qubits(),
                        kind.num_data()
                    ),
                ));
            }
            let parse_index = |tok: &str, prefix: char, what: &str| -> Result<usize> {
                let v: usize = tok
                    .strip_prefix(prefix)
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| err(tok, format!("expected {what} `{prefix}<index>`")))?;
                if v >= n {
                    return Err(err(tok, format!("{what} index out of range")));
                }
                Ok(v)
            };
            let qubit_toks = &tokens[1..1 + kind.num_qubits()];
            let data_toks = &tokens[1 + kind.num_qubits()..];
            let qubits = qubit_toks
                .iter()
                .map(|t| parse_index(t, 'q', "qubit"))
                .collect::<Result<Vec<_>>>()?;
            let data = data_toks
                .iter()
                .map(|t| parse_index(t, 'x', "data"))
                .collect::<Result<Vec<_>>>()?;
            if qubits.len() == 2 && qubits[0] == qubits[1] {
                return Err(err(qubit_toks[1], "duplicate qubit".into()));
            }
            gates.push(Gate { kind, qubits, data });
        }

        let (Some(n), Some(scale)) = (n_qubits, scale) else {
            return Err(Error::Parse {
                line: text.lines().count().max(1),
                token: String::new(),
                message: "missing `qubits` or `scale` header".into(),
            });
        };
        Ok(EncodingCircuit::with_gates(n, gates).with_scale(scale))
    }
}

impl fmt::Display for EncodingCircuit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

impl From<Violation> for Error {
    fn from(v: Violation) -> Error {
        Error::InvalidCircuit(v.to_string())
    }
}
