//! Dense statevector simulation.
//!
//! Basis ordering puts qubit 0 in the most significant bit. Rotations use
//! `R_A(theta) = exp(-i theta A / 2)` for `A` in `{X, Y, Z, Z⊗Z}`.

use num_complex::Complex64;

use crate::circuit::{EncodingCircuit, Gate, GateKind};
use crate::error::{Error, Result};

pub const MAX_QUBITS: usize = 12;

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    n_qubits: usize,
    amplitudes: Vec<Complex64>,
}

impl StateVector {
    /// `|0...0>` on `n_qubits` qubits.
    pub fn zero(n_qubits: usize) -> Result<Self> {
        if n_qubits == 0 || n_qubits > MAX_QUBITS {
            return Err(Error::TooManyQubits(n_qubits));
        }
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); 1 << n_qubits];
        amplitudes[0] = Complex64::new(1.0, 0.0);
        Ok(StateVector {
            n_qubits,
            amplitudes,
        })
    }

    /// Wraps raw amplitudes; the caller is responsible for normalization.
    pub fn from_amplitudes(amplitudes: Vec<Complex64>) -> Result<Self> {
        let len = amplitudes.len();
        if len < 2 || !len.is_power_of_two() {
            return Err(Error::Config(format!(
                "amplitude vector length {len} is not a power of two"
            )));
        }
        let n_qubits = len.trailing_zeros() as usize;
        if n_qubits > MAX_QUBITS {
            return Err(Error::TooManyQubits(n_qubits));
        }
        Ok(StateVector {
            n_qubits,
            amplitudes,
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    #[inline]
    fn mask(&self, qubit: usize) -> usize {
        1 << (self.n_qubits - 1 - qubit)
    }

    /// Applies a 2x2 unitary `[[m00, m01], [m10, m11]]` to `qubit`.
    pub fn apply_single(&mut self, qubit: usize, m: [[Complex64; 2]; 2]) {
        let mask = self.mask(qubit);
        for i in 0..self.amplitudes.len() {
            if i & mask == 0 {
                let a0 = self.amplitudes[i];
                let a1 = self.amplitudes[i | mask];
                self.amplitudes[i] = m[0][0] * a0 + m[0][1] * a1;
                self.amplitudes[i | mask] = m[1][0] * a0 + m[1][1] * a1;
            }
        }
    }

    pub fn apply_rx(&mut self, qubit: usize, theta: f64) {
        let (s, c) = (theta / 2.0).sin_cos();
        let c = Complex64::new(c, 0.0);
        let ms = Complex64::new(0.0, -s);
        self.apply_single(qubit, [[c, ms], [ms, c]]);
    }

    pub fn apply_ry(&mut self, qubit: usize, theta: f64) {
        let (s, c) = (theta / 2.0).sin_cos();
        let c = Complex64::new(c, 0.0);
        let s = Complex64::new(s, 0.0);
        self.apply_single(qubit, [[c, -s], [s, c]]);
    }

    pub fn apply_rz(&mut self, qubit: usize, theta: f64) {
        let mask = self.mask(qubit);
        let p0 = Complex64::from_polar(1.0, -theta / 2.0);
        let p1 = Complex64::from_polar(1.0, theta / 2.0);
        for (i, a) in self.amplitudes.iter_mut().enumerate() {
            *a *= if i & mask == 0 { p0 } else { p1 };
        }
    }

    pub fn apply_rzz(&mut self, q0: usize, q1: usize, theta: f64) {
        let (m0, m1) = (self.mask(q0), self.mask(q1));
        let even = Complex64::from_polar(1.0, -theta / 2.0);
        let odd = Complex64::from_polar(1.0, theta / 2.0);
        for (i, a) in self.amplitudes.iter_mut().enumerate() {
            let parity = ((i & m0) != 0) ^ ((i & m1) != 0);
            *a *= if parity { odd } else { even };
        }
    }

    pub fn apply_h(&mut self, qubit: usize) {
        let r = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        self.apply_single(qubit, [[r, r], [r, -r]]);
    }

    pub fn apply_cnot(&mut self, control: usize, target: usize) {
        let (mc, mt) = (self.mask(control), self.mask(target));
        for i in 0..self.amplitudes.len() {
            if i & mc != 0 && i & mt == 0 {
                self.amplitudes.swap(i, i | mt);
            }
        }
    }

    /// Applies one circuit gate with pixel values taken from `patch`.
    pub fn apply_gate(&mut self, gate: &Gate, patch: &[f64], scale: f64) {
        let q = &gate.qubits;
        let d = &gate.data;
        match gate.kind {
            GateKind::RX => self.apply_rx(q[0], scale * patch[d[0]]),
            GateKind::RY => self.apply_ry(q[0], scale * patch[d[0]]),
            GateKind::RZ => self.apply_rz(q[0], scale * patch[d[0]]),
            GateKind::RZZ => self.apply_rzz(q[0], q[1], scale * patch[d[0]] * patch[d[1]]),
            GateKind::H => self.apply_h(q[0]),
            GateKind::CNOT => self.apply_cnot(q[0], q[1]),
        }
    }

    /// `<Z_q>` for every qubit, computed exactly from the amplitudes.
    pub fn z_expectations(&self) -> Vec<f64> {
        let mut z = vec![0.0; self.n_qubits];
        for (i, a) in self.amplitudes.iter().enumerate() {
            let p = a.norm_sqr();
            for (q, zq) in z.iter_mut().enumerate() {
                if i & self.mask(q) == 0 {
                    *zq += p;
                } else {
                    *zq -= p;
                }
            }
        }
        z.iter().map(|v| v.clamp(-1.0, 1.0)).collect()
    }

    /// `Tr(rho_q^2)` of each single-qubit reduced density matrix.
    pub fn single_qubit_purities(&self) -> Vec<f64> {
        (0..self.n_qubits)
            .map(|q| {
                let mask = self.mask(q);
                let (mut p0, mut p1) = (0.0, 0.0);
                let mut coh = Complex64::new(0.0, 0.0);
                for i in 0..self.amplitudes.len() {
                    if i & mask == 0 {
                        let a0 = self.amplitudes[i];
                        let a1 = self.amplitudes[i | mask];
                        p0 += a0.norm_sqr();
                        p1 += a1.norm_sqr();
                        coh += a0 * a1.conj();
                    }
                }
                (p0 * p0 + p1 * p1 + 2.0 * coh.norm_sqr()).clamp(0.5, 1.0)
            })
            .collect()
    }
}

/// Simulates `circuit` on `patch` starting from `|0...0>`.
pub fn run(circuit: &EncodingCircuit, patch: &[f64]) -> Result<StateVector> {
    if patch.len() != circuit.n_qubits {
        return Err(Error::PatchLength {
            expected: circuit.n_qubits,
            got: patch.len(),
        });
    }
    if let Some(index) = patch.iter().position(|x| !x.is_finite()) {
        return Err(Error::NonFinite { index });
    }
    let mut state = StateVector::zero(circuit.n_qubits)?;
    for gate in &circuit.gates {
        state.apply_gate(gate, patch, circuit.scale);
    }
    Ok(state)
}

pub fn z_expectations(state: &StateVector) -> Vec<f64> {
    state.z_expectations()
}

pub fn single_qubit_purities(state: &StateVector) -> Vec<f64> {
    state.single_qubit_purities()
}
