use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use proptest::prelude::*;
use qenc_core::circuit::{EncodingCircuit, Gate, GateKind};
use qenc_core::simulator;

type M = DMatrix<Complex64>;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn m2(a: [[Complex64; 2]; 2]) -> M {
    M::from_row_slice(2, 2, &[a[0][0], a[0][1], a[1][0], a[1][1]])
}

fn id2() -> M {
    M::identity(2, 2)
}

/// Tensor product of per-qubit operators, qubit 0 leftmost.
fn kron_on(n: usize, ops: &[(usize, M)]) -> M {
    let mut out = M::identity(1, 1);
    for q in 0..n {
        let op = ops.iter().find(|(i, _)| *i == q).map(|(_, m)| m.clone()).unwrap_or_else(id2);
        out = out.kronecker(&op);
    }
    out
}

fn gate_matrix(n: usize, g: &Gate, x: &[f64], scale: f64) -> M {
    let theta = scale * g.data.iter().map(|&d| x[d]).product::<f64>();
    let (co, si) = ((theta / 2.0).cos(), (theta / 2.0).sin());
    let z = m2([[c(1.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(-1.0, 0.0)]]);
    let xm = m2([[c(0.0, 0.0), c(1.0, 0.0)], [c(1.0, 0.0), c(0.0, 0.0)]]);
    let p0 = m2([[c(1.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(0.0, 0.0)]]);
    let p1 = m2([[c(0.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(1.0, 0.0)]]);
    match g.kind {
        GateKind::RX => kron_on(n, &[(g.qubits[0], m2([[c(co, 0.0), c(0.0, -si)], [c(0.0, -si), c(co, 0.0)]]))]),
        GateKind::RY => kron_on(n, &[(g.qubits[0], m2([[c(co, 0.0), c(-si, 0.0)], [c(si, 0.0), c(co, 0.0)]]))]),
        GateKind::RZ => kron_on(n, &[(g.qubits[0], m2([[c(co, -si), c(0.0, 0.0)], [c(0.0, 0.0), c(co, si)]]))]),
        GateKind::H => {
            let h = std::f64::consts::FRAC_1_SQRT_2;
            kron_on(n, &[(g.qubits[0], m2([[c(h, 0.0), c(h, 0.0)], [c(h, 0.0), c(-h, 0.0)]]))])
        }
        GateKind::CNOT => {
            kron_on(n, &[(g.qubits[0], p0)]) + kron_on(n, &[(g.qubits[0], p1), (g.qubits[1], xm)])
        }
        GateKind::RZZ => {
            kron_on(n, &[]) * c(co, 0.0) + kron_on(n, &[(g.qubits[0], z.clone()), (g.qubits[1], z)]) * c(0.0, -si)
        }
    }
}

fn oracle_state(circuit: &EncodingCircuit, x: &[f64]) -> DVector<Complex64> {
    let dim = 1 << circuit.n_qubits;
    let mut psi = DVector::from_element(dim, c(0.0, 0.0));
    psi[0] = c(1.0, 0.0);
    for g in &circuit.gates {
        psi = gate_matrix(circuit.n_qubits, g, x, circuit.scale) * psi;
    }
    psi
}

fn gate(n: usize) -> impl Strategy<Value = Gate> {
    (0..GateKind::ALL.len(), 0..n, 0..n.max(2) - 1, 0..n, 0..n).prop_map(move |(k, a, b, d0, d1)| {
        let kind = GateKind::ALL[k];
        if kind.num_qubits() == 1 || n < 2 {
            let kind = if kind.num_qubits() == 2 { GateKind::RY } else { kind };
            let data = if kind.is_parameterized() { vec![d0] } else { vec![] };
            return Gate::new(kind, vec![a], data);
        }
        let b = if b >= a { b + 1 } else { b };
        let data = if kind.is_parameterized() { vec![d0, d1] } else { vec![] };
        Gate::new(kind, vec![a, b], data)
    })
}

fn case() -> impl Strategy<Value = (EncodingCircuit, Vec<f64>)> {
    (1usize..=4).prop_flat_map(|n| {
        (
            prop::collection::vec(gate(n), 0..=12),
            prop::collection::vec(-1.0f64..1.0, n),
            -3.0f64..3.0,
        )
            .prop_map(move |(gates, x, s)| (EncodingCircuit::with_gates(n, gates).with_scale(s), x))
    })
}

proptest! {
    #[test]
    fn matches_kronecker_oracle((circuit, x) in case()) {
        let state = simulator::run(&circuit, &x).unwrap();
        let expected = oracle_state(&circuit, &x);
        for (a, b) in state.amplitudes().iter().zip(expected.iter()) {
            prop_assert!((a - b).norm() < 1e-10);
        }
        prop_assert!((state.norm_sqr() - 1.0).abs() < 1e-12);
        for (q, z) in simulator::z_expectations(&state).into_iter().enumerate() {
            prop_assert!((-1.0..=1.0).contains(&z));
            let zop = kron_on(
                circuit.n_qubits,
                &[(q, m2([[c(1.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(-1.0, 0.0)]]))],
            );
            let ev = (expected.adjoint() * zop * &expected)[(0, 0)].re;
            prop_assert!((z - ev).abs() < 1e-10);
        }
        for p in simulator::single_qubit_purities(&state) {
            prop_assert!((0.5 - 1e-12..=1.0 + 1e-12).contains(&p));
        }
    }
}

#[test]
fn w_state_purities() {
    let third = (1.0f64 / 3.0).sqrt();
    let mut amps = vec![c(0.0, 0.0); 8];
    for i in [1, 2, 4] {
        amps[i] = c(third, 0.0);
    }
    let state = simulator::StateVector::from_amplitudes(amps).unwrap();
    for p in simulator::single_qubit_purities(&state) {
        assert!((p - 5.0 / 9.0).abs() < 1e-12);
    }
}

#[test]
fn rejects_bad_patches() {
    let circuit = EncodingCircuit::rx_layer(4);
    assert!(simulator::run(&circuit, &[0.0; 3]).is_err());
    assert!(simulator::run(&circuit, &[0.0, f64::NAN, 0.0, 0.0]).is_err());
}
