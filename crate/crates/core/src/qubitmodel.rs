//! Qubit abstraction of the teleportation scheme and its comparison with
//! the cavity simulation.
//!
//! Dictionary: |b⟩ → |0⟩, |c⟩ → |1⟩ for atoms; even/odd cavity kets
//! |+⟩ → |0⟩_C, |−⟩ → |1⟩_C. The dispersive passes become a three-qubit XOR
//! |A⟩|B⟩|C⟩ → |A⊕C⟩|B⊕C⟩|C⟩, and the injection plus |e⟩ probe detection
//! becomes a projection of the cavity qubit onto (|0⟩_C + |1⟩_C)/√2.

use std::f64::consts::FRAC_1_SQRT_2;

use crate::error::{Result, SimError};
use crate::fockspace::{coherent_state, CavityMode, ComplexAmp, CompositeState, Level, Subsystem};
use crate::protocols::{probe_pulse_heuristic, teleport, TeleportConfig, OUTCOME_ORDER};

const ZERO: ComplexAmp = ComplexAmp::new(0.0, 0.0);

/// Register of `width` qubits; qubit 0 is the most significant index bit.
#[derive(Clone, Debug, PartialEq)]
pub struct QubitRegister {
    width: usize,
    amps: Vec<ComplexAmp>,
}

impl QubitRegister {
    pub fn new(width: usize, amps: Vec<ComplexAmp>) -> Result<Self> {
        if width == 0 || width > 24 {
            return Err(SimError::Domain(format!(
                "register width {width} out of range"
            )));
        }
        if amps.len() != 1 << width {
            return Err(SimError::Shape(format!(
                "{} amplitudes for {width} qubits",
                amps.len()
            )));
        }
        let norm: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
        if norm.is_nan() || (norm - 1.0).abs() > 1e-12 {
            return Err(SimError::Domain(format!(
                "register not normalized (norm² = {norm})"
            )));
        }
        Ok(Self { width, amps })
    }

    /// Computational basis state; `bits[k]` is the value of qubit k.
    pub fn basis(bits: &[u8]) -> Result<Self> {
        let width = bits.len();
        let mut index = 0usize;
        for &b in bits {
            if b > 1 {
                return Err(SimError::Domain(format!("bit value {b}")));
            }
            index = (index << 1) | b as usize;
        }
        let mut amps = vec![ZERO; 1 << width];
        amps[index] = ComplexAmp::new(1.0, 0.0);
        Self::new(width, amps)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn amps(&self) -> &[ComplexAmp] {
        &self.amps
    }

    fn mask(&self, qubit: usize) -> usize {
        1 << (self.width - 1 - qubit)
    }
}

/// |A⟩|B⟩|C⟩ → |A⊕C⟩|B⊕C⟩|C⟩ on qubits (a, b, c).
pub fn xor_gate(r: &QubitRegister, a: usize, b: usize, c: usize) -> Result<QubitRegister> {
    for q in [a, b, c] {
        if q >= r.width {
            return Err(SimError::Domain(format!(
                "qubit {q} out of range for width {}",
                r.width
            )));
        }
    }
    if a == b || a == c || b == c {
        return Err(SimError::Domain(format!(
            "qubit indices must be distinct: ({a}, {b}, {c})"
        )));
    }
    let (ma, mb, mc) = (r.mask(a), r.mask(b), r.mask(c));
    let mut amps = vec![ZERO; r.amps.len()];
    for (i, amp) in r.amps.iter().enumerate() {
        let j = if i & mc != 0 { i ^ ma ^ mb } else { i };
        amps[j] = *amp;
    }
    Ok(QubitRegister {
        width: r.width,
        amps,
    })
}

/// One of Alice's outcomes in the qubit picture.
#[derive(Clone, Debug)]
pub struct QubitOutcome {
    pub bits: (u8, u8),
    /// Conditioned on the cavity-qubit merge.
    pub probability: f64,
    /// Before the merge.
    pub unconditioned_probability: f64,
    /// Unnormalized (C, A4) bracket after the XOR, index 2·c + a4.
    pub bracket: [ComplexAmp; 4],
    /// Bob's qubit after the merge, before correction, normalized.
    pub bob_qubit: [ComplexAmp; 2],
    pub corrected_qubit: [ComplexAmp; 2],
    pub fidelity_before_correction: f64,
    pub fidelity_to_input: f64,
}

#[derive(Clone, Debug)]
pub struct QubitTeleport {
    pub after_xor: QubitRegister,
    /// Probability that the cavity qubit is found in (|0⟩ + |1⟩)/√2.
    pub merge_probability: f64,
    /// In the order 00, 11, 01, 10.
    pub outcomes: Vec<QubitOutcome>,
}

fn qubit_fidelity(a: &[ComplexAmp; 2], b: &[ComplexAmp; 2]) -> f64 {
    let overlap = a[0].conj() * b[0] + a[1].conj() * b[1];
    let na = a[0].norm_sqr() + a[1].norm_sqr();
    let nb = b[0].norm_sqr() + b[1].norm_sqr();
    overlap.norm_sqr() / (na * nb)
}

/// Register order: A1, A2, A4, C.
pub fn qubit_teleport_reference(zeta: ComplexAmp, xi: ComplexAmp) -> Result<QubitTeleport> {
    let norm = zeta.norm_sqr() + xi.norm_sqr();
    if norm.is_nan() || (norm - 1.0).abs() > 1e-12 {
        return Err(SimError::Domain(format!(
            "input qubit must satisfy |ζ|² + |ξ|² = 1, got {norm}"
        )));
    }
    let input = [zeta, xi];
    let h = ComplexAmp::new(FRAC_1_SQRT_2, 0.0);
    let mut amps = vec![ZERO; 16];
    for (a1, amp) in input.iter().enumerate() {
        for pair in 0..2 {
            for cq in 0..2 {
                // (|00⟩ + |11⟩)/√2 on (A2, A4), (|0⟩ + |1⟩)/√2 on C
                let idx = (a1 << 3) | (pair << 2) | (pair << 1) | cq;
                amps[idx] = amp * h * h;
            }
        }
    }
    let initial = QubitRegister::new(4, amps)?;
    let after_xor = xor_gate(&initial, 0, 1, 3)?;

    let mut merge_probability = 0.0;
    let mut raw = Vec::with_capacity(4);
    for (l1, l2) in OUTCOME_ORDER {
        let bits = (bit_of(l1), bit_of(l2));
        let base = ((bits.0 as usize) << 3) | ((bits.1 as usize) << 2);
        let mut bracket = [ZERO; 4];
        for a4 in 0..2 {
            for cq in 0..2 {
                bracket[2 * cq + a4] = after_xor.amps[base | (a4 << 1) | cq];
            }
        }
        let bob = [
            (bracket[0] + bracket[2]) * FRAC_1_SQRT_2,
            (bracket[1] + bracket[3]) * FRAC_1_SQRT_2,
        ];
        let weight = bob[0].norm_sqr() + bob[1].norm_sqr();
        merge_probability += weight;
        raw.push((bits, bracket, bob, weight));
    }
    let mut outcomes = Vec::with_capacity(4);
    for (bits, bracket, bob, weight) in raw {
        let scale = 1.0 / weight.sqrt();
        let bob_qubit = [bob[0] * scale, bob[1] * scale];
        let corrected_qubit = if bits.0 != bits.1 {
            [bob_qubit[1], bob_qubit[0]]
        } else {
            bob_qubit
        };
        outcomes.push(QubitOutcome {
            bits,
            probability: weight / merge_probability,
            unconditioned_probability: bracket.iter().map(|a| a.norm_sqr()).sum(),
            bracket,
            bob_qubit,
            corrected_qubit,
            fidelity_before_correction: qubit_fidelity(&bob_qubit, &input),
            fidelity_to_input: qubit_fidelity(&corrected_qubit, &input),
        });
    }
    Ok(QubitTeleport {
        after_xor,
        merge_probability,
        outcomes,
    })
}

fn bit_of(level: Level) -> u8 {
    match level {
        Level::C => 1,
        _ => 0,
    }
}

/// Maps a physical state through the dictionary. `atoms` are lambda atoms
/// (b → 0, c → 1; the |a⟩ component is dropped) and the cavity is projected
/// onto the normalized even/odd kets built from ±`alpha`. The output
/// amplitudes are over (atoms..., C) with C least significant and are not
/// renormalized, so finite-α norm differences stay visible.
pub fn project_to_qubits(
    state: &CompositeState,
    atoms: &[usize],
    cavity_index: usize,
    alpha: ComplexAmp,
) -> Result<Vec<ComplexAmp>> {
    let n = state.subsystems().len();
    if atoms.len() + 1 != n || atoms.contains(&cavity_index) {
        return Err(SimError::Shape(
            "dictionary needs every atom plus the cavity exactly once".into(),
        ));
    }
    for &a in atoms {
        if state.check_index(a)? != Subsystem::Atom3 {
            return Err(SimError::Shape(format!(
                "subsystem {a} is not a lambda atom"
            )));
        }
    }
    let mode: CavityMode = state.cavity_at(cavity_index)?;
    let pos = coherent_state(alpha, &mode)?;
    let neg = coherent_state(-alpha, &mode)?;
    let even = pos.add(&neg)?.normalized()?;
    let odd = pos
        .add(&neg.scaled(ComplexAmp::new(-1.0, 0.0)))?
        .normalized()?;

    let dims: Vec<usize> = state.subsystems().iter().map(Subsystem::dim).collect();
    let strides: Vec<usize> = (0..n).map(|i| dims[i + 1..].iter().product()).collect();
    let width = atoms.len() + 1;
    let mut out = vec![ZERO; 1 << width];
    for (q, out_amp) in out.iter_mut().enumerate() {
        let mut base = 0usize;
        for (k, &a) in atoms.iter().enumerate() {
            let bit = (q >> (width - 1 - k)) & 1;
            base += (1 + bit) * strides[a];
        }
        let ket = if q & 1 == 0 { &even } else { &odd };
        let cs = strides[cavity_index];
        *out_amp = ket
            .amps()
            .iter()
            .enumerate()
            .map(|(m, e)| e.conj() * state.amps()[base + m * cs])
            .sum();
    }
    Ok(out)
}

/// Per-outcome comparison of the two models.
#[derive(Clone, Debug)]
pub struct ModelRow {
    pub label: String,
    pub physical_probability: f64,
    pub qubit_probability: f64,
    pub physical_unconditioned_probability: f64,
    pub qubit_unconditioned_probability: f64,
    pub physical_fidelity: f64,
    pub qubit_fidelity: f64,
}

#[derive(Clone, Debug)]
pub struct ModelComparison {
    pub alpha: ComplexAmp,
    pub probe_gt: f64,
    pub rows: Vec<ModelRow>,
    pub e3_probability: f64,
    pub merge_probability: f64,
    /// max |Δp| over the post-selected outcome probabilities.
    pub postselected_deviation: f64,
    /// max |Δp| over the A1/A2 detection probabilities without post-selection.
    pub unconditioned_deviation: f64,
    pub max_probability_deviation: f64,
    pub max_fidelity_deviation: f64,
    /// 10·e^{−2|α|²} + 1e−9.
    pub bound: f64,
}

impl ModelComparison {
    pub fn within_bound(&self) -> bool {
        self.max_probability_deviation <= self.bound
    }

    pub fn ensure_within_bound(&self) -> Result<()> {
        if self.within_bound() {
            Ok(())
        } else {
            Err(SimError::CheckFailed(format!(
                "outcome-probability deviation {:.3e} exceeds bound {:.3e}",
                self.max_probability_deviation, self.bound
            )))
        }
    }
}

/// Runs both models on the same input with the heuristic probe time.
pub fn compare_models(
    zeta: ComplexAmp,
    xi: ComplexAmp,
    alpha: ComplexAmp,
    mode: &CavityMode,
) -> Result<ModelComparison> {
    let gt = probe_pulse_heuristic(alpha)?;
    let physical = teleport(&TeleportConfig::new(zeta, xi, alpha, gt, *mode)?)?;
    let qubit = qubit_teleport_reference(zeta, xi)?;

    let rows: Vec<ModelRow> = physical
        .outcomes
        .iter()
        .zip(&qubit.outcomes)
        .map(|(p, q)| ModelRow {
            label: p.label(),
            physical_probability: p.probability,
            qubit_probability: q.probability,
            physical_unconditioned_probability: p.unconditioned_probability,
            qubit_unconditioned_probability: q.unconditioned_probability,
            physical_fidelity: p.fidelity_to_input,
            qubit_fidelity: q.fidelity_to_input,
        })
        .collect();
    let max_of = |f: &dyn Fn(&ModelRow) -> f64| rows.iter().map(f).fold(0.0, f64::max);
    let postselected_deviation = max_of(&|r| (r.physical_probability - r.qubit_probability).abs());
    let unconditioned_deviation = max_of(&|r| {
        (r.physical_unconditioned_probability - r.qubit_unconditioned_probability).abs()
    });
    let max_fidelity_deviation = max_of(&|r| (r.physical_fidelity - r.qubit_fidelity).abs());
    Ok(ModelComparison {
        alpha,
        probe_gt: gt,
        e3_probability: physical.e3_probability,
        merge_probability: qubit.merge_probability,
        postselected_deviation,
        unconditioned_deviation,
        max_probability_deviation: postselected_deviation.max(unconditioned_deviation),
        max_fidelity_deviation,
        bound: 10.0 * (-2.0 * alpha.norm_sqr()).exp() + 1e-9,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocols::{bloch_input, epr_stages, BellVariant};
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> ComplexAmp {
        ComplexAmp::new(re, im)
    }

    #[test]
    fn xor_examples() {
        let r = QubitRegister::basis(&[0, 0, 1]).unwrap();
        assert_eq!(
            xor_gate(&r, 0, 1, 2).unwrap(),
            QubitRegister::basis(&[1, 1, 1]).unwrap()
        );
        let r = QubitRegister::basis(&[0, 0, 0]).unwrap();
        assert_eq!(xor_gate(&r, 0, 1, 2).unwrap(), r);
        let r = QubitRegister::basis(&[1, 0, 1, 0]).unwrap();
        // control on qubit 0, targets 1 and 3
        assert_eq!(
            xor_gate(&r, 1, 3, 0).unwrap(),
            QubitRegister::basis(&[1, 1, 1, 1]).unwrap()
        );
    }

    #[test]
    fn xor_rejects_bad_indices() {
        let r = QubitRegister::basis(&[0, 0, 0]).unwrap();
        assert!(matches!(xor_gate(&r, 0, 0, 2), Err(SimError::Domain(_))));
        assert!(matches!(xor_gate(&r, 0, 1, 3), Err(SimError::Domain(_))));
    }

    #[test]
    fn xor_is_a_permutation() {
        let width = 4;
        let mut hit = [0u32; 16];
        for i in 0..16u8 {
            let bits: Vec<u8> = (0..width).map(|k| (i >> (width - 1 - k)) & 1).collect();
            let out = xor_gate(&QubitRegister::basis(&bits).unwrap(), 0, 2, 3).unwrap();
            let ones: Vec<usize> = out
                .amps()
                .iter()
                .enumerate()
                .filter(|(_, a)| **a != ZERO)
                .map(|(j, _)| j)
                .collect();
            assert_eq!(ones.len(), 1);
            assert_eq!(out.amps()[ones[0]], c(1.0, 0.0));
            hit[ones[0]] += 1;
        }
        assert!(hit.iter().all(|&h| h == 1));
    }

    #[test]
    fn reference_trivial_input() {
        let r = qubit_teleport_reference(c(1.0, 0.0), c(0.0, 0.0)).unwrap();
        let o = &r.outcomes[0];
        assert_eq!(o.bits, (0, 0));
        assert!((o.bob_qubit[0].norm_sqr() - 1.0).abs() < 1e-15);
        assert!((r.merge_probability - 0.5).abs() < 1e-15);
    }

    #[test]
    fn reference_brackets_per_outcome() {
        // After the XOR: 00 → ζ|0_C 0_4⟩ + ξ|1_C 1_4⟩, 11 → ξ|0_C 1_4⟩ + ζ|1_C 0_4⟩,
        // 01 → ζ|0_C 1_4⟩ + ξ|1_C 0_4⟩, 10 → ξ|0_C 0_4⟩ + ζ|1_C 1_4⟩, each × ½
        let (zeta, xi) = (c(0.6, 0.1), c(0.3, -0.7348469228349535));
        let norm = (zeta.norm_sqr() + xi.norm_sqr()).sqrt();
        let (zeta, xi) = (zeta / norm, xi / norm);
        let r = qubit_teleport_reference(zeta, xi).unwrap();
        let k = 0.5;
        let z = ZERO;
        let expected = [
            [zeta * k, z, z, xi * k],
            [z, xi * k, zeta * k, z],
            [z, zeta * k, xi * k, z],
            [xi * k, z, z, zeta * k],
        ];
        for (o, e) in r.outcomes.iter().zip(expected) {
            for (got, want) in o.bracket.iter().zip(e) {
                assert!((got - want).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn dictionary_maps_two_atom_stage() {
        // ½(|bb⟩|+⟩ + |cc⟩|−⟩) → amplitudes on |000⟩ and |111⟩ with weights
        // ½(1 ± e^{−2|α|²}); the qubit model has ½ each
        for a in [0.5, 1.0, 2.0] {
            let alpha = c(a, 0.0);
            let mode = CavityMode::for_displaced_field(alpha);
            let stages = epr_stages(alpha, BellVariant::PsiPlus, &mode).unwrap();
            let q = project_to_qubits(&stages.after_second_atom, &[0, 1], 2, alpha).unwrap();
            let ideal = xor_gate(
                &QubitRegister::new(
                    3,
                    vec![
                        c(FRAC_1_SQRT_2, 0.0),
                        c(FRAC_1_SQRT_2, 0.0),
                        z(),
                        z(),
                        z(),
                        z(),
                        z(),
                        z(),
                    ],
                )
                .unwrap(),
                0,
                1,
                2,
            )
            .unwrap();
            let overlap = (-2.0 * a * a).exp();
            let mut worst = 0.0f64;
            for (p, i) in q.iter().zip(ideal.amps()) {
                worst = worst.max((p.norm_sqr() - i.norm_sqr()).abs());
            }
            assert!(worst <= overlap + 1e-12, "α={a}: {worst}");
            assert!((q[0].norm_sqr() - 0.5 * (1.0 + overlap)).abs() < 1e-10);
            assert!((q[7].norm_sqr() - 0.5 * (1.0 - overlap)).abs() < 1e-10);
        }
    }

    fn z() -> ComplexAmp {
        ZERO
    }

    #[test]
    fn comparison_examples() {
        let (zeta, xi) = bloch_input(1.0, 0.3);
        let report = |a: f64| {
            let alpha = c(a, 0.0);
            compare_models(zeta, xi, alpha, &CavityMode::for_displaced_field(alpha)).unwrap()
        };
        let at2 = report(2.0);
        assert!(at2.max_probability_deviation <= 5e-3);
        assert!(at2.within_bound());
        assert!(at2.max_fidelity_deviation < 1e-8);
        assert!(report(3.0).max_probability_deviation < report(1.0).max_probability_deviation);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn xor_is_an_involution(vals in prop::collection::vec(-1.0f64..1.0, 16)) {
            let amps: Vec<ComplexAmp> = vals.iter().enumerate().map(|(i, v)| c(*v, (i as f64 * v).sin())).collect();
            let n: f64 = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
            prop_assume!(n > 1e-3);
            let r = QubitRegister::new(4, amps.iter().map(|a| a / n).collect()).unwrap();
            let twice = xor_gate(&xor_gate(&r, 0, 1, 3).unwrap(), 0, 1, 3).unwrap();
            for (x, y) in twice.amps().iter().zip(r.amps()) {
                prop_assert!((x - y).norm() < 1e-12);
            }
        }

        #[test]
        fn reference_is_exact_for_any_input(theta in 0.0f64..std::f64::consts::PI, phi in 0.0f64..6.3) {
            let (zeta, xi) = bloch_input(theta, phi);
            let r = qubit_teleport_reference(zeta, xi).unwrap();
            for o in &r.outcomes {
                prop_assert!((o.probability - 0.25).abs() < 1e-12);
                prop_assert!((o.unconditioned_probability - 0.25).abs() < 1e-12);
                prop_assert!((o.fidelity_to_input - 1.0).abs() < 1e-12);
            }
        }
    }
}
