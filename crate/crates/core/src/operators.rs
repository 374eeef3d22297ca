//! Operator bank: photon-number phase, parity projectors, displacement,
//! the dispersive lambda-atom propagator, the resonant Jaynes–Cummings
//! propagator and single-atom rotations.
//!
//! Each operator acts on designated subsystems of a [`CompositeState`] and
//! returns a new state; subsystem positions are arbitrary.

use std::f64::consts::PI;

use crate::error::{Result, SimError};
use crate::fockspace::{check_truncation, CavityMode, ComplexAmp, CompositeState, Subsystem};

/// Truncation threshold on the Taylor series inside the displacement
/// exponential.
pub const DISPLACEMENT_SERIES_TOLERANCE: f64 = 1e-14;

const ZERO: ComplexAmp = ComplexAmp::new(0.0, 0.0);
const ONE: ComplexAmp = ComplexAmp::new(1.0, 0.0);

/// Which parity projector: `Even` is Π₊ = ½(e^{iπa†a} + 1), `Odd` is
/// Π₋ = ½(e^{iπa†a} − 1).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Parity {
    Even,
    Odd,
}

/// 2×2 unitary on the lower doublet of an atom: {b, c} for a lambda atom,
/// {f, e} for a two-level atom. `m[row][col]` in that basis order.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AtomicUnitary2x2 {
    m: [[ComplexAmp; 2]; 2],
}

impl AtomicUnitary2x2 {
    pub fn new(m: [[ComplexAmp; 2]; 2]) -> Result<Self> {
        if m.iter()
            .flatten()
            .any(|z| !z.re.is_finite() || !z.im.is_finite())
        {
            return Err(SimError::Domain("matrix entries must be finite".into()));
        }
        let u = Self { m };
        let defect = u.unitarity_defect();
        if defect > 1e-12 {
            return Err(SimError::Domain(format!(
                "matrix is not unitary (max |U†U − 1| = {defect:.3e})"
            )));
        }
        Ok(u)
    }

    pub fn identity() -> Self {
        Self {
            m: [[ONE, ZERO], [ZERO, ONE]],
        }
    }

    /// R = |c⟩⟨b| − |b⟩⟨c|, i.e. [[0, −1], [1, 0]] in (b, c).
    pub fn rotation_r() -> Self {
        Self {
            m: [[ZERO, -ONE], [ONE, ZERO]],
        }
    }

    /// R₄ = [[0, 1], [1, 0]], the b ↔ c swap.
    pub fn swap() -> Self {
        Self {
            m: [[ZERO, ONE], [ONE, ZERO]],
        }
    }

    pub fn matrix(&self) -> [[ComplexAmp; 2]; 2] {
        self.m
    }

    pub fn unitarity_defect(&self) -> f64 {
        let m = &self.m;
        let mut worst = 0.0f64;
        for i in 0..2 {
            for j in 0..2 {
                let v = m[0][i].conj() * m[0][j] + m[1][i].conj() * m[1][j];
                let target = if i == j { ONE } else { ZERO };
                worst = worst.max((v - target).norm());
            }
        }
        worst
    }

    pub fn compose(&self, other: &Self) -> Self {
        let a = &self.m;
        let b = &other.m;
        let mut m = [[ZERO; 2]; 2];
        for (i, row) in m.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = a[i][0] * b[0][j] + a[i][1] * b[1][j];
            }
        }
        Self { m }
    }
}

/// Per-index Fock level of a cavity, given the cavity stride and dimension.
#[inline]
fn digit(index: usize, stride: usize, dim: usize) -> usize {
    (index / stride) % dim
}

/// Multiplies the Fock-n amplitude by `f(n)`.
fn cavity_diagonal(
    s: &CompositeState,
    cavity_index: usize,
    f: impl Fn(usize) -> ComplexAmp,
) -> Result<CompositeState> {
    let mode = s.cavity_at(cavity_index)?;
    let stride = s.stride(cavity_index);
    let table: Vec<ComplexAmp> = (0..mode.dim()).map(f).collect();
    let amps = s
        .amps()
        .iter()
        .enumerate()
        .map(|(i, a)| a * table[digit(i, stride, mode.dim())])
        .collect();
    Ok(CompositeState::from_raw(s.subsystems().to_vec(), amps))
}

/// e^{iφ a†a}: multiplies Fock level n by e^{iφn}.
pub fn number_phase(s: &CompositeState, cavity_index: usize, phi: f64) -> Result<CompositeState> {
    cavity_diagonal(s, cavity_index, |n| {
        ComplexAmp::from_polar(1.0, phi * n as f64)
    })
}

/// Applies Π₊ or Π₋ to the cavity. Level-wise Π₊ keeps even n and kills odd
/// n; Π₋ kills even n and multiplies odd n by −1.
pub fn parity_project(
    s: &CompositeState,
    cavity_index: usize,
    parity: Parity,
) -> Result<CompositeState> {
    cavity_diagonal(s, cavity_index, |n| match (parity, n % 2 == 0) {
        (Parity::Even, true) => ONE,
        (Parity::Even, false) => ZERO,
        (Parity::Odd, true) => ZERO,
        (Parity::Odd, false) => -ONE,
    })
}

/// Dense row-major square matrix used for the displacement exponential.
#[derive(Clone, Debug)]
struct Dense {
    n: usize,
    a: Vec<ComplexAmp>,
}

impl Dense {
    fn identity(n: usize) -> Self {
        let mut a = vec![ZERO; n * n];
        for i in 0..n {
            a[i * n + i] = ONE;
        }
        Self { n, a }
    }

    fn mul(&self, other: &Self) -> Self {
        let n = self.n;
        let mut out = vec![ZERO; n * n];
        for i in 0..n {
            for k in 0..n {
                let x = self.a[i * n + k];
                if x == ZERO {
                    continue;
                }
                let row = &other.a[k * n..(k + 1) * n];
                for (o, y) in out[i * n..(i + 1) * n].iter_mut().zip(row) {
                    *o += x * y;
                }
            }
        }
        Self { n, a: out }
    }

    /// self · T for T with entries only on the first off-diagonals,
    /// given as `lower[k] = T[k+1][k]` and `upper[k] = T[k][k+1]`.
    fn mul_offdiagonal(&self, lower: &[ComplexAmp], upper: &[ComplexAmp]) -> Self {
        let n = self.n;
        let mut out = vec![ZERO; n * n];
        for i in 0..n {
            let row = &self.a[i * n..(i + 1) * n];
            let dst = &mut out[i * n..(i + 1) * n];
            for k in 0..n - 1 {
                dst[k] += row[k + 1] * lower[k];
                dst[k + 1] += row[k] * upper[k];
            }
        }
        Self { n, a: out }
    }

    fn max_abs(&self) -> f64 {
        self.a.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

/// Truncated displacement operator exp(βa† − β*a), built by scaling and
/// squaring with a Taylor core.
#[derive(Clone, Debug)]
pub struct DisplacementMatrix {
    beta: ComplexAmp,
    matrix: Dense,
}

impl DisplacementMatrix {
    pub fn new(beta: ComplexAmp, mode: &CavityMode) -> Result<Self> {
        if !(beta.re.is_finite() && beta.im.is_finite()) {
            return Err(SimError::Domain(
                "displacement amplitude must be finite".into(),
            ));
        }
        let n = mode.dim();
        // a†|k⟩ = √(k+1)|k+1⟩ and a|k+1⟩ = √(k+1)|k⟩
        let mut lower: Vec<ComplexAmp> =
            (0..n - 1).map(|k| beta * ((k + 1) as f64).sqrt()).collect();
        let mut upper: Vec<ComplexAmp> = (0..n - 1)
            .map(|k| -beta.conj() * ((k + 1) as f64).sqrt())
            .collect();
        let norm = (0..n)
            .map(|j| {
                let below = if j + 1 < n { lower[j].norm() } else { 0.0 };
                let above = if j > 0 { upper[j - 1].norm() } else { 0.0 };
                below + above
            })
            .fold(0.0, f64::max);
        let mut squarings = 0u32;
        let mut scale = 1.0;
        while norm * scale > 0.5 {
            scale *= 0.5;
            squarings += 1;
        }
        for z in lower.iter_mut().chain(upper.iter_mut()) {
            *z *= scale;
        }
        let mut sum = Dense::identity(n);
        let mut term = Dense::identity(n);
        for k in 1..64 {
            term = term.mul_offdiagonal(&lower, &upper);
            let inv = 1.0 / k as f64;
            for z in term.a.iter_mut() {
                *z *= inv;
            }
            for (s, t) in sum.a.iter_mut().zip(&term.a) {
                *s += t;
            }
            // squaring amplifies the core error by about 2^squarings
            if term.max_abs() < DISPLACEMENT_SERIES_TOLERANCE * scale {
                break;
            }
        }
        for _ in 0..squarings {
            sum = sum.mul(&sum);
        }
        Ok(Self { beta, matrix: sum })
    }

    pub fn beta(&self) -> ComplexAmp {
        self.beta
    }

    pub fn dim(&self) -> usize {
        self.matrix.n
    }

    pub fn entry(&self, row: usize, col: usize) -> ComplexAmp {
        self.matrix.a[row * self.matrix.n + col]
    }

    /// max |(D†D − 1)_{ij}| over the lower half of the Fock ladder.
    pub fn unitarity_defect(&self) -> f64 {
        let n = self.matrix.n;
        let block = n.div_ceil(2);
        let mut worst = 0.0f64;
        for i in 0..block {
            for j in 0..block {
                let v: ComplexAmp = (0..n)
                    .map(|k| self.entry(k, i).conj() * self.entry(k, j))
                    .sum();
                let target = if i == j { ONE } else { ZERO };
                worst = worst.max((v - target).norm());
            }
        }
        worst
    }

    /// Applies the matrix to the addressed cavity without truncation checks.
    pub fn apply(&self, s: &CompositeState, cavity_index: usize) -> Result<CompositeState> {
        let mode = s.cavity_at(cavity_index)?;
        if mode.dim() != self.dim() {
            return Err(SimError::Shape(format!(
                "displacement built for dimension {}, cavity has {}",
                self.dim(),
                mode.dim()
            )));
        }
        let n = self.dim();
        let stride = s.stride(cavity_index);
        let amps = s.amps();
        let mut out = vec![ZERO; amps.len()];
        let block = stride * n;
        for outer in (0..amps.len()).step_by(block) {
            for inner in 0..stride {
                let base = outer + inner;
                for row in 0..n {
                    let mut acc = ZERO;
                    for col in 0..n {
                        acc += self.matrix.a[row * n + col] * amps[base + col * stride];
                    }
                    out[base + row * stride] = acc;
                }
            }
        }
        Ok(CompositeState::from_raw(s.subsystems().to_vec(), out))
    }
}

/// D(β) on the addressed cavity; fails if the result spills past the cutoff.
pub fn displace(
    s: &CompositeState,
    cavity_index: usize,
    beta: ComplexAmp,
) -> Result<CompositeState> {
    let mode = s.cavity_at(cavity_index)?;
    let d = DisplacementMatrix::new(beta, &mode)?;
    let out = d.apply(s, cavity_index)?;
    check_truncation(&out, &format!("displacement by {beta}"))?;
    Ok(out)
}

fn require_kind(s: &CompositeState, index: usize, kind: Subsystem) -> Result<()> {
    let got = s.check_index(index)?;
    if got != kind {
        return Err(SimError::Shape(format!(
            "subsystem {index} is {got:?}, expected {kind:?}"
        )));
    }
    Ok(())
}

/// Dispersive lambda-atom propagator U(τ) with phase φ = 2g²τ/Δ.
///
/// Per Fock level n, with p = e^{iφn}: |a⟩ → −p|a⟩; in the (b, c) block
/// the matrix is ½[[p+1, p−1], [p−1, p+1]].
pub fn dispersive_lambda_evolve(
    s: &CompositeState,
    atom_index: usize,
    cavity_index: usize,
    phi: f64,
) -> Result<CompositeState> {
    require_kind(s, atom_index, Subsystem::Atom3)?;
    let mode = s.cavity_at(cavity_index)?;
    let atom_stride = s.stride(atom_index);
    let cav_stride = s.stride(cavity_index);
    let dim = mode.dim();
    let phases: Vec<ComplexAmp> = (0..dim)
        .map(|n| ComplexAmp::from_polar(1.0, phi * n as f64))
        .collect();
    let amps = s.amps();
    let mut out = amps.to_vec();
    for (i, amp) in amps.iter().enumerate() {
        let p = phases[digit(i, cav_stride, dim)];
        match digit(i, atom_stride, 3) {
            0 => out[i] = -p * amp,
            1 => {
                let ic = i + atom_stride;
                let (b, c) = (*amp, amps[ic]);
                let plus = (p + ONE) * 0.5;
                let minus = (p - ONE) * 0.5;
                out[i] = plus * b + minus * c;
                out[ic] = minus * b + plus * c;
            }
            _ => {}
        }
    }
    Ok(CompositeState::from_raw(s.subsystems().to_vec(), out))
}

/// Probability in |e, n_max⟩, the level whose coupling to |f, n_max+1⟩ the
/// truncated Jaynes–Cummings propagator drops.
pub fn jc_clipped_probability(
    s: &CompositeState,
    atom_index: usize,
    cavity_index: usize,
) -> Result<f64> {
    require_kind(s, atom_index, Subsystem::Atom2)?;
    let mode = s.cavity_at(cavity_index)?;
    let atom_stride = s.stride(atom_index);
    let cav_stride = s.stride(cavity_index);
    let total = s.norm_sqr();
    if total <= 0.0 {
        return Ok(0.0);
    }
    let clipped: f64 = s
        .amps()
        .iter()
        .enumerate()
        .filter(|(i, _)| {
            digit(*i, atom_stride, 2) == 1 && digit(*i, cav_stride, mode.dim()) == mode.n_max()
        })
        .map(|(_, a)| a.norm_sqr())
        .sum();
    Ok(clipped / total)
}

/// Resonant Jaynes–Cummings propagator for a two-level atom, `gt` = g·t.
///
/// In each {|f,n⟩, |e,n−1⟩} block with θ = gt√n:
/// |f,n⟩ → cos θ|f,n⟩ − i sin θ|e,n−1⟩ and
/// |e,n−1⟩ → cos θ|e,n−1⟩ − i sin θ|f,n⟩.
/// |f,0⟩ is invariant and |e,n_max⟩ is left untouched (its partner lies
/// above the cutoff); see [`jc_clipped_probability`].
pub fn jc_evolve(
    s: &CompositeState,
    atom_index: usize,
    cavity_index: usize,
    gt: f64,
) -> Result<CompositeState> {
    require_kind(s, atom_index, Subsystem::Atom2)?;
    if !gt.is_finite() {
        return Err(SimError::Domain("gt must be finite".into()));
    }
    let mode = s.cavity_at(cavity_index)?;
    let atom_stride = s.stride(atom_index);
    let cav_stride = s.stride(cavity_index);
    let dim = mode.dim();
    let rot: Vec<(f64, f64)> = (0..dim)
        .map(|n| {
            let theta = gt * (n as f64).sqrt();
            (theta.cos(), theta.sin())
        })
        .collect();
    let amps = s.amps();
    let mut out = amps.to_vec();
    for (i, f_amp) in amps.iter().enumerate() {
        if digit(i, atom_stride, 2) != 0 {
            continue;
        }
        let n = digit(i, cav_stride, dim);
        if n == 0 {
            continue;
        }
        let ie = i + atom_stride - cav_stride;
        let e_amp = amps[ie];
        let (cos, sin) = rot[n];
        let mis = ComplexAmp::new(0.0, -sin);
        out[i] = f_amp * cos + e_amp * mis;
        out[ie] = f_amp * mis + e_amp * cos;
    }
    Ok(CompositeState::from_raw(s.subsystems().to_vec(), out))
}

/// Applies a 2×2 unitary to one atom: on {b, c} for a lambda atom (|a⟩
/// untouched) or on {f, e} for a two-level atom.
pub fn apply_atomic_unitary(
    s: &CompositeState,
    atom_index: usize,
    u: &AtomicUnitary2x2,
) -> Result<CompositeState> {
    let kind = s.check_index(atom_index)?;
    let (dim, lo) = match kind {
        Subsystem::Atom3 => (3, 1),
        Subsystem::Atom2 => (2, 0),
        Subsystem::Cavity(_) => {
            return Err(SimError::Shape(format!(
                "subsystem {atom_index} is a cavity, not an atom"
            )))
        }
    };
    let stride = s.stride(atom_index);
    let m = u.matrix();
    let amps = s.amps();
    let mut out = amps.to_vec();
    for i in 0..amps.len() {
        if digit(i, stride, dim) != lo {
            continue;
        }
        let j = i + stride;
        let (x, y) = (amps[i], amps[j]);
        out[i] = m[0][0] * x + m[0][1] * y;
        out[j] = m[1][0] * x + m[1][1] * y;
    }
    Ok(CompositeState::from_raw(s.subsystems().to_vec(), out))
}

/// φ = π, the value at which [`dispersive_lambda_evolve`] reduces to the
/// parity-projector form used by the protocols.
pub const PARITY_PHASE: f64 = PI;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fockspace::{coherent_state, fidelity, fock_state, tail_mass, tensor, Level};
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> ComplexAmp {
        ComplexAmp::new(re, im)
    }

    fn mode(n: usize) -> CavityMode {
        CavityMode::new(n).unwrap()
    }

    fn even_odd(alpha: ComplexAmp, m: &CavityMode) -> (CompositeState, CompositeState) {
        let a = coherent_state(alpha, m).unwrap();
        let b = coherent_state(-alpha, m).unwrap();
        (a.add(&b).unwrap(), a.add(&b.scaled(-ONE)).unwrap())
    }

    fn dist(a: &CompositeState, b: &CompositeState) -> f64 {
        a.amps()
            .iter()
            .zip(b.amps())
            .map(|(x, y)| (x - y).norm())
            .fold(0.0, f64::max)
    }

    /// Random normalized state on `subsystems` with support restricted to
    /// Fock levels `<= low` of every cavity.
    fn random_low_state(subsystems: Vec<Subsystem>, low: usize, seed: &[f64]) -> CompositeState {
        let dims: Vec<usize> = subsystems.iter().map(Subsystem::dim).collect();
        let total: usize = dims.iter().product();
        let mut amps = vec![ZERO; total];
        for (i, a) in amps.iter_mut().enumerate() {
            let mut rem = i;
            let mut ok = true;
            for (k, d) in dims.iter().enumerate().rev() {
                let digit = rem % d;
                rem /= d;
                if matches!(subsystems[k], Subsystem::Cavity(_)) && digit > low {
                    ok = false;
                }
            }
            if ok {
                let x = seed[i % seed.len()];
                let y = seed[(i * 7 + 3) % seed.len()];
                *a = c((x * (i as f64 + 1.3)).sin(), (y * (i as f64 + 0.7)).cos());
            }
        }
        CompositeState::new(subsystems, amps)
            .unwrap()
            .normalized()
            .unwrap()
    }

    #[test]
    fn number_phase_pi_flips_coherent_amplitude() {
        let m = mode(32);
        let s = coherent_state(c(2.0, 0.0), &m).unwrap();
        let out = number_phase(&s, 0, PI).unwrap();
        let target = coherent_state(c(-2.0, 0.0), &m).unwrap();
        assert!(fidelity(&out, &target).unwrap() > 1.0 - 1e-10);
        assert_eq!(number_phase(&s, 0, 0.0).unwrap(), s);
        let vac = fock_state(0, &m).unwrap();
        assert!(dist(&number_phase(&vac, 0, PI).unwrap(), &vac) < 1e-15);
        let atom = CompositeState::atom(Subsystem::Atom2, Level::F).unwrap();
        assert!(matches!(
            number_phase(&atom, 0, 1.0),
            Err(SimError::Shape(_))
        ));
    }

    #[test]
    fn projector_relations_on_even_odd_states() {
        let m = mode(48);
        for alpha in [0.5, 1.0, 2.0] {
            let (plus, minus) = even_odd(c(alpha, 0.0), &m);
            let zero = plus.scaled(ZERO);
            assert!(dist(&parity_project(&plus, 0, Parity::Even).unwrap(), &plus) < 1e-12);
            assert!(dist(&parity_project(&minus, 0, Parity::Even).unwrap(), &zero) < 1e-12);
            assert!(
                dist(
                    &parity_project(&minus, 0, Parity::Odd).unwrap(),
                    &minus.scaled(-ONE)
                ) < 1e-12
            );
            assert!(dist(&parity_project(&plus, 0, Parity::Odd).unwrap(), &zero) < 1e-12);
        }
    }

    #[test]
    fn displacement_identity_and_return_to_vacuum() {
        let m = mode(48);
        let s = coherent_state(c(2.0, 0.0), &m).unwrap();
        assert!(dist(&displace(&s, 0, ZERO).unwrap(), &s) < 1e-14);
        let back = displace(&s, 0, c(-2.0, 0.0)).unwrap();
        let vac = fock_state(0, &m).unwrap();
        assert!(fidelity(&back, &vac).unwrap() > 1.0 - 1e-8);
    }

    #[test]
    fn displacement_doubles_coherent_amplitude() {
        let m = mode(48);
        let alpha = c(2.0, 0.0);
        let s = coherent_state(alpha, &m).unwrap();
        let out = displace(&s, 0, alpha).unwrap();
        let target = coherent_state(alpha * 2.0, &m).unwrap();
        assert!(fidelity(&out, &target).unwrap() >= 1.0 - 1e-8);
    }

    #[test]
    fn displacement_matches_analytic_for_complex_amplitudes() {
        let m = mode(40);
        let alpha = c(0.7, -1.1);
        let beta = c(-0.3, 0.9);
        let s = coherent_state(alpha, &m).unwrap();
        let out = displace(&s, 0, beta).unwrap();
        let target = coherent_state(alpha + beta, &m).unwrap();
        assert!(fidelity(&out, &target).unwrap() >= 1.0 - 1e-8);
        // D(β)|α⟩ = e^{i Im(βα*)}|α+β⟩
        let phase = ComplexAmp::from_polar(1.0, (beta * alpha.conj()).im);
        assert!(dist(&out, &target.scaled(phase)) < 1e-7);
    }

    #[test]
    fn displacement_spill_is_a_truncation_error() {
        let m = mode(20);
        let s = coherent_state(c(1.0, 0.0), &m).unwrap();
        assert!(matches!(
            displace(&s, 0, c(3.0, 0.0)),
            Err(SimError::Truncation { .. })
        ));
    }

    #[test]
    fn displacement_matrix_is_unitary() {
        let d = DisplacementMatrix::new(c(1.5, 0.5), &mode(50)).unwrap();
        assert!(d.unitarity_defect() < 1e-12);
    }

    #[test]
    fn dispersive_first_atom_gives_even_odd_split() {
        let m = mode(40);
        let alpha = c(2.0, 0.0);
        let b = CompositeState::atom(Subsystem::Atom3, Level::B).unwrap();
        let s = tensor(&b, &coherent_state(alpha, &m).unwrap()).unwrap();
        let out = dispersive_lambda_evolve(&s, 0, 1, PI).unwrap();
        let (plus, minus) = even_odd(alpha, &m);
        let cc = CompositeState::atom(Subsystem::Atom3, Level::C).unwrap();
        let expected = tensor(&b, &plus)
            .unwrap()
            .add(&tensor(&cc, &minus).unwrap().scaled(-ONE))
            .unwrap()
            .scaled(c(0.5, 0.0));
        assert!(dist(&out, &expected) < 1e-14);
    }

    #[test]
    fn dispersive_upper_level_and_vacuum() {
        let m = mode(6);
        for n in 0..=6 {
            let s = CompositeState::basis(vec![Subsystem::Atom3, Subsystem::Cavity(m)], &[0, n])
                .unwrap();
            let out = dispersive_lambda_evolve(&s, 0, 1, PI).unwrap();
            let sign = if n % 2 == 0 { -1.0 } else { 1.0 };
            assert!(dist(&out, &s.scaled(c(sign, 0.0))) < 1e-14);
        }
        let s =
            CompositeState::basis(vec![Subsystem::Atom3, Subsystem::Cavity(m)], &[1, 0]).unwrap();
        assert!(dist(&dispersive_lambda_evolve(&s, 0, 1, PI).unwrap(), &s) < 1e-15);
    }

    #[test]
    fn dispersive_general_phase_matches_operator_form() {
        // ½(e^{iφn}+1) on b→b and ½(e^{iφn}−1) on b→c, for φ ≠ π
        let m = mode(5);
        let phi = 0.37;
        for n in 0..=5 {
            let s = CompositeState::basis(vec![Subsystem::Atom3, Subsystem::Cavity(m)], &[1, n])
                .unwrap();
            let out = dispersive_lambda_evolve(&s, 0, 1, phi).unwrap();
            let p = ComplexAmp::from_polar(1.0, phi * n as f64);
            assert!((out.amps()[6 + n] - (p + ONE) * 0.5).norm() < 1e-15);
            assert!((out.amps()[12 + n] - (p - ONE) * 0.5).norm() < 1e-15);
        }
        let atom = CompositeState::atom(Subsystem::Atom2, Level::F).unwrap();
        let s = tensor(&atom, &fock_state(0, &m).unwrap()).unwrap();
        assert!(matches!(
            dispersive_lambda_evolve(&s, 0, 1, phi),
            Err(SimError::Shape(_))
        ));
    }

    #[test]
    fn two_dispersive_passes_correlate_atoms() {
        let m = mode(40);
        let alpha = c(2.0, 0.0);
        let b = CompositeState::atom(Subsystem::Atom3, Level::B).unwrap();
        let s = tensor(
            &tensor(&b, &b).unwrap(),
            &coherent_state(alpha, &m).unwrap(),
        )
        .unwrap();
        let s = dispersive_lambda_evolve(&s, 0, 2, PI).unwrap();
        let s = dispersive_lambda_evolve(&s, 1, 2, PI).unwrap();
        let (plus, minus) = even_odd(alpha, &m);
        let bb = tensor(&b, &b).unwrap();
        let cc_atom = CompositeState::atom(Subsystem::Atom3, Level::C).unwrap();
        let cc = tensor(&cc_atom, &cc_atom).unwrap();
        let expected = tensor(&bb, &plus)
            .unwrap()
            .add(&tensor(&cc, &minus).unwrap())
            .unwrap()
            .scaled(c(0.5, 0.0));
        assert!((fidelity(&s, &expected).unwrap() - 1.0).abs() < 1e-10);
        assert!(dist(&s, &expected) < 1e-14);
    }

    #[test]
    fn jc_ground_vacuum_is_dark() {
        let m = mode(4);
        let s =
            CompositeState::basis(vec![Subsystem::Atom2, Subsystem::Cavity(m)], &[0, 0]).unwrap();
        for gt in [0.0, 0.3, 1.7, 100.0] {
            assert_eq!(jc_evolve(&s, 0, 1, gt).unwrap(), s);
        }
    }

    #[test]
    fn jc_single_photon_half_rabi() {
        let m = mode(4);
        let s =
            CompositeState::basis(vec![Subsystem::Atom2, Subsystem::Cavity(m)], &[0, 1]).unwrap();
        let out = jc_evolve(&s, 0, 1, PI / 2.0).unwrap();
        let target = CompositeState::basis(vec![Subsystem::Atom2, Subsystem::Cavity(m)], &[1, 0])
            .unwrap()
            .scaled(c(0.0, -1.0));
        assert!(dist(&out, &target) < 1e-15);
    }

    #[test]
    fn jc_matches_chi_series_termwise() {
        // oracle: χ_f = Σ C_n cos(gt√n)|n⟩, χ_e = −i Σ C_{n+1} sin(gt√(n+1))|n⟩
        // with C_n the Fock amplitudes of the incoming field
        let m = mode(24);
        let field_amp = c(2.0, 0.0);
        let gt = 0.7;
        let field = coherent_state(field_amp, &m).unwrap();
        let cn = field.amps().to_vec();
        let f = CompositeState::atom(Subsystem::Atom2, Level::F).unwrap();
        let s = tensor(&f, &field).unwrap();
        let out = jc_evolve(&s, 0, 1, gt).unwrap();
        for n in 0..=24 {
            let chi_f = cn[n] * (gt * (n as f64).sqrt()).cos();
            assert!((out.amps()[n] - chi_f).norm() < 1e-10);
            if n < 24 {
                let chi_e = c(0.0, -1.0) * cn[n + 1] * (gt * ((n + 1) as f64).sqrt()).sin();
                assert!((out.amps()[25 + n] - chi_e).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn jc_clip_reports_top_level() {
        let m = mode(3);
        let s =
            CompositeState::basis(vec![Subsystem::Atom2, Subsystem::Cavity(m)], &[1, 3]).unwrap();
        assert_eq!(jc_clipped_probability(&s, 0, 1).unwrap(), 1.0);
        assert_eq!(jc_evolve(&s, 0, 1, 0.9).unwrap(), s);
        let atom3 = CompositeState::atom(Subsystem::Atom3, Level::B).unwrap();
        let bad = tensor(&atom3, &fock_state(0, &m).unwrap()).unwrap();
        assert!(matches!(
            jc_evolve(&bad, 0, 1, 0.1),
            Err(SimError::Shape(_))
        ));
    }

    #[test]
    fn rotations_and_swap() {
        let r4 = AtomicUnitary2x2::swap();
        let twice = r4.compose(&r4);
        assert_eq!(twice, AtomicUnitary2x2::identity());
        let s = CompositeState::lambda_qubit(c(0.6, 0.1), c(0.2, -0.77));
        let out = apply_atomic_unitary(&apply_atomic_unitary(&s, 0, &r4).unwrap(), 0, &r4).unwrap();
        assert!(dist(&out, &s) < 1e-15);

        let r = AtomicUnitary2x2::rotation_r();
        let b = CompositeState::atom(Subsystem::Atom3, Level::B).unwrap();
        let cc = CompositeState::atom(Subsystem::Atom3, Level::C).unwrap();
        assert!(dist(&apply_atomic_unitary(&b, 0, &r).unwrap(), &cc) < 1e-15);
        assert!(dist(&apply_atomic_unitary(&cc, 0, &r).unwrap(), &b.scaled(-ONE)) < 1e-15);

        let a = CompositeState::atom(Subsystem::Atom3, Level::A).unwrap();
        assert_eq!(apply_atomic_unitary(&a, 0, &r).unwrap(), a);

        let f = CompositeState::atom(Subsystem::Atom2, Level::F).unwrap();
        let e = CompositeState::atom(Subsystem::Atom2, Level::E).unwrap();
        assert!(dist(&apply_atomic_unitary(&f, 0, &r4).unwrap(), &e) < 1e-15);

        assert!(matches!(
            AtomicUnitary2x2::new([[ONE, ONE], [ZERO, ONE]]),
            Err(SimError::Domain(_))
        ));
        let vac = fock_state(0, &mode(2)).unwrap();
        assert!(matches!(
            apply_atomic_unitary(&vac, 0, &r4),
            Err(SimError::Shape(_))
        ));
    }

    fn seeds() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-3.0f64..3.0, 5..12)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn unitaries_preserve_norm(seed in seeds(), phi in -4.0f64..4.0, gt in -3.0f64..3.0,
                                   br in -0.8f64..0.8, bi in -0.8f64..0.8) {
            let m = mode(30);
            let subs = vec![Subsystem::Atom3, Subsystem::Atom2, Subsystem::Cavity(m)];
            let s = random_low_state(subs, 6, &seed);
            prop_assert!(tail_mass(&s, 2).unwrap() < 1e-10);

            let out = number_phase(&s, 2, phi).unwrap();
            prop_assert!((out.norm_sqr() - 1.0).abs() < 1e-10);
            let out = dispersive_lambda_evolve(&s, 0, 2, phi).unwrap();
            prop_assert!((out.norm_sqr() - 1.0).abs() < 1e-10);
            let out = jc_evolve(&s, 1, 2, gt).unwrap();
            prop_assert!((out.norm_sqr() - 1.0).abs() < 1e-10);
            let out = displace(&s, 2, c(br, bi)).unwrap();
            prop_assert!(tail_mass(&out, 2).unwrap() < 1e-10);
            prop_assert!((out.norm_sqr() - 1.0).abs() < 1e-10);
            let u = AtomicUnitary2x2::new([
                [ComplexAmp::from_polar(1.0, phi).scale(gt.cos()), ComplexAmp::from_polar(1.0, br).scale(gt.sin())],
                [-ComplexAmp::from_polar(1.0, -bi).scale(gt.sin()), ComplexAmp::from_polar(1.0, br - bi - phi).scale(gt.cos())],
            ]).unwrap();
            for idx in [0, 1] {
                let out = apply_atomic_unitary(&s, idx, &u).unwrap();
                prop_assert!((out.norm_sqr() - 1.0).abs() < 1e-10);
            }
        }

        #[test]
        fn projector_algebra(seed in seeds(), phi in -4.0f64..4.0) {
            let m = mode(12);
            let s = random_low_state(vec![Subsystem::Atom2, Subsystem::Cavity(m)], 12, &seed);
            let pp = parity_project(&s, 1, Parity::Even).unwrap();
            let pm = parity_project(&s, 1, Parity::Odd).unwrap();
            // Π₊ + Π₋ = e^{iπa†a}
            let sum = pp.add(&pm).unwrap();
            prop_assert!(dist(&sum, &number_phase(&s, 1, PI).unwrap()) < 1e-12);
            // Π₊² = Π₊, Π₋² = −Π₋
            prop_assert!(dist(&parity_project(&pp, 1, Parity::Even).unwrap(), &pp) < 1e-12);
            prop_assert!(dist(&parity_project(&pm, 1, Parity::Odd).unwrap(), &pm.scaled(-ONE)) < 1e-12);
            // commutation with the number phase
            for parity in [Parity::Even, Parity::Odd] {
                let a = parity_project(&number_phase(&s, 1, phi).unwrap(), 1, parity).unwrap();
                let b = number_phase(&parity_project(&s, 1, parity).unwrap(), 1, phi).unwrap();
                prop_assert!(dist(&a, &b) < 1e-12);
            }
        }

        #[test]
        fn jc_time_reversal(seed in seeds(), gt in -3.0f64..3.0) {
            let m = mode(10);
            let s = random_low_state(vec![Subsystem::Atom2, Subsystem::Cavity(m)], 9, &seed);
            let there = jc_evolve(&s, 0, 1, gt).unwrap();
            let back = jc_evolve(&there, 0, 1, -gt).unwrap();
            prop_assert!(dist(&back, &s) < 1e-10);
        }
    }
}
