//! Joint atom–field states over a truncated Fock space.
//!
//! A [`CompositeState`] is an ordered list of subsystems plus a flat amplitude
//! vector indexed row-major, the last subsystem varying fastest. Every
//! operation here is pure and returns a new state.

use std::fmt;

use num_complex::Complex64;

use crate::error::{Result, SimError};

/// Probability amplitude.
pub type ComplexAmp = Complex64;

/// Largest joint dimension a state may have.
pub const MAX_JOINT_DIM: usize = 1 << 26;

/// Number of top Fock levels inspected by [`tail_mass`].
pub const TAIL_LEVELS: usize = 3;

/// Default tolerance on probability lost to the Fock cutoff.
pub const DEFAULT_TAIL_TOLERANCE: f64 = 1e-8;

/// Atomic level label.
///
/// `A`, `B`, `C` belong to the three-level lambda atom (upper level `a`,
/// degenerate lower levels `b`, `c`); `F`, `E` to the two-level probe
/// (lower `f`, upper `e`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Level {
    A,
    B,
    C,
    F,
    E,
}

impl Level {
    pub fn name(self) -> &'static str {
        match self {
            Level::A => "a",
            Level::B => "b",
            Level::C => "c",
            Level::F => "f",
            Level::E => "e",
        }
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Truncated single-mode cavity descriptor.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CavityMode {
    n_max: usize,
    tail_tolerance: f64,
}

impl CavityMode {
    pub fn new(n_max: usize) -> Result<Self> {
        if n_max < 1 {
            return Err(SimError::Domain(format!("n_max must be >= 1, got {n_max}")));
        }
        Ok(Self {
            n_max,
            tail_tolerance: DEFAULT_TAIL_TOLERANCE,
        })
    }

    /// Default cutoff for protocols that displace |α⟩ to |2α⟩:
    /// `ceil(|2α|² + 6|2α| + 10)`.
    pub fn for_displaced_field(alpha: ComplexAmp) -> Self {
        let r = 2.0 * alpha.norm();
        let n_max = (r * r + 6.0 * r + 10.0).ceil() as usize;
        Self {
            n_max,
            tail_tolerance: DEFAULT_TAIL_TOLERANCE,
        }
    }

    pub fn with_tail_tolerance(mut self, tolerance: f64) -> Result<Self> {
        if !(tolerance.is_finite() && tolerance >= 0.0) {
            return Err(SimError::Domain(format!(
                "tail tolerance must be finite and non-negative, got {tolerance}"
            )));
        }
        self.tail_tolerance = tolerance;
        Ok(self)
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn dim(&self) -> usize {
        self.n_max + 1
    }

    pub fn tail_tolerance(&self) -> f64 {
        self.tail_tolerance
    }
}

/// Kind of one tensor factor of a [`CompositeState`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Subsystem {
    /// Lambda atom with levels (a, b, c).
    Atom3,
    /// Two-level atom with levels (f, e).
    Atom2,
    Cavity(CavityMode),
}

impl Subsystem {
    pub fn dim(&self) -> usize {
        match self {
            Subsystem::Atom3 => 3,
            Subsystem::Atom2 => 2,
            Subsystem::Cavity(mode) => mode.dim(),
        }
    }

    pub fn is_atom(&self) -> bool {
        !matches!(self, Subsystem::Cavity(_))
    }

    /// Levels in index order.
    pub fn levels(&self) -> &'static [Level] {
        match self {
            Subsystem::Atom3 => &[Level::A, Level::B, Level::C],
            Subsystem::Atom2 => &[Level::F, Level::E],
            Subsystem::Cavity(_) => &[],
        }
    }

    /// Basis index of an atomic level, if this subsystem has it.
    pub fn level_index(&self, level: Level) -> Option<usize> {
        self.levels().iter().position(|&l| l == level)
    }
}

/// Interaction parameters of the dispersive lambda atom.
///
/// The lower levels are degenerate, so the detuning is the same from both.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhysicalParams {
    pub g: f64,
    pub tau: f64,
    pub delta: f64,
    pub omega_a: f64,
    pub omega_b: f64,
    pub omega_c: f64,
    pub omega: f64,
}

impl PhysicalParams {
    /// Builds parameters from coupling, interaction time and level
    /// frequencies; the detuning is derived as `ω_a − ω_b − ω`.
    pub fn new(
        g: f64,
        tau: f64,
        omega_a: f64,
        omega_b: f64,
        omega_c: f64,
        omega: f64,
    ) -> Result<Self> {
        let vals = [g, tau, omega_a, omega_b, omega_c, omega];
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(SimError::Domain(
                "physical parameters must be finite".into(),
            ));
        }
        let delta = omega_a - omega_b - omega;
        let delta_c = omega_a - omega_c - omega;
        let scale = omega_a.abs().max(omega.abs()).max(1.0);
        if (delta - delta_c).abs() > 1e-12 * scale {
            return Err(SimError::Domain(format!(
                "lower levels must be degenerate: ω_a−ω_b−ω = {delta} but ω_a−ω_c−ω = {delta_c}"
            )));
        }
        if delta == 0.0 {
            return Err(SimError::Domain("detuning Δ must be non-zero".into()));
        }
        Ok(Self {
            g,
            tau,
            delta,
            omega_a,
            omega_b,
            omega_c,
            omega,
        })
    }

    /// Dispersive phase φ = 2g²τ/Δ.
    pub fn phi(&self) -> f64 {
        2.0 * self.g * self.g * self.tau / self.delta
    }
}

/// Pure state of a collection of atoms and cavity modes.
///
/// Branch states produced by measurement are left unnormalized; their
/// squared norm is the branch probability.
#[derive(Clone, Debug, PartialEq)]
pub struct CompositeState {
    subsystems: Vec<Subsystem>,
    amps: Vec<ComplexAmp>,
}

fn joint_dim(subsystems: &[Subsystem]) -> Result<usize> {
    subsystems
        .iter()
        .try_fold(1usize, |acc, s| acc.checked_mul(s.dim()))
        .filter(|&d| d <= MAX_JOINT_DIM)
        .ok_or(SimError::Capacity {
            limit: MAX_JOINT_DIM,
        })
}

impl CompositeState {
    pub fn new(subsystems: Vec<Subsystem>, amps: Vec<ComplexAmp>) -> Result<Self> {
        let dim = joint_dim(&subsystems)?;
        if amps.len() != dim {
            return Err(SimError::Shape(format!(
                "expected {dim} amplitudes, got {}",
                amps.len()
            )));
        }
        if amps.iter().any(|a| !a.re.is_finite() || !a.im.is_finite()) {
            return Err(SimError::Domain("amplitudes must be finite".into()));
        }
        Ok(Self { subsystems, amps })
    }

    /// Internal constructor for amplitudes already known to fit.
    pub(crate) fn from_raw(subsystems: Vec<Subsystem>, amps: Vec<ComplexAmp>) -> Self {
        debug_assert_eq!(
            amps.len(),
            subsystems.iter().map(Subsystem::dim).product::<usize>()
        );
        Self { subsystems, amps }
    }

    /// Basis ket of a single atom.
    pub fn atom(kind: Subsystem, level: Level) -> Result<Self> {
        let idx = kind.level_index(level).ok_or_else(|| {
            SimError::Domain(format!("level {level} does not belong to {kind:?}"))
        })?;
        let mut amps = vec![ComplexAmp::new(0.0, 0.0); kind.dim()];
        amps[idx] = ComplexAmp::new(1.0, 0.0);
        Ok(Self::from_raw(vec![kind], amps))
    }

    /// Lambda atom in `b_amp |b⟩ + c_amp |c⟩`.
    pub fn lambda_qubit(b_amp: ComplexAmp, c_amp: ComplexAmp) -> Self {
        Self::from_raw(
            vec![Subsystem::Atom3],
            vec![ComplexAmp::new(0.0, 0.0), b_amp, c_amp],
        )
    }

    /// Product basis ket with the given per-subsystem indices.
    pub fn basis(subsystems: Vec<Subsystem>, indices: &[usize]) -> Result<Self> {
        if indices.len() != subsystems.len() {
            return Err(SimError::Shape("one index per subsystem required".into()));
        }
        let dim = joint_dim(&subsystems)?;
        let mut flat = 0;
        for (s, &i) in subsystems.iter().zip(indices) {
            if i >= s.dim() {
                return Err(SimError::Domain(format!(
                    "index {i} out of range for {s:?}"
                )));
            }
            flat = flat * s.dim() + i;
        }
        let mut amps = vec![ComplexAmp::new(0.0, 0.0); dim];
        amps[flat] = ComplexAmp::new(1.0, 0.0);
        Ok(Self::from_raw(subsystems, amps))
    }

    pub fn subsystems(&self) -> &[Subsystem] {
        &self.subsystems
    }

    pub fn amps(&self) -> &[ComplexAmp] {
        &self.amps
    }

    pub fn into_amps(self) -> Vec<ComplexAmp> {
        self.amps
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    /// Distance between consecutive basis indices of subsystem `index`.
    pub fn stride(&self, index: usize) -> usize {
        self.subsystems[index + 1..]
            .iter()
            .map(Subsystem::dim)
            .product()
    }

    pub(crate) fn check_index(&self, index: usize) -> Result<Subsystem> {
        self.subsystems.get(index).copied().ok_or_else(|| {
            SimError::Shape(format!(
                "subsystem index {index} out of range for {} subsystems",
                self.subsystems.len()
            ))
        })
    }

    pub(crate) fn cavity_at(&self, index: usize) -> Result<CavityMode> {
        match self.check_index(index)? {
            Subsystem::Cavity(mode) => Ok(mode),
            other => Err(SimError::Shape(format!(
                "subsystem {index} is {other:?}, not a cavity"
            ))),
        }
    }

    pub fn scaled(&self, factor: ComplexAmp) -> Self {
        Self::from_raw(
            self.subsystems.clone(),
            self.amps.iter().map(|a| a * factor).collect(),
        )
    }

    pub fn normalized(&self) -> Result<Self> {
        let n = self.norm_sqr();
        if n <= 0.0 {
            return Err(SimError::Domain("cannot normalize the zero vector".into()));
        }
        Ok(self.scaled(ComplexAmp::new(1.0 / n.sqrt(), 0.0)))
    }

    /// ⟨self|other⟩.
    pub fn inner(&self, other: &Self) -> Result<ComplexAmp> {
        if self.subsystems != other.subsystems {
            return Err(SimError::Shape(format!(
                "subsystem lists differ: {:?} vs {:?}",
                self.subsystems, other.subsystems
            )));
        }
        Ok(self
            .amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.subsystems != other.subsystems {
            return Err(SimError::Shape(
                "cannot add states on different spaces".into(),
            ));
        }
        Ok(Self::from_raw(
            self.subsystems.clone(),
            self.amps
                .iter()
                .zip(&other.amps)
                .map(|(a, b)| a + b)
                .collect(),
        ))
    }

    /// Reorders and splits the joint space into the `keep` subsystems and the
    /// remainder, returning the dominant Schmidt factor of `keep`.
    ///
    /// For a product state `u ⊗ w` the result is exact: `kept` is `u`
    /// normalized and `rest` is `w` carrying the full norm. `weight` is the
    /// fraction of the norm captured by the product `kept ⊗ rest`; it equals
    /// 1 exactly when the split is a product.
    pub fn split(&self, keep: &[usize]) -> Result<Split> {
        let n = self.subsystems.len();
        for (i, &k) in keep.iter().enumerate() {
            self.check_index(k)?;
            if keep[..i].contains(&k) {
                return Err(SimError::Shape(format!("subsystem {k} listed twice")));
            }
        }
        if keep.is_empty() || keep.len() == n {
            return Err(SimError::Shape(
                "split needs a proper non-empty subset".into(),
            ));
        }
        let rest_idx: Vec<usize> = (0..n).filter(|i| !keep.contains(i)).collect();
        let keep_sys: Vec<Subsystem> = keep.iter().map(|&i| self.subsystems[i]).collect();
        let rest_sys: Vec<Subsystem> = rest_idx.iter().map(|&i| self.subsystems[i]).collect();
        let dk: usize = keep_sys.iter().map(Subsystem::dim).product();
        let dr: usize = rest_sys.iter().map(Subsystem::dim).product();

        // matrix[k][r], row-major
        let mut matrix = vec![ComplexAmp::new(0.0, 0.0); dk * dr];
        let dims: Vec<usize> = self.subsystems.iter().map(Subsystem::dim).collect();
        let mut digits = vec![0usize; n];
        for amp in &self.amps {
            let k = keep.iter().fold(0, |acc, &i| acc * dims[i] + digits[i]);
            let r = rest_idx.iter().fold(0, |acc, &i| acc * dims[i] + digits[i]);
            matrix[k * dr + r] = *amp;
            for i in (0..n).rev() {
                digits[i] += 1;
                if digits[i] < dims[i] {
                    break;
                }
                digits[i] = 0;
            }
        }

        // reduced density matrix on the kept factor
        let mut rho = vec![ComplexAmp::new(0.0, 0.0); dk * dk];
        for i in 0..dk {
            for j in i..dk {
                let v: ComplexAmp = (0..dr)
                    .map(|r| matrix[i * dr + r] * matrix[j * dr + r].conj())
                    .sum();
                rho[i * dk + j] = v;
                rho[j * dk + i] = v.conj();
            }
        }
        let total: f64 = (0..dk).map(|i| rho[i * dk + i].re).sum();
        if total <= 0.0 {
            return Err(SimError::Domain("cannot split the zero vector".into()));
        }
        let kept = dominant_eigenvector(&rho, dk);

        let mut rest = vec![ComplexAmp::new(0.0, 0.0); dr];
        for (k, v) in kept.iter().enumerate() {
            let vc = v.conj();
            for r in 0..dr {
                rest[r] += vc * matrix[k * dr + r];
            }
        }
        let captured: f64 = rest.iter().map(|a| a.norm_sqr()).sum();
        Ok(Split {
            kept: Self::from_raw(keep_sys, kept),
            rest: Self::from_raw(rest_sys, rest),
            weight: captured / total,
        })
    }

    /// Single-subsystem factor of a (near-)product state, normalized.
    pub fn factor(&self, index: usize) -> Result<Self> {
        if self.subsystems.len() == 1 {
            self.check_index(index)?;
            return self.normalized();
        }
        Ok(self.split(&[index])?.kept)
    }
}

/// Result of [`CompositeState::split`].
#[derive(Clone, Debug)]
pub struct Split {
    pub kept: CompositeState,
    pub rest: CompositeState,
    pub weight: f64,
}

/// Leading eigenvector of a Hermitian positive semidefinite matrix, by power
/// iteration seeded from its heaviest column.
fn dominant_eigenvector(rho: &[ComplexAmp], dim: usize) -> Vec<ComplexAmp> {
    let start = (0..dim)
        .max_by(|&a, &b| rho[a * dim + a].re.total_cmp(&rho[b * dim + b].re))
        .unwrap_or(0);
    let mut v: Vec<ComplexAmp> = (0..dim).map(|i| rho[i * dim + start]).collect();
    normalize_in_place(&mut v);
    for _ in 0..1000 {
        let mut w = vec![ComplexAmp::new(0.0, 0.0); dim];
        for i in 0..dim {
            for j in 0..dim {
                w[i] += rho[i * dim + j] * v[j];
            }
        }
        normalize_in_place(&mut w);
        // fix the phase against the previous iterate before comparing
        let overlap: ComplexAmp = v.iter().zip(&w).map(|(a, b)| a.conj() * b).sum();
        let phase = if overlap.norm() > 0.0 {
            overlap.conj() / overlap.norm()
        } else {
            ComplexAmp::new(1.0, 0.0)
        };
        let mut delta = 0.0f64;
        for (a, b) in v.iter_mut().zip(&w) {
            let nb = b * phase;
            delta = delta.max((*a - nb).norm());
            *a = nb;
        }
        if delta < 1e-15 {
            break;
        }
    }
    v
}

fn normalize_in_place(v: &mut [ComplexAmp]) {
    let n: f64 = v.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    if n > 0.0 {
        for a in v.iter_mut() {
            *a /= n;
        }
    }
}

/// Fock state |n⟩ of a single cavity.
pub fn fock_state(n: usize, mode: &CavityMode) -> Result<CompositeState> {
    if n > mode.n_max() {
        return Err(SimError::Domain(format!(
            "Fock level {n} exceeds n_max = {}",
            mode.n_max()
        )));
    }
    CompositeState::basis(vec![Subsystem::Cavity(*mode)], &[n])
}

/// Truncated coherent state together with the probability it discarded.
#[derive(Clone, Debug)]
pub struct CoherentState {
    pub state: CompositeState,
    /// Analytic probability above `n_max` removed by renormalization.
    pub discarded_mass: f64,
}

/// Analytic Poisson weight above `n_max` and the smallest cutoff meeting
/// `tolerance`.
fn coherent_tail(alpha: ComplexAmp, n_max: usize, tolerance: f64) -> (f64, usize) {
    let mean = alpha.norm_sqr();
    let horizon = (mean + 12.0 * mean.sqrt() + 60.0).ceil() as usize;
    let top = horizon.max(n_max + 1);
    let mut weights = Vec::with_capacity(top + 1);
    let mut w = (-mean).exp();
    weights.push(w);
    for n in 0..top {
        w *= mean / (n as f64 + 1.0);
        weights.push(w);
    }
    // suffix[n] = Σ_{k>n} w_k, summed from the small end
    let mut suffix = vec![0.0; top + 1];
    for n in (0..top).rev() {
        suffix[n] = suffix[n + 1] + weights[n + 1];
    }
    let required = (0..=top).find(|&n| suffix[n] <= tolerance).unwrap_or(top);
    (suffix[n_max], required.max(1))
}

/// |α⟩ truncated to the mode and renormalized.
pub fn coherent_state_with_report(alpha: ComplexAmp, mode: &CavityMode) -> Result<CoherentState> {
    if !(alpha.re.is_finite() && alpha.im.is_finite()) {
        return Err(SimError::Domain("coherent amplitude must be finite".into()));
    }
    let (tail, required) = coherent_tail(alpha, mode.n_max(), mode.tail_tolerance());
    if tail > mode.tail_tolerance() {
        return Err(SimError::Truncation {
            context: format!("coherent state |{alpha}⟩"),
            tail_mass: tail,
            tolerance: mode.tail_tolerance(),
            n_max: mode.n_max(),
            required_n_max: Some(required),
        });
    }
    let mut amps = Vec::with_capacity(mode.dim());
    let mut c = ComplexAmp::new((-alpha.norm_sqr() / 2.0).exp(), 0.0);
    amps.push(c);
    for n in 0..mode.n_max() {
        c = c * alpha / ((n + 1) as f64).sqrt();
        amps.push(c);
    }
    let kept: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
    let scale = 1.0 / kept.sqrt();
    for a in amps.iter_mut() {
        *a *= scale;
    }
    Ok(CoherentState {
        state: CompositeState::from_raw(vec![Subsystem::Cavity(*mode)], amps),
        discarded_mass: tail,
    })
}

pub fn coherent_state(alpha: ComplexAmp, mode: &CavityMode) -> Result<CompositeState> {
    coherent_state_with_report(alpha, mode).map(|c| c.state)
}

/// a ⊗ b.
pub fn tensor(a: &CompositeState, b: &CompositeState) -> Result<CompositeState> {
    let mut subsystems = a.subsystems.clone();
    subsystems.extend_from_slice(&b.subsystems);
    joint_dim(&subsystems)?;
    let amps = a
        .amps
        .iter()
        .flat_map(|x| b.amps.iter().map(move |y| x * y))
        .collect();
    Ok(CompositeState::from_raw(subsystems, amps))
}

/// |⟨a|b⟩|² for normalized states; inputs are normalized on the fly so the
/// value is also meaningful for branch states.
pub fn fidelity(a: &CompositeState, b: &CompositeState) -> Result<f64> {
    let overlap = a.inner(b)?;
    let na = a.norm_sqr();
    let nb = b.norm_sqr();
    if na <= 0.0 || nb <= 0.0 {
        return Err(SimError::Domain("fidelity of a zero vector".into()));
    }
    Ok(overlap.norm_sqr() / (na * nb))
}

/// Fraction of the state's probability on the top [`TAIL_LEVELS`] Fock levels
/// of the addressed cavity.
pub fn tail_mass(s: &CompositeState, cavity_index: usize) -> Result<f64> {
    let mode = s.cavity_at(cavity_index)?;
    let dim = mode.dim();
    let stride = s.stride(cavity_index);
    let first_tail = dim.saturating_sub(TAIL_LEVELS);
    let total = s.norm_sqr();
    if total <= 0.0 {
        return Ok(0.0);
    }
    let tail: f64 = s
        .amps
        .iter()
        .enumerate()
        .filter(|(i, _)| (i / stride) % dim >= first_tail)
        .map(|(_, a)| a.norm_sqr())
        .sum();
    Ok(tail / total)
}

/// Checks the tail of every cavity in the state against its tolerance.
pub fn check_truncation(s: &CompositeState, context: &str) -> Result<f64> {
    let mut worst = 0.0f64;
    for (i, sub) in s.subsystems.iter().enumerate() {
        if let Subsystem::Cavity(mode) = sub {
            let t = tail_mass(s, i)?;
            if t > mode.tail_tolerance() {
                return Err(SimError::Truncation {
                    context: context.to_string(),
                    tail_mass: t,
                    tolerance: mode.tail_tolerance(),
                    n_max: mode.n_max(),
                    required_n_max: None,
                });
            }
            worst = worst.max(t);
        }
    }
    Ok(worst)
}
