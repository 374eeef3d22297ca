//! EPR-pair preparation and teleportation pipelines.
//!
//! Preparation: two lambda atoms in |b⟩ cross a cavity holding |α⟩ with
//! dispersive phase π, a coherent field ±α is injected, a resonant
//! two-level probe in |f⟩ crosses the cavity and is post-selected in |e⟩.
//! The Φ variants additionally rotate the second atom with R.
//!
//! Teleportation: the unknown atom A1 and Alice's half A2 of a Ψ⁺ pair
//! (A2, A4) cross a fresh cavity in |α⟩, |α⟩ is injected, the probe is
//! post-selected in |e⟩, A1 and A2 are detected and Bob corrects A4 with
//! the identity (bb, cc) or the swap R₄ (bc, cb).
//!
//! Everything is exact in the truncated space; no large-α limit is taken.
//! The even/odd kets |±⟩ = |α⟩ ± |−α⟩ have unequal norms at finite α, but
//! after injection the |e⟩ branch only contains the |2α⟩ sector, so the
//! post-selected states are exact for every α ≠ 0.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::error::{Result, SimError};
use crate::fockspace::{
    check_truncation, coherent_state_with_report, fidelity, tensor, CavityMode, CoherentState,
    ComplexAmp, CompositeState, Level, Subsystem,
};
use crate::measurement::{
    enumerate_joint, measure, post_select, rng_from_seed, sample_index, Branch,
};
use crate::operators::{
    apply_atomic_unitary, dispersive_lambda_evolve, jc_clipped_probability, jc_evolve,
    AtomicUnitary2x2, DisplacementMatrix, PARITY_PHASE,
};

/// The four Bell states reachable by the preparation pipeline.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BellVariant {
    /// (|bb⟩ + |cc⟩)/√2
    PsiPlus,
    /// (|bb⟩ − |cc⟩)/√2
    PsiMinus,
    /// (|bc⟩ − |cb⟩)/√2
    PhiMinus,
    /// (|bc⟩ + |cb⟩)/√2
    PhiPlus,
}

impl BellVariant {
    pub const ALL: [BellVariant; 4] = [
        BellVariant::PsiPlus,
        BellVariant::PsiMinus,
        BellVariant::PhiMinus,
        BellVariant::PhiPlus,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BellVariant::PsiPlus => "psi-plus",
            BellVariant::PsiMinus => "psi-minus",
            BellVariant::PhiMinus => "phi-minus",
            BellVariant::PhiPlus => "phi-plus",
        }
    }

    /// Sign of the injected coherent field: +α for Ψ⁺/Φ⁻, −α for Ψ⁻/Φ⁺.
    pub fn injection_sign(self) -> f64 {
        match self {
            BellVariant::PsiPlus | BellVariant::PhiMinus => 1.0,
            BellVariant::PsiMinus | BellVariant::PhiPlus => -1.0,
        }
    }

    /// Φ variants are obtained by rotating the second atom with R.
    pub fn rotates_second_atom(self) -> bool {
        matches!(self, BellVariant::PhiMinus | BellVariant::PhiPlus)
    }
}

impl fmt::Display for BellVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BellVariant {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self> {
        BellVariant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| SimError::Domain(format!("unknown Bell variant '{s}'")))
    }
}

/// Ideal two-lambda-atom Bell ket.
pub fn bell_state(variant: BellVariant) -> CompositeState {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    // index = 3 * first + second, with b = 1, c = 2
    let (i, j, sign) = match variant {
        BellVariant::PsiPlus => (4, 8, 1.0),
        BellVariant::PsiMinus => (4, 8, -1.0),
        BellVariant::PhiMinus => (5, 7, -1.0),
        BellVariant::PhiPlus => (5, 7, 1.0),
    };
    let mut amps = vec![ComplexAmp::new(0.0, 0.0); 9];
    amps[i] = ComplexAmp::new(h, 0.0);
    amps[j] = ComplexAmp::new(sign * h, 0.0);
    CompositeState::new(vec![Subsystem::Atom3, Subsystem::Atom3], amps).expect("bell ket shape")
}

/// Ψ⁺, Ψ⁻, Φ⁻, Φ⁺ in that order.
pub fn bell_basis() -> [CompositeState; 4] {
    BellVariant::ALL.map(bell_state)
}

/// Numerical health of one protocol run.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Diagnostics {
    pub n_max: usize,
    /// Probability removed when the initial coherent fields were truncated.
    pub coherent_discarded_mass: f64,
    /// Largest top-level cavity mass seen between steps.
    pub max_tail_mass: f64,
    /// Probability sitting in the clipped |e, n_max⟩ level at the probe step.
    pub jc_clipped_probability: f64,
    pub displacement_unitarity_defect: f64,
    /// 1 − (Schmidt weight) when factoring atoms from the cavity after detection.
    pub separability_defect: f64,
    pub warnings: Vec<String>,
}

impl Diagnostics {
    fn merge(&mut self, other: &Diagnostics) {
        self.coherent_discarded_mass = self
            .coherent_discarded_mass
            .max(other.coherent_discarded_mass);
        self.max_tail_mass = self.max_tail_mass.max(other.max_tail_mass);
        self.jc_clipped_probability = self
            .jc_clipped_probability
            .max(other.jc_clipped_probability);
        self.displacement_unitarity_defect = self
            .displacement_unitarity_defect
            .max(other.displacement_unitarity_defect);
        self.separability_defect = self.separability_defect.max(other.separability_defect);
        self.warnings.extend(other.warnings.iter().cloned());
    }
}

/// Intermediate states of the preparation pipeline over (A1, A2, C).
#[derive(Clone, Debug)]
pub struct EprStages {
    pub alpha: ComplexAmp,
    pub variant: BellVariant,
    /// After A1 crossed the cavity; A2 still in |b⟩.
    pub after_first_atom: CompositeState,
    /// After both atoms crossed the cavity.
    pub after_second_atom: CompositeState,
    /// After injecting ±α.
    pub after_injection: CompositeState,
    pub diagnostics: Diagnostics,
}

/// Runs the preparation up to (and including) the field injection.
pub fn epr_stages(alpha: ComplexAmp, variant: BellVariant, mode: &CavityMode) -> Result<EprStages> {
    let mut diagnostics = Diagnostics {
        n_max: mode.n_max(),
        ..Diagnostics::default()
    };
    let field = coherent_state_with_report(alpha, mode)?;
    diagnostics.coherent_discarded_mass = field.discarded_mass;
    let b = CompositeState::atom(Subsystem::Atom3, Level::B)?;
    let initial = tensor(&tensor(&b, &b)?, &field.state)?;

    let after_first_atom = dispersive_lambda_evolve(&initial, 0, 2, PARITY_PHASE)?;
    let after_second_atom = dispersive_lambda_evolve(&after_first_atom, 1, 2, PARITY_PHASE)?;
    diagnostics.max_tail_mass = check_truncation(&after_second_atom, "dispersive passes")?;

    let d = DisplacementMatrix::new(alpha * variant.injection_sign(), mode)?;
    diagnostics.displacement_unitarity_defect = d.unitarity_defect();
    let after_injection = d.apply(&after_second_atom, 2)?;
    let tail = check_truncation(&after_injection, "field injection")?;
    diagnostics.max_tail_mass = diagnostics.max_tail_mass.max(tail);

    Ok(EprStages {
        alpha,
        variant,
        after_first_atom,
        after_second_atom,
        after_injection,
        diagnostics,
    })
}

/// Appends a probe in |f⟩ after the last subsystem and applies the resonant
/// interaction with the cavity at `cavity_index`.
fn probe(
    state: &CompositeState,
    cavity_index: usize,
    gt: f64,
    diagnostics: &mut Diagnostics,
) -> Result<(CompositeState, usize)> {
    let f = CompositeState::atom(Subsystem::Atom2, Level::F)?;
    let with_probe = tensor(state, &f)?;
    let probe_index = with_probe.subsystems().len() - 1;
    let clipped = jc_clipped_probability(&with_probe, probe_index, cavity_index)?;
    diagnostics.jc_clipped_probability = diagnostics.jc_clipped_probability.max(clipped);
    if let Subsystem::Cavity(mode) = with_probe.subsystems()[cavity_index] {
        if clipped > mode.tail_tolerance() {
            diagnostics.warnings.push(format!(
                "probe step: {clipped:.3e} of the probability sits in the clipped top Fock level"
            ));
        }
    }
    let evolved = jc_evolve(&with_probe, probe_index, cavity_index, gt)?;
    Ok((evolved, probe_index))
}

/// Probability of detecting the probe in |e⟩ after the injection stage.
fn e3_probability(stages: &EprStages, gt: f64) -> Result<f64> {
    let mut scratch = Diagnostics::default();
    let (evolved, probe_index) = probe(&stages.after_injection, 2, gt, &mut scratch)?;
    let branches = measure(&evolved, probe_index)?;
    Ok(branches
        .iter()
        .find(|b| b.labels[0].1 == Level::E)
        .map(|b| b.probability)
        .unwrap_or(0.0))
}

/// Outcome of the preparation pipeline.
#[derive(Clone, Debug)]
pub struct EprResult {
    pub variant: BellVariant,
    pub alpha: ComplexAmp,
    pub probe_gt: f64,
    /// Probability of the |e⟩ probe detection.
    pub success_probability: f64,
    /// Normalized state of the two lambda atoms.
    pub pair_state: CompositeState,
    /// Normalized cavity state left behind (χ_e up to normalization).
    pub field_state: CompositeState,
    pub fidelity_to_ideal: f64,
    pub diagnostics: Diagnostics,
}

/// Full preparation: dispersive passes, injection, probe, post-selection on
/// |e⟩ and, for Φ variants, the rotation R on the second atom.
pub fn prepare_epr(
    alpha: ComplexAmp,
    probe_gt: f64,
    variant: BellVariant,
    mode: &CavityMode,
) -> Result<EprResult> {
    let stages = epr_stages(alpha, variant, mode)?;
    finish_epr(&stages, probe_gt)
}

fn finish_epr(stages: &EprStages, probe_gt: f64) -> Result<EprResult> {
    let mut diagnostics = stages.diagnostics.clone();
    let (evolved, probe_index) = probe(&stages.after_injection, 2, probe_gt, &mut diagnostics)?;
    let (success_probability, conditioned) = post_select(&evolved, probe_index, Level::E)?;
    let split = conditioned.split(&[0, 1])?;
    diagnostics.separability_defect = (1.0 - split.weight).max(0.0);
    let mut pair_state = split.kept;
    if stages.variant.rotates_second_atom() {
        pair_state = apply_atomic_unitary(&pair_state, 1, &AtomicUnitary2x2::rotation_r())?;
    }
    let fidelity_to_ideal = fidelity(&pair_state, &bell_state(stages.variant))?;
    Ok(EprResult {
        variant: stages.variant,
        alpha: stages.alpha,
        probe_gt,
        success_probability,
        pair_state,
        field_state: split.rest.normalized()?,
        fidelity_to_ideal,
        diagnostics,
    })
}

/// Rounded mean photon number of the displaced field |2α⟩.
pub fn displaced_mean_photon_number(alpha: ComplexAmp) -> f64 {
    (4.0 * alpha.norm_sqr()).round()
}

/// Probe interaction time from the sharp-peak rule √n̄·gt = π/2, with n̄
/// the rounded mean photon number of |2α⟩ (the field the probe meets).
pub fn probe_pulse_heuristic(alpha: ComplexAmp) -> Result<f64> {
    if alpha.norm() == 0.0 {
        return Err(SimError::Domain(
            "probe heuristic undefined for α = 0".into(),
        ));
    }
    let nbar = displaced_mean_photon_number(alpha);
    if nbar < 1.0 {
        return Err(SimError::Domain(format!(
            "probe heuristic needs ⟨n⟩ >= 0.5 for |2α⟩, got {}",
            4.0 * alpha.norm_sqr()
        )));
    }
    Ok(PI / (2.0 * nbar.sqrt()))
}

/// Norms of the probe's conditional field states evaluated from their
/// series, χ_f = Σ C_n cos(gt√n)|n⟩ and χ_e = −i Σ C_{n+1} sin(gt√(n+1))|n⟩,
/// with C_n the untruncated Poisson amplitudes of a coherent field.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChiSeries {
    pub chi_e_norm_sqr: f64,
    pub chi_f_norm_sqr: f64,
}

pub fn chi_series(field_amplitude: ComplexAmp, gt: f64) -> ChiSeries {
    let mean = field_amplitude.norm_sqr();
    let top = (mean + 14.0 * mean.sqrt() + 80.0).ceil() as usize;
    let mut weight = (-mean).exp();
    let mut chi_e = 0.0;
    let mut chi_f = weight;
    for n in 1..=top {
        weight *= mean / n as f64;
        let theta = gt * (n as f64).sqrt();
        chi_f += weight * theta.cos().powi(2);
        chi_e += weight * theta.sin().powi(2);
    }
    ChiSeries {
        chi_e_norm_sqr: chi_e,
        chi_f_norm_sqr: chi_f,
    }
}

/// Best probe interaction time for the Ψ⁺ pipeline.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProbeOptimum {
    pub gt: f64,
    pub e3_probability: f64,
    /// ‖χ_f‖² at the optimum, from the series.
    pub chi_f_residual: f64,
    pub heuristic_gt: f64,
    pub heuristic_e3_probability: f64,
    pub heuristic_chi_f_residual: f64,
}

const OPTIMIZER_GRID: usize = 256;
const OPTIMIZER_TOLERANCE: f64 = 1e-6;

/// Grid search on (0, 2π/√n̄] followed by golden-section refinement of the
/// best bracket, maximizing the |e⟩ detection probability.
pub fn probe_pulse_optimize(alpha: ComplexAmp, mode: &CavityMode) -> Result<ProbeOptimum> {
    let heuristic_gt = probe_pulse_heuristic(alpha)?;
    let stages = epr_stages(alpha, BellVariant::PsiPlus, mode)?;
    let objective = |gt: f64| e3_probability(&stages, gt);

    let upper = 4.0 * heuristic_gt;
    let step = upper / OPTIMIZER_GRID as f64;
    let mut best = (heuristic_gt, objective(heuristic_gt)?);
    let mut best_grid = 1usize;
    let mut best_grid_value = f64::NEG_INFINITY;
    for k in 1..=OPTIMIZER_GRID {
        let gt = step * k as f64;
        let p = objective(gt)?;
        if p > best_grid_value {
            best_grid_value = p;
            best_grid = k;
        }
    }
    if best_grid_value > best.1 {
        best = (step * best_grid as f64, best_grid_value);
    }

    let (mut lo, mut hi) = (
        step * (best_grid as f64 - 1.0),
        (step * (best_grid as f64 + 1.0)).min(upper),
    );
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - ratio * (hi - lo);
    let mut x2 = lo + ratio * (hi - lo);
    let mut f1 = objective(x1)?;
    let mut f2 = objective(x2)?;
    while hi - lo > OPTIMIZER_TOLERANCE {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + ratio * (hi - lo);
            f2 = objective(x2)?;
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - ratio * (hi - lo);
            f1 = objective(x1)?;
        }
    }
    for (x, f) in [(x1, f1), (x2, f2)] {
        if f > best.1 {
            best = (x, f);
        }
    }

    let field = alpha * 2.0;
    let heuristic_e3_probability = objective(heuristic_gt)?;
    Ok(ProbeOptimum {
        gt: best.0,
        e3_probability: best.1,
        chi_f_residual: chi_series(field, best.0).chi_f_norm_sqr,
        heuristic_gt,
        heuristic_e3_probability,
        heuristic_chi_f_residual: chi_series(field, heuristic_gt).chi_f_norm_sqr,
    })
}

/// How the detections after post-selection are resolved.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RunMode {
    /// Report all four Alice outcomes.
    Enumerate,
    /// Also follow one seeded trajectory through the probe and Alice detections.
    Sample { seed: u64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct TeleportConfig {
    pub zeta: ComplexAmp,
    pub xi: ComplexAmp,
    pub alpha: ComplexAmp,
    pub probe_gt: f64,
    pub cavity: CavityMode,
    pub mode: RunMode,
}

impl TeleportConfig {
    pub fn new(
        zeta: ComplexAmp,
        xi: ComplexAmp,
        alpha: ComplexAmp,
        probe_gt: f64,
        cavity: CavityMode,
    ) -> Result<Self> {
        let norm = zeta.norm_sqr() + xi.norm_sqr();
        if norm.is_nan() || (norm - 1.0).abs() > 1e-12 {
            return Err(SimError::Domain(format!(
                "input qubit must satisfy |ζ|² + |ξ|² = 1, got {norm}"
            )));
        }
        if !probe_gt.is_finite() {
            return Err(SimError::Domain("probe gt must be finite".into()));
        }
        Ok(Self {
            zeta,
            xi,
            alpha,
            probe_gt,
            cavity,
            mode: RunMode::Enumerate,
        })
    }

    pub fn with_mode(mut self, mode: RunMode) -> Self {
        self.mode = mode;
        self
    }

    /// The input qubit ζ|b⟩ + ξ|c⟩.
    pub fn input_state(&self) -> CompositeState {
        CompositeState::lambda_qubit(self.zeta, self.xi)
    }
}

/// Bob's correction given Alice's (A1, A2) detection.
pub fn correction_for(a1: Level, a2: Level) -> Result<AtomicUnitary2x2> {
    match (a1, a2) {
        (Level::B, Level::B) | (Level::C, Level::C) => Ok(AtomicUnitary2x2::identity()),
        (Level::B, Level::C) | (Level::C, Level::B) => Ok(AtomicUnitary2x2::swap()),
        _ => Err(SimError::Domain(format!(
            "no correction defined for detection ({a1}, {a2})"
        ))),
    }
}

/// One of Alice's four detection outcomes.
#[derive(Clone, Debug)]
pub struct OutcomeRecord {
    pub levels: (Level, Level),
    /// Probability conditioned on the |e⟩ probe detection.
    pub probability: f64,
    /// Probability of the same A1/A2 detection without probe post-selection.
    pub unconditioned_probability: f64,
    /// A4 before correction, normalized.
    pub bob_state: CompositeState,
    pub corrected_state: CompositeState,
    pub correction: AtomicUnitary2x2,
    pub fidelity_before_correction: f64,
    pub fidelity_to_input: f64,
    /// Normalized cavity state left with Bob's atom.
    pub residual_field: CompositeState,
}

impl OutcomeRecord {
    pub fn label(&self) -> String {
        format!("{}{}", self.levels.0, self.levels.1)
    }
}

/// A single seeded trajectory.
#[derive(Clone, Debug, PartialEq)]
pub struct SampledPath {
    pub seed: u64,
    pub probe_level: Level,
    /// Alice's detection; `None` when the probe came out in |f⟩ (failed run).
    pub outcome: Option<(Level, Level)>,
    pub fidelity_to_input: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct TeleportResult {
    pub e3_probability: f64,
    /// Probability of the failed run (probe found in |f⟩).
    pub failure_probability: f64,
    /// Success probability of the EPR pair preparation that fed this run.
    pub epr_success_probability: f64,
    pub epr_fidelity: f64,
    /// In the order bb, cc, bc, cb.
    pub outcomes: Vec<OutcomeRecord>,
    pub sampled_path: Option<SampledPath>,
    pub diagnostics: Diagnostics,
}

impl TeleportResult {
    pub fn outcome(&self, a1: Level, a2: Level) -> Option<&OutcomeRecord> {
        self.outcomes.iter().find(|o| o.levels == (a1, a2))
    }
}

/// Alice's detection outcomes in reporting order.
pub const OUTCOME_ORDER: [(Level, Level); 4] = [
    (Level::B, Level::B),
    (Level::C, Level::C),
    (Level::B, Level::C),
    (Level::C, Level::B),
];

fn find_branch(branches: &[Branch], a1: Level, a2: Level) -> Option<&Branch> {
    branches.iter().find(|b| b.levels() == [a1, a2])
}

/// Field, probe time and Bell pair shared by teleportations of many inputs.
#[derive(Clone, Debug)]
pub struct Teleporter {
    alpha: ComplexAmp,
    probe_gt: f64,
    cavity: CavityMode,
    epr: EprResult,
    field: CoherentState,
    displacement: DisplacementMatrix,
}

impl Teleporter {
    pub fn new(alpha: ComplexAmp, probe_gt: f64, cavity: CavityMode) -> Result<Self> {
        if !probe_gt.is_finite() {
            return Err(SimError::Domain("probe gt must be finite".into()));
        }
        let epr = prepare_epr(alpha, probe_gt, BellVariant::PsiPlus, &cavity)?;
        Ok(Self {
            alpha,
            probe_gt,
            cavity,
            epr,
            field: coherent_state_with_report(alpha, &cavity)?,
            displacement: DisplacementMatrix::new(alpha, &cavity)?,
        })
    }

    /// The prepared (A2, A4) pair.
    pub fn pair(&self) -> &EprResult {
        &self.epr
    }

    pub fn run(&self, zeta: ComplexAmp, xi: ComplexAmp, mode: RunMode) -> Result<TeleportResult> {
        let config =
            TeleportConfig::new(zeta, xi, self.alpha, self.probe_gt, self.cavity)?.with_mode(mode);
        self.run_config(&config)
    }

    fn run_config(&self, config: &TeleportConfig) -> Result<TeleportResult> {
        let mut diagnostics = self.epr.diagnostics.clone();

        // (A1, A2, A4, C)
        let input = config.input_state();
        let initial = tensor(&tensor(&input, &self.epr.pair_state)?, &self.field.state)?;
        let crossed = dispersive_lambda_evolve(&initial, 0, 3, PARITY_PHASE)?;
        let crossed = dispersive_lambda_evolve(&crossed, 1, 3, PARITY_PHASE)?;
        let unconditioned = enumerate_joint(&crossed, &[0, 1])?;

        let injected = self.displacement.apply(&crossed, 3)?;
        let tail = check_truncation(&injected, "teleportation field injection")?;
        let mut stage = Diagnostics {
            n_max: self.cavity.n_max(),
            coherent_discarded_mass: self.field.discarded_mass,
            max_tail_mass: tail,
            displacement_unitarity_defect: self.displacement.unitarity_defect(),
            ..Diagnostics::default()
        };

        // (A1, A2, A4, C, A3)
        let (probed, probe_index) = probe(&injected, 3, self.probe_gt, &mut stage)?;
        let (e3_probability, conditioned) = post_select(&probed, probe_index, Level::E)?;
        let alice = enumerate_joint(&conditioned, &[0, 1])?;

        let mut outcomes = Vec::with_capacity(4);
        for (a1, a2) in OUTCOME_ORDER {
            let Some(branch) = find_branch(&alice, a1, a2) else {
                return Err(SimError::PostSelectionImpossible {
                    what: format!("Alice detection ({a1}, {a2})"),
                    probability: 0.0,
                });
            };
            // (A4, C)
            let split = branch.state.split(&[0])?;
            stage.separability_defect =
                stage.separability_defect.max((1.0 - split.weight).max(0.0));
            let bob_state = split.kept;
            let correction = correction_for(a1, a2)?;
            let corrected_state = apply_atomic_unitary(&bob_state, 0, &correction)?;
            outcomes.push(OutcomeRecord {
                levels: (a1, a2),
                probability: branch.probability,
                unconditioned_probability: find_branch(&unconditioned, a1, a2)
                    .map(|b| b.probability)
                    .unwrap_or(0.0),
                fidelity_before_correction: fidelity(&bob_state, &input)?,
                fidelity_to_input: fidelity(&corrected_state, &input)?,
                bob_state,
                corrected_state,
                correction,
                residual_field: split.rest.normalized()?,
            });
        }

        let sampled_path = match config.mode {
            RunMode::Enumerate => None,
            RunMode::Sample { seed } => {
                Some(sample_path(seed, &probed, probe_index, &alice, &outcomes)?)
            }
        };

        diagnostics.merge(&stage);
        Ok(TeleportResult {
            e3_probability,
            failure_probability: 1.0 - e3_probability,
            epr_success_probability: self.epr.success_probability,
            epr_fidelity: self.epr.fidelity_to_ideal,
            outcomes,
            sampled_path,
            diagnostics,
        })
    }
}

/// Teleports ζ|b⟩ + ξ|c⟩ from A1 to A4 through a Ψ⁺ pair (A2, A4).
pub fn teleport(config: &TeleportConfig) -> Result<TeleportResult> {
    Teleporter::new(config.alpha, config.probe_gt, config.cavity)?.run_config(config)
}

fn sample_path(
    seed: u64,
    probed: &CompositeState,
    probe_index: usize,
    alice: &[Branch],
    outcomes: &[OutcomeRecord],
) -> Result<SampledPath> {
    let mut rng = rng_from_seed(seed);
    let probe_branches = measure(probed, probe_index)?;
    let probe_level = probe_branches[sample_index(&probe_branches, &mut rng)?].labels[0].1;
    if probe_level != Level::E {
        return Ok(SampledPath {
            seed,
            probe_level,
            outcome: None,
            fidelity_to_input: None,
        });
    }
    let levels = alice[sample_index(alice, &mut rng)?].levels();
    let outcome = (levels[0], levels[1]);
    let fid = outcomes
        .iter()
        .find(|o| o.levels == outcome)
        .map(|o| o.fidelity_to_input);
    Ok(SampledPath {
        seed,
        probe_level,
        outcome: Some(outcome),
        fidelity_to_input: fid,
    })
}

/// Uniform random input qubit on the Bloch sphere.
pub fn random_input<R: Rng + ?Sized>(rng: &mut R) -> (ComplexAmp, ComplexAmp) {
    let cos_theta: f64 = 1.0 - 2.0 * rng.gen::<f64>();
    let phi: f64 = 2.0 * PI * rng.gen::<f64>();
    bloch_input(cos_theta.clamp(-1.0, 1.0).acos(), phi)
}

/// ζ = cos(θ/2), ξ = e^{iφ} sin(θ/2).
pub fn bloch_input(theta: f64, phi: f64) -> (ComplexAmp, ComplexAmp) {
    (
        ComplexAmp::new((theta / 2.0).cos(), 0.0),
        ComplexAmp::from_polar((theta / 2.0).sin(), phi),
    )
}
