//! The five subcommands. Each turns resolved [`Settings`] into a [`Report`].

use cqed_teleport::fockspace::fidelity;
use cqed_teleport::operators::{apply_atomic_unitary, AtomicUnitary2x2};
use cqed_teleport::protocols::{
    bell_basis, bell_state, bloch_input, prepare_epr, probe_pulse_heuristic, probe_pulse_optimize,
    random_input, teleport, BellVariant, EprResult, RunMode, TeleportConfig,
};
use cqed_teleport::qubitmodel::compare_models;
use cqed_teleport::{CavityMode, ComplexAmp, SimError};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::report::{format_float, Cell, Report};
use crate::settings::Settings;
use crate::CliError;

/// Gram-matrix and rotation-table tolerance for `bell-check`.
pub const BELL_TOLERANCE: f64 = 1e-12;
/// Corrected-fidelity agreement required by `compare-models`.
pub const FIDELITY_AGREEMENT: f64 = 1e-8;
/// Hand-typed input amplitudes are renormalized if this close to unit norm.
const INPUT_NORM_SLACK: f64 = 1e-6;

/// A finished command: the report to write, warnings, and an optional
/// failure that sets the exit code after the report is written.
#[derive(Debug)]
pub struct CommandOutput {
    pub report: Report,
    pub warnings: Vec<String>,
    pub failure: Option<CliError>,
}

impl CommandOutput {
    fn ok(report: Report) -> Self {
        Self {
            report,
            warnings: Vec::new(),
            failure: None,
        }
    }
}

/// Configuration echo: command name, every setting, then resolved values.
struct Echo(Vec<(String, String)>);

impl Echo {
    fn new(s: &Settings) -> Self {
        let mut v = vec![("command".to_string(), s.command().to_string())];
        v.extend(
            s.entries()
                .iter()
                .map(|(k, val)| (k.to_string(), val.clone())),
        );
        Self(v)
    }

    fn resolved(&mut self, key: &str, value: impl ToString) {
        self.0.push((format!("resolved.{key}"), value.to_string()));
    }
}

fn alpha(s: &Settings) -> Result<ComplexAmp, CliError> {
    Ok(ComplexAmp::new(s.float("alpha")?, s.float("alpha-im")?))
}

fn cavity_mode(s: &Settings, alpha: ComplexAmp) -> Result<CavityMode, CliError> {
    let tol = s.float("tail-tolerance")?;
    if tol <= 0.0 {
        return Err(CliError::Usage("'tail-tolerance' must be positive".into()));
    }
    let mode = match s.raw("nmax") {
        "auto" => CavityMode::for_displaced_field(alpha),
        _ => {
            let n: usize = s.parse("nmax")?;
            CavityMode::new(n).map_err(|e| CliError::Usage(format!("'nmax': {e}")))?
        }
    };
    mode.with_tail_tolerance(tol)
        .map_err(|e| CliError::Usage(format!("'tail-tolerance': {e}")))
}

#[derive(Clone, Copy, Debug)]
enum GtRule {
    Heuristic,
    Optimize,
    Value(f64),
}

impl GtRule {
    fn from_settings(s: &Settings) -> Result<Self, CliError> {
        match s.raw("gt") {
            "heuristic" => Ok(Self::Heuristic),
            "optimize" => Ok(Self::Optimize),
            _ => Ok(Self::Value(s.float("gt")?)),
        }
    }

    fn resolve(self, alpha: ComplexAmp, mode: &CavityMode) -> Result<f64, SimError> {
        match self {
            Self::Heuristic => probe_pulse_heuristic(alpha),
            Self::Optimize => probe_pulse_optimize(alpha, mode).map(|o| o.gt),
            Self::Value(v) => Ok(v),
        }
    }
}

fn parse_variant(raw: &str) -> Result<BellVariant, CliError> {
    raw.parse::<BellVariant>()
        .map_err(|_| CliError::Usage(format!("unknown variant '{raw}'")))
}

/// Input qubit from `random-input`, the ζ/ξ amplitudes, or the Bloch angles.
fn input_qubit(s: &Settings) -> Result<(ComplexAmp, ComplexAmp, &'static str), CliError> {
    let amp_keys = ["zeta-re", "zeta-im", "xi-re", "xi-im"];
    let by_amps = amp_keys.iter().any(|k| s.is_set(k));
    let by_angles = s.is_set("theta") || s.is_set("phi");
    let random = s.flag("random-input")?;
    if [by_amps, by_angles, random].iter().filter(|b| **b).count() > 1 {
        return Err(CliError::Usage(
            "give the input either as random-input, as zeta/xi amplitudes or as theta/phi".into(),
        ));
    }
    if random {
        let mut rng = ChaCha8Rng::seed_from_u64(s.parse("seed")?);
        rng.set_stream(1);
        let (z, x) = random_input(&mut rng);
        return Ok((z, x, "random"));
    }
    if by_amps {
        let z = ComplexAmp::new(s.float_or("zeta-re", 0.0)?, s.float_or("zeta-im", 0.0)?);
        let x = ComplexAmp::new(s.float_or("xi-re", 0.0)?, s.float_or("xi-im", 0.0)?);
        let norm = z.norm_sqr() + x.norm_sqr();
        if (norm - 1.0).abs() > INPUT_NORM_SLACK {
            return Err(CliError::Usage(format!(
                "input amplitudes have |ζ|² + |ξ|² = {norm}, expected 1"
            )));
        }
        let n = norm.sqrt();
        return Ok((z / n, x / n, "amplitudes"));
    }
    let (z, x) = bloch_input(s.float_or("theta", 0.0)?, s.float_or("phi", 0.0)?);
    Ok((z, x, "bloch"))
}

fn echo_input(echo: &mut Echo, zeta: ComplexAmp, xi: ComplexAmp, source: &str) {
    echo.resolved("input", source);
    echo.resolved("zeta_re", format_float(zeta.re));
    echo.resolved("zeta_im", format_float(zeta.im));
    echo.resolved("xi_re", format_float(xi.re));
    echo.resolved("xi_im", format_float(xi.im));
}

pub const EPR_COLUMNS: &[&str] = &[
    "variant",
    "alpha_re",
    "alpha_im",
    "gt",
    "n_max",
    "success_probability",
    "fidelity_to_ideal",
    "tail_mass",
    "coherent_discarded_mass",
    "jc_clipped_probability",
];

fn epr_row(r: &EprResult) -> Vec<Cell> {
    vec![
        r.variant.name().into(),
        r.alpha.re.into(),
        r.alpha.im.into(),
        r.probe_gt.into(),
        r.diagnostics.n_max.into(),
        r.success_probability.into(),
        r.fidelity_to_ideal.into(),
        r.diagnostics.max_tail_mass.into(),
        r.diagnostics.coherent_discarded_mass.into(),
        r.diagnostics.jc_clipped_probability.into(),
    ]
}

pub fn epr(s: &Settings) -> Result<CommandOutput, CliError> {
    let variants: Vec<BellVariant> = match s.raw("variant") {
        "all" => BellVariant::ALL.to_vec(),
        raw => vec![parse_variant(raw)?],
    };
    let alpha = alpha(s)?;
    let mode = cavity_mode(s, alpha)?;
    let rule = GtRule::from_settings(s)?;
    let mut echo = Echo::new(s);
    let mut summary: Vec<(&'static str, Cell)> = Vec::new();
    let gt = match rule {
        GtRule::Optimize => {
            let opt = probe_pulse_optimize(alpha, &mode)?;
            summary = vec![
                ("optimized_gt", opt.gt.into()),
                ("e3_probability", opt.e3_probability.into()),
                ("chi_f_residual", opt.chi_f_residual.into()),
                ("heuristic_gt", opt.heuristic_gt.into()),
                (
                    "heuristic_e3_probability",
                    opt.heuristic_e3_probability.into(),
                ),
                (
                    "heuristic_chi_f_residual",
                    opt.heuristic_chi_f_residual.into(),
                ),
            ];
            opt.gt
        }
        other => other.resolve(alpha, &mode)?,
    };
    echo.resolved("nmax", mode.n_max());
    echo.resolved("gt", format_float(gt));

    let mut report = Report::new(echo.0, EPR_COLUMNS);
    let mut warnings = Vec::new();
    for v in variants {
        let r = prepare_epr(alpha, gt, v, &mode)?;
        warnings.extend(r.diagnostics.warnings.iter().cloned());
        report.push_row(epr_row(&r));
    }
    if !summary.is_empty() {
        report.push_summary(summary);
    }
    Ok(CommandOutput {
        report,
        warnings,
        failure: None,
    })
}

pub const TELEPORT_COLUMNS: &[&str] = &[
    "outcome",
    "probability",
    "unconditioned_probability",
    "fidelity_before_correction",
    "fidelity_after_correction",
    "correction",
    "sampled",
];

pub fn teleport_cmd(s: &Settings) -> Result<CommandOutput, CliError> {
    let alpha = alpha(s)?;
    let mode = cavity_mode(s, alpha)?;
    let rule = GtRule::from_settings(s)?;
    let run_mode = match s.choice("mode", &["enumerate", "sample"])? {
        "sample" => RunMode::Sample {
            seed: s.parse("seed")?,
        },
        _ => RunMode::Enumerate,
    };
    let (zeta, xi, source) = input_qubit(s)?;
    let gt = rule.resolve(alpha, &mode)?;

    let mut echo = Echo::new(s);
    echo.resolved("nmax", mode.n_max());
    echo.resolved("gt", format_float(gt));
    echo_input(&mut echo, zeta, xi, source);

    let config = TeleportConfig::new(zeta, xi, alpha, gt, mode)?.with_mode(run_mode);
    let result = teleport(&config)?;

    let sampled = result.sampled_path.as_ref().and_then(|p| p.outcome);
    let mut report = Report::new(echo.0, TELEPORT_COLUMNS);
    for o in &result.outcomes {
        let correction = if o.levels.0 == o.levels.1 {
            "identity"
        } else {
            "swap"
        };
        let sampled_cell = match run_mode {
            RunMode::Enumerate => Cell::Empty,
            RunMode::Sample { .. } => (sampled == Some(o.levels)).into(),
        };
        report.push_row(vec![
            o.label().into(),
            o.probability.into(),
            o.unconditioned_probability.into(),
            o.fidelity_before_correction.into(),
            o.fidelity_to_input.into(),
            correction.into(),
            sampled_cell,
        ]);
    }
    let d = &result.diagnostics;
    report.push_summary(vec![
        ("e3_probability", result.e3_probability.into()),
        ("failure_probability", result.failure_probability.into()),
        (
            "epr_success_probability",
            result.epr_success_probability.into(),
        ),
        ("epr_fidelity", result.epr_fidelity.into()),
        ("gt", gt.into()),
        ("n_max", d.n_max.into()),
        ("tail_mass", d.max_tail_mass.into()),
        ("jc_clipped_probability", d.jc_clipped_probability.into()),
        ("separability_defect", d.separability_defect.into()),
    ]);
    if let Some(path) = &result.sampled_path {
        report.push_summary(vec![
            ("trajectory_seed", Cell::Text(path.seed.to_string())),
            ("probe_level", path.probe_level.name().into()),
            (
                "outcome",
                path.outcome.map(|(a, b)| format!("{a}{b}")).into(),
            ),
            ("fidelity_after_correction", path.fidelity_to_input.into()),
        ]);
    }
    Ok(CommandOutput {
        report,
        warnings: d.warnings.clone(),
        failure: None,
    })
}

pub const SWEEP_COLUMNS: &[&str] = &[
    "index",
    "alpha_re",
    "alpha_im",
    "gt",
    "n_max",
    "success_probability",
    "fidelity_to_ideal",
    "tail_mass",
    "status",
    "exit_code",
    "message",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum SweepVariable {
    Alpha,
    Gt,
}

/// Validated grid description.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepSpec {
    variable: SweepVariable,
    start: f64,
    stop: f64,
    steps: usize,
}

impl SweepSpec {
    fn from_settings(s: &Settings) -> Result<Self, CliError> {
        let variable = match s.choice("variable", &["alpha", "gt"])? {
            "gt" => SweepVariable::Gt,
            _ => SweepVariable::Alpha,
        };
        let (start, stop, steps) = (
            s.float("start")?,
            s.float("stop")?,
            s.parse::<usize>("steps")?,
        );
        if steps < 2 {
            return Err(CliError::Usage(format!(
                "'steps' must be at least 2, got {steps}"
            )));
        }
        if start >= stop {
            return Err(CliError::Usage(format!(
                "'start' ({start}) must be below 'stop' ({stop})"
            )));
        }
        Ok(Self {
            variable,
            start,
            stop,
            steps,
        })
    }

    /// Grid including both endpoints.
    pub fn points(&self) -> Vec<f64> {
        let h = (self.stop - self.start) / (self.steps - 1) as f64;
        (0..self.steps)
            .map(|i| {
                if i + 1 == self.steps {
                    self.stop
                } else {
                    self.start + h * i as f64
                }
            })
            .collect()
    }
}

struct SweepPoint {
    alpha: ComplexAmp,
    gt: Option<f64>,
    n_max: Option<usize>,
    result: Result<EprResult, CliError>,
}

pub fn sweep(s: &Settings) -> Result<CommandOutput, CliError> {
    let spec = SweepSpec::from_settings(s)?;
    let variant = parse_variant(s.raw("variant"))?;
    let base_alpha = alpha(s)?;
    let rule = GtRule::from_settings(s)?;
    cavity_mode(s, base_alpha)?;
    let jobs: usize = s.parse("jobs")?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start {jobs} workers: {e}")))?;

    let grid = spec.points();
    let points: Vec<SweepPoint> = pool.install(|| {
        grid.par_iter()
            .map(|&x| {
                let (alpha, rule) = match spec.variable {
                    SweepVariable::Alpha => (ComplexAmp::new(x, base_alpha.im), rule),
                    SweepVariable::Gt => (base_alpha, GtRule::Value(x)),
                };
                sweep_point(s, alpha, rule, variant)
            })
            .collect()
    });

    let mut echo = Echo::new(s);
    echo.resolved(
        "grid",
        format!("{} points from {} to {}", spec.steps, spec.start, spec.stop),
    );
    let mut report = Report::new(echo.0, SWEEP_COLUMNS);
    let mut failed = 0usize;
    let mut best: Option<(usize, f64, f64)> = None;
    for (i, p) in points.iter().enumerate() {
        let mut row: Vec<Cell> = vec![
            i.into(),
            p.alpha.re.into(),
            p.alpha.im.into(),
            p.gt.into(),
            p.n_max.into(),
        ];
        match &p.result {
            Ok(r) => {
                if best.is_none_or(|(_, _, b)| r.success_probability > b) {
                    best = Some((i, r.probe_gt, r.success_probability));
                }
                row.extend([
                    r.success_probability.into(),
                    r.fidelity_to_ideal.into(),
                    r.diagnostics.max_tail_mass.into(),
                    "ok".into(),
                    Cell::Int(0),
                    Cell::Empty,
                ]);
            }
            Err(e) => {
                failed += 1;
                row.extend([
                    Cell::Empty,
                    Cell::Empty,
                    Cell::Empty,
                    "error".into(),
                    Cell::Int(e.exit_code() as i64),
                    e.to_string().into(),
                ]);
            }
        }
        report.push_row(row);
    }
    report.push_summary(vec![
        ("points", grid.len().into()),
        ("failed", failed.into()),
        ("best_index", best.map(|b| b.0).into()),
        ("best_gt", best.map(|b| b.1).into()),
        ("best_success_probability", best.map(|b| b.2).into()),
    ]);
    Ok(CommandOutput::ok(report))
}

fn sweep_point(s: &Settings, alpha: ComplexAmp, rule: GtRule, variant: BellVariant) -> SweepPoint {
    let mode = match cavity_mode(s, alpha) {
        Ok(m) => m,
        Err(e) => {
            return SweepPoint {
                alpha,
                gt: None,
                n_max: None,
                result: Err(e),
            }
        }
    };
    let gt = rule.resolve(alpha, &mode);
    let result = gt
        .clone()
        .and_then(|gt| prepare_epr(alpha, gt, variant, &mode))
        .map_err(CliError::from);
    SweepPoint {
        alpha,
        gt: gt.ok(),
        n_max: Some(mode.n_max()),
        result,
    }
}

pub const BELL_COLUMNS: &[&str] = &[
    "check",
    "left",
    "right",
    "value_re",
    "value_im",
    "expected",
    "deviation",
    "status",
];

pub fn bell_check(s: &Settings) -> Result<CommandOutput, CliError> {
    let mut report = Report::new(Echo::new(s).0, BELL_COLUMNS);
    let mut first_failure: Option<String> = None;
    let mut record = |report: &mut Report,
                      check: &str,
                      left: &str,
                      right: &str,
                      value: ComplexAmp,
                      expected: f64| {
        let deviation = (value - expected).norm();
        let pass = deviation <= BELL_TOLERANCE;
        if !pass && first_failure.is_none() {
            first_failure = Some(format!("{check} {left} {right}: deviation {deviation:.3e}"));
        }
        report.push_row(vec![
            check.into(),
            left.into(),
            right.into(),
            value.re.into(),
            value.im.into(),
            expected.into(),
            deviation.into(),
            if pass { "pass" } else { "fail" }.into(),
        ]);
    };

    let basis = bell_basis();
    for (i, a) in BellVariant::ALL.iter().enumerate() {
        for (j, b) in BellVariant::ALL.iter().enumerate() {
            let g = basis[i].inner(&basis[j])?;
            record(
                &mut report,
                "gram",
                a.name(),
                b.name(),
                g,
                if i == j { 1.0 } else { 0.0 },
            );
        }
    }
    let r = AtomicUnitary2x2::rotation_r();
    for (from, to) in [
        (BellVariant::PsiPlus, BellVariant::PhiMinus),
        (BellVariant::PsiMinus, BellVariant::PhiPlus),
    ] {
        let rotated = apply_atomic_unitary(&bell_state(from), 1, &r)?;
        let f = fidelity(&rotated, &bell_state(to))?;
        record(
            &mut report,
            "rotate-second-atom",
            from.name(),
            to.name(),
            ComplexAmp::new(f, 0.0),
            1.0,
        );
    }
    let failure = first_failure.map(CliError::Check);
    Ok(CommandOutput {
        report,
        warnings: Vec::new(),
        failure,
    })
}

pub const COMPARE_COLUMNS: &[&str] = &[
    "outcome",
    "physical_probability",
    "qubit_probability",
    "probability_deviation",
    "physical_unconditioned_probability",
    "qubit_unconditioned_probability",
    "unconditioned_deviation",
    "physical_fidelity",
    "qubit_fidelity",
    "fidelity_deviation",
];

pub fn compare(s: &Settings) -> Result<CommandOutput, CliError> {
    let alpha = alpha(s)?;
    let mode = cavity_mode(s, alpha)?;
    let (zeta, xi, source) = input_qubit(s)?;
    let mut echo = Echo::new(s);
    echo.resolved("nmax", mode.n_max());
    echo_input(&mut echo, zeta, xi, source);

    let cmp = compare_models(zeta, xi, alpha, &mode)?;
    let mut report = Report::new(echo.0, COMPARE_COLUMNS);
    for r in &cmp.rows {
        report.push_row(vec![
            r.label.clone().into(),
            r.physical_probability.into(),
            r.qubit_probability.into(),
            (r.physical_probability - r.qubit_probability).abs().into(),
            r.physical_unconditioned_probability.into(),
            r.qubit_unconditioned_probability.into(),
            (r.physical_unconditioned_probability - r.qubit_unconditioned_probability)
                .abs()
                .into(),
            r.physical_fidelity.into(),
            r.qubit_fidelity.into(),
            (r.physical_fidelity - r.qubit_fidelity).abs().into(),
        ]);
    }
    report.push_summary(vec![
        ("gt", cmp.probe_gt.into()),
        ("e3_probability", cmp.e3_probability.into()),
        ("merge_probability", cmp.merge_probability.into()),
        ("postselected_deviation", cmp.postselected_deviation.into()),
        (
            "unconditioned_deviation",
            cmp.unconditioned_deviation.into(),
        ),
        (
            "max_probability_deviation",
            cmp.max_probability_deviation.into(),
        ),
        ("bound", cmp.bound.into()),
        ("within_bound", cmp.within_bound().into()),
        ("max_fidelity_deviation", cmp.max_fidelity_deviation.into()),
    ]);
    let failure = if let Err(e) = cmp.ensure_within_bound() {
        Some(CliError::Sim(e))
    } else if cmp.max_fidelity_deviation > FIDELITY_AGREEMENT {
        Some(CliError::Check(format!(
            "corrected fidelities differ by {:.3e}",
            cmp.max_fidelity_deviation
        )))
    } else {
        None
    };
    Ok(CommandOutput {
        report,
        warnings: Vec::new(),
        failure,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::settings::{Settings, SWEEP_KEYS, TELEPORT_KEYS};
    use std::f64::consts::FRAC_1_SQRT_2;

    fn settings(
        keys: &[crate::settings::Key],
        cmd: &'static str,
        flags: &[(&'static str, &str)],
    ) -> Settings {
        let flags: Vec<(&'static str, String)> =
            flags.iter().map(|(k, v)| (*k, v.to_string())).collect();
        Settings::resolve(cmd, keys, &[], &flags).unwrap()
    }

    #[test]
    fn sweep_grid_includes_endpoints() {
        let s = settings(
            SWEEP_KEYS,
            "sweep",
            &[("start", "0.5"), ("stop", "3"), ("steps", "6")],
        );
        let p = SweepSpec::from_settings(&s).unwrap().points();
        assert_eq!(p.len(), 6);
        assert_eq!(p[0], 0.5);
        assert_eq!(p[5], 3.0);
        assert!((p[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn sweep_spec_validation() {
        let bad = [
            [("start", "0.5"), ("stop", "3"), ("steps", "1")],
            [("start", "3"), ("stop", "0.5"), ("steps", "4")],
            [("start", "1"), ("stop", "1"), ("steps", "4")],
        ];
        for flags in bad {
            let s = settings(SWEEP_KEYS, "sweep", &flags);
            assert!(matches!(
                SweepSpec::from_settings(&s),
                Err(CliError::Usage(_))
            ));
        }
    }

    #[test]
    fn input_sources() {
        let s = settings(TELEPORT_KEYS, "teleport", &[]);
        let (z, x, src) = input_qubit(&s).unwrap();
        assert_eq!(
            (z, x, src),
            (
                ComplexAmp::new(1.0, 0.0),
                ComplexAmp::new(0.0, 0.0),
                "bloch"
            )
        );

        let s = settings(TELEPORT_KEYS, "teleport", &[("xi-im", "1")]);
        let (z, x, _) = input_qubit(&s).unwrap();
        assert_eq!(z, ComplexAmp::new(0.0, 0.0));
        assert_eq!(x, ComplexAmp::new(0.0, 1.0));

        let s = settings(
            TELEPORT_KEYS,
            "teleport",
            &[("zeta-re", "0.7071068"), ("xi-re", "0.7071068")],
        );
        let (z, x, _) = input_qubit(&s).unwrap();
        assert!((z.re - FRAC_1_SQRT_2).abs() < 1e-15 && (x.re - FRAC_1_SQRT_2).abs() < 1e-15);

        let s = settings(TELEPORT_KEYS, "teleport", &[("zeta-re", "0.5")]);
        assert!(matches!(input_qubit(&s), Err(CliError::Usage(_))));
        let s = settings(
            TELEPORT_KEYS,
            "teleport",
            &[("theta", "1"), ("random-input", "true")],
        );
        assert!(matches!(input_qubit(&s), Err(CliError::Usage(_))));
    }

    #[test]
    fn random_input_depends_on_seed_only() {
        let a = settings(
            TELEPORT_KEYS,
            "teleport",
            &[("random-input", "true"), ("seed", "9")],
        );
        let b = settings(
            TELEPORT_KEYS,
            "teleport",
            &[("random-input", "true"), ("seed", "10")],
        );
        assert_eq!(input_qubit(&a).unwrap(), input_qubit(&a).unwrap());
        assert_ne!(input_qubit(&a).unwrap(), input_qubit(&b).unwrap());
    }
}
