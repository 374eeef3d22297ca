//! Projective measurement of atoms, joint branch enumeration, post-selection
//! and seeded branch sampling.
//!
//! Measured atoms are removed from the branch state. Branch states are left
//! unnormalized with squared norm equal to the branch probability.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Result, SimError};
use crate::fockspace::{CompositeState, Level, Subsystem};

/// Branches at or below this probability are treated as absent.
pub const PROBABILITY_FLOOR: f64 = 1e-15;

/// One measurement outcome.
#[derive(Clone, Debug)]
pub struct Branch {
    /// (subsystem index in the measured state, detected level), in the order
    /// the subsystems were requested.
    pub labels: Vec<(usize, Level)>,
    pub state: CompositeState,
    pub probability: f64,
}

impl Branch {
    pub fn levels(&self) -> Vec<Level> {
        self.labels.iter().map(|&(_, l)| l).collect()
    }

    pub fn normalized_state(&self) -> Result<CompositeState> {
        self.state.normalized()
    }
}

fn check_atoms(s: &CompositeState, indices: &[usize]) -> Result<()> {
    for (i, &k) in indices.iter().enumerate() {
        match s.check_index(k)? {
            Subsystem::Cavity(_) => {
                return Err(SimError::Unsupported(format!(
                    "subsystem {k} is a cavity; only atoms can be detected"
                )))
            }
            _ => {
                if indices[..i].contains(&k) {
                    return Err(SimError::Shape(format!("subsystem {k} listed twice")));
                }
            }
        }
    }
    Ok(())
}

/// Projects the addressed atoms onto the given basis indices and drops them
/// from the subsystem list. Amplitudes are scaled by `scale`.
fn project(s: &CompositeState, indices: &[usize], digits: &[usize], scale: f64) -> CompositeState {
    let n = s.subsystems().len();
    let dims: Vec<usize> = s.subsystems().iter().map(Subsystem::dim).collect();
    let remaining: Vec<Subsystem> = (0..n)
        .filter(|i| !indices.contains(i))
        .map(|i| s.subsystems()[i])
        .collect();
    let out_dim: usize = remaining.iter().map(Subsystem::dim).product();
    let mut out = Vec::with_capacity(out_dim);
    let mut cursor = vec![0usize; n];
    for (pos, &k) in indices.iter().enumerate() {
        cursor[k] = digits[pos];
    }
    // iterate the remaining subsystems row-major with measured digits pinned
    let free: Vec<usize> = (0..n).filter(|i| !indices.contains(i)).collect();
    let strides: Vec<usize> = (0..n).map(|i| dims[i + 1..].iter().product()).collect();
    for _ in 0..out_dim {
        let flat: usize = (0..n).map(|i| cursor[i] * strides[i]).sum();
        out.push(s.amps()[flat] * scale);
        for &i in free.iter().rev() {
            cursor[i] += 1;
            if cursor[i] < dims[i] {
                break;
            }
            cursor[i] = 0;
        }
    }
    CompositeState::from_raw(remaining, out)
}

/// All outcomes of detecting the listed atoms jointly, in lexicographic level
/// order over `subsystem_indices`. Outcomes with probability at or below
/// [`PROBABILITY_FLOOR`] are omitted.
pub fn enumerate_joint(s: &CompositeState, subsystem_indices: &[usize]) -> Result<Vec<Branch>> {
    if subsystem_indices.is_empty() {
        return Err(SimError::Shape("no subsystems to measure".into()));
    }
    check_atoms(s, subsystem_indices)?;
    let norm = s.norm_sqr();
    if norm <= 0.0 {
        return Err(SimError::Domain("cannot measure the zero vector".into()));
    }
    let scale = 1.0 / norm.sqrt();
    let kinds: Vec<Subsystem> = subsystem_indices
        .iter()
        .map(|&k| s.subsystems()[k])
        .collect();
    let total: usize = kinds.iter().map(Subsystem::dim).product();
    let mut branches = Vec::new();
    let mut digits = vec![0usize; kinds.len()];
    for _ in 0..total {
        let state = project(s, subsystem_indices, &digits, scale);
        let probability = state.norm_sqr();
        if probability > PROBABILITY_FLOOR {
            let labels = subsystem_indices
                .iter()
                .zip(&kinds)
                .zip(&digits)
                .map(|((&k, kind), &d)| (k, kind.levels()[d]))
                .collect();
            branches.push(Branch {
                labels,
                state,
                probability,
            });
        }
        for i in (0..digits.len()).rev() {
            digits[i] += 1;
            if digits[i] < kinds[i].dim() {
                break;
            }
            digits[i] = 0;
        }
    }
    Ok(branches)
}

/// Detects one atom; one branch per populated level.
pub fn measure(s: &CompositeState, subsystem_index: usize) -> Result<Vec<Branch>> {
    enumerate_joint(s, &[subsystem_index])
}

/// Keeps only the outcome `level` of the addressed atom, returning its
/// probability and the normalized conditional state.
pub fn post_select(
    s: &CompositeState,
    subsystem_index: usize,
    level: Level,
) -> Result<(f64, CompositeState)> {
    check_atoms(s, &[subsystem_index])?;
    let kind = s.subsystems()[subsystem_index];
    let digit = kind
        .level_index(level)
        .ok_or_else(|| SimError::Domain(format!("level {level} does not belong to {kind:?}")))?;
    let norm = s.norm_sqr();
    if norm <= 0.0 {
        return Err(SimError::Domain("cannot measure the zero vector".into()));
    }
    let branch = project(s, &[subsystem_index], &[digit], 1.0 / norm.sqrt());
    let probability = branch.norm_sqr();
    if probability <= PROBABILITY_FLOOR {
        return Err(SimError::PostSelectionImpossible {
            what: format!("level {level} of subsystem {subsystem_index}"),
            probability,
        });
    }
    Ok((probability, branch.normalized()?))
}

/// Inverse-CDF choice over `branches` in declaration order using one draw
/// from `rng`. Zero-probability branches are never chosen.
pub fn sample_index<R: Rng + ?Sized>(branches: &[Branch], rng: &mut R) -> Result<usize> {
    if branches.is_empty() {
        return Err(SimError::Domain(
            "cannot sample from an empty branch list".into(),
        ));
    }
    let total: f64 = branches.iter().map(|b| b.probability).sum();
    if total.is_nan() || (total - 1.0).abs() > 1e-6 {
        return Err(SimError::Domain(format!(
            "branch probabilities sum to {total}, not 1"
        )));
    }
    let u: f64 = rng.gen::<f64>() * total;
    let mut cumulative = 0.0;
    for (i, b) in branches.iter().enumerate() {
        cumulative += b.probability;
        if u < cumulative && b.probability > 0.0 {
            return Ok(i);
        }
    }
    // rounding pushed u past the last cumulative value
    Ok(branches
        .iter()
        .rposition(|b| b.probability > 0.0)
        .unwrap_or(branches.len() - 1))
}

/// Seeded generator used for every sampling decision.
pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Deterministic single draw: the same seed always returns the same branch.
pub fn sample(branches: &[Branch], seed: u64) -> Result<&Branch> {
    let mut rng = rng_from_seed(seed);
    sample_index(branches, &mut rng).map(|i| &branches[i])
}
