//! Dependent click model simulation and independent-pair harvesting.
//!
//! The simulated user scans the served list top-down. At each position they
//! click with a probability depending on the document's true relevance
//! grade, and after a click they stop scanning with a grade-dependent stop
//! probability. The learner never sees the scan: it only infers the examined
//! prefix `o_t` as the last clicked position plus one, capped at the serving
//! cutoff, and harvests training pairs exclusively from disjoint position
//! pairs `(1,2), (3,4), ...` inside that prefix whose clicks differ.

use rand::Rng;

use crate::data::QuerySession;
use crate::error::{Error, Result};
use crate::neural::PairObservation;
use crate::Ranking;

/// Which user persona a click configuration models.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PersonaKind {
    Perfect,
    Navigational,
    Informational,
    Custom,
}

impl std::fmt::Display for PersonaKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            PersonaKind::Perfect => "perfect",
            PersonaKind::Navigational => "navigational",
            PersonaKind::Informational => "informational",
            PersonaKind::Custom => "custom",
        };
        write!(f, "{name}")
    }
}

/// Click and stop probabilities per relevance grade 0..=4.
#[derive(Debug, Clone, PartialEq)]
pub struct ClickModelConfig {
    pub click_prob: [f64; 5],
    pub stop_prob: [f64; 5],
    pub name: PersonaKind,
}

impl ClickModelConfig {
    /// Builds one of the three built-in personas by name.
    pub fn builtin(name: &str) -> Result<Self> {
        match name {
            "perfect" => Ok(ClickModelConfig {
                click_prob: [0.0, 0.2, 0.4, 0.8, 1.0],
                stop_prob: [0.0, 0.0, 0.0, 0.0, 0.0],
                name: PersonaKind::Perfect,
            }),
            "navigational" => Ok(ClickModelConfig {
                click_prob: [0.05, 0.3, 0.5, 0.7, 0.95],
                stop_prob: [0.2, 0.3, 0.5, 0.7, 0.9],
                name: PersonaKind::Navigational,
            }),
            "informational" => Ok(ClickModelConfig {
                click_prob: [0.4, 0.6, 0.7, 0.8, 0.9],
                stop_prob: [0.1, 0.2, 0.3, 0.4, 0.5],
                name: PersonaKind::Informational,
            }),
            other => Err(Error::Config(format!("unknown click persona '{other}'"))),
        }
    }

    /// Builds a custom persona from ten probabilities.
    pub fn custom(click_prob: [f64; 5], stop_prob: [f64; 5]) -> Result<Self> {
        for p in click_prob.iter().chain(&stop_prob) {
            if !(0.0..=1.0).contains(p) {
                return Err(Error::Config(format!("probability {p} outside [0, 1]")));
            }
        }
        Ok(ClickModelConfig {
            click_prob,
            stop_prob,
            name: PersonaKind::Custom,
        })
    }
}

/// Clicks of one round, indexed by served position.
#[derive(Debug, Clone, PartialEq)]
pub struct ClickOutcome {
    /// `clicks[pos]` is true when the document at 0-based rank `pos` was
    /// clicked; positions at or beyond the cutoff are always false.
    pub clicks: Vec<bool>,
    /// The learner-inferred examined prefix `o_t`: last clicked 1-based
    /// position plus one, capped at the scanned length. Zero when no click
    /// happened (nothing is confirmed examined).
    pub last_examined: usize,
    /// Serving cutoff this outcome was simulated under.
    pub cutoff: usize,
}

/// Simulates one scan over the top `k` of `ranking`.
///
/// Draw order per scanned position: one click draw, then one stop draw only
/// if the click happened. Returns the outcome and the number of positions
/// the simulated user actually examined (the latter is simulator-internal
/// ground truth, useful for calibration tests; the learner only sees the
/// outcome).
pub fn simulate_traced<R: Rng>(
    ranking: &[usize],
    labels: &[u8],
    cfg: &ClickModelConfig,
    k: usize,
    rng: &mut R,
) -> (ClickOutcome, usize) {
    let scan_limit = k.min(ranking.len());
    let mut clicks = vec![false; ranking.len()];
    let mut last_click: Option<usize> = None;
    let mut scanned = 0;

    for pos in 0..scan_limit {
        scanned = pos + 1;
        let grade = labels[ranking[pos]] as usize;
        if rng.gen_bool(cfg.click_prob[grade]) {
            clicks[pos] = true;
            last_click = Some(pos);
            if rng.gen_bool(cfg.stop_prob[grade]) {
                break;
            }
        }
    }

    let last_examined = match last_click {
        Some(pos) => (pos + 2).min(scan_limit),
        None => 0,
    };
    (
        ClickOutcome {
            clicks,
            last_examined,
            cutoff: k,
        },
        scanned,
    )
}

/// Simulates one scan over the top `k` of `ranking`; see [`simulate_traced`].
pub fn simulate<R: Rng>(
    ranking: &[usize],
    labels: &[u8],
    cfg: &ClickModelConfig,
    k: usize,
    rng: &mut R,
) -> ClickOutcome {
    simulate_traced(ranking, labels, cfg, k, rng).0
}

/// The disjoint 0-based position pairs `(0,1), (2,3), ...` lying entirely
/// inside the examined prefix `o_t` (1-based length).
pub fn independent_pair_positions(last_examined: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..last_examined / 2).map(|r| (2 * r, 2 * r + 1))
}

/// Harvests independent pairwise preferences from one round's clicks.
///
/// For each disjoint position pair inside the examined prefix whose clicks
/// differ, emits one observation oriented with the higher-ranked document
/// first (`y` is 1.0 when that document got the click). Every emitted pair
/// carries weight 1.0; metric-weighted training rescales afterwards.
pub fn harvest_pairs(
    outcome: &ClickOutcome,
    ranking: &[usize],
    session: &QuerySession,
    round: usize,
) -> Vec<PairObservation> {
    independent_pair_positions(outcome.last_examined)
        .filter(|&(hi, lo)| outcome.clicks[hi] != outcome.clicks[lo])
        .map(|(hi, lo)| PairObservation {
            x_i: session.docs[ranking[hi]].clone(),
            x_j: session.docs[ranking[lo]].clone(),
            y: if outcome.clicks[hi] { 1.0 } else { 0.0 },
            round,
            lambda_weight: 1.0,
        })
        .collect()
}
