//! Home-match tournament over the admissible set, and the end-to-end learner.

use serde::{Deserialize, Serialize};

use crate::bench_harness::generators::{GroundTruth, LabeledSample};
use crate::error::{Error, Result};
use crate::function_class::{DistanceOracle, FunctionClass, MetricKind};
use crate::mean_estimators::EstimatorSpec;
use crate::risk_oracles::{
    build_fine_oracle, crude_oracle, fine_oracle, noise_estimate, CrudeConstants, CrudeOracleOutput, FineConstants,
    FineOracleState,
};
use crate::rng::run_chunks;

/// How a function is picked from the set of all-home-winners.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionRule {
    SmallestLabel,
    /// Largest `min_f Psi_L(f, h)` over the visitors; ties to the smaller label.
    #[default]
    MaxMargin,
}

/// Results of all home matches among the members of the admissible set.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MatchMatrix {
    /// Class labels of the participants, increasing.
    pub members: Vec<usize>,
    /// `psi[f * m + h] = Psi_L(f, h)` with `h` hosting `f` (positions in `members`).
    pub psi: Vec<f64>,
    /// `close[f * m + h]`: `d(f, h) < eta r`.
    pub close: Vec<bool>,
    /// Threshold used for close visitors, `-eta^4 r^2 / 2`.
    pub close_threshold: f64,
}

impl MatchMatrix {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn psi_at(&self, f: usize, h: usize) -> f64 {
        self.psi[f * self.len() + h]
    }

    /// Whether `h` wins its home match against `f` (positions; `f != h`).
    pub fn home_win(&self, h: usize, f: usize) -> bool {
        let k = f * self.len() + h;
        if self.close[k] {
            self.psi[k] >= self.close_threshold
        } else {
            self.psi[k] >= 0.0
        }
    }

    /// Positions of the members that win every home match.
    pub fn all_home_winners(&self) -> Vec<usize> {
        let m = self.len();
        (0..m)
            .filter(|&h| (0..m).all(|f| f == h || self.home_win(h, f)))
            .collect()
    }
}

/// Plays every ordered pair of `v_hat` (class labels); `workers` threads share the rows.
pub fn play_matches(
    v_hat: &[usize],
    state: &FineOracleState,
    class: &FunctionClass,
    oracle: &DistanceOracle,
    r: f64,
    eta: f64,
    workers: usize,
) -> Result<MatchMatrix> {
    if v_hat.is_empty() {
        return Err(Error::Empty("admissible set"));
    }
    let m = v_hat.len();
    let far = eta * r;
    let rows = run_chunks(m, workers, |_, range| -> Result<Vec<(f64, bool)>> {
        let mut out = Vec::with_capacity(range.len() * m);
        for f in range {
            for h in 0..m {
                if f == h {
                    out.push((0.0, true));
                    continue;
                }
                let (a, b) = (v_hat[f], v_hat[h]);
                let close = oracle.distance(class.point(a), class.point(b))? < far;
                out.push((fine_oracle(a, b, state)?, close));
            }
        }
        Ok(out)
    });
    let mut psi = Vec::with_capacity(m * m);
    let mut close = Vec::with_capacity(m * m);
    for chunk in rows {
        for (p, c) in chunk? {
            psi.push(p);
            close.push(c);
        }
    }
    Ok(MatchMatrix {
        members: v_hat.to_vec(),
        psi,
        close,
        close_threshold: -0.5 * eta.powi(4) * r * r,
    })
}

/// Winner set and selection.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    /// Labels of the all-home-winners.
    pub v_star: Vec<usize>,
    /// `None` when nobody wins all home matches.
    pub selected: Option<usize>,
}

pub fn select_winner(matrix: &MatchMatrix, rule: SelectionRule) -> Selection {
    let winners = matrix.all_home_winners();
    let v_star: Vec<usize> = winners.iter().map(|&p| matrix.members[p]).collect();
    let selected = match rule {
        SelectionRule::SmallestLabel => v_star.first().copied(),
        SelectionRule::MaxMargin => {
            let m = matrix.len();
            let margin = |h: usize| {
                (0..m)
                    .filter(|&f| f != h)
                    .map(|f| matrix.psi_at(f, h))
                    .fold(f64::INFINITY, f64::min)
            };
            let mut best: Option<(f64, usize)> = None;
            for &h in &winners {
                let g = margin(h);
                if best.is_none_or(|(bg, _)| g > bg) {
                    best = Some((g, h));
                }
            }
            best.map(|(_, h)| matrix.members[h])
        }
    };
    Selection { v_star, selected }
}

/// Preflight check `r >= c0 max(r*, lambda*)` with fixed points solved at `kappa = c1`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Preflight {
    pub r_star: f64,
    pub lambda_star: f64,
    pub c0: f64,
    pub c1: f64,
}

impl Preflight {
    pub const DEFAULT_C0: f64 = 4.0;
    pub const DEFAULT_C1: f64 = 0.25;

    pub fn threshold(&self) -> f64 {
        self.c0 * self.r_star.max(self.lambda_star)
    }

    /// Radii on the threshold pass, so `r = c0 max(r*, lambda*)` itself is accepted.
    pub fn passes(&self, r: f64) -> bool {
        r >= self.threshold()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LearnConfig {
    pub crude: CrudeConstants,
    pub fine: FineConstants,
    pub estimator: EstimatorSpec,
    /// Fraction of the sample given to the crude oracle.
    pub split: f64,
    pub selection: SelectionRule,
    pub workers: usize,
    pub preflight: Option<Preflight>,
}

impl LearnConfig {
    pub fn for_eta(eta: f64) -> Self {
        LearnConfig {
            crude: CrudeConstants::for_eta(eta, 0.1),
            fine: FineConstants { alpha: 2.0, theta: 0.1 },
            estimator: EstimatorSpec::default(),
            split: 0.5,
            selection: SelectionRule::default(),
            workers: 1,
            preflight: None,
        }
    }
}

/// Ground-truth summaries of one run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// `||f_hat - f*||_{L2}` under the true covariance.
    pub error_l2: f64,
    /// `E(f_hat - Y)^2 - E(f* - Y)^2`.
    pub excess_risk: f64,
}

#[derive(Clone, Debug)]
pub struct TournamentOutcome {
    pub r: f64,
    pub crude: CrudeOracleOutput,
    pub sigma_hat: f64,
    pub sigma_star: f64,
    pub fine_s0: usize,
    pub fine_s1: usize,
    pub fine_cells: usize,
    pub carrier_size: usize,
    pub matches: MatchMatrix,
    pub v_star: Vec<usize>,
    pub selected: Option<usize>,
    pub preflight_ok: Option<bool>,
}

impl TournamentOutcome {
    pub fn v_hat(&self) -> &[usize] {
        &self.crude.v_hat
    }

    /// Errors of the selected function, or `None` when nothing was selected.
    pub fn diagnostics(&self, f: &FunctionClass, truth: &GroundTruth) -> Option<Diagnostics> {
        self.selected.map(|s| evaluate(f, truth, s))
    }
}

/// Risk minimizer of the class under `truth` (smallest label on ties).
pub fn class_minimizer(f: &FunctionClass, truth: &GroundTruth) -> usize {
    let mut best = 0;
    let mut br = f64::INFINITY;
    for i in 0..f.len() {
        let r = truth.risk(f.point(i));
        if r < br {
            br = r;
            best = i;
        }
    }
    best
}

/// Ground-truth error of class member `s`.
pub fn evaluate(f: &FunctionClass, truth: &GroundTruth, s: usize) -> Diagnostics {
    let star = class_minimizer(f, truth);
    let error_l2 = f
        .oracle(MetricKind::True)
        .norm(&crate::function_class::sub(f.point(s), f.point(star)));
    Diagnostics {
        error_l2,
        excess_risk: truth.risk(f.point(s)) - truth.risk(f.point(star)),
    }
}

/// Splits the sample, builds both oracles, and plays the tournament over `V_hat`.
pub fn learn(f: &FunctionClass, sample: &LabeledSample, r: f64, cfg: &LearnConfig) -> Result<TournamentOutcome> {
    if !(cfg.split > 0.0 && cfg.split < 1.0) {
        return Err(Error::invalid("split", format!("{} not in (0, 1)", cfg.split)));
    }
    let preflight_ok = cfg.preflight.map(|p| {
        let ok = p.passes(r);
        if !ok {
            log::warn!(
                "r = {r} does not exceed {} * max(r*, lambda*) = {} (fixed points at kappa = {})",
                p.c0,
                p.threshold(),
                p.c1
            );
        }
        ok
    });
    let oracle = f.oracle(MetricKind::Oracle);
    let eta = f.covariance().eta();
    let (first, second) = sample.split(cfg.split);
    let crude = crude_oracle(f, &first, r, &oracle, cfg.crude, &cfg.estimator)?;
    let (sigma_hat, sigma_star) = noise_estimate(&crude, r);
    let state = build_fine_oracle(f, &second, r, sigma_star, &oracle, cfg.fine, &cfg.estimator)?;
    let matches = play_matches(&crude.v_hat, &state, f, &oracle, r, eta, cfg.workers)?;
    let sel = select_winner(&matches, cfg.selection);
    if sel.selected.is_none() {
        log::info!("no member of V_hat won all of its home matches");
    }
    Ok(TournamentOutcome {
        r,
        sigma_hat,
        sigma_star,
        fine_s0: state.levels.s0,
        fine_s1: state.levels.s1,
        fine_cells: state.cells.count(),
        carrier_size: state.carrier().len(),
        crude,
        matches,
        v_star: sel.v_star,
        selected: sel.selected,
        preflight_ok,
    })
}
