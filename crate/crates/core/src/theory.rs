//! Monte Carlo checks that copying preserves block-model marginals.
//!
//! Each trial draws a fresh observed graph, copies it with a replacement vector
//! and records, for every upper-triangle cell `i < j`, the copied indicator
//! `A_obs[zeta_i][j]`. Cells where `zeta_i == j` would read the diagonal of the
//! observed graph, which the block model never populates, so they are skipped.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::copying::{label_uniform_from_dense, sample_zeta, CopyingDistribution, DistributionKind};
use crate::error::{Error, Result};
use crate::graph::{Graph, NodeId};
use crate::rng;

/// Two-sided normal tail beyond 4 standard deviations.
pub const TAIL_4_SIGMA: f64 = 6.334e-5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SbmParams {
    assignment: Vec<usize>,
    beta: Vec<Vec<f64>>,
}

impl SbmParams {
    pub fn new(assignment: Vec<usize>, beta: Vec<Vec<f64>>) -> Result<Self> {
        let k = beta.len();
        for (a, row) in beta.iter().enumerate() {
            if row.len() != k {
                return Err(Error::Shape(format!("beta row {a} has {} entries, expected {k}", row.len())));
            }
            for (b, &p) in row.iter().enumerate() {
                if !(0.0..=1.0).contains(&p) {
                    return Err(Error::InvalidParameter(format!("beta[{a}][{b}] = {p} outside [0, 1]")));
                }
                if p != beta[b][a] {
                    return Err(Error::InvalidParameter(format!("beta not symmetric at ({a}, {b})")));
                }
            }
        }
        let mut seen = vec![false; k];
        for (v, &c) in assignment.iter().enumerate() {
            if c >= k {
                return Err(Error::InvalidParameter(format!("node {v} assigned to block {c} of {k}")));
            }
            seen[c] = true;
        }
        if let Some(empty) = seen.iter().position(|s| !s) {
            return Err(Error::InvalidParameter(format!("block {empty} is empty")));
        }
        Ok(SbmParams { assignment, beta })
    }

    /// `n` nodes split into `k` contiguous blocks of near-equal size, `within` on the
    /// diagonal of beta and `across` elsewhere.
    pub fn planted(n: usize, k: usize, within: f64, across: f64) -> Result<Self> {
        if k == 0 || k > n {
            return Err(Error::InvalidParameter(format!("cannot split {n} nodes into {k} blocks")));
        }
        let assignment = (0..n).map(|v| v * k / n).collect();
        let beta = (0..k)
            .map(|a| (0..k).map(|b| if a == b { within } else { across }).collect())
            .collect();
        Self::new(assignment, beta)
    }

    pub fn n_nodes(&self) -> usize {
        self.assignment.len()
    }

    pub fn n_blocks(&self) -> usize {
        self.beta.len()
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn beta(&self, a: usize, b: usize) -> f64 {
        self.beta[a][b]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErParams {
    pub n_nodes: usize,
    pub theta: f64,
}

impl ErParams {
    pub fn new(n_nodes: usize, theta: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&theta) {
            return Err(Error::InvalidParameter(format!("theta = {theta} outside [0, 1]")));
        }
        Ok(ErParams { n_nodes, theta })
    }

    pub fn as_sbm(&self) -> Result<SbmParams> {
        if self.n_nodes == 0 {
            return Err(Error::EmptyGraph);
        }
        SbmParams::new(vec![0; self.n_nodes], vec![vec![self.theta]])
    }
}

fn sample_upper<R: Rng + ?Sized>(n: usize, p: impl Fn(NodeId, NodeId) -> f64, rng: &mut R) -> Vec<Vec<(NodeId, f64)>> {
    let mut rows: Vec<Vec<(NodeId, f64)>> = vec![Vec::new(); n];
    for i in 0..n {
        for j in i + 1..n {
            let q = p(i, j);
            // Draw for every pair so the stream position never depends on beta.
            let u: f64 = rng.random();
            if u < q {
                rows[i].push((j, 1.0));
                rows[j].push((i, 1.0));
            }
        }
    }
    for row in &mut rows {
        row.sort_by_key(|&(t, _)| t);
    }
    rows
}

pub fn sample_sbm<R: Rng + ?Sized>(params: &SbmParams, rng: &mut R) -> Graph {
    let c = &params.assignment;
    let rows = sample_upper(params.n_nodes(), |i, j| params.beta[c[i]][c[j]], rng);
    Graph::from_sorted_rows(params.n_nodes(), false, &rows)
}

pub fn sample_er<R: Rng + ?Sized>(params: &ErParams, rng: &mut R) -> Graph {
    let rows = sample_upper(params.n_nodes, |_, _| params.theta, rng);
    Graph::from_sorted_rows(params.n_nodes, false, &rows)
}

/// Replacement uniform over the node's own block.
pub fn within_class_distribution(labels: &[usize]) -> CopyingDistribution {
    label_uniform_from_dense(labels)
}

/// Every row draws `m` with probability proportional to `(m + 1)^-exponent`.
pub fn power_law_distribution(n: usize, exponent: f64) -> CopyingDistribution {
    let w: Vec<f64> = (0..n).map(|m| ((m + 1) as f64).powf(-exponent)).collect();
    let total: f64 = w.iter().sum();
    let row: Vec<(NodeId, f64)> = w.iter().enumerate().map(|(m, &x)| (m, x / total)).collect();
    CopyingDistribution::from_rows(DistributionKind::Custom, vec![row; n]).expect("normalized by construction")
}

/// Each node copies one of its two ring neighbours.
pub fn ring_distribution(n: usize) -> CopyingDistribution {
    let rows = (0..n)
        .map(|v| {
            let mut r = vec![((v + n - 1) % n, 0.5), ((v + 1) % n, 0.5)];
            r.sort_by_key(|&(m, _)| m);
            if r[0].0 == r[1].0 {
                vec![(r[0].0, 1.0)]
            } else {
                r
            }
        })
        .collect();
    CopyingDistribution::from_rows(DistributionKind::Custom, rows).expect("normalized by construction")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifyConfig {
    pub n_trials: usize,
    pub samples_per_trial: usize,
    /// Cell pairs tested for zero covariance, per proof case.
    pub covariance_pairs: usize,
    pub z_threshold: f64,
    /// Keep one observed graph for all trials. Not covered by the marginal guarantee.
    pub conditioned: bool,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            n_trials: 300,
            samples_per_trial: 1,
            covariance_pairs: 10,
            z_threshold: 4.0,
            conditioned: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    pub block_a: usize,
    pub block_b: usize,
    pub observations: u64,
    pub edges: u64,
    pub frequency: f64,
    pub target: f64,
    pub binomial_se: f64,
    /// Ratio-estimator standard error across trials; accounts for the dependence
    /// between cells that copy the same row.
    pub trial_se: f64,
    pub z: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovarianceReport {
    pub case: String,
    pub n_pairs: usize,
    pub max_abs_covariance: f64,
    pub max_abs_z: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub n_trials: usize,
    pub samples_per_trial: usize,
    pub conditioned: bool,
    pub cells: Vec<CellReport>,
    pub covariance: Vec<CovarianceReport>,
    pub skipped_self_reads: u64,
    pub n_tests: usize,
    /// Union bound on the probability that a correct model fails any test.
    pub false_alarm_budget: f64,
    pub pass: bool,
}

/// Indicator pair tracked for the covariance checks: `((i1, j1), (i2, j2))`.
type CellPair = ((NodeId, NodeId), (NodeId, NodeId));

struct TrialOutcome {
    /// Per block-pair cell: (observations, edges).
    counts: Vec<(u64, u64)>,
    skipped: u64,
    /// First sample of the trial, per tracked pair; `None` when either read was skipped.
    pair_values: Vec<Option<(f64, f64)>>,
}

fn cell_index(a: usize, b: usize, k: usize) -> usize {
    let (a, b) = (a.min(b), a.max(b));
    a * k + b
}

fn dense(g: &Graph) -> Vec<bool> {
    let n = g.n_nodes();
    let mut m = vec![false; n * n];
    for (s, t, _) in g.arcs() {
        m[s * n + t] = true;
    }
    m
}

fn choose_pairs(n: usize, count: usize, shared_source: bool, seed: u64) -> Vec<CellPair> {
    let mut r = rng::stream(seed, "covariance-pairs", u64::from(shared_source));
    let mut out = Vec::with_capacity(count);
    if n < 4 {
        return out;
    }
    while out.len() < count {
        let i1 = r.random_range(0..n);
        let j1 = r.random_range(0..n);
        let i2 = if shared_source { i1 } else { r.random_range(0..n) };
        let j2 = r.random_range(0..n);
        let distinct = if shared_source {
            i1 != j1 && i1 != j2 && j1 != j2
        } else {
            let v = [i1, j1, i2, j2];
            (0..4).all(|a| (a + 1..4).all(|b| v[a] != v[b]))
        };
        if distinct {
            out.push(((i1, j1), (i2, j2)));
        }
    }
    out
}

fn run_trial(
    params: &SbmParams,
    dist: &CopyingDistribution,
    config: &VerifyConfig,
    pairs: &[CellPair],
    seed: u64,
    trial: usize,
) -> TrialOutcome {
    let n = params.n_nodes();
    let k = params.n_blocks();
    let c = params.assignment();
    let obs_index = if config.conditioned { 0 } else { trial as u64 };
    let a = dense(&sample_sbm(params, &mut rng::stream(seed, "theory-observed", obs_index)));
    let mut counts = vec![(0u64, 0u64); k * k];
    let mut skipped = 0;
    let mut pair_values = vec![None; pairs.len()];
    for s in 0..config.samples_per_trial {
        let index = (trial * config.samples_per_trial + s) as u64;
        let zeta = sample_zeta(dist, &mut rng::stream(seed, "theory-zeta", index));
        for i in 0..n {
            let row = zeta.get(i) * n;
            for j in i + 1..n {
                if zeta.get(i) == j {
                    skipped += 1;
                    continue;
                }
                let cell = &mut counts[cell_index(c[i], c[j], k)];
                cell.0 += 1;
                cell.1 += u64::from(a[row + j]);
            }
        }
        if s == 0 {
            let read = |(i, j): (NodeId, NodeId)| {
                let z = zeta.get(i);
                (z != j).then(|| if a[z * n + j] { 1.0 } else { 0.0 })
            };
            for (slot, &(p1, p2)) in pair_values.iter_mut().zip(pairs) {
                *slot = read(p1).zip(read(p2));
            }
        }
    }
    TrialOutcome {
        counts,
        skipped,
        pair_values,
    }
}

fn covariance_z(values: &[(f64, f64)]) -> (f64, f64) {
    let t = values.len() as f64;
    if values.len() < 2 {
        return (0.0, 0.0);
    }
    let m1 = values.iter().map(|v| v.0).sum::<f64>() / t;
    let m2 = values.iter().map(|v| v.1).sum::<f64>() / t;
    let prods: Vec<f64> = values.iter().map(|&(x, y)| (x - m1) * (y - m2)).collect();
    let cov = prods.iter().sum::<f64>() / t;
    let var = prods.iter().map(|p| (p - cov) * (p - cov)).sum::<f64>() / (t - 1.0);
    let se = (var / t).sqrt();
    let z = if se > 0.0 {
        cov / se
    } else if cov == 0.0 {
        0.0
    } else {
        f64::INFINITY
    };
    (cov, z)
}

/// Runs the marginal and covariance checks for copies of block-model graphs under `dist`.
pub fn verify_sbm_marginal(
    params: &SbmParams,
    dist: &CopyingDistribution,
    config: &VerifyConfig,
    seed: u64,
) -> Result<VerificationReport> {
    let n = params.n_nodes();
    if dist.n_nodes() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            actual: dist.n_nodes(),
        });
    }
    if config.n_trials == 0 || config.samples_per_trial == 0 {
        return Err(Error::InvalidParameter("trial and sample counts must be at least 1".into()));
    }
    let k = params.n_blocks();
    let disjoint = choose_pairs(n, config.covariance_pairs, false, seed);
    let shared = choose_pairs(n, config.covariance_pairs, true, seed);
    let pairs: Vec<CellPair> = disjoint.iter().chain(&shared).copied().collect();

    let trials: Vec<TrialOutcome> = (0..config.n_trials)
        .into_par_iter()
        .map(|t| run_trial(params, dist, config, &pairs, seed, t))
        .collect();

    let t_count = trials.len() as f64;
    let mut cells = Vec::new();
    for a in 0..k {
        for b in a..k {
            let idx = cell_index(a, b, k);
            let obs: u64 = trials.iter().map(|t| t.counts[idx].0).sum();
            let edges: u64 = trials.iter().map(|t| t.counts[idx].1).sum();
            if obs == 0 {
                continue;
            }
            let target = params.beta(a, b);
            let freq = edges as f64 / obs as f64;
            let binomial_se = (target * (1.0 - target) / obs as f64).sqrt();
            let mean_obs = obs as f64 / t_count;
            let trial_se = if trials.len() > 1 {
                let ss: f64 = trials
                    .iter()
                    .map(|t| {
                        let (o, e) = t.counts[idx];
                        let r = e as f64 - freq * o as f64;
                        r * r
                    })
                    .sum();
                (ss / (t_count * (t_count - 1.0))).sqrt() / mean_obs
            } else {
                0.0
            };
            let (z, pass) = if target == 0.0 || target == 1.0 {
                let exact = freq == target;
                (if exact { 0.0 } else { f64::INFINITY }, exact)
            } else {
                if obs as f64 * target.min(1.0 - target) < 20.0 {
                    return Err(Error::Degenerate(format!(
                        "cell ({a}, {b}) has expected count {:.1} < 20",
                        obs as f64 * target.min(1.0 - target)
                    )));
                }
                let se = binomial_se.max(trial_se);
                let z = (freq - target) / se;
                (z, z.abs() < config.z_threshold)
            };
            cells.push(CellReport {
                block_a: a,
                block_b: b,
                observations: obs,
                edges,
                frequency: freq,
                target,
                binomial_se,
                trial_se,
                z,
                pass,
            });
        }
    }

    let mut covariance = Vec::new();
    for (case, offset, count) in [("disjoint", 0, disjoint.len()), ("shared-source", disjoint.len(), shared.len())] {
        let mut max_cov: f64 = 0.0;
        let mut max_z: f64 = 0.0;
        for p in offset..offset + count {
            let values: Vec<(f64, f64)> = trials.iter().filter_map(|t| t.pair_values[p]).collect();
            let (cov, z) = covariance_z(&values);
            max_cov = max_cov.max(cov.abs());
            max_z = max_z.max(z.abs());
        }
        covariance.push(CovarianceReport {
            case: case.to_string(),
            n_pairs: count,
            max_abs_covariance: max_cov,
            max_abs_z: max_z,
            pass: max_z < config.z_threshold,
        });
    }

    let n_tests = cells.len() + disjoint.len() + shared.len();
    let pass = cells.iter().all(|c| c.pass) && covariance.iter().all(|c| c.pass);
    Ok(VerificationReport {
        n_trials: config.n_trials,
        samples_per_trial: config.samples_per_trial,
        conditioned: config.conditioned,
        cells,
        covariance,
        skipped_self_reads: trials.iter().map(|t| t.skipped).sum(),
        n_tests,
        false_alarm_budget: n_tests as f64 * TAIL_4_SIGMA,
        pass,
    })
}

/// The same checks for an Erdos-Renyi graph under an arbitrary replacement law.
pub fn verify_er_marginal(
    params: &ErParams,
    dist: &CopyingDistribution,
    config: &VerifyConfig,
    seed: u64,
) -> Result<VerificationReport> {
    verify_sbm_marginal(&params.as_sbm()?, dist, config, seed)
}
