//! Monte-Carlo evaluation: one-hop policy runs on the wake/progress model,
//! Poisson network generation, and a slotted-beacon end-to-end simulator.
//!
//! # Reproducibility
//!
//! Every run takes a single 64-bit seed and derives independent
//! counter-based streams from it (ChaCha8 with `set_stream`): one-hop
//! trials use stream `trial / 4096`, end-to-end transfers use stream
//! `2^61 + transfer`, and sweep points offset the master seed by the point
//! index times a fixed odd constant. Workers split the same streams at the
//! same boundaries, so results are bit-identical regardless of parallelism.

use crate::bf::{bf_decide, ThresholdSurface};
use crate::error::{Error, Result};
use crate::geometry::{HopContext, ProgressModel};
use crate::numeric::Moments;
use crate::sf::{calibrate_threshold, ff_decide, mf_decide, sf_decide, solve_threshold};
use crate::wake::{sample_wakes, waiting_time};
use dashmap::DashMap;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use std::collections::HashMap;
use std::io::{self, Write};
use std::sync::Arc;

/// Trials per random stream in one-hop runs.
const TRIAL_BATCH: usize = 4096;
/// Stream offset for end-to-end transfers.
const TRANSFER_STREAM_BASE: u64 = 1 << 61;
/// Seed offset between sweep points.
const POINT_SEED_STRIDE: u64 = 0x9E37_79B9_7F4A_7C15;

/// A one-hop stopping policy under evaluation.
#[derive(Debug, Clone, Copy)]
pub enum OneHopPolicy<'a> {
    /// Transmit at the first wake.
    FirstForward,
    /// Wait for every candidate.
    MaxForward,
    /// Fixed threshold on best progress.
    Threshold(f64),
    /// Stage-dependent surfaces from backward induction.
    Surface(&'a ThresholdSurface),
}

fn stop_now(policy: &OneHopPolicy, woken: usize, node_count: usize, instant: f64, best: f64) -> bool {
    match policy {
        OneHopPolicy::FirstForward => ff_decide(woken),
        OneHopPolicy::MaxForward => mf_decide(woken, node_count),
        OneHopPolicy::Threshold(alpha) => sf_decide(*alpha, woken, node_count, best),
        OneHopPolicy::Surface(surface) => bf_decide(surface, woken, instant, best),
    }
}

/// Sample moments of a one-hop run. Delay is in wake periods, progress in
/// radio ranges, and the objective combines them as `delay - eta * progress`
/// per trial.
#[derive(Debug, Clone, Copy)]
pub struct HopStats {
    pub trials: usize,
    pub eta: f64,
    pub delay: Moments,
    pub progress: Moments,
    pub objective: Moments,
}

impl HopStats {
    pub fn mean_delay(&self) -> f64 {
        self.delay.mean()
    }

    pub fn mean_progress(&self) -> f64 {
        self.progress.mean()
    }

    /// Achieved `E[delay] - eta * E[progress]`.
    pub fn objective_mean(&self) -> f64 {
        self.objective.mean()
    }
}

/// Runs `trials` independent one-hop episodes of `policy` with
/// `node_count` candidates: at each wake the policy sees the elapsed time
/// and the best progress so far and either transmits to the best-so-far
/// node or keeps waiting, with a forced stop at the last wake.
pub fn run_onehop(
    policy: &OneHopPolicy,
    model: &ProgressModel,
    node_count: usize,
    eta: f64,
    trials: usize,
    seed: u64,
) -> Result<HopStats> {
    if node_count == 0 {
        return Err(Error::Domain("candidate count must be positive".into()));
    }
    if trials == 0 {
        return Err(Error::Domain("need at least one trial".into()));
    }
    if !(eta.is_finite() && eta > 0.0) {
        return Err(Error::Domain(format!(
            "progress multiplier must be positive, got {eta}"
        )));
    }
    match policy {
        OneHopPolicy::Threshold(alpha) if !(0.0..=1.0).contains(alpha) => {
            return Err(Error::Domain(format!("threshold {alpha} outside [0,1]")));
        }
        OneHopPolicy::Surface(surface) if surface.stage_count() != node_count => {
            return Err(Error::Config(format!(
                "surface solved for {} stages, hop has {} candidates",
                surface.stage_count(),
                node_count
            )));
        }
        _ => {}
    }

    let batches = trials.div_ceil(TRIAL_BATCH);
    let parts: Vec<(Moments, Moments, Moments)> = (0..batches)
        .into_par_iter()
        .map(|batch| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(batch as u64);
            let here = TRIAL_BATCH.min(trials - batch * TRIAL_BATCH);
            let mut delay = Moments::default();
            let mut progress = Moments::default();
            let mut objective = Moments::default();
            for _ in 0..here {
                let seq = sample_wakes(node_count, &mut rng).expect("node_count checked");
                let mut best = 0.0f64;
                for k in 1..=node_count {
                    let z = model.sample(&mut rng);
                    best = best.max(z);
                    let instant = seq.instants[k - 1];
                    if stop_now(policy, k, node_count, instant, best) {
                        delay.push(instant);
                        progress.push(best);
                        objective.push(instant - eta * best);
                        break;
                    }
                }
            }
            (delay, progress, objective)
        })
        .collect();

    let mut delay = Moments::default();
    let mut progress = Moments::default();
    let mut objective = Moments::default();
    for (d, p, o) in &parts {
        delay.merge(d);
        progress.merge(p);
        objective.merge(o);
    }
    Ok(HopStats {
        trials,
        eta,
        delay,
        progress,
        objective,
    })
}

/// One row of a one-hop sweep.
#[derive(Debug, Clone)]
pub struct OneHopRow {
    pub policy: String,
    pub node_count: usize,
    pub sink_distance: f64,
    pub eta: f64,
    /// Threshold the policy used, when it is a fixed-threshold one.
    pub alpha: Option<f64>,
    pub stats: HopStats,
}

pub const ONEHOP_CSV_HEADER: &str =
    "policy,K,L_i,eta,alpha,mean_delay,se_delay,mean_progress,se_progress,J";

impl OneHopRow {
    pub fn csv_line(&self) -> String {
        let alpha = self.alpha.map(|a| a.to_string()).unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            self.policy,
            self.node_count,
            self.sink_distance,
            self.eta,
            alpha,
            self.stats.delay.mean(),
            self.stats.delay.std_err(),
            self.stats.progress.mean(),
            self.stats.progress.std_err(),
            self.stats.objective.mean()
        )
    }
}

pub fn write_onehop_csv<W: Write>(out: &mut W, rows: &[OneHopRow]) -> io::Result<()> {
    writeln!(out, "{ONEHOP_CSV_HEADER}")?;
    for row in rows {
        writeln!(out, "{}", row.csv_line())?;
    }
    Ok(())
}

/// Policy selector for one-hop sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OneHopKind {
    Bf,
    Sf,
    Ff,
    Mf,
}

impl OneHopKind {
    pub fn tag(self) -> &'static str {
        match self {
            OneHopKind::Bf => "bf",
            OneHopKind::Sf => "sf",
            OneHopKind::Ff => "ff",
            OneHopKind::Mf => "mf",
        }
    }
}

/// One point of a one-hop sweep: a policy evaluated at a multiplier.
#[derive(Debug, Clone, Copy)]
pub struct OneHopCase {
    pub kind: OneHopKind,
    pub eta: f64,
}

/// Runs each case with its own derived seed and `trials` episodes.
/// Surfaces and thresholds are solved once per distinct multiplier.
pub fn sweep_onehop(
    model: &ProgressModel,
    node_count: usize,
    cases: &[OneHopCase],
    trials: usize,
    surface_points: usize,
    seed: u64,
) -> Result<Vec<OneHopRow>> {
    let mut surfaces: HashMap<u64, Arc<ThresholdSurface>> = HashMap::new();
    let mut rows = Vec::with_capacity(cases.len());
    for (index, case) in cases.iter().enumerate() {
        let point_seed = seed.wrapping_add((index as u64).wrapping_mul(POINT_SEED_STRIDE));
        let (policy, alpha): (OneHopPolicy, Option<f64>) = match case.kind {
            OneHopKind::Ff => (OneHopPolicy::FirstForward, Some(0.0)),
            OneHopKind::Mf => (OneHopPolicy::MaxForward, Some(1.0)),
            OneHopKind::Sf => {
                let th = solve_threshold(model, node_count, case.eta)?;
                (OneHopPolicy::Threshold(th.alpha), Some(th.alpha))
            }
            OneHopKind::Bf => {
                let surface = match surfaces.entry(case.eta.to_bits()) {
                    std::collections::hash_map::Entry::Occupied(e) => e.get().clone(),
                    std::collections::hash_map::Entry::Vacant(e) => {
                        let s = crate::bf::solve_bf(
                            model,
                            node_count,
                            case.eta,
                            surface_points,
                            surface_points,
                        )?;
                        e.insert(Arc::new(s)).clone()
                    }
                };
                rows.push(OneHopRow {
                    policy: case.kind.tag().into(),
                    node_count,
                    sink_distance: model.ctx().sink_distance,
                    eta: case.eta,
                    alpha: None,
                    stats: run_onehop(
                        &OneHopPolicy::Surface(&surface),
                        model,
                        node_count,
                        case.eta,
                        trials,
                        point_seed,
                    )?,
                });
                continue;
            }
        };
        rows.push(OneHopRow {
            policy: case.kind.tag().into(),
            node_count,
            sink_distance: model.ctx().sink_distance,
            eta: case.eta,
            alpha,
            stats: run_onehop(&policy, model, node_count, case.eta, trials, point_seed)?,
        });
    }
    Ok(rows)
}

/// A deployed network: source at index 0, sink last, relays in between.
/// Neighbor and forwarding structures are precomputed; `phases` holds one
/// wake offset per node in period units (the end-to-end simulator redraws
/// them per transfer, these are for snapshots and inspection).
#[derive(Debug, Clone)]
pub struct Network {
    pub side: f64,
    pub density: f64,
    pub radio_range: f64,
    pub positions: Vec<(f64, f64)>,
    pub phases: Vec<f64>,
    pub neighbors: Vec<Vec<usize>>,
    pub forwarding: Vec<Vec<usize>>,
    pub sink_distance: Vec<f64>,
}

impl Network {
    pub fn node_count(&self) -> usize {
        self.positions.len()
    }

    pub fn source(&self) -> usize {
        0
    }

    pub fn sink(&self) -> usize {
        self.positions.len() - 1
    }
}

/// Draws a Poisson number of relays uniformly in the square, wires up
/// neighbor and forwarding sets, and retries the whole draw until every
/// non-sink node can make forward progress.
pub fn generate_network<R: Rng + ?Sized>(
    side: f64,
    density: f64,
    radio_range: f64,
    max_retries: usize,
    rng: &mut R,
) -> Result<Network> {
    if !(side.is_finite() && side > 0.0 && density.is_finite() && density > 0.0) {
        return Err(Error::Domain(format!(
            "bad deployment parameters: side {side}, density {density}"
        )));
    }
    if !(radio_range.is_finite() && radio_range > 0.0) {
        return Err(Error::Domain(format!("bad radio range {radio_range}")));
    }
    let rate = density * side * side;
    if rate < 1.0 {
        return Err(Error::Domain(format!(
            "expected node count {rate} below 1; the deployment would be empty"
        )));
    }
    let poisson =
        Poisson::new(rate).map_err(|e| Error::Domain(format!("bad deployment rate: {e}")))?;
    for _ in 0..max_retries.max(1) {
        let relays = poisson.sample(rng) as usize;
        let mut positions = Vec::with_capacity(relays + 2);
        positions.push((0.0, 0.0));
        for _ in 0..relays {
            positions.push((rng.random::<f64>() * side, rng.random::<f64>() * side));
        }
        positions.push((side, side));
        let phases: Vec<f64> = (0..positions.len()).map(|_| rng.random()).collect();

        let total = positions.len();
        let sink = total - 1;
        let sink_distance: Vec<f64> = positions
            .iter()
            .map(|&(x, y)| ((x - side).powi(2) + (y - side).powi(2)).sqrt())
            .collect();
        let mut neighbors = vec![Vec::new(); total];
        for i in 0..total {
            for j in (i + 1)..total {
                let dx = positions[i].0 - positions[j].0;
                let dy = positions[i].1 - positions[j].1;
                if (dx * dx + dy * dy).sqrt() <= radio_range {
                    neighbors[i].push(j);
                    neighbors[j].push(i);
                }
            }
        }
        let forwarding: Vec<Vec<usize>> = (0..total)
            .map(|i| {
                if i == sink {
                    Vec::new()
                } else {
                    neighbors[i]
                        .iter()
                        .copied()
                        .filter(|&j| sink_distance[j] < sink_distance[i])
                        .collect()
                }
            })
            .collect();
        if (0..sink).all(|i| !forwarding[i].is_empty()) {
            return Ok(Network {
                side,
                density,
                radio_range,
                positions,
                phases,
                neighbors,
                forwarding,
                sink_distance,
            });
        }
    }
    Err(Error::Simulation(format!(
        "no deployment with all-forwardable nodes in {max_retries} draws; density {density} \
         is too low for side {side}"
    )))
}

/// Writes a node table as `index,x,y,phase`.
pub fn write_network_csv<W: Write>(out: &mut W, net: &Network) -> io::Result<()> {
    writeln!(out, "index,x,y,phase")?;
    for (i, (&(x, y), &phase)) in net.positions.iter().zip(&net.phases).enumerate() {
        writeln!(out, "{i},{x},{y},{phase}")?;
    }
    Ok(())
}

/// Relay policy for end-to-end runs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum E2ePolicy {
    FirstForward,
    MaxForward,
    /// Threshold calibrated per relay to a target mean progress, using the
    /// relay's true forwarding-set size.
    Calibrated { target: f64 },
    /// Same calibration, but the relay estimates its candidate count as
    /// `floor(density * |forwarding region|)` instead of knowing it.
    CalibratedEstimate { target: f64 },
}

impl E2ePolicy {
    pub fn tag(&self) -> &'static str {
        match self {
            E2ePolicy::FirstForward => "ff",
            E2ePolicy::MaxForward => "mf",
            E2ePolicy::Calibrated { .. } => "sf",
            E2ePolicy::CalibratedEstimate { .. } => "sfhat",
        }
    }

    pub fn target(&self) -> Option<f64> {
        match self {
            E2ePolicy::Calibrated { target } | E2ePolicy::CalibratedEstimate { target } => {
                Some(*target)
            }
            _ => None,
        }
    }
}

/// Timing of the beacon protocol, in seconds.
#[derive(Debug, Clone, Copy)]
pub struct E2eParams {
    /// Wake period of every node.
    pub wake_period: f64,
    /// Beacon slot length; wake events are handled at the end of the slot
    /// they fall in.
    pub beacon: f64,
    /// Packet transmission time paid on every hop.
    pub packet: f64,
}

impl Default for E2eParams {
    fn default() -> Self {
        E2eParams {
            wake_period: 1.0,
            beacon: 0.005,
            packet: 0.030,
        }
    }
}

/// Results of an end-to-end run. Delays are in seconds.
#[derive(Debug, Clone)]
pub struct E2eStats {
    pub transfers: usize,
    pub delay: Moments,
    pub hops: Moments,
    pub records: Vec<(f64, u32)>,
}

/// One row of an end-to-end sweep.
#[derive(Debug, Clone)]
pub struct E2eRow {
    pub policy: String,
    pub gamma: Option<f64>,
    pub side: f64,
    pub density: f64,
    pub stats: E2eStats,
}

pub const E2E_CSV_HEADER: &str =
    "policy,gamma,L,lambda,transfers,mean_delay_s,se_delay_s,mean_hops,se_hops";

impl E2eRow {
    pub fn csv_line(&self) -> String {
        let gamma = self.gamma.map(|g| g.to_string()).unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.policy,
            gamma,
            self.side,
            self.density,
            self.stats.transfers,
            self.stats.delay.mean(),
            self.stats.delay.std_err(),
            self.stats.hops.mean(),
            self.stats.hops.std_err()
        )
    }
}

pub fn write_e2e_csv<W: Write>(out: &mut W, rows: &[E2eRow]) -> io::Result<()> {
    writeln!(out, "{E2E_CSV_HEADER}")?;
    for row in rows {
        writeln!(out, "{}", row.csv_line())?;
    }
    Ok(())
}

/// End-to-end simulator with per-distance model and threshold caches, so a
/// sweep over many targets reuses the expensive geometry tables.
pub struct E2eSimulator {
    params: E2eParams,
    grid_cells: usize,
    models: DashMap<u32, Arc<ProgressModel>>,
    thresholds: DashMap<(u32, usize, u64), f64>,
}

/// Cache key for a relay-to-sink distance in radio ranges: two decimals,
/// floored at 1.01 so the model construction precondition always holds.
fn distance_key(distance: f64) -> u32 {
    ((distance * 100.0).round() as u32).max(101)
}

impl E2eSimulator {
    pub fn new(params: E2eParams) -> Result<Self> {
        let ok = params.wake_period.is_finite()
            && params.wake_period > 0.0
            && params.beacon.is_finite()
            && params.beacon > 0.0
            && params.beacon <= params.wake_period
            && params.packet.is_finite()
            && params.packet > 0.0;
        if !ok {
            return Err(Error::Domain(format!(
                "bad protocol timing: period {}, beacon {}, packet {}",
                params.wake_period, params.beacon, params.packet
            )));
        }
        Ok(E2eSimulator {
            params,
            grid_cells: crate::geometry::DEFAULT_GRID_CELLS,
            models: DashMap::new(),
            thresholds: DashMap::new(),
        })
    }

    pub fn params(&self) -> &E2eParams {
        &self.params
    }

    /// Progress model for a relay at `distance` radio ranges from the sink.
    /// Distances are keyed at two decimals (and floored at 1.01 ranges) so
    /// nearby relays share tables.
    fn model_for(&self, distance: f64) -> Result<Arc<ProgressModel>> {
        let key = distance_key(distance);
        if let Some(found) = self.models.get(&key) {
            return Ok(found.clone());
        }
        let ctx = HopContext::new(key as f64 / 100.0, 1)?;
        let model = Arc::new(ProgressModel::build(ctx, self.grid_cells)?);
        self.models.insert(key, model.clone());
        Ok(model)
    }

    /// Fills the model and threshold caches for every relay position of
    /// `net` before the transfer loop, one cache entry per worker, so the
    /// per-transfer path is all lookups.
    fn prepare(&self, net: &Network, policy: E2ePolicy) -> Result<()> {
        let target = match policy.target() {
            Some(t) => t,
            None => return Ok(()),
        };
        let relays: Vec<usize> = (0..net.node_count())
            .filter(|&i| i != net.sink() && net.sink_distance[i] > net.radio_range)
            .collect();
        let keys: std::collections::BTreeSet<u32> = relays
            .iter()
            .map(|&i| distance_key(net.sink_distance[i] / net.radio_range))
            .collect();
        keys.par_iter()
            .try_for_each(|&key| self.model_for(key as f64 / 100.0).map(|_| ()))?;
        let pairs: std::collections::BTreeSet<(u32, usize)> = relays
            .iter()
            .map(|&i| {
                let key = distance_key(net.sink_distance[i] / net.radio_range);
                let count = match policy {
                    E2ePolicy::CalibratedEstimate { .. } => {
                        let model = self.model_for(key as f64 / 100.0)?;
                        let region =
                            model.area_full() * net.radio_range * net.radio_range;
                        Ok(((net.density * region).floor() as usize).max(1))
                    }
                    _ => Ok(net.forwarding[i].len()),
                }?;
                Ok((key, count))
            })
            .collect::<Result<_>>()?;
        pairs.par_iter().try_for_each(|&(key, count)| {
            let model = self.model_for(key as f64 / 100.0)?;
            self.threshold_for(&model, key, count, target).map(|_| ())
        })
    }

    fn threshold_for(
        &self,
        model: &ProgressModel,
        key: u32,
        count: usize,
        target: f64,
    ) -> Result<f64> {
        let full_key = (key, count, target.to_bits());
        if let Some(found) = self.thresholds.get(&full_key) {
            return Ok(*found);
        }
        let alpha = calibrate_threshold(model, count, target)?.alpha;
        self.thresholds.insert(full_key, alpha);
        Ok(alpha)
    }

    /// Simulates `transfers` source-to-sink deliveries and returns their
    /// delay and hop-count statistics.
    pub fn run(
        &self,
        net: &Network,
        policy: E2ePolicy,
        transfers: usize,
        seed: u64,
    ) -> Result<E2eStats> {
        if transfers == 0 {
            return Err(Error::Domain("need at least one transfer".into()));
        }
        if let Some(target) = policy.target() {
            if !(0.0..=1.0).contains(&target) {
                return Err(Error::Domain(format!(
                    "target progress {target} outside [0,1]"
                )));
            }
        }
        self.prepare(net, policy)?;
        let records: Vec<(f64, u32)> = (0..transfers)
            .into_par_iter()
            .map(|t| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(TRANSFER_STREAM_BASE + t as u64);
                self.one_transfer(net, policy, &mut rng)
            })
            .collect::<Result<Vec<_>>>()?;
        let mut delay = Moments::default();
        let mut hops = Moments::default();
        for &(d, h) in &records {
            delay.push(d);
            hops.push(h as f64);
        }
        Ok(E2eStats {
            transfers,
            delay,
            hops,
            records,
        })
    }

    fn one_transfer<R: Rng + ?Sized>(
        &self,
        net: &Network,
        policy: E2ePolicy,
        rng: &mut R,
    ) -> Result<(f64, u32)> {
        let period = self.params.wake_period;
        let beacon = self.params.beacon;
        // The nudge keeps an exact slot count (a 1 s period of 5 ms slots is
        // 200) from flooring one short when the quotient rounds below the
        // integer.
        let fallback_slot = ((period / beacon + 1e-9).floor() as usize).max(1);
        let phases: Vec<f64> = (0..net.node_count()).map(|_| rng.random()).collect();
        let sink = net.sink();
        let mut at = net.source();
        let mut time = 0.0f64;
        let mut hops = 0u32;
        while at != sink {
            if hops as usize > net.node_count() {
                return Err(Error::Simulation(
                    "transfer exceeded the node count in hops".into(),
                ));
            }
            let from_sink = net.sink_distance[at];
            if from_sink <= net.radio_range {
                // Only the sink remains: hold the packet for its next wake.
                let wait = waiting_time(time, phases[sink] * period, period)?;
                let slot = (wait / beacon).floor() as usize + 1;
                time += slot as f64 * beacon + self.params.packet;
                hops += 1;
                at = sink;
                continue;
            }
            let set = &net.forwarding[at];
            if set.is_empty() {
                return Err(Error::Simulation(format!(
                    "node {at} has no forwarding candidates"
                )));
            }
            let (alpha, believed) = match policy {
                E2ePolicy::FirstForward => (0.0, set.len()),
                E2ePolicy::MaxForward => (1.0, set.len()),
                E2ePolicy::Calibrated { target } => {
                    let distance = from_sink / net.radio_range;
                    let key = distance_key(distance);
                    let model = self.model_for(distance)?;
                    (
                        self.threshold_for(&model, key, set.len(), target)?,
                        set.len(),
                    )
                }
                E2ePolicy::CalibratedEstimate { target } => {
                    let distance = from_sink / net.radio_range;
                    let key = distance_key(distance);
                    let model = self.model_for(distance)?;
                    let region = model.area_full() * net.radio_range * net.radio_range;
                    let believed = ((net.density * region).floor() as usize).max(1);
                    (self.threshold_for(&model, key, believed, target)?, believed)
                }
            };

            // Wake schedule of the candidates, grouped into beacon slots.
            let mut cands: Vec<(usize, f64, usize)> = Vec::with_capacity(set.len());
            for &j in set {
                let wait = waiting_time(time, phases[j] * period, period)?;
                let slot = (wait / beacon).floor() as usize + 1;
                let progress =
                    ((from_sink - net.sink_distance[j]) / net.radio_range).min(1.0);
                cands.push((slot, progress, j));
            }
            cands.sort_by(|a, b| {
                a.0.cmp(&b.0)
                    .then(b.1.total_cmp(&a.1))
                    .then(a.2.cmp(&b.2))
            });

            let mut woken = 0usize;
            let mut best_z = -1.0f64;
            let mut best_idx = usize::MAX;
            let mut stop_slot = None;
            let mut g = 0;
            while g < cands.len() {
                let slot = cands[g].0;
                if slot > fallback_slot && woken >= 1 {
                    stop_slot = Some(fallback_slot);
                    break;
                }
                while g < cands.len() && cands[g].0 == slot {
                    let (_, z, idx) = cands[g];
                    if z > best_z {
                        best_z = z;
                        best_idx = idx;
                    }
                    woken += 1;
                    g += 1;
                }
                if best_z >= alpha || woken >= believed || slot >= fallback_slot {
                    stop_slot = Some(slot);
                    break;
                }
            }
            // No stop during the wakes: the relay gives up waiting at the
            // end-of-period beacon and sends to the best it has seen.
            let slot = stop_slot.unwrap_or(fallback_slot);
            time += slot as f64 * beacon + self.params.packet;
            hops += 1;
            at = best_idx;
        }
        Ok((time, hops))
    }
}

/// Runs one end-to-end point per policy on a fixed network, each with its own
/// derived seed.
pub fn sweep_e2e(
    sim: &E2eSimulator,
    net: &Network,
    policies: &[E2ePolicy],
    transfers: usize,
    seed: u64,
) -> Result<Vec<E2eRow>> {
    let mut rows = Vec::with_capacity(policies.len());
    for (index, &policy) in policies.iter().enumerate() {
        let point_seed = seed.wrapping_add((index as u64).wrapping_mul(POINT_SEED_STRIDE));
        rows.push(E2eRow {
            policy: policy.tag().into(),
            gamma: policy.target(),
            side: net.side,
            density: net.density,
            stats: sim.run(net, policy, transfers, point_seed)?,
        });
    }
    Ok(rows)
}
