//! Monte Carlo sweeps over SNR, angle spread or angle quantization bits.
//!
//! Trial `t` always draws its channel from the same RNG stream, so every
//! method and every sweep point of a trial sees the same realization (for
//! angle-spread sweeps, the same underlying random numbers). Trials run in
//! parallel and are reduced in trial order, which keeps the output
//! independent of the thread count.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use log::info;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::config::{DictionarySpec, ExperimentConfig, Method, SweepPoint};
use crate::arrays::ArrayGeometry;
use crate::channel::{response_dictionary, sample_channel, ChannelParams, ChannelRealization, Side};
use crate::combining::{design_link, sparse_combiner_omp, LinkConfig, SignalModel};
use crate::error::{Error, Result};
use crate::feedback::{
    train_bb_codebook, training_set_from_targets, training_targets, AngleCodebook, FeedbackScheme, SubspaceCodebook,
};
use crate::linalg::{CMat, SortedSvd};
use crate::metrics::{db_to_linear, spectral_efficiency, RatePoint};
use crate::precoding::{
    beam_steering_baseline, optimal_precoder, optimal_rate, waterfilled_precoder, waterfilling,
    SteeringOptions, StreamPower, UnconstrainedPrecoder,
};

/// Aggregated rates of one method and stream count at one sweep point.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub method: Method,
    pub ns: usize,
    pub point: SweepPoint,
    pub rate: RatePoint,
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    /// Ordered by method (config order), stream count, then sweep point.
    pub rows: Vec<SweepRow>,
    /// Channel fingerprint per sweep point and trial.
    pub fingerprints: Vec<Vec<u64>>,
}

impl SweepResult {
    pub fn curve(&self, method: Method, ns: usize) -> Vec<&SweepRow> {
        self.rows.iter().filter(|r| r.method == method && r.ns == ns).collect()
    }
}

/// RNG for trial `trial` of a run seeded with `seed`.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// Key identifying a trained baseband codebook.
type SchemeKey = (u64, u32, usize);

struct Context {
    points: Vec<SweepPoint>,
    params: Vec<ChannelParams>,
    schemes: BTreeMap<SchemeKey, FeedbackScheme>,
}

pub fn sweep(cfg: &ExperimentConfig, threads: Option<usize>) -> Result<SweepResult> {
    cfg.validate()?;
    let run = || sweep_inner(cfg);
    match threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::InvalidArgument(format!("cannot build thread pool: {e}")))?
            .install(run),
        None => run(),
    }
}

fn sweep_inner(cfg: &ExperimentConfig) -> Result<SweepResult> {
    let points = cfg.sweep_points();
    let params = points
        .iter()
        .map(|p| cfg.channel_params(p.angle_spread_deg))
        .collect::<Result<Vec<_>>>()?;
    let schemes = if cfg.methods.contains(&Method::QuantizedHybrid) {
        build_schemes(cfg, &points, &params)?
    } else {
        BTreeMap::new()
    };
    let ctx = Context { points, params, schemes };
    info!(
        "{}: {} trials x {} points x {} stream counts x {} methods",
        cfg.name,
        cfg.trials,
        ctx.points.len(),
        cfg.streams.len(),
        cfg.methods.len()
    );

    let trials: Vec<TrialOutcome> = (0..cfg.trials)
        .into_par_iter()
        .map(|t| run_trial(cfg, &ctx, t as u64))
        .collect::<Result<Vec<_>>>()?;

    let mut rows = Vec::new();
    for (mi, &method) in cfg.methods.iter().enumerate() {
        for (si, &ns) in cfg.streams.iter().enumerate() {
            for (pi, point) in ctx.points.iter().enumerate() {
                let rates: Vec<f64> = trials.iter().map(|t| t.rates[pi][si][mi]).collect();
                rows.push(SweepRow {
                    method,
                    ns,
                    point: *point,
                    rate: RatePoint::from_rates(point.snr_db, &rates),
                });
            }
        }
    }
    let fingerprints = (0..ctx.points.len())
        .map(|pi| trials.iter().map(|t| t.fingerprints[pi]).collect())
        .collect();
    Ok(SweepResult { rows, fingerprints })
}

struct TrialOutcome {
    /// `[point][stream count][method]`
    rates: Vec<Vec<Vec<f64>>>,
    fingerprints: Vec<u64>,
}

fn run_trial(cfg: &ExperimentConfig, ctx: &Context, trial: u64) -> Result<TrialOutcome> {
    // One realization per distinct channel parameter set, all drawn from
    // this trial's stream.
    let mut cache: Vec<(usize, ChannelRealization)> = Vec::new();
    let mut rates = Vec::with_capacity(ctx.points.len());
    let mut fingerprints = Vec::with_capacity(ctx.points.len());
    for (pi, point) in ctx.points.iter().enumerate() {
        let params = &ctx.params[pi];
        let slot = match cache.iter().position(|(i, _)| ctx.params[*i] == *params) {
            Some(s) => s,
            None => {
                let ch = sample_channel(params, &mut trial_rng(cfg.seed, trial))?;
                cache.push((pi, ch));
                cache.len() - 1
            }
        };
        let ch = &cache[slot].1;
        fingerprints.push(ch.fingerprint());
        let snr = db_to_linear(point.snr_db);
        let mut per_ns = Vec::with_capacity(cfg.streams.len());
        for (si, &ns) in cfg.streams.iter().enumerate() {
            let ev = Evaluator::new(cfg, ctx, ch, snr, ns, si, point)?;
            let per_method = cfg
                .methods
                .iter()
                .map(|&m| ev.rate(m))
                .collect::<Result<Vec<_>>>()?;
            per_ns.push(per_method);
        }
        rates.push(per_ns);
    }
    Ok(TrialOutcome { rates, fingerprints })
}

/// Per-trial, per-stream-count state shared by the methods.
struct Evaluator<'a> {
    cfg: &'a ExperimentConfig,
    ctx: &'a Context,
    ch: &'a ChannelRealization,
    snr: f64,
    ns: usize,
    ns_index: usize,
    point: &'a SweepPoint,
    svd: SortedSvd,
}

impl<'a> Evaluator<'a> {
    fn new(
        cfg: &'a ExperimentConfig,
        ctx: &'a Context,
        ch: &'a ChannelRealization,
        snr: f64,
        ns: usize,
        ns_index: usize,
        point: &'a SweepPoint,
    ) -> Result<Self> {
        Ok(Evaluator { cfg, ctx, ch, snr, ns, ns_index, point, svd: SortedSvd::new(&ch.h) })
    }

    fn target(&self) -> Result<UnconstrainedPrecoder> {
        if self.cfg.rank_adaptive {
            waterfilled_precoder(&self.ch.h, self.snr, self.ns)
        } else {
            optimal_precoder(&self.ch.h, self.ns)
        }
    }

    fn capacity(&self) -> Result<f64> {
        Ok(waterfilling(&self.svd.singular_values, self.snr, self.ns)?.capacity)
    }

    fn rate(&self, method: Method) -> Result<f64> {
        match method {
            Method::Optimal if self.cfg.rank_adaptive => self.capacity(),
            Method::Optimal => Ok(optimal_rate(&self.svd.singular_values[..self.ns], self.snr)),
            Method::Waterfilling => self.capacity(),
            Method::Hybrid => self.hybrid(),
            Method::Steering => self.steering(),
            Method::QuantizedHybrid => self.quantized(),
        }
    }

    fn dictionaries(&self) -> (CMat, CMat) {
        match self.cfg.dictionary {
            DictionarySpec::Rays => (
                response_dictionary(self.ch, Side::Tx),
                response_dictionary(self.ch, Side::Rx),
            ),
            DictionarySpec::Grid { az_points, el_points } => (
                grid_dictionary(&self.ch.params.tx, az_points, el_points),
                grid_dictionary(&self.ch.params.rx, az_points, el_points),
            ),
        }
    }

    fn hybrid(&self) -> Result<f64> {
        let target = self.target()?;
        let (a_t, a_r) = self.dictionaries();
        let link = LinkConfig {
            n_rf_tx: self.cfg.n_rf_tx,
            n_rf_rx: self.cfg.n_rf_rx,
            snr: self.snr,
            omp: self.cfg.omp,
        };
        let d = design_link(&self.ch.h, &target, &a_t, &a_r, &link)?;
        Ok(spectral_efficiency(
            &self.ch.h,
            &d.precoder.matrix(),
            &d.combiner.matrix(),
            self.snr,
            target.ns(),
        ))
    }

    fn steering(&self) -> Result<f64> {
        let (ns, power) = if self.cfg.rank_adaptive {
            let alloc = waterfilling(&self.svd.singular_values, self.snr, self.ns)?;
            (alloc.ns, StreamPower::Waterfilling)
        } else {
            (self.ns, StreamPower::Equal)
        };
        let opts = SteeringOptions {
            power,
            max_subsets: self.cfg.steering.max_subsets as u128,
            candidate_limit: self.cfg.steering.candidate_limit,
        };
        Ok(beam_steering_baseline(self.ch, ns, self.snr, opts)?.rate)
    }

    fn quantized(&self) -> Result<f64> {
        let key = scheme_key(self.point, self.ns_index);
        let scheme = self
            .ctx
            .schemes
            .get(&key)
            .expect("feedback schemes are built for every sweep point");
        let target = self.target()?;
        let out = scheme.roundtrip(&target.f_opt)?;
        let (_, a_r) = self.dictionaries();
        let model = SignalModel::from_precoder(self.ch.h.clone(), &out.precoder, self.snr)?;
        let combiner = sparse_combiner_omp(&model, &a_r, self.cfg.n_rf_rx)?;
        Ok(spectral_efficiency(
            &self.ch.h,
            &out.precoder.matrix(),
            &combiner.matrix(),
            self.snr,
            self.ns,
        ))
    }
}

/// Responses on a uniform grid: cell midpoints over the sector, or over the
/// whole sphere (azimuth in [-π, π), elevation in [0, π]) for omni arrays.
pub fn grid_dictionary(geom: &ArrayGeometry, az_points: usize, el_points: usize) -> CMat {
    let (az, el) = match &geom.sector {
        Some(s) => (
            midpoints(az_points, s.az_min, s.az_max),
            midpoints(el_points, s.el_min, s.el_max),
        ),
        None => (midpoints(az_points, -PI, PI), midpoints(el_points, 0.0, PI)),
    };
    let mut dict = CMat::zeros(geom.n_elements(), az.len() * el.len());
    for (i, &a) in az.iter().enumerate() {
        for (j, &e) in el.iter().enumerate() {
            dict.set_column(i * el.len() + j, &geom.response(crate::arrays::Direction::new(a, e)));
        }
    }
    dict
}

fn midpoints(n: usize, min: f64, max: f64) -> Vec<f64> {
    (0..n).map(|k| min + (k as f64 + 0.5) * (max - min) / n as f64).collect()
}

fn scheme_key(point: &SweepPoint, ns_index: usize) -> SchemeKey {
    (point.angle_spread_deg.to_bits(), point.angle_bits.unwrap_or(0), ns_index)
}

/// Samples drawn per RNG stream when generating codebook training sets.
const TRAINING_CHUNK: usize = 250;

const TRAINING_STREAM: u64 = 0x5eed_0000_0000_0000;

fn build_schemes(
    cfg: &ExperimentConfig,
    points: &[SweepPoint],
    params: &[ChannelParams],
) -> Result<BTreeMap<SchemeKey, FeedbackScheme>> {
    let q = cfg.quantization.as_ref().expect("validated");
    let loaded = match &q.codebook {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::config("quantization.codebook", format!("{}: {e}", path.display())))?;
            let (cb, _) = SubspaceCodebook::from_json(&text)
                .map_err(|e| Error::config("quantization.codebook", e.to_string()))?;
            Some(cb)
        }
        None => None,
    };
    let ns_max = cfg.streams.iter().copied().max().unwrap_or(1);
    // Training channels depend only on the channel parameters, so one set of
    // targets serves every angle resolution and stream count.
    let mut targets: Vec<(u64, Vec<CMat>)> = Vec::new();
    let mut out = BTreeMap::new();
    for (pi, point) in points.iter().enumerate() {
        for (si, &ns) in cfg.streams.iter().enumerate() {
            let key = scheme_key(point, si);
            if out.contains_key(&key) {
                continue;
            }
            let p = &params[pi];
            let sector = p.tx.sector.expect("validated");
            let bits = point.angle_bits.expect("validated");
            let angles = AngleCodebook::new(bits, bits, sector)?;
            let bb = match &loaded {
                Some(cb) => {
                    if cb.dim() != cfg.n_rf_tx || cb.ns() != ns {
                        return Err(Error::config(
                            "quantization.codebook",
                            format!(
                                "codebook entries are {}x{}, need {}x{}",
                                cb.dim(),
                                cb.ns(),
                                cfg.n_rf_tx,
                                ns
                            ),
                        ));
                    }
                    cb.clone()
                }
                None => {
                    let spread_key = point.angle_spread_deg.to_bits();
                    if !targets.iter().any(|(k, _)| *k == spread_key) {
                        let stream = TRAINING_STREAM ^ ((targets.len() as u64) << 16);
                        let t = training_targets_parallel(p, ns_max, q.training_samples, cfg.seed, stream)?;
                        targets.push((spread_key, t));
                    }
                    let t = &targets.iter().find(|(k, _)| *k == spread_key).expect("inserted above").1;
                    let stream = TRAINING_STREAM ^ ((bits as u64) << 32) ^ ((si as u64) << 16);
                    codebook_from_targets(t, &angles, &p.tx, cfg.n_rf_tx, ns, q.bb_bits[si], cfg.seed, stream)?
                }
            };
            info!(
                "{}: baseband codebook for {} bit(s) per angle, Ns = {}, {} bits",
                cfg.name, bits, ns, bb.bits
            );
            out.insert(key, FeedbackScheme::new(angles, bb, &p.tx)?);
        }
    }
    Ok(out)
}

/// Trains a baseband codebook on `samples` quantized-dictionary precoders.
#[allow(clippy::too_many_arguments)]
pub fn train_codebook(
    params: &ChannelParams,
    angles: &AngleCodebook,
    n_rf: usize,
    ns: usize,
    bb_bits: u32,
    samples: usize,
    seed: u64,
    stream: u64,
) -> Result<SubspaceCodebook> {
    let targets = training_targets_parallel(params, ns, samples, seed, stream)?;
    codebook_from_targets(&targets, angles, &params.tx, n_rf, ns, bb_bits, seed, stream)
}

/// Unconstrained training targets generated in parallel chunks, each chunk
/// on its own fixed RNG stream.
fn training_targets_parallel(
    params: &ChannelParams,
    ns_max: usize,
    samples: usize,
    seed: u64,
    stream: u64,
) -> Result<Vec<CMat>> {
    let chunks = samples.div_ceil(TRAINING_CHUNK);
    let parts = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let n = TRAINING_CHUNK.min(samples - c * TRAINING_CHUNK);
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ stream);
            rng.set_stream(c as u64);
            training_targets(params, ns_max, n, &mut rng)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(parts.concat())
}

#[allow(clippy::too_many_arguments)]
fn codebook_from_targets(
    targets: &[CMat],
    angles: &AngleCodebook,
    tx: &ArrayGeometry,
    n_rf: usize,
    ns: usize,
    bb_bits: u32,
    seed: u64,
    stream: u64,
) -> Result<SubspaceCodebook> {
    let train = targets
        .par_chunks(TRAINING_CHUNK)
        .map(|c| training_set_from_targets(c, angles, tx, n_rf, ns))
        .collect::<Result<Vec<_>>>()?
        .concat();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ stream);
    rng.set_stream(u64::MAX);
    train_bb_codebook(&train, bb_bits, &mut rng)
}
