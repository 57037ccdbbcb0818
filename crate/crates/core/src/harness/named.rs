//! The built-in experiments: rate-vs-SNR curves for two system sizes, a
//! rank-adaptive comparison against capacity, angle-spread and
//! feedback-resolution sweeps, and the beam pattern comparison.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::config::{
    ArraySpec, ChannelSpec, DictionarySpec, ExperimentConfig, Method, QuantizationSpec, SectorSpec,
    SteeringSpec, SweepSpec,
};
use super::output::{ensure_dir, file_name, run_experiment, write_file, RunOutput};
use super::sweep::trial_rng;
use crate::arrays::Direction;
use crate::channel::{response_dictionary, sample_channel, Side};
use crate::error::{Error, Result};
use crate::precoding::{
    beam_pattern, beam_steering_baseline, optimal_precoder, sparse_precoder_omp, OmpOptions,
    SteeringOptions,
};

pub const EXPERIMENTS: [&str; 6] = ["fig2", "fig3", "fig4", "fig5", "fig6", "beampattern"];

/// A Tx/Rx pair of square half-wavelength arrays with the default transmit
/// sector and omni receive elements.
fn system(tx_side: usize, rx_side: usize) -> (ArraySpec, ArraySpec) {
    (
        ArraySpec::square(tx_side).with_sector(SectorSpec::default_tx()),
        ArraySpec::square(rx_side),
    )
}

struct Base {
    name: String,
    tx_side: usize,
    rx_side: usize,
    n_rf: usize,
    streams: Vec<usize>,
    sweep: SweepSpec,
    trials: usize,
}

fn build(base: Base, seed: u64, methods: Vec<Method>) -> ExperimentConfig {
    let (tx, rx) = system(base.tx_side, base.rx_side);
    ExperimentConfig {
        name: base.name,
        seed,
        trials: base.trials,
        methods,
        streams: base.streams,
        rank_adaptive: false,
        n_rf_tx: base.n_rf,
        n_rf_rx: base.n_rf,
        tx,
        rx,
        channel: ChannelSpec::default(),
        sweep: base.sweep,
        steering: SteeringSpec::default(),
        omp: OmpOptions::default(),
        dictionary: DictionarySpec::Rays,
        quantization: None,
    }
}

fn snr(start_db: f64, stop_db: f64) -> SweepSpec {
    SweepSpec::Snr { start_db, stop_db, step_db: 5.0 }
}

fn standard_methods() -> Vec<Method> {
    vec![Method::Optimal, Method::Hybrid, Method::Steering]
}

/// Resolved configurations of a named sweep experiment (everything except
/// `beampattern`). `trials` overrides the per-experiment default.
pub fn named_configs(name: &str, seed: u64, trials: Option<usize>) -> Result<Vec<ExperimentConfig>> {
    let t = |default: usize| trials.unwrap_or(default);
    let cfgs = match name {
        "fig2" => vec![build(
            Base {
                name: "fig2".into(),
                tx_side: 8,
                rx_side: 4,
                n_rf: 4,
                streams: vec![1, 2],
                sweep: snr(-30.0, 10.0),
                trials: t(500),
            },
            seed,
            standard_methods(),
        )],
        "fig3" => vec![build(
            Base {
                name: "fig3".into(),
                tx_side: 16,
                rx_side: 8,
                n_rf: 6,
                streams: vec![1, 2],
                sweep: snr(-40.0, 0.0),
                trials: t(500),
            },
            seed,
            standard_methods(),
        )],
        "fig4" => {
            let mut c = build(
                Base {
                    name: "fig4".into(),
                    tx_side: 16,
                    rx_side: 8,
                    n_rf: 4,
                    streams: vec![4],
                    sweep: snr(-40.0, 0.0),
                    trials: t(200),
                },
                seed,
                standard_methods(),
            );
            c.rank_adaptive = true;
            // C(80, 4) subsets exceed the search cap; search the 20
            // strongest rays instead.
            c.steering.candidate_limit = Some(20);
            vec![c]
        }
        "fig5" => {
            let spreads: Vec<f64> = (0..=8).map(|k| 2.5 * k as f64).collect();
            let sweep = SweepSpec::AngleSpread { values_deg: spreads, snr_db: 0.0 };
            [
                ("fig5_64x16_rf4", 8, 4, 4, vec![1, 2]),
                ("fig5_64x16_rf6", 8, 4, 6, vec![2]),
                ("fig5_256x64_rf6", 16, 8, 6, vec![1]),
            ]
            .into_iter()
            .map(|(n, tx, rx, rf, streams)| {
                build(
                    Base {
                        name: n.into(),
                        tx_side: tx,
                        rx_side: rx,
                        n_rf: rf,
                        streams,
                        sweep: sweep.clone(),
                        trials: t(200),
                    },
                    seed,
                    vec![Method::Optimal, Method::Hybrid],
                )
            })
            .collect()
        }
        "fig6" => [("fig6_64x16", 8, 4), ("fig6_256x64", 16, 8)]
            .into_iter()
            .map(|(n, tx, rx)| {
                let mut c = build(
                    Base {
                        name: n.into(),
                        tx_side: tx,
                        rx_side: rx,
                        n_rf: 4,
                        streams: vec![1, 2],
                        sweep: SweepSpec::AngleBits { values: vec![1, 2, 3, 4], snr_db: 0.0 },
                        trials: t(500),
                    },
                    seed,
                    vec![Method::Optimal, Method::Hybrid, Method::QuantizedHybrid],
                );
                c.quantization = Some(QuantizationSpec {
                    bits_per_angle: None,
                    bb_bits: vec![4, 6],
                    training_samples: 2_000,
                    codebook: None,
                });
                c
            })
            .collect(),
        "beampattern" => {
            return Err(Error::InvalidArgument(
                "beampattern is not a sweep; use run_beampattern".into(),
            ))
        }
        other => {
            return Err(Error::Unknown { kind: "experiment", name: other.to_string() });
        }
    };
    for c in &cfgs {
        c.validate()?;
    }
    Ok(cfgs)
}

#[derive(Debug, Clone)]
pub enum NamedOutput {
    Sweeps(Vec<RunOutput>),
    Patterns(Vec<PathBuf>),
}

pub fn run_named_experiment(
    name: &str,
    seed: u64,
    trials: Option<usize>,
    out_dir: &Path,
    threads: Option<usize>,
) -> Result<NamedOutput> {
    if name == "beampattern" {
        return run_beampattern(&BeamPatternSpec { seed, ..BeamPatternSpec::default() }, out_dir)
            .map(NamedOutput::Patterns);
    }
    let cfgs = named_configs(name, seed, trials)?;
    let mut outs = Vec::with_capacity(cfgs.len());
    for c in &cfgs {
        outs.push(run_experiment(c, out_dir, threads)?);
    }
    Ok(NamedOutput::Sweeps(outs))
}

#[derive(Debug, Clone, Serialize)]
pub struct BeamPatternSpec {
    pub seed: u64,
    pub tx_side: usize,
    pub rx_side: usize,
    pub n_clusters: usize,
    pub n_rays: usize,
    pub n_rf: usize,
    /// Grid resolution in degrees.
    pub step_deg: f64,
}

impl Default for BeamPatternSpec {
    fn default() -> Self {
        BeamPatternSpec {
            seed: 1,
            tx_side: 16,
            rx_side: 8,
            n_clusters: 8,
            n_rays: 10,
            n_rf: 4,
            step_deg: 1.0,
        }
    }
}

/// Beam patterns of the optimal single-stream precoder, the sparse hybrid
/// precoder and the best single steering vector, for one zero-spread
/// channel. The grid covers azimuth [-90°, 90°] and elevation [0°, 180°];
/// a yz-plane array radiates symmetrically into the back half-space.
pub fn run_beampattern(spec: &BeamPatternSpec, out_dir: &Path) -> Result<Vec<PathBuf>> {
    if !(spec.step_deg > 0.0) {
        return Err(Error::InvalidArgument("grid step must be positive".into()));
    }
    let mut cfg = build(
        Base {
            name: "beampattern".into(),
            tx_side: spec.tx_side,
            rx_side: spec.rx_side,
            n_rf: spec.n_rf,
            streams: vec![1],
            sweep: snr(0.0, 0.0),
            trials: 1,
        },
        spec.seed,
        standard_methods(),
    );
    cfg.channel = ChannelSpec {
        n_clusters: spec.n_clusters,
        n_rays: spec.n_rays,
        angle_spread_deg: 0.0,
        cluster_powers: None,
    };
    cfg.validate()?;
    let params = cfg.channel_params(0.0)?;
    let ch = sample_channel(&params, &mut trial_rng(spec.seed, 0))?;

    let f_opt = optimal_precoder(&ch.h, 1)?.f_opt;
    let a_t = response_dictionary(&ch, Side::Tx);
    let hybrid = sparse_precoder_omp(&f_opt, &a_t, spec.n_rf, OmpOptions::default())?.matrix();
    let steering = beam_steering_baseline(&ch, 1, 1.0, SteeringOptions::default())?.f;

    let mut grid = Vec::new();
    let n_az = (180.0 / spec.step_deg).round() as usize;
    let n_el = (180.0 / spec.step_deg).round() as usize;
    for i in 0..=n_az {
        for j in 0..=n_el {
            grid.push((-90.0 + i as f64 * spec.step_deg, j as f64 * spec.step_deg));
        }
    }
    let dirs: Vec<Direction> = grid.iter().map(|&(a, e)| Direction::from_degrees(a, e)).collect();

    ensure_dir(out_dir)?;
    let mut paths = Vec::new();
    for (label, f) in [("optimal", &f_opt), ("hybrid", &hybrid), ("steering", &steering)] {
        let gains = beam_pattern(&f.column(0).into_owned(), &params.tx, &dirs);
        let mut s = String::from("az_deg,el_deg,gain_db\n");
        for ((a, e), g) in grid.iter().zip(&gains) {
            writeln!(s, "{a},{e},{}", 10.0 * g.max(1e-30).log10()).expect("String write");
        }
        let path = out_dir.join(format!("beampattern_{label}.csv"));
        write_file(&path, &s)?;
        paths.push(path);
    }
    let manifest = serde_json::json!({
        "tool": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "seed": spec.seed,
        "beampattern": spec,
        "outputs": paths.iter().map(|p| file_name(p)).collect::<Vec<_>>(),
    });
    let mpath = out_dir.join("beampattern.manifest.json");
    write_file(&mpath, &(serde_json::to_string_pretty(&manifest)? + "\n"))?;
    paths.push(mpath);
    Ok(paths)
}
