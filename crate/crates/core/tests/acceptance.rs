//! Acceptance suite: one PASS/FAIL line per criterion. Runs as a plain binary
//! (no libtest harness) and exits non-zero if any criterion fails.

use std::time::Instant;

use nalgebra::Cholesky;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use mmwave_sparse::arrays::{ArrayGeometry, Direction, Sector};
use mmwave_sparse::channel::{response_dictionary, sample_channel, ChannelParams, PowerProfile, Side};
use mmwave_sparse::combining::{
    design_link, mmse_combiner, mmse_combiner_covariance_form, rx_covariance, sparse_combiner_omp,
    LinkConfig, SignalModel,
};
use mmwave_sparse::feedback::{
    angle_points, train_bb_codebook, AngleCodebook, FeedbackMessage, FeedbackScheme,
};
use mmwave_sparse::harness::config::{QuantizationSpec, SweepSpec};
use mmwave_sparse::harness::named::named_configs;
use mmwave_sparse::harness::output::{run_experiment, Manifest};
use mmwave_sparse::harness::sweep::{sweep, trial_rng};
use mmwave_sparse::harness::{ExperimentConfig, Method};
use mmwave_sparse::linalg::{CMat, C64};
use mmwave_sparse::metrics::{db_to_linear, spectral_efficiency};
use mmwave_sparse::precoding::{
    beam_steering_baseline, mutual_information, optimal_precoder, sparse_precoder_omp, OmpOptions,
    SteeringOptions,
};

const SEED: u64 = 1;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict { pass, detail: detail.into() }
}

fn main() {
    let criteria: [(&str, fn() -> Verdict); 6] = [
        ("1 near-optimal hybrid rate, 64x16", criterion_1),
        ("2 hybrid vs steering SNR gap, 256x64", criterion_2),
        ("3 rate gap vs angle spread, 64x16", criterion_3),
        ("4 quantized feedback at 3 bits/angle", criterion_4),
        ("5 rank-adaptive hybrid vs capacity, 256x64", criterion_5),
        ("6 property suites", criterion_6),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        let start = Instant::now();
        let v = run();
        let secs = start.elapsed().as_secs_f64();
        let tag = if v.pass { "PASS" } else { "FAIL" };
        println!("{tag} criterion {name}: {} [{secs:.1}s]", v.detail);
        if !v.pass {
            failed += 1;
        }
    }
    if failed > 0 {
        println!("{failed} criterion/criteria failed");
        std::process::exit(1);
    }
}

fn mean_rate(r: &mmwave_sparse::harness::SweepResult, m: Method, ns: usize, idx: usize) -> f64 {
    r.curve(m, ns)[idx].rate.rate_mean
}

fn criterion_1() -> Verdict {
    let mut cfg = named_configs("fig2", SEED, Some(500)).unwrap().remove(0);
    cfg.methods = vec![Method::Optimal, Method::Hybrid];
    cfg.sweep = SweepSpec::Snr { start_db: 0.0, stop_db: 0.0, step_db: 1.0 };
    let r = sweep(&cfg, None).unwrap();
    let gap1 = mean_rate(&r, Method::Optimal, 1, 0) - mean_rate(&r, Method::Hybrid, 1, 0);
    let gap2 = mean_rate(&r, Method::Optimal, 2, 0) - mean_rate(&r, Method::Hybrid, 2, 0);
    verdict(
        gap1 < 0.2 && gap2 < 1.0,
        format!("gap Ns=1 {gap1:.3} (< 0.2), Ns=2 {gap2:.3} (< 1.0) bits/s/Hz"),
    )
}

/// SNR shift `d` at which the steering curve, sampled at `s + offsets`,
/// reaches `target`, by linear interpolation. `None` when out of range.
fn crossing(offsets: &[f64], curve: &[f64], target: f64) -> Option<f64> {
    offsets.windows(2).zip(curve.windows(2)).find_map(|(o, c)| {
        (c[0] <= target && target <= c[1]).then(|| o[0] + (target - c[0]) / (c[1] - c[0]) * (o[1] - o[0]))
    })
}

fn criterion_2() -> Verdict {
    let cfg = named_configs("fig3", SEED, Some(300)).unwrap().remove(0);
    let params = cfg.channel_params(cfg.channel.angle_spread_deg).unwrap();
    let starts = [-30.0, -20.0, -10.0];
    let offsets = [2.0, 3.5, 5.0, 6.5, 8.0];
    let trials = cfg.trials as u64;

    // per trial: [ns][s] hybrid rates and [ns][s][offset] steering rates
    let per_trial: Vec<(Vec<Vec<f64>>, Vec<Vec<Vec<f64>>>)> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let ch = sample_channel(&params, &mut trial_rng(SEED, t)).unwrap();
            let a_t = response_dictionary(&ch, Side::Tx);
            let a_r = response_dictionary(&ch, Side::Rx);
            let mut hyb = Vec::new();
            let mut steer = Vec::new();
            for &ns in &cfg.streams {
                let target = optimal_precoder(&ch.h, ns).unwrap();
                let mut h_row = Vec::new();
                let mut s_row = Vec::new();
                for &s in &starts {
                    let snr = db_to_linear(s);
                    let link = LinkConfig { n_rf_tx: cfg.n_rf_tx, n_rf_rx: cfg.n_rf_rx, snr, omp: OmpOptions::default() };
                    let d = design_link(&ch.h, &target, &a_t, &a_r, &link).unwrap();
                    h_row.push(spectral_efficiency(&ch.h, &d.precoder.matrix(), &d.combiner.matrix(), snr, ns));
                    s_row.push(
                        offsets
                            .iter()
                            .map(|o| {
                                beam_steering_baseline(&ch, ns, db_to_linear(s + o), SteeringOptions::default())
                                    .unwrap()
                                    .rate
                            })
                            .collect::<Vec<_>>(),
                    );
                }
                hyb.push(h_row);
                steer.push(s_row);
            }
            (hyb, steer)
        })
        .collect();

    let n = per_trial.len() as f64;
    let mut pass = true;
    let mut parts = Vec::new();
    for (si, &ns) in cfg.streams.iter().enumerate() {
        for (k, &s) in starts.iter().enumerate() {
            let hyb: f64 = per_trial.iter().map(|t| t.0[si][k]).sum::<f64>() / n;
            let curve: Vec<f64> = (0..offsets.len())
                .map(|o| per_trial.iter().map(|t| t.1[si][k][o]).sum::<f64>() / n)
                .collect();
            let d = crossing(&offsets, &curve, hyb);
            let ok = d.is_some_and(|d| (d - 5.0).abs() <= 1.5);
            pass &= ok;
            parts.push(match d {
                Some(d) => format!("Ns={ns} s={s}: {d:.2} dB"),
                None if hyb < curve[0] => format!("Ns={ns} s={s}: < {} dB", offsets[0]),
                None => format!("Ns={ns} s={s}: > {} dB", offsets[offsets.len() - 1]),
            });
        }
    }
    verdict(pass, format!("equal-rate SNR shift, need 5 +- 1.5 dB; {}", parts.join(", ")))
}

fn criterion_3() -> Verdict {
    let mut cfg = named_configs("fig5", SEED, Some(200))
        .unwrap()
        .into_iter()
        .find(|c| c.name == "fig5_64x16_rf4")
        .unwrap();
    cfg.streams = vec![1];
    cfg.sweep = SweepSpec::AngleSpread { values_deg: vec![5.0, 15.0], snr_db: 0.0 };
    let r = sweep(&cfg, None).unwrap();
    let rel = |i: usize| 1.0 - mean_rate(&r, Method::Hybrid, 1, i) / mean_rate(&r, Method::Optimal, 1, i);
    let (g5, g15) = (rel(0), rel(1));
    verdict(
        g5 < 0.03 && g15 < 0.10,
        format!("relative gap {:.2}% at 5 deg (< 3%), {:.2}% at 15 deg (< 10%)", 100.0 * g5, 100.0 * g15),
    )
}

fn criterion_4() -> Verdict {
    let mut cfg = named_configs("fig6", SEED, Some(200))
        .unwrap()
        .into_iter()
        .find(|c| c.name == "fig6_64x16")
        .unwrap();
    cfg.streams = vec![1];
    cfg.methods = vec![Method::Hybrid, Method::QuantizedHybrid];
    cfg.sweep = SweepSpec::AngleBits { values: vec![3], snr_db: 0.0 };
    let q = cfg.quantization.as_ref().unwrap();
    cfg.quantization = Some(QuantizationSpec { bb_bits: vec![q.bb_bits[0]], ..q.clone() });
    let r = sweep(&cfg, None).unwrap();
    let ratio = mean_rate(&r, Method::QuantizedHybrid, 1, 0) / mean_rate(&r, Method::Hybrid, 1, 0);
    verdict(ratio >= 0.95, format!("quantized/unquantized = {:.2}% (>= 95%)", 100.0 * ratio))
}

fn criterion_5() -> Verdict {
    let mut cfg = named_configs("fig4", SEED, Some(200)).unwrap().remove(0);
    cfg.methods = vec![Method::Optimal, Method::Hybrid];
    cfg.sweep = SweepSpec::Snr { start_db: 0.0, stop_db: 0.0, step_db: 1.0 };
    let r = sweep(&cfg, None).unwrap();
    let ns = cfg.streams[0];
    let ratio = mean_rate(&r, Method::Hybrid, ns, 0) / mean_rate(&r, Method::Optimal, ns, 0);
    verdict(ratio >= 0.90, format!("hybrid/capacity = {:.2}% (>= 90%)", 100.0 * ratio))
}

// ---------------------------------------------------------------- criterion 6

fn cn(rng: &mut ChaCha8Rng) -> C64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

fn random_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> CMat {
    CMat::from_fn(rows, cols, |_, _| cn(rng))
}

fn random_params(rng: &mut ChaCha8Rng) -> ChannelParams {
    let tx_side = [3, 4, 6][rng.random_range(0..3)];
    let rx_side = [2, 3, 4][rng.random_range(0..3)];
    let tx = if rng.random_bool(0.5) {
        ArrayGeometry::square(tx_side).with_sector(Sector::from_degrees(-30.0, 30.0, 80.0, 100.0).unwrap())
    } else {
        ArrayGeometry::ula(tx_side * tx_side, 0.5)
    };
    ChannelParams {
        n_clusters: rng.random_range(1..=4),
        n_rays: rng.random_range(1..=5),
        angle_spread: rng.random_range(0.0..15f64).to_radians(),
        power_profile: PowerProfile::Equal,
        tx,
        rx: ArrayGeometry::square(rx_side),
    }
}

type Check = (&'static str, fn() -> Result<String, String>);

fn criterion_6() -> Verdict {
    let checks: [Check; 10] = [
        ("constant modulus and power", prop_constant_modulus_and_power),
        ("residual monotonicity", prop_residual_monotone),
        ("greedy replay", prop_greedy_replay),
        ("mmse dual form", prop_mmse_dual_form),
        ("rx covariance monte carlo", prop_covariance_monte_carlo),
        ("sufficiency and data processing", prop_information),
        ("channel normalization", prop_channel_normalization),
        ("codebook midpoints", prop_codebook_midpoints),
        ("feedback round trip", prop_feedback_roundtrip),
        ("determinism", prop_determinism),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, check) in checks {
        match check() {
            Ok(s) => parts.push(format!("{name} ok ({s})")),
            Err(e) => {
                pass = false;
                parts.push(format!("{name} FAILED ({e})"));
            }
        }
    }
    verdict(pass, parts.join("; "))
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn prop_constant_modulus_and_power() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(61);
    let mut worst_mod: f64 = 0.0;
    let mut worst_pow: f64 = 0.0;
    for _ in 0..1000 {
        let params = random_params(&mut rng);
        let ch = sample_channel(&params, &mut rng).map_err(|e| e.to_string())?;
        let a_t = response_dictionary(&ch, Side::Tx);
        let a_r = response_dictionary(&ch, Side::Rx);
        let paths = params.n_paths();
        let n_rf_tx = rng.random_range(1..=4);
        let n_rf_rx = rng.random_range(1..=4usize.min(paths));
        let rank = optimal_precoder(&ch.h, 1).map(|_| ()).is_ok();
        if !rank {
            continue;
        }
        let max_ns = n_rf_tx.min(n_rf_rx);
        let ns = (1..=rng.random_range(1..=max_ns))
            .rev()
            .find(|&n| optimal_precoder(&ch.h, n).is_ok())
            .unwrap_or(1);
        let target = optimal_precoder(&ch.h, ns).map_err(|e| e.to_string())?;
        let snr = db_to_linear(rng.random_range(-20.0..10.0));
        let link = LinkConfig { n_rf_tx, n_rf_rx, snr, omp: OmpOptions::default() };
        let d = design_link(&ch.h, &target, &a_t, &a_r, &link).map_err(|e| e.to_string())?;
        let nt = ch.nt() as f64;
        let nr = ch.nr() as f64;
        for z in d.precoder.f_rf.iter() {
            worst_mod = worst_mod.max((z.norm() - nt.sqrt().recip()).abs());
        }
        for z in d.combiner.w_rf.iter() {
            worst_mod = worst_mod.max((z.norm() - nr.sqrt().recip()).abs());
        }
        worst_pow = worst_pow.max((d.precoder.matrix().norm_squared() - ns as f64).abs());
    }
    ensure(worst_mod <= 1e-12 && worst_pow <= 1e-10, || {
        format!("modulus error {worst_mod:.1e}, power error {worst_pow:.1e}")
    })?;
    Ok(format!("1000 designs, max modulus error {worst_mod:.1e}, max power error {worst_pow:.1e}"))
}

fn random_dictionary(n: usize, k: usize, rng: &mut ChaCha8Rng) -> (ArrayGeometry, CMat) {
    let g = ArrayGeometry::ula(n, 0.5);
    let mut d = CMat::zeros(n, k);
    for j in 0..k {
        let dir = Direction::new(rng.random_range(-1.5..1.5), std::f64::consts::FRAC_PI_2);
        d.set_column(j, &g.response(dir));
    }
    (g, d)
}

fn prop_residual_monotone() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(62);
    for case in 0..300 {
        let n = rng.random_range(4..=12);
        let k = rng.random_range(2..=16);
        let ns = rng.random_range(1..=3);
        let n_rf = rng.random_range(1..=6usize.min(k));
        let (_, dict) = random_dictionary(n, k, &mut rng);
        let target = random_matrix(n, ns, &mut rng);
        let p = sparse_precoder_omp(&target, &dict, n_rf, OmpOptions::default()).map_err(|e| e.to_string())?;
        ensure(p.residual_history.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12) + 1e-12), || {
            format!("precoder case {case}: {:?}", p.residual_history)
        })?;
        let model = SignalModel::new(random_matrix(n, 5, &mut rng), random_matrix(5, ns, &mut rng), 2.0)
            .map_err(|e| e.to_string())?;
        let c = sparse_combiner_omp(&model, &dict, n_rf).map_err(|e| e.to_string())?;
        ensure(c.residual_history.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12) + 1e-12), || {
            format!("combiner case {case}: {:?}", c.residual_history)
        })?;
    }
    Ok("300 cases per algorithm".into())
}

fn argmax_first(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

fn columns(d: &CMat, idx: &[usize]) -> CMat {
    CMat::from_columns(&idx.iter().map(|&i| d.column(i).into_owned()).collect::<Vec<_>>())
}

/// Straight transcription of the greedy loops, with normal-equation solves.
fn replay_precoder(target: &CMat, dict: &CMat, n_rf: usize) -> (Vec<usize>, CMat) {
    let mut res = target.clone();
    let mut sel = Vec::new();
    let mut bb = CMat::zeros(0, 0);
    for _ in 0..n_rf {
        let psi = dict.adjoint() * &res;
        let energy: Vec<f64> = (0..psi.nrows()).map(|i| psi.row(i).norm_squared()).collect();
        sel.push(argmax_first(&energy));
        let a = columns(dict, &sel);
        bb = Cholesky::new(a.adjoint() * &a).unwrap().solve(&(a.adjoint() * target));
        let diff = target - &a * &bb;
        res = &diff / C64::from(diff.norm());
    }
    (sel, bb)
}

fn replay_combiner(model: &SignalModel, dict: &CMat, n_rf: usize) -> (Vec<usize>, CMat) {
    let hf = &model.h * &model.f;
    let cov = &hf * hf.adjoint() * C64::from(model.rho / model.ns as f64)
        + CMat::identity(model.h.nrows(), model.h.nrows()) * C64::from(model.noise_var);
    let w_mmse = Cholesky::new(cov.clone()).unwrap().solve(&hf) * C64::from(model.rho.sqrt() / model.ns as f64);
    let mut res = w_mmse.clone();
    let mut sel = Vec::new();
    let mut bb = CMat::zeros(0, 0);
    for _ in 0..n_rf {
        let psi = dict.adjoint() * &cov * &res;
        let energy: Vec<f64> = (0..psi.nrows()).map(|i| psi.row(i).norm_squared()).collect();
        sel.push(argmax_first(&energy));
        let w = columns(dict, &sel);
        bb = Cholesky::new(w.adjoint() * &cov * &w).unwrap().solve(&(w.adjoint() * &cov * &w_mmse));
        let diff = &w_mmse - &w * &bb;
        res = &diff / C64::from(diff.norm());
    }
    (sel, bb)
}

fn prop_greedy_replay() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(63);
    let mut worst: f64 = 0.0;
    for case in 0..200 {
        let n = rng.random_range(6..=12);
        let k = rng.random_range(3..=8);
        let ns = rng.random_range(1..=2);
        let n_rf = rng.random_range(ns..=k.min(4));
        let (_, dict) = random_dictionary(n, k, &mut rng);
        let target = random_matrix(n, ns, &mut rng);
        let opts = OmpOptions { unitary_bb: false, forbid_reselection: true };
        let p = sparse_precoder_omp(&target, &dict, n_rf, opts).map_err(|e| e.to_string())?;
        let (sel, bb) = replay_precoder(&target, &dict, n_rf);
        ensure(p.selected_columns == sel, || format!("precoder case {case}: {:?} vs {sel:?}", p.selected_columns))?;
        // the library output is power-normalized; compare directions
        let scale = (columns(&dict, &sel) * &bb).norm() / p.matrix().norm();
        worst = worst.max((&p.f_bb * C64::from(scale) - &bb).norm() / bb.norm());

        let model = SignalModel::new(random_matrix(n, 6, &mut rng), random_matrix(6, ns, &mut rng), 3.0)
            .map_err(|e| e.to_string())?;
        let c = sparse_combiner_omp(&model, &dict, n_rf).map_err(|e| e.to_string())?;
        let (sel, bb) = replay_combiner(&model, &dict, n_rf);
        if c.duplicate_selections > 0 {
            continue;
        }
        ensure(c.selected_columns == sel, || format!("combiner case {case}: {:?} vs {sel:?}", c.selected_columns))?;
        worst = worst.max((&c.w_bb - &bb).norm() / bb.norm());
    }
    ensure(worst <= 1e-9, || format!("baseband mismatch {worst:.1e}"))?;
    Ok(format!("200 cases, max baseband mismatch {worst:.1e}"))
}

fn prop_mmse_dual_form() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(64);
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let nr = rng.random_range(2..=16);
        let nt = rng.random_range(2..=16);
        let ns = rng.random_range(1..=nt.min(4));
        let model = SignalModel::new(random_matrix(nr, nt, &mut rng), random_matrix(nt, ns, &mut rng), rng.random_range(0.01..100.0))
            .map_err(|e| e.to_string())?;
        let a = mmse_combiner(&model);
        let b = mmse_combiner_covariance_form(&model);
        worst = worst.max((&a - &b).norm() / a.norm());
    }
    ensure(worst <= 1e-9, || format!("relative difference {worst:.1e}"))?;
    Ok(format!("200 cases, max relative difference {worst:.1e}"))
}

fn prop_covariance_monte_carlo() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(65);
    let (nr, nt, ns) = (4, 6, 2);
    let model = SignalModel::new(random_matrix(nr, nt, &mut rng), random_matrix(nt, ns, &mut rng) * C64::from(0.5), 2.0)
        .map_err(|e| e.to_string())?
        .with_noise_var(0.5)
        .map_err(|e| e.to_string())?;
    let hf = &model.h * &model.f;
    let draws = 100_000;
    let mut acc = CMat::zeros(nr, nr);
    for _ in 0..draws {
        let s = random_matrix(ns, 1, &mut rng) * C64::from((1.0 / ns as f64).sqrt());
        let n = random_matrix(nr, 1, &mut rng) * C64::from(model.noise_var.sqrt());
        let y = &hf * s * C64::from(model.rho.sqrt()) + n;
        acc += &y * y.adjoint();
    }
    acc /= C64::from(draws as f64);
    let exact = rx_covariance(&model);
    let rel = (&acc - &exact).norm() / exact.norm();
    ensure(rel < 0.03, || format!("relative error {rel:.4}"))?;
    Ok(format!("relative error {:.2}%", 100.0 * rel))
}

fn prop_information() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(66);
    let mut worst_suff: f64 = 0.0;
    let mut worst_dpi: f64 = f64::NEG_INFINITY;
    for _ in 0..300 {
        let nr = rng.random_range(2..=8);
        let nt = rng.random_range(2..=8);
        let ns = rng.random_range(1..=nr.min(nt));
        let snr = rng.random_range(0.01..100.0);
        let h = random_matrix(nr, nt, &mut rng);
        let f = random_matrix(nt, ns, &mut rng);
        let mi = mutual_information(&h, &f, snr, ns);
        let w_mmse = mmse_combiner(&SignalModel::new(h.clone(), f.clone(), snr).map_err(|e| e.to_string())?);
        worst_suff = worst_suff.max((spectral_efficiency(&h, &f, &w_mmse, snr, ns) - mi).abs());
        let cols = rng.random_range(1..=nr);
        let w = random_matrix(nr, cols, &mut rng);
        worst_dpi = worst_dpi.max(spectral_efficiency(&h, &f, &w, snr, ns) - mi);
    }
    ensure(worst_suff <= 1e-9 && worst_dpi <= 1e-9, || {
        format!("sufficiency error {worst_suff:.1e}, data-processing excess {worst_dpi:.1e}")
    })?;
    Ok(format!("300 cases, sufficiency error {worst_suff:.1e}, max excess {worst_dpi:.1e}"))
}

fn prop_channel_normalization() -> Result<String, String> {
    let cfg = named_configs("fig2", SEED, None).unwrap().remove(0);
    let params = cfg.channel_params(cfg.channel.angle_spread_deg).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(67);
    let samples = 2000;
    let mut total = 0.0;
    for _ in 0..samples {
        total += sample_channel(&params, &mut rng).map_err(|e| e.to_string())?.h.norm_squared();
    }
    let expected = (params.tx.n_elements() * params.rx.n_elements()) as f64;
    let ratio = total / samples as f64 / expected;
    ensure((ratio - 1.0).abs() <= 0.05, || format!("E|H|^2 / (Nt Nr) = {ratio:.4}"))?;
    Ok(format!("E|H|^2 / (Nt Nr) = {ratio:.4}"))
}

fn prop_codebook_midpoints() -> Result<String, String> {
    for bits in 0..=6u32 {
        for (lo, hi) in [(-30.0f64, 30.0f64), (80.0, 100.0), (-180.0, 180.0)] {
            let pts = angle_points(bits, lo.to_radians(), hi.to_radians());
            let n = 1usize << bits;
            ensure(pts.len() == n, || format!("{bits} bits gave {} points", pts.len()))?;
            for (k, p) in pts.iter().enumerate() {
                // cell midpoints: lo + (k + 1/2) * width / n
                let expect = lo.to_radians() + (k as f64 + 0.5) * (hi - lo).to_radians() / n as f64;
                ensure((p - expect).abs() <= 1e-15, || format!("{bits} bits, point {k}: {p} vs {expect}"))?;
            }
        }
    }
    let s = Sector::from_degrees(-30.0, 30.0, 80.0, 100.0).map_err(|e| e.to_string())?;
    let cb = AngleCodebook::new(2, 2, s).map_err(|e| e.to_string())?;
    let az: Vec<f64> = cb.points_az.iter().map(|a| a.to_degrees()).collect();
    let want = [-22.5, -7.5, 7.5, 22.5];
    ensure(az.iter().zip(want).all(|(a, w)| (a - w).abs() < 1e-12), || format!("{az:?}"))?;
    Ok("bits 0..6 on three intervals".into())
}

fn prop_feedback_roundtrip() -> Result<String, String> {
    let cfg = named_configs("fig2", SEED, None).unwrap().remove(0);
    let params = cfg.channel_params(7.5).map_err(|e| e.to_string())?;
    let sector = params.tx.sector.unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(68);
    let mut checked = 0;
    for (bits, ns, bb_bits) in [(3u32, 1usize, 4u32), (2, 2, 6), (1, 1, 2)] {
        let angles = AngleCodebook::new(bits, bits, sector).map_err(|e| e.to_string())?;
        let training: Vec<CMat> = (0..(10 << bb_bits)).map(|_| random_matrix(4, ns, &mut rng)).collect();
        let bb = train_bb_codebook(&training, bb_bits, &mut rng).map_err(|e| e.to_string())?;
        let scheme = FeedbackScheme::new(angles, bb, &params.tx).map_err(|e| e.to_string())?;
        let layout = scheme.layout();
        for _ in 0..50 {
            let ch = sample_channel(&params, &mut rng).map_err(|e| e.to_string())?;
            let target = optimal_precoder(&ch.h, ns).map_err(|e| e.to_string())?;
            let out = scheme.roundtrip(&target.f_opt).map_err(|e| e.to_string())?;
            ensure(out.bits.len() == layout.total_bits(), || "bit count".into())?;
            let decoded = FeedbackMessage::decode(&out.bits, &layout).map_err(|e| e.to_string())?;
            ensure(decoded == out.message, || "decoded message differs".into())?;
            ensure(decoded.encode(&layout).map_err(|e| e.to_string())? == out.bits, || "re-encoding differs".into())?;
            let rebuilt = scheme.reconstruct(&out.bits).map_err(|e| e.to_string())?;
            ensure(rebuilt.matrix() == out.precoder.matrix(), || "reconstruction differs".into())?;
            checked += 1;
        }
    }
    Ok(format!("{checked} messages bit-exact"))
}

fn small_config() -> ExperimentConfig {
    let mut cfg = named_configs("fig2", 11, Some(6)).unwrap().remove(0);
    cfg.name = "determinism".into();
    cfg.methods = vec![Method::Optimal, Method::Hybrid, Method::Steering];
    cfg.sweep = SweepSpec::Snr { start_db: -10.0, stop_db: 0.0, step_db: 5.0 };
    cfg
}

fn prop_determinism() -> Result<String, String> {
    let cfg = small_config();
    let a = tempfile::tempdir().map_err(|e| e.to_string())?;
    let b = tempfile::tempdir().map_err(|e| e.to_string())?;
    let c = tempfile::tempdir().map_err(|e| e.to_string())?;
    let ra = run_experiment(&cfg, a.path(), Some(1)).map_err(|e| e.to_string())?;
    let rb = run_experiment(&cfg, b.path(), None).map_err(|e| e.to_string())?;
    let read = |p: &std::path::Path| std::fs::read(p).map_err(|e| e.to_string());
    ensure(read(&ra.csv)? == read(&rb.csv)?, || "CSV differs between reruns".into())?;
    ensure(read(&ra.manifest)? == read(&rb.manifest)?, || "manifest differs between reruns".into())?;
    let m = Manifest::load(&ra.manifest).map_err(|e| e.to_string())?;
    let rc = run_experiment(&m.config, c.path(), None).map_err(|e| e.to_string())?;
    ensure(read(&ra.csv)? == read(&rc.csv)?, || "manifest rerun differs".into())?;
    Ok("reruns and manifest replay byte-identical".into())
}
