//! Unconstrained precoders (SVD, waterfilling), the spatially sparse hybrid
//! precoder built by orthogonal matching pursuit over a dictionary of array
//! responses, and the beam-steering baseline.

use log::debug;
use serde::{Deserialize, Serialize};

use crate::arrays::{ArrayGeometry, Direction};
use crate::channel::{response_dictionary, ChannelRealization, Side};
use crate::error::{Error, Result};
use crate::linalg::{
    fix_column_phases, frob_sq, log2_det_hpd, lstsq, polar_factor, real, select_columns, CMat,
    CVec, SortedSvd, RANK_TOL,
};
use crate::metrics::rate_from_parts;

/// Optimal unconstrained precoder `F_opt = V_1 Γ`.
#[derive(Debug, Clone)]
pub struct UnconstrainedPrecoder {
    pub f_opt: CMat,
    /// Top `ns` singular values of the channel.
    pub singular_values: Vec<f64>,
    /// Per-stream power `γ_i²`; all ones for equal allocation, summing to
    /// `ns` in every case.
    pub powers: Vec<f64>,
}

impl UnconstrainedPrecoder {
    pub fn ns(&self) -> usize {
        self.f_opt.ncols()
    }

    /// Rebuilds the target from another channel's dominant right singular
    /// vectors, keeping this target's power allocation.
    pub fn retarget(&self, h: &CMat) -> Result<UnconstrainedPrecoder> {
        let base = optimal_precoder(h, self.ns())?;
        let mut f = base.f_opt;
        for (j, p) in self.powers.iter().enumerate() {
            let mut col = f.column_mut(j);
            col *= real(p.sqrt());
        }
        Ok(UnconstrainedPrecoder {
            f_opt: f,
            singular_values: base.singular_values,
            powers: self.powers.clone(),
        })
    }
}

/// The `ns` dominant right singular vectors of `h`, each scaled so that its
/// largest-modulus entry is real and positive.
pub fn optimal_precoder(h: &CMat, ns: usize) -> Result<UnconstrainedPrecoder> {
    let svd = SortedSvd::new(h);
    let rank = svd.rank(RANK_TOL);
    if ns == 0 || ns > rank {
        return Err(Error::RankDeficient { requested: ns, rank });
    }
    let mut v1 = svd.v.columns(0, ns).into_owned();
    fix_column_phases(&mut v1);
    Ok(UnconstrainedPrecoder {
        f_opt: v1,
        singular_values: svd.singular_values[..ns].to_vec(),
        powers: vec![1.0; ns],
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerAllocation {
    /// `γ_i²` for the active streams, summing to `ns`.
    pub powers: Vec<f64>,
    pub ns: usize,
    /// `Σ log2(1 + snr σ_i² γ_i² / ns)`, the capped waterfilling capacity.
    pub capacity: f64,
}

/// Waterfilling over eigenchannels `σ_i²` with total transmit power `ρ`
/// (noise variance 1), restricted to the `ns_max` strongest modes.
///
/// `singular_values` must be non-negative and sorted in decreasing order.
pub fn waterfilling(singular_values: &[f64], snr: f64, ns_max: usize) -> Result<PowerAllocation> {
    if singular_values.iter().any(|&s| !(s >= 0.0 && s.is_finite())) {
        return Err(Error::InvalidArgument("singular values must be finite and non-negative".into()));
    }
    if singular_values.windows(2).any(|w| w[0] < w[1]) {
        return Err(Error::InvalidArgument("singular values must be sorted in decreasing order".into()));
    }
    if !(snr > 0.0) {
        return Err(Error::InvalidArgument(format!("snr must be positive, got {snr}")));
    }
    let gains: Vec<f64> = singular_values
        .iter()
        .take(ns_max)
        .map(|s| s * s)
        .filter(|&g| g > 0.0)
        .collect();
    if gains.is_empty() {
        return Err(Error::InvalidArgument("cannot waterfill over all-zero singular values".into()));
    }
    // Fraction of the total power q_i = (μ - 1/(snr g_i))^+ with Σ q_i = 1.
    let inv: Vec<f64> = gains.iter().map(|g| 1.0 / (snr * g)).collect();
    let mut active = gains.len();
    let mut level = 0.0;
    while active > 0 {
        level = (1.0 + inv[..active].iter().sum::<f64>()) / active as f64;
        if level - inv[active - 1] > 0.0 {
            break;
        }
        active -= 1;
    }
    let fractions: Vec<f64> = inv[..active].iter().map(|v| level - v).collect();
    let ns = fractions.len();
    let powers: Vec<f64> = fractions.iter().map(|q| q * ns as f64).collect();
    let capacity = gains
        .iter()
        .zip(&fractions)
        .map(|(g, q)| (1.0 + snr * g * q).log2())
        .sum();
    Ok(PowerAllocation { powers, ns, capacity })
}

/// Capacity-achieving precoder `F_opt = V Γ` with at most `ns_max` streams.
pub fn waterfilled_precoder(h: &CMat, snr: f64, ns_max: usize) -> Result<UnconstrainedPrecoder> {
    let svd = SortedSvd::new(h);
    let alloc = waterfilling(&svd.singular_values, snr, ns_max)?;
    let mut base = optimal_precoder(h, alloc.ns)?;
    for (j, p) in alloc.powers.iter().enumerate() {
        let mut col = base.f_opt.column_mut(j);
        col *= real(p.sqrt());
    }
    base.powers = alloc.powers;
    Ok(base)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OmpOptions {
    /// Solve the baseband step as an orthogonal Procrustes problem so that
    /// the baseband precoder has orthonormal columns.
    pub unitary_bb: bool,
    /// Exclude already selected dictionary columns from later iterations.
    pub forbid_reselection: bool,
}

#[derive(Debug, Clone)]
pub struct HybridPrecoder {
    pub f_rf: CMat,
    pub f_bb: CMat,
    /// Dictionary column chosen at each iteration, in selection order.
    pub selected_columns: Vec<usize>,
    /// How many selections repeated an earlier column.
    pub duplicate_selections: usize,
    /// `‖F_opt − F_RF F_BB‖_F` after each iteration, before the final
    /// power normalization.
    pub residual_history: Vec<f64>,
}

impl HybridPrecoder {
    /// The overall precoder `F_RF F_BB`.
    pub fn matrix(&self) -> CMat {
        &self.f_rf * &self.f_bb
    }

    pub fn ns(&self) -> usize {
        self.f_bb.ncols()
    }

    pub fn final_residual(&self) -> f64 {
        self.residual_history.last().copied().unwrap_or(f64::NAN)
    }

    /// Rescales the baseband precoder so that `‖F_RF F_BB‖²_F = ns`.
    pub fn normalize_power(&mut self) -> Result<()> {
        let norm = frob_sq(&self.matrix()).sqrt();
        if !(norm > 0.0) {
            return Err(Error::Numerical("hybrid precoder is identically zero".into()));
        }
        self.f_bb *= real((self.ns() as f64).sqrt() / norm);
        Ok(())
    }
}

/// Index of the largest score; the lowest index wins ties.
pub(crate) fn argmax_lowest(scores: impl Iterator<Item = (usize, f64)>) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, s) in scores {
        match best {
            Some((_, b)) if s <= b => {}
            _ => best = Some((i, s)),
        }
    }
    best.map(|(i, _)| i)
}

/// Squared row norms of `m`: the diagonal of `m m^*`.
pub(crate) fn row_energy(m: &CMat) -> Vec<f64> {
    m.row_iter().map(|r| r.iter().map(|z| z.norm_sqr()).sum()).collect()
}

/// Sparse hybrid precoder: greedily approximates `f_target` by `n_rf`
/// dictionary columns combined at baseband.
///
/// Each iteration correlates the residual with every dictionary column,
/// appends the column with the largest correlation energy, refits the
/// baseband precoder over all selected columns (least squares, or the
/// Procrustes solution when `unitary_bb`), and renormalizes the residual.
/// The baseband precoder is finally scaled to `‖F_RF F_BB‖²_F = Ns`.
pub fn sparse_precoder_omp(
    f_target: &CMat,
    dictionary: &CMat,
    n_rf: usize,
    opts: OmpOptions,
) -> Result<HybridPrecoder> {
    let (nt, ns) = f_target.shape();
    let k = dictionary.ncols();
    if dictionary.nrows() != nt {
        return Err(Error::InvalidArgument(format!(
            "dictionary has {} rows, target has {}",
            dictionary.nrows(),
            nt
        )));
    }
    if n_rf == 0 || k == 0 {
        return Err(Error::InvalidArgument("need at least one RF chain and one dictionary column".into()));
    }
    if opts.forbid_reselection && n_rf > k {
        return Err(Error::InvalidArgument(format!(
            "{n_rf} RF chains cannot be filled from {k} columns without reselection"
        )));
    }
    let target_norm = frob_sq(f_target).sqrt();
    if !(target_norm > 0.0) {
        return Err(Error::InvalidArgument("target precoder is zero".into()));
    }

    let mut selected: Vec<usize> = Vec::with_capacity(n_rf);
    let mut duplicates = 0;
    let mut history = Vec::with_capacity(n_rf);
    let mut f_res = f_target.clone();
    let mut f_rf = CMat::zeros(nt, 0);
    let mut f_bb = CMat::zeros(0, ns);

    for _ in 0..n_rf {
        let psi = dictionary.adjoint() * &f_res;
        let energy = row_energy(&psi);
        let pick = argmax_lowest(
            energy
                .iter()
                .copied()
                .enumerate()
                .filter(|(i, _)| !(opts.forbid_reselection && selected.contains(i))),
        )
        .expect("at least one candidate column");
        if selected.contains(&pick) {
            duplicates += 1;
        }
        selected.push(pick);
        f_rf = select_columns(dictionary, &selected);

        f_bb = if opts.unitary_bb {
            polar_factor(&(f_rf.adjoint() * f_target))
        } else {
            lstsq(&f_rf, f_target, RANK_TOL)
        };

        let diff = f_target - &f_rf * &f_bb;
        let resid = frob_sq(&diff).sqrt();
        history.push(resid);
        f_res = if resid > 1e-14 * target_norm {
            diff / real(resid)
        } else {
            CMat::zeros(nt, ns)
        };
    }
    if duplicates > 0 {
        debug!("sparse precoder reselected {duplicates} dictionary column(s)");
    }

    let mut out = HybridPrecoder {
        f_rf,
        f_bb,
        selected_columns: selected,
        duplicate_selections: duplicates,
        residual_history: history,
    };
    out.normalize_power()?;
    Ok(out)
}

/// Mutual information with Gaussian signaling and an unconstrained receiver,
/// `log2 det(I + (ρ/(Ns σ²)) H F F^* H^*)`, evaluated in its `Ns x Ns` Gram
/// form. `snr = ρ/σ²`.
pub fn mutual_information(h: &CMat, f: &CMat, snr: f64, ns: usize) -> f64 {
    let hf = h * f;
    let m = CMat::identity(f.ncols(), f.ncols()) + hf.adjoint() * &hf * real(snr / ns as f64);
    log2_det_hpd(&m).max(0.0)
}

/// High-resolution approximation of the mutual information of `f`:
/// the optimal-precoder rate minus `Ns − ‖V_1^* F‖²_F`. Only meaningful as a
/// diagnostic of how close `f` is to `V_1`.
pub fn mutual_information_approx(h: &CMat, f: &CMat, snr: f64, ns: usize) -> Result<f64> {
    let opt = optimal_precoder(h, ns)?;
    let optimal_rate: f64 = opt
        .singular_values
        .iter()
        .map(|s| (1.0 + snr * s * s / ns as f64).log2())
        .sum();
    let overlap = frob_sq(&(opt.f_opt.adjoint() * f));
    Ok(optimal_rate - (ns as f64 - overlap))
}

/// Rate achieved by `F_opt = V_1` with equal power and an optimal receiver.
pub fn optimal_rate(singular_values: &[f64], snr: f64) -> f64 {
    let ns = singular_values.len() as f64;
    singular_values.iter().map(|s| (1.0 + snr * s * s / ns).log2()).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StreamPower {
    Equal,
    Waterfilling,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SteeringOptions {
    pub power: StreamPower,
    /// Largest number of ray subsets the exhaustive search may visit.
    pub max_subsets: u128,
    /// When set, only the strongest rays by single-path gain
    /// `|a_r^* H a_t|²` are candidates for the search.
    pub candidate_limit: Option<usize>,
}

impl Default for SteeringOptions {
    fn default() -> Self {
        SteeringOptions {
            power: StreamPower::Equal,
            max_subsets: 100_000,
            candidate_limit: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SteeringSolution {
    /// Ray indices, ascending.
    pub rays: Vec<usize>,
    /// `A_t[:, rays] Γ`.
    pub f: CMat,
    /// `A_r[:, rays]`.
    pub w: CMat,
    pub powers: Vec<f64>,
    pub rate: f64,
}

pub(crate) fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

/// Visits every `k`-subset of `0..n` in lexicographic order.
pub(crate) fn for_each_combination(n: usize, k: usize, mut visit: impl FnMut(&[usize])) {
    if k > n {
        return;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        visit(&idx);
        let mut i = k;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            if idx[i] != i + n - k {
                break;
            }
            if i == 0 {
                return;
            }
        }
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

fn sub_matrix(m: &CMat, rows: &[usize], cols: &[usize]) -> CMat {
    CMat::from_fn(rows.len(), cols.len(), |i, j| m[(rows[i], cols[j])])
}

/// Beam-steering baseline: each of `ns` streams is sent along one ray's
/// departure direction and received along the same ray's arrival direction.
/// The ray subset maximizing the post-combining spectral efficiency is found
/// by exhaustive search.
pub fn beam_steering_baseline(
    real_ch: &ChannelRealization,
    ns: usize,
    snr: f64,
    opts: SteeringOptions,
) -> Result<SteeringSolution> {
    let a_t = response_dictionary(real_ch, Side::Tx);
    let a_r = response_dictionary(real_ch, Side::Rx);
    let k = a_t.ncols();
    if ns == 0 || ns > k {
        return Err(Error::InvalidArgument(format!(
            "beam steering needs 1 <= ns <= {k} rays, got {ns}"
        )));
    }
    let gain = a_r.adjoint() * &real_ch.h * &a_t;
    let gram_r = a_r.adjoint() * &a_r;

    let mut candidates: Vec<usize> = (0..k).collect();
    if let Some(limit) = opts.candidate_limit {
        let limit = limit.max(ns).min(k);
        candidates.sort_by(|&a, &b| {
            gain[(b, b)]
                .norm_sqr()
                .partial_cmp(&gain[(a, a)].norm_sqr())
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.cmp(&b))
        });
        candidates.truncate(limit);
        candidates.sort_unstable();
    }
    let count = binomial(candidates.len(), ns);
    if count > opts.max_subsets {
        return Err(Error::SearchTooLarge {
            count,
            cap: opts.max_subsets,
        });
    }

    let mut best: Option<(Vec<usize>, Vec<f64>, f64)> = None;
    let mut failure = None;
    for_each_combination(candidates.len(), ns, |pos| {
        if failure.is_some() {
            return;
        }
        let rays: Vec<usize> = pos.iter().map(|&p| candidates[p]).collect();
        let powers = match opts.power {
            StreamPower::Equal => vec![1.0; ns],
            StreamPower::Waterfilling => match steering_powers(&gain, &rays, snr) {
                Ok(p) => p,
                Err(e) => {
                    failure = Some(e);
                    return;
                }
            },
        };
        let mut whf = sub_matrix(&gain, &rays, &rays);
        for (j, p) in powers.iter().enumerate() {
            let mut col = whf.column_mut(j);
            col *= real(p.sqrt());
        }
        let wtw = sub_matrix(&gram_r, &rays, &rays);
        let rate = rate_from_parts(&whf, &wtw, snr, ns);
        if best.as_ref().is_none_or(|(_, _, r)| rate > *r) {
            best = Some((rays, powers, rate));
        }
    });
    if let Some(e) = failure {
        return Err(e);
    }
    let (rays, powers, rate) = best.expect("at least one subset");
    let mut f = select_columns(&a_t, &rays);
    for (j, p) in powers.iter().enumerate() {
        let mut col = f.column_mut(j);
        col *= real(p.sqrt());
    }
    let w = select_columns(&a_r, &rays);
    Ok(SteeringSolution {
        rays,
        f,
        w,
        powers,
        rate,
    })
}

/// Waterfilling across the per-ray gains `|a_r^* H a_t|²` of a steering
/// subset; inactive rays get zero power. Powers sum to `rays.len()`.
fn steering_powers(gain: &CMat, rays: &[usize], snr: f64) -> Result<Vec<f64>> {
    let ns = rays.len();
    let mut order: Vec<usize> = (0..ns).collect();
    let g: Vec<f64> = rays.iter().map(|&r| gain[(r, r)].norm()).collect();
    order.sort_by(|&a, &b| g[b].partial_cmp(&g[a]).unwrap_or(std::cmp::Ordering::Equal));
    let sorted: Vec<f64> = order.iter().map(|&i| g[i]).collect();
    let alloc = waterfilling(&sorted, snr, ns)?;
    let mut powers = vec![0.0; ns];
    for (slot, &i) in order.iter().take(alloc.ns).enumerate() {
        // rescale from alloc.ns active streams to ns configured streams
        powers[i] = alloc.powers[slot] * ns as f64 / alloc.ns as f64;
    }
    Ok(powers)
}

/// Beam pattern `N |a(dir)^* f|²` of one precoder column over `grid`.
/// A steering vector evaluated at its own direction yields `N`.
pub fn beam_pattern(f: &CVec, geom: &ArrayGeometry, grid: &[Direction]) -> Vec<f64> {
    let n = geom.n_elements() as f64;
    grid.iter()
        .map(|d| n * geom.response(*d).dotc(f).norm_sqr())
        .collect()
}
