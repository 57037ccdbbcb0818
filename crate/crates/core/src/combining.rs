//! MMSE combining, the sparse hybrid combiner, and the joint link design that
//! decides whether the transmitter or the receiver is designed first.

use log::debug;

use crate::error::{Error, Result};
use crate::linalg::{
    frob_sq, hermitian_part, hermitian_pinv, real, select_columns, weighted_frob_sq, CMat,
    RANK_TOL,
};
use crate::precoding::{
    argmax_lowest, row_energy, sparse_precoder_omp, HybridPrecoder, OmpOptions,
    UnconstrainedPrecoder,
};

/// Everything the receiver needs to know about the transmit side:
/// `y = √ρ H F s + n` with `E[ss^*] = I/Ns` and `E[nn^*] = σ² I`.
#[derive(Debug, Clone)]
pub struct SignalModel {
    pub h: CMat,
    /// Overall precoder `F_RF F_BB` (or any `Nt x Ns` precoder).
    pub f: CMat,
    pub rho: f64,
    pub noise_var: f64,
    pub ns: usize,
}

impl SignalModel {
    /// Model with unit noise variance, so `rho` is the SNR.
    pub fn new(h: CMat, f: CMat, snr: f64) -> Result<Self> {
        let ns = f.ncols();
        let model = SignalModel { h, f, rho: snr, noise_var: 1.0, ns };
        model.validate()?;
        Ok(model)
    }

    pub fn with_noise_var(mut self, noise_var: f64) -> Result<Self> {
        self.noise_var = noise_var;
        self.validate()?;
        Ok(self)
    }

    pub fn from_precoder(h: CMat, precoder: &HybridPrecoder, snr: f64) -> Result<Self> {
        SignalModel::new(h, precoder.matrix(), snr)
    }

    pub fn validate(&self) -> Result<()> {
        if self.h.ncols() != self.f.nrows() {
            return Err(Error::InvalidArgument(format!(
                "channel has {} columns but precoder has {} rows",
                self.h.ncols(),
                self.f.nrows()
            )));
        }
        if self.ns == 0 || self.ns != self.f.ncols() {
            return Err(Error::InvalidArgument(format!(
                "ns = {} does not match the {} precoder columns",
                self.ns,
                self.f.ncols()
            )));
        }
        if !(self.rho > 0.0 && self.rho.is_finite()) || !(self.noise_var > 0.0 && self.noise_var.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "rho and noise variance must be positive and finite (rho = {}, noise = {})",
                self.rho, self.noise_var
            )));
        }
        Ok(())
    }

    pub fn nr(&self) -> usize {
        self.h.nrows()
    }

    fn hf(&self) -> CMat {
        &self.h * &self.f
    }
}

/// `E[yy^*] = (ρ/Ns) H F F^* H^* + σ² I`.
pub fn rx_covariance(model: &SignalModel) -> CMat {
    let hf = model.hf();
    let nr = model.nr();
    let cov = &hf * hf.adjoint() * real(model.rho / model.ns as f64)
        + CMat::identity(nr, nr) * real(model.noise_var);
    hermitian_part(&cov)
}

/// Unconstrained MMSE combiner through the matrix inversion lemma:
/// `W = (1/√ρ) H F (F^* H^* H F + (σ² Ns/ρ) I)^{-1}`, which only inverts an
/// `Ns x Ns` matrix.
pub fn mmse_combiner(model: &SignalModel) -> CMat {
    let hf = model.hf();
    let ns = model.ns;
    let reg = model.noise_var * ns as f64 / model.rho;
    let g = hf.adjoint() * &hf + CMat::identity(ns, ns) * real(reg);
    let inv = hermitian_part(&g)
        .cholesky()
        .expect("regularized Gram matrix is positive definite")
        .inverse();
    hf * inv * real(1.0 / model.rho.sqrt())
}

/// The same combiner in covariance form, `W = (√ρ/Ns) E[yy^*]^{-1} H F`.
pub fn mmse_combiner_covariance_form(model: &SignalModel) -> CMat {
    let cov = rx_covariance(model);
    let chol = cov.cholesky().expect("covariance is positive definite");
    chol.solve(&model.hf()) * real(model.rho.sqrt() / model.ns as f64)
}

/// `E‖s − W^* y‖²` in closed form:
/// `1 − (2√ρ/Ns) Re tr(W^* H F) + tr(W^* E[yy^*] W)`.
pub fn mse(model: &SignalModel, w: &CMat) -> f64 {
    let cross = (w.adjoint() * model.hf()).trace().re;
    let quad = weighted_frob_sq(w, &rx_covariance(model));
    1.0 - 2.0 * model.rho.sqrt() / model.ns as f64 * cross + quad
}

#[derive(Debug, Clone)]
pub struct HybridCombiner {
    pub w_rf: CMat,
    pub w_bb: CMat,
    pub selected_columns: Vec<usize>,
    pub duplicate_selections: usize,
    /// Covariance-weighted residual `‖E[yy^*]^{1/2}(W_MMSE − W_RF W_BB)‖_F`
    /// after each iteration.
    pub residual_history: Vec<f64>,
}

impl HybridCombiner {
    pub fn matrix(&self) -> CMat {
        &self.w_rf * &self.w_bb
    }

    pub fn final_residual(&self) -> f64 {
        self.residual_history.last().copied().unwrap_or(f64::NAN)
    }
}

/// Sparse hybrid MMSE combiner: approximates the unconstrained MMSE combiner
/// by `n_rf` receive dictionary columns, with every fit weighted by the
/// received-signal covariance.
pub fn sparse_combiner_omp(model: &SignalModel, dictionary: &CMat, n_rf: usize) -> Result<HybridCombiner> {
    model.validate()?;
    let nr = model.nr();
    let k = dictionary.ncols();
    if dictionary.nrows() != nr {
        return Err(Error::InvalidArgument(format!(
            "receive dictionary has {} rows, channel has {}",
            dictionary.nrows(),
            nr
        )));
    }
    if n_rf == 0 || n_rf > k {
        return Err(Error::InvalidArgument(format!(
            "need 1 <= n_rf <= {k} receive RF chains, got {n_rf}"
        )));
    }
    let cov = rx_covariance(model);
    let w_mmse = mmse_combiner(model);
    let mmse_norm = frob_sq(&w_mmse).sqrt();
    // A^* E[yy^*] is fixed across iterations.
    let ac = dictionary.adjoint() * &cov;

    let mut selected = Vec::with_capacity(n_rf);
    let mut duplicates = 0;
    let mut history = Vec::with_capacity(n_rf);
    let mut w_res = w_mmse.clone();
    let mut w_rf = CMat::zeros(nr, 0);
    let mut w_bb = CMat::zeros(0, model.ns);

    for _ in 0..n_rf {
        let psi = &ac * &w_res;
        let pick = argmax_lowest(row_energy(&psi).into_iter().enumerate()).expect("non-empty dictionary");
        if selected.contains(&pick) {
            duplicates += 1;
        }
        selected.push(pick);
        w_rf = select_columns(dictionary, &selected);

        let cw = &cov * &w_rf;
        let gram = w_rf.adjoint() * &cw;
        w_bb = hermitian_pinv(&gram, RANK_TOL) * cw.adjoint() * &w_mmse;

        let diff = &w_mmse - &w_rf * &w_bb;
        history.push(weighted_frob_sq(&diff, &cov).sqrt());
        let plain = frob_sq(&diff).sqrt();
        w_res = if plain > 1e-14 * mmse_norm {
            diff / real(plain)
        } else {
            CMat::zeros(nr, model.ns)
        };
    }
    if duplicates > 0 {
        debug!("sparse combiner reselected {duplicates} dictionary column(s)");
    }
    Ok(HybridCombiner {
        w_rf,
        w_bb,
        selected_columns: selected,
        duplicate_selections: duplicates,
        residual_history: history,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkConfig {
    pub n_rf_tx: usize,
    pub n_rf_rx: usize,
    pub snr: f64,
    pub omp: OmpOptions,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DesignOrder {
    PrecoderFirst,
    CombinerFirst,
}

impl LinkConfig {
    /// The side with fewer RF chains is designed first; ties go to the
    /// precoder.
    pub fn order(&self) -> DesignOrder {
        if self.n_rf_tx > self.n_rf_rx {
            DesignOrder::CombinerFirst
        } else {
            DesignOrder::PrecoderFirst
        }
    }
}

#[derive(Debug, Clone)]
pub struct LinkDesign {
    pub precoder: HybridPrecoder,
    pub combiner: HybridCombiner,
    pub order: DesignOrder,
}

/// Joint hybrid design of a link.
///
/// Precoder first: the precoder approximates `target`, then the combiner is
/// designed against the resulting transmit signal. Combiner first: the
/// combiner is designed assuming the unconstrained `target` precoder, then the
/// precoder approximates the dominant right singular vectors of the effective
/// channel `W^* H`, with the target's power allocation.
pub fn design_link(
    h: &CMat,
    target: &UnconstrainedPrecoder,
    tx_dictionary: &CMat,
    rx_dictionary: &CMat,
    cfg: &LinkConfig,
) -> Result<LinkDesign> {
    match cfg.order() {
        DesignOrder::PrecoderFirst => {
            let precoder = sparse_precoder_omp(&target.f_opt, tx_dictionary, cfg.n_rf_tx, cfg.omp)?;
            let model = SignalModel::from_precoder(h.clone(), &precoder, cfg.snr)?;
            let combiner = sparse_combiner_omp(&model, rx_dictionary, cfg.n_rf_rx)?;
            Ok(LinkDesign { precoder, combiner, order: DesignOrder::PrecoderFirst })
        }
        DesignOrder::CombinerFirst => {
            let model = SignalModel::new(h.clone(), target.f_opt.clone(), cfg.snr)?;
            let combiner = sparse_combiner_omp(&model, rx_dictionary, cfg.n_rf_rx)?;
            let h_eff = combiner.matrix().adjoint() * h;
            let eff_target = target.retarget(&h_eff)?;
            let precoder = sparse_precoder_omp(&eff_target.f_opt, tx_dictionary, cfg.n_rf_tx, cfg.omp)?;
            Ok(LinkDesign { precoder, combiner, order: DesignOrder::CombinerFirst })
        }
    }
}
