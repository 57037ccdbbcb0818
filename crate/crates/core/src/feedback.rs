//! Limited feedback of the hybrid precoder.
//!
//! The RF beams are restricted to a grid of quantized angles inside the
//! transmit sector, so each beam is fed back as an (azimuth, elevation) index
//! pair. The baseband precoder is a subspace and is quantized with a
//! Grassmannian codebook trained by Lloyd's algorithm under the chordal
//! distance.

use nalgebra::SymmetricEigen;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::arrays::{ArrayGeometry, Direction, Sector};
use crate::channel::{sample_channel, ChannelParams};
use crate::error::{Error, Result};
use crate::linalg::{fix_column_phases, frob_sq, polar_factor, select_columns, CMat, C64};
use crate::precoding::{optimal_precoder, sparse_precoder_omp, HybridPrecoder, OmpOptions};

/// Midpoints of `2^bits` equal cells of `[min, max]`.
pub fn angle_points(bits: u32, min: f64, max: f64) -> Vec<f64> {
    let n = 1usize << bits;
    let denom = (1u64 << (bits + 1)) as f64;
    (1..=n)
        .map(|m| min + (2 * m - 1) as f64 * (max - min) / denom)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AngleCodebook {
    pub bits_az: u32,
    pub bits_el: u32,
    pub sector: Sector,
    pub points_az: Vec<f64>,
    pub points_el: Vec<f64>,
}

impl AngleCodebook {
    pub fn new(bits_az: u32, bits_el: u32, sector: Sector) -> Result<Self> {
        sector.validate()?;
        if bits_az > 16 || bits_el > 16 {
            return Err(Error::InvalidArgument(format!(
                "at most 16 bits per angle are supported, got {bits_az}/{bits_el}"
            )));
        }
        Ok(AngleCodebook {
            bits_az,
            bits_el,
            sector,
            points_az: angle_points(bits_az, sector.az_min, sector.az_max),
            points_el: angle_points(bits_el, sector.el_min, sector.el_max),
        })
    }

    pub fn bits_per_beam(&self) -> u32 {
        self.bits_az + self.bits_el
    }

    pub fn len(&self) -> usize {
        self.points_az.len() * self.points_el.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Dictionary column of an (azimuth, elevation) index pair.
    pub fn column_index(&self, az_idx: usize, el_idx: usize) -> usize {
        az_idx * self.points_el.len() + el_idx
    }

    /// Inverse of [`AngleCodebook::column_index`].
    pub fn decode_column(&self, column: usize) -> (usize, usize) {
        (column / self.points_el.len(), column % self.points_el.len())
    }

    pub fn direction(&self, az_idx: usize, el_idx: usize) -> Direction {
        Direction::new(self.points_az[az_idx], self.points_el[el_idx])
    }

    /// Nearest codebook point on each axis.
    pub fn quantize(&self, dir: Direction) -> (usize, usize) {
        (nearest(&self.points_az, dir.az), nearest(&self.points_el, dir.el))
    }
}

fn nearest(points: &[f64], x: f64) -> usize {
    let mut best = 0;
    for (i, p) in points.iter().enumerate() {
        if (p - x).abs() < (points[best] - x).abs() {
            best = i;
        }
    }
    best
}

/// Responses at every codebook direction, azimuth index major.
pub fn quantized_dictionary(codebook: &AngleCodebook, geom: &ArrayGeometry) -> CMat {
    let n = geom.n_elements();
    let mut dict = CMat::zeros(n, codebook.len());
    for a in 0..codebook.points_az.len() {
        for e in 0..codebook.points_el.len() {
            dict.set_column(codebook.column_index(a, e), &geom.response(codebook.direction(a, e)));
        }
    }
    dict
}

/// `Ns − ‖A^* B‖²_F` for matrices with orthonormal columns.
pub fn chordal_distance_sq(a: &CMat, b: &CMat) -> f64 {
    (a.ncols() as f64 - frob_sq(&(a.adjoint() * b))).max(0.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubspaceCodebook {
    pub bits: u32,
    pub entries: Vec<CMat>,
}

impl SubspaceCodebook {
    pub fn dim(&self) -> usize {
        self.entries[0].nrows()
    }

    pub fn ns(&self) -> usize {
        self.entries[0].ncols()
    }

    pub fn validate(&self) -> Result<()> {
        if self.entries.len() != 1usize << self.bits {
            return Err(Error::InvalidArgument(format!(
                "{} entries do not match {} bits",
                self.entries.len(),
                self.bits
            )));
        }
        let (rows, cols) = self.entries[0].shape();
        for (i, e) in self.entries.iter().enumerate() {
            if e.shape() != (rows, cols) {
                return Err(Error::InvalidArgument(format!("entry {i} has inconsistent shape")));
            }
            let gram = e.adjoint() * e;
            if (gram - CMat::identity(cols, cols)).norm() > 1e-10 {
                return Err(Error::InvalidArgument(format!("entry {i} is not orthonormal")));
            }
        }
        Ok(())
    }

    pub fn to_json(&self, sector: Option<Sector>) -> Result<String> {
        let file = CodebookFile {
            bits: self.bits,
            rows: self.dim(),
            cols: self.ns(),
            sector,
            entries: self
                .entries
                .iter()
                .map(|e| {
                    let mut flat = Vec::with_capacity(e.len());
                    for r in 0..e.nrows() {
                        for c in 0..e.ncols() {
                            flat.push([e[(r, c)].re, e[(r, c)].im]);
                        }
                    }
                    flat
                })
                .collect(),
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn from_json(s: &str) -> Result<(SubspaceCodebook, Option<Sector>)> {
        let file: CodebookFile = serde_json::from_str(s)?;
        let mut entries = Vec::with_capacity(file.entries.len());
        for (i, flat) in file.entries.iter().enumerate() {
            if flat.len() != file.rows * file.cols {
                return Err(Error::InvalidArgument(format!("codebook entry {i} has {} values", flat.len())));
            }
            entries.push(CMat::from_fn(file.rows, file.cols, |r, c| {
                let [re, im] = flat[r * file.cols + c];
                C64::new(re, im)
            }));
        }
        if entries.is_empty() {
            return Err(Error::InvalidArgument("codebook has no entries".into()));
        }
        let cb = SubspaceCodebook { bits: file.bits, entries };
        cb.validate()?;
        Ok((cb, file.sector))
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct CodebookFile {
    bits: u32,
    rows: usize,
    cols: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    sector: Option<Sector>,
    /// Row-major `[re, im]` pairs, one list per entry.
    entries: Vec<Vec<[f64; 2]>>,
}

/// Lloyd iteration stops once the relative distortion change drops below
/// this value.
pub const LLOYD_TOL: f64 = 1e-6;
pub const LLOYD_MAX_ITER: usize = 100;

/// Dominant `ns`-dimensional subspace of a Hermitian PSD matrix.
fn dominant_subspace(m: &CMat, ns: usize) -> CMat {
    let eig = SymmetricEigen::new(m.clone());
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let mut out = select_columns(&eig.eigenvectors, &order[..ns]);
    fix_column_phases(&mut out);
    out
}

fn closest(entries: &[CMat], x: &CMat) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (i, e) in entries.iter().enumerate() {
        let d = chordal_distance_sq(e, x);
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}

/// Grassmannian codebook of `2^bits` subspaces trained with the generalized
/// Lloyd algorithm. Training samples are orthonormalized first.
pub fn train_bb_codebook<R: Rng + ?Sized>(training: &[CMat], bits: u32, rng: &mut R) -> Result<SubspaceCodebook> {
    let size = 1usize << bits;
    if training.len() < size * 10 {
        return Err(Error::InvalidArgument(format!(
            "{} training samples is fewer than 10 per codeword ({} needed)",
            training.len(),
            size * 10
        )));
    }
    let (rows, cols) = training[0].shape();
    if cols == 0 || cols > rows || training.iter().any(|t| t.shape() != (rows, cols)) {
        return Err(Error::InvalidArgument("training samples must share one tall shape".into()));
    }
    let samples: Vec<CMat> = training.iter().map(polar_factor).collect();

    let mut centroids: Vec<CMat> = rand::seq::index::sample(rng, samples.len(), size)
        .into_iter()
        .map(|i| samples[i].clone())
        .collect();
    let mut assignment = vec![0usize; samples.len()];
    let mut prev = f64::INFINITY;

    for iter in 0..LLOYD_MAX_ITER {
        let mut distortion = 0.0;
        for (i, s) in samples.iter().enumerate() {
            let (c, d) = closest(&centroids, s);
            assignment[i] = c;
            distortion += d;
        }
        distortion /= samples.len() as f64;

        repair_empty_cells(&samples, &centroids, &mut assignment);

        let mut sums = vec![CMat::zeros(rows, rows); size];
        for (s, &c) in samples.iter().zip(&assignment) {
            sums[c] += s * s.adjoint();
        }
        centroids = sums.iter().map(|m| dominant_subspace(m, cols)).collect();

        let change = if prev.is_finite() && prev > 0.0 {
            (prev - distortion).abs() / prev
        } else {
            f64::INFINITY
        };
        log::debug!("lloyd iteration {iter}: distortion {distortion:.6e}");
        if distortion == 0.0 || change < LLOYD_TOL {
            break;
        }
        prev = distortion;
    }
    Ok(SubspaceCodebook { bits, entries: centroids })
}

/// Every empty cell takes the member of the currently largest cell that is
/// farthest from that cell's centroid.
fn repair_empty_cells(samples: &[CMat], centroids: &[CMat], assignment: &mut [usize]) {
    let size = centroids.len();
    loop {
        let mut counts = vec![0usize; size];
        for &c in assignment.iter() {
            counts[c] += 1;
        }
        let Some(empty) = counts.iter().position(|&n| n == 0) else {
            return;
        };
        let largest = (0..size).max_by_key(|&c| (counts[c], std::cmp::Reverse(c))).unwrap();
        if counts[largest] < 2 {
            return;
        }
        let mut far = (usize::MAX, -1.0);
        for (i, s) in samples.iter().enumerate() {
            if assignment[i] == largest {
                let d = chordal_distance_sq(&centroids[largest], s);
                if d > far.1 {
                    far = (i, d);
                }
            }
        }
        assignment[far.0] = empty;
    }
}

/// Closest codebook entry to the orthonormalized `f_bb`; ties go to the
/// lowest index.
pub fn quantize_bb(f_bb: &CMat, codebook: &SubspaceCodebook) -> (usize, CMat) {
    let q = polar_factor(f_bb);
    let (i, _) = closest(&codebook.entries, &q);
    (i, codebook.entries[i].clone())
}

/// Quantized baseband samples for codebook training: unitary-baseband sparse
/// precoders over the quantized dictionary, on independent channels.
pub fn training_set<R: Rng + ?Sized>(
    params: &ChannelParams,
    angles: &AngleCodebook,
    n_rf: usize,
    ns: usize,
    samples: usize,
    rng: &mut R,
) -> Result<Vec<CMat>> {
    let targets = training_targets(params, ns, samples, rng)?;
    training_set_from_targets(&targets, angles, &params.tx, n_rf, ns)
}

/// The `ns_max` dominant right singular vectors of `samples` independent
/// channels. Realizations of lower rank are redrawn.
pub fn training_targets<R: Rng + ?Sized>(
    params: &ChannelParams,
    ns_max: usize,
    samples: usize,
    rng: &mut R,
) -> Result<Vec<CMat>> {
    let mut out = Vec::with_capacity(samples);
    while out.len() < samples {
        let ch = sample_channel(params, rng)?;
        match optimal_precoder(&ch.h, ns_max) {
            Ok(t) => out.push(t.f_opt),
            Err(Error::RankDeficient { .. }) => continue,
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

/// Training samples from precomputed targets, using the first `ns` columns
/// of each.
pub fn training_set_from_targets(
    targets: &[CMat],
    angles: &AngleCodebook,
    tx: &ArrayGeometry,
    n_rf: usize,
    ns: usize,
) -> Result<Vec<CMat>> {
    let dict = quantized_dictionary(angles, tx);
    let opts = OmpOptions { unitary_bb: true, forbid_reselection: false };
    targets
        .iter()
        .map(|t| {
            if t.ncols() < ns {
                return Err(Error::InvalidArgument(format!(
                    "target has {} columns, need {ns}",
                    t.ncols()
                )));
            }
            let p = sparse_precoder_omp(&t.columns(0, ns).into_owned(), &dict, n_rf, opts)?;
            Ok(polar_factor(&p.f_bb))
        })
        .collect()
}

/// What the receiver sends back: one angle index pair per RF chain and the
/// baseband codeword index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeedbackMessage {
    pub beams: Vec<(usize, usize)>,
    pub bb_index: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BitLayout {
    pub n_rf: usize,
    pub bits_az: u32,
    pub bits_el: u32,
    pub bits_bb: u32,
}

impl BitLayout {
    pub fn total_bits(&self) -> usize {
        self.n_rf * (self.bits_az + self.bits_el) as usize + self.bits_bb as usize
    }
}

fn push_bits(out: &mut Vec<bool>, value: usize, bits: u32) {
    for b in (0..bits).rev() {
        out.push((value >> b) & 1 == 1);
    }
}

fn read_bits(bits: &[bool], pos: &mut usize, width: u32) -> usize {
    let mut v = 0;
    for _ in 0..width {
        v = (v << 1) | bits[*pos] as usize;
        *pos += 1;
    }
    v
}

impl FeedbackMessage {
    /// Per beam the azimuth index then the elevation index, MSB first,
    /// followed by the baseband index.
    pub fn encode(&self, layout: &BitLayout) -> Result<Vec<bool>> {
        if self.beams.len() != layout.n_rf {
            return Err(Error::InvalidArgument(format!(
                "{} beams do not match {} RF chains",
                self.beams.len(),
                layout.n_rf
            )));
        }
        let fits = |v: usize, b: u32| (v >> b) == 0;
        let mut out = Vec::with_capacity(layout.total_bits());
        for &(a, e) in &self.beams {
            if !fits(a, layout.bits_az) || !fits(e, layout.bits_el) {
                return Err(Error::InvalidArgument(format!("beam index ({a}, {e}) exceeds its field")));
            }
            push_bits(&mut out, a, layout.bits_az);
            push_bits(&mut out, e, layout.bits_el);
        }
        if !fits(self.bb_index, layout.bits_bb) {
            return Err(Error::InvalidArgument(format!("baseband index {} exceeds its field", self.bb_index)));
        }
        push_bits(&mut out, self.bb_index, layout.bits_bb);
        Ok(out)
    }

    pub fn decode(bits: &[bool], layout: &BitLayout) -> Result<Self> {
        if bits.len() != layout.total_bits() {
            return Err(Error::InvalidArgument(format!(
                "expected {} feedback bits, got {}",
                layout.total_bits(),
                bits.len()
            )));
        }
        let mut pos = 0;
        let beams = (0..layout.n_rf)
            .map(|_| {
                let a = read_bits(bits, &mut pos, layout.bits_az);
                let e = read_bits(bits, &mut pos, layout.bits_el);
                (a, e)
            })
            .collect();
        let bb_index = read_bits(bits, &mut pos, layout.bits_bb);
        Ok(FeedbackMessage { beams, bb_index })
    }
}

/// Receiver-side design plus the transmitter's reconstruction.
#[derive(Debug, Clone)]
pub struct FeedbackOutcome {
    pub message: FeedbackMessage,
    pub bits: Vec<bool>,
    /// Precoder rebuilt by the transmitter from the bits alone.
    pub precoder: HybridPrecoder,
}

impl FeedbackOutcome {
    pub fn total_bits(&self) -> usize {
        self.bits.len()
    }
}

/// Quantization state shared by the receiver and the transmitter.
#[derive(Debug, Clone)]
pub struct FeedbackScheme {
    pub angles: AngleCodebook,
    pub bb: SubspaceCodebook,
    pub dictionary: CMat,
    pub n_rf: usize,
}

impl FeedbackScheme {
    pub fn new(angles: AngleCodebook, bb: SubspaceCodebook, tx: &ArrayGeometry) -> Result<Self> {
        bb.validate()?;
        let dictionary = quantized_dictionary(&angles, tx);
        let n_rf = bb.dim();
        Ok(FeedbackScheme { angles, bb, dictionary, n_rf })
    }

    pub fn layout(&self) -> BitLayout {
        BitLayout {
            n_rf: self.n_rf,
            bits_az: self.angles.bits_az,
            bits_el: self.angles.bits_el,
            bits_bb: self.bb.bits,
        }
    }

    /// Receiver: sparse precoder over the quantized dictionary with a unitary
    /// baseband, then baseband quantization; the result is encoded to bits
    /// and rebuilt exactly as the transmitter would.
    pub fn roundtrip(&self, f_target: &CMat) -> Result<FeedbackOutcome> {
        if f_target.ncols() != self.bb.ns() {
            return Err(Error::InvalidArgument(format!(
                "target has {} streams, baseband codebook has {}",
                f_target.ncols(),
                self.bb.ns()
            )));
        }
        let opts = OmpOptions { unitary_bb: true, forbid_reselection: false };
        let p = sparse_precoder_omp(f_target, &self.dictionary, self.n_rf, opts)?;
        let (bb_index, _) = quantize_bb(&p.f_bb, &self.bb);
        let message = FeedbackMessage {
            beams: p.selected_columns.iter().map(|&c| self.angles.decode_column(c)).collect(),
            bb_index,
        };
        let bits = message.encode(&self.layout())?;
        let precoder = self.reconstruct(&bits)?;
        Ok(FeedbackOutcome { message, bits, precoder })
    }

    /// Transmitter: rebuild `F_RF` and `F_BB` from the bits and recompute the
    /// power normalization locally.
    pub fn reconstruct(&self, bits: &[bool]) -> Result<HybridPrecoder> {
        let message = FeedbackMessage::decode(bits, &self.layout())?;
        let columns: Vec<usize> = message
            .beams
            .iter()
            .map(|&(a, e)| self.angles.column_index(a, e))
            .collect();
        let mut p = HybridPrecoder {
            f_rf: select_columns(&self.dictionary, &columns),
            f_bb: self.bb.entries[message.bb_index].clone(),
            selected_columns: columns,
            duplicate_selections: 0,
            residual_history: Vec::new(),
        };
        p.normalize_power()?;
        Ok(p)
    }
}

/// Codebook whose single entry spans the first `ns` coordinates; useful with
/// zero baseband bits.
pub fn trivial_bb_codebook(n_rf: usize, ns: usize) -> SubspaceCodebook {
    SubspaceCodebook {
        bits: 0,
        entries: vec![CMat::identity(n_rf, ns)],
    }
}
