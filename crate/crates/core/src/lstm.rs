//! Stage 2: single-layer LSTM over encoded behavior traces.
//!
//! The recurrence is the standard one — logistic input/forget/output
//! gates, tanh candidate, `c_t = f⊙c_{t−1} + i⊙g`, `h_t = o⊙tanh(c_t)` —
//! read out from the last hidden state through a logistic head. Training
//! is plain SGD on binary cross-entropy with backpropagation through time
//! and global-norm gradient clipping; no adaptive state, so runs are easy
//! to reproduce and the analytic gradients can be verified against
//! central finite differences parameter by parameter.

use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::dataset::Label;
use crate::math;
use crate::rng;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LstmError {
    #[error("encoded event row has length {got}, model expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("training set must contain both classes")]
    SingleClass,
    #[error("invalid config: {0}")]
    BadConfig(&'static str),
    #[error("finite-difference step must be positive")]
    BadEps,
}

/// Dense row-major matrix; just enough linear algebra for the recurrence.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: alloc::vec![0.0; rows * cols],
        }
    }

    /// out += M v
    fn accum_matvec(&self, v: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            let row = &self.data[i * self.cols..(i + 1) * self.cols];
            *o += row.iter().zip(v).map(|(&m, &x)| m * x).sum::<f64>();
        }
    }

    /// out += Mᵀ v
    fn accum_matvec_t(&self, v: &[f64], out: &mut [f64]) {
        for i in 0..self.rows {
            let vi = v[i];
            let row = &self.data[i * self.cols..(i + 1) * self.cols];
            for (o, &m) in out.iter_mut().zip(row) {
                *o += m * vi;
            }
        }
    }

    /// self += a bᵀ
    fn accum_outer(&mut self, a: &[f64], b: &[f64]) {
        for (i, &ai) in a.iter().enumerate() {
            let row = &mut self.data[i * self.cols..(i + 1) * self.cols];
            for (m, &bj) in row.iter_mut().zip(b) {
                *m += ai * bj;
            }
        }
    }
}

/// All parameters of the single-layer LSTM classifier.
///
/// Gate weights are `H × m`, recurrent weights `H × H`, biases length `H`;
/// the readout is `w_out · h_T + b_out` through a logistic.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LstmParams {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub w_input: Matrix,
    pub w_forget: Matrix,
    pub w_output: Matrix,
    pub w_cell: Matrix,
    pub u_input: Matrix,
    pub u_forget: Matrix,
    pub u_output: Matrix,
    pub u_cell: Matrix,
    pub b_input: Vec<f64>,
    pub b_forget: Vec<f64>,
    pub b_output: Vec<f64>,
    pub b_cell: Vec<f64>,
    pub w_out: Vec<f64>,
    pub b_out: f64,
}

impl LstmParams {
    pub fn zeros(input_dim: usize, hidden_dim: usize) -> Self {
        Self {
            input_dim,
            hidden_dim,
            w_input: Matrix::zeros(hidden_dim, input_dim),
            w_forget: Matrix::zeros(hidden_dim, input_dim),
            w_output: Matrix::zeros(hidden_dim, input_dim),
            w_cell: Matrix::zeros(hidden_dim, input_dim),
            u_input: Matrix::zeros(hidden_dim, hidden_dim),
            u_forget: Matrix::zeros(hidden_dim, hidden_dim),
            u_output: Matrix::zeros(hidden_dim, hidden_dim),
            u_cell: Matrix::zeros(hidden_dim, hidden_dim),
            b_input: alloc::vec![0.0; hidden_dim],
            b_forget: alloc::vec![0.0; hidden_dim],
            b_output: alloc::vec![0.0; hidden_dim],
            b_cell: alloc::vec![0.0; hidden_dim],
            w_out: alloc::vec![0.0; hidden_dim],
            b_out: 0.0,
        }
    }

    /// Total scalar parameter count.
    pub fn flat_len(&self) -> usize {
        let (m, h) = (self.input_dim, self.hidden_dim);
        4 * h * m + 4 * h * h + 4 * h + h + 1
    }

    fn flat_parts(&self) -> [&[f64]; 13] {
        [
            &self.w_input.data,
            &self.w_forget.data,
            &self.w_output.data,
            &self.w_cell.data,
            &self.u_input.data,
            &self.u_forget.data,
            &self.u_output.data,
            &self.u_cell.data,
            &self.b_input,
            &self.b_forget,
            &self.b_output,
            &self.b_cell,
            &self.w_out,
        ]
    }

    fn flat_parts_mut(&mut self) -> [&mut [f64]; 13] {
        [
            &mut self.w_input.data,
            &mut self.w_forget.data,
            &mut self.w_output.data,
            &mut self.w_cell.data,
            &mut self.u_input.data,
            &mut self.u_forget.data,
            &mut self.u_output.data,
            &mut self.u_cell.data,
            &mut self.b_input,
            &mut self.b_forget,
            &mut self.b_output,
            &mut self.b_cell,
            &mut self.w_out,
        ]
    }

    /// Read parameter `index` in the canonical flat order
    /// `[W_i W_f W_o W_g, U_i U_f U_o U_g, b_i b_f b_o b_g, w_out, b_out]`.
    pub fn get_flat(&self, index: usize) -> f64 {
        let mut at = index;
        for part in self.flat_parts() {
            if at < part.len() {
                return part[at];
            }
            at -= part.len();
        }
        debug_assert_eq!(at, 0);
        self.b_out
    }

    pub fn set_flat(&mut self, index: usize, value: f64) {
        let mut at = index;
        for part in self.flat_parts_mut() {
            if at < part.len() {
                part[at] = value;
                return;
            }
            at -= part.len();
        }
        debug_assert_eq!(at, 0);
        self.b_out = value;
    }
}

/// Stage-2 result: probability-like maliciousness score in (0, 1).
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Stage2Output {
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SeqTrainConfig {
    pub hidden_dim: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub minibatch: usize,
    pub clip_norm: f64,
    /// Parameters initialize uniformly in `[-init_scale, init_scale]`.
    pub init_scale: f64,
}

impl Default for SeqTrainConfig {
    fn default() -> Self {
        Self {
            hidden_dim: 32,
            learning_rate: 0.01,
            epochs: 30,
            minibatch: 8,
            clip_norm: 5.0,
            init_scale: 0.1,
        }
    }
}

impl SeqTrainConfig {
    fn validate(&self) -> Result<(), LstmError> {
        if self.hidden_dim == 0 {
            return Err(LstmError::BadConfig("hidden_dim must be at least 1"));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(LstmError::BadConfig("learning_rate must be finite and >= 0"));
        }
        if self.epochs == 0 {
            return Err(LstmError::BadConfig("epochs must be at least 1"));
        }
        if self.minibatch == 0 {
            return Err(LstmError::BadConfig("minibatch must be at least 1"));
        }
        if !(self.clip_norm > 0.0) {
            return Err(LstmError::BadConfig("clip_norm must be positive"));
        }
        if !(self.init_scale >= 0.0) {
            return Err(LstmError::BadConfig("init_scale must be non-negative"));
        }
        Ok(())
    }
}

struct ForwardStates {
    // Per time step, length T each.
    i: Vec<Vec<f64>>,
    f: Vec<Vec<f64>>,
    o: Vec<Vec<f64>>,
    g: Vec<Vec<f64>>,
    c: Vec<Vec<f64>>,
    tanh_c: Vec<Vec<f64>>,
    h: Vec<Vec<f64>>,
    /// Pre-sigmoid readout.
    z: f64,
}

fn check_rows(p: &LstmParams, xd: &[Vec<f64>]) -> Result<(), LstmError> {
    for row in xd {
        if row.len() != p.input_dim {
            return Err(LstmError::DimensionMismatch {
                expected: p.input_dim,
                got: row.len(),
            });
        }
    }
    Ok(())
}

fn run_forward(p: &LstmParams, xd: &[Vec<f64>]) -> ForwardStates {
    let hdim = p.hidden_dim;
    let steps = xd.len();
    let mut states = ForwardStates {
        i: Vec::with_capacity(steps),
        f: Vec::with_capacity(steps),
        o: Vec::with_capacity(steps),
        g: Vec::with_capacity(steps),
        c: Vec::with_capacity(steps),
        tanh_c: Vec::with_capacity(steps),
        h: Vec::with_capacity(steps),
        z: 0.0,
    };

    let mut h_prev = alloc::vec![0.0; hdim];
    let mut c_prev = alloc::vec![0.0; hdim];
    for x in xd {
        let gate = |w: &Matrix, u: &Matrix, b: &[f64]| -> Vec<f64> {
            let mut a = b.to_vec();
            w.accum_matvec(x, &mut a);
            u.accum_matvec(&h_prev, &mut a);
            a
        };
        let i: Vec<f64> = gate(&p.w_input, &p.u_input, &p.b_input)
            .into_iter()
            .map(math::sigmoid)
            .collect();
        let f: Vec<f64> = gate(&p.w_forget, &p.u_forget, &p.b_forget)
            .into_iter()
            .map(math::sigmoid)
            .collect();
        let o: Vec<f64> = gate(&p.w_output, &p.u_output, &p.b_output)
            .into_iter()
            .map(math::sigmoid)
            .collect();
        let g: Vec<f64> = gate(&p.w_cell, &p.u_cell, &p.b_cell)
            .into_iter()
            .map(math::tanh)
            .collect();

        let c: Vec<f64> = (0..hdim)
            .map(|k| f[k] * c_prev[k] + i[k] * g[k])
            .collect();
        let tanh_c: Vec<f64> = c.iter().map(|&v| math::tanh(v)).collect();
        let h: Vec<f64> = (0..hdim).map(|k| o[k] * tanh_c[k]).collect();

        h_prev.clone_from(&h);
        c_prev.clone_from(&c);
        states.i.push(i);
        states.f.push(f);
        states.o.push(o);
        states.g.push(g);
        states.c.push(c);
        states.tanh_c.push(tanh_c);
        states.h.push(h);
    }

    states.z = p.w_out.iter().zip(&h_prev).map(|(&w, &h)| w * h).sum::<f64>() + p.b_out;
    states
}

/// Numerically stable binary cross-entropy of a pre-sigmoid score `z`
/// against label `y ∈ {0, 1}`.
fn bce_from_logit(z: f64, y: f64) -> f64 {
    z.max(0.0) - z * y + math::ln_1p(math::exp(-z.abs()))
}

/// Run the recurrence over an encoded trace. The empty trace scores
/// `sigmoid(b_out)`. The score is clamped just inside (0, 1) so the
/// stage-output invariant holds even when the logit saturates in f64.
pub fn lstm_forward(p: &LstmParams, xd: &[Vec<f64>]) -> Result<Stage2Output, LstmError> {
    check_rows(p, xd)?;
    let z = run_forward(p, xd).z;
    let score = math::sigmoid(z)
        .max(f64::MIN_POSITIVE)
        .min(1.0 - f64::EPSILON / 2.0);
    Ok(Stage2Output { score })
}

/// Accumulate BPTT gradients of the BCE loss into `grads`; returns the loss.
fn backward_into(
    p: &LstmParams,
    xd: &[Vec<f64>],
    label: Label,
    grads: &mut LstmParams,
) -> f64 {
    let s = run_forward(p, xd);
    let y = label.bit() as f64;
    let loss = bce_from_logit(s.z, y);
    let dz = math::sigmoid(s.z) - y;

    grads.b_out += dz;
    let steps = xd.len();
    if steps == 0 {
        return loss;
    }

    let hdim = p.hidden_dim;
    for k in 0..hdim {
        grads.w_out[k] += dz * s.h[steps - 1][k];
    }

    let mut dh: Vec<f64> = p.w_out.iter().map(|&w| dz * w).collect();
    let mut dc = alloc::vec![0.0; hdim];
    let zero = alloc::vec![0.0; hdim];
    for t in (0..steps).rev() {
        let (i, f, o, g) = (&s.i[t], &s.f[t], &s.o[t], &s.g[t]);
        let tanh_c = &s.tanh_c[t];
        let c_prev = if t == 0 { &zero } else { &s.c[t - 1] };
        let h_prev = if t == 0 { &zero } else { &s.h[t - 1] };

        let mut da_i = alloc::vec![0.0; hdim];
        let mut da_f = alloc::vec![0.0; hdim];
        let mut da_o = alloc::vec![0.0; hdim];
        let mut da_g = alloc::vec![0.0; hdim];
        for k in 0..hdim {
            let do_k = dh[k] * tanh_c[k];
            da_o[k] = do_k * o[k] * (1.0 - o[k]);

            dc[k] += dh[k] * o[k] * (1.0 - tanh_c[k] * tanh_c[k]);

            let di_k = dc[k] * g[k];
            da_i[k] = di_k * i[k] * (1.0 - i[k]);

            let dg_k = dc[k] * i[k];
            da_g[k] = dg_k * (1.0 - g[k] * g[k]);

            let df_k = dc[k] * c_prev[k];
            da_f[k] = df_k * f[k] * (1.0 - f[k]);
        }

        let x = &xd[t];
        grads.w_input.accum_outer(&da_i, x);
        grads.w_forget.accum_outer(&da_f, x);
        grads.w_output.accum_outer(&da_o, x);
        grads.w_cell.accum_outer(&da_g, x);
        grads.u_input.accum_outer(&da_i, h_prev);
        grads.u_forget.accum_outer(&da_f, h_prev);
        grads.u_output.accum_outer(&da_o, h_prev);
        grads.u_cell.accum_outer(&da_g, h_prev);
        for k in 0..hdim {
            grads.b_input[k] += da_i[k];
            grads.b_forget[k] += da_f[k];
            grads.b_output[k] += da_o[k];
            grads.b_cell[k] += da_g[k];
        }

        dh.iter_mut().for_each(|v| *v = 0.0);
        p.u_input.accum_matvec_t(&da_i, &mut dh);
        p.u_forget.accum_matvec_t(&da_f, &mut dh);
        p.u_output.accum_matvec_t(&da_o, &mut dh);
        p.u_cell.accum_matvec_t(&da_g, &mut dh);

        for k in 0..hdim {
            dc[k] *= f[k];
        }
    }
    loss
}

/// Fresh parameters for training: uniform in `[-init_scale, init_scale]`
/// with the forget-gate bias set to 1 afterwards.
pub fn init_params(input_dim: usize, cfg: &SeqTrainConfig, seed: u64) -> LstmParams {
    let mut rng = rng::for_stream(seed, rng::stream::LSTM);
    let mut p = LstmParams::zeros(input_dim, cfg.hidden_dim);
    for idx in 0..p.flat_len() {
        let v: f64 = rng.random::<f64>() * 2.0 - 1.0;
        p.set_flat(idx, v * cfg.init_scale);
    }
    for b in p.b_forget.iter_mut() {
        *b = 1.0;
    }
    p
}

/// Training result: final parameters plus the full-dataset mean loss
/// before training (index 0) and after each epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct SeqTrainOutcome {
    pub params: LstmParams,
    pub epoch_losses: Vec<f64>,
}

fn mean_loss(p: &LstmParams, data: &[(Vec<Vec<f64>>, Label)]) -> f64 {
    let total: f64 = data
        .iter()
        .map(|(xd, y)| bce_from_logit(run_forward(p, xd).z, y.bit() as f64))
        .sum();
    total / data.len() as f64
}

/// Minimize mean BCE with minibatch SGD + BPTT, gradients clipped to
/// `clip_norm` (global L2 norm), sample order reshuffled per epoch from
/// the seed.
pub fn lstm_train(
    data: &[(Vec<Vec<f64>>, Label)],
    input_dim: usize,
    cfg: &SeqTrainConfig,
    seed: u64,
) -> Result<SeqTrainOutcome, LstmError> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(LstmError::BadConfig("training set is empty"));
    }
    let has_pos = data.iter().any(|(_, y)| y.is_malicious());
    let has_neg = data.iter().any(|(_, y)| !y.is_malicious());
    if !(has_pos && has_neg) {
        return Err(LstmError::SingleClass);
    }
    for (xd, _) in data {
        for row in xd {
            if row.len() != input_dim {
                return Err(LstmError::DimensionMismatch {
                    expected: input_dim,
                    got: row.len(),
                });
            }
        }
    }

    let mut p = init_params(input_dim, cfg, seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut rng = rng::for_substream(seed, rng::stream::LSTM, 1);

    let mut epoch_losses = Vec::with_capacity(cfg.epochs + 1);
    epoch_losses.push(mean_loss(&p, data));

    let flat_len = p.flat_len();
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(cfg.minibatch) {
            let mut grads = LstmParams::zeros(input_dim, cfg.hidden_dim);
            for &s in batch {
                let (xd, y) = &data[s];
                backward_into(&p, xd, *y, &mut grads);
            }
            let scale = 1.0 / batch.len() as f64;
            let mut norm_sq = 0.0;
            for idx in 0..flat_len {
                let g = grads.get_flat(idx) * scale;
                grads.set_flat(idx, g);
                norm_sq += g * g;
            }
            let norm = math::sqrt(norm_sq);
            let clip = if norm > cfg.clip_norm {
                cfg.clip_norm / norm
            } else {
                1.0
            };
            for idx in 0..flat_len {
                let updated = p.get_flat(idx) - cfg.learning_rate * clip * grads.get_flat(idx);
                p.set_flat(idx, updated);
            }
        }
        epoch_losses.push(mean_loss(&p, data));
    }

    Ok(SeqTrainOutcome {
        params: p,
        epoch_losses,
    })
}

/// Maximum relative error between analytic BPTT gradients and central
/// finite differences over every parameter:
/// `|analytic − numeric| / max(1e-8, |analytic| + |numeric|)`.
pub fn gradient_check(
    p: &LstmParams,
    xd: &[Vec<f64>],
    label: Label,
    eps: f64,
) -> Result<f64, LstmError> {
    if !(eps > 0.0) {
        return Err(LstmError::BadEps);
    }
    check_rows(p, xd)?;

    let mut analytic = LstmParams::zeros(p.input_dim, p.hidden_dim);
    backward_into(p, xd, label, &mut analytic);

    let y = label.bit() as f64;
    let mut probe = p.clone();
    let mut worst = 0.0f64;
    for idx in 0..p.flat_len() {
        let original = probe.get_flat(idx);
        probe.set_flat(idx, original + eps);
        let up = bce_from_logit(run_forward(&probe, xd).z, y);
        probe.set_flat(idx, original - eps);
        let down = bce_from_logit(run_forward(&probe, xd).z, y);
        probe.set_flat(idx, original);

        let numeric = (up - down) / (2.0 * eps);
        let a = analytic.get_flat(idx);
        let rel = (a - numeric).abs() / (a.abs() + numeric.abs()).max(1e-8);
        worst = worst.max(rel);
    }
    Ok(worst)
}
