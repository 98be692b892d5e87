//! One LSTM layer: forward recurrences and backpropagation through time.
//!
//! ```text
//! i_t = σ(x_t W_xi + h_{t−1} W_hi + b_i)
//! f_t = σ(x_t W_xf + h_{t−1} W_hf + b_f)
//! c_t = f_t ⊙ c_{t−1} + i_t ⊙ tanh(x_t W_xc + h_{t−1} W_hc [+ b_c])
//! o_t = σ(x_t W_xo + h_{t−1} W_ho + b_o)
//! h_t = o_t ⊙ tanh(c_t)
//! ```

use super::params::LstmParams;
use crate::error::{Error, Result};
use crate::numerics::{outer_acc, sigmoid, vec_mat_acc, vec_mat_t_acc, Matrix};

/// Post-activation gate values for one step.
#[derive(Clone, Debug, PartialEq)]
pub struct GateCache {
    pub input: Vec<f64>,
    pub forget: Vec<f64>,
    pub output: Vec<f64>,
    /// `tanh` of the cell candidate.
    pub candidate: Vec<f64>,
    pub tanh_cell: Vec<f64>,
}

/// Hidden and cell sequences of a layer, plus per-step gate activations
/// (`T × H` each) kept for the reverse pass.
#[derive(Clone, Debug, PartialEq)]
pub struct LstmStates {
    pub h: Matrix,
    pub c: Matrix,
    pub input_gate: Matrix,
    pub forget_gate: Matrix,
    pub output_gate: Matrix,
    pub candidate: Matrix,
    pub tanh_cell: Matrix,
}

impl LstmStates {
    pub fn len(&self) -> usize {
        self.h.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.h.rows() == 0
    }

    pub fn last_hidden(&self) -> &[f64] {
        self.h.row(self.h.rows() - 1)
    }
}

fn step_into(
    p: &LstmParams,
    x: &[f64],
    h_prev: &[f64],
    c_prev: &[f64],
    gates: [&mut [f64]; 4],
    c_out: &mut [f64],
    tanh_c: &mut [f64],
    h_out: &mut [f64],
) {
    let [ig, fg, gg, og] = gates;
    ig.copy_from_slice(p.b_i.as_slice());
    fg.copy_from_slice(p.b_f.as_slice());
    og.copy_from_slice(p.b_o.as_slice());
    match &p.b_c {
        Some(b) => gg.copy_from_slice(b.as_slice()),
        None => gg.fill(0.0),
    }
    vec_mat_acc(ig, x, &p.w_xi);
    vec_mat_acc(fg, x, &p.w_xf);
    vec_mat_acc(gg, x, &p.w_xc);
    vec_mat_acc(og, x, &p.w_xo);
    vec_mat_acc(ig, h_prev, &p.w_hi);
    vec_mat_acc(fg, h_prev, &p.w_hf);
    vec_mat_acc(gg, h_prev, &p.w_hc);
    vec_mat_acc(og, h_prev, &p.w_ho);
    for j in 0..ig.len() {
        ig[j] = sigmoid(ig[j]);
        fg[j] = sigmoid(fg[j]);
        og[j] = sigmoid(og[j]);
        gg[j] = gg[j].tanh();
        c_out[j] = fg[j] * c_prev[j] + ig[j] * gg[j];
        tanh_c[j] = c_out[j].tanh();
        h_out[j] = og[j] * tanh_c[j];
    }
}

fn check_vec(op: &'static str, v: &[f64], expect: usize) -> Result<()> {
    if v.len() != expect {
        return Err(Error::Shape {
            op,
            left: (1, expect),
            right: (1, v.len()),
        });
    }
    Ok(())
}

/// A single recurrence step. Returns `(h_t, c_t, gates)`.
pub fn lstm_step(
    p: &LstmParams,
    x_t: &[f64],
    h_prev: &[f64],
    c_prev: &[f64],
) -> Result<(Vec<f64>, Vec<f64>, GateCache)> {
    let h = p.hidden_size();
    check_vec("lstm_step input", x_t, p.input_size())?;
    check_vec("lstm_step h_prev", h_prev, h)?;
    check_vec("lstm_step c_prev", c_prev, h)?;
    let mut g = GateCache {
        input: vec![0.0; h],
        forget: vec![0.0; h],
        output: vec![0.0; h],
        candidate: vec![0.0; h],
        tanh_cell: vec![0.0; h],
    };
    let mut c = vec![0.0; h];
    let mut h_out = vec![0.0; h];
    step_into(
        p,
        x_t,
        h_prev,
        c_prev,
        [&mut g.input, &mut g.forget, &mut g.candidate, &mut g.output],
        &mut c,
        &mut g.tanh_cell,
        &mut h_out,
    );
    Ok((h_out, c, g))
}

/// Runs the layer over `x` (`T × D`) from a zero initial state.
pub fn lstm_forward(p: &LstmParams, x: &Matrix) -> Result<LstmStates> {
    if x.is_empty() {
        return Err(Error::arg("empty input sequence"));
    }
    if x.cols() != p.input_size() {
        return Err(Error::Shape {
            op: "lstm_forward",
            left: x.shape(),
            right: p.w_xi.shape(),
        });
    }
    let (t_len, h) = (x.rows(), p.hidden_size());
    let mk = || Matrix::zeros(t_len, h);
    let mut s = LstmStates {
        h: mk(),
        c: mk(),
        input_gate: mk(),
        forget_gate: mk(),
        output_gate: mk(),
        candidate: mk(),
        tanh_cell: mk(),
    };
    let zeros = vec![0.0; h];
    let mut h_prev = zeros.clone();
    let mut c_prev = zeros;
    for t in 0..t_len {
        step_into(
            p,
            x.row(t),
            &h_prev,
            &c_prev,
            [
                s.input_gate.row_mut(t),
                s.forget_gate.row_mut(t),
                s.candidate.row_mut(t),
                s.output_gate.row_mut(t),
            ],
            s.c.row_mut(t),
            s.tanh_cell.row_mut(t),
            s.h.row_mut(t),
        );
        h_prev.copy_from_slice(s.h.row(t));
        c_prev.copy_from_slice(s.c.row(t));
    }
    Ok(s)
}

/// Backpropagation through time.
///
/// `dh` holds the loss gradient arriving at each `h_t` from above (`T × H`).
/// Returns parameter gradients and the gradient w.r.t. the layer input.
pub fn lstm_backward(
    p: &LstmParams,
    x: &Matrix,
    s: &LstmStates,
    dh: &Matrix,
) -> Result<(LstmParams, Matrix)> {
    let (t_len, h) = (x.rows(), p.hidden_size());
    if s.h.shape() != (t_len, h) || dh.shape() != (t_len, h) {
        return Err(Error::Shape {
            op: "lstm_backward",
            left: s.h.shape(),
            right: dh.shape(),
        });
    }
    let mut g = LstmParams::zeros(p.input_size(), h, p.b_c.is_some());
    let mut dx = Matrix::zeros(t_len, p.input_size());
    let zeros = vec![0.0; h];
    let mut dh_next = vec![0.0; h];
    let mut dc_next = vec![0.0; h];
    let (mut da_i, mut da_f, mut da_g, mut da_o) =
        (vec![0.0; h], vec![0.0; h], vec![0.0; h], vec![0.0; h]);

    for t in (0..t_len).rev() {
        let (ig, fg, og, gg, tc) = (
            s.input_gate.row(t),
            s.forget_gate.row(t),
            s.output_gate.row(t),
            s.candidate.row(t),
            s.tanh_cell.row(t),
        );
        let c_prev = if t > 0 { s.c.row(t - 1) } else { &zeros[..] };
        let h_prev = if t > 0 { s.h.row(t - 1) } else { &zeros[..] };
        let dh_t = dh.row(t);
        for j in 0..h {
            let dh_total = dh_t[j] + dh_next[j];
            let d_o = dh_total * tc[j];
            let dc = dc_next[j] + dh_total * og[j] * (1.0 - tc[j] * tc[j]);
            da_i[j] = dc * gg[j] * ig[j] * (1.0 - ig[j]);
            da_f[j] = dc * c_prev[j] * fg[j] * (1.0 - fg[j]);
            da_g[j] = dc * ig[j] * (1.0 - gg[j] * gg[j]);
            da_o[j] = d_o * og[j] * (1.0 - og[j]);
            dc_next[j] = dc * fg[j];
        }
        let x_t = x.row(t);
        outer_acc(&mut g.w_xi, x_t, &da_i);
        outer_acc(&mut g.w_xf, x_t, &da_f);
        outer_acc(&mut g.w_xc, x_t, &da_g);
        outer_acc(&mut g.w_xo, x_t, &da_o);
        if t > 0 {
            outer_acc(&mut g.w_hi, h_prev, &da_i);
            outer_acc(&mut g.w_hf, h_prev, &da_f);
            outer_acc(&mut g.w_hc, h_prev, &da_g);
            outer_acc(&mut g.w_ho, h_prev, &da_o);
        }
        for j in 0..h {
            g.b_i.as_mut_slice()[j] += da_i[j];
            g.b_f.as_mut_slice()[j] += da_f[j];
            g.b_o.as_mut_slice()[j] += da_o[j];
        }
        if let Some(bc) = &mut g.b_c {
            for (b, d) in bc.as_mut_slice().iter_mut().zip(&da_g) {
                *b += d;
            }
        }
        let dx_t = dx.row_mut(t);
        vec_mat_t_acc(dx_t, &da_i, &p.w_xi);
        vec_mat_t_acc(dx_t, &da_f, &p.w_xf);
        vec_mat_t_acc(dx_t, &da_g, &p.w_xc);
        vec_mat_t_acc(dx_t, &da_o, &p.w_xo);
        dh_next.fill(0.0);
        vec_mat_t_acc(&mut dh_next, &da_i, &p.w_hi);
        vec_mat_t_acc(&mut dh_next, &da_f, &p.w_hf);
        vec_mat_t_acc(&mut dh_next, &da_g, &p.w_hc);
        vec_mat_t_acc(&mut dh_next, &da_o, &p.w_ho);
    }
    Ok((g, dx))
}
