//! Batched forward pass and backpropagation through time.

use ndarray::linalg::general_mat_mul;
use ndarray::{s, Array2, ArrayView1, ArrayView2, ArrayViewMut1, ArrayViewMut2, Axis};

use super::{ModelError, ModelParams};

pub(super) struct Sums {
    /// `Σ w·NLL` over scored targets.
    pub nll: f64,
    /// `Σ w` over scored targets.
    pub weight: f64,
    pub grad: Option<Vec<f64>>,
}

struct Views<'a> {
    emb: ArrayView2<'a, f64>,
    w_gates: ArrayView2<'a, f64>,
    b_gates: ArrayView1<'a, f64>,
    w_out: ArrayView2<'a, f64>,
    b_out: ArrayView1<'a, f64>,
}

struct ViewsMut<'a> {
    emb: ArrayViewMut2<'a, f64>,
    w_gates: ArrayViewMut2<'a, f64>,
    b_gates: ArrayViewMut1<'a, f64>,
    w_out: ArrayViewMut2<'a, f64>,
    b_out: ArrayViewMut1<'a, f64>,
}

fn views(p: &ModelParams) -> Views<'_> {
    let c = p.config;
    let (v, e, h) = (c.vocab_size, c.embed_dim, c.hidden_dim);
    let o = c.offsets();
    let x = &p.values;
    Views {
        emb: ArrayView2::from_shape((v, e), &x[o.emb..o.w_gates]).unwrap(),
        w_gates: ArrayView2::from_shape((4 * h, e + h), &x[o.w_gates..o.b_gates]).unwrap(),
        b_gates: ArrayView1::from(&x[o.b_gates..o.w_out]),
        w_out: ArrayView2::from_shape((h, v), &x[o.w_out..o.b_out]).unwrap(),
        b_out: ArrayView1::from(&x[o.b_out..o.end]),
    }
}

fn views_mut<'a>(p: &ModelParams, g: &'a mut [f64]) -> ViewsMut<'a> {
    let c = p.config;
    let (v, e, h) = (c.vocab_size, c.embed_dim, c.hidden_dim);
    let o = c.offsets();
    let (emb, rest) = g.split_at_mut(o.w_gates);
    let (w_gates, rest) = rest.split_at_mut(o.b_gates - o.w_gates);
    let (b_gates, rest) = rest.split_at_mut(o.w_out - o.b_gates);
    let (w_out, b_out) = rest.split_at_mut(o.b_out - o.w_out);
    ViewsMut {
        emb: ArrayViewMut2::from_shape((v, e), emb).unwrap(),
        w_gates: ArrayViewMut2::from_shape((4 * h, e + h), w_gates).unwrap(),
        b_gates: ArrayViewMut1::from(b_gates),
        w_out: ArrayViewMut2::from_shape((h, v), w_out).unwrap(),
        b_out: ArrayViewMut1::from(b_out),
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Activations of one time step, kept for the backward pass.
struct Step {
    /// `[x_t; h_{t−1}]`, `B × (E+H)`.
    xh: Array2<f64>,
    /// Activated gates `[i, f, g, o]`, `B × 4H`.
    gates: Array2<f64>,
    /// Cell state `c_t`, `B × H`.
    c: Array2<f64>,
    /// `tanh(c_t)`, `B × H`.
    tanh_c: Array2<f64>,
}

fn validate<S: AsRef<[u32]>>(p: &ModelParams, batch: &[S], weights: &[f64]) -> Result<(), ModelError> {
    let c = p.config;
    if weights.len() != batch.len() {
        return Err(ModelError::WeightCount {
            weights: weights.len(),
            sequences: batch.len(),
        });
    }
    if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
        return Err(ModelError::BadWeight);
    }
    for (index, seq) in batch.iter().enumerate() {
        let seq = seq.as_ref();
        if seq.len() != c.seq_len {
            return Err(ModelError::BadSequenceLength {
                index,
                found: seq.len(),
                expected: c.seq_len,
            });
        }
        if let Some(&token) = seq.iter().find(|&&t| t as usize >= c.vocab_size) {
            return Err(ModelError::TokenOutOfRange {
                token,
                vocab: c.vocab_size,
            });
        }
    }
    Ok(())
}

pub(super) fn run<S: AsRef<[u32]>>(
    p: &ModelParams,
    batch: &[S],
    weights: &[f64],
    want_grad: bool,
) -> Result<Sums, ModelError> {
    validate(p, batch, weights)?;
    let cfg = p.config;
    let (v, e, h) = (cfg.vocab_size, cfg.embed_dim, cfg.hidden_dim);
    let sp = cfg.specials();
    let b = batch.len();
    let steps = cfg.seq_len - 1;
    let pv = views(p);

    // forward through time
    let mut tape: Vec<Step> = Vec::with_capacity(steps);
    let mut hs = Array2::<f64>::zeros((steps * b, h));
    let mut h_prev = Array2::<f64>::zeros((b, h));
    let mut c_prev = Array2::<f64>::zeros((b, h));
    for t in 0..steps {
        let mut xh = Array2::<f64>::zeros((b, e + h));
        for (bi, seq) in batch.iter().enumerate() {
            let tok = seq.as_ref()[t] as usize;
            xh.slice_mut(s![bi, ..e]).assign(&pv.emb.row(tok));
            xh.slice_mut(s![bi, e..]).assign(&h_prev.row(bi));
        }
        let mut gates = Array2::<f64>::zeros((b, 4 * h));
        gates.rows_mut().into_iter().for_each(|mut r| r.assign(&pv.b_gates));
        general_mat_mul(1.0, &xh, &pv.w_gates.t(), 1.0, &mut gates);
        let mut c = Array2::<f64>::zeros((b, h));
        let mut tanh_c = Array2::<f64>::zeros((b, h));
        let mut h_next = Array2::<f64>::zeros((b, h));
        for bi in 0..b {
            let mut z = gates.row_mut(bi);
            let z = z.as_slice_mut().unwrap();
            let (ifg, o) = z.split_at_mut(3 * h);
            let (i_f, g) = ifg.split_at_mut(2 * h);
            i_f.iter_mut().for_each(|x| *x = sigmoid(*x));
            g.iter_mut().for_each(|x| *x = x.tanh());
            o.iter_mut().for_each(|x| *x = sigmoid(*x));
            for j in 0..h {
                let cj = i_f[h + j] * c_prev[[bi, j]] + i_f[j] * g[j];
                let tc = cj.tanh();
                c[[bi, j]] = cj;
                tanh_c[[bi, j]] = tc;
                h_next[[bi, j]] = o[j] * tc;
            }
        }
        hs.slice_mut(s![t * b..(t + 1) * b, ..]).assign(&h_next);
        tape.push(Step { xh, gates, c: c.clone(), tanh_c });
        h_prev = h_next;
        c_prev = c;
    }

    // output layer and loss; logits are overwritten with d(loss)/d(logits)
    let mut logits = Array2::<f64>::zeros((steps * b, v));
    logits.rows_mut().into_iter().for_each(|mut r| r.assign(&pv.b_out));
    general_mat_mul(1.0, &hs, &pv.w_out, 1.0, &mut logits);

    let mut nll_sum = 0.0;
    let mut weight_sum = 0.0;
    // (row, target, weight, log-sum-exp) for scored positions
    let mut scored: Vec<(usize, usize, f64, f64)> = Vec::new();
    for t in 0..steps {
        for (bi, seq) in batch.iter().enumerate() {
            let y = seq.as_ref()[t + 1];
            let w = weights[bi];
            if y == sp.pad || y == sp.bos || w == 0.0 {
                continue;
            }
            let row = t * b + bi;
            let lr = logits.row(row);
            let lr = lr.as_slice().unwrap();
            let max = lr.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + lr.iter().map(|x| (x - max).exp()).sum::<f64>().ln();
            nll_sum += w * (lse - lr[y as usize]);
            weight_sum += w;
            scored.push((row, y as usize, w, lse));
        }
    }
    if !want_grad {
        return Ok(Sums {
            nll: nll_sum,
            weight: weight_sum,
            grad: None,
        });
    }
    if weight_sum == 0.0 {
        return Err(ModelError::NoTargets);
    }

    let mut dlogits = logits;
    let mut is_scored = vec![false; steps * b];
    for &(row, y, w, lse) in &scored {
        let coef = w / weight_sum;
        let mut r = dlogits.row_mut(row);
        let r = r.as_slice_mut().unwrap();
        for x in r.iter_mut() {
            *x = coef * (*x - lse).exp();
        }
        r[y] -= coef;
        is_scored[row] = true;
    }
    for (row, scored) in is_scored.iter().enumerate() {
        if !scored {
            dlogits.row_mut(row).fill(0.0);
        }
    }

    let mut grad = vec![0.0; p.len()];
    let mut g = views_mut(p, &mut grad);
    general_mat_mul(1.0, &hs.t(), &dlogits, 0.0, &mut g.w_out);
    g.b_out.assign(&dlogits.sum_axis(Axis(0)));
    let mut dhs = Array2::<f64>::zeros((steps * b, h));
    general_mat_mul(1.0, &dlogits, &pv.w_out.t(), 0.0, &mut dhs);
    drop(dlogits);

    let mut dh_next = Array2::<f64>::zeros((b, h));
    let mut dc_next = Array2::<f64>::zeros((b, h));
    let mut dz = Array2::<f64>::zeros((b, 4 * h));
    let mut dxh = Array2::<f64>::zeros((b, e + h));
    for t in (0..steps).rev() {
        let step = &tape[t];
        for bi in 0..b {
            let gt = step.gates.row(bi);
            let gt = gt.as_slice().unwrap();
            let (ig, fg, gg, og) = (&gt[..h], &gt[h..2 * h], &gt[2 * h..3 * h], &gt[3 * h..]);
            let mut dzr = dz.row_mut(bi);
            let dzr = dzr.as_slice_mut().unwrap();
            for j in 0..h {
                let dh = dhs[[t * b + bi, j]] + dh_next[[bi, j]];
                let tc = step.tanh_c[[bi, j]];
                let c_before = if t > 0 { tape[t - 1].c[[bi, j]] } else { 0.0 };
                let d_o = dh * tc;
                let dc = dh * og[j] * (1.0 - tc * tc) + dc_next[[bi, j]];
                let di = dc * gg[j];
                let dg = dc * ig[j];
                let df = dc * c_before;
                dc_next[[bi, j]] = dc * fg[j];
                dzr[j] = di * ig[j] * (1.0 - ig[j]);
                dzr[h + j] = df * fg[j] * (1.0 - fg[j]);
                dzr[2 * h + j] = dg * (1.0 - gg[j] * gg[j]);
                dzr[3 * h + j] = d_o * og[j] * (1.0 - og[j]);
            }
        }
        general_mat_mul(1.0, &dz.t(), &step.xh, 1.0, &mut g.w_gates);
        g.b_gates += &dz.sum_axis(Axis(0));
        general_mat_mul(1.0, &dz, &pv.w_gates, 0.0, &mut dxh);
        for (bi, seq) in batch.iter().enumerate() {
            let tok = seq.as_ref()[t] as usize;
            let mut row = g.emb.row_mut(tok);
            row += &dxh.slice(s![bi, ..e]);
        }
        dh_next.assign(&dxh.slice(s![.., e..]));
    }

    Ok(Sums {
        nll: nll_sum,
        weight: weight_sum,
        grad: Some(grad),
    })
}
