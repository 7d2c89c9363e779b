//! Building blocks of the network, expressed as graph compositions.
//!
//! A batch of input windows travels through the layers as a sequence of
//! time-step columns: `columns[t]` is a `[batch, features]` node holding the
//! value of every series at window position `t` (oldest first). Weight
//! matrices use the row-vector convention, `x · W`, so a map from `a`
//! features to `b` features is stored as an `[a, b]` matrix and biases are
//! `[1, b]` rows broadcast over the batch.

use rand::Rng;

use crate::error::{Error, Result};
use crate::tensor::{Graph, Tensor, Var};

/// Causal convolution over the time axis.
///
/// `weight` is `[width * n, filters]`; row `o * n + i` holds the tap for
/// variable `i` at offset `o` inside the receptive field, where offset
/// `width - 1` is the current column and offset 0 the oldest.
#[derive(Debug, Clone, Copy)]
pub struct ConvLayer {
    pub weight: Var,
    pub bias: Var,
    pub width: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct GruCell {
    pub w_xr: Var,
    pub w_xu: Var,
    pub w_xc: Var,
    pub w_hr: Var,
    pub w_hu: Var,
    pub w_hc: Var,
    pub b_r: Var,
    pub b_u: Var,
    pub b_c: Var,
}

/// Output map of the recurrent and recurrent-skip paths.
///
/// `w_skip[i]` multiplies the skip state `i` steps before the last one.
#[derive(Debug, Clone)]
pub struct DenseCombiner {
    pub w_recurrent: Var,
    pub w_skip: Vec<Var>,
    pub bias: Var,
}

#[derive(Debug, Clone, Copy)]
pub enum AttnScore {
    Dot,
    Cosine,
    /// `v · tanh([h_j; query] · w)`.
    Mlp {
        w: Var,
        v: Var,
    },
}

#[derive(Debug, Clone, Copy)]
pub struct Attention {
    pub score: AttnScore,
    /// `[2 * hidden, n]` projection of `[context; query]`.
    pub proj: Var,
    pub bias: Var,
}

fn expect_cols(g: &Graph, v: Var, cols: usize, op: &'static str, what: &str) -> Result<usize> {
    let s = g.shape(v);
    if s.len() != 2 || s[1] != cols {
        return Err(Error::Shape {
            op,
            detail: format!("{what} must be [batch, {cols}], got {s:?}"),
        });
    }
    Ok(s[0])
}

fn matrix_dims(g: &Graph, v: Var) -> (usize, usize) {
    let s = g.shape(v);
    (s[0], s.get(1).copied().unwrap_or(1))
}

/// `ReLU(W * X + b)` with left zero padding, so the output has one column
/// per input column and column `t` only sees inputs `t - width + 1 ..= t`.
pub fn conv_forward(g: &mut Graph, conv: &ConvLayer, columns: &[Var]) -> Result<Vec<Var>> {
    let first = *columns.first().ok_or(Error::WindowTooShort {
        needed: 1,
        available: 0,
    })?;
    if conv.width == 0 {
        return Err(Error::Config("convolution width must be at least 1".into()));
    }
    let (rows, _) = matrix_dims(g, conv.weight);
    if rows % conv.width != 0 {
        return Err(Error::shape(
            "conv_forward",
            format!("weight has {rows} rows, not a multiple of width {}", conv.width),
        ));
    }
    let n = rows / conv.width;
    let batch = g.shape(first)[0];
    for &c in columns {
        let b = expect_cols(g, c, n, "conv_forward", "input column (filter height)")?;
        if b != batch {
            return Err(Error::shape("conv_forward", "columns disagree on batch size"));
        }
    }
    let zero = g.constant(Tensor::zeros(vec![batch, n]))?;
    let mut out = Vec::with_capacity(columns.len());
    for t in 0..columns.len() {
        let patch: Vec<Var> = (0..conv.width)
            .map(|o| {
                let back = conv.width - 1 - o;
                if back > t {
                    zero
                } else {
                    columns[t - back]
                }
            })
            .collect();
        let stacked = if patch.len() == 1 {
            patch[0]
        } else {
            g.concat(&patch, 1)?
        };
        let z = g.matmul(stacked, conv.weight)?;
        let z = g.add(z, conv.bias)?;
        out.push(g.relu(z)?);
    }
    Ok(out)
}

/// One GRU update with a ReLU candidate activation:
///
/// ```text
/// r = σ(x W_xr + h W_hr + b_r)
/// u = σ(x W_xu + h W_hu + b_u)
/// c = ReLU(x W_xc + r ⊙ (h W_hc) + b_c)
/// h' = (1 - u) ⊙ h + u ⊙ c
/// ```
pub fn gru_step(g: &mut Graph, cell: &GruCell, x: Var, h_prev: Var) -> Result<Var> {
    let (in_dim, hidden) = matrix_dims(g, cell.w_xr);
    let batch = expect_cols(g, x, in_dim, "gru_step", "input")?;
    let hb = expect_cols(g, h_prev, hidden, "gru_step", "hidden state")?;
    if hb != batch {
        return Err(Error::shape("gru_step", format!("batch {batch} vs hidden batch {hb}")));
    }

    let gate = |g: &mut Graph, wx: Var, wh: Var, b: Var| -> Result<Var> {
        let a = g.matmul(x, wx)?;
        let c = g.matmul(h_prev, wh)?;
        let s = g.add(a, c)?;
        let s = g.add(s, b)?;
        g.sigmoid(s)
    };
    let r = gate(g, cell.w_xr, cell.w_hr, cell.b_r)?;
    let u = gate(g, cell.w_xu, cell.w_hu, cell.b_u)?;

    let xc = g.matmul(x, cell.w_xc)?;
    let hc = g.matmul(h_prev, cell.w_hc)?;
    let rhc = g.mul(r, hc)?;
    let pre = g.add(xc, rhc)?;
    let pre = g.add(pre, cell.b_c)?;
    let cand = g.relu(pre)?;

    let keep = g.affine(u, -1.0, 1.0)?;
    let kept = g.mul(keep, h_prev)?;
    let fresh = g.mul(u, cand)?;
    g.add(kept, fresh)
}

/// Runs the cell over every column from `h0`, returning all hidden states.
pub fn gru_unroll(g: &mut Graph, cell: &GruCell, seq: &[Var], h0: Var) -> Result<Vec<Var>> {
    if seq.is_empty() {
        return Err(Error::WindowTooShort {
            needed: 1,
            available: 0,
        });
    }
    let mut states = Vec::with_capacity(seq.len());
    let mut h = h0;
    for &x in seq {
        h = gru_step(g, cell, x, h)?;
        states.push(h);
    }
    Ok(states)
}

/// Recurrence whose step `j` reads the state from step `j - skip` (a zero
/// state before the first period). Returns the last `skip` states, oldest
/// first.
pub fn skip_gru_unroll(g: &mut Graph, cell: &GruCell, seq: &[Var], skip: usize) -> Result<Vec<Var>> {
    if skip == 0 {
        return Err(Error::Config("skip length must be at least 1".into()));
    }
    if seq.len() < skip {
        return Err(Error::WindowTooShort {
            needed: skip,
            available: seq.len(),
        });
    }
    let (_, hidden) = matrix_dims(g, cell.w_hr);
    let batch = g.shape(seq[0])[0];
    let h0 = g.constant(Tensor::zeros(vec![batch, hidden]))?;
    let mut states: Vec<Var> = Vec::with_capacity(seq.len());
    for (j, &x) in seq.iter().enumerate() {
        let prev = if j >= skip { states[j - skip] } else { h0 };
        states.push(gru_step(g, cell, x, prev)?);
    }
    Ok(states.split_off(seq.len() - skip))
}

/// `h_R W^R + Σ_i h^S_{t-i} W^S_i + b` where `skip_states` is ordered oldest
/// first (as returned by [`skip_gru_unroll`]).
pub fn dense_combine(g: &mut Graph, dense: &DenseCombiner, h_r: Var, skip_states: &[Var]) -> Result<Var> {
    if skip_states.len() != dense.w_skip.len() {
        return Err(Error::shape(
            "dense_combine",
            format!("expected {} skip states, got {}", dense.w_skip.len(), skip_states.len()),
        ));
    }
    let mut acc = g.matmul(h_r, dense.w_recurrent)?;
    let p = skip_states.len();
    for (i, &w) in dense.w_skip.iter().enumerate() {
        let term = g.matmul(skip_states[p - 1 - i], w)?;
        acc = g.add(acc, term)?;
    }
    g.add(acc, dense.bias)
}

fn score(g: &mut Graph, kind: &AttnScore, h: Var, query: Var) -> Result<Var> {
    match *kind {
        AttnScore::Dot => {
            let p = g.mul(h, query)?;
            g.sum_axis(p, 1)
        }
        AttnScore::Cosine => {
            let p = g.mul(h, query)?;
            let dot = g.sum_axis(p, 1)?;
            let nh = norm(g, h)?;
            let nq = norm(g, query)?;
            let denom = g.mul(nh, nq)?;
            g.div(dot, denom)
        }
        AttnScore::Mlp { w, v } => {
            let joined = g.concat(&[h, query], 1)?;
            let z = g.matmul(joined, w)?;
            let z = g.tanh(z)?;
            g.matmul(z, v)
        }
    }
}

/// Row norms with a tiny offset so the zero vector keeps a finite gradient.
fn norm(g: &mut Graph, x: Var) -> Result<Var> {
    let sq = g.square(x)?;
    let s = g.sum_axis(sq, 1)?;
    let s = g.affine(s, 1.0, 1e-12)?;
    g.sqrt(s)
}

/// Temporal attention over recurrent states. The last state is the query;
/// the preceding states form the context. Returns `(output, weights)` with
/// weights of shape `[batch, states.len() - 1]`.
pub fn attention_with_weights(g: &mut Graph, attn: &Attention, states: &[Var]) -> Result<(Var, Var)> {
    if states.len() < 2 {
        return Err(Error::WindowTooShort {
            needed: 2,
            available: states.len(),
        });
    }
    let (context, query) = states.split_at(states.len() - 1);
    let query = query[0];
    let scores = context
        .iter()
        .map(|&h| score(g, &attn.score, h, query))
        .collect::<Result<Vec<_>>>()?;
    let scores = g.concat(&scores, 1)?;
    let alpha = g.softmax(scores, 1)?;
    let mut ctx: Option<Var> = None;
    for (j, &h) in context.iter().enumerate() {
        let a = g.slice(alpha, 1, j..j + 1)?;
        let term = g.mul(a, h)?;
        ctx = Some(match ctx {
            None => term,
            Some(acc) => g.add(acc, term)?,
        });
    }
    let ctx = ctx.expect("non-empty context");
    let joined = g.concat(&[ctx, query], 1)?;
    let out = g.matmul(joined, attn.proj)?;
    let out = g.add(out, attn.bias)?;
    Ok((out, alpha))
}

pub fn attention_combine(g: &mut Graph, attn: &Attention, states: &[Var]) -> Result<Var> {
    attention_with_weights(g, attn, states).map(|(out, _)| out)
}

/// Inverted dropout: in training mode each element is zeroed with
/// probability `rate` and survivors are scaled by `1 / (1 - rate)`.
pub fn dropout<R: Rng + ?Sized>(g: &mut Graph, x: Var, rate: f64, training: bool, rng: &mut R) -> Result<Var> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::Config(format!("dropout rate must lie in [0, 1), got {rate}")));
    }
    if !training || rate == 0.0 {
        return Ok(x);
    }
    let keep = 1.0 / (1.0 - rate);
    let shape = g.shape(x).to_vec();
    let len = shape.iter().product();
    let mask: Vec<f64> = (0..len)
        .map(|_| if rng.random::<f64>() < rate { 0.0 } else { keep })
        .collect();
    let mask = g.constant(Tensor::new(shape, mask)?)?;
    g.mul(x, mask)
}

/// Uniform `[-1/√fan_in, 1/√fan_in]` initialisation.
pub fn uniform_init<R: Rng + ?Sized>(shape: &[usize], fan_in: usize, rng: &mut R) -> Tensor {
    let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
    let len = shape.iter().product();
    let data = (0..len).map(|_| rng.random_range(-bound..=bound)).collect();
    Tensor::new(shape.to_vec(), data).expect("shape and length agree")
}
