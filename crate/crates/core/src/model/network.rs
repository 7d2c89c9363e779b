use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::layers::{
    attention_combine, conv_forward, dense_combine, dropout, gru_unroll, skip_gru_unroll, uniform_init, Attention,
    AttnScore, ConvLayer, DenseCombiner, GruCell,
};
use crate::model::{BoundParams, LstNetConfig, ParamStore, ScoreKind};
use crate::tensor::{Graph, Tensor, Var};

/// A batch of input windows stored as `[batch][time][variable]`.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowBatch {
    window: usize,
    width: usize,
    data: Vec<f64>,
}

impl WindowBatch {
    pub fn new(window: usize, width: usize) -> Self {
        WindowBatch {
            window,
            width,
            data: Vec::new(),
        }
    }

    /// Appends one window given as `window * width` row-major values
    /// (one row per time step, oldest first).
    pub fn push(&mut self, rows: &[f64]) -> Result<()> {
        if rows.len() != self.window * self.width {
            return Err(Error::shape(
                "window_batch",
                format!("window needs {}x{} values, got {}", self.window, self.width, rows.len()),
            ));
        }
        self.data.extend_from_slice(rows);
        Ok(())
    }

    pub fn from_windows<'a>(window: usize, width: usize, rows: impl IntoIterator<Item = &'a [f64]>) -> Result<Self> {
        let mut b = WindowBatch::new(window, width);
        for r in rows {
            b.push(r)?;
        }
        Ok(b)
    }

    pub fn len(&self) -> usize {
        self.data.len().checked_div(self.window * self.width).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// Window `sample` as `window * width` row-major values.
    pub fn sample(&self, sample: usize) -> &[f64] {
        let size = self.window * self.width;
        &self.data[sample * size..(sample + 1) * size]
    }

    pub fn value(&self, sample: usize, t: usize, var: usize) -> f64 {
        self.data[(sample * self.window + t) * self.width + var]
    }

    /// Values at window position `t` as a `[batch, width]` matrix.
    pub fn column(&self, t: usize) -> Tensor {
        let b = self.len();
        let mut out = Vec::with_capacity(b * self.width);
        for s in 0..b {
            let start = (s * self.window + t) * self.width;
            out.extend_from_slice(&self.data[start..start + self.width]);
        }
        Tensor::new(vec![b, self.width], out).expect("column shape")
    }

    /// `[batch * width, lags]` design whose row `(s, i)` holds
    /// `y_{t,i}, y_{t-1,i}, ..., y_{t-lags+1,i}` for sample `s`.
    pub fn ar_design(&self, lags: usize) -> Tensor {
        let b = self.len();
        let mut out = Vec::with_capacity(b * self.width * lags);
        for s in 0..b {
            for i in 0..self.width {
                for k in 0..lags {
                    out.push(self.value(s, self.window - 1 - k, i));
                }
            }
        }
        Tensor::new(vec![b * self.width, lags], out).expect("design shape")
    }
}

enum Init {
    Uniform(usize),
    Zero,
}

/// Every parameter the configuration needs, with its shape and initialiser.
fn layout(config: &LstNetConfig, width: usize) -> Vec<(String, Vec<usize>, Init)> {
    let v = config.variant;
    let mut out = Vec::new();
    let matrix = |out: &mut Vec<_>, name: &str, rows: usize, cols: usize| {
        out.push((name.to_string(), vec![rows, cols], Init::Uniform(rows)));
    };
    let bias = |out: &mut Vec<(String, Vec<usize>, Init)>, name: &str, cols: usize| {
        out.push((name.to_string(), vec![1, cols], Init::Zero));
    };

    if v.has_conv() {
        matrix(&mut out, "conv.weight", config.conv_width * width, config.conv_filters);
        bias(&mut out, "conv.bias", config.conv_filters);
    }
    let rnn_in = if v.has_conv() { config.conv_filters } else { width };
    let gru = |out: &mut Vec<_>, prefix: &str, hidden: usize| {
        for gate in ["r", "u", "c"] {
            matrix(out, &format!("{prefix}.w_x{gate}"), rnn_in, hidden);
        }
        for gate in ["r", "u", "c"] {
            matrix(out, &format!("{prefix}.w_h{gate}"), hidden, hidden);
        }
        for gate in ["r", "u", "c"] {
            bias(out, &format!("{prefix}.b_{gate}"), hidden);
        }
    };
    if v.has_recurrent() {
        gru(&mut out, "gru", config.rnn_hidden);
    }
    if v.has_skip() {
        gru(&mut out, "skip", config.skip_hidden);
    }
    if v.has_attention() {
        matrix(&mut out, "attn.proj", 2 * config.rnn_hidden, width);
        bias(&mut out, "attn.bias", width);
        if config.attn_score == ScoreKind::Mlp {
            matrix(&mut out, "attn.score_w", 2 * config.rnn_hidden, config.attn_hidden);
            matrix(&mut out, "attn.score_v", config.attn_hidden, 1);
        }
    } else if v.has_recurrent() {
        matrix(&mut out, "dense.w_recurrent", config.rnn_hidden, width);
        if v.has_skip() {
            for i in 0..config.skip {
                matrix(&mut out, &format!("dense.w_skip.{i}"), config.skip_hidden, width);
            }
        }
        bias(&mut out, "dense.bias", width);
    }
    if v.has_ar() {
        matrix(&mut out, "ar.weight", config.ar_window, 1);
        out.push(("ar.bias".to_string(), vec![1, 1], Init::Zero));
    }
    out
}

/// The assembled network: configuration, series count and weights.
#[derive(Debug, Clone, PartialEq)]
pub struct LstNetModel {
    config: LstNetConfig,
    width: usize,
    params: ParamStore,
}

impl LstNetModel {
    /// Fresh model with uniform `±1/√fan_in` weights and zero biases.
    pub fn new(config: LstNetConfig, width: usize, seed: u64) -> Result<Self> {
        config.validate()?;
        if width == 0 {
            return Err(Error::Config("dataset must have at least one variable".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamStore::new();
        for (name, shape, init) in layout(&config, width) {
            let t = match init {
                Init::Uniform(fan_in) => uniform_init(&shape, fan_in, &mut rng),
                Init::Zero => Tensor::zeros(shape),
            };
            params.insert(name, t);
        }
        Ok(LstNetModel { config, width, params })
    }

    /// Rebuilds a model from stored weights, checking names and shapes.
    pub fn from_parts(config: LstNetConfig, width: usize, params: ParamStore) -> Result<Self> {
        config.validate()?;
        let expected = layout(&config, width);
        if expected.len() != params.len() {
            return Err(Error::Checkpoint(format!(
                "expected {} parameter tensors, found {}",
                expected.len(),
                params.len()
            )));
        }
        for ((name, shape, _), (got_name, t)) in expected.iter().zip(params.iter()) {
            if name != got_name || shape.as_slice() != t.shape() {
                return Err(Error::Checkpoint(format!(
                    "parameter `{got_name}` {:?} does not match expected `{name}` {shape:?}",
                    t.shape()
                )));
            }
        }
        Ok(LstNetModel { config, width, params })
    }

    pub fn config(&self) -> &LstNetConfig {
        &self.config
    }

    /// Number of series `n`.
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    pub fn param_count(&self) -> usize {
        self.params.count()
    }

    fn gru_cell(bound: &BoundParams, prefix: &str) -> Result<GruCell> {
        let v = |s: &str| bound.var(&format!("{prefix}.{s}"));
        Ok(GruCell {
            w_xr: v("w_xr")?,
            w_xu: v("w_xu")?,
            w_xc: v("w_xc")?,
            w_hr: v("w_hr")?,
            w_hu: v("w_hu")?,
            w_hc: v("w_hc")?,
            b_r: v("b_r")?,
            b_u: v("b_u")?,
            b_c: v("b_c")?,
        })
    }

    /// Builds the prediction `[batch, width]` for `batch` on `g`.
    ///
    /// Passing a random source switches dropout on (training mode).
    pub fn forward(
        &self,
        g: &mut Graph,
        bound: &BoundParams,
        batch: &WindowBatch,
        mut train_rng: Option<&mut dyn RngCore>,
    ) -> Result<Var> {
        let cfg = &self.config;
        let v = cfg.variant;
        if batch.window() != cfg.window || batch.width() != self.width {
            return Err(Error::shape(
                "forward",
                format!(
                    "model expects windows of {}x{}, batch holds {}x{}",
                    cfg.window,
                    self.width,
                    batch.window(),
                    batch.width()
                ),
            ));
        }
        if batch.is_empty() {
            return Err(Error::Data("empty batch".into()));
        }
        let training = train_rng.is_some();
        let mut apply_dropout = |g: &mut Graph, x: Var| -> Result<Var> {
            match train_rng.as_deref_mut() {
                Some(rng) => dropout(g, x, cfg.dropout, training, rng),
                None => Ok(x),
            }
        };

        let mut neural: Option<Var> = None;
        if v.has_recurrent() {
            let raw = (0..cfg.window)
                .map(|t| g.constant(batch.column(t)))
                .collect::<Result<Vec<_>>>()?;
            let features = if v.has_conv() {
                let conv = ConvLayer {
                    weight: bound.var("conv.weight")?,
                    bias: bound.var("conv.bias")?,
                    width: cfg.conv_width,
                };
                let c = conv_forward(g, &conv, &raw)?;
                c.into_iter().map(|x| apply_dropout(g, x)).collect::<Result<Vec<_>>>()?
            } else {
                raw
            };

            let cell = Self::gru_cell(bound, "gru")?;
            let h0 = g.constant(Tensor::zeros(vec![batch.len(), cfg.rnn_hidden]))?;
            let states = gru_unroll(g, &cell, &features, h0)?;

            neural = Some(if v.has_attention() {
                let states = states
                    .into_iter()
                    .map(|h| apply_dropout(g, h))
                    .collect::<Result<Vec<_>>>()?;
                let score = match cfg.attn_score {
                    ScoreKind::Dot => AttnScore::Dot,
                    ScoreKind::Cosine => AttnScore::Cosine,
                    ScoreKind::Mlp => AttnScore::Mlp {
                        w: bound.var("attn.score_w")?,
                        v: bound.var("attn.score_v")?,
                    },
                };
                let attn = Attention {
                    score,
                    proj: bound.var("attn.proj")?,
                    bias: bound.var("attn.bias")?,
                };
                attention_combine(g, &attn, &states)?
            } else {
                let h_r = apply_dropout(g, *states.last().expect("window is non-empty"))?;
                let (w_skip, skip_states) = if v.has_skip() {
                    let skip_cell = Self::gru_cell(bound, "skip")?;
                    let s = skip_gru_unroll(g, &skip_cell, &features, cfg.skip)?;
                    let s = s.into_iter().map(|h| apply_dropout(g, h)).collect::<Result<Vec<_>>>()?;
                    let w = (0..cfg.skip)
                        .map(|i| bound.var(&format!("dense.w_skip.{i}")))
                        .collect::<Result<Vec<_>>>()?;
                    (w, s)
                } else {
                    (Vec::new(), Vec::new())
                };
                let dense = DenseCombiner {
                    w_recurrent: bound.var("dense.w_recurrent")?,
                    w_skip,
                    bias: bound.var("dense.bias")?,
                };
                dense_combine(g, &dense, h_r, &skip_states)?
            });
        }

        let linear = if v.has_ar() {
            let design = g.constant(batch.ar_design(cfg.ar_window))?;
            let z = g.matmul(design, bound.var("ar.weight")?)?;
            let z = g.reshape(z, &[batch.len(), self.width])?;
            Some(g.add(z, bound.var("ar.bias")?)?)
        } else {
            None
        };

        match (neural, linear) {
            (Some(a), Some(b)) => g.add(a, b),
            (Some(a), None) => Ok(a),
            (None, Some(b)) => Ok(b),
            (None, None) => unreachable!("every variant has a neural or linear path"),
        }
    }

    /// Inference-mode prediction as a `[batch, width]` tensor.
    pub fn predict(&self, batch: &WindowBatch) -> Result<Tensor> {
        let mut g = Graph::new();
        let bound = self.params.bind(&mut g)?;
        let out = self.forward(&mut g, &bound, batch, None)?;
        Ok(g.value(out).clone())
    }
}
