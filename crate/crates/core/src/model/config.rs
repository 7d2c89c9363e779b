use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Network layout. `Skip` and `Attn` are the full models; the rest are
/// ablations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Convolution, recurrent and recurrent-skip paths plus the AR highway.
    Skip,
    /// Convolution, recurrent path with temporal attention plus the AR highway.
    Attn,
    /// `Skip` without the recurrent-skip path.
    NoSkip,
    /// `Skip` with raw inputs fed straight to the recurrences.
    NoCnn,
    /// `Skip` without the AR highway.
    NoAr,
    /// Plain GRU on raw inputs followed by an affine output map.
    GruOnly,
    /// Only the shared-coefficient AR highway.
    ArOnly,
}

impl Variant {
    pub const ALL: [Variant; 7] = [
        Variant::Skip,
        Variant::Attn,
        Variant::NoSkip,
        Variant::NoCnn,
        Variant::NoAr,
        Variant::GruOnly,
        Variant::ArOnly,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Skip => "skip",
            Variant::Attn => "attn",
            Variant::NoSkip => "no_skip",
            Variant::NoCnn => "no_cnn",
            Variant::NoAr => "no_ar",
            Variant::GruOnly => "gru_only",
            Variant::ArOnly => "ar_only",
        }
    }

    pub fn has_conv(self) -> bool {
        matches!(self, Variant::Skip | Variant::Attn | Variant::NoSkip | Variant::NoAr)
    }

    pub fn has_recurrent(self) -> bool {
        !matches!(self, Variant::ArOnly)
    }

    pub fn has_skip(self) -> bool {
        matches!(self, Variant::Skip | Variant::NoCnn | Variant::NoAr)
    }

    pub fn has_attention(self) -> bool {
        matches!(self, Variant::Attn)
    }

    pub fn has_ar(self) -> bool {
        !matches!(self, Variant::NoAr | Variant::GruOnly)
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL.into_iter().find(|v| v.name() == s).ok_or_else(|| {
            let names: Vec<_> = Variant::ALL.iter().map(|v| v.name()).collect();
            Error::Config(format!("unknown variant `{s}` (expected one of {})", names.join(", ")))
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    L2,
    L1,
}

impl FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "l2" => Ok(LossKind::L2),
            "l1" => Ok(LossKind::L1),
            _ => Err(Error::Config(format!("unknown loss `{s}` (expected l1 or l2)"))),
        }
    }
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LossKind::L2 => "l2",
            LossKind::L1 => "l1",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreKind {
    Dot,
    Cosine,
    Mlp,
}

impl FromStr for ScoreKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dot" => Ok(ScoreKind::Dot),
            "cosine" => Ok(ScoreKind::Cosine),
            "mlp" => Ok(ScoreKind::Mlp),
            _ => Err(Error::Config(format!("unknown attention score `{s}`"))),
        }
    }
}

impl fmt::Display for ScoreKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScoreKind::Dot => "dot",
            ScoreKind::Cosine => "cosine",
            ScoreKind::Mlp => "mlp",
        })
    }
}

/// Hyper-parameters of one network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstNetConfig {
    /// Input window length `q`.
    pub window: usize,
    /// Steps ahead of the window's last column that are predicted.
    pub horizon: usize,
    pub conv_width: usize,
    pub conv_filters: usize,
    pub rnn_hidden: usize,
    pub skip_hidden: usize,
    /// Period `p` of the recurrent-skip path.
    pub skip: usize,
    pub ar_window: usize,
    pub dropout: f64,
    pub variant: Variant,
    pub loss: LossKind,
    pub attn_score: ScoreKind,
    /// Hidden width of the MLP attention score.
    pub attn_hidden: usize,
}

impl Default for LstNetConfig {
    fn default() -> Self {
        LstNetConfig {
            window: 168,
            horizon: 3,
            conv_width: 6,
            conv_filters: 100,
            rnn_hidden: 100,
            skip_hidden: 50,
            skip: 24,
            ar_window: 24,
            dropout: 0.2,
            variant: Variant::Skip,
            loss: LossKind::L2,
            attn_score: ScoreKind::Dot,
            attn_hidden: 16,
        }
    }
}

impl LstNetConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        let v = self.variant;
        if self.window == 0 {
            return fail("window must be at least 1".into());
        }
        if self.horizon == 0 {
            return fail("horizon must be at least 1".into());
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return fail(format!("dropout must lie in [0, 1), got {}", self.dropout));
        }
        if v.has_conv() {
            if self.conv_width == 0 || self.conv_filters == 0 {
                return fail("conv width and filter count must be at least 1".into());
            }
            if self.window < self.conv_width {
                return fail(format!(
                    "window {} is shorter than conv width {}",
                    self.window, self.conv_width
                ));
            }
        }
        if v.has_recurrent() && self.rnn_hidden == 0 {
            return fail("recurrent hidden size must be at least 1".into());
        }
        if v.has_skip() {
            if self.skip == 0 || self.skip_hidden == 0 {
                return fail("skip length and skip hidden size must be at least 1".into());
            }
            if self.window < self.skip {
                return fail(format!("skip length {} exceeds window {}", self.skip, self.window));
            }
        }
        if v.has_attention() {
            if self.window < 2 {
                return fail("attention needs a window of at least 2".into());
            }
            if self.attn_score == ScoreKind::Mlp && self.attn_hidden == 0 {
                return fail("MLP attention hidden size must be at least 1".into());
            }
        }
        if v.has_ar() {
            if self.ar_window == 0 {
                return fail("AR window must be at least 1".into());
            }
            if self.ar_window > self.window {
                return fail(format!("AR window {} exceeds window {}", self.ar_window, self.window));
            }
        }
        Ok(())
    }
}
