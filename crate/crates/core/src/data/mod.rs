//! Series ingestion, scaling, chronological splitting and windowing, plus
//! autocorrelation diagnostics and the synthetic scale-shift generator.

mod autocorr;
mod dataset;
mod synthetic;
mod window;

pub use autocorr::{autocorrelation, local_maxima};
pub use dataset::{load_dataset, Normalization, TimeSeriesDataset};
pub use synthetic::{
    companion_spectral_radius, generate_scale_shift_ar, ScaleShiftSeries, ScaleShiftSpec, BURN_IN_PER_ORDER,
};
pub use window::{assemble_batch, windowize, windowize_range, Part, SplitBounds, SplitSpec, WindowSample};
