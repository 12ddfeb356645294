//! Temporal frequency-domain machinery: DFT/IDFT, mode selection and padding,
//! moving-average decomposition, spectral filters and attention.

mod decomp;
mod dft;
mod fdm;
mod modes;
mod sampling;

pub use decomp::decompose;
pub use dft::{dft, dft_real, idft};
pub(crate) use dft::DftPlan;
pub use fdm::{
    coarse_fdm, fine_fdm, spectral_attention, spectral_attention_with_weights, AttentionWeights, SpectralFilter,
    TemporalFdmParams, WeightSharing,
};
pub use modes::{dft_time, idft_time, pad_modes, real_part, select_modes, to_complex, write_spectrum_csv, ModeSet};
pub use sampling::{column_projection, column_sampling_check, rank_k_residual, ColumnSamplingReport};
