//! Daubechies tensor-product wavelets on `ℝ^d`.
//!
//! [`WaveletSpec`] holds cascade tables for `φ` and `ψ`; [`WaveletDictionary`]
//! is the finite system `(Ψ_l)` over `𝒵^d_{M,N}` in canonical order; and
//! [`CoefficientVector`] represents a link function `f = Σ β_l Ψ_l` together
//! with its weighted ℓ¹ norm.

mod coeffs;
mod dictionary;
pub mod filters;
mod table;

pub use coeffs::{wavelet_coefficients, CoefficientVector};
pub use dictionary::{
    cardinality, enumerate_indices, ActiveScratch, Design, WaveletDictionary, WaveletIndex, MAX_DICTIONARY_LEN,
};
pub use table::{WaveletSpec, DEFAULT_ORDER, DEFAULT_TABLE_RESOLUTION};

/// Shift radius that places every scaling shift contributing on `[-half_width, half_width]`
/// inside the dictionary.
pub fn covering_radius(half_width: f64, spec: &WaveletSpec) -> u32 {
    (half_width.max(0.0).ceil() as u32 + spec.support_len() as u32).max(1)
}
