//! Frequency-domain selection of second-order (lag-product) interaction
//! inputs for nonlinear time-series systems.
//!
//! The pipeline: estimate auto- and cross-spectra by lag-window smoothing
//! ([`spectral`]), build the orthogonal decomposition of the output against a
//! growing input set ([`decomposition`]), scan candidate lag products with the
//! residual-coherence and integrated-spectrum criteria ([`lagfamily`]), then
//! confirm terms with stepwise-AIC regression ([`regression`]). [`ingestion`]
//! parses and preprocesses FRED-style CSV series for the data application.

pub mod decomposition;
pub mod error;
pub mod ingestion;
pub mod lagfamily;
pub mod regression;
pub mod spectral;
pub mod timeseries;

pub use error::{Error, Result};
