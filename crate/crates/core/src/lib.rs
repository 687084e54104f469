//! SSVEP signal-processing pipeline.
//!
//! Every stage needed to turn a multichannel EEG trial into a predicted
//! stimulus frequency lives here, together with the harness used to
//! evaluate complete configurations across subjects:
//!
//! * [`signal`]: trials, datasets, on-disk formats and a synthetic generator.
//! * [`preprocessing`]: band-pass filter design (FIR least squares and the
//!   classic IIR families) and application.
//! * [`artifact`]: AMUSE and FastICA blind source separation with
//!   component-range back-projection.
//! * [`features`]: periodogram, Welch, Goertzel, Yule-Walker AR, STFT and
//!   Haar DWT feature extractors.
//! * [`selection`]: information-theoretic greedy selection plus PCA/SVD
//!   projections.
//! * [`classify`]: kernel SVM (one-vs-all, Platt-calibrated), LDA, KNN,
//!   Gaussian naive Bayes, CART trees, AdaBoost and Bagging.
//! * [`eval`]: configurations, leave-one-subject-out and leave-one-sample-out
//!   protocols, Welch grid search and report rendering.

pub mod artifact;
pub mod classify;
pub mod error;
pub mod eval;
pub mod features;
pub mod linalg;
pub mod preprocessing;
pub mod selection;
pub mod signal;

pub use error::{Error, Result};
