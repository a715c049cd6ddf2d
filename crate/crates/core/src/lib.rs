//! Builds population-level connectional templates from multichannel time
//! series and measures what those templates are good for.
//!
//! The pipeline: drive a fixed random echo-state network with each subject's
//! recording ([`reservoir`]), correlate the resulting activation traces into
//! per-subject connectomes and average them into a group template
//! ([`connectome`]), then treat the template itself as the recurrent wiring
//! of a second reservoir and score how much input history linear readouts
//! can pull back out of it ([`cognition`]). [`graphmetrics`] and
//! [`evaluation`] quantify how representative, discriminative and
//! topologically faithful the templates are; [`synth`] generates seeded
//! stand-in cohorts and stimulus streams; [`io`] pins the CSV/JSON formats.

// Validations use `!(x > 0.0)` instead of `x <= 0.0` so that NaN fails them.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cognition;
pub mod connectome;
pub mod error;
pub mod evaluation;
pub mod graphmetrics;
pub mod io;
mod linalg;
pub mod model;
pub mod reservoir;
pub mod synth;

pub use error::{Error, Result};
pub use model::{
    Activation, ClassificationMetrics, Connectome, EvalReport, MCReport, ReservoirConfig,
    ReservoirWeights, SubjectEntry, SubjectManifest, TimeSeries, UpdateForm,
};
