//! Template-free particle picking for cryo-EM micrographs.
//!
//! The picker never needs a template. It tiles the micrograph into containers
//! and takes each container's extremal-mean and extremal-variance windows as
//! references. Every query window is then scored by how many references it
//! correlates strongly with. The top and bottom of that ranking train a
//! Gaussian-kernel SVM on window (mean, std), which segments every pixel.
//! Clusters of particle pixels that pass size and separation checks become
//! picks.
//!
//! Numeric code is generic over [`Real`] (`f32` or `f64`); the aliases below
//! fix the scalar for the common cases.
//!
//! ```no_run
//! use apple_picker::{mrc, pipeline::{pick_micrograph, PickerConfig}, Micrograph};
//!
//! let m: Micrograph = mrc::read_mrc("mic.mrc")?;
//! let run = pick_micrograph(&m, &PickerConfig::new(180), None)?;
//! println!("{} picks", run.picks.len());
//! # Ok::<(), apple_picker::Error>(())
//! ```

// `!(x > 0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod coords;
pub mod ctf;
pub mod error;
pub mod fft;
pub mod integral;
pub mod micrograph;
pub mod morphology;
pub mod mrc;
pub mod overlay;
pub mod picker;
pub mod pipeline;
pub mod reference;
pub mod response;
pub mod scalar;
pub mod svm;
pub mod synth;
pub mod training;

pub use coords::{CoordFormat, Pick};
pub use error::{ClassKind, Error, Result};
pub use integral::IntegralImages;
pub use micrograph::Geometry;
pub use morphology::Cluster;
pub use picker::{ClusterFilter, SegmentationMask};
pub use pipeline::PickerConfig;
pub use response::QuerySet;
pub use scalar::Real;
pub use synth::{Evaluation, GroundTruth, SynthParams};

/// Double-precision micrograph.
pub type Micrograph = micrograph::Micrograph<f64>;
pub type Micrograph32 = micrograph::Micrograph<f32>;

pub type CtfParams = ctf::CtfParams<f64>;
pub type CtfParams32 = ctf::CtfParams<f32>;

pub type ReferenceSet = reference::ReferenceSet<f64>;
pub type ReferenceSet32 = reference::ReferenceSet<f32>;

pub type ResponseSignal = response::ResponseSignal<f64>;
pub type ResponseSignal32 = response::ResponseSignal<f32>;

pub type ScoreField = response::ScoreField<f64>;
pub type ScoreField32 = response::ScoreField<f32>;

pub type TrainingSet = training::TrainingSet<f64>;
pub type TrainingSet32 = training::TrainingSet<f32>;

pub type SvmModel = svm::SvmModel<f64>;
pub type SvmModel32 = svm::SvmModel<f32>;

pub type PickRun = pipeline::PickRun<f64>;
pub type PickRun32 = pipeline::PickRun<f32>;
