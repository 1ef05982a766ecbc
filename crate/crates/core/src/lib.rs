//! Event-based dual-rotating-retarder Mueller-matrix ellipsometry.
//!
//! The crate covers the whole pipeline: polarization algebra ([`mueller`]),
//! the analytic image-formation model ([`forward`]), an event-camera
//! simulator ([`sim`]), calibration ([`calibration`]), two-stage video
//! reconstruction ([`reconstruction`]), error metrics ([`metrics`]) and the
//! on-disk formats ([`io`]).

// Guards are written as `!(x > 0.0)` so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod calibration;
pub mod events;
pub mod forward;
pub mod io;
pub mod metrics;
pub mod mueller;
pub mod reconstruction;
pub mod rng;
pub mod sim;
pub mod video;

pub use events::{Event, EventStream, Polarity, TriggerRecord};
pub use mueller::{MuellerMatrix, StokesVector, VectorizedMueller};
pub use video::MuellerVideo;
