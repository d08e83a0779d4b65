//! Statistics of heralded photon-number states prepared from an unseeded
//! optical parametric amplifier with a time-multiplexed,
//! photon-number-resolving heralding detector.
//!
//! * [`detector`]: click statistics of the time-multiplexed detector.
//! * [`source`]: single- and multimode pair-number laws of the amplifier.
//! * [`heralding`]: Bayesian posterior, ML estimate, Mandel Q, herald rate.
//! * [`closed_form`]: closed-form conditional mean and variance.
//! * [`exact`]: exact rational click probabilities for small detectors.
//! * [`mc`]: event-level Monte-Carlo oracle for all of the above.
//! * [`analysis`]: Q maps, ML inversion, thresholds and figure tables.

pub mod analysis;
pub mod closed_form;
pub mod detector;
pub mod error;
pub mod exact;
pub mod heralding;
pub mod mc;
pub mod numeric;
pub mod pmf;
pub mod source;
pub mod table;

pub use detector::{DetectorConfig, Efficiency};
pub use error::{Error, Result};
pub use heralding::{Herald, HeraldedState};
pub use pmf::Pmf;
pub use source::SourceConfig;

/// Library version recorded in every emitted artifact.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
