//! Room occupancy estimation from audio.
//!
//! Two estimators are provided. In *party mode* many people talk at once and
//! the crowd size is inferred from the short-time energy (STE) recorded by a
//! single microphone ([`crowd`]). In *meeting mode* people take turns and the
//! occupants are counted by recognising each speaker with MFCC features,
//! PCA/LDA transforms and per-speaker GMMs ([`speaker`]).
//!
//! Synthetic speakers ([`synth`]) and a free-field room model ([`room`]) let
//! every experiment run offline and reproducibly from a single seed
//! ([`seed`]).

pub mod audio;
pub mod crowd;
mod error;
pub mod room;
pub mod seed;
pub mod speaker;
pub mod synth;

pub use audio::{AudioClip, FrameSpec, SteSeries, Window};
pub use crowd::{CrowdModel, OccupancyEstimate, ScoringMode, SteCalibration};

pub use error::{Error, Result};
pub use room::{MicPosition, NoiseSpec, Placement, RoomShape, RoomSpec};

pub use speaker::{GmmModel, MfccConfig, SpeakerBank};
pub use synth::{Corpus, SpeakerProfile};
