//! Meeting-mode occupancy by speaker recognition.
//!
//! Speech is turned into stacked MFCC vectors, reduced by PCA, made
//! discriminative by LDA and modelled per speaker with a diagonal GMM. A
//! segment is assigned to the speaker whose model gives its frames the
//! highest total log-likelihood; occupancy is the number of distinct
//! speakers recognised.

mod bank;
mod gmm;
mod lda;
mod meeting;
mod mfcc;
mod pca;

pub use bank::{
    recognize, recognize_features, split_corpus, sweep_mixtures, train_bank, BankConfig,
    Enrollment, MixtureSweep, PreparedEnrollment, Recognition, SpeakerBank, SweepRow,
    BANK_FORMAT, BANK_VERSION,
};
pub use gmm::{train_gmm, GmmModel, TrainedGmm, MAX_ITERATIONS, TOLERANCE, VARIANCE_FLOOR};
pub use lda::{fit_lda, Lda};
pub use meeting::{count_meeting_occupancy, simulate_meeting, Meeting, MeetingCount, MeetingParams};
pub use mfcc::{mfcc_features, voiced_features, MfccConfig, MfccExtractor};
pub use pca::{fit_pca, Pca};
