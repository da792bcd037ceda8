//! NGSIM parsing, resampling, splitting, the dataset store and the
//! request/prediction wire formats.

mod ngsim;
mod split;
mod store;
mod wire;

pub use ngsim::{parse_ngsim_csv, parse_ngsim_reader, SEGMENT_ID_STRIDE};
pub use split::{resample, split_dataset, Split, SplitAssignment};
pub use store::{read_dataset_dir, write_dataset_dir, write_tracks_csv, DATASET_FILE, SITE_FILE, TRACKS_FILE};
pub use wire::{
    parse_predictions, parse_predictions_str, parse_requests, read_requests, write_prediction_requests,
    write_predictions, Frame, PredictionFile, PredictionMeta, Request, RequestFile, RequestMeta,
    RequestSummary, PREDICTION_MAGIC, REQUEST_MAGIC,
};
