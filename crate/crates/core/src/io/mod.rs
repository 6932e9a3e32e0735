//! Dataset ingestion and persistence of masks, weights and run manifests.

mod bytes;
mod dataset;
mod manifest;
mod maskfile;

pub use dataset::{
    parse_cifar_bin, parse_idx, synth_blobs, synth_blobs_task, Dataset, IdxData, Split, TaskData, CIFAR_RECORD,
    IDX_IMAGES_MAGIC, IDX_LABELS_MAGIC,
};
pub use manifest::{
    decode_tensor, decode_weights, encode_tensor, encode_weights, read_all_records, read_run_record, weights_hash, write_run_record,
    BlobRef, BlobStore, RunManifest, StepManifest, MANIFEST_VERSION,
};
pub use maskfile::{decode_mask, encode_mask, read_mask, write_mask, MASK_MAGIC, MASK_VERSION};
