//! Caption corpora: vocabulary, caption and feature files, minibatches, and a
//! synthetic corpus whose captions are a function of the image vector.

mod batch;
mod dataset;
mod features;
mod karpathy;
mod source;
mod synth;
mod vocab;

pub use batch::{make_batches, EncodedCaptions, Minibatch, DEFAULT_BATCH_SIZE};
pub use dataset::{load_dataset, normalize_feature, CaptionRecord, DatasetSplit, ImageRecord, Split};
pub use features::{feature_index_path, read_features, write_features, FeatureFile, FEATURE_MAGIC};
pub use karpathy::{read_caption_file, CaptionFile, CaptionImage, CaptionSentence};
pub use source::{find_caption_file, DatasetSource, CAPTIONS_FILE, FEATURES_FILE, VOCAB_SIZES_FILE};
pub use synth::{synth_corpus, SynthConfig};
pub use vocab::{build_vocab, Vocabulary, END, END_TOKEN, START, START_TOKEN, UNKNOWN, UNKNOWN_TOKEN};
