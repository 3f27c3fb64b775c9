pub mod augment;
pub mod corpus;
pub mod dataset;
pub mod label;
pub mod manifest;
pub mod mix;
pub mod rng;
pub mod synth;
pub mod testset;

pub use augment::{apply_augmentations, Applied, AugInput, AugmentationConfig, Augmented, Method};
pub use corpus::{Corpus, SynthCorpusSpec};
pub use dataset::{read_dataset, write_dataset, DatasetIndex, DatasetKind, LabeledAudio};
pub use label::{label_speech, LabelerConfig};
pub use manifest::{Category, CorpusManifest, ManifestEntry, Split};
pub use mix::{draw_training_sample, sample_at, MixPolicy, MixProvenance, MixtureSample, SampleClass};
pub use rng::stream_rng;
pub use synth::{synth_signal, synthesize, SignalKind, Synthesized};
pub use testset::{build_singing_set, build_test_sample, build_test_set, FrameClass, TestProvenance, TestSample, TestSetSpec};
