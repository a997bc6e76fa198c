use std::path::Path;

use semchange::core::eval::SynthSpec;
use semchange::synth::{write_synthetic, SynthDataset};

/// A small synthetic dataset that trains in well under a second.
pub fn small_dataset(root: &Path, seed: u64) -> SynthDataset {
    let spec = SynthSpec::uniform(200, 12, 4, 3000, 0.9, seed);
    write_synthetic(root, "synthetic", &spec).unwrap()
}
