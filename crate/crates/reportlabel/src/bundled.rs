//! The seeded synthetic corpus shipped under `data/synthetic`.
//!
//! Regenerate with `cargo run -p reportlabel --example write_synthetic`.

use reportlabel_core::corpus::{Dataset, Provenance};
use reportlabel_core::synthetic::{generate, vocab, SyntheticConfig};

use crate::csv_io::write_reports;

/// Expert-labeled training corpus.
pub fn rad() -> Dataset {
    generate(&SyntheticConfig { n_items: 8000, seed: 1, ..Default::default() }, "s")
}

/// The same construction with 10% of mentioned labels redrawn, standing in
/// for a rule-based labeler's output.
pub fn auto() -> Dataset {
    let cfg = SyntheticConfig {
        n_items: 4000,
        label_noise: 0.1,
        provenance: Provenance::Automatic,
        seed: 2,
        ..Default::default()
    };
    generate(&cfg, "a")
}

/// Held-out gold labels.
pub fn test() -> Dataset {
    generate(&SyntheticConfig { n_items: 1000, seed: 3, ..Default::default() }, "t")
}

/// File name and contents of every bundled file.
pub fn files() -> Vec<(&'static str, Vec<u8>)> {
    let csv = |ds: Dataset| {
        let mut buf = Vec::new();
        write_reports(&ds, &mut buf).expect("in-memory write");
        buf
    };
    vec![
        ("rad.csv", csv(rad())),
        ("auto.csv", csv(auto())),
        ("test.csv", csv(test())),
        ("vocab.txt", vocab().to_text().into_bytes()),
    ]
}
