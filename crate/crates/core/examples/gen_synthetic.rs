//! Writes the bundled synthetic corpus to a JSONL file.
//!
//! Usage: cargo run -p relsa --example gen_synthetic -- [OUT_PATH]

use std::path::PathBuf;

fn main() {
    let out: PathBuf = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "data/synthetic.jsonl".to_string())
        .into();
    if let Some(dir) = out.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir).expect("create output directory");
        }
    }
    let corpus = relsa::synth::templated_corpus();
    relsa::corpus::save_corpus(&out, &corpus).expect("write corpus");
    println!("wrote {} reviews to {}", corpus.len(), out.display());
}
