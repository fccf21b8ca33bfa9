//! Writes a synthetic exported corpus to stdout.
//!
//! Usage: cargo run -p minijs --example synth_corpus -- <files> <seed>

fn main() {
    let mut args = std::env::args().skip(1);
    let n: usize = args.next().and_then(|a| a.parse().ok()).unwrap_or(200);
    let seed: u64 = args.next().and_then(|a| a.parse().ok()).unwrap_or(7);
    let files = minijs::synth::generate(n, seed);
    print!("{}", minijs::export_jsonl(files.iter().map(|(p, s)| (p.as_str(), s.as_str()))));
}
