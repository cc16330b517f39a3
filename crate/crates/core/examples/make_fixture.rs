//! Regenerates `fixtures/bandlimited_127.csv`: DC plus two conjugate bin pairs.

use std::fs::File;
use std::io::BufWriter;

use maskspectra::recovery::{synthesize_signal, write_signal_csv, SignalSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let spec = SignalSpec::random(127, 2, 11)?;
    let x = synthesize_signal(&spec)?;
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/bandlimited_127.csv");
    write_signal_csv(BufWriter::new(File::create(path)?), &x)?;
    println!("band {:?} -> {path}", spec.band);
    Ok(())
}
