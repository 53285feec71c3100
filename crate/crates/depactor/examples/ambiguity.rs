//! Ambiguity handling by actor duplication: under a grammar where both the
//! noun and the verb license a prepositional modifier, the second offer
//! forks the reading instead of being discarded. The affected actors copy
//! themselves into the fork and the offer is re-issued to the ungoverned
//! copy.
//!
//! ```bash
//! cargo run -p depactor --example ambiguity
//! ```

use std::path::PathBuf;
use std::sync::Arc;

use depactor::grammar::GrammarBundle;
use depactor::protocol::{parse_sentence, ParseOptions};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("fixtures")
        .join(name)
}

fn main() {
    let bundle = Arc::new(
        GrammarBundle::load(
            fixture("classes.json"),
            fixture("concepts.json"),
            fixture("lexicon-ambig.json"),
        )
        .unwrap(),
    );
    let tokens: Vec<String> = "Compaq entwickelt einen Notebook mit einer 120-MByte-Harddisk"
        .split_whitespace()
        .map(String::from)
        .collect();

    let run = parse_sentence(&bundle, &tokens, &ParseOptions::default()).unwrap();
    println!("complete readings: {}\n", run.complete().count());
    for reading in run.complete() {
        let ppatt = reading
            .record
            .arcs
            .iter()
            .find(|a| a.name == "ppatt")
            .unwrap();
        println!(
            "reading {}: the prepositional phrase attaches to `{}` ({} -> {})",
            reading.record.reading_id,
            reading.record.tokens[(ppatt.head - 1) as usize],
            ppatt.head,
            ppatt.dep
        );
    }

    // the duplication episode is visible in the trace
    let trace = run.report.trace.render();
    println!("\nstructure-copy traffic during the fork:");
    for line in trace.lines() {
        if line.contains("copyStructure") || line.contains("duplicateStructure") {
            if line.split('\t').nth(1) == Some("deliver") {
                println!("  {line}");
            }
        }
    }

    // with the duplication budget capped, the surplus offer is refused
    let capped = parse_sentence(
        &bundle,
        &tokens,
        &ParseOptions {
            max_readings: 1,
            ..Default::default()
        },
    )
    .unwrap();
    println!(
        "\nwith max_readings = 1: {} complete reading(s), capped = {}",
        capped.complete().count(),
        capped.capped
    );
}
