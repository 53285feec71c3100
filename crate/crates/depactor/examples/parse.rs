//! End-to-end parse: word actors negotiate the arcs of a seven-word
//! sentence, and the harvest reports the reading with per-word state.
//!
//! ```bash
//! cargo run -p depactor --example parse
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
            fixture("lexicon.json"),
        )
        .unwrap(),
    );
    let tokens: Vec<String> = "Compaq entwickelt einen Notebook mit einer 120-MByte-Harddisk"
        .split_whitespace()
        .map(String::from)
        .collect();

    let run = parse_sentence(&bundle, &tokens, &ParseOptions::default()).unwrap();
    println!(
        "outcome: {:?} after {} deliveries, {} reception tasks\n",
        run.outcome, run.report.deliveries, run.report.tasks_created
    );

    for reading in &run.readings {
        let rec = &reading.record;
        println!(
            "reading {} ({}), root at {:?}:",
            rec.reading_id,
            if rec.complete {
                "complete"
            } else {
                "incomplete"
            },
            rec.root_pos
        );
        for arc in &rec.arcs {
            println!(
                "  {:6} {} ({}) -> {} ({})",
                arc.name,
                rec.tokens[(arc.head - 1) as usize],
                arc.head,
                rec.tokens[(arc.dep - 1) as usize],
                arc.dep
            );
        }
        println!("\n  final features per word:");
        for (pos, feats) in &reading.features {
            println!(
                "  {:2} {:20} {}",
                pos,
                rec.tokens[(*pos - 1) as usize],
                feats
            );
        }
        println!("\n  occurs map of the noun at 4: {:?}", reading.occurs[&4]);
    }
}
