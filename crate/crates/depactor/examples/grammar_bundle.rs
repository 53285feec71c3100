//! Loading a grammar bundle: lexicon lookup, class-default inheritance,
//! and the occurs map a word actor starts from.
//!
//! ```bash
//! cargo run -p depactor --example grammar_bundle
//! ```

use std::path::PathBuf;

use depactor::grammar::GrammarBundle;

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("fixtures")
        .join(name)
}

fn main() {
    let bundle = GrammarBundle::load(
        fixture("classes.json"),
        fixture("concepts.json"),
        fixture("lexicon.json"),
    )
    .expect("bundle loads cleanly");

    println!("forms: {}", bundle.forms().collect::<Vec<_>>().join(", "));

    // the `spec` valency is inherited from the Substantive class default;
    // `attr` and `ppatt` are declared on the entry itself
    let entry = &bundle.lookup("Notebook")[0];
    println!("\nNotebook ({} / {}):", entry.class, entry.concept);
    println!("  features: {}", entry.features);
    for v in &entry.valencies {
        println!(
            "  valency {:8} class={:12} domain={:?}",
            v.name, v.class, v.domain
        );
        println!("           features: {}", v.features);
    }
    for t in &entry.order {
        println!("  order    {t}");
    }

    // the occurs map at spawn: self at the word's text position, every
    // valency name unoccupied
    let occurs = entry.initial_occurs(4);
    println!("  occurs@4 {occurs:?}");

    // homographs return every sense
    let senses = bundle.lookup("Laptop");
    println!("\nLaptop has {} senses:", senses.len());
    for s in senses {
        println!("  {}", s.features);
    }
    println!(
        "\nunknown form yields the empty set: {:?}",
        bundle.lookup("zzz")
    );
}
