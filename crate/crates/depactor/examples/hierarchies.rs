//! Word-class subsumption and conceptual integrity constraints.
//!
//! ```bash
//! cargo run -p depactor --example hierarchies
//! ```

use depactor::hierarchy::{ClassHierarchy, ConceptSystem};

fn main() {
    let mut classes = ClassHierarchy::new();
    classes.add_class("WordActor", None);
    classes.add_class("Noun", Some("WordActor".into()));
    classes.add_class("Substantive", Some("Noun".into()));
    classes.add_class("Preposition", Some("WordActor".into()));

    println!("word classes rooted at {:?}:", classes.root().unwrap());
    for (sub, sup) in [
        ("Substantive", "Noun"),
        ("Substantive", "WordActor"),
        ("Preposition", "Noun"),
        ("Noun", "Noun"),
    ] {
        println!(
            "  {sub} isa* {sup} = {}",
            classes.subsumes_class(sub, sup).unwrap()
        );
    }

    // concepts form a multi-parent taxonomy; integrity triples close
    // downward over it
    let mut concepts = ConceptSystem::new();
    concepts.add_concept("Hardware", Vec::<String>::new());
    concepts.add_concept("Computer", vec!["Hardware"]);
    concepts.add_concept("Notebook", vec!["Computer"]);
    concepts.add_concept("Harddisk", vec!["Hardware"]);
    concepts.add_role("hasPart");
    concepts.add_cic("Computer", "hasPart", "Harddisk");

    println!("\ndeclared: (Computer, hasPart, Harddisk)");
    for (x, r, y) in [
        ("Computer", "hasPart", "Harddisk"),
        ("Notebook", "hasPart", "Harddisk"),
        ("Harddisk", "hasPart", "Computer"),
        ("Hardware", "hasPart", "Harddisk"),
    ] {
        println!(
            "  permit({x}, {r}, {y}) = {}",
            concepts.permit(x, r, y).unwrap()
        );
    }

    // a valency's role domain filters down to the roles that actually
    // license the pair
    let domain = ["hasPart".to_string()].into_iter().collect();
    let roles = concepts
        .roles_permitting("Notebook", "Harddisk", &domain)
        .unwrap();
    println!("\nroles permitting (Notebook, ·, Harddisk) within {domain:?}: {roles:?}");

    // validation reports structural defects instead of failing late
    let mut broken = ClassHierarchy::new();
    broken.add_class("A", Some("B".into()));
    broken.add_class("B", Some("A".into()));
    println!("\ndiagnostics for a cyclic taxonomy:");
    for d in broken.validate() {
        println!("  - {d}");
    }
}
