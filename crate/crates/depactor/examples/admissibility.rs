//! The four-clause admissibility predicate, evaluated clause by clause on
//! the prepositional-attachment configuration: "mit" at position 5 offering
//! itself as modifier of the noun at position 4.
//!
//! ```bash
//! cargo run -p depactor --example admissibility
//! ```

use std::path::PathBuf;

use depactor::features::parse_fs;
use depactor::grammar::GrammarBundle;
use depactor::satisfies::{
    check_class, check_concept, check_features, check_order, satisfies, CandidateView,
};

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
    .unwrap();

    let mit = &bundle.lookup("mit")[0];
    let notebook = &bundle.lookup("Notebook")[0];

    let modifier = CandidateView {
        class: mit.class.clone(),
        features: mit.features.clone(),
        concept: mit.concept.clone(),
        position: 5,
        ..Default::default()
    };
    // the noun has already taken its determiner at position 3
    let head = CandidateView {
        class: notebook.class.clone(),
        features: parse_fs("[self: [agr: <1>=[case: acc, gen: mas, num: sg]], spec: [agr: <1>]]")
            .unwrap(),
        concept: notebook.concept.clone(),
        position: 4,
        order: notebook.order.clone(),
        occurs: [("spec", 3u32), ("attr", 0), ("self", 4), ("ppatt", 0)]
            .iter()
            .map(|(n, p)| (n.to_string(), *p))
            .collect(),
    };
    let valency = notebook
        .valencies
        .iter()
        .find(|v| v.name == "ppatt")
        .unwrap();

    println!(
        "modifier: {} @{} ({})",
        modifier.class, modifier.position, modifier.concept
    );
    println!(
        "head:     {} @{} ({})",
        head.class, head.position, head.concept
    );
    println!(
        "valency:  {} class={} domain={:?}\n",
        valency.name, valency.class, valency.domain
    );

    println!(
        "class:    {}",
        check_class(&modifier, valency, &bundle.classes).unwrap()
    );
    let r = check_features(&modifier, valency, &head);
    println!("features: {r}");
    println!(
        "concept:  {:?}",
        check_concept(&modifier, valency, &head, &bundle.concepts).unwrap()
    );
    println!(
        "order:    {}\n",
        check_order(&modifier, valency, &head).unwrap()
    );

    let result = satisfies(&modifier, valency, &head, &bundle.classes, &bundle.concepts).unwrap();
    println!(
        "holds = {}, permitting roles = {:?}",
        result.holds, result.roles
    );
    println!(
        "head features after attachment:\n  {}",
        result.head_features
    );

    // moving the modifier left of the determiner violates the order tuple
    let early = CandidateView {
        position: 2,
        ..modifier
    };
    let result = satisfies(&early, valency, &head, &bundle.classes, &bundle.concepts).unwrap();
    println!(
        "\nsame offer from position 2: holds = {}, failed clause = {:?}",
        result.holds,
        result.failed_clause.unwrap()
    );
}
