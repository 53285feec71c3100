//! Feature structures: the textual notation, unification, disjunction
//! narrowing, and observable coreference sharing.
//!
//! ```bash
//! cargo run -p depactor --example unification
//! ```

use depactor::features::{equivalent, expand, extract, parse_fs, render_fs, unify};

fn main() {
    // atomic values, disjunctions, nesting
    let a = parse_fs("[case: {dat, acc}, agr: [num: sg]]").unwrap();
    let b = parse_fs("[case: {acc, nom}]").unwrap();
    let met = unify(&a, &b);
    println!("{a}\n  ⊓ {b}\n  = {met}\n");

    // inconsistency is a value, not an error
    let clash = unify(
        &parse_fs("[case: acc]").unwrap(),
        &parse_fs("[case: dat]").unwrap(),
    );
    println!("[case: acc] ⊓ [case: dat] = {clash}\n");

    // a noun head taking a prepositional modifier: the valency restriction
    // lands under the dependency's own label
    let noun =
        parse_fs("[self: [agr: <1>=[case: acc, gen: mas, num: sg]], spec: [agr: <1>]]").unwrap();
    let restriction = parse_fs("[ppatt: [form: mit]]").unwrap();
    println!("noun head:   {noun}");
    println!("restriction: {restriction}");
    println!("after:       {}\n", unify(&noun, &restriction));

    // coreference is structure sharing: information unified into one
    // position surfaces at the other; plain copies stay independent
    let shared = parse_fs("[subject: <1>=[num: sg], agreement: <1>]").unwrap();
    let copied = parse_fs("[subject: [num: sg], agreement: [num: sg]]").unwrap();
    let probe = parse_fs("[subject: [person: third]]").unwrap();
    println!(
        "shared ⊓ probe → agreement = {}",
        extract(&unify(&shared, &probe), "agreement")
    );
    println!(
        "copied ⊓ probe → agreement = {}",
        extract(&unify(&copied, &probe), "agreement")
    );
    assert!(!equivalent(&shared, &copied));

    // expansion wraps, extraction unwraps
    let u = parse_fs("[case: dat]").unwrap();
    let wrapped = expand("agr", &u);
    println!("\nexpand(agr, {u}) = {wrapped}");
    println!("extract(·, agr)  = {}", extract(&wrapped, "agr"));
    println!("extract(·, pobj) = {}", extract(&wrapped, "pobj"));

    // rendering is canonical: labels sorted, tags renumbered
    let messy = parse_fs("[z: <9>=[k: v], a: <9>]").unwrap();
    println!("\ncanonical form: {}", render_fs(&messy));
}
