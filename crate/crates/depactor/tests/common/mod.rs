//! Shared helpers for the integration suites: fixture loading, seeded
//! random generators, and independent re-implementations used as oracles.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;
use std::sync::Arc;

use rand::rngs::StdRng;
use rand::Rng;

use depactor::features::{FeatureStructure, FsBuilder, NodeId};
use depactor::grammar::{GrammarBundle, OrderTuple, Valency};
use depactor::hierarchy::{ClassHierarchy, ConceptSystem};
use depactor::satisfies::CandidateView;

pub fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("fixtures")
        .join(name)
}

pub fn load_bundle(lexicon: &str) -> Arc<GrammarBundle> {
    Arc::new(
        GrammarBundle::load(
            fixture_path("classes.json"),
            fixture_path("concepts.json"),
            fixture_path(lexicon),
        )
        .expect("fixture bundle loads"),
    )
}

pub fn tokens(s: &str) -> Vec<String> {
    s.split_whitespace().map(|t| t.to_string()).collect()
}

// ---------------------------------------------------------------------------
// Random feature structures (bounded, with sharing)
// ---------------------------------------------------------------------------

const ATOMS: &[&str] = &["a", "b", "c", "d", "nom", "acc", "sg"];
const LABELS: &[&str] = &["p", "q", "r", "s", "agr", "case"];

/// Builds a random DAG of up to `max_nodes` nodes; later nodes may reference
/// earlier ones, so label sharing (coreference) arises naturally.
pub fn random_fs(rng: &mut StdRng, max_nodes: usize) -> FeatureStructure {
    let n = rng.gen_range(1..=max_nodes);
    let mut builder = FsBuilder::new();
    let mut ids: Vec<NodeId> = Vec::new();
    for i in 0..n {
        let id = if ids.is_empty() || rng.gen_bool(0.35) {
            match rng.gen_range(0..10) {
                0..=5 => builder.atom(ATOMS[rng.gen_range(0..ATOMS.len())]),
                6..=7 => {
                    let k = rng.gen_range(2..=3);
                    let alts: Vec<&str> = (0..k)
                        .map(|_| ATOMS[rng.gen_range(0..ATOMS.len())])
                        .collect();
                    builder.disj(alts).unwrap()
                }
                _ => builder.complex(Vec::<(String, NodeId)>::new()).unwrap(),
            }
        } else {
            // complex node over earlier nodes; duplicate labels collapse
            let arity = rng.gen_range(1..=3.min(ids.len()));
            let mut entries: BTreeMap<String, NodeId> = BTreeMap::new();
            for _ in 0..arity {
                let label = LABELS[rng.gen_range(0..LABELS.len())].to_string();
                let child = ids[rng.gen_range(0..ids.len())];
                entries.insert(label, child);
            }
            builder.complex(entries).unwrap()
        };
        ids.push(id);
        if i + 1 == n {
            return builder.finish(id).unwrap();
        }
    }
    unreachable!()
}

// ---------------------------------------------------------------------------
// Random concept systems and the brute-force permit closure
// ---------------------------------------------------------------------------

pub struct RandomConcepts {
    pub system: ConceptSystem,
    pub concepts: Vec<String>,
    pub roles: Vec<String>,
    pub cic: Vec<(String, String, String)>,
    /// (child, parent) edges as declared by the generator.
    pub edges: Vec<(String, String)>,
}

pub fn random_concept_system(rng: &mut StdRng) -> RandomConcepts {
    let n_concepts = rng.gen_range(2..=20);
    let n_roles = rng.gen_range(1..=10);
    let n_cic = rng.gen_range(0..=30);
    let concepts: Vec<String> = (0..n_concepts).map(|i| format!("C{i}")).collect();
    let roles: Vec<String> = (0..n_roles).map(|i| format!("R{i}")).collect();
    let mut system = ConceptSystem::new();
    let mut edges = Vec::new();
    for (i, c) in concepts.iter().enumerate() {
        // parents only among earlier concepts keeps the taxonomy acyclic
        let mut parents = Vec::new();
        if i > 0 {
            let k = rng.gen_range(0..=2.min(i));
            for _ in 0..k {
                let p = concepts[rng.gen_range(0..i)].clone();
                edges.push((c.clone(), p.clone()));
                parents.push(p);
            }
        }
        system.add_concept(c.clone(), parents);
    }
    for r in &roles {
        system.add_role(r.clone());
    }
    let mut cic = Vec::new();
    for _ in 0..n_cic {
        let f = concepts[rng.gen_range(0..concepts.len())].clone();
        let r = roles[rng.gen_range(0..roles.len())].clone();
        let g = concepts[rng.gen_range(0..concepts.len())].clone();
        system.add_cic(f.clone(), r.clone(), g.clone());
        cic.push((f, r, g));
    }
    RandomConcepts {
        system,
        concepts,
        roles,
        cic,
        edges,
    }
}

/// Materializes the reflexive-transitive subsumption closure by fixpoint
/// iteration and evaluates permit by full enumeration over it.
pub fn permit_brute_force(rc: &RandomConcepts, x: &str, role: &str, y: &str) -> bool {
    let mut up: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    for c in &rc.concepts {
        up.insert(c.as_str(), BTreeSet::from([c.as_str()]));
    }
    let mut changed = true;
    while changed {
        changed = false;
        for (child, parent) in &rc.edges {
            let parent_ups: Vec<&str> = up[parent.as_str()].iter().copied().collect();
            let child_set = up.get_mut(child.as_str()).unwrap();
            let before = child_set.len();
            child_set.extend(parent_ups);
            if child_set.len() != before {
                changed = true;
            }
        }
    }
    rc.cic
        .iter()
        .any(|(f, r, g)| r == role && up[x].contains(f.as_str()) && up[y].contains(g.as_str()))
}

// ---------------------------------------------------------------------------
// Quantifier-expansion evaluation of the admissibility predicate
// ---------------------------------------------------------------------------

/// Direct transcription of the four-clause predicate as nested loops over
/// the quantifiers, independent of the production decomposition.
pub fn satisfies_quantifier_expansion(
    modifier: &CandidateView,
    valency: &Valency,
    head: &CandidateView,
    classes: &ClassHierarchy,
    concepts: &ConceptSystem,
) -> bool {
    // modifier.class isa* valency.class (reflexive-transitive)
    let class_ok = modifier.class == valency.class
        || classes
            .ancestors(&modifier.class)
            .iter()
            .any(|a| *a == valency.class);
    if !class_ok {
        return false;
    }

    // (([name : modifier\self] ⊓ valency.features) ⊓ head.features) ≠ ⊥
    use depactor::features::{expand, extract, unify, SELF_LABEL};
    let r = unify(
        &unify(
            &expand(&valency.name, &extract(&modifier.features, SELF_LABEL)),
            &valency.features,
        ),
        &head.features,
    );
    if r.is_bottom() {
        return false;
    }

    // ∃ role ∈ domain : (head.concept, role, modifier.concept) ∈ permit
    let mut role_ok = false;
    for role in &valency.domain {
        if concepts
            .permit(&head.concept, role, &modifier.concept)
            .unwrap_or(false)
        {
            role_ok = true;
        }
    }
    if !role_ok {
        return false;
    }

    // ∃ tuple ∈ order : ∃ k : name = d_k ∧ ∀ i<k occurs(d_i) < pos
    //                             ∧ ∀ i>k (occurs(d_i) = 0 ∨ occurs(d_i) > pos)
    for tuple in &head.order {
        let names = &tuple.0;
        for k in 0..names.len() {
            if names[k] != valency.name {
                continue;
            }
            let mut ok = true;
            for i in 0..k {
                let occ = head.occurs.get(&names[i]).copied().unwrap_or(0);
                if !(occ < modifier.position) {
                    ok = false;
                }
            }
            for i in (k + 1)..names.len() {
                let occ = head.occurs.get(&names[i]).copied().unwrap_or(0);
                if !(occ == 0 || occ > modifier.position) {
                    ok = false;
                }
            }
            if ok {
                return true;
            }
        }
    }
    false
}

// ---------------------------------------------------------------------------
// Random inputs for the predicate comparison
// ---------------------------------------------------------------------------

pub struct PredicateFixture {
    pub classes: ClassHierarchy,
    pub concepts: ConceptSystem,
    pub class_names: Vec<String>,
    pub concept_names: Vec<String>,
    pub role_names: Vec<String>,
}

pub fn random_predicate_fixture(rng: &mut StdRng) -> PredicateFixture {
    let n_classes = rng.gen_range(2..=6);
    let class_names: Vec<String> = (0..n_classes).map(|i| format!("K{i}")).collect();
    let mut classes = ClassHierarchy::new();
    classes.add_class(class_names[0].clone(), None);
    for i in 1..n_classes {
        let parent = class_names[rng.gen_range(0..i)].clone();
        classes.add_class(class_names[i].clone(), Some(parent));
    }
    let rc = random_concept_system(rng);
    PredicateFixture {
        classes,
        concept_names: rc.concepts.clone(),
        role_names: rc.roles.clone(),
        concepts: rc.system,
        class_names,
    }
}

const DEP_NAMES: &[&str] = &["alpha", "beta", "gamma"];

pub fn random_triple(
    rng: &mut StdRng,
    fx: &PredicateFixture,
) -> (CandidateView, Valency, CandidateView) {
    let fs_small = |rng: &mut StdRng| random_fs(rng, 4);
    let name = DEP_NAMES[rng.gen_range(0..DEP_NAMES.len())].to_string();

    let mod_feats = {
        // usually give the modifier a self part so the feature clause is
        // exercised in both directions
        let mut b = FsBuilder::new();
        let core = b.atom(ATOMS[rng.gen_range(0..ATOMS.len())]);
        let core = if rng.gen_bool(0.7) {
            let inner = b.complex(vec![("case".to_string(), core)]).unwrap();
            inner
        } else {
            core
        };
        if rng.gen_bool(0.8) {
            let root = b.complex(vec![("self".to_string(), core)]).unwrap();
            b.finish(root).unwrap()
        } else {
            let root = b.complex(vec![("other".to_string(), core)]).unwrap();
            b.finish(root).unwrap()
        }
    };

    let domain: BTreeSet<String> = fx
        .role_names
        .iter()
        .filter(|_| rng.gen_bool(0.5))
        .cloned()
        .collect();
    let valency = Valency {
        name: name.clone(),
        class: fx.class_names[rng.gen_range(0..fx.class_names.len())].clone(),
        features: if rng.gen_bool(0.5) {
            FeatureStructure::top()
        } else {
            fs_small(rng)
        },
        domain,
    };

    let modifier = CandidateView {
        class: fx.class_names[rng.gen_range(0..fx.class_names.len())].clone(),
        features: mod_feats,
        concept: fx.concept_names[rng.gen_range(0..fx.concept_names.len())].clone(),
        position: rng.gen_range(1..=8),
        ..Default::default()
    };

    // order tuples over the dep names plus self, with coherent occurs
    let mut order = Vec::new();
    let mut occurs: BTreeMap<String, u32> = BTreeMap::new();
    let head_pos = rng.gen_range(1..=8u32);
    occurs.insert("self".to_string(), head_pos);
    for _ in 0..rng.gen_range(0..=2) {
        let mut names: Vec<String> = DEP_NAMES
            .iter()
            .filter(|_| rng.gen_bool(0.7))
            .map(|s| s.to_string())
            .collect();
        if names.is_empty() {
            names.push(name.clone());
        }
        let self_at = rng.gen_range(0..=names.len());
        names.insert(self_at, "self".to_string());
        for n in &names {
            if n != "self" {
                occurs.entry(n.clone()).or_insert_with(|| {
                    if rng.gen_bool(0.5) {
                        0
                    } else {
                        rng.gen_range(1..=8)
                    }
                });
            }
        }
        order.push(OrderTuple(names));
    }
    let head = CandidateView {
        class: fx.class_names[rng.gen_range(0..fx.class_names.len())].clone(),
        features: fs_small(rng),
        concept: fx.concept_names[rng.gen_range(0..fx.concept_names.len())].clone(),
        position: head_pos,
        order,
        occurs,
    };
    (modifier, valency, head)
}
