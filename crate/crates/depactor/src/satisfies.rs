//! The admissibility predicate deciding whether a candidate modifier may
//! fill a valency of a candidate head, decomposed into four clauses:
//! categorial, morphosyntactic, conceptual, and ordering. The feature clause
//! doubles as the computation of the head's post-attachment features.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::features::{expand, extract, unify, FeatureStructure, SELF_LABEL};
use crate::grammar::{OrderTuple, Valency};
use crate::hierarchy::{ClassHierarchy, ConceptSystem, NameError};

/// One view serves both roles: a modifier candidate uses class, features,
/// concept, and position; a head candidate uses features, concept, order,
/// and occurs. Fields unused in a role are ignored.
#[derive(Debug, Clone, Default)]
pub struct CandidateView {
    pub class: String,
    pub features: FeatureStructure,
    pub concept: String,
    pub position: u32,
    pub order: Vec<OrderTuple>,
    pub occurs: BTreeMap<String, u32>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SatisfiesError {
    #[error(transparent)]
    Name(#[from] NameError),
    #[error("order tuple references `{0}`, which has no occurs entry")]
    MissingOccurs(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Clause {
    Class,
    Features,
    Concept,
    Order,
}

impl std::fmt::Display for Clause {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Clause::Class => "class",
            Clause::Features => "features",
            Clause::Concept => "concept",
            Clause::Order => "order",
        })
    }
}

#[derive(Debug, Clone)]
pub struct SatisfiesResult {
    pub holds: bool,
    /// The head's feature structure after establishing the dependency;
    /// bottom when the feature clause fails.
    pub head_features: FeatureStructure,
    /// The roles in the valency's domain permitting the conceptual link.
    pub roles: BTreeSet<String>,
    /// First failing clause in the fixed order class, features, concept,
    /// order; `None` when the predicate holds.
    pub failed_clause: Option<Clause>,
}

/// Categorial clause: the modifier's class is subsumed by the valency's.
pub fn check_class(
    modifier: &CandidateView,
    valency: &Valency,
    classes: &ClassHierarchy,
) -> Result<bool, SatisfiesError> {
    Ok(classes.subsumes_class(&modifier.class, &valency.class)?)
}

/// Morphosyntactic clause. Returns
/// `([valency.name : modifier.features\self] ⊓ valency.features) ⊓ head.features`;
/// the clause holds iff the result is not bottom, and the result is the
/// head's post-attachment feature structure.
pub fn check_features(
    modifier: &CandidateView,
    valency: &Valency,
    head: &CandidateView,
) -> FeatureStructure {
    let mod_core = extract(&modifier.features, SELF_LABEL);
    let slotted = expand(&valency.name, &mod_core);
    unify(&unify(&slotted, &valency.features), &head.features)
}

/// Conceptual clause: the roles in the valency's domain under which the
/// head's concept may take the modifier's concept. Holds iff non-empty.
pub fn check_concept(
    modifier: &CandidateView,
    valency: &Valency,
    head: &CandidateView,
    concepts: &ConceptSystem,
) -> Result<BTreeSet<String>, SatisfiesError> {
    Ok(concepts.roles_permitting(&head.concept, &modifier.concept, &valency.domain)?)
}

/// Ordering clause: some order tuple of the head has the valency's name at a
/// position k such that every earlier name's occupant precedes the modifier
/// (an unoccupied slot, 0, trivially does) and every later name's occupant
/// is absent or follows it.
pub fn check_order(
    modifier: &CandidateView,
    valency: &Valency,
    head: &CandidateView,
) -> Result<bool, SatisfiesError> {
    let occurs_of = |name: &str| -> Result<u32, SatisfiesError> {
        head.occurs
            .get(name)
            .copied()
            .ok_or_else(|| SatisfiesError::MissingOccurs(name.to_string()))
    };
    for tuple in &head.order {
        for (k, dk) in tuple.0.iter().enumerate() {
            if dk != &valency.name {
                continue;
            }
            let mut ok = true;
            for di in &tuple.0[..k] {
                if occurs_of(di)? >= modifier.position {
                    ok = false;
                    break;
                }
            }
            if ok {
                for di in &tuple.0[k + 1..] {
                    let occ = occurs_of(di)?;
                    if occ != 0 && occ <= modifier.position {
                        ok = false;
                        break;
                    }
                }
            }
            if ok {
                return Ok(true);
            }
        }
    }
    Ok(false)
}

/// The full predicate. Clause evaluation order is fixed (class, features,
/// concept, order) so the reported failure is deterministic.
pub fn satisfies(
    modifier: &CandidateView,
    valency: &Valency,
    head: &CandidateView,
    classes: &ClassHierarchy,
    concepts: &ConceptSystem,
) -> Result<SatisfiesResult, SatisfiesError> {
    if !check_class(modifier, valency, classes)? {
        return Ok(SatisfiesResult {
            holds: false,
            head_features: FeatureStructure::bottom(),
            roles: BTreeSet::new(),
            failed_clause: Some(Clause::Class),
        });
    }
    let head_features = check_features(modifier, valency, head);
    if head_features.is_bottom() {
        return Ok(SatisfiesResult {
            holds: false,
            head_features,
            roles: BTreeSet::new(),
            failed_clause: Some(Clause::Features),
        });
    }
    let roles = check_concept(modifier, valency, head, concepts)?;
    if roles.is_empty() {
        return Ok(SatisfiesResult {
            holds: false,
            head_features,
            roles,
            failed_clause: Some(Clause::Concept),
        });
    }
    if !check_order(modifier, valency, head)? {
        return Ok(SatisfiesResult {
            holds: false,
            head_features,
            roles,
            failed_clause: Some(Clause::Order),
        });
    }
    Ok(SatisfiesResult {
        holds: true,
        head_features,
        roles,
        failed_clause: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::parse_fs;

    fn classes() -> ClassHierarchy {
        let mut h = ClassHierarchy::new();
        h.add_class("WordActor", None);
        h.add_class("Noun", Some("WordActor".into()));
        h.add_class("Substantive", Some("Noun".into()));
        h.add_class("Preposition", Some("WordActor".into()));
        h
    }

    fn concepts() -> ConceptSystem {
        let mut cs = ConceptSystem::new();
        cs.add_concept("Hardware", Vec::<String>::new());
        cs.add_concept("Computer", vec!["Hardware"]);
        cs.add_concept("Notebook", vec!["Computer"]);
        cs.add_concept("Harddisk", vec!["Hardware"]);
        cs.add_concept("NOTEBOOK-00003", vec!["Notebook"]);
        cs.add_concept("120MB-HARDDISK-00004", vec!["Harddisk"]);
        cs.add_role("HasHarddisk");
        cs.add_role("HasPrice");
        cs.add_cic("Computer", "HasHarddisk", "Harddisk");
        cs
    }

    /// The prepositional-attachment configuration: "mit" at position 5
    /// offering itself to the noun at position 4.
    fn fixture() -> (CandidateView, Valency, CandidateView) {
        let modifier = CandidateView {
            class: "Preposition".into(),
            features: parse_fs("[self: [form: mit], pobj: [agr: [case: dat, gen: fem, num: sg]]]")
                .unwrap(),
            concept: "120MB-HARDDISK-00004".into(),
            position: 5,
            ..Default::default()
        };
        let valency = Valency {
            name: "ppatt".into(),
            class: "Preposition".into(),
            features: parse_fs("[ppatt: [form: mit]]").unwrap(),
            domain: ["HasHarddisk", "HasPrice"]
                .iter()
                .map(|s| s.to_string())
                .collect(),
        };
        let head = CandidateView {
            class: "Substantive".into(),
            features: parse_fs(
                "[self: [agr: <1>=[case: acc, gen: mas, num: sg]], spec: [agr: <1>]]",
            )
            .unwrap(),
            concept: "NOTEBOOK-00003".into(),
            position: 4,
            order: vec![OrderTuple(
                ["spec", "attr", "self", "ppatt"]
                    .iter()
                    .map(|s| s.to_string())
                    .collect(),
            )],
            occurs: [("spec", 3u32), ("attr", 0), ("self", 4), ("ppatt", 0)]
                .iter()
                .map(|(n, p)| (n.to_string(), *p))
                .collect(),
        };
        (modifier, valency, head)
    }

    #[test]
    fn class_clause() {
        let (modifier, valency, _) = fixture();
        let h = classes();
        assert!(check_class(&modifier, &valency, &h).unwrap());
        let noun_val = Valency {
            class: "Noun".into(),
            ..valency.clone()
        };
        let substantive = CandidateView {
            class: "Substantive".into(),
            ..Default::default()
        };
        assert!(check_class(&substantive, &noun_val, &h).unwrap());
        assert!(!check_class(&modifier, &noun_val, &h).unwrap());
    }

    #[test]
    fn feature_clause_builds_head_result() {
        let (modifier, valency, head) = fixture();
        let r = check_features(&modifier, &valency, &head);
        assert!(!r.is_bottom());
        let expected = parse_fs(
            "[ppatt: [form: mit], self: [agr: <1>=[case: acc, gen: mas, num: sg]], spec: [agr: <1>]]",
        )
        .unwrap();
        assert_eq!(r, expected);

        // a modifier without a self part fails outright
        let selfless = CandidateView {
            features: parse_fs("[form: mit]").unwrap(),
            ..modifier.clone()
        };
        assert!(check_features(&selfless, &valency, &head).is_bottom());

        // a form clash in the valency features fails
        let ohne_val = Valency {
            features: parse_fs("[ppatt: [form: ohne]]").unwrap(),
            ..valency.clone()
        };
        assert!(check_features(&modifier, &ohne_val, &head).is_bottom());
    }

    #[test]
    fn concept_clause_returns_permitting_roles() {
        let (modifier, valency, head) = fixture();
        let cs = concepts();
        let roles = check_concept(&modifier, &valency, &head, &cs).unwrap();
        assert_eq!(
            roles.into_iter().collect::<Vec<_>>(),
            vec!["HasHarddisk".to_string()]
        );

        let empty_domain = Valency {
            domain: BTreeSet::new(),
            ..valency.clone()
        };
        assert!(check_concept(&modifier, &empty_domain, &head, &cs)
            .unwrap()
            .is_empty());

        let mut no_cic = ConceptSystem::new();
        for c in cs.concepts() {
            no_cic.add_concept(c, Vec::<String>::new());
        }
        no_cic.add_role("HasHarddisk");
        no_cic.add_role("HasPrice");
        assert!(check_concept(&modifier, &valency, &head, &no_cic)
            .unwrap()
            .is_empty());
    }

    #[test]
    fn order_clause_evaluates_quantifiers() {
        let (modifier, valency, head) = fixture();
        assert!(check_order(&modifier, &valency, &head).unwrap());

        let early = CandidateView {
            position: 2,
            ..modifier.clone()
        };
        assert!(!check_order(&early, &valency, &head).unwrap());

        let no_order = CandidateView {
            order: vec![],
            ..head.clone()
        };
        assert!(!check_order(&modifier, &valency, &no_order).unwrap());

        let mut missing = head.clone();
        missing.occurs.remove("attr");
        assert_eq!(
            check_order(&modifier, &valency, &missing),
            Err(SatisfiesError::MissingOccurs("attr".into()))
        );
    }

    #[test]
    fn full_predicate_on_the_attachment_fixture() {
        let (modifier, valency, head) = fixture();
        let (h, cs) = (classes(), concepts());
        let r = satisfies(&modifier, &valency, &head, &h, &cs).unwrap();
        assert!(r.holds);
        assert!(!r.head_features.is_bottom());
        assert!(r.roles.contains("HasHarddisk"));
        assert_eq!(r.failed_clause, None);

        let early = CandidateView {
            position: 2,
            ..modifier.clone()
        };
        let r = satisfies(&early, &valency, &head, &h, &cs).unwrap();
        assert!(!r.holds);
        assert_eq!(r.failed_clause, Some(Clause::Order));

        let wrong_class = CandidateView {
            class: "Substantive".into(),
            ..modifier.clone()
        };
        let r = satisfies(&wrong_class, &valency, &head, &h, &cs).unwrap();
        assert!(!r.holds);
        assert_eq!(r.failed_clause, Some(Clause::Class));
    }

    #[test]
    fn holds_implies_nonbottom_features_and_roles() {
        let (modifier, valency, head) = fixture();
        let r = satisfies(&modifier, &valency, &head, &classes(), &concepts()).unwrap();
        assert!(r.holds && !r.head_features.is_bottom() && !r.roles.is_empty());
    }
}
