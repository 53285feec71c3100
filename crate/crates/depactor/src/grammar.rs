//! Lexicon and grammar bundle: dependency names, valencies, order tuples,
//! occurs maps, lexeme entries, class-default inheritance, file ingestion.
//!
//! A bundle is three JSON documents (classes, concepts, lexicon). Field
//! names in those documents are normative; feature values use the textual
//! feature-structure notation.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use serde::Deserialize;
use thiserror::Error;

use crate::features::{parse_fs, FeatureStructure, SELF_LABEL};
use crate::hierarchy::{ClassHierarchy, ConceptSystem, Diagnostic, DiagnosticKind};

/// Reserved dependency pseudo-name for the word itself.
pub fn is_self(name: &str) -> bool {
    name == SELF_LABEL
}

/// A head's declared slot for one modifier.
#[derive(Debug, Clone, PartialEq)]
pub struct Valency {
    pub name: String,
    pub class: String,
    pub features: FeatureStructure,
    pub domain: BTreeSet<String>,
}

/// An admissible left-to-right arrangement of a head's dependency names,
/// containing `self` exactly once.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OrderTuple(pub Vec<String>);

impl fmt::Display for OrderTuple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "<{}>", self.0.join(", "))
    }
}

/// One word sense: surface form plus its grammatical specification.
#[derive(Debug, Clone)]
pub struct LexemeEntry {
    pub form: String,
    pub class: String,
    pub features: FeatureStructure,
    pub concept: String,
    pub valencies: Vec<Valency>,
    pub order: Vec<OrderTuple>,
}

impl LexemeEntry {
    /// Occurs map at word-actor spawn: `self` at the word's 1-based text
    /// position, every valency name unoccupied.
    pub fn initial_occurs(&self, position: u32) -> BTreeMap<String, u32> {
        let mut m = BTreeMap::new();
        m.insert(SELF_LABEL.to_string(), position);
        for v in &self.valencies {
            m.insert(v.name.clone(), 0);
        }
        m
    }
}

/// Per-class valency/order contributions inherited by member lexemes.
#[derive(Debug, Clone, Default)]
pub struct ClassDefaults {
    pub valencies: Vec<Valency>,
    pub order: Vec<OrderTuple>,
}

#[derive(Debug, Clone)]
pub struct GrammarBundle {
    pub classes: ClassHierarchy,
    pub concepts: ConceptSystem,
    pub class_defaults: BTreeMap<String, ClassDefaults>,
    lexicon: BTreeMap<String, Vec<Arc<LexemeEntry>>>,
}

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: String,
        #[source]
        source: serde_json::Error,
    },
    #[error("grammar validation failed:\n{}", .0.iter().map(|d| format!("  - {d}")).collect::<Vec<_>>().join("\n"))]
    Invalid(Vec<Diagnostic>),
}

// --- JSON document shapes (field names normative) --------------------------

#[derive(Deserialize)]
struct ClassDoc {
    name: String,
    #[serde(default)]
    parent: Option<String>,
    #[serde(default)]
    valencies: Vec<ValencyDoc>,
    #[serde(default)]
    order: Vec<Vec<String>>,
}

#[derive(Deserialize)]
struct ValencyDoc {
    name: String,
    class: String,
    features: String,
    #[serde(default)]
    domain: Vec<String>,
}

#[derive(Deserialize)]
struct ConceptsDoc {
    concepts: Vec<ConceptDoc>,
    #[serde(default)]
    roles: Vec<String>,
    #[serde(default)]
    cic: Vec<(String, String, String)>,
}

#[derive(Deserialize)]
struct ConceptDoc {
    name: String,
    #[serde(default)]
    parents: Vec<String>,
}

#[derive(Deserialize)]
struct LexemeDoc {
    form: String,
    class: String,
    features: String,
    concept: String,
    #[serde(default)]
    valencies: Vec<ValencyDoc>,
    #[serde(default)]
    order: Vec<Vec<String>>,
}

fn ddiag(message: impl Into<String>) -> Diagnostic {
    Diagnostic {
        kind: DiagnosticKind::DanglingName,
        message: message.into(),
    }
}

fn parse_valency(doc: &ValencyDoc, context: &str, diags: &mut Vec<Diagnostic>) -> Option<Valency> {
    if is_self(&doc.name) {
        diags.push(ddiag(format!("{context}: `self` cannot name a valency")));
        return None;
    }
    let features = match parse_fs(&doc.features) {
        Ok(fs) => fs,
        Err(e) => {
            diags.push(ddiag(format!(
                "{context}: valency `{}` features: {e}",
                doc.name
            )));
            return None;
        }
    };
    Some(Valency {
        name: doc.name.clone(),
        class: doc.class.clone(),
        features,
        domain: doc.domain.iter().cloned().collect(),
    })
}

fn parse_order(
    tuples: &[Vec<String>],
    context: &str,
    diags: &mut Vec<Diagnostic>,
) -> Vec<OrderTuple> {
    let mut out = Vec::new();
    for t in tuples {
        let selfs = t.iter().filter(|n| is_self(n)).count();
        if selfs != 1 {
            diags.push(ddiag(format!(
                "{context}: order tuple <{}> must contain `self` exactly once",
                t.join(", ")
            )));
            continue;
        }
        let mut seen = BTreeSet::new();
        if t.iter().any(|n| !seen.insert(n.clone())) {
            diags.push(ddiag(format!(
                "{context}: order tuple <{}> contains a duplicate name",
                t.join(", ")
            )));
            continue;
        }
        out.push(OrderTuple(t.clone()));
    }
    out
}

impl GrammarBundle {
    /// Loads and validates the three bundle documents. Inheritance is
    /// flattened here: every returned entry is self-contained.
    pub fn load(
        classes_path: impl AsRef<Path>,
        concepts_path: impl AsRef<Path>,
        lexicon_path: impl AsRef<Path>,
    ) -> Result<Self, LoadError> {
        let read = |p: &Path| -> Result<String, LoadError> {
            fs::read_to_string(p).map_err(|source| LoadError::Io {
                path: p.display().to_string(),
                source,
            })
        };
        let classes_text = read(classes_path.as_ref())?;
        let concepts_text = read(concepts_path.as_ref())?;
        let lexicon_text = read(lexicon_path.as_ref())?;
        Self::from_strs(
            &classes_text,
            &concepts_text,
            &lexicon_text,
            &classes_path.as_ref().display().to_string(),
            &concepts_path.as_ref().display().to_string(),
            &lexicon_path.as_ref().display().to_string(),
        )
    }

    pub fn from_strs(
        classes_text: &str,
        concepts_text: &str,
        lexicon_text: &str,
        classes_name: &str,
        concepts_name: &str,
        lexicon_name: &str,
    ) -> Result<Self, LoadError> {
        let class_docs: Vec<ClassDoc> =
            serde_json::from_str(classes_text).map_err(|source| LoadError::Json {
                path: classes_name.to_string(),
                source,
            })?;
        let concept_doc: ConceptsDoc =
            serde_json::from_str(concepts_text).map_err(|source| LoadError::Json {
                path: concepts_name.to_string(),
                source,
            })?;
        let lexeme_docs: Vec<LexemeDoc> =
            serde_json::from_str(lexicon_text).map_err(|source| LoadError::Json {
                path: lexicon_name.to_string(),
                source,
            })?;

        let mut diags: Vec<Diagnostic> = Vec::new();

        let mut classes = ClassHierarchy::new();
        let mut class_defaults: BTreeMap<String, ClassDefaults> = BTreeMap::new();
        for doc in &class_docs {
            classes.add_class(doc.name.clone(), doc.parent.clone());
        }
        for doc in &class_docs {
            let context = format!("class `{}`", doc.name);
            let mut defaults = ClassDefaults::default();
            for v in &doc.valencies {
                if let Some(val) = parse_valency(v, &context, &mut diags) {
                    defaults.valencies.push(val);
                }
            }
            defaults.order = parse_order(&doc.order, &context, &mut diags);
            if !defaults.valencies.is_empty() || !defaults.order.is_empty() {
                class_defaults.insert(doc.name.clone(), defaults);
            }
        }
        diags.extend(classes.validate());

        let mut concepts = ConceptSystem::new();
        for c in &concept_doc.concepts {
            concepts.add_concept(c.name.clone(), c.parents.clone());
        }
        for r in &concept_doc.roles {
            concepts.add_role(r.clone());
        }
        for (f, r, g) in &concept_doc.cic {
            concepts.add_cic(f.clone(), r.clone(), g.clone());
        }
        diags.extend(concepts.validate());

        let mut bundle = GrammarBundle {
            classes,
            concepts,
            class_defaults,
            lexicon: BTreeMap::new(),
        };

        for doc in &lexeme_docs {
            let context = format!("lexeme `{}`", doc.form);
            let features = match parse_fs(&doc.features) {
                Ok(fs) => fs,
                Err(e) => {
                    diags.push(ddiag(format!("{context}: features: {e}")));
                    continue;
                }
            };
            if features.is_bottom() {
                diags.push(ddiag(format!(
                    "{context}: features must not be inconsistent"
                )));
                continue;
            }
            let mut valencies = Vec::new();
            let mut literal_names = BTreeSet::new();
            for v in &doc.valencies {
                if let Some(val) = parse_valency(v, &context, &mut diags) {
                    if !literal_names.insert(val.name.clone()) {
                        diags.push(ddiag(format!(
                            "{context}: duplicate valency name `{}` (one filler position per name)",
                            val.name
                        )));
                        continue;
                    }
                    valencies.push(val);
                }
            }
            let order = parse_order(&doc.order, &context, &mut diags);
            let literal = LexemeEntry {
                form: doc.form.clone(),
                class: doc.class.clone(),
                features,
                concept: doc.concept.clone(),
                valencies,
                order,
            };
            let flattened = bundle.flatten_entry(literal);
            bundle
                .lexicon
                .entry(doc.form.clone())
                .or_default()
                .push(Arc::new(flattened));
        }

        for entries in bundle.lexicon.values() {
            for entry in entries {
                diags.extend(bundle.validate_entry(entry));
            }
        }

        if diags.is_empty() {
            Ok(bundle)
        } else {
            Err(LoadError::Invalid(diags))
        }
    }

    /// Combines an entry's literal declarations with every ancestor class's
    /// defaults. Entry-local valencies override a same-named inherited one;
    /// nearer classes override farther ones. Order tuples are unioned.
    /// Idempotent: flattening an already flattened entry changes nothing.
    pub fn flatten_entry(&self, entry: LexemeEntry) -> LexemeEntry {
        let mut chain: Vec<&str> = vec![entry.class.as_str()];
        chain.extend(self.classes.ancestors(&entry.class));
        // farthest ancestor first, so nearer contributions override
        let mut valencies: Vec<Valency> = Vec::new();
        let mut order: Vec<OrderTuple> = Vec::new();
        let push_valency = |list: &mut Vec<Valency>, v: &Valency| {
            if let Some(existing) = list.iter_mut().find(|x| x.name == v.name) {
                *existing = v.clone();
            } else {
                list.push(v.clone());
            }
        };
        for class in chain.iter().rev() {
            if let Some(defaults) = self.class_defaults.get(*class) {
                for v in &defaults.valencies {
                    push_valency(&mut valencies, v);
                }
                for t in &defaults.order {
                    if !order.contains(t) {
                        order.push(t.clone());
                    }
                }
            }
        }
        for v in &entry.valencies {
            push_valency(&mut valencies, v);
        }
        for t in &entry.order {
            if !order.contains(&t) {
                order.push(t.clone());
            }
        }
        LexemeEntry {
            valencies,
            order,
            ..entry
        }
    }

    fn validate_entry(&self, entry: &LexemeEntry) -> Vec<Diagnostic> {
        let mut diags = Vec::new();
        let context = format!("lexeme `{}`", entry.form);
        if !self.classes.contains(&entry.class) {
            diags.push(ddiag(format!(
                "{context}: undeclared class `{}`",
                entry.class
            )));
        }
        if !self.concepts.has_concept(&entry.concept) {
            diags.push(ddiag(format!(
                "{context}: undeclared concept `{}`",
                entry.concept
            )));
        }
        let mut names = BTreeSet::new();
        for v in &entry.valencies {
            if !names.insert(v.name.clone()) {
                diags.push(ddiag(format!(
                    "{context}: duplicate valency name `{}` (one filler position per name)",
                    v.name
                )));
            }
            if !self.classes.contains(&v.class) {
                diags.push(ddiag(format!(
                    "{context}: valency `{}` names undeclared class `{}`",
                    v.name, v.class
                )));
            }
            for role in &v.domain {
                if !self.concepts.has_role(role) {
                    diags.push(ddiag(format!(
                        "{context}: valency `{}` names undeclared role `{role}`",
                        v.name
                    )));
                }
            }
        }
        for t in &entry.order {
            for name in &t.0 {
                if !is_self(name) && !names.contains(name) {
                    diags.push(ddiag(format!(
                        "{context}: order tuple {t} names `{name}`, which is not a valency of this entry"
                    )));
                }
            }
        }
        diags
    }

    /// Exact, case-sensitive lookup; unknown forms yield the empty set.
    pub fn lookup(&self, form: &str) -> &[Arc<LexemeEntry>] {
        self.lexicon.get(form).map(|v| v.as_slice()).unwrap_or(&[])
    }

    pub fn forms(&self) -> impl Iterator<Item = &str> {
        self.lexicon.keys().map(|s| s.as_str())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const CLASSES: &str = r#"[
        {"name": "WordActor"},
        {"name": "Noun", "parent": "WordActor"},
        {"name": "Substantive", "parent": "Noun",
         "valencies": [{"name": "spec", "class": "Determiner",
                        "features": "[self: [agr: <1>=[]], spec: [agr: <1>]]",
                        "domain": ["HasDet"]}]},
        {"name": "Determiner", "parent": "WordActor"},
        {"name": "Preposition", "parent": "WordActor"}
    ]"#;

    const CONCEPTS: &str = r#"{
        "concepts": [
            {"name": "Top"},
            {"name": "Hardware", "parents": ["Top"]},
            {"name": "Computer", "parents": ["Hardware"]},
            {"name": "Notebook", "parents": ["Computer"]},
            {"name": "Harddisk", "parents": ["Hardware"]},
            {"name": "NOTEBOOK-00003", "parents": ["Notebook"]},
            {"name": "Determination", "parents": ["Top"]}
        ],
        "roles": ["hasPart", "HasDet", "HasHarddisk", "HasPrice"],
        "cic": [["Computer", "hasPart", "Harddisk"],
                ["Hardware", "HasDet", "Determination"],
                ["Computer", "HasHarddisk", "Harddisk"]]
    }"#;

    fn lexicon_json(extra: &str) -> String {
        format!(
            r#"[
            {{"form": "Notebook", "class": "Substantive",
              "features": "[self: [agr: [case: acc, gen: mas, num: sg]]]",
              "concept": "NOTEBOOK-00003",
              "valencies": [{{"name": "ppatt", "class": "Preposition",
                             "features": "[ppatt: [form: mit]]",
                             "domain": ["HasHarddisk", "HasPrice"]}}],
              "order": [["spec", "self", "ppatt"]]}}{extra}
        ]"#
        )
    }

    fn load(lexicon: &str) -> Result<GrammarBundle, LoadError> {
        GrammarBundle::from_strs(CLASSES, CONCEPTS, lexicon, "classes", "concepts", "lexicon")
    }

    #[test]
    fn flattening_unions_class_defaults() {
        let bundle = load(&lexicon_json("")).unwrap();
        let entries = bundle.lookup("Notebook");
        assert_eq!(entries.len(), 1);
        let names: Vec<&str> = entries[0]
            .valencies
            .iter()
            .map(|v| v.name.as_str())
            .collect();
        assert_eq!(names, vec!["spec", "ppatt"]);
        let ppatt = entries[0]
            .valencies
            .iter()
            .find(|v| v.name == "ppatt")
            .unwrap();
        assert_eq!(ppatt.class, "Preposition");
        assert!(ppatt.domain.contains("HasHarddisk") && ppatt.domain.contains("HasPrice"));
    }

    #[test]
    fn flattening_is_idempotent_and_local_wins() {
        let bundle = load(&lexicon_json("")).unwrap();
        let entry = bundle.lookup("Notebook")[0].as_ref().clone();
        let again = bundle.flatten_entry(entry.clone());
        assert_eq!(
            entry.valencies.iter().map(|v| &v.name).collect::<Vec<_>>(),
            again.valencies.iter().map(|v| &v.name).collect::<Vec<_>>()
        );
        assert_eq!(entry.order, again.order);

        // a local spec valency overrides the inherited one
        let local = r#",
            {"form": "Spezial", "class": "Substantive",
             "features": "[self: [agr: [num: sg]]]",
             "concept": "Notebook",
             "valencies": [{"name": "spec", "class": "Preposition",
                            "features": "[spec: [form: mit]]", "domain": ["HasDet"]}],
             "order": [["spec", "self"]]}"#;
        let bundle = load(&lexicon_json(local)).unwrap();
        let spezial = bundle.lookup("Spezial");
        let spec = spezial[0]
            .valencies
            .iter()
            .find(|v| v.name == "spec")
            .unwrap();
        assert_eq!(spec.class, "Preposition");
    }

    #[test]
    fn initial_occurs_matches_spawn_state() {
        let bundle = load(&lexicon_json("")).unwrap();
        let entry = &bundle.lookup("Notebook")[0];
        let occ = entry.initial_occurs(4);
        assert_eq!(occ.get("self"), Some(&4));
        assert_eq!(occ.get("spec"), Some(&0));
        assert_eq!(occ.get("ppatt"), Some(&0));
    }

    #[test]
    fn order_tuple_without_self_is_rejected() {
        let bad = r#",
            {"form": "Kaputt", "class": "Substantive",
             "features": "[]", "concept": "Notebook",
             "valencies": [], "order": [["spec"]]}"#;
        let err = load(&lexicon_json(bad)).unwrap_err();
        assert!(err.to_string().contains("`self` exactly once"));
    }

    #[test]
    fn duplicate_valency_names_are_rejected() {
        let bad = r#",
            {"form": "Doppel", "class": "Substantive",
             "features": "[]", "concept": "Notebook",
             "valencies": [
                {"name": "ppatt", "class": "Preposition", "features": "[]", "domain": []},
                {"name": "ppatt", "class": "Preposition", "features": "[]", "domain": []}
             ],
             "order": [["self", "ppatt"]]}"#;
        let err = load(&lexicon_json(bad)).unwrap_err();
        assert!(err.to_string().contains("duplicate valency name"));
    }

    #[test]
    fn lookup_unknown_form_is_empty() {
        let bundle = load(&lexicon_json("")).unwrap();
        assert!(bundle.lookup("zzz-unknown").is_empty());
    }

    #[test]
    fn ambiguous_form_returns_all_entries() {
        let extra = r#",
            {"form": "Notebook", "class": "Substantive",
             "features": "[self: [agr: [case: nom, gen: neu, num: sg]]]",
             "concept": "Notebook", "valencies": [], "order": []}"#;
        let bundle = load(&lexicon_json(extra)).unwrap();
        assert_eq!(bundle.lookup("Notebook").len(), 2);
    }

    #[test]
    fn dangling_names_fail_load() {
        let bad = r#",
            {"form": "Falsch", "class": "NoSuchClass",
             "features": "[]", "concept": "NoSuchConcept",
             "valencies": [], "order": []}"#;
        let err = load(&lexicon_json(bad)).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("NoSuchClass") && msg.contains("NoSuchConcept"));
    }
}
