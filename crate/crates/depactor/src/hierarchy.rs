//! Word-class taxonomy and the conceptual system.
//!
//! Word classes form a single-parent tree rooted at a distinguished top
//! class. Concepts form a multi-parent DAG carrying conceptual integrity
//! constraint triples; `permit` is the derived relation closing those
//! triples downward over the taxonomy.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum NameError {
    #[error("unknown word class `{0}`")]
    UnknownClass(String),
    #[error("unknown concept `{0}`")]
    UnknownConcept(String),
    #[error("unknown role `{0}`")]
    UnknownRole(String),
}

/// A structural problem found while validating a hierarchy.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub kind: DiagnosticKind,
    pub message: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiagnosticKind {
    Cycle,
    DanglingName,
    MissingRoot,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

fn diag(kind: DiagnosticKind, message: impl Into<String>) -> Diagnostic {
    Diagnostic {
        kind,
        message: message.into(),
    }
}

// ---------------------------------------------------------------------------
// Word classes
// ---------------------------------------------------------------------------

/// Single-parent class taxonomy. Exactly one class has no parent; it is the
/// root every other class must reach.
#[derive(Debug, Clone, Default)]
pub struct ClassHierarchy {
    parent: BTreeMap<String, Option<String>>,
}

impl ClassHierarchy {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_class(&mut self, name: impl Into<String>, parent: Option<String>) {
        self.parent.insert(name.into(), parent);
    }

    pub fn contains(&self, name: &str) -> bool {
        self.parent.contains_key(name)
    }

    pub fn classes(&self) -> impl Iterator<Item = &str> {
        self.parent.keys().map(|s| s.as_str())
    }

    pub fn root(&self) -> Option<&str> {
        let mut roots = self.parent.iter().filter(|(_, p)| p.is_none());
        roots.next().map(|(n, _)| n.as_str())
    }

    /// Parent chain from `name` (exclusive) up to the root (inclusive).
    pub fn ancestors<'a>(&'a self, name: &str) -> Vec<&'a str> {
        let mut out = Vec::new();
        let mut cur = name.to_string();
        let mut guard = 0;
        while let Some(Some(p)) = self.parent.get(&cur) {
            out.push(p.as_str());
            cur = p.clone();
            guard += 1;
            if guard > self.parent.len() {
                break; // cyclic input; validate() reports it
            }
        }
        out
    }

    /// Reflexive-transitive subclass test: `sub` isa* `superclass`.
    pub fn subsumes_class(&self, sub: &str, superclass: &str) -> Result<bool, NameError> {
        if !self.contains(sub) {
            return Err(NameError::UnknownClass(sub.to_string()));
        }
        if !self.contains(superclass) {
            return Err(NameError::UnknownClass(superclass.to_string()));
        }
        if sub == superclass {
            return Ok(true);
        }
        Ok(self.ancestors(sub).iter().any(|a| *a == superclass))
    }

    pub fn validate(&self) -> Vec<Diagnostic> {
        let mut out = Vec::new();
        for (name, parent) in &self.parent {
            if let Some(p) = parent {
                if !self.parent.contains_key(p) {
                    out.push(diag(
                        DiagnosticKind::DanglingName,
                        format!("class `{name}` names undeclared parent `{p}`"),
                    ));
                }
            }
        }
        // cycle check: walk up from every class with a step bound
        for name in self.parent.keys() {
            let mut cur = name.clone();
            let mut steps = 0;
            while let Some(Some(p)) = self.parent.get(&cur) {
                cur = p.clone();
                steps += 1;
                if steps > self.parent.len() {
                    out.push(diag(
                        DiagnosticKind::Cycle,
                        format!("class parent chain from `{name}` is cyclic"),
                    ));
                    break;
                }
            }
        }
        let roots: Vec<_> = self.parent.iter().filter(|(_, p)| p.is_none()).collect();
        if roots.len() != 1 && !self.parent.is_empty() {
            out.push(diag(
                DiagnosticKind::MissingRoot,
                format!("expected exactly one root class, found {}", roots.len()),
            ));
        }
        out
    }
}

// ---------------------------------------------------------------------------
// Concepts
// ---------------------------------------------------------------------------

/// Concept taxonomy (multi-parent DAG), role names, and integrity triples.
#[derive(Debug, Clone, Default)]
pub struct ConceptSystem {
    parents: BTreeMap<String, BTreeSet<String>>,
    roles: BTreeSet<String>,
    cic: Vec<(String, String, String)>,
}

impl ConceptSystem {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_concept<I, S>(&mut self, name: impl Into<String>, parents: I)
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.parents
            .entry(name.into())
            .or_default()
            .extend(parents.into_iter().map(Into::into));
    }

    pub fn add_role(&mut self, name: impl Into<String>) {
        self.roles.insert(name.into());
    }

    pub fn add_cic(&mut self, f: impl Into<String>, r: impl Into<String>, g: impl Into<String>) {
        self.cic.push((f.into(), r.into(), g.into()));
    }

    pub fn has_concept(&self, name: &str) -> bool {
        self.parents.contains_key(name)
    }

    pub fn has_role(&self, name: &str) -> bool {
        self.roles.contains(name)
    }

    pub fn roles(&self) -> impl Iterator<Item = &str> {
        self.roles.iter().map(|s| s.as_str())
    }

    pub fn concepts(&self) -> impl Iterator<Item = &str> {
        self.parents.keys().map(|s| s.as_str())
    }

    pub fn cic_triples(&self) -> &[(String, String, String)] {
        &self.cic
    }

    /// Reflexive-transitive concept subsumption: `sub` isa* `superconcept`.
    pub fn subsumes_concept(&self, sub: &str, superconcept: &str) -> Result<bool, NameError> {
        if !self.has_concept(sub) {
            return Err(NameError::UnknownConcept(sub.to_string()));
        }
        if !self.has_concept(superconcept) {
            return Err(NameError::UnknownConcept(superconcept.to_string()));
        }
        let mut seen = BTreeSet::new();
        let mut stack = vec![sub.to_string()];
        while let Some(c) = stack.pop() {
            if c == superconcept {
                return Ok(true);
            }
            if !seen.insert(c.clone()) {
                continue;
            }
            if let Some(ps) = self.parents.get(&c) {
                stack.extend(ps.iter().cloned());
            }
        }
        Ok(false)
    }

    /// True iff some declared triple (f, r, g) covers (x, r, y) with
    /// x isa* f and y isa* g.
    pub fn permit(&self, x: &str, role: &str, y: &str) -> Result<bool, NameError> {
        if !self.has_concept(x) {
            return Err(NameError::UnknownConcept(x.to_string()));
        }
        if !self.has_role(role) {
            return Err(NameError::UnknownRole(role.to_string()));
        }
        if !self.has_concept(y) {
            return Err(NameError::UnknownConcept(y.to_string()));
        }
        for (f, r, g) in &self.cic {
            if r == role && self.subsumes_concept(x, f)? && self.subsumes_concept(y, g)? {
                return Ok(true);
            }
        }
        Ok(false)
    }

    /// The subset of `domain` whose roles permit (head, role, modifier).
    pub fn roles_permitting(
        &self,
        head_concept: &str,
        mod_concept: &str,
        domain: &BTreeSet<String>,
    ) -> Result<BTreeSet<String>, NameError> {
        let mut out = BTreeSet::new();
        for role in domain {
            if self.permit(head_concept, role, mod_concept)? {
                out.insert(role.clone());
            }
        }
        Ok(out)
    }

    pub fn validate(&self) -> Vec<Diagnostic> {
        let mut out = Vec::new();
        for (name, parents) in &self.parents {
            for p in parents {
                if !self.parents.contains_key(p) {
                    out.push(diag(
                        DiagnosticKind::DanglingName,
                        format!("concept `{name}` names undeclared parent `{p}`"),
                    ));
                }
            }
        }
        for (f, r, g) in &self.cic {
            if !self.parents.contains_key(f) {
                out.push(diag(
                    DiagnosticKind::DanglingName,
                    format!("cic triple references undeclared concept `{f}`"),
                ));
            }
            if !self.roles.contains(r) {
                out.push(diag(
                    DiagnosticKind::DanglingName,
                    format!("cic triple references undeclared role `{r}`"),
                ));
            }
            if !self.parents.contains_key(g) {
                out.push(diag(
                    DiagnosticKind::DanglingName,
                    format!("cic triple references undeclared concept `{g}`"),
                ));
            }
        }
        // DFS three-color cycle check over the parent DAG
        #[derive(Clone, Copy, PartialEq)]
        enum Color {
            White,
            Grey,
            Black,
        }
        fn visit<'a>(
            c: &'a str,
            parents: &'a BTreeMap<String, BTreeSet<String>>,
            color: &mut BTreeMap<&'a str, Color>,
            out: &mut Vec<Diagnostic>,
        ) {
            color.insert(c, Color::Grey);
            if let Some(ps) = parents.get(c) {
                for p in ps {
                    match color.get(p.as_str()).copied() {
                        Some(Color::White) | None => visit(p, parents, color, out),
                        Some(Color::Grey) => out.push(diag(
                            DiagnosticKind::Cycle,
                            format!("concept taxonomy is cyclic at `{p}`"),
                        )),
                        Some(Color::Black) => {}
                    }
                }
            }
            color.insert(c, Color::Black);
        }
        let mut color: BTreeMap<&str, Color> = self
            .parents
            .keys()
            .map(|k| (k.as_str(), Color::White))
            .collect();
        let names: Vec<&str> = self.parents.keys().map(|s| s.as_str()).collect();
        for name in names {
            if color.get(name) == Some(&Color::White) {
                visit(name, &self.parents, &mut color, &mut out);
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

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
        cs.add_role("hasPart");
        cs.add_cic("Computer", "hasPart", "Harddisk");
        cs
    }

    #[test]
    fn subclass_closure() {
        let h = classes();
        assert!(h.subsumes_class("Substantive", "Noun").unwrap());
        assert!(h.subsumes_class("Substantive", "WordActor").unwrap());
        assert!(h.subsumes_class("Preposition", "Preposition").unwrap());
        assert!(!h.subsumes_class("Preposition", "Noun").unwrap());
        assert_eq!(
            h.subsumes_class("Nope", "Noun"),
            Err(NameError::UnknownClass("Nope".into()))
        );
    }

    #[test]
    fn permit_closes_cic_downward() {
        let cs = concepts();
        assert!(cs.permit("Computer", "hasPart", "Harddisk").unwrap());
        assert!(cs.permit("Notebook", "hasPart", "Harddisk").unwrap());
        assert!(!cs.permit("Harddisk", "hasPart", "Computer").unwrap());
        assert_eq!(
            cs.permit("Computer", "nope", "Harddisk"),
            Err(NameError::UnknownRole("nope".into()))
        );
    }

    #[test]
    fn roles_permitting_filters_domain() {
        let mut cs = concepts();
        cs.add_role("HasPrice");
        let domain: BTreeSet<String> = ["hasPart", "HasPrice"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let roles = cs
            .roles_permitting("Notebook", "Harddisk", &domain)
            .unwrap();
        assert_eq!(
            roles.into_iter().collect::<Vec<_>>(),
            vec!["hasPart".to_string()]
        );
        assert!(cs
            .roles_permitting("Notebook", "Harddisk", &BTreeSet::new())
            .unwrap()
            .is_empty());
        let mut empty_cic = ConceptSystem::new();
        empty_cic.add_concept("A", Vec::<String>::new());
        empty_cic.add_role("r");
        let all: BTreeSet<String> = ["r".to_string()].into_iter().collect();
        assert!(empty_cic
            .roles_permitting("A", "A", &all)
            .unwrap()
            .is_empty());
    }

    #[test]
    fn validation_reports_cycles_and_dangling_names() {
        let h = classes();
        assert!(h.validate().is_empty());

        let mut cyc = ClassHierarchy::new();
        cyc.add_class("A", Some("B".into()));
        cyc.add_class("B", Some("A".into()));
        let diags = cyc.validate();
        assert!(diags.iter().any(|d| d.kind == DiagnosticKind::Cycle));

        let mut cs = concepts();
        cs.add_cic("Computer", "undeclaredRole", "Harddisk");
        let diags = cs.validate();
        assert!(diags.iter().any(
            |d| d.kind == DiagnosticKind::DanglingName && d.message.contains("undeclaredRole")
        ));

        let mut ccyc = ConceptSystem::new();
        ccyc.add_concept("X", vec!["Y"]);
        ccyc.add_concept("Y", vec!["X"]);
        assert!(ccyc
            .validate()
            .iter()
            .any(|d| d.kind == DiagnosticKind::Cycle));
    }
}
