//! Brute-force enumeration of every valid analysis of a sentence under a
//! grammar bundle: all lexeme choices, all projective single-root labeled
//! trees, filtered by whole-tree validity. Exponential and proud of it —
//! this is the ground truth the message protocol is checked against, for
//! inputs of up to about eight words.

use std::collections::BTreeMap;
use std::sync::Arc;

use thiserror::Error;

use crate::features::{expand, extract, render_fs, unify, FeatureStructure, SELF_LABEL};
use crate::grammar::{GrammarBundle, LexemeEntry};
use crate::protocol::arcs_projective;
use crate::satisfies::CandidateView;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("unknown form `{0}`")]
    UnknownForm(String),
    #[error("empty input")]
    EmptyInput,
}

/// One complete analysis: labeled arcs, the lexeme chosen per token, and
/// every word's final feature structure after all attachments.
#[derive(Debug, Clone)]
pub struct OracleTree {
    pub arcs: Vec<(u32, u32, String)>,
    pub entry_choice: Vec<usize>,
    pub features: BTreeMap<u32, FeatureStructure>,
    pub root: u32,
}

impl OracleTree {
    /// Must match `HarvestedReading::fingerprint` so reading sets can be
    /// compared across the two routes.
    pub fn fingerprint(&self) -> String {
        let mut arcs: Vec<String> = self
            .arcs
            .iter()
            .map(|(h, m, n)| format!("{h}-{m}-{n}"))
            .collect();
        arcs.sort();
        let feats: Vec<String> = self
            .features
            .iter()
            .map(|(p, f)| format!("{p}:{}", render_fs(f)))
            .collect();
        format!("arcs[{}] feats[{}]", arcs.join(","), feats.join(";"))
    }
}

/// All projective single-root labeled dependency trees over all lexeme
/// choices that the bundle validates.
pub fn enumerate(
    bundle: &GrammarBundle,
    tokens: &[String],
) -> Result<Vec<OracleTree>, OracleError> {
    if tokens.is_empty() {
        return Err(OracleError::EmptyInput);
    }
    let n = tokens.len();
    let mut entry_options: Vec<Vec<Arc<LexemeEntry>>> = Vec::with_capacity(n);
    for t in tokens {
        let entries = bundle.lookup(t);
        if entries.is_empty() {
            return Err(OracleError::UnknownForm(t.clone()));
        }
        entry_options.push(entries.to_vec());
    }

    let mut out = Vec::new();
    let mut choice = vec![0usize; n];
    loop {
        let entries: Vec<&Arc<LexemeEntry>> = choice
            .iter()
            .enumerate()
            .map(|(i, &c)| &entry_options[i][c])
            .collect();
        enumerate_trees(bundle, &entries, &choice, &mut out);

        // next lexeme choice (odometer)
        let mut i = 0;
        loop {
            if i == n {
                return Ok(out);
            }
            choice[i] += 1;
            if choice[i] < entry_options[i].len() {
                break;
            }
            choice[i] = 0;
            i += 1;
        }
    }
}

fn enumerate_trees(
    bundle: &GrammarBundle,
    entries: &[&Arc<LexemeEntry>],
    choice: &[usize],
    out: &mut Vec<OracleTree>,
) {
    let n = entries.len();
    // heads[i] = 0 means word i+1 is the root
    let mut heads = vec![0u32; n];
    loop {
        if let Some(tree) = try_heads(bundle, entries, choice, &heads) {
            out.extend(tree);
        }
        let mut i = 0;
        loop {
            if i == n {
                return;
            }
            heads[i] += 1;
            if heads[i] as usize <= n {
                break;
            }
            heads[i] = 0;
            i += 1;
        }
    }
}

fn try_heads(
    bundle: &GrammarBundle,
    entries: &[&Arc<LexemeEntry>],
    choice: &[usize],
    heads: &[u32],
) -> Option<Vec<OracleTree>> {
    let n = entries.len();
    // exactly one root, no self-loops
    let mut root = 0u32;
    for (i, &h) in heads.iter().enumerate() {
        let pos = (i + 1) as u32;
        if h == pos {
            return None;
        }
        if h == 0 {
            if root != 0 {
                return None;
            }
            root = pos;
        }
    }
    if root == 0 {
        return None;
    }
    // acyclic: every word reaches the root
    for i in 0..n {
        let mut pos = (i + 1) as u32;
        let mut steps = 0;
        while pos != root {
            pos = heads[(pos - 1) as usize];
            if pos == 0 {
                break;
            }
            steps += 1;
            if steps > n {
                return None;
            }
        }
        if pos != root {
            return None;
        }
    }
    let arcs: Vec<(u32, u32)> = heads
        .iter()
        .enumerate()
        .filter(|(_, &h)| h != 0)
        .map(|(i, &h)| (h, (i + 1) as u32))
        .collect();
    if !arcs_projective(&arcs) {
        return None;
    }

    // label options per arc: valencies passing the class and concept clauses
    let mut name_options: Vec<Vec<&str>> = Vec::with_capacity(arcs.len());
    for (h, m) in &arcs {
        let head_entry = entries[(*h - 1) as usize];
        let mod_entry = entries[(*m - 1) as usize];
        let mut opts = Vec::new();
        for val in &head_entry.valencies {
            let class_ok = bundle
                .classes
                .subsumes_class(&mod_entry.class, &val.class)
                .unwrap_or(false);
            if !class_ok {
                continue;
            }
            let roles = bundle
                .concepts
                .roles_permitting(&head_entry.concept, &mod_entry.concept, &val.domain)
                .unwrap_or_default();
            if roles.is_empty() {
                continue;
            }
            opts.push(val.name.as_str());
        }
        if opts.is_empty() {
            return None;
        }
        name_options.push(opts);
    }

    // every assignment of names, one filler per name per head
    let mut results = Vec::new();
    let mut pick = vec![0usize; arcs.len()];
    'assignments: loop {
        let labeled: Vec<(u32, u32, String)> = arcs
            .iter()
            .enumerate()
            .map(|(i, (h, m))| (*h, *m, name_options[i][pick[i]].to_string()))
            .collect();
        let mut per_head: BTreeMap<(u32, &str), u32> = BTreeMap::new();
        let mut unique = true;
        for (h, _, name) in &labeled {
            if per_head.insert((*h, name.as_str()), 1).is_some() {
                unique = false;
                break;
            }
        }
        if unique {
            if let Some(features) = tree_valid(bundle, entries, &labeled) {
                results.push(OracleTree {
                    arcs: labeled,
                    entry_choice: choice.to_vec(),
                    features,
                    root,
                });
            }
        }
        // odometer over name picks
        let mut i = 0;
        loop {
            if i == arcs.len() {
                break 'assignments;
            }
            pick[i] += 1;
            if pick[i] < name_options[i].len() {
                break;
            }
            pick[i] = 0;
            i += 1;
        }
    }
    if results.is_empty() {
        None
    } else {
        Some(results)
    }
}

/// Whole-tree validity: per-head order admissibility and bottom-free
/// cumulative feature folding in attachment order. Returns every word's
/// final features when valid.
pub fn tree_valid(
    _bundle: &GrammarBundle,
    entries: &[&Arc<LexemeEntry>],
    arcs: &[(u32, u32, String)],
) -> Option<BTreeMap<u32, FeatureStructure>> {
    let n = entries.len();

    // (a) order clause, lifted: for each head some single order tuple must
    // arrange all its occupied names (self included) in strictly increasing
    // text position; unoccupied names are free.
    for h in 1..=n as u32 {
        let entry = entries[(h - 1) as usize];
        let mods: Vec<(&str, u32)> = arcs
            .iter()
            .filter(|(hh, _, _)| *hh == h)
            .map(|(_, m, name)| (name.as_str(), *m))
            .collect();
        if mods.is_empty() {
            continue;
        }
        let mut admissible = false;
        'tuples: for tuple in &entry.order {
            for (name, _) in &mods {
                if !tuple.0.iter().any(|d| d == name) {
                    continue 'tuples;
                }
            }
            let mut last = 0u32;
            for d in &tuple.0 {
                let occ = if d == SELF_LABEL {
                    Some(h)
                } else {
                    mods.iter().find(|(name, _)| name == d).map(|(_, m)| *m)
                };
                if let Some(p) = occ {
                    if p <= last {
                        continue 'tuples;
                    }
                    last = p;
                }
            }
            admissible = true;
            break;
        }
        if !admissible {
            return None;
        }
    }

    // (b) cumulative feature folding in canonical attachment order: an arc
    // attaches when its later word is scanned, probe arcs first
    let mut order: Vec<&(u32, u32, String)> = arcs.iter().collect();
    order.sort_by_key(|(h, m, _)| (*h.max(m), *h.min(m)));

    let mut feats: BTreeMap<u32, FeatureStructure> = (1..=n as u32)
        .map(|p| (p, entries[(p - 1) as usize].features.clone()))
        .collect();
    for (h, m, name) in order {
        let head_entry = entries[(*h - 1) as usize];
        let val = head_entry.valencies.iter().find(|v| &v.name == name)?;
        let mod_core = extract(&feats[m], SELF_LABEL);
        let r = unify(&unify(&expand(name, &mod_core), &val.features), &feats[h]);
        if r.is_bottom() {
            return None;
        }
        let head_feats = extract(&r, name);
        let mod_update = unify(&feats[m], &expand(SELF_LABEL, &head_feats));
        if mod_update.is_bottom() {
            return None;
        }
        feats.insert(*h, r);
        feats.insert(*m, mod_update);
    }
    Some(feats)
}

/// The order clause evaluated incrementally, arc by arc in attachment
/// order, exactly as the protocol would. Used to cross-check the lifted
/// clause in `tree_valid`.
pub fn order_valid_incremental(entries: &[&Arc<LexemeEntry>], arcs: &[(u32, u32, String)]) -> bool {
    use crate::satisfies::check_order;
    let mut order: Vec<&(u32, u32, String)> = arcs.iter().collect();
    order.sort_by_key(|(h, m, _)| (*h.max(m), *h.min(m)));
    let mut occurs: BTreeMap<u32, BTreeMap<String, u32>> = BTreeMap::new();
    for (i, e) in entries.iter().enumerate() {
        occurs.insert((i + 1) as u32, e.initial_occurs((i + 1) as u32));
    }
    for (h, m, name) in order {
        let head_entry = entries[(*h - 1) as usize];
        let Some(val) = head_entry.valencies.iter().find(|v| &v.name == name) else {
            return false;
        };
        let head_view = CandidateView {
            order: head_entry.order.clone(),
            occurs: occurs[h].clone(),
            position: *h,
            ..Default::default()
        };
        let mod_view = CandidateView {
            position: *m,
            ..Default::default()
        };
        if occurs[h].get(name).copied().unwrap_or(0) != 0 {
            return false;
        }
        match check_order(&mod_view, val, &head_view) {
            Ok(true) => {}
            _ => return false,
        }
        occurs.get_mut(h).unwrap().insert(name.clone(), *m);
    }
    true
}
