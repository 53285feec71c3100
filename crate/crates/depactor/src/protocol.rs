//! The word-actor script: head search, offer negotiation, receipt
//! bookkeeping, ambiguity duplication, and the scan controller.
//!
//! Protocol outline, per newly scanned word `w` at position `n`:
//!
//! - `w` departs a `searchHead` message toward its left neighbor. On each
//!   delivery the runtime forwards a copy along the structure built so far:
//!   a governed receiver forwards to its head (climbing the right spine of
//!   its fragment), an ungoverned receiver forwards to the word just left of
//!   its subtree (crossing into the previous fragment). Every receiver
//!   checks its open valencies against `w` and answers with `headFound`
//!   offers or a receipt naming the actors it forwarded to.
//! - The controller directs every ungoverned root left of `n` to send `w` a
//!   direct `rightAttach` probe; `w` answers with offers the same way.
//! - A modifier accepts its first offer (`headAccepted`, which doubles as
//!   the implicit receipt closing the offerer's reception task) and treats
//!   every later offer as an ambiguity: the reading is forked, the affected
//!   actors copy themselves into the new reading via `copyStructure` and
//!   `duplicateStructure`, and the offer is re-issued to the ungoverned
//!   copy. When the reading cap forbids forking, the offer is answered with
//!   `headRejected` so receipt bookkeeping still closes.
//!
//! Heads mutate no state when offering: the computed feature result is
//! parked as a pending offer and applied only when `headAccepted` arrives,
//! so readings forked in between never observe a half-committed arc.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{expand, extract, render_fs, unify, FeatureStructure, SELF_LABEL};
use crate::grammar::{GrammarBundle, LexemeEntry};
use crate::runtime::{
    Actor, ActorId, Condition, Ctx, DistributeClause, Driver, Envelope, Message, Mode, MsgDef,
    Outcome, Outgoing, ReadingId, RunReport, Runtime, SysCtx, TaskId, SYSTEM,
};
use crate::satisfies::{satisfies, CandidateView};

// ---------------------------------------------------------------------------
// Messages
// ---------------------------------------------------------------------------

/// Immutable snapshot of a candidate modifier, carried inside head-search
/// messages so receivers can evaluate admissibility locally.
#[derive(Debug, Clone)]
pub struct ModifierView {
    pub class: String,
    pub features: FeatureStructure,
    pub concept: String,
    pub position: u32,
}

/// The arc whose alternative triggered a fork; the new reading excludes it.
#[derive(Debug, Clone)]
pub struct Contested {
    pub head: ActorId,
    pub head_pos: u32,
    pub modifier: ActorId,
    pub mod_pos: u32,
    pub name: String,
}

/// Everything an actor needs to copy itself into a forked reading.
#[derive(Debug)]
pub struct ForkSpec {
    pub new_reading: ReadingId,
    pub ref_map: BTreeMap<ActorId, ActorId>,
    pub contested: Option<Contested>,
    /// When set, copy handlers forward `copyStructure` to their dependents;
    /// scan-time forks copy every member directly instead.
    pub cascade: bool,
}

/// Data the prospective head needs to re-issue the contested offer inside
/// the forked reading.
#[derive(Debug, Clone)]
pub struct Reissue {
    /// The original offer being moved into the fork.
    pub offer_task: TaskId,
    /// Reception task awaiting the fork-side resolution receipt.
    pub episode_task: TaskId,
}

#[derive(Clone)]
pub enum Msg {
    StartUp {
        left_neighbor: Option<ActorId>,
    },
    ProbeRight {
        target: ActorId,
    },
    SearchHead {
        view: ModifierView,
    },
    RightAttach {
        view: ModifierView,
    },
    HeadFound {
        name: String,
        head_feats: FeatureStructure,
        head_pos: u32,
    },
    HeadAccepted {
        name: String,
        mod_pos: u32,
        mod_subtree_min: u32,
        mod_fln: Option<ActorId>,
    },
    HeadRejected,
    Receipt {
        forwarded: Vec<ActorId>,
    },
    CopyStructure {
        fork: Arc<ForkSpec>,
    },
    DuplicateStructure {
        fork: Arc<ForkSpec>,
        chain_from: Option<ActorId>,
        reissue: Option<Reissue>,
    },
}

impl Message for Msg {
    fn kind(&self) -> &'static str {
        match self {
            Msg::StartUp { .. } => "startUp",
            Msg::ProbeRight { .. } => "probeRight",
            Msg::SearchHead { .. } => "searchHead",
            Msg::RightAttach { .. } => "rightAttach",
            Msg::HeadFound { .. } => "headFound",
            Msg::HeadAccepted { .. } => "headAccepted",
            Msg::HeadRejected => "headRejected",
            Msg::Receipt { .. } => "receipt",
            Msg::CopyStructure { .. } => "copyStructure",
            Msg::DuplicateStructure { .. } => "duplicateStructure",
        }
    }

    fn digest(&self) -> String {
        match self {
            Msg::StartUp { left_neighbor } => match left_neighbor {
                Some(ln) => format!("left={ln}"),
                None => "left=-".into(),
            },
            Msg::ProbeRight { target } => format!("target={target}"),
            Msg::SearchHead { view } | Msg::RightAttach { view } => {
                format!("pos={} feats={}", view.position, render_fs(&view.features))
            }
            Msg::HeadFound {
                name,
                head_feats,
                head_pos,
            } => {
                format!(
                    "name={name} headPos={head_pos} headFeats={}",
                    render_fs(head_feats)
                )
            }
            Msg::HeadAccepted { name, mod_pos, .. } => format!("name={name} modPos={mod_pos}"),
            Msg::HeadRejected => String::new(),
            Msg::Receipt { forwarded } => format!(
                "fwd=[{}]",
                forwarded
                    .iter()
                    .map(|a| a.to_string())
                    .collect::<Vec<_>>()
                    .join(",")
            ),
            Msg::CopyStructure { fork } => format!("into={}", fork.new_reading),
            Msg::DuplicateStructure { fork, reissue, .. } => format!(
                "into={}{}",
                fork.new_reading,
                if reissue.is_some() { " reissue" } else { "" }
            ),
        }
    }
}

/// Continuation notes delivered when reception tasks fire; the scan is
/// driven by quiescence, so these are bookkeeping only.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Note {
    SearchSettled { position: u32 },
    ProbeSettled { position: u32 },
    OfferSettled,
    ForkSettled,
}

// ---------------------------------------------------------------------------
// Word actor state
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
struct DepRecord {
    name: String,
    modifier: ActorId,
    mod_pos: u32,
    mod_subtree_min: u32,
    mod_fln: Option<ActorId>,
    /// The `[name: modifier-core] ⊓ valency.features` piece, kept so copies
    /// can refold their features without the excluded arc.
    contrib: FeatureStructure,
}

#[derive(Debug, Clone)]
struct PendingOffer {
    name: String,
    /// Head features after this attachment; applied on acceptance.
    result: FeatureStructure,
    contrib: FeatureStructure,
    duty: u64,
}

/// An obligation to receipt the initiator of a reception message once all
/// offers emitted while processing it are resolved.
#[derive(Debug, Clone)]
struct ReceiptDuty {
    key: u64,
    task: TaskId,
    initiator: ActorId,
    forwarded: Vec<ActorId>,
    open_offers: usize,
}

pub struct WordActor {
    id: ActorId,
    reading: ReadingId,
    position: u32,
    bundle: Arc<GrammarBundle>,
    entry: Arc<LexemeEntry>,
    head: Option<ActorId>,
    head_name: Option<String>,
    head_contrib: Option<FeatureStructure>,
    deps: Vec<DepRecord>,
    feats: FeatureStructure,
    occurs: BTreeMap<String, u32>,
    subtree_min: u32,
    left_neighbor: Option<ActorId>,
    fragment_left_neighbor: Option<ActorId>,
    pending_offers: BTreeMap<TaskId, PendingOffer>,
    duties: Vec<ReceiptDuty>,
    seen_tasks: BTreeSet<TaskId>,
    next_duty: u64,
}

impl WordActor {
    pub fn new(
        id: ActorId,
        reading: ReadingId,
        position: u32,
        bundle: Arc<GrammarBundle>,
        entry: Arc<LexemeEntry>,
        left_neighbor: Option<ActorId>,
    ) -> Self {
        let occurs = entry.initial_occurs(position);
        let feats = entry.features.clone();
        WordActor {
            id,
            reading,
            position,
            bundle,
            entry,
            head: None,
            head_name: None,
            head_contrib: None,
            deps: Vec::new(),
            feats,
            occurs,
            subtree_min: position,
            left_neighbor,
            fragment_left_neighbor: left_neighbor,
            pending_offers: BTreeMap::new(),
            duties: Vec::new(),
            seen_tasks: BTreeSet::new(),
            next_duty: 1,
        }
    }

    pub fn features(&self) -> &FeatureStructure {
        &self.feats
    }

    pub fn occurs(&self) -> &BTreeMap<String, u32> {
        &self.occurs
    }

    pub fn position(&self) -> u32 {
        self.position
    }

    pub fn form(&self) -> &str {
        &self.entry.form
    }

    pub fn is_governed(&self) -> bool {
        self.head.is_some()
    }

    fn modifier_view(&self) -> ModifierView {
        ModifierView {
            class: self.entry.class.clone(),
            features: self.feats.clone(),
            concept: self.entry.concept.clone(),
            position: self.position,
        }
    }

    fn head_view(&self) -> CandidateView {
        CandidateView {
            class: self.entry.class.clone(),
            features: self.feats.clone(),
            concept: self.entry.concept.clone(),
            position: self.position,
            order: self.entry.order.clone(),
            occurs: self.occurs.clone(),
        }
    }

    fn state_digest(&self) -> String {
        format!(
            "head={} deps={} feats={}",
            self.head
                .map(|h| h.to_string())
                .unwrap_or_else(|| "-".into()),
            self.deps.len(),
            render_fs(&self.feats)
        )
    }

    /// Checks every open valency of this actor against the candidate
    /// modifier, departing one `headFound` per satisfied valency. When no
    /// offer goes out the initiator is receipted immediately; otherwise the
    /// receipt is deferred until every offer is resolved.
    fn offer_phase(
        &mut self,
        ctx: &mut Ctx<'_, Self>,
        view: &ModifierView,
        initiator: ActorId,
        task: TaskId,
        forwarded: Vec<ActorId>,
    ) {
        let mod_view = CandidateView {
            class: view.class.clone(),
            features: view.features.clone(),
            concept: view.concept.clone(),
            position: view.position,
            ..Default::default()
        };
        let duty_key = self.next_duty;
        self.next_duty += 1;
        let mut offers = 0usize;
        let head_view = self.head_view();
        for val in &self.entry.valencies {
            if self.occurs.get(&val.name).copied().unwrap_or(0) != 0 {
                continue; // one filler per dependency name
            }
            let outcome = match satisfies(
                &mod_view,
                val,
                &head_view,
                &self.bundle.classes,
                &self.bundle.concepts,
            ) {
                Ok(o) => o,
                Err(e) => {
                    ctx.fault(format!("satisfies error at {}: {e}", self.entry.form));
                    continue;
                }
            };
            if !outcome.holds {
                continue;
            }
            // non-crossing and non-cyclic guards against the reading registry
            {
                let sh = ctx.shared();
                if sh.blocks_arc(self.reading, self.position, view.position) {
                    continue;
                }
            }
            let contrib = unify(
                &expand(&val.name, &extract(&view.features, SELF_LABEL)),
                &val.features,
            );
            let offer_task = ctx.queue_task(
                self.id,
                self.reading,
                initiator,
                format!("headFound:{}@{}", val.name, self.position),
                Note::OfferSettled,
            );
            self.pending_offers.insert(
                offer_task,
                PendingOffer {
                    name: val.name.clone(),
                    result: outcome.head_features.clone(),
                    contrib,
                    duty: duty_key,
                },
            );
            offers += 1;
            ctx.send(Outgoing {
                sender: self.id,
                target: initiator,
                initiator: Some(initiator),
                reading: self.reading,
                task: Some(offer_task),
                payload: Msg::HeadFound {
                    name: val.name.clone(),
                    head_feats: extract(&outcome.head_features, &val.name),
                    head_pos: self.position,
                },
            });
        }
        if offers == 0 {
            ctx.send(Outgoing {
                sender: self.id,
                target: initiator,
                initiator: Some(initiator),
                reading: self.reading,
                task: Some(task),
                payload: Msg::Receipt { forwarded },
            });
        } else {
            self.duties.push(ReceiptDuty {
                key: duty_key,
                task,
                initiator,
                forwarded,
                open_offers: offers,
            });
        }
    }

    /// One offer of the duty resolved; emits the deferred receipt when the
    /// last one closes.
    fn resolve_offer_duty(&mut self, ctx: &mut Ctx<'_, Self>, duty_key: u64) {
        let Some(idx) = self.duties.iter().position(|d| d.key == duty_key) else {
            return;
        };
        self.duties[idx].open_offers -= 1;
        if self.duties[idx].open_offers == 0 {
            let duty = self.duties.swap_remove(idx);
            ctx.send(Outgoing {
                sender: self.id,
                target: duty.initiator,
                initiator: Some(duty.initiator),
                reading: self.reading,
                task: Some(duty.task),
                payload: Msg::Receipt {
                    forwarded: duty.forwarded,
                },
            });
        }
    }

    /// Copy of this actor for a forked reading. When this actor heads the
    /// contested arc, that dependent is dropped and the features refolded
    /// from the per-arc contributions; the modifier side instead passes
    /// `ungoverned` to shed its head. Returns the copy plus a flag marking
    /// any acquaintance the fork's id map does not cover — a reference that
    /// would leak across readings and must fault the run.
    fn make_copy(&self, fork: &ForkSpec, ungoverned: bool) -> (WordActor, bool) {
        let missed = std::cell::Cell::new(false);
        let map = |id: ActorId| {
            fork.ref_map.get(&id).copied().unwrap_or_else(|| {
                missed.set(true);
                id
            })
        };
        let excluded = fork
            .contested
            .as_ref()
            .filter(|c| c.head == self.id)
            .map(|c| c.modifier);
        let deps: Vec<DepRecord> = self
            .deps
            .iter()
            .filter(|d| Some(d.modifier) != excluded)
            .map(|d| DepRecord {
                name: d.name.clone(),
                modifier: map(d.modifier),
                mod_pos: d.mod_pos,
                mod_subtree_min: d.mod_subtree_min,
                mod_fln: d.mod_fln.map(map),
                contrib: d.contrib.clone(),
            })
            .collect();
        let keep_head = !ungoverned && self.head.is_some();
        // refold features from the lexeme plus the surviving contributions
        let mut feats = self.entry.features.clone();
        for d in &deps {
            feats = unify(&feats, &d.contrib);
        }
        if keep_head {
            if let Some(hc) = &self.head_contrib {
                feats = unify(&feats, hc);
            }
        }
        let mut occurs = self.entry.initial_occurs(self.position);
        for d in &deps {
            occurs.insert(d.name.clone(), d.mod_pos);
        }
        let mut subtree_min = self.position;
        let mut fln = self.left_neighbor.map(map);
        for d in &deps {
            if d.mod_subtree_min < subtree_min {
                subtree_min = d.mod_subtree_min;
                fln = d.mod_fln;
            }
        }
        let copy = WordActor {
            id: map(self.id),
            reading: fork.new_reading,
            position: self.position,
            bundle: Arc::clone(&self.bundle),
            entry: Arc::clone(&self.entry),
            head: if keep_head { self.head.map(map) } else { None },
            head_name: if keep_head {
                self.head_name.clone()
            } else {
                None
            },
            head_contrib: if keep_head {
                self.head_contrib.clone()
            } else {
                None
            },
            deps,
            feats,
            occurs,
            subtree_min,
            left_neighbor: self.left_neighbor.map(map),
            fragment_left_neighbor: fln,
            pending_offers: BTreeMap::new(),
            duties: Vec::new(),
            seen_tasks: BTreeSet::new(),
            next_duty: 1,
        };
        (copy, missed.get())
    }

    /// Second (or later) head offer: fork the reading. The current head arc
    /// is contested — the fork excludes it — and the new offer is re-issued
    /// by the prospective head's copy to this actor's ungoverned copy.
    fn duplicate(&mut self, ctx: &mut Ctx<'_, Self>, offerer: ActorId, offer_task: TaskId) {
        let contested = Contested {
            head: self.head.unwrap(),
            head_pos: 0, // filled from the registry while planning
            modifier: self.id,
            mod_pos: self.position,
            name: self.head_name.clone().unwrap(),
        };
        let plan = {
            let member_count = ctx.shared().member_count(self.reading);
            let mut ids = Vec::with_capacity(member_count);
            for _ in 0..member_count {
                ids.push(ctx.allocate_actor());
            }
            let mut sh = ctx.shared();
            sh.plan_fork(self.reading, contested, offerer, ids)
        };
        let Some(plan) = plan else {
            // reading cap reached: refuse the alternative instead of forking
            ctx.shared().note_capped();
            ctx.send(Outgoing {
                sender: self.id,
                target: offerer,
                initiator: Some(self.id),
                reading: self.reading,
                task: Some(offer_task),
                payload: Msg::HeadRejected,
            });
            return;
        };
        let fork = Arc::clone(&plan.fork);
        let m_copy = fork.ref_map[&self.id];
        let h2_copy = fork.ref_map[&offerer];
        let episode_task = ctx.queue_task(
            m_copy,
            fork.new_reading,
            h2_copy,
            format!("fork@{}", self.position),
            Note::ForkSettled,
        );
        let (my_copy, missed) = self.make_copy(&fork, true);
        if missed {
            ctx.fault(format!("fork id map does not cover an acquaintance of {}", self.id));
            return;
        }
        ctx.spawn_at(m_copy, my_copy, "wordActor", format!("copy of {}", self.id));
        for dep in &self.deps {
            ctx.send(Outgoing {
                sender: self.id,
                target: dep.modifier,
                initiator: None,
                reading: fork.new_reading,
                task: None,
                payload: Msg::CopyStructure {
                    fork: Arc::clone(&fork),
                },
            });
        }
        for root in &plan.other_roots {
            ctx.send(Outgoing {
                sender: self.id,
                target: *root,
                initiator: None,
                reading: fork.new_reading,
                task: None,
                payload: Msg::CopyStructure {
                    fork: Arc::clone(&fork),
                },
            });
        }
        ctx.send(Outgoing {
            sender: self.id,
            target: offerer,
            initiator: None,
            reading: fork.new_reading,
            task: None,
            payload: Msg::DuplicateStructure {
                fork,
                chain_from: None,
                reissue: Some(Reissue {
                    offer_task,
                    episode_task,
                }),
            },
        });
    }

    fn handle_copy(
        &mut self,
        ctx: &mut Ctx<'_, Self>,
        fork: &Arc<ForkSpec>,
        chain: Option<(Option<ActorId>, Option<Reissue>)>,
    ) {
        let is_duplicate_chain = chain.is_some();
        let (mut copy, missed) = self.make_copy(fork, false);
        if missed {
            ctx.fault(format!("fork id map does not cover an acquaintance of {}", self.id));
            return;
        }
        let copy_id = copy.id;
        let (chain_from, reissue) = chain.unwrap_or((None, None));

        if let Some(reissue) = &reissue {
            // move the contested offer into the fork: consume it here, close
            // this side's bookkeeping, and let the copy re-issue it
            let Some(pending) = self.pending_offers.remove(&reissue.offer_task) else {
                ctx.fault(format!(
                    "duplicateStructure without matching offer at {}",
                    self.id
                ));
                return;
            };
            let modifier = fork
                .contested
                .as_ref()
                .map(|c| c.modifier)
                .unwrap_or(SYSTEM);
            let m_copy = fork.ref_map.get(&modifier).copied().unwrap_or(modifier);
            self.resolve_offer_duty(ctx, pending.duty);
            ctx.record_receipt(reissue.offer_task, modifier, &[]);

            let new_offer = ctx.queue_task(
                copy_id,
                fork.new_reading,
                m_copy,
                format!("headFound:{}@{} (reissued)", pending.name, self.position),
                Note::OfferSettled,
            );
            let duty_key = copy.next_duty;
            copy.next_duty += 1;
            copy.pending_offers.insert(
                new_offer,
                PendingOffer {
                    name: pending.name.clone(),
                    result: pending.result.clone(),
                    contrib: pending.contrib.clone(),
                    duty: duty_key,
                },
            );
            copy.duties.push(ReceiptDuty {
                key: duty_key,
                task: reissue.episode_task,
                initiator: m_copy,
                forwarded: Vec::new(),
                open_offers: 1,
            });
            ctx.send(Outgoing {
                sender: copy_id,
                target: m_copy,
                initiator: Some(m_copy),
                reading: fork.new_reading,
                task: Some(new_offer),
                payload: Msg::HeadFound {
                    name: pending.name.clone(),
                    head_feats: extract(&pending.result, &pending.name),
                    head_pos: self.position,
                },
            });
        }

        ctx.spawn_at(copy_id, copy, "wordActor", format!("copy of {}", self.id));

        if fork.cascade {
            let excluded = fork
                .contested
                .as_ref()
                .filter(|c| c.head == self.id)
                .map(|c| c.modifier);
            for dep in &self.deps {
                if Some(dep.modifier) == excluded || Some(dep.modifier) == chain_from {
                    continue;
                }
                ctx.send(Outgoing {
                    sender: self.id,
                    target: dep.modifier,
                    initiator: None,
                    reading: fork.new_reading,
                    task: None,
                    payload: Msg::CopyStructure {
                        fork: Arc::clone(fork),
                    },
                });
            }
        }
        if is_duplicate_chain {
            if let Some(head) = self.head {
                ctx.send(Outgoing {
                    sender: self.id,
                    target: head,
                    initiator: None,
                    reading: fork.new_reading,
                    task: None,
                    payload: Msg::DuplicateStructure {
                        fork: Arc::clone(fork),
                        chain_from: Some(self.id),
                        reissue: None,
                    },
                });
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Actor implementation
// ---------------------------------------------------------------------------

fn unseen(a: &WordActor, env: &Envelope<Msg>) -> bool {
    env.task
        .map(|t| !a.seen_tasks.contains(&t))
        .unwrap_or(false)
}

fn governed_elsewhere_unseen(a: &WordActor, env: &Envelope<Msg>) -> bool {
    match a.head {
        Some(h) => env.initiator != Some(h) && unseen(a, env),
        None => false,
    }
}

/// An ungoverned receiver relays the search into the fragment to its left.
/// A receiver governed by the search's own initiator (a root it probe-
/// attached earlier in this episode) does the same: bouncing the message
/// back to the initiator would stall the walk, and everything between this
/// word's subtree and the initiator already belongs to the initiator.
fn continues_left_unseen(a: &WordActor, env: &Envelope<Msg>) -> bool {
    match a.head {
        Some(h) => env.initiator == Some(h) && unseen(a, env),
        None => unseen(a, env),
    }
}

fn to_head(a: &WordActor, _env: &Envelope<Msg>) -> Option<ActorId> {
    a.head
}

fn to_fragment_left(a: &WordActor, _env: &Envelope<Msg>) -> Option<ActorId> {
    a.fragment_left_neighbor
}

fn always(_: &WordActor, _: &Envelope<Msg>) -> bool {
    true
}

/// The message definition table. `searchHead` is the one complex message:
/// it is forwarded along the fringe before the receiver computes. All other
/// kinds are direct.
pub fn message_defs() -> Vec<MsgDef<WordActor>> {
    vec![MsgDef {
        kind: "searchHead",
        pre_distribute: vec![
            DistributeClause {
                condition: governed_elsewhere_unseen as Condition<WordActor>,
                tag: "head",
                resolve: to_head,
            },
            DistributeClause {
                condition: continues_left_unseen as Condition<WordActor>,
                tag: "fragmentLeft",
                resolve: to_fragment_left,
            },
        ],
        compute: vec![always as Condition<WordActor>],
        post_distribute: vec![],
    }]
}

impl Actor for WordActor {
    type Msg = Msg;
    type Shared = Controller;
    type Note = Note;

    fn on_message(&mut self, ctx: &mut Ctx<'_, Self>, env: &Envelope<Msg>) {
        match &env.payload {
            Msg::StartUp { left_neighbor } => {
                // neighbors are fixed at construction; an episode may already
                // have mutated fragment bookkeeping before this arrives
                if let Some(ln) = left_neighbor {
                    let task = ctx.queue_task(
                        self.id,
                        self.reading,
                        *ln,
                        format!("searchHead@{}", self.position),
                        Note::SearchSettled {
                            position: self.position,
                        },
                    );
                    ctx.send(Outgoing {
                        sender: self.id,
                        target: *ln,
                        initiator: Some(self.id),
                        reading: self.reading,
                        task: Some(task),
                        payload: Msg::SearchHead {
                            view: self.modifier_view(),
                        },
                    });
                }
            }

            Msg::ProbeRight { target } => {
                if self.head.is_some() {
                    return; // attached since the directive was issued
                }
                let task = ctx.queue_task(
                    self.id,
                    self.reading,
                    *target,
                    format!("rightAttach@{}", self.position),
                    Note::ProbeSettled {
                        position: self.position,
                    },
                );
                ctx.send(Outgoing {
                    sender: self.id,
                    target: *target,
                    initiator: Some(self.id),
                    reading: self.reading,
                    task: Some(task),
                    payload: Msg::RightAttach {
                        view: self.modifier_view(),
                    },
                });
            }

            Msg::SearchHead { view } => {
                let task = match env.task {
                    Some(t) => t,
                    None => {
                        ctx.fault("searchHead without reception task");
                        return;
                    }
                };
                let initiator = env.initiator.unwrap_or(env.sender);
                let first_visit = self.seen_tasks.insert(task);
                let forwarded = ctx.forwarded().to_vec();
                if !first_visit || initiator == self.id {
                    // repeat visit, or the search came back to its own
                    // initiator: nothing to check, close the branch
                    ctx.send(Outgoing {
                        sender: self.id,
                        target: initiator,
                        initiator: Some(initiator),
                        reading: self.reading,
                        task: Some(task),
                        payload: Msg::Receipt { forwarded },
                    });
                    return;
                }
                self.offer_phase(ctx, view, initiator, task, forwarded);
            }

            Msg::RightAttach { view } => {
                let task = match env.task {
                    Some(t) => t,
                    None => {
                        ctx.fault("rightAttach without reception task");
                        return;
                    }
                };
                let initiator = env.initiator.unwrap_or(env.sender);
                // probes are direct messages: nothing was forwarded
                self.offer_phase(ctx, view, initiator, task, Vec::new());
            }

            Msg::HeadFound {
                name,
                head_feats,
                head_pos,
            } => {
                let offer_task = match env.task {
                    Some(t) => t,
                    None => {
                        ctx.fault("headFound without offer task");
                        return;
                    }
                };
                if self.head.is_none() {
                    // first offer in this reading: commit the arc atomically
                    // against the registry (crossing and cycle guarded)
                    let committed =
                        ctx.shared()
                            .try_commit_arc(self.reading, *head_pos, self.position, name);
                    if committed {
                        self.head = Some(env.sender);
                        self.head_name = Some(name.clone());
                        let hc = expand(SELF_LABEL, head_feats);
                        let new_feats = unify(&self.feats, &hc);
                        if new_feats.is_bottom() {
                            ctx.shared()
                                .retract_arc(self.reading, *head_pos, self.position);
                            self.head = None;
                            self.head_name = None;
                            ctx.send(Outgoing {
                                sender: self.id,
                                target: env.sender,
                                initiator: Some(self.id),
                                reading: self.reading,
                                task: Some(offer_task),
                                payload: Msg::HeadRejected,
                            });
                            return;
                        }
                        self.head_contrib = Some(hc);
                        self.feats = new_feats;
                        ctx.trace_become(self.state_digest());
                        ctx.send(Outgoing {
                            sender: self.id,
                            target: env.sender,
                            initiator: Some(self.id),
                            reading: self.reading,
                            task: Some(offer_task),
                            payload: Msg::HeadAccepted {
                                name: name.clone(),
                                mod_pos: self.position,
                                mod_subtree_min: self.subtree_min,
                                mod_fln: self.fragment_left_neighbor,
                            },
                        });
                    } else {
                        ctx.send(Outgoing {
                            sender: self.id,
                            target: env.sender,
                            initiator: Some(self.id),
                            reading: self.reading,
                            task: Some(offer_task),
                            payload: Msg::HeadRejected,
                        });
                    }
                } else {
                    // ambiguity: a second candidate head for a governed word
                    let viable = {
                        let sh = ctx.shared();
                        !sh.blocks_arc_excluding(
                            self.reading,
                            *head_pos,
                            self.position,
                            self.position,
                        )
                    };
                    if viable {
                        self.duplicate(ctx, env.sender, offer_task);
                    } else {
                        ctx.send(Outgoing {
                            sender: self.id,
                            target: env.sender,
                            initiator: Some(self.id),
                            reading: self.reading,
                            task: Some(offer_task),
                            payload: Msg::HeadRejected,
                        });
                    }
                }
            }

            Msg::HeadAccepted {
                name,
                mod_pos,
                mod_subtree_min,
                mod_fln,
            } => {
                let offer_task = match env.task {
                    Some(t) => t,
                    None => {
                        ctx.fault("headAccepted without offer task");
                        return;
                    }
                };
                let Some(pending) = self.pending_offers.remove(&offer_task) else {
                    ctx.fault(format!(
                        "headAccepted for `{name}` not among pending offers of {}",
                        self.id
                    ));
                    return;
                };
                if &pending.name != name {
                    ctx.fault(format!(
                        "headAccepted name `{name}` does not match offered `{}`",
                        pending.name
                    ));
                    return;
                }
                // fold the arc's contribution into the current features, not
                // the offer-time snapshot: other arcs may have landed since
                let folded = unify(&self.feats, &pending.contrib);
                if folded.is_bottom() {
                    ctx.fault(format!(
                        "accepted arc `{name}` is inconsistent with features of {}",
                        self.id
                    ));
                    return;
                }
                self.feats = folded;
                self.deps.push(DepRecord {
                    name: name.clone(),
                    modifier: env.sender,
                    mod_pos: *mod_pos,
                    mod_subtree_min: *mod_subtree_min,
                    mod_fln: *mod_fln,
                    contrib: pending.contrib.clone(),
                });
                self.occurs.insert(name.clone(), *mod_pos);
                if *mod_subtree_min < self.subtree_min {
                    self.subtree_min = *mod_subtree_min;
                    self.fragment_left_neighbor = *mod_fln;
                }
                ctx.trace_become(self.state_digest());
                // the acceptance itself is the implicit receipt for the offer
                ctx.record_receipt(offer_task, env.sender, &[]);
                self.resolve_offer_duty(ctx, pending.duty);
            }

            Msg::HeadRejected => {
                let offer_task = match env.task {
                    Some(t) => t,
                    None => {
                        ctx.fault("headRejected without offer task");
                        return;
                    }
                };
                let Some(pending) = self.pending_offers.remove(&offer_task) else {
                    ctx.fault(format!(
                        "headRejected without matching offer at {}",
                        self.id
                    ));
                    return;
                };
                ctx.record_receipt(offer_task, env.sender, &[]);
                self.resolve_offer_duty(ctx, pending.duty);
            }

            Msg::Receipt { forwarded } => {
                let Some(task) = env.task else {
                    ctx.fault("receipt without reception task");
                    return;
                };
                ctx.record_receipt(task, env.sender, forwarded);
            }

            Msg::CopyStructure { fork } => {
                self.handle_copy(ctx, fork, None);
            }

            Msg::DuplicateStructure {
                fork,
                chain_from,
                reissue,
            } => {
                self.handle_copy(ctx, fork, Some((*chain_from, reissue.clone())));
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Controller: reading registry and scan state
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Default)]
pub struct ReadingState {
    pub actors: BTreeMap<u32, ActorId>,
    pub entry_choice: BTreeMap<u32, usize>,
    pub arcs: Vec<(u32, u32, String)>,
    pub head_of: BTreeMap<u32, u32>,
}

impl ReadingState {
    fn root_of(&self, mut pos: u32) -> u32 {
        while let Some(&h) = self.head_of.get(&pos) {
            pos = h;
        }
        pos
    }

    fn roots(&self) -> Vec<u32> {
        self.actors
            .keys()
            .filter(|p| !self.head_of.contains_key(p))
            .copied()
            .collect()
    }

    /// True iff the proposed arc would cross an existing one. Arcs sharing
    /// an endpoint never cross; staggering must be strict on both sides.
    fn crosses(&self, head: u32, modifier: u32, ignore_mod: Option<u32>) -> bool {
        let (lo, hi) = (head.min(modifier), head.max(modifier));
        self.arcs.iter().any(|(h, m, _)| {
            if Some(*m) == ignore_mod {
                return false;
            }
            let (alo, ahi) = (*h.min(m), *h.max(m));
            (alo < lo && lo < ahi && ahi < hi) || (lo < alo && alo < hi && hi < ahi)
        })
    }

    /// True iff attaching `modifier` under `head` would close a cycle,
    /// i.e. the head already sits inside the modifier's subtree.
    fn cycles(&self, head: u32, modifier: u32, ignore_mod: Option<u32>) -> bool {
        let mut pos = head;
        loop {
            if pos == modifier {
                return true;
            }
            match self.head_of.get(&pos) {
                Some(&h) if Some(pos) != ignore_mod => pos = h,
                Some(_) => return false,
                None => return false,
            }
        }
    }
}

pub struct ForkPlan {
    pub fork: Arc<ForkSpec>,
    /// Roots of fragments untouched by the copy cascades; the forker sends
    /// these a `copyStructure` so the fork is a complete configuration.
    pub other_roots: Vec<ActorId>,
}

pub struct Controller {
    pub bundle: Arc<GrammarBundle>,
    pub tokens: Vec<String>,
    pub max_readings: usize,
    pub readings: BTreeMap<ReadingId, ReadingState>,
    pub next_token: usize,
    pub scan_error: Option<String>,
    pub capped: bool,
    next_reading: u32,
}

impl Controller {
    pub fn new(bundle: Arc<GrammarBundle>, tokens: Vec<String>, max_readings: usize) -> Self {
        Controller {
            bundle,
            tokens,
            max_readings,
            readings: BTreeMap::new(),
            next_token: 0,
            scan_error: None,
            capped: false,
            next_reading: 1,
        }
    }

    pub fn new_reading(&mut self) -> ReadingId {
        let id = ReadingId(self.next_reading);
        self.next_reading += 1;
        self.readings.insert(id, ReadingState::default());
        id
    }

    pub fn member_count(&self, reading: ReadingId) -> usize {
        self.readings
            .get(&reading)
            .map(|r| r.actors.len())
            .unwrap_or(0)
    }

    pub fn note_capped(&mut self) {
        self.capped = true;
    }

    /// Guard used before emitting an offer: would the arc cross an existing
    /// arc or close a cycle in this reading?
    pub fn blocks_arc(&self, reading: ReadingId, head_pos: u32, mod_pos: u32) -> bool {
        let Some(r) = self.readings.get(&reading) else {
            return true;
        };
        r.crosses(head_pos, mod_pos, None) || r.cycles(head_pos, mod_pos, None)
    }

    /// Same guard evaluated as if the modifier's current head arc were
    /// absent — the configuration a fork would inherit.
    pub fn blocks_arc_excluding(
        &self,
        reading: ReadingId,
        head_pos: u32,
        mod_pos: u32,
        excluded_mod: u32,
    ) -> bool {
        let Some(r) = self.readings.get(&reading) else {
            return true;
        };
        r.crosses(head_pos, mod_pos, Some(excluded_mod))
            || r.cycles(head_pos, mod_pos, Some(excluded_mod))
    }

    /// Check-and-register in one step, so two racing acceptances can never
    /// commit conflicting arcs.
    pub fn try_commit_arc(
        &mut self,
        reading: ReadingId,
        head_pos: u32,
        mod_pos: u32,
        name: &str,
    ) -> bool {
        let Some(r) = self.readings.get_mut(&reading) else {
            return false;
        };
        if r.head_of.contains_key(&mod_pos) {
            return false;
        }
        if r.crosses(head_pos, mod_pos, None) || r.cycles(head_pos, mod_pos, None) {
            return false;
        }
        r.arcs.push((head_pos, mod_pos, name.to_string()));
        r.head_of.insert(mod_pos, head_pos);
        true
    }

    pub fn retract_arc(&mut self, reading: ReadingId, head_pos: u32, mod_pos: u32) {
        if let Some(r) = self.readings.get_mut(&reading) {
            r.arcs
                .retain(|(h, m, _)| !(*h == head_pos && *m == mod_pos));
            r.head_of.remove(&mod_pos);
        }
    }

    pub fn register_actor(&mut self, reading: ReadingId, pos: u32, id: ActorId, entry: usize) {
        if let Some(r) = self.readings.get_mut(&reading) {
            r.actors.insert(pos, id);
            r.entry_choice.insert(pos, entry);
        }
    }

    /// Sets up the bookkeeping for a duplication fork: a fresh reading whose
    /// arcs are the old ones minus the contested arc. Returns `None` when
    /// the reading cap is reached.
    pub fn plan_fork(
        &mut self,
        reading: ReadingId,
        mut contested: Contested,
        offerer: ActorId,
        ids: Vec<ActorId>,
    ) -> Option<ForkPlan> {
        if self.readings.len() >= self.max_readings {
            return None;
        }
        let old = self.readings.get(&reading)?.clone();
        contested.head_pos = old.head_of.get(&contested.mod_pos).copied().unwrap_or(0);
        let new_id = self.new_reading();
        let ref_map: BTreeMap<ActorId, ActorId> = old
            .actors
            .values()
            .copied()
            .zip(ids.iter().copied())
            .collect();
        let mut state = ReadingState::default();
        for (pos, old_actor) in &old.actors {
            state.actors.insert(*pos, ref_map[old_actor]);
            if let Some(entry) = old.entry_choice.get(pos) {
                state.entry_choice.insert(*pos, *entry);
            }
        }
        for (h, m, n) in &old.arcs {
            if *m == contested.mod_pos {
                continue;
            }
            state.arcs.push((*h, *m, n.clone()));
            state.head_of.insert(*m, *h);
        }
        self.readings.insert(new_id, state);

        // Fragment roots outside both copy cascades still need copying: the
        // modifier cascades through its own subtree and the duplicate chain
        // covers the offerer's whole fragment. The contested modifier is
        // governed, so its fragment root (which reaches it from above and
        // drops the contested arc while copying) is among these roots
        // whenever it is not the offerer's.
        let offerer_pos = old
            .actors
            .iter()
            .find(|(_, id)| **id == offerer)
            .map(|(p, _)| *p)
            .unwrap_or(0);
        let chain_root = old.root_of(offerer_pos);
        let other_roots = old
            .roots()
            .into_iter()
            .filter(|p| *p != chain_root)
            .map(|p| old.actors[&p])
            .collect();
        Some(ForkPlan {
            fork: Arc::new(ForkSpec {
                new_reading: new_id,
                ref_map,
                contested: Some(contested),
                cascade: true,
            }),
            other_roots,
        })
    }

    /// A scan-time fork for a lexically ambiguous token: every member is
    /// copied directly (no cascade), arcs are inherited verbatim.
    pub fn plan_lexical_fork(&mut self, reading: ReadingId, ids: Vec<ActorId>) -> Arc<ForkSpec> {
        let old = self.readings.get(&reading).cloned().unwrap_or_default();
        let new_id = self.new_reading();
        let ref_map: BTreeMap<ActorId, ActorId> = old
            .actors
            .values()
            .copied()
            .zip(ids.iter().copied())
            .collect();
        let mut state = ReadingState::default();
        for (pos, old_actor) in &old.actors {
            state.actors.insert(*pos, ref_map[old_actor]);
        }
        state.entry_choice = old.entry_choice.clone();
        state.arcs = old.arcs.clone();
        state.head_of = old.head_of.clone();
        self.readings.insert(new_id, state);
        Arc::new(ForkSpec {
            new_reading: new_id,
            ref_map,
            contested: None,
            cascade: false,
        })
    }
}

// ---------------------------------------------------------------------------
// Scan driver
// ---------------------------------------------------------------------------

/// Strictly incremental scan: the next word is instantiated only when the
/// previous word's episode has reached quiescence in every active reading.
///
/// A lexically ambiguous token forks readings in two quiescent steps: the
/// copy messages go out first and the system runs back to quiescence (the
/// copies are therefore taken from stable pre-episode states), and only
/// then is the new word spawned in every reading.
#[derive(Default)]
pub struct ScanDriver {
    staged: Option<Vec<(ReadingId, Arc<LexemeEntry>, usize)>>,
}

impl ScanDriver {
    fn spawn_word(
        &self,
        sys: &mut SysCtx<'_, WordActor>,
        targets: Vec<(ReadingId, Arc<LexemeEntry>, usize)>,
        position: u32,
        token: &str,
    ) {
        for (reading, entry, entry_idx) in targets {
            let id = sys.allocate_actor();
            let (left_neighbor, probe_roots, bundle) = {
                let sh = sys.shared();
                let st = &sh.readings[&reading];
                let ln = st.actors.get(&(position - 1)).copied();
                let roots: Vec<ActorId> = st
                    .actors
                    .iter()
                    .filter(|(p, _)| **p < position && !st.head_of.contains_key(*p))
                    .map(|(_, a)| *a)
                    .collect();
                (ln, roots, Arc::clone(&sh.bundle))
            };
            let actor = WordActor::new(id, reading, position, bundle, entry, left_neighbor);
            sys.spawn_at(
                id,
                actor,
                "wordActor",
                format!("{token}@{position} {reading}"),
            );
            {
                let mut sh = sys.shared();
                sh.register_actor(reading, position, id, entry_idx);
            }
            sys.send(Outgoing {
                sender: SYSTEM,
                target: id,
                initiator: None,
                reading,
                task: None,
                payload: Msg::StartUp { left_neighbor },
            });
            for root in probe_roots {
                sys.send(Outgoing {
                    sender: SYSTEM,
                    target: root,
                    initiator: None,
                    reading,
                    task: None,
                    payload: Msg::ProbeRight { target: id },
                });
            }
        }
    }
}

impl Driver<WordActor> for ScanDriver {
    fn on_quiescent(&mut self, sys: &mut SysCtx<'_, WordActor>) -> bool {
        // a staged spawn waits for the fork copies to finish
        if let Some(targets) = self.staged.take() {
            let (token, position) = {
                let sh = sys.shared();
                (sh.tokens[sh.next_token - 1].clone(), sh.next_token as u32)
            };
            self.spawn_word(sys, targets, position, &token);
            return true;
        }

        let plan = {
            let sh = sys.shared();
            if sh.scan_error.is_some() || sh.next_token >= sh.tokens.len() {
                return false;
            }
            let token = sh.tokens[sh.next_token].clone();
            let entries = sh.bundle.lookup(&token).to_vec();
            let readings: Vec<ReadingId> = sh.readings.keys().copied().collect();
            (token, entries, readings)
        };
        let (token, entries, readings) = plan;
        let position = {
            let mut sh = sys.shared();
            sh.next_token += 1;
            sh.next_token as u32
        };
        if entries.is_empty() {
            sys.shared().scan_error = Some(format!("unknown form `{token}`"));
            return false;
        }

        let mut targets: Vec<(ReadingId, Arc<LexemeEntry>, usize)> = Vec::new();
        let mut forked = false;
        if position == 1 {
            // the first word creates the initial reading(s)
            for (ei, entry) in entries.iter().enumerate() {
                let mut sh = sys.shared();
                if ei > 0 && sh.readings.len() >= sh.max_readings {
                    sh.capped = true;
                    break;
                }
                let r = sh.new_reading();
                drop(sh);
                targets.push((r, Arc::clone(entry), ei));
            }
        } else {
            for reading in readings {
                targets.push((reading, Arc::clone(&entries[0]), 0));
                for (ei, entry) in entries.iter().enumerate().skip(1) {
                    let capped = {
                        let sh = sys.shared();
                        sh.readings.len() >= sh.max_readings
                    };
                    if capped {
                        sys.shared().capped = true;
                        break;
                    }
                    let member_count = sys.shared().member_count(reading);
                    let mut ids = Vec::with_capacity(member_count);
                    for _ in 0..member_count {
                        ids.push(sys.allocate_actor());
                    }
                    let fork = {
                        let mut sh = sys.shared();
                        sh.plan_lexical_fork(reading, ids)
                    };
                    let members: Vec<ActorId> = {
                        let sh = sys.shared();
                        sh.readings[&reading].actors.values().copied().collect()
                    };
                    forked = forked || !members.is_empty();
                    for member in members {
                        sys.send(Outgoing {
                            sender: SYSTEM,
                            target: member,
                            initiator: None,
                            reading: fork.new_reading,
                            task: None,
                            payload: Msg::CopyStructure {
                                fork: Arc::clone(&fork),
                            },
                        });
                    }
                    targets.push((fork.new_reading, Arc::clone(entry), ei));
                }
            }
        }

        if forked {
            self.staged = Some(targets);
        } else {
            self.spawn_word(sys, targets, position, &token);
        }
        true
    }
}

// ---------------------------------------------------------------------------
// Entry point and harvested output
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct ArcRecord {
    pub head: u32,
    pub dep: u32,
    pub name: String,
}

/// One reading of the input, in the external output schema.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "camelCase")]
pub struct ReadingRecord {
    pub reading_id: u32,
    pub complete: bool,
    pub tokens: Vec<String>,
    pub arcs: Vec<ArcRecord>,
    pub root_pos: Option<u32>,
}

/// A harvested reading plus the per-word final state needed for checks.
#[derive(Debug, Clone)]
pub struct HarvestedReading {
    pub record: ReadingRecord,
    pub features: BTreeMap<u32, FeatureStructure>,
    pub occurs: BTreeMap<u32, BTreeMap<String, u32>>,
}

impl HarvestedReading {
    /// Canonical identity of a reading: its arc set plus every word's final
    /// features. Reading ids and schedules do not enter.
    pub fn fingerprint(&self) -> String {
        let mut arcs: Vec<String> = self
            .record
            .arcs
            .iter()
            .map(|a| format!("{}-{}-{}", a.head, a.dep, a.name))
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

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParseOptions {
    pub mode: Mode,
    pub seed: u64,
    pub max_readings: usize,
    pub step_bound: u64,
}

impl Default for ParseOptions {
    fn default() -> Self {
        ParseOptions {
            mode: Mode::Deterministic,
            seed: 0,
            max_readings: 64,
            step_bound: 1_000_000,
        }
    }
}

#[derive(Debug)]
pub struct ParseRun {
    pub readings: Vec<HarvestedReading>,
    pub outcome: Outcome,
    pub report: RunReport,
    pub capped: bool,
}

impl ParseRun {
    pub fn complete(&self) -> impl Iterator<Item = &HarvestedReading> {
        self.readings.iter().filter(|r| r.record.complete)
    }
}

#[derive(Debug, Error)]
pub enum ParseError {
    #[error("{0}")]
    Scan(String),
    #[error("empty input")]
    EmptyInput,
}

/// Parses a pre-segmented sentence under the bundle, running the actor
/// protocol to quiescence and harvesting one record per reading.
pub fn parse_sentence(
    bundle: &Arc<GrammarBundle>,
    tokens: &[String],
    options: &ParseOptions,
) -> Result<ParseRun, ParseError> {
    if tokens.is_empty() {
        return Err(ParseError::EmptyInput);
    }
    let controller = Controller::new(Arc::clone(bundle), tokens.to_vec(), options.max_readings);
    let mut rt: Runtime<WordActor> = Runtime::new(controller, message_defs());
    let report = rt.run(
        &mut ScanDriver::default(),
        options.mode,
        options.seed,
        options.step_bound,
    );

    let (scan_error, capped, reading_states) = {
        let sh = rt.shared();
        (sh.scan_error.clone(), sh.capped, sh.readings.clone())
    };
    if let Some(err) = scan_error {
        return Err(ParseError::Scan(err));
    }

    let mut readings = Vec::new();
    for (rid, state) in &reading_states {
        let roots = state.roots();
        let complete = roots.len() == 1 && state.actors.len() == tokens.len();
        let mut arcs: Vec<ArcRecord> = state
            .arcs
            .iter()
            .map(|(h, m, n)| ArcRecord {
                head: *h,
                dep: *m,
                name: n.clone(),
            })
            .collect();
        arcs.sort_by(|a, b| (a.head, a.dep).cmp(&(b.head, b.dep)));
        let mut features = BTreeMap::new();
        let mut occurs = BTreeMap::new();
        for (pos, actor) in &state.actors {
            if let Some((f, o)) =
                rt.with_actor(*actor, |a| (a.features().clone(), a.occurs().clone()))
            {
                features.insert(*pos, f);
                occurs.insert(*pos, o);
            }
        }
        readings.push(HarvestedReading {
            record: ReadingRecord {
                reading_id: rid.0,
                complete,
                tokens: tokens.to_vec(),
                arcs,
                root_pos: if roots.len() == 1 {
                    Some(roots[0])
                } else {
                    None
                },
            },
            features,
            occurs,
        });
    }

    Ok(ParseRun {
        readings,
        outcome: report.outcome,
        report,
        capped,
    })
}

/// Independent non-crossing check over a whole arc set: no two arcs may
/// strictly stagger. Used by tests and the oracle as the projectivity
/// ground truth, separate from the commit-time guard.
pub fn arcs_projective(arcs: &[(u32, u32)]) -> bool {
    for (i, a) in arcs.iter().enumerate() {
        for b in arcs.iter().skip(i + 1) {
            let (alo, ahi) = (a.0.min(a.1), a.0.max(a.1));
            let (blo, bhi) = (b.0.min(b.1), b.0.max(b.1));
            if (alo < blo && blo < ahi && ahi < bhi) || (blo < alo && alo < bhi && bhi < ahi) {
                return false;
            }
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn projectivity_check_accepts_shared_endpoints() {
        // a head with one left and one right modifier
        assert!(arcs_projective(&[(4, 3), (4, 5)]));
        // nesting and shared endpoints
        assert!(arcs_projective(&[(2, 5), (4, 3), (5, 4)]));
        assert!(arcs_projective(&[(2, 4), (4, 3)]));
        // deliberately crossing arcs fail
        assert!(!arcs_projective(&[(1, 3), (2, 4)]));
        assert!(!arcs_projective(&[(3, 1), (2, 5)]));
    }

    #[test]
    fn registry_guards_reject_crossing_and_cycles() {
        let bundle = test_bundle();
        let mut c = Controller::new(bundle, vec![], 8);
        let r = c.new_reading();
        for pos in 1..=4 {
            c.register_actor(r, pos, ActorId(pos as u64), 0);
        }
        assert!(c.try_commit_arc(r, 1, 3, "a"));
        // (2,4) crosses (1,3)
        assert!(!c.try_commit_arc(r, 2, 4, "b"));
        // shared endpoint is fine
        assert!(c.try_commit_arc(r, 3, 4, "c"));
        // cycle: 1 is an ancestor of 3; attaching 1 under 3 closes a loop
        assert!(!c.try_commit_arc(r, 3, 1, "d"));
        // double governance refused
        assert!(!c.try_commit_arc(r, 2, 3, "e"));
    }

    fn test_bundle() -> Arc<GrammarBundle> {
        let classes = r#"[{"name": "WordActor"}]"#;
        let concepts = r#"{"concepts": [{"name": "Top"}], "roles": [], "cic": []}"#;
        let lexicon = r#"[]"#;
        Arc::new(GrammarBundle::from_strs(classes, concepts, lexicon, "c", "k", "l").unwrap())
    }
}
