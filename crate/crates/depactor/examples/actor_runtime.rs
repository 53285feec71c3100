//! The runtime substrate on its own: actors with mailboxes, a complex
//! message forwarded by distribute clauses, and a reception task that
//! fires once every receipt has arrived — in any order.
//!
//! ```bash
//! cargo run -p depactor --example actor_runtime
//! ```

use depactor::runtime::{
    Actor, ActorId, Condition, Ctx, DistributeClause, Driver, Envelope, Message, Mode, MsgDef,
    Outgoing, ReadingId, Runtime, SysCtx, SYSTEM,
};

#[derive(Clone)]
enum Gossip {
    /// Complex message: forwarded to the receiver's friend before handling.
    Rumor {
        hops_left: u32,
    },
    Receipt {
        forwarded: Vec<ActorId>,
    },
}

impl Message for Gossip {
    fn kind(&self) -> &'static str {
        match self {
            Gossip::Rumor { .. } => "rumor",
            Gossip::Receipt { .. } => "receipt",
        }
    }
    fn digest(&self) -> String {
        match self {
            Gossip::Rumor { hops_left } => format!("hops={hops_left}"),
            Gossip::Receipt { forwarded } => format!("fwd={}", forwarded.len()),
        }
    }
}

struct Villager {
    friend: Option<ActorId>,
    heard: u32,
}

impl Actor for Villager {
    type Msg = Gossip;
    type Shared = ();
    type Note = &'static str;

    fn on_message(&mut self, ctx: &mut Ctx<'_, Self>, env: &Envelope<Gossip>) {
        match &env.payload {
            Gossip::Rumor { .. } => {
                self.heard += 1;
                // reply to the initiator, naming whoever the runtime already
                // forwarded the rumor to on delivery
                let forwarded = ctx.forwarded().to_vec();
                ctx.send(Outgoing {
                    sender: ctx.self_id(),
                    target: env.initiator.unwrap(),
                    initiator: env.initiator,
                    reading: env.reading,
                    task: env.task,
                    payload: Gossip::Receipt { forwarded },
                });
            }
            Gossip::Receipt { forwarded } => {
                ctx.record_receipt(env.task.unwrap(), env.sender, forwarded);
            }
        }
    }
}

fn has_friend(a: &Villager, _env: &Envelope<Gossip>) -> bool {
    a.friend.is_some()
}
fn friend(a: &Villager, _env: &Envelope<Gossip>) -> Option<ActorId> {
    a.friend
}
fn always(_: &Villager, _: &Envelope<Gossip>) -> bool {
    true
}

struct Quiet;
impl Driver<Villager> for Quiet {
    fn on_quiescent(&mut self, _sys: &mut SysCtx<'_, Villager>) -> bool {
        false
    }
    fn on_task_fired(
        &mut self,
        _sys: &mut SysCtx<'_, Villager>,
        task: depactor::runtime::TaskId,
        note: &'static str,
    ) {
        println!("reception task {task} fired: {note}");
    }
}

fn main() {
    let defs = vec![MsgDef {
        kind: "rumor",
        pre_distribute: vec![DistributeClause {
            condition: has_friend as Condition<Villager>,
            tag: "friend",
            resolve: friend,
        }],
        compute: vec![always as Condition<Villager>],
        post_distribute: vec![],
    }];
    let mut rt: Runtime<Villager> = Runtime::new((), defs);

    let chain: Vec<ActorId> = {
        let mut sys = rt.sys();
        let ids: Vec<ActorId> = (0..4).map(|_| sys.allocate_actor()).collect();
        for (i, id) in ids.iter().enumerate() {
            let friend = ids.get(i + 1).copied();
            sys.spawn_at(
                *id,
                Villager { friend, heard: 0 },
                "villager",
                format!("v{i}"),
            );
        }
        ids
    };

    // the initiator tells the first villager; the rumor cascades down the
    // friendship chain, and the reception task counts receipts until every
    // branch has reported back
    {
        let mut sys = rt.sys();
        let initiator = chain[0];
        let first_target = chain[1];
        let task = sys.queue_task(
            initiator,
            ReadingId(0),
            first_target,
            "rumor round".into(),
            "everyone heard it",
        );
        sys.send(Outgoing {
            sender: SYSTEM,
            target: first_target,
            initiator: Some(initiator),
            reading: ReadingId(0),
            task: Some(task),
            payload: Gossip::Rumor { hops_left: 3 },
        });
    }

    let report = rt.run(&mut Quiet, Mode::Deterministic, 42, 10_000);
    println!(
        "outcome {:?}: {} deliveries, {}/{} tasks fired",
        report.outcome, report.deliveries, report.tasks_fired, report.tasks_created
    );
    println!("\nfull event trace:");
    print!("{}", report.trace.render());
}
