//! Run configuration and the command implementations behind the binary:
//! grammar validation, parsing, oracle enumeration, and seed sweeps.
//! Each command returns its exit status and rendered output so it can be
//! driven from tests as well as from `main`.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::sync::Arc;

use serde_json::json;

use crate::grammar::GrammarBundle;
use crate::oracle;
use crate::protocol::{parse_sentence, HarvestedReading, ParseError, ParseOptions, ReadingRecord};
use crate::runtime::{Mode, Outcome};

pub const EXIT_OK: i32 = 0;
pub const EXIT_NO_READING: i32 = 1;
pub const EXIT_LOAD: i32 = 2;
pub const EXIT_PROTOCOL: i32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Json,
    Tree,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub classes: PathBuf,
    pub concepts: PathBuf,
    pub lexicon: PathBuf,
    pub mode: Mode,
    pub seed: u64,
    pub max_readings: usize,
    pub step_bound: u64,
    pub format: OutputFormat,
    pub trace_out: Option<PathBuf>,
}

impl RunConfig {
    pub fn options(&self) -> ParseOptions {
        ParseOptions {
            mode: self.mode,
            seed: self.seed,
            max_readings: self.max_readings,
            step_bound: self.step_bound,
        }
    }

    pub fn load_bundle(&self) -> Result<Arc<GrammarBundle>, String> {
        GrammarBundle::load(&self.classes, &self.concepts, &self.lexicon)
            .map(Arc::new)
            .map_err(|e| e.to_string())
    }
}

fn render_tree(rec: &ReadingRecord) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "reading {} ({})",
        rec.reading_id,
        if rec.complete {
            "complete"
        } else {
            "incomplete"
        }
    );
    fn children(rec: &ReadingRecord, head: u32) -> Vec<(u32, &str)> {
        let mut c: Vec<(u32, &str)> = rec
            .arcs
            .iter()
            .filter(|a| a.head == head)
            .map(|a| (a.dep, a.name.as_str()))
            .collect();
        c.sort();
        c
    }
    fn walk(rec: &ReadingRecord, pos: u32, name: &str, depth: usize, out: &mut String) {
        let label = if name.is_empty() {
            String::new()
        } else {
            format!("{name}: ")
        };
        let _ = writeln!(
            out,
            "{}{}{} ({})",
            "  ".repeat(depth),
            label,
            rec.tokens[(pos - 1) as usize],
            pos
        );
        for (dep, dep_name) in children(rec, pos) {
            walk(rec, dep, dep_name, depth + 1, out);
        }
    }
    let governed: BTreeSet<u32> = rec.arcs.iter().map(|a| a.dep).collect();
    for pos in 1..=rec.tokens.len() as u32 {
        if !governed.contains(&pos) {
            walk(rec, pos, "", 1, &mut out);
        }
    }
    out
}

fn render_readings(readings: &[HarvestedReading], format: OutputFormat) -> String {
    match format {
        OutputFormat::Json => {
            let records: Vec<&ReadingRecord> = readings.iter().map(|r| &r.record).collect();
            serde_json::to_string_pretty(&json!({ "readings": records })).unwrap() + "\n"
        }
        OutputFormat::Tree => {
            let mut out = String::new();
            for r in readings {
                out.push_str(&render_tree(&r.record));
            }
            out
        }
    }
}

/// Parse a sentence and print its readings. Exit 0 iff at least one
/// complete reading was found, 2 on load or lexical errors, 3 on a protocol
/// fault or liveness failure.
pub fn cmd_parse(config: &RunConfig, tokens: &[String]) -> (i32, String) {
    let bundle = match config.load_bundle() {
        Ok(b) => b,
        Err(e) => return (EXIT_LOAD, format!("error: {e}\n")),
    };
    let run = match parse_sentence(&bundle, tokens, &config.options()) {
        Ok(run) => run,
        Err(ParseError::Scan(e)) => return (EXIT_LOAD, format!("error: {e}\n")),
        Err(ParseError::EmptyInput) => return (EXIT_LOAD, "error: empty input\n".into()),
    };
    if let Some(path) = &config.trace_out {
        if let Err(e) = std::fs::write(path, run.report.trace.render()) {
            return (EXIT_LOAD, format!("error: cannot write trace: {e}\n"));
        }
    }
    let mut output = render_readings(&run.readings, config.format);
    if run.capped {
        output.push_str("warning: reading cap reached; some duplications were refused\n");
    }
    match run.outcome {
        Outcome::Quiescent => {}
        Outcome::Fault => {
            output.push_str(&format!("protocol fault: {:?}\n", run.report.faults));
            return (EXIT_PROTOCOL, output);
        }
        Outcome::LivenessFailure => {
            output.push_str("liveness failure: step bound exhausted\n");
            return (EXIT_PROTOCOL, output);
        }
    }
    let complete = run.readings.iter().filter(|r| r.record.complete).count();
    (
        if complete > 0 {
            EXIT_OK
        } else {
            EXIT_NO_READING
        },
        output,
    )
}

/// Run all load-time validators; exit 0 iff the bundle is clean.
pub fn cmd_validate(config: &RunConfig) -> (i32, String) {
    match config.load_bundle() {
        Ok(bundle) => {
            let forms = bundle.forms().count();
            let classes = bundle.classes.classes().count();
            let concepts = bundle.concepts.concepts().count();
            (
                EXIT_OK,
                format!("ok: {classes} classes, {concepts} concepts, {forms} forms\n"),
            )
        }
        Err(e) => (EXIT_LOAD, format!("error: {e}\n")),
    }
}

/// Enumerate all valid analyses by brute force, in the same record format
/// as `parse`.
pub fn cmd_oracle(config: &RunConfig, tokens: &[String]) -> (i32, String) {
    let bundle = match config.load_bundle() {
        Ok(b) => b,
        Err(e) => return (EXIT_LOAD, format!("error: {e}\n")),
    };
    let trees = match oracle::enumerate(&bundle, tokens) {
        Ok(t) => t,
        Err(e) => return (EXIT_LOAD, format!("error: {e}\n")),
    };
    let records: Vec<ReadingRecord> = trees
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let mut arcs: Vec<crate::protocol::ArcRecord> = t
                .arcs
                .iter()
                .map(|(h, m, n)| crate::protocol::ArcRecord {
                    head: *h,
                    dep: *m,
                    name: n.clone(),
                })
                .collect();
            arcs.sort_by(|a, b| (a.head, a.dep).cmp(&(b.head, b.dep)));
            ReadingRecord {
                reading_id: (i + 1) as u32,
                complete: true,
                tokens: tokens.to_vec(),
                arcs,
                root_pos: Some(t.root),
            }
        })
        .collect();
    let out = match config.format {
        OutputFormat::Json => {
            serde_json::to_string_pretty(&json!({ "readings": records })).unwrap() + "\n"
        }
        OutputFormat::Tree => {
            let mut s = String::new();
            for r in &records {
                s.push_str(&render_tree(r));
            }
            s
        }
    };
    (
        if records.is_empty() {
            EXIT_NO_READING
        } else {
            EXIT_OK
        },
        out,
    )
}

/// Parse the sentence once per seed and compare: all seeds must yield the
/// same set of complete readings, and that set must equal the oracle's.
pub fn cmd_sweep(config: &RunConfig, tokens: &[String], seeds: &[u64]) -> (i32, String) {
    if seeds.is_empty() {
        return (EXIT_LOAD, "error: empty seed range\n".into());
    }
    let bundle = match config.load_bundle() {
        Ok(b) => b,
        Err(e) => return (EXIT_LOAD, format!("error: {e}\n")),
    };
    let oracle_set: BTreeSet<String> = match oracle::enumerate(&bundle, tokens) {
        Ok(trees) => trees.iter().map(|t| t.fingerprint()).collect(),
        Err(e) => return (EXIT_LOAD, format!("error: {e}\n")),
    };
    let mut first: Option<BTreeSet<String>> = None;
    let mut identical = true;
    let mut clean = true;
    for &seed in seeds {
        let mut options = config.options();
        options.seed = seed;
        let run = match parse_sentence(&bundle, tokens, &options) {
            Ok(run) => run,
            Err(e) => return (EXIT_LOAD, format!("error: {e}\n")),
        };
        if run.outcome != Outcome::Quiescent {
            clean = false;
        }
        let set: BTreeSet<String> = run.complete().map(|r| r.fingerprint()).collect();
        match &first {
            None => first = Some(set),
            Some(f) => {
                if &set != f {
                    identical = false;
                }
            }
        }
    }
    let oracle_match = first.as_ref() == Some(&oracle_set);
    let out = format!(
        "seeds: {}, identical: {}, oracle-match: {}, clean: {}\n",
        seeds.len(),
        identical,
        oracle_match,
        clean
    );
    let status = if identical && oracle_match && clean {
        EXIT_OK
    } else {
        EXIT_NO_READING
    };
    (status, out)
}
