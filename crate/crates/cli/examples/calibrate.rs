//! Grid search over weight-rule deltas.
//!
//! Every delta of every weight rule is varied in steps of 0.1 within
//! [-1, 1], keeping the sign of its current value (zero deltas take the sign
//! given with `--direction rule:criterion:+|-`). Candidates are visited in
//! order of increasing L1 distance from the current deltas; among the
//! closest candidates where every expectation passes with a score gap of at
//! least `--min-gap`, the one with the largest smallest gap wins.
//!
//! ```text
//! cargo run --release -p patternwise-cli --example calibrate -- \
//!     kbs/authn.kb rcs --direction W-budget-high:usability:+ \
//!     --direction W-budget-high:costs:-
//! ```

use std::path::PathBuf;

use clap::Parser;
use patternwise_cli::evaluate::{evaluate, Suite};
use patternwise_core::dsl::{parse_kb_named, serialize_kb};
use patternwise_core::model::KnowledgeBase;

#[derive(Parser)]
struct Args {
    kb: PathBuf,
    suite: PathBuf,
    /// Sign for a delta that is currently zero, as `rule:criterion:+` or `-`.
    #[arg(long)]
    direction: Vec<String>,
    /// Largest L1 distance searched, in steps of 0.1.
    #[arg(long, default_value_t = 12)]
    max_steps: i32,
    #[arg(long, default_value_t = 0.01)]
    min_gap: f64,
    /// Print the calibrated knowledge base.
    #[arg(long)]
    emit: bool,
}

struct Slot {
    rule: usize,
    criterion: String,
    start: i32,
    /// Allowed range in tenths.
    lo: i32,
    hi: i32,
}

fn apply(kb: &mut KnowledgeBase, slots: &[Slot], values: &[i32]) {
    for (slot, &v) in slots.iter().zip(values) {
        kb.weight_rules[slot.rule]
            .deltas
            .insert(slot.criterion.clone(), v as f64 / 10.0);
    }
}

/// Smallest score gap over all checks, or `None` if any check fails.
fn fitness(kb: &KnowledgeBase, suite: &Suite) -> Option<f64> {
    let mut min_gap = f64::INFINITY;
    for check in evaluate(kb, suite) {
        if !check.passed {
            return None;
        }
        if let Some(m) = check.margin {
            min_gap = min_gap.min(m);
        }
    }
    Some(min_gap)
}

struct Search<'a> {
    kb: KnowledgeBase,
    suite: &'a Suite,
    slots: Vec<Slot>,
    values: Vec<i32>,
    min_gap: f64,
    best: Option<(f64, Vec<i32>)>,
}

impl Search<'_> {
    /// Visits every assignment whose L1 distance from the start is exactly
    /// `remaining` steps over slots `i..`.
    fn visit(&mut self, i: usize, remaining: i32) {
        if i == self.slots.len() {
            if remaining != 0 {
                return;
            }
            apply(&mut self.kb, &self.slots, &self.values);
            if let Some(gap) = fitness(&self.kb, self.suite) {
                if gap >= self.min_gap && self.best.as_ref().is_none_or(|(g, _)| gap > *g + 1e-12) {
                    self.best = Some((gap, self.values.clone()));
                }
            }
            return;
        }
        let (start, lo, hi) = (self.slots[i].start, self.slots[i].lo, self.slots[i].hi);
        for d in 0..=remaining {
            for v in if d == 0 {
                vec![start]
            } else {
                vec![start - d, start + d]
            } {
                if v < lo || v > hi {
                    continue;
                }
                self.values[i] = v;
                self.visit(i + 1, remaining - d);
            }
        }
        self.values[i] = start;
    }
}

fn main() {
    let args = Args::parse();
    let text = std::fs::read_to_string(&args.kb).expect("readable kb");
    let kb =
        parse_kb_named(&text, &args.kb.display().to_string()).unwrap_or_else(|e| panic!("{e}"));
    let suite = Suite::load(&args.suite, &kb).unwrap_or_else(|e| panic!("{e}"));

    let mut slots = Vec::new();
    for (ri, rule) in kb.weight_rules.iter().enumerate() {
        for c in &kb.criteria {
            let current = rule.deltas.get(&c.id).copied();
            let start = (current.unwrap_or(0.0) * 10.0).round() as i32;
            let key = format!("{}:{}:", rule.id, c.id);
            let directed = args.direction.iter().find_map(|d| d.strip_prefix(&key));
            let (lo, hi) = match (start.signum(), directed) {
                (1, _) | (0, Some("+")) => (0, 10),
                (-1, _) | (0, Some("-")) => (-10, 0),
                _ if current.is_none() => continue,
                _ => (0, 0),
            };
            slots.push(Slot {
                rule: ri,
                criterion: c.id.clone(),
                start,
                lo,
                hi,
            });
        }
    }
    let values: Vec<i32> = slots.iter().map(|s| s.start).collect();
    let mut search = Search {
        kb: kb.clone(),
        suite: &suite,
        slots,
        values,
        min_gap: args.min_gap,
        best: None,
    };

    for steps in 0..=args.max_steps {
        search.visit(0, steps);
        if let Some((gap, values)) = search.best.clone() {
            println!(
                "L1 distance {:.1}, smallest score gap {gap:.4}",
                steps as f64 / 10.0
            );
            for (slot, v) in search.slots.iter().zip(&values) {
                let marker = if *v != slot.start { "  (changed)" } else { "" };
                println!(
                    "  {} {} = {:.1}{marker}",
                    kb.weight_rules[slot.rule].id,
                    slot.criterion,
                    *v as f64 / 10.0
                );
            }
            if args.emit {
                let mut calibrated = kb.clone();
                apply(&mut calibrated, &search.slots, &values);
                print!("{}", serialize_kb(&calibrated).expect("valid kb"));
            }
            return;
        }
        eprintln!("no solution within L1 distance {:.1}", steps as f64 / 10.0);
    }
    std::process::exit(1);
}
