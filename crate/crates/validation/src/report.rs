//! PASS/FAIL bookkeeping for the acceptance suite.

use std::fmt::Display;
use std::process::ExitCode;
use std::time::Instant;

/// Six significant decimals without trailing zeros.
fn short(x: f64) -> String {
    let s = format!("{x:.6}");
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

/// Sub-checks of one criterion; prints one line per check as it is made.
pub struct Criterion {
    id: usize,
    title: String,
    started: Instant,
    checks: usize,
    failed: Vec<String>,
}

impl Criterion {
    pub fn new(id: usize, title: &str) -> Self {
        println!("criterion {id}: {title}");
        Self { id, title: title.to_string(), started: Instant::now(), checks: 0, failed: Vec::new() }
    }

    pub fn check(&mut self, name: &str, ok: bool, detail: impl Display) -> bool {
        self.checks += 1;
        println!("    {} {name}: {detail}", if ok { "ok  " } else { "FAIL" });
        if !ok {
            self.failed.push(name.to_string());
        }
        ok
    }

    /// `value` within `[lo, hi]`
    pub fn within(&mut self, name: &str, value: f64, lo: f64, hi: f64) -> bool {
        self.check(name, (lo..=hi).contains(&value), format!("{value:.6} in [{}, {}]", short(lo), short(hi)))
    }

    pub fn at_least(&mut self, name: &str, value: f64, min: f64) -> bool {
        self.check(name, value >= min, format!("{value:.6} >= {min}"))
    }

    pub fn below(&mut self, name: &str, value: f64, max: f64) -> bool {
        self.check(name, value < max, format!("{value:.3e} < {max:e}"))
    }

    /// Records a computation that could not be carried out.
    pub fn error(&mut self, name: &str, err: impl Display) {
        self.check(name, false, format!("error: {err}"));
    }

    pub fn passed(&self) -> bool {
        self.failed.is_empty()
    }
}

/// Collects the criteria and prints the closing summary.
#[derive(Default)]
pub struct Suite {
    lines: Vec<(usize, String, bool)>,
}

impl Suite {
    pub fn record(&mut self, c: Criterion) {
        let secs = c.started.elapsed().as_secs_f64();
        let line = if c.passed() {
            format!("PASS criterion {}: {} ({} checks, {secs:.1} s)", c.id, c.title, c.checks)
        } else {
            format!(
                "FAIL criterion {}: {} ({} of {} checks failed: {}; {secs:.1} s)",
                c.id,
                c.title,
                c.failed.len(),
                c.checks,
                c.failed.join(", ")
            )
        };
        println!("{line}\n");
        self.lines.push((c.id, line, c.passed()));
    }

    pub fn finish(mut self) -> ExitCode {
        self.lines.sort_by_key(|(id, _, _)| *id);
        println!("summary");
        for (_, line, _) in &self.lines {
            println!("{line}");
        }
        if self.lines.iter().all(|(_, _, ok)| *ok) {
            ExitCode::SUCCESS
        } else {
            ExitCode::FAILURE
        }
    }
}
