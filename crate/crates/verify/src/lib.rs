//! Reporting helpers for the acceptance suite: one verdict line per
//! criterion followed by indented measurements.

use std::fmt::Write as _;
use std::time::{Duration, Instant};

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub id: u32,
    pub title: &'static str,
    pub pass: bool,
    pub details: Vec<String>,
}

impl Outcome {
    pub fn new(id: u32, title: &'static str) -> Self {
        Outcome {
            id,
            title,
            pass: true,
            details: Vec::new(),
        }
    }

    /// Records a measurement; a false `ok` turns the criterion red.
    pub fn check(&mut self, ok: bool, detail: impl Into<String>) -> bool {
        let detail = detail.into();
        self.details.push(format!("[{}] {detail}", if ok { "ok" } else { "x" }));
        self.pass &= ok;
        ok
    }

    /// Records a measurement that is reported but not judged.
    pub fn note(&mut self, detail: impl Into<String>) {
        self.details.push(format!("[-] {}", detail.into()));
    }

    pub fn fail(&mut self, detail: impl Into<String>) {
        self.check(false, detail);
    }

    pub fn render(&self) -> String {
        let mut out = format!(
            "criterion {}: {} - {}\n",
            self.id,
            if self.pass { "PASS" } else { "FAIL" },
            self.title
        );
        for d in &self.details {
            let _ = writeln!(out, "    {d}");
        }
        out
    }
}

/// Runs `f` and returns its value with the elapsed wall time.
pub fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let start = Instant::now();
    let v = f();
    (v, start.elapsed())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_bad_check_turns_red() {
        let mut o = Outcome::new(7, "demo");
        o.check(true, "fine");
        o.note("info");
        assert!(o.pass);
        o.check(false, "broken");
        assert!(!o.pass);
        let text = o.render();
        assert!(text.starts_with("criterion 7: FAIL - demo\n"));
        assert!(text.contains("[x] broken"));
    }
}
