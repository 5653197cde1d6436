use std::fmt;

use crate::ids::Tick;

/// One line of the event log: `tick seq kind subject detail`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LogRecord {
    pub tick: Tick,
    pub seq: u64,
    pub kind: &'static str,
    pub subject: String,
    pub detail: String,
}

impl fmt::Display for LogRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {} {}", self.tick, self.seq, self.kind, self.subject)?;
        if !self.detail.is_empty() {
            write!(f, " {}", self.detail)?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct EventLog {
    records: Vec<LogRecord>,
}

impl EventLog {
    pub fn push(&mut self, r: LogRecord) {
        self.records.push(r);
    }

    pub fn records(&self) -> &[LogRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn of_kind<'a>(&'a self, kind: &'a str) -> impl Iterator<Item = &'a LogRecord> + 'a {
        self.records.iter().filter(move |r| r.kind == kind)
    }

    /// Newline-terminated lines; empty for an empty log.
    pub fn render(&self) -> String {
        let mut s = String::new();
        for r in &self.records {
            s.push_str(&r.to_string());
            s.push('\n');
        }
        s
    }
}

/// `key=value` pairs joined by spaces. Values must not contain spaces.
pub fn kv(pairs: &[(&str, &dyn fmt::Display)]) -> String {
    pairs.iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join(" ")
}
