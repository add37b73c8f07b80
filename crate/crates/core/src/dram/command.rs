use std::fmt;
use std::str::FromStr;

use super::address::DramAddress;
use super::timing::{fmt_ns, parse_ns, Ps};
use crate::error::{Result, SimError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CommandKind {
    Act,
    Pre,
    Rd,
    Wr,
    Ref,
    Rfm,
}

impl CommandKind {
    pub fn as_str(self) -> &'static str {
        match self {
            CommandKind::Act => "ACT",
            CommandKind::Pre => "PRE",
            CommandKind::Rd => "RD",
            CommandKind::Wr => "WR",
            CommandKind::Ref => "REF",
            CommandKind::Rfm => "RFM",
        }
    }
}

impl FromStr for CommandKind {
    type Err = SimError;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "ACT" => CommandKind::Act,
            "PRE" => CommandKind::Pre,
            "RD" => CommandKind::Rd,
            "WR" => CommandKind::Wr,
            "REF" => CommandKind::Ref,
            "RFM" => CommandKind::Rfm,
            _ => return Err(SimError::Config(format!("unknown command '{s}'"))),
        })
    }
}

/// One command on a bank's command bus.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CommandEvent {
    pub time: Ps,
    pub kind: CommandKind,
    pub addr: DramAddress,
    pub payload: Option<Vec<u8>>,
}

impl CommandEvent {
    pub fn new(time: Ps, kind: CommandKind, bank: u32, row: u32) -> Self {
        Self { time, kind, addr: DramAddress::bank_row(bank, row), payload: None }
    }

    pub fn act(time: Ps, bank: u32, row: u32) -> Self {
        Self::new(time, CommandKind::Act, bank, row)
    }

    pub fn pre(time: Ps, bank: u32) -> Self {
        Self::new(time, CommandKind::Pre, bank, 0)
    }

    pub fn rd(time: Ps, bank: u32) -> Self {
        Self::new(time, CommandKind::Rd, bank, 0)
    }

    pub fn wr(time: Ps, bank: u32, data: Vec<u8>) -> Self {
        Self { payload: Some(data), ..Self::new(time, CommandKind::Wr, bank, 0) }
    }

    pub fn refresh(time: Ps, bank: u32) -> Self {
        Self::new(time, CommandKind::Ref, bank, 0)
    }

    pub fn rfm(time: Ps, bank: u32) -> Self {
        Self::new(time, CommandKind::Rfm, bank, 0)
    }

    /// Parses one trace line: `<time_ns> <KIND> <bank> [<row>] [<hex-payload>]`.
    pub fn parse_line(line: &str) -> Result<Self> {
        let bad = |m: &str| SimError::Config(format!("trace line '{line}': {m}"));
        let mut it = line.split_whitespace();
        let time = parse_ns(it.next().ok_or_else(|| bad("missing time"))?)?;
        let kind: CommandKind = it.next().ok_or_else(|| bad("missing command"))?.parse()?;
        let bank: u32 = it.next().ok_or_else(|| bad("missing bank"))?.parse().map_err(|_| bad("bad bank"))?;
        let rest: Vec<&str> = it.collect();
        let mut ev = CommandEvent::new(time, kind, bank, 0);
        match (kind, rest.as_slice()) {
            (CommandKind::Act, [row]) => ev.addr.row = row.parse().map_err(|_| bad("bad row"))?,
            (CommandKind::Act, _) => return Err(bad("ACT takes exactly one row")),
            (CommandKind::Wr, [hexdata]) => {
                ev.payload = Some(hex::decode(hexdata).map_err(|_| bad("bad hex payload"))?);
            }
            (CommandKind::Wr, _) => return Err(bad("WR takes exactly one payload")),
            (_, []) => {}
            _ => return Err(bad("unexpected trailing fields")),
        }
        Ok(ev)
    }
}

impl fmt::Display for CommandEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", fmt_ns(self.time), self.kind.as_str(), self.addr.bank)?;
        if self.kind == CommandKind::Act {
            write!(f, " {}", self.addr.row)?;
        }
        if let Some(p) = &self.payload {
            write!(f, " {}", hex::encode(p))?;
        }
        Ok(())
    }
}

/// Reads a whole trace; blank lines and `#` comments are skipped.
pub fn parse_trace(text: &str) -> Result<Vec<CommandEvent>> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(CommandEvent::parse_line)
        .collect()
}

pub fn write_trace<'a, W: std::io::Write>(
    out: &mut W,
    events: impl IntoIterator<Item = &'a CommandEvent>,
) -> std::io::Result<()> {
    for e in events {
        writeln!(out, "{e}")?;
    }
    Ok(())
}
