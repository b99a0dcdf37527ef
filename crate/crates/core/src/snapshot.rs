//! Canonical text snapshots of a [`SimState`].
//!
//! A record starts with `SNAPSHOT 1` and ends with `END`, so records can be
//! concatenated into a stream. Field order is fixed, agents are sorted by id
//! and loans by `(lender, borrower, principal, due)`, so equal states encode to
//! equal bytes. Amounts are exact decimals; `~` is an empty bit string and `-`
//! an empty list.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use crate::amount::Amount;
use crate::bitstring::BitString;
use crate::geometry::Position;
use crate::state::{Agent, Lattice, Loan, Sex, SimState};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("snapshot line {line}: {message}")]
pub struct SnapshotError {
    pub line: usize,
    pub message: String,
}

const EMPTY: &str = "~";
const NONE: &str = "-";

fn bits(b: &BitString) -> String {
    if b.is_empty() {
        EMPTY.to_string()
    } else {
        b.to_string()
    }
}

fn list<T>(items: impl IntoIterator<Item = T>, f: impl Fn(T) -> String) -> String {
    let parts: Vec<String> = items.into_iter().map(f).collect();
    if parts.is_empty() {
        NONE.to_string()
    } else {
        parts.join(",")
    }
}

fn grid<T: std::fmt::Display>(out: &mut String, label: &str, m: u32, cells: &[T]) {
    out.push_str(label);
    out.push('\n');
    for row in cells.chunks(m as usize) {
        let mut first = true;
        for v in row {
            if !first {
                out.push(' ');
            }
            first = false;
            let _ = write!(out, "{v}");
        }
        out.push('\n');
    }
}

pub fn encode(s: &SimState) -> String {
    let mut out = String::new();
    encode_into(s, &mut out);
    out
}

/// Appends one record to `out`.
pub fn encode_into(s: &SimState, out: &mut String) {
    let m = s.m();
    let _ = writeln!(out, "SNAPSHOT 1");
    let _ = writeln!(out, "STEP {}", s.step);
    let _ = writeln!(out, "SEED {}", s.seed);
    let _ = writeln!(out, "M {m}");
    let _ = writeln!(out, "DUAL {}", u8::from(s.dual));
    let _ = writeln!(out, "NEXTID {}", s.next_id);
    grid(out, "SUGAR", m, &s.lattice.level[0]);
    grid(out, "MAXSUGAR", m, &s.lattice.capacity[0]);
    if s.dual {
        grid(out, "SPICE", m, &s.lattice.level[1]);
        grid(out, "MAXSPICE", m, &s.lattice.capacity[1]);
    }
    grid(out, "POLLUTION", m, &s.lattice.pollution);
    let _ = writeln!(out, "AGENTS {}", s.population());
    for a in s.agents() {
        let sex = match a.sex {
            Sex::Male => 'M',
            Sex::Female => 'F',
        };
        let _ = writeln!(
            out,
            "A {} {} {} {sex} {} {} {} {} {} {} {} {} {} {} {} {} {}",
            a.id,
            a.position.x,
            a.position.y,
            a.vision,
            a.age,
            a.max_age,
            a.metabolism[0],
            a.metabolism[1],
            a.store[0],
            a.store[1],
            a.initial[0],
            a.initial[1],
            bits(&a.culture),
            bits(&a.immunity),
            list(&a.diseases, bits),
            list(&a.children, |c| c.to_string()),
        );
    }
    let books: &[(&str, usize)] = if s.dual {
        &[("sugar", 0), ("spice", 1)]
    } else {
        &[("sugar", 0)]
    };
    for &(name, k) in books {
        let mut loans = s.books[k].clone();
        loans.sort();
        let _ = writeln!(out, "LOANS {name} {}", loans.len());
        for l in loans {
            let _ = writeln!(out, "L {} {} {} {}", l.lender, l.borrower, l.principal, l.due);
        }
    }
    let _ = writeln!(out, "END");
}

struct Reader<'a> {
    lines: std::iter::Enumerate<std::str::Lines<'a>>,
    line: usize,
}

impl<'a> Reader<'a> {
    fn err<T>(&self, message: impl Into<String>) -> Result<T, SnapshotError> {
        Err(SnapshotError {
            line: self.line,
            message: message.into(),
        })
    }

    fn next(&mut self) -> Result<&'a str, SnapshotError> {
        match self.lines.next() {
            Some((i, l)) => {
                self.line = i + 1;
                Ok(l)
            }
            None => self.err("unexpected end of snapshot"),
        }
    }

    /// Reads `KEY value` and returns the value.
    fn keyed(&mut self, key: &str) -> Result<&'a str, SnapshotError> {
        let l = self.next()?;
        match l.strip_prefix(key).and_then(|r| r.strip_prefix(' ')) {
            Some(v) => Ok(v),
            None => self.err(format!("expected {key}, got {l:?}")),
        }
    }

    fn keyed_num<T: std::str::FromStr>(&mut self, key: &str) -> Result<T, SnapshotError> {
        let v = self.keyed(key)?;
        self.num(v)
    }

    fn num<T: std::str::FromStr>(&self, tok: &str) -> Result<T, SnapshotError> {
        tok.parse().or_else(|_| self.err(format!("bad number {tok:?}")))
    }

    fn grid<T: std::str::FromStr>(&mut self, label: &str, m: u32) -> Result<Vec<T>, SnapshotError> {
        let l = self.next()?;
        if l != label {
            return self.err(format!("expected {label}, got {l:?}"));
        }
        let mut out = Vec::with_capacity(m as usize * m as usize);
        for _ in 0..m {
            let row = self.next()?;
            let before = out.len();
            for tok in row.split_whitespace() {
                out.push(self.num(tok)?);
            }
            if out.len() - before != m as usize {
                return self.err(format!("{label} row must hold {m} values"));
            }
        }
        Ok(out)
    }
}

fn parse_bits(r: &Reader, tok: &str) -> Result<BitString, SnapshotError> {
    if tok == EMPTY {
        return Ok(BitString::default());
    }
    tok.parse()
        .or_else(|e: crate::bitstring::BitError| r.err(e.to_string()))
}

fn parse_amount(r: &Reader, tok: &str) -> Result<Amount, SnapshotError> {
    tok.parse().or_else(|_| r.err(format!("bad amount {tok:?}")))
}

fn parse_agent(r: &Reader, line: &str, m: u32) -> Result<Agent, SnapshotError> {
    let t: Vec<&str> = line.split_whitespace().collect();
    if t.len() != 18 || t[0] != "A" {
        return r.err("agent line must be `A` followed by 17 fields");
    }
    let position = Position::new(r.num(t[2])?, r.num(t[3])?);
    if position.x >= m || position.y >= m {
        return r.err(format!("position {position} outside the lattice"));
    }
    let sex = match t[4] {
        "M" => Sex::Male,
        "F" => Sex::Female,
        other => return r.err(format!("bad sex {other:?}")),
    };
    let diseases = if t[16] == NONE {
        BTreeSet::new()
    } else {
        t[16].split(',').map(|d| parse_bits(r, d)).collect::<Result<_, _>>()?
    };
    let children = if t[17] == NONE {
        BTreeSet::new()
    } else {
        t[17].split(',').map(|c| r.num(c)).collect::<Result<_, _>>()?
    };
    Ok(Agent {
        id: r.num(t[1])?,
        position,
        sex,
        vision: r.num(t[5])?,
        age: r.num(t[6])?,
        max_age: r.num(t[7])?,
        metabolism: [r.num(t[8])?, r.num(t[9])?],
        store: [parse_amount(r, t[10])?, parse_amount(r, t[11])?],
        initial: [parse_amount(r, t[12])?, parse_amount(r, t[13])?],
        culture: parse_bits(r, t[14])?,
        immunity: parse_bits(r, t[15])?,
        diseases,
        children,
    })
}

/// Decodes exactly one record; trailing blank lines are allowed.
pub fn decode(text: &str) -> Result<SimState, SnapshotError> {
    let mut records = decode_stream(text)?;
    match records.len() {
        1 => Ok(records.pop().unwrap()),
        n => Err(SnapshotError {
            line: 0,
            message: format!("expected one snapshot record, found {n}"),
        }),
    }
}

/// Decodes a concatenation of records.
pub fn decode_stream(text: &str) -> Result<Vec<SimState>, SnapshotError> {
    let mut r = Reader {
        lines: text.lines().enumerate(),
        line: 0,
    };
    let mut out = Vec::new();
    loop {
        let header = loop {
            match r.lines.next() {
                Some((i, l)) => {
                    r.line = i + 1;
                    if !l.trim().is_empty() {
                        break Some(l);
                    }
                }
                None => break None,
            }
        };
        match header {
            None => return Ok(out),
            Some("SNAPSHOT 1") => out.push(decode_body(&mut r)?),
            Some(other) => return r.err(format!("expected SNAPSHOT 1, got {other:?}")),
        }
    }
}

fn decode_body(r: &mut Reader) -> Result<SimState, SnapshotError> {
    let step = r.keyed_num("STEP")?;
    let seed = r.keyed_num("SEED")?;
    let m: u32 = r.keyed_num("M")?;
    if m == 0 {
        return r.err("M must be positive");
    }
    let dual = match r.keyed("DUAL")? {
        "0" => false,
        "1" => true,
        other => return r.err(format!("DUAL must be 0 or 1, got {other:?}")),
    };
    let next_id = r.keyed_num("NEXTID")?;
    let sugar = r.grid("SUGAR", m)?;
    let max_sugar = r.grid("MAXSUGAR", m)?;
    let (spice, max_spice) = if dual {
        (r.grid("SPICE", m)?, r.grid("MAXSPICE", m)?)
    } else {
        (Vec::new(), Vec::new())
    };
    let pollution = r.grid("POLLUTION", m)?;
    let n: usize = r.keyed_num("AGENTS")?;
    let mut agents = Vec::with_capacity(n);
    for _ in 0..n {
        let line = r.next()?;
        agents.push(parse_agent(r, line, m)?);
    }
    let mut books = [Vec::new(), Vec::new()];
    let names: &[&str] = if dual { &["sugar", "spice"] } else { &["sugar"] };
    for (k, name) in names.iter().enumerate() {
        let count: usize = r.keyed_num(&format!("LOANS {name}"))?;
        for _ in 0..count {
            let line = r.next()?;
            let t: Vec<&str> = line.split_whitespace().collect();
            if t.len() != 5 || t[0] != "L" {
                return r.err("loan line must be `L lender borrower principal due`");
            }
            books[k].push(Loan {
                lender: r.num(t[1])?,
                borrower: r.num(t[2])?,
                principal: parse_amount(r, t[3])?,
                due: r.num(t[4])?,
            });
        }
    }
    let end = r.next()?;
    if end != "END" {
        return r.err(format!("expected END, got {end:?}"));
    }
    let lattice = Lattice {
        m,
        level: [sugar, spice],
        capacity: [max_sugar, max_spice],
        pollution,
    };
    Ok(SimState::from_parts(seed, step, dual, lattice, agents, next_id, books))
}
