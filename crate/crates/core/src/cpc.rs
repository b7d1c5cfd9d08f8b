//! CPC classification symbols and classification-scheme versions.
//!
//! A [`CpcSymbol`] is stored in parsed form (section, class, subclass, main
//! group, subgroup) so that comparisons never depend on the raw text layout.
//! Both the padded official form (`"Y02E  60/10"`) and the compact form
//! (`"Y02E60/10"`) parse to the same value. Rendering always produces the
//! compact form.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{BufRead, BufReader, Read};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAX_MAIN_GROUP: u16 = 9999;
pub const MAX_SUBGROUP: u32 = 999_999;

/// A parsed CPC symbol.
///
/// `main_group == 0` marks a subclass-level symbol (`"Y02E"`), in which case
/// `subgroup` is 0 as well. A subgroup of 0 on a group symbol is the main
/// group itself (`"A01B1/00"`).
///
/// Ordering is lexicographic over (section, class, subclass, main group,
/// subgroup), which is the field order below.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CpcSymbol {
    section: u8,
    class_num: u8,
    subclass: u8,
    main_group: u16,
    subgroup: u32,
}

/// Truncation depth used when a symbol is reduced to a coarser category.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Section,
    Class,
    Subclass,
    /// Subclass plus main group, e.g. `Y02E60`.
    Group,
}

fn is_section(b: u8) -> bool {
    matches!(b, b'A'..=b'H' | b'Y')
}

impl CpcSymbol {
    pub fn new(
        section: char,
        class_num: u8,
        subclass: char,
        main_group: u16,
        subgroup: u32,
    ) -> Result<Self> {
        let bad = |reason| Error::MalformedSymbol {
            raw: format!("{section}{class_num:02}{subclass}{main_group}/{subgroup}"),
            reason,
        };
        if !section.is_ascii() || !is_section(section as u8) {
            return Err(bad("section must be one of A-H or Y"));
        }
        if class_num > 99 {
            return Err(bad("class must have two digits"));
        }
        if !subclass.is_ascii_uppercase() {
            return Err(bad("subclass must be an uppercase letter"));
        }
        if main_group > MAX_MAIN_GROUP {
            return Err(bad("main group out of range"));
        }
        if subgroup > MAX_SUBGROUP {
            return Err(bad("subgroup out of range"));
        }
        if main_group == 0 && subgroup != 0 {
            return Err(bad("subgroup without main group"));
        }
        Ok(CpcSymbol {
            section: section as u8,
            class_num,
            subclass: subclass as u8,
            main_group,
            subgroup,
        })
    }

    pub fn section(&self) -> char {
        self.section as char
    }

    pub fn class_num(&self) -> u8 {
        self.class_num
    }

    pub fn subclass(&self) -> char {
        self.subclass as char
    }

    pub fn main_group(&self) -> u16 {
        self.main_group
    }

    pub fn subgroup(&self) -> u32 {
        self.subgroup
    }

    /// True for any symbol in CPC class Y02.
    pub fn is_green(&self) -> bool {
        self.section == b'Y' && self.class_num == 2
    }

    /// Returns the symbol with every field below `level` cleared.
    ///
    /// The result is only meant as a grouping key; render it with
    /// [`CpcSymbol::truncate`] at the same level.
    pub fn truncated(&self, level: Level) -> CpcSymbol {
        let mut key = *self;
        match level {
            Level::Section => {
                key.class_num = 0;
                key.subclass = 0;
                key.main_group = 0;
                key.subgroup = 0;
            }
            Level::Class => {
                key.subclass = 0;
                key.main_group = 0;
                key.subgroup = 0;
            }
            Level::Subclass => {
                key.main_group = 0;
                key.subgroup = 0;
            }
            Level::Group => key.subgroup = 0,
        }
        key
    }

    /// Canonical text of the symbol cut at `level`: `"Y"`, `"Y02"`, `"Y02E"`
    /// or `"Y02E60"`.
    pub fn truncate(&self, level: Level) -> String {
        let s = self.section as char;
        match level {
            Level::Section => s.to_string(),
            Level::Class => format!("{s}{:02}", self.class_num),
            Level::Subclass => format!("{s}{:02}{}", self.class_num, self.subclass as char),
            Level::Group if self.main_group == 0 => {
                format!("{s}{:02}{}", self.class_num, self.subclass as char)
            }
            Level::Group => format!(
                "{s}{:02}{}{}",
                self.class_num, self.subclass as char, self.main_group
            ),
        }
    }

    pub fn is_subclass_level(&self) -> bool {
        self.main_group == 0
    }
}

/// Parses a CPC symbol in padded or compact form.
///
/// All whitespace is removed before parsing. Subclass-only input yields
/// `main_group = 0, subgroup = 0`; a main group without a slash yields
/// `subgroup = 0`.
pub fn parse_symbol(raw: &str) -> Result<CpcSymbol> {
    parse_bytes(raw.as_bytes()).map_err(|reason| Error::MalformedSymbol {
        raw: raw.to_string(),
        reason,
    })
}

/// Allocation-free parser shared with the ingestion hot path.
pub(crate) fn parse_bytes(raw: &[u8]) -> std::result::Result<CpcSymbol, &'static str> {
    let mut buf = [0u8; 24];
    let mut len = 0;
    for &b in raw {
        if b.is_ascii_whitespace() {
            continue;
        }
        if len == buf.len() {
            return Err("symbol too long");
        }
        buf[len] = b;
        len += 1;
    }
    let s = &buf[..len];
    if s.is_empty() {
        return Err("empty symbol");
    }
    if s.len() < 4 {
        return Err("expected section, two-digit class and subclass letter");
    }
    if !is_section(s[0]) {
        return Err("section must be one of A-H or Y");
    }
    if !s[1].is_ascii_digit() || !s[2].is_ascii_digit() {
        return Err("class must have two digits");
    }
    if !s[3].is_ascii_uppercase() {
        return Err("subclass must be an uppercase letter");
    }
    let class_num = (s[1] - b'0') * 10 + (s[2] - b'0');
    let rest = &s[4..];
    let (main_group, subgroup) = if rest.is_empty() {
        (0, 0)
    } else {
        let (main, sub) = match rest.iter().position(|&b| b == b'/') {
            Some(i) => (&rest[..i], Some(&rest[i + 1..])),
            None => (rest, None),
        };
        let main = digits(main, 4).ok_or("main group must be 1-4 digits")?;
        if main == 0 {
            return Err("main group must be positive");
        }
        let sub = match sub {
            Some(d) => digits(d, 6).ok_or("subgroup must be 1-6 digits")?,
            None => 0,
        };
        (main as u16, sub)
    };
    Ok(CpcSymbol {
        section: s[0],
        class_num,
        subclass: s[3],
        main_group,
        subgroup,
    })
}

fn digits(d: &[u8], max_len: usize) -> Option<u32> {
    if d.is_empty() || d.len() > max_len || !d.iter().all(u8::is_ascii_digit) {
        return None;
    }
    Some(d.iter().fold(0u32, |acc, &b| acc * 10 + u32::from(b - b'0')))
}

impl fmt::Display for CpcSymbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}{:02}{}",
            self.section as char, self.class_num, self.subclass as char
        )?;
        if self.main_group != 0 {
            write!(f, "{}/{:02}", self.main_group, self.subgroup)?;
        }
        Ok(())
    }
}

impl fmt::Debug for CpcSymbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CpcSymbol({self})")
    }
}

impl FromStr for CpcSymbol {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        parse_symbol(s)
    }
}

/// One line of a classification scheme version.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SchemeEntry {
    pub symbol: CpcSymbol,
    pub title: String,
    pub indent_level: u32,
}

/// Changes to one subclass between two scheme versions.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SchemeDelta {
    /// Four-character subclass code, e.g. `"Y02C"`.
    pub subclass: String,
    pub deleted: BTreeSet<CpcSymbol>,
    pub added: BTreeSet<CpcSymbol>,
    pub retitled: BTreeSet<CpcSymbol>,
    pub indent_changed: BTreeSet<CpcSymbol>,
}

impl SchemeDelta {
    fn is_empty(&self) -> bool {
        self.deleted.is_empty()
            && self.added.is_empty()
            && self.retitled.is_empty()
            && self.indent_changed.is_empty()
    }

    /// Which change kinds occurred, in the order deleted, added, retitled,
    /// indentation.
    pub fn marks(&self) -> [bool; 4] {
        [
            !self.deleted.is_empty(),
            !self.added.is_empty(),
            !self.retitled.is_empty(),
            !self.indent_changed.is_empty(),
        ]
    }

    pub fn change_count(&self) -> usize {
        self.deleted.len() + self.added.len() + self.retitled.len() + self.indent_changed.len()
    }
}

pub const SCHEME_HEADER: [&str; 3] = ["symbol", "indent_level", "title"];

/// Reads a scheme TSV (`symbol\tindent_level\ttitle`).
///
/// Scheme files are small curated inputs, so any bad row is fatal.
pub fn read_scheme<R: Read>(reader: R, source_name: &str) -> Result<Vec<SchemeEntry>> {
    let mut lines = BufReader::new(reader).lines();
    let header = match lines.next() {
        Some(line) => line?,
        None => return Err(Error::schema(source_name, "missing header row")),
    };
    let header = header.trim_end_matches('\r');
    if header.split('\t').collect::<Vec<_>>() != SCHEME_HEADER {
        return Err(Error::schema(
            source_name,
            format!("expected header {:?}, found {header:?}", SCHEME_HEADER.join("\t")),
        ));
    }
    let mut entries = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let lineno = i + 2;
        let mut cols = line.splitn(3, '\t');
        let (Some(sym), Some(indent), Some(title)) = (cols.next(), cols.next(), cols.next()) else {
            return Err(Error::schema(
                source_name,
                format!("line {lineno}: expected 3 columns"),
            ));
        };
        let symbol = parse_symbol(sym)?;
        let indent_level = indent.trim().parse().map_err(|_| {
            Error::schema(source_name, format!("line {lineno}: bad indent level {indent:?}"))
        })?;
        entries.push(SchemeEntry {
            symbol,
            title: title.to_string(),
            indent_level,
        });
    }
    validate_indentation(&entries, source_name)?;
    Ok(entries)
}

/// Subgroup entries must be indented deeper than their main group.
fn validate_indentation(entries: &[SchemeEntry], source_name: &str) -> Result<()> {
    let by_symbol = index_scheme(entries)?;
    for e in entries {
        if e.symbol.main_group() == 0 || e.symbol.subgroup() == 0 {
            continue;
        }
        let parent = e.symbol.truncated(Level::Group);
        if let Some(p) = by_symbol.get(&parent) {
            if e.indent_level <= p.indent_level {
                return Err(Error::schema(
                    source_name,
                    format!(
                        "{} (indent {}) is not indented below main group {} (indent {})",
                        e.symbol, e.indent_level, parent, p.indent_level
                    ),
                ));
            }
        }
    }
    Ok(())
}

fn index_scheme(entries: &[SchemeEntry]) -> Result<BTreeMap<CpcSymbol, &SchemeEntry>> {
    let mut map = BTreeMap::new();
    for e in entries {
        if map.insert(e.symbol, e).is_some() {
            return Err(Error::DuplicateSymbol(e.symbol));
        }
    }
    Ok(map)
}

/// Compares two scheme versions, one [`SchemeDelta`] per affected subclass,
/// sorted by subclass. Subclasses without any change are omitted.
pub fn scheme_diff(old: &[SchemeEntry], new: &[SchemeEntry]) -> Result<Vec<SchemeDelta>> {
    let old = index_scheme(old)?;
    let new = index_scheme(new)?;
    let mut deltas: BTreeMap<CpcSymbol, SchemeDelta> = BTreeMap::new();

    for (sym, o) in &old {
        let d = delta_entry(&mut deltas, sym);
        match new.get(sym) {
            None => {
                d.deleted.insert(*sym);
            }
            Some(n) => {
                if o.title != n.title {
                    d.retitled.insert(*sym);
                }
                if o.indent_level != n.indent_level {
                    d.indent_changed.insert(*sym);
                }
            }
        }
    }
    for sym in new.keys().filter(|s| !old.contains_key(s)) {
        delta_entry(&mut deltas, sym).added.insert(*sym);
    }
    Ok(deltas.into_values().filter(|d| !d.is_empty()).collect())
}

fn delta_entry<'a>(
    deltas: &'a mut BTreeMap<CpcSymbol, SchemeDelta>,
    sym: &CpcSymbol,
) -> &'a mut SchemeDelta {
    let key = sym.truncated(Level::Subclass);
    deltas.entry(key).or_insert_with(|| SchemeDelta {
        subclass: key.truncate(Level::Subclass),
        ..SchemeDelta::default()
    })
}
