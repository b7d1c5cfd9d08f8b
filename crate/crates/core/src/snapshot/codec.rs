//! Versioned binary serialization of a [`SnapshotStore`].
//!
//! Layout (little endian): magic, `u32` version, label, applications,
//! classification offsets and symbols, citation offsets and citing indices.
//! Any other version is rejected.

use std::io::{self, Read, Write};

use chrono::{Datelike, NaiveDate};

use super::{ApplicationRecord, Office, SnapshotStore};
use crate::cpc::CpcSymbol;
use crate::error::{Error, Result};

pub const STORE_MAGIC: [u8; 8] = *b"PATDRSTO";
pub const STORE_VERSION: u32 = 1;

pub fn write_store<W: Write>(store: &SnapshotStore, mut w: W) -> Result<()> {
    w.write_all(&STORE_MAGIC)?;
    w.write_all(&STORE_VERSION.to_le_bytes())?;
    write_bytes(&mut w, store.label.as_bytes())?;

    w.write_all(&(store.applications.len() as u64).to_le_bytes())?;
    for a in &store.applications {
        w.write_all(&a.appln_id.to_le_bytes())?;
        w.write_all(&a.family_id.to_le_bytes())?;
        w.write_all(&a.authority.bytes())?;
        w.write_all(&a.filing_date.num_days_from_ce().to_le_bytes())?;
    }

    write_u64s(&mut w, &store.class_offsets)?;
    w.write_all(&(store.class_symbols.len() as u64).to_le_bytes())?;
    for s in &store.class_symbols {
        w.write_all(&[s.section() as u8, s.class_num(), s.subclass() as u8])?;
        w.write_all(&s.main_group().to_le_bytes())?;
        w.write_all(&s.subgroup().to_le_bytes())?;
    }

    write_u64s(&mut w, &store.cite_offsets)?;
    w.write_all(&(store.citing.len() as u64).to_le_bytes())?;
    for &g in &store.citing {
        w.write_all(&g.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_store<R: Read>(mut r: R) -> Result<SnapshotStore> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic).map_err(eof)?;
    if magic != STORE_MAGIC {
        return Err(Error::Format("not a snapshot store (bad magic bytes)".into()));
    }
    let version = read_u32(&mut r)?;
    if version != STORE_VERSION {
        return Err(Error::Format(format!(
            "store version {version} is not supported (expected {STORE_VERSION})"
        )));
    }
    let label = String::from_utf8(read_bytes(&mut r)?)
        .map_err(|_| Error::Format("label is not UTF-8".into()))?;

    let n_apps = read_len(&mut r)?;
    let mut applications = Vec::with_capacity(n_apps.min(1 << 24));
    for _ in 0..n_apps {
        let appln_id = read_u64(&mut r)?;
        let family_id = read_u64(&mut r)?;
        let mut office = [0u8; 2];
        r.read_exact(&mut office).map_err(eof)?;
        let days = read_u32(&mut r)? as i32;
        applications.push(ApplicationRecord {
            appln_id,
            family_id,
            authority: Office::from_bytes(&office)
                .ok_or_else(|| Error::Format("invalid office code".into()))?,
            filing_date: NaiveDate::from_num_days_from_ce_opt(days)
                .ok_or_else(|| Error::Format("invalid filing date".into()))?,
        });
    }
    if !applications.windows(2).all(|w| w[0].appln_id < w[1].appln_id) {
        return Err(Error::Format("applications are not sorted by id".into()));
    }

    let class_offsets = read_u64s(&mut r)?;
    let n_symbols = read_len(&mut r)?;
    let mut class_symbols = Vec::with_capacity(n_symbols.min(1 << 24));
    for _ in 0..n_symbols {
        let mut head = [0u8; 3];
        r.read_exact(&mut head).map_err(eof)?;
        let mut mg = [0u8; 2];
        r.read_exact(&mut mg).map_err(eof)?;
        let sub = read_u32(&mut r)?;
        let sym = CpcSymbol::new(
            head[0] as char,
            head[1],
            head[2] as char,
            u16::from_le_bytes(mg),
            sub,
        )
        .map_err(|e| Error::Format(e.to_string()))?;
        class_symbols.push(sym);
    }
    check_offsets(&class_offsets, n_apps, n_symbols, "classification")?;

    let cite_offsets = read_u64s(&mut r)?;
    let n_citing = read_len(&mut r)?;
    let mut citing = Vec::with_capacity(n_citing.min(1 << 24));
    for _ in 0..n_citing {
        let g = read_u32(&mut r)?;
        if g as usize >= n_apps {
            return Err(Error::Format("citation refers past the application table".into()));
        }
        citing.push(g);
    }
    check_offsets(&cite_offsets, n_apps, n_citing, "citation")?;

    let mut trailing = [0u8; 1];
    if r.read(&mut trailing)? != 0 {
        return Err(Error::Format("trailing bytes after store".into()));
    }

    Ok(SnapshotStore {
        label,
        applications,
        class_offsets,
        class_symbols,
        cite_offsets,
        citing,
    })
}

fn check_offsets(offsets: &[u64], n_apps: usize, n_items: usize, what: &str) -> Result<()> {
    let ok = offsets.len() == n_apps + 1
        && offsets[0] == 0
        && offsets[n_apps] as usize == n_items
        && offsets.windows(2).all(|w| w[0] <= w[1]);
    if ok {
        Ok(())
    } else {
        Err(Error::Format(format!("inconsistent {what} offsets")))
    }
}

fn eof(e: io::Error) -> Error {
    if e.kind() == io::ErrorKind::UnexpectedEof {
        Error::Format("store file is truncated".into())
    } else {
        Error::Io(e)
    }
}

fn write_bytes<W: Write>(w: &mut W, b: &[u8]) -> io::Result<()> {
    w.write_all(&(b.len() as u64).to_le_bytes())?;
    w.write_all(b)
}

fn write_u64s<W: Write>(w: &mut W, v: &[u64]) -> io::Result<()> {
    w.write_all(&(v.len() as u64).to_le_bytes())?;
    for x in v {
        w.write_all(&x.to_le_bytes())?;
    }
    Ok(())
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b).map_err(eof)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b).map_err(eof)?;
    Ok(u64::from_le_bytes(b))
}

fn read_len<R: Read>(r: &mut R) -> Result<usize> {
    let n = read_u64(r)?;
    usize::try_from(n).map_err(|_| Error::Format("length does not fit in memory".into()))
}

fn read_bytes<R: Read>(r: &mut R) -> Result<Vec<u8>> {
    let n = read_len(r)?;
    if n > 1 << 20 {
        return Err(Error::Format("label too long".into()));
    }
    let mut b = vec![0u8; n];
    r.read_exact(&mut b).map_err(eof)?;
    Ok(b)
}

fn read_u64s<R: Read>(r: &mut R) -> Result<Vec<u64>> {
    let n = read_len(r)?;
    let mut v = Vec::with_capacity(n.min(1 << 24));
    for _ in 0..n {
        v.push(read_u64(r)?);
    }
    Ok(v)
}
