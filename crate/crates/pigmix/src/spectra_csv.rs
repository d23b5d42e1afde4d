//! Text formats for measured spectra.
//!
//! Pigment file, one spectrum per line:
//!
//! ```text
//! pigment_index, role, quantity_mL, v380, v390, ..., v780
//! 3, Rw, 0.12, 0.41, ...        reflectance on white paper
//! 3, T, 0.12, 0.77, ...         relative transmittance
//! SUBSTRATE, Rw, -, 0.83, ...   the white paper itself
//! BLACK, Rw, -, 0.001, ...      black paper (optional)
//! 3, Rb, 0.01, 0.02, ...        0.01 mL on black paper (optional)
//! ```
//!
//! Mixture file: `pigment_a, pigment_b, q_a_mL, q_b_mL, v380, ..., v780`.
//!
//! Lines starting with `#` and blank lines are ignored. Values are written
//! with the shortest decimal that reads back to the same `f64`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use pigmix_core::dataset::{BlackBacked, MixKey};
use pigmix_core::spectrum::{
    wavelength_nm, PigmentId, PigmentRecord, Quantity, Spectrum, CANONICAL_QUANTITIES_UL, PIGMENT_COUNT, SAMPLES,
};

use crate::error::{AppError, AppResult, MissingRow};

/// Quantity of the black-backed samples.
pub const BLACK_BACKED_UL: u32 = 10;

/// Contents of a pigment file.
#[derive(Clone, Debug, PartialEq)]
pub struct PigmentFile {
    pub records: Vec<PigmentRecord>,
    pub substrate: Spectrum,
    pub black_backing: Option<BlackBacked>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
enum Role {
    Rw,
    T,
    Rb,
}

impl Role {
    fn name(self) -> &'static str {
        match self {
            Role::Rw => "Rw",
            Role::T => "T",
            Role::Rb => "Rb",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
enum Subject {
    Pigment(PigmentId),
    Substrate,
    Black,
}

fn header_comment(lead: &str) -> String {
    let mut s = format!("# {lead}");
    for k in 0..SAMPLES {
        let _ = write!(s, ",v{}", wavelength_nm(k));
    }
    s.push('\n');
    s
}

fn push_values(line: &mut String, s: &Spectrum) {
    for v in s.values() {
        let _ = write!(line, ",{v}");
    }
    line.push('\n');
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> AppError {
    AppError::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn parse_spectrum(path: &Path, line: usize, fields: &[&str]) -> AppResult<Spectrum> {
    if fields.len() != SAMPLES {
        return Err(parse_err(
            path,
            line,
            format!("expected {SAMPLES} spectral values, found {}", fields.len()),
        ));
    }
    let mut v = [0.0; SAMPLES];
    for (k, f) in fields.iter().enumerate() {
        let x: f64 = f
            .parse()
            .map_err(|_| parse_err(path, line, format!("bad value {f:?} at {} nm", wavelength_nm(k))))?;
        if !x.is_finite() || x < 0.0 {
            return Err(parse_err(
                path,
                line,
                format!("value {f} at {} nm must be finite and non-negative", wavelength_nm(k)),
            ));
        }
        v[k] = x;
    }
    Ok(Spectrum::new(v)?)
}

fn parse_pigment(path: &Path, line: usize, f: &str) -> AppResult<PigmentId> {
    f.parse::<u8>()
        .ok()
        .and_then(|i| PigmentId::new(i).ok())
        .ok_or_else(|| parse_err(path, line, format!("pigment index {f:?} not in 1..=13")))
}

fn parse_quantity(path: &Path, line: usize, f: &str) -> AppResult<Quantity> {
    let ml: f64 = f
        .parse()
        .map_err(|_| parse_err(path, line, format!("bad quantity {f:?}")))?;
    Quantity::from_ml(ml).map_err(|e| parse_err(path, line, e.to_string()))
}

/// Data lines with their 1-based line numbers, split on commas.
fn data_lines(text: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    text.lines().enumerate().filter_map(|(i, l)| {
        let t = l.trim();
        if t.is_empty() || t.starts_with('#') {
            None
        } else {
            Some((i + 1, t.split(',').map(str::trim).collect()))
        }
    })
}

pub fn parse_pigments(text: &str, path: &Path) -> AppResult<PigmentFile> {
    let mut rows: BTreeMap<(Subject, Role, u32), (usize, Spectrum)> = BTreeMap::new();
    for (line, fields) in data_lines(text) {
        if fields.len() < 3 {
            return Err(parse_err(path, line, "expected pigment, role, quantity and 41 values"));
        }
        let role = match fields[1] {
            "Rw" => Role::Rw,
            "T" => Role::T,
            "Rb" => Role::Rb,
            other => return Err(parse_err(path, line, format!("unknown role {other:?}"))),
        };
        let (subject, q_ul) = match fields[0] {
            "SUBSTRATE" | "BLACK" => {
                if role != Role::Rw || fields[2] != "-" {
                    return Err(parse_err(
                        path,
                        line,
                        format!("{} rows must read `{}, Rw, -`", fields[0], fields[0]),
                    ));
                }
                let s = if fields[0] == "SUBSTRATE" {
                    Subject::Substrate
                } else {
                    Subject::Black
                };
                (s, 0)
            }
            f => {
                let p = parse_pigment(path, line, f)?;
                let q = parse_quantity(path, line, fields[2])?;
                match role {
                    Role::Rb if q.microliters() != BLACK_BACKED_UL => {
                        return Err(parse_err(path, line, "black-backed samples must be at 0.01 mL"));
                    }
                    Role::Rw | Role::T if !q.is_canonical() => {
                        return Err(parse_err(
                            path,
                            line,
                            format!("{} mL is not a measured quantity", q.ml()),
                        ));
                    }
                    _ => {}
                }
                (Subject::Pigment(p), q.microliters())
            }
        };
        let spectrum = parse_spectrum(path, line, &fields[3..])?;
        if let Some((first, _)) = rows.insert((subject, role, q_ul), (line, spectrum)) {
            return Err(parse_err(path, line, format!("duplicate of line {first}")));
        }
    }

    let mut missing = Vec::new();
    for p in PigmentId::all() {
        for role in [Role::Rw, Role::T] {
            for &q in &CANONICAL_QUANTITIES_UL {
                if !rows.contains_key(&(Subject::Pigment(p), role, q)) {
                    missing.push(MissingRow {
                        pigment: p.index(),
                        quantity_ml: q as f64 / 1000.0,
                        role: role.name(),
                    });
                }
            }
        }
    }
    let black_paper = rows.get(&(Subject::Black, Role::Rw, 0)).map(|r| r.1);
    let any_rb = rows.keys().any(|k| k.1 == Role::Rb);
    if black_paper.is_some() || any_rb {
        for p in PigmentId::all() {
            if !rows.contains_key(&(Subject::Pigment(p), Role::Rb, BLACK_BACKED_UL)) {
                missing.push(MissingRow {
                    pigment: p.index(),
                    quantity_ml: BLACK_BACKED_UL as f64 / 1000.0,
                    role: "Rb",
                });
            }
        }
    }
    if !missing.is_empty() {
        return Err(AppError::MissingEntries {
            path: path.to_path_buf(),
            entries: missing,
        });
    }
    let substrate = rows
        .get(&(Subject::Substrate, Role::Rw, 0))
        .map(|r| r.1)
        .ok_or_else(|| AppError::format(path, "no SUBSTRATE row"))?;
    let black_backing = match black_paper {
        Some(paper) => Some(BlackBacked {
            paper,
            samples: PigmentId::all()
                .map(|p| (p, rows[&(Subject::Pigment(p), Role::Rb, BLACK_BACKED_UL)].1))
                .collect(),
        }),
        None if any_rb => return Err(AppError::format(path, "Rb rows need a BLACK row")),
        None => None,
    };

    let mut records = Vec::with_capacity(PIGMENT_COUNT);
    for p in PigmentId::all() {
        let collect = |role| {
            CANONICAL_QUANTITIES_UL
                .iter()
                .map(|&q| (Quantity::from_microliters(q), rows[&(Subject::Pigment(p), role, q)].1))
                .collect::<Vec<_>>()
        };
        records.push(PigmentRecord::new(p, &collect(Role::Rw), &collect(Role::T))?);
    }
    Ok(PigmentFile {
        records,
        substrate,
        black_backing,
    })
}

pub fn write_pigments(file: &PigmentFile) -> String {
    let mut out = header_comment("pigment_index,role,quantity_mL");
    let mut line = String::new();
    for rec in &file.records {
        for (role, pick) in [("Rw", 0), ("T", 1)] {
            for (q, rw, t) in rec.entries() {
                line.clear();
                let _ = write!(line, "{},{role},{q}", rec.id.index());
                push_values(&mut line, if pick == 0 { rw } else { t });
                out.push_str(&line);
            }
        }
        if let Some(s) = file.black_backing.as_ref().and_then(|b| b.samples.get(&rec.id)) {
            line.clear();
            let _ = write!(
                line,
                "{},Rb,{}",
                rec.id.index(),
                Quantity::from_microliters(BLACK_BACKED_UL)
            );
            push_values(&mut line, s);
            out.push_str(&line);
        }
    }
    line.clear();
    line.push_str("SUBSTRATE,Rw,-");
    push_values(&mut line, &file.substrate);
    out.push_str(&line);
    if let Some(b) = &file.black_backing {
        line.clear();
        line.push_str("BLACK,Rw,-");
        push_values(&mut line, &b.paper);
        out.push_str(&line);
    }
    out
}

pub fn parse_mixtures(text: &str, path: &Path) -> AppResult<BTreeMap<MixKey, Spectrum>> {
    let mut out = BTreeMap::new();
    let mut lines = BTreeMap::new();
    for (line, fields) in data_lines(text) {
        if fields.len() < 4 {
            return Err(parse_err(
                path,
                line,
                "expected pigment_a, pigment_b, q_a, q_b and 41 values",
            ));
        }
        let key = MixKey {
            pigment_a: parse_pigment(path, line, fields[0])?,
            pigment_b: parse_pigment(path, line, fields[1])?,
            q_a: parse_quantity(path, line, fields[2])?,
            q_b: parse_quantity(path, line, fields[3])?,
        };
        let s = parse_spectrum(path, line, &fields[4..])?;
        if let Some(first) = lines.insert(key, line) {
            return Err(parse_err(path, line, format!("duplicate of line {first}")));
        }
        out.insert(key, s);
    }
    Ok(out)
}

pub fn write_mixtures(mixtures: &BTreeMap<MixKey, Spectrum>) -> String {
    let mut out = header_comment("pigment_a,pigment_b,q_a_mL,q_b_mL");
    let mut line = String::new();
    for (k, s) in mixtures {
        line.clear();
        let _ = write!(
            line,
            "{},{},{},{}",
            k.pigment_a.index(),
            k.pigment_b.index(),
            k.q_a,
            k.q_b
        );
        push_values(&mut line, s);
        out.push_str(&line);
    }
    out
}
