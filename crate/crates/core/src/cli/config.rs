//! Scenario configuration files.
//!
//! ```text
//! # keys before the first section are defaults for every section
//! trials = 50
//!
//! [power_vs_nt]
//! M = 16
//! nt = 4..8          # integer lists may use inclusive ranges
//! nr = 4
//! snr_db = 10
//! design = total, peak
//! benchmark = zf
//! ```
//!
//! `M`, `nt`, `nr` and `design` may hold lists; a section expands into the
//! cartesian product of them, one scenario each. `snr_db` and `d0` are grids
//! inside a scenario. A file without sections is one scenario named
//! `default`.

use crate::sim::{Benchmark, Design, ModeKind, ScenarioConfig};
use crate::{Error, Result};

const KEYS: [&str; 11] = [
    "M",
    "nt",
    "nr",
    "snr_db",
    "mode",
    "d0",
    "design",
    "benchmark",
    "trials",
    "frames",
    "seed",
];

/// A value with the position of its first character.
#[derive(Debug, Clone)]
struct Entry {
    value: String,
    line: usize,
    column: usize,
}

#[derive(Debug, Clone, Default)]
struct Section {
    name: String,
    entries: Vec<(String, Entry)>,
}

impl Section {
    fn get(&self, key: &str) -> Option<&Entry> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, e)| e)
    }
}

fn parse_err(line: usize, column: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        column,
        message: message.into(),
    }
}

fn valid_name(name: &str) -> bool {
    !name.is_empty()
        && name
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.'))
}

fn split_sections(text: &str) -> Result<(Section, Vec<Section>)> {
    let mut defaults = Section::default();
    let mut sections: Vec<Section> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let content = raw.split('#').next().unwrap_or("");
        let trimmed = content.trim();
        if trimmed.is_empty() {
            continue;
        }
        let indent = content.len() - content.trim_start().len();
        if let Some(rest) = trimmed.strip_prefix('[') {
            let Some(name) = rest.strip_suffix(']') else {
                return Err(parse_err(line_no, indent + trimmed.len(), "expected `]`"));
            };
            let name = name.trim();
            if !valid_name(name) {
                return Err(parse_err(
                    line_no,
                    indent + 2,
                    format!("invalid section name `{name}` (use letters, digits, `_`, `-`, `.`)"),
                ));
            }
            if sections.iter().any(|s| s.name == name) {
                return Err(parse_err(
                    line_no,
                    indent + 2,
                    format!("duplicate section `{name}`"),
                ));
            }
            sections.push(Section {
                name: name.to_string(),
                entries: Vec::new(),
            });
            continue;
        }
        let Some(eq) = content.find('=') else {
            return Err(parse_err(line_no, indent + 1, "expected `key = value`"));
        };
        let key = content[..eq].trim();
        if !KEYS.contains(&key) {
            return Err(parse_err(
                line_no,
                indent + 1,
                format!("unknown key `{key}`; expected one of {}", KEYS.join(", ")),
            ));
        }
        let after = &content[eq + 1..];
        let value = after.trim();
        let column = eq + 2 + (after.len() - after.trim_start().len());
        if value.is_empty() {
            return Err(parse_err(
                line_no,
                column,
                format!("missing value for `{key}`"),
            ));
        }
        let target = sections.last_mut().unwrap_or(&mut defaults);
        if target.get(key).is_some() {
            return Err(parse_err(
                line_no,
                indent + 1,
                format!("duplicate key `{key}`"),
            ));
        }
        target.entries.push((
            key.to_string(),
            Entry {
                value: value.to_string(),
                line: line_no,
                column,
            },
        ));
    }
    Ok((defaults, sections))
}

/// Comma-separated items with their columns.
fn items(e: &Entry) -> Result<Vec<(String, usize)>> {
    let mut out = Vec::new();
    let mut offset = 0;
    for part in e.value.split(',') {
        let lead = part.len() - part.trim_start().len();
        let item = part.trim();
        if item.is_empty() {
            return Err(parse_err(e.line, e.column + offset, "empty list item"));
        }
        out.push((item.to_string(), e.column + offset + lead));
        offset += part.len() + 1;
    }
    Ok(out)
}

fn parse_uint_list(e: &Entry) -> Result<Vec<usize>> {
    let mut out = Vec::new();
    for (item, col) in items(e)? {
        let num = |s: &str| {
            s.trim().parse::<usize>().map_err(|_| {
                parse_err(
                    e.line,
                    col,
                    format!("expected a non-negative integer, got `{s}`"),
                )
            })
        };
        if let Some((lo, hi)) = item.split_once("..") {
            let (lo, hi) = (num(lo)?, num(hi)?);
            if lo > hi {
                return Err(parse_err(e.line, col, format!("empty range `{item}`")));
            }
            out.extend(lo..=hi);
        } else {
            out.push(num(&item)?);
        }
    }
    Ok(out)
}

fn parse_float_list(e: &Entry) -> Result<Vec<f64>> {
    items(e)?
        .into_iter()
        .map(|(item, col)| match item.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => Err(parse_err(
                e.line,
                col,
                format!("expected a finite number, got `{item}`"),
            )),
        })
        .collect()
}

fn parse_single<T>(e: &Entry, what: &str, f: impl Fn(&str) -> Option<T>) -> Result<T> {
    let list = items(e)?;
    if list.len() != 1 {
        return Err(parse_err(
            e.line,
            e.column,
            format!("expected a single {what}"),
        ));
    }
    let (item, col) = &list[0];
    f(item).ok_or_else(|| parse_err(e.line, *col, format!("expected {what}, got `{item}`")))
}

fn parse_designs(e: &Entry) -> Result<Vec<Design>> {
    items(e)?
        .into_iter()
        .map(|(item, col)| match item.as_str() {
            "total" => Ok(Design::Total),
            "peak" => Ok(Design::Peak),
            _ => Err(parse_err(
                e.line,
                col,
                format!("expected `total` or `peak`, got `{item}`"),
            )),
        })
        .collect()
}

fn required<'a>(sec: &'a Section, defaults: &'a Section, key: &str) -> Result<&'a Entry> {
    sec.get(key)
        .or_else(|| defaults.get(key))
        .ok_or_else(|| Error::Config {
            key: key.to_string(),
            message: format!("missing in scenario `{}`", sec.name),
        })
}

fn expand(sec: &Section, defaults: &Section) -> Result<Vec<ScenarioConfig>> {
    let lookup = |key: &str| sec.get(key).or_else(|| defaults.get(key));
    let orders = parse_uint_list(required(sec, defaults, "M")?)?;
    let nts = parse_uint_list(required(sec, defaults, "nt")?)?;
    let nrs = parse_uint_list(required(sec, defaults, "nr")?)?;
    let snr_db = parse_float_list(required(sec, defaults, "snr_db")?)?;
    let designs = match lookup("design") {
        Some(e) => parse_designs(e)?,
        None => vec![Design::Total],
    };
    let mode = match lookup("mode") {
        Some(e) => parse_single(e, "`fixed` or `relaxed`", |s| match s {
            "fixed" => Some(ModeKind::Fixed),
            "relaxed" => Some(ModeKind::Relaxed),
            _ => None,
        })?,
        None => ModeKind::Fixed,
    };
    let d0 = match (lookup("d0"), mode) {
        (Some(e), _) => parse_float_list(e)?,
        (None, ModeKind::Fixed) => vec![0.0],
        (None, ModeKind::Relaxed) => {
            return Err(Error::Config {
                key: "d0".into(),
                message: format!("scenario `{}` uses mode = relaxed but sets no d0", sec.name),
            })
        }
    };
    let benchmark = match lookup("benchmark") {
        Some(e) => parse_single(e, "`none` or `zf`", |s| match s {
            "none" => Some(Benchmark::None),
            "zf" => Some(Benchmark::Zf),
            _ => None,
        })?,
        None => Benchmark::None,
    };
    let uint = |key: &str, default: u64| -> Result<u64> {
        match lookup(key) {
            Some(e) => parse_single(e, "non-negative integer", |s| s.parse::<u64>().ok()),
            None => Ok(default),
        }
    };
    let trials = uint("trials", 100)? as usize;
    let frames = uint("frames", 100)? as usize;
    let seed = uint("seed", 0)?;

    let mut out = Vec::new();
    for &order in &orders {
        for &nt in &nts {
            for &nr in &nrs {
                for &design in &designs {
                    let mut name = sec.name.clone();
                    if orders.len() > 1 {
                        name.push_str(&format!("/M={order}"));
                    }
                    if nts.len() > 1 {
                        name.push_str(&format!("/nt={nt}"));
                    }
                    if nrs.len() > 1 {
                        name.push_str(&format!("/nr={nr}"));
                    }
                    if designs.len() > 1 {
                        name.push_str(if design == Design::Total {
                            "/total"
                        } else {
                            "/peak"
                        });
                    }
                    let cfg = ScenarioConfig {
                        mode,
                        d0: d0.clone(),
                        design,
                        benchmark,
                        trials,
                        frames,
                        seed,
                        ..ScenarioConfig::new(&name, order, nt, nr, snr_db.clone())
                    };
                    cfg.validate()?;
                    out.push(cfg);
                }
            }
        }
    }
    Ok(out)
}

/// Parses and validates a configuration file's text.
pub fn parse_config(text: &str) -> Result<Vec<ScenarioConfig>> {
    let (defaults, mut sections) = split_sections(text)?;
    if sections.is_empty() {
        if defaults.entries.is_empty() {
            return Err(Error::Config {
                key: "M".into(),
                message: "configuration defines no scenario".into(),
            });
        }
        sections.push(Section {
            name: "default".into(),
            entries: Vec::new(),
        });
    }
    let mut out = Vec::new();
    for sec in &sections {
        out.extend(expand(sec, &defaults)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_scenario() {
        let cfgs = parse_config("M=4\nnt=4\nnr=2\nsnr_db=10\ntrials=10\n").unwrap();
        assert_eq!(cfgs.len(), 1);
        let c = &cfgs[0];
        assert_eq!(
            (c.order, c.nt, c.nr, c.trials, c.frames),
            (4, 4, 2, 10, 100)
        );
        assert_eq!(c.snr_db, vec![10.0]);
        assert_eq!(c.name, "default");
        assert_eq!(c.grid().len(), 1);
    }

    #[test]
    fn snr_list_is_a_grid() {
        let cfgs = parse_config("[a]\nM = 16\nnt = 4\nnr = 2\nsnr_db = 0, 5, 10\n").unwrap();
        assert_eq!(cfgs.len(), 1);
        assert_eq!(cfgs[0].grid().len(), 3);
    }

    #[test]
    fn relaxed_8qam_rejected() {
        let err = parse_config("M=8\nnt=2\nnr=2\nsnr_db=10\nmode=relaxed\nd0=0.5\n").unwrap_err();
        assert!(
            matches!(err, Error::Config { ref key, .. } if key == "mode"),
            "{err}"
        );
    }

    #[test]
    fn defaults_lists_and_ranges_expand() {
        let text = "trials = 3 # shared\n[sweep]\nM=16\nnt=4..6\nnr=4\nsnr_db=10\ndesign=total,peak\n[one]\nM=4\nnt=2\nnr=1\nsnr_db=5\n";
        let cfgs = parse_config(text).unwrap();
        assert_eq!(cfgs.len(), 7);
        assert!(cfgs.iter().all(|c| c.trials == 3));
        assert_eq!(cfgs[0].name, "sweep/nt=4/total");
        assert_eq!(cfgs[5].name, "sweep/nt=6/peak");
        assert_eq!(cfgs[6].name, "one");
    }

    #[test]
    fn positions_are_reported() {
        match parse_config("M=4\nnt = 4x\n").unwrap_err() {
            Error::Parse { line, column, .. } => assert_eq!((line, column), (2, 6)),
            e => panic!("{e}"),
        }
        match parse_config("M=4\n  colour = red\n").unwrap_err() {
            Error::Parse {
                line,
                column,
                message,
            } => {
                assert_eq!((line, column), (2, 3));
                assert!(message.contains("colour"));
            }
            e => panic!("{e}"),
        }
        match parse_config("M=4\nnt=2\nnr=1\nsnr_db = 1, x\n").unwrap_err() {
            Error::Parse { line, column, .. } => assert_eq!((line, column), (4, 13)),
            e => panic!("{e}"),
        }
        assert!(matches!(
            parse_config("[a\nM=4"),
            Err(Error::Parse { line: 1, .. })
        ));
        assert!(matches!(
            parse_config("M=4\njunk\n"),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(matches!(
            parse_config("M=4\nM=8\n"),
            Err(Error::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn semantic_errors_name_the_key() {
        let key_of = |t: &str| match parse_config(t).unwrap_err() {
            Error::Config { key, .. } => key,
            e => panic!("{e}"),
        };
        assert_eq!(key_of("M=4\nnt=2\nnr=1\n"), "snr_db");
        assert_eq!(key_of("M=6\nnt=2\nnr=1\nsnr_db=1\n"), "M");
        assert_eq!(key_of("M=4\nnt=1\nnr=2\nsnr_db=1\n"), "nt");
        assert_eq!(
            key_of("M=16\nnt=2\nnr=1\nsnr_db=0\nmode=relaxed\nd0=1.5\n"),
            "d0"
        );
        assert_eq!(key_of("M=16\nnt=2\nnr=1\nsnr_db=0\nmode=relaxed\n"), "d0");
        assert_eq!(key_of(""), "M");
    }
}
