//! Plain-text file formats.
//!
//! Every format is line oriented and UTF-8. Floats are written with Rust's
//! shortest round-trip representation, so reading a written file gives back
//! bit-identical values.
//!
//! | file | line grammar |
//! |------|--------------|
//! | embedding space | header `#dim=<d> period=<id>`, then `token\tv1 v2 ... vd` |
//! | similarity set | header `# measure=<m> backend=<b> key=value ...`, then `target\tscore`; `#skip target reason` |
//! | binary labels (task 1) | `word\t0` or `word\t1` |
//! | ranking (task 2) | `word\tdistance` |
//! | graded gold | `word\tscore` |
//! | targets | one word per line |
//! | collocation profiles | `word\tperiod\tctx:score,ctx:score,...` with `\`, `,` and `:` escaped by a backslash |

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use semchange_core::collocation::{CollocationProfile, ProfileSpace};
use semchange_core::detect::{LabelSet, RankedList, Strategy};
use semchange_core::embedding::EmbeddingSpace;
use semchange_core::similarity::{Measure, SimilaritySet};

use crate::error::{Error, Result};

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Writes `contents` to `path` through a temporary file in the same
/// directory, so readers never see a half-written file.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    std::io::Write::write_all(&mut tmp, contents.as_bytes()).map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty())
}

fn parse_f64(source: &str, line: usize, field: &str) -> Result<f64> {
    let v: f64 = field
        .parse()
        .map_err(|_| Error::parse(source, line, format!("not a number: {field:?}")))?;
    if !v.is_finite() {
        return Err(Error::parse(source, line, format!("non-finite value {field:?}")));
    }
    Ok(v)
}

fn check_token(source: &str, line: usize, token: &str) -> Result<()> {
    if token.is_empty() || token.chars().any(char::is_whitespace) {
        return Err(Error::parse(source, line, format!("bad token {token:?}")));
    }
    Ok(())
}

fn split_pair<'a>(source: &str, line: usize, text: &'a str) -> Result<(&'a str, &'a str)> {
    let (word, value) = text
        .split_once('\t')
        .ok_or_else(|| Error::parse(source, line, "expected `word<TAB>value`"))?;
    check_token(source, line, word)?;
    Ok((word, value))
}

// ---- embedding spaces ----

pub fn format_space(space: &EmbeddingSpace) -> String {
    let mut out = format!("#dim={} period={}\n", space.dim(), space.period_id());
    for (token, v) in space.iter() {
        out.push_str(token);
        out.push('\t');
        for (i, x) in v.iter().enumerate() {
            if i > 0 {
                out.push(' ');
            }
            write!(out, "{x}").unwrap();
        }
        out.push('\n');
    }
    out
}

pub fn parse_space(text: &str, source: &str) -> Result<EmbeddingSpace> {
    let mut lines = content_lines(text);
    let (n, header) = lines.next().ok_or_else(|| Error::parse(source, 1, "missing header"))?;
    let mut dim = None;
    let mut period = None;
    for field in header
        .strip_prefix('#')
        .ok_or_else(|| Error::parse(source, n, "header must start with `#`"))?
        .split_whitespace()
    {
        match field.split_once('=') {
            Some(("dim", d)) => dim = Some(d.parse::<usize>().map_err(|_| Error::parse(source, n, "bad dim"))?),
            Some(("period", p)) => period = Some(p.to_string()),
            _ => return Err(Error::parse(source, n, format!("unknown header field {field:?}"))),
        }
    }
    let dim = dim.ok_or_else(|| Error::parse(source, n, "header lacks dim"))?;
    let period = period.ok_or_else(|| Error::parse(source, n, "header lacks period"))?;
    let mut space = EmbeddingSpace::new(dim, period);
    let mut row = Vec::with_capacity(dim);
    for (n, line) in lines {
        let (token, values) = split_pair(source, n, line)?;
        row.clear();
        for v in values.split(' ') {
            row.push(parse_f64(source, n, v)?);
        }
        if row.len() != dim {
            return Err(Error::parse(
                source,
                n,
                format!("expected {dim} values, found {}", row.len()),
            ));
        }
        if space.contains(token) {
            return Err(Error::parse(source, n, format!("duplicate token {token:?}")));
        }
        space.insert(token, &row)?;
    }
    Ok(space)
}

pub fn read_space(path: &Path) -> Result<EmbeddingSpace> {
    parse_space(&read_text(path)?, &path.display().to_string())
}

pub fn write_space(path: &Path, space: &EmbeddingSpace) -> Result<()> {
    write_atomic(path, &format_space(space))
}

// ---- similarity sets ----

pub fn format_similarities(set: &SimilaritySet) -> String {
    let mut out = String::from("#");
    if let Some(m) = set.measure {
        write!(out, " measure={m}").unwrap();
    }
    if !set.backend.is_empty() {
        write!(out, " backend={}", set.backend).unwrap();
    }
    for (k, v) in &set.params {
        write!(out, " {k}={v}").unwrap();
    }
    out.push('\n');
    for (t, s) in &set.scores {
        writeln!(out, "{t}\t{s}").unwrap();
    }
    for (t, reason) in &set.skipped {
        writeln!(out, "#skip {t} {}", reason.replace('\n', " ")).unwrap();
    }
    out
}

pub fn parse_similarities(text: &str, source: &str) -> Result<SimilaritySet> {
    let mut set = SimilaritySet::default();
    for (n, line) in content_lines(text) {
        if let Some(rest) = line.strip_prefix("#skip ") {
            let (t, reason) = rest.split_once(' ').unwrap_or((rest, ""));
            check_token(source, n, t)?;
            set.skipped.push((t.to_string(), reason.to_string()));
        } else if let Some(rest) = line.strip_prefix('#') {
            for field in rest.split_whitespace() {
                let (k, v) = field
                    .split_once('=')
                    .ok_or_else(|| Error::parse(source, n, format!("bad header field {field:?}")))?;
                match k {
                    "measure" => {
                        set.measure = Some(
                            v.parse::<Measure>()
                                .map_err(|e| Error::parse(source, n, e.to_string()))?,
                        )
                    }
                    "backend" => set.backend = v.to_string(),
                    _ => set.params.push((k.to_string(), v.to_string())),
                }
            }
        } else {
            let (t, s) = split_pair(source, n, line)?;
            if set.scores.insert(t.to_string(), parse_f64(source, n, s)?).is_some() {
                return Err(Error::parse(source, n, format!("duplicate target {t:?}")));
            }
        }
    }
    Ok(set)
}

pub fn read_similarities(path: &Path) -> Result<SimilaritySet> {
    parse_similarities(&read_text(path)?, &path.display().to_string())
}

// ---- task 1 labels ----

pub fn format_labels(labels: &BTreeMap<String, u8>) -> String {
    let mut out = String::new();
    for (w, l) in labels {
        writeln!(out, "{w}\t{l}").unwrap();
    }
    out
}

pub fn parse_labels(text: &str, source: &str) -> Result<BTreeMap<String, u8>> {
    let mut labels = BTreeMap::new();
    for (n, line) in content_lines(text) {
        let (w, l) = split_pair(source, n, line)?;
        let l = match l.trim() {
            "0" => 0,
            "1" => 1,
            other => return Err(Error::parse(source, n, format!("label must be 0 or 1, got {other:?}"))),
        };
        if labels.insert(w.to_string(), l).is_some() {
            return Err(Error::parse(source, n, format!("duplicate word {w:?}")));
        }
    }
    Ok(labels)
}

pub fn read_labels(path: &Path) -> Result<BTreeMap<String, u8>> {
    parse_labels(&read_text(path)?, &path.display().to_string())
}

/// Reads predicted labels; the strategy is unknown from the file alone.
pub fn read_label_set(path: &Path, strategy: Strategy) -> Result<LabelSet> {
    Ok(LabelSet {
        strategy,
        labels: read_labels(path)?,
    })
}

// ---- task 2 rankings and graded gold ----

pub fn format_ranking(ranking: &RankedList) -> String {
    let mut out = String::new();
    for (w, d) in &ranking.entries {
        writeln!(out, "{w}\t{d}").unwrap();
    }
    out
}

/// `word\tvalue` lines in file order.
pub fn parse_scores(text: &str, source: &str) -> Result<Vec<(String, f64)>> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for (n, line) in content_lines(text) {
        let (w, v) = split_pair(source, n, line)?;
        if !seen.insert(w) {
            return Err(Error::parse(source, n, format!("duplicate word {w:?}")));
        }
        out.push((w.to_string(), parse_f64(source, n, v.trim())?));
    }
    Ok(out)
}

pub fn parse_ranking(text: &str, source: &str) -> Result<RankedList> {
    Ok(RankedList {
        entries: parse_scores(text, source)?,
    })
}

pub fn read_ranking(path: &Path) -> Result<RankedList> {
    parse_ranking(&read_text(path)?, &path.display().to_string())
}

pub fn format_graded(scores: &BTreeMap<String, f64>) -> String {
    let mut out = String::new();
    for (w, s) in scores {
        writeln!(out, "{w}\t{s}").unwrap();
    }
    out
}

pub fn read_graded(path: &Path) -> Result<BTreeMap<String, f64>> {
    Ok(parse_scores(&read_text(path)?, &path.display().to_string())?
        .into_iter()
        .collect())
}

// ---- targets ----

pub fn parse_targets(text: &str, source: &str) -> Result<BTreeSet<String>> {
    let mut targets = BTreeSet::new();
    for (n, line) in content_lines(text) {
        let t = line.trim();
        check_token(source, n, t)?;
        targets.insert(t.to_string());
    }
    Ok(targets)
}

pub fn read_targets(path: &Path) -> Result<BTreeSet<String>> {
    parse_targets(&read_text(path)?, &path.display().to_string())
}

pub fn format_targets(targets: &BTreeSet<String>) -> String {
    targets.iter().map(|t| format!("{t}\n")).collect()
}

// ---- collocation profiles ----

fn escape(token: &str, out: &mut String) {
    for c in token.chars() {
        if matches!(c, '\\' | ',' | ':') {
            out.push('\\');
        }
        out.push(c);
    }
}

pub fn format_profiles(space: &ProfileSpace) -> String {
    let mut out = String::new();
    for p in space.profiles.values() {
        out.push_str(&p.word);
        out.push('\t');
        out.push_str(&p.period_id);
        out.push('\t');
        for (i, (c, s)) in p.weights.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            escape(c, &mut out);
            write!(out, ":{s}").unwrap();
        }
        out.push('\n');
    }
    out
}

fn parse_profile_entries(source: &str, line: usize, text: &str) -> Result<BTreeMap<String, f64>> {
    let mut weights = BTreeMap::new();
    if text.is_empty() {
        return Ok(weights);
    }
    let mut token = String::new();
    let mut chars = text.chars();
    loop {
        token.clear();
        loop {
            match chars.next() {
                Some('\\') => token.push(
                    chars
                        .next()
                        .ok_or_else(|| Error::parse(source, line, "dangling escape"))?,
                ),
                Some(':') => break,
                Some(c) => token.push(c),
                None => return Err(Error::parse(source, line, "profile entry lacks `:score`")),
            }
        }
        let mut score = String::new();
        let mut more = false;
        for c in chars.by_ref() {
            if c == ',' {
                more = true;
                break;
            }
            score.push(c);
        }
        weights.insert(token.clone(), parse_f64(source, line, &score)?);
        if !more {
            return Ok(weights);
        }
    }
}

pub fn parse_profiles(text: &str, source: &str) -> Result<ProfileSpace> {
    let mut period_id: Option<String> = None;
    let mut profiles = BTreeMap::new();
    for (n, line) in text.lines().enumerate().map(|(i, l)| (i + 1, l.trim_end_matches('\r'))) {
        if line.is_empty() {
            continue;
        }
        let mut fields = line.splitn(3, '\t');
        let (Some(word), Some(period), Some(entries)) = (fields.next(), fields.next(), fields.next()) else {
            return Err(Error::parse(source, n, "expected `word<TAB>period<TAB>entries`"));
        };
        check_token(source, n, word)?;
        match &period_id {
            Some(p) if p != period => return Err(Error::parse(source, n, "profiles from several periods")),
            None => period_id = Some(period.to_string()),
            _ => {}
        }
        let profile = CollocationProfile {
            word: word.to_string(),
            period_id: period.to_string(),
            weights: parse_profile_entries(source, n, entries)?,
        };
        profiles.insert(word.to_string(), profile);
    }
    Ok(ProfileSpace {
        period_id: period_id.unwrap_or_default(),
        profiles,
    })
}

pub fn read_profiles(path: &Path) -> Result<ProfileSpace> {
    parse_profiles(&read_text(path)?, &path.display().to_string())
}
