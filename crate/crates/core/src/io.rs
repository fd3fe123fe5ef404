//! Text formats for datasets and walks.
//!
//! Edge lists are CSV with header `sample_id,u,v,t`, integer ids and raw
//! timestamps. The writer prepends a comment line
//!
//! ```text
//! # format_version=1 t_end=<raw span> n_nodes=<universe> n_samples=<count>
//! ```
//!
//! which the reader uses when present. Without it the span is the largest
//! timestamp (or a caller-supplied value), the universe is `max id + 1` and
//! samples are the distinct `sample_id`s in ascending order.
//!
//! Walk files hold one truncated walk per line:
//! `x,y,t0_bar,u1,v1,t1_bar,u2,v2,t2_bar,...`, preceded by
//! `# format_version=1`.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Read, Write};

use crate::error::{Error, Result};
use crate::graph::{normalize_times, snap, BudgetEdge, Dataset, TemporalEdge, TemporalGraphSample, TruncatedWalk, WalkProfile};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Header {
    pub t_end: Option<f64>,
    pub n_nodes: Option<usize>,
    pub n_samples: Option<usize>,
}

fn parse_header(line: &str) -> Result<Header> {
    let mut h = Header::default();
    for kv in line.trim_start_matches('#').split_whitespace() {
        let Some((k, v)) = kv.split_once('=') else { continue };
        let bad = |e: &dyn std::fmt::Display| Error::Parse {
            line: 1,
            msg: format!("bad header field {k}: {e}"),
        };
        match k {
            "format_version" => {
                let ver: u32 = v.parse().map_err(|e| bad(&e))?;
                if ver != FORMAT_VERSION {
                    return Err(bad(&format!("unsupported version {ver}")));
                }
            }
            "t_end" => h.t_end = Some(v.parse().map_err(|e| bad(&e))?),
            "n_nodes" => h.n_nodes = Some(v.parse().map_err(|e| bad(&e))?),
            "n_samples" => h.n_samples = Some(v.parse().map_err(|e| bad(&e))?),
            _ => {}
        }
    }
    Ok(h)
}

/// Split off a leading `#` line, returning the parsed header and the line
/// count consumed.
fn split_header(text: &str) -> Result<(Header, &str, u64)> {
    match text.strip_prefix('#') {
        Some(_) => {
            let end = text.find('\n').map_or(text.len(), |i| i + 1);
            Ok((parse_header(&text[..end])?, &text[end..], 1))
        }
        None => Ok((Header::default(), text, 0)),
    }
}

/// A raw timestamp that normalizes back to exactly `t`.
fn raw_time(t: f64, t_end: f64) -> f64 {
    let back = |r: f64| snap(r / t_end).min(1.0);
    let r0 = (t * t_end).min(t_end);
    if back(r0) == t {
        return r0;
    }
    let (mut up, mut down) = (r0, r0);
    for _ in 0..16 {
        up = up.next_up().min(t_end);
        down = down.next_down().max(0.0);
        if back(up) == t {
            return up;
        }
        if back(down) == t {
            return down;
        }
    }
    log::warn!("timestamp {t} has no exact raw representation over span {t_end}");
    r0
}

#[derive(serde::Deserialize)]
struct Row {
    sample_id: usize,
    u: usize,
    v: usize,
    t: f64,
}

/// Parse an edge list. `t_end` overrides the header and the inferred span.
pub fn read_edge_list<R: Read>(mut reader: R, t_end: Option<f64>) -> Result<Dataset> {
    let mut text = String::new();
    reader.read_to_string(&mut text)?;
    let (header, body, skipped) = split_header(&text)?;
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(body.as_bytes());
    let mut groups: BTreeMap<usize, Vec<TemporalEdge>> = BTreeMap::new();
    let mut max_id = None::<usize>;
    let mut max_t = 0.0f64;
    let headers = rdr.headers()?.clone();
    for rec in rdr.records() {
        let parse_err = |e: csv::Error| Error::Parse {
            line: e.position().map_or(0, |p| p.line()) + skipped,
            msg: e.to_string(),
        };
        let rec = rec.map_err(parse_err)?;
        let line = rec.position().map_or(0, |p| p.line()) + skipped;
        let row: Row = rec.deserialize(Some(&headers)).map_err(|e| Error::Parse {
            line,
            msg: e.to_string(),
        })?;
        if !row.t.is_finite() || row.t < 0.0 {
            return Err(Error::Parse {
                line,
                msg: format!("timestamp {} must be finite and non-negative", row.t),
            });
        }
        max_id = Some(max_id.unwrap_or(0).max(row.u).max(row.v));
        max_t = max_t.max(row.t);
        groups.entry(row.sample_id).or_default().push(TemporalEdge::new(row.u, row.v, row.t));
    }
    let n_nodes = header.n_nodes.unwrap_or(0).max(max_id.map_or(0, |m| m + 1));
    if n_nodes == 0 {
        return Err(Error::Empty("edge list has no edges and no declared node universe".into()));
    }
    let t_end = t_end.or(header.t_end).unwrap_or(max_t);
    if !(t_end > 0.0) {
        return Err(Error::Range("cannot infer a positive time span".into()));
    }
    let samples = match header.n_samples {
        Some(n) => {
            if let Some((&id, _)) = groups.range(n..).next() {
                return Err(Error::Range(format!("sample_id {id} outside declared 0..{n}")));
            }
            (0..n)
                .map(|i| normalize_times(n_nodes, groups.get(&i).map_or(&[][..], |v| v), t_end))
                .collect::<Result<Vec<_>>>()?
        }
        None => groups
            .values()
            .map(|edges| normalize_times(n_nodes, edges, t_end))
            .collect::<Result<Vec<_>>>()?,
    };
    Dataset::new(samples)
}

pub fn write_edge_list<W: Write>(writer: W, samples: &[TemporalGraphSample]) -> Result<()> {
    let first = samples.first().ok_or_else(|| Error::Empty("no samples to write".into()))?;
    let (n_nodes, t_end) = (first.n_nodes, first.t_end_raw);
    let mut w = std::io::BufWriter::new(writer);
    writeln!(
        w,
        "# format_version={FORMAT_VERSION} t_end={t_end} n_nodes={n_nodes} n_samples={}",
        samples.len()
    )?;
    let mut csv = csv::Writer::from_writer(w);
    csv.write_record(["sample_id", "u", "v", "t"])?;
    for (i, s) in samples.iter().enumerate() {
        if s.n_nodes != n_nodes || s.t_end_raw != t_end {
            return Err(Error::Config(format!("sample {i} does not share the first sample's universe and span")));
        }
        for e in &s.edges {
            csv.write_record(&[
                i.to_string(),
                e.u.0.to_string(),
                e.v.0.to_string(),
                raw_time(e.t, t_end).to_string(),
            ])?;
        }
    }
    csv.flush()?;
    Ok(())
}

pub fn write_walks<W: Write>(writer: W, walks: &[TruncatedWalk]) -> Result<()> {
    let mut w = std::io::BufWriter::new(writer);
    writeln!(w, "# format_version={FORMAT_VERSION}")?;
    for walk in walks {
        let p = &walk.profile;
        write!(w, "{},{},{}", p.x, p.y, p.t0_bar)?;
        for e in &walk.edges {
            write!(w, ",{},{},{}", e.u.0, e.v.0, e.t_bar)?;
        }
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

/// Read walks written by [`write_walks`]. Teleport positions are not stored.
pub fn read_walks<R: Read>(reader: R) -> Result<Vec<TruncatedWalk>> {
    let mut out = Vec::new();
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let line = line?;
        let ln = i as u64 + 1;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if line.starts_with('#') {
            parse_header(line)?;
            continue;
        }
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        if f.len() < 6 || !(f.len() - 3).is_multiple_of(3) {
            return Err(Error::Parse {
                line: ln,
                msg: format!("{} fields; expected 3 + 3k with k >= 1", f.len()),
            });
        }
        let err = |m: String| Error::Parse { line: ln, msg: m };
        let flag = |s: &str| match s {
            "0" => Ok(0u8),
            "1" => Ok(1u8),
            _ => Err(err(format!("flag {s} is not 0 or 1"))),
        };
        let real = |s: &str| s.parse::<f64>().map_err(|e| err(format!("{s}: {e}")));
        let id = |s: &str| s.parse::<usize>().map_err(|e| err(format!("{s}: {e}")));
        let profile = WalkProfile {
            x: flag(f[0])?,
            y: flag(f[1])?,
            t0_bar: real(f[2])?,
        };
        let edges = f[3..]
            .chunks(3)
            .map(|c| Ok(BudgetEdge::new(id(c[0])?, id(c[1])?, real(c[2])?)))
            .collect::<Result<Vec<_>>>()?;
        out.push(TruncatedWalk {
            profile,
            edges,
            jumps: Vec::new(),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn two_row_file() {
        let d = read_edge_list("sample_id,u,v,t\n0,0,1,1.0\n0,1,2,2.0\n".as_bytes(), None).unwrap();
        assert_eq!(d.len(), 1);
        assert_eq!(d.samples[0].len(), 2);
        assert_eq!(d.n_nodes, 3);
        assert_eq!(d.samples[0].edges[1].t, 1.0);
    }

    #[test]
    fn unused_ids_extend_universe() {
        let d = read_edge_list("sample_id,u,v,t\n0,0,5,1.0\n".as_bytes(), Some(4.0)).unwrap();
        assert_eq!(d.n_nodes, 6);
        assert_eq!(d.samples[0].edges[0].t, 0.25);
    }

    #[test]
    fn many_samples_grouped() {
        let mut s = String::from("sample_id,u,v,t\n");
        for i in 0..123 {
            s.push_str(&format!("{i},0,1,{}\n", i % 5));
        }
        assert_eq!(read_edge_list(s.as_bytes(), Some(5.0)).unwrap().len(), 123);
    }

    #[test]
    fn unsorted_rows_are_sorted() {
        let d = read_edge_list("sample_id,u,v,t\n0,0,1,3\n0,1,0,1\n".as_bytes(), Some(4.0)).unwrap();
        assert_eq!(d.samples[0].edges[0].t, 0.25);
    }

    #[test]
    fn malformed_row_reports_line() {
        let e = read_edge_list("sample_id,u,v,t\n0,0,1,1.0\n0,x,1,2.0\n".as_bytes(), None).unwrap_err();
        match e {
            Error::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        let e = read_edge_list("# format_version=1\nsample_id,u,v,t\n0,0,1,-1\n".as_bytes(), None).unwrap_err();
        assert!(matches!(e, Error::Parse { line: 3, .. }), "{e:?}");
        assert!(read_edge_list("# format_version=2\nsample_id,u,v,t\n".as_bytes(), None).is_err());
    }

    #[test]
    fn timestamp_past_span_rejected() {
        assert!(read_edge_list("sample_id,u,v,t\n0,0,1,5\n".as_bytes(), Some(4.0)).is_err());
    }

    #[test]
    fn walk_round_trip() {
        let w = TruncatedWalk {
            profile: WalkProfile { x: 1, y: 0, t0_bar: 1.0 },
            edges: vec![BudgetEdge::new(1, 6, 2.3 / 3.0), BudgetEdge::new(2, 3, 1.9 / 3.0)],
            jumps: vec![],
        };
        let mut buf = Vec::new();
        write_walks(&mut buf, std::slice::from_ref(&w)).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.lines().nth(1).unwrap().starts_with("1,0,1,1,6,"));
        assert_eq!(read_walks(&buf[..]).unwrap(), vec![w]);
        assert!(read_walks("1,0,1,2,3\n".as_bytes()).is_err());
        assert!(read_walks("2,0,1,2,3,0.5\n".as_bytes()).is_err());
    }

    fn arb_dataset() -> impl Strategy<Value = Dataset> {
        (1usize..8, 1e-3f64..1e6, 1usize..4).prop_flat_map(|(n, t_end, k)| {
            prop::collection::vec(prop::collection::vec((0..n, 0..n, 0.0f64..=1.0), 0..12), k).prop_map(
                move |samples| {
                    let samples = samples
                        .into_iter()
                        .map(|es| {
                            let raw: Vec<_> = es.into_iter().map(|(u, v, f)| TemporalEdge::new(u, v, f * t_end)).collect();
                            normalize_times(n, &raw, t_end).unwrap()
                        })
                        .collect();
                    Dataset::new(samples).unwrap()
                },
            )
        })
    }

    proptest! {
        #[test]
        fn edge_list_round_trip_is_exact(d in arb_dataset()) {
            let mut buf = Vec::new();
            write_edge_list(&mut buf, &d.samples).unwrap();
            let back = read_edge_list(&buf[..], None).unwrap();
            prop_assert_eq!(back, d);
        }
    }
}
