use std::collections::HashSet;
use std::fmt;
use std::io::{self, BufRead, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::event::{Event, EventType, Timestamp};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LogFormat {
    #[default]
    Jsonl,
    Tsv,
}

impl FromStr for LogFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "jsonl" => Ok(LogFormat::Jsonl),
            "tsv" => Ok(LogFormat::Tsv),
            other => Err(format!("unknown log format {other:?} (expected jsonl or tsv)")),
        }
    }
}

impl fmt::Display for LogFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LogFormat::Jsonl => "jsonl",
            LogFormat::Tsv => "tsv",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {reason}")]
pub struct MalformedLine {
    /// 1-based line number in the input.
    pub line: usize,
    pub reason: String,
}

#[derive(Debug, Error)]
pub enum LogError {
    #[error("malformed log: {0}")]
    Malformed(#[from] MalformedLine),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Events that parsed cleanly, plus every rejected line.
#[derive(Debug, Default)]
pub struct ParsedLog {
    pub events: Vec<Event>,
    pub malformed: Vec<MalformedLine>,
}

const TSV_COLUMNS: [&str; 7] = [
    "root_event_id",
    "event_id",
    "user_id",
    "event_time",
    "event_type",
    "url",
    "referrer",
];

/// Reads one event per line. Bad lines are collected unless `strict` is set,
/// in which case the first one aborts the parse.
pub fn parse_log<R: BufRead>(input: R, format: LogFormat, strict: bool) -> Result<ParsedLog, LogError> {
    let mut out = ParsedLog::default();
    let mut seen = HashSet::new();
    for (idx, line) in input.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        if format == LogFormat::Tsv && lineno == 1 && line.starts_with("root_event_id\t") {
            continue;
        }
        let parsed = match format {
            LogFormat::Jsonl => parse_json_line(&line),
            LogFormat::Tsv => parse_tsv_line(&line),
        }
        .and_then(|ev| {
            ev.validate()?;
            if !seen.insert(ev.event_id.clone()) {
                return Err(format!("duplicate event_id {:?}", ev.event_id));
            }
            Ok(ev)
        });
        match parsed {
            Ok(ev) => out.events.push(ev),
            Err(reason) => {
                let bad = MalformedLine { line: lineno, reason };
                if strict {
                    return Err(bad.into());
                }
                out.malformed.push(bad);
            }
        }
    }
    Ok(out)
}

fn parse_json_line(line: &str) -> Result<Event, String> {
    serde_json::from_str(line).map_err(|e| e.to_string())
}

fn parse_tsv_line(line: &str) -> Result<Event, String> {
    let cols: Vec<&str> = line.split('\t').collect();
    if cols.len() != TSV_COLUMNS.len() {
        return Err(format!("expected {} tab-separated columns, found {}", TSV_COLUMNS.len(), cols.len()));
    }
    for (name, value) in TSV_COLUMNS.iter().zip(&cols).take(6) {
        if value.is_empty() {
            return Err(format!("missing field {name}"));
        }
    }
    Ok(Event {
        root_event_id: cols[0].to_string(),
        event_id: cols[1].to_string(),
        user_id: cols[2].to_string(),
        event_time: cols[3].parse::<Timestamp>().map_err(|e| e.to_string())?,
        event_type: cols[4].parse::<EventType>()?,
        url: cols[5].to_string(),
        referrer: (!cols[6].is_empty()).then(|| cols[6].to_string()),
    })
}

pub fn write_log<W: Write>(events: &[Event], format: LogFormat, mut out: W) -> io::Result<()> {
    for ev in events {
        match format {
            LogFormat::Jsonl => {
                serde_json::to_writer(&mut out, ev)?;
                out.write_all(b"\n")?;
            }
            LogFormat::Tsv => {
                writeln!(
                    out,
                    "{}\t{}\t{}\t{}\t{}\t{}\t{}",
                    ev.root_event_id,
                    ev.event_id,
                    ev.user_id,
                    ev.event_time,
                    ev.event_type,
                    ev.url,
                    ev.referrer.as_deref().unwrap_or("")
                )?;
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::event_log::event::{post_url, search_url};

    fn sample(id: &str, ty: EventType, url: String, referrer: Option<String>) -> Event {
        Event {
            root_event_id: "e1".into(),
            event_id: id.into(),
            user_id: "u1".into(),
            event_time: Timestamp(1_514_764_800_000),
            event_type: ty,
            url,
            referrer,
        }
    }

    fn round_trip(events: &[Event], format: LogFormat) -> Vec<Event> {
        let mut buf = Vec::new();
        write_log(events, format, &mut buf).unwrap();
        let parsed = parse_log(buf.as_slice(), format, true).unwrap();
        assert!(parsed.malformed.is_empty());
        parsed.events
    }

    #[test]
    fn empty_sequence_writes_nothing() {
        let mut buf = Vec::new();
        write_log(&[], LogFormat::Tsv, &mut buf).unwrap();
        assert!(buf.is_empty());
    }

    #[test]
    fn three_events_round_trip_in_both_formats() {
        let events = vec![
            sample("e1", EventType::Home, "https://stackoverflow.com/".into(), None),
            sample("e2", EventType::Search, search_url("java read & write"), Some("https://stackoverflow.com/".into())),
            sample("e3", EventType::Post, post_url("42"), Some(search_url("java read & write"))),
        ];
        for format in [LogFormat::Jsonl, LogFormat::Tsv] {
            let mut buf = Vec::new();
            write_log(&events, format, &mut buf).unwrap();
            assert_eq!(buf.iter().filter(|&&b| b == b'\n').count(), 3);
            let back = round_trip(&events, format);
            assert_eq!(back, events);
            assert_eq!(back[1].query().as_deref(), Some("java read & write"));
        }
    }

    #[test]
    fn unknown_event_type_reported_with_line_number() {
        let good = sample("e1", EventType::Search, search_url("x"), None);
        let mut buf = Vec::new();
        write_log(&[good], LogFormat::Tsv, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let bad = text.replace("Search", "Click").replace("\te1\t", "\te2\t");
        let input = format!("{text}{bad}");
        let parsed = parse_log(input.as_bytes(), LogFormat::Tsv, false).unwrap();
        assert_eq!(parsed.events.len(), 1);
        assert_eq!(parsed.malformed.len(), 1);
        assert_eq!(parsed.malformed[0].line, 2);
        assert!(parsed.malformed[0].reason.contains("Click"));

        let err = parse_log(input.as_bytes(), LogFormat::Tsv, true).unwrap_err();
        assert!(matches!(err, LogError::Malformed(MalformedLine { line: 2, .. })));
    }

    #[test]
    fn json_errors_are_collected() {
        let input = concat!(
            "{\"root_event_id\":\"e1\",\"event_id\":\"e1\",\"user_id\":\"u\",\"event_time\":\"bad\",\"event_type\":\"Home\",\"url\":\"/\",\"referrer\":null}\n",
            "{\"root_event_id\":\"e1\",\"event_id\":\"e2\",\"user_id\":\"u\",\"event_type\":\"Home\",\"url\":\"/\",\"referrer\":null}\n",
            "{\"root_event_id\":\"e1\",\"event_id\":\"e3\",\"user_id\":\"u\",\"event_time\":\"2018-01-01T00:00:00.000Z\",\"event_type\":\"Search\",\"url\":\"/search?q=\",\"referrer\":null}\n",
            "{\"root_event_id\":\"e1\",\"event_id\":\"e4\",\"user_id\":\"u\",\"event_time\":\"2018-01-01T00:00:00.000Z\",\"event_type\":\"Home\",\"url\":\"/\",\"referrer\":null}\n",
        );
        let parsed = parse_log(input.as_bytes(), LogFormat::Jsonl, false).unwrap();
        let lines: Vec<usize> = parsed.malformed.iter().map(|m| m.line).collect();
        assert_eq!(lines, vec![1, 2, 3]);
        assert_eq!(parsed.events.len(), 1);
    }

    #[test]
    fn duplicate_event_ids_rejected() {
        let ev = sample("e1", EventType::Home, "https://stackoverflow.com/".into(), None);
        let mut buf = Vec::new();
        write_log(&[ev.clone(), ev], LogFormat::Jsonl, &mut buf).unwrap();
        let parsed = parse_log(buf.as_slice(), LogFormat::Jsonl, false).unwrap();
        assert_eq!(parsed.malformed.len(), 1);
        assert_eq!(parsed.malformed[0].line, 2);
    }
}
