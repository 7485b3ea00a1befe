//! Minimal XES reader: `concept:name` and `time:timestamp` of completed events.

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use quick_xml::events::{BytesStart, Event as XmlEvent};
use quick_xml::Reader;

use super::csv::parse_timestamp;
use super::{Event, Trace};
use crate::error::{Error, Result};

pub fn parse_xes(path: impl AsRef<Path>) -> Result<Vec<Trace>> {
    let path = path.as_ref();
    let f = File::open(path).map_err(|e| Error::file(path, e))?;
    parse_xes_reader(BufReader::new(f))
}

#[derive(Default)]
struct PendingEvent {
    name: Option<String>,
    timestamp: Option<String>,
    lifecycle: Option<String>,
}

fn attrs(e: &BytesStart<'_>) -> Result<(Option<String>, Option<String>)> {
    let mut key = None;
    let mut value = None;
    for a in e.attributes() {
        let a = a.map_err(|err| Error::Xml(err.to_string()))?;
        let v = a
            .unescape_value()
            .map_err(|err| Error::Xml(err.to_string()))?
            .into_owned();
        match a.key.as_ref() {
            b"key" => key = Some(v),
            b"value" => value = Some(v),
            _ => {}
        }
    }
    Ok((key, value))
}

pub fn parse_xes_reader<R: BufRead>(reader: R) -> Result<Vec<Trace>> {
    let mut xml = Reader::from_reader(reader);
    xml.config_mut().trim_text(true);
    let mut buf = Vec::new();

    let mut events = Vec::new();
    let mut trace_index = 0usize;
    let mut case_id: Option<String> = None;
    let mut trace_events: Vec<PendingEvent> = Vec::new();
    let mut current: Option<PendingEvent> = None;
    // element depth relative to the enclosing <trace> or <event>
    let mut depth = 0usize;
    let mut in_trace = false;

    loop {
        let ev = xml
            .read_event_into(&mut buf)
            .map_err(|e| Error::Xml(format!("at byte {}: {e}", xml.buffer_position())))?;
        match ev {
            XmlEvent::Start(ref e) | XmlEvent::Empty(ref e) => {
                let is_empty = matches!(ev, XmlEvent::Empty(_));
                match e.name().as_ref() {
                    b"trace" if !in_trace => {
                        in_trace = true;
                        case_id = None;
                        trace_events.clear();
                        depth = 0;
                    }
                    b"event" if in_trace && current.is_none() && depth == 0 => {
                        current = Some(PendingEvent::default());
                        if is_empty {
                            trace_events.push(current.take().unwrap_or_default());
                        }
                    }
                    _ if in_trace => {
                        if depth == 0 {
                            let (key, value) = attrs(e)?;
                            match (&mut current, key.as_deref()) {
                                (Some(p), Some("concept:name")) => p.name = value,
                                (Some(p), Some("time:timestamp")) => p.timestamp = value,
                                (Some(p), Some("lifecycle:transition")) => p.lifecycle = value,
                                (None, Some("concept:name")) => case_id = value,
                                _ => {}
                            }
                        }
                        if !is_empty {
                            depth += 1;
                        }
                    }
                    _ => {}
                }
            }
            XmlEvent::End(ref e) => match e.name().as_ref() {
                b"event" if depth == 0 && current.is_some() => {
                    trace_events.extend(current.take());
                }
                b"trace" if depth == 0 && in_trace => {
                    in_trace = false;
                    let id = case_id.take().unwrap_or_else(|| format!("trace-{trace_index}"));
                    trace_index += 1;
                    for p in trace_events.drain(..) {
                        let complete = p
                            .lifecycle
                            .as_deref()
                            .is_none_or(|l| l.eq_ignore_ascii_case("complete"));
                        let Some(name) = p.name.filter(|n| !n.is_empty()) else {
                            continue;
                        };
                        if !complete {
                            continue;
                        }
                        let timestamp = match p.timestamp {
                            None => None,
                            Some(raw) => Some(parse_timestamp(&raw, &[]).ok_or_else(|| {
                                Error::Xml(format!("case '{id}': unparseable timestamp '{raw}'"))
                            })?),
                        };
                        events.push(Event {
                            case_id: id.clone(),
                            activity: name,
                            timestamp,
                        });
                    }
                }
                _ if in_trace && depth > 0 => depth -= 1,
                _ => {}
            },
            XmlEvent::Eof => break,
            _ => {}
        }
        buf.clear();
    }
    Ok(Trace::group(events))
}
