use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, SecondsFormat, TimeZone, Utc};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

const SITE: &str = "https://stackoverflow.com";

/// UTC instant with millisecond precision, stored as milliseconds since the epoch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Timestamp(pub i64);

impl Timestamp {
    pub fn from_millis(ms: i64) -> Self {
        Timestamp(ms)
    }

    pub fn millis(self) -> i64 {
        self.0
    }

    /// Signed difference `self - earlier` in milliseconds.
    pub fn millis_since(self, earlier: Timestamp) -> i64 {
        self.0 - earlier.0
    }

    pub fn plus_millis(self, ms: i64) -> Self {
        Timestamp(self.0 + ms)
    }

    fn to_datetime(self) -> Option<DateTime<Utc>> {
        Utc.timestamp_millis_opt(self.0).single()
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.to_datetime() {
            Some(dt) => f.write_str(&dt.to_rfc3339_opts(SecondsFormat::Millis, true)),
            None => write!(f, "<invalid timestamp {}>", self.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid timestamp {0:?}: expected ISO-8601 UTC such as 2018-01-01T00:00:00.000Z")]
pub struct TimestampParseError(String);

impl FromStr for Timestamp {
    type Err = TimestampParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if !s.ends_with('Z') {
            return Err(TimestampParseError(s.to_string()));
        }
        DateTime::parse_from_rfc3339(s)
            .map(|dt| Timestamp(dt.timestamp_millis()))
            .map_err(|_| TimestampParseError(s.to_string()))
    }
}

impl Serialize for Timestamp {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Timestamp {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EventType {
    Search,
    Post,
    QuestionsList,
    Home,
    Tags,
    PostHistory,
}

impl EventType {
    pub const ALL: [EventType; 6] = [
        EventType::Search,
        EventType::Post,
        EventType::QuestionsList,
        EventType::Home,
        EventType::Tags,
        EventType::PostHistory,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EventType::Search => "Search",
            EventType::Post => "Post",
            EventType::QuestionsList => "QuestionsList",
            EventType::Home => "Home",
            EventType::Tags => "Tags",
            EventType::PostHistory => "PostHistory",
        }
    }
}

impl fmt::Display for EventType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EventType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        EventType::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| format!("unknown event_type {s:?}"))
    }
}

/// What an event's URL carries, depending on its type.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Payload {
    Query(String),
    PostId(String),
}

/// One row of the request log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Event {
    pub root_event_id: String,
    pub event_id: String,
    pub user_id: String,
    pub event_time: Timestamp,
    pub event_type: EventType,
    pub url: String,
    pub referrer: Option<String>,
}

impl Event {
    /// Query text for Search events, post id for Post events.
    pub fn payload(&self) -> Option<Payload> {
        match self.event_type {
            EventType::Search => query_from_url(&self.url).map(Payload::Query),
            EventType::Post => post_id_from_url(&self.url).map(Payload::PostId),
            _ => None,
        }
    }

    pub fn query(&self) -> Option<String> {
        match self.payload() {
            Some(Payload::Query(q)) => Some(q),
            _ => None,
        }
    }

    pub fn post_id(&self) -> Option<String> {
        match self.payload() {
            Some(Payload::PostId(p)) => Some(p),
            _ => None,
        }
    }

    /// Checks the per-type payload invariant.
    pub fn validate(&self) -> Result<(), String> {
        if self.event_id.is_empty() {
            return Err("empty event_id".into());
        }
        if self.user_id.is_empty() {
            return Err("empty user_id".into());
        }
        match self.event_type {
            EventType::Search if self.query().is_none() => {
                Err(format!("search url without a non-empty q= parameter: {}", self.url))
            }
            EventType::Post if self.post_id().is_none() => {
                Err(format!("post url without a post id: {}", self.url))
            }
            _ => Ok(()),
        }
    }
}

pub fn search_url(query: &str) -> String {
    let encoded: String = form_urlencoded::byte_serialize(query.as_bytes()).collect();
    format!("{SITE}/search?q={encoded}")
}

pub fn post_url(post_id: &str) -> String {
    format!("{SITE}/questions/{post_id}")
}

/// Decoded, non-empty `q` parameter of a URL.
pub fn query_from_url(url: &str) -> Option<String> {
    let (_, query) = url.split_once('?')?;
    let query = query.split('#').next().unwrap_or_default();
    form_urlencoded::parse(query.as_bytes())
        .find(|(k, _)| k == "q")
        .map(|(_, v)| v.into_owned())
        .filter(|q| !q.trim().is_empty())
}

/// Numeric id following a `questions` (or `q`) path segment.
pub fn post_id_from_url(url: &str) -> Option<String> {
    let path = url.split(['?', '#']).next().unwrap_or_default();
    let mut segments = path.split('/');
    while let Some(seg) = segments.next() {
        if seg == "questions" || seg == "q" {
            if let Some(id) = segments.next() {
                if !id.is_empty() && id.bytes().all(|b| b.is_ascii_digit()) {
                    return Some(id.to_string());
                }
            }
        }
    }
    None
}
