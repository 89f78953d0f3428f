//! Per-user grouping, noise filtering, gap-based sessionization and the
//! linear-navigation filter.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::event_log::{Event, Timestamp};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PipelineConfig {
    /// Largest gap that keeps two events in one session (inclusive).
    pub max_gap_ms: i64,
    pub bot_window_ms: i64,
    /// A user with this many events inside one window is treated as a bot.
    pub bot_window_events: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig { max_gap_ms: 360_000, bot_window_ms: 60_000, bot_window_events: 120 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Session {
    /// Event id of the first event.
    pub session_id: String,
    pub user_id: String,
    pub events: Vec<Event>,
    pub start: Timestamp,
    pub end: Timestamp,
}

impl Session {
    /// Builds a session from a non-empty ordered run of one user's events.
    pub fn from_events(events: Vec<Event>) -> Option<Self> {
        let first = events.first()?;
        let last = events.last()?;
        Some(Session {
            session_id: first.event_id.clone(),
            user_id: first.user_id.clone(),
            start: first.event_time,
            end: last.event_time,
            events,
        })
    }
}

fn order_key(e: &Event) -> (Timestamp, &str) {
    (e.event_time, e.event_id.as_str())
}

/// Groups events by user, each stream sorted by (time, event id).
pub fn group_and_sort(events: Vec<Event>) -> BTreeMap<String, Vec<Event>> {
    let mut users: BTreeMap<String, Vec<Event>> = BTreeMap::new();
    for e in events {
        users.entry(e.user_id.clone()).or_default().push(e);
    }
    for stream in users.values_mut() {
        stream.sort_by(|a, b| order_key(a).cmp(&order_key(b)));
    }
    users
}

/// Keeps the first event of every run of consecutive identical URLs.
pub fn collapse_refreshes(stream: Vec<Event>) -> Vec<Event> {
    let mut out: Vec<Event> = Vec::with_capacity(stream.len());
    for e in stream {
        if out.last().is_some_and(|prev| prev.url == e.url) {
            continue;
        }
        out.push(e);
    }
    out
}

/// True when some window `[t, t + window)` holds at least `threshold` events.
pub fn exceeds_rate(stream: &[Event], window_ms: i64, threshold: usize) -> bool {
    if threshold == 0 {
        return !stream.is_empty();
    }
    let mut lo = 0;
    for hi in 0..stream.len() {
        while stream[hi].event_time.millis_since(stream[lo].event_time) >= window_ms {
            lo += 1;
        }
        if hi - lo + 1 >= threshold {
            return true;
        }
    }
    false
}

/// Collapses refreshes, then empties the stream if the user looks like a bot.
pub fn filter_noise(stream: Vec<Event>, cfg: &PipelineConfig) -> Vec<Event> {
    let collapsed = collapse_refreshes(stream);
    if exceeds_rate(&collapsed, cfg.bot_window_ms, cfg.bot_window_events) {
        Vec::new()
    } else {
        collapsed
    }
}

/// Splits an ordered stream wherever consecutive events are more than
/// `max_gap_ms` apart.
pub fn sessionize(stream: Vec<Event>, max_gap_ms: i64) -> Vec<Session> {
    let mut sessions = Vec::new();
    let mut current: Vec<Event> = Vec::new();
    for e in stream {
        if let Some(prev) = current.last() {
            if e.event_time.millis_since(prev.event_time) > max_gap_ms {
                sessions.extend(Session::from_events(std::mem::take(&mut current)));
            }
        }
        current.push(e);
    }
    sessions.extend(Session::from_events(current));
    sessions
}

/// Whether every event after the first was reached from the previous one.
pub fn is_linear(session: &Session) -> bool {
    session
        .events
        .windows(2)
        .all(|w| w[1].referrer.as_deref() == Some(w[0].url.as_str()))
}

pub fn filter_linear(sessions: Vec<Session>) -> Vec<Session> {
    sessions.into_iter().filter(is_linear).collect()
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PipelineStats {
    pub users: usize,
    pub bot_users: usize,
    pub refreshes_removed: usize,
    pub sessions: usize,
    pub linear_sessions: usize,
}

/// group/sort, noise filter, sessionize, linear filter; in that order.
pub fn run_pipeline(events: Vec<Event>, cfg: &PipelineConfig) -> (Vec<Session>, PipelineStats) {
    let mut stats = PipelineStats::default();
    let mut out = Vec::new();
    for (_, stream) in group_and_sort(events) {
        stats.users += 1;
        let before = stream.len();
        let collapsed = collapse_refreshes(stream);
        stats.refreshes_removed += before - collapsed.len();
        if exceeds_rate(&collapsed, cfg.bot_window_ms, cfg.bot_window_events) {
            stats.bot_users += 1;
            continue;
        }
        let sessions = sessionize(collapsed, cfg.max_gap_ms);
        stats.sessions += sessions.len();
        let linear = filter_linear(sessions);
        stats.linear_sessions += linear.len();
        out.extend(linear);
    }
    (out, stats)
}
