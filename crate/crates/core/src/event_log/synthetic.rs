//! Seeded synthetic request logs with known ground truth.
//!
//! Each user is a plain browsing user or a bot. Plain users produce sessions
//! separated by more than six minutes; within a session gaps never exceed six
//! minutes. Reformulation threads are built backwards from a "good" final
//! query by applying inverse edits, so the forward direction always improves
//! the query. Page refreshes and broken referrer chains are injected as noise
//! and recorded in the ground truth.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::event::{post_url, search_url, Event, EventType, Timestamp};
use crate::metrics::PostDoc;
use crate::miner::lcs_similarity;

/// 2017-12-01T00:00:00Z
const LOG_START_MS: i64 = 1_512_086_400_000;
const SITE: &str = "https://stackoverflow.com";
const SESSION_GAP_MS: i64 = 360_000;
const DWELL_LIMIT_MS: i64 = 30_000;
const BOT_SPACING_MS: i64 = 400;
const ADJACENT_MIN_SIM: f64 = 0.7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReformulationCategory {
    Add,
    Modify,
    Delete,
    Unrelated,
}

/// Probability weights over reformulation categories.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CategoryMix {
    pub add: f64,
    pub modify: f64,
    pub delete: f64,
    pub unrelated: f64,
}

impl Default for CategoryMix {
    fn default() -> Self {
        CategoryMix { add: 0.45, modify: 0.3, delete: 0.15, unrelated: 0.1 }
    }
}

impl CategoryMix {
    /// Same proportions with the unrelated weight removed.
    pub fn related_only() -> Self {
        CategoryMix { add: 0.5, modify: 0.33, delete: 0.17, unrelated: 0.0 }
    }

    fn weights(&self) -> [(ReformulationCategory, f64); 4] {
        [
            (ReformulationCategory::Add, self.add),
            (ReformulationCategory::Modify, self.modify),
            (ReformulationCategory::Delete, self.delete),
            (ReformulationCategory::Unrelated, self.unrelated),
        ]
    }

    fn sample(&self, rng: &mut impl Rng) -> ReformulationCategory {
        let mut x = rng.random::<f64>();
        for (cat, w) in self.weights() {
            if x < w {
                return cat;
            }
            x -= w;
        }
        // Rounding slack lands on the last category with positive weight.
        self.weights()
            .into_iter()
            .rev()
            .find(|(_, w)| *w > 0.0)
            .map(|(c, _)| c)
            .unwrap_or(ReformulationCategory::Add)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub user_count: usize,
    pub seed: u64,
    pub reformulation_category_mix: CategoryMix,
    pub bot_fraction: f64,
}

impl SyntheticSpec {
    pub fn new(user_count: usize, seed: u64) -> Self {
        SyntheticSpec {
            user_count,
            seed,
            reformulation_category_mix: CategoryMix::default(),
            bot_fraction: 0.05,
        }
    }

    pub fn validate(&self) -> Result<(), InvalidSpec> {
        if self.user_count == 0 {
            return Err(InvalidSpec("user_count must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.bot_fraction) {
            return Err(InvalidSpec(format!("bot_fraction {} outside [0, 1]", self.bot_fraction)));
        }
        let mix = self.reformulation_category_mix;
        let weights = mix.weights();
        if weights.iter().any(|(_, w)| !w.is_finite() || *w < 0.0) {
            return Err(InvalidSpec("category weights must be nonnegative".into()));
        }
        let total: f64 = weights.iter().map(|(_, w)| w).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(InvalidSpec(format!("category weights sum to {total}, expected 1")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid synthetic spec: {0}")]
pub struct InvalidSpec(pub String);

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TruthPost {
    pub post_id: String,
    pub dwell_ms: i64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ThreadTruth {
    pub queries: Vec<String>,
    pub interleaved_posts: Vec<TruthPost>,
    pub terminal_post: String,
    /// Category of each step `queries[i] -> queries[i + 1]`.
    pub categories: Vec<ReformulationCategory>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionTruth {
    pub session_id: String,
    /// Event ids left after refresh collapsing, in order.
    pub event_ids: Vec<String>,
    pub linear: bool,
    pub threads: Vec<ThreadTruth>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserTruth {
    pub user_id: String,
    pub is_bot: bool,
    pub sessions: Vec<SessionTruth>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub users: Vec<UserTruth>,
}

impl GroundTruth {
    pub fn bot_users(&self) -> impl Iterator<Item = &UserTruth> {
        self.users.iter().filter(|u| u.is_bot)
    }

    pub fn sessions(&self) -> impl Iterator<Item = &SessionTruth> {
        self.users.iter().filter(|u| !u.is_bot).flat_map(|u| u.sessions.iter())
    }

    pub fn linear_sessions(&self) -> impl Iterator<Item = &SessionTruth> {
        self.sessions().filter(|s| s.linear)
    }

    /// Threads of linear sessions, the only ones a miner can see.
    pub fn threads(&self) -> impl Iterator<Item = (&SessionTruth, &ThreadTruth)> {
        self.linear_sessions().flat_map(|s| s.threads.iter().map(move |t| (s, t)))
    }
}

/// Produces an event log (sorted by time, users interleaved) and its ground truth.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<(Vec<Event>, GroundTruth), InvalidSpec> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut posts = PostIds::new();
    let mut drafts: Vec<Draft> = Vec::new();
    let mut users = Vec::with_capacity(spec.user_count);

    for u in 0..spec.user_count {
        let start = LOG_START_MS + rng.random_range(0..30 * 24 * 3_600_000);
        let is_bot = rng.random_bool(spec.bot_fraction);
        let planned = if is_bot {
            vec![plan_bot_session(&mut rng, &mut posts)]
        } else {
            plan_user_sessions(&mut rng, &mut posts, spec.reformulation_category_mix)
        };
        users.push(place_user(&mut rng, u, start, planned, !is_bot, &mut drafts));
    }

    drafts.sort_by_key(|d| (d.time, d.user, d.seq));
    let ids: Vec<String> = (0..drafts.len()).map(|i| format!("e{:09}", i + 1)).collect();

    // (user, seq) -> event id, to resolve session roots and truth references.
    let mut by_user: Vec<Vec<(usize, usize)>> = vec![Vec::new(); spec.user_count];
    for (i, d) in drafts.iter().enumerate() {
        by_user[d.user].push((d.seq, i));
    }
    for list in &mut by_user {
        list.sort_unstable();
    }
    let id_of = |user: usize, seq: usize| -> &str {
        let list = &by_user[user];
        let pos = list.binary_search_by_key(&seq, |&(s, _)| s).expect("draft seq");
        &ids[list[pos].1]
    };

    let events: Vec<Event> = drafts
        .iter()
        .enumerate()
        .map(|(i, d)| Event {
            root_event_id: id_of(d.user, d.root_seq).to_string(),
            event_id: ids[i].clone(),
            user_id: format!("u{:06}", d.user),
            event_time: Timestamp(d.time),
            event_type: d.event_type,
            url: d.url.clone(),
            referrer: d.referrer.clone(),
        })
        .collect();

    let users = users
        .into_iter()
        .enumerate()
        .map(|(u, placed)| UserTruth {
            user_id: placed.user_id,
            is_bot: placed.is_bot,
            sessions: placed
                .sessions
                .into_iter()
                .map(|s| SessionTruth {
                    session_id: id_of(u, s.clean_seqs[0]).to_string(),
                    event_ids: s.clean_seqs.iter().map(|&q| id_of(u, q).to_string()).collect(),
                    linear: s.linear,
                    threads: s.threads,
                })
                .collect(),
        })
        .collect();

    Ok((events, GroundTruth { users }))
}

/// Post documents for the terminal posts of ground-truth threads (titled
/// with the final query), followed by `distractors` unrelated posts.
pub fn synthetic_posts(truth: &GroundTruth, max_threads: usize, distractors: usize, seed: u64) -> Vec<PostDoc> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut docs: Vec<PostDoc> = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for (_, thread) in truth.threads() {
        if docs.len() >= max_threads {
            break;
        }
        if !seen.insert(thread.terminal_post.clone()) {
            continue;
        }
        let title = thread.queries.last().cloned().unwrap_or_default();
        docs.push(PostDoc { post_id: thread.terminal_post.clone(), title, body: filler_body(&mut rng) });
    }
    let mut next_id = 90_000_000u64;
    for _ in 0..distractors {
        next_id += rng.random_range(1..50);
        docs.push(PostDoc {
            post_id: next_id.to_string(),
            title: base_query(&mut rng),
            body: filler_body(&mut rng),
        });
    }
    docs
}

fn filler_body(rng: &mut impl Rng) -> String {
    let n = rng.random_range(8..20);
    (0..n)
        .map(|_| *[OBJECTS, VERBS, FILLER].choose(rng).unwrap().choose(rng).unwrap())
        .collect::<Vec<_>>()
        .join(" ")
}

struct PostIds(u64);

impl PostIds {
    fn new() -> Self {
        PostIds(1_000_000)
    }

    fn next(&mut self, rng: &mut impl Rng) -> String {
        self.0 += rng.random_range(1..=97);
        self.0.to_string()
    }
}

/// One clean event inside a planned session.
#[derive(Debug, Clone)]
struct Planned {
    event_type: EventType,
    url: String,
    /// Gap to the next event of the same session.
    gap_after_ms: i64,
}

#[derive(Debug, Default)]
struct PlannedSession {
    events: Vec<Planned>,
    /// Threads with their event positions resolved later.
    threads: Vec<PlannedThread>,
}

#[derive(Debug)]
struct PlannedThread {
    queries: Vec<String>,
    /// Indices into the session's events of interleaved short posts.
    interleaved: Vec<usize>,
    terminal: usize,
    categories: Vec<ReformulationCategory>,
}

struct Draft {
    user: usize,
    seq: usize,
    root_seq: usize,
    time: i64,
    event_type: EventType,
    url: String,
    referrer: Option<String>,
}

struct PlacedSession {
    clean_seqs: Vec<usize>,
    linear: bool,
    threads: Vec<ThreadTruth>,
}

struct PlacedUser {
    user_id: String,
    is_bot: bool,
    sessions: Vec<PlacedSession>,
}

fn in_session_gap(rng: &mut impl Rng) -> i64 {
    match rng.random_range(0..20) {
        0 => SESSION_GAP_MS,
        1 => SESSION_GAP_MS - 1,
        _ => rng.random_range(1_000..=120_000),
    }
}

fn between_session_gap(rng: &mut impl Rng) -> i64 {
    match rng.random_range(0..10) {
        0 => SESSION_GAP_MS + 1,
        1 => SESSION_GAP_MS + 1_000,
        _ => rng.random_range(SESSION_GAP_MS + 1..=6 * 3_600_000),
    }
}

fn short_dwell(rng: &mut impl Rng) -> i64 {
    if rng.random_range(0..10) == 0 {
        DWELL_LIMIT_MS
    } else {
        rng.random_range(1_000..=DWELL_LIMIT_MS)
    }
}

fn long_dwell(rng: &mut impl Rng) -> i64 {
    if rng.random_range(0..10) == 0 {
        DWELL_LIMIT_MS + 1
    } else {
        rng.random_range(DWELL_LIMIT_MS + 1..=SESSION_GAP_MS)
    }
}

fn browse_event(rng: &mut impl Rng, posts: &mut PostIds, prev_url: Option<&str>, allow_post: bool) -> Planned {
    loop {
        let choice = rng.random_range(0..if allow_post { 5 } else { 4 });
        let (event_type, url) = match choice {
            0 => (EventType::Home, format!("{SITE}/")),
            1 => (EventType::QuestionsList, format!("{SITE}/questions")),
            2 => (EventType::Tags, format!("{SITE}/tags")),
            3 => (EventType::PostHistory, format!("{SITE}/posts/{}/revisions", posts.next(rng))),
            _ => (EventType::Post, post_url(&posts.next(rng))),
        };
        if prev_url != Some(url.as_str()) {
            let gap_after_ms = if event_type == EventType::Post { long_dwell(rng) } else { in_session_gap(rng) };
            return Planned { event_type, url, gap_after_ms };
        }
    }
}

fn search_event(rng: &mut impl Rng, query: &str) -> Planned {
    Planned { event_type: EventType::Search, url: search_url(query), gap_after_ms: in_session_gap(rng) }
}

fn plan_user_sessions(rng: &mut impl Rng, posts: &mut PostIds, mix: CategoryMix) -> Vec<PlannedSession> {
    let n = rng.random_range(1..=4);
    (0..n)
        .map(|_| match rng.random_range(0..20) {
            0..=10 => plan_reformulation_session(rng, posts, mix),
            11..=13 => plan_single_query_session(rng, posts),
            14..=15 => plan_open_ended_session(rng, posts, mix),
            _ => plan_browsing_session(rng, posts),
        })
        .collect()
}

fn push_browse(session: &mut PlannedSession, rng: &mut impl Rng, posts: &mut PostIds, allow_post: bool) {
    let prev = session.events.last().map(|e| e.url.clone());
    session.events.push(browse_event(rng, posts, prev.as_deref(), allow_post));
}

fn plan_reformulation_session(rng: &mut impl Rng, posts: &mut PostIds, mix: CategoryMix) -> PlannedSession {
    let mut session = PlannedSession::default();
    for _ in 0..rng.random_range(0..=2) {
        push_browse(&mut session, rng, posts, true);
    }
    let threads = rng.random_range(1..=2);
    for t in 0..threads {
        if t > 0 && rng.random_bool(0.5) {
            push_browse(&mut session, rng, posts, false);
        }
        plan_thread(&mut session, rng, posts, mix);
    }
    if rng.random_bool(0.3) {
        push_browse(&mut session, rng, posts, false);
        session.events.push(Planned {
            event_type: EventType::Post,
            url: post_url(&posts.next(rng)),
            gap_after_ms: long_dwell(rng),
        });
    }
    session
}

/// Appends one thread (and any abandoned unrelated prefix) ending in a
/// terminal post.
fn plan_thread(session: &mut PlannedSession, rng: &mut impl Rng, posts: &mut PostIds, mix: CategoryMix) {
    let steps = rng.random_range(1..=3);
    let categories: Vec<ReformulationCategory> = (0..steps).map(|_| mix.sample(rng)).collect();
    let last_break = categories.iter().rposition(|c| *c == ReformulationCategory::Unrelated);
    let segment_steps: Vec<ReformulationCategory> = match last_break {
        Some(i) => categories[i + 1..].to_vec(),
        None => categories.clone(),
    };
    let (segment, segment_categories) = build_segment(rng, &segment_steps);

    // Each unrelated step contributes a fresh abandoned query before the segment.
    let abandoned_count = last_break.map_or(0, |i| i + 1);
    let mut abandoned: Vec<String> = Vec::new();
    let mut next_first = segment[0].clone();
    for _ in 0..abandoned_count {
        let q = unrelated_to(rng, &next_first);
        next_first = q.clone();
        abandoned.push(q);
    }
    abandoned.reverse();

    for q in &abandoned {
        session.events.push(search_event(rng, q));
    }

    let mut interleaved = Vec::new();
    for (i, q) in segment.iter().enumerate() {
        session.events.push(search_event(rng, q));
        let is_last = i + 1 == segment.len();
        if !is_last && rng.random_bool(0.25) {
            interleaved.push(session.events.len());
            session.events.push(Planned {
                event_type: EventType::Post,
                url: post_url(&posts.next(rng)),
                gap_after_ms: short_dwell(rng),
            });
            // Re-issuing the same query after a short visit; collapsed by the miner.
            if rng.random_bool(0.3) {
                session.events.push(search_event(rng, q));
                if rng.random_bool(0.5) {
                    interleaved.push(session.events.len());
                    session.events.push(Planned {
                        event_type: EventType::Post,
                        url: post_url(&posts.next(rng)),
                        gap_after_ms: short_dwell(rng),
                    });
                }
            }
        }
    }
    if rng.random_bool(0.15) {
        interleaved.push(session.events.len());
        session.events.push(Planned {
            event_type: EventType::Post,
            url: post_url(&posts.next(rng)),
            gap_after_ms: short_dwell(rng),
        });
    }
    let terminal = session.events.len();
    session.events.push(Planned {
        event_type: EventType::Post,
        url: post_url(&posts.next(rng)),
        gap_after_ms: long_dwell(rng),
    });
    if segment.len() >= 2 {
        session.threads.push(PlannedThread {
            queries: segment,
            interleaved,
            terminal,
            categories: segment_categories,
        });
    }
}

fn plan_single_query_session(rng: &mut impl Rng, posts: &mut PostIds) -> PlannedSession {
    let mut session = PlannedSession::default();
    if rng.random_bool(0.5) {
        push_browse(&mut session, rng, posts, false);
    }
    let q = base_query(rng);
    session.events.push(search_event(rng, &q));
    session.events.push(Planned { event_type: EventType::Post, url: post_url(&posts.next(rng)), gap_after_ms: long_dwell(rng) });
    session
}

/// Similar queries that never end in a post visit.
fn plan_open_ended_session(rng: &mut impl Rng, posts: &mut PostIds, mix: CategoryMix) -> PlannedSession {
    let mut session = PlannedSession::default();
    let cat = match mix.sample(rng) {
        ReformulationCategory::Unrelated => ReformulationCategory::Add,
        c => c,
    };
    let (segment, _) = build_segment(rng, &[cat]);
    for q in &segment {
        session.events.push(search_event(rng, q));
    }
    push_browse(&mut session, rng, posts, false);
    session
}

fn plan_browsing_session(rng: &mut impl Rng, posts: &mut PostIds) -> PlannedSession {
    let mut session = PlannedSession::default();
    for _ in 0..rng.random_range(1..=5) {
        push_browse(&mut session, rng, posts, true);
    }
    session
}

fn plan_bot_session(rng: &mut impl Rng, posts: &mut PostIds) -> PlannedSession {
    let mut session = PlannedSession::default();
    let n = rng.random_range(150..=300);
    for page in 0..n {
        let url = if rng.random_bool(0.5) {
            format!("{SITE}/questions?page={page}")
        } else {
            post_url(&posts.next(rng))
        };
        let event_type = if url.contains("?page=") { EventType::QuestionsList } else { EventType::Post };
        session.events.push(Planned { event_type, url, gap_after_ms: BOT_SPACING_MS });
    }
    session
}

/// Assigns times, referrers and refresh noise to a user's sessions.
fn place_user(
    rng: &mut impl Rng,
    user: usize,
    start_ms: i64,
    mut sessions: Vec<PlannedSession>,
    with_noise: bool,
    drafts: &mut Vec<Draft>,
) -> PlacedUser {
    let mut t = start_ms;
    let mut seq = 0usize;
    let mut placed = Vec::new();
    let mut prev_last_url: Option<String> = None;

    for session in &mut sessions {
        // Never let a session open on the URL that closed the previous one,
        // or refresh collapsing would merge across the boundary.
        if prev_last_url.as_deref() == session.events.first().map(|e| e.url.as_str()) {
            let lead = if prev_last_url.as_deref() == Some(&format!("{SITE}/")) {
                Planned { event_type: EventType::QuestionsList, url: format!("{SITE}/questions"), gap_after_ms: in_session_gap(rng) }
            } else {
                Planned { event_type: EventType::Home, url: format!("{SITE}/"), gap_after_ms: in_session_gap(rng) }
            };
            session.events.insert(0, lead);
            for th in &mut session.threads {
                th.terminal += 1;
                for i in &mut th.interleaved {
                    *i += 1;
                }
            }
        }
        prev_last_url = session.events.last().map(|e| e.url.clone());
    }

    let session_count = sessions.len();
    for (s_idx, session) in sessions.into_iter().enumerate() {
        let corrupt_at = (with_noise && session.events.len() >= 2 && rng.random_bool(0.12))
            .then(|| rng.random_range(1..session.events.len()));
        let root_seq = seq;
        let mut clean_seqs = Vec::with_capacity(session.events.len());
        let mut times = Vec::with_capacity(session.events.len());
        let mut prev_url: Option<String> = if rng.random_bool(0.5) { Some(format!("{SITE}/")) } else { None };
        let n = session.events.len();

        for (i, ev) in session.events.iter().enumerate() {
            let referrer = match corrupt_at {
                Some(c) if c == i => {
                    if i >= 2 && rng.random_bool(0.5) {
                        Some(session.events[i - 2].url.clone())
                    } else {
                        None
                    }
                }
                _ => prev_url.clone(),
            };
            clean_seqs.push(seq);
            times.push(t);
            drafts.push(Draft { user, seq, root_seq, time: t, event_type: ev.event_type, url: ev.url.clone(), referrer: referrer.clone() });
            seq += 1;

            let gap = if i + 1 < n {
                ev.gap_after_ms
            } else if s_idx + 1 < session_count {
                between_session_gap(rng)
            } else {
                60_000
            };
            if with_noise && rng.random_bool(0.06) {
                // Refreshes strictly inside the gap to the next event.
                let copies = rng.random_range(1..=3);
                let mut offset = 0;
                for _ in 0..copies {
                    let room = (gap.min(SESSION_GAP_MS) - offset - 1).max(0);
                    if room < 1 {
                        break;
                    }
                    offset += rng.random_range(1..=room.min(5_000));
                    drafts.push(Draft { user, seq, root_seq, time: t + offset, event_type: ev.event_type, url: ev.url.clone(), referrer: referrer.clone() });
                    seq += 1;
                }
            }
            prev_url = Some(ev.url.clone());
            t += gap;
        }

        let threads = session
            .threads
            .into_iter()
            .map(|th| ThreadTruth {
                queries: th.queries,
                interleaved_posts: th
                    .interleaved
                    .iter()
                    .map(|&i| TruthPost {
                        post_id: super::event::post_id_from_url(&session.events[i].url).expect("post url"),
                        dwell_ms: times[i + 1] - times[i],
                    })
                    .collect(),
                terminal_post: super::event::post_id_from_url(&session.events[th.terminal].url).expect("post url"),
                categories: th.categories,
            })
            .collect();
        placed.push(PlacedSession { clean_seqs, linear: corrupt_at.is_none(), threads });
    }

    PlacedUser { user_id: format!("u{user:06}"), is_bot: !with_noise, sessions: placed }
}

// ---------------------------------------------------------------------------
// Query text

const LANGS: &[&str] = &[
    "java", "python", "c#", "c++", "javascript", "rust", "php", "ruby", "swift", "kotlin", "golang", "sql",
];
const VERBS: &[&str] = &[
    "read", "write", "convert", "sort", "parse", "create", "delete", "split", "join", "format", "compare",
    "install", "import", "iterate", "merge", "reverse", "filter", "append", "remove", "serialize", "copy",
    "update", "count", "encode",
];
const OBJECTS: &[&str] = &[
    "file", "string", "array", "list", "dictionary", "json", "date", "csv file", "hashmap", "dataframe",
    "integer", "char array", "text file", "nested list", "directory", "xml", "timestamp", "byte array",
    "linked list", "tuple", "enum", "image", "database table", "unicode string",
];
const NOISE: &[&str] = &[
    "please", "help", "easy", "simple", "best", "quickly", "fast", "example", "code", "correctly", "way",
    "issue", "problem",
];
const FILLER: &[&str] = &[
    "answer", "question", "accepted", "method", "function", "returns", "value", "error", "works", "version",
    "library", "use", "following",
];
const ERRORS: &[&str] = &[
    "nullpointerexception when calling method",
    "indexerror list index out of range",
    "importerror no module named requests",
    "segmentation fault core dumped",
    "cannot read property of undefined",
    "no such file or directory",
];

pub(crate) fn base_query(rng: &mut impl Rng) -> String {
    let lang = *LANGS.choose(rng).unwrap();
    let verb = *VERBS.choose(rng).unwrap();
    let obj = *OBJECTS.choose(rng).unwrap();
    let obj2 = *OBJECTS.choose(rng).unwrap();
    match rng.random_range(0..7) {
        0 => format!("how to {verb} {obj} in {lang}"),
        1 => format!("{lang} {verb} {obj}"),
        2 => format!("{verb} {obj} to {obj2} {lang}"),
        3 => format!("{lang} {obj} {verb} example"),
        4 => format!("{} {lang}", ERRORS.choose(rng).unwrap()),
        5 => format!("how do i {verb} a {obj} {lang}"),
        _ => format!("{verb} {obj} using {lang}"),
    }
}

fn unrelated_to(rng: &mut impl Rng, other: &str) -> String {
    loop {
        let q = base_query(rng);
        if lcs_similarity(&q, other) <= ADJACENT_MIN_SIM {
            return q;
        }
    }
}

/// Builds queries q_1..q_n (n = steps + 1, or fewer if an edit cannot keep
/// the adjacency constraint) backwards from a final query.
fn build_segment(rng: &mut impl Rng, steps: &[ReformulationCategory]) -> (Vec<String>, Vec<ReformulationCategory>) {
    let mut rev = vec![base_query(rng)];
    let mut cats = Vec::new();
    for &cat in steps.iter().rev() {
        let next = rev.last().unwrap().clone();
        let mut found = None;
        for _ in 0..20 {
            let candidate = match cat {
                ReformulationCategory::Add => drop_token(rng, &next),
                ReformulationCategory::Delete => insert_noise(rng, &next),
                ReformulationCategory::Modify => misspell(rng, &next),
                ReformulationCategory::Unrelated => None,
            };
            if let Some(c) = candidate {
                if c != next && !rev.contains(&c) && lcs_similarity(&c, &next) > ADJACENT_MIN_SIM {
                    found = Some(c);
                    break;
                }
            }
        }
        match found {
            Some(c) => {
                rev.push(c);
                cats.push(cat);
            }
            None => break,
        }
    }
    rev.reverse();
    cats.reverse();
    (rev, cats)
}

/// Inverse of adding a word: removes one, preferring a language tag.
fn drop_token(rng: &mut impl Rng, q: &str) -> Option<String> {
    let toks: Vec<&str> = q.split(' ').collect();
    if toks.len() < 3 {
        return None;
    }
    let lang_pos: Vec<usize> = (1..toks.len()).filter(|&i| LANGS.contains(&toks[i])).collect();
    let idx = if !lang_pos.is_empty() && rng.random_bool(0.6) {
        *lang_pos.choose(rng).unwrap()
    } else {
        rng.random_range(1..toks.len())
    };
    let removed_last = idx + 1 == toks.len();
    let mut out = toks.clone();
    out.remove(idx);
    if removed_last && out.len() > 2 && out.last() == Some(&"in") {
        out.pop();
    }
    Some(out.join(" "))
}

/// Inverse of deleting a word: inserts a noise word.
fn insert_noise(rng: &mut impl Rng, q: &str) -> Option<String> {
    let mut toks: Vec<&str> = q.split(' ').collect();
    let pos = rng.random_range(0..=toks.len());
    toks.insert(pos, NOISE.choose(rng).unwrap());
    Some(toks.join(" "))
}

/// Inverse of a spelling correction: corrupts one word.
fn misspell(rng: &mut impl Rng, q: &str) -> Option<String> {
    let toks: Vec<&str> = q.split(' ').collect();
    let candidates: Vec<usize> = (0..toks.len())
        .filter(|&i| toks[i].len() >= 4 && toks[i].bytes().all(|b| b.is_ascii_lowercase()))
        .collect();
    let &idx = candidates.choose(rng)?;
    let mut word: Vec<u8> = toks[idx].as_bytes().to_vec();
    let i = rng.random_range(1..word.len() - 1);
    match rng.random_range(0..3) {
        0 => word.swap(i, i + 1),
        1 => {
            word.remove(i);
        }
        _ => {
            let c = word[i];
            word.insert(i, c);
        }
    }
    let word = String::from_utf8(word).ok()?;
    let mut out: Vec<String> = toks.iter().map(|s| s.to_string()).collect();
    out[idx] = word;
    Some(out.join(" "))
}
