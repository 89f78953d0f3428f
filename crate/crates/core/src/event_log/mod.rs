//! Request-log events: the record model, line codecs and a synthetic generator.

mod codec;
mod event;
mod synthetic;

pub use codec::{parse_log, write_log, LogError, LogFormat, MalformedLine, ParsedLog};
pub use event::{post_id_from_url, post_url, query_from_url, search_url, Event, EventType, Payload, Timestamp};
pub use synthetic::{
    generate_synthetic, synthetic_posts, CategoryMix, GroundTruth, InvalidSpec, ReformulationCategory, SessionTruth,
    SyntheticSpec, ThreadTruth, TruthPost, UserTruth,
};
