use chrono::{DateTime, SecondsFormat, Utc};

/// Source of wall-clock timestamps written into transcripts and reports.
///
/// `Clock::from_env()` honors `SOURCE_DATE_EPOCH` so that scripted runs can
/// be made byte-reproducible end to end.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Clock {
    #[default]
    System,
    Fixed(DateTime<Utc>),
}

impl Clock {
    pub fn from_env() -> Clock {
        std::env::var("SOURCE_DATE_EPOCH")
            .ok()
            .and_then(|s| s.trim().parse::<i64>().ok())
            .and_then(|secs| DateTime::from_timestamp(secs, 0))
            .map(Clock::Fixed)
            .unwrap_or(Clock::System)
    }

    pub fn fixed_epoch(secs: i64) -> Clock {
        Clock::Fixed(DateTime::from_timestamp(secs, 0).expect("timestamp in range"))
    }

    pub fn now(&self) -> DateTime<Utc> {
        match self {
            Clock::System => Utc::now(),
            Clock::Fixed(t) => *t,
        }
    }

    pub fn stamp(&self) -> String {
        self.now().to_rfc3339_opts(SecondsFormat::Millis, true)
    }
}
