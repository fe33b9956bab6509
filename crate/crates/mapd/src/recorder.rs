//! Event recordings and paced replay.

use std::collections::BTreeMap;
use std::time::Duration;

use futures::Stream;
use serde::{Deserialize, Serialize};

use crate::error::{MapdError, Result};
use crate::events::SniffEvent;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Recording {
    pub id: String,
    pub filter_expr: String,
    pub events: Vec<SniffEvent>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RecordingSummary {
    pub id: String,
    pub filter_expr: String,
    pub events: usize,
}

/// One active recording at a time; finished ones are kept by id.
#[derive(Debug, Default)]
pub struct Recorder {
    next_id: u64,
    active: Option<Recording>,
    done: BTreeMap<String, Recording>,
}

impl Recorder {
    pub fn start(&mut self, filter: &str) -> Result<String> {
        if self.active.is_some() {
            return Err(MapdError::AlreadyRecording);
        }
        self.next_id += 1;
        let id = format!("rec-{}", self.next_id);
        self.active = Some(Recording {
            id: id.clone(),
            filter_expr: filter.to_string(),
            events: Vec::new(),
        });
        Ok(id)
    }

    pub fn observe(&mut self, event: &SniffEvent) {
        if let Some(rec) = &mut self.active {
            rec.events.push(event.clone());
        }
    }

    pub fn active_len(&self) -> Option<usize> {
        self.active.as_ref().map(|r| r.events.len())
    }

    pub fn stop(&mut self) -> Result<Recording> {
        let rec = self.active.take().ok_or(MapdError::NotRecording)?;
        self.done.insert(rec.id.clone(), rec.clone());
        Ok(rec)
    }

    pub fn get(&self, id: &str) -> Result<Recording> {
        self.done
            .get(id)
            .cloned()
            .ok_or_else(|| MapdError::UnknownRecording(id.to_string()))
    }

    pub fn list(&self) -> Vec<RecordingSummary> {
        self.done
            .values()
            .map(|r| RecordingSummary {
                id: r.id.clone(),
                filter_expr: r.filter_expr.clone(),
                events: r.events.len(),
            })
            .collect()
    }
}

pub fn check_interval(interval_ms: u64) -> Result<Duration> {
    if interval_ms < 1 {
        return Err(MapdError::InvalidInterval(interval_ms));
    }
    Ok(Duration::from_millis(interval_ms))
}

/// The recording's events in order: the first at once, then one every
/// `interval`.
pub fn replay_stream(
    recording: Recording,
    interval: Duration,
) -> impl Stream<Item = SniffEvent> + Send + 'static {
    let start = tokio::time::Instant::now();
    futures::stream::unfold(
        (recording.events.into_iter(), 0u32),
        move |(mut events, i)| async move {
            let event = events.next()?;
            tokio::time::sleep_until(start + interval * i).await;
            Some((event, (events, i + 1)))
        },
    )
}
