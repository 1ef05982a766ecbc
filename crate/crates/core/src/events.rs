//! Event records, trigger records and recordings.

use serde::{Deserialize, Serialize};

/// Sign of a log-intensity change.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Polarity {
    On,
    Off,
}

impl Polarity {
    pub fn sign(self) -> f64 {
        match self {
            Polarity::On => 1.0,
            Polarity::Off => -1.0,
        }
    }

    pub fn as_i8(self) -> i8 {
        match self {
            Polarity::On => 1,
            Polarity::Off => -1,
        }
    }

    pub fn from_i8(v: i8) -> Option<Self> {
        match v {
            1 => Some(Polarity::On),
            -1 => Some(Polarity::Off),
            _ => None,
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Polarity::On => Polarity::Off,
            Polarity::Off => Polarity::On,
        }
    }
}

/// One asynchronous brightness-change record. `t` is in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub x: u16,
    pub y: u16,
    pub t: f64,
    pub polarity: Polarity,
}

impl Event {
    pub fn new(x: u16, y: u16, t: f64, polarity: Polarity) -> Self {
        Self { x, y, t, polarity }
    }
}

/// Encoder trigger times. `on[f]` is the light-side trigger opening frame `f`
/// and `off[f]` the camera-side trigger recorded for that frame. A recording
/// with `F` frames carries `F + 1` entries: the last one closes frame `F - 1`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TriggerRecord {
    pub on: Vec<f64>,
    pub off: Vec<Option<f64>>,
}

impl TriggerRecord {
    pub fn len(&self) -> usize {
        self.on.len()
    }

    pub fn is_empty(&self) -> bool {
        self.on.is_empty()
    }

    /// Number of complete frames.
    pub fn frame_count(&self) -> usize {
        self.on.len().saturating_sub(1)
    }
}

/// Events of a recording, sorted by timestamp, plus its triggers.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EventStream {
    pub width: u16,
    pub height: u16,
    pub events: Vec<Event>,
    pub triggers: TriggerRecord,
}

impl EventStream {
    pub fn new(width: u16, height: u16, mut events: Vec<Event>, triggers: TriggerRecord) -> Self {
        sort_events(&mut events);
        Self {
            width,
            height,
            events,
            triggers,
        }
    }

    pub fn pixel_index(&self, x: u16, y: u16) -> usize {
        y as usize * self.width as usize + x as usize
    }

    /// Events grouped per pixel (row-major pixel order), each group in time order.
    pub fn per_pixel(&self) -> Vec<Vec<Event>> {
        let n = self.width as usize * self.height as usize;
        let mut counts = vec![0usize; n];
        for e in &self.events {
            counts[self.pixel_index(e.x, e.y)] += 1;
        }
        let mut out: Vec<Vec<Event>> = counts.into_iter().map(Vec::with_capacity).collect();
        for e in &self.events {
            out[self.pixel_index(e.x, e.y)].push(*e);
        }
        out
    }

    /// Mean event rate in events per second over the trigger span.
    pub fn event_rate(&self) -> f64 {
        let span = match (self.triggers.on.first(), self.triggers.on.last()) {
            (Some(a), Some(b)) if b > a => b - a,
            _ => match (self.events.first(), self.events.last()) {
                (Some(a), Some(b)) if b.t > a.t => b.t - a.t,
                _ => return 0.0,
            },
        };
        self.events.len() as f64 / span
    }
}

/// Sorts by timestamp, breaking ties by pixel so the order is total.
pub fn sort_events(events: &mut [Event]) {
    events.sort_by(|a, b| a.t.total_cmp(&b.t).then(a.y.cmp(&b.y)).then(a.x.cmp(&b.x)));
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polarity_codes() {
        assert_eq!(Polarity::from_i8(1), Some(Polarity::On));
        assert_eq!(Polarity::from_i8(-1), Some(Polarity::Off));
        assert_eq!(Polarity::from_i8(0), None);
        assert_eq!(Polarity::On.flipped(), Polarity::Off);
        assert_eq!(Polarity::Off.sign(), -1.0);
    }

    #[test]
    fn grouping_preserves_time_order() {
        let events = vec![
            Event::new(1, 0, 0.3, Polarity::On),
            Event::new(0, 0, 0.2, Polarity::Off),
            Event::new(1, 0, 0.1, Polarity::On),
        ];
        let s = EventStream::new(2, 1, events, TriggerRecord::default());
        assert!(s.events.windows(2).all(|w| w[0].t <= w[1].t));
        let groups = s.per_pixel();
        assert_eq!(groups[0].len(), 1);
        assert_eq!(
            groups[1].iter().map(|e| e.t).collect::<Vec<_>>(),
            vec![0.1, 0.3]
        );
    }
}
