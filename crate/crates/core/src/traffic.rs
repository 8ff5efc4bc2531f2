//! Random application traffic: uniform inter-creation gaps, uniform sizes,
//! uniformly chosen distinct source and destination.

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};

pub type NodeId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct MessageId(pub u32);

impl MessageId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl std::fmt::Display for MessageId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "m{}", self.0)
    }
}

/// Immutable description of an application message.
#[derive(Debug, Clone, PartialEq)]
pub struct Message {
    pub id: MessageId,
    pub source: NodeId,
    pub destination: NodeId,
    /// Payload size in bytes.
    pub size: u64,
    pub created_at: f64,
    pub ttl: f64,
    /// Copy tokens handed to the source at creation.
    pub copies: u32,
}

impl Message {
    pub fn expires_at(&self) -> f64 {
        self.created_at + self.ttl
    }

    /// A message is expired once strictly more than `ttl` seconds old.
    pub fn is_expired(&self, now: f64) -> bool {
        now - self.created_at > self.ttl
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrafficConfig {
    /// Seconds between consecutive creations, drawn uniformly.
    pub interval: [f64; 2],
    /// Message size range in bytes.
    pub size: [u64; 2],
    pub ttl: f64,
    /// Creation window `[start, end]`; the whole run when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub window: Option<[f64; 2]>,
}

impl Default for TrafficConfig {
    fn default() -> Self {
        TrafficConfig {
            interval: [10.0, 50.0],
            size: [500_000, 1_500_000],
            ttl: 86_400.0,
            window: None,
        }
    }
}

impl TrafficConfig {
    pub fn validate(&self) -> Result<()> {
        let [a, b] = self.interval;
        if !(a > 0.0 && a <= b && b.is_finite()) {
            return Err(SimError::config("traffic.interval", "needs 0 < min <= max"));
        }
        let [s, t] = self.size;
        if !(s > 0 && s <= t) {
            return Err(SimError::config("traffic.size", "needs 0 < min <= max"));
        }
        if self.ttl.is_nan() || self.ttl <= 0.0 {
            return Err(SimError::config("traffic.ttl", "must be positive"));
        }
        if let Some([w0, w1]) = self.window {
            if !(w0 >= 0.0 && w0 <= w1) {
                return Err(SimError::config("traffic.window", "needs 0 <= start <= end"));
            }
        }
        Ok(())
    }

    /// The creation window clipped to a run of `duration` seconds.
    pub fn window_for(&self, duration: f64) -> [f64; 2] {
        match self.window {
            Some([a, b]) => [a.min(duration), b.min(duration)],
            None => [0.0, duration],
        }
    }

    pub fn mean_interval(&self) -> f64 {
        (self.interval[0] + self.interval[1]) / 2.0
    }
}

/// Time of the creation following `last`, or `None` past the window end.
pub fn next_creation<R: Rng + ?Sized>(
    config: &TrafficConfig,
    last: f64,
    window_end: f64,
    rng: &mut R,
) -> Option<f64> {
    let [a, b] = config.interval;
    let gap = if a >= b { a } else { rng.gen_range(a..=b) };
    let t = last + gap;
    (t <= window_end).then_some(t)
}

/// Draws a message with distinct uniform endpoints among `nodes` nodes.
pub fn make_message<R: Rng + ?Sized>(
    config: &TrafficConfig,
    id: MessageId,
    copies: u32,
    now: f64,
    nodes: usize,
    rng: &mut R,
) -> Result<Message> {
    if nodes < 2 {
        return Err(SimError::TooFewNodes(nodes));
    }
    let pair = sample(rng, nodes, 2);
    let [s0, s1] = config.size;
    let size = if s0 >= s1 { s0 } else { rng.gen_range(s0..=s1) };
    Ok(Message {
        id,
        source: pair.index(0),
        destination: pair.index(1),
        size,
        created_at: now,
        ttl: config.ttl,
        copies,
    })
}

/// Mean number of creations in a window of `window` seconds.
pub fn expected_count(config: &TrafficConfig, window: f64) -> f64 {
    if window <= 0.0 {
        0.0
    } else {
        window / config.mean_interval()
    }
}

/// Stateful source of creations for one run.
#[derive(Debug, Clone)]
pub struct TrafficGenerator {
    config: TrafficConfig,
    copies: u32,
    nodes: usize,
    window: [f64; 2],
    next_id: u32,
}

impl TrafficGenerator {
    pub fn new(config: TrafficConfig, copies: u32, nodes: usize, duration: f64) -> Result<Self> {
        config.validate()?;
        if nodes < 2 {
            return Err(SimError::TooFewNodes(nodes));
        }
        let window = config.window_for(duration);
        Ok(TrafficGenerator {
            config,
            copies,
            nodes,
            window,
            next_id: 0,
        })
    }

    /// First creation time, one gap after the window opens.
    pub fn first<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<f64> {
        next_creation(&self.config, self.window[0], self.window[1], rng)
    }

    pub fn following<R: Rng + ?Sized>(&self, last: f64, rng: &mut R) -> Option<f64> {
        next_creation(&self.config, last, self.window[1], rng)
    }

    pub fn create<R: Rng + ?Sized>(&mut self, now: f64, rng: &mut R) -> Result<Message> {
        let id = MessageId(self.next_id);
        self.next_id += 1;
        make_message(&self.config, id, self.copies, now, self.nodes, rng)
    }

    pub fn created(&self) -> u32 {
        self.next_id
    }
}
