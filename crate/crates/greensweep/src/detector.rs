//! Frame-level trash classification and the windowed pickup decision.
//!
//! A stochastic stub stands in for the CNN: it emits a per-frame score in
//! [0, 1] that lands at or above the inference threshold with a configured
//! probability. Scores are binarized and averaged over a 10-frame window;
//! a sufficiently positive window triggers the pickup mechanism.

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;

/// Anything that can score a camera frame. Implementations must return a
/// probability in [0, 1]; `trash_present` is the ground-truth frame content.
pub trait FrameClassifier {
    fn classify(&self, trash_present: bool, rng: &mut dyn RngCore) -> f64;
}

/// Stub classifier with fixed hit and false-positive rates.
///
/// Draws exactly two random values per frame regardless of outcome, so runs
/// with different parameters consume identical random streams.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassifierStub {
    /// P(score >= 0.5) when trash is in the zone.
    pub p_hit: f64,
    /// P(score >= 0.5) on empty grass.
    pub p_false: f64,
}

impl FrameClassifier for ClassifierStub {
    fn classify(&self, trash_present: bool, rng: &mut dyn RngCore) -> f64 {
        let p = if trash_present { self.p_hit } else { self.p_false };
        let positive = rng.gen_bool(p.clamp(0.0, 1.0));
        let magnitude: f64 = rng.gen();
        if positive {
            0.5 + 0.5 * magnitude
        } else {
            0.5 * magnitude
        }
    }
}

/// Detector configuration: stub rates plus window semantics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorParams {
    pub p_hit: f64,
    pub p_false: f64,
    /// Frames averaged per decision.
    pub window_len: usize,
    /// Mean positive fraction needed to trigger a pickup.
    pub trigger_threshold: f64,
    /// Per-frame score binarization threshold.
    pub infer_threshold: f64,
    /// Require the mean to strictly exceed the threshold instead of >=.
    pub strict_trigger: bool,
}

impl Default for DetectorParams {
    fn default() -> Self {
        Self {
            // Calibrated so the end-to-end detection rate (given the robot
            // drives over the item) lands at 0.90 under default speed and
            // zone dwell; see the calibrate example / subcommand.
            p_hit: 0.703,
            p_false: 0.01,
            window_len: 10,
            trigger_threshold: 0.9,
            infer_threshold: 0.5,
            strict_trigger: false,
        }
    }
}

impl DetectorParams {
    pub fn stub(&self) -> ClassifierStub {
        ClassifierStub {
            p_hit: self.p_hit,
            p_false: self.p_false,
        }
    }
}

/// Moving-average trigger over binarized frame scores.
///
/// The window must fill completely before it can trigger, and it empties
/// after every trigger, so one burst of evidence fires at most once.
#[derive(Debug, Clone)]
pub struct DecisionWindow {
    frames: VecDeque<bool>,
    positives: usize,
    window_len: usize,
    trigger_threshold: f64,
    infer_threshold: f64,
    strict: bool,
}

impl DecisionWindow {
    pub fn new(params: &DetectorParams) -> Self {
        assert!(params.window_len > 0, "window length must be positive");
        Self {
            frames: VecDeque::with_capacity(params.window_len),
            positives: 0,
            window_len: params.window_len,
            trigger_threshold: params.trigger_threshold,
            infer_threshold: params.infer_threshold,
            strict: params.strict_trigger,
        }
    }

    /// Push one frame score; returns true when the filled window's positive
    /// fraction reaches the trigger threshold. Clears itself on trigger.
    pub fn update(&mut self, frame_prob: f64) -> bool {
        let positive = frame_prob >= self.infer_threshold;
        if self.frames.len() == self.window_len {
            if self.frames.pop_front().unwrap() {
                self.positives -= 1;
            }
        }
        self.frames.push_back(positive);
        if positive {
            self.positives += 1;
        }
        if self.frames.len() < self.window_len {
            return false;
        }
        let mean = self.positives as f64 / self.window_len as f64;
        let trigger = if self.strict {
            mean > self.trigger_threshold
        } else {
            mean >= self.trigger_threshold
        };
        if trigger {
            self.clear();
        }
        trigger
    }

    /// Drop all accumulated frames (used when a pickup cycle ends).
    pub fn clear(&mut self) {
        self.frames.clear();
        self.positives = 0;
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}
