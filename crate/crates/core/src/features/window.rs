// SPDX-License-Identifier: Apache-2.0

use serde::{Deserialize, Serialize};

use super::FeatureError;
use crate::data::Sample;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WindowRule {
    OnsetApex,
    ApexOffsetFallback,
    BeginningWindow,
}

/// Frames `start..end`, end exclusive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameWindow {
    pub start: u32,
    pub end: u32,
    pub rule: WindowRule,
}

impl FrameWindow {
    pub fn len(&self) -> u32 {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end == self.start
    }

    /// Last frame inside the window.
    pub fn last(&self) -> u32 {
        self.end - 1
    }

    pub fn contains(&self, frame: u32) -> bool {
        (self.start..self.end).contains(&frame)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WindowMode {
    /// Two-frame input: the onset-to-apex span, or apex-to-offset when the
    /// onset is not annotated separately.
    #[default]
    Pair,
    /// Long clips: the rising part mirrored around the apex.
    Video,
}

pub fn select_window(s: &Sample, mode: WindowMode) -> Result<FrameWindow, FeatureError> {
    if s.onset == s.apex && s.apex == s.offset {
        return Err(FeatureError::DegenerateClip(s.sample_id.clone()));
    }
    if s.onset == s.apex {
        return Ok(FrameWindow { start: s.apex, end: s.offset + 1, rule: WindowRule::ApexOffsetFallback });
    }
    Ok(match mode {
        WindowMode::Pair => FrameWindow { start: s.onset, end: s.apex + 1, rule: WindowRule::OnsetApex },
        WindowMode::Video => {
            FrameWindow { start: s.onset, end: 2 * s.apex - s.onset, rule: WindowRule::BeginningWindow }
        }
    })
}
