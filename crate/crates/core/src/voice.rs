//! Voice-command state machine.
//!
//! Commands are only executed after the wake word. A listening machine that
//! hears nothing useful for more than five seconds falls back to sleeping;
//! after any executed command it sleeps again. `save` switches to dictation,
//! which collects a free-text note until `ok`.
//!
//! Time is passed in as a monotonic offset from an arbitrary origin so the
//! machine stays a pure function of its inputs.

use std::time::Duration;

use serde::{Deserialize, Serialize};

pub const DEFAULT_ACTIVATE_WORD: &str = "activate";
pub const LISTEN_TIMEOUT: Duration = Duration::from_secs(5);
pub const MAX_NOTE_CHARS: usize = 2000;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "snake_case")]
pub enum VoiceState {
    #[default]
    Sleeping,
    Listening { activated_at: Duration },
    Dictating { buffer: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum VoiceAction {
    ZoomLeft,
    ZoomRight,
    ZoomOut,
    OpenNext,
    SaveSnapshot { note: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Indicator {
    Idle,
    Active,
}

pub fn state_indicator(state: &VoiceState) -> Indicator {
    match state {
        VoiceState::Sleeping => Indicator::Idle,
        VoiceState::Listening { .. } | VoiceState::Dictating { .. } => Indicator::Active,
    }
}

/// Lowercases and drops punctuation, so `"Left."` matches `left`.
pub fn normalize_token(token: &str) -> String {
    token
        .chars()
        .filter(|c| !c.is_ascii_punctuation() && !c.is_whitespace())
        .flat_map(char::to_lowercase)
        .collect()
}

/// The state machine's configuration: only the wake word varies.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VoiceMachine {
    activate_word: String,
}

impl Default for VoiceMachine {
    fn default() -> Self {
        Self::new(DEFAULT_ACTIVATE_WORD)
    }
}

impl VoiceMachine {
    pub fn new(activate_word: &str) -> Self {
        Self {
            activate_word: normalize_token(activate_word),
        }
    }

    pub fn activate_word(&self) -> &str {
        &self.activate_word
    }

    /// Expires a stale activation. Only strictly more than five seconds
    /// counts as expired.
    pub fn tick(&self, state: VoiceState, now: Duration) -> VoiceState {
        match state {
            VoiceState::Listening { activated_at }
                if now.saturating_sub(activated_at) > LISTEN_TIMEOUT =>
            {
                VoiceState::Sleeping
            }
            other => other,
        }
    }

    pub fn step(
        &self,
        state: VoiceState,
        token: &str,
        now: Duration,
    ) -> (VoiceState, Option<VoiceAction>) {
        let state = self.tick(state, now);
        let word = normalize_token(token);
        match state {
            VoiceState::Sleeping => {
                if !word.is_empty() && word == self.activate_word {
                    (VoiceState::Listening { activated_at: now }, None)
                } else {
                    (VoiceState::Sleeping, None)
                }
            }
            VoiceState::Listening { activated_at } => {
                let action = match word.as_str() {
                    "left" => VoiceAction::ZoomLeft,
                    "right" => VoiceAction::ZoomRight,
                    "out" | "both" => VoiceAction::ZoomOut,
                    "open" => VoiceAction::OpenNext,
                    "save" => {
                        return (
                            VoiceState::Dictating {
                                buffer: String::new(),
                            },
                            None,
                        )
                    }
                    w if !w.is_empty() && w == self.activate_word => {
                        return (VoiceState::Listening { activated_at: now }, None)
                    }
                    _ => return (VoiceState::Listening { activated_at }, None),
                };
                (VoiceState::Sleeping, Some(action))
            }
            VoiceState::Dictating { mut buffer } => {
                if word == "ok" {
                    return (VoiceState::Sleeping, Some(VoiceAction::SaveSnapshot { note: buffer }));
                }
                let text = token.trim();
                if !word.is_empty() {
                    let extra = text.chars().count() + usize::from(!buffer.is_empty());
                    if buffer.chars().count() + extra <= MAX_NOTE_CHARS {
                        if !buffer.is_empty() {
                            buffer.push(' ');
                        }
                        buffer.push_str(text);
                    }
                }
                (VoiceState::Dictating { buffer }, None)
            }
        }
    }

    /// Splits transcriber output on whitespace and feeds each word through
    /// [`VoiceMachine::step`] in order.
    pub fn step_text(
        &self,
        mut state: VoiceState,
        text: &str,
        now: Duration,
    ) -> (VoiceState, Vec<VoiceAction>) {
        let mut actions = Vec::new();
        for word in text.split_whitespace() {
            let (next, action) = self.step(state, word, now);
            state = next;
            actions.extend(action);
        }
        (state, actions)
    }
}

/// [`VoiceMachine::step`] with the default wake word.
pub fn step(state: VoiceState, token: &str, now: Duration) -> (VoiceState, Option<VoiceAction>) {
    VoiceMachine::default().step(state, token, now)
}

pub fn tick(state: VoiceState, now: Duration) -> VoiceState {
    VoiceMachine::default().tick(state, now)
}
