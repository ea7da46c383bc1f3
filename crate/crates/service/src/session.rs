//! One measurement session: up to two open studies with their fitted (and
//! possibly hand-edited) femur measurements, the view layout, the voice
//! state machine and the watch-folder cursor.
//!
//! Every angle a session reports comes from
//! [`FemurMeasurement::from_endpoints`] on its stored endpoints, so edits and
//! reads share one code path.

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use ccd_core::voice::{state_indicator, Indicator, VoiceAction, VoiceMachine, VoiceState};
use ccd_core::{load_study, measure_femur, FemurMeasurement, Point, RansacConfig, Side, Study};
use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Result, ServiceError};
use crate::folder::{next_manifest, FolderCursor};
use crate::snapshot::{write_snapshot, Snapshot};

#[derive(Debug, Clone)]
pub struct SessionConfig {
    pub watch_folder: Option<PathBuf>,
    pub save_folder: Option<PathBuf>,
    pub cutoff: f64,
    pub ransac: RansacConfig,
    pub activate_word: String,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self {
            watch_folder: None,
            save_folder: None,
            cutoff: ccd_core::DEFAULT_CUTOFF,
            ransac: RansacConfig::default(),
            activate_word: ccd_core::voice::DEFAULT_ACTIVATE_WORD.to_owned(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViewState {
    Both,
    LeftZoom,
    RightZoom,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DisplaySlot {
    Left,
    Right,
}

impl std::fmt::Display for DisplaySlot {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            DisplaySlot::Left => "left",
            DisplaySlot::Right => "right",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LineKind {
    Neck,
    Shaft,
}

/// Which femurs a study shows, from its manifest's channel `side` fields.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StudyFemur {
    Left,
    Right,
    Both,
    Unknown,
}

#[derive(Debug, Clone, Serialize)]
pub struct SideResult {
    pub side: Side,
    pub measurement: Option<FemurMeasurement>,
    pub error: Option<String>,
}

#[derive(Debug, Clone)]
pub struct OpenStudy {
    pub study: Study,
    pub femur: StudyFemur,
    pub results: Vec<SideResult>,
    opened_seq: u64,
}

impl OpenStudy {
    /// Loads the manifest and fits every side whose centerlines are present.
    /// Both sides always get an entry; a missing or failed side carries an
    /// error instead of a measurement.
    pub fn prepare(manifest_path: &Path, config: &SessionConfig) -> Result<Self> {
        let study = load_study(manifest_path)?;
        let sides = study.sides();
        let femur = match sides.as_slice() {
            [Side::Left] => StudyFemur::Left,
            [Side::Right] => StudyFemur::Right,
            [] => StudyFemur::Unknown,
            _ => StudyFemur::Both,
        };
        let measurable = study.heatmap.measurable_sides();
        let results = Side::ALL
            .into_iter()
            .map(|side| {
                if !measurable.contains(&side) {
                    return SideResult {
                        side,
                        measurement: None,
                        error: Some(format!("no {side} centerline channels")),
                    };
                }
                match measure_femur(&study.heatmap, side, &config.ransac, config.cutoff)
                    .and_then(normalize)
                {
                    Ok(m) => SideResult {
                        side,
                        measurement: Some(m),
                        error: None,
                    },
                    Err(e) => SideResult {
                        side,
                        measurement: None,
                        error: Some(e.to_string()),
                    },
                }
            })
            .collect();
        Ok(Self {
            study,
            femur,
            results,
            opened_seq: 0,
        })
    }

    pub fn manifest_path(&self) -> &Path {
        &self.study.manifest_path
    }

    pub fn measurement(&self, side: Side) -> Option<&FemurMeasurement> {
        self.results
            .iter()
            .find(|r| r.side == side)
            .and_then(|r| r.measurement.as_ref())
    }
}

/// Re-derives lines and angle from the display endpoints so fitted and
/// edited measurements follow the same path.
fn normalize(fitted: FemurMeasurement) -> ccd_core::Result<FemurMeasurement> {
    let mut m =
        FemurMeasurement::from_endpoints(fitted.side, fitted.neck_endpoints, fitted.shaft_endpoints)?;
    m.neck_inliers = fitted.neck_inliers;
    m.shaft_inliers = fitted.shaft_inliers;
    Ok(m)
}

/// Slot assignment for the open studies, by index. With two studies the
/// right-femur study sits in the left slot.
pub fn assign_slots(femurs: &[StudyFemur]) -> Vec<(DisplaySlot, usize)> {
    match femurs {
        [] => vec![],
        [_] => vec![(DisplaySlot::Left, 0)],
        [a, b, ..] => {
            let swap = match (a, b) {
                (StudyFemur::Right, _) => false,
                (_, StudyFemur::Right) => true,
                (StudyFemur::Left, _) => true,
                (_, StudyFemur::Left) => false,
                _ => false,
            };
            if swap {
                vec![(DisplaySlot::Left, 1), (DisplaySlot::Right, 0)]
            } else {
                vec![(DisplaySlot::Left, 0), (DisplaySlot::Right, 1)]
            }
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ExecutedAction {
    pub action: VoiceAction,
    pub description: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct VoiceOutcome {
    pub state: VoiceState,
    pub indicator: Indicator,
    pub view: ViewState,
    /// Last action executed for this token, if any.
    pub action: Option<ExecutedAction>,
    pub actions: Vec<ExecutedAction>,
    pub errors: Vec<String>,
    pub snapshot: Option<Snapshot>,
}

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum OpenNextOutcome {
    Opened { manifest: PathBuf },
    NothingNewer { warning: String },
}

#[derive(Debug, Clone, Serialize)]
pub struct StudyView {
    pub slot: DisplaySlot,
    pub manifest: PathBuf,
    pub image: Option<PathBuf>,
    pub width: usize,
    pub height: usize,
    pub femur: StudyFemur,
    pub sides: Vec<SideResult>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SessionView {
    pub id: String,
    pub view: ViewState,
    pub indicator: Indicator,
    pub voice: VoiceState,
    pub studies: Vec<StudyView>,
}

pub struct Session {
    id: String,
    config: Arc<SessionConfig>,
    machine: VoiceMachine,
    studies: Vec<OpenStudy>,
    view: ViewState,
    voice: VoiceState,
    cursor: Option<FolderCursor>,
    next_seq: u64,
}

impl Session {
    pub fn new(id: impl Into<String>, config: Arc<SessionConfig>) -> Self {
        let machine = VoiceMachine::new(&config.activate_word);
        Self {
            id: id.into(),
            config,
            machine,
            studies: Vec::new(),
            view: ViewState::Both,
            voice: VoiceState::Sleeping,
            cursor: None,
            next_seq: 0,
        }
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn config(&self) -> &Arc<SessionConfig> {
        &self.config
    }

    pub fn view_state(&self) -> ViewState {
        self.view
    }

    pub fn voice_state(&self) -> &VoiceState {
        &self.voice
    }

    pub fn indicator(&self) -> Indicator {
        state_indicator(&self.voice)
    }

    pub fn studies(&self) -> &[OpenStudy] {
        &self.studies
    }

    /// Open studies in display order.
    pub fn layout(&self) -> Vec<(DisplaySlot, &OpenStudy)> {
        let femurs: Vec<StudyFemur> = self.studies.iter().map(|s| s.femur).collect();
        assign_slots(&femurs)
            .into_iter()
            .map(|(slot, i)| (slot, &self.studies[i]))
            .collect()
    }

    fn slot_index(&self, slot: DisplaySlot) -> Result<usize> {
        let femurs: Vec<StudyFemur> = self.studies.iter().map(|s| s.femur).collect();
        assign_slots(&femurs)
            .into_iter()
            .find(|(s, _)| *s == slot)
            .map(|(_, i)| i)
            .ok_or_else(|| ServiceError::UnknownSlot(slot.to_string()))
    }

    /// Adds an already fitted study. A third study replaces the oldest.
    pub fn install_study(&mut self, mut study: OpenStudy) {
        study.opened_seq = self.next_seq;
        self.next_seq += 1;
        if self.studies.len() >= 2 {
            let oldest = self
                .studies
                .iter()
                .enumerate()
                .min_by_key(|(_, s)| s.opened_seq)
                .map(|(i, _)| i)
                .expect("two studies open");
            self.studies.remove(oldest);
        }
        self.studies.push(study);
        self.view = ViewState::Both;
    }

    pub fn open_study(&mut self, manifest_path: &Path) -> Result<()> {
        let study = OpenStudy::prepare(manifest_path, &self.config)?;
        self.install_study(study);
        Ok(())
    }

    pub fn open_next(&mut self) -> Result<OpenNextOutcome> {
        let folder = self
            .config
            .watch_folder
            .clone()
            .ok_or(ServiceError::FolderNotConfigured("watch"))?;
        match next_manifest(&folder, self.cursor.as_ref())? {
            Some(next) => {
                self.open_study(&next.path)?;
                let manifest = next.path.clone();
                self.cursor = Some(next);
                Ok(OpenNextOutcome::Opened { manifest })
            }
            None => Ok(OpenNextOutcome::NothingNewer {
                warning: format!("no manifest newer than the last opened one in {}", folder.display()),
            }),
        }
    }

    /// Moves one endpoint and returns the recomputed CCD angle.
    pub fn update_line(
        &mut self,
        slot: DisplaySlot,
        side: Side,
        which: LineKind,
        endpoint: usize,
        position: Point,
    ) -> Result<f64> {
        if endpoint > 1 {
            return Err(ServiceError::BadEndpoint(endpoint));
        }
        let index = self.slot_index(slot)?;
        let result = self.studies[index]
            .results
            .iter_mut()
            .find(|r| r.side == side)
            .and_then(|r| r.measurement.as_mut())
            .ok_or_else(|| ServiceError::MeasurementUnavailable {
                slot: slot.to_string(),
                side: side.to_string(),
            })?;
        let mut neck = result.neck_endpoints;
        let mut shaft = result.shaft_endpoints;
        match which {
            LineKind::Neck => neck[endpoint] = position,
            LineKind::Shaft => shaft[endpoint] = position,
        }
        let mut updated = FemurMeasurement::from_endpoints(side, neck, shaft)?;
        updated.neck_inliers = result.neck_inliers;
        updated.shaft_inliers = result.shaft_inliers;
        let angle = updated.ccd_degrees;
        *result = updated;
        Ok(angle)
    }

    pub fn tick(&mut self, now: Duration) {
        self.voice = self.machine.tick(std::mem::take(&mut self.voice), now);
    }

    /// Feeds transcriber output word by word and executes resulting actions.
    /// Execution errors are reported; the voice state still advances.
    pub fn process_voice_token(&mut self, token: &str, now: Duration, wall: DateTime<Utc>) -> VoiceOutcome {
        let (state, actions) = self
            .machine
            .step_text(std::mem::take(&mut self.voice), token, now);
        self.voice = state;
        let mut executed = Vec::new();
        let mut errors = Vec::new();
        let mut snapshot = None;
        for action in actions {
            let result: Result<String> = match &action {
                VoiceAction::ZoomLeft => {
                    self.view = ViewState::LeftZoom;
                    Ok("zoomed to left femur".into())
                }
                VoiceAction::ZoomRight => {
                    self.view = ViewState::RightZoom;
                    Ok("zoomed to right femur".into())
                }
                VoiceAction::ZoomOut => {
                    self.view = ViewState::Both;
                    Ok("showing both sides".into())
                }
                VoiceAction::OpenNext => self.open_next().map(|o| match o {
                    OpenNextOutcome::Opened { manifest } => format!("opened {}", manifest.display()),
                    OpenNextOutcome::NothingNewer { warning } => warning,
                }),
                VoiceAction::SaveSnapshot { note } => self.save_snapshot(note, wall).map(|s| {
                    let d = format!("saved {}", s.image.display());
                    snapshot = Some(s);
                    d
                }),
            };
            match result {
                Ok(description) => executed.push(ExecutedAction {
                    action,
                    description,
                }),
                Err(e) => errors.push(e.to_string()),
            }
        }
        VoiceOutcome {
            state: self.voice.clone(),
            indicator: self.indicator(),
            view: self.view,
            action: executed.last().cloned(),
            actions: executed,
            errors,
            snapshot,
        }
    }

    pub fn save_snapshot(&self, note: &str, wall: DateTime<Utc>) -> Result<Snapshot> {
        let folder = self
            .config
            .save_folder
            .as_deref()
            .ok_or(ServiceError::FolderNotConfigured("save"))?;
        if self.studies.is_empty() {
            return Err(ServiceError::NoStudyOpen);
        }
        write_snapshot(folder, &self.layout(), self.view, note, wall)
    }

    pub fn view(&self) -> SessionView {
        SessionView {
            id: self.id.clone(),
            view: self.view,
            indicator: self.indicator(),
            voice: self.voice.clone(),
            studies: self
                .layout()
                .into_iter()
                .map(|(slot, s)| StudyView {
                    slot,
                    manifest: s.study.manifest_path.clone(),
                    image: s.study.image_path(),
                    width: s.study.heatmap.width(),
                    height: s.study.heatmap.height(),
                    femur: s.femur,
                    sides: s.results.clone(),
                })
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slot_rule() {
        use StudyFemur::*;
        assert_eq!(assign_slots(&[Left]), vec![(DisplaySlot::Left, 0)]);
        assert_eq!(
            assign_slots(&[Left, Right]),
            vec![(DisplaySlot::Left, 1), (DisplaySlot::Right, 0)]
        );
        assert_eq!(
            assign_slots(&[Right, Left]),
            vec![(DisplaySlot::Left, 0), (DisplaySlot::Right, 1)]
        );
        assert_eq!(
            assign_slots(&[Both, Right]),
            vec![(DisplaySlot::Left, 1), (DisplaySlot::Right, 0)]
        );
        assert_eq!(
            assign_slots(&[Left, Both]),
            vec![(DisplaySlot::Left, 1), (DisplaySlot::Right, 0)]
        );
        assert_eq!(
            assign_slots(&[Both, Both]),
            vec![(DisplaySlot::Left, 0), (DisplaySlot::Right, 1)]
        );
    }
}
