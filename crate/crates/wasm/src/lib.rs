//! WebAssembly bindings for the static demo page in `www/`.
//!
//! Three operations are exposed: generating and fitting a synthetic study,
//! dragging a line endpoint with live CCD recomputation, and driving the
//! voice state machine from typed words. The logic lives in plain Rust types
//! ([`DemoCore`], [`VoiceCore`]) so it is testable off the browser; the
//! `#[wasm_bindgen]` wrappers only convert errors and time.

use std::time::Duration;

use ccd_core::synth::{generate_case, SyntheticSpec};
use ccd_core::voice::{state_indicator, Indicator, VoiceAction, VoiceMachine, VoiceState};
use ccd_core::{
    ccd_angle, line_from_endpoints, measure_femur, FemurMeasurement, Point, RansacConfig, Side,
    DEFAULT_CUTOFF,
};
use serde::Serialize;
use wasm_bindgen::prelude::*;

/// Tint for pixels above the cutoff in any centerline channel.
const CENTERLINE_TINT: [u8; 3] = [90, 200, 255];

#[derive(Debug, Clone, Serialize)]
pub struct DemoSide {
    pub side: Side,
    pub true_ccd: Option<f64>,
    pub measurement: Option<FemurMeasurement>,
    pub error: Option<String>,
}

#[derive(Debug, Clone)]
pub struct DemoCore {
    pub width: usize,
    pub height: usize,
    /// RGBA, row-major, ready for `ImageData`.
    pub rgba: Vec<u8>,
    pub sides: Vec<DemoSide>,
}

impl DemoCore {
    pub fn generate(seed: u64, size: usize, outliers: f64, noise: f64) -> Result<Self, String> {
        let spec = SyntheticSpec {
            width: size,
            height: size,
            outlier_fraction: outliers,
            blur_noise: noise,
            seed,
            ..SyntheticSpec::default()
        };
        spec.validate().map_err(|e| e.to_string())?;
        let case = generate_case(&spec, 0).map_err(|e| e.to_string())?;
        let heatmap = &case.heatmap;
        let n = heatmap.width() * heatmap.height();

        let mut rgba = vec![0u8; n * 4];
        for (i, px) in rgba.chunks_exact_mut(4).enumerate() {
            let mut peak = 0.0f64;
            let mut on_centerline = false;
            for ch in heatmap.channels() {
                let v = ch.values()[i];
                peak = peak.max(v);
                if v > DEFAULT_CUTOFF && ch.name().structure.is_centerline() {
                    on_centerline = true;
                }
            }
            let g = (peak.clamp(0.0, 1.0) * 200.0) as u8;
            let rgb = if on_centerline { CENTERLINE_TINT } else { [g, g, g] };
            px[..3].copy_from_slice(&rgb);
            px[3] = 255;
        }

        let config = RansacConfig::default().with_seed(seed);
        let sides = Side::ALL
            .into_iter()
            .map(|side| {
                let true_ccd = case.truth.side(side).map(|t| t.ccd);
                match measure_femur(heatmap, side, &config, DEFAULT_CUTOFF).and_then(|m| {
                    FemurMeasurement::from_endpoints(side, m.neck_endpoints, m.shaft_endpoints)
                }) {
                    Ok(m) => DemoSide {
                        side,
                        true_ccd,
                        measurement: Some(m),
                        error: None,
                    },
                    Err(e) => DemoSide {
                        side,
                        true_ccd,
                        measurement: None,
                        error: Some(e.to_string()),
                    },
                }
            })
            .collect();
        Ok(Self {
            width: heatmap.width(),
            height: heatmap.height(),
            rgba,
            sides,
        })
    }

    /// Moves one endpoint and returns the new angle. `which` is `neck` or
    /// `shaft`.
    pub fn edit(&mut self, side: &str, which: &str, endpoint: usize, at: Point) -> Result<f64, String> {
        let side: Side = side.parse().map_err(|_| format!("unknown side {side:?}"))?;
        if endpoint > 1 {
            return Err(format!("endpoint must be 0 or 1, got {endpoint}"));
        }
        let entry = self
            .sides
            .iter_mut()
            .find(|s| s.side == side)
            .and_then(|s| s.measurement.as_mut())
            .ok_or_else(|| format!("no {side} measurement"))?;
        let (mut neck, mut shaft) = (entry.neck_endpoints, entry.shaft_endpoints);
        match which {
            "neck" => neck[endpoint] = at,
            "shaft" => shaft[endpoint] = at,
            other => return Err(format!("unknown line {other:?}")),
        }
        let updated = FemurMeasurement::from_endpoints(side, neck, shaft).map_err(|e| e.to_string())?;
        let angle = updated.ccd_degrees;
        *entry = updated;
        Ok(angle)
    }

    pub fn sides_json(&self) -> String {
        serde_json::to_string(&self.sides).expect("serializable")
    }
}

pub fn angle_between(neck: [Point; 2], shaft: [Point; 2]) -> Result<f64, String> {
    let neck = line_from_endpoints(neck[0], neck[1]).map_err(|e| e.to_string())?;
    let shaft = line_from_endpoints(shaft[0], shaft[1]).map_err(|e| e.to_string())?;
    Ok(ccd_angle(&neck, &shaft))
}

#[derive(Debug, Clone, Serialize)]
pub struct VoiceStep {
    pub state: VoiceState,
    pub indicator: Indicator,
    pub actions: Vec<VoiceAction>,
}

#[derive(Debug, Clone)]
pub struct VoiceCore {
    machine: VoiceMachine,
    state: VoiceState,
}

fn ms(now_ms: f64) -> Duration {
    Duration::from_secs_f64(now_ms.max(0.0) / 1000.0)
}

impl VoiceCore {
    pub fn new(activate_word: &str) -> Self {
        Self {
            machine: VoiceMachine::new(activate_word),
            state: VoiceState::Sleeping,
        }
    }

    pub fn step(&mut self, text: &str, now: Duration) -> VoiceStep {
        let (state, actions) = self.machine.step_text(std::mem::take(&mut self.state), text, now);
        self.state = state;
        self.report(actions)
    }

    pub fn tick(&mut self, now: Duration) -> VoiceStep {
        self.state = self.machine.tick(std::mem::take(&mut self.state), now);
        self.report(Vec::new())
    }

    fn report(&self, actions: Vec<VoiceAction>) -> VoiceStep {
        VoiceStep {
            state: self.state.clone(),
            indicator: state_indicator(&self.state),
            actions,
        }
    }
}

/// A generated, fitted synthetic study.
#[wasm_bindgen]
pub struct Demo(DemoCore);

#[wasm_bindgen]
impl Demo {
    #[wasm_bindgen(constructor)]
    pub fn new(seed: u64, size: usize, outliers: f64, noise: f64) -> Result<Demo, JsError> {
        DemoCore::generate(seed, size, outliers, noise)
            .map(Demo)
            .map_err(|e| JsError::new(&e))
    }

    #[wasm_bindgen(getter)]
    pub fn width(&self) -> usize {
        self.0.width
    }

    #[wasm_bindgen(getter)]
    pub fn height(&self) -> usize {
        self.0.height
    }

    pub fn pixels(&self) -> Vec<u8> {
        self.0.rgba.clone()
    }

    /// Per-side measurements and truth angles as JSON.
    pub fn sides(&self) -> String {
        self.0.sides_json()
    }

    pub fn edit(&mut self, side: &str, which: &str, endpoint: usize, x: f64, y: f64) -> Result<f64, JsError> {
        self.0.edit(side, which, endpoint, (x, y)).map_err(|e| JsError::new(&e))
    }
}

#[wasm_bindgen(js_name = angleFromEndpoints)]
#[allow(clippy::too_many_arguments)]
pub fn angle_from_endpoints(
    nx0: f64,
    ny0: f64,
    nx1: f64,
    ny1: f64,
    sx0: f64,
    sy0: f64,
    sx1: f64,
    sy1: f64,
) -> Result<f64, JsError> {
    angle_between([(nx0, ny0), (nx1, ny1)], [(sx0, sy0), (sx1, sy1)]).map_err(|e| JsError::new(&e))
}

/// Voice state machine driven by typed words and `performance.now()`.
#[wasm_bindgen]
pub struct Voice(VoiceCore);

#[wasm_bindgen]
impl Voice {
    #[wasm_bindgen(constructor)]
    pub fn new(activate_word: &str) -> Voice {
        Voice(VoiceCore::new(activate_word))
    }

    /// Returns `{state, indicator, actions}` as JSON.
    pub fn step(&mut self, text: &str, now_ms: f64) -> String {
        serde_json::to_string(&self.0.step(text, ms(now_ms))).expect("serializable")
    }

    pub fn tick(&mut self, now_ms: f64) -> String {
        serde_json::to_string(&self.0.tick(ms(now_ms))).expect("serializable")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn demo_fits_both_sides_close_to_truth() {
        let demo = DemoCore::generate(3, 256, 0.0, 0.0).unwrap();
        assert_eq!(demo.rgba.len(), 256 * 256 * 4);
        assert!(demo.rgba.chunks(4).any(|p| p[..3] == CENTERLINE_TINT));
        for s in &demo.sides {
            let m = s.measurement.as_ref().unwrap();
            assert!((m.ccd_degrees - s.true_ccd.unwrap()).abs() < 1.0);
        }
        let json: serde_json::Value = serde_json::from_str(&demo.sides_json()).unwrap();
        assert_eq!(json.as_array().unwrap().len(), 2);
    }

    #[test]
    fn bad_spec_is_rejected() {
        assert!(DemoCore::generate(0, 16, 0.0, 0.0).is_err());
        assert!(DemoCore::generate(0, 256, 1.0, 0.0).is_err());
    }

    #[test]
    fn edit_matches_library_angle() {
        let mut demo = DemoCore::generate(1, 256, 0.2, 0.05).unwrap();
        let angle = demo.edit("left", "neck", 0, (20.0, 30.0)).unwrap();
        let m = demo.sides[0].measurement.clone().unwrap();
        assert_eq!(m.neck_endpoints[0], (20.0, 30.0));
        assert_eq!(angle.to_bits(), angle_between(m.neck_endpoints, m.shaft_endpoints).unwrap().to_bits());
        assert!(demo.edit("middle", "neck", 0, (1.0, 1.0)).is_err());
        assert!(demo.edit("left", "arm", 0, (1.0, 1.0)).is_err());
        assert!(demo.edit("left", "neck", 2, (1.0, 1.0)).is_err());
        let other = m.neck_endpoints[1];
        assert!(demo.edit("left", "neck", 0, other).is_err());
    }

    #[test]
    fn perpendicular_endpoints_give_ninety() {
        assert_eq!(angle_between([(0.0, 0.0), (3.0, 4.0)], [(1.0, 1.0), (5.0, -2.0)]).unwrap(), 90.0);
        assert!(angle_between([(1.0, 1.0), (1.0, 1.0)], [(0.0, 0.0), (1.0, 0.0)]).is_err());
    }

    #[test]
    fn voice_needs_activation_and_times_out() {
        let mut v = VoiceCore::new("activate");
        assert!(v.step("right", ms(0.0)).actions.is_empty());
        let s = v.step("activate", ms(1000.0));
        assert_eq!(s.indicator, Indicator::Active);
        let s = v.step("right", ms(2000.0));
        assert_eq!(s.actions, vec![VoiceAction::ZoomRight]);
        assert_eq!(s.indicator, Indicator::Idle);

        v.step("activate", ms(10_000.0));
        assert_eq!(v.tick(ms(15_000.0)).indicator, Indicator::Active);
        assert_eq!(v.tick(ms(15_001.0)).indicator, Indicator::Idle);

        let s = v.step("activate save case twelve ok", ms(20_000.0));
        assert_eq!(s.actions, vec![VoiceAction::SaveSnapshot { note: "case twelve".into() }]);
        assert_eq!(ms(-5.0), Duration::ZERO);
    }
}
