//! Offline stand-in for the vision model.
//!
//! It looks at the same JPEGs a real model would get. Pixels are sorted
//! into cloud, built-up and other by brightness, and the AUI is ten times
//! the built-up share of the cell. The prompt's anchoring rule is applied
//! literally: a mostly cloudy image keeps the previous score, and cloudy
//! pixels in a partly cloudy one are read from the previous image. The
//! reply is JSON text and goes through the normal parser.

use serde_json::json;

use super::backend::ModelBackend;
use super::prompt::PromptPayload;
use crate::error::{Error, Result};
use crate::raster::{decode_jpeg, CompositeImage};

pub const STUB_MODEL_ID: &str = "stub-brightness-v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PixelClass {
    Cloud,
    Built,
    Other,
}

/// Thresholds on the darkest channel of an RGB pixel.
pub fn classify_pixel(rgb: [u8; 3], cloud_min: u8, built_min: u8) -> PixelClass {
    let m = rgb[0].min(rgb[1]).min(rgb[2]);
    if m >= cloud_min {
        PixelClass::Cloud
    } else if m >= built_min {
        PixelClass::Built
    } else {
        PixelClass::Other
    }
}

#[derive(Debug, Clone)]
pub struct StubBackend {
    pub cloud_min: u8,
    pub built_min: u8,
    /// Above this cloud share the previous score is kept.
    pub anchor_cloud_fraction: f64,
}

impl Default for StubBackend {
    fn default() -> Self {
        Self {
            cloud_min: 230,
            built_min: 96,
            anchor_cloud_fraction: 0.2,
        }
    }
}

impl StubBackend {
    fn classes(&self, img: &CompositeImage) -> Vec<PixelClass> {
        img.pixels()
            .map(|p| classify_pixel(p, self.cloud_min, self.built_min))
            .collect()
    }

    /// (AUI before rounding, rationale)
    pub fn assess(&self, current: &CompositeImage, previous: Option<(f64, &CompositeImage)>) -> (f64, String) {
        let cur = self.classes(current);
        let n = cur.len().max(1) as f64;
        let cloud = cur.iter().filter(|c| **c == PixelClass::Cloud).count() as f64 / n;

        if let Some((prev_aui, _)) = previous {
            if cloud > self.anchor_cloud_fraction {
                return (
                    prev_aui,
                    format!("{:.0}% cloud; no visible change, keeping previous", cloud * 100.0),
                );
            }
        }

        let prev_classes = previous
            .filter(|(_, img)| img.width == current.width && img.height == current.height)
            .map(|(_, img)| self.classes(img));
        let (mut built, mut seen) = (0usize, 0usize);
        for (i, c) in cur.iter().enumerate() {
            let c = match (c, &prev_classes) {
                (PixelClass::Cloud, Some(prev)) => prev[i],
                _ => *c,
            };
            match c {
                PixelClass::Cloud => {}
                PixelClass::Built => {
                    built += 1;
                    seen += 1;
                }
                PixelClass::Other => seen += 1,
            }
        }
        match (seen, previous) {
            (0, Some((prev_aui, _))) => (prev_aui, "fully obscured; keeping previous".into()),
            (0, None) => (0.0, "fully obscured; nothing to rate".into()),
            _ => {
                let share = built as f64 / seen as f64;
                (
                    10.0 * share,
                    format!("built-up share {share:.3} over {seen} visible pixels"),
                )
            }
        }
    }
}

impl ModelBackend for StubBackend {
    fn model_id(&self) -> &str {
        STUB_MODEL_ID
    }

    fn complete(&self, payload: &PromptPayload) -> Result<String> {
        let (_, current) = payload
            .current()
            .ok_or_else(|| Error::Backend("prompt has no current image".into()))?;
        let current = decode_jpeg(&current.bytes)?;
        let previous = match payload.previous() {
            Some((_, aui, img)) => Some((aui, decode_jpeg(&img.bytes)?)),
            None => None,
        };
        let (aui, rationale) = self.assess(&current, previous.as_ref().map(|(a, img)| (*a, img)));
        Ok(json!({"aui": (aui * 10.0).round() / 10.0, "rationale": rationale}).to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn image(px: &[[u8; 3]]) -> CompositeImage {
        CompositeImage::new(px.len(), 1, px.iter().flatten().copied().collect()).unwrap()
    }

    const CLOUD: [u8; 3] = [250, 250, 250];
    const BUILT: [u8; 3] = [136, 128, 128];
    const VEG: [u8; 3] = [38, 60, 34];

    #[test]
    fn classes_by_darkest_channel() {
        assert_eq!(classify_pixel(CLOUD, 230, 96), PixelClass::Cloud);
        assert_eq!(classify_pixel(BUILT, 230, 96), PixelClass::Built);
        assert_eq!(classify_pixel(VEG, 230, 96), PixelClass::Other);
        assert_eq!(classify_pixel([255, 255, 100], 230, 96), PixelClass::Built);
    }

    #[test]
    fn share_times_ten() {
        let s = StubBackend::default();
        let (v, _) = s.assess(&image(&[BUILT, BUILT, VEG, VEG]), None);
        assert_eq!(v, 5.0);
    }

    #[test]
    fn clouds_filled_from_previous_image() {
        let s = StubBackend::default();
        let prev = image(&[BUILT, BUILT, BUILT, VEG, VEG]);
        let cur = image(&[CLOUD, BUILT, BUILT, VEG, VEG]);
        let (v, _) = s.assess(&cur, Some((6.0, &prev)));
        assert_eq!(v, 6.0);
        // without an anchor the cloudy pixel is simply not counted
        let (v, _) = s.assess(&cur, None);
        assert_eq!(v, 5.0);
    }

    #[test]
    fn mostly_cloudy_keeps_previous_score() {
        let s = StubBackend::default();
        let prev = image(&[BUILT, VEG, VEG, VEG]);
        let cur = image(&[CLOUD, CLOUD, BUILT, BUILT]);
        assert_eq!(s.assess(&cur, Some((2.5, &prev))).0, 2.5);
    }
}
