use serde::{Deserialize, Serialize};

use super::scene::{composite, Scene};
use super::SimError;
use crate::image::Image;
use crate::imaging::LinearImage;

/// Integer per-frame displacement of the camera and the foreground objects.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MotionSpec {
    /// `(dx, dy)` applied to the whole frame.
    pub global_shift: (i32, i32),
    /// Extra `(dx, dy)` for each object; missing entries mean no motion.
    pub object_shifts: Vec<(i32, i32)>,
    /// Whether the first object is placed over a saturated highlight.
    pub occlusion: bool,
}

impl MotionSpec {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn is_static(&self) -> bool {
        self.global_shift == (0, 0) && self.object_shifts.iter().all(|&s| s == (0, 0))
    }

    /// Same motion repeated `k` times.
    pub fn scaled(&self, k: i32) -> Self {
        Self {
            global_shift: (self.global_shift.0 * k, self.global_shift.1 * k),
            object_shifts: self.object_shifts.iter().map(|&(x, y)| (x * k, y * k)).collect(),
            occlusion: self.occlusion,
        }
    }

    pub fn validate(&self, height: usize, width: usize) -> Result<(), SimError> {
        let bound = (height.min(width) / 4) as i32;
        let too_far = |&(dx, dy): &(i32, i32)| dx.abs() > bound || dy.abs() > bound;
        if too_far(&self.global_shift) || self.object_shifts.iter().any(too_far) {
            return Err(SimError::Config(format!("motion exceeds ±{bound} px")));
        }
        Ok(())
    }
}

fn shift_replicate(img: &Image, dx: i32, dy: i32) -> Image {
    let (h, w) = (img.height() as i32, img.width() as i32);
    Image::from_fn(img.channels(), img.height(), img.width(), |c, y, x| {
        let sy = (y as i32 - dy).clamp(0, h - 1) as usize;
        let sx = (x as i32 - dx).clamp(0, w - 1) as usize;
        img.get(c, sy, sx)
    })
}

fn shift_layer(img: &Image, alpha: &[bool], dx: i32, dy: i32) -> (Image, Vec<bool>) {
    let (h, w) = (img.height() as i32, img.width() as i32);
    let mut a = vec![false; alpha.len()];
    for y in 0..h {
        for x in 0..w {
            let (sy, sx) = (y - dy, x - dx);
            if sy >= 0 && sy < h && sx >= 0 && sx < w {
                a[(y * w + x) as usize] = alpha[(sy * w + sx) as usize];
            }
        }
    }
    (shift_replicate(img, dx, dy), a)
}

/// Renders the scene after the given motion: the composited frame is
/// translated with edge replication, then every object is displaced by its
/// own shift on top of that.
pub fn apply_motion(scene: &Scene, motion: &MotionSpec) -> Result<LinearImage, SimError> {
    motion.validate(scene.height(), scene.width())?;
    if motion.object_shifts.len() > scene.objects.len() {
        return Err(SimError::Config(format!(
            "{} object shifts for {} objects",
            motion.object_shifts.len(),
            scene.objects.len()
        )));
    }
    let (gx, gy) = motion.global_shift;
    let mut out = shift_replicate(&scene.background, gx, gy);
    for (i, obj) in scene.objects.iter().enumerate() {
        let (ox, oy) = motion.object_shifts.get(i).copied().unwrap_or((0, 0));
        let (rad, alpha) = shift_layer(&obj.radiance, &obj.alpha, gx + ox, gy + oy);
        composite(&mut out, &rad, &alpha);
    }
    Ok(LinearImage(out))
}
