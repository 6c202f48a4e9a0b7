use rand::Rng;

use super::AugmentFlags;
use crate::image::Image;

/// One random geometric transform: crop window, then `rot` quarter turns
/// (counter-clockwise), then an optional horizontal flip.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Geometry {
    pub y0: usize,
    pub x0: usize,
    pub height: usize,
    pub width: usize,
    pub rot: u8,
    pub flip: bool,
}

impl Geometry {
    pub fn identity(height: usize, width: usize) -> Self {
        Self { y0: 0, x0: 0, height, width, rot: 0, flip: false }
    }

    /// Draws a transform for an `h×w` image. Crops are `patch×patch`
    /// (clamped to the image); quarter turns are only drawn when the window
    /// is square.
    pub fn sample(rng: &mut impl Rng, h: usize, w: usize, patch: usize, flags: AugmentFlags) -> Self {
        let (ph, pw) = if flags.crop { (patch.min(h), patch.min(w)) } else { (h, w) };
        let y0 = if ph < h { rng.gen_range(0..=h - ph) } else { 0 };
        let x0 = if pw < w { rng.gen_range(0..=w - pw) } else { 0 };
        let rot = if !flags.rotate {
            0
        } else if ph == pw {
            rng.gen_range(0..4u8)
        } else {
            2 * rng.gen_range(0..2u8)
        };
        let flip = flags.flip && rng.gen_bool(0.5);
        Self { y0, x0, height: ph, width: pw, rot, flip }
    }

    /// Output side lengths.
    pub fn out_dims(&self) -> (usize, usize) {
        if self.rot % 2 == 1 {
            (self.width, self.height)
        } else {
            (self.height, self.width)
        }
    }

    pub fn apply(&self, img: &Image) -> Image {
        let (oh, ow) = self.out_dims();
        let (ch, cw) = (self.height, self.width);
        Image::from_fn(img.channels(), oh, ow, |c, y, x| {
            let x = if self.flip { ow - 1 - x } else { x };
            // inverse rotation maps output (y, x) back into the crop
            let (sy, sx) = match self.rot % 4 {
                0 => (y, x),
                1 => (x, cw - 1 - y),
                2 => (ch - 1 - y, cw - 1 - x),
                _ => (ch - 1 - x, y),
            };
            img.get(c, self.y0 + sy, self.x0 + sx)
        })
    }
}

pub fn crop(img: &Image, y0: usize, x0: usize, h: usize, w: usize) -> Image {
    Image::from_fn(img.channels(), h, w, |c, y, x| img.get(c, y0 + y, x0 + x))
}

/// Applies one shared random transform to every image in `set`.
pub fn augment_set(set: &[&Image], rng: &mut impl Rng, patch: usize, flags: AugmentFlags) -> Vec<Image> {
    let Some(first) = set.first() else { return Vec::new() };
    let g = Geometry::sample(rng, first.height(), first.width(), patch, flags);
    set.iter().map(|img| g.apply(img)).collect()
}

pub fn augment_pair(input: &Image, target: &Image, rng: &mut impl Rng, patch: usize, flags: AugmentFlags) -> (Image, Image) {
    let mut v = augment_set(&[input, target], rng, patch, flags);
    let t = v.pop().expect("two");
    (v.pop().expect("two"), t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn coords(h: usize, w: usize) -> Image {
        Image::from_fn(2, h, w, |c, y, x| if c == 0 { y as f32 } else { x as f32 })
    }

    #[test]
    fn input_and_target_share_the_transform() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let img = coords(20, 20);
        let target = img.map(|v| v * 10.0);
        for _ in 0..50 {
            let (a, b) = augment_pair(&img, &target, &mut rng, 8, AugmentFlags::ALL);
            assert_eq!(b, a.map(|v| v * 10.0));
            assert_eq!((a.height(), a.width()), (8, 8));
        }
    }

    #[test]
    fn transforms_are_permutations_of_the_crop() {
        let img = coords(6, 6);
        for rot in 0..4 {
            for flip in [false, true] {
                let g = Geometry { y0: 1, x0: 2, height: 4, width: 4, rot, flip };
                let out = g.apply(&img);
                let mut seen: Vec<(i32, i32)> =
                    (0..16).map(|i| (out.plane(0)[i] as i32, out.plane(1)[i] as i32)).collect();
                seen.sort();
                let expect: Vec<(i32, i32)> = (1..5).flat_map(|y| (2..6).map(move |x| (y, x))).collect();
                assert_eq!(seen, expect);
            }
        }
        let quarter = Geometry { rot: 1, ..Geometry::identity(6, 6) }.apply(&img);
        // counter-clockwise: top-right moves to top-left
        assert_eq!((quarter.get(0, 0, 0), quarter.get(1, 0, 0)), (0.0, 5.0));
    }

    #[test]
    fn rectangles_keep_shape_without_crop() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let img = coords(4, 8);
        for _ in 0..20 {
            let out = augment_set(&[&img], &mut rng, 4, AugmentFlags { crop: false, ..AugmentFlags::ALL });
            assert_eq!((out[0].height(), out[0].width()), (4, 8));
        }
    }
}
