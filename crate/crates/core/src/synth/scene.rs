//! Synthetic scenes: non-overlapping colored shapes on a noisy background.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{BoundingBox, ClassId, GroundTruthObject, Image, ImageId};
use crate::rng::{substream, Rng};

pub const MAX_CLASSES: u32 = 3;
pub const CLASS_NAMES: [&str; 3] = ["rectangle", "disc", "triangle"];

/// Placement attempts per object before a scene is declared too crowded.
pub const PLACEMENT_ATTEMPTS: usize = 200;

/// Inclusive per-channel range `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColorRange {
    pub r: [u8; 2],
    pub g: [u8; 2],
    pub b: [u8; 2],
}

impl ColorRange {
    fn channels(&self) -> [[u8; 2]; 3] {
        [self.r, self.g, self.b]
    }

    fn sample(&self, rng: &mut Rng) -> [u8; 3] {
        self.channels().map(|[lo, hi]| rng.random_range(lo..=hi))
    }

    fn is_valid(&self) -> bool {
        self.channels().iter().all(|[lo, hi]| lo <= hi)
    }
}

pub fn default_class_colors() -> Vec<ColorRange> {
    vec![
        ColorRange { r: [150, 230], g: [40, 120], b: [40, 120] },
        ColorRange { r: [40, 120], g: [150, 230], b: [40, 120] },
        ColorRange { r: [40, 120], g: [40, 120], b: [150, 230] },
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneConfig {
    pub width: u32,
    pub height: u32,
    /// Shape classes in order rectangle, disc, triangle; at most three.
    pub num_classes: u32,
    /// One color range per class; defaults when absent.
    pub class_colors: Option<Vec<ColorRange>>,
    pub background_color: ColorRange,
    /// Inclusive range of objects per image.
    pub objects_per_image: [usize; 2],
    /// Inclusive range of object width and height, drawn independently.
    pub object_size: [u32; 2],
    /// Uniform per-pixel noise in `[-a, a]`.
    pub noise_amplitude: u8,
    pub num_images: usize,
    /// Names the split; prefixes image ids and selects the random substreams.
    pub split: String,
    pub seed: u64,
}

impl Default for SceneConfig {
    fn default() -> Self {
        SceneConfig {
            width: 128,
            height: 128,
            num_classes: 3,
            class_colors: None,
            background_color: ColorRange { r: [70, 140], g: [70, 140], b: [70, 140] },
            objects_per_image: [1, 4],
            object_size: [16, 48],
            noise_amplitude: 20,
            num_images: 10,
            split: "train".into(),
            seed: 42,
        }
    }
}

impl SceneConfig {
    pub fn validate(&self) -> Result<()> {
        if !(1..=MAX_CLASSES).contains(&self.num_classes) {
            return Err(Error::config(format!(
                "num_classes {} outside [1, {MAX_CLASSES}]",
                self.num_classes
            )));
        }
        if self.width == 0 || self.height == 0 {
            return Err(Error::config("image size must be at least 1x1"));
        }
        if let Some(colors) = &self.class_colors {
            if colors.len() != self.num_classes as usize {
                return Err(Error::config(format!(
                    "class_colors has {} entries for {} classes",
                    colors.len(),
                    self.num_classes
                )));
            }
        }
        if !self.colors().iter().chain([&self.background_color]).all(ColorRange::is_valid) {
            return Err(Error::config("color ranges must satisfy lo <= hi"));
        }
        let [lo, hi] = self.objects_per_image;
        if lo > hi {
            return Err(Error::config("objects_per_image range is empty"));
        }
        let [smin, smax] = self.object_size;
        if smin == 0 || smin > smax {
            return Err(Error::config("object_size range must be non-empty and positive"));
        }
        if smax > self.width || smax > self.height {
            return Err(Error::config("objects larger than the image"));
        }
        if self.split.is_empty() {
            return Err(Error::config("split name must be non-empty"));
        }
        Ok(())
    }

    pub fn colors(&self) -> Vec<ColorRange> {
        self.class_colors.clone().unwrap_or_else(|| {
            default_class_colors()
                .into_iter()
                .take(self.num_classes as usize)
                .collect()
        })
    }

    pub fn image_id(&self, index: usize) -> ImageId {
        ImageId(format!("{}_{index:05}", self.split))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthDataset {
    pub num_classes: u32,
    pub images: Vec<Image>,
    pub ground_truth: Vec<GroundTruthObject>,
}

fn inside_shape(class_id: ClassId, b: &BoundingBox, px: f64, py: f64) -> bool {
    match class_id {
        1 => true,
        2 => {
            let (cx, cy) = b.center();
            let dx = (px - cx) / (0.5 * b.width());
            let dy = (py - cy) / (0.5 * b.height());
            dx * dx + dy * dy <= 1.0
        }
        _ => {
            // apex at top center, base along the bottom edge; a pixel is lit
            // when its square overlaps the triangle
            let t = ((py + 0.5 - b.y_min()) / b.height()).min(1.0);
            let half = 0.5 * b.width() * t;
            let cx = b.x_min() + 0.5 * b.width();
            t > 0.0 && (px - cx).abs() <= half + 0.5
        }
    }
}

fn render_scene(cfg: &SceneConfig, index: usize, colors: &[ColorRange]) -> Result<(Image, Vec<GroundTruthObject>)> {
    let mut rng = substream(cfg.seed, &format!("scene/{}", cfg.split), index as u32);
    let id = cfg.image_id(index);
    let background = cfg.background_color.sample(&mut rng);
    let mut image = Image::filled(id.clone(), cfg.width, cfg.height, background)?;

    let count = rng.random_range(cfg.objects_per_image[0]..=cfg.objects_per_image[1]);
    let mut placed: Vec<GroundTruthObject> = Vec::with_capacity(count);
    for _ in 0..count {
        let class_id = rng.random_range(1..=cfg.num_classes);
        let mut attempts = 0;
        let bbox = loop {
            if attempts == PLACEMENT_ATTEMPTS {
                return Err(Error::SceneTooCrowded {
                    image_index: index,
                    attempts,
                });
            }
            attempts += 1;
            let w = rng.random_range(cfg.object_size[0]..=cfg.object_size[1]);
            let h = rng.random_range(cfg.object_size[0]..=cfg.object_size[1]);
            let x = rng.random_range(0..=cfg.width - w);
            let y = rng.random_range(0..=cfg.height - h);
            let b = BoundingBox::from_xywh(f64::from(x), f64::from(y), f64::from(w), f64::from(h))?;
            // one pixel of clearance between objects
            let grown = BoundingBox::from_xywh(b.x_min() - 1.0, b.y_min() - 1.0, b.width() + 2.0, b.height() + 2.0)?;
            if placed.iter().all(|p| p.bbox.intersection_area(&grown) == 0.0) {
                break b;
            }
        };
        let color = colors[class_id as usize - 1].sample(&mut rng);
        let (x0, y0) = (bbox.x_min() as u32, bbox.y_min() as u32);
        let (x1, y1) = (bbox.x_max() as u32, bbox.y_max() as u32);
        for py in y0..y1 {
            for px in x0..x1 {
                if inside_shape(class_id, &bbox, f64::from(px) + 0.5, f64::from(py) + 0.5) {
                    image.set_pixel(px, py, color);
                }
            }
        }
        placed.push(GroundTruthObject::new(id.clone(), class_id, bbox));
    }

    if cfg.noise_amplitude > 0 {
        let a = i16::from(cfg.noise_amplitude);
        for y in 0..cfg.height {
            for x in 0..cfg.width {
                let p = image.pixel(x, y);
                let noisy = p.map(|v| (i16::from(v) + rng.random_range(-a..=a)).clamp(0, 255) as u8);
                image.set_pixel(x, y, noisy);
            }
        }
    }
    Ok((image, placed))
}

/// Generates `cfg.num_images` scenes; image `i` depends only on
/// `(seed, split, i)`.
pub fn gen_dataset(cfg: &SceneConfig) -> Result<SynthDataset> {
    cfg.validate()?;
    let colors = cfg.colors();
    let mut images = Vec::with_capacity(cfg.num_images);
    let mut ground_truth = Vec::new();
    for i in 0..cfg.num_images {
        let (image, gts) = render_scene(cfg, i, &colors)?;
        images.push(image);
        ground_truth.extend(gts);
    }
    Ok(SynthDataset {
        num_classes: cfg.num_classes,
        images,
        ground_truth,
    })
}
