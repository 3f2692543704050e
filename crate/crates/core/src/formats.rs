//! On-disk formats: JSON documents for datasets, detections, manifests,
//! models and reports, plus binary PPM images.
//!
//! Every float is written with 17 significant digits so that reading a file
//! back yields bit-identical values.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{self, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::ser::{Formatter, PrettyFormatter};

use crate::error::{Error, Result};
use crate::geometry::{BoundingBox, ClassId, Detection, GroundTruthObject, Image, ImageId, ImageInfo};
use crate::synth::SynthDataset;

pub const FORMAT_VERSION: u32 = 1;

/// Pretty-printing formatter that writes floats as `d.dddddddddddddddde±x`.
struct ExactFloats<'a>(PrettyFormatter<'a>);

impl Formatter for ExactFloats<'_> {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        if value.is_finite() {
            write!(w, "{value:.16e}")
        } else {
            w.write_all(b"null")
        }
    }

    fn write_f32<W: ?Sized + Write>(&mut self, w: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(w, f64::from(value))
    }

    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }
    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }
    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }
    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }
    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }
    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }
    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }
    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }
    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

/// Serializes `value` as pretty JSON with exact floats and a trailing newline.
pub fn to_json<T: Serialize + ?Sized>(value: &T) -> String {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, ExactFloats(PrettyFormatter::with_indent(b"  ")));
    value.serialize(&mut ser).expect("in-memory serialization cannot fail");
    buf.push(b'\n');
    String::from_utf8(buf).expect("serde_json emits UTF-8")
}

/// Parses JSON, reporting the path of the first offending field on failure.
pub fn from_json<T: DeserializeOwned>(text: &str) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        Error::schema(if path.is_empty() { ".".to_string() } else { path }, e.into_inner().to_string())
    })
}

pub fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Writes a file, creating parent directories as needed.
pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    from_json(&read_text(path)?)
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    write_bytes(path, to_json(value).as_bytes())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassEntry {
    pub id: ClassId,
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImageEntry {
    pub id: ImageId,
    /// Path of the image file, relative to the dataset document.
    pub file: String,
    pub width: u32,
    pub height: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnnotationEntry {
    pub image_id: ImageId,
    pub class_id: ClassId,
    pub bbox: BoundingBox,
    #[serde(default)]
    pub difficult: bool,
}

/// Images and ground-truth annotations. Class ids must be exactly `1..=K`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetFile {
    pub version: u32,
    pub classes: Vec<ClassEntry>,
    pub images: Vec<ImageEntry>,
    pub annotations: Vec<AnnotationEntry>,
}

fn check_version(version: u32) -> Result<()> {
    if version != FORMAT_VERSION {
        return Err(Error::schema("version", format!("unsupported version {version}, expected {FORMAT_VERSION}")));
    }
    Ok(())
}

impl DatasetFile {
    /// Describes a synthetic dataset whose images live at `{id}.ppm`.
    pub fn from_synth(data: &SynthDataset, class_names: &[&str]) -> Self {
        DatasetFile {
            version: FORMAT_VERSION,
            classes: (1..=data.num_classes)
                .map(|id| ClassEntry {
                    id,
                    name: class_names
                        .get(id as usize - 1)
                        .map_or_else(|| format!("class_{id}"), |s| s.to_string()),
                })
                .collect(),
            images: data
                .images
                .iter()
                .map(|im| ImageEntry {
                    id: im.id().clone(),
                    file: format!("{}.ppm", im.id()),
                    width: im.width(),
                    height: im.height(),
                })
                .collect(),
            annotations: data
                .ground_truth
                .iter()
                .map(|g| AnnotationEntry {
                    image_id: g.image_id.clone(),
                    class_id: g.class_id,
                    bbox: g.bbox,
                    difficult: g.difficult,
                })
                .collect(),
        }
    }

    pub fn num_classes(&self) -> u32 {
        self.classes.len() as u32
    }

    pub fn validate(&self) -> Result<()> {
        check_version(self.version)?;
        let ids: BTreeSet<ClassId> = self.classes.iter().map(|c| c.id).collect();
        if ids.len() != self.classes.len() {
            return Err(Error::schema("classes", "duplicate class id"));
        }
        for (i, c) in self.classes.iter().enumerate() {
            if c.id == 0 || c.id > self.num_classes() {
                return Err(Error::schema(
                    format!("classes[{i}].id"),
                    format!("class ids must be exactly 1..={}", self.num_classes()),
                ));
            }
        }
        let mut images = BTreeSet::new();
        for (i, im) in self.images.iter().enumerate() {
            if !images.insert(&im.id) {
                return Err(Error::schema(format!("images[{i}].id"), format!("duplicate image id `{}`", im.id)));
            }
            if im.width == 0 || im.height == 0 {
                return Err(Error::schema(format!("images[{i}]"), "image must be at least 1x1"));
            }
        }
        for (i, a) in self.annotations.iter().enumerate() {
            if !ids.contains(&a.class_id) {
                return Err(Error::schema(
                    format!("annotations[{i}].class_id"),
                    format!("unknown class {}", a.class_id),
                ));
            }
            if !images.contains(&a.image_id) {
                return Err(Error::schema(
                    format!("annotations[{i}].image_id"),
                    format!("unknown image `{}`", a.image_id),
                ));
            }
        }
        Ok(())
    }

    pub fn ground_truth(&self) -> Vec<GroundTruthObject> {
        self.annotations
            .iter()
            .map(|a| GroundTruthObject {
                image_id: a.image_id.clone(),
                class_id: a.class_id,
                bbox: a.bbox,
                difficult: a.difficult,
            })
            .collect()
    }

    pub fn image_infos(&self) -> Vec<ImageInfo> {
        self.images
            .iter()
            .map(|im| ImageInfo {
                id: im.id.clone(),
                width: im.width,
                height: im.height,
            })
            .collect()
    }

    pub fn read(path: &Path) -> Result<Self> {
        let file: DatasetFile = read_json(path)?;
        file.validate()?;
        Ok(file)
    }

    /// Loads every image, resolving `file` relative to `dir`.
    pub fn load_images(&self, dir: &Path) -> Result<BTreeMap<ImageId, Image>> {
        self.images
            .iter()
            .map(|entry| {
                let image = read_ppm(&dir.join(&entry.file), entry.id.clone())?;
                if image.width() != entry.width || image.height() != entry.height {
                    return Err(Error::schema(
                        format!("images[id={}]", entry.id),
                        format!(
                            "declared {}x{} but file is {}x{}",
                            entry.width,
                            entry.height,
                            image.width(),
                            image.height()
                        ),
                    ));
                }
                Ok((entry.id.clone(), image))
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectionEntry {
    pub image_id: ImageId,
    pub class_id: ClassId,
    pub score: f64,
    pub bbox: BoundingBox,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectionsFile {
    pub version: u32,
    pub detections: Vec<DetectionEntry>,
}

impl DetectionsFile {
    pub fn new(detections: &[Detection]) -> Self {
        DetectionsFile {
            version: FORMAT_VERSION,
            detections: detections
                .iter()
                .map(|d| DetectionEntry {
                    image_id: d.image_id.clone(),
                    class_id: d.class_id,
                    score: d.score,
                    bbox: d.bbox,
                })
                .collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_version(self.version)?;
        for (i, d) in self.detections.iter().enumerate() {
            if !(0.0..=1.0).contains(&d.score) {
                return Err(Error::schema(
                    format!("detections[{i}].score"),
                    format!("score {} outside [0, 1]", d.score),
                ));
            }
            if d.class_id == 0 {
                return Err(Error::schema(format!("detections[{i}].class_id"), "class 0 is background"));
            }
        }
        Ok(())
    }

    pub fn to_detections(&self) -> Vec<Detection> {
        self.detections
            .iter()
            .map(|d| Detection {
                image_id: d.image_id.clone(),
                class_id: d.class_id,
                score: d.score,
                bbox: d.bbox,
            })
            .collect()
    }

    pub fn read(path: &Path) -> Result<Self> {
        let file: DetectionsFile = read_json(path)?;
        file.validate()?;
        Ok(file)
    }
}

/// Encodes an image as binary PPM (P6, maxval 255).
pub fn encode_ppm(image: &Image) -> Vec<u8> {
    let mut out = format!("P6\n{} {}\n255\n", image.width(), image.height()).into_bytes();
    out.extend_from_slice(image.pixels());
    out
}

/// Decodes a binary PPM with maxval 255. Comments in the header are allowed.
pub fn decode_ppm(bytes: &[u8], id: ImageId) -> Result<Image> {
    let bad = |msg: &str| Error::schema("ppm", msg.to_string());
    let mut pos = 0;
    let mut fields = Vec::with_capacity(4);
    while fields.len() < 4 {
        while pos < bytes.len() && (bytes[pos].is_ascii_whitespace() || bytes[pos] == b'#') {
            if bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            } else {
                pos += 1;
            }
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(bad("truncated header"));
        }
        fields.push(std::str::from_utf8(&bytes[start..pos]).map_err(|_| bad("non-ascii header"))?);
    }
    if fields[0] != "P6" {
        return Err(bad("not a binary PPM (expected P6)"));
    }
    let parse = |s: &str| s.parse::<u32>().map_err(|_| bad("bad header number"));
    let (width, height, maxval) = (parse(fields[1])?, parse(fields[2])?, parse(fields[3])?);
    if maxval != 255 {
        return Err(bad("only maxval 255 is supported"));
    }
    // Exactly one whitespace byte separates the header from the raster.
    pos += 1;
    let expected = width as usize * height as usize * 3;
    let raster = bytes.get(pos..).unwrap_or_default();
    if raster.len() != expected {
        return Err(Error::ShapeMismatch {
            expected,
            actual: raster.len(),
        });
    }
    Image::new(id, width, height, raster.to_vec())
}

pub fn write_ppm(path: &Path, image: &Image) -> Result<()> {
    write_bytes(path, &encode_ppm(image))
}

pub fn read_ppm(path: &Path, id: ImageId) -> Result<Image> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_ppm(&bytes, id)
}
