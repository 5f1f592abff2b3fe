//! Posed frame datasets on disk.
//!
//! Layout under the scene root:
//!
//! ```text
//! cameras.json   {fx, fy, cx, cy, width, height, frames: [{file, w2c: [16 floats, row-major]}]}
//! images/<file>  8-bit RGB PNG
//! depth/<stem>.pfm or depth/<stem>.png   predicted depth (PFM meters, or 16-bit PNG millimeters)
//! masks/<stem>.png   optional; nonzero pixels are dynamic and excluded from the losses
//! ```
//!
//! A frame entry may name its depth or mask file explicitly with `depth` and
//! `mask` keys (paths relative to the root).

use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};

use byteorder::{BigEndian, LittleEndian, ReadBytesExt, WriteBytesExt};
use serde::{Deserialize, Serialize};

use crate::camera::Camera;
use crate::error::{Error, Result};
use crate::image::{Image, Mask};
use crate::scalar::Real;

/// Every `TEST_EVERY`-th frame (index ≡ 0) is held out by default.
pub const TEST_EVERY: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameEntry {
    pub file: String,
    pub w2c: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depth: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask: Option<String>,
}

/// Contents of `cameras.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CamerasFile {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
    pub frames: Vec<FrameEntry>,
}

impl CamerasFile {
    pub fn validate(&self) -> Result<()> {
        if !(self.fx > 0.0 && self.fy > 0.0) || !self.fx.is_finite() || !self.fy.is_finite() {
            return Err(Error::Dataset(format!(
                "intrinsics must be positive, got fx={} fy={}",
                self.fx, self.fy
            )));
        }
        if self.width == 0 || self.height == 0 {
            return Err(Error::Dataset("image size must be non-zero".into()));
        }
        for f in &self.frames {
            if f.w2c.len() != 16 {
                return Err(Error::Dataset(format!("frame {}: w2c needs 16 values, got {}", f.file, f.w2c.len())));
            }
        }
        Ok(())
    }

    pub fn camera<T: Real>(&self, entry: &FrameEntry) -> Result<Camera<T>> {
        let mut m = [T::zero(); 16];
        for (d, s) in m.iter_mut().zip(&entry.w2c) {
            *d = T::lit(*s);
        }
        let cam = Camera::from_w2c_matrix(
            T::lit(self.fx),
            T::lit(self.fy),
            T::lit(self.cx),
            T::lit(self.cy),
            self.width,
            self.height,
            &m,
        );
        cam.validate()
            .map_err(|e| Error::Dataset(format!("frame {}: {e}", entry.file)))?;
        Ok(cam)
    }
}

/// One posed frame with its supervision.
#[derive(Debug, Clone)]
pub struct Frame<T> {
    pub name: String,
    pub camera: Camera<T>,
    pub image: Image<T>,
    /// Predicted depth (meters).
    pub depth: Image<T>,
    /// Dynamic-object mask; `true` excludes a pixel.
    pub mask: Option<Mask>,
}

#[derive(Debug, Clone)]
pub struct FrameDataset<T> {
    pub frames: Vec<Frame<T>>,
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// `(train, test)` indices with every `every`-th frame, starting at 0, held out.
pub fn split_indices(n: usize, every: usize) -> (Vec<usize>, Vec<usize>) {
    if every == 0 {
        return ((0..n).collect(), Vec::new());
    }
    (0..n).partition(|i| i % every != 0)
}

impl<T: Real> FrameDataset<T> {
    /// Wraps frames with the default split.
    pub fn new(frames: Vec<Frame<T>>) -> Self {
        let (train, test) = split_indices(frames.len(), TEST_EVERY);
        Self { frames, train, test }
    }

    /// Uses every frame for training.
    pub fn all_train(frames: Vec<Frame<T>>) -> Self {
        let n = frames.len();
        Self {
            frames,
            train: (0..n).collect(),
            test: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if self.train.is_empty() {
            return Err(Error::EmptyDataset);
        }
        for f in &self.frames {
            f.camera.validate()?;
            f.image.ensure_same_shape(&Image::<T>::new(f.camera.width, f.camera.height, 3))?;
            f.depth.ensure_same_shape(&Image::<T>::new(f.camera.width, f.camera.height, 1))?;
            if let Some(m) = &f.mask {
                m.ensure_matches(&f.depth)?;
            }
        }
        Ok(())
    }

    /// Radius of the camera centers around their centroid, ×1.1, at least 1.
    pub fn scene_extent(&self) -> f64 {
        let centers: Vec<[f64; 3]> = self
            .frames
            .iter()
            .map(|f| {
                let c = f.camera.center();
                [c.x.as_f64(), c.y.as_f64(), c.z.as_f64()]
            })
            .collect();
        if centers.is_empty() {
            return 1.0;
        }
        let n = centers.len() as f64;
        let mut mean = [0.0; 3];
        for c in &centers {
            for k in 0..3 {
                mean[k] += c[k] / n;
            }
        }
        let r = centers
            .iter()
            .map(|c| ((c[0] - mean[0]).powi(2) + (c[1] - mean[1]).powi(2) + (c[2] - mean[2]).powi(2)).sqrt())
            .fold(0.0, f64::max);
        (r * 1.1).max(1.0)
    }
}

fn stem(file: &str) -> String {
    Path::new(file)
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| file.to_string())
}

fn resolve_depth(root: &Path, entry: &FrameEntry) -> Result<PathBuf> {
    if let Some(d) = &entry.depth {
        let p = root.join(d);
        return if p.is_file() {
            Ok(p)
        } else {
            Err(Error::Dataset(format!("frame {}: depth file {} not found", entry.file, p.display())))
        };
    }
    let s = stem(&entry.file);
    for ext in ["pfm", "png"] {
        let p = root.join("depth").join(format!("{s}.{ext}"));
        if p.is_file() {
            return Ok(p);
        }
    }
    Err(Error::Dataset(format!("frame {}: missing depth file depth/{s}.pfm or depth/{s}.png", entry.file)))
}

fn resolve_mask(root: &Path, entry: &FrameEntry) -> Result<Option<PathBuf>> {
    if let Some(m) = &entry.mask {
        let p = root.join(m);
        return if p.is_file() {
            Ok(Some(p))
        } else {
            Err(Error::Dataset(format!("frame {}: mask file {} not found", entry.file, p.display())))
        };
    }
    let p = root.join("masks").join(format!("{}.png", stem(&entry.file)));
    Ok(p.is_file().then_some(p))
}

pub fn read_cameras(root: &Path) -> Result<CamerasFile> {
    let path = root.join("cameras.json");
    let text = fs::read_to_string(&path).map_err(|e| Error::Dataset(format!("{}: {e}", path.display())))?;
    let cams: CamerasFile =
        serde_json::from_str(&text).map_err(|e| Error::Dataset(format!("malformed cameras.json: {e}")))?;
    cams.validate()?;
    Ok(cams)
}

/// Loads and validates a scene directory with the default split.
pub fn load_dataset<T: Real>(root: &Path) -> Result<FrameDataset<T>> {
    let cams = read_cameras(root)?;
    if cams.frames.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut frames = Vec::with_capacity(cams.frames.len());
    for entry in &cams.frames {
        let camera = cams.camera::<T>(entry)?;
        let img_path = root.join("images").join(&entry.file);
        if !img_path.is_file() {
            return Err(Error::Dataset(format!("frame {}: missing image {}", entry.file, img_path.display())));
        }
        let image = read_rgb_png::<T>(&img_path)?;
        let depth = read_depth::<T>(&resolve_depth(root, entry)?)?;
        let mask = resolve_mask(root, entry)?.map(|p| read_mask(&p)).transpose()?;
        let expect = (cams.height, cams.width);
        let check = |what: &str, got: (usize, usize)| {
            if got != expect {
                Err(Error::Dataset(format!(
                    "frame {}: {what} is {}x{}, cameras.json says {}x{}",
                    entry.file, got.1, got.0, expect.1, expect.0
                )))
            } else {
                Ok(())
            }
        };
        check("image", (image.height, image.width))?;
        check("depth", (depth.height, depth.width))?;
        if let Some(m) = &mask {
            check("mask", (m.height, m.width))?;
        }
        frames.push(Frame {
            name: entry.file.clone(),
            camera,
            image,
            depth,
            mask,
        });
    }
    Ok(FrameDataset::new(frames))
}

/// Writes a dataset in the on-disk layout, depth as PFM.
pub fn save_dataset<T: Real>(root: &Path, frames: &[Frame<T>]) -> Result<()> {
    let first = frames.first().ok_or(Error::EmptyDataset)?;
    fs::create_dir_all(root.join("images"))?;
    fs::create_dir_all(root.join("depth"))?;
    let c = &first.camera;
    let mut entries = Vec::with_capacity(frames.len());
    for f in frames {
        let s = stem(&f.name);
        write_rgb_png(&root.join("images").join(format!("{s}.png")), &f.image)?;
        write_pfm(&root.join("depth").join(format!("{s}.pfm")), &f.depth)?;
        if let Some(m) = &f.mask {
            fs::create_dir_all(root.join("masks"))?;
            write_mask(&root.join("masks").join(format!("{s}.png")), m)?;
        }
        entries.push(FrameEntry {
            file: format!("{s}.png"),
            w2c: f.camera.w2c_matrix().iter().map(|v| v.as_f64()).collect(),
            depth: None,
            mask: None,
        });
    }
    let cams = CamerasFile {
        fx: c.fx.as_f64(),
        fy: c.fy.as_f64(),
        cx: c.cx.as_f64(),
        cy: c.cy.as_f64(),
        width: c.width,
        height: c.height,
        frames: entries,
    };
    fs::write(root.join("cameras.json"), serde_json::to_string_pretty(&cams)?)?;
    Ok(())
}

pub fn read_rgb_png<T: Real>(path: &Path) -> Result<Image<T>> {
    let img = image::open(path)?.to_rgb8();
    let (w, h) = img.dimensions();
    Image::from_rgb8(w as usize, h as usize, img.as_raw())
}

pub fn write_rgb_png<T: Real>(path: &Path, img: &Image<T>) -> Result<()> {
    if img.channels != 3 {
        return Err(Error::InvalidParameter("RGB PNG needs 3 channels".into()));
    }
    let buf = image::RgbImage::from_raw(img.width as u32, img.height as u32, img.to_rgb8())
        .ok_or_else(|| Error::Format("RGB buffer size".into()))?;
    buf.save(path)?;
    Ok(())
}

/// Nonzero pixels are excluded.
pub fn read_mask(path: &Path) -> Result<Mask> {
    let img = image::open(path)?.to_luma8();
    let (w, h) = img.dimensions();
    Ok(Mask {
        width: w as usize,
        height: h as usize,
        data: img.as_raw().iter().map(|&v| v != 0).collect(),
    })
}

pub fn write_mask(path: &Path, m: &Mask) -> Result<()> {
    let raw = m.data.iter().map(|&b| if b { 255u8 } else { 0 }).collect();
    let buf = image::GrayImage::from_raw(m.width as u32, m.height as u32, raw)
        .ok_or_else(|| Error::Format("mask buffer size".into()))?;
    buf.save(path)?;
    Ok(())
}

/// Reads depth by extension: `.pfm` in meters or `.png` 16-bit millimeters.
pub fn read_depth<T: Real>(path: &Path) -> Result<Image<T>> {
    match path.extension().and_then(|e| e.to_str()).map(|e| e.to_ascii_lowercase()) {
        Some(e) if e == "pfm" => read_pfm(path),
        Some(e) if e == "png" => read_depth_png(path),
        _ => Err(Error::Format(format!("unsupported depth format: {}", path.display()))),
    }
}

pub fn read_depth_png<T: Real>(path: &Path) -> Result<Image<T>> {
    let img = image::open(path)?.to_luma16();
    let (w, h) = img.dimensions();
    let data = img.as_raw().iter().map(|&mm| T::lit(mm as f64 / 1000.0)).collect();
    Image::from_vec(w as usize, h as usize, 1, data)
}

/// Depth in meters, rounded to whole millimeters and clamped to the u16 range.
pub fn write_depth_png<T: Real>(path: &Path, depth: &Image<T>) -> Result<()> {
    let raw: Vec<u16> = depth
        .data
        .iter()
        .map(|d| {
            let mm = (d.as_f64() * 1000.0).round();
            if mm.is_finite() {
                mm.clamp(0.0, u16::MAX as f64) as u16
            } else {
                0
            }
        })
        .collect();
    let buf = image::ImageBuffer::<image::Luma<u16>, Vec<u16>>::from_raw(depth.width as u32, depth.height as u32, raw)
        .ok_or_else(|| Error::Format("depth buffer size".into()))?;
    buf.save(path)?;
    Ok(())
}

/// Single-channel PFM (`Pf`). Rows are stored bottom to top.
pub fn read_pfm<T: Real>(path: &Path) -> Result<Image<T>> {
    let mut r = BufReader::new(fs::File::open(path)?);
    let mut header = Vec::new();
    while header.len() < 3 {
        let mut line = String::new();
        if r.read_line(&mut line)? == 0 {
            return Err(Error::Format("truncated PFM header".into()));
        }
        header.extend(line.split_whitespace().map(str::to_owned));
    }
    let channels = match header[0].as_str() {
        "Pf" => 1,
        "PF" => 3,
        other => return Err(Error::Format(format!("bad PFM magic {other:?}"))),
    };
    let parse = |s: &str| s.parse::<usize>().map_err(|_| Error::Format(format!("bad PFM size {s:?}")));
    let (w, h) = (parse(&header[1])?, parse(&header[2])?);
    let scale_line = if header.len() > 3 {
        header[3].clone()
    } else {
        let mut line = String::new();
        r.read_line(&mut line)?;
        line.trim().to_owned()
    };
    let scale: f64 = scale_line
        .parse()
        .map_err(|_| Error::Format(format!("bad PFM scale {scale_line:?}")))?;
    let mut raw = vec![0f32; w * h * channels];
    if scale < 0.0 {
        r.read_f32_into::<LittleEndian>(&mut raw)?;
    } else {
        r.read_f32_into::<BigEndian>(&mut raw)?;
    }
    let mut data = vec![T::zero(); w * h];
    for row in 0..h {
        let src_row = h - 1 - row;
        for col in 0..w {
            data[row * w + col] = T::lit(raw[(src_row * w + col) * channels] as f64);
        }
    }
    let mut rest = Vec::new();
    r.read_to_end(&mut rest)?;
    Image::from_vec(w, h, 1, data)
}

pub fn write_pfm<T: Real>(path: &Path, depth: &Image<T>) -> Result<()> {
    if depth.channels != 1 {
        return Err(Error::InvalidParameter("PFM depth needs 1 channel".into()));
    }
    let mut f = std::io::BufWriter::new(fs::File::create(path)?);
    write!(f, "Pf\n{} {}\n-1.0\n", depth.width, depth.height)?;
    for row in (0..depth.height).rev() {
        for col in 0..depth.width {
            f.write_f32::<LittleEndian>(depth.get(row, col, 0).as_f64() as f32)?;
        }
    }
    f.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_split_counts() {
        let (train, test) = split_indices(450, TEST_EVERY);
        assert_eq!((train.len(), test.len()), (393, 57));
        let (train, test) = split_indices(8, TEST_EVERY);
        assert_eq!((train.len(), test.len()), (7, 1));
        assert_eq!(test, vec![0]);
        let (train, test) = split_indices(17, TEST_EVERY);
        assert_eq!(test, vec![0, 8, 16]);
        assert!(train.iter().all(|i| !test.contains(i)));
    }

    #[test]
    fn pfm_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let data: Vec<f64> = (0..12).map(|i| 0.5 + i as f64 * 0.25).collect();
        let img = Image::from_vec(4, 3, 1, data).unwrap();
        let p = dir.path().join("d.pfm");
        write_pfm(&p, &img).unwrap();
        let back: Image<f64> = read_pfm(&p).unwrap();
        assert_eq!(back, img);
    }

    #[test]
    fn depth_png_is_millimeters() {
        let dir = tempfile::tempdir().unwrap();
        let img = Image::from_vec(2, 2, 1, vec![1.0, 2.5, 0.0, 65.0]).unwrap();
        let p = dir.path().join("d.png");
        write_depth_png(&p, &img).unwrap();
        let back: Image<f64> = read_depth(&p).unwrap();
        assert_eq!(back.data, vec![1.0, 2.5, 0.0, 65.0]);
    }
}
