//! Image decoding, pair manifests, and resolution degradation.
//!
//! Bilinear sampling uses half-pixel centers (`src = (dst + 0.5) * in / out - 0.5`)
//! with edge clamping; see [`INTERPOLATION_CONVENTION`].

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::spectral::{ChannelOrder, SpatialImage};
use crate::{Error, Result};

/// Recorded in run manifests so degraded runs can be reproduced elsewhere.
pub const INTERPOLATION_CONVENTION: &str = "bilinear, half-pixel centers, edge clamp";

/// What to do when an image does not have the expected side length.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ResizePolicy {
    #[default]
    Error,
    Bilinear,
}

/// Decodes a PNG or JPEG file into a three-channel RGB image in `[0, 255]`.
///
/// Alpha is dropped with a warning and grayscale is replicated. When
/// `expected_size` is given (or the image is not square) the size is
/// reconciled according to `policy`.
pub fn load_image(
    path: &Path,
    expected_size: Option<usize>,
    policy: ResizePolicy,
) -> Result<SpatialImage> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let decoded = image::load_from_memory(&bytes).map_err(|e| Error::Decode {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    if decoded.color().has_alpha() {
        log::warn!("{}: dropping alpha channel", path.display());
    }
    let rgb = decoded.to_rgb8();
    let (w, h) = (rgb.width() as usize, rgb.height() as usize);
    let mut planes = vec![0.0; 3 * w * h];
    for (i, px) in rgb.pixels().enumerate() {
        for c in 0..3 {
            planes[c * w * h + i] = px[c] as f64;
        }
    }

    let target = match expected_size {
        Some(n) => n,
        None if w == h => w,
        None => {
            return Err(Error::Dimension(format!(
                "{}: image is {w}x{h}, expected a square image",
                path.display()
            )))
        }
    };
    if w == target && h == target {
        return SpatialImage::new(target, 3, ChannelOrder::Rgb, planes);
    }
    match policy {
        ResizePolicy::Error => Err(Error::Dimension(format!(
            "{}: image is {w}x{h}, expected {target}x{target}",
            path.display()
        ))),
        ResizePolicy::Bilinear => {
            let data = (0..3)
                .flat_map(|c| {
                    resize_plane(&planes[c * w * h..(c + 1) * w * h], w, h, target, target)
                })
                .collect();
            SpatialImage::new(target, 3, ChannelOrder::Rgb, data)
        }
    }
}

/// Writes an image as 8-bit PNG. Values are clamped to `[0, 255]` and
/// rounded here, and only here.
pub fn save_png(img: &SpatialImage, path: &Path) -> Result<()> {
    let n = img.size() as u32;
    let quantize = |v: f64| v.clamp(0.0, 255.0).round() as u8;
    let result = if img.channels() == 1 {
        image::GrayImage::from_fn(n, n, |x, y| {
            image::Luma([quantize(img.get(0, y as usize, x as usize))])
        })
        .save(path)
    } else {
        let rgb_source = |c: usize| match img.channel_order() {
            ChannelOrder::Rgb => c,
            ChannelOrder::Bgr => 2 - c,
        };
        image::RgbImage::from_fn(n, n, |x, y| {
            image::Rgb([0, 1, 2].map(|c| quantize(img.get(rgb_source(c), y as usize, x as usize))))
        })
        .save(path)
    };
    result.map_err(|e| match e {
        image::ImageError::IoError(io) => Error::io(path, io),
        other => Error::Decode {
            path: path.to_path_buf(),
            message: other.to_string(),
        },
    })
}

fn lerp(a: f64, b: f64, t: f64) -> f64 {
    // exact for a == b, so constant images survive resampling unchanged
    a + (b - a) * t
}

fn source_coord(dst: usize, src_len: usize, dst_len: usize) -> (usize, usize, f64) {
    let s = ((dst as f64 + 0.5) * src_len as f64 / dst_len as f64 - 0.5)
        .clamp(0.0, (src_len - 1) as f64);
    let i0 = s.floor() as usize;
    let i1 = (i0 + 1).min(src_len - 1);
    (i0, i1, s - i0 as f64)
}

fn resize_plane(src: &[f64], w: usize, h: usize, out_w: usize, out_h: usize) -> Vec<f64> {
    let cols: Vec<_> = (0..out_w).map(|x| source_coord(x, w, out_w)).collect();
    let mut out = Vec::with_capacity(out_w * out_h);
    for y in 0..out_h {
        let (y0, y1, fy) = source_coord(y, h, out_h);
        for &(x0, x1, fx) in &cols {
            let top = lerp(src[y0 * w + x0], src[y0 * w + x1], fx);
            let bottom = lerp(src[y1 * w + x0], src[y1 * w + x1], fx);
            out.push(lerp(top, bottom, fy));
        }
    }
    out
}

/// Bilinear resize of a square image to `size × size`.
pub fn resize_bilinear(img: &SpatialImage, size: usize) -> Result<SpatialImage> {
    if size == 0 {
        return Err(Error::Parameter("target size must be positive".into()));
    }
    let n = img.size();
    let data = (0..img.channels())
        .flat_map(|c| resize_plane(img.channel(c), n, n, size, size))
        .collect();
    SpatialImage::new(size, img.channels(), img.channel_order(), data)
}

/// Down-scales by `factor` (to `⌊N·factor⌋`) and back up to N, both bilinear.
pub fn degrade_resolution(img: &SpatialImage, factor: f64) -> Result<SpatialImage> {
    if !(factor > 0.0 && factor < 1.0) {
        return Err(Error::Parameter(format!(
            "downscaling factor must lie in (0, 1), got {factor}"
        )));
    }
    let n = img.size();
    let small = (n as f64 * factor).floor() as usize;
    if small < 2 || small >= n {
        return Err(Error::Parameter(format!(
            "factor {factor} maps {n} to {small}; need 2 <= size < {n}"
        )));
    }
    resize_bilinear(&resize_bilinear(img, small)?, n)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Genuine,
    Imposter,
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Label::Genuine => "genuine",
            Label::Imposter => "imposter",
        })
    }
}

impl FromStr for Label {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim() {
            "genuine" => Ok(Label::Genuine),
            "imposter" => Ok(Label::Imposter),
            other => Err(format!(
                "unknown label `{other}` (accepted values: genuine, imposter)"
            )),
        }
    }
}

/// One row of a pair manifest.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairRecord {
    pub path_a: PathBuf,
    pub path_b: PathBuf,
    pub label: Label,
    pub tag: Option<String>,
}

/// Reads a `path_a,path_b,label[,tag]` CSV. Relative paths are resolved
/// against the manifest's directory.
pub fn read_manifest(path: &Path) -> Result<Vec<PairRecord>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or(Path::new("")).to_path_buf();
    let manifest_err = |line: u64, message: String| Error::Manifest {
        path: path.to_path_buf(),
        line,
        message,
    };

    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let headers = reader
        .headers()
        .map_err(|e| manifest_err(1, e.to_string()))?
        .clone();
    let names: Vec<&str> = headers.iter().collect();
    let has_tag = match names.as_slice() {
        ["path_a", "path_b", "label"] => false,
        ["path_a", "path_b", "label", "tag"] => true,
        _ => {
            return Err(manifest_err(
                1,
                format!("expected header `path_a,path_b,label[,tag]`, found `{}`", names.join(",")),
            ))
        }
    };

    let mut records = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            manifest_err(line, e.to_string())
        })?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        let expected = if has_tag { 3..=4 } else { 3..=3 };
        if !expected.contains(&row.len()) {
            return Err(manifest_err(
                line,
                format!("expected {} fields, found {}", names.len(), row.len()),
            ));
        }
        let (a, b) = (&row[0], &row[1]);
        if a.is_empty() || b.is_empty() {
            return Err(manifest_err(line, "image paths must not be empty".into()));
        }
        let label = row[2].parse::<Label>().map_err(|m| manifest_err(line, m))?;
        let tag = row.get(3).filter(|t| !t.is_empty()).map(str::to_string);
        records.push(PairRecord {
            path_a: base.join(a),
            path_b: base.join(b),
            label,
            tag,
        });
    }
    if records.is_empty() {
        log::warn!("{}: manifest lists no pairs", path.display());
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{build_partition, forward_transform, inverse_transform, Norm};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::io::Write;

    fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
        let p = dir.join(name);
        std::fs::File::create(&p).unwrap().write_all(text.as_bytes()).unwrap();
        p
    }

    #[test]
    fn manifest_happy_path() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            dir.path(),
            "pairs.csv",
            "path_a,path_b,label,tag\na.png,b.png,genuine,\nc.png,/abs/d.png,imposter,morph\n",
        );
        let recs = read_manifest(&p).unwrap();
        assert_eq!(recs.len(), 2);
        assert_eq!(recs[0].path_a, dir.path().join("a.png"));
        assert_eq!(recs[0].tag, None);
        assert_eq!(recs[1].path_b, PathBuf::from("/abs/d.png"));
        assert_eq!(recs[1].label, Label::Imposter);
        assert_eq!(recs[1].tag.as_deref(), Some("morph"));
    }

    #[test]
    fn manifest_rejects_unknown_label_with_line() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            dir.path(),
            "pairs.csv",
            "path_a,path_b,label\na.png,b.png,genuine\nc.png,d.png,match\n",
        );
        let err = read_manifest(&p).unwrap_err();
        let msg = err.to_string();
        assert!(matches!(err, Error::Manifest { line: 3, .. }), "{msg}");
        assert!(msg.contains("genuine, imposter"), "{msg}");
    }

    #[test]
    fn manifest_header_only_is_empty() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "pairs.csv", "path_a,path_b,label\n");
        assert!(read_manifest(&p).unwrap().is_empty());
        let bad = write(dir.path(), "bad.csv", "a,b,c\n");
        assert!(read_manifest(&bad).is_err());
    }

    fn random_image(seed: u64, n: usize) -> SpatialImage {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        SpatialImage::from_fn(n, 3, |_, _, _| rng.random_range(0.0..255.0)).unwrap()
    }

    #[test]
    fn png_round_trip_and_conversions() {
        let dir = tempfile::tempdir().unwrap();
        let img = SpatialImage::from_fn(8, 3, |c, r, col| ((c * 70 + r * 9 + col * 3) % 256) as f64).unwrap();
        let path = dir.path().join("x.png");
        save_png(&img, &path).unwrap();
        let back = load_image(&path, Some(8), ResizePolicy::Error).unwrap();
        assert_eq!(back, img);
        // decoded pixels survive the spectral round trip
        let rt = inverse_transform(&forward_transform(&back).unwrap()).unwrap();
        for (a, b) in back.pixels().iter().zip(rt.pixels()) {
            assert!((a - b).abs() < 1e-6);
        }

        let gray = dir.path().join("g.png");
        image::GrayImage::from_fn(4, 4, |x, _| image::Luma([x as u8 * 10])).save(&gray).unwrap();
        let g = load_image(&gray, None, ResizePolicy::Error).unwrap();
        assert_eq!(g.channels(), 3);
        assert_eq!(g.get(2, 0, 3), 30.0);

        let rgba = dir.path().join("a.png");
        image::RgbaImage::from_fn(4, 4, |_, _| image::Rgba([1, 2, 3, 4])).save(&rgba).unwrap();
        let a = load_image(&rgba, Some(4), ResizePolicy::Error).unwrap();
        assert_eq!((a.get(0, 0, 0), a.get(2, 3, 3)), (1.0, 3.0));

        assert!(matches!(
            load_image(&rgba, Some(8), ResizePolicy::Error),
            Err(Error::Dimension(_))
        ));
        assert_eq!(load_image(&rgba, Some(8), ResizePolicy::Bilinear).unwrap().size(), 8);
        assert!(matches!(
            load_image(&dir.path().join("missing.png"), None, ResizePolicy::Error),
            Err(Error::Io { .. })
        ));
        let junk = write(dir.path(), "junk.png", "not an image");
        assert!(matches!(
            load_image(&junk, None, ResizePolicy::Error),
            Err(Error::Decode { .. })
        ));
    }

    #[test]
    fn degrade_keeps_constants_exactly() {
        let img = SpatialImage::constant(112, 3, 123.456).unwrap();
        for m in [0.25, 0.5, 0.1, 0.9] {
            assert_eq!(degrade_resolution(&img, m).unwrap(), img);
        }
    }

    #[test]
    fn degrade_rejects_bad_factors() {
        let img = SpatialImage::constant(112, 3, 1.0).unwrap();
        for m in [0.0, 1.0, -0.5, 1.5, 0.01, f64::NAN, 1.0 - 1e-17] {
            assert!(degrade_resolution(&img, m).is_err(), "m = {m}");
        }
    }

    #[test]
    fn degrade_removes_high_frequency_energy() {
        let img = random_image(4, 112);
        let low = degrade_resolution(&img, 0.25).unwrap();
        assert_eq!(low.size(), 112);
        let p = build_partition(112, 28.0, Norm::L2).unwrap();
        let before = p.band_energy(&forward_transform(&img).unwrap()).unwrap();
        let after = p.band_energy(&forward_transform(&low).unwrap()).unwrap();
        assert!(after[1] < before[1], "{after:?} vs {before:?}");
    }

    #[test]
    fn degrade_roughly_preserves_mean_of_smooth_images() {
        let img = SpatialImage::from_fn(112, 3, |c, r, col| {
            128.0 + 60.0 * ((r as f64 / 9.0).sin() * (col as f64 / 13.0 + c as f64).cos())
        })
        .unwrap();
        let low = degrade_resolution(&img, 0.25).unwrap();
        assert!((low.mean() - img.mean()).abs() / img.mean() < 0.01);
    }
}
