use std::collections::HashSet;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::data::synthetic_image;
use crate::error::{Error, Result};
use crate::geometry::Size;
use crate::model::LtewConfig;
use crate::raster::ImageBuffer;

/// How training transforms are drawn.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TrainRegime {
    /// Independent per-axis magnifications in `[1, max_scale]`.
    AsymmetricScale { max_scale: f64 },
    /// In-scale random homographies.
    HomographyInScale,
    /// A single magnification for every sample.
    FixedScale { sx: f64, sy: f64 },
}

/// Where the GT colour of a query comes from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GtPolicy {
    /// Queries at GT pixel centers; exact colours.
    PixelCenter,
    /// Continuous queries; colours bilinearly sampled from the GT image.
    Bilinear,
}

#[derive(Clone, Debug, PartialEq)]
pub enum DatasetSpec {
    /// PNG / PPM files in a directory, in file-name order.
    Dir(PathBuf),
    /// `count` procedural images of `size`, seeded `0..count`.
    Synthetic { count: usize, size: Size },
}

impl DatasetSpec {
    pub fn load(&self) -> Result<Vec<ImageBuffer>> {
        match self {
            DatasetSpec::Synthetic { count, size } => {
                Ok((0..*count as u64).map(|s| synthetic_image(s, *size)).collect())
            }
            DatasetSpec::Dir(dir) => {
                let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)?
                    .filter_map(|e| e.ok().map(|e| e.path()))
                    .filter(|p| {
                        p.extension()
                            .and_then(|e| e.to_str())
                            .is_some_and(|e| matches!(e.to_ascii_lowercase().as_str(), "png" | "ppm"))
                    })
                    .collect();
                paths.sort();
                if paths.is_empty() {
                    return Err(Error::Config(format!("no .png or .ppm images in {}", dir.display())));
                }
                paths.iter().map(ImageBuffer::read).collect()
            }
        }
    }
}

impl FromStr for DatasetSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let Some(rest) = s.strip_prefix("synthetic:") else {
            return Ok(DatasetSpec::Dir(PathBuf::from(s)));
        };
        let bad = || Error::Config(format!("dataset `{s}`: expected synthetic:COUNT:SIZE or synthetic:COUNT:HxW"));
        let (count, size) = rest.split_once(':').ok_or_else(bad)?;
        let count: usize = count.parse().map_err(|_| bad())?;
        let size = match size.split_once('x') {
            Some((h, w)) => Size::new(h.parse().map_err(|_| bad())?, w.parse().map_err(|_| bad())?),
            None => {
                let n = size.parse().map_err(|_| bad())?;
                Size::new(n, n)
            }
        };
        if count == 0 || size.area() == 0 {
            return Err(bad());
        }
        Ok(DatasetSpec::Synthetic { count, size })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    /// Queries per image, `M`.
    pub queries: usize,
    pub lr: f64,
    pub lr_decay_epochs: Vec<usize>,
    pub lr_decay_factor: f64,
    pub seed: u64,
    pub crop: Size,
    pub regime: TrainRegime,
    pub dataset: DatasetSpec,
    /// Passes over the dataset per epoch.
    pub repeat: usize,
    pub model: LtewConfig,
    pub gt_policy: GtPolicy,
    /// Loss trace CSV, written after training when set.
    pub trace: Option<PathBuf>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 100,
            batch_size: 4,
            queries: 256,
            lr: 1e-4,
            lr_decay_epochs: vec![20, 40, 60, 80],
            lr_decay_factor: 0.5,
            seed: 0,
            crop: Size::new(48, 48),
            regime: TrainRegime::AsymmetricScale { max_scale: 4.0 },
            dataset: DatasetSpec::Synthetic {
                count: 4,
                size: Size::new(128, 128),
            },
            repeat: 1,
            model: LtewConfig::desk(),
            gt_policy: GtPolicy::PixelCenter,
            trace: None,
        }
    }
}

impl TrainConfig {
    /// Parse a config file; relative dataset and trace paths are resolved
    /// against the file's directory.
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut cfg: TrainConfig = std::fs::read_to_string(path)?.parse()?;
        let base = path.parent().unwrap_or(Path::new(""));
        if let DatasetSpec::Dir(d) = &cfg.dataset {
            if d.is_relative() {
                cfg.dataset = DatasetSpec::Dir(base.join(d));
            }
        }
        if let Some(t) = &cfg.trace {
            if t.is_relative() {
                cfg.trace = Some(base.join(t));
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(m.to_string()));
        if self.epochs == 0 || self.batch_size == 0 || self.queries == 0 || self.repeat == 0 {
            return fail("epochs, batch_size, queries and repeat must be positive");
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return fail("lr must be positive");
        }
        if !(self.lr_decay_factor > 0.0 && self.lr_decay_factor <= 1.0) {
            return fail("lr_decay_factor must lie in (0, 1]");
        }
        if self.crop.area() == 0 {
            return fail("crop must be non-empty");
        }
        match self.regime {
            TrainRegime::AsymmetricScale { max_scale } if !(max_scale >= 1.0 && max_scale.is_finite()) => {
                fail("max_scale must be at least 1")
            }
            TrainRegime::FixedScale { sx, sy } if !(sx > 0.0 && sy > 0.0 && sx.is_finite() && sy.is_finite()) => {
                fail("sx and sy must be positive")
            }
            _ => self.model.validate(),
        }
    }
}

fn parse_num<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::Config(format!("`{key}`: cannot parse `{v}`")))
}

impl FromStr for TrainConfig {
    type Err = Error;

    /// Flat `key = value` lines; `#` starts a comment.
    fn from_str(text: &str) -> Result<Self> {
        let mut cfg = TrainConfig::default();
        let mut seen = HashSet::new();
        let mut regime = "asymmetric-scale".to_string();
        let (mut max_scale, mut sx, mut sy) = (4.0, 2.0, 2.0);
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", lineno + 1)))?;
            if !seen.insert(key.to_string()) {
                return Err(Error::Config(format!("line {}: duplicate key `{key}`", lineno + 1)));
            }
            match key {
                "epochs" => cfg.epochs = parse_num(key, value)?,
                "batch_size" => cfg.batch_size = parse_num(key, value)?,
                "queries" => cfg.queries = parse_num(key, value)?,
                "lr" => cfg.lr = parse_num(key, value)?,
                "lr_decay_epochs" => {
                    cfg.lr_decay_epochs = value
                        .split(',')
                        .map(str::trim)
                        .filter(|s| !s.is_empty())
                        .map(|s| parse_num(key, s))
                        .collect::<Result<_>>()?
                }
                "lr_decay_factor" => cfg.lr_decay_factor = parse_num(key, value)?,
                "seed" => cfg.seed = parse_num(key, value)?,
                "crop_h" => cfg.crop.h = parse_num(key, value)?,
                "crop_w" => cfg.crop.w = parse_num(key, value)?,
                "regime" => regime = value.to_string(),
                "max_scale" => max_scale = parse_num(key, value)?,
                "sx" => sx = parse_num(key, value)?,
                "sy" => sy = parse_num(key, value)?,
                "dataset" => cfg.dataset = value.parse()?,
                "repeat" => cfg.repeat = parse_num(key, value)?,
                "feat_channels" => cfg.model.channels = parse_num(key, value)?,
                "freq_pairs" => cfg.model.freq_pairs = parse_num(key, value)?,
                "hidden" => cfg.model.hidden = parse_num(key, value)?,
                "gt_policy" => {
                    cfg.gt_policy = match value {
                        "pixel-center" => GtPolicy::PixelCenter,
                        "bilinear" => GtPolicy::Bilinear,
                        _ => return Err(Error::Config(format!("unknown gt_policy `{value}`"))),
                    }
                }
                "trace" => cfg.trace = Some(PathBuf::from(value)),
                _ => return Err(Error::Config(format!("line {}: unknown key `{key}`", lineno + 1))),
            }
        }
        cfg.regime = match regime.as_str() {
            "asymmetric-scale" => TrainRegime::AsymmetricScale { max_scale },
            "homography-in-scale" => TrainRegime::HomographyInScale,
            "fixed-scale" => TrainRegime::FixedScale { sx, sy },
            other => return Err(Error::Config(format!("unknown regime `{other}`"))),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_all_keys() {
        let text = "
            # desk run
            epochs = 7
            batch_size = 2
            queries = 64
            lr = 2e-4
            lr_decay_epochs = 2, 4
            lr_decay_factor = 0.25
            seed = 9
            crop_h = 24
            crop_w = 32
            regime = fixed-scale
            sx = 3
            sy = 1.5
            dataset = synthetic:3:40x48
            repeat = 5
            feat_channels = 8
            freq_pairs = 4
            hidden = 16
            gt_policy = bilinear
            trace = loss.csv
        ";
        let cfg: TrainConfig = text.parse().unwrap();
        assert_eq!(cfg.epochs, 7);
        assert_eq!(cfg.lr_decay_epochs, vec![2, 4]);
        assert_eq!(cfg.crop, Size::new(24, 32));
        assert_eq!(cfg.regime, TrainRegime::FixedScale { sx: 3.0, sy: 1.5 });
        assert_eq!(
            cfg.dataset,
            DatasetSpec::Synthetic {
                count: 3,
                size: Size::new(40, 48)
            }
        );
        assert_eq!(cfg.model, LtewConfig { channels: 8, freq_pairs: 4, hidden: 16 });
        assert_eq!(cfg.gt_policy, GtPolicy::Bilinear);
        assert_eq!(cfg.trace, Some(PathBuf::from("loss.csv")));
    }

    #[test]
    fn empty_text_gives_defaults() {
        assert_eq!("".parse::<TrainConfig>().unwrap(), TrainConfig::default());
    }

    #[test]
    fn rejects_bad_input() {
        for text in [
            "epochs",
            "epochs = ten",
            "epochs = 0",
            "colour = red",
            "seed = 1\nseed = 2",
            "regime = spiral",
            "dataset = synthetic:0:32",
            "lr_decay_factor = 2",
        ] {
            assert!(matches!(text.parse::<TrainConfig>(), Err(Error::Config(_))), "{text}");
        }
    }

    #[test]
    fn relative_paths_follow_the_config_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.cfg");
        std::fs::write(&path, "dataset = imgs\ntrace = t.csv\n").unwrap();
        let cfg = TrainConfig::from_file(&path).unwrap();
        assert_eq!(cfg.dataset, DatasetSpec::Dir(dir.path().join("imgs")));
        assert_eq!(cfg.trace, Some(dir.path().join("t.csv")));
    }

    #[test]
    fn directory_dataset_loads_sorted_images() {
        let dir = tempfile::tempdir().unwrap();
        for (name, seed) in [("b.png", 1), ("a.ppm", 0)] {
            synthetic_image(seed, Size::new(8, 6)).write(dir.path().join(name)).unwrap();
        }
        std::fs::write(dir.path().join("notes.txt"), "x").unwrap();
        let imgs = DatasetSpec::Dir(dir.path().to_path_buf()).load().unwrap();
        assert_eq!(imgs.len(), 2);
        assert_eq!(imgs[0].size(), Size::new(8, 6));
        let empty = tempfile::tempdir().unwrap();
        assert!(DatasetSpec::Dir(empty.path().to_path_buf()).load().is_err());
    }
}
