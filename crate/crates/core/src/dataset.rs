//! Track augmentation, window-level transforms, family-level splits,
//! K-folds and the dataset manifest.

use std::collections::HashSet;
use std::fmt;
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::point::Point;
use crate::trackio::Track;
use crate::windows::{Window, FEATURES_PER_NORMAL};

/// Mirrors the track in the x axis. Left and right swap, so each side's
/// width follows its boundary.
pub fn flipped(track: &Track) -> Track {
    Track {
        name: track.name.clone(),
        points: track.points.iter().map(|p| p.mirror_y()).collect(),
        halfwidth_left: track.halfwidth_right.clone(),
        halfwidth_right: track.halfwidth_left.clone(),
        closed: track.closed,
    }
}

/// Index of the reversed track's point `j` in the original.
///
/// A closed lap keeps its start point: the order becomes `p0, p_{n-1}, ..., p1`.
pub fn reversed_index(j: usize, n: usize, closed: bool) -> usize {
    if closed {
        (n - j) % n
    } else {
        n - 1 - j
    }
}

/// Drives the track the other way round. Left and right swap.
pub fn reversed(track: &Track) -> Track {
    let n = track.len();
    let map = |j| reversed_index(j, n, track.closed);
    Track {
        name: track.name.clone(),
        points: (0..n).map(|j| track.points[map(j)]).collect(),
        halfwidth_left: (0..n).map(|j| track.halfwidth_right[map(j)]).collect(),
        halfwidth_right: (0..n).map(|j| track.halfwidth_left[map(j)]).collect(),
        closed: track.closed,
    }
}

pub fn scaled(track: &Track, factor: f64) -> Track {
    Track {
        name: track.name.clone(),
        points: track.points.iter().map(|&p| p * factor).collect(),
        halfwidth_left: track.halfwidth_left.iter().map(|w| w * factor).collect(),
        halfwidth_right: track.halfwidth_right.iter().map(|w| w * factor).collect(),
        closed: track.closed,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transform {
    pub scale: f64,
    pub flip: bool,
    pub reverse: bool,
}

impl Transform {
    pub const IDENTITY: Transform = Transform {
        scale: 1.0,
        flip: false,
        reverse: false,
    };

    pub fn is_identity(&self) -> bool {
        *self == Self::IDENTITY
    }

    pub fn apply(&self, track: &Track) -> Track {
        let mut t = if self.scale == 1.0 {
            track.clone()
        } else {
            scaled(track, self.scale)
        };
        if self.flip {
            t = flipped(&t);
        }
        if self.reverse {
            t = reversed(&t);
        }
        t
    }

    /// Parses tags such as `s1`, `s0.8-flip` or `s1.2-flip-rev`.
    pub fn parse(tag: &str) -> Option<Self> {
        let mut parts = tag.split('-');
        let scale: f64 = parts.next()?.strip_prefix('s')?.parse().ok()?;
        if !(scale > 0.0) || !scale.is_finite() {
            return None;
        }
        let mut t = Transform {
            scale,
            flip: false,
            reverse: false,
        };
        let mut rest: Vec<&str> = parts.collect();
        if rest.first() == Some(&"flip") {
            t.flip = true;
            rest.remove(0);
        }
        if rest.first() == Some(&"rev") {
            t.reverse = true;
            rest.remove(0);
        }
        rest.is_empty().then_some(t)
    }
}

impl fmt::Display for Transform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "s{}", self.scale)?;
        if self.flip {
            f.write_str("-flip")?;
        }
        if self.reverse {
            f.write_str("-rev")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AugmentSpec {
    pub scales: Vec<f64>,
    pub flip: bool,
    pub reverse: bool,
}

impl Default for AugmentSpec {
    fn default() -> Self {
        Self {
            scales: vec![0.8, 0.9, 1.0, 1.1, 1.2],
            flip: true,
            reverse: true,
        }
    }
}

impl AugmentSpec {
    pub fn identity() -> Self {
        Self {
            scales: vec![1.0],
            flip: false,
            reverse: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.scales.is_empty() || self.scales.iter().any(|s| !(*s > 0.0) || !s.is_finite()) {
            return Err(Error::InvalidConfig(
                "augmentation scales must be non-empty and positive".into(),
            ));
        }
        if !self.scales.contains(&1.0) {
            return Err(Error::InvalidConfig("augmentation scales must include 1".into()));
        }
        Ok(())
    }

    /// Every transform in the expansion, identity first.
    pub fn transforms(&self) -> Vec<Transform> {
        let mut scales = vec![1.0];
        scales.extend(self.scales.iter().copied().filter(|s| *s != 1.0));
        let flips: &[bool] = if self.flip { &[false, true] } else { &[false] };
        let revs: &[bool] = if self.reverse { &[false, true] } else { &[false] };
        let mut out = Vec::new();
        for &scale in &scales {
            for &flip in flips {
                for &reverse in revs {
                    out.push(Transform { scale, flip, reverse });
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedTrack {
    pub family: String,
    pub transform: Transform,
    pub track: Track,
}

/// Expands a source track into its augmentation family.
pub fn augment_track(track: &Track, spec: &AugmentSpec) -> Result<Vec<AugmentedTrack>> {
    spec.validate()?;
    track.validate()?;
    Ok(spec
        .transforms()
        .into_iter()
        .map(|transform| AugmentedTrack {
            family: track.name.clone(),
            transform,
            track: transform.apply(track),
        })
        .collect())
}

/// Window of the mirrored track: angles change sign, waypoints swap sides.
pub fn flip_window(w: &Window) -> Window {
    let mut features = w.features.clone();
    for row in features.chunks_mut(FEATURES_PER_NORMAL) {
        row[1] = -row[1];
        row[2] = -row[2];
    }
    Window {
        center_index: w.center_index,
        features,
        targets: w.targets.iter().map(|t| 1.0 - t).collect(),
    }
}

/// Window of the reversed lap (of `n` normals) centred on the same station.
///
/// Normals run the other way, so rows come in reverse order, turning
/// angles change sign and waypoints swap sides. Tilt is unchanged.
pub fn reverse_window(w: &Window, n: usize) -> Window {
    let mut features = Vec::with_capacity(w.features.len());
    for row in w.features.chunks(FEATURES_PER_NORMAL).rev() {
        features.extend_from_slice(&[row[0], -row[1], row[2]]);
    }
    Window {
        center_index: reversed_index(w.center_index, n, true),
        features,
        targets: w.targets.iter().rev().map(|t| 1.0 - t).collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitSpec {
    pub train_frac: f64,
    pub val_frac: f64,
    pub test_frac: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            train_frac: 0.864,
            val_frac: 0.088,
            test_frac: 0.048,
            seed: 0,
        }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        let f = [self.train_frac, self.val_frac, self.test_frac];
        if f.iter().any(|v| !(*v >= 0.0)) || (f.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidConfig(
                "split fractions must be non-negative and sum to 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "train" => Some(Split::Train),
            "val" => Some(Split::Val),
            "test" => Some(Split::Test),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct FamilySplit {
    pub train: Vec<String>,
    pub val: Vec<String>,
    pub test: Vec<String>,
}

impl FamilySplit {
    pub fn split_of(&self, family: &str) -> Option<Split> {
        let has = |v: &[String]| v.iter().any(|f| f == family);
        if has(&self.train) {
            Some(Split::Train)
        } else if has(&self.val) {
            Some(Split::Val)
        } else if has(&self.test) {
            Some(Split::Test)
        } else {
            None
        }
    }
}

/// Assigns whole families to train/validation/test.
///
/// Duplicate ids are collapsed first. After a seeded shuffle the first
/// `round(train_frac * n)` families train, the next `round(val_frac * n)`
/// validate and the rest test.
pub fn split_dataset(families: &[String], spec: &SplitSpec) -> Result<FamilySplit> {
    spec.validate()?;
    let mut seen = HashSet::new();
    let mut ids: Vec<String> = families.iter().filter(|f| seen.insert(f.as_str())).cloned().collect();
    let n = ids.len();
    if n < 3 {
        return Err(Error::TooFewFamilies(n));
    }
    ids.shuffle(&mut ChaCha8Rng::seed_from_u64(spec.seed));
    let n_train = ((spec.train_frac * n as f64).round() as usize).min(n);
    let n_val = ((spec.val_frac * n as f64).round() as usize).min(n - n_train);
    let test = ids.split_off(n_train + n_val);
    let val = ids.split_off(n_train);
    Ok(FamilySplit { train: ids, val, test })
}

/// `k` (train, validation) partitions of `items`; validation folds differ
/// in size by at most one.
pub fn kfold_split<T: Clone>(items: &[T], k: usize, seed: u64) -> Result<Vec<(Vec<T>, Vec<T>)>> {
    if k < 2 || items.len() < k {
        return Err(Error::BadK { k, items: items.len() });
    }
    let mut order: Vec<usize> = (0..items.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n = items.len();
    let bounds: Vec<usize> = (0..=k).map(|j| j * n / k).collect();
    Ok((0..k)
        .map(|j| {
            let (a, b) = (bounds[j], bounds[j + 1]);
            let val = order[a..b].iter().map(|&i| items[i].clone()).collect();
            let train = order[..a]
                .iter()
                .chain(&order[b..])
                .map(|&i| items[i].clone())
                .collect();
            (train, val)
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestEntry {
    pub family: String,
    pub transform: Transform,
    pub split: Split,
    pub track_path: String,
    pub targets_path: String,
}

const MANIFEST_HEADER: &str = "# family_id,transform_tag,split,track_path,targets_path";

pub fn write_manifest(entries: &[ManifestEntry]) -> Result<String> {
    let mut out = String::from(MANIFEST_HEADER);
    out.push('\n');
    for (i, e) in entries.iter().enumerate() {
        for field in [&e.family, &e.track_path, &e.targets_path] {
            if field.contains([',', '\n', '\r']) || field.starts_with('#') {
                return Err(Error::InvalidConfig(format!(
                    "manifest entry {i}: field {field:?} cannot be stored"
                )));
            }
        }
        writeln!(
            out,
            "{},{},{},{},{}",
            e.family,
            e.transform,
            e.split.as_str(),
            e.track_path,
            e.targets_path
        )
        .unwrap();
    }
    Ok(out)
}

pub fn parse_manifest(text: &str) -> Result<Vec<ManifestEntry>> {
    let mut out = Vec::new();
    for (k, raw) in text.lines().enumerate() {
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = |reason: String| Error::MalformedRow { line: k + 1, reason };
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            return Err(bad(format!("expected 5 fields, found {}", fields.len())));
        }
        out.push(ManifestEntry {
            family: fields[0].to_string(),
            transform: Transform::parse(fields[1]).ok_or_else(|| bad(format!("bad transform tag {:?}", fields[1])))?,
            split: Split::parse(fields[2]).ok_or_else(|| bad(format!("bad split {:?}", fields[2])))?,
            track_path: fields[3].to_string(),
            targets_path: fields[4].to_string(),
        });
    }
    Ok(out)
}

/// Largest deviation between two tracks' points and widths.
pub fn track_distance(a: &Track, b: &Track) -> Option<f64> {
    if a.len() != b.len() || a.closed != b.closed {
        return None;
    }
    let pts = a
        .points
        .iter()
        .zip(&b.points)
        .map(|(p, q): (&Point, &Point)| p.dist(*q));
    let wl = a
        .halfwidth_left
        .iter()
        .zip(&b.halfwidth_left)
        .map(|(x, y)| (x - y).abs());
    let wr = a
        .halfwidth_right
        .iter()
        .zip(&b.halfwidth_right)
        .map(|(x, y)| (x - y).abs());
    Some(pts.chain(wl).chain(wr).fold(0.0, f64::max))
}
