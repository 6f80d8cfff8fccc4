//! 7-Scenes style dataset layout.
//!
//! ```text
//! <root>/<scene>/TrainSplit.txt
//! <root>/<scene>/TestSplit.txt
//! <root>/<scene>/seq-01/frame-000000.pose.txt
//! ```
//!
//! A pose file holds 16 whitespace-separated reals, the row-major 4×4
//! camera-to-world matrix. A split file lists one entry per line: either a
//! whole sequence (`sequence1` or `seq-01`) or a single frame
//! (`seq-01/frame-000000`).

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::{ImageRecord, Pose, SceneDatabase, SceneError, Split};

const POSE_SUFFIX: &str = ".pose.txt";

/// Names of the split files inside each scene directory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitSpec {
    pub train_file: String,
    pub test_file: String,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            train_file: "TrainSplit.txt".into(),
            test_file: "TestSplit.txt".into(),
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> SceneError + '_ {
    move |source| SceneError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Parses the 16-token pose matrix text.
pub fn parse_pose_matrix(text: &str) -> Result<[[f64; 4]; 4], String> {
    let tokens: Vec<&str> = text.split_whitespace().collect();
    if tokens.len() != 16 {
        return Err(format!("expected 16 values, found {}", tokens.len()));
    }
    let mut m = [[0.0; 4]; 4];
    for (k, tok) in tokens.iter().enumerate() {
        let v: f64 = tok
            .parse()
            .map_err(|_| format!("token {} (`{tok}`) is not a number", k + 1))?;
        if !v.is_finite() {
            return Err(format!("token {} is not finite", k + 1));
        }
        m[k / 4][k % 4] = v;
    }
    Ok(m)
}

/// Four tab-separated rows; values use shortest round-trip formatting.
pub fn format_pose_matrix(m: &[[f64; 4]; 4]) -> String {
    let mut s = String::new();
    for row in m {
        let line: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
        let _ = writeln!(s, "{}", line.join("\t"));
    }
    s
}

pub fn read_pose_file(path: &Path) -> Result<Pose<f64>, SceneError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let m = parse_pose_matrix(&text).map_err(|reason| SceneError::MalformedPoseFile {
        path: path.to_path_buf(),
        reason,
    })?;
    Pose::from_matrix4(&m).map_err(|source| SceneError::NonRotationMatrix {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_pose_file(path: &Path, pose: &Pose<f64>) -> Result<(), SceneError> {
    fs::write(path, format_pose_matrix(&pose.to_matrix4())).map_err(io_err(path))
}

/// `sequence3` → `seq-03`; anything else is returned unchanged.
fn normalize_sequence(entry: &str) -> String {
    match entry.strip_prefix("sequence").and_then(|n| n.parse::<u32>().ok()) {
        Some(n) => format!("seq-{n:02}"),
        None => entry.to_string(),
    }
}

/// Frame stems (without `.pose.txt`) in a sequence directory, sorted.
fn sequence_frames(dir: &Path) -> Result<Vec<String>, SceneError> {
    let mut frames = Vec::new();
    for entry in fs::read_dir(dir).map_err(io_err(dir))? {
        let entry = entry.map_err(io_err(dir))?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if let Some(stem) = name.strip_suffix(POSE_SUFFIX) {
            frames.push(stem.to_string());
        }
    }
    frames.sort();
    Ok(frames)
}

/// Resolves a split file into `sequence/frame` keys.
fn read_split(scene_dir: &Path, file: &str) -> Result<BTreeSet<String>, SceneError> {
    let path = scene_dir.join(file);
    if !path.is_file() {
        return Err(SceneError::MissingSplit { path });
    }
    let text = fs::read_to_string(&path).map_err(io_err(&path))?;
    let mut out = BTreeSet::new();
    for line in text.lines() {
        let entry = line.trim();
        if entry.is_empty() || entry.starts_with('#') {
            continue;
        }
        let entry = entry.strip_suffix(POSE_SUFFIX).unwrap_or(entry);
        let unresolved = || SceneError::UnresolvedSplitEntry {
            path: path.clone(),
            entry: entry.to_string(),
        };
        match entry.split_once('/') {
            Some((seq, frame)) => {
                let seq = normalize_sequence(seq);
                if !scene_dir.join(&seq).join(format!("{frame}{POSE_SUFFIX}")).is_file() {
                    return Err(unresolved());
                }
                out.insert(format!("{seq}/{frame}"));
            }
            None => {
                let seq = normalize_sequence(entry);
                let dir = scene_dir.join(&seq);
                if !dir.is_dir() {
                    return Err(unresolved());
                }
                for frame in sequence_frames(&dir)? {
                    out.insert(format!("{seq}/{frame}"));
                }
            }
        }
    }
    Ok(out)
}

/// Loads one scene directory into a database.
pub fn load_scene(root: &Path, scene: &str, split: &SplitSpec) -> Result<SceneDatabase, SceneError> {
    let scene_dir = root.join(scene);
    let train = read_split(&scene_dir, &split.train_file)?;
    let test = read_split(&scene_dir, &split.test_file)?;
    if let Some(dup) = train.intersection(&test).next() {
        return Err(SceneError::SplitOverlap(format!("{scene}/{dup}")));
    }
    let mut records = Vec::with_capacity(train.len() + test.len());
    for (keys, which) in [(&train, Split::Train), (&test, Split::Test)] {
        for key in keys {
            let path = scene_dir.join(format!("{key}{POSE_SUFFIX}"));
            records.push(ImageRecord {
                id: format!("{scene}/{key}"),
                scene: scene.to_string(),
                pose: read_pose_file(&path)?,
                split: which,
            });
        }
    }
    log::debug!("loaded scene {scene}: {} train, {} test", train.len(), test.len());
    SceneDatabase::new(records)
}

/// Loads several scenes. With `scenes` empty, every subdirectory of `root`
/// holding a train split file is loaded.
pub fn load_dataset(root: &Path, scenes: &[String], split: &SplitSpec) -> Result<SceneDatabase, SceneError> {
    let names: Vec<String> = if scenes.is_empty() {
        if !root.is_dir() {
            return Err(SceneError::MissingSplit {
                path: root.join("*").join(&split.train_file),
            });
        }
        let mut found = Vec::new();
        for entry in fs::read_dir(root).map_err(io_err(root))? {
            let entry = entry.map_err(io_err(root))?;
            if entry.path().join(&split.train_file).is_file() {
                found.push(entry.file_name().to_string_lossy().into_owned());
            }
        }
        found.sort();
        if found.is_empty() {
            return Err(SceneError::MissingSplit {
                path: root.join("*").join(&split.train_file),
            });
        }
        found
    } else {
        scenes.to_vec()
    };
    let mut db = SceneDatabase::default();
    for name in &names {
        db = db.merge(load_scene(root, name, split)?)?;
    }
    Ok(db)
}

/// Writes `db` under `root` in the layout [`load_scene`] reads.
///
/// Record ids must be `scene/sequence/frame`. Split files list individual
/// frames.
pub fn write_scene(db: &SceneDatabase, root: &Path, split: &SplitSpec) -> Result<(), SceneError> {
    let mut lists: BTreeMap<&str, (Vec<String>, Vec<String>)> = BTreeMap::new();
    for r in db.records() {
        let mut parts = r.id.splitn(3, '/');
        let (Some(scene), Some(seq), Some(frame)) = (parts.next(), parts.next(), parts.next()) else {
            return Err(SceneError::InvalidId(r.id.clone()));
        };
        if scene != r.scene || frame.contains('/') {
            return Err(SceneError::InvalidId(r.id.clone()));
        }
        let dir: PathBuf = root.join(scene).join(seq);
        fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        write_pose_file(&dir.join(format!("{frame}{POSE_SUFFIX}")), &r.pose)?;
        let entry = lists.entry(scene).or_default();
        match r.split {
            Split::Train => entry.0.push(format!("{seq}/{frame}")),
            Split::Test => entry.1.push(format!("{seq}/{frame}")),
        }
    }
    for (scene, (train, test)) in lists {
        for (file, ids) in [(&split.train_file, train), (&split.test_file, test)] {
            let path = root.join(scene).join(file);
            let mut body = ids.join("\n");
            if !body.is_empty() {
                body.push('\n');
            }
            fs::write(&path, body).map_err(io_err(&path))?;
        }
    }
    Ok(())
}
