//! On-disk layout:
//!
//! ```text
//! <dir>/manifest.json
//! <dir>/video_<id>/frame_<n>.ppm
//! <dir>/video_<id>/gt.json        [[cx, cy, w, h], ...]
//! ```
//!
//! The manifest carries the generating config, the split of every video and
//! a SHA-256 digest over each video's frame files (in order) followed by its
//! `gt.json`.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::ppm::{decode_ppm, encode_ppm};
use super::{CorpusConfig, Split, VideoCorpus, VideoSequence};
use crate::error::{Error, Result};
use crate::geometry::BBox;

pub const MANIFEST_FORMAT: &str = "eusa-corpus";
pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Manifest {
    format: String,
    version: u32,
    config: CorpusConfig,
    videos: Vec<ManifestEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ManifestEntry {
    id: usize,
    dir: String,
    frames: usize,
    split: Split,
    sha256: String,
}

pub fn video_dir_name(id: usize) -> String {
    format!("video_{id:03}")
}

pub fn frame_file_name(n: usize) -> String {
    format!("frame_{n:04}.ppm")
}

fn gt_json(gt: &[BBox]) -> Vec<u8> {
    let rows: Vec<[f64; 4]> = gt.iter().map(|b| [b.cx, b.cy, b.w, b.h]).collect();
    serde_json::to_vec(&rows).expect("plain numbers serialize")
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn save_corpus(corpus: &VideoCorpus, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut entries = Vec::with_capacity(corpus.videos.len());
    for video in &corpus.videos {
        let name = video_dir_name(video.id);
        let vdir = dir.join(&name);
        fs::create_dir_all(&vdir).map_err(|e| Error::io(&vdir, e))?;
        let mut hasher = Sha256::new();
        for (n, frame) in video.frames.iter().enumerate() {
            let bytes = encode_ppm(frame);
            hasher.update(&bytes);
            write(&vdir.join(frame_file_name(n)), &bytes)?;
        }
        let gt = gt_json(&video.gt);
        hasher.update(&gt);
        write(&vdir.join("gt.json"), &gt)?;
        entries.push(ManifestEntry {
            id: video.id,
            dir: name,
            frames: video.frames.len(),
            split: video.split,
            sha256: format!("{:x}", hasher.finalize()),
        });
    }
    let manifest = Manifest {
        format: MANIFEST_FORMAT.into(),
        version: MANIFEST_VERSION,
        config: corpus.config.clone(),
        videos: entries,
    };
    let mut json = serde_json::to_vec_pretty(&manifest).expect("manifest serializes");
    json.push(b'\n');
    write(&dir.join("manifest.json"), &json)
}

pub fn load_corpus(dir: &Path) -> Result<VideoCorpus> {
    let manifest_path = dir.join("manifest.json");
    let raw = fs::read(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
    let manifest: Manifest = serde_json::from_slice(&raw).map_err(|e| Error::format(&manifest_path, e.to_string()))?;
    if manifest.format != MANIFEST_FORMAT || manifest.version != MANIFEST_VERSION {
        return Err(Error::format(
            &manifest_path,
            format!("unsupported format {} v{}", manifest.format, manifest.version),
        ));
    }
    let on_disk = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok())
        .filter(|e| e.path().is_dir() && e.file_name().to_string_lossy().starts_with("video_"))
        .count();
    if on_disk != manifest.videos.len() {
        return Err(Error::format(
            &manifest_path,
            format!("manifest lists {} videos, directory holds {on_disk}", manifest.videos.len()),
        ));
    }
    let mut videos = Vec::with_capacity(manifest.videos.len());
    for entry in &manifest.videos {
        videos.push(load_video(dir, entry)?);
    }
    Ok(VideoCorpus { config: manifest.config, videos })
}

fn load_video(dir: &Path, entry: &ManifestEntry) -> Result<VideoSequence> {
    let vdir: PathBuf = dir.join(&entry.dir);
    let mut hasher = Sha256::new();
    let mut frames = Vec::with_capacity(entry.frames);
    for n in 0..entry.frames {
        let path = vdir.join(frame_file_name(n));
        let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
        let image = decode_ppm(&bytes).map_err(|reason| Error::format(&path, reason))?;
        hasher.update(&bytes);
        frames.push(image);
    }
    let gt_path = vdir.join("gt.json");
    let gt_bytes = fs::read(&gt_path).map_err(|e| Error::io(&gt_path, e))?;
    hasher.update(&gt_bytes);
    let rows: Vec<[f64; 4]> = serde_json::from_slice(&gt_bytes).map_err(|e| Error::format(&gt_path, e.to_string()))?;
    if rows.len() != entry.frames {
        return Err(Error::format(&gt_path, format!("{} boxes for {} frames", rows.len(), entry.frames)));
    }
    let actual = format!("{:x}", hasher.finalize());
    if actual != entry.sha256 {
        return Err(Error::Checksum { path: vdir, expected: entry.sha256.clone(), actual });
    }
    Ok(VideoSequence {
        id: entry.id,
        split: entry.split,
        frames,
        gt: rows.into_iter().map(|[cx, cy, w, h]| BBox::new(cx, cy, w, h)).collect(),
    })
}
