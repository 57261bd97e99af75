//! Atomic, checksummed snapshots of `RunState`.
//!
//! A crawl can run for months; the state must survive restarts exactly.
//! The file is a small header (magic + version + SHA-256 of the payload)
//! followed by the JSON payload, written to a temp file and renamed into
//! place so a crash never leaves a half-written snapshot behind.

use std::path::Path;

use sha2::{Digest, Sha256};
use thiserror::Error;

use super::state::RunState;

const MAGIC: &str = "censorseek-snapshot";
const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum SnapshotError {
    #[error("snapshot failed its integrity check: {0}")]
    Corrupt(String),
    #[error("snapshot version {0} is not supported")]
    UnsupportedVersion(u32),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn digest_hex(payload: &str) -> String {
    let digest = Sha256::digest(payload.as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Serializes `state` into the framed snapshot format.
pub fn encode(state: &RunState) -> Result<String, SnapshotError> {
    let payload = serde_json::to_string(state)
        .map_err(|e| SnapshotError::Corrupt(format!("serialize: {e}")))?;
    Ok(format!(
        "{MAGIC} v{VERSION}\n{}\n{payload}\n",
        digest_hex(&payload)
    ))
}

/// Parses and integrity-checks a snapshot produced by `encode`.
pub fn decode(text: &str) -> Result<RunState, SnapshotError> {
    let mut lines = text.splitn(3, '\n');
    let header = lines
        .next()
        .ok_or_else(|| SnapshotError::Corrupt("empty file".into()))?;
    let Some(version_text) = header.strip_prefix(MAGIC).map(str::trim) else {
        return Err(SnapshotError::Corrupt("bad magic".into()));
    };
    let version: u32 = version_text
        .strip_prefix('v')
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| SnapshotError::Corrupt("bad version field".into()))?;
    if version != VERSION {
        return Err(SnapshotError::UnsupportedVersion(version));
    }
    let checksum = lines
        .next()
        .ok_or_else(|| SnapshotError::Corrupt("missing checksum".into()))?;
    let payload = lines
        .next()
        .ok_or_else(|| SnapshotError::Corrupt("missing payload".into()))?;
    let payload = payload.strip_suffix('\n').unwrap_or(payload);
    if digest_hex(payload) != checksum {
        return Err(SnapshotError::Corrupt("checksum mismatch".into()));
    }
    serde_json::from_str(payload).map_err(|e| SnapshotError::Corrupt(format!("payload: {e}")))
}

/// Persists a snapshot atomically: write temp, fsync, rename.
pub fn checkpoint(state: &RunState, path: &Path) -> Result<(), SnapshotError> {
    let encoded = encode(state)?;
    let tmp = path.with_extension("tmp");
    {
        let mut file = std::fs::File::create(&tmp)?;
        use std::io::Write;
        file.write_all(encoded.as_bytes())?;
        file.sync_all()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}

/// Restores a snapshot written by `checkpoint`.
pub fn resume(path: &Path) -> Result<RunState, SnapshotError> {
    let text = std::fs::read_to_string(path)?;
    decode(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::PageDocument;
    use crate::pipeline::clock::Clock;
    use crate::segment::NgramMode;

    fn sample_state() -> RunState {
        let mut state = RunState::new(NgramMode::Bigram);
        state.seen_urls.insert("http://seed.example/".into());
        state.seed_url_count = 1;
        state.seed_hosts.insert("seed.example".into());
        state.url_counter = 0;
        state.frontier.push_back(PageDocument {
            url: "http://seed.example/".into(),
            host: "seed.example".into(),
            body_text: "自由 亚洲 电台".into(),
            fetched_at: Clock::fixed_epoch().now(),
            content_bytes_read: 20,
        });
        state.used_phrases.insert("自由 亚洲".into());
        state
    }

    #[test]
    fn round_trip_preserves_every_field() {
        let state = sample_state();
        let restored = decode(&encode(&state).unwrap()).unwrap();
        assert_eq!(restored.ngram_mode, state.ngram_mode);
        assert_eq!(restored.frontier, state.frontier);
        assert_eq!(restored.seen_urls, state.seen_urls);
        assert_eq!(restored.url_counter, state.url_counter);
        assert_eq!(restored.seed_url_count, state.seed_url_count);
        assert_eq!(restored.seed_hosts, state.seed_hosts);
        assert_eq!(restored.used_phrases, state.used_phrases);
        assert_eq!(restored.blocklist, state.blocklist);
        assert_eq!(restored.discovery_log, state.discovery_log);
    }

    #[test]
    fn empty_state_round_trips() {
        let state = RunState::new(NgramMode::Unigram);
        let restored = decode(&encode(&state).unwrap()).unwrap();
        assert_eq!(restored.url_counter, 0);
        assert!(restored.frontier.is_empty());
    }

    #[test]
    fn truncated_file_is_corrupt() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.snapshot");
        checkpoint(&sample_state(), &path).unwrap();
        let full = std::fs::read_to_string(&path).unwrap();
        std::fs::write(&path, &full[..full.len() - 30]).unwrap();
        assert!(matches!(resume(&path), Err(SnapshotError::Corrupt(_))));
    }

    #[test]
    fn tampered_payload_is_corrupt() {
        let encoded = encode(&sample_state()).unwrap();
        let tampered = encoded.replace("seed.example", "evil.example");
        assert!(matches!(decode(&tampered), Err(SnapshotError::Corrupt(_))));
    }

    #[test]
    fn unknown_version_is_rejected() {
        let encoded = encode(&sample_state()).unwrap();
        let bumped = encoded.replace("snapshot v1", "snapshot v9");
        assert!(matches!(
            decode(&bumped),
            Err(SnapshotError::UnsupportedVersion(9))
        ));
    }

    #[test]
    fn checkpoint_then_resume_from_disk() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.snapshot");
        let state = sample_state();
        checkpoint(&state, &path).unwrap();
        let restored = resume(&path).unwrap();
        assert_eq!(restored.frontier, state.frontier);
        assert!(!path.with_extension("tmp").exists());
    }
}
