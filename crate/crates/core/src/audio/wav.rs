//! 16-bit PCM mono RIFF/WAVE reading and writing.
//!
//! Samples map to floats as `int16 / 32768`; floats are written as
//! `round(clamp(x, -1, 1) * 32768)` saturated to the int16 range, which is
//! the exact inverse of the read mapping.

use std::fs;
use std::path::Path;

use super::AudioClip;
use crate::{Error, Result};

const PCM: u16 = 1;

/// Outcome of a write.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WriteSummary {
    pub samples: usize,
    /// Samples outside [-1, 1] that were clamped.
    pub clamped: usize,
}

pub fn read_wav(path: impl AsRef<Path>) -> Result<AudioClip> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_wav(&bytes)
}

pub fn write_wav(path: impl AsRef<Path>, clip: &AudioClip) -> Result<WriteSummary> {
    let path = path.as_ref();
    let (bytes, summary) = encode_wav(clip);
    fs::write(path, bytes).map_err(|e| Error::io(path, e))?;
    Ok(summary)
}

fn u16_at(b: &[u8], at: usize) -> u16 {
    u16::from_le_bytes([b[at], b[at + 1]])
}

fn u32_at(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes([b[at], b[at + 1], b[at + 2], b[at + 3]])
}

pub fn decode_wav(bytes: &[u8]) -> Result<AudioClip> {
    if bytes.len() < 12 {
        return Err(Error::MalformedWav("file shorter than RIFF header".into()));
    }
    if &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(Error::MalformedWav("missing RIFF/WAVE signature".into()));
    }

    let mut format: Option<(u16, u16, u32, u16)> = None;
    let mut data: Option<&[u8]> = None;
    let mut pos = 12;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = u32_at(bytes, pos + 4) as usize;
        let body = pos + 8;
        let end = body
            .checked_add(size)
            .filter(|&e| e <= bytes.len())
            .ok_or_else(|| {
                Error::MalformedWav(format!(
                    "chunk {:?} runs past end of file",
                    String::from_utf8_lossy(id)
                ))
            })?;
        match id {
            b"fmt " => {
                if size < 16 {
                    return Err(Error::MalformedWav("fmt chunk too short".into()));
                }
                format = Some((
                    u16_at(bytes, body),
                    u16_at(bytes, body + 2),
                    u32_at(bytes, body + 4),
                    u16_at(bytes, body + 14),
                ));
            }
            b"data" => data = Some(&bytes[body..end]),
            _ => {}
        }
        // Chunks are word aligned.
        pos = end + (size & 1);
    }

    let (audio_format, channels, sample_rate, bits) =
        format.ok_or_else(|| Error::MalformedWav("no fmt chunk".into()))?;
    let data = data.ok_or_else(|| Error::MalformedWav("no data chunk".into()))?;
    if audio_format != PCM {
        return Err(Error::UnsupportedFormat(format!(
            "audio format {audio_format}, only PCM (1) is supported"
        )));
    }
    if channels != 1 {
        return Err(Error::UnsupportedFormat(format!(
            "{channels} channels, only mono is supported"
        )));
    }
    if bits != 16 {
        return Err(Error::UnsupportedFormat(format!(
            "{bits}-bit samples, only 16-bit is supported"
        )));
    }
    if sample_rate == 0 {
        return Err(Error::MalformedWav("sample rate is zero".into()));
    }
    if data.len() % 2 != 0 {
        return Err(Error::MalformedWav("data chunk has a partial sample".into()));
    }
    let samples = data
        .chunks_exact(2)
        .map(|s| i16::from_le_bytes([s[0], s[1]]) as f64 / 32768.0)
        .collect();
    AudioClip::new(samples, sample_rate)
}

pub fn encode_wav(clip: &AudioClip) -> (Vec<u8>, WriteSummary) {
    let n = clip.len();
    let data_len = (n * 2) as u32;
    let mut out = Vec::with_capacity(44 + n * 2);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data_len).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&PCM.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&clip.sample_rate().to_le_bytes());
    out.extend_from_slice(&(clip.sample_rate() * 2).to_le_bytes());
    out.extend_from_slice(&2u16.to_le_bytes());
    out.extend_from_slice(&16u16.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&data_len.to_le_bytes());

    let mut clamped = 0;
    for &s in clip.samples() {
        if !(-1.0..=1.0).contains(&s) {
            clamped += 1;
        }
        let q = (s.clamp(-1.0, 1.0) * 32768.0)
            .round()
            .clamp(i16::MIN as f64, i16::MAX as f64) as i16;
        out.extend_from_slice(&q.to_le_bytes());
    }
    (
        out,
        WriteSummary {
            samples: n,
            clamped,
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sine(secs: f64, amp: f64) -> AudioClip {
        let n = (secs * 16_000.0) as usize;
        AudioClip::new(
            (0..n)
                .map(|i| amp * (2.0 * std::f64::consts::PI * 440.0 * i as f64 / 16_000.0).sin())
                .collect(),
            16_000,
        )
        .unwrap()
    }

    fn header(format: u16, channels: u16, bits: u16) -> Vec<u8> {
        let mut clip = encode_wav(&AudioClip::silence(4, 16_000).unwrap()).0;
        clip[20..22].copy_from_slice(&format.to_le_bytes());
        clip[22..24].copy_from_slice(&channels.to_le_bytes());
        clip[34..36].copy_from_slice(&bits.to_le_bytes());
        clip
    }

    #[test]
    fn sine_round_trip_within_one_step() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sine.wav");
        let clip = sine(1.0, 0.999);
        let summary = write_wav(&path, &clip).unwrap();
        assert_eq!(summary.clamped, 0);
        let back = read_wav(&path).unwrap();
        assert_eq!(back.sample_rate(), 16_000);
        assert_eq!(back.len(), clip.len());
        let max_dev = clip
            .samples()
            .iter()
            .zip(back.samples())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(max_dev <= 1.0 / 32768.0, "{max_dev}");
    }

    #[test]
    fn header_layout() {
        let (bytes, _) = encode_wav(&AudioClip::silence(3, 8_000).unwrap());
        assert_eq!(bytes.len(), 44 + 6);
        assert_eq!(&bytes[0..4], b"RIFF");
        assert_eq!(u32_at(&bytes, 4), 42);
        assert_eq!(u32_at(&bytes, 24), 8_000);
        assert_eq!(u32_at(&bytes, 28), 16_000);
        assert_eq!(u32_at(&bytes, 40), 6);
    }

    #[test]
    fn out_of_range_samples_are_clamped_and_counted() {
        let clip = AudioClip::new(vec![1.5, -2.0, 0.25, 1.0], 16_000).unwrap();
        let (bytes, summary) = encode_wav(&clip);
        assert_eq!(summary.clamped, 2);
        let back = decode_wav(&bytes).unwrap();
        assert_eq!(back.samples(), &[32767.0 / 32768.0, -1.0, 0.25, 32767.0 / 32768.0]);
    }

    #[test]
    fn truncated_header_is_malformed() {
        let (bytes, _) = encode_wav(&sine(0.01, 0.5));
        assert!(matches!(decode_wav(&bytes[..10]), Err(Error::MalformedWav(_))));
        assert!(matches!(decode_wav(&bytes[..30]), Err(Error::MalformedWav(_))));
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(decode_wav(&bad), Err(Error::MalformedWav(_))));
    }

    #[test]
    fn unsupported_formats() {
        assert!(matches!(decode_wav(&header(1, 2, 16)), Err(Error::UnsupportedFormat(_))));
        assert!(matches!(decode_wav(&header(1, 1, 8)), Err(Error::UnsupportedFormat(_))));
        assert!(matches!(decode_wav(&header(3, 1, 16)), Err(Error::UnsupportedFormat(_))));
    }

    #[test]
    fn skips_unknown_chunks() {
        let (bytes, _) = encode_wav(&AudioClip::new(vec![0.5, -0.5], 16_000).unwrap());
        let mut with_list = bytes[..36].to_vec();
        with_list.extend_from_slice(b"LIST");
        with_list.extend_from_slice(&3u32.to_le_bytes());
        with_list.extend_from_slice(&[1, 2, 3, 0]);
        with_list.extend_from_slice(&bytes[36..]);
        let clip = decode_wav(&with_list).unwrap();
        assert_eq!(clip.samples(), &[0.5, -0.5]);
    }

    proptest! {
        #[test]
        fn round_trip_bound(samples in proptest::collection::vec(-1.0f64..=1.0, 1..512)) {
            let clip = AudioClip::new(samples, 16_000).unwrap();
            let back = decode_wav(&encode_wav(&clip).0).unwrap();
            for (a, b) in clip.samples().iter().zip(back.samples()) {
                prop_assert!((a - b).abs() <= 1.0 / 32768.0);
            }
        }
    }
}
