use std::io::Write;

use thiserror::Error;

use super::{Link, LinkError};
use crate::exec::Exec;
use crate::seed;

pub const CSV_HEADER: &str = "snr_db,frames,bits,bit_errors,ber,block_errors,bler,receiver,seed";

/// Frames evaluated per parallel batch. Frames past the stopping point are
/// discarded, so the value only affects speed.
const CHUNK: usize = 32;

/// Per-point stopping rule: run at least `min_frames`, then stop once
/// `target_errors` bit errors are seen or `max_frames` is reached.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StopRule {
    pub min_frames: usize,
    pub max_frames: usize,
    pub target_errors: usize,
}

impl StopRule {
    pub fn validate(&self) -> Result<(), LinkError> {
        if self.max_frames == 0 || self.min_frames > self.max_frames {
            return Err(LinkError::Usage(format!(
                "stop rule needs 0 < max_frames and min_frames <= max_frames (got {} and {})",
                self.min_frames, self.max_frames
            )));
        }
        Ok(())
    }

    fn done(&self, frames: usize, bit_errors: usize) -> bool {
        frames >= self.max_frames || (frames >= self.min_frames && bit_errors >= self.target_errors)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub snr_db: f64,
    pub frames: usize,
    pub bits: usize,
    pub bit_errors: usize,
    pub ber: f64,
    pub block_errors: usize,
    pub bler: f64,
    pub receiver: String,
    pub seed: u64,
}

/// `start, start+step, …` up to and including `stop` (with a small
/// tolerance for accumulated rounding). Empty when the range is empty.
pub fn snr_points(start: f64, stop: f64, step: f64) -> Vec<f64> {
    if !(step > 0.0) || !(stop >= start) {
        return Vec::new();
    }
    let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
    (0..count).map(|i| start + i as f64 * step).collect()
}

/// Runs each SNR point until the stop rule fires. Frame `f` of point `i`
/// uses seed `derive(master, i, f)`; frames are evaluated in parallel
/// batches but accumulated in frame order, so every [`Exec`] mode gives
/// identical rows.
pub fn run_ber_sweep(
    link: &Link,
    snrs: &[f64],
    stop: StopRule,
    exec: Exec,
) -> Result<Vec<SweepRow>, LinkError> {
    if snrs.is_empty() {
        return Err(LinkError::Usage("SNR list is empty".into()));
    }
    stop.validate()?;
    let master = link.config().seed;
    let mut rows = Vec::with_capacity(snrs.len());
    for (i, &snr) in snrs.iter().enumerate() {
        let (mut frames, mut bits, mut bit_errors, mut block_errors, mut blocks) = (0, 0, 0, 0, 0);
        'point: while !stop.done(frames, bit_errors) {
            let end = (frames + CHUNK).min(stop.max_frames);
            let batch = exec.map_range(frames, end, |f| {
                link.run_frame(snr, seed::derive(master, i as u64, f as u64))
            });
            for out in batch {
                let out = out?;
                frames += 1;
                bits += out.tx_info.len();
                bit_errors += out.bit_errors;
                block_errors += out.block_errors;
                blocks += out.codewords;
                if stop.done(frames, bit_errors) {
                    break 'point;
                }
            }
        }
        rows.push(SweepRow {
            snr_db: snr,
            frames,
            bits,
            bit_errors,
            ber: bit_errors as f64 / bits as f64,
            block_errors,
            bler: block_errors as f64 / blocks as f64,
            receiver: link.config().receiver.name().to_string(),
            seed: master,
        });
    }
    Ok(rows)
}

/// Header line plus one line per row. Floats use the shortest
/// representation that parses back to the same value.
pub fn write_csv<W: Write>(rows: &[SweepRow], mut out: W) -> std::io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.snr_db, r.frames, r.bits, r.bit_errors, r.ber, r.block_errors, r.bler, r.receiver, r.seed
        )?;
    }
    Ok(())
}

#[derive(Debug, Error, PartialEq)]
pub enum CsvError {
    #[error("missing or wrong header (expected `{CSV_HEADER}`)")]
    Header,
    #[error("line {line}: {reason}")]
    Row { line: usize, reason: String },
}

pub fn parse_csv(text: &str) -> Result<Vec<SweepRow>, CsvError> {
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some(CSV_HEADER) {
        return Err(CsvError::Header);
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let line_no = i + 2;
        let bad = |reason: String| CsvError::Row { line: line_no, reason };
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 9 {
            return Err(bad(format!("expected 9 fields, got {}", f.len())));
        }
        fn num<T: std::str::FromStr>(s: &str, name: &str) -> Result<T, String> {
            s.trim().parse().map_err(|_| format!("bad {name} `{s}`"))
        }
        let row = (|| -> Result<SweepRow, String> {
            Ok(SweepRow {
                snr_db: num(f[0], "snr_db")?,
                frames: num(f[1], "frames")?,
                bits: num(f[2], "bits")?,
                bit_errors: num(f[3], "bit_errors")?,
                ber: num(f[4], "ber")?,
                block_errors: num(f[5], "block_errors")?,
                bler: num(f[6], "bler")?,
                receiver: f[7].trim().to_string(),
                seed: num(f[8], "seed")?,
            })
        })()
        .map_err(bad)?;
        rows.push(row);
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::link::{LinkConfig, ReceiverKind};

    fn link(kind: ReceiverKind) -> Link {
        let cfg = LinkConfig::parse(&format!(
            "num_subcarriers = 16\nfft_size = 16\ncp_len = 10\nqam_order = 4\nldpc_n = 192\n\
             receiver = {}\nseed = 9\n",
            kind.name()
        ))
        .unwrap();
        Link::without_model(cfg).unwrap()
    }

    #[test]
    fn snr_ranges() {
        assert_eq!(snr_points(0.0, 10.0, 2.5), vec![0.0, 2.5, 5.0, 7.5, 10.0]);
        assert_eq!(snr_points(0.0, 1.0, 0.1).len(), 11);
        assert_eq!(snr_points(3.0, 3.0, 1.0), vec![3.0]);
        assert!(snr_points(5.0, 0.0, 1.0).is_empty());
        assert!(snr_points(0.0, 5.0, 0.0).is_empty());
    }

    #[test]
    fn high_snr_stops_at_min_frames_with_zero_ber() {
        let stop = StopRule { min_frames: 6, max_frames: 50, target_errors: 0 };
        let rows = run_ber_sweep(&link(ReceiverKind::PerfectCsi), &[40.0], stop, Exec::Parallel).unwrap();
        assert_eq!(rows[0].frames, 6);
        assert_eq!(rows[0].ber, 0.0);
    }

    #[test]
    fn low_snr_stops_early_on_target() {
        let stop = StopRule { min_frames: 1, max_frames: 500, target_errors: 100 };
        let rows = run_ber_sweep(&link(ReceiverKind::BaselineLs), &[-5.0], stop, Exec::Parallel).unwrap();
        let r = &rows[0];
        assert!(r.bit_errors >= 100 && r.frames < 500, "{r:?}");
        assert_eq!(r.ber, r.bit_errors as f64 / r.bits as f64);
    }

    #[test]
    fn serial_matches_parallel() {
        let stop = StopRule { min_frames: 5, max_frames: 70, target_errors: 200 };
        let l = link(ReceiverKind::BaselineLs);
        let a = run_ber_sweep(&l, &[0.0, 4.0], stop, Exec::Serial).unwrap();
        let b = run_ber_sweep(&l, &[0.0, 4.0], stop, Exec::Parallel).unwrap();
        assert_eq!(a, b);
        assert_eq!(a[0].receiver, "baseline-ls");
        assert_eq!(a[0].seed, 9);
    }

    #[test]
    fn empty_snr_list_and_bad_rule_rejected() {
        let l = link(ReceiverKind::BaselineLs);
        let stop = StopRule { min_frames: 1, max_frames: 1, target_errors: 1 };
        assert!(matches!(run_ber_sweep(&l, &[], stop, Exec::Serial), Err(LinkError::Usage(_))));
        let bad = StopRule { min_frames: 5, max_frames: 2, target_errors: 1 };
        assert!(matches!(run_ber_sweep(&l, &[1.0], bad, Exec::Serial), Err(LinkError::Usage(_))));
    }

    #[test]
    fn csv_round_trip_is_lossless() {
        let rows = vec![
            SweepRow {
                snr_db: 2.5,
                frames: 10,
                bits: 3000,
                bit_errors: 7,
                ber: 7.0 / 3000.0,
                block_errors: 2,
                bler: 2.0 / 30.0,
                receiver: "neural".into(),
                seed: u64::MAX,
            },
            SweepRow {
                snr_db: -0.1,
                frames: 1,
                bits: 1,
                bit_errors: 0,
                ber: 0.0,
                block_errors: 0,
                bler: 0.0,
                receiver: "perfect-csi".into(),
                seed: 0,
            },
        ];
        let mut buf = Vec::new();
        write_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("snr_db,frames,bits,bit_errors,ber,block_errors,bler,receiver,seed\n"));
        assert_eq!(parse_csv(&text).unwrap(), rows);
    }

    #[test]
    fn csv_errors() {
        assert_eq!(parse_csv("a,b\n"), Err(CsvError::Header));
        let text = format!("{CSV_HEADER}\n1,2,3\n");
        assert!(matches!(parse_csv(&text), Err(CsvError::Row { line: 2, .. })));
    }
}
