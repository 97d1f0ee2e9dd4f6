//! Plain-text dataset format.
//!
//! ```text
//! # program=phase:0.7853981633974483
//! # rate_calibration=5200
//! # seed=7
//! input_label,projector_label,counts,exposure_s
//! H,H,32519,50
//! ...
//! ```
//!
//! Lines starting with `#` carry optional `key=value` metadata; unknown keys
//! are ignored. Blank lines are skipped. Exactly one record per
//! (input, projector) pair is required; labels are `H V P M R L`.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::optics::ProgramSetting;

use super::{CountRecord, MeasurementSetting, TomographyDataset};

pub const DATASET_HEADER: &str = "input_label,projector_label,counts,exposure_s";

pub fn write_dataset<W: Write>(mut w: W, data: &TomographyDataset) -> Result<()> {
    if let Some(program) = data.program {
        writeln!(w, "# program={program}")?;
    }
    if let Some(rate) = data.rate_calibration {
        writeln!(w, "# rate_calibration={rate}")?;
    }
    if let Some(seed) = data.seed {
        writeln!(w, "# seed={seed}")?;
    }
    writeln!(w, "{DATASET_HEADER}")?;
    for r in &data.records {
        writeln!(
            w,
            "{},{},{},{}",
            r.setting.input, r.setting.projector, r.counts, r.exposure
        )?;
    }
    Ok(())
}

pub fn read_dataset<R: BufRead>(reader: R) -> Result<TomographyDataset> {
    let mut program = None;
    let mut rate_calibration = None;
    let mut seed = None;
    let mut header_seen = false;
    let mut records = Vec::new();
    let mut last_line = 0;

    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        last_line = line_no;
        let line = line?;
        let text = line.trim();
        if text.is_empty() {
            continue;
        }
        let parse_err = |message: String| Error::Parse {
            line: line_no,
            message,
        };

        if let Some(meta) = text.strip_prefix('#') {
            if let Some((key, value)) = meta.split_once('=') {
                let value = value.trim();
                match key.trim() {
                    "program" => program = Some(value.parse::<ProgramSetting>().map_err(parse_err)?),
                    "rate_calibration" => {
                        rate_calibration = Some(
                            value
                                .parse::<f64>()
                                .map_err(|e| parse_err(format!("bad rate_calibration: {e}")))?,
                        )
                    }
                    "seed" => {
                        seed = Some(
                            value
                                .parse::<u64>()
                                .map_err(|e| parse_err(format!("bad seed: {e}")))?,
                        )
                    }
                    _ => {}
                }
            }
            continue;
        }

        if !header_seen {
            let fields: Vec<&str> = text.split(',').map(str::trim).collect();
            if fields.join(",") != DATASET_HEADER {
                return Err(parse_err(format!(
                    "expected header {DATASET_HEADER:?}, got {text:?}"
                )));
            }
            header_seen = true;
            continue;
        }

        let fields: Vec<&str> = text.split(',').map(str::trim).collect();
        if fields.len() != 4 {
            return Err(parse_err(format!("expected 4 fields, got {}", fields.len())));
        }
        let input = fields[0].parse().map_err(parse_err)?;
        let projector = fields[1].parse().map_err(parse_err)?;
        let counts: f64 = fields[2]
            .parse()
            .map_err(|e| parse_err(format!("bad counts {:?}: {e}", fields[2])))?;
        if !(counts >= 0.0) || !counts.is_finite() {
            return Err(parse_err(format!("counts must be non-negative, got {counts}")));
        }
        let exposure: f64 = fields[3]
            .parse()
            .map_err(|e| parse_err(format!("bad exposure {:?}: {e}", fields[3])))?;
        if !(exposure > 0.0) || !exposure.is_finite() {
            return Err(parse_err(format!("exposure must be positive, got {exposure}")));
        }
        records.push(CountRecord {
            setting: MeasurementSetting::new(input, projector),
            counts,
            exposure,
        });
    }

    if !header_seen {
        return Err(Error::Parse {
            line: last_line.max(1),
            message: "no header line; dataset is empty".into(),
        });
    }
    TomographyDataset::new(records, program, rate_calibration, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optics::{effective_kraus, PbsModel};
    use crate::par::Execution;
    use crate::tomo::{simulate_counts, Acquisition, StateLabel};

    fn sample(noiseless: bool) -> TomographyDataset {
        let setting = ProgramSetting::Phase(0.785);
        let k = effective_kraus(setting, &PbsModel::imperfect_reference());
        let acq = Acquisition {
            exposure: 50.0,
            rate_calibration: 5200.0,
            noiseless,
        };
        simulate_counts(&k, setting, &acq, 42, 3, Execution::Sequential).unwrap()
    }

    fn roundtrip(ds: &TomographyDataset) -> TomographyDataset {
        let mut buf = Vec::new();
        write_dataset(&mut buf, ds).unwrap();
        read_dataset(buf.as_slice()).unwrap()
    }

    #[test]
    fn roundtrip_is_exact() {
        for noiseless in [false, true] {
            let ds = sample(noiseless);
            assert_eq!(roundtrip(&ds), ds);
        }
    }

    #[test]
    fn empty_input_is_a_parse_error() {
        assert!(matches!(read_dataset("".as_bytes()), Err(Error::Parse { .. })));
        assert!(matches!(
            read_dataset("# only a comment\n\n".as_bytes()),
            Err(Error::Parse { .. })
        ));
    }

    #[test]
    fn missing_record_is_named() {
        let ds = sample(false);
        let mut buf = Vec::new();
        write_dataset(&mut buf, &ds).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let trimmed: String = text
            .lines()
            .filter(|l| !l.starts_with("R,M,"))
            .map(|l| format!("{l}\n"))
            .collect();
        match read_dataset(trimmed.as_bytes()) {
            Err(Error::MissingRecord { input, projector }) => {
                assert_eq!((input, projector), (StateLabel::R, StateLabel::M));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn errors_carry_line_numbers() {
        let text = format!("# seed=1\n{DATASET_HEADER}\nH,H,10,5\nH,X,3,5\n");
        match read_dataset(text.as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 4),
            other => panic!("unexpected {other:?}"),
        }
        let text = format!("{DATASET_HEADER}\nH,H,-1,5\n");
        assert!(matches!(
            read_dataset(text.as_bytes()),
            Err(Error::Parse { line: 2, .. })
        ));
        let text = "counts,exposure\n";
        assert!(matches!(
            read_dataset(text.as_bytes()),
            Err(Error::Parse { line: 1, .. })
        ));
    }
}
