//! File formats: CSV frame matrices and JSON event sets.
//!
//! CSV matrices have a `frame` column followed by one column per class in
//! label-space order; frame numbers must be dense from 0. Values are written
//! with shortest round-trip formatting, so a write/read cycle reproduces
//! every `f64` bit for bit. Event sets are pretty-printed JSON with a stable
//! field order, making serialized bytes deterministic and diffable.
//!
//! Parse errors cite file and line; post-parse validation reuses the stream
//! validators so defects are reported with row/column positions.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::events::{Event, EventSet};
use crate::label_space::{LabelMatrix, LabelSpace, ProbabilityStream, ScoreStream, CLASS_COUNT};

/// Role suffixes recognised (and stripped) when deriving a video id from a
/// file name, e.g. `v01.probs.csv` -> `v01`.
const ROLE_SUFFIXES: [&str; 6] = ["probs", "scores", "labels", "gt", "events", "pred"];

/// Derives a video id from a path: the file stem with one trailing role
/// suffix removed if present.
pub fn video_id_from_path(path: &Path) -> String {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default();
    for role in ROLE_SUFFIXES {
        if let Some(prefix) = stem.strip_suffix(role) {
            if let Some(prefix) = prefix.strip_suffix('.') {
                if !prefix.is_empty() {
                    return prefix.to_string();
                }
            }
        }
    }
    stem.to_string()
}

fn display_path(path: &Path) -> String {
    path.display().to_string()
}

fn expected_header(space: &LabelSpace) -> Vec<String> {
    let mut header = Vec::with_capacity(1 + CLASS_COUNT);
    header.push("frame".to_string());
    for c in 0..CLASS_COUNT {
        header.push(space.class_name(c).to_string());
    }
    header
}

fn check_header(path: &Path, headers: &csv::StringRecord, space: &LabelSpace) -> Result<()> {
    let expected = expected_header(space);
    let got: Vec<&str> = headers.iter().collect();
    if got == expected.iter().map(String::as_str).collect::<Vec<_>>() {
        return Ok(());
    }
    let parse = |message: String| Error::Parse { path: display_path(path), line: 1, message };
    for name in &expected {
        if !got.contains(&name.as_str()) {
            return Err(parse(format!("header is missing column '{name}'")));
        }
    }
    for name in &got {
        if !expected.iter().any(|e| e == name) {
            return Err(parse(format!("header has unexpected column '{name}'")));
        }
    }
    // Same names, wrong order.
    for (i, (e, g)) in expected.iter().zip(got.iter()).enumerate() {
        if e != g {
            return Err(parse(format!("header column {i}: expected '{e}', found '{g}'")));
        }
    }
    Err(parse("malformed header".into()))
}

struct CsvRows {
    video_id: String,
    rows: Vec<Vec<String>>,
    lines: Vec<u64>,
}

/// Shared CSV shell: checks the header, splits records into cells, enforces
/// dense 0-based frame numbering, and remembers source lines for later
/// error reporting.
fn read_csv_rows(path: &Path, space: &LabelSpace) -> Result<CsvRows> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| map_csv_error(path, e))?;
    let headers = reader.headers().map_err(|e| map_csv_error(path, e))?.clone();
    check_header(path, &headers, space)?;
    let mut rows = Vec::new();
    let mut lines = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let record = record.map_err(|e| map_csv_error(path, e))?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if record.len() != 1 + CLASS_COUNT {
            return Err(Error::Parse {
                path: display_path(path),
                line,
                message: format!(
                    "expected {} columns, found {}",
                    1 + CLASS_COUNT,
                    record.len()
                ),
            });
        }
        let frame: usize = record[0].parse().map_err(|_| Error::Parse {
            path: display_path(path),
            line,
            message: format!("frame column: '{}' is not a frame index", &record[0]),
        })?;
        if frame != idx {
            return Err(Error::Parse {
                path: display_path(path),
                line,
                message: format!("frame numbers must be dense from 0: expected {idx}, found {frame}"),
            });
        }
        rows.push(record.iter().skip(1).map(str::to_string).collect());
        lines.push(line);
    }
    Ok(CsvRows { video_id: video_id_from_path(path), rows, lines })
}

fn map_csv_error(path: &Path, e: csv::Error) -> Error {
    if e.is_io_error() {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(display_path(path), io),
            _ => unreachable!("is_io_error inspected the kind"),
        }
    } else {
        let line = e.position().map(|p| p.line()).unwrap_or(0);
        Error::Parse { path: display_path(path), line, message: e.to_string() }
    }
}

fn parse_cells<T>(
    path: &Path,
    raw: &CsvRows,
    space: &LabelSpace,
    mut parse: impl FnMut(&str) -> std::result::Result<T, String>,
) -> Result<Vec<Vec<T>>> {
    let mut out = Vec::with_capacity(raw.rows.len());
    for (row, line) in raw.rows.iter().zip(raw.lines.iter()) {
        let mut parsed = Vec::with_capacity(CLASS_COUNT);
        for (c, cell) in row.iter().enumerate() {
            match parse(cell) {
                Ok(v) => parsed.push(v),
                Err(message) => {
                    return Err(Error::Parse {
                        path: display_path(path),
                        line: *line,
                        message: format!("column '{}': {message}", space.class_name(c)),
                    })
                }
            }
        }
        out.push(parsed);
    }
    Ok(out)
}

/// Loads and validates a probability stream; the video id comes from the
/// file name.
pub fn load_probability_stream(path: &Path, space: &LabelSpace) -> Result<ProbabilityStream> {
    let raw = read_csv_rows(path, space)?;
    let probs = parse_cells(path, &raw, space, |cell| {
        let v: f64 =
            cell.parse().map_err(|_| format!("'{cell}' is not a number"))?;
        if !v.is_finite() {
            return Err(format!("'{cell}' is not finite"));
        }
        if !(0.0..=1.0).contains(&v) {
            return Err(format!("probability {v} outside [0, 1]"));
        }
        Ok(v)
    })?;
    let stream = ProbabilityStream::new(raw.video_id, probs);
    stream.validate(space)?;
    Ok(stream)
}

/// Loads a raw score stream; any finite real is accepted.
pub fn load_score_stream(path: &Path, space: &LabelSpace) -> Result<ScoreStream> {
    let raw = read_csv_rows(path, space)?;
    let scores = parse_cells(path, &raw, space, |cell| {
        let v: f64 =
            cell.parse().map_err(|_| format!("'{cell}' is not a number"))?;
        if !v.is_finite() {
            return Err(format!("'{cell}' is not finite"));
        }
        Ok(v)
    })?;
    let stream = ScoreStream::new(raw.video_id, scores);
    stream.validate()?;
    Ok(stream)
}

/// Loads a binary label matrix; cells must be exactly 0 or 1.
pub fn load_label_matrix(path: &Path, space: &LabelSpace) -> Result<LabelMatrix> {
    let raw = read_csv_rows(path, space)?;
    let labels = parse_cells(path, &raw, space, |cell| match cell {
        "0" => Ok(0u8),
        "1" => Ok(1u8),
        other => Err(format!("label '{other}' is not 0 or 1")),
    })?;
    let matrix = LabelMatrix::new(raw.video_id, labels);
    matrix.validate()?;
    Ok(matrix)
}

fn write_matrix_csv<T, F>(
    path: &Path,
    rows: &[Vec<T>],
    space: &LabelSpace,
    mut format_cell: F,
) -> Result<()>
where
    F: FnMut(&T) -> String,
{
    let mut writer = csv::Writer::from_path(path).map_err(|e| map_csv_error(path, e))?;
    writer
        .write_record(expected_header(space))
        .map_err(|e| map_csv_error(path, e))?;
    for (t, row) in rows.iter().enumerate() {
        let mut record = Vec::with_capacity(1 + CLASS_COUNT);
        record.push(t.to_string());
        record.extend(row.iter().map(&mut format_cell));
        writer.write_record(&record).map_err(|e| map_csv_error(path, e))?;
    }
    writer.flush().map_err(|e| Error::io(display_path(path), e))
}

/// Writes a probability stream as CSV with lossless float formatting.
pub fn write_probability_csv(
    path: &Path,
    stream: &ProbabilityStream,
    space: &LabelSpace,
) -> Result<()> {
    write_matrix_csv(path, &stream.probs, space, |v| format!("{v}"))
}

/// Writes a score stream as CSV with lossless float formatting.
pub fn write_score_csv(path: &Path, stream: &ScoreStream, space: &LabelSpace) -> Result<()> {
    write_matrix_csv(path, &stream.scores, space, |v| format!("{v}"))
}

/// Writes a binary label matrix as CSV.
pub fn write_label_csv(path: &Path, matrix: &LabelMatrix, space: &LabelSpace) -> Result<()> {
    write_matrix_csv(path, &matrix.labels, space, |v| v.to_string())
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EventDoc {
    video_id: String,
    frame_count: usize,
    events: Vec<EventRecordDoc>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EventRecordDoc {
    label: String,
    start_frame: usize,
    end_frame: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    score: Option<f64>,
}

/// Canonical JSON serialization of an event set. Labels are written by
/// name; absent scores are omitted entirely. The output is deterministic:
/// equal sets serialize to equal bytes.
pub fn events_to_json(set: &EventSet, space: &LabelSpace) -> String {
    let doc = EventDoc {
        video_id: set.video_id.clone(),
        frame_count: set.frame_count,
        events: set
            .events
            .iter()
            .map(|ev| EventRecordDoc {
                label: space.class_name(ev.label).to_string(),
                start_frame: ev.start_frame,
                end_frame: ev.end_frame,
                score: ev.score,
            })
            .collect(),
    };
    let mut text = serde_json::to_string_pretty(&doc).expect("event doc serializes");
    text.push('\n');
    text
}

/// Writes an event set as canonical JSON.
pub fn write_events(path: &Path, set: &EventSet, space: &LabelSpace) -> Result<()> {
    fs::write(path, events_to_json(set, space)).map_err(|e| Error::io(display_path(path), e))
}

/// Reads and validates a JSON event set. Labels are resolved against the
/// space by name; structural defects are rejected with the offending event
/// index.
pub fn read_events(path: &Path, space: &LabelSpace) -> Result<EventSet> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(display_path(path), e))?;
    let doc: EventDoc = serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: display_path(path),
        line: e.line() as u64,
        message: e.to_string(),
    })?;
    let mut events = Vec::with_capacity(doc.events.len());
    for (i, record) in doc.events.into_iter().enumerate() {
        let label = space.class_index(&record.label).ok_or_else(|| Error::FileFormat {
            path: display_path(path),
            message: format!("event {i}: unknown label '{}'", record.label),
        })?;
        events.push(Event {
            label,
            start_frame: record.start_frame,
            end_frame: record.end_frame,
            score: record.score,
        });
    }
    EventSet::new(doc.video_id, doc.frame_count, events)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::path::PathBuf;

    fn space() -> LabelSpace {
        LabelSpace::default()
    }

    fn tmp(name: &str) -> (tempfile::TempDir, PathBuf) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(name);
        (dir, path)
    }

    #[test]
    fn video_id_strips_one_role_suffix() {
        assert_eq!(video_id_from_path(Path::new("/data/v01.probs.csv")), "v01");
        assert_eq!(video_id_from_path(Path::new("v01.scores.csv")), "v01");
        assert_eq!(video_id_from_path(Path::new("v01.gt.json")), "v01");
        assert_eq!(video_id_from_path(Path::new("v01.csv")), "v01");
        assert_eq!(video_id_from_path(Path::new("probs.csv")), "probs");
        assert_eq!(video_id_from_path(Path::new("a.b.probs.csv")), "a.b");
    }

    #[test]
    fn probability_csv_round_trips_exactly() {
        let (_dir, path) = tmp("v07.probs.csv");
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let rows: Vec<Vec<f64>> =
            (0..20).map(|_| (0..CLASS_COUNT).map(|_| rng.random()).collect()).collect();
        let stream = ProbabilityStream::new("v07", rows);
        write_probability_csv(&path, &stream, &space()).unwrap();
        let loaded = load_probability_stream(&path, &space()).unwrap();
        assert_eq!(loaded, stream); // bitwise, thanks to shortest round-trip
    }

    #[test]
    fn tiny_probabilities_survive_the_round_trip() {
        let (_dir, path) = tmp("v.probs.csv");
        let mut rows = vec![vec![0.5; CLASS_COUNT]];
        rows[0][0] = 1e-7;
        rows[0][1] = 1.0 - 1e-12;
        rows[0][2] = f64::MIN_POSITIVE;
        let stream = ProbabilityStream::new("v", rows.clone());
        write_probability_csv(&path, &stream, &space()).unwrap();
        let loaded = load_probability_stream(&path, &space()).unwrap();
        assert_eq!(loaded.probs, rows);
    }

    #[test]
    fn header_missing_column_is_named() {
        let (_dir, path) = tmp("v.probs.csv");
        let header: Vec<String> = expected_header(&space())
            .into_iter()
            .filter(|h| h != "path_07")
            .collect();
        std::fs::write(&path, format!("{}\n", header.join(","))).unwrap();
        let err = load_probability_stream(&path, &space()).unwrap_err();
        assert!(err.to_string().contains("missing column 'path_07'"), "got: {err}");
    }

    #[test]
    fn out_of_range_cell_cites_line_and_column() {
        let (_dir, path) = tmp("v.probs.csv");
        let header = expected_header(&space()).join(",");
        let mut body = String::new();
        for t in 0..6 {
            let mut cells = vec![t.to_string()];
            cells.extend(std::iter::repeat_n("0.5".to_string(), CLASS_COUNT));
            if t == 5 {
                cells[4] = "1.2".into(); // column 'small_intestine', row 5
            }
            body.push_str(&cells.join(","));
            body.push('\n');
        }
        std::fs::write(&path, format!("{header}\n{body}")).unwrap();
        let err = load_probability_stream(&path, &space()).unwrap_err();
        let text = err.to_string();
        // Row 5 starts on line 7 (header is line 1).
        assert!(text.contains(":7:"), "got: {text}");
        assert!(text.contains("small_intestine"), "got: {text}");
        assert!(text.contains("outside [0, 1]"), "got: {text}");
    }

    #[test]
    fn non_numeric_cell_and_bad_frame_are_rejected() {
        let (_dir, path) = tmp("v.probs.csv");
        let header = expected_header(&space()).join(",");
        let good = std::iter::repeat_n("0.5", CLASS_COUNT).collect::<Vec<_>>().join(",");
        std::fs::write(&path, format!("{header}\n0,{good}\n1,oops{}\n", &good[3..])).unwrap();
        let err = load_probability_stream(&path, &space()).unwrap_err();
        assert!(err.to_string().contains("'oops' is not a number"), "got: {err}");

        std::fs::write(&path, format!("{header}\n0,{good}\n5,{good}\n")).unwrap();
        let err = load_probability_stream(&path, &space()).unwrap_err();
        assert!(err.to_string().contains("expected 1, found 5"), "got: {err}");
    }

    #[test]
    fn short_row_is_rejected_with_line() {
        let (_dir, path) = tmp("v.probs.csv");
        let header = expected_header(&space()).join(",");
        let short = std::iter::repeat_n("0.5", CLASS_COUNT - 1).collect::<Vec<_>>().join(",");
        std::fs::write(&path, format!("{header}\n0,{short}\n")).unwrap();
        let err = load_probability_stream(&path, &space()).unwrap_err();
        assert!(err.to_string().contains("expected 18 columns, found 17"), "got: {err}");
        assert!(err.to_string().contains(":2:"), "got: {err}");
    }

    #[test]
    fn empty_body_is_a_valid_empty_stream() {
        let (_dir, path) = tmp("v.probs.csv");
        std::fs::write(&path, format!("{}\n", expected_header(&space()).join(","))).unwrap();
        let stream = load_probability_stream(&path, &space()).unwrap();
        assert_eq!(stream.frame_count(), 0);
        assert_eq!(stream.video_id, "v");
    }

    #[test]
    fn score_csv_accepts_negatives_and_rejects_nan() {
        let (_dir, path) = tmp("v.scores.csv");
        let rows = vec![vec![-3.25; CLASS_COUNT], vec![8.5; CLASS_COUNT]];
        write_score_csv(&path, &ScoreStream::new("v", rows.clone()), &space()).unwrap();
        assert_eq!(load_score_stream(&path, &space()).unwrap().scores, rows);

        let header = expected_header(&space()).join(",");
        let mut cells = vec!["0".to_string()];
        cells.extend(std::iter::repeat_n("1.0".to_string(), CLASS_COUNT));
        cells[3] = "NaN".into();
        std::fs::write(&path, format!("{header}\n{}\n", cells.join(","))).unwrap();
        let err = load_score_stream(&path, &space()).unwrap_err();
        assert!(err.to_string().contains("not finite"), "got: {err}");
    }

    #[test]
    fn label_csv_round_trips_and_rejects_non_binary() {
        let (_dir, path) = tmp("v.labels.csv");
        let mut rows = vec![vec![0u8; CLASS_COUNT]; 3];
        rows[1][5] = 1;
        rows[2][16] = 1;
        write_label_csv(&path, &LabelMatrix::new("v", rows.clone()), &space()).unwrap();
        assert_eq!(load_label_matrix(&path, &space()).unwrap().labels, rows);

        let header = expected_header(&space()).join(",");
        let mut cells = vec!["0".to_string()];
        cells.extend(std::iter::repeat_n("0".to_string(), CLASS_COUNT));
        cells[2] = "2".into();
        std::fs::write(&path, format!("{header}\n{}\n", cells.join(","))).unwrap();
        let err = load_label_matrix(&path, &space()).unwrap_err();
        assert!(err.to_string().contains("label '2' is not 0 or 1"), "got: {err}");
    }

    #[test]
    fn events_round_trip_with_and_without_scores() {
        let (_dir, path) = tmp("v03.events.json");
        let mut scored = Event::new(5, 10, 24);
        scored.score = Some(0.8125);
        let set = EventSet::new(
            "v03",
            100,
            vec![Event::new(1, 0, 9), scored, Event::new(5, 40, 41)],
        )
        .unwrap();
        write_events(&path, &set, &space()).unwrap();
        let loaded = read_events(&path, &space()).unwrap();
        assert_eq!(loaded, set);
        let text = std::fs::read_to_string(&path).unwrap();
        // Unscored events must not carry a "score" key at all.
        assert_eq!(text.matches("\"score\"").count(), 1);
        assert!(text.contains("\"esophagus\""));
    }

    #[test]
    fn events_serialization_is_deterministic() {
        let set = EventSet::new("v", 10, vec![Event::new(5, 0, 4)]).unwrap();
        assert_eq!(events_to_json(&set, &space()), events_to_json(&set, &space()));
    }

    #[test]
    fn unknown_label_and_reversed_bounds_are_rejected() {
        let (_dir, path) = tmp("v.events.json");
        std::fs::write(
            &path,
            r#"{"video_id":"v","frame_count":10,"events":[{"label":"nope","start_frame":0,"end_frame":1}]}"#,
        )
        .unwrap();
        let err = read_events(&path, &space()).unwrap_err();
        assert!(err.to_string().contains("unknown label 'nope'"), "got: {err}");

        std::fs::write(
            &path,
            r#"{"video_id":"v","frame_count":10,"events":[{"label":"path_01","start_frame":7,"end_frame":5}]}"#,
        )
        .unwrap();
        let err = read_events(&path, &space()).unwrap_err();
        assert!(
            err.to_string().contains("event 0: start_frame 7 > end_frame 5"),
            "got: {err}"
        );
    }

    #[test]
    fn malformed_json_reports_line() {
        let (_dir, path) = tmp("v.events.json");
        std::fs::write(&path, "{\n  \"video_id\": \"v\",\n  oops\n}\n").unwrap();
        let err = read_events(&path, &space()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "got: {err}");
    }

    #[test]
    fn unknown_json_field_is_rejected() {
        let (_dir, path) = tmp("v.events.json");
        std::fs::write(
            &path,
            r#"{"video_id":"v","frame_count":10,"events":[],"extra":1}"#,
        )
        .unwrap();
        assert!(read_events(&path, &space()).is_err());
    }

    #[test]
    fn missing_file_is_an_io_error_with_path() {
        let err = load_probability_stream(Path::new("/no/such/file.csv"), &space()).unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
        assert!(err.to_string().contains("/no/such/file.csv"));
    }
}
