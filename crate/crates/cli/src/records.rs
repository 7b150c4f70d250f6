//! Experiment record files.
//!
//! ```text
//! n,kind,param1,param2,param3
//! 8,visibility,0.787,0.008
//! 8,moments,5.2,1.0,1000
//! 6,fringe_points,fringes/n6.csv
//! ```
//!
//! `fringe_points` rows name a secondary CSV with header `theta,p_plus,shots`,
//! resolved relative to the record file. `#` comments and blank lines are
//! skipped everywhere.

use std::path::{Path, PathBuf};

use speedwitness_core::witness::{ExperimentRecord, FringePoint, RecordData};

use crate::error::{CliError, CliResult};

const HEADER: &str = "n,kind,param1,param2";
const HEADER3: &str = "n,kind,param1,param2,param3";
const FRINGE_HEADER: &str = "theta,p_plus,shots";

/// A parsed record and the line it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedRecord {
    pub line: usize,
    pub record: ExperimentRecord,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RecordSet {
    pub records: Vec<ParsedRecord>,
    /// Rows skipped for an unsupported kind.
    pub warnings: Vec<String>,
}

fn read(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|source| CliError::Read {
        path: path.to_path_buf(),
        source,
    })
}

/// Non-comment, non-blank lines with their 1-based numbers.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

struct Ctx<'a> {
    path: &'a Path,
    line: usize,
}

impl Ctx<'_> {
    fn err(&self, msg: impl Into<String>) -> CliError {
        CliError::Parse {
            path: self.path.to_path_buf(),
            line: self.line,
            msg: msg.into(),
        }
    }

    fn num<T: std::str::FromStr>(&self, field: &str, s: &str) -> CliResult<T> {
        s.trim()
            .parse::<T>()
            .map_err(|_| self.err(format!("{field}: `{}` is not a valid number", s.trim())))
    }

    fn real(&self, field: &str, s: &str) -> CliResult<f64> {
        let x: f64 = self.num(field, s)?;
        if !x.is_finite() {
            return Err(self.err(format!("{field}: `{}` is not finite", s.trim())));
        }
        Ok(x)
    }
}

pub fn parse_records(path: &Path) -> CliResult<RecordSet> {
    let text = read(path)?;
    parse_records_str(&text, path)
}

/// Parses record text; `origin` names the file in errors and anchors
/// relative fringe paths.
pub fn parse_records_str(text: &str, origin: &Path) -> CliResult<RecordSet> {
    let mut set = RecordSet::default();
    let mut lines = content_lines(text);
    let Some((hline, header)) = lines.next() else {
        return Ok(set);
    };
    let compact: String = header.chars().filter(|c| !c.is_whitespace()).collect();
    if compact != HEADER && compact != HEADER3 {
        return Err(CliError::Parse {
            path: origin.to_path_buf(),
            line: hline,
            msg: format!("header `{header}` does not match `{HEADER3}`"),
        });
    }
    let base = origin.parent().map(Path::to_path_buf).unwrap_or_default();

    for (line, row) in lines {
        let ctx = Ctx { path: origin, line };
        let fields: Vec<&str> = row.split(',').map(str::trim).collect();
        if fields.len() < 3 {
            return Err(ctx.err(format!("expected at least 3 fields, got {}", fields.len())));
        }
        let n: usize = ctx.num("n", fields[0])?;
        let arity = |want: usize| -> CliResult<()> {
            if fields.len() != want {
                return Err(ctx.err(format!("kind `{}` takes {want} fields, got {}", fields[1], fields.len())));
            }
            Ok(())
        };
        let data = match fields[1] {
            "visibility" => {
                arity(4)?;
                let v = ctx.real("param1", fields[2])?;
                if !(0.0..=1.0).contains(&v) {
                    return Err(ctx.err(format!("visibility {v} outside [0, 1]")));
                }
                RecordData::Visibility {
                    v,
                    stderr: ctx.real("param2", fields[3])?,
                }
            }
            "moments" => {
                arity(5)?;
                RecordData::Moments {
                    dmean_dtheta: ctx.real("param1", fields[2])?,
                    variance: ctx.real("param2", fields[3])?,
                    m: ctx.num("param3", fields[4])?,
                }
            }
            "fringe_points" => {
                arity(3)?;
                let sub = PathBuf::from(fields[2]);
                let sub = if sub.is_absolute() { sub } else { base.join(sub) };
                RecordData::FringePoints {
                    points: parse_fringe(&sub)?,
                }
            }
            other => {
                set.warnings
                    .push(format!("{}:{line}: unsupported kind `{other}`, row skipped", origin.display()));
                continue;
            }
        };
        let record = ExperimentRecord::new(n, data).map_err(|e| ctx.err(e.to_string()))?;
        set.records.push(ParsedRecord { line, record });
    }
    Ok(set)
}

pub fn parse_fringe(path: &Path) -> CliResult<Vec<FringePoint>> {
    let text = read(path)?;
    let mut lines = content_lines(&text);
    let Some((hline, header)) = lines.next() else {
        return Ok(Vec::new());
    };
    let compact: String = header.chars().filter(|c| !c.is_whitespace()).collect();
    if compact != FRINGE_HEADER {
        return Err(CliError::Parse {
            path: path.to_path_buf(),
            line: hline,
            msg: format!("header `{header}` does not match `{FRINGE_HEADER}`"),
        });
    }
    lines
        .map(|(line, row)| {
            let ctx = Ctx { path, line };
            let fields: Vec<&str> = row.split(',').collect();
            if fields.len() != 3 {
                return Err(ctx.err(format!("expected 3 fields, got {}", fields.len())));
            }
            let p_plus = ctx.real("p_plus", fields[1])?;
            if !(0.0..=1.0).contains(&p_plus) {
                return Err(ctx.err(format!("p_plus {p_plus} outside [0, 1]")));
            }
            let shots: u64 = ctx.num("shots", fields[2])?;
            if shots < 1 {
                return Err(ctx.err("shots must be ≥ 1"));
            }
            Ok(FringePoint {
                theta: ctx.real("theta", fields[0])?,
                p_plus,
                shots,
            })
        })
        .collect()
}

/// Writes a fringe file in the format [`parse_fringe`] reads.
pub fn write_fringe(path: &Path, points: &[FringePoint]) -> CliResult<()> {
    let mut out = format!("{FRINGE_HEADER}\n");
    for p in points {
        out.push_str(&format!(
            "{},{},{}\n",
            crate::report::num(p.theta),
            crate::report::num(p.p_plus),
            p.shots
        ));
    }
    std::fs::write(path, out).map_err(|source| CliError::Write {
        path: path.to_path_buf(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> CliResult<RecordSet> {
        parse_records_str(text, Path::new("records.csv"))
    }

    #[test]
    fn visibility_row() {
        let s = parse("n,kind,param1,param2\n8,visibility,0.787,0.008\n").unwrap();
        assert_eq!(s.records.len(), 1);
        assert_eq!(s.records[0].line, 2);
        assert_eq!(
            s.records[0].record.data,
            RecordData::Visibility { v: 0.787, stderr: 0.008 }
        );
    }

    #[test]
    fn comments_and_empty() {
        assert_eq!(parse("# only a comment\n\n").unwrap(), RecordSet::default());
        let s = parse("# lead\nn,kind,param1,param2,param3\n\n# mid\n8,moments,5.2,1,100\n").unwrap();
        assert_eq!(s.records[0].line, 5);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let cases = [
            ("n,kind,a,b\n", 1),
            ("n,kind,param1,param2\n8,visibility,1.2,0.01\n", 2),
            ("n,kind,param1,param2\n\n8,visibility,abc,0.01\n", 3),
            ("n,kind,param1,param2\n8,visibility,0.5\n", 2),
            ("n,kind,param1,param2\nx,visibility,0.5,0.1\n", 2),
            ("n,kind,param1,param2\n8,moments,1,1,0\n", 2),
        ];
        for (text, want) in cases {
            match parse(text) {
                Err(CliError::Parse { line, .. }) => assert_eq!(line, want, "{text}"),
                other => panic!("{text}: {other:?}"),
            }
        }
    }

    #[test]
    fn unknown_kind_is_warning() {
        let s = parse("n,kind,param1,param2\n4,bell,1,2\n4,visibility,0.9,0\n").unwrap();
        assert_eq!(s.records.len(), 1);
        assert_eq!(s.warnings.len(), 1);
        assert!(s.warnings[0].contains(":2:"));
    }
}
