use std::fs::File;
use std::io::Write;
use std::path::Path;

use super::{Column, DataError, Dataset, RawRecord};

/// Exact header of the assignment CSV schema.
pub const CSV_HEADER: [&str; 11] = [
    "student_id",
    "course_id",
    "assignment_id",
    "gase",
    "sdls",
    "apss",
    "aps",
    "clicks_assignment",
    "interval_days",
    "clicks_activities",
    "delay_days",
];

/// Reads a CSV file following [`CSV_HEADER`]. Columns may appear in any
/// order but the set of names must match exactly. Empty cells become
/// `None`; rows keep file order. Parse errors report the 1-based data row.
pub fn load_csv(path: impl AsRef<Path>) -> Result<Vec<RawRecord>, DataError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| DataError::Io {
        path: path.display().to_string(),
        source,
    })?;
    read_csv(file)
}

pub(crate) fn read_csv<R: std::io::Read>(reader: R) -> Result<Vec<RawRecord>, DataError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let names: Vec<&str> = headers.iter().collect();
    for expected in CSV_HEADER {
        if !names.contains(&expected) {
            return Err(DataError::MissingColumn(expected.to_string()));
        }
    }
    if let Some(extra) = names.iter().find(|n| !CSV_HEADER.contains(n)) {
        return Err(DataError::UnexpectedColumn(extra.to_string()));
    }
    let pos = |name: &str| names.iter().position(|n| *n == name).unwrap();
    let id_pos = [pos("student_id"), pos("course_id"), pos("assignment_id")];
    let value_pos: Vec<usize> = Column::ALL.iter().map(|c| pos(c.csv_name())).collect();

    let mut out = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let row = row?;
        let row_no = i + 1;
        let cell = |p: usize| row.get(p).unwrap_or("");
        let id = |p: usize| {
            let s = cell(p);
            (!s.is_empty()).then(|| s.to_string())
        };
        let mut values = [None; 8];
        for (slot, (&p, column)) in values.iter_mut().zip(value_pos.iter().zip(Column::ALL)) {
            let s = cell(p);
            if s.is_empty() {
                continue;
            }
            let v: f64 = s.parse().map_err(|_| DataError::Parse {
                row: row_no,
                column: column.csv_name().to_string(),
                value: s.to_string(),
            })?;
            *slot = Some(v);
        }
        out.push(RawRecord {
            student_id: id(id_pos[0]),
            course_id: id(id_pos[1]),
            assignment_id: id(id_pos[2]),
            values,
        });
    }
    Ok(out)
}

/// Writes a dataset in the canonical column order.
pub fn write_csv(path: impl AsRef<Path>, dataset: &Dataset) -> Result<(), DataError> {
    let path = path.as_ref();
    let io_err = |source| DataError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut file = File::create(path).map_err(io_err)?;
    file.write_all(to_csv_string(dataset).as_bytes()).map_err(io_err)
}

pub(crate) fn to_csv_string(dataset: &Dataset) -> String {
    let mut s = CSV_HEADER.join(",");
    s.push('\n');
    for r in dataset.records() {
        let fields = [
            r.student_id.clone(),
            r.course_id.clone(),
            r.assignment_id.clone(),
            r.gase.to_string(),
            r.sdls.to_string(),
            r.apss.to_string(),
            r.aps.to_string(),
            r.clicks_assignment.to_string(),
            r.interval_days.to_string(),
            r.clicks_activities.to_string(),
            r.delay.to_string(),
        ];
        s.push_str(&fields.join(","));
        s.push('\n');
    }
    s
}
