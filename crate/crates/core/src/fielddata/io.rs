//! Long-format CSV reading and writing.

use std::collections::HashMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{DataSource, FieldDataset};
use crate::schema::{column, DetectionRecord, SubjectObservation, SurroundingObservation};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AngleUnit {
    #[default]
    Rad,
    Deg,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ParseOptions {
    /// Unit of the longitude/latitude columns.
    #[serde(default)]
    pub position_unit: AngleUnit,
    #[serde(default)]
    pub source: DataSource,
}

struct Columns {
    canonical: [usize; 16],
    extra: Vec<(usize, String)>,
}

fn locate(headers: &csv::StringRecord) -> Result<Columns> {
    let pos: HashMap<&str, usize> = headers.iter().enumerate().map(|(i, h)| (h.trim(), i)).collect();
    let mut canonical = [0; 16];
    for (slot, name) in canonical.iter_mut().zip(column::CANONICAL) {
        *slot = *pos.get(name).ok_or_else(|| Error::MissingColumn(name.to_string()))?;
    }
    let extra = headers
        .iter()
        .enumerate()
        .filter(|(_, h)| !column::CANONICAL.contains(&h.trim()))
        .map(|(i, h)| (i, h.trim().to_string()))
        .collect();
    Ok(Columns { canonical, extra })
}

struct Row<'a> {
    rec: &'a csv::StringRecord,
    cols: &'a Columns,
    line: u64,
}

impl Row<'_> {
    fn raw(&self, k: usize) -> &str {
        self.rec.get(self.cols.canonical[k]).unwrap_or("").trim()
    }

    fn num(&self, k: usize) -> Result<f64> {
        let s = self.raw(k);
        s.parse::<f64>().map_err(|_| Error::Row {
            line: self.line,
            message: format!("`{}` is not a number: {s:?}", column::CANONICAL[k]),
        })
    }

    fn lane(&self, k: usize) -> Result<u32> {
        let s = self.raw(k);
        s.parse::<u32>().ok().filter(|l| *l >= 1).ok_or_else(|| Error::Row {
            line: self.line,
            message: format!("`{}` is not a lane number: {s:?}", column::CANONICAL[k]),
        })
    }

    fn extras(&self) -> Vec<String> {
        self.cols
            .extra
            .iter()
            .map(|(i, _)| self.rec.get(*i).unwrap_or("").to_string())
            .collect()
    }
}

/// Parse long-format detection data. Consecutive rows sharing a timestamp
/// form one record; a row with an empty vehicle id carries no surrounding
/// vehicle.
pub fn parse_field_data<R: Read>(input: R, opts: &ParseOptions) -> Result<FieldDataset> {
    let mut reader = csv::ReaderBuilder::new().flexible(true).from_reader(input);
    let cols = locate(reader.headers()?)?;
    let to_rad = match opts.position_unit {
        AngleUnit::Rad => 1.0,
        AngleUnit::Deg => std::f64::consts::PI / 180.0,
    };
    let mut records: Vec<DetectionRecord> = Vec::new();
    for rec in reader.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let row = Row { rec: &rec, cols: &cols, line };
        let timestamp = row.num(0)?;
        let same = records.last().is_some_and(|r| r.timestamp == timestamp);
        if let Some(prev) = records.last() {
            if timestamp < prev.timestamp {
                return Err(Error::Row {
                    line,
                    message: format!("timestamp {timestamp} goes backwards"),
                });
            }
        }
        if !same {
            records.push(DetectionRecord {
                timestamp,
                road_name: row.raw(1).to_string(),
                speed_limit_kmh: row.num(2)?,
                subject: SubjectObservation {
                    speed_kmh: row.num(3)?,
                    yaw_rate: row.num(4)?,
                    longitude: row.num(5)? * to_rad,
                    latitude: row.num(6)? * to_rad,
                    acceleration: row.num(7)?,
                    lane_id: row.lane(8)?,
                    lane_distance: row.num(9)?,
                },
                surrounding: Vec::new(),
                extra: Vec::new(),
            });
        }
        let current = records.last_mut().expect("pushed above");
        if row.raw(10).is_empty() {
            current.extra = row.extras();
        } else {
            current.surrounding.push(SurroundingObservation {
                vehicle_id: row.raw(10).to_string(),
                lane_id: row.lane(11)?,
                rel_longitudinal: row.num(12)?,
                rel_lateral: row.num(13)?,
                speed_kmh: row.num(14)?,
                heading_deg: row.num(15)?,
                extra: row.extras(),
            });
        }
    }
    let mut d = FieldDataset::new(records, opts.source);
    d.meta.extra_columns = cols.extra.into_iter().map(|(_, n)| n).collect();
    Ok(d)
}

pub fn read_field_data(path: &Path, opts: &ParseOptions) -> Result<FieldDataset> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_field_data(std::io::BufReader::new(f), opts)
}

/// Write `d` in the canonical long format; longitude/latitude in rad.
pub fn export_csv<W: Write>(d: &FieldDataset, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<&str> = column::CANONICAL.to_vec();
    header.extend(d.meta.extra_columns.iter().map(String::as_str));
    w.write_record(&header)?;
    let n_extra = d.meta.extra_columns.len();
    for r in &d.records {
        let s = &r.subject;
        let base = [
            r.timestamp.to_string(),
            r.road_name.clone(),
            r.speed_limit_kmh.to_string(),
            s.speed_kmh.to_string(),
            s.yaw_rate.to_string(),
            s.longitude.to_string(),
            s.latitude.to_string(),
            s.acceleration.to_string(),
            s.lane_id.to_string(),
            s.lane_distance.to_string(),
        ];
        let pad = |extra: &[String]| {
            let mut v = extra.to_vec();
            v.resize(n_extra, String::new());
            v
        };
        if r.surrounding.is_empty() {
            let mut row: Vec<String> = base.to_vec();
            row.extend(std::iter::repeat_n(String::new(), 6));
            row.extend(pad(&r.extra));
            w.write_record(&row)?;
        }
        for o in &r.surrounding {
            let mut row: Vec<String> = base.to_vec();
            row.extend([
                o.vehicle_id.clone(),
                o.lane_id.to_string(),
                o.rel_longitudinal.to_string(),
                o.rel_lateral.to_string(),
                o.speed_kmh.to_string(),
                o.heading_deg.to_string(),
            ]);
            row.extend(pad(&o.extra));
            w.write_record(&row)?;
        }
    }
    w.flush().map_err(|e| Error::io("<detection csv>", e))?;
    Ok(())
}

pub fn write_field_data(d: &FieldDataset, path: &Path) -> Result<()> {
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    export_csv(d, std::io::BufWriter::new(f))
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEADER: &str = "Timestamp,Road name,Speed limit,Speed,Yaw rate,Longitude,Latitude,Acceleration,Lane ID,Lane distance,Vehicle ID,Surrounding vehicle's Lane ID,Relative longitudinal position,Relative lateral position,Absolute velocity,Vehicle heading";

    #[test]
    fn header_only_gives_empty_dataset() {
        let d = parse_field_data(format!("{HEADER}\n").as_bytes(), &ParseOptions::default()).unwrap();
        assert!(d.is_empty());
    }

    #[test]
    fn negative_lane_distance_keeps_sign() {
        let text = format!("{HEADER}\n0.0,R1,60,50,0,0,0,0,1,-0.3,,,,,,\n");
        let d = parse_field_data(text.as_bytes(), &ParseOptions::default()).unwrap();
        assert_eq!(d.records[0].subject.lane_id, 1);
        assert_eq!(d.records[0].subject.lane_distance, -0.3);
        assert!(d.records[0].surrounding.is_empty());
    }

    #[test]
    fn rows_group_by_timestamp() {
        let text = format!(
            "{HEADER}\n0.0,R1,60,50,0,0,0,0,1,0,7,2,30,3.5,55,0\n0.0,R1,60,50,0,0,0,0,1,0,9,1,-20,0,45,0\n0.1,R1,60,50,0,0,0,0,1,0,,,,,,\n"
        );
        let d = parse_field_data(text.as_bytes(), &ParseOptions::default()).unwrap();
        assert_eq!(d.len(), 2);
        assert_eq!(d.records[0].surrounding.len(), 2);
        assert_eq!(d.records[0].surrounding[1].vehicle_id, "9");
        assert_eq!(d.records[0].surrounding[1].rel_longitudinal, -20.0);
    }

    #[test]
    fn missing_column_is_named() {
        let header = HEADER.replace(",Vehicle heading", "");
        let err = parse_field_data(format!("{header}\n").as_bytes(), &ParseOptions::default()).unwrap_err();
        assert!(matches!(err, Error::MissingColumn(c) if c == "Vehicle heading"));
    }

    #[test]
    fn bad_number_reports_line() {
        let text = format!("{HEADER}\n0.0,R1,60,fast,0,0,0,0,1,0,,,,,,\n");
        let err = parse_field_data(text.as_bytes(), &ParseOptions::default()).unwrap_err();
        assert!(matches!(err, Error::Row { line: 2, .. }), "{err}");
    }

    #[test]
    fn degrees_are_converted() {
        let text = format!("{HEADER}\n0.0,R1,60,50,0,180,90,0,1,0,,,,,,\n");
        let opts = ParseOptions {
            position_unit: AngleUnit::Deg,
            ..ParseOptions::default()
        };
        let d = parse_field_data(text.as_bytes(), &opts).unwrap();
        assert!((d.records[0].subject.longitude - std::f64::consts::PI).abs() < 1e-15);
    }

    #[test]
    fn unknown_columns_survive_round_trip() {
        let text = format!(
            "{HEADER},Weather\n0.0,R1,60,50,0,0,0,0,1,0,7,2,30,3.5,55,0,rain\n0.1,R1,60,50,0,0,0,0,1,0,,,,,,,dry\n"
        );
        let d = parse_field_data(text.as_bytes(), &ParseOptions::default()).unwrap();
        assert_eq!(d.meta.extra_columns, ["Weather"]);
        assert_eq!(d.records[0].surrounding[0].extra, ["rain"]);
        assert_eq!(d.records[1].extra, ["dry"]);
        let mut buf = Vec::new();
        export_csv(&d, &mut buf).unwrap();
        let back = parse_field_data(buf.as_slice(), &ParseOptions::default()).unwrap();
        assert_eq!(back, d);
    }
}
