use std::path::Path;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::timeseries::{Event, EventList, Recording};

pub fn read_events_csv(path: &Path) -> Result<EventList> {
    let mut rdr = csv::Reader::from_path(path)?;
    let events = rdr.deserialize::<Event>().collect::<std::result::Result<Vec<_>, _>>()?;
    EventList::new(events)
}

pub fn write_events_csv(path: &Path, events: &EventList) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for e in events.events() {
        w.serialize(e)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads one column per channel. A leading `time_s` column is optional;
/// without one, `fs` must be given. With one and no `fs`, the rate is taken
/// from the mean sample spacing.
pub fn read_recording_csv(path: &Path, fs: Option<f64>) -> Result<Recording> {
    let mut rdr = csv::Reader::from_path(path)?;
    let header: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let has_time = header.first().is_some_and(|h| h == "time_s");
    let channels: Vec<String> = header.iter().skip(has_time as usize).cloned().collect();
    if channels.is_empty() {
        return Err(Error::Malformed("CSV has no channel columns".into()));
    }
    let mut times = Vec::new();
    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); channels.len()];
    for (line, row) in rdr.records().enumerate() {
        let row = row?;
        let parse = |s: &str| {
            s.trim().parse::<f64>().map_err(|_| Error::Malformed(format!("row {}: `{s}` is not a number", line + 2)))
        };
        let mut fields = row.iter();
        if has_time {
            times.push(parse(fields.next().unwrap_or(""))?);
        }
        for col in columns.iter_mut() {
            col.push(parse(fields.next().ok_or_else(|| Error::Malformed(format!("row {} is short", line + 2)))?)?);
        }
    }
    let n = columns[0].len();
    let fs = match (fs, has_time) {
        (Some(fs), _) => fs,
        (None, true) if n >= 2 => (n - 1) as f64 / (times[n - 1] - times[0]),
        _ => return Err(Error::invalid("sampling rate unknown: pass fs or include a time_s column")),
    };
    let data = Array2::from_shape_vec((channels.len(), n), columns.concat()).expect("rectangular");
    Recording::new(fs, channels, data)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn events_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("ev.csv");
        let ev = EventList::from_times(&[1.5, 7.25], "stim").unwrap();
        write_events_csv(&p, &ev).unwrap();
        assert!(std::fs::read_to_string(&p).unwrap().starts_with("time_s,label\n1.5,stim\n"));
        assert_eq!(read_events_csv(&p).unwrap(), ev);
    }

    #[test]
    fn recording_with_time_column() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.csv");
        std::fs::write(&p, "time_s,Cz,Pz\n0.0,1,2\n0.004,3,4\n0.008,5,6\n").unwrap();
        let r = read_recording_csv(&p, None).unwrap();
        assert!((r.fs() - 250.0).abs() < 1e-9);
        assert_eq!(r.channels(), ["Cz", "Pz"]);
        assert_eq!(r.data().row(1).to_vec(), vec![2.0, 4.0, 6.0]);
    }

    #[test]
    fn recording_without_time_needs_fs() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.csv");
        std::fs::write(&p, "Cz\n1\n2\n").unwrap();
        assert!(read_recording_csv(&p, None).is_err());
        assert_eq!(read_recording_csv(&p, Some(100.0)).unwrap().n_samples(), 2);
        std::fs::write(&p, "Cz\n1\nx\n").unwrap();
        assert!(matches!(read_recording_csv(&p, Some(100.0)), Err(Error::Malformed(_))));
    }
}
