use std::io::Write;

use dynfleet::data::{
    default_start, generate_synthetic, ingest_reader, ingest_trips, synthetic_network, write_trips, IntensityProfile,
};
use dynfleet::Error;

#[test]
fn synthetic_trips_round_trip() {
    let net = synthetic_network(6, 4);
    let records = generate_synthetic(6, 48, &IntensityProfile::default(), default_start(), 4).unwrap();
    assert_eq!(records.len(), 48 * 30);
    let mut csv = Vec::new();
    write_trips(&records, &mut csv).unwrap();
    let ing = ingest_reader(&csv[..], "mem", &net).unwrap();
    assert_eq!(ing.snapshots.len(), 48);
    assert_eq!(ing.dropped, 0);
    assert!(ing.snapshots.iter().all(|s| s.counts.len() == 30));
    let total: f64 = records.iter().map(|r| r.count).sum();
    let back: f64 = ing.snapshots.iter().map(|s| s.total_passengers()).sum();
    assert_eq!(total, back);
    let first = &ing.snapshots[0];
    let want: f64 = records.iter().filter(|r| r.hour == default_start()).map(|r| r.count).sum();
    assert_eq!(first.total_passengers(), want);
}

#[test]
fn reads_from_disk_and_reports_bad_lines() {
    let net = synthetic_network(3, 1);
    let mut file = tempfile::NamedTempFile::new().unwrap();
    writeln!(file, "hour_utc,origin,destination,count").unwrap();
    writeln!(file, "2024-12-02T07:15:00Z,S1,S2,3").unwrap();
    writeln!(file, "2024-12-02T07:40:00Z,S1,S2,2").unwrap();
    writeln!(file, "2024-12-02T08:00:00Z,S9,S2,2").unwrap();
    let ing = ingest_trips(file.path(), &net).unwrap();
    assert_eq!(ing.snapshots.len(), 1);
    assert_eq!(ing.dropped, 1);
    assert_eq!(ing.snapshots[0].total_passengers(), 5.0);

    writeln!(file, "2024-12-02T09:00:00Z,S1,S3,-1").unwrap();
    match ingest_trips(file.path(), &net) {
        Err(Error::Parse { line, .. }) => assert_eq!(line, 5),
        other => panic!("{other:?}"),
    }
}
