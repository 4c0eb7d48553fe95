use hawkscan::io::{read_events, write_events_to};
use hawkscan::networks::paper_pre;
use hawkscan::simulate::{simulate, SimConfig};
use hawkscan::EventStream;

#[test]
fn hundred_thousand_events_round_trip_byte_identically() {
    let sim = simulate(&paper_pre(), &SimConfig::new(12_000.0, 51)).unwrap();
    assert!(sim.len() >= 100_000, "{}", sim.len());
    let events = sim.events()[..100_000].to_vec();
    let horizon = events.last().unwrap().t;
    let stream = EventStream::new(events, horizon).unwrap();

    let mut first = Vec::new();
    write_events_to(&stream, &mut first).unwrap();
    let parsed = read_events(first.as_slice(), Some(horizon)).unwrap();
    assert_eq!(parsed, stream);
    let mut second = Vec::new();
    write_events_to(&parsed, &mut second).unwrap();
    assert_eq!(first, second);
}

#[test]
fn same_seed_writes_identical_files() {
    let cfg = SimConfig::new(500.0, 52).with_stream(7);
    let write = || {
        let mut out = Vec::new();
        write_events_to(&simulate(&paper_pre(), &cfg).unwrap(), &mut out).unwrap();
        out
    };
    assert_eq!(write(), write());
}
