use std::path::PathBuf;
use std::time::Duration;

use mibids_core::snmp::{deltas, load_fixture, poll, write_delta_csv, FixtureCell, PollConfig, SnmpError, StubAgent};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn quick(agent: String, count: usize) -> PollConfig {
    PollConfig {
        agent,
        interval: Duration::from_millis(10),
        count,
        timeout: Duration::from_millis(300),
        retries: 1,
        max_failures: 3,
        ..PollConfig::default()
    }
}

#[test]
fn stub_fixture_reproduces_expected_deltas() {
    let rows = load_fixture(fixture("stub_agent.csv")).unwrap();
    assert_eq!(rows.len(), 12);
    let agent = StubAgent::bind("127.0.0.1:0", rows).unwrap().spawn().unwrap();
    let samples: Vec<_> = poll(quick(agent.addr().to_string(), 12))
        .unwrap()
        .collect::<Result<_, _>>()
        .unwrap();
    assert_eq!(samples.len(), 12);
    let rows = deltas(&samples);
    assert_eq!(rows.len(), 11);
    let mut out = Vec::new();
    write_delta_csv(&rows, &mut out).unwrap();
    let want = std::fs::read(fixture("stub_agent_deltas.csv")).unwrap();
    assert_eq!(String::from_utf8(out).unwrap(), String::from_utf8(want).unwrap());
    assert_eq!(agent.stop(), 12);
}

fn row(v: u32) -> [FixtureCell; 8] {
    [FixtureCell::Counter(v); 8]
}

#[test]
fn incomplete_responses_are_discarded() {
    let mut partial = row(20);
    partial[3] = FixtureCell::Omit;
    let agent = StubAgent::bind("127.0.0.1:0", vec![row(10), partial, row(30)])
        .unwrap()
        .spawn()
        .unwrap();
    let samples: Vec<_> = poll(quick(agent.addr().to_string(), 3))
        .unwrap()
        .collect::<Result<_, _>>()
        .unwrap();
    assert_eq!(samples.iter().map(|s| s.values[0]).collect::<Vec<_>>(), vec![10, 30]);
}

#[test]
fn missing_nucast_reads_as_zero() {
    let mut r = row(5);
    r[4] = FixtureCell::NoSuchInstance;
    r[7] = FixtureCell::NoSuchObject;
    let agent = StubAgent::bind("127.0.0.1:0", vec![r]).unwrap().spawn().unwrap();
    let s = poll(quick(agent.addr().to_string(), 1)).unwrap().next().unwrap().unwrap();
    assert_eq!(s.values, [5, 5, 5, 5, 0, 5, 5, 0]);
    assert_eq!(s.substituted, vec!["ifInNUcastPkts", "ifOutNUcastPkts"]);
}

#[test]
fn stale_ids_are_ignored_and_retries_recover() {
    let agent = StubAgent::bind("127.0.0.1:0", vec![row(1), row(2)])
        .unwrap()
        .send_stale(true)
        .ignore_first(1)
        .spawn()
        .unwrap();
    let samples: Vec<_> = poll(quick(agent.addr().to_string(), 2))
        .unwrap()
        .collect::<Result<_, _>>()
        .unwrap();
    assert_eq!(samples.iter().map(|s| s.values[0]).collect::<Vec<_>>(), vec![1, 2]);
}

#[test]
fn wrong_if_index_yields_no_samples() {
    let agent = StubAgent::bind("127.0.0.1:0", vec![row(1)]).unwrap().if_index(9).spawn().unwrap();
    let got: Vec<_> = poll(quick(agent.addr().to_string(), 1)).unwrap().collect();
    assert!(got.is_empty());
}

#[test]
fn silent_agent_ends_with_transport_error() {
    // Bound but never served: every request times out.
    let silent = std::net::UdpSocket::bind("127.0.0.1:0").unwrap();
    let mut cfg = quick(silent.local_addr().unwrap().to_string(), 10);
    cfg.timeout = Duration::from_millis(40);
    cfg.retries = 0;
    let results: Vec<_> = poll(cfg).unwrap().collect();
    assert_eq!(results.len(), 1);
    assert!(matches!(results[0], Err(SnmpError::Transport(_))));
}
