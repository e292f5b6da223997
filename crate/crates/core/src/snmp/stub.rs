use std::io::{self, Read};
use std::net::{SocketAddr, UdpSocket};
use std::path::Path;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread::{self, JoinHandle};
use std::time::Duration;

use log::debug;

use super::{decode_get, encode_response, interface_variable, Value, VarBind};
use crate::error::{Error, Result};
use crate::features::INTERFACE_VARIABLES;

/// What the stub agent returns for one variable in one fixture row.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FixtureCell {
    Counter(u32),
    /// Leave the varbind out of the response.
    Omit,
    NoSuchInstance,
    NoSuchObject,
}

/// Reads a fixture CSV whose header names the eight Interface-group
/// variables (any order). Cells are integers, empty (omitted from the
/// response), `noSuchInstance` or `noSuchObject`.
pub fn parse_fixture<R: Read>(reader: R) -> Result<Vec<[FixtureCell; 8]>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let mut columns = [0usize; 8];
    for (slot, name) in columns.iter_mut().zip(INTERFACE_VARIABLES) {
        *slot = header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Header(format!("fixture lacks column {name:?}")))?;
    }
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let mut row = [FixtureCell::Omit; 8];
        for (k, &col) in columns.iter().enumerate() {
            let cell = rec.get(col).unwrap_or("");
            row[k] = match cell {
                "" => FixtureCell::Omit,
                "noSuchInstance" => FixtureCell::NoSuchInstance,
                "noSuchObject" => FixtureCell::NoSuchObject,
                s => FixtureCell::Counter(s.parse().map_err(|_| Error::Cell {
                    row: i + 1,
                    column: INTERFACE_VARIABLES[k].to_string(),
                    reason: format!("{s:?} is not a Counter32"),
                })?),
            };
        }
        rows.push(row);
    }
    Ok(rows)
}

pub fn load_fixture(path: impl AsRef<Path>) -> Result<Vec<[FixtureCell; 8]>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_fixture(file)
}

/// Loopback SNMPv2c agent that answers successive GET requests with
/// successive fixture rows, then goes silent.
pub struct StubAgent {
    socket: UdpSocket,
    rows: Vec<[FixtureCell; 8]>,
    community: Vec<u8>,
    if_index: u32,
    ignore_first: usize,
    send_stale: bool,
}

impl StubAgent {
    pub fn bind(addr: &str, rows: Vec<[FixtureCell; 8]>) -> io::Result<Self> {
        let socket = UdpSocket::bind(addr)?;
        socket.set_read_timeout(Some(Duration::from_millis(20)))?;
        Ok(StubAgent {
            socket,
            rows,
            community: b"public".to_vec(),
            if_index: 1,
            ignore_first: 0,
            send_stale: false,
        })
    }

    pub fn community(mut self, community: &str) -> Self {
        self.community = community.as_bytes().to_vec();
        self
    }

    pub fn if_index(mut self, if_index: u32) -> Self {
        self.if_index = if_index;
        self
    }

    /// Drop the first `n` requests unanswered.
    pub fn ignore_first(mut self, n: usize) -> Self {
        self.ignore_first = n;
        self
    }

    /// Precede every reply with one carrying the wrong request-id.
    pub fn send_stale(mut self, on: bool) -> Self {
        self.send_stale = on;
        self
    }

    pub fn local_addr(&self) -> io::Result<SocketAddr> {
        self.socket.local_addr()
    }

    /// Serves until `stop` is set; returns the number of rows served.
    pub fn serve(&self, stop: &AtomicBool) -> usize {
        let mut buf = vec![0u8; 65_535];
        let mut seen = 0usize;
        let mut served = 0usize;
        while !stop.load(Ordering::Relaxed) {
            let (n, peer) = match self.socket.recv_from(&mut buf) {
                Ok(x) => x,
                Err(_) => continue,
            };
            let (community, id, oids) = match decode_get(&buf[..n]) {
                Ok(x) => x,
                Err(e) => {
                    debug!("stub agent: ignoring datagram: {e}");
                    continue;
                }
            };
            seen += 1;
            if community != self.community || seen <= self.ignore_first || served >= self.rows.len() {
                continue;
            }
            let row = &self.rows[served];
            let varbinds = oids
                .into_iter()
                .filter_map(|oid| {
                    let value = match interface_variable(&oid, self.if_index) {
                        Some(name) => {
                            let i = INTERFACE_VARIABLES.iter().position(|v| *v == name).unwrap();
                            match row[i] {
                                FixtureCell::Counter(c) => Value::Counter32(c),
                                FixtureCell::Omit => return None,
                                FixtureCell::NoSuchInstance => Value::NoSuchInstance,
                                FixtureCell::NoSuchObject => Value::NoSuchObject,
                            }
                        }
                        None => Value::NoSuchObject,
                    };
                    Some(VarBind { oid, value })
                })
                .collect::<Vec<_>>();
            if self.send_stale {
                let stale = encode_response(&self.community, id.wrapping_sub(1000), 0, 0, varbinds.clone());
                let _ = self.socket.send_to(&stale, peer);
            }
            let reply = encode_response(&self.community, id, 0, 0, varbinds);
            if self.socket.send_to(&reply, peer).is_ok() {
                served += 1;
            }
        }
        served
    }

    /// Runs the agent on a background thread.
    pub fn spawn(self) -> io::Result<StubHandle> {
        let addr = self.local_addr()?;
        let stop = Arc::new(AtomicBool::new(false));
        let flag = Arc::clone(&stop);
        let thread = thread::spawn(move || self.serve(&flag));
        Ok(StubHandle {
            addr,
            stop,
            thread: Some(thread),
        })
    }
}

pub struct StubHandle {
    addr: SocketAddr,
    stop: Arc<AtomicBool>,
    thread: Option<JoinHandle<usize>>,
}

impl StubHandle {
    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    /// Stops the agent and returns how many rows it served.
    pub fn stop(mut self) -> usize {
        self.shutdown()
    }

    fn shutdown(&mut self) -> usize {
        self.stop.store(true, Ordering::Relaxed);
        self.thread.take().map(|t| t.join().unwrap_or(0)).unwrap_or(0)
    }
}

impl Drop for StubHandle {
    fn drop(&mut self) {
        self.shutdown();
    }
}
