use std::io::{self, Write};
use std::net::{SocketAddr, ToSocketAddrs, UdpSocket};
use std::thread;
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use log::{debug, warn};

use super::{encode_get, error_status_name, interface_oids, interface_variable, Message, Oid, SnmpError, Value, PDU_RESPONSE};
use crate::error::Result;
use crate::features::INTERFACE_VARIABLES;

pub const DEFAULT_PORT: u16 = 161;

/// Variables an agent may legitimately not implement; they read as zero.
const OPTIONAL: [&str; 2] = ["ifInNUcastPkts", "ifOutNUcastPkts"];

#[derive(Debug, Clone)]
pub struct PollConfig {
    /// `host` or `host:port`; the port defaults to 161.
    pub agent: String,
    pub community: String,
    pub if_index: u32,
    pub interval: Duration,
    /// Number of ticks to attempt.
    pub count: usize,
    pub timeout: Duration,
    /// Extra attempts per tick after the first times out.
    pub retries: u32,
    /// Consecutive failed ticks tolerated before the poll aborts.
    pub max_failures: u32,
}

impl Default for PollConfig {
    fn default() -> Self {
        PollConfig {
            agent: "127.0.0.1".into(),
            community: "public".into(),
            if_index: 1,
            interval: Duration::from_secs(5),
            count: 12,
            timeout: Duration::from_secs(1),
            retries: 1,
            max_failures: 5,
        }
    }
}

/// One complete reading of the eight counters, in Interface-group order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CounterSample {
    /// Milliseconds since the Unix epoch.
    pub timestamp_ms: u64,
    pub values: [u32; 8],
    /// Variables the agent lacked that were read as 0.
    pub substituted: Vec<&'static str>,
}

pub fn resolve_agent(agent: &str) -> std::result::Result<SocketAddr, SnmpError> {
    let resolved = agent
        .to_socket_addrs()
        .or_else(|_| (agent.trim_start_matches('[').trim_end_matches(']'), DEFAULT_PORT).to_socket_addrs())
        .map_err(|e| SnmpError::Transport(format!("cannot resolve {agent:?}: {e}")))?;
    resolved
        .into_iter()
        .next()
        .ok_or_else(|| SnmpError::Transport(format!("{agent:?} resolved to no address")))
}

/// Opens a UDP socket to the agent and returns the sample iterator.
pub fn poll(cfg: PollConfig) -> std::result::Result<Poller, SnmpError> {
    if cfg.timeout.is_zero() {
        return Err(SnmpError::Transport("timeout must be positive".into()));
    }
    let addr = resolve_agent(&cfg.agent)?;
    let local: SocketAddr = if addr.is_ipv4() {
        "0.0.0.0:0".parse().unwrap()
    } else {
        "[::]:0".parse().unwrap()
    };
    let transport = |e: io::Error| SnmpError::Transport(e.to_string());
    let socket = UdpSocket::bind(local).map_err(transport)?;
    socket.connect(addr).map_err(transport)?;
    let seed = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.subsec_nanos()).unwrap_or(1);
    Ok(Poller {
        oids: interface_oids(cfg.if_index),
        socket,
        start: Instant::now(),
        tick: 0,
        failures: 0,
        done: false,
        next_id: (seed & 0x3FFF_FFFF) as i32,
        cfg,
    })
}

enum Attempt {
    Reply(Message),
    Failed(String),
}

/// Iterator over samples, one per tick. Ticks that fail are logged and
/// skipped; `max_failures` consecutive failures yield a transport error
/// and end the iteration.
pub struct Poller {
    cfg: PollConfig,
    oids: Vec<Oid>,
    socket: UdpSocket,
    start: Instant,
    tick: usize,
    failures: u32,
    done: bool,
    next_id: i32,
}

impl Poller {
    fn request(&mut self) -> Attempt {
        let mut last = String::from("no attempt");
        for attempt in 0..=self.cfg.retries {
            let id = self.next_id;
            self.next_id = self.next_id.wrapping_add(1) & 0x7FFF_FFFF;
            let packet = match encode_get(&self.oids, self.cfg.community.as_bytes(), id) {
                Ok(p) => p,
                Err(e) => return Attempt::Failed(e.to_string()),
            };
            if let Err(e) = self.socket.send(&packet) {
                last = format!("send: {e}");
                continue;
            }
            match self.await_reply(id) {
                Ok(msg) => return Attempt::Reply(msg),
                Err(e) => {
                    debug!("attempt {} for request {id}: {e}", attempt + 1);
                    last = e;
                }
            }
        }
        Attempt::Failed(last)
    }

    fn await_reply(&self, id: i32) -> std::result::Result<Message, String> {
        let deadline = Instant::now() + self.cfg.timeout;
        let mut buf = vec![0u8; 65_535];
        loop {
            let left = deadline.saturating_duration_since(Instant::now());
            if left.is_zero() {
                return Err("timed out".into());
            }
            self.socket.set_read_timeout(Some(left)).map_err(|e| e.to_string())?;
            let n = match self.socket.recv(&mut buf) {
                Ok(n) => n,
                Err(e) if matches!(e.kind(), io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut) => {
                    return Err("timed out".into())
                }
                Err(e) => {
                    // ICMP errors surface here; give the agent the rest of
                    // the timeout rather than spinning.
                    thread::sleep(left.min(Duration::from_millis(50)));
                    return Err(e.to_string());
                }
            };
            match Message::decode(&buf[..n]) {
                Ok(msg) if msg.pdu.tag == PDU_RESPONSE && msg.pdu.request_id == id => return Ok(msg),
                Ok(msg) => debug!("discarding response with request-id {}", msg.pdu.request_id),
                Err(e) => debug!("discarding undecodable datagram: {e}"),
            }
        }
    }

    fn to_sample(&self, msg: Message) -> std::result::Result<CounterSample, String> {
        if msg.pdu.error_status != 0 {
            return Err(format!("agent reported {}", error_status_name(msg.pdu.error_status)));
        }
        let mut found: [Option<&Value>; 8] = [None; 8];
        for vb in &msg.pdu.varbinds {
            if let Some(name) = interface_variable(&vb.oid, self.cfg.if_index) {
                let i = INTERFACE_VARIABLES.iter().position(|v| *v == name).unwrap();
                found[i] = Some(&vb.value);
            }
        }
        let mut values = [0u32; 8];
        let mut substituted = Vec::new();
        for (i, name) in INTERFACE_VARIABLES.iter().enumerate() {
            match found[i] {
                Some(v) => match v.as_counter() {
                    Some(c) => values[i] = c,
                    None if OPTIONAL.contains(name)
                        && matches!(v, Value::NoSuchInstance | Value::NoSuchObject) =>
                    {
                        substituted.push(*name)
                    }
                    None => return Err(format!("{name} returned {v:?}")),
                },
                None => return Err(format!("{name} missing from response")),
            }
        }
        let timestamp_ms = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_millis() as u64)
            .unwrap_or(0);
        Ok(CounterSample {
            timestamp_ms,
            values,
            substituted,
        })
    }
}

impl Iterator for Poller {
    type Item = std::result::Result<CounterSample, SnmpError>;

    fn next(&mut self) -> Option<Self::Item> {
        while !self.done && self.tick < self.cfg.count {
            let due = self.start + self.cfg.interval * self.tick as u32;
            let now = Instant::now();
            if due > now {
                thread::sleep(due - now);
            }
            let tick = self.tick;
            self.tick += 1;
            match self.request() {
                Attempt::Reply(msg) => {
                    self.failures = 0;
                    match self.to_sample(msg) {
                        Ok(s) => {
                            for name in &s.substituted {
                                debug!("tick {tick}: {name} not implemented by agent, read as 0");
                            }
                            return Some(Ok(s));
                        }
                        Err(why) => warn!("tick {tick}: sample discarded: {why}"),
                    }
                }
                Attempt::Failed(why) => {
                    self.failures += 1;
                    warn!("tick {tick}: no response ({why}); gap in series");
                    if self.failures >= self.cfg.max_failures {
                        self.done = true;
                        return Some(Err(SnmpError::Transport(format!(
                            "{} consecutive polls failed, last: {why}",
                            self.failures
                        ))));
                    }
                }
            }
        }
        None
    }
}

/// Counter32 increment from `old` to `new`, assuming at most one wrap:
/// (2^32 - old) + new when new < old, i.e. subtraction mod 2^32.
pub fn counter_delta(old: u32, new: u32) -> u32 {
    new.wrapping_sub(old)
}

/// Per-variable deltas between consecutive samples; n samples give
/// n - 1 rows.
pub fn deltas(samples: &[CounterSample]) -> Vec<[u32; 8]> {
    samples
        .windows(2)
        .map(|w| {
            let mut row = [0u32; 8];
            for (i, slot) in row.iter_mut().enumerate() {
                *slot = counter_delta(w[0].values[i], w[1].values[i]);
            }
            row
        })
        .collect()
}

/// Writes delta rows as an unlabeled CSV with the Interface-group header.
pub fn write_delta_csv<W: Write>(rows: &[[u32; 8]], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(INTERFACE_VARIABLES)?;
    for row in rows {
        w.write_record(row.iter().map(u32::to_string))?;
    }
    w.flush().map_err(|e| crate::error::Error::io("<csv output>", e))?;
    Ok(())
}
