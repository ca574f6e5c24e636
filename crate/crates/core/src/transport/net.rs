//! Serving lookups over UDP and TCP, and fetching bundles with failover.

use std::io::{BufReader, BufWriter};
use std::net::{SocketAddr, TcpListener, TcpStream, UdpSocket};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread::{self, JoinHandle};
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use thiserror::Error;

use super::wire::{read_frame, write_frame, Request, Response, Status, WireError, MAX_DATAGRAM};
use crate::certmodel::tlv::{Canonical, DecodeError};
use crate::mapserver::{DomainProofBundle, MapError, MapView, ViewHandle};
use crate::naming::DomainName;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransportMode {
    Datagram,
    Stream,
}

/// Answers one request against the current view.
pub fn serve(
    view: Option<&MapView>,
    suffix: &DomainName,
    request: &[u8],
    mode: TransportMode,
    now: u64,
) -> Vec<u8> {
    let resp = match Request::from_bytes(request) {
        Err(_) => Response::error(Status::BadRequest),
        Ok(req) => match (req.target(suffix), view) {
            (Err(_), _) => Response::error(Status::InvalidName),
            (Ok(_), None) => Response::error(Status::NoRevision),
            (Ok(name), Some(v)) => match v.lookup(&name) {
                Ok(b) => Response {
                    status: Status::Ok,
                    ttl: v.ttl(now),
                    payload: b.to_bytes(),
                },
                Err(MapError::InvalidQuery(_)) => Response::error(Status::InvalidName),
                Err(_) => Response::error(Status::BadRequest),
            },
        },
    };
    let bytes = resp.to_bytes();
    if mode == TransportMode::Datagram && bytes.len() > MAX_DATAGRAM {
        let t = Response {
            status: Status::Truncated,
            ttl: resp.ttl,
            payload: Vec::new(),
        };
        let out = t.to_bytes();
        assert!(out.len() <= MAX_DATAGRAM);
        return out;
    }
    bytes
}

pub type Clock = Arc<dyn Fn() -> u64 + Send + Sync>;

pub fn system_clock() -> Clock {
    Arc::new(|| {
        SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0)
    })
}

/// Where one map server listens.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ServerAddr {
    pub udp: SocketAddr,
    pub tcp: SocketAddr,
}

/// A running UDP and TCP listener pair. Stops on drop.
pub struct TransportServer {
    addr: ServerAddr,
    stop: Arc<AtomicBool>,
    threads: Vec<JoinHandle<()>>,
}

impl TransportServer {
    /// Binds both sockets on `bind` (port 0 picks free ports).
    pub fn start(
        bind: SocketAddr,
        views: ViewHandle,
        suffix: DomainName,
        clock: Clock,
    ) -> std::io::Result<TransportServer> {
        let udp = UdpSocket::bind(bind)?;
        udp.set_read_timeout(Some(Duration::from_millis(50)))?;
        let tcp = TcpListener::bind(bind)?;
        let addr = ServerAddr {
            udp: udp.local_addr()?,
            tcp: tcp.local_addr()?,
        };
        let stop = Arc::new(AtomicBool::new(false));

        let udp_thread = {
            let (stop, views, suffix, clock) =
                (stop.clone(), views.clone(), suffix.clone(), clock.clone());
            thread::spawn(move || {
                let mut buf = vec![0u8; MAX_DATAGRAM];
                while !stop.load(Ordering::Relaxed) {
                    let Ok((len, peer)) = udp.recv_from(&mut buf) else {
                        continue;
                    };
                    let view = views.current();
                    let out = serve(
                        view.as_deref(),
                        &suffix,
                        &buf[..len],
                        TransportMode::Datagram,
                        clock(),
                    );
                    let _ = udp.send_to(&out, peer);
                }
            })
        };

        let tcp_thread = {
            let stop = stop.clone();
            thread::spawn(move || {
                for conn in tcp.incoming() {
                    if stop.load(Ordering::Relaxed) {
                        break;
                    }
                    let Ok(conn) = conn else { continue };
                    let (views, suffix, clock) = (views.clone(), suffix.clone(), clock.clone());
                    thread::spawn(move || handle_stream(conn, &views, &suffix, &clock));
                }
            })
        };

        Ok(TransportServer {
            addr,
            stop,
            threads: vec![udp_thread, tcp_thread],
        })
    }

    pub fn addr(&self) -> ServerAddr {
        self.addr
    }

    pub fn shutdown(mut self) {
        self.stop_threads();
    }

    fn stop_threads(&mut self) {
        self.stop.store(true, Ordering::Relaxed);
        // Wake the blocking accept.
        let _ = TcpStream::connect(self.addr.tcp);
        for t in self.threads.drain(..) {
            let _ = t.join();
        }
    }
}

impl Drop for TransportServer {
    fn drop(&mut self) {
        self.stop_threads();
    }
}

fn handle_stream(conn: TcpStream, views: &ViewHandle, suffix: &DomainName, clock: &Clock) {
    let _ = conn.set_read_timeout(Some(Duration::from_secs(30)));
    let Ok(read_half) = conn.try_clone() else {
        return;
    };
    let mut r = BufReader::new(read_half);
    let mut w = BufWriter::new(conn);
    while let Ok(Some(req)) = read_frame(&mut r) {
        let view = views.current();
        let out = serve(
            view.as_deref(),
            suffix,
            &req,
            TransportMode::Stream,
            clock(),
        );
        if write_frame(&mut w, &out).is_err() {
            return;
        }
    }
}

#[derive(Debug, Error)]
pub enum FetchError {
    #[error("wire: {0}")]
    Wire(#[from] WireError),
    #[error("server answered {0:?}")]
    Status(Status),
    #[error("bundle: {0}")]
    Decode(#[from] DecodeError),
    #[error("no server answered")]
    Unreachable,
}

#[derive(Debug, Clone)]
pub struct FetchOptions {
    pub mode: TransportMode,
    pub timeout: Duration,
    /// Attempts per server before moving to the next one.
    pub attempts: usize,
}

impl Default for FetchOptions {
    fn default() -> Self {
        FetchOptions {
            mode: TransportMode::Datagram,
            timeout: Duration::from_millis(500),
            attempts: 2,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Fetched {
    pub bundle: DomainProofBundle,
    pub ttl: u32,
    /// Mode of the exchange that delivered the bundle.
    pub via: TransportMode,
}

fn exchange_udp(addr: SocketAddr, req: &[u8], timeout: Duration) -> Result<Response, WireError> {
    let local: SocketAddr = if addr.is_ipv4() {
        "0.0.0.0:0".parse().expect("literal")
    } else {
        "[::]:0".parse().expect("literal")
    };
    let sock = UdpSocket::bind(local)?;
    sock.set_read_timeout(Some(timeout))?;
    sock.connect(addr)?;
    sock.send(req)?;
    let mut buf = vec![0u8; MAX_DATAGRAM];
    let len = sock.recv(&mut buf)?;
    Response::from_bytes(&buf[..len])
}

fn exchange_tcp(addr: SocketAddr, req: &[u8], timeout: Duration) -> Result<Response, WireError> {
    let mut s = TcpStream::connect_timeout(&addr, timeout)?;
    s.set_read_timeout(Some(timeout))?;
    write_frame(&mut s, req)?;
    let bytes = read_frame(&mut s)?.ok_or(WireError::Truncated)?;
    Response::from_bytes(&bytes)
}

/// Fetches the bundle for `name` from one server, switching to stream mode
/// when the datagram answer is truncated.
pub fn fetch(
    addr: &ServerAddr,
    suffix: &DomainName,
    name: &DomainName,
    opts: &FetchOptions,
) -> Result<Fetched, FetchError> {
    let req = Request::for_name(name, suffix).to_bytes();
    let (resp, via) = match opts.mode {
        TransportMode::Datagram => {
            let r = exchange_udp(addr.udp, &req, opts.timeout)?;
            if r.status == Status::Truncated {
                (
                    exchange_tcp(addr.tcp, &req, opts.timeout)?,
                    TransportMode::Stream,
                )
            } else {
                (r, TransportMode::Datagram)
            }
        }
        TransportMode::Stream => (
            exchange_tcp(addr.tcp, &req, opts.timeout)?,
            TransportMode::Stream,
        ),
    };
    if resp.status != Status::Ok {
        return Err(FetchError::Status(resp.status));
    }
    Ok(Fetched {
        bundle: DomainProofBundle::from_bytes(&resp.payload)?,
        ttl: resp.ttl,
        via,
    })
}

/// Tries each server in order, retrying transport failures, and returns the
/// first bundle obtained. Error answers from a server are not retried.
pub fn fetch_with_failover(
    servers: &[(ServerAddr, DomainName)],
    name: &DomainName,
    opts: &FetchOptions,
) -> Result<Fetched, FetchError> {
    let mut last = FetchError::Unreachable;
    for (addr, suffix) in servers {
        for _ in 0..opts.attempts.max(1) {
            match fetch(addr, suffix, name, opts) {
                Ok(f) => return Ok(f),
                Err(e @ FetchError::Wire(_)) => last = e,
                Err(e) => {
                    last = e;
                    break;
                }
            }
        }
    }
    Err(last)
}
