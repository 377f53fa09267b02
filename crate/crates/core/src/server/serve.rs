use std::io::{self, BufRead, BufReader, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::mpsc;
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::protocol::{EvalRequest, EvalResponse, BAD_REQUEST, BAD_VECTOR};
use super::queue::BatchQueue;
use crate::gbdt::{load_model, ModelError, TreeModel};

const POLL: Duration = Duration::from_millis(20);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ServerConfig {
    pub addr: String,
    pub workers: usize,
    pub batch_size: usize,
    /// Seconds a worker waits when fewer than `batch_size` requests are queued.
    pub wait: f64,
    pub model: PathBuf,
}

impl Default for ServerConfig {
    fn default() -> ServerConfig {
        ServerConfig {
            addr: "127.0.0.1:8765".into(),
            workers: 28,
            batch_size: 8,
            wait: 0.01,
            model: PathBuf::new(),
        }
    }
}

impl ServerConfig {
    pub fn validate(&self) -> Result<(), ServerError> {
        if self.workers == 0 {
            return Err(ServerError::Config("workers must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(ServerError::Config("batch size must be at least 1".into()));
        }
        if !(self.wait >= 0.0 && self.wait.is_finite()) {
            return Err(ServerError::Config(
                "wait must be a non-negative number of seconds".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum ServerError {
    #[error("cannot bind {addr}: {source}")]
    Bind { addr: String, source: io::Error },
    #[error("cannot load model {path}: {message}")]
    Model { path: String, message: String },
    #[error("invalid server configuration: {0}")]
    Config(String),
}

/// Counters shared by all server threads.
#[derive(Debug, Default)]
pub struct ServerStats {
    pub requests: AtomicU64,
    pub vectors: AtomicU64,
    pub bad_requests: AtomicU64,
    batches: Mutex<Vec<usize>>,
}

impl ServerStats {
    /// Number of requests in each batch taken by a worker, in the order the
    /// batches were taken.
    pub fn batch_sizes(&self) -> Vec<usize> {
        self.batches.lock().unwrap().clone()
    }
}

struct Job {
    request: EvalRequest,
    reply: mpsc::Sender<EvalResponse>,
}

/// A running server. Dropping the handle without calling
/// [`shutdown`](ServerHandle::shutdown) leaves the threads running.
pub struct ServerHandle {
    addr: SocketAddr,
    stop: Arc<AtomicBool>,
    stats: Arc<ServerStats>,
    listener: Option<JoinHandle<()>>,
}

impl ServerHandle {
    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn stats(&self) -> &ServerStats {
        &self.stats
    }

    /// Stops accepting connections, lets every connection finish the request
    /// it is serving, then stops the workers.
    pub fn shutdown(mut self) {
        self.stop.store(true, Ordering::SeqCst);
        if let Some(h) = self.listener.take() {
            let _ = h.join();
        }
    }

    /// Blocks until the server stops.
    pub fn wait(mut self) {
        if let Some(h) = self.listener.take() {
            let _ = h.join();
        }
    }
}

/// Loads the model at `cfg.model` and starts serving.
pub fn start_from_file(cfg: &ServerConfig) -> Result<ServerHandle, ServerError> {
    let bytes = std::fs::read(&cfg.model).map_err(|e| ServerError::Model {
        path: cfg.model.display().to_string(),
        message: e.to_string(),
    })?;
    let model = load_model(&bytes).map_err(|e: ModelError| ServerError::Model {
        path: cfg.model.display().to_string(),
        message: e.to_string(),
    })?;
    start(cfg, Arc::new(model))
}

/// Binds `cfg.addr` and spawns the listener and worker threads.
pub fn start(cfg: &ServerConfig, model: Arc<TreeModel>) -> Result<ServerHandle, ServerError> {
    cfg.validate()?;
    let listener = TcpListener::bind(&cfg.addr).map_err(|source| ServerError::Bind {
        addr: cfg.addr.clone(),
        source,
    })?;
    let addr = listener.local_addr().map_err(|source| ServerError::Bind {
        addr: cfg.addr.clone(),
        source,
    })?;
    listener.set_nonblocking(true).map_err(|source| ServerError::Bind {
        addr: cfg.addr.clone(),
        source,
    })?;

    let stop = Arc::new(AtomicBool::new(false));
    let stats = Arc::new(ServerStats::default());
    let queue: Arc<BatchQueue<Job>> = Arc::new(BatchQueue::new());
    let wait = Duration::from_secs_f64(cfg.wait);

    let workers: Vec<JoinHandle<()>> = (0..cfg.workers)
        .map(|_| {
            let (queue, model, stats) = (queue.clone(), model.clone(), stats.clone());
            let b = cfg.batch_size;
            std::thread::spawn(move || worker(&queue, &model, &stats, b, wait))
        })
        .collect();

    let listener_thread = {
        let stop = stop.clone();
        let stats = stats.clone();
        std::thread::spawn(move || {
            let mut connections: Vec<JoinHandle<()>> = Vec::new();
            while !stop.load(Ordering::SeqCst) {
                match listener.accept() {
                    Ok((stream, _)) => {
                        let (queue, stop, stats) = (queue.clone(), stop.clone(), stats.clone());
                        connections.push(std::thread::spawn(move || {
                            if let Err(e) = connection(stream, &queue, &stop, &stats) {
                                log::debug!("connection closed: {e}");
                            }
                        }));
                        connections.retain(|h| !h.is_finished());
                    }
                    Err(e) if e.kind() == io::ErrorKind::WouldBlock => std::thread::sleep(POLL),
                    Err(e) => {
                        log::warn!("accept failed: {e}");
                        std::thread::sleep(POLL);
                    }
                }
            }
            drop(listener);
            for c in connections {
                let _ = c.join();
            }
            queue.close();
            for w in workers {
                let _ = w.join();
            }
        })
    };

    Ok(ServerHandle {
        addr,
        stop,
        stats,
        listener: Some(listener_thread),
    })
}

fn worker(queue: &BatchQueue<Job>, model: &TreeModel, stats: &ServerStats, b: usize, wait: Duration) {
    while let Some(batch) = queue.take_batch(b, wait) {
        stats.batches.lock().unwrap().push(batch.len());
        for job in batch {
            let response = match job.request.vectors(model.dimension) {
                Ok(vs) => {
                    stats.vectors.fetch_add(vs.len() as u64, Ordering::Relaxed);
                    EvalResponse::scores(job.request.id.clone(), model.score_all(&vs))
                }
                Err(msg) => EvalResponse::error(job.request.id.clone(), BAD_VECTOR, msg),
            };
            // the connection may have gone away; nothing to do then
            let _ = job.reply.send(response);
        }
    }
}

/// Serves one connection, one request at a time, so responses leave in
/// request order.
fn connection(stream: TcpStream, queue: &BatchQueue<Job>, stop: &AtomicBool, stats: &ServerStats) -> io::Result<()> {
    stream.set_nodelay(true)?;
    stream.set_read_timeout(Some(POLL))?;
    let mut writer = stream.try_clone()?;
    let mut reader = BufReader::new(stream);
    let mut line: Vec<u8> = Vec::new();
    loop {
        match reader.read_until(b'\n', &mut line) {
            Ok(0) => return Ok(()),
            Ok(_) if line.last() != Some(&b'\n') => return Ok(()), // EOF mid-line
            Ok(_) => {}
            Err(e) if matches!(e.kind(), io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut) => {
                if stop.load(Ordering::SeqCst) && line.is_empty() {
                    return Ok(());
                }
                continue;
            }
            Err(e) => return Err(e),
        }
        let text = String::from_utf8_lossy(&line).trim().to_string();
        line.clear();
        if text.is_empty() {
            continue;
        }
        stats.requests.fetch_add(1, Ordering::Relaxed);
        let response = match serde_json::from_str::<EvalRequest>(&text) {
            Err(e) => {
                stats.bad_requests.fetch_add(1, Ordering::Relaxed);
                let id = serde_json::from_str::<serde_json::Value>(&text)
                    .ok()
                    .and_then(|v| v.get("id").and_then(|i| i.as_str()).map(str::to_string))
                    .unwrap_or_default();
                EvalResponse::error(id, BAD_REQUEST, e.to_string())
            }
            Ok(request) if request.is_ping() => EvalResponse::scores(request.id, Vec::new()),
            Ok(request) => {
                let (tx, rx) = mpsc::channel();
                let id = request.id.clone();
                queue.push(Job { request, reply: tx });
                rx.recv()
                    .unwrap_or_else(|_| EvalResponse::error(id, "internal", "worker dropped the request"))
            }
        };
        writer.write_all(response.to_line().as_bytes())?;
        writer.flush()?;
    }
}
