use std::io::{self, BufRead, BufReader, Write};
use std::net::TcpStream;

use thiserror::Error;

use super::protocol::{EvalRequest, EvalResponse};
use crate::features::SparseVector;

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("transport error: {0}")]
    Transport(#[from] io::Error),
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("server error {code}: {message}")]
    Server { code: String, message: String },
}

/// Blocking client holding one connection; one request in flight at a time.
pub struct EvalClient {
    addr: String,
    conn: Option<Connection>,
    next_id: u64,
}

struct Connection {
    reader: BufReader<TcpStream>,
    writer: TcpStream,
}

impl Connection {
    fn open(addr: &str) -> io::Result<Connection> {
        let stream = TcpStream::connect(addr)?;
        stream.set_nodelay(true)?;
        Ok(Connection {
            writer: stream.try_clone()?,
            reader: BufReader::new(stream),
        })
    }

    fn round_trip(&mut self, line: &str) -> io::Result<String> {
        self.writer.write_all(line.as_bytes())?;
        self.writer.flush()?;
        let mut reply = String::new();
        if self.reader.read_line(&mut reply)? == 0 {
            return Err(io::Error::new(
                io::ErrorKind::UnexpectedEof,
                "server closed the connection",
            ));
        }
        Ok(reply)
    }
}

impl EvalClient {
    pub fn connect(addr: &str) -> Result<EvalClient, ClientError> {
        Ok(EvalClient {
            addr: addr.to_string(),
            conn: Some(Connection::open(addr)?),
            next_id: 0,
        })
    }

    pub fn addr(&self) -> &str {
        &self.addr
    }

    /// Sends a raw line and returns the raw reply line.
    pub fn send_line(&mut self, line: &str) -> Result<String, ClientError> {
        let mut line = line.trim_end_matches('\n').to_string();
        line.push('\n');
        match self.try_send(&line) {
            Ok(r) => Ok(r),
            Err(_) => {
                // one reconnect attempt
                self.conn = None;
                Ok(self.try_send(&line)?)
            }
        }
    }

    fn try_send(&mut self, line: &str) -> io::Result<String> {
        if self.conn.is_none() {
            self.conn = Some(Connection::open(&self.addr)?);
        }
        let result = self.conn.as_mut().expect("connection just opened").round_trip(line);
        if result.is_err() {
            self.conn = None;
        }
        result
    }

    /// Sends `req` and waits for its response. Error records from the server
    /// are returned as part of the response, not as `Err`.
    pub fn evaluate(&mut self, req: &EvalRequest) -> Result<EvalResponse, ClientError> {
        let line = serde_json::to_string(req).map_err(|e| ClientError::Protocol(e.to_string()))?;
        let reply = self.send_line(&line)?;
        let response: EvalResponse =
            serde_json::from_str(&reply).map_err(|e| ClientError::Protocol(format!("bad response: {e}")))?;
        if response.id != req.id {
            return Err(ClientError::Protocol(format!(
                "response id {} does not match request id {}",
                response.id, req.id
            )));
        }
        Ok(response)
    }

    /// Scores `vectors` remotely. Server error records become `Err`.
    pub fn score(&mut self, vectors: &[SparseVector], context: Vec<u64>) -> Result<Vec<f64>, ClientError> {
        self.next_id += 1;
        let req = EvalRequest::new(self.next_id.to_string(), vectors, context);
        let resp = self.evaluate(&req)?;
        match (resp.scores, resp.error) {
            (_, Some(e)) => Err(ClientError::Server {
                code: e.code,
                message: e.message,
            }),
            (Some(s), None) if s.len() == vectors.len() => Ok(s),
            (Some(s), None) => Err(ClientError::Protocol(format!(
                "expected {} scores, got {}",
                vectors.len(),
                s.len()
            ))),
            (None, None) => Err(ClientError::Protocol("response has neither scores nor error".into())),
        }
    }
}
