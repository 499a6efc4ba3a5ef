//! Newline-delimited JSON protocol for out-of-process black boxes.
//!
//! The server speaks first with `{"schema_arity": n, "protocol": 1}`; after
//! that each request line `{"id": k, "instances": [[..], ..]}` is answered
//! by one line `{"id": k, "labels": [0|1, ..]}` or `{"id": k, "error": ".."}`.
//! Transports are the stdio of a spawned command or a TCP socket.

use std::io::{self, BufRead, BufReader, Write};
use std::net::{TcpListener, TcpStream};
use std::process::{Child, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::Mutex;
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::BlackBox;
use crate::error::ModelError;
use crate::schema::Instance;

pub const PROTOCOL_VERSION: u32 = 1;
pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(30);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Handshake {
    pub schema_arity: usize,
    pub protocol: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Request {
    pub id: u64,
    pub instances: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Response {
    pub id: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<serde_json::Value>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

struct Connection {
    lines: Receiver<io::Result<String>>,
    writer: Box<dyn Write + Send>,
    child: Option<Child>,
    next_id: u64,
}

/// A black box answered by a peer process over the wire protocol.
pub struct RemoteModel {
    conn: Mutex<Connection>,
    arity: usize,
    timeout: Duration,
    description: String,
}

fn pump(reader: impl io::Read + Send + 'static) -> Receiver<io::Result<String>> {
    let (tx, rx) = mpsc::channel();
    thread::spawn(move || {
        for line in BufReader::new(reader).lines() {
            if tx.send(line).is_err() {
                break;
            }
        }
    });
    rx
}

impl RemoteModel {
    /// `tcp://host:port` connects to a socket; anything else is run as a
    /// shell command speaking the protocol on its stdio.
    pub fn open(target: &str, timeout: Duration) -> Result<Self, ModelError> {
        match target.strip_prefix("tcp://") {
            Some(addr) => Self::connect(addr, timeout),
            None => Self::spawn(target, timeout),
        }
    }

    pub fn spawn(command: &str, timeout: Duration) -> Result<Self, ModelError> {
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(command)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| ModelError::Unavailable(format!("cannot start `{command}`: {e}")))?;
        let stdout = child.stdout.take().expect("piped stdout");
        let stdin = child.stdin.take().expect("piped stdin");
        let conn = Connection { lines: pump(stdout), writer: Box::new(stdin), child: Some(child), next_id: 0 };
        Self::handshake(conn, timeout, command.to_string())
    }

    pub fn connect(addr: &str, timeout: Duration) -> Result<Self, ModelError> {
        let stream =
            TcpStream::connect(addr).map_err(|e| ModelError::Unavailable(format!("cannot connect to {addr}: {e}")))?;
        let reader = stream.try_clone().map_err(|e| ModelError::Unavailable(e.to_string()))?;
        let conn = Connection { lines: pump(reader), writer: Box::new(stream), child: None, next_id: 0 };
        Self::handshake(conn, timeout, format!("tcp://{addr}"))
    }

    fn handshake(conn: Connection, timeout: Duration, description: String) -> Result<Self, ModelError> {
        let line = read_line(&conn.lines, timeout)?;
        let hello: Handshake =
            serde_json::from_str(&line).map_err(|e| ModelError::Protocol(format!("bad handshake `{line}`: {e}")))?;
        if hello.protocol != PROTOCOL_VERSION {
            return Err(ModelError::Protocol(format!("unsupported protocol version {}", hello.protocol)));
        }
        Ok(RemoteModel { conn: Mutex::new(conn), arity: hello.schema_arity, timeout, description })
    }

    /// Arity advertised by the peer.
    pub fn arity(&self) -> usize {
        self.arity
    }

    /// Fails unless the peer's arity matches the schema in use.
    pub fn expect_arity(&self, arity: usize) -> Result<(), ModelError> {
        if self.arity == arity {
            Ok(())
        } else {
            Err(ModelError::Arity { expected: self.arity, got: arity })
        }
    }

    pub fn description(&self) -> &str {
        &self.description
    }
}

fn read_line(lines: &Receiver<io::Result<String>>, timeout: Duration) -> Result<String, ModelError> {
    loop {
        match lines.recv_timeout(timeout) {
            Ok(Ok(line)) if line.trim().is_empty() => continue,
            Ok(Ok(line)) => return Ok(line),
            Ok(Err(e)) => return Err(ModelError::Unavailable(e.to_string())),
            Err(RecvTimeoutError::Timeout) => return Err(ModelError::Timeout(timeout)),
            Err(RecvTimeoutError::Disconnected) => return Err(ModelError::Unavailable("peer closed the connection".into())),
        }
    }
}

impl BlackBox for RemoteModel {
    fn kind(&self) -> &'static str {
        "remote"
    }

    fn predict_batch(&self, batch: &[Instance]) -> Result<Vec<f64>, ModelError> {
        if let Some(x) = batch.iter().find(|x| x.len() != self.arity) {
            return Err(ModelError::Arity { expected: self.arity, got: x.len() });
        }
        let mut conn = self.conn.lock().map_err(|_| ModelError::Unavailable("connection poisoned".into()))?;
        let id = conn.next_id;
        conn.next_id += 1;
        let request = Request { id, instances: batch.iter().map(|x| x.values().to_vec()).collect() };
        let mut line = serde_json::to_string(&request).expect("request serializes");
        line.push('\n');
        conn.writer
            .write_all(line.as_bytes())
            .and_then(|_| conn.writer.flush())
            .map_err(|e| ModelError::Unavailable(format!("write failed: {e}")))?;
        let reply = read_line(&conn.lines, self.timeout)?;
        let response: Response =
            serde_json::from_str(&reply).map_err(|e| ModelError::Protocol(format!("bad response `{reply}`: {e}")))?;
        if response.id != Some(id) {
            return Err(ModelError::Protocol(format!("response id {:?} for request {id}", response.id)));
        }
        if let Some(err) = response.error {
            return Err(ModelError::Protocol(format!("peer error: {err}")));
        }
        let labels = response.labels.ok_or_else(|| ModelError::Protocol("response without labels".into()))?;
        if labels.len() != batch.len() {
            return Err(ModelError::Protocol(format!("{} labels for {} instances", labels.len(), batch.len())));
        }
        labels
            .iter()
            .map(|v| match v.as_f64() {
                Some(x) if x == 0.0 || x == 1.0 => Ok(x),
                _ => Err(ModelError::Protocol(format!("non-binary label {v}"))),
            })
            .collect()
    }
}

impl Drop for RemoteModel {
    fn drop(&mut self) {
        if let Ok(conn) = self.conn.get_mut() {
            if let Some(child) = conn.child.as_mut() {
                // closing stdin lets well-behaved peers exit on EOF
                conn.writer = Box::new(io::sink());
                if child.try_wait().ok().flatten().is_none() {
                    thread::sleep(Duration::from_millis(10));
                    if child.try_wait().ok().flatten().is_none() {
                        let _ = child.kill();
                    }
                }
                let _ = child.wait();
            }
        }
    }
}

/// Serves `model` over the protocol until `input` reaches EOF. Malformed
/// lines get an error response and never end the loop.
pub fn serve(model: &dyn BlackBox, arity: usize, input: impl BufRead, mut output: impl Write) -> io::Result<()> {
    let hello = Handshake { schema_arity: arity, protocol: PROTOCOL_VERSION };
    writeln!(output, "{}", serde_json::to_string(&hello).expect("handshake serializes"))?;
    output.flush()?;
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let response = answer(model, arity, &line);
        writeln!(output, "{}", serde_json::to_string(&response).expect("response serializes"))?;
        output.flush()?;
    }
    Ok(())
}

fn answer(model: &dyn BlackBox, arity: usize, line: &str) -> Response {
    let fail = |id, msg: String| Response { id, labels: None, error: Some(msg) };
    let request: Request = match serde_json::from_str(line) {
        Ok(r) => r,
        Err(e) => {
            let id = serde_json::from_str::<serde_json::Value>(line).ok().and_then(|v| v.get("id")?.as_u64());
            return fail(id, format!("malformed request: {e}"));
        }
    };
    if let Some(bad) = request.instances.iter().find(|x| x.len() != arity) {
        return fail(Some(request.id), format!("instance has {} values, expected {arity}", bad.len()));
    }
    let batch: Vec<Instance> = request.instances.into_iter().map(Instance::new).collect();
    match model.predict_batch(&batch) {
        Ok(labels) => Response {
            id: Some(request.id),
            labels: Some(labels.into_iter().map(|v| serde_json::Value::from(u8::from(v > 0.5))).collect()),
            error: None,
        },
        Err(e) => fail(Some(request.id), e.to_string()),
    }
}

/// Serves each accepted connection in turn.
pub fn serve_tcp(model: &dyn BlackBox, arity: usize, listener: TcpListener) -> io::Result<()> {
    for stream in listener.incoming() {
        let stream = stream?;
        let reader = BufReader::new(stream.try_clone()?);
        serve(model, arity, reader, stream)?;
    }
    Ok(())
}
