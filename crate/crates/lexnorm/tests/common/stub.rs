//! A tiny scripted HTTP/1.1 server for exercising the remote client.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

pub struct Request {
    pub method: String,
    pub path: String,
    pub body: String,
}

pub struct Reply {
    pub status: u16,
    pub body: String,
    pub delay: Duration,
}

impl Reply {
    pub fn ok(body: impl Into<String>) -> Self {
        Reply {
            status: 200,
            body: body.into(),
            delay: Duration::ZERO,
        }
    }

    pub fn status(status: u16, body: impl Into<String>) -> Self {
        Reply {
            status,
            body: body.into(),
            delay: Duration::ZERO,
        }
    }

    pub fn delayed(mut self, d: Duration) -> Self {
        self.delay = d;
        self
    }
}

type Handler = dyn Fn(usize, &Request) -> Reply + Send + Sync;

pub struct Stub {
    pub url: String,
    hits: Arc<AtomicUsize>,
    pub max_concurrent: Arc<AtomicUsize>,
    stop: Arc<AtomicBool>,
    log: Arc<Mutex<Vec<String>>>,
}

impl Stub {
    /// `handler` gets the 0-based request number and the parsed request.
    pub fn start(handler: impl Fn(usize, &Request) -> Reply + Send + Sync + 'static) -> Stub {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        listener.set_nonblocking(true).unwrap();
        let url = format!("http://{}", listener.local_addr().unwrap());
        let hits = Arc::new(AtomicUsize::new(0));
        let active = Arc::new(AtomicUsize::new(0));
        let max_concurrent = Arc::new(AtomicUsize::new(0));
        let stop = Arc::new(AtomicBool::new(false));
        let log = Arc::new(Mutex::new(Vec::new()));
        let handler: Arc<Handler> = Arc::new(handler);
        {
            let (hits, active, max_concurrent, stop, log) = (
                hits.clone(),
                active.clone(),
                max_concurrent.clone(),
                stop.clone(),
                log.clone(),
            );
            thread::spawn(move || {
                while !stop.load(Ordering::SeqCst) {
                    match listener.accept() {
                        Ok((stream, _)) => {
                            let n = hits.fetch_add(1, Ordering::SeqCst);
                            let (handler, active, max_concurrent, log) = (
                                handler.clone(),
                                active.clone(),
                                max_concurrent.clone(),
                                log.clone(),
                            );
                            thread::spawn(move || {
                                let now = active.fetch_add(1, Ordering::SeqCst) + 1;
                                max_concurrent.fetch_max(now, Ordering::SeqCst);
                                serve(stream, n, &*handler, &log);
                                active.fetch_sub(1, Ordering::SeqCst);
                            });
                        }
                        Err(_) => thread::sleep(Duration::from_millis(2)),
                    }
                }
            });
        }
        Stub {
            url,
            hits,
            max_concurrent,
            stop,
            log,
        }
    }

    pub fn hits(&self) -> usize {
        self.hits.load(Ordering::SeqCst)
    }

    /// Request bodies in arrival order.
    pub fn bodies(&self) -> Vec<String> {
        self.log.lock().unwrap().clone()
    }
}

impl Drop for Stub {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
    }
}

fn serve(stream: TcpStream, n: usize, handler: &Handler, log: &Mutex<Vec<String>>) {
    stream.set_nonblocking(false).unwrap();
    let mut reader = BufReader::new(stream.try_clone().unwrap());
    let mut line = String::new();
    if reader.read_line(&mut line).unwrap_or(0) == 0 {
        return;
    }
    let mut parts = line.split_whitespace();
    let method = parts.next().unwrap_or_default().to_string();
    let path = parts.next().unwrap_or_default().to_string();
    let mut len = 0usize;
    loop {
        let mut h = String::new();
        if reader.read_line(&mut h).unwrap_or(0) == 0 || h == "\r\n" {
            break;
        }
        if let Some((k, v)) = h.split_once(':') {
            if k.eq_ignore_ascii_case("content-length") {
                len = v.trim().parse().unwrap_or(0);
            }
        }
    }
    let mut body = vec![0u8; len];
    if reader.read_exact(&mut body).is_err() {
        return;
    }
    let req = Request {
        method,
        path,
        body: String::from_utf8_lossy(&body).into_owned(),
    };
    log.lock().unwrap().push(req.body.clone());
    let reply = handler(n, &req);
    thread::sleep(reply.delay);
    let mut stream = stream;
    let reason = match reply.status {
        200 => "OK",
        400 => "Bad Request",
        500 => "Internal Server Error",
        503 => "Service Unavailable",
        _ => "Status",
    };
    let head = format!(
        "HTTP/1.1 {} {reason}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n",
        reply.status,
        reply.body.len()
    );
    let _ = stream.write_all(head.as_bytes());
    let _ = stream.write_all(reply.body.as_bytes());
    let _ = stream.flush();
}

/// Parses a `/v1/normalize` request body into its sentences.
pub fn sentences_of(req: &Request) -> (String, Vec<String>) {
    let v: serde_json::Value = serde_json::from_str(&req.body).unwrap();
    let lang = v["lang"].as_str().unwrap().to_string();
    let s = v["sentences"]
        .as_array()
        .unwrap()
        .iter()
        .map(|x| x.as_str().unwrap().to_string())
        .collect();
    (lang, s)
}

/// Echo-mode behaviour: returns the inputs, or the health document.
pub fn echo(_: usize, req: &Request) -> Reply {
    if req.method == "GET" && req.path == "/v1/health" {
        return Reply::ok(r#"{"status":"ok","model":"echo"}"#);
    }
    if req.path != "/v1/normalize" {
        return Reply::status(404, r#"{"error":"not found"}"#);
    }
    let (_, s) = sentences_of(req);
    Reply::ok(serde_json::json!({"normalized": s, "model": "echo"}).to_string())
}
