//! Minimal HTTP/1.1 responder for exercising wire paths in tests without a
//! network. Serves a fixed list of responses, one per connection, then the
//! thread exits and reports how many connections it handled.

use std::io::{Read, Write};
use std::net::TcpListener;

pub(crate) struct CannedResponse {
    pub status: u16,
    pub content_type: &'static str,
    pub body: Vec<u8>,
}

impl CannedResponse {
    pub fn json(status: u16, body: impl Into<String>) -> Self {
        Self {
            status,
            content_type: "application/json",
            body: body.into().into_bytes(),
        }
    }

    pub fn html(body: impl Into<String>) -> Self {
        Self {
            status: 200,
            content_type: "text/html; charset=utf-8",
            body: body.into().into_bytes(),
        }
    }
}

/// Binds a loopback listener and answers each connection with the next
/// canned response. Returns the base URL and the serving thread's handle,
/// which yields the number of requests actually served.
pub(crate) fn serve(responses: Vec<CannedResponse>) -> (String, std::thread::JoinHandle<u32>) {
    let listener = TcpListener::bind("127.0.0.1:0").expect("bind loopback");
    let base = format!("http://{}", listener.local_addr().unwrap());
    let handle = std::thread::spawn(move || {
        let mut served = 0;
        for response in responses {
            let (mut stream, _) = match listener.accept() {
                Ok(pair) => pair,
                Err(_) => break,
            };
            read_request(&mut stream);
            let head = format!(
                "HTTP/1.1 {} X\r\ncontent-type: {}\r\ncontent-length: {}\r\nconnection: close\r\n\r\n",
                response.status,
                response.content_type,
                response.body.len()
            );
            let _ = stream.write_all(head.as_bytes());
            let _ = stream.write_all(&response.body);
            served += 1;
        }
        served
    });
    (base, handle)
}

/// Reads request head plus a content-length body, then returns.
fn read_request(stream: &mut std::net::TcpStream) {
    let mut buf = [0u8; 65536];
    let mut head = Vec::new();
    loop {
        let n = match stream.read(&mut buf) {
            Ok(0) | Err(_) => return,
            Ok(n) => n,
        };
        head.extend_from_slice(&buf[..n]);
        if let Some(pos) = head.windows(4).position(|w| w == b"\r\n\r\n") {
            let header_text = String::from_utf8_lossy(&head[..pos]).to_string();
            let content_length = header_text
                .lines()
                .find_map(|l| {
                    l.to_ascii_lowercase()
                        .strip_prefix("content-length:")
                        .and_then(|v| v.trim().parse::<usize>().ok())
                })
                .unwrap_or(0);
            let mut have = head.len() - pos - 4;
            while have < content_length {
                match stream.read(&mut buf) {
                    Ok(0) | Err(_) => return,
                    Ok(n) => have += n,
                }
            }
            return;
        }
    }
}
