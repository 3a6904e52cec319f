use std::io::{BufRead, BufReader, Write};
use std::net::TcpListener;
use std::path::PathBuf;
use std::thread;

use chemkit_core::modules::Version;
use chemkit_core::registry::{ArtifactKind, PublishMeta, RegistryError};
use chemkit_core::{HttpRegistry, LocalRegistry, Registry};

/// Serves files under `root` for `n` requests, 404 for anything missing.
fn serve(root: PathBuf, n: usize) -> String {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    thread::spawn(move || {
        for stream in listener.incoming().take(n) {
            let mut stream = stream.unwrap();
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut request = String::new();
            reader.read_line(&mut request).unwrap();
            loop {
                let mut line = String::new();
                if reader.read_line(&mut line).unwrap() == 0 || line == "\r\n" {
                    break;
                }
            }
            let path = request.split_whitespace().nth(1).unwrap_or("/").trim_start_matches('/');
            let (status, body) = match std::fs::read(root.join(path)) {
                Ok(b) if !path.contains("..") => ("200 OK", b),
                _ => ("404 Not Found", b"not found".to_vec()),
            };
            let head = format!("HTTP/1.1 {status}\r\nContent-Length: {}\r\nConnection: close\r\n\r\n", body.len());
            stream.write_all(head.as_bytes()).unwrap();
            stream.write_all(&body).unwrap();
        }
    });
    format!("http://{addr}/")
}

fn v(s: &str) -> Version {
    s.parse().unwrap()
}

#[test]
fn http_backend_reads_a_local_layout() {
    let dir = tempfile::tempdir().unwrap();
    let local = LocalRegistry::open(dir.path()).unwrap();
    local.publish(b"first", PublishMeta::new("toy-model", ArtifactKind::Module, v("1.0.0")).keywords(&["Mapping"])).unwrap();
    local.publish(b"second", PublishMeta::new("toy-model", ArtifactKind::Module, v("1.1.0"))).unwrap();

    let http = HttpRegistry::new(&serve(dir.path().to_path_buf(), 6));
    let hits = http.search("mapping", None, false).unwrap();
    assert_eq!(hits.len(), 1);
    let (bytes, entry) = http.fetch("toy-model", "latest").unwrap();
    assert_eq!(bytes, b"second");
    assert_eq!(entry.version, v("1.1.0"));
    let (bytes, _) = http.fetch("toy-model", "1.0.0").unwrap();
    assert_eq!(bytes, b"first");
}

#[test]
fn http_backend_detects_tampered_blobs() {
    let dir = tempfile::tempdir().unwrap();
    let local = LocalRegistry::open(dir.path()).unwrap();
    let entry = local.publish(b"payload", PublishMeta::new("blob", ArtifactKind::Program, v("0.1.0"))).unwrap();
    std::fs::write(dir.path().join(&entry.location), b"payloaD").unwrap();
    let http = HttpRegistry::new(&serve(dir.path().to_path_buf(), 2));
    assert!(matches!(http.fetch("blob", "latest"), Err(RegistryError::Integrity { .. })));
}

#[test]
fn unreachable_server_is_an_http_error() {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    drop(listener);
    let http = HttpRegistry::new(&format!("http://{addr}"));
    assert!(matches!(http.index(), Err(RegistryError::Http(_))));
}
