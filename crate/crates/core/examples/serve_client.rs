//! Starts the review API on a synthetic dataset and talks to it over HTTP.

use std::io::{Read, Write};
use std::net::TcpStream;
use std::sync::Arc;

use celldet::serve::{start, ServeState};
use celldet::synthetic::{generate, SyntheticSpec};
use serde_json::{json, Value};

fn post(addr: std::net::SocketAddr, body: &Value) -> std::io::Result<(u16, Value)> {
    let body = body.to_string();
    let mut s = TcpStream::connect(addr)?;
    write!(
        s,
        "POST /api HTTP/1.1\r\nHost: {addr}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
        body.len()
    )?;
    let mut raw = String::new();
    s.read_to_string(&mut raw)?;
    let status = raw[9..12].parse().unwrap_or(0);
    let json = raw.split_once("\r\n\r\n").map_or(Value::Null, |(_, b)| serde_json::from_str(b).unwrap_or(Value::Null));
    Ok((status, json))
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    generate(&SyntheticSpec { images: 3, objects: 8, ..Default::default() })?.write_to(dir.path())?;
    let server = start(Arc::new(ServeState::open(dir.path(), None)?), "127.0.0.1:0")?;
    let addr = server.addr();
    println!("listening on {addr}");

    let (_, list) = post(addr, &json!({ "op": "list-images" }))?;
    println!("list-images: {}", list["images"]);

    let (_, ann) = post(addr, &json!({ "op": "get-annotations", "image_id": "syn_000" }))?;
    let version = ann["version"].as_u64().unwrap_or(0);
    let mut rows = ann["rows"].as_array().cloned().unwrap_or_default();
    println!("syn_000 v{version}: {} rows", rows.len());

    rows.push(json!({ "class": "Artifact", "xmin": 100, "ymin": 100, "xmax": 120, "ymax": 110 }));
    let put = json!({ "op": "put-annotations", "image_id": "syn_000", "version": version, "rows": rows });
    let (status, saved) = post(addr, &put)?;
    println!("put -> {status} {saved}");
    let (status, stale) = post(addr, &put)?;
    println!("same put again -> {status} {}", stale["error"]);

    let csv = std::fs::read_to_string(dir.path().join("annotations.csv"))?;
    println!("annotations.csv now has {} rows", csv.lines().count() - 1);
    server.shutdown();
    Ok(())
}
