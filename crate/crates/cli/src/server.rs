//! Stream, stdio and TCP transports for [`Session`].

use std::io::{BufRead, BufReader, BufWriter, Write};
use std::net::{TcpListener, TcpStream, ToSocketAddrs};
use std::sync::Arc;
use std::thread;

use splatnav_sim::{Scene, Task};

use crate::protocol::Session;

/// Serves requests from `reader` until EOF or `close`.
pub fn serve_stream<R: BufRead, W: Write>(session: &mut Session, reader: R, mut writer: W) -> std::io::Result<()> {
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let resp = session.handle_line(&line);
        serde_json::to_writer(&mut writer, &resp)?;
        writer.write_all(b"\n")?;
        writer.flush()?;
        if session.is_closed() {
            break;
        }
    }
    Ok(())
}

pub fn serve_stdio(scene: Arc<Scene>, seed: u64, task: Task) -> std::io::Result<()> {
    let mut session = Session::new(scene, seed, task);
    let stdin = std::io::stdin();
    let stdout = std::io::stdout();
    serve_stream(&mut session, stdin.lock(), BufWriter::new(stdout.lock()))
}

fn handle(stream: TcpStream, scene: Arc<Scene>, seed: u64, task: Task) {
    let peer = stream.peer_addr().map(|a| a.to_string()).unwrap_or_default();
    let reader = match stream.try_clone() {
        Ok(s) => BufReader::new(s),
        Err(e) => {
            log::error!("{peer}: {e}");
            return;
        }
    };
    let mut session = Session::new(scene, seed, task);
    if let Err(e) = serve_stream(&mut session, reader, BufWriter::new(stream)) {
        log::warn!("{peer}: connection ended: {e}");
    }
}

/// Accepts connections on `listener`; each gets an isolated environment
/// seeded identically.
pub fn serve_listener(listener: TcpListener, scene: Arc<Scene>, seed: u64, task: Task) -> std::io::Result<()> {
    for stream in listener.incoming() {
        let stream = stream?;
        let scene = Arc::clone(&scene);
        thread::spawn(move || handle(stream, scene, seed, task));
    }
    Ok(())
}

pub fn serve_tcp(addr: impl ToSocketAddrs, scene: Arc<Scene>, seed: u64, task: Task) -> std::io::Result<()> {
    let listener = TcpListener::bind(addr)?;
    log::info!("listening on {}", listener.local_addr()?);
    serve_listener(listener, scene, seed, task)
}
