//! TCP front end: one session and one thread per connection.

use std::io::{BufRead, BufReader, Write};
use std::net::{TcpListener, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicU64, Ordering};
use std::thread;

use super::protocol::{Flow, Session};

/// Drives one session over any line-oriented reader/writer pair until EOF or
/// `close`.
pub fn run_session<R: BufRead, W: Write>(session: &mut Session, reader: R, mut writer: W) -> std::io::Result<()> {
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let (resp, flow) = session.handle_line(&line);
        writer.write_all(resp.as_bytes())?;
        writer.write_all(b"\n")?;
        writer.flush()?;
        if flow == Flow::Close {
            break;
        }
    }
    Ok(())
}

fn handle(stream: TcpStream, id: u64) -> std::io::Result<()> {
    let reader = BufReader::new(stream.try_clone()?);
    let mut session = Session::new(id);
    run_session(&mut session, reader, stream)
}

pub struct Server {
    listener: TcpListener,
}

impl Server {
    pub fn bind(addr: impl ToSocketAddrs) -> std::io::Result<Self> {
        Ok(Self {
            listener: TcpListener::bind(addr)?,
        })
    }

    pub fn local_addr(&self) -> std::io::Result<std::net::SocketAddr> {
        self.listener.local_addr()
    }

    /// Accepts connections forever.
    pub fn run(self) -> std::io::Result<()> {
        let next = AtomicU64::new(1);
        for stream in self.listener.incoming() {
            let stream = match stream {
                Ok(s) => s,
                Err(e) => {
                    eprintln!("accept failed: {e}");
                    continue;
                }
            };
            let id = next.fetch_add(1, Ordering::Relaxed);
            thread::spawn(move || {
                if let Err(e) = handle(stream, id) {
                    eprintln!("session {id}: {e}");
                }
            });
        }
        Ok(())
    }
}

pub fn serve(addr: impl ToSocketAddrs) -> std::io::Result<()> {
    let server = Server::bind(addr)?;
    eprintln!("listening on {}", server.local_addr()?);
    server.run()
}
