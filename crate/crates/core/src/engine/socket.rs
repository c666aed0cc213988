//! Unix domain socket transport for ranks in separate processes.
//!
//! Rank `r` listens on `<dir>/rank_<r>.sock`. Each frame is an 8-byte
//! little-endian payload length, a 16-byte header holding source, dest,
//! phase and step as little-endian `u32`s, then the payload.

use std::collections::HashMap;
use std::io::{self, Read, Write};
use std::os::unix::net::{UnixListener, UnixStream};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc::{channel, Receiver, RecvTimeoutError, Sender};
use std::sync::Arc;
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use super::{Message, Tag, Transport};
use crate::error::{Error, Result};

/// Length prefix plus header.
pub const FRAME_HEADER_BYTES: usize = 24;

pub fn encode_frame(msg: &Message) -> Vec<u8> {
    let mut out = Vec::with_capacity(FRAME_HEADER_BYTES + msg.payload.len());
    out.extend_from_slice(&(msg.payload.len() as u64).to_le_bytes());
    for v in [msg.source as u32, msg.dest as u32, msg.tag.phase, msg.tag.step] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.extend_from_slice(&msg.payload);
    out
}

/// Splits a frame header into `(payload_len, source, dest, tag)`.
pub fn decode_header(h: &[u8; FRAME_HEADER_BYTES]) -> (u64, usize, usize, Tag) {
    let u32_at = |o: usize| u32::from_le_bytes(h[o..o + 4].try_into().expect("4 bytes"));
    let len = u64::from_le_bytes(h[..8].try_into().expect("8 bytes"));
    (
        len,
        u32_at(8) as usize,
        u32_at(12) as usize,
        Tag::new(u32_at(16), u32_at(20)),
    )
}

pub fn socket_path(dir: &Path, rank: usize) -> PathBuf {
    dir.join(format!("rank_{rank}.sock"))
}

fn read_frames(mut stream: UnixStream, inbox: Sender<io::Result<Message>>) {
    loop {
        let mut h = [0u8; FRAME_HEADER_BYTES];
        match stream.read_exact(&mut h) {
            Ok(()) => {}
            Err(e) if e.kind() == io::ErrorKind::UnexpectedEof => return,
            Err(e) => {
                let _ = inbox.send(Err(e));
                return;
            }
        }
        let (len, source, dest, tag) = decode_header(&h);
        let mut payload = vec![0u8; len as usize];
        if let Err(e) = stream.read_exact(&mut payload) {
            let _ = inbox.send(Err(e));
            return;
        }
        let msg = Message {
            source,
            dest,
            tag,
            payload,
        };
        if inbox.send(Ok(msg)).is_err() {
            return;
        }
    }
}

pub struct SocketTransport {
    rank: usize,
    n_p: usize,
    dir: PathBuf,
    connect_timeout: Duration,
    outgoing: HashMap<usize, UnixStream>,
    inbox: Receiver<io::Result<Message>>,
    stop: Arc<AtomicBool>,
    acceptor: Option<JoinHandle<()>>,
}

impl SocketTransport {
    /// Listens on this rank's socket. Peers are connected lazily on first send.
    pub fn bind(dir: &Path, rank: usize, n_p: usize, connect_timeout: Duration) -> Result<Self> {
        if rank >= n_p {
            return Err(Error::RankOutOfRange { rank, n_p });
        }
        let path = socket_path(dir, rank);
        match std::fs::remove_file(&path) {
            Ok(()) => {}
            Err(e) if e.kind() == io::ErrorKind::NotFound => {}
            Err(e) => return Err(e.into()),
        }
        let listener = UnixListener::bind(&path)?;
        listener.set_nonblocking(true)?;
        let (tx, inbox) = channel();
        let stop = Arc::new(AtomicBool::new(false));
        let stop2 = stop.clone();
        let acceptor = thread::Builder::new()
            .name(format!("accept-{rank}"))
            .spawn(move || {
                while !stop2.load(Ordering::SeqCst) {
                    match listener.accept() {
                        Ok((stream, _)) => {
                            if stream.set_nonblocking(false).is_err() {
                                continue;
                            }
                            let tx = tx.clone();
                            let _ = thread::Builder::new()
                                .name(format!("reader-{rank}"))
                                .spawn(move || read_frames(stream, tx));
                        }
                        Err(e) if e.kind() == io::ErrorKind::WouldBlock => {
                            thread::sleep(Duration::from_millis(2));
                        }
                        Err(e) => {
                            let _ = tx.send(Err(e));
                            return;
                        }
                    }
                }
            })?;
        Ok(SocketTransport {
            rank,
            n_p,
            dir: dir.to_path_buf(),
            connect_timeout,
            outgoing: HashMap::new(),
            inbox,
            stop,
            acceptor: Some(acceptor),
        })
    }

    fn connection(&mut self, dest: usize) -> Result<&mut UnixStream> {
        if !self.outgoing.contains_key(&dest) {
            let path = socket_path(&self.dir, dest);
            let start = Instant::now();
            let stream = loop {
                match UnixStream::connect(&path) {
                    Ok(s) => break s,
                    Err(e) if start.elapsed() < self.connect_timeout => {
                        if !matches!(
                            e.kind(),
                            io::ErrorKind::NotFound | io::ErrorKind::ConnectionRefused
                        ) {
                            return Err(e.into());
                        }
                        thread::sleep(Duration::from_millis(5));
                    }
                    Err(e) => {
                        return Err(Error::Transport(format!(
                            "rank {} could not connect to rank {dest} at {}: {e}",
                            self.rank,
                            path.display()
                        )))
                    }
                }
            };
            self.outgoing.insert(dest, stream);
        }
        Ok(self.outgoing.get_mut(&dest).expect("inserted"))
    }
}

impl Transport for SocketTransport {
    fn rank(&self) -> usize {
        self.rank
    }

    fn n_p(&self) -> usize {
        self.n_p
    }

    fn send(&mut self, msg: Message) -> Result<()> {
        let frame = encode_frame(&msg);
        let dest = msg.dest;
        self.connection(dest)?
            .write_all(&frame)
            .map_err(|e| Error::Transport(format!("send to rank {dest}: {e}")))
    }

    fn poll(&mut self, wait: Duration) -> Result<Option<Message>> {
        match self.inbox.recv_timeout(wait) {
            Ok(Ok(m)) => Ok(Some(m)),
            Ok(Err(e)) => Err(Error::Transport(format!("rank {} receive: {e}", self.rank))),
            Err(RecvTimeoutError::Timeout) => Ok(None),
            Err(RecvTimeoutError::Disconnected) => {
                Err(Error::Transport(format!("rank {} listener stopped", self.rank)))
            }
        }
    }
}

impl Drop for SocketTransport {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        self.outgoing.clear();
        if let Some(h) = self.acceptor.take() {
            let _ = h.join();
        }
        let _ = std::fs::remove_file(socket_path(&self.dir, self.rank));
    }
}
