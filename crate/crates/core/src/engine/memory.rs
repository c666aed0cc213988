use std::sync::mpsc::{channel, Receiver, RecvTimeoutError, Sender};
use std::time::Duration;

use super::{Message, Transport};
use crate::error::{Error, Result};

/// In-process transport over unbounded channels.
pub struct MemoryTransport {
    rank: usize,
    peers: Vec<Sender<Message>>,
    inbox: Receiver<Message>,
}

/// Fully connected transports for `n_p` ranks in one process.
pub fn memory_transports(n_p: usize) -> Vec<MemoryTransport> {
    let (senders, receivers): (Vec<_>, Vec<_>) = (0..n_p).map(|_| channel()).unzip();
    receivers
        .into_iter()
        .enumerate()
        .map(|(rank, inbox)| MemoryTransport {
            rank,
            peers: senders.clone(),
            inbox,
        })
        .collect()
}

impl Transport for MemoryTransport {
    fn rank(&self) -> usize {
        self.rank
    }

    fn n_p(&self) -> usize {
        self.peers.len()
    }

    fn send(&mut self, msg: Message) -> Result<()> {
        let dest = msg.dest;
        self.peers[dest]
            .send(msg)
            .map_err(|_| Error::Transport(format!("rank {dest} has exited")))
    }

    fn poll(&mut self, wait: Duration) -> Result<Option<Message>> {
        match self.inbox.recv_timeout(wait) {
            Ok(m) => Ok(Some(m)),
            Err(RecvTimeoutError::Timeout) => Ok(None),
            // Our own sender keeps the channel open, so this is unreachable.
            Err(RecvTimeoutError::Disconnected) => Err(Error::Transport("inbox closed".into())),
        }
    }
}
