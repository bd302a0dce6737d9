use std::io::{BufReader, BufWriter};
use std::net::TcpStream;
use std::sync::mpsc::{self, Receiver, Sender};
use std::time::Duration;

use super::{ChannelError, Frame, Handshake, SecureSession};
use crate::abe::SecureRng;
use crate::suite::CryptoSuite;

/// Frame-level transport. Implementations do no cryptography.
pub trait Transport: Send {
    fn send_frame(&mut self, frame: &Frame) -> Result<(), ChannelError>;
    fn recv_frame(&mut self) -> Result<Frame, ChannelError>;
}

impl<T: Transport + ?Sized> Transport for Box<T> {
    fn send_frame(&mut self, frame: &Frame) -> Result<(), ChannelError> {
        (**self).send_frame(frame)
    }

    fn recv_frame(&mut self) -> Result<Frame, ChannelError> {
        (**self).recv_frame()
    }
}

#[derive(Debug)]
pub struct TcpTransport {
    reader: BufReader<TcpStream>,
    writer: BufWriter<TcpStream>,
}

impl TcpTransport {
    pub fn new(stream: TcpStream) -> Result<Self, ChannelError> {
        stream.set_nodelay(true)?;
        Ok(Self {
            reader: BufReader::new(stream.try_clone()?),
            writer: BufWriter::new(stream),
        })
    }

    pub fn connect(addr: &str, timeout: Option<Duration>) -> Result<Self, ChannelError> {
        let stream = TcpStream::connect(addr)?;
        stream.set_read_timeout(timeout)?;
        Self::new(stream)
    }
}

impl Transport for TcpTransport {
    fn send_frame(&mut self, frame: &Frame) -> Result<(), ChannelError> {
        frame.write_to(&mut self.writer)
    }

    fn recv_frame(&mut self) -> Result<Frame, ChannelError> {
        Frame::read_from(&mut self.reader)
    }
}

/// In-process duplex pipe carrying encoded frames.
#[derive(Debug)]
pub struct MemoryTransport {
    tx: Sender<Vec<u8>>,
    rx: Receiver<Vec<u8>>,
}

impl MemoryTransport {
    pub fn pair() -> (Self, Self) {
        let (a_tx, b_rx) = mpsc::channel();
        let (b_tx, a_rx) = mpsc::channel();
        (Self { tx: a_tx, rx: a_rx }, Self { tx: b_tx, rx: b_rx })
    }
}

impl Transport for MemoryTransport {
    fn send_frame(&mut self, frame: &Frame) -> Result<(), ChannelError> {
        self.tx.send(frame.encode()).map_err(|_| ChannelError::Closed)
    }

    fn recv_frame(&mut self) -> Result<Frame, ChannelError> {
        let buf = self.rx.recv().map_err(|_| ChannelError::Closed)?;
        let (frame, used) = Frame::decode(&buf)?;
        if used != buf.len() {
            return Err(ChannelError::Truncated);
        }
        Ok(frame)
    }
}

/// A protected session bound to a transport.
#[derive(Debug)]
pub struct Channel<T> {
    transport: T,
    session: SecureSession,
}

impl<T: Transport> Channel<T> {
    pub fn connect(mut transport: T, suite: CryptoSuite, rng: &mut dyn SecureRng) -> Result<Self, ChannelError> {
        let (hs, hello) = Handshake::initiate(suite, rng);
        transport.send_frame(&hello)?;
        let reply = transport.recv_frame()?;
        let session = hs.finish(&reply)?;
        Ok(Self { transport, session })
    }

    pub fn accept(mut transport: T, suite: CryptoSuite, rng: &mut dyn SecureRng) -> Result<Self, ChannelError> {
        let hello = transport.recv_frame()?;
        let (session, reply) = Handshake::respond(suite, &hello, rng)?;
        transport.send_frame(&reply)?;
        Ok(Self { transport, session })
    }

    pub fn session(&self) -> &SecureSession {
        &self.session
    }

    pub fn send(&mut self, kind: u8, body: &[u8]) -> Result<(), ChannelError> {
        let frame = self.session.seal(kind, body)?;
        self.transport.send_frame(&frame)
    }

    pub fn recv(&mut self) -> Result<(u8, Vec<u8>), ChannelError> {
        let frame = self.transport.recv_frame()?;
        self.session.open(&frame)
    }

    pub fn request(&mut self, kind: u8, body: &[u8]) -> Result<(u8, Vec<u8>), ChannelError> {
        self.send(kind, body)?;
        self.recv()
    }

    pub fn into_transport(self) -> T {
        self.transport
    }
}
