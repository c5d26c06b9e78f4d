//! Minimal blocking client for scripted sessions and tests.

use std::net::TcpStream;

use teleop_ass::mpc::OperatorReference;
use thiserror::Error;
use tungstenite::stream::MaybeTlsStream;
use tungstenite::{Message, WebSocket};

use crate::frames::{CommandFrame, FrameError, StateFrame};

#[derive(Debug, Error)]
pub enum ClientError {
    #[error(transparent)]
    Socket(#[from] tungstenite::Error),
    #[error(transparent)]
    Frame(#[from] FrameError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub struct TeleopClient {
    socket: WebSocket<MaybeTlsStream<TcpStream>>,
    session_id: String,
}

impl TeleopClient {
    /// Connects to `ws://host:port/teleop`.
    pub fn connect(url: &str, session_id: impl Into<String>) -> Result<Self, ClientError> {
        let (socket, _) = tungstenite::connect(url)?;
        if let MaybeTlsStream::Plain(s) = socket.get_ref() {
            s.set_nodelay(true).map_err(tungstenite::Error::Io)?;
        }
        Ok(Self {
            socket,
            session_id: session_id.into(),
        })
    }

    /// Next state frame, or `None` once the server has closed the session.
    pub fn next_frame(&mut self) -> Result<Option<StateFrame>, ClientError> {
        loop {
            match self.socket.read() {
                Ok(Message::Text(text)) => return Ok(Some(StateFrame::parse(text.as_str())?)),
                Ok(Message::Close(_)) => {
                    // Drain until the close handshake completes.
                    continue;
                }
                Ok(_) => continue,
                Err(tungstenite::Error::ConnectionClosed | tungstenite::Error::AlreadyClosed) => return Ok(None),
                Err(e) => return Err(e.into()),
            }
        }
    }

    pub fn send(&mut self, t_client: f64, reference: OperatorReference) -> Result<(), ClientError> {
        let frame = CommandFrame::new(t_client, reference, self.session_id.clone());
        self.send_raw(&serde_json::to_string(&frame)?)
    }

    /// Sends arbitrary text, for exercising the server's input checks.
    pub fn send_raw(&mut self, text: &str) -> Result<(), ClientError> {
        self.socket.send(Message::text(text))?;
        Ok(())
    }

    /// Closes the session without waiting for the server.
    pub fn close(mut self) {
        let _ = self.socket.close(None);
        let _ = self.socket.flush();
    }

    /// Drops the connection without a close handshake.
    pub fn abort(self) {
        if let MaybeTlsStream::Plain(s) = self.socket.get_ref() {
            let _ = s.shutdown(std::net::Shutdown::Both);
        }
    }
}
