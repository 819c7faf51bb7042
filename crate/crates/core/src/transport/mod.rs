//! TCP endpoints: a bulk sender and an immediate-ACK receiver.

mod receiver;
pub mod rtt;
mod sender;

pub use receiver::Receiver;
pub use rtt::RttEstimator;
pub use sender::{FlowState, Outbox, Sender, SenderTimer};

use crate::packet::FlowId;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TransportError {
    #[error("flow {flow_id}: ack {ack_no} beyond highest sent byte {snd_max}")]
    AckBeyondSent { flow_id: FlowId, ack_no: u64, snd_max: u64 },
}
