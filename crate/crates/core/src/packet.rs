use serde::{Deserialize, Serialize};

use crate::time::SimTime;

/// Payload carried by every full data segment.
pub const MSS: u32 = 1448;
/// Header overhead modelled on every packet (IP + TCP with timestamps).
pub const HEADER_BYTES: u32 = 52;
/// On-wire size of a full data segment.
pub const DATA_PACKET_BYTES: u32 = MSS + HEADER_BYTES;
/// On-wire size of a pure acknowledgement.
pub const ACK_PACKET_BYTES: u32 = HEADER_BYTES;

pub const MIN_PACKET_BYTES: u32 = 40;
pub const MAX_PACKET_BYTES: u32 = 1514;

pub type FlowId = u32;

/// A simulated segment or acknowledgement.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Packet {
    pub flow_id: FlowId,
    /// Byte offset of the first payload byte (data packets).
    pub seq_no: u64,
    /// Cumulative acknowledgement: next byte expected by the receiver.
    pub ack_no: u64,
    /// On-wire size, header included.
    pub size: u32,
    pub is_ack: bool,
    pub sent_at: SimTime,
    /// Set by the qdisc on admission.
    pub enqueued_at: SimTime,
    /// Selective acknowledgement blocks `[start, end)`, most recent first.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sack: Vec<(u64, u64)>,
}

/// Most SACK blocks one ACK carries.
pub const MAX_SACK_BLOCKS: usize = 3;

impl Packet {
    pub fn data(flow_id: FlowId, seq_no: u64, sent_at: SimTime) -> Self {
        Packet {
            flow_id,
            seq_no,
            ack_no: 0,
            size: DATA_PACKET_BYTES,
            is_ack: false,
            sent_at,
            enqueued_at: sent_at,
            sack: Vec::new(),
        }
    }

    pub fn ack(flow_id: FlowId, ack_no: u64, sent_at: SimTime) -> Self {
        Packet {
            flow_id,
            seq_no: 0,
            ack_no,
            size: ACK_PACKET_BYTES,
            is_ack: true,
            sent_at,
            enqueued_at: sent_at,
            sack: Vec::new(),
        }
    }

    pub fn payload_len(&self) -> u32 {
        if self.is_ack {
            0
        } else {
            self.size.saturating_sub(HEADER_BYTES)
        }
    }

    pub fn is_well_formed(&self) -> bool {
        (MIN_PACKET_BYTES..=MAX_PACKET_BYTES).contains(&self.size)
    }
}
