//! Payload encoding shared by the protocol machines.
//!
//! Protocol messages carry a single byte: a binary value, or for step-2/5
//! response pushes, a value-or-bot marker. Context (which protocol step a
//! message belongs to) is implied by the slot schedule, never carried on the
//! wire, so message size stays constant.

use std::collections::BTreeMap;

use crate::core::{Message, ProcessorId, Value};

/// Wire marker for the explicit `⊥` response.
pub const BOT: u8 = 2;

pub fn value_payload(v: Value) -> Vec<u8> {
    vec![v.bit()]
}

pub fn parse_value(payload: &[u8]) -> Option<Value> {
    match payload {
        [b] => Value::from_bit(*b).ok(),
        _ => None,
    }
}

/// Encode a step-2/5 response value; `None` is the explicit `⊥`.
pub fn response_payload(r: Option<Value>) -> Vec<u8> {
    vec![r.map_or(BOT, Value::bit)]
}

/// Decode a response payload. Outer `None` means malformed (ignored);
/// `Some(None)` is `⊥`.
pub fn parse_response(payload: &[u8]) -> Option<Option<Value>> {
    match payload {
        [b] if *b == BOT => Some(None),
        [b] => Value::from_bit(*b).ok().map(Some),
        _ => None,
    }
}

/// Map each admissible sender to the binary value it sent; malformed payloads
/// and senders failing `allowed` are ignored, duplicate senders keep the last
/// message.
pub fn latest_values(
    inbox: &[Message],
    mut allowed: impl FnMut(ProcessorId) -> bool,
) -> BTreeMap<ProcessorId, Value> {
    let mut out = BTreeMap::new();
    for m in inbox {
        if !allowed(m.sender) {
            continue;
        }
        if let Some(v) = parse_value(&m.payload) {
            out.insert(m.sender, v);
        }
    }
    out
}

/// Same as [`latest_values`] for response payloads (0, 1, or `⊥`).
pub fn latest_responses(
    inbox: &[Message],
    mut allowed: impl FnMut(ProcessorId) -> bool,
) -> BTreeMap<ProcessorId, Option<Value>> {
    let mut out = BTreeMap::new();
    for m in inbox {
        if !allowed(m.sender) {
            continue;
        }
        if let Some(r) = parse_response(&m.payload) {
            out.insert(m.sender, r);
        }
    }
    out
}

/// Broadcast one value to every member of `targets`, including the sender
/// itself (self-addressed messages are free).
pub fn broadcast(
    sender: ProcessorId,
    slot: usize,
    targets: &[ProcessorId],
    payload: Vec<u8>,
) -> Vec<Message> {
    targets
        .iter()
        .map(|&receiver| Message::unsigned(sender, receiver, slot, payload.clone()))
        .collect()
}
