//! Simulator for the two-party classical message exchange under the
//! practical authenticated-channel model, with the authentication
//! post-processing (APP) and delayed-APP state machines.
//!
//! The channel model has two rules. Timing: a message received before it
//! was sent arrives as `auth-abort`. Content: a message received after it
//! was sent is either delivered verbatim or arrives as `auth-abort`.
//! Blocking a message beyond a fixed timeout also yields `auth-abort`.
//! Global times exist only in the simulation; the parties never read them.

use alloc::vec::Vec;

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::{Error, Result};

/// Wire transit time of an unmolested message, in simulation time units.
pub const TRANSIT_TIME: f64 = 1.0;
/// Blocking duration after which the receiver records an auth-abort.
pub const BLOCK_TIMEOUT: f64 = 1e3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Direction {
    AToB,
    BToA,
}

/// What a receiver ends up holding for one message.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Payload {
    Data(Vec<u8>),
    AuthAbort,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum DeliveryStatus {
    Delivered,
    AuthAbort,
}

/// One classical message record.
#[derive(Debug, Clone, PartialEq)]
pub struct TranscriptEvent {
    pub direction: Direction,
    /// Message index from the sender's perspective (per direction).
    pub sender_index: u64,
    /// Message index from the receiver's perspective (per direction).
    pub receiver_index: u64,
    /// Bytes the sender put on the wire.
    pub sent_payload: Vec<u8>,
    /// What the receiver got.
    pub payload: Payload,
    pub t_sent: f64,
    pub t_received: f64,
    pub status: DeliveryStatus,
}

/// A message a party intends to send.
#[derive(Debug, Clone, PartialEq)]
pub struct SendEvent {
    pub direction: Direction,
    pub payload: Vec<u8>,
    pub t_sent: f64,
}

/// Eve's per-message choice.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AdversaryAction {
    Pass,
    /// Extra delay on top of the transit time; beyond the timeout the
    /// receiver records auth-abort.
    Delay(f64),
    Drop,
    Tamper,
    InjectEarly,
}

/// Eve's strategy: one action per core message and per post-processing
/// message, in order; anything beyond the lists passes untouched.
#[derive(Debug, Clone, PartialEq)]
pub struct AdversaryPolicy {
    core: Vec<AdversaryAction>,
    post: Vec<AdversaryAction>,
}

impl AdversaryPolicy {
    pub fn honest() -> Self {
        AdversaryPolicy {
            core: Vec::new(),
            post: Vec::new(),
        }
    }

    pub fn explicit(core: Vec<AdversaryAction>, post: Vec<AdversaryAction>) -> Self {
        AdversaryPolicy { core, post }
    }

    /// Samples a policy from the seed: each message independently passes
    /// with probability 1/2, otherwise one of the four interventions is
    /// picked uniformly.
    pub fn randomized(seed: u64, n_core: usize, n_post: usize) -> Self {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let draw = |rng: &mut ChaCha12Rng| {
            if rng.next_u32().is_multiple_of(2) {
                AdversaryAction::Pass
            } else {
                match rng.next_u32() % 4 {
                    0 => AdversaryAction::Delay((rng.next_u32() % 2000) as f64),
                    1 => AdversaryAction::Drop,
                    2 => AdversaryAction::Tamper,
                    _ => AdversaryAction::InjectEarly,
                }
            }
        };
        let core = (0..n_core).map(|_| draw(&mut rng)).collect();
        let post = (0..n_post).map(|_| draw(&mut rng)).collect();
        AdversaryPolicy { core, post }
    }

    fn core_action(&self, i: usize) -> AdversaryAction {
        self.core.get(i).copied().unwrap_or(AdversaryAction::Pass)
    }

    fn post_action(&self, i: usize) -> AdversaryAction {
        self.post.get(i).copied().unwrap_or(AdversaryAction::Pass)
    }
}

fn transmit(
    direction: Direction,
    index: u64,
    payload: &[u8],
    t_sent: f64,
    action: AdversaryAction,
) -> TranscriptEvent {
    let (received, t_received, status) = match action {
        AdversaryAction::Pass => (
            Payload::Data(payload.to_vec()),
            t_sent + TRANSIT_TIME,
            DeliveryStatus::Delivered,
        ),
        AdversaryAction::Delay(dt) => {
            let dt = dt.max(0.0);
            if TRANSIT_TIME + dt > BLOCK_TIMEOUT {
                // Blocked too long: the receiver gives up and records an
                // auth-abort at the timeout.
                (Payload::AuthAbort, t_sent + BLOCK_TIMEOUT, DeliveryStatus::AuthAbort)
            } else {
                (
                    Payload::Data(payload.to_vec()),
                    t_sent + TRANSIT_TIME + dt,
                    DeliveryStatus::Delivered,
                )
            }
        }
        AdversaryAction::Drop => (
            Payload::AuthAbort,
            t_sent + BLOCK_TIMEOUT,
            DeliveryStatus::AuthAbort,
        ),
        AdversaryAction::Tamper => (
            // Modified content fails authentication on arrival.
            Payload::AuthAbort,
            t_sent + TRANSIT_TIME,
            DeliveryStatus::AuthAbort,
        ),
        AdversaryAction::InjectEarly => (
            // Delivery before the send time violates the timing rule.
            Payload::AuthAbort,
            t_sent - 0.5 * TRANSIT_TIME,
            DeliveryStatus::AuthAbort,
        ),
    };
    TranscriptEvent {
        direction,
        sender_index: index,
        receiver_index: index,
        sent_payload: payload.to_vec(),
        payload: received,
        t_sent,
        t_received,
        status,
    }
}

/// Runs a schedule of sends through the authenticated channel under the
/// given policy. Send times must be strictly increasing per direction.
pub fn run_channel(schedule: &[SendEvent], policy: &AdversaryPolicy) -> Result<Vec<TranscriptEvent>> {
    let mut last_t = [f64::NEG_INFINITY; 2];
    let mut index = [0u64; 2];
    let mut events = Vec::with_capacity(schedule.len());
    for (k, send) in schedule.iter().enumerate() {
        if !send.t_sent.is_finite() {
            return Err(Error::Domain("send times must be finite"));
        }
        let d = send.direction as usize;
        if send.t_sent <= last_t[d] {
            return Err(Error::Domain("send times must be strictly increasing per direction"));
        }
        last_t[d] = send.t_sent;
        events.push(transmit(
            send.direction,
            index[d],
            &send.payload,
            send.t_sent,
            policy.core_action(k),
        ));
        index[d] += 1;
    }
    Ok(events)
}

const MSG_ACCEPT: &[u8] = b"accept";
const MSG_ABORT: &[u8] = b"abort";

/// Protocol phase of one party's authentication post-processing.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AppPhase {
    CheckingCoreAborts,
    Exchanging,
    Done,
}

/// One party's view during post-processing: the key register (length only,
/// with ⊥ encoded as `None`), whether an auth-abort was seen, and the
/// protocol phase.
#[derive(Debug, Clone, PartialEq)]
pub struct PartyState {
    pub key_len: Option<usize>,
    pub received_aborts: bool,
    pub phase: AppPhase,
}

impl PartyState {
    fn new(key_len: Option<usize>) -> Self {
        PartyState {
            key_len,
            received_aborts: false,
            phase: AppPhase::CheckingCoreAborts,
        }
    }

    fn abort(&mut self) {
        self.key_len = None;
    }

    fn len(&self) -> usize {
        self.key_len.unwrap_or(0)
    }
}

/// Outcome of a post-processing run: final key lengths (⊥ ↦ 0) and the
/// messages exchanged during the post-processing phase.
#[derive(Debug, Clone, PartialEq)]
pub struct PostProcessingOutcome {
    pub l_a: usize,
    pub l_b: usize,
    pub events: Vec<TranscriptEvent>,
}

fn received_accept(event: &TranscriptEvent) -> bool {
    event.status == DeliveryStatus::Delivered && event.payload == Payload::Data(MSG_ACCEPT.to_vec())
}

fn core_end_time(events: &[TranscriptEvent]) -> f64 {
    events
        .iter()
        .flat_map(|e| [e.t_sent, e.t_received])
        .fold(0.0, f64::max)
}

/// Authentication post-processing after a core run over the authenticated
/// channel:
///
/// 1. each party aborts if any of its received core messages is auth-abort;
/// 2. Bob sends a preliminary accept/abort based on his key register;
/// 3. Alice sends her final accept iff her register is non-⊥ and she
///    received Bob's accept, else abort, and updates her register;
/// 4. Bob keeps his key only on a delivered accept.
///
/// Adversarial outcomes are valid results, not errors.
pub fn run_app(
    k_a: Option<usize>,
    k_b: Option<usize>,
    core_events: &[TranscriptEvent],
    policy: &AdversaryPolicy,
) -> Result<PostProcessingOutcome> {
    if let (Some(a), Some(b)) = (k_a, k_b) {
        if a != b {
            return Err(Error::Domain("core key registers must have equal lengths"));
        }
    }
    let mut alice = PartyState::new(k_a);
    let mut bob = PartyState::new(k_b);

    // APP 1-2: auth-aborts during the core force the receiver's register to ⊥.
    alice.received_aborts = core_events
        .iter()
        .any(|e| e.direction == Direction::BToA && e.status == DeliveryStatus::AuthAbort);
    bob.received_aborts = core_events
        .iter()
        .any(|e| e.direction == Direction::AToB && e.status == DeliveryStatus::AuthAbort);
    if alice.received_aborts {
        alice.abort();
    }
    if bob.received_aborts {
        bob.abort();
    }
    alice.phase = AppPhase::Exchanging;
    bob.phase = AppPhase::Exchanging;

    let t0 = core_end_time(core_events) + 1.0;
    let mut events = Vec::with_capacity(2);

    // APP 3: Bob's preliminary accept/abort.
    let prelim_payload = if bob.len() > 0 { MSG_ACCEPT } else { MSG_ABORT };
    let prelim = transmit(Direction::BToA, 0, prelim_payload, t0, policy.post_action(0));
    let prelim_accept = received_accept(&prelim);
    let t1 = prelim.t_received.max(t0) + 1.0;
    events.push(prelim);

    // APP 4-5: Alice's final decision; sending abort zeroes her register.
    let alice_accepts = alice.len() > 0 && prelim_accept;
    let final_payload = if alice_accepts { MSG_ACCEPT } else { MSG_ABORT };
    let final_msg = transmit(Direction::AToB, 0, final_payload, t1, policy.post_action(1));
    if !alice_accepts {
        alice.abort();
    }
    // APP 6: Bob keeps his key only on a delivered accept.
    if !received_accept(&final_msg) {
        bob.abort();
    }
    events.push(final_msg);
    alice.phase = AppPhase::Done;
    bob.phase = AppPhase::Done;

    Ok(PostProcessingOutcome {
        l_a: alice.len(),
        l_b: bob.len(),
        events,
    })
}

/// Checks a received transcript against the receiver's own records:
/// every paired message must have been received at or after its send time
/// with identical content, in both directions. Alice-knowable fields are
/// read from `transcript_a`, Bob-knowable fields from `transcript_b`.
pub fn verify_transcript(transcript_a: &[TranscriptEvent], transcript_b: &[TranscriptEvent]) -> bool {
    let a_sent: Vec<&TranscriptEvent> = transcript_a
        .iter()
        .filter(|e| e.direction == Direction::AToB)
        .collect();
    let b_recv: Vec<&TranscriptEvent> = transcript_b
        .iter()
        .filter(|e| e.direction == Direction::AToB)
        .collect();
    let b_sent: Vec<&TranscriptEvent> = transcript_b
        .iter()
        .filter(|e| e.direction == Direction::BToA)
        .collect();
    let a_recv: Vec<&TranscriptEvent> = transcript_a
        .iter()
        .filter(|e| e.direction == Direction::BToA)
        .collect();
    if a_sent.len() != b_recv.len() || b_sent.len() != a_recv.len() {
        return false;
    }
    for (sent, recv) in a_sent.iter().zip(&b_recv) {
        if sent.t_sent > recv.t_received {
            return false;
        }
        if recv.payload != Payload::Data(sent.sent_payload.clone()) {
            return false;
        }
    }
    for (sent, recv) in b_sent.iter().zip(&a_recv) {
        if sent.t_sent > recv.t_received {
            return false;
        }
        if recv.payload != Payload::Data(sent.sent_payload.clone()) {
            return false;
        }
    }
    true
}

/// Delayed authentication post-processing: the core ran over an
/// unauthenticated channel, so each party holds its own transcript (with
/// timestamps). Alice sends hers over the authenticated channel; Bob
/// verifies and both exchange a final accept/abort.
pub fn run_del_app(
    k_a: Option<usize>,
    k_b: Option<usize>,
    transcript_a: &[TranscriptEvent],
    transcript_b: &[TranscriptEvent],
    policy: &AdversaryPolicy,
) -> Result<PostProcessingOutcome> {
    if let (Some(a), Some(b)) = (k_a, k_b) {
        if a != b {
            return Err(Error::Domain("core key registers must have equal lengths"));
        }
    }
    let mut alice = PartyState::new(k_a);
    let mut bob = PartyState::new(k_b);
    alice.phase = AppPhase::Exchanging;
    bob.phase = AppPhase::Exchanging;

    let t0 = core_end_time(transcript_a).max(core_end_time(transcript_b)) + 1.0;
    let mut events = Vec::with_capacity(2);

    // dAPP 1: Alice's transcript travels over the authenticated channel.
    // Its content is the transcript itself; a placeholder body stands in
    // for the serialized bytes.
    let transcript_msg = transmit(Direction::AToB, 0, b"transcript", t0, policy.post_action(0));
    let transcript_ok = transcript_msg.status == DeliveryStatus::Delivered;
    let t1 = transcript_msg.t_received.max(t0) + 1.0;
    events.push(transcript_msg);

    // dAPP 2: Bob verifies when he actually received it.
    let bob_accepts = transcript_ok && verify_transcript(transcript_a, transcript_b);
    let verdict_payload = if bob_accepts { MSG_ACCEPT } else { MSG_ABORT };
    let verdict = transmit(Direction::BToA, 0, verdict_payload, t1, policy.post_action(1));

    // dAPP 3: Bob's register follows what he sent.
    if !bob_accepts {
        bob.abort();
    }
    // dAPP 4: Alice's register follows what she received.
    if !received_accept(&verdict) {
        alice.abort();
    }
    events.push(verdict);
    alice.phase = AppPhase::Done;
    bob.phase = AppPhase::Done;

    Ok(PostProcessingOutcome {
        l_a: alice.len(),
        l_b: bob.len(),
        events,
    })
}

/// Runs a core schedule over an *unauthenticated* channel and returns the
/// two party views. Tampering silently alters content, early injection
/// delivers before the send time, and drops truncate the receiver's list;
/// nothing is flagged until delayed authentication compares transcripts.
pub fn run_unauthenticated_exchange(
    schedule: &[SendEvent],
    policy: &AdversaryPolicy,
) -> Result<(Vec<TranscriptEvent>, Vec<TranscriptEvent>)> {
    let mut last_t = [f64::NEG_INFINITY; 2];
    let mut send_idx = [0u64; 2];
    let mut recv_idx = [0u64; 2];
    let mut view_a = Vec::new();
    let mut view_b = Vec::new();
    for (k, send) in schedule.iter().enumerate() {
        if !send.t_sent.is_finite() {
            return Err(Error::Domain("send times must be finite"));
        }
        let d = send.direction as usize;
        if send.t_sent <= last_t[d] {
            return Err(Error::Domain("send times must be strictly increasing per direction"));
        }
        last_t[d] = send.t_sent;
        let idx = send_idx[d];
        send_idx[d] += 1;

        let action = policy.core_action(k);
        let sender_event = TranscriptEvent {
            direction: send.direction,
            sender_index: idx,
            receiver_index: idx,
            sent_payload: send.payload.clone(),
            payload: Payload::Data(send.payload.clone()),
            t_sent: send.t_sent,
            t_received: send.t_sent, // the sender never learns this
            status: DeliveryStatus::Delivered,
        };
        let delivered = match action {
            AdversaryAction::Drop => None,
            AdversaryAction::Pass => Some((send.payload.clone(), send.t_sent + TRANSIT_TIME)),
            AdversaryAction::Delay(dt) => {
                Some((send.payload.clone(), send.t_sent + TRANSIT_TIME + dt.max(0.0)))
            }
            AdversaryAction::Tamper => {
                let mut modified = send.payload.clone();
                if let Some(first) = modified.first_mut() {
                    *first ^= 0xFF;
                } else {
                    modified.push(0xFF);
                }
                Some((modified, send.t_sent + TRANSIT_TIME))
            }
            AdversaryAction::InjectEarly => {
                Some((send.payload.clone(), send.t_sent - 0.5 * TRANSIT_TIME))
            }
        };
        let receiver_event = delivered.map(|(payload, t_received)| TranscriptEvent {
            direction: send.direction,
            sender_index: idx,
            receiver_index: recv_idx[d],
            sent_payload: send.payload.clone(),
            payload: Payload::Data(payload),
            t_sent: send.t_sent, // the receiver never learns this
            t_received,
            status: DeliveryStatus::Delivered,
        });
        match send.direction {
            Direction::AToB => {
                view_a.push(sender_event);
                if let Some(e) = receiver_event {
                    recv_idx[d] += 1;
                    view_b.push(e);
                }
            }
            Direction::BToA => {
                view_b.push(sender_event);
                if let Some(e) = receiver_event {
                    recv_idx[d] += 1;
                    view_a.push(e);
                }
            }
        }
    }
    Ok((view_a, view_b))
}
