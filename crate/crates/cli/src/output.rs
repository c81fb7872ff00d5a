//! Output formatting: CSV with locale-free 12-significant-digit numbers,
//! JSON detail records, and the frozen JSONL transcript schema.

use finitekey::authsim::{DeliveryStatus, Direction, Payload, TranscriptEvent};

/// Formats one numeric cell: integers verbatim, everything else in
/// scientific notation with 12 significant digits and a `.` separator.
pub fn fmt_num(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if x.fract() == 0.0 && x.abs() < 1e15 {
        return format!("{}", x as i64);
    }
    format!("{x:.11e}")
}

/// One CSV row from already-formatted cells.
pub fn csv_row(cells: &[String]) -> String {
    cells.join(",")
}

fn hex(bytes: &[u8]) -> String {
    let mut s = String::with_capacity(bytes.len() * 2);
    for b in bytes {
        s.push_str(&format!("{b:02x}"));
    }
    s
}

fn json_escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

/// One transcript event as a JSON line. Schema (frozen):
/// `{"direction":"a_to_b"|"b_to_a","sender_index":u,"receiver_index":u,
///   "sent_payload":"<hex>","payload":"<hex>"|"auth_abort",
///   "t_sent":f,"t_received":f,"status":"delivered"|"auth_abort"}`.
pub fn transcript_json_line(event: &TranscriptEvent) -> String {
    let direction = match event.direction {
        Direction::AToB => "a_to_b",
        Direction::BToA => "b_to_a",
    };
    let payload = match &event.payload {
        Payload::Data(bytes) => format!("\"{}\"", json_escape(&hex(bytes))),
        Payload::AuthAbort => "\"auth_abort\"".to_string(),
    };
    let status = match event.status {
        DeliveryStatus::Delivered => "delivered",
        DeliveryStatus::AuthAbort => "auth_abort",
    };
    format!(
        "{{\"direction\":\"{direction}\",\"sender_index\":{},\"receiver_index\":{},\"sent_payload\":\"{}\",\"payload\":{payload},\"t_sent\":{},\"t_received\":{},\"status\":\"{status}\"}}",
        event.sender_index,
        event.receiver_index,
        hex(&event.sent_payload),
        fmt_num(event.t_sent),
        fmt_num(event.t_received),
    )
}
