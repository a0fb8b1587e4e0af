//! Poll-based messages between linked accounts.

use pecs_core::{LearnerRegistry, Timestamp};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const MAX_BODY_CHARS: usize = 2000;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub message_id: String,
    pub from_learner_id: String,
    pub to_learner_id: String,
    pub body: String,
    pub sent_at: Timestamp,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MessageError {
    #[error("{0:?} and {1:?} are not linked")]
    NotLinked(String, String),
    #[error("message body must not be empty")]
    EmptyBody,
    #[error("message body is longer than {MAX_BODY_CHARS} characters")]
    BodyTooLong,
}

impl MessageError {
    pub fn code(&self) -> &'static str {
        match self {
            MessageError::NotLinked(..) => "NotLinked",
            MessageError::EmptyBody => "EmptyBody",
            MessageError::BodyTooLong => "BodyTooLong",
        }
    }
}

/// Appends a message to `log`. `sent_at` is strictly increasing across the log.
pub fn send_message(
    log: &mut Vec<Message>,
    learners: &LearnerRegistry,
    from: &str,
    to: &str,
    body: &str,
    now: Timestamp,
) -> Result<Message, MessageError> {
    if !learners.can_message(from, to) {
        return Err(MessageError::NotLinked(from.to_string(), to.to_string()));
    }
    if body.trim().is_empty() {
        return Err(MessageError::EmptyBody);
    }
    if body.chars().count() > MAX_BODY_CHARS {
        return Err(MessageError::BodyTooLong);
    }
    let sent_at = log.last().map_or(now, |m| now.max(m.sent_at + 1));
    let message = Message {
        message_id: format!("msg-{}", log.len() + 1),
        from_learner_id: from.to_string(),
        to_learner_id: to.to_string(),
        body: body.to_string(),
        sent_at,
    };
    log.push(message.clone());
    Ok(message)
}

/// Both directions of the conversation between `viewer` and `peer`, oldest first.
pub fn list_messages<'a>(
    log: &'a [Message],
    learners: &LearnerRegistry,
    viewer: &str,
    peer: &str,
    since: Option<Timestamp>,
) -> Result<Vec<&'a Message>, MessageError> {
    if !learners.can_message(viewer, peer) {
        return Err(MessageError::NotLinked(viewer.to_string(), peer.to_string()));
    }
    // The log is already in sent_at order.
    Ok(log
        .iter()
        .filter(|m| {
            (m.from_learner_id == viewer && m.to_learner_id == peer)
                || (m.from_learner_id == peer && m.to_learner_id == viewer)
        })
        .filter(|m| since.is_none_or(|t| m.sent_at > t))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use pecs_core::{AccountRole, AdvancementRule};
    use std::collections::BTreeMap;

    fn registry() -> (LearnerRegistry, String, String, String) {
        let mut reg = LearnerRegistry::new(AdvancementRule::default(), 1000);
        let mut add = |name: &str, role| {
            reg.register(name, "password1", role, BTreeMap::new(), 1)
                .unwrap()
                .learner_id
                .clone()
        };
        let child = add("amal", AccountRole::Child);
        let therapist = add("dr-lee", AccountRole::Therapist);
        let stranger = add("sam", AccountRole::Parent);
        reg.link(&child, &therapist).unwrap();
        (reg, child, therapist, stranger)
    }

    #[test]
    fn linked_accounts_exchange_messages() {
        let (reg, child, therapist, _) = registry();
        let mut log = Vec::new();
        let m = send_message(&mut log, &reg, &therapist, &child, "Great job today", 10).unwrap();
        assert_eq!(m.message_id, "msg-1");
        assert_eq!(m.sent_at, 10);
        send_message(&mut log, &reg, &child, &therapist, "thanks", 10).unwrap();
        let listed = list_messages(&log, &reg, &child, &therapist, None).unwrap();
        assert_eq!(listed.len(), 2);
        assert!(listed[0].sent_at < listed[1].sent_at);
        assert!(list_messages(&log, &reg, &child, &therapist, Some(11)).unwrap().is_empty());
    }

    #[test]
    fn unlinked_and_empty_messages_are_refused() {
        let (reg, child, therapist, stranger) = registry();
        let mut log = Vec::new();
        assert_eq!(
            send_message(&mut log, &reg, &stranger, &child, "hi", 1).unwrap_err().code(),
            "NotLinked"
        );
        assert_eq!(send_message(&mut log, &reg, &therapist, &child, "  ", 1), Err(MessageError::EmptyBody));
        let long = "x".repeat(MAX_BODY_CHARS + 1);
        assert_eq!(send_message(&mut log, &reg, &therapist, &child, &long, 1), Err(MessageError::BodyTooLong));
        assert!(send_message(&mut log, &reg, &therapist, &child, &long[1..], 1).is_ok());
        assert!(list_messages(&log, &reg, &stranger, &child, None).is_err());
    }
}
