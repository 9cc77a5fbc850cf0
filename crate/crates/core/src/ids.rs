use std::borrow::Borrow;
use std::fmt;

use serde::{Deserialize, Serialize};

macro_rules! string_id {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(String);

        impl $name {
            pub fn new(id: impl Into<String>) -> Self {
                Self(id.into())
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl From<&str> for $name {
            fn from(s: &str) -> Self {
                Self(s.to_string())
            }
        }

        impl From<String> for $name {
            fn from(s: String) -> Self {
                Self(s)
            }
        }

        impl Borrow<str> for $name {
            fn borrow(&self) -> &str {
                &self.0
            }
        }

        impl AsRef<str> for $name {
            fn as_ref(&self) -> &str {
                &self.0
            }
        }
    };
}

string_id!(
    /// Identifier of a narrative graph.
    GraphId
);
string_id!(
    /// Identifier of a scene node, unique within its graph.
    NodeId
);
string_id!(
    /// Identifier of a transition edge, unique within its graph.
    EdgeId
);
string_id!(
    /// Identifier of a student session.
    SessionId
);

impl GraphId {
    pub fn fresh() -> Self {
        Self(uuid::Uuid::new_v4().to_string())
    }
}

impl SessionId {
    pub fn fresh() -> Self {
        Self(uuid::Uuid::new_v4().to_string())
    }
}

/// Prefix carried by every engine-generated node id, edge id and intent label.
pub const GENERATED_PREFIX: &str = "gen-";

/// Formats an engine-generated id: `gen-` plus a zero-padded counter.
pub fn generated_id(counter: u32) -> String {
    format!("{GENERATED_PREFIX}{counter:03}")
}

/// Parses the counter back out of an id produced by [`generated_id`].
pub fn generated_counter(id: &str) -> Option<u32> {
    let digits = id.strip_prefix(GENERATED_PREFIX)?;
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    digits.parse().ok()
}
