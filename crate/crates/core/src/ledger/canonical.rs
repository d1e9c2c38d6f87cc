//! Canonical JSON encoding and the hashes built on top of it.
//!
//! Objects are written with keys in lexicographic (byte) order, without
//! whitespace, integers in base 10 and reals in shortest round-trip form.

use std::fmt;
use std::io::Write;

use serde::de::{self, Deserializer};
use serde::{Deserialize, Serialize, Serializer};
use serde_json::Value;
use sha2::{Digest as _, Sha256};

use super::types::{Block, ChainState};

/// A 32-byte SHA-256 digest, hex encoded (lowercase) in JSON.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Digest(pub [u8; 32]);

impl Digest {
    pub const ZERO: Digest = Digest([0u8; 32]);

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    pub fn from_hex(s: &str) -> Result<Self, hex::FromHexError> {
        let mut out = [0u8; 32];
        hex::decode_to_slice(s, &mut out)?;
        Ok(Digest(out))
    }
}

impl fmt::Debug for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Digest({})", &self.to_hex()[..12])
    }
}

impl fmt::Display for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl Serialize for Digest {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for Digest {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        Digest::from_hex(&s).map_err(de::Error::custom)
    }
}

pub fn sha256(bytes: &[u8]) -> Digest {
    Digest(Sha256::digest(bytes).into())
}

/// Canonical bytes of any serializable value.
pub fn canonical_serialize<T: Serialize + ?Sized>(value: &T) -> Vec<u8> {
    let value = serde_json::to_value(value).expect("ledger values always encode to JSON");
    canonical_value_bytes(&value)
}

pub fn canonical_value_bytes(value: &Value) -> Vec<u8> {
    let mut out = Vec::with_capacity(256);
    write_value(&mut out, value);
    out
}

fn write_value(out: &mut Vec<u8>, value: &Value) {
    match value {
        Value::Object(map) => {
            let mut entries: Vec<(&String, &Value)> = map.iter().collect();
            entries.sort_by(|a, b| a.0.as_bytes().cmp(b.0.as_bytes()));
            out.push(b'{');
            for (i, (k, v)) in entries.into_iter().enumerate() {
                if i > 0 {
                    out.push(b',');
                }
                serde_json::to_writer(&mut *out, k).expect("string encodes");
                out.push(b':');
                write_value(out, v);
            }
            out.push(b'}');
        }
        Value::Array(items) => {
            out.push(b'[');
            for (i, v) in items.iter().enumerate() {
                if i > 0 {
                    out.push(b',');
                }
                write_value(out, v);
            }
            out.push(b']');
        }
        scalar => {
            // serde_json prints numbers with itoa/ryu, which is already the
            // base-10 / shortest round-trip form.
            write!(out, "{scalar}").expect("write to vec");
        }
    }
}

/// SHA-256 over the canonical encoding of the block without its `block_hash` field.
pub fn block_hash(block: &Block) -> Digest {
    let mut value = serde_json::to_value(block).expect("block encodes");
    if let Value::Object(map) = &mut value {
        map.remove("block_hash");
    }
    sha256(&canonical_value_bytes(&value))
}

pub fn state_digest(state: &ChainState) -> Digest {
    sha256(&canonical_serialize(state))
}

/// One canonical line of the block log (no trailing newline).
pub fn block_line(block: &Block) -> String {
    String::from_utf8(canonical_serialize(block)).expect("canonical JSON is UTF-8")
}
