//! Message custody and forwarding: buffers, TTL, copy tokens, the three
//! routing policies, and byte-level transfers over AP links.

mod buffer;
mod contact;
mod custody;
mod exchange;
mod policy;

pub use buffer::{Admission, Buffer, StoredCopy};
pub use contact::{replay_contacts, Contact, ReplayResult};
pub use custody::{Completion, Custody, MessageStatus, Outcome};
pub use exchange::{Exchange, TransferOutcome, TransferRecord};
pub use policy::{
    epidemic_select, snw_select, DesignatedAps, split_tokens, Epidemic, Hrson, RouterKind, RoutingPolicy,
    SelectView, SprayAndWait,
};
