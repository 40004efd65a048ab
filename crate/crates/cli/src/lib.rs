//! IO companion to `pctl-core`: line-oriented text formats for domains,
//! example sets, policies and states, plus the JSON run report emitted by
//! the `pctl` binary.

pub mod report;
pub mod textio;
