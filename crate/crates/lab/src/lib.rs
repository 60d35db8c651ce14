//! IO companion for `ame-core`: JSON file formats for states, codes, and
//! protocol reports, plus a threaded wrapper for the bipartition scan.

pub mod formats;
pub mod parallel;
