pub mod bundle;
pub mod manifest;
pub mod plist;
pub mod probes;
pub mod resolution;
pub mod specindex;
pub mod risk;
pub mod report;
pub mod cli;
