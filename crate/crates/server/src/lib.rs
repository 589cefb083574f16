pub mod client;
pub mod policy;
pub mod protocol;
pub mod server;
