pub mod output;
pub mod scenario;
pub mod sweep;
