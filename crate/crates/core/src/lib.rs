pub mod channel;
pub mod error;
pub mod estimation;
pub mod keyrate;
pub mod lp;
pub mod photon;
pub mod runner;
pub mod special;
