pub mod autodiff;
pub mod baseline;
pub mod channel;
pub mod cli;
pub mod exec;
pub mod ldpc;
pub mod link;
pub mod modem;
pub mod ofdm;
pub mod receiver;
pub mod seed;
