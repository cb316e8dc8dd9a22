pub mod oracle88;
