#![allow(dead_code)]

pub mod consistency;
pub mod identification;
pub mod mpc;
pub mod sync;
