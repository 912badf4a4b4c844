#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod cascade;
pub mod conic;
pub mod grid;
pub mod linalg;
pub mod relax;
pub mod schedule;
pub mod scopf;
