pub mod check;
pub mod lz;
pub mod strobe;
