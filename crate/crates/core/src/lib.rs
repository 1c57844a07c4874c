pub mod allocation;
pub mod inversion;
pub mod matcore;
pub mod mcsim;
pub mod riskmeasures;
pub mod wishart;
