pub mod group;
pub mod tiling;
pub mod filtration;
pub mod ncalg;
pub mod report;
pub mod czdec;
pub mod ergodic;
