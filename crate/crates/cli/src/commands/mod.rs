pub mod apps;
pub mod estimate;
pub mod simulate;
