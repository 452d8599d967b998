pub mod bench_lags;
pub mod bench_scaling;
pub mod degeneracy;
pub mod mcem;
pub mod simulate;
pub mod smooth;
