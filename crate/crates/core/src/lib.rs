pub mod ids;
pub mod records;
pub mod table;
#[doc(hidden)]
pub mod testgen;
pub mod transcript;
pub mod standardize;
pub mod adapter;
pub mod bytelevel;
pub mod surprisal;
pub mod align;
pub mod annotate;
pub mod builder;
pub mod pipeline;
