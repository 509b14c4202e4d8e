//! Relational item representations learned with TransR on the item graph.

mod corrupt;
mod transr;

pub use corrupt::{corrupt, corrupt_one};
pub use transr::{
    load_transr, relational_matrix, relational_repr, save_transr, train_transr, transr_distance, transr_example_gradient,
    triple_probability, RelationalVector, TransRConfig, TransRGradient, TransRModel, TransRReport,
};
