//! Incremental regularized least squares classification (RLSC) for
//! imbalanced class streams.
//!
//! The classifier keeps the Cholesky factor of `XᵀX + λI` and the
//! cross-product `XᵀY`, so each new example costs `O(d²)` regardless of how
//! many have been seen, and a class seen for the first time only appends a
//! column. Recoding rescales the targets by inverse class frequencies at
//! prediction time, which moves the decision rule towards the one a
//! balanced prior would give.
//!
//! ```
//! use irlsc::classifier::RlscState;
//!
//! let mut model = RlscState::new(2, 1e-3, 1.0).unwrap();
//! model.partial_fit(&[1.0, 0.0], 0).unwrap();
//! model.partial_fit(&[0.0, 1.0], 1).unwrap();
//! assert_eq!(model.predict(&[0.9, 0.1]).unwrap(), 0);
//! ```

pub mod bayes_oracle;
pub mod classifier;
pub mod datasets;
pub mod harness;
pub mod linalg;
pub mod model_selection;
