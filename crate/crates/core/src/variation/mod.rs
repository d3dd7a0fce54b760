//! Second variation of the chord-length functional along billiard segments.
//!
//! [`operators`] holds the four second-derivative operators of `L` at a
//! chord, [`form`] assembles them into the block-tridiagonal form `δ²Φ` and
//! classifies it, [`jacobi`] propagates Jacobi fields and locates conjugate
//! points, and [`maximizer`] samples the maximizing sets `M_{x,n}`.

pub mod form;
pub mod jacobi;
pub mod maximizer;
pub mod operators;

pub use form::{
    assemble_form, default_tolerance, definiteness, sorted_eigen, tridiagonal, Classification, DefinitenessReport,
    SecondVariationForm,
};
pub use jacobi::{
    detect_conjugate, form_at_speed, jacobi_propagate, jacobi_residuals, kernel_field, ConjugatePoint, JacobiField,
    KERNEL_WINDOW,
};
pub use maximizer::{
    grazing_floor, maximizer_set_sample, maximizer_set_sample_with_floor, MaximizerSample, MaximizerSetSample,
    NestingCheck,
};
pub use operators::{chord_operators, one_bounce_form, segment_operators, ChordOperators, OneBounce};
