//! Pandemic impact composite indicator engine.
//!
//! Raw daily counts become five criteria ([`epicriteria`]), each mapped to a
//! 0..=180 impact scale by a piecewise-linear value function
//! ([`valuemodel`]) elicited with the deck-of-cards method ([`dcm`]). The
//! weighted sum of the five values is the daily indicator, classified into
//! chromatic states ([`aggregator`]). [`sensitivity`] bounds the indicator
//! under perturbed data, value functions and weights; [`counterfactual`]
//! estimates the indicator with severity ratios frozen at a pivot day.

pub mod aggregator;
pub mod counterfactual;
pub mod dcm;
pub mod epicriteria;
pub mod error;
pub mod numfmt;
pub mod sensitivity;
pub mod valuemodel;

#[cfg(test)]
mod properties;

pub use error::{PaciError, Result};
