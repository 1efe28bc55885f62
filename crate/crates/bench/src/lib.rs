//! Fixtures shared by the benchmarks in `benches/`.

use markmle::simulate::{gen_example, ExampleSpec};
use markmle::Observation;

/// A simulated dataset from one of the four examples, fixed seed.
pub fn fixture(example: u8, n: usize) -> Vec<Observation> {
    gen_example(&ExampleSpec::new(example, n, 1).expect("valid example"))
}
