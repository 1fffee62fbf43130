//! Criterion benchmarks for the simulation, feature and training paths.
//! Run with `cargo bench -p koopinv-bench`.

use koopinv::collect::collect_record;
use koopinv::lti::build_example_system;
use koopinv::signals::ExcitationSpec;
use koopinv::Trajectory;

/// The clean excitation record of the example system over `seconds`.
pub fn example_record(seconds: f64) -> Trajectory {
    let spec = ExcitationSpec::default();
    collect_record(&build_example_system(), &spec, 0.01, seconds).expect("example record")
}
