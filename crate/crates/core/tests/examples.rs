mod expression_dsl {
    include!(concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/examples/expression_dsl.rs"
    ));
}

#[test]
fn expression_dsl_runs() {
    expression_dsl::run_example().expect("expression_dsl example should run");
}

mod lipschitz_envelope {
    include!(concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/examples/lipschitz_envelope.rs"
    ));
}

#[test]
fn lipschitz_envelope_runs() {
    lipschitz_envelope::run_example().expect("lipschitz_envelope example should run");
}

mod bsde_lattice {
    include!(concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/examples/bsde_lattice.rs"
    ));
}

#[test]
fn bsde_lattice_runs() {
    bsde_lattice::run_example().expect("bsde_lattice example should run");
}

mod american_put_oracle {
    include!(concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/examples/american_put_oracle.rs"
    ));
}

#[test]
fn american_put_oracle_runs() {
    american_put_oracle::run_example().expect("american_put_oracle example should run");
}

mod double_barrier_schedule {
    include!(concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/examples/double_barrier_schedule.rs"
    ));
}

#[test]
fn double_barrier_schedule_runs() {
    double_barrier_schedule::run_example().expect("double_barrier_schedule example should run");
}

mod skorohod_diagnostics {
    include!(concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/examples/skorohod_diagnostics.rs"
    ));
}

#[test]
fn skorohod_diagnostics_runs() {
    skorohod_diagnostics::run_example().expect("skorohod_diagnostics example should run");
}

mod monte_carlo_cross_check {
    include!(concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/examples/monte_carlo_cross_check.rs"
    ));
}

#[test]
fn monte_carlo_cross_check_runs() {
    monte_carlo_cross_check::run_example().expect("monte_carlo_cross_check example should run");
}

mod driver_shift {
    include!(concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/examples/driver_shift.rs"
    ));
}

#[test]
fn driver_shift_runs() {
    driver_shift::run_example().expect("driver_shift example should run");
}

mod config_run {
    include!(concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/examples/config_run.rs"
    ));
}

#[test]
fn config_run_runs() {
    config_run::run_example().expect("config_run example should run");
}
