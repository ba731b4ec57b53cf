// Driving the solver from a JSON configuration, as the command line does.

use rbsde::io::{dispatch, parse_config, Command, EXIT_OK};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::temp_dir().join("rbsde-config-example");
    let text = format!(
        r#"{{
            "horizon": 1,
            "steps": 50,
            "driver": "-0.05 * y",
            "growth_k": 0.05,
            "terminal": "pos(1 - exp(x - 0.5))",
            "lower": "pos(1 - exp(x - 0.5 * t))",
            "penalty": {{ "m": [4, 16, 64, 256], "n": [256] }},
            "output": {{ "dir": {:?}, "formats": ["csv"] }}
        }}"#,
        out.display().to_string()
    );
    let (spec, plan) = parse_config(&text)?;
    println!("config hash {}", plan.config_hash);
    for command in [Command::Validate, Command::Oracle, Command::Schedule] {
        let outcome = dispatch(command, &spec, &plan);
        println!("{command}: exit {}", outcome.code);
        for m in &outcome.messages {
            println!("  {m}");
        }
        if outcome.code != EXIT_OK {
            return Err(format!("{command} failed").into());
        }
    }
    print!("{}", std::fs::read_to_string(out.join("schedule.csv"))?);
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
