//! Config file to CSV trace, the same path `barycenter run` takes, followed
//! by reading the trace back.

use async_barycenter::config::{preset, PresetKind, RunConfig};
use async_barycenter::experiments::{parse_csv, write_csv};
use async_barycenter::sim::run_sim;
use async_barycenter::topology::{TopologyKind, TopologySpec};

fn main() -> async_barycenter::Result<()> {
    let mut cfg = preset(PresetKind::Quadratic, TopologySpec::new(TopologyKind::Star, 8))?;
    cfg.sim.horizon_s = 30.0;
    cfg.eval.eval_every_s = 5.0;
    let text = cfg.to_json();
    println!("{text}");

    let run = RunConfig::from_json(&text)?.prepare()?;
    let out = run_sim(&run.graph, &run.objective, &run.sim)?;
    let mut csv = Vec::new();
    write_csv(&out.trace, &mut csv)?;
    print!("{}", String::from_utf8_lossy(&csv));

    let back = parse_csv(csv.as_slice())?;
    assert_eq!(back, out.trace);
    Ok(())
}
