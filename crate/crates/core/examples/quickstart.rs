//! Minimal library walkthrough: extract a boundary, tile a zonotope, run a
//! short reachability computation and score it.

use zonoreach::boundary::extract_boundary;
use zonoreach::inner::{inner_reach, InnerParams};
use zonoreach::metrics::{gamma_min_box, simulation_hull, soundness_check};
use zonoreach::ode::benchmark;
use zonoreach::tiling::tile_zonotope;
use zonoreach::zonotope::Zonotope;
use zonoreach::DEFAULT_TOL;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // geometry on a 3-d zonotope with four generators
    let z = Zonotope::from_columns(
        vec![4.0, 4.0, 2.0],
        &[
            vec![1.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0],
            vec![1.0, 1.0, 0.0],
            vec![0.0, 0.0, 1.0],
        ],
    )?;
    let (facets, _) = extract_boundary(&z, DEFAULT_TOL)?;
    println!("boundary: {} facets", facets.len());
    let tiles = tile_zonotope(&z, DEFAULT_TOL)?;
    println!("tiling:   {} non-overlapping tiles", tiles.len());

    // a short verified inner-approximation run on a bundled benchmark
    let bench = benchmark("ElectroOsc")?;
    let params = InnerParams { h: 0.05, n_steps: 10, ..Default::default() };
    let records = inner_reach(&bench.system, &bench.x0, &params)?;
    let last = records.last().expect("at least one step");
    let u = last.candidate.as_ref().expect("verified step");
    let t = last.t_start + last.h;
    println!("reach:    {} verified steps to t = {t}", records.len());

    let hull = simulation_hull(&bench.system, &bench.x0, t, 500, 7)?;
    let gamma = gamma_min_box(u, &hull)?;
    let sound = soundness_check(&bench.system, u, &bench.x0, t, 500, 7)?;
    println!("quality:  gamma_min = {gamma:.3}, soundness = {sound:.3}");
    Ok(())
}
