//! Integrates a three-phase epidemic and prints weekly totals.
//!
//! With a path argument it also writes the scenario (with a tweet feed) as
//! JSON, ready for `epifuse simulate --params`.

use epifuse::ingest::default_epoch;
use epifuse::observation::death_mean;
use epifuse::synthetic::Scenario;
use epifuse::transmission::simulate;

fn main() -> epifuse::Result<()> {
    if let Some(path) = std::env::args().nth(1) {
        let scenario = Scenario::demo(120, 7, &[("twitter", 0.05)]);
        let json = serde_json::to_string_pretty(&scenario).expect("scenario serialises");
        std::fs::write(&path, json).map_err(|e| epifuse::Error::Data(format!("{path}: {e}")))?;
        println!("wrote {path}");
    }
    let truth = Scenario::demo(140, 7, &[]).truth;
    let traj = simulate(&truth.transmission, default_epoch(), 140)?;
    let deaths = death_mean(&traj.i_new, &truth.deaths);

    println!("week  start       infections  expected deaths  susceptible");
    for week in 0..20 {
        let days = week * 7 + 1..week * 7 + 8;
        let inf: f64 = traj.i_new.values[days.clone()].iter().sum();
        let d: f64 = deaths.values[days.clone()].iter().sum();
        let s = traj.states[days.end - 1].s;
        println!("{week:>4}  {}  {inf:>10.0}  {d:>15.1}  {s:>11.0}", traj.i_new.date_at(days.start));
    }
    let last = traj.states.last().unwrap();
    println!("population check: {:.6e}", last.total());
    Ok(())
}
