//! CSV and JSON writers. Rows end in LF; Markov states and buffers are
//! one-based.

use pnc_core::sim::{self, PolicySummary, RegionPoint, SimulationTrace};
use serde_json::json;

fn writer() -> csv::Writer<Vec<u8>> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new())
}

fn finish(w: csv::Writer<Vec<u8>>) -> anyhow::Result<Vec<u8>> {
    w.into_inner().map_err(|e| anyhow::anyhow!("{e}"))
}

/// `t,sigma,q_1..q_n,u_1..u_m,s_1..s_m,a_1..a_n`.
pub fn trace_csv(trace: &SimulationTrace, n: usize, m: usize) -> anyhow::Result<Vec<u8>> {
    let mut w = writer();
    let mut header = vec!["t".to_string(), "sigma".to_string()];
    header.extend((1..=n).map(|i| format!("q_{i}")));
    header.extend((1..=m).map(|j| format!("u_{j}")));
    header.extend((1..=m).map(|j| format!("s_{j}")));
    header.extend((1..=n).map(|i| format!("a_{i}")));
    w.write_record(&header)?;
    let bit = |b: &bool| if *b { "1".to_string() } else { "0".to_string() };
    for s in &trace.slots {
        let mut row = vec![s.t.to_string(), (s.sigma + 1).to_string()];
        row.extend(s.q.iter().map(|x| x.to_string()));
        row.extend(s.u.iter().map(bit));
        row.extend(s.link_success.iter().map(bit));
        row.extend(s.arrivals.iter().map(|x| x.to_string()));
        w.write_record(&row)?;
    }
    finish(w)
}

pub fn summary_json(trace: &SimulationTrace) -> String {
    let verdict = sim::classify_stability(
        trace,
        sim::DEFAULT_WINDOW_FRACTION,
        sim::DEFAULT_SLOPE_THRESHOLD,
    )
    .ok();
    let value = json!({
        "avg_queue": trace.average_queue(),
        "final_queue": trace.final_queue(),
        "slope": verdict.map(|v| v.slope),
        "stable": verdict.map(|v| v.stable),
        "total_departures": trace.total_departures(),
    });
    let mut text = serde_json::to_string_pretty(&value).expect("summary serialises");
    text.push('\n');
    text
}

pub fn region_csv(points: &[RegionPoint]) -> anyhow::Result<Vec<u8>> {
    let mut w = writer();
    w.write_record(["a1", "a2", "stable_fraction", "stable"])?;
    for p in points {
        w.write_record([
            p.a1.to_string(),
            p.a2.to_string(),
            p.stable_fraction.to_string(),
            p.stable.to_string(),
        ])?;
    }
    finish(w)
}

pub fn compare_csv(rows: &[PolicySummary]) -> anyhow::Result<Vec<u8>> {
    let mut w = writer();
    w.write_record(["policy", "horizon", "buffer", "avg_queue"])?;
    for r in rows {
        for (i, q) in r.avg_queue.iter().enumerate() {
            w.write_record([
                r.config.kind.label().to_string(),
                r.config.horizon.to_string(),
                (i + 1).to_string(),
                q.to_string(),
            ])?;
        }
    }
    finish(w)
}
