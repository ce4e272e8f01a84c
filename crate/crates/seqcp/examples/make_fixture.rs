//! Regenerates data/synthetic_temperature.csv: sixty years of monthly
//! temperatures with a seasonal cycle and a level shift two in-sample
//! standard deviations high, injected 200 months after the 120-month
//! historic window.

use std::fs;

use seqcp::pipeline::synthetic_monthly_series;

fn main() {
    let records = synthetic_monthly_series(7, 720, 120, Some(200), 2.0);
    let mut out = String::from("date,temperature\n");
    for r in &records {
        out.push_str(&format!("{},{}\n", r.timestamp, r.value));
    }
    fs::write("data/synthetic_temperature.csv", out).expect("write fixture");
    println!("wrote data/synthetic_temperature.csv ({} records)", records.len());
}
