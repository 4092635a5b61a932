//! Compares the six oracle beamformers on freshly rendered 4-mic scenes, with
//! covariances from the whole utterance and from 500 ms and 100 ms segments.
//!
//! cargo run --release --example oracle_beamformers [n_scenes]

use fasbeam::cli::oracle_outputs;
use fasbeam::objectives::si_snr_improvement;
use fasbeam::oraclebf::{OracleMethod, OracleOptions};
use fasbeam::scenesim::{generate_split, SceneConfig, SceneRecord};

fn main() -> fasbeam::Result<()> {
    let n: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(5);
    let records: Vec<SceneRecord> = generate_split(&SceneConfig::default(), 0, "test", n)?
        .iter()
        .map(SceneRecord::from)
        .collect();

    println!("{:<12} {:>9} {:>9} {:>9}", "method", "full", "500 ms", "100 ms");
    for m in OracleMethod::ALL {
        let mut row = format!("{:<12}", m.name());
        for seg in [None, Some(500.0), Some(100.0)] {
            if seg.is_some() && matches!(m, OracleMethod::TdMvdr | OracleMethod::TdMwf) {
                row.push_str(&format!(" {:>9}", "-"));
                continue;
            }
            let opts = OracleOptions {
                segment_ms: seg,
                ..OracleOptions::default()
            };
            let mut total = 0.0;
            for r in &records {
                let y = oracle_outputs(m, r, &opts)?;
                let mix = r.mixture.channel(r.manifest.reference);
                total += si_snr_improvement(&y[0], &r.targets[0], mix)?;
            }
            row.push_str(&format!(" {:>9.2}", total / n as f64));
        }
        println!("{row}");
    }
    println!("mean SI-SNRi in dB over {n} scenes");
    Ok(())
}
