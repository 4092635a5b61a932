//! Beampatterns of delay-and-sum steering filters: the main lobe follows the steering
//! direction. Writes CSV and PGM exports of one pattern.
//!
//! cargo run --release --example beampattern [out_dir]

use fasbeam::analysis::{
    beampattern, default_doa_grid, default_freq_grid, steering_filters, write_pgm, PATTERN_FLOOR_DB,
};
use fasbeam::scenesim::ArraySpec;

fn main() -> fasbeam::Result<()> {
    let array = ArraySpec::circular([0.0, 0.0], 6, 0.1, 1.0)?;
    let fs = 16000;
    let freqs = default_freq_grid(fs);
    let doas = default_doa_grid();
    for steer in [0.0, 60.0, 135.0, 250.0] {
        let h = steering_filters(&array, steer, fs, 64);
        let bp = beampattern(&h, 64, &array, fs, &freqs, &doas)?;
        let peaks: Vec<String> = [500.0, 1000.0, 2000.0, 4000.0]
            .iter()
            .map(|f| {
                let fi = freqs.iter().position(|x| x == f).unwrap_or(0);
                format!("{f} Hz -> {:.0}", bp.peak_doa(fi))
            })
            .collect();
        println!("steered to {steer:>5.0}: {}", peaks.join(", "));
    }

    let out = std::env::args()
        .nth(1)
        .map(std::path::PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("fasbeam_beampattern"));
    std::fs::create_dir_all(&out).map_err(|e| fasbeam::Error::io(&out, e))?;
    let h = steering_filters(&array, 60.0, fs, 64);
    let bp = beampattern(&h, 64, &array, fs, &freqs, &doas)?;
    let db = bp.normalized_db(PATTERN_FLOOR_DB);
    bp.write_csv(out.join("steer_60.csv"), &db)?;
    write_pgm(out.join("steer_60.pgm"), &db, PATTERN_FLOOR_DB)?;
    println!("wrote {}", out.join("steer_60.{csv,pgm}").display());
    Ok(())
}
