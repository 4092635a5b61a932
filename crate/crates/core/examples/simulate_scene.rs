//! Renders one echoic enhancement scene, prints its geometry and levels, writes it to
//! disk and reads it back.
//!
//! cargo run --release --example simulate_scene [out_dir]

use fasbeam::scenesim::{read_scene, sample_scene, write_scene, SceneConfig, SourceKind};
use fasbeam::sigcore::{db, energy};

fn main() -> fasbeam::Result<()> {
    let cfg = SceneConfig::toy();
    let (speech, noise) = cfg.pool.load(cfg.sample_rate)?;
    let scene = sample_scene(&cfg, 42, &speech, &noise)?;

    let r = &scene.room;
    println!("room {:.2} x {:.2} x {:.2} m, T60 {:.2} s", r.length, r.width, r.height, r.t60);
    for (i, p) in scene.array.mic_positions().iter().enumerate() {
        println!("mic {i}: ({:.3}, {:.3}, {:.3})", p[0], p[1], p[2]);
    }
    for s in &scene.sources {
        let kind = if s.kind == SourceKind::Speech { "speech" } else { "noise" };
        println!("{kind:>6} at ({:.2}, {:.2}) gain {:+.1} dB", s.position[0], s.position[1], s.gain_db);
    }
    let mix = scene.mixture.channel(scene.reference());
    let target = &scene.targets[0];
    println!("SNR {:.1} dB on direct paths", scene.snr_db);
    println!(
        "direct-path target to residual ratio at the reference mic: {:.1} dB",
        db(energy(target) / energy(&mix.iter().zip(target).map(|(m, t)| m - t).collect::<Vec<_>>()))
    );

    let dir = std::env::args()
        .nth(1)
        .map(std::path::PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("fasbeam_scene"));
    let sdir = write_scene(&scene, &dir)?;
    let back = read_scene(&sdir)?;
    println!("wrote {} ({} samples, {} channels)", sdir.display(), back.mixture.len(), back.mixture.n_channels());
    Ok(())
}
