#![cfg(unix)]

use std::path::Path;
use std::time::Duration;

use presetpick::dataset::{
    assemble_dataset, measure_transcode, measure_transcode_median, AssembleOptions, ChunkInput, CommandTemplate,
};
use presetpick::features::CategoricalCodebook;
use presetpick::stats::parse_chunk_stats_str;
use presetpick::{Error, Preset};

const STATS: &str = "meta sar=1/1 range=tv space=bt709 primaries=bt709 transfer=bt709 fps=30/1 bitrate=8000\n\
    frame 0 type=I mb=I:10,P:0,B:0,S:0 part=16x16:10,16x8:0,8x16:0,8x8:0,4x4:0 mv=\n\
    frame 1 type=P mb=I:0,P:10,B:0,S:0 part=16x16:10,16x8:0,8x16:0,8x8:0,4x4:0 mv=2:1\n";

fn template(body: &str) -> CommandTemplate {
    CommandTemplate::parse(&format!(
        "sh -c '{body}' stub {{input}} {{preset}} {{bitrate}} {{output}}"
    ))
    .unwrap()
}

#[test]
fn sleep_stub_is_timed_within_tolerance() {
    let t = template("sleep 0.1");
    let d = measure_transcode(&t, Path::new("in.mp4"), Preset::Medium, 6000.0, Path::new("/dev/null")).unwrap();
    assert!(
        d >= Duration::from_millis(50) && d <= Duration::from_millis(150),
        "{d:?}"
    );
    let m = measure_transcode_median(
        &t,
        Path::new("in.mp4"),
        Preset::Medium,
        6000.0,
        Path::new("/dev/null"),
        3,
    )
    .unwrap();
    assert!(
        m >= Duration::from_millis(50) && m <= Duration::from_millis(150),
        "{m:?}"
    );
}

#[test]
fn placeholders_reach_the_command() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out.txt");
    let t = template("echo \"$1 $2 $3\" > \"$4\"");
    measure_transcode(&t, Path::new("clip.mp4"), Preset::Veryfast, 4500.0, &out).unwrap();
    assert_eq!(std::fs::read_to_string(&out).unwrap().trim(), "clip.mp4 veryfast 4500");
}

#[test]
fn failing_command_is_reported() {
    let t = template("echo broken >&2; exit 3");
    let err = measure_transcode(&t, Path::new("a"), Preset::Fast, 1000.0, Path::new("b")).unwrap_err();
    match err {
        Error::CommandFailed { status, .. } => assert!(status.contains("broken"), "{status}"),
        other => panic!("unexpected {other}"),
    }
    let missing = CommandTemplate::parse("/no/such/binary {input} {preset} {bitrate} {output}").unwrap();
    assert!(
        measure_transcode(&missing, Path::new("a"), Preset::Fast, 1000.0, Path::new("b"))
            .unwrap_err()
            .is_io()
    );
}

#[test]
fn assembled_dataset_covers_every_cell() {
    let dir = tempfile::tempdir().unwrap();
    let chunks = vec![
        ChunkInput {
            stats: parse_chunk_stats_str(STATS, "a").unwrap(),
            media: "a.mp4".into(),
        },
        ChunkInput {
            stats: parse_chunk_stats_str(STATS, "b").unwrap(),
            media: "b.mp4".into(),
        },
    ];
    let opts = AssembleOptions {
        repeat: 1,
        output_dir: dir.path().to_path_buf(),
    };
    let ds = assemble_dataset(
        &chunks,
        &[3000.0, 6000.0],
        &template("true"),
        &CategoricalCodebook::default(),
        &opts,
    )
    .unwrap();
    assert_eq!(ds.len(), 2 * 2 * Preset::COUNT);
    ds.require_all_presets().unwrap();
    assert!(ds.records.iter().all(|r| r.transcode_time > 0.0));
    let bitrates: Vec<f64> = ds.records.iter().map(|r| r.features.output_bitrate()).collect();
    assert_eq!(bitrates.iter().filter(|&&b| b == 3000.0).count(), 18);
}
