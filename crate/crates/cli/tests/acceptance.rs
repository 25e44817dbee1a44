//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails. The synthetic benchmark (criteria 6–8) drives the
//! `fruitdx` binary; everything else calls the library directly.

use std::f64::consts::PI;
use std::panic::{self, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use fruitdx_core::classify::{predict_with, LabeledFeatures};
use fruitdx_core::eval::ReportRow;
use fruitdx_core::features::{read_feature_csv, write_feature_csv, FeatureRecord};
use fruitdx_core::imageio::{merge_channels, rgb_pixel_to_hsv, rgb_pixel_to_lab};
use fruitdx_core::{
    build_id_table, clbp_histogram, decode, kmeans_ab, lbp_histogram, rgb_to_hsv, rgb_to_lab, split_channels,
    train_multiclass, ChannelPlane, ColorSpace, DecodeMetric, DescriptorId, DescriptorKind, EvaluationReport,
    FeatureColorSpace, KMeansConfig, LbpParams, MagnitudeThreshold, MsvmModel, RasterImage,
};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        match $cond {
            true => {}
            false => return Err(format!($($fmt)+)),
        }
    };
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("LBP matches literal double-loop oracle", lbp_oracle),
        ("CLBP S/M/C match straight-line oracles", clbp_oracle),
        ("K-means monotone, exact two-color recovery, deterministic", kmeans_contract),
        ("ID-table decoding: undefeated class, 3-class table, tie-break", decoding),
        ("linear SVM separates 4-class corner blobs", svm_blobs),
        ("synthetic benchmark CLBP+HSV M=50 accuracy >= 90%", synthetic_accuracy),
        ("accuracy at M=50 >= M=10 - 2 points for every feature", trend),
        ("evaluate reports byte-identical across runs and threads", determinism),
        ("model, feature CSV and report CSV round-trips", round_trips),
        ("color anchors and lossless channel split", color_anchors),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(check))
            .unwrap_or_else(|p| Err(p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_else(|| "panic".into())));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS  {:>2}  {name}  [{detail}; {secs:.2}s]", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL  {:>2}  {name}  [{why}; {secs:.2}s]", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}

// ---------------------------------------------------------------------------
// Texture oracles

fn random_plane(rng: &mut ChaCha8Rng, w: usize, h: usize) -> ChannelPlane {
    ChannelPlane::from_fn(w, h, |_, _| f64::from(rng.random_range(0u8..=255)))
}

fn snap(x: f64) -> f64 {
    if (x - x.round()).abs() < 1e-9 {
        x.round()
    } else {
        x
    }
}

/// Neighbor `n` of (`row`, `col`): angle 2πn/N, column + R·cos, row − R·sin,
/// bilinear interpolation between the surrounding grid pixels.
fn neighbor(p: &ChannelPlane, row: usize, col: usize, n: usize, big_n: usize, r: f64) -> f64 {
    let theta = 2.0 * PI * n as f64 / big_n as f64;
    let x = snap(col as f64 + r * theta.cos());
    let y = snap(row as f64 - r * theta.sin());
    let (x0, y0) = (x.floor(), y.floor());
    let (fx, fy) = (x - x0, y - y0);
    let (x0, y0) = (x0 as usize, y0 as usize);
    let x1 = if fx > 0.0 { x0 + 1 } else { x0 };
    let y1 = if fy > 0.0 { y0 + 1 } else { y0 };
    let top = p.get(y0, x0) + fx * (p.get(y0, x1) - p.get(y0, x0));
    let bottom = p.get(y1, x0) + fx * (p.get(y1, x1) - p.get(y1, x0));
    top + fy * (bottom - top)
}

fn lbp_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let params = LbpParams { n: 8, r: 1 };
    let start = Instant::now();
    for t in 0..200 {
        let p = random_plane(&mut rng, 16, 16);
        let mut hist = vec![0.0f64; 256];
        let mut total = 0usize;
        for row in 1..15 {
            for col in 1..15 {
                let gc = p.get(row, col);
                let mut code = 0usize;
                for n in 0..8 {
                    if neighbor(&p, row, col, n, 8, 1.0) - gc >= 0.0 {
                        code += 1 << n;
                    }
                }
                hist[code] += 1.0;
                total += 1;
            }
        }
        for v in &mut hist {
            *v /= total as f64;
        }
        let got = lbp_histogram(&p, &params, None).map_err(|e| e.to_string())?.values;
        ensure!(got == hist, "plane {t}: histogram differs from oracle");
    }
    let elapsed = start.elapsed();
    ensure!(elapsed < Duration::from_secs(5), "took {elapsed:?}");
    Ok(format!("200 planes bin-exact in {:.3}s", elapsed.as_secs_f64()))
}

fn clbp_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let params = LbpParams { n: 8, r: 1 };
    for t in 0..200 {
        let p = random_plane(&mut rng, 16, 16);
        // Pass 1: neighbors, signs and the magnitude mean.
        let mut rows = Vec::new();
        let mut mag_sum = 0.0;
        let mut mag_count = 0usize;
        for row in 1..15 {
            for col in 1..15 {
                let gc = p.get(row, col);
                let g: Vec<f64> = (0..8).map(|n| neighbor(&p, row, col, n, 8, 1.0)).collect();
                for &gn in &g {
                    mag_sum += (gn - gc).abs();
                    mag_count += 1;
                }
                rows.push((gc, g));
            }
        }
        let c = mag_sum / mag_count as f64;
        let mut gray_sum = 0.0;
        for row in 0..16 {
            for col in 0..16 {
                gray_sum += p.get(row, col);
            }
        }
        let c_l = gray_sum / 256.0;

        let mut s = vec![0.0; 256];
        let mut m = vec![0.0; 256];
        let mut cc = vec![0.0; 2];
        for (gc, g) in &rows {
            let mut s_code = 0;
            let mut m_code = 0;
            for (n, gn) in g.iter().enumerate() {
                if gn - gc >= 0.0 {
                    s_code += 1 << n;
                }
                if (gn - gc).abs() >= c {
                    m_code += 1 << n;
                }
            }
            s[s_code] += 1.0;
            m[m_code] += 1.0;
            cc[usize::from(*gc >= c_l)] += 1.0;
        }
        let total = rows.len() as f64;
        let expected: Vec<f64> = s.iter().chain(&m).chain(&cc).map(|v| v / total).collect();

        let got = clbp_histogram(&p, &params, MagnitudeThreshold::MagnitudeMean, None).map_err(|e| e.to_string())?.values;
        ensure!(got.len() == 514, "length {}", got.len());
        ensure!(got[..256] == expected[..256], "plane {t}: CLBP_S differs");
        ensure!(got[256..512] == expected[256..512], "plane {t}: CLBP_M differs");
        ensure!(got[512..] == expected[512..], "plane {t}: CLBP_C differs");
        let lbp = lbp_histogram(&p, &params, None).map_err(|e| e.to_string())?.values;
        ensure!(got[..256] == lbp[..], "plane {t}: CLBP_S is not the LBP histogram");
    }
    Ok("200 planes, S/M/C exact, S == LBP".into())
}

// ---------------------------------------------------------------------------
// Segmentation

fn kmeans_contract() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut iterations = 0;
    for t in 0..50 {
        let (w, h) = (rng.random_range(8..24), rng.random_range(8..24));
        let data: Vec<f64> = (0..w * h)
            .flat_map(|_| [rng.random_range(0.0..100.0), rng.random_range(-100.0..100.0), rng.random_range(-100.0..100.0)])
            .collect();
        let lab = RasterImage::from_real(w, h, ColorSpace::Lab, data).map_err(|e| e.to_string())?;
        let cfg = KMeansConfig { k: rng.random_range(2..=6), seed: t, ..KMeansConfig::default() };
        let seg = kmeans_ab(&lab, &cfg).map_err(|e| e.to_string())?;
        iterations += seg.iterations;
        ensure!(
            seg.objective_history.windows(2).all(|w| w[1] <= w[0]),
            "image {t}: objective increased: {:?}",
            seg.objective_history
        );
    }

    let colors = [[50.0, 40.0, -20.0], [70.0, -30.0, 10.0]];
    let data: Vec<f64> = (0..12 * 10).flat_map(|i| colors[usize::from(i % 12 >= 5)]).collect();
    let lab = RasterImage::from_real(12, 10, ColorSpace::Lab, data).map_err(|e| e.to_string())?;
    let seg = kmeans_ab(&lab, &KMeansConfig { k: 2, seed: 9, ..KMeansConfig::default() }).map_err(|e| e.to_string())?;
    ensure!(seg.objective == 0.0, "two-color objective {}", seg.objective);
    let mut centroids = seg.centroids.clone();
    centroids.sort_by(|a, b| a[0].total_cmp(&b[0]));
    ensure!(centroids == vec![[-30.0, 10.0], [40.0, -20.0]], "centroids {centroids:?}");

    let data: Vec<f64> = (0..40 * 30).flat_map(|_| [rng.random_range(0.0..100.0), rng.random_range(-80.0..80.0), rng.random_range(-80.0..80.0)]).collect();
    let lab = RasterImage::from_real(40, 30, ColorSpace::Lab, data).map_err(|e| e.to_string())?;
    let cfg = KMeansConfig { k: 5, seed: 77, ..KMeansConfig::default() };
    let runs: Vec<_> = (0..3).map(|_| kmeans_ab(&lab, &cfg)).collect::<Result<_, _>>().map_err(|e| e.to_string())?;
    let key = |s: &fruitdx_core::SegmentationResult| {
        (s.labels.clone(), s.centroids.iter().flat_map(|c| c.map(f64::to_bits)).collect::<Vec<_>>(), s.objective.to_bits(), s.iterations)
    };
    ensure!(runs.iter().all(|r| key(r) == key(&runs[0])), "runs differ");
    Ok(format!("50 images ({iterations} iterations) monotone; exact recovery; 3 identical runs"))
}

// ---------------------------------------------------------------------------
// Classification

fn decoding() -> Outcome {
    let mut checked = 0;
    for n in 3..=5 {
        let table = build_id_table(n).map_err(|e| e.to_string())?;
        let cols = table.columns().to_vec();
        for bits in 0u32..(1 << cols.len()) {
            let outcomes: Vec<i8> = (0..cols.len()).map(|b| if bits >> b & 1 == 1 { 1 } else { -1 }).collect();
            let winner_of = |col: usize| if outcomes[col] == 1 { cols[col].0 } else { cols[col].1 };
            let undefeated: Vec<usize> = (0..n)
                .filter(|&c| (0..cols.len()).filter(|&k| cols[k].0 == c || cols[k].1 == c).all(|k| winner_of(k) == c))
                .collect();
            if let [u] = undefeated[..] {
                let (got, _) = decode(&outcomes, &table).map_err(|e| e.to_string())?;
                ensure!(got == u, "n={n} outcomes {outcomes:?}: decoded {got}, undefeated {u}");
                checked += 1;
            }
        }
    }
    let t3 = build_id_table(3).map_err(|e| e.to_string())?;
    let rows: Vec<Vec<i8>> = (0..3).map(|c| t3.row(c).to_vec()).collect();
    ensure!(rows == vec![vec![1, 1, 0], vec![-1, 0, 1], vec![0, -1, -1]], "3-class table rows {rows:?}");
    let (tie, d) = decode(&[1, -1, 1], &t3).map_err(|e| e.to_string())?;
    ensure!(tie == 0, "(+1,-1,+1) decoded to {tie}");
    ensure!(d.iter().all(|&x| (x - 5f64.sqrt()).abs() < 1e-12), "tie distances {d:?}");
    Ok(format!("{checked} consistent vectors; 3-class table exact; (+1,-1,+1) ties at sqrt(5) -> class 0"))
}

fn labeled(examples: Vec<(usize, Vec<f64>)>, n_classes: usize) -> LabeledFeatures {
    LabeledFeatures {
        class_names: (0..n_classes).map(|c| format!("c{c}")).collect(),
        descriptor: DescriptorId::default_for(DescriptorKind::Gch),
        colorspace: FeatureColorSpace::Rgb,
        examples,
    }
}

fn svm_blobs() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let noise = Normal::new(0.0, 0.05).unwrap();
    let corners = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]];
    let examples: Vec<(usize, Vec<f64>)> = corners
        .iter()
        .enumerate()
        .flat_map(|(c, xy)| (0..25).map(move |_| c).zip(std::iter::repeat(*xy)))
        .map(|(c, xy)| (c, vec![xy[0] + noise.sample(&mut rng), xy[1] + noise.sample(&mut rng)]))
        .collect();
    let start = Instant::now();
    let model = train_multiclass(&labeled(examples.clone(), 4), 1.0, 0).map_err(|e| e.to_string())?;
    let correct = examples
        .iter()
        .filter(|(c, x)| predict_with(&model, x, DecodeMetric::Literal).map(|p| p.class == *c).unwrap_or(false))
        .count();
    let elapsed = start.elapsed();
    ensure!(correct == 100, "{correct}/100 training points correct");
    ensure!(elapsed < Duration::from_secs(2), "took {elapsed:?}");
    Ok(format!("100/100 at C=1 in {:.3}s", elapsed.as_secs_f64()))
}

// ---------------------------------------------------------------------------
// Synthetic benchmark via the CLI

const BENCH_C: &str = "100";

struct Bench {
    _dir: tempfile::TempDir,
    clbp: Result<(EvaluationReport, Duration), String>,
    sweep: Result<String, String>,
    sweep_single_thread: Result<String, String>,
    sweep_repeat: Result<String, String>,
}

fn fruitdx(args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_fruitdx")).args(args).output().map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!("fruitdx {}: {}", args.join(" "), String::from_utf8_lossy(&out.stderr).trim()));
    }
    Ok(())
}

fn read(path: &Path) -> Result<String, String> {
    std::fs::read_to_string(path).map_err(|e| e.to_string())
}

fn sweep(data: &Path, report: &Path, threads: &str) -> Result<String, String> {
    let (data, report) = (data.to_str().unwrap(), report.to_str().unwrap());
    fruitdx(&[
        "--threads", threads, "--seed", "0", "evaluate", "--data", data, "--features", "gch,ccv,lbp,clbp",
        "--colorspaces", "rgb,hsv", "--train-per-class", "10,50", "--trials", "5", "--C", BENCH_C, "--report", report,
    ])?;
    read(Path::new(report))
}

fn bench() -> &'static Bench {
    static BENCH: OnceLock<Bench> = OnceLock::new();
    BENCH.get_or_init(|| {
        let dir = tempfile::tempdir().expect("tempdir");
        let data: PathBuf = dir.path().join("data");
        let data_s = data.to_str().unwrap();
        let path = |name: &str| dir.path().join(name);

        let start = Instant::now();
        let clbp = fruitdx(&["--seed", "0", "gen-dataset", "--out", data_s, "--per-class", "80", "--size", "128"])
            .and_then(|_| {
                fruitdx(&[
                    "--seed", "0", "evaluate", "--data", data_s, "--features", "clbp", "--colorspaces", "hsv",
                    "--train-per-class", "50", "--trials", "5", "--C", BENCH_C, "--report",
                    path("clbp.csv").to_str().unwrap(),
                ])
            })
            .and_then(|_| read(&path("clbp.csv")))
            .and_then(|text| EvaluationReport::read_csv(text.as_bytes()).map_err(|e| e.to_string()))
            .map(|r| (r, start.elapsed()));

        let sweep_main = sweep(&data, &path("sweep4.csv"), "4");
        let sweep_single_thread = sweep(&data, &path("sweep1.csv"), "1");
        let sweep_repeat = sweep(&data, &path("sweep4b.csv"), "4");
        Bench { _dir: dir, clbp, sweep: sweep_main, sweep_single_thread, sweep_repeat }
    })
}

fn synthetic_accuracy() -> Outcome {
    let (report, elapsed) = bench().clbp.clone()?;
    let row = report.rows.first().ok_or("empty report")?;
    ensure!(row.trials.len() == 5 && row.m == 50, "unexpected cell {} M={}", row.feature, row.m);
    ensure!(elapsed < Duration::from_secs(600), "took {elapsed:?}");
    ensure!(row.overall_acc >= 90.0, "mean accuracy {:.2}%", row.overall_acc);
    Ok(format!("4x80 images, C={BENCH_C}: mean {:.2}% (gen + evaluate {:.1}s)", row.overall_acc, elapsed.as_secs_f64()))
}

fn trend() -> Outcome {
    let text = bench().sweep.clone()?;
    let report = EvaluationReport::read_csv(text.as_bytes()).map_err(|e| e.to_string())?;
    let mut summary = Vec::new();
    for row in report.rows.iter().filter(|r| r.m == 50) {
        let low: &ReportRow = report.row(&row.feature, row.colorspace, 10).ok_or("missing M=10 row")?;
        ensure!(
            row.overall_acc >= low.overall_acc - 2.0,
            "{} {}: M=50 {:.2}% < M=10 {:.2}% - 2",
            row.feature.kind(),
            row.colorspace,
            row.overall_acc,
            low.overall_acc
        );
        summary.push(format!("{}/{} {:.1}->{:.1}", row.feature.kind(), row.colorspace, low.overall_acc, row.overall_acc));
    }
    ensure!(summary.len() == 8, "expected 8 cells, got {}", summary.len());
    Ok(summary.join(", "))
}

fn determinism() -> Outcome {
    let b = bench();
    let first = b.sweep.clone()?;
    ensure!(first == b.sweep_repeat.clone()?, "repeat run with --threads 4 differs");
    ensure!(first == b.sweep_single_thread.clone()?, "--threads 1 differs from --threads 4");
    Ok(format!("3 runs, {} bytes identical", first.len()))
}

// ---------------------------------------------------------------------------
// Round trips and color anchors

fn round_trips() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let dim = 24;
    let examples: Vec<(usize, Vec<f64>)> = (0..80)
        .map(|i| (i % 4, (0..dim).map(|d| rng.random_range(0.0..1.0) + if d % 4 == i % 4 { 0.5 } else { 0.0 }).collect()))
        .collect();
    let model = train_multiclass(&labeled(examples, 4), 10.0, 3).map_err(|e| e.to_string())?;
    let text = model.to_text().map_err(|e| e.to_string())?;
    let back = MsvmModel::read_from(text.as_bytes()).map_err(|e| e.to_string())?;
    ensure!(back.to_text().map_err(|e| e.to_string())? == text, "model text changed on rewrite");
    for _ in 0..100 {
        let x: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..2.0)).collect();
        let (a, b) = (predict_with(&model, &x, DecodeMetric::Literal), predict_with(&back, &x, DecodeMetric::Literal));
        let (a, b) = (a.map_err(|e| e.to_string())?, b.map_err(|e| e.to_string())?);
        ensure!(a.class == b.class && a.outcomes == b.outcomes, "prediction changed");
        ensure!(a.distances.iter().zip(&b.distances).all(|(p, q)| p.to_bits() == q.to_bits()), "distances changed");
        for (l, m) in model.learners.iter().zip(&back.learners) {
            ensure!(l.decision(&x).to_bits() == m.decision(&x).to_bits(), "decision value changed");
        }
    }

    let records: Vec<FeatureRecord> = (0..20)
        .map(|i| FeatureRecord {
            path: format!("class {},x/{i}.png", i % 3),
            label: format!("c\"{}", i % 3),
            descriptor: DescriptorId::default_for(DescriptorKind::Clbp),
            colorspace: FeatureColorSpace::Hsv,
            values: (0..30).map(|_| rng.random::<f64>() / f64::from(rng.random_range(1..1000))).collect(),
        })
        .collect();
    let mut buf = Vec::new();
    write_feature_csv(&mut buf, &records).map_err(|e| e.to_string())?;
    ensure!(read_feature_csv(buf.as_slice()).map_err(|e| e.to_string())? == records, "feature CSV changed");

    let report_text = bench().sweep.clone()?;
    let report = EvaluationReport::read_csv(report_text.as_bytes()).map_err(|e| e.to_string())?;
    ensure!(report.to_csv_string().map_err(|e| e.to_string())? == report_text, "report CSV changed on rewrite");
    Ok(format!("100 vectors bit-identical; {} feature rows; {} report rows", records.len(), report.rows.len()))
}

fn color_anchors() -> Outcome {
    let white = rgb_pixel_to_lab([255, 255, 255]);
    ensure!((white[0] - 100.0).abs() <= 0.01 && white[1].abs() < 0.01 && white[2].abs() < 0.01, "white -> {white:?}");
    let red = rgb_pixel_to_hsv([255, 0, 0]);
    ensure!(red == [0.0, 1.0, 1.0], "red -> {red:?}");

    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let img = RasterImage::rgb8_from_fn(13, 7, |_, _| [rng.random(), rng.random(), rng.random()]).map_err(|e| e.to_string())?;
    for (space, converted) in [
        (ColorSpace::Rgb8, img.clone()),
        (ColorSpace::Hsv, rgb_to_hsv(&img).map_err(|e| e.to_string())?),
        (ColorSpace::Lab, rgb_to_lab(&img).map_err(|e| e.to_string())?),
    ] {
        let back = merge_channels(&split_channels(&converted), space).map_err(|e| e.to_string())?;
        ensure!(back == converted, "{space:?} split/merge not lossless");
    }
    Ok(format!("white L*={:.4}; red HSV exact; RGB/HSV/Lab split lossless", white[0]))
}
