//! Turns episode records into smoothed multi-seed curves and writes them as
//! CSV or a bare-bones SVG line chart.

use std::fmt::Write as _;
use std::io::{Read, Write};

use crate::env::MetaTaskId;
use crate::error::{Error, Result};
use crate::exploration::EpisodeRecord;
use crate::highlevel::format_f64;

#[derive(Debug, Clone, PartialEq)]
pub struct CurveSeries {
    /// Name of the x column (`episode` or `step`).
    pub x_label: String,
    pub x: Vec<u64>,
    pub mean: Vec<f64>,
    /// Population variance across seeds.
    pub variance: Vec<f64>,
    pub seed_count: usize,
    pub smoothing_window: usize,
}

impl CurveSeries {
    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn last_mean(&self) -> Option<f64> {
        self.mean.last().copied()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([self.x_label.as_str(), "mean", "variance"])?;
        for i in 0..self.len() {
            w.write_record([
                self.x[i].to_string(),
                format_f64(self.mean[i]),
                format_f64(self.variance[i]),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv output is utf-8")
    }

    /// Reads a curve CSV. Seed count and window are not stored in the file
    /// and come back as 1 and 0.
    pub fn read_csv<R: Read>(input: R) -> Result<CurveSeries> {
        let mut r = csv::Reader::from_reader(input);
        let headers = r.headers()?.clone();
        if headers.len() != 3 || &headers[1] != "mean" || &headers[2] != "variance" {
            return Err(Error::format("curve csv", 1, "expected header `<x>,mean,variance`"));
        }
        let mut curve = CurveSeries {
            x_label: headers[0].to_string(),
            x: Vec::new(),
            mean: Vec::new(),
            variance: Vec::new(),
            seed_count: 1,
            smoothing_window: 0,
        };
        for (i, rec) in r.records().enumerate() {
            let rec = rec?;
            let line = i + 2;
            let bad = |what: &str| Error::format("curve csv", line, format!("bad {what}"));
            curve.x.push(rec[0].parse().map_err(|_| bad("x"))?);
            curve.mean.push(rec[1].parse().map_err(|_| bad("mean"))?);
            let v: f64 = rec[2].parse().map_err(|_| bad("variance"))?;
            if v < 0.0 {
                return Err(bad("variance"));
            }
            curve.variance.push(v);
        }
        Ok(curve)
    }
}

/// Cumulative positive-sample counts per stage, one entry per episode.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct StageCounters {
    pub counts: [Vec<u64>; 4],
}

impl StageCounters {
    pub fn final_counts(&self) -> [u64; 4] {
        [0, 1, 2, 3].map(|k| self.counts[k].last().copied().unwrap_or(0))
    }

    pub fn stage(&self, task: MetaTaskId) -> &[u64] {
        &self.counts[task.index()]
    }
}

/// Trailing moving average; the first `window - 1` points average what is available.
pub fn moving_average(values: &[f64], window: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(values.len());
    let mut acc = 0.0;
    for i in 0..values.len() {
        acc += values[i];
        if i >= window {
            acc -= values[i - window];
        }
        let n = (i + 1).min(window);
        // recompute exactly once the running sum could have drifted
        let exact = if i % 4096 == 4095 {
            acc = values[i + 1 - n..=i].iter().sum();
            acc
        } else {
            acc
        };
        out.push(exact / n as f64);
    }
    out
}

/// Per-index mean and population variance across seeds. Values are sorted
/// before summation so the result does not depend on seed order. Series of
/// unequal length are cut to the shortest.
pub fn aggregate(series: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let len = series.iter().map(Vec::len).min().unwrap_or(0);
    let n = series.len() as f64;
    let mut mean = Vec::with_capacity(len);
    let mut var = Vec::with_capacity(len);
    let mut column = Vec::with_capacity(series.len());
    for i in 0..len {
        column.clear();
        column.extend(series.iter().map(|s| s[i]));
        column.sort_by(f64::total_cmp);
        let m = column.iter().sum::<f64>() / n;
        let mut devs: Vec<f64> = column.iter().map(|v| (v - m).powi(2)).collect();
        devs.sort_by(f64::total_cmp);
        mean.push(m);
        var.push(devs.iter().sum::<f64>() / n);
    }
    (mean, var)
}

fn smoothed_curve(per_seed: Vec<Vec<f64>>, window: usize) -> Result<CurveSeries> {
    if window < 1 {
        return Err(Error::Config("smoothing window must be >= 1".into()));
    }
    if per_seed.is_empty() {
        return Err(Error::Config("at least one seed is required".into()));
    }
    let smoothed: Vec<Vec<f64>> = per_seed.iter().map(|s| moving_average(s, window)).collect();
    let (mean, variance) = aggregate(&smoothed);
    Ok(CurveSeries {
        x_label: "episode".into(),
        x: (0..mean.len() as u64).collect(),
        mean,
        variance,
        seed_count: per_seed.len(),
        smoothing_window: window,
    })
}

pub fn reward_curve(runs: &[&[EpisodeRecord]], window: usize) -> Result<CurveSeries> {
    smoothed_curve(
        runs.iter()
            .map(|r| r.iter().map(|e| e.total_reward).collect())
            .collect(),
        window,
    )
}

/// Windowed per-stage success rate. A stage counts as a success in an
/// episode when its reward was emitted in that episode.
pub fn success_rate_curves(runs: &[&[EpisodeRecord]], window: usize) -> Result<[CurveSeries; 4]> {
    let mut out = Vec::with_capacity(4);
    for task in MetaTaskId::ALL {
        out.push(smoothed_curve(
            runs.iter()
                .map(|r| {
                    r.iter()
                        .map(|e| f64::from(u8::from(e.stage_success[task.index()])))
                        .collect()
                })
                .collect(),
            window,
        )?);
    }
    Ok(out.try_into().expect("four stages"))
}

/// Cumulative counts from per-episode store-size snapshots.
pub fn sample_count_curves(snapshots: &[[usize; 4]]) -> StageCounters {
    let mut c = StageCounters::default();
    for snap in snapshots {
        for k in 0..4 {
            c.counts[k].push(snap[k] as u64);
        }
    }
    c
}

/// Store-size snapshots reconstructed from the samples each episode added.
pub fn store_snapshots(records: &[EpisodeRecord]) -> Vec<[usize; 4]> {
    let mut total = [0usize; 4];
    records
        .iter()
        .map(|r| {
            for k in 0..4 {
                total[k] += r.samples_added[k] as usize;
            }
            total
        })
        .collect()
}

/// Mean/variance of one stage's cumulative counts across seeds.
pub fn sample_count_series(counters: &[StageCounters], task: MetaTaskId) -> Result<CurveSeries> {
    smoothed_curve(
        counters
            .iter()
            .map(|c| c.stage(task).iter().map(|&v| v as f64).collect())
            .collect(),
        1,
    )
}

/// Re-indexes per-episode values by cumulative environment steps: at each
/// grid point the value is the latest episode finished at or before it.
pub fn by_env_steps(runs: &[&[EpisodeRecord]], values: &[Vec<f64>], grid: u64) -> Result<CurveSeries> {
    if grid == 0 {
        return Err(Error::Config("step grid must be >= 1".into()));
    }
    if runs.is_empty() || runs.len() != values.len() {
        return Err(Error::Config("one value series per seed is required".into()));
    }
    let ends: Vec<Vec<u64>> = runs
        .iter()
        .map(|r| {
            r.iter()
                .scan(0u64, |acc, e| {
                    *acc += e.steps as u64;
                    Some(*acc)
                })
                .collect()
        })
        .collect();
    let horizon = ends.iter().map(|e| e.last().copied().unwrap_or(0)).min().unwrap_or(0);
    let points: Vec<u64> = (1..=horizon / grid).map(|k| k * grid).collect();
    let resampled: Vec<Vec<f64>> = ends
        .iter()
        .zip(values)
        .map(|(end, vals)| {
            let mut j = 0;
            points
                .iter()
                .map(|&p| {
                    while j + 1 < end.len() && end[j + 1] <= p {
                        j += 1;
                    }
                    vals[j]
                })
                .collect()
        })
        .collect();
    let (mean, variance) = aggregate(&resampled);
    Ok(CurveSeries {
        x_label: "step".into(),
        x: points,
        mean,
        variance,
        seed_count: runs.len(),
        smoothing_window: 0,
    })
}

/// Mean of the last `window` smoothed values of a curve's mean.
pub fn final_window_mean(values: &[f64], window: usize) -> f64 {
    let n = values.len().min(window.max(1));
    if n == 0 {
        return 0.0;
    }
    values[values.len() - n..].iter().sum::<f64>() / n as f64
}

pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    if v.len() % 2 == 1 {
        v[mid]
    } else {
        0.5 * (v[mid - 1] + v[mid])
    }
}

const PALETTE: [&str; 6] = ["#d6457a", "#2f6db5", "#2f9e44", "#e8590c", "#7048e8", "#495057"];

/// Line chart of one or more curves with a shaded one-standard-deviation band.
pub fn render_svg(title: &str, curves: &[(&str, &CurveSeries)]) -> String {
    let (w, h, pad) = (640.0, 400.0, 48.0);
    let xs = curves.iter().flat_map(|(_, c)| c.x.iter().map(|&v| v as f64));
    let (xmin, xmax) = xs.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    let ys = curves.iter().flat_map(|(_, c)| {
        c.mean
            .iter()
            .zip(&c.variance)
            .flat_map(|(m, v)| [m - v.sqrt(), m + v.sqrt()])
    });
    let (ymin, ymax) = ys.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    let (xmin, xmax) = if xmin.is_finite() && xmax > xmin { (xmin, xmax) } else { (0.0, 1.0) };
    let (ymin, ymax) = if ymin.is_finite() && ymax > ymin { (ymin, ymax) } else { (ymin.min(0.0).max(-1.0), ymin.max(0.0) + 1.0) };
    let sx = |v: f64| pad + (v - xmin) / (xmax - xmin) * (w - 2.0 * pad);
    let sy = |v: f64| h - pad - (v - ymin) / (ymax - ymin) * (h - 2.0 * pad);

    let mut out = String::new();
    writeln!(out, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#).unwrap();
    writeln!(out, r#"<rect width="{w}" height="{h}" fill="white"/>"#).unwrap();
    writeln!(out, r#"<text x="{}" y="24" font-family="sans-serif" font-size="14" text-anchor="middle">{}</text>"#, w / 2.0, escape(title)).unwrap();
    writeln!(
        out,
        r#"<polyline points="{pad},{top} {pad},{bottom} {right},{bottom}" fill="none" stroke="black"/>"#,
        top = pad,
        bottom = h - pad,
        right = w - pad
    )
    .unwrap();
    for (label, v, anchor_y) in [("min", ymin, h - pad), ("max", ymax, pad)] {
        writeln!(
            out,
            r#"<text x="{}" y="{:.1}" font-family="sans-serif" font-size="10" text-anchor="end"><title>{label}</title>{:.3}</text>"#,
            pad - 4.0,
            anchor_y,
            v
        )
        .unwrap();
    }
    writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" font-family="sans-serif" font-size="10" text-anchor="end">{}</text>"#,
        w - pad,
        h - pad + 16.0,
        xmax
    )
    .unwrap();
    for (i, (label, c)) in curves.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        if c.is_empty() {
            continue;
        }
        let upper = (0..c.len()).map(|k| (c.x[k] as f64, c.mean[k] + c.variance[k].sqrt()));
        let lower = (0..c.len()).rev().map(|k| (c.x[k] as f64, c.mean[k] - c.variance[k].sqrt()));
        let band: Vec<String> = upper.chain(lower).map(|(x, y)| format!("{:.1},{:.1}", sx(x), sy(y))).collect();
        writeln!(out, r#"<polygon points="{}" fill="{color}" fill-opacity="0.2" stroke="none"/>"#, band.join(" ")).unwrap();
        let line: Vec<String> = (0..c.len()).map(|k| format!("{:.1},{:.1}", sx(c.x[k] as f64), sy(c.mean[k]))).collect();
        writeln!(out, r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#, line.join(" ")).unwrap();
        writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" font-family="sans-serif" font-size="11" fill="{color}">{}</text>"#,
            pad + 8.0,
            pad + 14.0 * (i as f64 + 1.0),
            escape(label)
        )
        .unwrap();
    }
    out.push_str("</svg>\n");
    out
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{EnvConfig, ObjectState};
    use proptest::prelude::*;

    fn record(reward: f64, stages: [bool; 4], steps: usize, added: [u32; 4]) -> EpisodeRecord {
        let start = crate::env::DrawerEnv::new(EnvConfig::default()).unwrap().reset(0);
        EpisodeRecord {
            episode: 0,
            start: ObjectState { ..start },
            total_reward: reward,
            stage_success: stages,
            steps,
            transitions: Vec::new(),
            low_explores: false,
            high_explores: false,
            low_deviated: false,
            high_deviated: false,
            samples_added: added,
            train_loss: None,
        }
    }

    fn rewards(vals: &[f64]) -> Vec<EpisodeRecord> {
        vals.iter().map(|&r| record(r, [false; 4], 4, [0; 4])).collect()
    }

    #[test]
    fn single_seed_window_one_is_raw() {
        let run = rewards(&[1.0, -2.0, 310.0, 60.0]);
        let c = reward_curve(&[&run], 1).unwrap();
        assert_eq!(c.mean, vec![1.0, -2.0, 310.0, 60.0]);
        assert!(c.variance.iter().all(|&v| v == 0.0));
        assert_eq!(c.seed_count, 1);
    }

    #[test]
    fn two_constant_seeds() {
        let a = rewards(&[100.0; 6]);
        let b = rewards(&[300.0; 6]);
        let c = reward_curve(&[&a, &b], 3).unwrap();
        assert!(c.mean.iter().all(|&m| m == 200.0));
        assert!(c.variance.iter().all(|&v| v == 10000.0));
    }

    #[test]
    fn constant_stream_is_a_fixed_point() {
        let run = rewards(&[42.5; 50]);
        for w in [1, 2, 7, 100] {
            let c = reward_curve(&[&run], w).unwrap();
            assert!(c.mean.iter().all(|&m| m == 42.5));
        }
    }

    #[test]
    fn window_zero_is_rejected() {
        let run = rewards(&[1.0]);
        assert!(matches!(reward_curve(&[&run], 0), Err(Error::Config(_))));
        assert!(reward_curve(&[], 1).is_err());
    }

    #[test]
    fn stage_success_rates() {
        let run: Vec<EpisodeRecord> = (0..20)
            .map(|k| record(0.0, [true, k % 2 == 0, false, false], 12, [1, 0, 0, 0]))
            .collect();
        let [s1, s2, _, s4] = success_rate_curves(&[&run, &run], 2).unwrap();
        assert!(s1.mean.iter().all(|&v| v == 1.0));
        assert!(s2.mean[1..].iter().all(|&v| v == 0.5));
        assert!(s4.mean.iter().all(|&v| v == 0.0));
        assert!(s4.variance.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn sample_counters() {
        let run: Vec<EpisodeRecord> = (0..6)
            .map(|k| record(0.0, [k == 3, false, false, false], 12, [u32::from(k == 3), 0, 0, 0]))
            .collect();
        let c = sample_count_curves(&store_snapshots(&run));
        assert_eq!(c.stage(MetaTaskId::OpenDrawer), &[0, 0, 0, 1, 1, 1]);
        assert_eq!(c.final_counts(), [1, 0, 0, 0]);
        let none = sample_count_curves(&store_snapshots(&rewards(&[0.0; 5])));
        assert!(none.counts.iter().flatten().all(|&v| v == 0));
    }

    #[test]
    fn step_indexing_uses_latest_finished_episode() {
        let run: Vec<EpisodeRecord> = [(10.0, 4), (20.0, 12), (30.0, 4)]
            .iter()
            .map(|&(r, s)| record(r, [false; 4], s, [0; 4]))
            .collect();
        let vals = vec![run.iter().map(|e| e.total_reward).collect()];
        let c = by_env_steps(&[&run], &vals, 4).unwrap();
        assert_eq!(c.x, vec![4, 8, 12, 16, 20]);
        assert_eq!(c.mean, vec![10.0, 10.0, 10.0, 20.0, 30.0]);
        assert_eq!(c.x_label, "step");
    }

    #[test]
    fn medians() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        assert_eq!(final_window_mean(&[1.0, 2.0, 3.0, 4.0], 2), 3.5);
    }

    #[test]
    fn svg_has_a_polyline_per_curve() {
        let a = reward_curve(&[&rewards(&[1.0, 2.0, 3.0])], 1).unwrap();
        let b = reward_curve(&[&rewards(&[3.0, 2.0, 1.0])], 1).unwrap();
        let svg = render_svg("reward <test>", &[("a", &a), ("b", &b)]);
        assert!(svg.starts_with("<svg"));
        assert_eq!(svg.matches("stroke-width=\"1.5\"").count(), 2);
        assert!(svg.contains("reward &lt;test&gt;"));
    }

    proptest! {
        #[test]
        fn aggregation_ignores_seed_order(seeds in proptest::collection::vec(proptest::collection::vec(-400.0f64..400.0, 30), 1..6), rot in 0usize..6) {
            let mut rotated = seeds.clone();
            rotated.rotate_left(rot % seeds.len());
            rotated.reverse();
            let (m1, v1) = aggregate(&seeds);
            let (m2, v2) = aggregate(&rotated);
            prop_assert_eq!(m1, m2);
            prop_assert_eq!(v1.clone(), v2);
            if seeds.len() == 1 {
                prop_assert!(v1.iter().all(|&v| v == 0.0));
            }
            prop_assert!(v1.iter().all(|&v| v >= 0.0));
        }

        #[test]
        fn csv_round_trip_is_byte_identical(vals in proptest::collection::vec(-1e6f64..1e6, 0..40), w in 1usize..10) {
            let c = reward_curve(&[&rewards(&vals)], w).unwrap();
            let text = c.to_csv_string();
            let back = CurveSeries::read_csv(text.as_bytes()).unwrap();
            prop_assert_eq!(back.to_csv_string(), text);
        }

        #[test]
        fn moving_average_matches_direct_sum(vals in proptest::collection::vec(-1e3f64..1e3, 1..200), w in 1usize..50) {
            let fast = moving_average(&vals, w);
            for i in 0..vals.len() {
                let lo = (i + 1).saturating_sub(w);
                let direct = vals[lo..=i].iter().sum::<f64>() / (i + 1 - lo) as f64;
                prop_assert!((fast[i] - direct).abs() < 1e-9);
            }
        }
    }
}
