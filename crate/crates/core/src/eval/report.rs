use std::io::Write;

use serde::{Deserialize, Serialize};

use super::median;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Ties {
    pub translation: bool,
    pub rotation: bool,
}

/// Outcome for one query. Failed localizations carry `failure` and no errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryRecord {
    pub id: String,
    pub pos_err_m: Option<f64>,
    pub ori_err_deg: Option<f64>,
    pub translation_inliers: usize,
    pub rotation_inliers: usize,
    pub ties: Ties,
    pub neighbors: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
}

impl QueryRecord {
    pub fn failed(id: &str, neighbors: Vec<String>, reason: String) -> Self {
        Self {
            id: id.to_string(),
            pos_err_m: None,
            ori_err_deg: None,
            translation_inliers: 0,
            rotation_inliers: 0,
            ties: Ties::default(),
            neighbors,
            failure: Some(reason),
        }
    }

    pub fn is_failure(&self) -> bool {
        self.failure.is_some()
    }
}

/// Per-scene aggregate. Failed queries are counted in `n_failures` and left
/// out of the medians, which are `None` when nothing succeeded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneReport {
    pub scene: String,
    pub n_queries: usize,
    pub n_failures: usize,
    pub median_position_m: Option<f64>,
    pub median_orientation_deg: Option<f64>,
    pub queries: Vec<QueryRecord>,
}

impl SceneReport {
    /// Sorts `queries` by id and derives the counts and medians.
    pub fn from_records(scene: &str, mut queries: Vec<QueryRecord>) -> Self {
        queries.sort_by(|a, b| a.id.cmp(&b.id));
        let pos: Vec<f64> = queries.iter().filter_map(|q| q.pos_err_m).collect();
        let ori: Vec<f64> = queries.iter().filter_map(|q| q.ori_err_deg).collect();
        Self {
            scene: scene.to_string(),
            n_queries: queries.len(),
            n_failures: queries.iter().filter(|q| q.is_failure()).count(),
            median_position_m: median(&pos).ok(),
            median_orientation_deg: median(&ori).ok(),
            queries,
        }
    }
}

/// `scene,median_m,median_deg`, one row per scene. Empty cells mark scenes
/// without successful queries.
pub fn write_summary_csv<W: Write>(mut out: W, reports: &[SceneReport]) -> std::io::Result<()> {
    writeln!(out, "scene,median_m,median_deg")?;
    for r in reports {
        writeln!(
            out,
            "{},{},{}",
            r.scene,
            fmt_opt(r.median_position_m),
            fmt_opt(r.median_orientation_deg)
        )?;
    }
    Ok(())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x}")).unwrap_or_default()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewpointColumn {
    pub index: usize,
    /// 1-based inclusive rank range of the neighbor set.
    pub first_rank: usize,
    pub last_rank: usize,
    pub report: SceneReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewpointScene {
    pub scene: String,
    /// Reason the scene was skipped, if it was.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub skipped: Option<String>,
    pub viewpoints: Vec<ViewpointColumn>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewpointReport {
    pub set_size: usize,
    pub interval: usize,
    pub count: usize,
    pub scenes: Vec<ViewpointScene>,
}

/// `scene,vp0_m,vp0_deg,...` with one row per scene; skipped scenes have empty cells.
pub fn write_viewpoint_csv<W: Write>(mut out: W, report: &ViewpointReport) -> std::io::Result<()> {
    let mut header = vec!["scene".to_string()];
    for k in 0..report.count {
        header.push(format!("vp{k}_m"));
        header.push(format!("vp{k}_deg"));
    }
    writeln!(out, "{}", header.join(","))?;
    for s in &report.scenes {
        let mut row = vec![s.scene.clone()];
        for k in 0..report.count {
            let col = s.viewpoints.get(k);
            row.push(fmt_opt(col.and_then(|c| c.report.median_position_m)));
            row.push(fmt_opt(col.and_then(|c| c.report.median_orientation_deg)));
        }
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}
