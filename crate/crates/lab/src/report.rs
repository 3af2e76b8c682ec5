//! Markdown summary of run manifests.

use std::fmt::Write;
use std::path::PathBuf;

use crate::run::RunManifest;

pub fn render(manifests: &[(PathBuf, RunManifest)]) -> String {
    let mut s = String::new();
    s.push_str("| manifest | experiment | n | seed | workers | wall time (s) | outputs | failed trials | checks |\n");
    s.push_str("|---|---|---|---|---|---|---|---|---|\n");
    for (path, m) in manifests {
        let passed = m.checks.iter().filter(|c| c.passed).count();
        let checks = if m.checks.is_empty() {
            "none".to_string()
        } else if passed == m.checks.len() {
            format!("{passed}/{} pass", m.checks.len())
        } else {
            let failed: Vec<&str> = m.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
            format!("{passed}/{} pass; FAIL: {}", m.checks.len(), failed.join(", "))
        };
        let _ = writeln!(
            s,
            "| {} | {} | {} | {} | {} | {:.1} | {} | {} | {} |",
            path.display(),
            m.experiment,
            m.config.ensemble.n,
            m.master_seed,
            m.workers,
            m.wall_time_s(),
            m.outputs.join(", "),
            m.failed_trials,
            checks.replace('|', "\\|"),
        );
    }
    s
}
