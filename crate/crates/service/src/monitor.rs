//! Periodic early-warning monitoring over every stored case.

use std::sync::Arc;
use std::time::Duration;

use matec_core::domain::CaseId;
use matec_core::news::evaluate_trend;

use crate::store::Store;

#[derive(Debug, Default, Clone, PartialEq, Eq)]
pub struct TickReport {
    /// Cases with observations the monitor had not yet seen.
    pub evaluated: usize,
    pub new_alerts: usize,
    pub failures: Vec<(CaseId, String)>,
}

/// Evaluates the observations appended to each case since the previous
/// tick. The last already-seen observation is included as the baseline, so
/// a band rise across the tick boundary is caught exactly once. A failing
/// case is logged and skipped.
pub fn tick(store: &Store) -> TickReport {
    let mut report = TickReport::default();
    for case_id in store.case_ids() {
        let Some(entry) = store.case(&case_id) else { continue };
        let vitals = &entry.case.vitals;
        if vitals.len() <= entry.monitor_cursor {
            continue;
        }
        report.evaluated += 1;
        let from = entry.monitor_cursor.saturating_sub(1);
        let outcome = evaluate_trend(&case_id, &vitals[from..]).map_err(|e| e.to_string()).and_then(|alerts| {
            let n = alerts.len();
            store.record_alerts(&case_id, vitals.len(), alerts).map(|()| n).map_err(|e| e.to_string())
        });
        match outcome {
            Ok(n) => report.new_alerts += n,
            Err(e) => {
                tracing::warn!(case = %case_id, error = %e, "monitor skipped case");
                report.failures.push((case_id, e));
            }
        }
    }
    report
}

/// Runs [`tick`] every `every` until the task is dropped.
pub async fn run(store: Arc<Store>, every: Duration) {
    let mut interval = tokio::time::interval(every);
    interval.set_missed_tick_behavior(tokio::time::MissedTickBehavior::Delay);
    interval.tick().await;
    loop {
        interval.tick().await;
        let report = tick(&store);
        if report.new_alerts > 0 || !report.failures.is_empty() {
            tracing::info!(
                evaluated = report.evaluated,
                alerts = report.new_alerts,
                failures = report.failures.len(),
                "monitor tick"
            );
        }
    }
}
