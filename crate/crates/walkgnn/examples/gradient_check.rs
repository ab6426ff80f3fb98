//! Verifies every differentiable block against central finite differences.
//! The same suite backs the `grad-check` CLI command.

use walkgnn::selfcheck::{gradient_check_suite, REL_ERR_THRESHOLD};

fn main() {
    for report in gradient_check_suite(5).unwrap() {
        println!(
            "{:<28} {:>12.3e}  {}",
            report.block,
            report.max_rel_err,
            if report.passed() { "ok" } else { "FAIL" }
        );
        assert!(report.passed(), "threshold {REL_ERR_THRESHOLD:e}");
    }
}
