//! Threaded bipartition scan. The subset list is fixed up front and
//! chunked across scoped threads; the assembled report is identical to
//! the sequential one from `ame_core`.

use ame_core::ame::{self, AmeReport, SubsetCheck, VerifyOptions};
use ame_core::qstate::QuditState;

/// Resolves a requested thread count: explicit value, else the
/// `AME_LAB_THREADS` environment variable, else available parallelism.
pub fn resolve_threads(requested: Option<usize>) -> usize {
    if let Some(t) = requested {
        return t.max(1);
    }
    if let Ok(env) = std::env::var("AME_LAB_THREADS") {
        if let Ok(t) = env.parse::<usize>() {
            return t.max(1);
        }
    }
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

/// Verification scan fanned out over subsets with read-only sharing.
pub fn par_verify_state(state: &QuditState, opts: &VerifyOptions, threads: usize) -> AmeReport {
    let n = state.n();
    let mut subsets = ame::half_subsets(n);
    if opts.extended {
        for size in 1..n / 2 {
            subsets.extend(ame::subsets_of_size(n, size));
        }
    }
    let threads = threads.max(1).min(subsets.len().max(1));
    if threads == 1 {
        let checks: Vec<SubsetCheck> =
            subsets.iter().map(|s| ame::check_subset(state, s, opts)).collect();
        return ame::assemble_report(n, state.d(), checks);
    }

    let mut checks: Vec<Option<SubsetCheck>> = vec![None; subsets.len()];
    let chunk = subsets.len().div_ceil(threads);
    std::thread::scope(|scope| {
        for (slice_subsets, slice_out) in
            subsets.chunks(chunk).zip(checks.chunks_mut(chunk))
        {
            scope.spawn(move || {
                for (subset, out) in slice_subsets.iter().zip(slice_out.iter_mut()) {
                    *out = Some(ame::check_subset(state, subset, opts));
                }
            });
        }
    });
    let checks: Vec<SubsetCheck> =
        checks.into_iter().map(|c| c.expect("all chunks processed")).collect();
    ame::assemble_report(n, state.d(), checks)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ame_core::ame::{catalog, verify_state};

    #[test]
    fn parallel_matches_sequential() {
        let state = catalog("AME43").unwrap().state;
        for opts in [
            VerifyOptions::default(),
            VerifyOptions { extended: true, ..VerifyOptions::default() },
        ] {
            let seq = verify_state(&state, &opts);
            for threads in [1usize, 2, 3, 8] {
                let par = par_verify_state(&state, &opts, threads);
                assert_eq!(par.is_ame, seq.is_ame);
                assert_eq!(par.checked_subsets.len(), seq.checked_subsets.len());
                for (a, b) in par.checked_subsets.iter().zip(&seq.checked_subsets) {
                    assert_eq!(a.parties, b.parties);
                    assert_eq!(a.pass, b.pass);
                    assert!((a.entropy_dits - b.entropy_dits).abs() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn thread_resolution() {
        assert_eq!(resolve_threads(Some(3)), 3);
        assert_eq!(resolve_threads(Some(0)), 1);
        assert!(resolve_threads(None) >= 1);
    }
}
