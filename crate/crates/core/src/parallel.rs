//! Deterministic parallel replica execution.
//!
//! Workers are keyed by replica index and own their noise streams, so the
//! result vector is identical for any thread count; downstream statistics
//! consume it in index order, fixing the merge tree.

use rayon::prelude::*;

use crate::Result;

/// Runs `worker(0..count)` in parallel, collecting outputs in replica order.
pub fn run_replicas<Out: Send>(
    count: usize,
    worker: impl Fn(usize) -> Result<Out> + Sync + Send,
) -> Result<Vec<Out>> {
    (0..count).into_par_iter().map(worker).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preserves_replica_order() {
        let out = run_replicas(100, |i| Ok(i * i)).unwrap();
        assert_eq!(out.len(), 100);
        for (i, v) in out.iter().enumerate() {
            assert_eq!(*v, i * i);
        }
    }

    #[test]
    fn propagates_errors() {
        let out = run_replicas(10, |i| {
            if i == 7 {
                Err(crate::Error::InsufficientData("boom".into()))
            } else {
                Ok(i)
            }
        });
        assert!(out.is_err());
    }
}
