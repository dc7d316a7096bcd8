//! Ordered data-parallel map. With the `parallel` feature and more than one
//! worker the tasks run on a dedicated rayon pool; otherwise sequentially.
//! Results always come back in task order, so callers that fold them in
//! order get the same answer for any worker count.

/// Worker count from the machine, at least one.
pub fn available_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

#[cfg(feature = "parallel")]
pub fn map_ordered<T, F>(tasks: usize, workers: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    if workers <= 1 || tasks <= 1 {
        return (0..tasks).map(f).collect();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
        Ok(pool) => pool.install(|| (0..tasks).into_par_iter().map(&f).collect()),
        Err(_) => (0..tasks).map(f).collect(),
    }
}

#[cfg(not(feature = "parallel"))]
pub fn map_ordered<T, F>(tasks: usize, _workers: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..tasks).map(f).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_is_preserved() {
        for workers in [1, 2, 8] {
            let v = map_ordered(100, workers, |i| i * i);
            assert_eq!(v, (0..100).map(|i| i * i).collect::<Vec<_>>());
        }
        assert!(map_ordered(0, 4, |i| i).is_empty());
    }
}
