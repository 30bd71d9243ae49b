use rayon::prelude::*;

/// Maps `f` over `0..len`, in parallel unless `serial` is set. Output order
/// always follows the index order.
pub(crate) fn map_indexed<T, F>(len: usize, serial: bool, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    if serial {
        (0..len).map(f).collect()
    } else {
        (0..len).into_par_iter().map(f).collect()
    }
}
