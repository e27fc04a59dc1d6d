/// Greedy core allocation at one server.
///
/// `weights[k]` is `b_ji / L_i` of the `k`-th accessing UE. Repeatedly picks
/// the largest remaining weight (lowest position on ties) until `num_cores`
/// UEs are chosen or none remain. Zero weights are not skipped.
pub fn server_core_allocation(weights: &[f64], num_cores: usize) -> Vec<bool> {
    let mut chosen = vec![false; weights.len()];
    let mut n = 1;
    while n <= num_cores {
        let best = weights
            .iter()
            .enumerate()
            .filter(|(k, _)| !chosen[*k])
            .fold(None, |best: Option<(usize, f64)>, (k, &w)| match best {
                Some((_, bw)) if bw >= w => best,
                _ => Some((k, w)),
            });
        let Some((k, _)) = best else { break };
        chosen[k] = true;
        n += 1;
    }
    chosen
}
