use crate::error::{CidError, Result};
use crate::model::CidModel;

fn resolve(model: &CidModel, ids: &[&str]) -> Result<Vec<usize>> {
    ids.iter().map(|id| model.index_of(id)).collect()
}

fn check_disjoint(xs: &[usize], ys: &[usize], zs: &[usize], model: &CidModel) -> Result<()> {
    for (a, b) in [(xs, ys), (xs, zs), (ys, zs)] {
        if let Some(&v) = a.iter().find(|v| b.contains(v)) {
            return Err(CidError::InvalidQuery(format!("`{}` appears in two of the query sets", model.id(v))));
        }
    }
    Ok(())
}

/// Nodes reachable from `xs` along active trails given `zs` (Bayes-ball).
pub(crate) fn reachable(model: &CidModel, xs: &[usize], zs: &[usize]) -> Vec<bool> {
    let n = model.len();
    let mut observed = vec![false; n];
    for &z in zs {
        observed[z] = true;
    }
    let anc = model.reach(zs, false);
    // visited[v][0]: arrived from a child (moving up); visited[v][1]: from a parent
    let mut visited = vec![[false; 2]; n];
    let mut reached = vec![false; n];
    let mut stack: Vec<(usize, usize)> = xs.iter().map(|&x| (x, 0)).collect();
    while let Some((v, dir)) = stack.pop() {
        if visited[v][dir] {
            continue;
        }
        visited[v][dir] = true;
        if !observed[v] {
            reached[v] = true;
        }
        if dir == 0 && !observed[v] {
            stack.extend(model.parent_indices(v).iter().map(|&p| (p, 0)));
            stack.extend(model.child_indices(v).iter().map(|&c| (c, 1)));
        } else if dir == 1 {
            if !observed[v] {
                stack.extend(model.child_indices(v).iter().map(|&c| (c, 1)));
            }
            if anc[v] {
                stack.extend(model.parent_indices(v).iter().map(|&p| (p, 0)));
            }
        }
    }
    reached
}

pub(crate) fn d_separated_idx(model: &CidModel, xs: &[usize], ys: &[usize], zs: &[usize]) -> bool {
    let reached = reachable(model, xs, zs);
    !ys.iter().any(|&y| reached[y])
}

/// Whether every path between `xs` and `ys` is blocked given `zs`.
/// Information links count as ordinary edges.
pub fn d_separated(model: &CidModel, xs: &[&str], ys: &[&str], zs: &[&str]) -> Result<bool> {
    let (x, y, z) = (resolve(model, xs)?, resolve(model, ys)?, resolve(model, zs)?);
    check_disjoint(&x, &y, &z, model)?;
    Ok(d_separated_idx(model, &x, &y, &z))
}

/// An active trail from some node of `xs` to some node of `ys` given `zs`,
/// if one exists.
pub(crate) fn active_path_idx(model: &CidModel, xs: &[usize], ys: &[usize], zs: &[usize]) -> Option<Vec<usize>> {
    if d_separated_idx(model, xs, ys, zs) {
        return None;
    }
    let n = model.len();
    let anc = model.reach(zs, false);
    let observed: Vec<bool> = (0..n).map(|v| zs.contains(&v)).collect();
    let neighbours: Vec<Vec<usize>> = (0..n)
        .map(|v| {
            let mut nb: Vec<usize> = model.parent_indices(v).iter().chain(model.child_indices(v)).copied().collect();
            nb.sort_unstable();
            nb.dedup();
            nb
        })
        .collect();
    let is_edge = |a: usize, b: usize| model.parent_indices(b).contains(&a);

    fn dfs(
        path: &mut Vec<usize>,
        on_path: &mut Vec<bool>,
        ys: &[usize],
        ctx: &dyn Fn(usize, usize, usize) -> bool,
        neighbours: &[Vec<usize>],
    ) -> bool {
        let last = *path.last().unwrap();
        if path.len() > 1 && ys.contains(&last) {
            return true;
        }
        for &next in &neighbours[last] {
            if on_path[next] {
                continue;
            }
            if path.len() >= 2 && !ctx(path[path.len() - 2], last, next) {
                continue;
            }
            path.push(next);
            on_path[next] = true;
            if dfs(path, on_path, ys, ctx, neighbours) {
                return true;
            }
            on_path[next] = false;
            path.pop();
        }
        false
    }

    let middle_active = |a: usize, b: usize, c: usize| {
        if is_edge(a, b) && is_edge(c, b) {
            anc[b]
        } else {
            !observed[b]
        }
    };
    for &x in xs {
        let mut path = vec![x];
        let mut on_path = vec![false; n];
        on_path[x] = true;
        if dfs(&mut path, &mut on_path, ys, &middle_active, &neighbours) {
            return Some(path);
        }
    }
    None
}

/// Witness trail for d-connection, or `None` when d-separated.
pub fn active_path(model: &CidModel, xs: &[&str], ys: &[&str], zs: &[&str]) -> Result<Option<Vec<String>>> {
    let (x, y, z) = (resolve(model, xs)?, resolve(model, ys)?, resolve(model, zs)?);
    check_disjoint(&x, &y, &z, model)?;
    Ok(active_path_idx(model, &x, &y, &z).map(|p| p.into_iter().map(|i| model.id(i).to_string()).collect()))
}

/// True iff every directed path from `source` to `target` passes through a
/// node of `mediators`. Vacuously true when no directed path exists.
pub fn mediates(model: &CidModel, source: &str, target: &str, mediators: &[&str]) -> Result<bool> {
    let s = model.index_of(source)?;
    let t = model.index_of(target)?;
    let m = resolve(model, mediators)?;
    if m.contains(&s) || m.contains(&t) {
        return Ok(true);
    }
    let mut seen = vec![false; model.len()];
    let mut stack = vec![s];
    while let Some(v) = stack.pop() {
        for &c in model.child_indices(v) {
            if c == t {
                return Ok(false);
            }
            if !seen[c] && !m.contains(&c) {
                seen[c] = true;
                stack.push(c);
            }
        }
    }
    Ok(true)
}
