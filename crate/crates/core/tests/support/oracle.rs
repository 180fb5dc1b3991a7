//! Brute-force Vietoris-Rips reduction: full boundary matrix over vertices,
//! edges and triangles, standard left-to-right column algorithm.

use lacuna_core::fingerprint::DistanceMatrix;

pub fn naive_rips(d: &DistanceMatrix, max_scale: f64) -> Vec<(u8, f64, f64)> {
    let n = d.len();
    let mut simplices: Vec<(f64, Vec<usize>)> = Vec::new();
    for i in 0..n {
        simplices.push((0.0, vec![i]));
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if d.get(i, j) <= max_scale {
                simplices.push((d.get(i, j), vec![i, j]));
            }
        }
    }
    for i in 0..n {
        for j in (i + 1)..n {
            for k in (j + 1)..n {
                let diam = d.get(i, j).max(d.get(i, k)).max(d.get(j, k));
                if diam <= max_scale {
                    simplices.push((diam, vec![i, j, k]));
                }
            }
        }
    }
    simplices.sort_by(|a, b| {
        a.0.partial_cmp(&b.0)
            .unwrap()
            .then(a.1.len().cmp(&b.1.len()))
            .then(a.1.cmp(&b.1))
    });
    let m = simplices.len();
    let position = |s: &[usize]| simplices.iter().position(|(_, t)| t == s).unwrap();
    let mut columns: Vec<Vec<bool>> = vec![vec![false; m]; m];
    for (c, (_, s)) in simplices.iter().enumerate() {
        if s.len() > 1 {
            for skip in 0..s.len() {
                let face: Vec<usize> = s
                    .iter()
                    .enumerate()
                    .filter(|&(k, _)| k != skip)
                    .map(|(_, &v)| v)
                    .collect();
                columns[c][position(&face)] = true;
            }
        }
    }
    let low = |col: &Vec<bool>| col.iter().rposition(|&b| b);
    for c in 0..m {
        while let Some(l) = low(&columns[c]) {
            let Some(prev) = (0..c).find(|&p| low(&columns[p]) == Some(l)) else {
                break;
            };
            let other = columns[prev].clone();
            for (x, y) in columns[c].iter_mut().zip(other) {
                *x ^= y;
            }
        }
    }
    let mut killed = vec![false; m];
    let mut out = Vec::new();
    for c in 0..m {
        if let Some(l) = low(&columns[c]) {
            killed[l] = true;
            let dim = simplices[l].1.len() - 1;
            if simplices[c].0 > simplices[l].0 {
                out.push((dim as u8, simplices[l].0, simplices[c].0));
            }
        }
    }
    for c in 0..m {
        let dim = simplices[c].1.len() - 1;
        if dim <= 1 && low(&columns[c]).is_none() && !killed[c] {
            out.push((dim as u8, simplices[c].0, f64::INFINITY));
        }
    }
    out.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)).then(a.2.total_cmp(&b.2)));
    out
}

/// MST edge weights by Prim's algorithm, ascending.
pub fn prim_weights(d: &DistanceMatrix) -> Vec<f64> {
    let n = d.len();
    let mut in_tree = vec![false; n];
    let mut best = vec![f64::INFINITY; n];
    best[0] = 0.0;
    let mut out = Vec::new();
    for step in 0..n {
        let u = (0..n)
            .filter(|&v| !in_tree[v])
            .min_by(|&a, &b| best[a].total_cmp(&best[b]))
            .unwrap();
        in_tree[u] = true;
        if step > 0 {
            out.push(best[u]);
        }
        for v in 0..n {
            if !in_tree[v] && d.get(u, v) < best[v] {
                best[v] = d.get(u, v);
            }
        }
    }
    out.sort_by(f64::total_cmp);
    out
}
