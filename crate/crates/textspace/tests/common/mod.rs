//! Brute-force reference implementations of the eight layout-quality
//! metrics, written independently of the library internals. Everything here
//! trades speed for obviousness: ranks are counted pairwise instead of
//! sorted, neighbor sets are materialized, and every formula is spelled out
//! directly. The point is that a bug in the library and a bug here would
//! have to agree to slip through the comparison in the acceptance suite.

/// The eight metric values, in the same order the library reports them.
#[derive(Debug, Clone, Copy)]
pub struct OracleMetrics {
    pub trust: f64,
    pub cont: f64,
    pub shepard: f64,
    pub nh: f64,
    pub dsc: f64,
    pub silhouette: f64,
    pub ch: f64,
    pub db: f64,
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Rank of `j` among all points other than `i`, by ascending distance from
/// `i`, ties by ascending index. The nearest point has rank 1. Counted
/// directly: one plus the number of points strictly ahead of `j`.
fn rank(d: &[Vec<f64>], i: usize, j: usize) -> usize {
    let mut ahead = 0;
    for l in 0..d.len() {
        if l == i || l == j {
            continue;
        }
        if d[i][l] < d[i][j] || (d[i][l] == d[i][j] && l < j) {
            ahead += 1;
        }
    }
    ahead + 1
}

/// Sum over all points `i` of the rank overshoot `rank(i, j) - k` (taken in
/// `d_rank`) of every `j` that sits in the k-neighborhood of `i` under
/// `d_set` but not under `d_rank`.
fn penalty_total(d_rank: &[Vec<f64>], d_set: &[Vec<f64>], k: usize) -> f64 {
    let m = d_rank.len();
    let mut total = 0.0;
    for i in 0..m {
        for j in 0..m {
            if j == i {
                continue;
            }
            if rank(d_set, i, j) <= k && rank(d_rank, i, j) > k {
                total += (rank(d_rank, i, j) - k) as f64;
            }
        }
    }
    total
}

/// Trustworthiness and continuity. Trustworthiness penalizes points that
/// appear among the k layout neighbors without being k-nearest in the
/// reference space (overshoot measured by reference ranks); continuity is
/// the same statement with the two spaces swapped.
fn trust_cont(d_high: &[Vec<f64>], d_low: &[Vec<f64>], k: usize) -> (f64, f64) {
    let m = d_high.len() as f64;
    let kf = k as f64;
    let scale = 2.0 / (m * kf * (2.0 * m - 3.0 * kf - 1.0));
    let trust = 1.0 - scale * penalty_total(d_high, d_low, k);
    let cont = 1.0 - scale * penalty_total(d_low, d_high, k);
    (trust, cont)
}

/// Fraction of (point, layout-neighbor) pairs sharing a label.
fn neighborhood_hit(d_low: &[Vec<f64>], labels: &[usize], k: usize) -> f64 {
    let m = d_low.len();
    let mut hits = 0usize;
    for i in 0..m {
        for j in 0..m {
            if j != i && rank(d_low, i, j) <= k && labels[j] == labels[i] {
                hits += 1;
            }
        }
    }
    hits as f64 / (m * k) as f64
}

/// Average ranks (1-based); tied values share the mean of the positions
/// they occupy. Counted per element rather than sorted.
fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; xs.len()];
    for (i, &v) in xs.iter().enumerate() {
        let mut less = 0usize;
        let mut equal = 0usize;
        for &w in xs {
            if w < v {
                less += 1;
            } else if w == v {
                equal += 1; // counts v itself
            }
        }
        out[i] = less as f64 + (equal as f64 + 1.0) / 2.0;
    }
    out
}

fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut cov, mut vx, mut vy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        cov += (a - mx) * (b - my);
        vx += (a - mx) * (a - mx);
        vy += (b - my) * (b - my);
    }
    cov / (vx * vy).sqrt()
}

/// Spearman correlation between reference and layout distances over every
/// unordered pair.
fn shepard(d_high: &[Vec<f64>], d_low: &[Vec<f64>]) -> f64 {
    let m = d_high.len();
    let mut hs = Vec::new();
    let mut ls = Vec::new();
    for i in 0..m {
        for j in (i + 1)..m {
            hs.push(d_high[i][j]);
            ls.push(d_low[i][j]);
        }
    }
    pearson(&average_ranks(&hs), &average_ranks(&ls))
}

/// Distinct labels in ascending order, the member indices of each, and each
/// group's centroid in the layout.
fn groups_and_centroids(points: &[Vec<f64>], labels: &[usize]) -> (Vec<Vec<usize>>, Vec<Vec<f64>>) {
    let mut distinct: Vec<usize> = labels.to_vec();
    distinct.sort_unstable();
    distinct.dedup();
    let groups: Vec<Vec<usize>> = distinct
        .iter()
        .map(|&c| (0..labels.len()).filter(|&i| labels[i] == c).collect())
        .collect();
    let dims = points[0].len();
    let centroids = groups
        .iter()
        .map(|members| {
            let mut c = vec![0.0; dims];
            for &i in members {
                for (acc, v) in c.iter_mut().zip(&points[i]) {
                    *acc += v;
                }
            }
            for acc in &mut c {
                *acc /= members.len() as f64;
            }
            c
        })
        .collect();
    (groups, centroids)
}

/// Fraction of points whose own class centroid is at least as close as any
/// other class centroid.
fn distance_consistency(points: &[Vec<f64>], labels: &[usize]) -> f64 {
    let (groups, centroids) = groups_and_centroids(points, labels);
    let mut class_of = vec![0usize; points.len()];
    for (g, members) in groups.iter().enumerate() {
        for &i in members {
            class_of[i] = g;
        }
    }
    let mut consistent = 0usize;
    for (i, p) in points.iter().enumerate() {
        let own = dist(p, &centroids[class_of[i]]);
        if centroids
            .iter()
            .enumerate()
            .all(|(g, c)| g == class_of[i] || own <= dist(p, c))
        {
            consistent += 1;
        }
    }
    consistent as f64 / points.len() as f64
}

/// Mean silhouette width; members of singleton classes score zero.
fn silhouette(points: &[Vec<f64>], labels: &[usize]) -> f64 {
    let (groups, _) = groups_and_centroids(points, labels);
    let mut total = 0.0;
    for (i, p) in points.iter().enumerate() {
        let own: &Vec<usize> = groups
            .iter()
            .find(|members| members.contains(&i))
            .expect("every point belongs to a group");
        if own.len() == 1 {
            continue; // s(i) = 0
        }
        let a = own
            .iter()
            .filter(|&&j| j != i)
            .map(|&j| dist(p, &points[j]))
            .sum::<f64>()
            / (own.len() - 1) as f64;
        let b = groups
            .iter()
            .filter(|members| !members.contains(&i))
            .map(|members| {
                members.iter().map(|&j| dist(p, &points[j])).sum::<f64>() / members.len() as f64
            })
            .fold(f64::INFINITY, f64::min);
        let denom = a.max(b);
        if denom > 0.0 {
            total += (b - a) / denom;
        }
    }
    total / points.len() as f64
}

/// Between-group over within-group variance ratio, scaled by the degrees of
/// freedom. Zero scatter degenerates to +inf (separated) or 0 (all equal).
fn calinski_harabasz(points: &[Vec<f64>], labels: &[usize]) -> f64 {
    let (groups, centroids) = groups_and_centroids(points, labels);
    let m = points.len();
    let k = groups.len();
    let dims = points[0].len();
    let mut grand = vec![0.0; dims];
    for p in points {
        for (acc, v) in grand.iter_mut().zip(p) {
            *acc += v;
        }
    }
    for acc in &mut grand {
        *acc /= m as f64;
    }
    let mut between = 0.0;
    let mut within = 0.0;
    for (g, members) in groups.iter().enumerate() {
        let d = dist(&centroids[g], &grand);
        between += members.len() as f64 * d * d;
        for &i in members {
            let d = dist(&points[i], &centroids[g]);
            within += d * d;
        }
    }
    if within == 0.0 {
        return if between > 0.0 { f64::INFINITY } else { 0.0 };
    }
    (between / (k - 1) as f64) / (within / (m - k) as f64)
}

/// Mean over groups of the worst pairwise (scatter_a + scatter_b) /
/// centroid-distance ratio; coincident centroids yield +inf.
fn davies_bouldin(points: &[Vec<f64>], labels: &[usize]) -> f64 {
    let (groups, centroids) = groups_and_centroids(points, labels);
    let k = groups.len();
    let scatter: Vec<f64> = groups
        .iter()
        .enumerate()
        .map(|(g, members)| {
            members
                .iter()
                .map(|&i| dist(&points[i], &centroids[g]))
                .sum::<f64>()
                / members.len() as f64
        })
        .collect();
    let mut total = 0.0;
    for g in 0..k {
        let mut worst = 0.0f64;
        for h in 0..k {
            if h == g {
                continue;
            }
            let sep = dist(&centroids[g], &centroids[h]);
            if sep == 0.0 {
                return f64::INFINITY;
            }
            worst = worst.max((scatter[g] + scatter[h]) / sep);
        }
        total += worst;
    }
    total / k as f64
}

/// Evaluates all eight metrics from reference distances, layout distances,
/// the raw layout coordinates, and integer class labels.
pub fn evaluate(
    d_high: &[Vec<f64>],
    d_low: &[Vec<f64>],
    layout: &[Vec<f64>],
    labels: &[usize],
    k: usize,
) -> OracleMetrics {
    let (trust, cont) = trust_cont(d_high, d_low, k);
    OracleMetrics {
        trust,
        cont,
        shepard: shepard(d_high, d_low),
        nh: neighborhood_hit(d_low, labels, k),
        dsc: distance_consistency(layout, labels),
        silhouette: silhouette(layout, labels),
        ch: calinski_harabasz(layout, labels),
        db: davies_bouldin(layout, labels),
    }
}
