mod common;

use common::{oracles, rng, uniform};
use eegret::retrieval::{cosine_matrix, hungarian_assign, hungarian_rounds, hungarian_top_k, top_k_accuracy, SimilarityMatrix};
use eegret::Error;

fn identity(n: usize) -> SimilarityMatrix {
    let mut s = vec![0.0; n * n];
    for i in 0..n {
        s[i * n + i] = 1.0;
    }
    SimilarityMatrix::new(n, n, s).unwrap()
}

#[test]
fn cosine_matches_direct_formula() {
    let mut r = rng(11);
    let e = uniform(&mut r, 9, -1.0, 1.0);
    let v = uniform(&mut r, 9, -1.0, 1.0);
    let s = cosine_matrix(&e, &v, 3).unwrap();
    for i in 0..3 {
        for j in 0..3 {
            let (a, b) = (&e[i * 3..i * 3 + 3], &v[j * 3..j * 3 + 3]);
            let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
            let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
            let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!((s.get(i, j) - dot / (na * nb)).abs() < 1e-12);
        }
    }
}

#[test]
fn cosine_orthonormal_and_scale_invariant() {
    let e = [1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0];
    assert_eq!(cosine_matrix(&e, &e, 3).unwrap().scores(), identity(3).scores());

    let mut r = rng(12);
    let e = uniform(&mut r, 20, -1.0, 1.0);
    let v = uniform(&mut r, 20, -1.0, 1.0);
    let mut scaled = e.clone();
    scaled[4..8].iter_mut().for_each(|x| *x *= 5.0);
    let a = cosine_matrix(&e, &v, 4).unwrap();
    let b = cosine_matrix(&scaled, &v, 4).unwrap();
    for (x, y) in a.scores().iter().zip(b.scores()) {
        assert!((x - y).abs() < 1e-14);
    }
    let zero = [0.0; 4];
    assert!(matches!(cosine_matrix(&zero, &v[..4], 4), Err(Error::Data(_))));
}

#[test]
fn top_k_examples() {
    assert_eq!(top_k_accuracy(&identity(5), 1).unwrap(), 1.0);

    // True candidate on the diagonal always scores lowest.
    let mut s = vec![1.0; 16];
    for i in 0..4 {
        s[i * 5] = 0.0;
    }
    let m = SimilarityMatrix::new(4, 4, s).unwrap();
    for k in 1..4 {
        assert_eq!(top_k_accuracy(&m, k).unwrap(), 0.0);
    }
    assert_eq!(top_k_accuracy(&m, 4).unwrap(), 1.0);

    // True ranks 1, 1, 2, 4.
    let m = SimilarityMatrix::new(
        4,
        4,
        vec![
            0.9, 0.1, 0.2, 0.3, //
            0.1, 0.8, 0.2, 0.3, //
            0.1, 0.2, 0.5, 0.7, //
            0.9, 0.8, 0.7, 0.1, //
        ],
    )
    .unwrap();
    assert_eq!(top_k_accuracy(&m, 2).unwrap(), 0.75);
    assert_eq!(top_k_accuracy(&m, 1).unwrap(), 0.5);
    assert!(matches!(top_k_accuracy(&m, 0), Err(Error::Parameter(_))));
    assert!(matches!(top_k_accuracy(&m, 5), Err(Error::Parameter(_))));
}

#[test]
fn top_k_is_monotone_and_permutation_invariant() {
    let mut r = rng(13);
    let (n, m) = (12, 15);
    let scores = uniform(&mut r, n * m, -1.0, 1.0);
    let labels: Vec<usize> = (0..n).map(|i| (i * 7) % m).collect();
    let s = SimilarityMatrix::new(n, m, scores.clone()).unwrap().with_labels(labels.clone(), (0..m).collect()).unwrap();
    let accs: Vec<f64> = (1..=m).map(|k| top_k_accuracy(&s, k).unwrap()).collect();
    assert!(accs.windows(2).all(|w| w[0] <= w[1]));
    assert_eq!(*accs.last().unwrap(), 1.0);

    // Reordering the candidates (with their labels) changes nothing.
    let perm: Vec<usize> = (0..m).rev().collect();
    let mut shuffled = vec![0.0; n * m];
    for i in 0..n {
        for (jj, &j) in perm.iter().enumerate() {
            shuffled[i * m + jj] = scores[i * m + j];
        }
    }
    let s2 = SimilarityMatrix::new(n, m, shuffled).unwrap().with_labels(labels, perm.clone()).unwrap();
    for k in 1..=m {
        assert_eq!(top_k_accuracy(&s2, k).unwrap(), accs[k - 1]);
    }
}

#[test]
fn assignment_examples() {
    let a = hungarian_assign(&identity(6)).unwrap();
    assert_eq!(a.permutation, (0..6).collect::<Vec<_>>());
    assert_eq!(a.total_score, 6.0);

    let target = [3, 0, 4, 1, 2];
    let mut p = vec![0.0; 25];
    for (i, &j) in target.iter().enumerate() {
        p[i * 5 + j] = 1.0;
    }
    let a = hungarian_assign(&SimilarityMatrix::new(5, 5, p).unwrap()).unwrap();
    assert_eq!(a.permutation, target);
    assert_eq!(a.total_score, 5.0);

    let scores = vec![1.0, 2.0, 3.0, 2.0, 4.0, 1.0, 3.0, 1.0, 2.0];
    let (best, perm) = oracles::brute_force_assignment(&scores, 3);
    let a = hungarian_assign(&SimilarityMatrix::new(3, 3, scores).unwrap()).unwrap();
    assert_eq!((a.total_score, a.permutation), (best, perm));
}

#[test]
fn hungarian_top_k_matches_brute_force_rounds() {
    let mut r = rng(14);
    let n = 4;
    for _ in 0..50 {
        let scores = uniform(&mut r, n * n, -1.0, 1.0);
        let s = SimilarityMatrix::new(n, n, scores.clone()).unwrap();
        assert_eq!(hungarian_top_k(&s, 1).unwrap(), {
            let a = hungarian_assign(&s).unwrap();
            a.permutation.iter().enumerate().filter(|(i, j)| i == *j).count() as f64 / n as f64
        });
        // Second round: best permutation avoiding every first-round pair.
        let rounds = hungarian_rounds(&s, 2).unwrap();
        let mut masked = scores.clone();
        for (i, &j) in rounds[0].iter().enumerate() {
            masked[i * n + j] = -1e9;
        }
        let (_, second) = oracles::brute_force_assignment(&masked, n);
        assert_eq!(rounds[1], second);
        let hits = (0..n).filter(|&i| rounds[0][i] == i || second[i] == i).count();
        assert_eq!(hungarian_top_k(&s, 2).unwrap(), hits as f64 / n as f64);
    }
}
