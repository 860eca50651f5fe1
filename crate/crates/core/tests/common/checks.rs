//! Oracle checks shared by the `oracles` tests and the acceptance runner.
//! Each check panics on the first mismatch.

use super::*;
use obs_core::detectors::*;
use obs_core::matrix::Matrix;

pub fn datasets() -> Vec<Matrix> {
    vec![
        contaminated_matrix(300, 4, 6, 1),
        gaussian_matrix(200, 6, 2),
        contaminated_matrix(120, 2, 3, 3),
    ]
}

fn run(x: &Matrix, params: DetectorParams) -> ScoreVector {
    score(x, &DetectorSpec::new(params, 17)).unwrap()
}

pub fn empirical_covariance_matches_explicit_inverse() {
    for x in datasets() {
        let s = run(&x, DetectorParams::default_for(DetectorKind::Ec));
        assert!(max_rel_diff(&s.raw_scores, &naive_ec(&x)) < 1e-8);
    }
}

pub fn hbos_matches_naive_histograms() {
    for x in datasets() {
        let s = run(&x, DetectorParams::default_for(DetectorKind::Hbos));
        let bins = (x.nrows() as f64).sqrt().ceil() as usize;
        assert!(max_abs_diff(&s.raw_scores, &naive_hbos(&x, bins, 1e-12)) < 1e-8);
    }
}

pub fn knn_and_lof_match_full_sorts() {
    for x in datasets() {
        let knn = run(&x, DetectorParams::default_for(DetectorKind::Knn));
        assert!(max_abs_diff(&knn.raw_scores, &naive_knn(&x, 5)) < 1e-8);
        let lof = run(&x, DetectorParams::default_for(DetectorKind::Lof));
        assert!(max_rel_diff(&lof.raw_scores, &naive_lof(&x, 20)) < 1e-8);
    }
}

pub fn dbscan_matches_breadth_first_expansion() {
    for x in datasets() {
        let s = run(&x, DetectorParams::default_for(DetectorKind::Dbscan));
        let naive = naive_dbscan(&x, 2 * x.ncols(), 90.0);
        let FitMetadata::Dbscan { eps, core, clusters, .. } = &s.metadata else { panic!() };
        assert!((eps - naive.eps).abs() < 1e-12);
        assert_eq!(core, &naive.core);
        assert!(same_partition(&naive.cluster, clusters));
        let noise: Vec<bool> = naive.cluster.iter().map(Option::is_none).collect();
        assert_eq!(s.native_labels.as_ref().unwrap(), &noise);
        assert!(max_abs_diff(&s.raw_scores, &naive.scores) < 1e-8);
    }
}

pub fn optics_matches_seed_list_walk() {
    for x in datasets() {
        let s = run(&x, DetectorParams::default_for(DetectorKind::Optics));
        // Reachability ties are broken by position in the canonical row order.
        let canon = canonical_order(&x);
        let (order, reach_c) = naive_optics(&x.select_rows(&canon), 2 * x.ncols());
        let order: Vec<usize> = order.iter().map(|&k| canon[k]).collect();
        let mut reach = vec![None; x.nrows()];
        for (k, r) in reach_c.into_iter().enumerate() {
            reach[canon[k]] = r;
        }
        let FitMetadata::Optics { ordering, reachability, .. } = &s.metadata else { panic!() };
        assert_eq!(ordering, &order);
        for (a, b) in reachability.iter().zip(&reach) {
            match (a, b) {
                (Some(a), Some(b)) => assert!((a - b).abs() < 1e-8),
                (None, None) => {}
                _ => panic!("defined/undefined mismatch"),
            }
        }
    }
}

pub fn kmeans_objective_matches_direct_evaluation() {
    for x in datasets() {
        let s = run(&x, DetectorParams::default_for(DetectorKind::Kmeans));
        let FitMetadata::Clustering { centroids, assignment, objective_history, .. } = &s.metadata else {
            panic!()
        };
        let direct: f64 = (0..x.nrows())
            .map(|i| euclid(x.row(i), &centroids[assignment[i]]).powi(2))
            .sum();
        let last = *objective_history.last().unwrap();
        assert!((last - direct).abs() <= 1e-9 * direct.max(1.0));
        for (i, &a) in assignment.iter().enumerate() {
            let d = euclid(x.row(i), &centroids[a]);
            assert!(centroids.iter().all(|c| euclid(x.row(i), c) >= d));
            assert_eq!(s.raw_scores[i], d);
        }
    }
}

pub fn cblof_matches_definition_on_fitted_clusters() {
    for x in datasets() {
        let s = run(&x, DetectorParams::default_for(DetectorKind::Cblof));
        let FitMetadata::Clustering { centroids, assignment, .. } = &s.metadata else { panic!() };
        let want = naive_cblof(&x, centroids, assignment, 0.9, 5.0);
        assert!(max_abs_diff(&s.raw_scores, &want) < 1e-8);
    }
}

pub fn sod_matches_set_intersection_reference() {
    for x in datasets() {
        let s = run(&x, DetectorParams::default_for(DetectorKind::Sod));
        assert!(max_abs_diff(&s.raw_scores, &naive_sod(&x, 20, 20, 0.8)) < 1e-8);
    }
}

pub fn mcd_finds_the_exhaustive_optimum() {
    for seed in [5, 6] {
        let x = contaminated_matrix(30, 2, 3, seed);
        let params = McdParams { support_size: Some(25), ..Default::default() };
        let fit = fast_mcd(&x, &params, 9).unwrap();
        let (subset, det) = exhaustive_mcd(&x, 25);
        assert_eq!(fit.support, subset);
        assert!((fit.determinant - det).abs() <= 1e-9 * det);
    }
}

pub fn one_class_dual_matches_exhaustive_qp() {
    let x = contaminated_matrix(6, 2, 1, 8);
    let params = OcsvmParams { nu: 0.5, gamma: Some(0.3), tol: 1e-12, ..Default::default() };
    let fit = fit_one_class(&x, &params).unwrap();
    let (alphas, obj) = brute_force_dual(&rbf_kernel(&x, 0.3), 1.0 / 3.0);
    assert!((fit.objective - obj).abs() < 1e-6);
    assert!(max_abs_diff(&fit.alphas, &alphas) < 1e-6);
}
