use copygraph::io::{parse_interactions, write_interactions};
use copygraph::recsys::{
    bpr_train, ebpr_scores, evaluate, ndcg_at_k, split_interactions, BprConfig, BprModel, EnsembleConfig,
};
use copygraph::synthetic::{planted_interactions, InteractionConfig};
use std::path::Path;

fn quick() -> BprConfig {
    BprConfig {
        epochs: 10,
        ..Default::default()
    }
}

#[test]
fn split_train_evaluate_pipeline() {
    let bg = planted_interactions(&InteractionConfig::default(), 1).unwrap();
    let bg = parse_interactions(&write_interactions(&bg), Path::new("mem")).unwrap();
    let split = split_interactions(&bg, 0.2, 0.1, 2).unwrap();
    assert_eq!(
        split.train.n_interactions() + split.valid.n_interactions() + split.test.n_interactions(),
        bg.n_interactions()
    );
    let trained = bpr_train(&split.train, None, &BprConfig::default(), 3).unwrap();
    let m = evaluate(&trained.model.scores(&split.train).unwrap(), &split.train, &split.test).unwrap();
    for x in [m.recall_10, m.recall_20, m.ndcg_10, m.ndcg_20] {
        assert!((0.0..=1.0).contains(&x));
    }
    assert!(m.recall_20 >= m.recall_10);
    // Popular-in-group items should beat random ranking (20 of 400 items ~ 0.05).
    assert!(m.recall_20 > 0.1, "{m:?}");
}

#[test]
fn model_json_round_trip_is_exact() {
    let bg = planted_interactions(&InteractionConfig::default(), 4).unwrap();
    let model = bpr_train(&bg, None, &quick(), 5).unwrap().model;
    let back: BprModel = serde_json::from_str(&serde_json::to_string(&model).unwrap()).unwrap();
    assert_eq!(back.scores(&bg).unwrap(), model.scores(&bg).unwrap());
}

#[test]
fn ensemble_scores_have_the_base_shape() {
    let bg = planted_interactions(&InteractionConfig::default(), 6).unwrap();
    let model = bpr_train(&bg, None, &quick(), 7).unwrap().model;
    let s = ebpr_scores(&model, &bg, &EnsembleConfig { n_graphs: 3, ..Default::default() }, 8).unwrap();
    assert_eq!(s.dim(), (bg.n_users(), bg.n_items()));
    assert!(s.iter().all(|x| x.is_finite()));
}

#[test]
fn single_hit_at_rank_two() {
    assert!((ndcg_at_k(&[4, 7, 1], &[7], 3).unwrap() - 0.6309297535714574).abs() < 1e-12);
}
