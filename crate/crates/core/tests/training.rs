mod common;

use common::gradcheck::{micro_dims, smooth_problem};
use common::{rng, uniform};
use eegret::data::{generate_synthetic, FeatureBank, SyntheticData, SyntheticSpec};
use eegret::experiment::StreamSetting;
use eegret::nn::{Block, DropoutRates, EncoderParams};
use eegret::preproc::BlurSpec;
use eegret::train::{infonce_loss, select_checkpoint, train, AdamW, AdamWConfig, EvalSets, LabelledSet, SelectionPolicy, TrainConfig};
use eegret::Error;

fn tiny() -> SyntheticData {
    generate_synthetic(&SyntheticSpec {
        class_count: 10,
        samples_per_class: 4,
        channels: 6,
        timepoints: 30,
        feature_dim: 24,
        ..SyntheticSpec::default()
    })
    .unwrap()
}

fn cfg(epochs: usize) -> TrainConfig {
    TrainConfig {
        epochs,
        batch_size: 8,
        seeds: vec![1],
        ..TrainConfig::default()
    }
}

#[test]
fn zero_learning_rate_leaves_trainable_parameters_alone() {
    let d = tiny();
    let sel = StreamSetting::Both.selection(&BlurSpec::default());
    let c = TrainConfig { lr: 0.0, weight_decay: 0.0, ..cfg(3) };
    let out = train(&d.train, &d.bank, &sel, &c, 5, EvalSets::default()).unwrap();
    let init = EncoderParams::<f32>::init(*out.final_params.dims(), 5).unwrap();
    for b in Block::ALL.iter().filter(|b| b.trainable()) {
        assert_eq!(out.final_params.block(*b), init.block(*b), "{b:?} moved");
    }
    // Running statistics still track the batches.
    assert_ne!(out.final_params.block(Block::BnRunningVar), init.block(Block::BnRunningVar));
}

#[test]
fn same_seed_reproduces_record_and_checkpoint_bytes() {
    let d = tiny();
    let sel = StreamSetting::Both.selection(&BlurSpec::default());
    let eval = EvalSets {
        test: Some(LabelledSet { data: &d.test, bank: &d.bank }),
        val: None,
    };
    let a = train(&d.train, &d.bank, &sel, &cfg(3), 9, eval).unwrap();
    let b = train(&d.train, &d.bank, &sel, &cfg(3), 9, eval).unwrap();
    assert_eq!(a.record, b.record);
    assert_eq!(a.final_params.to_checkpoint_bytes(), b.final_params.to_checkpoint_bytes());
    let c = train(&d.train, &d.bank, &sel, &cfg(3), 10, eval).unwrap();
    assert_ne!(a.final_params.to_checkpoint_bytes(), c.final_params.to_checkpoint_bytes());
    assert!(a.record.epochs.iter().all(|e| e.top5 >= e.top1 && e.loss.is_finite()));
}

#[test]
fn small_step_descends() {
    let p = smooth_problem(micro_dims(), true, DropoutRates::NONE, 0, 0.02);
    let before = p.loss(&p.params);
    let g = p.gradient();
    let mut params = p.params.clone();
    let mut opt = AdamW::new(AdamWConfig { lr: 1e-5, weight_decay: 0.0, ..Default::default() }, &params);
    opt.step(&mut params, &g);
    assert!(p.loss(&params) < before);
    assert_eq!(opt.steps(), 1);
}

#[test]
fn misaligned_bank_is_a_configuration_error() {
    let d = tiny();
    let sel = StreamSetting::Both.selection(&BlurSpec::default());
    let ids: Vec<String> = d.bank.image_ids()[..5].to_vec();
    let short: FeatureBank = d.bank.select_images(&ids).unwrap();
    assert!(matches!(
        train(&d.train, &short, &sel, &cfg(1), 1, EvalSets::default()),
        Err(Error::Config(_))
    ));
    let bad = TrainConfig { batch_size: 1, ..cfg(1) };
    assert!(matches!(
        train(&d.train, &d.bank, &sel, &bad, 1, EvalSets::default()),
        Err(Error::Config(_))
    ));
}

#[test]
fn infonce_is_nonnegative_and_rejects_non_finite() {
    let mut r = rng(31);
    for n in 1..8 {
        let z = uniform(&mut r, n * 5, -3.0, 3.0);
        let v = uniform(&mut r, n * 5, -3.0, 3.0);
        assert!(infonce_loss(&z, &v, 5, 1.0).unwrap().loss >= 0.0);
    }
    let mut z = vec![0.5; 10];
    z[3] = f64::NAN;
    assert!(matches!(infonce_loss(&z, &[0.1; 10], 5, 1.0), Err(Error::Data(_))));
}

#[test]
fn checkpoint_selection_policies() {
    let d = tiny();
    let sel = StreamSetting::None.selection(&BlurSpec::default());
    let eval = EvalSets {
        test: Some(LabelledSet { data: &d.test, bank: &d.bank }),
        val: None,
    };
    let out = train(&d.train, &d.bank, &sel, &cfg(4), 2, eval).unwrap();
    let epochs = &out.record.epochs;
    assert_eq!(select_checkpoint(epochs, SelectionPolicy::FinalEpoch).unwrap(), 3);
    let best = select_checkpoint(epochs, SelectionPolicy::BestTestDiagnostic).unwrap();
    assert!(epochs.iter().all(|e| e.top1 <= epochs[best].top1));
    assert!(select_checkpoint(epochs, SelectionPolicy::ValSelected).is_err());
}
