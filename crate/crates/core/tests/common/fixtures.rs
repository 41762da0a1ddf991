//! Small deterministic corpora, models and the full-objective builder.

use eusa::corpus::{generate_corpus, CorpusConfig, VideoCorpus};
use eusa::diffnum::{Tape, Tensor, Var};
use eusa::losses::{triple_loss, TripleLossConfig};
use eusa::tracker::{TrackerModel, PIXEL_MAX};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::gradcheck::Builder;

pub fn tiny_corpus(n_videos: usize, frames: usize, seed: u64) -> VideoCorpus {
    generate_corpus(&CorpusConfig { n_videos, frames_per_video: frames, seed, ..Default::default() }).unwrap()
}

pub fn uniform_image(rng: &mut ChaCha8Rng, size: usize, lo: f64, hi: f64) -> Tensor<f64> {
    Tensor::from_fn(&[3, size, size], |_| rng.gen_range(lo..hi))
}

/// Triple loss of `clamp(search + δ)` as a function of `δ` alone, matching
/// the attack objective.
pub fn objective_builder(
    model: TrackerModel<f64>,
    template_feat: Tensor<f64>,
    search: Tensor<f64>,
    cfg: TripleLossConfig,
) -> Builder {
    Box::new(move |tape: &mut Tape<f64>, v: &[Var]| {
        let bound = model.bind(tape, false);
        let z = tape.constant(template_feat.clone());
        let s = tape.constant(search.clone());
        let x = tape.add(s, v[0])?;
        let x = tape.clamp(x, 0.0, PIXEL_MAX);
        let f_clean = model.encode(tape, &bound, s)?;
        let f_adv = model.encode(tape, &bound, x)?;
        let heads = model.heads(tape, &bound, z, f_adv)?;
        Ok(triple_loss(tape, f_clean, f_adv, &heads, &cfg)?.total)
    })
}

/// Worst relative error of the triple-loss gradient w.r.t. `δ` over `trials`
/// random instances, `coords` random coordinates each.
pub fn triple_loss_fd_trials(trials: usize, coords: usize, seed: u64) -> f64 {
    use eusa::tracker::{template_embed, SEARCH_SIZE, TEMPLATE_SIZE};
    use rand::SeedableRng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for trial in 0..trials {
        let model = TrackerModel::<f64>::default_init(seed + trial as u64);
        let template = uniform_image(&mut rng, TEMPLATE_SIZE, 0.0, 255.0);
        let z = template_embed(&template, &model).unwrap();
        // Keep search + δ inside (0, 255) so the clamp is inactive.
        let search = uniform_image(&mut rng, SEARCH_SIZE, 20.0, 235.0);
        let delta = uniform_image(&mut rng, SEARCH_SIZE, -16.0, 16.0);
        let build = objective_builder(model, z, search, TripleLossConfig::default());
        worst = worst.max(super::gradcheck::check(&[delta], &build, Some(coords), &mut rng));
    }
    worst
}

/// Corpus the victim tracker is trained on, disjoint from the attacked corpora.
pub fn victim_corpus() -> VideoCorpus {
    generate_corpus(&CorpusConfig { n_videos: 120, seed: 101, ..Default::default() }).unwrap()
}

/// The reference victim: default training settings on every video of
/// [`victim_corpus`].
pub fn train_victim() -> (TrackerModel<f64>, eusa::tracker::TrainReport) {
    use eusa::tracker::{train_toy_tracker, TrainConfig};
    let corpus = victim_corpus();
    let videos: Vec<_> = corpus.videos.iter().collect();
    train_toy_tracker(&videos, TrackerModel::default_init(1), &TrainConfig::default()).unwrap()
}
