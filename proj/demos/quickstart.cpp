// Minimal end-to-end use of the library: generate a small corpus, pretrain
// with within-content negative sampling, and inspect the diagnostics.

#include <iostream>

#include "longform/longform.hpp"

int main() {
    using namespace longform;

    CorpusConfig corpus_cfg;
    corpus_cfg.num_movies = 16;
    corpus_cfg.snippets_per_movie = 64;
    corpus_cfg.concept_pool_size = 12;
    corpus_cfg.concepts_per_movie = 4;
    corpus_cfg.view_dim = 16;
    corpus_cfg.semantic_dim = 8;
    corpus_cfg.seed = 7;
    Corpus corpus = generate_corpus(corpus_cfg);

    RunConfig cfg;
    cfg.corpus = corpus_cfg;
    cfg.sampler = {16, 4, kUnboundedWindow};  // B=16, k=4
    cfg.model.view_dim = corpus_cfg.view_dim;
    cfg.model.encoder_widths = {32, 32};
    cfg.model.joint_dim = 8;
    cfg.epochs = 4;
    cfg.diag_epochs = {4};
    cfg.pair_budget = 20000;
    cfg.seed = 42;

    RunResult result = run_pretraining(cfg, corpus);
    for (const auto& log : result.logs)
        std::cout << "epoch " << log.epoch << ": loss " << log.mean_loss << "\n";

    const auto& diag = *result.logs.back().diagnostics;
    std::cout << "symmetric KL(S, D): " << diag.kl.symmetric_kl << "\n"
              << "movie probe (video): " << diag.movie.video.top1_accuracy << "\n"
              << "concept probe (video): " << diag.concepts.video.top1_accuracy << "\n";
    return 0;
}
