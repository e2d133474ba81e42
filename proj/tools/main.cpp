// Command line front end: generate / train / sweep / probe / kl.

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "longform/longform.hpp"

namespace {

using namespace longform;

struct CommonFlags {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::optional<std::string> corpus_path;
    std::optional<int> batch_size;
    std::optional<int> per_movie_k;
    std::optional<std::string> window;
    std::optional<std::string> head;
    bool head_norm = false;
    bool normalize_embeddings = false;
    std::optional<double> temperature;
    std::optional<double> peak_lr;
    std::optional<int> epochs;
    std::optional<int> warmup_epochs;
};

void add_run_flags(CLI::App* cmd, CommonFlags& f) {
    cmd->add_option("--config", f.config_path, "key = value run config file");
    cmd->add_option("--seed", f.seed, "run seed");
    cmd->add_option("--out", f.out, "output directory");
    cmd->add_option("--corpus", f.corpus_path, "corpus file (else generated inline)");
    cmd->add_option("--batch-size", f.batch_size, "minibatch size B");
    cmd->add_option("--per-movie-k", f.per_movie_k, "snippets per movie k");
    cmd->add_option("--window", f.window, "sampling window w (integer or 'unbounded')");
    cmd->add_option("--head", f.head, "projection head kind: conv or mlp");
    cmd->add_flag("--head-norm", f.head_norm, "batch-standardize between head layers");
    cmd->add_flag("--normalize-embeddings", f.normalize_embeddings,
                  "L2-normalize embeddings (enables temperature)");
    cmd->add_option("--temperature", f.temperature, "similarity temperature");
    cmd->add_option("--peak-lr", f.peak_lr, "peak learning rate");
    cmd->add_option("--epochs", f.epochs, "pretraining epochs");
    cmd->add_option("--warmup-epochs", f.warmup_epochs, "linear warmup epochs (default 1)");
}

RunConfig make_run_config(const CommonFlags& f) {
    RunConfig cfg;
    if (!f.config_path.empty()) cfg = run_config_from_file(f.config_path);
    if (f.seed) cfg.seed = *f.seed;
    if (f.out) cfg.out_dir = *f.out;
    if (f.corpus_path) cfg.corpus_path = *f.corpus_path;
    if (f.batch_size) cfg.sampler.batch_size = *f.batch_size;
    if (f.per_movie_k) cfg.sampler.per_movie = *f.per_movie_k;
    if (f.window) cfg.sampler.window = parse_window(*f.window);
    if (f.head) cfg.model.head = parse_head_kind(*f.head);
    if (f.head_norm) cfg.model.head_norm = true;
    if (f.normalize_embeddings) cfg.model.normalize_embeddings = true;
    if (f.temperature) cfg.model.temperature = *f.temperature;
    if (f.peak_lr) cfg.peak_lr = *f.peak_lr;
    if (f.epochs) cfg.epochs = *f.epochs;
    if (f.warmup_epochs) cfg.warmup_epochs = *f.warmup_epochs;
    return cfg;
}

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
    std::vector<std::uint64_t> out;
    std::istringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        out.push_back(std::stoull(item));
    }
    return out;
}

int cmd_generate(const std::string& config_path, const std::string& out_path,
                 std::optional<std::uint64_t> seed) {
    CorpusConfig cfg;
    if (!config_path.empty()) {
        KeyValueFile kv = KeyValueFile::parse_file(config_path);
        cfg = corpus_config_from(kv);
    }
    if (seed) cfg.seed = *seed;
    Corpus corpus = generate_corpus(cfg);
    save_corpus(corpus, out_path);
    std::cout << "wrote " << out_path << ": " << corpus.num_movies() << " movies, "
              << corpus.total_snippets() << " snippets, view_dim " << cfg.view_dim << "\n";
    return 0;
}

int cmd_train(const CommonFlags& flags) {
    RunConfig cfg = make_run_config(flags);
    Corpus corpus = resolve_corpus(cfg);
    cfg.model.view_dim = corpus.config.view_dim;
    RunResult res = run_pretraining(cfg, corpus);
    std::cout << "epoch,mean_loss,lr\n";
    for (const auto& log : res.logs) {
        std::cout << log.epoch << "," << csv::fmt(log.mean_loss) << "," << csv::fmt(log.lr);
        if (log.diagnostics) {
            const auto& d = *log.diagnostics;
            std::cout << "  [kl_sym " << csv::fmt(d.kl.symmetric_kl) << ", movie probe v/a "
                      << csv::fmt(d.movie.video.top1_accuracy) << "/"
                      << csv::fmt(d.movie.audio.top1_accuracy) << ", concept probe v/a "
                      << csv::fmt(d.concepts.video.top1_accuracy) << "/"
                      << csv::fmt(d.concepts.audio.top1_accuracy) << "]";
        }
        std::cout << "\n";
    }
    if (!cfg.out_dir.empty()) std::cout << "outputs in " << cfg.out_dir << "\n";
    return 0;
}

int cmd_sweep(const CommonFlags& flags, const std::string& k_csv, const std::string& w_csv,
              int w_mult, const std::string& seeds_csv, int jobs) {
    RunConfig base = make_run_config(flags);
    SweepSpec spec;
    for (const std::string& item : csv::split_row(k_csv))
        if (!item.empty()) spec.k_values.push_back(std::stoi(item));
    if (!w_csv.empty())
        for (const std::string& item : csv::split_row(w_csv))
            if (!item.empty()) spec.w_values.push_back(parse_window(item));
    spec.w_multiplier = w_csv.empty() ? w_mult : 0;
    spec.seeds = seeds_csv.empty() ? std::vector<std::uint64_t>{base.seed}
                                   : parse_seed_list(seeds_csv);
    spec.jobs = jobs;
    Corpus corpus = resolve_corpus(base);
    base.model.view_dim = corpus.config.view_dim;
    SweepReport report = run_sweep(base, spec, corpus);
    std::cout << sweep_csv_text(report);
    if (!base.out_dir.empty()) std::cout << "outputs in " << base.out_dir << "\n";
    return 0;
}

int cmd_kl(const std::string& checkpoint, const std::string& corpus_path, long pair_budget,
           int bins, std::uint64_t seed) {
    ModelParams params = load_checkpoint(checkpoint);
    Corpus corpus = load_corpus(corpus_path);
    Rng rng = make_rng(seed, 0xD1A6);
    DiscrepancyReport r = symmetric_kl(collect_similarities(params, corpus, pair_budget, rng), bins);
    std::cout << "kl_sym,kl_sd,kl_ds,mean_S,mean_D,std_S,std_D\n"
              << csv::fmt(r.symmetric_kl) << "," << csv::fmt(r.kl_within_across) << ","
              << csv::fmt(r.kl_across_within) << "," << csv::fmt(r.mean_within) << ","
              << csv::fmt(r.mean_across) << "," << csv::fmt(r.std_within) << ","
              << csv::fmt(r.std_across) << "\n";
    if (r.degenerate_support) std::cout << "# degenerate support: all similarities equal\n";
    return 0;
}

int cmd_probe(const std::string& checkpoint, const std::string& corpus_path,
              const std::string& task_name, const std::string& modality, const std::string& feats,
              int steps, double lr) {
    ModelParams params = load_checkpoint(checkpoint);
    Corpus corpus = load_corpus(corpus_path);
    ProbeTask task;
    if (task_name == "movie")
        task = ProbeTask::movie_id;
    else if (task_name == "concept")
        task = ProbeTask::concept_id;
    else
        throw ConfigError("--task: expected 'movie' or 'concept', got '" + task_name + "'");
    ProbeHyper hyper{steps, lr};
    CorpusEmbeddings emb = embed_corpus(params, corpus, parse_probe_feature(feats));
    ProbePair pair = probe_from(emb, task, hyper);
    std::cout << "task,modality,top1,num_classes,train_size,test_size\n";
    for (const ProbeReport* r : {&pair.video, &pair.audio}) {
        if (modality != "both" && modality != modality_name(r->modality)) continue;
        std::cout << probe_task_name(r->task) << "," << modality_name(r->modality) << ","
                  << csv::fmt(r->top1_accuracy) << "," << r->num_classes << "," << r->train_size
                  << "," << r->test_size << "\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"within-content negative sampling lab for audio-visual contrastive learning"};
    app.require_subcommand(1);

    // generate
    std::string gen_config, gen_out = "corpus.bin";
    std::optional<std::uint64_t> gen_seed;
    auto* generate = app.add_subcommand("generate", "generate a synthetic corpus file");
    generate->add_option("--config", gen_config, "key = value corpus config file");
    generate->add_option("--out", gen_out, "output corpus path");
    generate->add_option("--seed", gen_seed, "corpus seed");

    // train
    CommonFlags train_flags;
    auto* train = app.add_subcommand("train", "run one pretraining job");
    add_run_flags(train, train_flags);

    // sweep
    CommonFlags sweep_flags;
    std::string sweep_k = "1,4,16", sweep_w, sweep_seeds;
    int sweep_mult = 4, sweep_jobs = 1;
    auto* sweep = app.add_subcommand("sweep", "run a (k, w, seed) grid of pretraining jobs");
    add_run_flags(sweep, sweep_flags);
    sweep->add_option("--k-values", sweep_k, "comma list of k values");
    sweep->add_option("--w-values", sweep_w, "comma list of w values (int or 'unbounded')");
    sweep->add_option("--w-mult", sweep_mult, "w = mult * k when --w-values is absent (default 4)");
    sweep->add_option("--seeds", sweep_seeds, "comma list of seeds (default: the run seed)");
    sweep->add_option("--jobs", sweep_jobs, "parallel runs");

    // kl
    std::string kl_ckpt, kl_corpus;
    long kl_budget = 100000;
    int kl_bins = 64;
    std::uint64_t kl_seed = 1;
    auto* kl = app.add_subcommand("kl", "similarity discrepancy of a checkpoint on a corpus");
    kl->add_option("--checkpoint", kl_ckpt, "model checkpoint")->required();
    kl->add_option("--corpus", kl_corpus, "corpus file")->required();
    kl->add_option("--pair-budget", kl_budget, "pairs per population");
    kl->add_option("--bins", kl_bins, "histogram bins");
    kl->add_option("--seed", kl_seed, "pair sampling seed");

    // probe
    std::string pr_ckpt, pr_corpus, pr_task = "movie", pr_modality = "both", pr_feats = "head";
    int pr_steps = 200;
    double pr_lr = 0.1;
    auto* probe = app.add_subcommand("probe", "linear probe on frozen features");
    probe->add_option("--checkpoint", pr_ckpt, "model checkpoint")->required();
    probe->add_option("--corpus", pr_corpus, "corpus file")->required();
    probe->add_option("--task", pr_task, "movie or concept");
    probe->add_option("--modality", pr_modality, "video, audio or both");
    probe->add_option("--features", pr_feats, "head (final embeddings) or tower (pre-head)");
    probe->add_option("--steps", pr_steps, "probe training steps");
    probe->add_option("--lr", pr_lr, "probe learning rate");

    CLI11_PARSE(app, argc, argv);

    try {
        if (generate->parsed()) return cmd_generate(gen_config, gen_out, gen_seed);
        if (train->parsed()) return cmd_train(train_flags);
        if (sweep->parsed())
            return cmd_sweep(sweep_flags, sweep_k, sweep_w, sweep_mult, sweep_seeds, sweep_jobs);
        if (kl->parsed()) return cmd_kl(kl_ckpt, kl_corpus, kl_budget, kl_bins, kl_seed);
        if (probe->parsed())
            return cmd_probe(pr_ckpt, pr_corpus, pr_task, pr_modality, pr_feats, pr_steps, pr_lr);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
