#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include "longform/runner.hpp"

using namespace longform;

namespace {

namespace fs = std::filesystem;

CorpusConfig tiny_corpus_config() {
    CorpusConfig c;
    c.num_movies = 8;
    c.snippets_per_movie = 16;
    c.concept_pool_size = 6;
    c.concepts_per_movie = 3;
    c.semantic_dim = 3;
    c.view_dim = 6;
    c.seed = 9;
    return c;
}

RunConfig tiny_run_config() {
    RunConfig r;
    r.corpus = tiny_corpus_config();
    r.sampler = {8, 2, kUnboundedWindow};
    r.model.view_dim = 6;
    r.model.encoder_widths = {10, 8};
    r.model.joint_dim = 5;
    r.epochs = 2;
    r.warmup_epochs = 1;
    r.diag_epochs = {2};
    r.pair_budget = 2000;
    r.probe.steps = 60;
    r.seed = 4;
    return r;
}

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
        fs::remove_all(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("defaults mirror the published pretraining recipe") {
    RunConfig r;
    REQUIRE(r.init_lr == 1e-4);
    REQUIRE(r.peak_lr == 2e-3);
    REQUIRE(r.warmup_epochs == 1);
    REQUIRE(r.diag_epochs == std::vector<int>{1, 4, 7, 10});
}

TEST_CASE("zero epochs returns initial params and no logs") {
    RunConfig cfg = tiny_run_config();
    cfg.epochs = 0;
    cfg.diag_epochs = {};
    Corpus corpus = generate_corpus(cfg.corpus);
    RunResult res = run_pretraining(cfg, corpus);
    REQUIRE(res.logs.empty());
    REQUIRE(res.train_rows.empty());
    ModelParams fresh = init_params(cfg.model, derive_seed(cfg.seed, 0xA11CE));
    REQUIRE(res.params.video.encoder[0].weight.cwiseEqual(fresh.video.encoder[0].weight).all());
}

TEST_CASE("training runs the advertised number of steps and lowers the loss") {
    RunConfig cfg = tiny_run_config();
    cfg.epochs = 4;
    cfg.diag_epochs = {4};
    Corpus corpus = generate_corpus(cfg.corpus);
    RunResult res = run_pretraining(cfg, corpus);
    const long bpe = batches_per_epoch(corpus, cfg.sampler);
    REQUIRE(static_cast<long>(res.train_rows.size()) == bpe * 4);
    REQUIRE(res.logs.size() == 4);
    REQUIRE(res.logs.back().mean_loss < res.logs.front().mean_loss);
    REQUIRE(res.logs.back().diagnostics.has_value());
    REQUIRE_FALSE(res.logs.front().diagnostics.has_value());
}

TEST_CASE("identical config and seed give bit-identical runs") {
    RunConfig cfg = tiny_run_config();
    Corpus corpus = generate_corpus(cfg.corpus);
    RunResult a = run_pretraining(cfg, corpus);
    RunResult b = run_pretraining(cfg, corpus);
    REQUIRE(train_csv_text(a.train_rows) == train_csv_text(b.train_rows));
    REQUIRE(diagnostics_csv_text(a.logs) == diagnostics_csv_text(b.logs));

    cfg.seed += 1;
    RunResult c = run_pretraining(cfg, corpus);
    REQUIRE(train_csv_text(a.train_rows) != train_csv_text(c.train_rows));
}

TEST_CASE("run writes parseable csv files and a checkpoint at cadence epochs") {
    TempDir dir("lf_run_out");
    RunConfig cfg = tiny_run_config();
    cfg.out_dir = dir.path.string();
    Corpus corpus = generate_corpus(cfg.corpus);
    RunResult res = run_pretraining(cfg, corpus);

    auto train_rows = parse_train_csv(read_file(dir.path / "train.csv"));
    REQUIRE(train_rows.size() == res.train_rows.size());
    REQUIRE(train_rows.back().loss == res.train_rows.back().loss);

    auto diag_rows = parse_diagnostics_csv(read_file(dir.path / "diagnostics.csv"));
    REQUIRE(diag_rows.size() == 1);
    REQUIRE(diag_rows[0].epoch == 2);
    REQUIRE(diag_rows[0].kl_sym == res.logs.back().diagnostics->kl.symmetric_kl);

    ModelParams ckpt = load_checkpoint((dir.path / "checkpoint_e2.bin").string());
    REQUIRE(ckpt.video.encoder[0].weight.cwiseEqual(res.params.video.encoder[0].weight).all());
}

TEST_CASE("csv round trips preserve typed records exactly") {
    Rng rng(71);
    std::normal_distribution<double> unit(0.0, 1.0);
    std::vector<TrainRow> rows;
    for (int i = 0; i < 40; ++i)
        rows.push_back({i / 7 + 1, i, std::exp(10.0 * unit(rng)) * unit(rng), std::abs(unit(rng)) * 1e-3});
    auto parsed = parse_train_csv(train_csv_text(rows));
    REQUIRE(parsed.size() == rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        REQUIRE(parsed[i].epoch == rows[i].epoch);
        REQUIRE(parsed[i].step == rows[i].step);
        REQUIRE(parsed[i].loss == rows[i].loss);  // %.17g is lossless for doubles
        REQUIRE(parsed[i].lr == rows[i].lr);
    }

    SweepReport report;
    for (int i = 0; i < 20; ++i)
        report.rows.push_back({1 << (i % 5), i % 3 == 0 ? kUnboundedWindow : 4 * i + 1,
                               static_cast<std::uint64_t>(i), unit(rng) * std::exp(5.0 * unit(rng)),
                               std::abs(unit(rng)), unit(rng), unit(rng), unit(rng), unit(rng)});
    SweepReport back = parse_sweep_csv(sweep_csv_text(report));
    REQUIRE(back.rows.size() == report.rows.size());
    for (std::size_t i = 0; i < report.rows.size(); ++i) {
        REQUIRE(back.rows[i].k == report.rows[i].k);
        REQUIRE(back.rows[i].w == report.rows[i].w);
        REQUIRE(back.rows[i].seed == report.rows[i].seed);
        REQUIRE(back.rows[i].final_loss == report.rows[i].final_loss);
        REQUIRE(back.rows[i].probe_concept_audio == report.rows[i].probe_concept_audio);
    }

    REQUIRE_THROWS_AS(parse_train_csv("bogus header\n1,2,3,4\n"), ParseError);
    REQUIRE_THROWS_AS(parse_train_csv(std::string(kTrainCsvHeader) + "\n1,2,nan?,4\n"), ParseError);
}

TEST_CASE("sweep with a single combination yields one row") {
    RunConfig base = tiny_run_config();
    Corpus corpus = generate_corpus(base.corpus);
    SweepSpec spec;
    spec.k_values = {1};
    spec.w_values = {kUnboundedWindow};
    spec.seeds = {5};
    SweepReport report = run_sweep(base, spec, corpus);
    REQUIRE(report.rows.size() == 1);
    REQUIRE(report.rows[0].k == 1);
    REQUIRE(report.rows[0].w == kUnboundedWindow);
}

TEST_CASE("w-multiplier rule pairs each k with 4k") {
    RunConfig base = tiny_run_config();
    base.epochs = 1;
    base.diag_epochs = {1};
    Corpus corpus = generate_corpus(base.corpus);
    SweepSpec spec;
    spec.k_values = {1, 2, 4};
    spec.w_multiplier = 4;
    spec.seeds = {5};
    SweepReport report = run_sweep(base, spec, corpus);
    REQUIRE(report.rows.size() == 3);
    REQUIRE(report.rows[0].w == 4);
    REQUIRE(report.rows[1].w == 8);
    REQUIRE(report.rows[2].w == 16);
}

TEST_CASE("sweep rejects invalid combinations before any run starts") {
    TempDir dir("lf_sweep_invalid");
    RunConfig base = tiny_run_config();
    base.out_dir = dir.path.string();
    Corpus corpus = generate_corpus(base.corpus);
    SweepSpec spec;
    spec.k_values = {2, 3};  // 3 does not divide 8
    spec.w_values = {kUnboundedWindow};
    spec.seeds = {5};
    REQUIRE_THROWS_AS(run_sweep(base, spec, corpus), ConfigError);
    REQUIRE_FALSE(fs::exists(dir.path / "sweep.csv"));
    REQUIRE_FALSE(fs::exists(dir.path / "runs"));
}

TEST_CASE("parallel sweep matches serial numerics bitwise") {
    RunConfig base = tiny_run_config();
    Corpus corpus = generate_corpus(base.corpus);
    SweepSpec spec;
    spec.k_values = {1, 2};
    spec.w_values = {4, kUnboundedWindow};
    spec.seeds = {5, 6};
    spec.jobs = 1;
    SweepReport serial = run_sweep(base, spec, corpus);
    spec.jobs = 3;
    SweepReport parallel = run_sweep(base, spec, corpus);
    REQUIRE(sweep_csv_text(serial) == sweep_csv_text(parallel));
    REQUIRE(serial.rows.size() == 8);
}

TEST_CASE("sweep reruns produce identical csv bytes and run directories") {
    TempDir dir("lf_sweep_out");
    RunConfig base = tiny_run_config();
    base.out_dir = dir.path.string();
    Corpus corpus = generate_corpus(base.corpus);
    SweepSpec spec;
    spec.k_values = {2};
    spec.w_values = {8};
    spec.seeds = {5, 6};
    run_sweep(base, spec, corpus);
    const std::string first = read_file(dir.path / "sweep.csv");
    REQUIRE(fs::exists(dir.path / "runs" / "k2_w8_s5" / "train.csv"));
    REQUIRE(fs::exists(dir.path / "runs" / "k2_w8_s6" / "diagnostics.csv"));
    const std::string run_csv = read_file(dir.path / "runs" / "k2_w8_s5" / "train.csv");

    run_sweep(base, spec, corpus);
    REQUIRE(read_file(dir.path / "sweep.csv") == first);
    REQUIRE(read_file(dir.path / "runs" / "k2_w8_s5" / "train.csv") == run_csv);
}

TEST_CASE("config files map keys one-to-one onto the run config") {
    const std::string text = R"(
# corpus block
corpus = /tmp/some_corpus.bin
num_movies = 12
snippets_per_movie = 20
concept_pool_size = 9
concepts_per_movie = 5
semantic_dim = 7
view_dim = 11
artifact_strength = 0.5
semantic_noise_std = 0.3
observation_noise_std = 0.15
stickiness = 0.6
corpus_seed = 77

batch_size = 24
per_movie_k = 6
window = unbounded

encoder_widths = 64, 32
joint_dim = 16
head = mlp
head_norm = true
normalize_embeddings = yes
temperature = 0.2

init_lr = 0.0002
peak_lr = 0.004
epochs = 6
warmup_epochs = 2
diag_epochs = 1,3,6
pair_budget = 5000
kl_bins = 32
probe_steps = 120
probe_lr = 0.05
seed = 123
out = /tmp/lf_out
)";
    KeyValueFile kv = KeyValueFile::parse_text(text);
    RunConfig r = run_config_from(kv);
    kv.reject_unknown_keys();
    REQUIRE(r.corpus_path == "/tmp/some_corpus.bin");
    REQUIRE(r.corpus.num_movies == 12);
    REQUIRE(r.corpus.stickiness == 0.6);
    REQUIRE(r.corpus.seed == 77);
    REQUIRE(r.sampler.batch_size == 24);
    REQUIRE(r.sampler.per_movie == 6);
    REQUIRE(r.sampler.window == kUnboundedWindow);
    REQUIRE(r.model.view_dim == 11);
    REQUIRE(r.model.encoder_widths == std::vector<int>{64, 32});
    REQUIRE(r.model.joint_dim == 16);
    REQUIRE(r.model.head == HeadKind::mlp);
    REQUIRE(r.model.head_norm);
    REQUIRE(r.model.normalize_embeddings);
    REQUIRE(r.model.temperature == 0.2);
    REQUIRE(r.init_lr == 0.0002);
    REQUIRE(r.peak_lr == 0.004);
    REQUIRE(r.epochs == 6);
    REQUIRE(r.warmup_epochs == 2);
    REQUIRE(r.diag_epochs == std::vector<int>{1, 3, 6});
    REQUIRE(r.pair_budget == 5000);
    REQUIRE(r.kl_bins == 32);
    REQUIRE(r.probe.steps == 120);
    REQUIRE(r.probe.lr == 0.05);
    REQUIRE(r.seed == 123);
    REQUIRE(r.out_dir == "/tmp/lf_out");
}

TEST_CASE("config files reject unknown keys, bad values, and duplicates") {
    {
        KeyValueFile kv = KeyValueFile::parse_text("epochs = 3\nbogus_key = 1\n");
        run_config_from(kv);
        REQUIRE_THROWS_WITH(kv.reject_unknown_keys(),
                            Catch::Matchers::ContainsSubstring("bogus_key"));
    }
    {
        KeyValueFile kv = KeyValueFile::parse_text("epochs = many\n");
        REQUIRE_THROWS_AS(run_config_from(kv), ParseError);
    }
    REQUIRE_THROWS_WITH(KeyValueFile::parse_text("epochs = 3\nepochs = 4\n"),
                        Catch::Matchers::ContainsSubstring("duplicate"));
    REQUIRE_THROWS_WITH(KeyValueFile::parse_text("no equals sign here\n"),
                        Catch::Matchers::ContainsSubstring("key = value"));
    {
        KeyValueFile kv = KeyValueFile::parse_text("window = sometimes\n");
        REQUIRE_THROWS_AS(run_config_from(kv), ConfigError);
    }
}

TEST_CASE("sweep forces a final-epoch diagnostics pass") {
    RunConfig base = tiny_run_config();
    base.diag_epochs = {1};  // final epoch (2) absent on purpose
    Corpus corpus = generate_corpus(base.corpus);
    SweepSpec spec;
    spec.k_values = {2};
    spec.w_values = {kUnboundedWindow};
    spec.seeds = {5};
    SweepReport report = run_sweep(base, spec, corpus);
    REQUIRE(report.rows.size() == 1);
    REQUIRE(report.rows[0].kl_sym > 0.0);
}
