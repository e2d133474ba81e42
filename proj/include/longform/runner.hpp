#pragma once

#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "longform/config.hpp"
#include "longform/corpus.hpp"
#include "longform/diagnostics.hpp"
#include "longform/loss.hpp"
#include "longform/model.hpp"
#include "longform/optim.hpp"
#include "longform/sampler.hpp"

namespace longform {

struct TrainRow {
    int epoch = 0;
    long step = 0;  // global optimizer step
    double loss = 0.0;  // per-instance mean of the Eq. 1 batch loss
    double lr = 0.0;
};

struct EpochDiagnostics {
    DiscrepancyReport kl;
    ProbePair movie;
    ProbePair concepts;
};

struct EpochLog {
    int epoch = 0;
    double mean_loss = 0.0;
    double lr = 0.0;  // at the last step of the epoch
    std::optional<EpochDiagnostics> diagnostics;
};

struct RunResult {
    ModelParams params;
    std::vector<EpochLog> logs;
    std::vector<TrainRow> train_rows;
};

namespace csv {

inline std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::vector<std::string> split_row(const std::string& line) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream ss(line);
    while (std::getline(ss, item, ',')) out.push_back(item);
    if (!line.empty() && line.back() == ',') out.push_back("");
    return out;
}

inline double to_double(const std::string& s, const std::string& where) {
    try {
        std::size_t used = 0;
        double v = std::stod(s, &used);
        if (used != s.size()) throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        throw ParseError(where + ": bad numeric field '" + s + "'");
    }
}

inline long to_long(const std::string& s, const std::string& where) {
    try {
        std::size_t used = 0;
        long v = std::stol(s, &used);
        if (used != s.size()) throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        throw ParseError(where + ": bad integer field '" + s + "'");
    }
}

}  // namespace csv

inline constexpr const char* kTrainCsvHeader = "epoch,step,loss,lr";
inline constexpr const char* kDiagCsvHeader =
    "epoch,kl_sym,kl_sd,kl_ds,mean_S,mean_D,"
    "probe_movie_video,probe_movie_audio,probe_concept_video,probe_concept_audio";
inline constexpr const char* kSweepCsvHeader =
    "k,w,seed,final_loss,kl_sym,"
    "probe_movie_video,probe_movie_audio,probe_concept_video,probe_concept_audio";

inline std::string train_csv_text(const std::vector<TrainRow>& rows) {
    std::string out = std::string(kTrainCsvHeader) + "\n";
    for (const auto& r : rows)
        out += std::to_string(r.epoch) + "," + std::to_string(r.step) + "," + csv::fmt(r.loss) +
               "," + csv::fmt(r.lr) + "\n";
    return out;
}

inline std::vector<TrainRow> parse_train_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line != kTrainCsvHeader)
        throw ParseError("train.csv: missing or wrong header");
    std::vector<TrainRow> rows;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const std::string where = "train.csv:" + std::to_string(line_no);
        auto f = csv::split_row(line);
        if (f.size() != 4) throw ParseError(where + ": expected 4 fields");
        rows.push_back({static_cast<int>(csv::to_long(f[0], where)), csv::to_long(f[1], where),
                        csv::to_double(f[2], where), csv::to_double(f[3], where)});
    }
    return rows;
}

inline std::string diagnostics_csv_text(const std::vector<EpochLog>& logs) {
    std::string out = std::string(kDiagCsvHeader) + "\n";
    for (const auto& l : logs) {
        if (!l.diagnostics) continue;
        const auto& d = *l.diagnostics;
        out += std::to_string(l.epoch) + "," + csv::fmt(d.kl.symmetric_kl) + "," +
               csv::fmt(d.kl.kl_within_across) + "," + csv::fmt(d.kl.kl_across_within) + "," +
               csv::fmt(d.kl.mean_within) + "," + csv::fmt(d.kl.mean_across) + "," +
               csv::fmt(d.movie.video.top1_accuracy) + "," + csv::fmt(d.movie.audio.top1_accuracy) +
               "," + csv::fmt(d.concepts.video.top1_accuracy) + "," +
               csv::fmt(d.concepts.audio.top1_accuracy) + "\n";
    }
    return out;
}

struct DiagRow {
    int epoch = 0;
    double kl_sym = 0, kl_sd = 0, kl_ds = 0, mean_s = 0, mean_d = 0;
    double probe_movie_video = 0, probe_movie_audio = 0;
    double probe_concept_video = 0, probe_concept_audio = 0;
};

inline std::vector<DiagRow> parse_diagnostics_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line != kDiagCsvHeader)
        throw ParseError("diagnostics.csv: missing or wrong header");
    std::vector<DiagRow> rows;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const std::string where = "diagnostics.csv:" + std::to_string(line_no);
        auto f = csv::split_row(line);
        if (f.size() != 10) throw ParseError(where + ": expected 10 fields");
        DiagRow r;
        r.epoch = static_cast<int>(csv::to_long(f[0], where));
        r.kl_sym = csv::to_double(f[1], where);
        r.kl_sd = csv::to_double(f[2], where);
        r.kl_ds = csv::to_double(f[3], where);
        r.mean_s = csv::to_double(f[4], where);
        r.mean_d = csv::to_double(f[5], where);
        r.probe_movie_video = csv::to_double(f[6], where);
        r.probe_movie_audio = csv::to_double(f[7], where);
        r.probe_concept_video = csv::to_double(f[8], where);
        r.probe_concept_audio = csv::to_double(f[9], where);
        rows.push_back(r);
    }
    return rows;
}

inline Corpus resolve_corpus(const RunConfig& config) {
    return config.corpus_path.empty() ? generate_corpus(config.corpus)
                                      : load_corpus(config.corpus_path);
}

namespace detail {

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ParseError("cannot open '" + path.string() + "' for writing");
    out << text;
}

inline EpochDiagnostics run_diagnostics(const ModelParams& params, const Corpus& corpus,
                                        const RunConfig& config, Rng& diag_rng) {
    CorpusEmbeddings emb = embed_corpus(params, corpus);
    EpochDiagnostics d;
    d.kl = symmetric_kl(collect_similarities_from(emb, config.pair_budget, diag_rng),
                        config.kl_bins);
    d.movie = probe_from(emb, ProbeTask::movie_id, config.probe);
    d.concepts = probe_from(emb, ProbeTask::concept_id, config.probe);
    return d;
}

}  // namespace detail

// One pretraining run: batches_per_epoch * epochs optimizer steps, epoch-level
// logging, diagnostics and a checkpoint at each cadence epoch. Deterministic
// per (config, seed); writes nothing when out_dir is empty.
inline RunResult run_pretraining(const RunConfig& config, const Corpus& corpus) {
    validate_model_config(config.model);
    check_shape(config.model.view_dim == corpus.config.view_dim,
                "run_pretraining: model view_dim does not match the corpus");
    validate_sampler_config(corpus, config.sampler);
    check_config(config.epochs >= 0, "run: epochs must be >= 0");
    for (int e : config.diag_epochs)
        check_config(e >= 1 && (config.epochs == 0 || e <= config.epochs),
                     "run: diag_epochs entries must lie in [1, epochs]");

    RunResult result;
    result.params = init_params(config.model, derive_seed(config.seed, 0xA11CE));
    if (config.epochs == 0) return result;

    const bool emit = !config.out_dir.empty();
    if (emit) std::filesystem::create_directories(config.out_dir);

    const long bpe = batches_per_epoch(corpus, config.sampler);
    check_config(bpe >= 1, "run: fewer snippets than one batch");
    check_config(config.warmup_epochs >= 1 && config.warmup_epochs <= config.epochs,
                 "run: warmup_epochs must lie in [1, epochs]");
    Schedule schedule{config.init_lr, config.peak_lr, config.warmup_epochs * bpe,
                      static_cast<long>(config.epochs) * bpe};
    validate_schedule(schedule);

    Rng sampler_rng = make_rng(config.seed, 0x5A3);
    Rng diag_rng = make_rng(config.seed, 0xD1A6);
    AdamState adam = make_adam_state(param_count(result.params));
    std::vector<ParamBlock> blocks = param_blocks(result.params);

    const int b = config.sampler.batch_size;
    const int view_dim = corpus.config.view_dim;
    Eigen::MatrixXd xv(b, view_dim), xa(b, view_dim);

    long global_step = 0;
    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        double loss_sum = 0.0;
        double last_lr = 0.0;
        for (long step = 0; step < bpe; ++step) {
            Minibatch mb = sample_minibatch(corpus, config.sampler, sampler_rng);
            for (int i = 0; i < b; ++i) {
                const Snippet& s = corpus.snippet(mb.refs[static_cast<std::size_t>(i)].movie_id,
                                                  mb.refs[static_cast<std::size_t>(i)].snippet_index);
                xv.row(i) = s.video_view.transpose();
                xa.row(i) = s.audio_view.transpose();
            }
            BatchEmbeddings fwd = embed_batch(result.params, xv, xa);
            const double temp = config.model.normalize_embeddings ? config.model.temperature : 1.0;
            NceResult nce = nce_loss_and_grad(fwd.z_video, fwd.z_audio, temp);
            if (!std::isfinite(nce.loss))
                throw std::runtime_error("training diverged: non-finite loss at epoch " +
                                         std::to_string(epoch) + " step " +
                                         std::to_string(global_step));
            ModelGrads grads = backward_batch(result.params, fwd, nce.d_z_video, nce.d_z_audio);
            last_lr = lr_at(schedule, adam.step_count);
            adam_step(blocks, grad_blocks(grads), adam, schedule);

            const double mean_loss = nce.loss / static_cast<double>(b);
            loss_sum += mean_loss;
            result.train_rows.push_back({epoch, global_step, mean_loss, last_lr});
            ++global_step;
        }

        EpochLog log;
        log.epoch = epoch;
        log.mean_loss = loss_sum / static_cast<double>(bpe);
        log.lr = last_lr;
        const bool cadence = std::find(config.diag_epochs.begin(), config.diag_epochs.end(),
                                       epoch) != config.diag_epochs.end();
        if (cadence) {
            log.diagnostics = detail::run_diagnostics(result.params, corpus, config, diag_rng);
            if (emit)
                save_checkpoint(result.params, (std::filesystem::path(config.out_dir) /
                                                ("checkpoint_e" + std::to_string(epoch) + ".bin"))
                                                   .string());
        }
        result.logs.push_back(std::move(log));
    }

    if (emit) {
        detail::write_text_file(std::filesystem::path(config.out_dir) / "train.csv",
                                train_csv_text(result.train_rows));
        detail::write_text_file(std::filesystem::path(config.out_dir) / "diagnostics.csv",
                                diagnostics_csv_text(result.logs));
    }
    return result;
}

inline RunResult run_pretraining(const RunConfig& config) {
    const Corpus corpus = resolve_corpus(config);
    return run_pretraining(config, corpus);
}

struct SweepRow {
    int k = 0;
    int w = kUnboundedWindow;
    std::uint64_t seed = 0;
    double final_loss = 0.0;
    double kl_sym = 0.0;
    double probe_movie_video = 0.0;
    double probe_movie_audio = 0.0;
    double probe_concept_video = 0.0;
    double probe_concept_audio = 0.0;
};

struct SweepReport {
    std::vector<SweepRow> rows;
};

struct SweepSpec {
    std::vector<int> k_values;
    std::vector<int> w_values;   // ignored when w_multiplier > 0
    int w_multiplier = 0;        // w = multiplier * k, one w per k
    std::vector<std::uint64_t> seeds;
    int jobs = 1;
};

inline std::string sweep_csv_text(const SweepReport& report) {
    std::string out = std::string(kSweepCsvHeader) + "\n";
    for (const auto& r : report.rows)
        out += std::to_string(r.k) + "," + format_window(r.w) + "," + std::to_string(r.seed) +
               "," + csv::fmt(r.final_loss) + "," + csv::fmt(r.kl_sym) + "," +
               csv::fmt(r.probe_movie_video) + "," + csv::fmt(r.probe_movie_audio) + "," +
               csv::fmt(r.probe_concept_video) + "," + csv::fmt(r.probe_concept_audio) + "\n";
    return out;
}

inline SweepReport parse_sweep_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line != kSweepCsvHeader)
        throw ParseError("sweep.csv: missing or wrong header");
    SweepReport report;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const std::string where = "sweep.csv:" + std::to_string(line_no);
        auto f = csv::split_row(line);
        if (f.size() != 9) throw ParseError(where + ": expected 9 fields");
        SweepRow r;
        r.k = static_cast<int>(csv::to_long(f[0], where));
        try {
            r.w = parse_window(f[1]);
        } catch (const ConfigError& e) {
            throw ParseError(where + ": " + e.what());
        }
        r.seed = static_cast<std::uint64_t>(csv::to_long(f[2], where));
        r.final_loss = csv::to_double(f[3], where);
        r.kl_sym = csv::to_double(f[4], where);
        r.probe_movie_video = csv::to_double(f[5], where);
        r.probe_movie_audio = csv::to_double(f[6], where);
        r.probe_concept_video = csv::to_double(f[7], where);
        r.probe_concept_audio = csv::to_double(f[8], where);
        report.rows.push_back(r);
    }
    return report;
}

namespace detail {

struct SweepCombo {
    int k;
    int w;
    std::uint64_t seed;
};

inline std::vector<SweepCombo> sweep_combos(const SweepSpec& spec) {
    check_config(!spec.k_values.empty(), "sweep: k_values must not be empty");
    check_config(!spec.seeds.empty(), "sweep: seeds must not be empty");
    check_config(spec.w_multiplier > 0 || !spec.w_values.empty(),
                 "sweep: provide w_values or a w multiplier");
    std::vector<SweepCombo> combos;
    for (int k : spec.k_values) {
        std::vector<int> ws;
        if (spec.w_multiplier > 0)
            ws.push_back(spec.w_multiplier * k);
        else
            ws = spec.w_values;
        for (int w : ws)
            for (std::uint64_t s : spec.seeds) combos.push_back({k, w, s});
    }
    auto key = [](const SweepCombo& c) {
        return std::make_tuple(c.k, c.w, c.seed);
    };
    std::sort(combos.begin(), combos.end(),
              [&](const SweepCombo& a, const SweepCombo& b) { return key(a) < key(b); });
    return combos;
}

inline std::string run_dir_name(const SweepCombo& c) {
    return "k" + std::to_string(c.k) + "_w" + format_window(c.w) + "_s" + std::to_string(c.seed);
}

}  // namespace detail

// Cross product of (k, w, seed), every combination validated before the first
// run starts. Runs are share-nothing and may execute in parallel; rows come
// back sorted by (k, w, seed) regardless of scheduling, and a diagnostics
// pass at the final epoch is forced so every row carries KL and probe values.
inline SweepReport run_sweep(const RunConfig& base, const SweepSpec& spec, const Corpus& corpus) {
    const auto combos = detail::sweep_combos(spec);
    for (const auto& c : combos) {
        SamplerConfig s = base.sampler;
        s.per_movie = c.k;
        s.window = c.w;
        validate_sampler_config(corpus, s);
    }
    check_config(base.epochs >= 1, "sweep: epochs must be >= 1");

    std::vector<SweepRow> rows(combos.size());
    std::atomic<std::size_t> next{0};
    const int jobs = std::max(1, std::min<int>(spec.jobs, static_cast<int>(combos.size())));

    auto worker = [&]() {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= combos.size()) return;
            const auto& c = combos[i];
            RunConfig cfg = base;
            cfg.sampler.per_movie = c.k;
            cfg.sampler.window = c.w;
            cfg.seed = c.seed;
            if (std::find(cfg.diag_epochs.begin(), cfg.diag_epochs.end(), cfg.epochs) ==
                cfg.diag_epochs.end())
                cfg.diag_epochs.push_back(cfg.epochs);
            if (!base.out_dir.empty())
                cfg.out_dir = (std::filesystem::path(base.out_dir) / "runs" /
                               detail::run_dir_name(c))
                                  .string();
            RunResult res = run_pretraining(cfg, corpus);

            const EpochLog& last = res.logs.back();
            const EpochDiagnostics& d = *last.diagnostics;
            rows[i] = {c.k,
                       c.w,
                       c.seed,
                       last.mean_loss,
                       d.kl.symmetric_kl,
                       d.movie.video.top1_accuracy,
                       d.movie.audio.top1_accuracy,
                       d.concepts.video.top1_accuracy,
                       d.concepts.audio.top1_accuracy};
        }
    };

    if (jobs == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(jobs));
        for (int t = 0; t < jobs; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }

    SweepReport report;
    report.rows = std::move(rows);
    if (!base.out_dir.empty()) {
        std::filesystem::create_directories(base.out_dir);
        detail::write_text_file(std::filesystem::path(base.out_dir) / "sweep.csv",
                                sweep_csv_text(report));
    }
    return report;
}

inline SweepReport run_sweep(const RunConfig& base, const SweepSpec& spec) {
    const Corpus corpus = resolve_corpus(base);
    return run_sweep(base, spec, corpus);
}

}  // namespace longform
