#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "longform/common.hpp"
#include "longform/corpus.hpp"
#include "longform/model.hpp"
#include "longform/optim.hpp"
#include "longform/rng.hpp"

namespace longform {

enum class ProbeFeature { embedding, tower };

inline ProbeFeature parse_probe_feature(const std::string& s) {
    if (s == "head" || s == "embedding") return ProbeFeature::embedding;
    if (s == "tower") return ProbeFeature::tower;
    throw ConfigError("features: expected 'head' or 'tower', got '" + s + "'");
}

// All snippets embedded offline, rows ordered by (movie_id, snippet_index).
struct CorpusEmbeddings {
    Eigen::MatrixXd video;
    Eigen::MatrixXd audio;
    std::vector<int> movie_id;
    std::vector<int> snippet_index;
    std::vector<int> concept_id;
    std::vector<long> movie_offset;  // size N+1
};

inline CorpusEmbeddings embed_corpus(const ModelParams& params, const Corpus& corpus,
                                     ProbeFeature feature = ProbeFeature::embedding) {
    const long total = corpus.total_snippets();
    const int view_dim = corpus.config.view_dim;
    Eigen::MatrixXd xv(total, view_dim), xa(total, view_dim);
    CorpusEmbeddings out;
    out.movie_id.reserve(static_cast<std::size_t>(total));
    out.snippet_index.reserve(static_cast<std::size_t>(total));
    out.concept_id.reserve(static_cast<std::size_t>(total));
    out.movie_offset.push_back(0);
    long row = 0;
    for (const auto& movie : corpus.movies) {
        for (const Snippet& s : movie) {
            xv.row(row) = s.video_view.transpose();
            xa.row(row) = s.audio_view.transpose();
            out.movie_id.push_back(s.movie_id);
            out.snippet_index.push_back(s.snippet_index);
            out.concept_id.push_back(s.concept_id);
            ++row;
        }
        out.movie_offset.push_back(row);
    }
    auto z = feature == ProbeFeature::embedding ? embed_only(params, xv, xa)
                                                : encoder_features(params, xv, xa);
    out.video = std::move(z.first);
    out.audio = std::move(z.second);
    return out;
}

// Empirical similarity populations of negative pairs: within-content
// (n = n', m != m') and cross-content (n != n'), ordered video-audio pairs.
struct SimilaritySamples {
    std::vector<double> within;
    std::vector<double> across;
};

namespace detail {

inline long within_pair_count(const CorpusEmbeddings& e) {
    long c = 0;
    for (std::size_t n = 0; n + 1 < e.movie_offset.size(); ++n) {
        const long m = e.movie_offset[n + 1] - e.movie_offset[n];
        c += m * (m - 1);
    }
    return c;
}

inline long across_pair_count(const CorpusEmbeddings& e) {
    const long total = static_cast<long>(e.movie_id.size());
    long same = 0;
    for (std::size_t n = 0; n + 1 < e.movie_offset.size(); ++n) {
        const long m = e.movie_offset[n + 1] - e.movie_offset[n];
        same += m * m;
    }
    return total * total - same;
}

}  // namespace detail

// Exhaustive below the budget, otherwise uniform draws over the qualifying
// pairs (within-pairs via movie choice weighted by its pair count,
// cross-pairs via rejection).
inline SimilaritySamples collect_similarities_from(const CorpusEmbeddings& e, long pair_budget,
                                                   Rng& rng) {
    check_config(pair_budget >= 1, "collect_similarities: pair_budget must be >= 1");
    const long within_total = detail::within_pair_count(e);
    const long across_total = detail::across_pair_count(e);
    if (within_total == 0)
        throw ConfigError("collect_similarities: within population infeasible "
                          "(every movie has a single snippet)");
    if (across_total == 0)
        throw ConfigError("collect_similarities: across population infeasible "
                          "(corpus has a single movie)");

    const int movies = static_cast<int>(e.movie_offset.size()) - 1;
    const long total = static_cast<long>(e.movie_id.size());
    auto dot = [&](long i, long j) { return e.video.row(i).dot(e.audio.row(j)); };

    SimilaritySamples out;
    if (within_total <= pair_budget) {
        out.within.reserve(static_cast<std::size_t>(within_total));
        for (int n = 0; n < movies; ++n)
            for (long i = e.movie_offset[n]; i < e.movie_offset[n + 1]; ++i)
                for (long j = e.movie_offset[n]; j < e.movie_offset[n + 1]; ++j)
                    if (i != j) out.within.push_back(dot(i, j));
    } else {
        std::vector<double> cumulative;
        cumulative.reserve(static_cast<std::size_t>(movies));
        double acc = 0.0;
        for (int n = 0; n < movies; ++n) {
            const double m = static_cast<double>(e.movie_offset[n + 1] - e.movie_offset[n]);
            acc += m * (m - 1.0);
            cumulative.push_back(acc);
        }
        std::uniform_real_distribution<double> pick_movie(0.0, acc);
        out.within.reserve(static_cast<std::size_t>(pair_budget));
        for (long s = 0; s < pair_budget; ++s) {
            const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), pick_movie(rng));
            const int n = static_cast<int>(it - cumulative.begin());
            const long lo = e.movie_offset[n], m_n = e.movie_offset[n + 1] - lo;
            std::uniform_int_distribution<long> first(0, m_n - 1);
            std::uniform_int_distribution<long> second(0, m_n - 2);
            const long i = first(rng);
            long j = second(rng);
            if (j >= i) ++j;
            out.within.push_back(dot(lo + i, lo + j));
        }
    }

    if (across_total <= pair_budget) {
        out.across.reserve(static_cast<std::size_t>(across_total));
        for (long i = 0; i < total; ++i)
            for (long j = 0; j < total; ++j)
                if (e.movie_id[static_cast<std::size_t>(i)] != e.movie_id[static_cast<std::size_t>(j)])
                    out.across.push_back(dot(i, j));
    } else {
        std::uniform_int_distribution<long> any(0, total - 1);
        out.across.reserve(static_cast<std::size_t>(pair_budget));
        for (long s = 0; s < pair_budget; ++s) {
            long i = any(rng), j = any(rng);
            while (e.movie_id[static_cast<std::size_t>(i)] == e.movie_id[static_cast<std::size_t>(j)]) {
                i = any(rng);
                j = any(rng);
            }
            out.across.push_back(dot(i, j));
        }
    }
    return out;
}

inline SimilaritySamples collect_similarities(const ModelParams& params, const Corpus& corpus,
                                              long pair_budget, Rng& rng) {
    return collect_similarities_from(embed_corpus(params, corpus), pair_budget, rng);
}

struct DiscrepancyReport {
    double symmetric_kl = 0.0;
    double kl_within_across = 0.0;  // directed, within as P
    double kl_across_within = 0.0;
    double mean_within = 0.0;
    double mean_across = 0.0;
    double std_within = 0.0;
    double std_across = 0.0;
    int bin_count = 0;
    double support_lo = 0.0;
    double support_hi = 0.0;
    bool degenerate_support = false;
};

namespace detail {

inline void mean_std(const std::vector<double>& xs, double& mean, double& sd) {
    double s = 0.0;
    for (double x : xs) s += x;
    mean = s / static_cast<double>(xs.size());
    double q = 0.0;
    for (double x : xs) q += (x - mean) * (x - mean);
    sd = std::sqrt(q / static_cast<double>(xs.size()));
}

// Histogram probabilities with smoothing mass eps_frac of the population's
// total count added to every bin.
inline std::vector<double> smoothed_histogram(const std::vector<double>& xs, double lo, double hi,
                                              int bins, double eps_frac) {
    std::vector<double> counts(static_cast<std::size_t>(bins), 0.0);
    const double width = (hi - lo) / static_cast<double>(bins);
    for (double x : xs) {
        auto b = static_cast<long>((x - lo) / width);
        b = std::clamp<long>(b, 0, bins - 1);
        counts[static_cast<std::size_t>(b)] += 1.0;
    }
    const double n = static_cast<double>(xs.size());
    const double eps_mass = eps_frac * n;
    const double norm = n + eps_mass * static_cast<double>(bins);
    for (double& c : counts) c = (c + eps_mass) / norm;
    return counts;
}

inline double kl_bins(const std::vector<double>& p, const std::vector<double>& q) {
    double kl = 0.0;
    for (std::size_t b = 0; b < p.size(); ++b) kl += p[b] * std::log(p[b] / q[b]);
    return kl;
}

}  // namespace detail

// Symmetric KL between the two populations, estimated from histograms over
// the shared support of their union.
inline DiscrepancyReport symmetric_kl(const SimilaritySamples& samples, int bin_count = 64,
                                      double smoothing_eps = 1e-6) {
    check_config(bin_count >= 1, "symmetric_kl: bin_count must be >= 1");
    check_config(smoothing_eps > 0.0, "symmetric_kl: smoothing_eps must be > 0");
    check_config(!samples.within.empty() && !samples.across.empty(),
                 "symmetric_kl: both populations must be non-empty");

    DiscrepancyReport r;
    r.bin_count = bin_count;
    detail::mean_std(samples.within, r.mean_within, r.std_within);
    detail::mean_std(samples.across, r.mean_across, r.std_across);

    double lo = samples.within.front(), hi = lo;
    for (const auto* pop : {&samples.within, &samples.across})
        for (double x : *pop) {
            lo = std::min(lo, x);
            hi = std::max(hi, x);
        }
    r.support_lo = lo;
    r.support_hi = hi;
    if (lo == hi) {
        r.degenerate_support = true;
        return r;
    }
    auto p = detail::smoothed_histogram(samples.within, lo, hi, bin_count, smoothing_eps);
    auto q = detail::smoothed_histogram(samples.across, lo, hi, bin_count, smoothing_eps);
    r.kl_within_across = detail::kl_bins(p, q);
    r.kl_across_within = detail::kl_bins(q, p);
    r.symmetric_kl = r.kl_within_across + r.kl_across_within;
    return r;
}

enum class ProbeTask { movie_id, concept_id };
enum class Modality { video, audio };

inline std::string probe_task_name(ProbeTask t) {
    return t == ProbeTask::movie_id ? "movie_id" : "concept_id";
}

inline std::string modality_name(Modality m) { return m == Modality::video ? "video" : "audio"; }

// L2-penalized softmax regression on unit-norm feature rows. Normalizing
// rows puts every embedding on a common scale, and the weight penalty then
// makes the probe margin-sensitive the way a fixed-C linear SVM is:
// directions the encoder has squeezed below the regularization floor stop
// counting.
struct ProbeHyper {
    int steps = 200;
    double lr = 0.1;
    double l2 = 1e-3;
    bool normalize_features = true;
};

struct ProbeSplit {
    std::vector<long> train;
    std::vector<long> test;
};

struct ProbeReport {
    ProbeTask task = ProbeTask::movie_id;
    Modality modality = Modality::video;
    double top1_accuracy = 0.0;
    int num_classes = 0;
    int train_size = 0;
    int test_size = 0;
};

// Per movie: first half of the snippets (by snippet_index) trains the probe,
// the second half is held out — random splits would leak temporally adjacent
// snippets across the boundary.
inline ProbeSplit first_half_split(const CorpusEmbeddings& e) {
    ProbeSplit split;
    for (std::size_t n = 0; n + 1 < e.movie_offset.size(); ++n) {
        const long lo = e.movie_offset[n], hi = e.movie_offset[n + 1];
        const long half = lo + (hi - lo) / 2;
        for (long i = lo; i < half; ++i) split.train.push_back(i);
        for (long i = half; i < hi; ++i) split.test.push_back(i);
    }
    return split;
}

// Multinomial softmax regression on frozen features, trained full-batch with
// Adam at a constant learning rate. Deterministic: zero init, no sampling.
inline ProbeReport train_linear_probe(const Eigen::MatrixXd& features,
                                      const std::vector<int>& labels, const ProbeSplit& split,
                                      const ProbeHyper& hyper,
                                      ProbeTask task = ProbeTask::movie_id,
                                      Modality modality = Modality::video) {
    check_shape(static_cast<long>(labels.size()) == features.rows(),
                "train_linear_probe: one label per feature row required");
    check_config(hyper.steps >= 1 && hyper.lr > 0.0, "train_linear_probe: bad hyperparameters");
    check_config(!split.train.empty() && !split.test.empty(),
                 "train_linear_probe: both splits must be non-empty");

    std::map<int, int> dense;
    for (const auto& rows : {split.train, split.test})
        for (long i : rows) dense.emplace(labels[static_cast<std::size_t>(i)], 0);
    int next = 0;
    for (auto& kv : dense) kv.second = next++;
    const int classes = next;
    check_config(classes >= 2, "train_linear_probe: fewer than two classes present");

    std::vector<bool> in_train(static_cast<std::size_t>(classes), false);
    for (long i : split.train)
        in_train[static_cast<std::size_t>(dense.at(labels[static_cast<std::size_t>(i)]))] = true;
    for (auto kv : dense)
        check_config(in_train[static_cast<std::size_t>(kv.second)],
                     "train_linear_probe: class " + std::to_string(kv.first) +
                         " missing from the train split");

    const long n_train = static_cast<long>(split.train.size());
    const int dim = static_cast<int>(features.cols());
    Eigen::MatrixXd x_train(n_train, dim);
    std::vector<int> y_train(static_cast<std::size_t>(n_train));
    for (long r = 0; r < n_train; ++r) {
        const long i = split.train[static_cast<std::size_t>(r)];
        x_train.row(r) = features.row(i);
        y_train[static_cast<std::size_t>(r)] = dense.at(labels[static_cast<std::size_t>(i)]);
    }

    Eigen::MatrixXd w = Eigen::MatrixXd::Zero(classes, dim);
    Eigen::VectorXd b = Eigen::VectorXd::Zero(classes);
    AdamState state = make_adam_state(static_cast<std::size_t>(w.size() + b.size()));
    Schedule constant_lr{hyper.lr, hyper.lr, hyper.steps, hyper.steps};
    std::vector<ParamBlock> params = {{w.data(), static_cast<std::size_t>(w.size())},
                                      {b.data(), static_cast<std::size_t>(b.size())}};

    Eigen::MatrixXd dw(classes, dim);
    Eigen::VectorXd db(classes);
    for (int step = 0; step < hyper.steps; ++step) {
        Eigen::MatrixXd logits = x_train * w.transpose();
        logits.rowwise() += b.transpose();
        Eigen::VectorXd row_max = logits.rowwise().maxCoeff();
        Eigen::MatrixXd probs = (logits.colwise() - row_max).array().exp().matrix();
        probs.array().colwise() /= probs.rowwise().sum().array();
        for (long r = 0; r < n_train; ++r)
            probs(r, y_train[static_cast<std::size_t>(r)]) -= 1.0;
        probs /= static_cast<double>(n_train);
        dw = probs.transpose() * x_train + hyper.l2 * w;
        db = probs.colwise().sum().transpose();
        std::vector<ConstParamBlock> grads = {{dw.data(), static_cast<std::size_t>(dw.size())},
                                              {db.data(), static_cast<std::size_t>(db.size())}};
        adam_step(params, grads, state, constant_lr);
    }

    long correct = 0;
    for (long i : split.test) {
        Eigen::VectorXd logits = w * features.row(i).transpose() + b;
        Eigen::Index arg = 0;
        logits.maxCoeff(&arg);
        if (static_cast<int>(arg) == dense.at(labels[static_cast<std::size_t>(i)])) ++correct;
    }

    ProbeReport rep;
    rep.task = task;
    rep.modality = modality;
    rep.top1_accuracy = static_cast<double>(correct) / static_cast<double>(split.test.size());
    rep.num_classes = classes;
    rep.train_size = static_cast<int>(split.train.size());
    rep.test_size = static_cast<int>(split.test.size());
    return rep;
}

struct ProbePair {
    ProbeReport video;
    ProbeReport audio;
};

inline ProbePair probe_from(const CorpusEmbeddings& e, ProbeTask task, const ProbeHyper& hyper) {
    const auto& labels = task == ProbeTask::movie_id ? e.movie_id : e.concept_id;
    const ProbeSplit split = first_half_split(e);
    ProbePair out;
    out.video = train_linear_probe(e.video, labels, split, hyper, task, Modality::video);
    out.audio = train_linear_probe(e.audio, labels, split, hyper, task, Modality::audio);
    return out;
}

inline ProbePair movie_probe(const ModelParams& params, const Corpus& corpus,
                             const ProbeHyper& hyper = {},
                             ProbeFeature feature = ProbeFeature::embedding) {
    return probe_from(embed_corpus(params, corpus, feature), ProbeTask::movie_id, hyper);
}

inline ProbePair concept_probe(const ModelParams& params, const Corpus& corpus,
                               const ProbeHyper& hyper = {},
                               ProbeFeature feature = ProbeFeature::embedding) {
    return probe_from(embed_corpus(params, corpus, feature), ProbeTask::concept_id, hyper);
}

}  // namespace longform
