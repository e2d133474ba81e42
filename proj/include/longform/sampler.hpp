#pragma once

#include <limits>
#include <string>
#include <vector>

#include "longform/common.hpp"
#include "longform/corpus.hpp"
#include "longform/rng.hpp"

namespace longform {

// Sentinel meaning "no temporal constraint" (effective window = M_n).
inline constexpr int kUnboundedWindow = std::numeric_limits<int>::max();

// The within-content negative sampling policy: a batch of B snippets covers
// B/k movies with k snippets each, all k drawn from a window of width w.
// w = k forces consecutive snippets; w unbounded imposes no constraint.
struct SamplerConfig {
    int batch_size = 64;   // B
    int per_movie = 1;     // k
    int window = kUnboundedWindow;  // w

    bool unbounded() const { return window == kUnboundedWindow; }
};

struct SnippetRef {
    int movie_id = 0;
    int snippet_index = 0;

    friend bool operator==(const SnippetRef&, const SnippetRef&) = default;
};

struct Minibatch {
    std::vector<SnippetRef> refs;  // exactly B, grouped by movie

    int size() const { return static_cast<int>(refs.size()); }
};

inline std::string format_window(int window) {
    return window == kUnboundedWindow ? "unbounded" : std::to_string(window);
}

inline int parse_window(const std::string& text) {
    if (text == "unbounded") return kUnboundedWindow;
    std::size_t used = 0;
    int value = 0;
    try {
        value = std::stoi(text, &used);
    } catch (const std::exception&) {
        throw ConfigError("window: expected a positive integer or 'unbounded', got '" + text + "'");
    }
    if (used != text.size() || value < 1)
        throw ConfigError("window: expected a positive integer or 'unbounded', got '" + text + "'");
    return value;
}

// Bound chain from the sampling policy: k <= w <= min_n M_n, k | B, B/k <= N.
inline std::vector<std::string> sampler_config_violations(int num_movies, int min_snippets,
                                                          const SamplerConfig& cfg) {
    std::vector<std::string> bad;
    if (cfg.batch_size < 1) bad.push_back("batch_size: must be >= 1");
    if (cfg.per_movie < 1) bad.push_back("per_movie: must be >= 1");
    if (cfg.window < 1) bad.push_back("window: must be >= 1");
    if (cfg.batch_size >= 1 && cfg.per_movie >= 1) {
        if (cfg.batch_size % cfg.per_movie != 0)
            bad.push_back("per_movie: k=" + std::to_string(cfg.per_movie) +
                          " does not divide batch_size B=" + std::to_string(cfg.batch_size));
        else if (cfg.batch_size / cfg.per_movie > num_movies)
            bad.push_back("batch_size: B/k=" + std::to_string(cfg.batch_size / cfg.per_movie) +
                          " exceeds num_movies N=" + std::to_string(num_movies));
        if (cfg.per_movie > min_snippets)
            bad.push_back("per_movie: k=" + std::to_string(cfg.per_movie) +
                          " exceeds the shortest movie's snippet count " +
                          std::to_string(min_snippets));
        if (!cfg.unbounded()) {
            if (cfg.window < cfg.per_movie)
                bad.push_back("window: w=" + std::to_string(cfg.window) +
                              " is smaller than k=" + std::to_string(cfg.per_movie));
            if (cfg.window > min_snippets)
                bad.push_back("window: w=" + std::to_string(cfg.window) +
                              " exceeds the shortest movie's snippet count " +
                              std::to_string(min_snippets));
        }
    }
    return bad;
}

inline void validate_sampler_config(int num_movies, int min_snippets, const SamplerConfig& cfg) {
    auto bad = sampler_config_violations(num_movies, min_snippets, cfg);
    if (bad.empty()) return;
    std::string msg = "sampler config invalid:";
    for (const auto& b : bad) msg += "\n  " + b;
    throw ConfigError(msg);
}

inline void validate_sampler_config(const Corpus& corpus, const SamplerConfig& cfg) {
    validate_sampler_config(corpus.num_movies(), corpus.min_snippets(), cfg);
}

// Uniformly choose B/k distinct movies; per movie place a window start
// uniformly in [0, M_n - w_eff] and draw k distinct indices inside it.
// k = 1 ignores the window (a single sample has span 1).
inline Minibatch sample_minibatch(const Corpus& corpus, const SamplerConfig& cfg, Rng& rng) {
    const int groups = cfg.batch_size / cfg.per_movie;
    Minibatch batch;
    batch.refs.reserve(static_cast<std::size_t>(cfg.batch_size));
    std::vector<int> movies = sample_distinct(corpus.num_movies(), groups, rng);
    for (int n : movies) {
        const int m_n = corpus.snippets_in(n);
        if (cfg.per_movie == 1) {
            std::uniform_int_distribution<int> pick(0, m_n - 1);
            batch.refs.push_back({n, pick(rng)});
            continue;
        }
        const int w_eff = cfg.unbounded() ? m_n : std::min(cfg.window, m_n);
        std::uniform_int_distribution<int> place(0, m_n - w_eff);
        const int start = place(rng);
        for (int offset : sample_distinct(w_eff, cfg.per_movie, rng))
            batch.refs.push_back({n, start + offset});
    }
    return batch;
}

inline long batches_per_epoch(const Corpus& corpus, const SamplerConfig& cfg) {
    return corpus.total_snippets() / cfg.batch_size;
}

}  // namespace longform
