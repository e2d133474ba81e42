#pragma once

#include <cstdint>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "longform/common.hpp"
#include "longform/io.hpp"
#include "longform/rng.hpp"

namespace longform {

// Synthetic long-form corpus generator. Three independent knobs control the
// distributional character of the data:
//   concepts_per_movie  - semantic diversity inside one movie
//   artifact_strength   - per-movie non-semantic signature added to both views
//   stickiness          - probability the concept chain repeats, producing
//                         reoccurring concepts (and hence class collisions)
struct CorpusConfig {
    int num_movies = 64;
    int snippets_per_movie = 256;
    int concept_pool_size = 32;
    int concepts_per_movie = 8;
    int semantic_dim = 16;
    int view_dim = 32;
    double artifact_strength = 1.0;
    double semantic_noise_std = 0.25;
    double observation_noise_std = 0.25;
    double stickiness = 0.5;
    std::uint64_t seed = 1;
    // Optional per-movie snippet counts; empty means uniform snippets_per_movie.
    std::vector<int> snippets_override;
};

struct Snippet {
    int movie_id = 0;
    int snippet_index = 0;
    int concept_id = 0;  // ground truth, hidden from training
    Eigen::VectorXd video_view;
    Eigen::VectorXd audio_view;
};

struct MovieSignature {
    Eigen::VectorXd video;
    Eigen::VectorXd audio;
};

struct Corpus {
    CorpusConfig config;
    std::vector<std::vector<Snippet>> movies;      // chronological per movie
    Eigen::MatrixXd concept_prototypes;            // pool x semantic_dim
    std::vector<MovieSignature> artifact_signatures;
    Eigen::MatrixXd map_video;                     // view_dim x semantic_dim
    Eigen::MatrixXd map_audio;

    int num_movies() const { return static_cast<int>(movies.size()); }

    int snippets_in(int movie) const { return static_cast<int>(movies[static_cast<std::size_t>(movie)].size()); }

    int min_snippets() const {
        int m = snippets_in(0);
        for (int n = 1; n < num_movies(); ++n) m = std::min(m, snippets_in(n));
        return m;
    }

    long total_snippets() const {
        long t = 0;
        for (const auto& mv : movies) t += static_cast<long>(mv.size());
        return t;
    }

    const Snippet& snippet(int movie, int index) const {
        return movies[static_cast<std::size_t>(movie)][static_cast<std::size_t>(index)];
    }
};

inline void validate_corpus_config(const CorpusConfig& c) {
    check_config(c.num_movies >= 1, "corpus config: num_movies must be >= 1");
    check_config(c.snippets_per_movie >= 1, "corpus config: snippets_per_movie must be >= 1");
    check_config(c.concept_pool_size >= 1, "corpus config: concept_pool_size must be >= 1");
    check_config(c.concepts_per_movie >= 1, "corpus config: concepts_per_movie must be >= 1");
    check_config(c.concepts_per_movie <= c.concept_pool_size,
                 "corpus config: concepts_per_movie exceeds concept_pool_size");
    check_config(c.semantic_dim >= 1, "corpus config: semantic_dim must be >= 1");
    check_config(c.view_dim >= 1, "corpus config: view_dim must be >= 1");
    check_config(c.artifact_strength >= 0.0, "corpus config: artifact_strength must be >= 0");
    check_config(c.semantic_noise_std >= 0.0, "corpus config: semantic_noise_std must be >= 0");
    check_config(c.observation_noise_std >= 0.0, "corpus config: observation_noise_std must be >= 0");
    check_config(c.stickiness >= 0.0 && c.stickiness <= 1.0,
                 "corpus config: stickiness must lie in [0, 1]");
    if (!c.snippets_override.empty()) {
        check_config(static_cast<int>(c.snippets_override.size()) == c.num_movies,
                     "corpus config: snippets_override length must equal num_movies");
        for (int m : c.snippets_override)
            check_config(m >= 1, "corpus config: snippets_override entries must be >= 1");
    }
}

// First-order sticky chain over a movie's assigned concepts. Entry 0 is
// uniform; entry t repeats entry t-1 with probability `stickiness`, otherwise
// jumps uniformly to one of the other G-1 concepts.
inline std::vector<int> concept_sequence(const std::vector<int>& movie_concepts, int length,
                                         double stickiness, Rng& rng) {
    check_config(!movie_concepts.empty(), "concept_sequence: empty concept list");
    check_config(length >= 1, "concept_sequence: length must be >= 1");
    const int g = static_cast<int>(movie_concepts.size());
    std::vector<int> seq(static_cast<std::size_t>(length));
    if (g == 1) {
        std::fill(seq.begin(), seq.end(), movie_concepts[0]);
        return seq;
    }
    std::uniform_int_distribution<int> first(0, g - 1);
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    std::uniform_int_distribution<int> other(0, g - 2);
    int slot = first(rng);
    seq[0] = movie_concepts[static_cast<std::size_t>(slot)];
    for (int t = 1; t < length; ++t) {
        if (coin(rng) >= stickiness) {
            int j = other(rng);
            slot = j >= slot ? j + 1 : j;
        }
        seq[static_cast<std::size_t>(t)] = movie_concepts[static_cast<std::size_t>(slot)];
    }
    return seq;
}

// view = map * latent + signature + observation noise, one draw per entry,
// video entries first then audio.
inline std::pair<Eigen::VectorXd, Eigen::VectorXd> render_views(
    const Eigen::VectorXd& latent, const MovieSignature& signatures,
    const Eigen::MatrixXd& map_video, const Eigen::MatrixXd& map_audio,
    double obs_noise_std, Rng& rng) {
    check_config(map_video.cols() == latent.size() && map_audio.cols() == latent.size(),
                 "render_views: modality map width does not match latent dimension");
    check_config(signatures.video.size() == map_video.rows() &&
                     signatures.audio.size() == map_audio.rows(),
                 "render_views: signature length does not match view dimension");
    Eigen::VectorXd video = map_video * latent + signatures.video +
                            gaussian_vector(map_video.rows(), rng, obs_noise_std);
    Eigen::VectorXd audio = map_audio * latent + signatures.audio +
                            gaussian_vector(map_audio.rows(), rng, obs_noise_std);
    return {std::move(video), std::move(audio)};
}

// Deterministic per seed. Draw order: prototypes, map_video, map_audio, then
// per movie: signatures, concept assignment, concept sequence, snippets.
inline Corpus generate_corpus(const CorpusConfig& config) {
    validate_corpus_config(config);
    Rng rng(config.seed);

    Corpus corpus;
    corpus.config = config;
    corpus.concept_prototypes.resize(config.concept_pool_size, config.semantic_dim);
    fill_gaussian(corpus.concept_prototypes, rng);
    corpus.map_video.resize(config.view_dim, config.semantic_dim);
    fill_gaussian(corpus.map_video, rng);
    corpus.map_audio.resize(config.view_dim, config.semantic_dim);
    fill_gaussian(corpus.map_audio, rng);

    corpus.movies.resize(static_cast<std::size_t>(config.num_movies));
    corpus.artifact_signatures.resize(static_cast<std::size_t>(config.num_movies));
    for (int n = 0; n < config.num_movies; ++n) {
        const int m_n = config.snippets_override.empty()
                            ? config.snippets_per_movie
                            : config.snippets_override[static_cast<std::size_t>(n)];
        auto& sig = corpus.artifact_signatures[static_cast<std::size_t>(n)];
        sig.video = gaussian_vector(config.view_dim, rng, config.artifact_strength);
        sig.audio = gaussian_vector(config.view_dim, rng, config.artifact_strength);

        std::vector<int> assigned = sample_distinct(config.concept_pool_size,
                                                    config.concepts_per_movie, rng);
        std::vector<int> sequence = concept_sequence(assigned, m_n, config.stickiness, rng);

        auto& snippets = corpus.movies[static_cast<std::size_t>(n)];
        snippets.resize(static_cast<std::size_t>(m_n));
        for (int m = 0; m < m_n; ++m) {
            Snippet& s = snippets[static_cast<std::size_t>(m)];
            s.movie_id = n;
            s.snippet_index = m;
            s.concept_id = sequence[static_cast<std::size_t>(m)];
            Eigen::VectorXd latent =
                corpus.concept_prototypes.row(s.concept_id).transpose() +
                gaussian_vector(config.semantic_dim, rng, config.semantic_noise_std);
            auto views = render_views(latent, sig, corpus.map_video, corpus.map_audio,
                                      config.observation_noise_std, rng);
            s.video_view = std::move(views.first);
            s.audio_view = std::move(views.second);
        }
    }
    return corpus;
}

namespace detail {
inline constexpr char kCorpusMagic[8] = {'L', 'F', 'C', 'O', 'R', 'P', 'U', 'S'};
inline constexpr std::uint32_t kCorpusVersion = 1;
}  // namespace detail

inline void save_corpus(const Corpus& corpus, const std::string& path) {
    BinaryWriter w(path);
    w.magic(detail::kCorpusMagic);
    w.u32(detail::kCorpusVersion);
    const CorpusConfig& c = corpus.config;
    w.u64(static_cast<std::uint64_t>(c.num_movies));
    w.u64(static_cast<std::uint64_t>(c.snippets_per_movie));
    w.u64(static_cast<std::uint64_t>(c.concept_pool_size));
    w.u64(static_cast<std::uint64_t>(c.concepts_per_movie));
    w.u64(static_cast<std::uint64_t>(c.semantic_dim));
    w.u64(static_cast<std::uint64_t>(c.view_dim));
    w.f64(c.artifact_strength);
    w.f64(c.semantic_noise_std);
    w.f64(c.observation_noise_std);
    w.f64(c.stickiness);
    w.u64(c.seed);
    w.u64(static_cast<std::uint64_t>(c.snippets_override.size()));
    for (int m : c.snippets_override) w.u64(static_cast<std::uint64_t>(m));

    w.mat(corpus.concept_prototypes);
    w.mat(corpus.map_video);
    w.mat(corpus.map_audio);
    for (const auto& sig : corpus.artifact_signatures) {
        w.vec(sig.video);
        w.vec(sig.audio);
    }
    for (const auto& movie : corpus.movies) {
        w.u64(movie.size());
        for (const Snippet& s : movie) {
            w.u64(static_cast<std::uint64_t>(s.concept_id));
            w.vec(s.video_view);
            w.vec(s.audio_view);
        }
    }
    if (!w.good()) throw ParseError("write failure while saving corpus to '" + path + "'");
}

inline Corpus load_corpus(const std::string& path) {
    BinaryReader r(path);
    r.expect_magic(detail::kCorpusMagic, "corpus");
    const auto version = r.u32();
    if (version != detail::kCorpusVersion)
        throw ParseError("'" + path + "': unsupported corpus version " + std::to_string(version) +
                         " (expected " + std::to_string(detail::kCorpusVersion) + ")");

    Corpus corpus;
    CorpusConfig& c = corpus.config;
    r.section("config block");
    c.num_movies = static_cast<int>(r.u64());
    c.snippets_per_movie = static_cast<int>(r.u64());
    c.concept_pool_size = static_cast<int>(r.u64());
    c.concepts_per_movie = static_cast<int>(r.u64());
    c.semantic_dim = static_cast<int>(r.u64());
    c.view_dim = static_cast<int>(r.u64());
    c.artifact_strength = r.f64();
    c.semantic_noise_std = r.f64();
    c.observation_noise_std = r.f64();
    c.stickiness = r.f64();
    c.seed = r.u64();
    const auto overrides = r.u64();
    for (std::uint64_t i = 0; i < overrides; ++i)
        c.snippets_override.push_back(static_cast<int>(r.u64()));
    validate_corpus_config(c);

    r.section("concept prototypes");
    corpus.concept_prototypes = r.mat();
    r.section("modality maps");
    corpus.map_video = r.mat();
    corpus.map_audio = r.mat();
    r.section("artifact signatures");
    corpus.artifact_signatures.resize(static_cast<std::size_t>(c.num_movies));
    for (auto& sig : corpus.artifact_signatures) {
        sig.video = r.vec();
        sig.audio = r.vec();
    }
    corpus.movies.resize(static_cast<std::size_t>(c.num_movies));
    for (int n = 0; n < c.num_movies; ++n) {
        r.section("snippets of movie " + std::to_string(n));
        const auto m_n = r.u64();
        auto& movie = corpus.movies[static_cast<std::size_t>(n)];
        movie.resize(static_cast<std::size_t>(m_n));
        for (std::uint64_t m = 0; m < m_n; ++m) {
            Snippet& s = movie[static_cast<std::size_t>(m)];
            s.movie_id = n;
            s.snippet_index = static_cast<int>(m);
            s.concept_id = static_cast<int>(r.u64());
            s.video_view = r.vec();
            s.audio_view = r.vec();
            if (s.concept_id < 0 || s.concept_id >= c.concept_pool_size)
                throw ParseError("'" + path + "': concept id out of range in movie " +
                                 std::to_string(n));
            if (!s.video_view.allFinite() || !s.audio_view.allFinite())
                throw ParseError("'" + path + "': non-finite view in movie " + std::to_string(n));
        }
    }
    r.section("end of file");
    r.expect_eof();
    return corpus;
}

}  // namespace longform
