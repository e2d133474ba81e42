#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>

#include "longform/corpus.hpp"

using namespace longform;

namespace {

CorpusConfig small_config() {
    CorpusConfig c;
    c.num_movies = 4;
    c.snippets_per_movie = 6;
    c.concept_pool_size = 5;
    c.concepts_per_movie = 3;
    c.semantic_dim = 3;
    c.view_dim = 4;
    c.seed = 11;
    return c;
}

std::string temp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

bool bitwise_equal(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    return a.rows() == b.rows() && a.cols() == b.cols() && a.cwiseEqual(b).all();
}

bool corpora_equal(const Corpus& a, const Corpus& b) {
    if (a.num_movies() != b.num_movies()) return false;
    if (!bitwise_equal(a.concept_prototypes, b.concept_prototypes)) return false;
    if (!bitwise_equal(a.map_video, b.map_video) || !bitwise_equal(a.map_audio, b.map_audio))
        return false;
    for (int n = 0; n < a.num_movies(); ++n) {
        if (!bitwise_equal(a.artifact_signatures[n].video, b.artifact_signatures[n].video))
            return false;
        if (!bitwise_equal(a.artifact_signatures[n].audio, b.artifact_signatures[n].audio))
            return false;
        if (a.snippets_in(n) != b.snippets_in(n)) return false;
        for (int m = 0; m < a.snippets_in(n); ++m) {
            const Snippet &x = a.snippet(n, m), &y = b.snippet(n, m);
            if (x.movie_id != y.movie_id || x.snippet_index != y.snippet_index ||
                x.concept_id != y.concept_id)
                return false;
            if (!bitwise_equal(x.video_view, y.video_view) ||
                !bitwise_equal(x.audio_view, y.audio_view))
                return false;
        }
    }
    return true;
}

}  // namespace

TEST_CASE("concept_sequence with one concept is constant") {
    Rng rng(3);
    auto seq = concept_sequence({7}, 5, 0.3, rng);
    REQUIRE(seq == std::vector<int>{7, 7, 7, 7, 7});
}

TEST_CASE("concept_sequence with stickiness one repeats the first draw") {
    Rng rng(4);
    auto seq = concept_sequence({2, 9, 5}, 4, 1.0, rng);
    for (int c : seq) REQUIRE(c == seq[0]);
}

TEST_CASE("concept_sequence stays within the assigned concepts") {
    Rng rng(5);
    const std::vector<int> concepts = {3, 1, 8, 6};
    auto seq = concept_sequence(concepts, 500, 0.4, rng);
    const std::set<int> allowed(concepts.begin(), concepts.end());
    for (int c : seq) REQUIRE(allowed.count(c) == 1);
}

TEST_CASE("concept_sequence empirical repeat rate matches stickiness") {
    // Monte-Carlo oracle: adjacent repeats happen iff the chain sticks, so the
    // repeat frequency estimates stickiness itself.
    Rng rng(6);
    const int length = 100001;
    auto seq = concept_sequence({0, 1, 2, 3}, length, 0.8, rng);
    long repeats = 0;
    for (int t = 1; t < length; ++t)
        if (seq[t] == seq[t - 1]) ++repeats;
    const double rate = static_cast<double>(repeats) / static_cast<double>(length - 1);
    REQUIRE(rate == Catch::Approx(0.8).margin(0.01));
}

TEST_CASE("concept_sequence rejects an empty concept list") {
    Rng rng(1);
    REQUIRE_THROWS_AS(concept_sequence({}, 3, 0.5, rng), ConfigError);
}

TEST_CASE("render_views: all-zero inputs give zero views") {
    Rng rng(2);
    MovieSignature sig{Eigen::VectorXd::Zero(4), Eigen::VectorXd::Zero(4)};
    Eigen::MatrixXd wv = Eigen::MatrixXd::Zero(4, 3), wa = Eigen::MatrixXd::Zero(4, 3);
    auto [video, audio] = render_views(Eigen::VectorXd::Zero(3), sig, wv, wa, 0.0, rng);
    REQUIRE(video.isZero(0.0));
    REQUIRE(audio.isZero(0.0));
}

TEST_CASE("render_views: identity map plus bias") {
    Rng rng(2);
    Eigen::VectorXd latent = Eigen::VectorXd::Unit(3, 0);
    MovieSignature sig{Eigen::VectorXd::Unit(3, 0), Eigen::VectorXd::Zero(3)};
    Eigen::MatrixXd id = Eigen::MatrixXd::Identity(3, 3);
    auto [video, audio] = render_views(latent, sig, id, id, 0.0, rng);
    REQUIRE(video(0) == 2.0);
    REQUIRE(video(1) == 0.0);
    REQUIRE(audio(0) == 1.0);
}

TEST_CASE("render_views matches a scripted recomputation under a fixed seed") {
    const int view_dim = 4, sdim = 3;
    Rng setup(21);
    Eigen::MatrixXd wv(view_dim, sdim), wa(view_dim, sdim);
    fill_gaussian(wv, setup);
    fill_gaussian(wa, setup);
    MovieSignature sig{gaussian_vector(view_dim, setup), gaussian_vector(view_dim, setup)};
    Eigen::VectorXd latent = gaussian_vector(sdim, setup);
    const double obs = 0.7;

    Rng rng_impl(99);
    auto [video, audio] = render_views(latent, sig, wv, wa, obs, rng_impl);

    // independent recomputation of the two-line formula, plain loops
    Rng rng_oracle(99);
    std::normal_distribution<double> unit(0.0, 1.0);
    Eigen::VectorXd noise_v(view_dim), noise_a(view_dim);
    for (int i = 0; i < view_dim; ++i) noise_v(i) = obs * unit(rng_oracle);
    {
        std::normal_distribution<double> unit2(0.0, 1.0);
        for (int i = 0; i < view_dim; ++i) noise_a(i) = obs * unit2(rng_oracle);
    }
    for (int i = 0; i < view_dim; ++i) {
        double v = sig.video(i) + noise_v(i);
        double a = sig.audio(i) + noise_a(i);
        for (int j = 0; j < sdim; ++j) {
            v += wv(i, j) * latent(j);
            a += wa(i, j) * latent(j);
        }
        REQUIRE(video(i) == Catch::Approx(v).epsilon(1e-12));
        REQUIRE(audio(i) == Catch::Approx(a).epsilon(1e-12));
    }
}

TEST_CASE("render_views rejects mismatched dimensions") {
    Rng rng(2);
    MovieSignature sig{Eigen::VectorXd::Zero(4), Eigen::VectorXd::Zero(4)};
    Eigen::MatrixXd wrong = Eigen::MatrixXd::Zero(4, 2);
    REQUIRE_THROWS_AS(
        render_views(Eigen::VectorXd::Zero(3), sig, wrong, wrong, 0.0, rng), ConfigError);
}

TEST_CASE("generate_corpus: counts and indices") {
    CorpusConfig c = small_config();
    c.num_movies = 2;
    c.snippets_per_movie = 3;
    Corpus corpus = generate_corpus(c);
    REQUIRE(corpus.total_snippets() == 6);
    for (int n = 0; n < 2; ++n)
        for (int m = 0; m < 3; ++m) {
            REQUIRE(corpus.snippet(n, m).movie_id == n);
            REQUIRE(corpus.snippet(n, m).snippet_index == m);
        }
}

TEST_CASE("generate_corpus: zero artifact strength gives zero signatures") {
    CorpusConfig c = small_config();
    c.artifact_strength = 0.0;
    Corpus corpus = generate_corpus(c);
    for (const auto& sig : corpus.artifact_signatures) {
        REQUIRE(sig.video.isZero(0.0));
        REQUIRE(sig.audio.isZero(0.0));
    }
}

TEST_CASE("generate_corpus is deterministic per seed") {
    CorpusConfig c = small_config();
    Corpus a = generate_corpus(c);
    Corpus b = generate_corpus(c);
    REQUIRE(corpora_equal(a, b));
    c.seed += 1;
    Corpus d = generate_corpus(c);
    REQUIRE_FALSE(corpora_equal(a, d));
}

TEST_CASE("generate_corpus: concept ids belong to the movie's assigned set") {
    CorpusConfig c = small_config();
    Corpus corpus = generate_corpus(c);
    for (int n = 0; n < c.num_movies; ++n) {
        std::set<int> present;
        for (int m = 0; m < corpus.snippets_in(n); ++m) {
            const int cid = corpus.snippet(n, m).concept_id;
            REQUIRE(cid >= 0);
            REQUIRE(cid < c.concept_pool_size);
            present.insert(cid);
        }
        REQUIRE(static_cast<int>(present.size()) <= c.concepts_per_movie);
    }
}

TEST_CASE("generate_corpus: signature entries have std close to artifact_strength") {
    CorpusConfig c = small_config();
    c.num_movies = 200;
    c.snippets_per_movie = 1;
    c.view_dim = 32;
    c.artifact_strength = 1.7;
    Corpus corpus = generate_corpus(c);
    double sum = 0.0, sq = 0.0;
    long count = 0;
    for (const auto& sig : corpus.artifact_signatures)
        for (const auto* v : {&sig.video, &sig.audio})
            for (int i = 0; i < v->size(); ++i) {
                sum += (*v)(i);
                sq += (*v)(i) * (*v)(i);
                ++count;
            }
    const double mean = sum / static_cast<double>(count);
    const double sd = std::sqrt(sq / static_cast<double>(count) - mean * mean);
    REQUIRE(sd == Catch::Approx(1.7).epsilon(0.10));
}

TEST_CASE("generate_corpus: pool smaller than total demand forces concept sharing") {
    CorpusConfig c = small_config();
    c.num_movies = 6;
    c.concept_pool_size = 8;
    c.concepts_per_movie = 4;  // 6 * 4 > 8
    Corpus corpus = generate_corpus(c);
    std::vector<std::set<int>> assigned(static_cast<std::size_t>(c.num_movies));
    for (int n = 0; n < c.num_movies; ++n)
        for (int m = 0; m < corpus.snippets_in(n); ++m)
            assigned[static_cast<std::size_t>(n)].insert(corpus.snippet(n, m).concept_id);
    bool shared = false;
    for (int i = 0; i < c.num_movies && !shared; ++i)
        for (int j = i + 1; j < c.num_movies && !shared; ++j)
            for (int cid : assigned[static_cast<std::size_t>(i)])
                if (assigned[static_cast<std::size_t>(j)].count(cid)) {
                    shared = true;
                    break;
                }
    REQUIRE(shared);
}

TEST_CASE("generate_corpus rejects invalid configs naming the field") {
    CorpusConfig c = small_config();
    c.concepts_per_movie = c.concept_pool_size + 1;
    REQUIRE_THROWS_WITH(generate_corpus(c), Catch::Matchers::ContainsSubstring("concepts_per_movie"));
    c = small_config();
    c.stickiness = 1.5;
    REQUIRE_THROWS_WITH(generate_corpus(c), Catch::Matchers::ContainsSubstring("stickiness"));
    c = small_config();
    c.snippets_override = {1, 2};  // wrong length
    REQUIRE_THROWS_WITH(generate_corpus(c), Catch::Matchers::ContainsSubstring("snippets_override"));
}

TEST_CASE("generate_corpus honors per-movie snippet overrides") {
    CorpusConfig c = small_config();
    c.snippets_override = {2, 5, 3, 4};
    Corpus corpus = generate_corpus(c);
    REQUIRE(corpus.snippets_in(0) == 2);
    REQUIRE(corpus.snippets_in(1) == 5);
    REQUIRE(corpus.total_snippets() == 14);
    REQUIRE(corpus.min_snippets() == 2);
}

TEST_CASE("save/load corpus round trip") {
    const std::string path = temp_path("lf_corpus_roundtrip.bin");
    Corpus corpus = generate_corpus(small_config());
    save_corpus(corpus, path);
    Corpus loaded = load_corpus(path);
    REQUIRE(corpora_equal(corpus, loaded));
    REQUIRE(loaded.config.seed == corpus.config.seed);
    std::filesystem::remove(path);
}

TEST_CASE("load_corpus rejects truncated files") {
    const std::string path = temp_path("lf_corpus_truncated.bin");
    Corpus corpus = generate_corpus(small_config());
    save_corpus(corpus, path);
    const auto size = std::filesystem::file_size(path);
    std::filesystem::resize_file(path, size / 2);
    REQUIRE_THROWS_WITH(load_corpus(path), Catch::Matchers::ContainsSubstring("truncated"));
    std::filesystem::remove(path);
}

TEST_CASE("load_corpus rejects a version mismatch") {
    const std::string path = temp_path("lf_corpus_badversion.bin");
    Corpus corpus = generate_corpus(small_config());
    save_corpus(corpus, path);
    {
        std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
        f.seekp(8);  // version field follows the magic
        const std::uint32_t bad = 99;
        f.write(reinterpret_cast<const char*>(&bad), sizeof bad);
    }
    REQUIRE_THROWS_WITH(load_corpus(path), Catch::Matchers::ContainsSubstring("version"));
    std::filesystem::remove(path);
}

TEST_CASE("load_corpus rejects files with the wrong magic") {
    const std::string path = temp_path("lf_corpus_notacorpus.bin");
    {
        std::ofstream f(path, std::ios::binary);
        f << "definitely not a corpus";
    }
    REQUIRE_THROWS_AS(load_corpus(path), ParseError);
    std::filesystem::remove(path);
}
