#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "longform/common.hpp"
#include "longform/corpus.hpp"
#include "longform/diagnostics.hpp"
#include "longform/model.hpp"
#include "longform/sampler.hpp"

namespace longform {

// One pretraining run, fully specified. A corpus comes either from
// `corpus_path` or is generated inline from `corpus`.
struct RunConfig {
    std::string corpus_path;
    CorpusConfig corpus;
    SamplerConfig sampler;
    ModelConfig model;
    double init_lr = 1e-4;
    double peak_lr = 2e-3;
    int epochs = 10;
    int warmup_epochs = 1;
    std::vector<int> diag_epochs = {1, 4, 7, 10};
    long pair_budget = 100000;
    int kl_bins = 64;
    ProbeHyper probe;
    std::uint64_t seed = 1;
    std::string out_dir;
};

// `key = value` lines, '#' comments. Keys mirror RunConfig fields.
class KeyValueFile {
public:
    static KeyValueFile parse_file(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw ParseError("cannot open config file '" + path + "'");
        std::stringstream ss;
        ss << in.rdbuf();
        return parse_text(ss.str(), path);
    }

    static KeyValueFile parse_text(const std::string& text, const std::string& origin = "<text>") {
        KeyValueFile kv;
        kv.origin_ = origin;
        std::istringstream in(text);
        std::string line;
        int line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            const auto hash = line.find('#');
            if (hash != std::string::npos) line.erase(hash);
            const std::string trimmed = trim(line);
            if (trimmed.empty()) continue;
            const auto eq = trimmed.find('=');
            if (eq == std::string::npos)
                throw ParseError(origin + ":" + std::to_string(line_no) +
                                 ": expected 'key = value', got '" + trimmed + "'");
            const std::string key = trim(trimmed.substr(0, eq));
            const std::string value = trim(trimmed.substr(eq + 1));
            if (key.empty())
                throw ParseError(origin + ":" + std::to_string(line_no) + ": empty key");
            if (!kv.values_.emplace(key, value).second)
                throw ParseError(origin + ":" + std::to_string(line_no) + ": duplicate key '" +
                                 key + "'");
        }
        return kv;
    }

    bool has(const std::string& key) const { return values_.count(key) != 0; }

    std::string get_string(const std::string& key, const std::string& fallback) {
        auto it = values_.find(key);
        if (it == values_.end()) return fallback;
        consumed_.insert(key);
        return it->second;
    }

    long get_long(const std::string& key, long fallback) {
        return numeric<long>(key, fallback);
    }

    int get_int(const std::string& key, int fallback) {
        return numeric<int>(key, fallback);
    }

    std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) {
        return numeric<std::uint64_t>(key, fallback);
    }

    double get_double(const std::string& key, double fallback) {
        auto it = values_.find(key);
        if (it == values_.end()) return fallback;
        consumed_.insert(key);
        try {
            std::size_t used = 0;
            double v = std::stod(it->second, &used);
            if (used != it->second.size()) throw std::invalid_argument("trailing characters");
            return v;
        } catch (const std::exception&) {
            throw ParseError(origin_ + ": key '" + key + "': expected a number, got '" +
                             it->second + "'");
        }
    }

    bool get_bool(const std::string& key, bool fallback) {
        auto it = values_.find(key);
        if (it == values_.end()) return fallback;
        consumed_.insert(key);
        const std::string& v = it->second;
        if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
        if (v == "false" || v == "0" || v == "no" || v == "off") return false;
        throw ParseError(origin_ + ": key '" + key + "': expected a boolean, got '" + v + "'");
    }

    std::vector<int> get_int_list(const std::string& key, std::vector<int> fallback) {
        auto it = values_.find(key);
        if (it == values_.end()) return fallback;
        consumed_.insert(key);
        std::vector<int> out;
        std::istringstream ss(it->second);
        std::string item;
        while (std::getline(ss, item, ',')) {
            const std::string t = trim(item);
            if (t.empty()) continue;
            try {
                std::size_t used = 0;
                out.push_back(std::stoi(t, &used));
                if (used != t.size()) throw std::invalid_argument("trailing characters");
            } catch (const std::exception&) {
                throw ParseError(origin_ + ": key '" + key + "': expected integers, got '" + t +
                                 "'");
            }
        }
        return out;
    }

    void reject_unknown_keys() const {
        for (const auto& kv : values_)
            if (consumed_.count(kv.first) == 0)
                throw ParseError(origin_ + ": unknown config key '" + kv.first + "'");
    }

private:
    template <typename T>
    T numeric(const std::string& key, T fallback) {
        auto it = values_.find(key);
        if (it == values_.end()) return fallback;
        consumed_.insert(key);
        try {
            std::size_t used = 0;
            const long long v = std::stoll(it->second, &used);
            if (used != it->second.size()) throw std::invalid_argument("trailing characters");
            return static_cast<T>(v);
        } catch (const std::exception&) {
            throw ParseError(origin_ + ": key '" + key + "': expected an integer, got '" +
                             it->second + "'");
        }
    }

    static std::string trim(const std::string& s) {
        const auto b = s.find_first_not_of(" \t\r\n");
        if (b == std::string::npos) return "";
        const auto e = s.find_last_not_of(" \t\r\n");
        return s.substr(b, e - b + 1);
    }

    std::string origin_;
    std::map<std::string, std::string> values_;
    std::set<std::string> consumed_;
};

inline CorpusConfig corpus_config_from(KeyValueFile& kv) {
    CorpusConfig c;
    c.num_movies = kv.get_int("num_movies", c.num_movies);
    c.snippets_per_movie = kv.get_int("snippets_per_movie", c.snippets_per_movie);
    c.concept_pool_size = kv.get_int("concept_pool_size", c.concept_pool_size);
    c.concepts_per_movie = kv.get_int("concepts_per_movie", c.concepts_per_movie);
    c.semantic_dim = kv.get_int("semantic_dim", c.semantic_dim);
    c.view_dim = kv.get_int("view_dim", c.view_dim);
    c.artifact_strength = kv.get_double("artifact_strength", c.artifact_strength);
    c.semantic_noise_std = kv.get_double("semantic_noise_std", c.semantic_noise_std);
    c.observation_noise_std = kv.get_double("observation_noise_std", c.observation_noise_std);
    c.stickiness = kv.get_double("stickiness", c.stickiness);
    c.seed = kv.get_u64("corpus_seed", c.seed);
    c.snippets_override = kv.get_int_list("snippets_override", c.snippets_override);
    return c;
}

inline RunConfig run_config_from(KeyValueFile& kv) {
    RunConfig r;
    r.corpus_path = kv.get_string("corpus", "");
    r.corpus = corpus_config_from(kv);

    r.sampler.batch_size = kv.get_int("batch_size", r.sampler.batch_size);
    r.sampler.per_movie = kv.get_int("per_movie_k", r.sampler.per_movie);
    r.sampler.window = parse_window(kv.get_string("window", format_window(r.sampler.window)));

    r.model.view_dim = r.corpus.view_dim;
    r.model.encoder_widths = kv.get_int_list("encoder_widths", r.model.encoder_widths);
    r.model.joint_dim = kv.get_int("joint_dim", r.model.joint_dim);
    r.model.head = parse_head_kind(kv.get_string("head", head_kind_name(r.model.head)));
    r.model.head_norm = kv.get_bool("head_norm", r.model.head_norm);
    r.model.normalize_embeddings =
        kv.get_bool("normalize_embeddings", r.model.normalize_embeddings);
    r.model.temperature = kv.get_double("temperature", r.model.temperature);

    r.init_lr = kv.get_double("init_lr", r.init_lr);
    r.peak_lr = kv.get_double("peak_lr", r.peak_lr);
    r.epochs = kv.get_int("epochs", r.epochs);
    r.warmup_epochs = kv.get_int("warmup_epochs", r.warmup_epochs);
    r.diag_epochs = kv.get_int_list("diag_epochs", r.diag_epochs);
    r.pair_budget = kv.get_long("pair_budget", r.pair_budget);
    r.kl_bins = kv.get_int("kl_bins", r.kl_bins);
    r.probe.steps = kv.get_int("probe_steps", r.probe.steps);
    r.probe.lr = kv.get_double("probe_lr", r.probe.lr);
    r.seed = kv.get_u64("seed", r.seed);
    r.out_dir = kv.get_string("out", r.out_dir);
    return r;
}

inline RunConfig run_config_from_file(const std::string& path) {
    KeyValueFile kv = KeyValueFile::parse_file(path);
    RunConfig r = run_config_from(kv);
    kv.reject_unknown_keys();
    return r;
}

}  // namespace longform
