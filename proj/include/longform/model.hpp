#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "longform/common.hpp"
#include "longform/io.hpp"
#include "longform/rng.hpp"

namespace longform {

struct AffineLayer {
    Eigen::MatrixXd weight;  // out x in
    Eigen::VectorXd bias;    // out
};

// In the vector regime the "conv" (kernel size 1) and "mlp" heads collapse to
// the same affine stack; the kind is recorded for log and checkpoint fidelity.
enum class HeadKind : std::uint8_t { conv = 0, mlp = 1 };

inline std::string head_kind_name(HeadKind k) { return k == HeadKind::conv ? "conv" : "mlp"; }

inline HeadKind parse_head_kind(const std::string& s) {
    if (s == "conv") return HeadKind::conv;
    if (s == "mlp") return HeadKind::mlp;
    throw ConfigError("head: expected 'conv' or 'mlp', got '" + s + "'");
}

struct ModelConfig {
    int view_dim = 32;
    std::vector<int> encoder_widths = {128, 128};  // affine output dims; last is d_f
    int joint_dim = 32;                            // d
    HeadKind head = HeadKind::conv;
    bool head_norm = false;            // batch-standardization between head layers
    bool normalize_embeddings = false; // L2-normalize rows of the final embedding
    double temperature = 1.0;          // divides similarities when normalizing
};

inline void validate_model_config(const ModelConfig& c) {
    check_config(c.view_dim >= 1, "model config: view_dim must be >= 1");
    check_config(!c.encoder_widths.empty(), "model config: encoder_widths must not be empty");
    for (int w : c.encoder_widths)
        check_config(w >= 1, "model config: encoder widths must be >= 1");
    check_config(c.joint_dim >= 1, "model config: joint_dim must be >= 1");
    check_config(c.temperature > 0.0, "model config: temperature must be > 0");
}

// Encoder: affine layers with a rectifier between them (none after the last).
// Head: affine -> [batch standardization] -> rectifier -> affine.
struct Tower {
    std::vector<AffineLayer> encoder;
    std::vector<AffineLayer> head;  // exactly two layers

    int input_dim() const { return static_cast<int>(encoder.front().weight.cols()); }
    int output_dim() const { return static_cast<int>(head.back().weight.rows()); }
};

struct ModelParams {
    ModelConfig config;
    Tower video;  // f, h_f
    Tower audio;  // g, h_g
};

struct TowerGrads {
    std::vector<AffineLayer> encoder;
    std::vector<AffineLayer> head;
};

struct ModelGrads {
    TowerGrads video;
    TowerGrads audio;
};

// Everything the backward pass needs from the forward pass.
struct TowerCache {
    std::vector<Eigen::MatrixXd> inputs;  // input to each affine, encoder then head
    std::vector<Eigen::MatrixXd> pres;    // pre-activation of each affine
    Eigen::RowVectorXd bn_inv_std;
    Eigen::MatrixXd bn_xhat;
    Eigen::MatrixXd head_pre_act;  // rectifier input inside the head
    Eigen::MatrixXd pre_norm;      // embedding before L2 normalization
    Eigen::VectorXd norms;
    int batch = 0;
};

struct BatchEmbeddings {
    Eigen::MatrixXd z_video;  // B x d
    Eigen::MatrixXd z_audio;
    TowerCache video_cache;
    TowerCache audio_cache;
};

namespace detail {

inline constexpr double kBnEps = 1e-8;
inline constexpr double kNormFloor = 1e-12;

inline AffineLayer init_affine(int out, int in, Rng& rng) {
    AffineLayer l;
    l.weight.resize(out, in);
    fill_gaussian(l.weight, rng, 1.0 / std::sqrt(static_cast<double>(in)));
    l.bias = Eigen::VectorXd::Zero(out);
    return l;
}

inline Tower init_tower(const ModelConfig& c, Rng& rng) {
    Tower t;
    int in = c.view_dim;
    for (int out : c.encoder_widths) {
        t.encoder.push_back(init_affine(out, in, rng));
        in = out;
    }
    t.head.push_back(init_affine(c.joint_dim, in, rng));
    t.head.push_back(init_affine(c.joint_dim, c.joint_dim, rng));
    return t;
}

inline Eigen::MatrixXd affine_forward(const AffineLayer& l, const Eigen::MatrixXd& x) {
    Eigen::MatrixXd out = x * l.weight.transpose();
    out.rowwise() += l.bias.transpose();
    return out;
}

inline Eigen::MatrixXd relu(const Eigen::MatrixXd& x) { return x.cwiseMax(0.0); }

// Standardize each feature over the batch (no learnable scale/shift).
inline Eigen::MatrixXd batch_standardize(const Eigen::MatrixXd& x, TowerCache* cache) {
    const double b = static_cast<double>(x.rows());
    Eigen::RowVectorXd mean = x.colwise().mean();
    Eigen::MatrixXd centered = x.rowwise() - mean;
    Eigen::RowVectorXd var = centered.array().square().colwise().sum() / b;
    Eigen::RowVectorXd inv_std = (var.array() + kBnEps).sqrt().inverse();
    Eigen::MatrixXd xhat = (centered.array().rowwise() * inv_std.array()).matrix();
    if (cache) {
        cache->bn_inv_std = inv_std;
        cache->bn_xhat = xhat;
    }
    return xhat;
}

inline Eigen::MatrixXd batch_standardize_backward(const Eigen::MatrixXd& dy,
                                                  const TowerCache& cache) {
    const double b = static_cast<double>(dy.rows());
    Eigen::RowVectorXd s1 = dy.colwise().sum();
    Eigen::RowVectorXd s2 = dy.cwiseProduct(cache.bn_xhat).colwise().sum();
    Eigen::MatrixXd dx = b * dy;
    dx.rowwise() -= s1;
    dx -= (cache.bn_xhat.array().rowwise() * s2.array()).matrix();
    dx.array().rowwise() *= cache.bn_inv_std.array() / b;
    return dx;
}

inline Eigen::MatrixXd tower_forward(const Tower& t, const ModelConfig& c,
                                     const Eigen::MatrixXd& x, TowerCache* cache) {
    check_shape(x.cols() == t.encoder.front().weight.cols(),
                "tower input has " + std::to_string(x.cols()) + " columns, expected " +
                    std::to_string(t.encoder.front().weight.cols()));
    if (cache) cache->batch = static_cast<int>(x.rows());
    Eigen::MatrixXd a = x;
    for (std::size_t i = 0; i < t.encoder.size(); ++i) {
        Eigen::MatrixXd pre = affine_forward(t.encoder[i], a);
        if (cache) {
            cache->inputs.push_back(std::move(a));
            cache->pres.push_back(pre);
        }
        a = (i + 1 < t.encoder.size()) ? relu(pre) : std::move(pre);
    }
    Eigen::MatrixXd head_pre = affine_forward(t.head[0], a);
    if (cache) {
        cache->inputs.push_back(std::move(a));
        cache->pres.push_back(head_pre);
    }
    Eigen::MatrixXd h = c.head_norm ? batch_standardize(head_pre, cache) : std::move(head_pre);
    if (cache) cache->head_pre_act = h;
    Eigen::MatrixXd act = relu(h);
    Eigen::MatrixXd embed = affine_forward(t.head[1], act);
    if (cache) {
        cache->inputs.push_back(std::move(act));
        cache->pres.push_back(embed);
    }
    if (!c.normalize_embeddings) return embed;
    Eigen::VectorXd norms = embed.rowwise().norm().cwiseMax(kNormFloor);
    Eigen::MatrixXd z = (embed.array().colwise() / norms.array()).matrix();
    if (cache) {
        cache->pre_norm = std::move(embed);
        cache->norms = std::move(norms);
    }
    return z;
}

inline TowerGrads tower_backward(const Tower& t, const ModelConfig& c, const TowerCache& cache,
                                 const Eigen::MatrixXd& dz) {
    check_shape(dz.rows() == cache.batch, "upstream gradient batch does not match forward cache");
    TowerGrads g;
    g.encoder.resize(t.encoder.size());
    g.head.resize(t.head.size());

    Eigen::MatrixXd d = dz;
    if (c.normalize_embeddings) {
        // z = e / ||e||  =>  de = (dz - (dz . z) z) / ||e||
        Eigen::MatrixXd z = (cache.pre_norm.array().colwise() / cache.norms.array()).matrix();
        Eigen::VectorXd inner = (d.array() * z.array()).rowwise().sum();
        d = ((d - (z.array().colwise() * inner.array()).matrix()).array().colwise() /
             cache.norms.array())
                .matrix();
    }

    const std::size_t h1 = t.encoder.size() + 1;  // cache slot of second head layer
    g.head[1].weight = d.transpose() * cache.inputs[h1];
    g.head[1].bias = d.colwise().sum().transpose();
    Eigen::MatrixXd da = d * t.head[1].weight;

    Eigen::MatrixXd dh =
        ((cache.head_pre_act.array() > 0.0).cast<double>() * da.array()).matrix();
    Eigen::MatrixXd dpre = c.head_norm ? batch_standardize_backward(dh, cache) : std::move(dh);

    const std::size_t h0 = t.encoder.size();
    g.head[0].weight = dpre.transpose() * cache.inputs[h0];
    g.head[0].bias = dpre.colwise().sum().transpose();
    d = dpre * t.head[0].weight;

    for (std::size_t i = t.encoder.size(); i-- > 0;) {
        Eigen::MatrixXd dp =
            (i + 1 < t.encoder.size())
                ? Eigen::MatrixXd(
                      ((cache.pres[i].array() > 0.0).cast<double>() * d.array()).matrix())
                : std::move(d);
        g.encoder[i].weight = dp.transpose() * cache.inputs[i];
        g.encoder[i].bias = dp.colwise().sum().transpose();
        if (i > 0) d = dp * t.encoder[i].weight;
    }
    return g;
}

}  // namespace detail

// Fan-in scaled gaussian weights, zero biases; video tower drawn first.
inline ModelParams init_params(const ModelConfig& config, std::uint64_t seed) {
    validate_model_config(config);
    Rng rng(seed);
    ModelParams p;
    p.config = config;
    p.video = detail::init_tower(config, rng);
    p.audio = detail::init_tower(config, rng);
    return p;
}

// Row i of the results is the embedding of instance i. Caches are retained
// for backward_batch.
inline BatchEmbeddings embed_batch(const ModelParams& p, const Eigen::MatrixXd& video_views,
                                   const Eigen::MatrixXd& audio_views) {
    check_shape(video_views.rows() == audio_views.rows(),
                "video and audio batches have different sizes");
    BatchEmbeddings out;
    out.z_video = detail::tower_forward(p.video, p.config, video_views, &out.video_cache);
    out.z_audio = detail::tower_forward(p.audio, p.config, audio_views, &out.audio_cache);
    return out;
}

// Forward-only variant for offline embedding of large snippet sets.
inline std::pair<Eigen::MatrixXd, Eigen::MatrixXd> embed_only(const ModelParams& p,
                                                              const Eigen::MatrixXd& video_views,
                                                              const Eigen::MatrixXd& audio_views) {
    return {detail::tower_forward(p.video, p.config, video_views, nullptr),
            detail::tower_forward(p.audio, p.config, audio_views, nullptr)};
}

namespace detail {
inline Eigen::MatrixXd encoder_forward(const Tower& t, const Eigen::MatrixXd& x) {
    check_shape(x.cols() == t.encoder.front().weight.cols(),
                "tower input has " + std::to_string(x.cols()) + " columns, expected " +
                    std::to_string(t.encoder.front().weight.cols()));
    Eigen::MatrixXd a = x;
    for (std::size_t i = 0; i < t.encoder.size(); ++i) {
        Eigen::MatrixXd pre = affine_forward(t.encoder[i], a);
        a = (i + 1 < t.encoder.size()) ? relu(pre) : std::move(pre);
    }
    return a;
}
}  // namespace detail

// Pre-head tower outputs (dimension d_f), the features kept after pretraining.
inline std::pair<Eigen::MatrixXd, Eigen::MatrixXd> encoder_features(
    const ModelParams& p, const Eigen::MatrixXd& video_views,
    const Eigen::MatrixXd& audio_views) {
    return {detail::encoder_forward(p.video, video_views),
            detail::encoder_forward(p.audio, audio_views)};
}

inline ModelGrads backward_batch(const ModelParams& p, const BatchEmbeddings& fwd,
                                 const Eigen::MatrixXd& d_z_video,
                                 const Eigen::MatrixXd& d_z_audio) {
    ModelGrads g;
    g.video = detail::tower_backward(p.video, p.config, fwd.video_cache, d_z_video);
    g.audio = detail::tower_backward(p.audio, p.config, fwd.audio_cache, d_z_audio);
    return g;
}

// Flat parameter views for the optimizer; order matches between params and grads.
struct ParamBlock {
    double* data;
    std::size_t size;
};

struct ConstParamBlock {
    const double* data;
    std::size_t size;
};

namespace detail {
template <typename LayerSeq, typename BlockT, typename Out>
inline void append_layer_blocks(LayerSeq& layers, Out& out) {
    for (auto& l : layers) {
        out.push_back(BlockT{l.weight.data(), static_cast<std::size_t>(l.weight.size())});
        out.push_back(BlockT{l.bias.data(), static_cast<std::size_t>(l.bias.size())});
    }
}
}  // namespace detail

inline std::vector<ParamBlock> param_blocks(ModelParams& p) {
    std::vector<ParamBlock> out;
    for (Tower* t : {&p.video, &p.audio}) {
        detail::append_layer_blocks<std::vector<AffineLayer>, ParamBlock>(t->encoder, out);
        detail::append_layer_blocks<std::vector<AffineLayer>, ParamBlock>(t->head, out);
    }
    return out;
}

inline std::vector<ConstParamBlock> grad_blocks(const ModelGrads& g) {
    std::vector<ConstParamBlock> out;
    for (const TowerGrads* t : {&g.video, &g.audio}) {
        detail::append_layer_blocks<const std::vector<AffineLayer>, ConstParamBlock>(t->encoder, out);
        detail::append_layer_blocks<const std::vector<AffineLayer>, ConstParamBlock>(t->head, out);
    }
    return out;
}

inline std::size_t param_count(const ModelParams& p) {
    std::size_t n = 0;
    for (const Tower* t : {&p.video, &p.audio})
        for (const auto* layers : {&t->encoder, &t->head})
            for (const auto& l : *layers)
                n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
    return n;
}

namespace detail {
inline constexpr char kCheckpointMagic[8] = {'L', 'F', 'C', 'H', 'K', 'P', 'N', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

inline void write_tower(BinaryWriter& w, const Tower& t) {
    w.u64(t.encoder.size());
    for (const auto& l : t.encoder) {
        w.mat(l.weight);
        w.vec(l.bias);
    }
    w.u64(t.head.size());
    for (const auto& l : t.head) {
        w.mat(l.weight);
        w.vec(l.bias);
    }
}

inline Tower read_tower(BinaryReader& r, const std::string& name) {
    Tower t;
    r.section(name + " encoder");
    const auto n_enc = r.u64();
    for (std::uint64_t i = 0; i < n_enc; ++i) {
        AffineLayer l;
        l.weight = r.mat();
        l.bias = r.vec();
        t.encoder.push_back(std::move(l));
    }
    r.section(name + " head");
    const auto n_head = r.u64();
    for (std::uint64_t i = 0; i < n_head; ++i) {
        AffineLayer l;
        l.weight = r.mat();
        l.bias = r.vec();
        t.head.push_back(std::move(l));
    }
    return t;
}
}  // namespace detail

inline void save_checkpoint(const ModelParams& p, const std::string& path) {
    BinaryWriter w(path);
    w.magic(detail::kCheckpointMagic);
    w.u32(detail::kCheckpointVersion);
    const ModelConfig& c = p.config;
    w.u64(static_cast<std::uint64_t>(c.view_dim));
    w.u64(c.encoder_widths.size());
    for (int d : c.encoder_widths) w.u64(static_cast<std::uint64_t>(d));
    w.u64(static_cast<std::uint64_t>(c.joint_dim));
    w.u32(static_cast<std::uint32_t>(c.head));
    w.u32(c.head_norm ? 1 : 0);
    w.u32(c.normalize_embeddings ? 1 : 0);
    w.f64(c.temperature);
    detail::write_tower(w, p.video);
    detail::write_tower(w, p.audio);
    if (!w.good()) throw ParseError("write failure while saving checkpoint to '" + path + "'");
}

inline ModelParams load_checkpoint(const std::string& path) {
    BinaryReader r(path);
    r.expect_magic(detail::kCheckpointMagic, "checkpoint");
    const auto version = r.u32();
    if (version != detail::kCheckpointVersion)
        throw ParseError("'" + path + "': unsupported checkpoint version " +
                         std::to_string(version) + " (expected " +
                         std::to_string(detail::kCheckpointVersion) + ")");
    ModelParams p;
    ModelConfig& c = p.config;
    r.section("dimension header");
    c.view_dim = static_cast<int>(r.u64());
    const auto n_widths = r.u64();
    c.encoder_widths.clear();
    for (std::uint64_t i = 0; i < n_widths; ++i)
        c.encoder_widths.push_back(static_cast<int>(r.u64()));
    c.joint_dim = static_cast<int>(r.u64());
    c.head = static_cast<HeadKind>(r.u32());
    c.head_norm = r.u32() != 0;
    c.normalize_embeddings = r.u32() != 0;
    c.temperature = r.f64();
    validate_model_config(c);
    p.video = detail::read_tower(r, "video tower");
    p.audio = detail::read_tower(r, "audio tower");
    r.section("end of file");
    r.expect_eof();

    for (const Tower* t : {&p.video, &p.audio}) {
        if (t->encoder.size() != c.encoder_widths.size() || t->head.size() != 2)
            throw ParseError("'" + path + "': layer counts do not match dimension header");
        int in = c.view_dim;
        for (std::size_t i = 0; i < t->encoder.size(); ++i) {
            const auto& l = t->encoder[i];
            const int out = c.encoder_widths[i];
            if (l.weight.rows() != out || l.weight.cols() != in || l.bias.size() != out)
                throw ParseError("'" + path + "': encoder layer shape mismatch");
            in = out;
        }
        if (t->head[0].weight.rows() != c.joint_dim || t->head[0].weight.cols() != in ||
            t->head[1].weight.rows() != c.joint_dim || t->head[1].weight.cols() != c.joint_dim)
            throw ParseError("'" + path + "': head layer shape mismatch");
    }
    return p;
}

}  // namespace longform
