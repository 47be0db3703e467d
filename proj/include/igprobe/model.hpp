#pragma once
// Zero-shot style scorer: an MLP image encoder, L2-normalised embedding, and
// temperature-scaled dot products against a frozen class-embedding matrix.
// Includes analytic reverse-mode gradients of the cross-entropy loss with
// respect to the input image and the encoder parameters.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "igprobe/dataset.hpp"
#include "igprobe/tensor.hpp"

namespace igprobe {

inline constexpr double kNormFloor = 1e-12;
inline constexpr double kDefaultTemperature = 100.0;

enum class Activation { relu, identity };

inline const char* to_string(Activation a) { return a == Activation::relu ? "relu" : "identity"; }

inline Activation activation_from_string(const std::string& s) {
    if (s == "relu") return Activation::relu;
    if (s == "identity") return Activation::identity;
    throw Error("unknown activation '" + s + "'");
}

/// Fully connected layer: out = act(in . weights + bias), weights shaped [in, out].
struct Layer {
    Tensor weights;
    Tensor bias;
    Activation activation = Activation::relu;

    std::size_t fan_in() const { return weights.shape()[0]; }
    std::size_t fan_out() const { return weights.shape()[1]; }
};

struct ScorerModel {
    std::vector<Layer> layers;
    Tensor class_embeddings;  // C x d, unit rows, frozen
    double temperature = kDefaultTemperature;
    Shape input_shape;        // {H, W, channels}

    std::size_t num_classes() const { return class_embeddings.shape()[0]; }
    std::size_t embed_dim() const { return class_embeddings.shape()[1]; }
    std::size_t input_size() const { return shape_numel(input_shape); }

    void validate() const {
        if (!(temperature > 0.0)) throw Error("temperature must be positive");
        if (layers.empty()) throw Error("model needs at least one layer");
        if (class_embeddings.rank() != 2) throw DimensionError("class embeddings must be C x d");
        std::size_t width = input_size();
        for (std::size_t l = 0; l < layers.size(); ++l) {
            const auto& L = layers[l];
            if (L.weights.rank() != 2 || L.fan_in() != width)
                throw DimensionError("layer " + std::to_string(l) + " expects input width " +
                                     std::to_string(width) + ", has weights " +
                                     shape_str(L.weights.shape()));
            if (L.bias.shape() != Shape{L.fan_out()})
                throw DimensionError("layer " + std::to_string(l) + " bias shape " +
                                     shape_str(L.bias.shape()));
            width = L.fan_out();
        }
        if (width != embed_dim())
            throw DimensionError("encoder output width " + std::to_string(width) +
                                 " != embedding dim " + std::to_string(embed_dim()));
        for (std::size_t c = 0; c < num_classes(); ++c) {
            double n2 = 0.0;
            for (std::size_t m = 0; m < embed_dim(); ++m) n2 += class_embeddings.at(c, m) * class_embeddings.at(c, m);
            if (std::abs(std::sqrt(n2) - 1.0) > 1e-12)
                throw Error("class embedding row " + std::to_string(c) + " is not unit norm");
        }
    }
};

struct LossGrad {
    double loss = 0.0;
    Tensor grad;    // shaped like the input image
    Tensor logits;  // length C
};

/// (image, label) -> loss and input gradient. Must be pure for the duration of
/// an analysis run. Built-in models and external providers both expose this.
using GradFn = std::function<LossGrad(const Tensor& image, std::size_t label)>;

/// Classification-only view: image -> logits.
using LogitFn = std::function<Tensor(const Tensor& image)>;

// ---------------------------------------------------------------------------
// Construction

struct ModelConfig {
    Shape input_shape{48, 48, 3};
    std::vector<std::size_t> hidden{64};
    std::size_t embed_dim = 16;
    std::size_t num_classes = 4;
    double temperature = kDefaultTemperature;
};

/// Rows drawn i.i.d. normal, then L2-normalised.
inline Tensor make_class_embeddings(SeededRng& rng, std::size_t classes, std::size_t dim) {
    Tensor z = rng_normal(rng, {classes, dim});
    for (std::size_t c = 0; c < classes; ++c) {
        double n2 = 0.0;
        for (std::size_t m = 0; m < dim; ++m) n2 += z.at(c, m) * z.at(c, m);
        const double n = std::sqrt(n2);
        for (std::size_t m = 0; m < dim; ++m) z.at(c, m) /= n;
    }
    return z;
}

/// He-normal weights, ReLU hidden layers and an identity output layer. The
/// first layer's bias is set to -0.5 * column sum so a mid-grey image maps to
/// zero pre-activation; other biases start at zero.
inline ScorerModel make_scorer(const ModelConfig& cfg, std::uint64_t seed) {
    SeededRng rng(seed);
    ScorerModel m;
    m.input_shape = cfg.input_shape;
    m.temperature = cfg.temperature;
    m.class_embeddings = make_class_embeddings(rng, cfg.num_classes, cfg.embed_dim);
    std::size_t width = shape_numel(cfg.input_shape);
    auto add = [&](std::size_t out, Activation act) {
        Tensor w = rng_normal(rng, {width, out});
        const double s = std::sqrt(2.0 / static_cast<double>(width));
        for (double& v : w.data()) v *= s;
        Tensor b({out}, 0.0);
        if (m.layers.empty())
            for (std::size_t i = 0; i < width; ++i)
                for (std::size_t o = 0; o < out; ++o) b[o] -= 0.5 * w[i * out + o];
        m.layers.push_back({std::move(w), std::move(b), act});
        width = out;
    };
    for (auto h : cfg.hidden) add(h, Activation::relu);
    add(cfg.embed_dim, Activation::identity);
    m.validate();
    return m;
}

// ---------------------------------------------------------------------------
// Loss

inline Tensor softmax(const Tensor& logits) {
    const auto l = logits.data();
    const double mx = l[argmax(l)];
    Tensor p(logits.shape());
    double s = 0.0;
    for (std::size_t j = 0; j < l.size(); ++j) s += (p[j] = std::exp(l[j] - mx));
    for (double& v : p.data()) v /= s;
    return p;
}

/// -log softmax(logits)_k. Written as (max - l_k) + log1p(sum over non-max
/// terms) so that confident predictions keep full relative precision.
inline double loss_ce(const Tensor& logits, std::size_t k) {
    const auto l = logits.data();
    if (k >= l.size())
        throw Error("label " + std::to_string(k) + " out of range for " + std::to_string(l.size()) + " classes");
    const std::size_t top = argmax(l);
    double rest = 0.0;
    for (std::size_t j = 0; j < l.size(); ++j)
        if (j != top) rest += std::exp(l[j] - l[top]);
    return (l[top] - l[k]) + std::log1p(rest);
}

// ---------------------------------------------------------------------------
// Forward / backward

namespace detail {

struct Trace {
    std::vector<Tensor> pre;   // per-layer pre-activation, 1 x out
    std::vector<Tensor> post;  // post[0] is the flattened input; post[l+1] is layer l output
    double norm = 0.0;
    Tensor unit;               // normalised embedding, length d
    Tensor logits;
};

inline void check_input(const ScorerModel& m, const Tensor& x) {
    if (x.shape() != m.input_shape)
        throw DimensionError("model expects input " + shape_str(m.input_shape) + ", got " + shape_str(x.shape()));
}

inline Tensor activate(const Tensor& z, Activation a) {
    if (a == Activation::identity) return z;
    Tensor out = z;
    for (double& v : out.data()) v = v > 0.0 ? v : 0.0;
    return out;
}

inline Tensor add_bias(Tensor z, const Tensor& b) {
    for (std::size_t j = 0; j < b.size(); ++j) z[j] += b[j];
    return z;
}

/// Embedding -> normalised embedding -> logits.
inline void head(const ScorerModel& m, const Tensor& e, Trace& t) {
    double n2 = 0.0;
    for (double v : e.data()) n2 += v * v;
    t.norm = std::sqrt(n2);
    const double denom = std::max(t.norm, kNormFloor);
    t.unit = Tensor({e.size()});
    for (std::size_t i = 0; i < e.size(); ++i) t.unit[i] = e[i] / denom;
    t.logits = Tensor({m.num_classes()});
    for (std::size_t c = 0; c < m.num_classes(); ++c) {
        double s = 0.0;
        for (std::size_t i = 0; i < m.embed_dim(); ++i) s += t.unit[i] * m.class_embeddings.at(c, i);
        t.logits[c] = m.temperature * s;
    }
}

/// Runs layers starting from the first layer's pre-activation.
inline void forward_from(const ScorerModel& m, Tensor z0, Trace& t) {
    t.pre.resize(m.layers.size());
    t.post.resize(m.layers.size() + 1);
    for (std::size_t l = 0; l < m.layers.size(); ++l) {
        if (l > 0) t.pre[l] = add_bias(matmul(t.post[l], m.layers[l].weights), m.layers[l].bias);
        else t.pre[0] = std::move(z0);
        t.post[l + 1] = activate(t.pre[l], m.layers[l].activation);
    }
    head(m, t.post.back().reshaped({m.embed_dim()}), t);
}

inline Trace run_forward(const ScorerModel& m, const Tensor& x) {
    check_input(m, x);
    Trace t;
    Tensor a0 = x.reshaped({1, x.size()});
    Tensor z0 = add_bias(matmul(a0, m.layers[0].weights), m.layers[0].bias);
    t.post.resize(1);
    t.post[0] = std::move(a0);
    forward_from(m, std::move(z0), t);
    return t;
}

struct ParamGrads {
    std::vector<Tensor> weights;
    std::vector<Tensor> bias;
};

/// Reverse pass for loss_ce at label k. Fills the input gradient and, when
/// params is non-null, accumulates parameter gradients into it.
inline Tensor run_backward(const ScorerModel& m, const Trace& t, std::size_t k, ParamGrads* params) {
    const std::size_t C = m.num_classes(), d = m.embed_dim();
    Tensor p = softmax(t.logits);
    p[k] -= 1.0;  // dL/dlogits

    Tensor g_unit({d});
    for (std::size_t c = 0; c < C; ++c)
        for (std::size_t i = 0; i < d; ++i) g_unit[i] += m.temperature * p[c] * m.class_embeddings.at(c, i);

    // Through e / max(|e|, floor): (I - u u^T) / |e| above the floor, I / floor below it.
    Tensor g({d});
    if (t.norm > kNormFloor) {
        double proj = 0.0;
        for (std::size_t i = 0; i < d; ++i) proj += t.unit[i] * g_unit[i];
        for (std::size_t i = 0; i < d; ++i) g[i] = (g_unit[i] - t.unit[i] * proj) / t.norm;
    } else {
        for (std::size_t i = 0; i < d; ++i) g[i] = g_unit[i] / kNormFloor;
    }

    for (std::size_t l = m.layers.size(); l-- > 0;) {
        const Layer& L = m.layers[l];
        const std::size_t in = L.fan_in(), out = L.fan_out();
        if (L.activation == Activation::relu)
            for (std::size_t o = 0; o < out; ++o)
                if (!(t.pre[l][o] > 0.0)) g[o] = 0.0;
        if (params) {
            auto& gw = params->weights[l];
            const auto& a = t.post[l];
            for (std::size_t i = 0; i < in; ++i) {
                const double ai = a[i];
                if (ai == 0.0) continue;
                for (std::size_t o = 0; o < out; ++o) gw[i * out + o] += ai * g[o];
            }
            for (std::size_t o = 0; o < out; ++o) params->bias[l][o] += g[o];
        }
        Tensor prev({in});
        const auto W = L.weights.data();
        for (std::size_t i = 0; i < in; ++i) {
            double s = 0.0;
            for (std::size_t o = 0; o < out; ++o) s += W[i * out + o] * g[o];
            prev[i] = s;
        }
        g = std::move(prev);
    }
    return g;
}

}  // namespace detail

inline Tensor forward(const ScorerModel& m, const Tensor& x) { return detail::run_forward(m, x).logits; }

inline LossGrad backward(const ScorerModel& m, const Tensor& x, std::size_t k) {
    auto t = detail::run_forward(m, x);
    LossGrad out;
    out.loss = loss_ce(t.logits, k);
    out.grad = detail::run_backward(m, t, k, nullptr).reshaped(m.input_shape);
    out.logits = std::move(t.logits);
    return out;
}

inline GradFn model_gradfn(std::shared_ptr<const ScorerModel> m) {
    return [m](const Tensor& x, std::size_t k) { return backward(*m, x, k); };
}

inline LogitFn model_logitfn(std::shared_ptr<const ScorerModel> m) {
    return [m](const Tensor& x) { return forward(*m, x); };
}

// ---------------------------------------------------------------------------
// Training

struct TrainConfig {
    double lr = 5e-4;
    int epochs = 20;
    std::size_t batch = 16;
    std::uint64_t seed = 0;
    bool cosine_decay = true;  // lr * (1 + cos(pi * epoch / epochs)) / 2
};

/// Minibatch SGD on mean cross-entropy. Only encoder layers move; the class
/// embeddings and temperature stay fixed. Per-epoch mean loss (measured during
/// the pass) is appended to epoch_losses when provided.
inline ScorerModel train(ScorerModel model, const Dataset& data, const TrainConfig& cfg,
                         std::vector<double>* epoch_losses = nullptr) {
    if (data.items.empty()) throw Error("cannot train on an empty dataset");
    if (cfg.batch == 0) throw Error("batch size must be positive");
    model.validate();
    for (const auto& s : data.items) {
        if (s.label >= model.num_classes())
            throw Error("item '" + s.id + "' label exceeds model class count");
        detail::check_input(model, s.image.tensor());
    }
    SeededRng rng(cfg.seed);
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), std::size_t{0});

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        rng.shuffle(order);
        const double lr = cfg.cosine_decay
                              ? cfg.lr * 0.5 * (1.0 + std::cos(std::numbers::pi * epoch / cfg.epochs))
                              : cfg.lr;
        double total = 0.0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch) {
            const std::size_t end = std::min(order.size(), start + cfg.batch);
            detail::ParamGrads pg;
            for (const auto& L : model.layers) {
                pg.weights.emplace_back(L.weights.shape());
                pg.bias.emplace_back(L.bias.shape());
            }
            for (std::size_t b = start; b < end; ++b) {
                const auto& s = data.items[order[b]];
                auto t = detail::run_forward(model, s.image.tensor());
                total += loss_ce(t.logits, s.label);
                detail::run_backward(model, t, s.label, &pg);
            }
            const double step = lr / static_cast<double>(end - start);
            for (std::size_t l = 0; l < model.layers.size(); ++l) {
                auto W = model.layers[l].weights.data();
                auto B = model.layers[l].bias.data();
                for (std::size_t i = 0; i < W.size(); ++i) W[i] -= step * pg.weights[l][i];
                for (std::size_t i = 0; i < B.size(); ++i) B[i] -= step * pg.bias[l][i];
            }
        }
        if (epoch_losses) epoch_losses->push_back(total / static_cast<double>(data.size()));
    }
    return model;
}

inline double mean_loss(const ScorerModel& m, const Dataset& data) {
    double total = 0.0;
    for (const auto& s : data.items) total += loss_ce(forward(m, s.image.tensor()), s.label);
    return total / static_cast<double>(data.size());
}

// ---------------------------------------------------------------------------
// Finite-difference gradient check

struct GradCheckReport {
    double max_rel_err = 0.0;         // over pixels whose ReLU pattern is stable in [x-h, x+h]
    std::size_t argmax_err_index = 0;
    double max_rel_err_all = 0.0;     // including kink pixels
    std::vector<std::size_t> kink_pixels;
};

namespace detail {

struct Probe {
    long double loss = 0.0L;
    std::vector<std::uint8_t> pattern;  // ReLU on/off per hidden unit
};

/// Loss at label k from a first-layer pre-activation, in extended precision.
/// Logits are scaled by the temperature, so double roundoff in the forward
/// pass would otherwise swamp the small differences the probe measures.
inline Probe probe_forward(const ScorerModel& m, std::vector<long double> z, std::size_t k) {
    Probe p;
    for (std::size_t l = 0;; ++l) {
        if (m.layers[l].activation == Activation::relu)
            for (auto& v : z) {
                p.pattern.push_back(v > 0.0L);
                v = v > 0.0L ? v : 0.0L;
            }
        if (l + 1 == m.layers.size()) break;
        const Layer& next = m.layers[l + 1];
        const std::size_t out = next.fan_out();
        std::vector<long double> nz(out);
        for (std::size_t o = 0; o < out; ++o) nz[o] = next.bias[o];
        for (std::size_t i = 0; i < z.size(); ++i)
            for (std::size_t o = 0; o < out; ++o) nz[o] += z[i] * static_cast<long double>(next.weights[i * out + o]);
        z = std::move(nz);
    }
    long double n2 = 0.0L;
    for (auto v : z) n2 += v * v;
    const long double denom = std::max(std::sqrt(n2), static_cast<long double>(kNormFloor));
    std::vector<long double> logits(m.num_classes());
    for (std::size_t c = 0; c < m.num_classes(); ++c) {
        long double s = 0.0L;
        for (std::size_t i = 0; i < z.size(); ++i)
            s += (z[i] / denom) * static_cast<long double>(m.class_embeddings.at(c, i));
        logits[c] = static_cast<long double>(m.temperature) * s;
    }
    const std::size_t top = static_cast<std::size_t>(std::max_element(logits.begin(), logits.end()) - logits.begin());
    long double rest = 0.0L;
    for (std::size_t c = 0; c < logits.size(); ++c)
        if (c != top) rest += std::exp(logits[c] - logits[top]);
    p.loss = (logits[top] - logits[k]) + std::log1p(rest);
    return p;
}

}  // namespace detail

/// Central differences per input component against backward().
///
/// Each probe perturbs one component, so the first layer's pre-activation is
/// updated by delta * weights[i, :] instead of re-running the full product;
/// delta is the representable step (x+h) - x. Probes run in long double.
/// Pixels whose ReLU on/off pattern changes inside [x-h, x+h] are reported as
/// kinks and left out of max_rel_err. Relative error uses
/// max(|analytic|, |numeric|, 1e-8).
inline GradCheckReport gradient_check(const ScorerModel& m, const Tensor& x, std::size_t k, double h) {
    if (!(h > 0.0)) throw Error("gradient_check step must be positive");
    const auto base = detail::run_forward(m, x);
    const Tensor analytic = detail::run_backward(m, base, k, nullptr);

    const Layer& first = m.layers[0];
    const std::size_t out = first.fan_out();
    std::vector<long double> z0(out);
    for (std::size_t o = 0; o < out; ++o) z0[o] = first.bias[o];
    for (std::size_t i = 0; i < x.size(); ++i)
        for (std::size_t o = 0; o < out; ++o) z0[o] += static_cast<long double>(x[i]) * first.weights[i * out + o];
    const auto base_pattern = detail::probe_forward(m, z0, k).pattern;

    GradCheckReport rep;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double xp = x[i] + h, xm = x[i] - h;
        const long double dp = xp - x[i], dm = xm - x[i];
        auto probe = [&](long double delta) {
            auto z = z0;
            for (std::size_t o = 0; o < out; ++o) z[o] += delta * first.weights[i * out + o];
            return detail::probe_forward(m, std::move(z), k);
        };
        const auto p = probe(dp), q = probe(dm);
        const double numeric = static_cast<double>((p.loss - q.loss) / (dp - dm));
        const double a = analytic[i];
        const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-8});
        const bool kink = p.pattern != base_pattern || q.pattern != base_pattern;
        rep.max_rel_err_all = std::max(rep.max_rel_err_all, rel);
        if (kink) {
            rep.kink_pixels.push_back(i);
        } else if (rel > rep.max_rel_err) {
            rep.max_rel_err = rel;
            rep.argmax_err_index = i;
        }
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Checkpoints
//
// JSON document:
//   {"format": "igprobe-scorer", "version": 1,
//    "input_shape": [H, W, C], "temperature": t, "num_classes": C,
//    "class_names": [...optional...],
//    "class_embeddings": {"rows": C, "cols": d, "values": [C*d doubles]},
//    "layers": [{"in": n, "out": m, "activation": "relu"|"identity",
//                "weights": [n*m doubles, row-major in x out], "bias": [m doubles]}]}

inline constexpr const char* kCheckpointFormat = "igprobe-scorer";
inline constexpr int kCheckpointVersion = 1;

inline nlohmann::json checkpoint_json(const ScorerModel& m, const std::vector<std::string>& class_names = {}) {
    nlohmann::json j;
    j["format"] = kCheckpointFormat;
    j["version"] = kCheckpointVersion;
    j["input_shape"] = m.input_shape;
    j["temperature"] = m.temperature;
    j["num_classes"] = m.num_classes();
    if (!class_names.empty()) j["class_names"] = class_names;
    j["class_embeddings"] = {{"rows", m.num_classes()}, {"cols", m.embed_dim()}, {"values", m.class_embeddings.vec()}};
    j["layers"] = nlohmann::json::array();
    for (const auto& L : m.layers)
        j["layers"].push_back({{"in", L.fan_in()},
                               {"out", L.fan_out()},
                               {"activation", to_string(L.activation)},
                               {"weights", L.weights.vec()},
                               {"bias", L.bias.vec()}});
    return j;
}

inline ScorerModel model_from_json(const nlohmann::json& j) {
    try {
        if (j.at("format").get<std::string>() != kCheckpointFormat) throw Error("not an igprobe-scorer checkpoint");
        if (j.at("version").get<int>() != kCheckpointVersion)
            throw Error("unsupported checkpoint version " + std::to_string(j.at("version").get<int>()));
        ScorerModel m;
        m.input_shape = j.at("input_shape").get<Shape>();
        m.temperature = j.at("temperature").get<double>();
        const auto& ce = j.at("class_embeddings");
        m.class_embeddings = Tensor({ce.at("rows").get<std::size_t>(), ce.at("cols").get<std::size_t>()},
                                    ce.at("values").get<std::vector<double>>());
        for (const auto& jl : j.at("layers")) {
            const auto in = jl.at("in").get<std::size_t>(), out = jl.at("out").get<std::size_t>();
            m.layers.push_back({Tensor({in, out}, jl.at("weights").get<std::vector<double>>()),
                                Tensor({out}, jl.at("bias").get<std::vector<double>>()),
                                activation_from_string(jl.at("activation").get<std::string>())});
        }
        if (j.at("num_classes").get<std::size_t>() != m.num_classes())
            throw Error("num_classes disagrees with class_embeddings rows");
        m.validate();
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw Error(std::string("malformed checkpoint: ") + e.what());
    }
}

inline void save_checkpoint(const std::filesystem::path& path, const ScorerModel& m,
                            const std::vector<std::string>& class_names = {}) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    out << checkpoint_json(m, class_names).dump() << '\n';
}

inline ScorerModel load_checkpoint(const std::filesystem::path& path, std::vector<std::string>* class_names = nullptr) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw Error(path.string() + ": " + e.what());
    }
    if (class_names && j.contains("class_names")) *class_names = j["class_names"].get<std::vector<std::string>>();
    return model_from_json(j);
}

}  // namespace igprobe
