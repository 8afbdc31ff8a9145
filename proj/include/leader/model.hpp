#pragma once

// The network graph: dual-path stem, separable-conv context autoencoder,
// dilated attention gate, inverted-bottleneck refinement autoencoder and a
// three-branch head, followed by the on-graph postprocessing layers.

#include <leader/config.hpp>
#include <leader/losses.hpp>
#include <leader/ops.hpp>
#include <leader/postprocess.hpp>
#include <leader/tensor.hpp>
#include <leader/weights.hpp>

#include <algorithm>
#include <map>
#include <random>
#include <set>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace leader {

// ---------------------------------------------------------------------------
// Padding

struct PadRecord {
    std::size_t width = 0;
    std::size_t height = 0;
    std::size_t padded_width = 0;
    std::size_t padded_height = 0;
    float fill = 0.0f;

    bool is_identity() const noexcept { return width == padded_width && height == padded_height; }
};

/// Pads right/bottom with the top-left intensity up to the next multiple.
inline std::pair<Tensor, PadRecord> pad_to_multiple(const Tensor& image, std::size_t multiple = 32) {
    if (image.empty()) throw StructuralError("pad_to_multiple: empty image");
    if (image.channels() != 1) throw StructuralError("pad_to_multiple: expected a single-channel image");
    if (multiple == 0) throw StructuralError("pad_to_multiple: multiple must be positive");
    PadRecord rec;
    rec.width = image.width();
    rec.height = image.height();
    rec.padded_width = (image.width() + multiple - 1) / multiple * multiple;
    rec.padded_height = (image.height() + multiple - 1) / multiple * multiple;
    rec.fill = image.at(0, 0);
    if (rec.is_identity()) return {image, rec};
    Tensor out(rec.padded_height, rec.padded_width, 1, rec.fill);
    for (std::size_t i = 0; i < image.height(); ++i) {
        std::copy(image.data() + i * image.width(), image.data() + (i + 1) * image.width(),
                  out.data() + i * rec.padded_width);
    }
    return {std::move(out), rec};
}

inline Tensor crop_to_record(const Tensor& x, const PadRecord& rec) { return ops::crop(x, rec.height, rec.width); }

// ---------------------------------------------------------------------------
// Parameter binding

/// Hands out named parameters, either from a store (checking shapes) or as
/// zero-filled placeholders when only the parameter list is wanted.
class ParamBinder {
public:
    struct Spec {
        std::string name;
        std::vector<std::size_t> shape;
    };

    explicit ParamBinder(const WeightStore* store = nullptr) : store_(store) {}

    std::vector<float> take(const std::string& name, const std::vector<std::size_t>& shape) {
        specs_.push_back({name, shape});
        if (!store_) return std::vector<float>(WeightTensor::element_count(shape), 0.0f);
        const WeightTensor* t = store_->find(name);
        if (!t) throw StructuralError("missing weight tensor '" + name + "' (expected shape " + shape_to_string(shape) + ")");
        if (t->shape != shape) {
            throw StructuralError("shape mismatch for weight tensor '" + name + "': expected " + shape_to_string(shape) +
                                  ", found " + shape_to_string(t->shape));
        }
        for (float v : t->values) {
            if (!std::isfinite(v)) throw NumericError("weight tensor '" + name + "' contains non-finite values");
        }
        used_.insert(name);
        return t->values;
    }

    const std::vector<Spec>& specs() const noexcept { return specs_; }

    std::vector<std::string> unused() const {
        std::vector<std::string> out;
        if (!store_) return out;
        for (const auto& [name, t] : *store_)
            if (!used_.contains(name)) out.push_back(name);
        return out;
    }

private:
    const WeightStore* store_;
    std::vector<Spec> specs_;
    std::set<std::string> used_;
};

// ---------------------------------------------------------------------------
// Layers

namespace layers {

inline ConvKernel bind_conv(ParamBinder& b, const std::string& prefix, std::size_t size, std::size_t in,
                            std::size_t out, bool bias = true) {
    ConvKernel k;
    k.size = size;
    k.in_channels = in;
    k.out_channels = out;
    k.weights = b.take(prefix + ".weight", {size, size, in, out});
    if (bias) k.bias = b.take(prefix + ".bias", {out});
    return k;
}

inline DepthwiseKernel bind_depthwise(ParamBinder& b, const std::string& prefix, std::size_t size, std::size_t channels) {
    DepthwiseKernel k;
    k.size = size;
    k.channels = channels;
    k.weights = b.take(prefix + ".weight", {size, size, channels});
    return k;
}

struct Norm {
    std::vector<float> gamma;
    std::vector<float> beta;

    static Norm bind(ParamBinder& b, const std::string& prefix, std::size_t channels) {
        return {b.take(prefix + ".gamma", {channels}), b.take(prefix + ".beta", {channels})};
    }
    Tensor operator()(const Tensor& x, float eps) const { return ops::layer_norm(x, gamma, beta, eps); }
};

/// conv -> norm -> GELU -> pool -> conv -> norm -> GELU
struct StemBlock {
    ConvKernel conv1;
    Norm norm1;
    ops::PoolMode pool_mode = ops::PoolMode::avg;
    std::size_t pool = 2;
    ConvKernel conv2;
    Norm norm2;

    Tensor operator()(const Tensor& x, float eps) const {
        Tensor y = ops::activation(norm1(ops::conv2d(x, conv1), eps), ops::Activation::gelu);
        y = ops::pool2d(y, pool_mode, pool, pool);
        return ops::activation(norm2(ops::conv2d(y, conv2), eps), ops::Activation::gelu);
    }
};

/// depthwise -> pointwise -> norm -> GELU
struct SeparableBlock {
    DepthwiseKernel depthwise;
    ConvKernel pointwise;
    Norm norm;

    Tensor operator()(const Tensor& x, float eps) const {
        return ops::activation(norm(ops::conv2d(ops::depthwise_conv2d(x, depthwise), pointwise), eps),
                               ops::Activation::gelu);
    }
};

/// pointwise expansion -> depthwise -> norm -> GELU -> pointwise projection,
/// plus identity shortcut when input and output widths agree.
struct InvBottleneckBlock {
    ConvKernel expand;
    DepthwiseKernel depthwise;
    Norm norm;
    ConvKernel project;

    bool residual() const noexcept { return expand.in_channels == project.out_channels; }

    Tensor operator()(const Tensor& x, float eps) const {
        Tensor y = ops::conv2d(x, expand);
        y = ops::activation(norm(ops::depthwise_conv2d(y, depthwise), eps), ops::Activation::gelu);
        y = ops::conv2d(y, project);
        return residual() ? ops::add(y, x) : y;
    }
};

using Block = std::variant<SeparableBlock, InvBottleneckBlock>;

enum class BlockKind { separable, inverted_bottleneck };

inline Block bind_block(ParamBinder& b, BlockKind kind, const std::string& prefix, std::size_t in,
                        const BlockSpec& spec, std::size_t kernel) {
    if (kind == BlockKind::separable) {
        SeparableBlock s;
        s.depthwise = bind_depthwise(b, prefix + ".dw", kernel, in);
        s.pointwise = bind_conv(b, prefix + ".pw", 1, in, spec.channels);
        s.norm = Norm::bind(b, prefix + ".norm", spec.channels);
        return s;
    }
    if (spec.expand == 0) throw StructuralError("block '" + prefix + "': expand must be positive");
    const std::size_t hidden = spec.expand * in;
    InvBottleneckBlock ib;
    ib.expand = bind_conv(b, prefix + ".pw1", 1, in, hidden);
    ib.depthwise = bind_depthwise(b, prefix + ".dw", kernel, hidden);
    ib.norm = Norm::bind(b, prefix + ".norm", hidden);
    ib.project = bind_conv(b, prefix + ".pw2", 1, hidden, spec.channels);
    return ib;
}

inline Tensor run_block(const Block& block, const Tensor& x, float eps) {
    return std::visit([&](const auto& b) { return b(x, eps); }, block);
}

/// Collects named intermediate activations on request.
class TapRecorder {
public:
    TapRecorder() = default;
    explicit TapRecorder(std::span<const std::string> wanted) : wanted_(wanted.begin(), wanted.end()) {}

    void offer(const std::string& name, const Tensor& t) {
        if (wanted_.contains(name)) taps_[name] = t;
    }
    std::map<std::string, Tensor> release() { return std::move(taps_); }

private:
    std::set<std::string> wanted_;
    std::map<std::string, Tensor> taps_;
};

struct Autoencoder {
    std::string name;
    std::vector<std::vector<Block>> encoder;
    std::vector<Block> bottleneck;
    std::vector<std::vector<Block>> decoder;
    ops::PoolMode downsample = ops::PoolMode::max;

    static Autoencoder bind(ParamBinder& b, const std::string& name, const AutoencoderConfig& cfg, BlockKind kind,
                            std::size_t in) {
        Autoencoder ae;
        ae.name = name;
        ae.downsample = cfg.downsample;
        std::vector<std::size_t> skip_channels;
        std::size_t c = in;
        for (std::size_t s = 0; s < cfg.encoder.size(); ++s) {
            std::vector<Block> stage;
            for (std::size_t k = 0; k < cfg.encoder[s].size(); ++k) {
                stage.push_back(bind_block(b, kind, name + ".enc" + std::to_string(s + 1) + "." + std::to_string(k), c,
                                           cfg.encoder[s][k], cfg.kernel));
                c = cfg.encoder[s][k].channels;
            }
            skip_channels.push_back(c);
            ae.encoder.push_back(std::move(stage));
        }
        for (std::size_t k = 0; k < cfg.bottleneck.size(); ++k) {
            ae.bottleneck.push_back(
                bind_block(b, kind, name + ".mid." + std::to_string(k), c, cfg.bottleneck[k], cfg.kernel));
            c = cfg.bottleneck[k].channels;
        }
        for (std::size_t s = 0; s < cfg.decoder.size(); ++s) {
            const std::size_t level = cfg.decoder.size() - 1 - s;
            c += skip_channels[level];
            std::vector<Block> stage;
            for (std::size_t k = 0; k < cfg.decoder[s].size(); ++k) {
                stage.push_back(bind_block(b, kind, name + ".dec" + std::to_string(level + 1) + "." + std::to_string(k),
                                           c, cfg.decoder[s][k], cfg.kernel));
                c = cfg.decoder[s][k].channels;
            }
            ae.decoder.push_back(std::move(stage));
        }
        return ae;
    }

    Tensor operator()(const Tensor& input, float eps, TapRecorder& taps) const {
        Tensor x = input;
        std::vector<Tensor> skips;
        for (std::size_t s = 0; s < encoder.size(); ++s) {
            if (s > 0) x = ops::pool2d(x, downsample, 2, 2);
            for (const Block& blk : encoder[s]) x = run_block(blk, x, eps);
            taps.offer(name + ".enc" + std::to_string(s + 1), x);
            skips.push_back(x);
        }
        x = ops::pool2d(x, downsample, 2, 2);
        for (const Block& blk : bottleneck) x = run_block(blk, x, eps);
        taps.offer(name + ".mid", x);
        for (std::size_t s = 0; s < decoder.size(); ++s) {
            const std::size_t level = decoder.size() - 1 - s;
            x = ops::concat(ops::upsample_nearest(x, 2), skips[level]);
            for (const Block& blk : decoder[s]) x = run_block(blk, x, eps);
            taps.offer(name + ".dec" + std::to_string(level + 1), x);
            if (level == 0) taps.offer(name + ".dec_last", x);
            if (level == 1) taps.offer(name + ".dec_penultimate", x);
        }
        return x;
    }
};

/// Parallel dilated 3x3 convolutions (GELU), concatenated, projected
/// pointwise and squashed by a sigmoid into the gating signal.
struct AttentionGate {
    std::vector<std::size_t> dilations;
    std::vector<ConvKernel> paths;
    ConvKernel psi;

    static AttentionGate bind(ParamBinder& b, const GateConfig& cfg, std::size_t in) {
        AttentionGate g;
        g.dilations = cfg.dilations;
        for (std::size_t r : cfg.dilations) {
            g.paths.push_back(bind_conv(b, "gate.dilation" + std::to_string(r), cfg.kernel, in, cfg.filters));
        }
        g.psi = bind_conv(b, "gate.psi", 1, cfg.filters * cfg.dilations.size(), cfg.output);
        return g;
    }

    std::size_t input_channels() const noexcept { return paths.empty() ? 0 : paths.front().in_channels; }

    Tensor signal(const Tensor& x) const {
        if (x.channels() != input_channels()) {
            throw StructuralError("attention gate expects " + std::to_string(input_channels()) + " channels, got " +
                                  std::to_string(x.channels()));
        }
        Tensor stacked;
        for (std::size_t k = 0; k < paths.size(); ++k) {
            Tensor y = ops::activation(ops::conv2d(x, paths[k], dilations[k]), ops::Activation::gelu);
            stacked = k == 0 ? std::move(y) : ops::concat(stacked, y);
        }
        return ops::activation(ops::conv2d(stacked, psi), ops::Activation::sigmoid);
    }
};

/// Inverted bottleneck -> upsampling back to input resolution -> output conv -> activation.
struct HeadBlock {
    InvBottleneckBlock block;
    std::size_t upsample = 2;
    ConvKernel out;
    ops::Activation act = ops::Activation::sigmoid;

    Tensor operator()(const Tensor& x, float eps) const {
        Tensor y = block(x, eps);
        y = ops::upsample_nearest(y, upsample);
        return ops::activation(ops::conv2d(y, out), act);
    }
};

}  // namespace layers

// ---------------------------------------------------------------------------
// Model

struct PredictionMaps {
    Tensor p_hat;    // position probability
    Tensor p_tilde;  // after smoothing + NMS
    Tensor vx;
    Tensor vy;
    Tensor d_hat;  // arctan2(vy, vx)
    Tensor t_hat;  // ridge-ending probability
};

struct ForwardResult {
    PredictionMaps maps;
    std::map<std::string, Tensor> taps;  // at internal (padded, possibly downsampled) resolution
    PadRecord pad;
};

class Model {
public:
    const ModelConfig& config() const noexcept { return config_; }

    /// Parameters actually consumed by the graph.
    const WeightStore& parameters() const noexcept { return params_; }
    std::size_t parameter_count() const { return params_.element_count(); }

    /// Store entries the graph did not consume.
    const std::vector<std::string>& unused_tensors() const noexcept { return unused_; }

    const layers::AttentionGate& gate() const noexcept { return gate_; }

    postprocess::Settings postprocessing;

    /// Every name accepted by the taps argument of forward().
    std::vector<std::string> tap_names() const {
        std::vector<std::string> names{"input", "stem", "context", "gate", "gated", "refine.input", "refine",
                                       "head.position", "head.direction", "head.type"};
        for (const auto& s : stems_) names.push_back("stem." + mode_name(s.pool_mode));
        for (const auto* ae : {&context_, &refine_}) {
            for (std::size_t s = 0; s < ae->encoder.size(); ++s) {
                names.push_back(ae->name + ".enc" + std::to_string(s + 1));
                names.push_back(ae->name + ".dec" + std::to_string(s + 1));
            }
            names.push_back(ae->name + ".mid");
            names.push_back(ae->name + ".dec_last");
            if (ae->encoder.size() > 1) names.push_back(ae->name + ".dec_penultimate");
        }
        std::sort(names.begin(), names.end());
        return names;
    }

    ForwardResult forward(const Tensor& image, std::span<const std::string> tap_request = {}) const {
        if (image.channels() != 1) {
            throw StructuralError("forward: expected a single-channel image, got " + image.shape_string());
        }
        const auto known = tap_names();
        for (const auto& t : tap_request) {
            if (!std::binary_search(known.begin(), known.end(), t)) {
                throw StructuralError("forward: unknown tap '" + t + "'");
            }
        }
        layers::TapRecorder taps(tap_request);
        const float eps = config_.layer_norm_eps;

        auto [padded, rec] = pad_to_multiple(image, config_.pad_multiple());
        taps.offer("input", padded);

        Tensor stem;
        for (std::size_t k = 0; k < stems_.size(); ++k) {
            Tensor y = stems_[k](padded, eps);
            taps.offer("stem." + mode_name(stems_[k].pool_mode), y);
            stem = k == 0 ? std::move(y) : ops::concat(stem, y);
        }
        check_finite(stem, "stem");
        taps.offer("stem", stem);

        const Tensor x = context_(stem, eps, taps);
        check_finite(x, "context");
        taps.offer("context", x);

        const Tensor x_gate = gate_.signal(x);
        check_finite(x_gate, "gate");
        taps.offer("gate", x_gate);
        const Tensor gated = ops::multiply(x, x_gate);
        taps.offer("gated", gated);

        const Tensor refine_in = ops::concat(gated, stem);
        taps.offer("refine.input", refine_in);
        const Tensor features = refine_(refine_in, eps, taps);
        check_finite(features, "refine");
        taps.offer("refine", features);

        const Tensor p_hat = position_(features, eps);
        const Tensor v = direction_(features, eps);
        const Tensor t_hat = type_(features, eps);
        check_finite(p_hat, "head.position");
        check_finite(v, "head.direction");
        check_finite(t_hat, "head.type");
        taps.offer("head.position", p_hat);
        taps.offer("head.direction", v);
        taps.offer("head.type", t_hat);

        ForwardResult result;
        result.pad = rec;
        PredictionMaps& m = result.maps;
        // Postprocessing on the padded maps, as the on-graph layers would, then crop.
        const Tensor smoothed =
            postprocess::gaussian_smooth(p_hat, postprocessing.smoothing_size, postprocessing.smoothing_sigma);
        const Tensor p_tilde = postprocess::nms(smoothed, postprocessing.nms_window);
        const Tensor vx = ops::channel(v, 0);
        const Tensor vy = ops::channel(v, 1);
        m.p_hat = crop_to_record(p_hat, rec);
        m.p_tilde = crop_to_record(p_tilde, rec);
        m.vx = crop_to_record(vx, rec);
        m.vy = crop_to_record(vy, rec);
        m.d_hat = crop_to_record(postprocess::cartesian_to_polar(vx, vy), rec);
        m.t_hat = crop_to_record(t_hat, rec);
        result.taps = taps.release();
        return result;
    }

    /// Forward pass followed by minutiae list extraction at tau_q.
    MinutiaSet extract(const Tensor& image, double tau_q) const {
        const ForwardResult r = forward(image);
        return postprocess::extract_minutiae(r.maps.p_tilde, r.maps.d_hat, r.maps.t_hat, tau_q);
    }

private:
    friend Model build_model(const WeightStore&, const ModelConfig&);
    friend std::vector<ParamBinder::Spec> parameter_specs(const ModelConfig&);
    friend Model bind_model(ParamBinder&, const ModelConfig&);

    static std::string mode_name(ops::PoolMode m) { return m == ops::PoolMode::avg ? "avg" : "max"; }

    static void check_finite(const Tensor& t, const char* stage) {
        if (!t.all_finite()) throw NumericError(std::string("non-finite activation in stage '") + stage + "'");
    }

    ModelConfig config_;
    std::vector<layers::StemBlock> stems_;
    layers::Autoencoder context_;
    layers::AttentionGate gate_;
    layers::Autoencoder refine_;
    layers::HeadBlock position_;
    layers::HeadBlock direction_;
    layers::HeadBlock type_;
    WeightStore params_;
    std::vector<std::string> unused_;
};

inline Model bind_model(ParamBinder& b, const ModelConfig& cfg) {
    cfg.validate();
    {
        std::set<ops::PoolMode> modes(cfg.stem.paths.begin(), cfg.stem.paths.end());
        if (modes.size() != cfg.stem.paths.size()) throw StructuralError("model config: stem paths must differ in pooling");
    }
    Model m;
    m.config_ = cfg;
    for (ops::PoolMode mode : cfg.stem.paths) {
        const std::string p = "stem." + Model::mode_name(mode);
        layers::StemBlock s;
        s.conv1 = layers::bind_conv(b, p + ".conv1", cfg.stem.kernel, 1, cfg.stem.filters);
        s.norm1 = layers::Norm::bind(b, p + ".norm1", cfg.stem.filters);
        s.pool_mode = mode;
        s.pool = cfg.stem.pool;
        s.conv2 = layers::bind_conv(b, p + ".conv2", cfg.stem.kernel, cfg.stem.filters, cfg.stem.filters);
        s.norm2 = layers::Norm::bind(b, p + ".norm2", cfg.stem.filters);
        m.stems_.push_back(std::move(s));
    }
    m.context_ = layers::Autoencoder::bind(b, "context", cfg.context, layers::BlockKind::separable,
                                           cfg.stem.output_channels());
    m.gate_ = layers::AttentionGate::bind(b, cfg.gate, cfg.context.output_channels());
    m.refine_ = layers::Autoencoder::bind(b, "refine", cfg.refine, layers::BlockKind::inverted_bottleneck,
                                          cfg.refine_input_channels());

    auto head = [&](const std::string& name, std::size_t outputs, ops::Activation act) {
        layers::HeadBlock h;
        const std::string p = "head." + name;
        auto blk = layers::bind_block(b, layers::BlockKind::inverted_bottleneck, p + ".block", cfg.head.input_channels,
                                      {cfg.head.filters, cfg.head.expand}, cfg.head.kernel);
        h.block = std::get<layers::InvBottleneckBlock>(std::move(blk));
        h.upsample = cfg.stem.pool;
        h.out = layers::bind_conv(b, p + ".out", cfg.head.kernel, cfg.head.filters, outputs);
        h.act = act;
        return h;
    };
    m.position_ = head("position", 1, ops::Activation::sigmoid);
    m.direction_ = head("direction", 2, ops::Activation::linear);
    m.type_ = head("type", 1, ops::Activation::sigmoid);
    return m;
}

/// Every parameter the config demands, in binding order.
inline std::vector<ParamBinder::Spec> parameter_specs(const ModelConfig& cfg) {
    ParamBinder b;
    bind_model(b, cfg);
    return b.specs();
}

/// Builds an immutable model; missing or misshapen tensors raise a
/// StructuralError naming the tensor, surplus tensors are only reported.
inline Model build_model(const WeightStore& store, const ModelConfig& cfg = ModelConfig::leader_default()) {
    ParamBinder b(&store);
    Model m = bind_model(b, cfg);
    for (const auto& spec : b.specs()) m.params_.insert(spec.name, *store.find(spec.name));
    m.unused_ = b.unused();
    return m;
}

inline std::size_t parameter_count(const Model& m) { return m.parameter_count(); }

inline std::size_t parameter_count(const ModelConfig& cfg) {
    std::size_t n = 0;
    for (const auto& s : parameter_specs(cfg)) n += WeightTensor::element_count(s.shape);
    return n;
}

/// RMS over every parameter element the model consumed.
inline double weight_magnitude(const Model& m) { return losses::weight_magnitude(m.parameters()); }

inline ForwardResult forward(const Model& m, const Tensor& image, std::span<const std::string> taps = {}) {
    return m.forward(image, taps);
}

/// X * gate(X).
inline Tensor attention_gate(const Tensor& x, const layers::AttentionGate& gate) {
    return ops::multiply(x, gate.signal(x));
}

/// Seeded uniform fan-in-scaled weights for tests and smoke runs: kernels in
/// +-sqrt(3 / fan_in), biases and norm shifts in +-0.1, norm scales 1 +- 0.1.
inline WeightStore random_weight_store(const ModelConfig& cfg, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    auto uniform = [&rng](double a) {
        return static_cast<float>((static_cast<double>(rng() >> 11) * 0x1.0p-53 * 2.0 - 1.0) * a);
    };
    WeightStore store;
    for (const auto& spec : parameter_specs(cfg)) {
        WeightTensor t;
        t.shape = spec.shape;
        t.values.resize(WeightTensor::element_count(spec.shape));
        const auto ends_with = [&](const char* suffix) { return spec.name.ends_with(suffix); };
        if (ends_with(".gamma")) {
            for (float& v : t.values) v = 1.0f + uniform(0.1);
        } else if (ends_with(".bias") || ends_with(".beta")) {
            for (float& v : t.values) v = uniform(0.1);
        } else {
            std::size_t fan_in = 1;
            if (spec.shape.size() == 4) fan_in = spec.shape[0] * spec.shape[1] * spec.shape[2];
            if (spec.shape.size() == 3) fan_in = spec.shape[0] * spec.shape[1];
            const double a = std::sqrt(3.0 / static_cast<double>(fan_in));
            for (float& v : t.values) v = uniform(a);
        }
        store.insert(spec.name, std::move(t));
    }
    return store;
}

}  // namespace leader
