#pragma once

// Channel schedule of the network. Every width is data so that a config
// document can override the shipped reconstruction.

#include <leader/ops.hpp>
#include <leader/tensor.hpp>

#include <json.hpp>

#include <algorithm>
#include <numeric>
#include <string>
#include <vector>

namespace leader {

struct BlockSpec {
    std::size_t channels = 0;
    std::size_t expand = 4;  // hidden width = expand * input channels (bottleneck blocks only)

    friend bool operator==(const BlockSpec&, const BlockSpec&) = default;
};

struct StemConfig {
    std::size_t filters = 16;
    std::size_t kernel = 3;
    std::size_t pool = 2;
    std::vector<ops::PoolMode> paths{ops::PoolMode::avg, ops::PoolMode::max};

    std::size_t output_channels() const noexcept { return filters * paths.size(); }

    friend bool operator==(const StemConfig&, const StemConfig&) = default;
};

/// U-shaped skip autoencoder. encoder[0] runs at input resolution, every later
/// stage and the bottleneck follow a 2x downsampling. decoder is listed from
/// the deepest stage up; each stage starts with 2x upsampling and
/// concatenation of the matching encoder output.
struct AutoencoderConfig {
    std::vector<std::vector<BlockSpec>> encoder;
    std::vector<BlockSpec> bottleneck;
    std::vector<std::vector<BlockSpec>> decoder;
    ops::PoolMode downsample = ops::PoolMode::max;
    std::size_t kernel = 3;

    std::size_t depth() const noexcept { return encoder.size(); }
    std::size_t output_channels() const { return decoder.empty() ? 0 : decoder.back().back().channels; }

    /// Block outputs in execution order.
    std::vector<std::size_t> block_outputs() const {
        std::vector<std::size_t> out;
        for (const auto& stage : encoder)
            for (const auto& b : stage) out.push_back(b.channels);
        for (const auto& b : bottleneck) out.push_back(b.channels);
        for (const auto& stage : decoder)
            for (const auto& b : stage) out.push_back(b.channels);
        return out;
    }

    friend bool operator==(const AutoencoderConfig&, const AutoencoderConfig&) = default;
};

struct GateConfig {
    std::vector<std::size_t> dilations{1, 3, 6};
    std::size_t filters = 16;
    std::size_t kernel = 3;
    std::size_t output = 32;

    friend bool operator==(const GateConfig&, const GateConfig&) = default;
};

struct HeadConfig {
    std::size_t input_channels = 52;
    std::size_t filters = 6;
    std::size_t expand = 1;
    std::size_t kernel = 3;

    friend bool operator==(const HeadConfig&, const HeadConfig&) = default;
};

struct ModelConfig {
    int version = 1;
    StemConfig stem;
    AutoencoderConfig context;
    GateConfig gate;
    AutoencoderConfig refine;
    HeadConfig head;
    float layer_norm_eps = ops::kLayerNormEps;

    /// The shipped schedule (about 0.92 M parameters).
    static ModelConfig leader_default() {
        ModelConfig c;
        c.context.encoder = {{{32, 1}}, {{48, 1}}, {{64, 1}}};
        c.context.bottleneck = {{64, 1}};
        c.context.decoder = {{{64, 1}}, {{48, 1}}, {{32, 1}}};
        c.refine.encoder = {{{32, 1}}, {{32, 4}}, {{128, 4}}, {{32, 4}}};
        c.refine.bottleneck = {{27, 4}};
        c.refine.decoder = {
            {{128, 4}, {128, 4}, {128, 4}, {128, 4}, {128, 4}},
            {{96, 1}},
            {{48, 1}},
            {{52, 1}},
        };
        return c;
    }

    std::size_t refine_input_channels() const noexcept { return gate.output + stem.output_channels(); }

    /// Spatial divisor the padded input must satisfy.
    std::size_t required_multiple() const {
        const std::size_t depth = std::max(context.depth(), refine.depth());
        return stem.pool << depth;
    }

    /// Padding granularity: a multiple of 32 that also satisfies the schedule.
    std::size_t pad_multiple() const { return std::lcm<std::size_t>(32, required_multiple()); }

    void validate() const {
        auto fail = [](const std::string& what) { throw StructuralError("model config: " + what); };
        if (version != 1) fail("unsupported version " + std::to_string(version));
        if (stem.filters == 0 || stem.paths.empty()) fail("stem needs filters and at least one path");
        if (stem.kernel % 2 == 0 || context.kernel % 2 == 0 || gate.kernel % 2 == 0 || head.kernel % 2 == 0 ||
            refine.kernel % 2 == 0) {
            fail("kernel sizes must be odd");
        }
        if (stem.pool == 0) fail("stem pool must be positive");
        for (const AutoencoderConfig* ae : {&context, &refine}) {
            if (ae->encoder.empty() || ae->bottleneck.empty()) fail("autoencoder needs encoder stages and a bottleneck");
            if (ae->decoder.size() != ae->encoder.size()) fail("decoder stage count must mirror the encoder");
            for (const auto& stage : ae->encoder)
                if (stage.empty()) fail("empty encoder stage");
            for (const auto& stage : ae->decoder)
                if (stage.empty()) fail("empty decoder stage");
            for (std::size_t c : ae->block_outputs())
                if (c == 0) fail("block with zero channels");
        }
        if (gate.dilations.empty() || gate.filters == 0) fail("gate needs dilated paths");
        if (gate.output != context.output_channels()) {
            fail("gate output " + std::to_string(gate.output) + " must equal context output " +
                 std::to_string(context.output_channels()));
        }
        if (head.input_channels != refine.output_channels()) {
            fail("head input " + std::to_string(head.input_channels) + " must equal refinement output " +
                 std::to_string(refine.output_channels()));
        }
        if (!(layer_norm_eps > 0.0f)) fail("layer_norm_eps must be positive");
    }

    /// Checks the published shape constraints of the refinement stage and
    /// head; returns human-readable violations (empty when conforming).
    std::vector<std::string> schedule_violations() const {
        std::vector<std::string> v;
        const auto outs = refine.block_outputs();
        const auto peak = outs.empty() ? 0 : *std::max_element(outs.begin(), outs.end());
        if (peak != 128) v.push_back("refinement peak depth is " + std::to_string(peak) + ", expected 128");
        if (outs.size() < 5) {
            v.push_back("refinement stage has fewer than 5 blocks");
        } else {
            if (outs[3] != 32) v.push_back("fourth refinement block outputs " + std::to_string(outs[3]) + ", expected 32");
            if (outs[4] != 27) v.push_back("fifth refinement block outputs " + std::to_string(outs[4]) + ", expected 27");
            if (*std::min_element(outs.begin(), outs.end()) != 27) v.push_back("refinement minimum is not 27");
        }
        if (head.input_channels != 52) v.push_back("head input is " + std::to_string(head.input_channels) + ", expected 52");
        if (gate.output != 32) v.push_back("gate output is " + std::to_string(gate.output) + ", expected 32");
        return v;
    }

    friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

// JSON (de)serialization.

namespace ops {
NLOHMANN_JSON_SERIALIZE_ENUM(PoolMode, {{PoolMode::avg, "avg"}, {PoolMode::max, "max"}})
}  // namespace ops

inline void to_json(nlohmann::json& j, const BlockSpec& b) { j = {{"channels", b.channels}, {"expand", b.expand}}; }
inline void from_json(const nlohmann::json& j, BlockSpec& b) {
    j.at("channels").get_to(b.channels);
    b.expand = j.value("expand", std::size_t{4});
}

inline void to_json(nlohmann::json& j, const StemConfig& s) {
    j = {{"filters", s.filters}, {"kernel", s.kernel}, {"pool", s.pool}, {"paths", s.paths}};
}
inline void from_json(const nlohmann::json& j, StemConfig& s) {
    StemConfig d;
    s.filters = j.value("filters", d.filters);
    s.kernel = j.value("kernel", d.kernel);
    s.pool = j.value("pool", d.pool);
    s.paths = j.value("paths", d.paths);
}

inline void to_json(nlohmann::json& j, const AutoencoderConfig& a) {
    j = {{"encoder", a.encoder}, {"bottleneck", a.bottleneck}, {"decoder", a.decoder},
         {"downsample", a.downsample}, {"kernel", a.kernel}};
}
inline void from_json(const nlohmann::json& j, AutoencoderConfig& a) {
    j.at("encoder").get_to(a.encoder);
    j.at("bottleneck").get_to(a.bottleneck);
    j.at("decoder").get_to(a.decoder);
    a.downsample = j.value("downsample", ops::PoolMode::max);
    a.kernel = j.value("kernel", std::size_t{3});
}

inline void to_json(nlohmann::json& j, const GateConfig& g) {
    j = {{"dilations", g.dilations}, {"filters", g.filters}, {"kernel", g.kernel}, {"output", g.output}};
}
inline void from_json(const nlohmann::json& j, GateConfig& g) {
    GateConfig d;
    g.dilations = j.value("dilations", d.dilations);
    g.filters = j.value("filters", d.filters);
    g.kernel = j.value("kernel", d.kernel);
    g.output = j.value("output", d.output);
}

inline void to_json(nlohmann::json& j, const HeadConfig& h) {
    j = {{"input_channels", h.input_channels}, {"filters", h.filters}, {"expand", h.expand}, {"kernel", h.kernel}};
}
inline void from_json(const nlohmann::json& j, HeadConfig& h) {
    HeadConfig d;
    h.input_channels = j.value("input_channels", d.input_channels);
    h.filters = j.value("filters", d.filters);
    h.expand = j.value("expand", d.expand);
    h.kernel = j.value("kernel", d.kernel);
}

inline void to_json(nlohmann::json& j, const ModelConfig& c) {
    j = {{"format", "leader-model-config"},
         {"version", c.version},
         {"stem", c.stem},
         {"context", c.context},
         {"gate", c.gate},
         {"refine", c.refine},
         {"head", c.head},
         {"layer_norm_eps", c.layer_norm_eps}};
}
inline void from_json(const nlohmann::json& j, ModelConfig& c) {
    if (j.contains("format") && j.at("format") != "leader-model-config") {
        throw StructuralError("model config: unexpected format tag " + j.at("format").dump());
    }
    c.version = j.value("version", 1);
    j.at("stem").get_to(c.stem);
    j.at("context").get_to(c.context);
    j.at("gate").get_to(c.gate);
    j.at("refine").get_to(c.refine);
    j.at("head").get_to(c.head);
    c.layer_norm_eps = j.value("layer_norm_eps", ops::kLayerNormEps);
}

}  // namespace leader
