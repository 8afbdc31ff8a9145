#pragma once

// One JSON document bundling every tunable of a run. All sections are
// optional; missing keys keep their defaults.
//
// {
//   "model":       { ...model config... },
//   "cmr":         { "delta": 4, "beta": 2, "sigma": 2, "lambda": 0.3 },
//   "postprocess": { "smoothing_size": 5, "smoothing_sigma": 1, "nms_window": 7, "tau_q": 0.6 },
//   "loss":        { "alpha_p": 0.85, "alpha_d": 0.10, "alpha_t": 0.05, "epsilon": 1e-8 }
// }

#include <leader/cmr.hpp>
#include <leader/config.hpp>
#include <leader/io/errors.hpp>
#include <leader/io/files.hpp>
#include <leader/losses.hpp>
#include <leader/postprocess.hpp>

#include <json.hpp>

#include <filesystem>

namespace leader::io {

struct RunConfig {
    ModelConfig model = ModelConfig::leader_default();
    cmr::CmrParams cmr;
    postprocess::Settings postprocess;
    losses::LossWeights loss;
};

inline RunConfig parse_run_config(const nlohmann::json& j) {
    RunConfig c;
    if (!j.is_object()) throw FormatError("config must be a JSON object");
    for (const auto& [key, value] : j.items()) {
        if (key != "model" && key != "cmr" && key != "postprocess" && key != "loss") {
            throw FormatError("config: unknown section '" + key + "'");
        }
    }
    try {
        if (j.contains("model")) j.at("model").get_to(c.model);
        if (j.contains("cmr")) {
            const auto& s = j.at("cmr");
            c.cmr.delta = s.value("delta", c.cmr.delta);
            c.cmr.beta = s.value("beta", c.cmr.beta);
            c.cmr.sigma = s.value("sigma", c.cmr.sigma);
            c.cmr.lambda = s.value("lambda", c.cmr.lambda);
        }
        if (j.contains("postprocess")) {
            const auto& s = j.at("postprocess");
            c.postprocess.smoothing_size = s.value("smoothing_size", c.postprocess.smoothing_size);
            c.postprocess.smoothing_sigma = s.value("smoothing_sigma", c.postprocess.smoothing_sigma);
            c.postprocess.nms_window = s.value("nms_window", c.postprocess.nms_window);
            c.postprocess.tau_q = s.value("tau_q", c.postprocess.tau_q);
        }
        if (j.contains("loss")) {
            const auto& s = j.at("loss");
            c.loss.alpha_p = s.value("alpha_p", c.loss.alpha_p);
            c.loss.alpha_d = s.value("alpha_d", c.loss.alpha_d);
            c.loss.alpha_t = s.value("alpha_t", c.loss.alpha_t);
            c.loss.epsilon = s.value("epsilon", c.loss.epsilon);
        }
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("config: ") + e.what());
    }
    c.model.validate();
    c.cmr.validate();
    c.loss.validate();
    return c;
}

inline RunConfig read_run_config(const std::filesystem::path& path) {
    const std::string text = read_file(path);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
    return parse_run_config(j);
}

inline ModelConfig read_model_config(const std::filesystem::path& path) {
    const std::string text = read_file(path);
    try {
        ModelConfig c = nlohmann::json::parse(text).get<ModelConfig>();
        c.validate();
        return c;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

}  // namespace leader::io
