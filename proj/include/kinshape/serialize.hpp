#pragma once

#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "kinshape/data.hpp"
#include "kinshape/errors.hpp"
#include "kinshape/matrix.hpp"
#include "kinshape/network.hpp"

namespace kinshape {

// JSON serialization for configs and trained models. nlohmann::json keeps
// object keys sorted and prints doubles with the shortest round-tripping
// representation, so identical in-memory state produces identical bytes.

inline constexpr const char* checkpoint_format_name = "kinshape-checkpoint";
inline constexpr int checkpoint_format_version = 1;

namespace detail {

inline std::string centering_name(Centering c) { return c == Centering::on ? "on" : "off"; }

inline Centering centering_from_name(const std::string& s) {
    if (s == "on") return Centering::on;
    if (s == "off") return Centering::off;
    throw format_error("unknown centering mode: " + s);
}

inline std::string fusion_mode_name(FusionMode m) {
    return m == FusionMode::score ? "score" : "concat";
}

inline FusionMode fusion_mode_from_name(const std::string& s) {
    if (s == "score") return FusionMode::score;
    if (s == "concat") return FusionMode::concat;
    throw format_error("unknown fusion mode: " + s);
}

template <typename T>
T json_get(const nlohmann::json& j, const std::string& key) {
    if (!j.contains(key)) throw format_error("missing field: " + key);
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw format_error("bad field '" + key + "': " + e.what());
    }
}

template <typename T>
T json_get_or(const nlohmann::json& j, const std::string& key, const T& fallback) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw format_error("bad field '" + key + "': " + e.what());
    }
}

} // namespace detail

// --- matrices ---------------------------------------------------------------

inline nlohmann::json matrix_to_json(const Matrix& m) {
    nlohmann::json j;
    j["rows"] = m.rows();
    j["cols"] = m.cols();
    j["data"] = m.values();
    return j;
}

inline Matrix matrix_from_json(const nlohmann::json& j) {
    const auto rows = detail::json_get<std::size_t>(j, "rows");
    const auto cols = detail::json_get<std::size_t>(j, "cols");
    const auto data = detail::json_get<std::vector<double>>(j, "data");
    if (data.size() != rows * cols) throw format_error("matrix data size mismatch");
    Matrix m(rows, cols);
    for (std::size_t i = 0; i < data.size(); ++i) m.values()[i] = data[i];
    return m;
}

// --- training config ---------------------------------------------------------

inline nlohmann::json to_json(const TrainConfig& c) {
    nlohmann::json j;
    j["learning_rate"] = c.learning_rate;
    j["epochs"] = c.epochs;
    j["batch_size"] = c.batch_size;
    j["seed"] = c.seed;
    j["l2_penalty"] = c.l2_penalty;
    j["hidden_dims"] = c.hidden_dims;
    j["fusion_weight"] = c.fusion_weight;
    j["fusion_mode"] = detail::fusion_mode_name(c.fusion_mode);
    j["centering"] = detail::centering_name(c.centering);
    j["appearance_l2_normalize"] = c.appearance_l2_normalize;
    return j;
}

// Missing fields keep their defaults so config files may be partial.
inline TrainConfig train_config_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw format_error("training config must be a JSON object");
    TrainConfig c;
    c.learning_rate = detail::json_get_or(j, "learning_rate", c.learning_rate);
    c.epochs = detail::json_get_or(j, "epochs", c.epochs);
    c.batch_size = detail::json_get_or(j, "batch_size", c.batch_size);
    c.seed = detail::json_get_or(j, "seed", c.seed);
    c.l2_penalty = detail::json_get_or(j, "l2_penalty", c.l2_penalty);
    c.hidden_dims = detail::json_get_or(j, "hidden_dims", c.hidden_dims);
    c.fusion_weight = detail::json_get_or(j, "fusion_weight", c.fusion_weight);
    if (j.contains("fusion_mode"))
        c.fusion_mode =
            detail::fusion_mode_from_name(detail::json_get<std::string>(j, "fusion_mode"));
    if (j.contains("centering"))
        c.centering = detail::centering_from_name(detail::json_get<std::string>(j, "centering"));
    c.appearance_l2_normalize =
        detail::json_get_or(j, "appearance_l2_normalize", c.appearance_l2_normalize);
    validate(c);
    return c;
}

// --- synthetic-data config ----------------------------------------------------

inline nlohmann::json to_json(const SynthConfig& c) {
    nlohmann::json j;
    j["family_count"] = c.family_count;
    j["family_deformation_scale"] = c.family_deformation_scale;
    j["child_noise_scale"] = c.child_noise_scale;
    j["rotation_max"] = c.affine.rotation_max;
    j["scale_min"] = c.affine.scale_min;
    j["scale_max"] = c.affine.scale_max;
    j["shear_max"] = c.affine.shear_max;
    j["translation_max"] = c.affine.translation_max;
    j["appearance_dim"] = c.appearance_dim;
    j["appearance_heritability"] = c.appearance_heritability;
    j["seed"] = c.seed;
    j["centering"] = detail::centering_name(c.centering);
    // The landmark template is omitted when it is the built-in default.
    if (!(c.template_points == face_template_points()))
        j["template_points"] = matrix_to_json(c.template_points);
    return j;
}

inline SynthConfig synth_config_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw format_error("synthesis config must be a JSON object");
    SynthConfig c;
    c.family_count = detail::json_get_or(j, "family_count", c.family_count);
    c.family_deformation_scale =
        detail::json_get_or(j, "family_deformation_scale", c.family_deformation_scale);
    c.child_noise_scale = detail::json_get_or(j, "child_noise_scale", c.child_noise_scale);
    c.affine.rotation_max = detail::json_get_or(j, "rotation_max", c.affine.rotation_max);
    c.affine.scale_min = detail::json_get_or(j, "scale_min", c.affine.scale_min);
    c.affine.scale_max = detail::json_get_or(j, "scale_max", c.affine.scale_max);
    c.affine.shear_max = detail::json_get_or(j, "shear_max", c.affine.shear_max);
    c.affine.translation_max =
        detail::json_get_or(j, "translation_max", c.affine.translation_max);
    c.appearance_dim = detail::json_get_or(j, "appearance_dim", c.appearance_dim);
    c.appearance_heritability =
        detail::json_get_or(j, "appearance_heritability", c.appearance_heritability);
    c.seed = detail::json_get_or(j, "seed", c.seed);
    if (j.contains("centering"))
        c.centering = detail::centering_from_name(detail::json_get<std::string>(j, "centering"));
    if (j.contains("template_points"))
        c.template_points = matrix_from_json(j.at("template_points"));
    detail::validate(c);
    return c;
}

// --- networks and checkpoints ---------------------------------------------------

inline nlohmann::json mlp_to_json(const MlpParams& params) {
    nlohmann::json layers = nlohmann::json::array();
    for (const DenseLayer& l : params.layers) {
        nlohmann::json jl;
        jl["weight"] = matrix_to_json(l.weight);
        jl["bias"] = l.bias;
        layers.push_back(jl);
    }
    nlohmann::json j;
    j["layers"] = layers;
    return j;
}

inline MlpParams mlp_from_json(const nlohmann::json& j) {
    if (!j.is_object() || !j.contains("layers") || !j.at("layers").is_array() ||
        j.at("layers").empty())
        throw format_error("network must carry a non-empty layer list");
    MlpParams params;
    for (const nlohmann::json& jl : j.at("layers")) {
        DenseLayer layer{matrix_from_json(jl.contains("weight")
                                              ? jl.at("weight")
                                              : throw format_error("layer missing weight")),
                         detail::json_get<std::vector<double>>(jl, "bias")};
        if (layer.bias.size() != layer.weight.rows())
            throw format_error("layer bias length does not match weight rows");
        params.layers.push_back(std::move(layer));
    }
    for (std::size_t l = 0; l + 1 < params.layers.size(); ++l)
        if (params.layers[l + 1].weight.cols() != params.layers[l].weight.rows())
            throw format_error("adjacent layer shapes do not chain");
    return params;
}

inline nlohmann::json checkpoint_to_json(const TrainedModel& model) {
    nlohmann::json j;
    j["format"] = checkpoint_format_name;
    j["version"] = checkpoint_format_version;
    j["config"] = to_json(model.config);
    j["shape_net"] = mlp_to_json(model.shape_net);
    j["appearance_net"] = mlp_to_json(model.appearance_net);
    j["fusion_net"] = model.fusion_net ? mlp_to_json(*model.fusion_net)
                                       : nlohmann::json(nullptr);
    return j;
}

inline TrainedModel checkpoint_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw format_error("checkpoint must be a JSON object");
    if (detail::json_get_or<std::string>(j, "format", "") != checkpoint_format_name)
        throw format_error("not a model checkpoint");
    if (detail::json_get_or<int>(j, "version", -1) != checkpoint_format_version)
        throw format_error("unsupported checkpoint version");
    TrainedModel model{mlp_from_json(j.at("shape_net")), mlp_from_json(j.at("appearance_net")),
                       std::nullopt, train_config_from_json(j.at("config"))};
    if (j.contains("fusion_net") && !j.at("fusion_net").is_null())
        model.fusion_net = mlp_from_json(j.at("fusion_net"));
    if (model.config.fusion_mode == FusionMode::concat && !model.fusion_net)
        throw format_error("concat-mode checkpoint lacks a fusion net");
    return model;
}

// --- file IO ---------------------------------------------------------------------

inline void write_json_file(const std::string& path, const nlohmann::json& j) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw io_error("cannot open for writing: " + path);
    out << j.dump(2) << '\n';
    if (!out) throw io_error("write failed: " + path);
}

inline nlohmann::json read_json_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot open: " + path);
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw format_error(path + ": " + e.what());
    }
}

inline void save_checkpoint(const std::string& path, const TrainedModel& model) {
    write_json_file(path, checkpoint_to_json(model));
}

inline TrainedModel load_checkpoint(const std::string& path) {
    return checkpoint_from_json(read_json_file(path));
}

} // namespace kinshape
