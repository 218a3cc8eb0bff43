#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "kinshape/appearance.hpp"
#include "kinshape/data.hpp"
#include "kinshape/errors.hpp"
#include "kinshape/grassmann.hpp"
#include "kinshape/matrix.hpp"

namespace kinshape {

// ---------------------------------------------------------------------------
// Small fully-connected verification networks with hand-wired reverse-mode
// gradients: rectifier on hidden layers, linear 2-way output, softmax
// cross-entropy loss, plain SGD. Everything is deterministic under the seed.
// ---------------------------------------------------------------------------

struct DenseLayer {
    Matrix weight;            // out x in
    std::vector<double> bias; // out
};

struct MlpParams {
    std::vector<DenseLayer> layers;

    std::size_t input_dim() const { return layers.front().weight.cols(); }
    std::size_t output_dim() const { return layers.back().weight.rows(); }
};

struct MlpCache {
    // activations[0] is the input; activations[i] is the post-activation
    // output of layer i-1 (rectified for hidden layers, linear for the last).
    std::vector<std::vector<double>> activations;
};

struct MlpEval {
    std::vector<double> logits;
    MlpCache cache;
};

struct MlpGrads {
    std::vector<DenseLayer> layers; // same shapes as the parameters
    std::vector<double> grad_input;
};

struct XentResult {
    double loss;
    std::vector<double> grad_logits;
};

enum class FusionMode { score, concat };

struct TrainConfig {
    double learning_rate = 0.05;
    std::size_t epochs = 30;
    std::size_t batch_size = 32;
    std::uint64_t seed = 1;
    double l2_penalty = 0.0;
    std::vector<std::size_t> hidden_dims = {64, 16};
    double fusion_weight = 0.5;          // score-level mix: w*appearance + (1-w)*shape
    FusionMode fusion_mode = FusionMode::score;
    Centering centering = Centering::on;
    bool appearance_l2_normalize = false;
};

inline void validate(const TrainConfig& c) {
    // learning_rate 0 is allowed so "no update" runs stay expressible.
    if (c.learning_rate < 0.0) throw config_error("learning_rate must be nonnegative");
    if (c.batch_size < 1) throw config_error("batch_size must be >= 1");
    if (c.l2_penalty < 0.0) throw config_error("l2_penalty must be nonnegative");
    if (c.fusion_weight < 0.0 || c.fusion_weight > 1.0)
        throw config_error("fusion_weight must lie in [0, 1]");
    for (std::size_t h : c.hidden_dims)
        if (h < 1) throw config_error("hidden layer sizes must be >= 1");
}

struct FusedScore {
    double p_appearance;
    double p_shape;
    double p_fused;
};

// Per-pair network inputs, precomputed once: the flattened comparison
// feature for the shape branch and the element-wise appearance product.
struct PairFeatures {
    std::vector<double> shape_input;
    std::vector<double> appearance_input;
    PairLabel label = PairLabel::non_kin;
    std::string relation_tag;
};

struct TrainedModel {
    MlpParams shape_net;
    MlpParams appearance_net;
    std::optional<MlpParams> fusion_net; // present only in concat mode
    TrainConfig config;
};

struct EpochLoss {
    std::size_t epoch;
    double shape_loss;
    double appearance_loss;
    double fusion_loss; // 0 when no fusion net is trained
};

struct TrainResult {
    TrainedModel model;
    std::vector<EpochLoss> history;
};

// ---------------------------------------------------------------------------

inline MlpParams init_mlp(std::size_t input_dim, const std::vector<std::size_t>& hidden_dims,
                          std::size_t output_dim, std::mt19937_64& rng) {
    if (input_dim < 1 || output_dim < 1) throw config_error("network dims must be >= 1");
    std::vector<std::size_t> dims;
    dims.push_back(input_dim);
    dims.insert(dims.end(), hidden_dims.begin(), hidden_dims.end());
    dims.push_back(output_dim);

    MlpParams params;
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        const std::size_t in = dims[l], out = dims[l + 1];
        const double bound = std::sqrt(6.0 / static_cast<double>(in + out));
        std::uniform_real_distribution<double> dist(-bound, bound);
        DenseLayer layer{Matrix(out, in), std::vector<double>(out, 0.0)};
        for (std::size_t i = 0; i < out; ++i)
            for (std::size_t j = 0; j < in; ++j)
                layer.weight(i, j) = dist(rng);
        params.layers.push_back(std::move(layer));
    }
    return params;
}

inline MlpEval mlp_forward(const MlpParams& params, const std::vector<double>& input) {
    if (params.layers.empty()) throw state_error("network has no layers");
    if (input.size() != params.input_dim())
        throw shape_error("network input dim mismatch: got " + std::to_string(input.size()) +
                          ", want " + std::to_string(params.input_dim()));

    MlpCache cache;
    cache.activations.reserve(params.layers.size() + 1);
    cache.activations.push_back(input);
    std::vector<double> x = input;
    for (std::size_t l = 0; l < params.layers.size(); ++l) {
        const DenseLayer& layer = params.layers[l];
        std::vector<double> y = matvec(layer.weight, x);
        for (std::size_t i = 0; i < y.size(); ++i) y[i] += layer.bias[i];
        if (l + 1 < params.layers.size())
            for (double& v : y) v = std::max(0.0, v); // rectifier on hidden layers
        cache.activations.push_back(y);
        x = std::move(y);
    }
    return MlpEval{cache.activations.back(), std::move(cache)};
}

inline std::vector<double> softmax(const std::vector<double>& logits) {
    const double top = *std::max_element(logits.begin(), logits.end());
    std::vector<double> p(logits.size());
    double z = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        p[i] = std::exp(logits[i] - top);
        z += p[i];
    }
    for (double& v : p) v /= z;
    return p;
}

inline XentResult softmax_xent(const std::vector<double>& logits, int label) {
    if (logits.size() != 2) throw shape_error("softmax_xent expects 2 logits");
    if (label != 0 && label != 1) throw invalid_input_error("label must be 0 or 1");
    for (double v : logits)
        if (!std::isfinite(v)) throw invalid_input_error("non-finite logit");
    const std::vector<double> p = softmax(logits);
    // log(p[label]) via the shifted logits for stability.
    const double top = std::max(logits[0], logits[1]);
    const double logz =
        top + std::log(std::exp(logits[0] - top) + std::exp(logits[1] - top));
    XentResult r;
    r.loss = logz - logits[static_cast<std::size_t>(label)];
    r.grad_logits = p;
    r.grad_logits[static_cast<std::size_t>(label)] -= 1.0;
    return r;
}

inline MlpGrads mlp_backward(const MlpParams& params, const MlpCache& cache,
                             const std::vector<double>& grad_logits) {
    const std::size_t nl = params.layers.size();
    if (cache.activations.size() != nl + 1)
        throw state_error("activation cache does not match the network depth");
    for (std::size_t l = 0; l < nl; ++l) {
        if (cache.activations[l].size() != params.layers[l].weight.cols() ||
            cache.activations[l + 1].size() != params.layers[l].weight.rows())
            throw state_error("activation cache does not match the layer shapes");
    }
    if (grad_logits.size() != params.output_dim())
        throw shape_error("upstream logits gradient has wrong dimension");

    MlpGrads grads;
    grads.layers.resize(nl);
    std::vector<double> delta = grad_logits; // gradient wrt pre-activation of current layer
    for (std::size_t l = nl; l-- > 0;) {
        const DenseLayer& layer = params.layers[l];
        const std::vector<double>& in_act = cache.activations[l];
        DenseLayer& g = grads.layers[l];
        g.weight = Matrix(layer.weight.rows(), layer.weight.cols());
        g.bias.assign(layer.bias.size(), 0.0);
        for (std::size_t i = 0; i < layer.weight.rows(); ++i) {
            g.bias[i] = delta[i];
            for (std::size_t j = 0; j < layer.weight.cols(); ++j)
                g.weight(i, j) = delta[i] * in_act[j];
        }
        std::vector<double> down(layer.weight.cols(), 0.0);
        for (std::size_t j = 0; j < layer.weight.cols(); ++j) {
            double s = 0.0;
            for (std::size_t i = 0; i < layer.weight.rows(); ++i)
                s += layer.weight(i, j) * delta[i];
            down[j] = s;
        }
        if (l > 0) {
            // Chain through the rectifier of the previous layer: its output
            // is positive exactly where its pre-activation was.
            for (std::size_t j = 0; j < down.size(); ++j)
                if (cache.activations[l][j] <= 0.0) down[j] = 0.0;
        }
        delta = std::move(down);
    }
    grads.grad_input = std::move(delta);
    return grads;
}

// Convex score-level mix of the two branch probabilities.
inline double fuse(double p_appearance, double p_shape, double weight) {
    if (weight < 0.0 || weight > 1.0) throw config_error("fusion weight must lie in [0, 1]");
    if (p_appearance < 0.0 || p_appearance > 1.0 || p_shape < 0.0 || p_shape > 1.0)
        throw invalid_input_error("fusion inputs must be probabilities in [0, 1]");
    return weight * p_appearance + (1.0 - weight) * p_shape;
}

// SGD update; the L2 penalty applies to weights, not biases.
inline void sgd_step(MlpParams& params, const MlpGrads& grads, double learning_rate,
                     double l2_penalty) {
    if (grads.layers.size() != params.layers.size())
        throw state_error("gradient/parameter layer count mismatch");
    for (std::size_t l = 0; l < params.layers.size(); ++l) {
        DenseLayer& p = params.layers[l];
        const DenseLayer& g = grads.layers[l];
        for (std::size_t i = 0; i < p.weight.rows(); ++i)
            for (std::size_t j = 0; j < p.weight.cols(); ++j)
                p.weight(i, j) -= learning_rate * (g.weight(i, j) + l2_penalty * p.weight(i, j));
        for (std::size_t i = 0; i < p.bias.size(); ++i)
            p.bias[i] -= learning_rate * g.bias[i];
    }
}

// ---------------------------------------------------------------------------

inline PairFeatures build_pair_features(const PairSample& sample, const TrainConfig& config) {
    const auto d0 = shape_to_projector(sample.shape_a, config.centering);
    const auto d1 = shape_to_projector(sample.shape_b, config.centering);
    const ShapeCompareFeature b = aisc_forward(d0, d1);

    PairFeatures f;
    f.shape_input.assign(b.b.values().begin(), b.b.values().end()); // row-major m*m
    const AppearanceVector& a0 = sample.appearance_a;
    const AppearanceVector& a1 = sample.appearance_b;
    const AppearanceVector prod = config.appearance_l2_normalize
                                      ? ac_forward(l2_normalize(a0), l2_normalize(a1))
                                      : ac_forward(a0, a1);
    f.appearance_input = prod.values;
    f.label = sample.label;
    f.relation_tag = sample.relation_tag;
    return f;
}

inline std::vector<PairFeatures> build_pair_features(const std::vector<PairSample>& samples,
                                                     const TrainConfig& config) {
    std::vector<PairFeatures> out;
    out.reserve(samples.size());
    for (const PairSample& s : samples) out.push_back(build_pair_features(s, config));
    return out;
}

namespace detail {

inline MlpGrads zero_grads_like(const MlpParams& params) {
    MlpGrads g;
    g.layers.reserve(params.layers.size());
    for (const DenseLayer& l : params.layers)
        g.layers.push_back(DenseLayer{Matrix(l.weight.rows(), l.weight.cols()),
                                      std::vector<double>(l.bias.size(), 0.0)});
    g.grad_input.assign(params.input_dim(), 0.0);
    return g;
}

inline void accumulate(MlpGrads& sum, const MlpGrads& g) {
    for (std::size_t l = 0; l < sum.layers.size(); ++l) {
        DenseLayer& s = sum.layers[l];
        const DenseLayer& a = g.layers[l];
        for (std::size_t i = 0; i < s.weight.rows(); ++i)
            for (std::size_t j = 0; j < s.weight.cols(); ++j)
                s.weight(i, j) += a.weight(i, j);
        for (std::size_t i = 0; i < s.bias.size(); ++i) s.bias[i] += a.bias[i];
    }
}

inline void scale(MlpGrads& g, double factor) {
    for (DenseLayer& l : g.layers) {
        for (std::size_t i = 0; i < l.weight.rows(); ++i)
            for (std::size_t j = 0; j < l.weight.cols(); ++j)
                l.weight(i, j) *= factor;
        for (double& b : l.bias) b *= factor;
    }
}

// One epoch of minibatch SGD for a single branch over the given inputs;
// returns the mean sample loss.
inline double run_epoch(MlpParams& net, const std::vector<const std::vector<double>*>& inputs,
                        const std::vector<int>& labels, const std::vector<std::size_t>& order,
                        const TrainConfig& config) {
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
        const std::size_t stop = std::min(order.size(), start + config.batch_size);
        MlpGrads batch = zero_grads_like(net);
        for (std::size_t pos = start; pos < stop; ++pos) {
            const std::size_t idx = order[pos];
            const MlpEval eval = mlp_forward(net, *inputs[idx]);
            for (double v : eval.logits)
                if (!std::isfinite(v)) return std::numeric_limits<double>::quiet_NaN();
            const XentResult xent = softmax_xent(eval.logits, labels[idx]);
            loss_sum += xent.loss;
            accumulate(batch, mlp_backward(net, eval.cache, xent.grad_logits));
        }
        scale(batch, 1.0 / static_cast<double>(stop - start));
        sgd_step(net, batch, config.learning_rate, config.l2_penalty);
    }
    return loss_sum / static_cast<double>(order.size());
}

} // namespace detail

inline TrainResult train_on_features(const std::vector<PairFeatures>& features,
                                     const TrainConfig& config) {
    validate(config);
    std::size_t kin = 0, non = 0;
    for (const PairFeatures& f : features) (f.label == PairLabel::kin ? kin : non)++;
    if (kin < 2 || non < 2)
        throw data_error("need at least 2 samples of each class, got " + std::to_string(kin) +
                         " kin / " + std::to_string(non) + " non-kin");
    const std::size_t shape_dim = features.front().shape_input.size();
    const std::size_t app_dim = features.front().appearance_input.size();
    for (const PairFeatures& f : features)
        if (f.shape_input.size() != shape_dim || f.appearance_input.size() != app_dim)
            throw shape_error("inconsistent feature dimensions across samples");

    std::mt19937_64 rng(config.seed);
    TrainedModel model{init_mlp(shape_dim, config.hidden_dims, 2, rng),
                       init_mlp(app_dim, config.hidden_dims, 2, rng), std::nullopt, config};
    std::vector<std::vector<double>> concat_inputs;
    if (config.fusion_mode == FusionMode::concat) {
        model.fusion_net = init_mlp(shape_dim + app_dim, config.hidden_dims, 2, rng);
        concat_inputs.reserve(features.size());
        for (const PairFeatures& f : features) {
            std::vector<double> c = f.shape_input;
            c.insert(c.end(), f.appearance_input.begin(), f.appearance_input.end());
            concat_inputs.push_back(std::move(c));
        }
    }

    std::vector<const std::vector<double>*> shape_inputs, app_inputs, fusion_inputs;
    std::vector<int> labels;
    for (std::size_t i = 0; i < features.size(); ++i) {
        shape_inputs.push_back(&features[i].shape_input);
        app_inputs.push_back(&features[i].appearance_input);
        if (model.fusion_net) fusion_inputs.push_back(&concat_inputs[i]);
        labels.push_back(static_cast<int>(features[i].label));
    }

    std::vector<std::size_t> order(features.size());
    std::iota(order.begin(), order.end(), 0);

    TrainResult result{std::move(model), {}};
    result.history.reserve(config.epochs);
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        EpochLoss el{epoch, 0.0, 0.0, 0.0};
        el.shape_loss = detail::run_epoch(result.model.shape_net, shape_inputs, labels, order, config);
        el.appearance_loss =
            detail::run_epoch(result.model.appearance_net, app_inputs, labels, order, config);
        if (result.model.fusion_net)
            el.fusion_loss =
                detail::run_epoch(*result.model.fusion_net, fusion_inputs, labels, order, config);
        if (!std::isfinite(el.shape_loss) || !std::isfinite(el.appearance_loss) ||
            !std::isfinite(el.fusion_loss))
            throw divergence_error("training loss is not finite", epoch);
        result.history.push_back(el);
    }
    return result;
}

inline TrainResult train(const std::vector<PairSample>& samples, const TrainConfig& config) {
    return train_on_features(build_pair_features(samples, config), config);
}

inline FusedScore predict(const TrainedModel& model, const PairFeatures& features) {
    const double p_shape = softmax(mlp_forward(model.shape_net, features.shape_input).logits)[1];
    const double p_appearance =
        softmax(mlp_forward(model.appearance_net, features.appearance_input).logits)[1];
    double p_fused;
    if (model.fusion_net) {
        std::vector<double> c = features.shape_input;
        c.insert(c.end(), features.appearance_input.begin(), features.appearance_input.end());
        p_fused = softmax(mlp_forward(*model.fusion_net, c).logits)[1];
    } else {
        p_fused = fuse(p_appearance, p_shape, model.config.fusion_weight);
    }
    return FusedScore{p_appearance, p_shape, p_fused};
}

struct BranchAccuracies {
    double appearance = 0.0;
    double shape = 0.0;
    double fused = 0.0;
};

// Decision rule: kin when the probability reaches 0.5.
inline bool decide(double p) { return p >= 0.5; }

inline BranchAccuracies evaluate_accuracy(const TrainedModel& model,
                                          const std::vector<PairFeatures>& features) {
    if (features.empty()) throw data_error("no samples to evaluate");
    BranchAccuracies acc;
    for (const PairFeatures& f : features) {
        const FusedScore s = predict(model, f);
        const bool want = f.label == PairLabel::kin;
        acc.appearance += decide(s.p_appearance) == want ? 1.0 : 0.0;
        acc.shape += decide(s.p_shape) == want ? 1.0 : 0.0;
        acc.fused += decide(s.p_fused) == want ? 1.0 : 0.0;
    }
    const double n = static_cast<double>(features.size());
    acc.appearance /= n;
    acc.shape /= n;
    acc.fused /= n;
    return acc;
}

} // namespace kinshape
