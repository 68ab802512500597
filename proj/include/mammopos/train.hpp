#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>
#include <vector>

#include "mammopos/annotation.hpp"
#include "mammopos/augment.hpp"
#include "mammopos/common.hpp"
#include "mammopos/image.hpp"
#include "mammopos/image_io.hpp"
#include "mammopos/loss.hpp"
#include "mammopos/model.hpp"

namespace mammopos {

struct TrainConfig {
    int batch_size = 12;
    double learning_rate = 1e-4;
    int epochs = 150;
    std::uint64_t seed = 0;
    double validation_fraction = 0.1;
    HeadLayout layout = HeadLayout::SharedTrunk;
    NetConfig net;
    bool augment_enabled = true;
    AugmentConfig augment;  // flip 0.5, rotation +-15 deg
};

inline void validate(const TrainConfig& c) {
    if (c.batch_size < 1) throw ValidationError("batch_size must be >= 1");
    if (!(c.learning_rate > 0.0)) throw ValidationError("learning_rate must be > 0");
    if (c.epochs < 1) throw ValidationError("epochs must be >= 1");
    if (!(c.validation_fraction >= 0.0 && c.validation_fraction < 1.0))
        throw ValidationError("validation_fraction must be in [0,1)");
    validate(c.net);
    validate(c.augment);
}

struct TrainingExample {
    GrayImage image;
    ViewAnnotation ann;
};

struct EpochStats {
    int epoch = 0;
    double train_loss = 0.0;  // mean per-sample loss over the epoch's pass
    double val_loss = 0.0;    // equals train_loss when the split is empty
};

struct TrainResult {
    Regressor model;
    std::vector<EpochStats> history;
    int best_epoch = 0;
    double best_val_loss = 0.0;
    std::vector<std::size_t> val_indices;  // dataset rows held out for validation
};

namespace detail {

// Network input plus pixel-space targets at the net's scale, nipple first.
struct PreparedSample {
    Tensor input;
    EndpointVector target{};
};

inline PreparedSample prepare_sample(const GrayImage& img, const ViewAnnotation& ann, int size) {
    if (!ann.pec || !ann.pnl)
        throw ValidationError("training sample needs both a pec and a pnl line");
    if (ann.image_dims.width != img.width || ann.image_dims.height != img.height)
        throw ValidationError("annotation dimensions do not match the image");
    PreparedSample s;
    s.input = to_tensor(normalize(resample(img, size, size)));
    const Bounds to{size, size};
    const Segment pec = rescale_segment(*ann.pec, ann.image_dims, to);
    const Segment pnl = rescale_segment(*ann.pnl, ann.image_dims, to);
    s.target = endpoints_from(pec, pnl);
    Regressor::apply_nipple_convention(s.target);
    return s;
}

struct Adam {
    double lr, beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    long t = 0;
    std::vector<std::vector<double>> m, v;

    Adam(const Regressor& model, double lr_in) : lr(lr_in) {
        for (const auto& net : model.nets()) {
            m.emplace_back(net.param_count(), 0.0);
            v.emplace_back(net.param_count(), 0.0);
        }
    }

    void step(Regressor& model, const std::vector<std::vector<double>>& grads) {
        ++t;
        const double c1 = 1.0 - std::pow(beta1, t);
        const double c2 = 1.0 - std::pow(beta2, t);
        for (std::size_t n = 0; n < grads.size(); ++n) {
            auto& params = model.nets()[n].params();
            for (std::size_t i = 0; i < params.size(); ++i) {
                const double g = grads[n][i];
                m[n][i] = beta1 * m[n][i] + (1.0 - beta1) * g;
                v[n][i] = beta2 * v[n][i] + (1.0 - beta2) * g * g;
                params[i] -= lr * (m[n][i] / c1) / (std::sqrt(v[n][i] / c2) + eps);
            }
        }
    }
};

// Forward + loss + (optionally) parameter gradients for one sample. The loss
// is measured on pixel-space residuals so its magnitudes mean pixels.
inline double sample_pass(Regressor& model, const PreparedSample& s,
                          std::vector<std::vector<double>>* grads) {
    const double scale = model.input_size();
    auto& nets = model.nets();
    if (model.layout() == HeadLayout::SharedTrunk) {
        KeypointNet::Cache cache;
        const auto raw = nets[0].forward(s.input, grads ? &cache : nullptr);
        std::array<double, 8> pred{};
        for (int i = 0; i < 8; ++i) pred[i] = raw[i] * scale;
        const double loss = log_cosh_loss(s.target, pred);
        if (grads) {
            auto g = loss_gradient(s.target, pred);
            for (auto& gi : g) gi *= scale;
            nets[0].backward(s.input, cache, g, (*grads)[0]);
        }
        return loss;
    }
    double loss = 0.0;
    for (int head = 0; head < 2; ++head) {
        KeypointNet::Cache cache;
        const auto raw = nets[head].forward(s.input, grads ? &cache : nullptr);
        std::array<double, 4> pred{}, target{};
        for (int i = 0; i < 4; ++i) {
            pred[i] = raw[i] * scale;
            target[i] = s.target[4 * head + i];
        }
        loss += log_cosh_loss(target, pred);
        if (grads) {
            auto g = loss_gradient(target, pred);
            for (auto& gi : g) gi *= scale;
            nets[head].backward(s.input, cache, g, (*grads)[head]);
        }
    }
    return loss;
}

}  // namespace detail

/// Mean per-sample Log-Cosh loss (pixel scale), no augmentation.
inline double evaluate_loss(Regressor& model, const std::vector<detail::PreparedSample>& samples) {
    if (samples.empty()) throw ContractError("evaluate_loss: empty sample set");
    double sum = 0.0;
    for (const auto& s : samples) sum += detail::sample_pass(model, s, nullptr);
    return sum / samples.size();
}

/// Mean Euclidean endpoint error in pixels at the network scale.
inline double mean_endpoint_error(const Regressor& model,
                                  const std::vector<detail::PreparedSample>& samples) {
    if (samples.empty()) throw ContractError("mean_endpoint_error: empty sample set");
    double sum = 0.0;
    for (const auto& s : samples) {
        EndpointVector pred = model.forward_px(s.input);
        Regressor::apply_nipple_convention(pred);
        for (int e = 0; e < 4; ++e)
            sum += std::hypot(pred[2 * e] - s.target[2 * e], pred[2 * e + 1] - s.target[2 * e + 1]);
    }
    return sum / (samples.size() * 4.0);
}

inline TrainResult train(const std::vector<TrainingExample>& dataset, const TrainConfig& cfg) {
    validate(cfg);
    if (dataset.empty()) throw ValidationError("training dataset is empty");

    // fixed split, then per-epoch shuffling of the training part only
    std::vector<std::size_t> order(dataset.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::mt19937_64 split_rng(derive_seed(cfg.seed, 5, 0));
    std::shuffle(order.begin(), order.end(), split_rng);
    const auto val_n = static_cast<std::size_t>(cfg.validation_fraction * dataset.size() + 0.5);
    if (dataset.size() - val_n < static_cast<std::size_t>(cfg.batch_size))
        throw ValidationError("training split smaller than one batch");
    std::vector<std::size_t> val_idx(order.begin(), order.begin() + val_n);
    std::vector<std::size_t> train_idx(order.begin() + val_n, order.end());

    std::vector<detail::PreparedSample> val_samples;
    for (auto i : val_idx)
        val_samples.push_back(detail::prepare_sample(dataset[i].image, dataset[i].ann,
                                                     cfg.net.input));

    TrainResult result{Regressor::make(cfg.layout, cfg.net, cfg.seed), {}, 0, 0.0, val_idx};
    Regressor& model = result.model;
    detail::Adam opt(model, cfg.learning_rate);

    std::vector<std::vector<double>> grads;
    for (const auto& net : model.nets()) grads.emplace_back(net.param_count(), 0.0);
    std::vector<std::vector<double>> best_params;
    double best_val = std::numeric_limits<double>::infinity();
    int best_epoch = 0;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        // cosine decay to 5% of the base rate: Adam orbits a sharp minimum at
        // constant step scale, so late epochs need smaller steps to settle
        opt.lr = cfg.learning_rate *
                 (0.05 + 0.95 * 0.5 * (1.0 + std::cos(std::numbers::pi * epoch / cfg.epochs)));
        std::mt19937_64 shuffle_rng(derive_seed(cfg.seed, 6, static_cast<std::uint64_t>(epoch)));
        std::shuffle(train_idx.begin(), train_idx.end(), shuffle_rng);
        AugmentConfig aug = cfg.augment;
        aug.rng_seed = derive_seed(cfg.seed, 4, static_cast<std::uint64_t>(epoch));

        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < train_idx.size();
             start += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t stop =
                std::min(train_idx.size(), start + static_cast<std::size_t>(cfg.batch_size));
            for (auto& g : grads) std::fill(g.begin(), g.end(), 0.0);
            for (std::size_t k = start; k < stop; ++k) {
                const auto& ex = dataset[train_idx[k]];
                detail::PreparedSample s;
                if (cfg.augment_enabled) {
                    const AugmentSample a = sample_augment(aug, train_idx[k]);
                    auto [img, ann] = apply_augment(ex.image, ex.ann, a);
                    s = detail::prepare_sample(img, ann, cfg.net.input);
                } else {
                    s = detail::prepare_sample(ex.image, ex.ann, cfg.net.input);
                }
                epoch_loss += detail::sample_pass(model, s, &grads);
            }
            const double inv = 1.0 / static_cast<double>(stop - start);
            for (auto& g : grads)
                for (auto& gi : g) gi *= inv;
            opt.step(model, grads);
        }
        epoch_loss /= static_cast<double>(train_idx.size());

        EpochStats stats;
        stats.epoch = epoch;
        stats.train_loss = epoch_loss;
        stats.val_loss = val_samples.empty() ? epoch_loss : evaluate_loss(model, val_samples);
        result.history.push_back(stats);

        if (stats.val_loss < best_val) {
            best_val = stats.val_loss;
            best_epoch = epoch;
            best_params.clear();
            for (const auto& net : model.nets()) best_params.push_back(net.params());
        }
    }

    for (std::size_t n = 0; n < best_params.size(); ++n)
        model.nets()[n].params() = best_params[n];
    result.best_epoch = best_epoch;
    result.best_val_loss = best_val;
    return result;
}

// ---------------------------------------------------------------------------
// Training manifest: one "image_path,annotation_path" pair per line
// ---------------------------------------------------------------------------

inline std::vector<std::pair<std::filesystem::path, std::filesystem::path>>
load_training_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    const auto base = path.parent_path();
    std::vector<std::pair<std::filesystem::path, std::filesystem::path>> pairs;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos)
            throw FormatError(FormatError::Kind::Malformed,
                              "training manifest line needs 'image,annotation': " + line);
        auto resolve = [&](std::string s) {
            std::filesystem::path p(s);
            return p.is_absolute() ? p : base / p;
        };
        pairs.emplace_back(resolve(line.substr(0, comma)), resolve(line.substr(comma + 1)));
    }
    return pairs;
}

inline std::vector<TrainingExample> load_training_set(const std::filesystem::path& manifest) {
    std::vector<TrainingExample> out;
    for (const auto& [img_path, ann_path] : load_training_manifest(manifest)) {
        TrainingExample ex{load_image(img_path), load_annotation(ann_path)};
        if (ex.ann.image_dims.width != ex.image.width ||
            ex.ann.image_dims.height != ex.image.height)
            throw ValidationError(ann_path.string() + ": dimensions do not match " +
                                  img_path.string());
        out.push_back(std::move(ex));
    }
    return out;
}

}  // namespace mammopos
