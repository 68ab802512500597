#pragma once

#include <memory>
#include <optional>

#include "mammopos/annotation.hpp"
#include "mammopos/image.hpp"
#include "mammopos/model.hpp"

namespace mammopos {

inline constexpr int kModelSpace = 250;

/// Ground-truth endpoints from an annotation, rescaled into model space.
inline EndpointVector passthrough_predictor(const ViewAnnotation& ann) {
    if (!ann.pec || !ann.pnl)
        throw ValidationError("passthrough predictor needs both pec and pnl lines");
    const Bounds to{kModelSpace, kModelSpace};
    EndpointVector out = endpoints_from(rescale_segment(*ann.pec, ann.image_dims, to),
                                        rescale_segment(*ann.pnl, ann.image_dims, to));
    Regressor::apply_nipple_convention(out);
    return out;
}

/// Endpoint source for MLO views. Implementations return endpoints in their
/// own square working space (`space()` pixels per side); callers rescale.
class MloPredictor {
public:
    virtual ~MloPredictor() = default;
    virtual int space() const = 0;
    virtual EndpointVector predict(const GrayImage& img,
                                   const std::optional<ViewAnnotation>& ann) const = 0;
};

/// Oracle predictor: echoes the annotated lines, for pipeline testing
/// independent of training quality.
class PassthroughPredictor final : public MloPredictor {
public:
    int space() const override { return kModelSpace; }
    EndpointVector predict(const GrayImage&,
                           const std::optional<ViewAnnotation>& ann) const override {
        if (!ann) throw ValidationError("passthrough predictor needs an annotation");
        return passthrough_predictor(*ann);
    }
};

/// Learned predictor: resamples and normalizes the view, then runs the net.
class TrainedPredictor final : public MloPredictor {
public:
    explicit TrainedPredictor(Regressor model) : model_(std::move(model)) {}

    static TrainedPredictor from_checkpoint(const std::filesystem::path& path) {
        return TrainedPredictor(load_checkpoint(path));
    }

    int space() const override { return model_.input_size(); }
    EndpointVector predict(const GrayImage& img,
                           const std::optional<ViewAnnotation>&) const override {
        const int s = model_.input_size();
        return model_.predict(normalize(resample(img, s, s)));
    }

    const Regressor& model() const { return model_; }

private:
    Regressor model_;
};

}  // namespace mammopos
