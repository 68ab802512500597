#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>
#include <span>
#include <vector>

#include <json.hpp>

#include "mammopos/common.hpp"
#include "mammopos/geometry.hpp"
#include "mammopos/image.hpp"

namespace mammopos {

/// pec.p0, pec.p1, pnl.p0 (nipple), pnl.p1 as x,y pairs in 250-px space.
using EndpointVector = std::array<double, 8>;

inline EndpointVector endpoints_from(const Segment& pec, const Segment& pnl) {
    return {pec.p0().x, pec.p0().y, pec.p1().x, pec.p1().y,
            pnl.p0().x, pnl.p0().y, pnl.p1().x, pnl.p1().y};
}

struct Tensor {
    int c = 0, h = 0, w = 0;
    std::vector<double> v;

    static Tensor make(int c, int h, int w) { return Tensor{c, h, w, std::vector<double>(std::size_t(c) * h * w, 0.0)}; }
    double& at(int ci, int y, int x) { return v[(std::size_t(ci) * h + y) * w + x]; }
    double at(int ci, int y, int x) const { return v[(std::size_t(ci) * h + y) * w + x]; }
};

/// Normalized image as a 1-channel tensor; the network consumes [0,1] floats.
inline Tensor to_tensor(const GrayImage& img) {
    Tensor t = Tensor::make(1, img.height, img.width);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) t.at(0, y, x) = img.at(x, y);
    return t;
}

struct NetConfig {
    int input = 250;
    std::array<int, 4> channels{8, 16, 32, 32};
    int fc_hidden = 64;
    int outputs = 8;
};

inline void validate(const NetConfig& c) {
    if (c.input < 16) throw ValidationError("net input must be >= 16");
    for (int ch : c.channels)
        if (ch < 1) throw ValidationError("net channels must be >= 1");
    if (c.fc_hidden < 1 || c.outputs < 1) throw ValidationError("net head sizes must be >= 1");
}

/// Four stride-2 conv stages; stage-3 activations feed a per-channel spatial
/// soft-argmax (coordinate features), stage 4 a small average-pool grid, both
/// into a two-layer fully connected head emitting coordinates in [0,1] units.
class KeypointNet {
public:
    explicit KeypointNet(NetConfig cfg) : cfg_(cfg) {
        validate(cfg_);
        auto half = [](int n) { return (n - 1) / 2 + 1; };  // 3x3, pad 1, stride 2
        s0_ = cfg_.input;
        s1_ = half(s0_);
        s2_ = half(s1_);
        s3_ = half(s2_);
        s4_ = half(s3_);
        pool_ = std::min(4, s4_);
        fc1_in_ = 2 * cfg_.channels[2] + cfg_.channels[3] * pool_ * pool_;

        std::size_t off = 0;
        auto conv = [&](int in_c, int out_c) {
            const std::size_t w = std::size_t(out_c) * in_c * 9;
            ConvSpec s{in_c, out_c, off, off + w};
            off += w + out_c;
            return s;
        };
        conv_[0] = conv(1, cfg_.channels[0]);
        conv_[1] = conv(cfg_.channels[0], cfg_.channels[1]);
        conv_[2] = conv(cfg_.channels[1], cfg_.channels[2]);
        conv_[3] = conv(cfg_.channels[2], cfg_.channels[3]);
        fc1_ = FcSpec{fc1_in_, cfg_.fc_hidden, off, off + std::size_t(cfg_.fc_hidden) * fc1_in_};
        off = fc1_.b_off + cfg_.fc_hidden;
        fc2_ = FcSpec{cfg_.fc_hidden, cfg_.outputs, off,
                      off + std::size_t(cfg_.outputs) * cfg_.fc_hidden};
        off = fc2_.b_off + cfg_.outputs;
        params_.assign(off, 0.0);
    }

    const NetConfig& config() const { return cfg_; }
    std::size_t param_count() const { return params_.size(); }
    std::vector<double>& params() { return params_; }
    const std::vector<double>& params() const { return params_; }
    int stage_size(int i) const { return i == 3 ? s3_ : i == 4 ? s4_ : i == 1 ? s1_ : i == 2 ? s2_ : s0_; }

    void init_params(std::uint64_t seed) {
        std::mt19937_64 rng(mix_seed(seed));
        std::normal_distribution<double> n(0.0, 1.0);
        auto he = [&](const ConvSpec& c) {
            const double sd = std::sqrt(2.0 / (c.in_c * 9.0));
            for (std::size_t i = c.w_off; i < c.b_off; ++i) params_[i] = sd * n(rng);
            for (int i = 0; i < c.out_c; ++i) params_[c.b_off + i] = 0.0;
        };
        for (const auto& c : conv_) he(c);
        const double sd1 = std::sqrt(2.0 / fc1_.in_n);
        for (std::size_t i = fc1_.w_off; i < fc1_.b_off; ++i) params_[i] = sd1 * n(rng);
        for (int i = 0; i < fc1_.out_n; ++i) params_[fc1_.b_off + i] = 0.0;
        // near-constant head starting at the canvas center keeps step one sane
        for (std::size_t i = fc2_.w_off; i < fc2_.b_off; ++i) params_[i] = 0.01 * n(rng);
        for (int i = 0; i < fc2_.out_n; ++i) params_[fc2_.b_off + i] = 0.5;
    }

    struct Cache {
        Tensor a1, a2, a3, a4;        // post-ReLU stage outputs
        Tensor probs;                  // soft-argmax weights over stage 3
        std::vector<double> coords;    // per-channel (x, y) expectations
        std::vector<double> pooled;    // stage-4 average-pool grid
        std::vector<double> f;         // fc1 input
        std::vector<double> h1;        // post-ReLU hidden
        std::vector<double> out;       // raw outputs, [0,1] units
    };

    /// Raw forward in normalized units. Throws on wrong input dims.
    std::vector<double> forward(const Tensor& in, Cache* cache = nullptr) const {
        if (in.c != 1 || in.h != s0_ || in.w != s0_)
            throw ContractError("KeypointNet: input must be 1x" + std::to_string(s0_) + "x" +
                                std::to_string(s0_));
        Cache local;
        Cache& c = cache ? *cache : local;
        c.a1 = conv_relu(conv_[0], in, s1_);
        c.a2 = conv_relu(conv_[1], c.a1, s2_);
        c.a3 = conv_relu(conv_[2], c.a2, s3_);
        c.a4 = conv_relu(conv_[3], c.a3, s4_);
        soft_argmax(c.a3, c.probs, c.coords);
        avg_pool(c.a4, c.pooled);
        c.f.assign(fc1_in_, 0.0);
        std::copy(c.coords.begin(), c.coords.end(), c.f.begin());
        std::copy(c.pooled.begin(), c.pooled.end(), c.f.begin() + c.coords.size());
        c.h1 = fc_forward(fc1_, c.f);
        for (auto& h : c.h1) h = std::max(h, 0.0);
        c.out = fc_forward(fc2_, c.h1);
        return c.out;
    }

    /// Accumulates dLoss/dParams into `grad` given dLoss/dRawOutput.
    void backward(const Tensor& in, const Cache& c, std::span<const double> d_out,
                  std::span<double> grad) const {
        if (d_out.size() != std::size_t(cfg_.outputs) || grad.size() != params_.size())
            throw ContractError("KeypointNet: gradient buffer sizes");
        std::vector<double> d_h1 = fc_backward(fc2_, c.h1, d_out, grad);
        for (int i = 0; i < fc1_.out_n; ++i)
            if (c.h1[i] <= 0.0) d_h1[i] = 0.0;
        std::vector<double> d_f = fc_backward(fc1_, c.f, d_h1, grad);

        Tensor d_a3 = Tensor::make(cfg_.channels[2], s3_, s3_);
        Tensor d_a4 = Tensor::make(cfg_.channels[3], s4_, s4_);
        soft_argmax_backward(c.probs, c.coords, std::span(d_f).first(2 * cfg_.channels[2]), d_a3);
        avg_pool_backward(std::span(d_f).subspan(2 * cfg_.channels[2]), d_a4);

        relu_mask(c.a4, d_a4);
        Tensor d_a3_from4 = Tensor::make(cfg_.channels[2], s3_, s3_);
        conv_backward(conv_[3], c.a3, d_a4, &d_a3_from4, grad);
        for (std::size_t i = 0; i < d_a3.v.size(); ++i) d_a3.v[i] += d_a3_from4.v[i];

        relu_mask(c.a3, d_a3);
        Tensor d_a2 = Tensor::make(cfg_.channels[1], s2_, s2_);
        conv_backward(conv_[2], c.a2, d_a3, &d_a2, grad);
        relu_mask(c.a2, d_a2);
        Tensor d_a1 = Tensor::make(cfg_.channels[0], s1_, s1_);
        conv_backward(conv_[1], c.a1, d_a2, &d_a1, grad);
        relu_mask(c.a1, d_a1);
        conv_backward(conv_[0], in, d_a1, nullptr, grad);
    }

private:
    struct ConvSpec {
        int in_c = 0, out_c = 0;
        std::size_t w_off = 0, b_off = 0;
    };
    struct FcSpec {
        int in_n = 0, out_n = 0;
        std::size_t w_off = 0, b_off = 0;
    };

    Tensor conv_relu(const ConvSpec& spec, const Tensor& in, int out_s) const {
        Tensor out = Tensor::make(spec.out_c, out_s, out_s);
        const double* W = params_.data() + spec.w_off;
        const double* B = params_.data() + spec.b_off;
        for (int oc = 0; oc < spec.out_c; ++oc)
            for (int oy = 0; oy < out_s; ++oy)
                for (int ox = 0; ox < out_s; ++ox) {
                    double acc = B[oc];
                    const int iy0 = oy * 2 - 1, ix0 = ox * 2 - 1;
                    for (int ic = 0; ic < spec.in_c; ++ic) {
                        const double* w = W + (std::size_t(oc) * spec.in_c + ic) * 9;
                        for (int ky = 0; ky < 3; ++ky) {
                            const int iy = iy0 + ky;
                            if (iy < 0 || iy >= in.h) continue;
                            const double* row = &in.v[(std::size_t(ic) * in.h + iy) * in.w];
                            for (int kx = 0; kx < 3; ++kx) {
                                const int ix = ix0 + kx;
                                if (ix < 0 || ix >= in.w) continue;
                                acc += w[ky * 3 + kx] * row[ix];
                            }
                        }
                    }
                    out.at(oc, oy, ox) = acc > 0.0 ? acc : 0.0;
                }
        return out;
    }

    // d_out arrives already masked by this stage's ReLU.
    void conv_backward(const ConvSpec& spec, const Tensor& in, const Tensor& d_out,
                       Tensor* d_in, std::span<double> grad) const {
        const double* W = params_.data() + spec.w_off;
        double* dW = grad.data() + spec.w_off;
        double* dB = grad.data() + spec.b_off;
        for (int oc = 0; oc < spec.out_c; ++oc)
            for (int oy = 0; oy < d_out.h; ++oy)
                for (int ox = 0; ox < d_out.w; ++ox) {
                    const double g = d_out.at(oc, oy, ox);
                    if (g == 0.0) continue;
                    dB[oc] += g;
                    const int iy0 = oy * 2 - 1, ix0 = ox * 2 - 1;
                    for (int ic = 0; ic < spec.in_c; ++ic) {
                        const std::size_t base = (std::size_t(oc) * spec.in_c + ic) * 9;
                        for (int ky = 0; ky < 3; ++ky) {
                            const int iy = iy0 + ky;
                            if (iy < 0 || iy >= in.h) continue;
                            for (int kx = 0; kx < 3; ++kx) {
                                const int ix = ix0 + kx;
                                if (ix < 0 || ix >= in.w) continue;
                                dW[base + ky * 3 + kx] += g * in.at(ic, iy, ix);
                                if (d_in) d_in->at(ic, iy, ix) += g * W[base + ky * 3 + kx];
                            }
                        }
                    }
                }
    }

    static void relu_mask(const Tensor& post, Tensor& d) {
        for (std::size_t i = 0; i < d.v.size(); ++i)
            if (post.v[i] <= 0.0) d.v[i] = 0.0;
    }

    void soft_argmax(const Tensor& a, Tensor& probs, std::vector<double>& coords) const {
        probs = Tensor::make(a.c, a.h, a.w);
        coords.assign(std::size_t(a.c) * 2, 0.0);
        const std::size_t plane = std::size_t(a.h) * a.w;
        for (int ch = 0; ch < a.c; ++ch) {
            const double* src = a.v.data() + ch * plane;
            double* dst = probs.v.data() + ch * plane;
            double m = src[0];
            for (std::size_t i = 1; i < plane; ++i) m = std::max(m, src[i]);
            double z = 0.0;
            for (std::size_t i = 0; i < plane; ++i) z += (dst[i] = std::exp(src[i] - m));
            double ex = 0.0, ey = 0.0;
            for (int y = 0; y < a.h; ++y)
                for (int x = 0; x < a.w; ++x) {
                    const double p = (dst[std::size_t(y) * a.w + x] /= z);
                    ex += p * (x + 0.5) / a.w;
                    ey += p * (y + 0.5) / a.h;
                }
            coords[2 * ch] = ex;
            coords[2 * ch + 1] = ey;
        }
    }

    static void soft_argmax_backward(const Tensor& probs, const std::vector<double>& coords,
                                     std::span<const double> d_coords, Tensor& d_a) {
        for (int ch = 0; ch < probs.c; ++ch) {
            const double gx = d_coords[2 * ch], gy = d_coords[2 * ch + 1];
            if (gx == 0.0 && gy == 0.0) continue;
            const double ex = coords[2 * ch], ey = coords[2 * ch + 1];
            for (int y = 0; y < probs.h; ++y)
                for (int x = 0; x < probs.w; ++x) {
                    const double p = probs.at(ch, y, x);
                    d_a.at(ch, y, x) += p * (((x + 0.5) / probs.w - ex) * gx +
                                             ((y + 0.5) / probs.h - ey) * gy);
                }
        }
    }

    // adaptive average pool onto a pool_ x pool_ grid
    void avg_pool(const Tensor& a, std::vector<double>& out) const {
        out.assign(std::size_t(a.c) * pool_ * pool_, 0.0);
        for (int ch = 0; ch < a.c; ++ch)
            for (int by = 0; by < pool_; ++by)
                for (int bx = 0; bx < pool_; ++bx) {
                    const int y0 = by * a.h / pool_, y1 = (by + 1) * a.h / pool_;
                    const int x0 = bx * a.w / pool_, x1 = (bx + 1) * a.w / pool_;
                    double sum = 0.0;
                    for (int y = y0; y < y1; ++y)
                        for (int x = x0; x < x1; ++x) sum += a.at(ch, y, x);
                    out[(std::size_t(ch) * pool_ + by) * pool_ + bx] =
                        sum / ((y1 - y0) * (x1 - x0));
                }
    }

    void avg_pool_backward(std::span<const double> d_out, Tensor& d_a) const {
        for (int ch = 0; ch < d_a.c; ++ch)
            for (int by = 0; by < pool_; ++by)
                for (int bx = 0; bx < pool_; ++bx) {
                    const int y0 = by * d_a.h / pool_, y1 = (by + 1) * d_a.h / pool_;
                    const int x0 = bx * d_a.w / pool_, x1 = (bx + 1) * d_a.w / pool_;
                    const double g = d_out[(std::size_t(ch) * pool_ + by) * pool_ + bx] /
                                     ((y1 - y0) * (x1 - x0));
                    for (int y = y0; y < y1; ++y)
                        for (int x = x0; x < x1; ++x) d_a.at(ch, y, x) += g;
                }
    }

    std::vector<double> fc_forward(const FcSpec& spec, const std::vector<double>& in) const {
        std::vector<double> out(spec.out_n);
        const double* W = params_.data() + spec.w_off;
        const double* B = params_.data() + spec.b_off;
        for (int o = 0; o < spec.out_n; ++o) {
            double acc = B[o];
            const double* row = W + std::size_t(o) * spec.in_n;
            for (int i = 0; i < spec.in_n; ++i) acc += row[i] * in[i];
            out[o] = acc;
        }
        return out;
    }

    std::vector<double> fc_backward(const FcSpec& spec, const std::vector<double>& in,
                                    std::span<const double> d_out, std::span<double> grad) const {
        std::vector<double> d_in(spec.in_n, 0.0);
        const double* W = params_.data() + spec.w_off;
        double* dW = grad.data() + spec.w_off;
        double* dB = grad.data() + spec.b_off;
        for (int o = 0; o < spec.out_n; ++o) {
            const double g = d_out[o];
            dB[o] += g;
            const double* row = W + std::size_t(o) * spec.in_n;
            double* drow = dW + std::size_t(o) * spec.in_n;
            for (int i = 0; i < spec.in_n; ++i) {
                drow[i] += g * in[i];
                d_in[i] += g * row[i];
            }
        }
        return d_in;
    }

    NetConfig cfg_;
    int s0_ = 0, s1_ = 0, s2_ = 0, s3_ = 0, s4_ = 0, pool_ = 0, fc1_in_ = 0;
    std::array<ConvSpec, 4> conv_{};
    FcSpec fc1_{}, fc2_{};
    std::vector<double> params_;
};

// ---------------------------------------------------------------------------
// Regressor: one shared trunk with an 8-way head, or two separate 4-way nets
// ---------------------------------------------------------------------------

enum class HeadLayout { SharedTrunk, SeparateModels };

inline std::string to_string(HeadLayout l) {
    return l == HeadLayout::SharedTrunk ? "shared" : "separate";
}

inline std::optional<HeadLayout> parse_head_layout(std::string_view s) {
    if (s == "shared") return HeadLayout::SharedTrunk;
    if (s == "separate") return HeadLayout::SeparateModels;
    return std::nullopt;
}

class Regressor {
public:
    static Regressor make(HeadLayout layout, NetConfig cfg, std::uint64_t seed) {
        Regressor r;
        r.layout_ = layout;
        if (layout == HeadLayout::SharedTrunk) {
            cfg.outputs = 8;
            r.nets_.emplace_back(cfg);
            r.nets_[0].init_params(derive_seed(seed, 10, 0));
        } else {
            cfg.outputs = 4;
            r.nets_.emplace_back(cfg);  // pec
            r.nets_.emplace_back(cfg);  // pnl
            r.nets_[0].init_params(derive_seed(seed, 10, 0));
            r.nets_[1].init_params(derive_seed(seed, 10, 1));
        }
        return r;
    }

    HeadLayout layout() const { return layout_; }
    int input_size() const { return nets_[0].config().input; }
    std::vector<KeypointNet>& nets() { return nets_; }
    const std::vector<KeypointNet>& nets() const { return nets_; }

    /// Pixel-space endpoints (no reordering); input must match the net size.
    EndpointVector forward_px(const Tensor& in) const {
        EndpointVector out{};
        const double scale = input_size();
        if (layout_ == HeadLayout::SharedTrunk) {
            const auto raw = nets_[0].forward(in);
            for (int i = 0; i < 8; ++i) out[i] = raw[i] * scale;
        } else {
            const auto pec = nets_[0].forward(in);
            const auto pnl = nets_[1].forward(in);
            for (int i = 0; i < 4; ++i) out[i] = pec[i] * scale;
            for (int i = 0; i < 4; ++i) out[4 + i] = pnl[i] * scale;
        }
        return out;
    }

    /// Nipple convention: the PNL endpoint farther from the PEC line takes
    /// the p0 slot. No-op when the PEC endpoints coincide.
    static void apply_nipple_convention(EndpointVector& e) {
        const Point a{e[0], e[1]}, b{e[2], e[3]};
        const Point dir = b - a;
        const double len = norm(dir);
        if (len <= 1e-9) return;
        auto line_dist = [&](const Point& p) { return std::abs(cross(dir, p - a)) / len; };
        if (line_dist(Point{e[4], e[5]}) < line_dist(Point{e[6], e[7]})) {
            std::swap(e[4], e[6]);
            std::swap(e[5], e[7]);
        }
    }

    /// Forward plus the nipple convention applied to the PNL endpoints.
    EndpointVector predict(const GrayImage& img) const {
        if (img.width != input_size() || img.height != input_size())
            throw ContractError("Regressor: input image must be " + std::to_string(input_size()) +
                                "x" + std::to_string(input_size()));
        EndpointVector out = forward_px(to_tensor(img));
        apply_nipple_convention(out);
        return out;
    }

private:
    HeadLayout layout_ = HeadLayout::SharedTrunk;
    std::vector<KeypointNet> nets_;
};

// ---------------------------------------------------------------------------
// Checkpoint container: magic, JSON descriptor, raw little-endian float64
// ---------------------------------------------------------------------------

inline constexpr char kCheckpointMagic[] = "MPOSNET1\n";

inline void save_checkpoint(const std::filesystem::path& path, const Regressor& model) {
    const auto& cfg = model.nets()[0].config();
    nlohmann::ordered_json desc;
    desc["layout"] = to_string(model.layout());
    desc["input"] = cfg.input;
    desc["channels"] = cfg.channels;
    desc["fc_hidden"] = cfg.fc_hidden;
    desc["outputs"] = cfg.outputs;
    desc["activation"] = "relu";
    desc["param_count"] = model.nets()[0].param_count();
    const std::string js = desc.dump();

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out.write(kCheckpointMagic, 9);
    const std::uint32_t len = static_cast<std::uint32_t>(js.size());
    out.write(reinterpret_cast<const char*>(&len), 4);
    out.write(js.data(), js.size());
    for (const auto& net : model.nets())
        out.write(reinterpret_cast<const char*>(net.params().data()),
                  static_cast<std::streamsize>(net.params().size() * sizeof(double)));
    if (!out) throw IoError("short write to " + path.string());
}

inline Regressor load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    char magic[9];
    if (!in.read(magic, 9) || std::memcmp(magic, kCheckpointMagic, 9) != 0)
        throw FormatError(FormatError::Kind::Malformed, path.string() + ": not a model checkpoint");
    std::uint32_t len = 0;
    if (!in.read(reinterpret_cast<char*>(&len), 4) || len == 0 || len > (1u << 20))
        throw FormatError(FormatError::Kind::Malformed, path.string() + ": bad descriptor length");
    std::string js(len, '\0');
    if (!in.read(js.data(), len))
        throw FormatError(FormatError::Kind::Malformed, path.string() + ": truncated descriptor");

    NetConfig cfg;
    HeadLayout layout;
    std::size_t declared = 0;
    try {
        const auto desc = nlohmann::json::parse(js);
        const auto l = parse_head_layout(desc.at("layout").get<std::string>());
        if (!l) throw FormatError(FormatError::Kind::Malformed, path.string() + ": unknown layout");
        layout = *l;
        cfg.input = desc.at("input").get<int>();
        const auto ch = desc.at("channels");
        if (!ch.is_array() || ch.size() != 4)
            throw FormatError(FormatError::Kind::Malformed, path.string() + ": bad channel list");
        for (int i = 0; i < 4; ++i) cfg.channels[i] = ch[i].get<int>();
        cfg.fc_hidden = desc.at("fc_hidden").get<int>();
        cfg.outputs = desc.at("outputs").get<int>();
        declared = desc.at("param_count").get<std::size_t>();
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(FormatError::Kind::Malformed,
                          path.string() + ": bad descriptor: " + e.what());
    }
    const int expected_outputs = layout == HeadLayout::SharedTrunk ? 8 : 4;
    if (cfg.outputs != expected_outputs)
        throw FormatError(FormatError::Kind::Malformed,
                          path.string() + ": descriptor outputs do not match layout");

    Regressor model = Regressor::make(layout, cfg, 0);
    if (model.nets()[0].param_count() != declared)
        throw FormatError(FormatError::Kind::Malformed,
                          path.string() + ": descriptor does not match this architecture");
    for (auto& net : model.nets()) {
        if (!in.read(reinterpret_cast<char*>(net.params().data()),
                     static_cast<std::streamsize>(net.params().size() * sizeof(double))))
            throw FormatError(FormatError::Kind::Malformed,
                              path.string() + ": truncated parameter block");
    }
    char extra;
    if (in.read(&extra, 1))
        throw FormatError(FormatError::Kind::Malformed,
                          path.string() + ": trailing bytes after parameters");
    return model;
}

}  // namespace mammopos
