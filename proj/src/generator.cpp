#include "logan/generator.hpp"

#include "logan/checkpoint.hpp"
#include "logan/digest.hpp"
#include "logan/error.hpp"
#include "random.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace logan {

namespace {

void check_layer_range(const GeneratorModel& model, int layer, const char* what) {
    if (layer < 1 || layer > model.layer_count()) {
        contract_error(std::string(what) + ": layer " + std::to_string(layer) + " outside [1," +
                       std::to_string(model.layer_count()) + "]");
    }
}

void check_shape(const GeneratorModel& model, const FeatureMap& f, const char* what) {
    const LayerSpec& s = model.spec(f.layer);
    if (f.channels != s.channels || f.height != s.height || f.width != s.width) {
        contract_error(std::string(what) + ": feature map shape " + std::to_string(f.channels) + "x" +
                       std::to_string(f.height) + "x" + std::to_string(f.width) + " does not match layer " +
                       std::to_string(f.layer));
    }
    if (f.data.size() != static_cast<std::size_t>(f.channels) * f.plane_size()) {
        contract_error(std::string(what) + ": feature buffer size mismatch");
    }
}

std::vector<float> normals(detail::NormalSource& rng, std::size_t n, double scale) {
    std::vector<float> out(n);
    for (auto& v : out) v = static_cast<float>(rng.next() * scale);
    return out;
}

GeneratorModel make_toy(const ToyConfig& cfg) {
    if (cfg.layer_count < 2) throw Error(ErrorKind::Config, "toy model needs at least 2 layers");
    if (cfg.channels < 1 || cfg.style_dim < 1 || cfg.max_resolution < 4) {
        throw Error(ErrorKind::Config, "toy model: channels, style_dim must be positive and max_resolution >= 4");
    }
    std::vector<LayerSpec> specs;
    for (int l = 1; l <= cfg.layer_count; ++l) {
        const int r = toy_resolution(l, cfg.max_resolution);
        specs.push_back({cfg.channels, r, r, cfg.style_dim});
    }
    detail::NormalSource rng(cfg.seed);
    const int c = cfg.channels;
    const int d = cfg.style_dim;
    FeatureMap constant(1, c, specs[0].height, specs[0].width);
    constant.data = normals(rng, constant.data.size(), 1.0);

    std::vector<LayerWeights> layers;
    for (int l = 1; l <= cfg.layer_count; ++l) {
        LayerWeights w;
        w.style_matrix = normals(rng, static_cast<std::size_t>(2 * c) * d, 0.5 / std::sqrt(static_cast<double>(d)));
        w.style_bias.assign(static_cast<std::size_t>(2 * c), 0.0f);
        std::fill(w.style_bias.begin(), w.style_bias.begin() + c, 1.0f);
        w.conv_weight = normals(rng, static_cast<std::size_t>(c) * c * 9, std::sqrt(2.0 / (9.0 * c)));
        w.conv_bias = normals(rng, static_cast<std::size_t>(c), 0.1);
        if (!cfg.conv_bias) std::fill(w.conv_bias.begin(), w.conv_bias.end(), 0.0f);
        layers.push_back(std::move(w));
    }
    auto rgb_weight = normals(rng, static_cast<std::size_t>(3) * c, 1.0 / std::sqrt(static_cast<double>(c)));
    std::vector<float> rgb_bias(3, 0.0f);
    return GeneratorModel(BackboneKind::Toy, std::move(specs), std::move(constant), std::move(layers),
                          std::move(rgb_weight), std::move(rgb_bias), cfg.seed);
}

} // namespace

int toy_resolution(int layer, int max_resolution) {
    const int doublings = (layer - 1) / 2;
    long long r = 4;
    for (int i = 0; i < doublings && r < max_resolution; ++i) r *= 2;
    return static_cast<int>(std::min<long long>(r, max_resolution));
}

GeneratorModel::GeneratorModel(BackboneKind kind, std::vector<LayerSpec> specs, FeatureMap constant,
                               std::vector<LayerWeights> layers, std::vector<float> rgb_weight,
                               std::vector<float> rgb_bias, std::optional<std::uint64_t> seed)
    : kind_(kind), specs_(std::move(specs)), constant_(std::move(constant)), layers_(std::move(layers)),
      rgb_weight_(std::move(rgb_weight)), rgb_bias_(std::move(rgb_bias)), seed_(seed) {
    const auto fail = [](const std::string& m) { throw Error(ErrorKind::Config, "generator: " + m); };
    if (specs_.size() < 2) fail("at least 2 layers required");
    if (layers_.size() != specs_.size()) fail("one weight set per layer required");
    for (std::size_t i = 0; i < specs_.size(); ++i) {
        const auto& s = specs_[i];
        if (s.channels < 1 || s.height < 1 || s.width < 1 || s.style_dim < 1) fail("layer specs must be positive");
        if (i > 0) {
            const auto& p = specs_[i - 1];
            if (s.height < p.height || s.width < p.width) fail("resolutions must be non-decreasing");
            if (s.height % p.height != 0 || s.width % p.width != 0 || s.height / p.height != s.width / p.width) {
                fail("resolution ratio between consecutive layers must be a uniform integer");
            }
        }
    }
    specs_.push_back({specs_.back().channels, specs_.back().height, specs_.back().width, 0});
    const int last = static_cast<int>(specs_.size()) - 2;
    for (int i = 0; i <= last; ++i) {
        const auto& s = specs_[static_cast<std::size_t>(i)];
        const auto& next = specs_[static_cast<std::size_t>(i + 1)];
        const auto& w = layers_[static_cast<std::size_t>(i)];
        if (w.style_matrix.size() != static_cast<std::size_t>(2 * s.channels) * s.style_dim ||
            w.style_bias.size() != static_cast<std::size_t>(2 * s.channels) ||
            w.conv_weight.size() != static_cast<std::size_t>(next.channels) * s.channels * 9 ||
            w.conv_bias.size() != static_cast<std::size_t>(next.channels)) {
            fail("weight sizes of layer " + std::to_string(i + 1) + " do not match its spec");
        }
    }
    if (constant_.channels != specs_[0].channels || constant_.height != specs_[0].height ||
        constant_.width != specs_[0].width || constant_.layer != 1) {
        fail("constant input does not match layer 1");
    }
    if (rgb_weight_.size() != static_cast<std::size_t>(3) * specs_.back().channels || rgb_bias_.size() != 3) {
        fail("rgb projection size mismatch");
    }

    Sha256 h;
    h.update_values(std::span<const float>(constant_.data));
    for (const auto& w : layers_) {
        h.update_values(std::span<const float>(w.style_matrix));
        h.update_values(std::span<const float>(w.style_bias));
        h.update_values(std::span<const float>(w.conv_weight));
        h.update_values(std::span<const float>(w.conv_bias));
    }
    h.update_values(std::span<const float>(rgb_weight_));
    h.update_values(std::span<const float>(rgb_bias_));
    digest_ = h.finish();
}

const LayerSpec& GeneratorModel::spec(int layer) const {
    if (layer < 1 || layer > layer_count() + 1) {
        contract_error("layer " + std::to_string(layer) + " outside [1," + std::to_string(layer_count() + 1) + "]");
    }
    return specs_[static_cast<std::size_t>(layer - 1)];
}

const LayerWeights& GeneratorModel::weights(int layer) const {
    check_layer_range(*this, layer, "weights");
    return layers_[static_cast<std::size_t>(layer - 1)];
}

StyleParams GeneratorModel::style_params(const LatentCode& code) const {
    check_layer_range(*this, code.layer, "style_params");
    const LayerSpec& s = spec(code.layer);
    if (static_cast<int>(code.values.size()) != s.style_dim) {
        contract_error("latent code of layer " + std::to_string(code.layer) + " has dimension " +
                       std::to_string(code.values.size()) + ", expected " + std::to_string(s.style_dim));
    }
    if (!all_finite(std::span<const double>(code.values))) {
        throw Error(ErrorKind::Numeric, "latent code of layer " + std::to_string(code.layer) + " is not finite");
    }
    const LayerWeights& w = weights(code.layer);
    StyleParams p;
    p.layer = code.layer;
    p.scale.resize(static_cast<std::size_t>(s.channels));
    p.bias.resize(static_cast<std::size_t>(s.channels));
    for (int row = 0; row < 2 * s.channels; ++row) {
        double acc = w.style_bias[static_cast<std::size_t>(row)];
        const float* m = w.style_matrix.data() + static_cast<std::size_t>(row) * s.style_dim;
        for (int k = 0; k < s.style_dim; ++k) acc += static_cast<double>(m[k]) * code.values[static_cast<std::size_t>(k)];
        if (row < s.channels) {
            p.scale[static_cast<std::size_t>(row)] = static_cast<float>(acc);
        } else {
            p.bias[static_cast<std::size_t>(row - s.channels)] = static_cast<float>(acc);
        }
    }
    return p;
}

GeneratorModel instantiate_model(const ModelConfig& config) {
    if (const auto* toy = std::get_if<ToyConfig>(&config)) return make_toy(*toy);
    return load_checkpoint(std::get<CheckpointDescriptor>(config).manifest);
}

FeatureMap apply_style(const FeatureMap& features, const StyleParams& style) {
    require(features.layer == style.layer, "apply_style: feature layer " + std::to_string(features.layer) +
                                               " != style layer " + std::to_string(style.layer));
    require(style.scale.size() == static_cast<std::size_t>(features.channels) &&
                style.bias.size() == static_cast<std::size_t>(features.channels),
            "apply_style: style params do not match channel count");
    if (!all_finite(std::span<const float>(features.data))) {
        throw Error(ErrorKind::Numeric, "apply_style: non-finite features at layer " + std::to_string(features.layer));
    }
    FeatureMap out(features.layer, features.channels, features.height, features.width);
    const std::size_t n = features.plane_size();
    for (int c = 0; c < features.channels; ++c) {
        const auto in = features.channel(c);
        double sum = 0.0;
        for (float v : in) sum += v;
        const double mean = sum / static_cast<double>(n);
        double sq = 0.0;
        for (float v : in) sq += (v - mean) * (v - mean);
        const double stddev = std::sqrt(sq / static_cast<double>(n));
        const double gain = static_cast<double>(style.scale[static_cast<std::size_t>(c)]) / (stddev + kAdaInEpsilon);
        const double shift = style.bias[static_cast<std::size_t>(c)];
        auto dst = out.channel(c);
        for (std::size_t i = 0; i < n; ++i) dst[i] = static_cast<float>((in[i] - mean) * gain + shift);
    }
    return out;
}

FeatureMap apply_style(const GeneratorModel& model, const FeatureMap& features, const LatentCode& code) {
    require(features.layer == code.layer, "apply_style: feature layer " + std::to_string(features.layer) +
                                              " != code layer " + std::to_string(code.layer));
    check_layer_range(model, features.layer, "apply_style");
    check_shape(model, features, "apply_style");
    return apply_style(features, model.style_params(code));
}

FeatureMap forward_layer(const GeneratorModel& model, const FeatureMap& styled, int layer) {
    check_layer_range(model, layer, "forward_layer");
    require(styled.layer == layer, "forward_layer: features belong to layer " + std::to_string(styled.layer));
    check_shape(model, styled, "forward_layer");
    const LayerSpec& next = model.spec(layer + 1);
    const LayerWeights& w = model.weights(layer);
    const int cin = styled.channels;
    const int cout = next.channels;
    const int h = styled.height;
    const int wd = styled.width;

    FeatureMap conv(layer + 1, cout, h, wd);
    for (int co = 0; co < cout; ++co) {
        auto dst = conv.channel(co);
        std::fill(dst.begin(), dst.end(), w.conv_bias[static_cast<std::size_t>(co)]);
        for (int ci = 0; ci < cin; ++ci) {
            const auto src = styled.channel(ci);
            const float* k = w.conv_weight.data() + (static_cast<std::size_t>(co) * cin + ci) * 9;
            for (int ky = 0; ky < 3; ++ky) {
                for (int kx = 0; kx < 3; ++kx) {
                    const float weight = k[ky * 3 + kx];
                    const int dy = ky - 1;
                    const int dx = kx - 1;
                    const int x0 = std::max(0, -dx);
                    const int x1 = std::min(wd, wd - dx);
                    for (int y = std::max(0, -dy); y < std::min(h, h - dy); ++y) {
                        float* out_row = dst.data() + static_cast<std::size_t>(y) * wd;
                        const float* in_row = src.data() + static_cast<std::size_t>(y + dy) * wd + dx;
                        for (int x = x0; x < x1; ++x) out_row[x] += weight * in_row[x];
                    }
                }
            }
        }
        for (auto& v : dst) v = v > 0.0f ? v : 0.2f * v;
    }
    if (next.height == h && next.width == wd) return conv;

    const int factor = next.height / h;
    FeatureMap up(layer + 1, cout, next.height, next.width);
    for (int c = 0; c < cout; ++c) {
        for (int y = 0; y < next.height; ++y) {
            for (int x = 0; x < next.width; ++x) up.at(c, y, x) = conv.at(c, y / factor, x / factor);
        }
    }
    return up;
}

Image render_rgb(const GeneratorModel& model, const FeatureMap& final_features) {
    require(final_features.layer == model.layer_count() + 1, "render_rgb: expects post-last-layer features");
    check_shape(model, final_features, "render_rgb");
    if (!all_finite(std::span<const float>(final_features.data))) {
        throw Error(ErrorKind::Numeric, "render_rgb: non-finite features");
    }
    Image img(final_features.height, final_features.width);
    const auto& pw = model.rgb_weight();
    const auto& pb = model.rgb_bias();
    const std::size_t n = final_features.plane_size();
    for (int k = 0; k < 3; ++k) {
        std::vector<double> acc(n, static_cast<double>(pb[static_cast<std::size_t>(k)]));
        for (int c = 0; c < final_features.channels; ++c) {
            const double weight = pw[static_cast<std::size_t>(k) * final_features.channels + c];
            const auto src = final_features.channel(c);
            for (std::size_t i = 0; i < n; ++i) acc[i] += weight * src[i];
        }
        float* dst = img.data.data() + static_cast<std::size_t>(k) * n;
        for (std::size_t i = 0; i < n; ++i) dst[i] = static_cast<float>(0.5 + 0.5 * std::tanh(acc[i]));
    }
    return img;
}

void validate_codes(const GeneratorModel& model, std::span<const LatentCode> codes) {
    if (static_cast<int>(codes.size()) != model.layer_count()) {
        contract_error("expected " + std::to_string(model.layer_count()) + " latent codes, got " +
                       std::to_string(codes.size()));
    }
    for (int l = 1; l <= model.layer_count(); ++l) {
        const auto& code = codes[static_cast<std::size_t>(l - 1)];
        require(code.layer == l, "latent code " + std::to_string(l) + " is tagged with layer " +
                                     std::to_string(code.layer));
        require(static_cast<int>(code.values.size()) == model.spec(l).style_dim,
                "latent code of layer " + std::to_string(l) + " has the wrong dimension");
        if (!all_finite(std::span<const double>(code.values))) {
            throw Error(ErrorKind::Numeric, "latent code of layer " + std::to_string(l) + " is not finite");
        }
    }
}

std::vector<FeatureMap> trace_features(const GeneratorModel& model, std::span<const LatentCode> codes, int upto) {
    validate_codes(model, codes);
    require(upto >= 1 && upto <= model.layer_count() + 1, "trace_features: layer out of range");
    std::vector<FeatureMap> out;
    out.push_back(model.constant_input());
    for (int l = 1; l < upto; ++l) {
        out.push_back(forward_layer(model, apply_style(model, out.back(), codes[static_cast<std::size_t>(l - 1)]), l));
    }
    return out;
}

Image synthesize(const GeneratorModel& model, std::span<const LatentCode> codes) {
    validate_codes(model, codes);
    FeatureMap f = model.constant_input();
    for (int l = 1; l <= model.layer_count(); ++l) {
        f = forward_layer(model, apply_style(model, f, codes[static_cast<std::size_t>(l - 1)]), l);
    }
    return render_rgb(model, f);
}

LatentCode sample_code(const GeneratorModel& model, std::uint64_t seed, int layer) {
    check_layer_range(model, layer, "sample_code");
    detail::NormalSource rng(detail::splitmix64(seed ^ 0x5EEDC0DEULL));
    LatentCode code{layer, std::vector<double>(static_cast<std::size_t>(model.spec(layer).style_dim))};
    for (auto& v : code.values) v = rng.next();
    return code;
}

std::vector<LatentCode> sample_codes(const GeneratorModel& model, std::uint64_t seed) {
    std::vector<LatentCode> codes;
    for (int l = 1; l <= model.layer_count(); ++l) codes.push_back(sample_code(model, seed, l));
    return codes;
}

} // namespace logan
