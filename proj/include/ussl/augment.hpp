#pragma once

// Weak and strong augmentation policies for feature vectors and small grayscale
// images. Inputs are assumed standardized, so 0 is the fill value for pixels
// uncovered by a geometric transform.

#include "ussl/datasets.hpp"
#include "ussl/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace ussl {

enum class TransformKind {
    identity,
    // vectors
    jitter,      // a = sigma
    dropout,     // a = per-coordinate drop probability
    rotate,      // a = max angle (radians) in a random coordinate plane
    scale,       // a = low factor, b = high factor
    // images
    flip,                 // a = probability of horizontal flip
    shift,                // a = max shift as a fraction of the side
    translate,            // a = max shift as a fraction of the side
    cutout,               // a = square side as a fraction of the shorter side
    brightness_contrast,  // a = max brightness offset, b = max relative contrast change
    image_rotate,         // a = max angle (degrees)
};

struct Transform {
    TransformKind kind = TransformKind::identity;
    double a = 0.0;
    double b = 0.0;

    friend bool operator==(const Transform&, const Transform&) = default;
};

inline const char* transform_name(TransformKind k) {
    switch (k) {
        case TransformKind::identity: return "identity";
        case TransformKind::jitter: return "jitter";
        case TransformKind::dropout: return "dropout";
        case TransformKind::rotate: return "rotate";
        case TransformKind::scale: return "scale";
        case TransformKind::flip: return "flip";
        case TransformKind::shift: return "shift";
        case TransformKind::translate: return "translate";
        case TransformKind::cutout: return "cutout";
        case TransformKind::brightness_contrast: return "brightness_contrast";
        case TransformKind::image_rotate: return "image_rotate";
    }
    return "?";
}

inline std::optional<TransformKind> parse_transform_kind(const std::string& name) {
    for (auto k : {TransformKind::identity, TransformKind::jitter, TransformKind::dropout, TransformKind::rotate,
                   TransformKind::scale, TransformKind::flip, TransformKind::shift, TransformKind::translate,
                   TransformKind::cutout, TransformKind::brightness_contrast, TransformKind::image_rotate}) {
        if (name == transform_name(k)) return k;
    }
    return std::nullopt;
}

namespace detail {

inline double image_at(const std::vector<double>& img, const ImageShape& s, long r, long c) {
    if (r < 0 || c < 0 || r >= static_cast<long>(s.rows) || c >= static_cast<long>(s.cols)) return 0.0;
    return img[static_cast<std::size_t>(r) * s.cols + static_cast<std::size_t>(c)];
}

inline std::vector<double> shift_image(const std::vector<double>& img, const ImageShape& s, long dr, long dc) {
    std::vector<double> out(img.size(), 0.0);
    for (long r = 0; r < static_cast<long>(s.rows); ++r)
        for (long c = 0; c < static_cast<long>(s.cols); ++c)
            out[static_cast<std::size_t>(r) * s.cols + static_cast<std::size_t>(c)] = image_at(img, s, r - dr, c - dc);
    return out;
}

inline long random_offset(double fraction, std::size_t side, Rng& rng) {
    const long max_px = static_cast<long>(std::floor(fraction * static_cast<double>(side)));
    if (max_px <= 0) return 0;
    return std::uniform_int_distribution<long>(-max_px, max_px)(rng);
}

}  // namespace detail

/// Horizontal mirror of a row-major image.
inline std::vector<double> flip_horizontal(const std::vector<double>& img, const ImageShape& s) {
    std::vector<double> out(img.size());
    for (std::size_t r = 0; r < s.rows; ++r)
        for (std::size_t c = 0; c < s.cols; ++c) out[r * s.cols + c] = img[r * s.cols + (s.cols - 1 - c)];
    return out;
}

/// Applies one transform. Image transforms require `image`; vector transforms ignore it.
inline std::vector<double> apply_transform(const Transform& t, const std::vector<double>& x,
                                           const std::optional<ImageShape>& image, Rng& rng) {
    auto need_image = [&]() -> const ImageShape& {
        if (!image) throw std::invalid_argument(std::string("augment: transform '") + transform_name(t.kind) + "' needs image input");
        return *image;
    };
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    switch (t.kind) {
        case TransformKind::identity: return x;

        case TransformKind::jitter: {
            if (t.a == 0.0) return x;
            std::normal_distribution<double> gauss(0.0, t.a);
            auto out = x;
            for (auto& v : out) v += gauss(rng);
            return out;
        }

        case TransformKind::dropout: {
            auto out = x;
            for (auto& v : out)
                if (unit(rng) < t.a) v = 0.0;
            return out;
        }

        case TransformKind::rotate: {
            if (x.size() < 2) return x;
            std::uniform_int_distribution<std::size_t> pick(0, x.size() - 1);
            const std::size_t i = pick(rng);
            std::size_t j = pick(rng);
            while (j == i) j = pick(rng);
            const double theta = std::uniform_real_distribution<double>(-t.a, t.a)(rng);
            auto out = x;
            out[i] = std::cos(theta) * x[i] - std::sin(theta) * x[j];
            out[j] = std::sin(theta) * x[i] + std::cos(theta) * x[j];
            return out;
        }

        case TransformKind::scale: {
            const double factor = t.a == t.b ? t.a : std::uniform_real_distribution<double>(t.a, t.b)(rng);
            auto out = x;
            for (auto& v : out) v *= factor;
            return out;
        }

        case TransformKind::flip: {
            const auto& s = need_image();
            return unit(rng) < t.a ? flip_horizontal(x, s) : x;
        }

        case TransformKind::shift:
        case TransformKind::translate: {
            const auto& s = need_image();
            const long dr = detail::random_offset(t.a, s.rows, rng);
            const long dc = detail::random_offset(t.a, s.cols, rng);
            return detail::shift_image(x, s, dr, dc);
        }

        case TransformKind::cutout: {
            const auto& s = need_image();
            const auto side = static_cast<std::size_t>(std::floor(t.a * static_cast<double>(std::min(s.rows, s.cols))));
            auto out = x;
            if (side == 0) return out;
            const auto r0 = std::uniform_int_distribution<std::size_t>(0, s.rows - 1)(rng);
            const auto c0 = std::uniform_int_distribution<std::size_t>(0, s.cols - 1)(rng);
            // The square is centred at (r0, c0) and clipped to the image.
            const std::size_t half = side / 2;
            const std::size_t r_begin = r0 >= half ? r0 - half : 0, c_begin = c0 >= half ? c0 - half : 0;
            for (std::size_t r = r_begin; r < std::min(s.rows, r_begin + side); ++r)
                for (std::size_t c = c_begin; c < std::min(s.cols, c_begin + side); ++c) out[r * s.cols + c] = 0.0;
            return out;
        }

        case TransformKind::brightness_contrast: {
            need_image();
            const double shift = std::uniform_real_distribution<double>(-t.a, t.a)(rng);
            const double contrast = 1.0 + std::uniform_real_distribution<double>(-t.b, t.b)(rng);
            auto out = x;
            for (auto& v : out) v = contrast * v + shift;
            return out;
        }

        case TransformKind::image_rotate: {
            const auto& s = need_image();
            const double theta = std::uniform_real_distribution<double>(-t.a, t.a)(rng) * std::numbers::pi / 180.0;
            const double cr = (static_cast<double>(s.rows) - 1.0) / 2.0, cc = (static_cast<double>(s.cols) - 1.0) / 2.0;
            const double ct = std::cos(theta), st = std::sin(theta);
            std::vector<double> out(x.size(), 0.0);
            for (std::size_t r = 0; r < s.rows; ++r) {
                for (std::size_t c = 0; c < s.cols; ++c) {
                    // inverse map with bilinear sampling
                    const double y = static_cast<double>(r) - cr, xx = static_cast<double>(c) - cc;
                    const double sr = ct * y + st * xx + cr, sc = -st * y + ct * xx + cc;
                    const long r0 = static_cast<long>(std::floor(sr)), c0 = static_cast<long>(std::floor(sc));
                    const double fr = sr - static_cast<double>(r0), fc = sc - static_cast<double>(c0);
                    out[r * s.cols + c] = (1 - fr) * (1 - fc) * detail::image_at(x, s, r0, c0) +
                                          (1 - fr) * fc * detail::image_at(x, s, r0, c0 + 1) +
                                          fr * (1 - fc) * detail::image_at(x, s, r0 + 1, c0) +
                                          fr * fc * detail::image_at(x, s, r0 + 1, c0 + 1);
                }
            }
            return out;
        }
    }
    return x;
}

enum class PolicyKind { weak, strong };

/// Weak policies apply every transform in order; strong policies apply exactly
/// one transform drawn uniformly per call.
struct AugPolicy {
    PolicyKind kind = PolicyKind::weak;
    std::vector<Transform> transforms;
    std::optional<ImageShape> image;

    [[nodiscard]] std::size_t choose(Rng& rng) const {
        if (transforms.empty()) throw std::invalid_argument("augment: empty transform set");
        return std::uniform_int_distribution<std::size_t>(0, transforms.size() - 1)(rng);
    }

    [[nodiscard]] std::vector<double> operator()(const std::vector<double>& x, Rng& rng) const {
        if (kind == PolicyKind::strong) return apply_transform(transforms[choose(rng)], x, image, rng);
        auto out = x;
        for (const auto& t : transforms) out = apply_transform(t, out, image, rng);
        return out;
    }
};

/// Intensities for the default policies.
struct AugmentConfig {
    double weak_jitter = 0.02;
    std::vector<TransformKind> strong_set;  // empty selects the default set for the input kind
    double strong_jitter = 0.3;
    double dropout_rate = 0.2;
    double rotate_max = 0.5;  // radians
    double scale_low = 0.5;
    double scale_high = 1.5;
    double flip_prob = 0.5;
    double weak_shift = 0.125;
    double translate = 0.3;
    double cutout = 0.5;
    double brightness = 0.5;
    double contrast = 0.5;
    double image_rotate_deg = 15.0;

    friend bool operator==(const AugmentConfig&, const AugmentConfig&) = default;
};

inline std::vector<TransformKind> default_strong_set(bool image) {
    if (image) return {TransformKind::translate, TransformKind::cutout, TransformKind::brightness_contrast, TransformKind::image_rotate};
    return {TransformKind::jitter, TransformKind::dropout, TransformKind::rotate, TransformKind::scale};
}

inline Transform make_transform(TransformKind k, const AugmentConfig& cfg) {
    switch (k) {
        case TransformKind::identity: return {k};
        case TransformKind::jitter: return {k, cfg.strong_jitter};
        case TransformKind::dropout: return {k, cfg.dropout_rate};
        case TransformKind::rotate: return {k, cfg.rotate_max};
        case TransformKind::scale: return {k, cfg.scale_low, cfg.scale_high};
        case TransformKind::flip: return {k, cfg.flip_prob};
        case TransformKind::shift: return {k, cfg.weak_shift};
        case TransformKind::translate: return {k, cfg.translate};
        case TransformKind::cutout: return {k, cfg.cutout};
        case TransformKind::brightness_contrast: return {k, cfg.brightness, cfg.contrast};
        case TransformKind::image_rotate: return {k, cfg.image_rotate_deg};
    }
    return {k};
}

inline AugPolicy weak_policy(const AugmentConfig& cfg, const std::optional<ImageShape>& image) {
    AugPolicy p{PolicyKind::weak, {}, image};
    if (image) {
        p.transforms = {{TransformKind::flip, cfg.flip_prob}, {TransformKind::shift, cfg.weak_shift}};
    } else {
        p.transforms = {{TransformKind::jitter, cfg.weak_jitter}};
    }
    return p;
}

inline AugPolicy strong_policy(const AugmentConfig& cfg, const std::optional<ImageShape>& image) {
    AugPolicy p{PolicyKind::strong, {}, image};
    const auto set = cfg.strong_set.empty() ? default_strong_set(image.has_value()) : cfg.strong_set;
    for (auto k : set) p.transforms.push_back(make_transform(k, cfg));
    if (p.transforms.empty()) throw std::invalid_argument("augment: empty strong transform set");
    return p;
}

inline std::vector<double> weak_augment(const AugPolicy& weak, const std::vector<double>& x, Rng& rng) { return weak(x, rng); }
inline std::vector<double> strong_augment(const AugPolicy& strong, const std::vector<double>& x, Rng& rng) { return strong(x, rng); }

}  // namespace ussl
