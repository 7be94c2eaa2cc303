#include "imaging/color.hpp"

#include <algorithm>
#include <cmath>

namespace cfe::img {

namespace {

inline double srgb_to_linear(double c) {
    return c <= 0.04045 ? c / 12.92 : std::pow((c + 0.055) / 1.055, 2.4);
}

// D65 reference white
constexpr double kXn = 0.95047, kYn = 1.0, kZn = 1.08883;

inline double lab_f(double t) {
    constexpr double delta = 6.0 / 29.0;
    constexpr double delta3 = delta * delta * delta;
    return t > delta3 ? std::cbrt(t) : t / (3.0 * delta * delta) + 4.0 / 29.0;
}

} // namespace

std::array<double, 3> srgb_to_lab(double r, double g, double b) {
    r = srgb_to_linear(std::clamp(r, 0.0, 1.0));
    g = srgb_to_linear(std::clamp(g, 0.0, 1.0));
    b = srgb_to_linear(std::clamp(b, 0.0, 1.0));

    const double x = 0.4124564 * r + 0.3575761 * g + 0.1804375 * b;
    const double y = 0.2126729 * r + 0.7151522 * g + 0.0721750 * b;
    const double z = 0.0193339 * r + 0.1191920 * g + 0.9503041 * b;

    const double fx = lab_f(x / kXn);
    const double fy = lab_f(y / kYn);
    const double fz = lab_f(z / kZn);

    return {116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)};
}

std::vector<double> srgb_to_lab(const Image& image) {
    std::vector<double> out(image.pix.size());
    const std::size_t n = image.pix.size() / 3;
    for (std::size_t i = 0; i < n; ++i) {
        const auto lab =
            srgb_to_lab(image.pix[3 * i], image.pix[3 * i + 1], image.pix[3 * i + 2]);
        out[3 * i] = lab[0];
        out[3 * i + 1] = lab[1];
        out[3 * i + 2] = lab[2];
    }
    return out;
}

} // namespace cfe::img
