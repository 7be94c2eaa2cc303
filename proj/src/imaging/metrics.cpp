#include "imaging/metrics.hpp"

#include "common/error.hpp"
#include "imaging/color.hpp"

#include <cmath>

namespace cfe::img {

namespace {

void check_dims(const char* op, const Image& a, const Image& b,
                const std::vector<std::uint8_t>& mask) {
    if (a.width != b.width || a.height != b.height)
        throw Error::usage(std::string(op) + ": image dimensions differ, " +
                           std::to_string(a.width) + "x" + std::to_string(a.height) + " vs " +
                           std::to_string(b.width) + "x" + std::to_string(b.height));
    if (!mask.empty() && mask.size() != static_cast<std::size_t>(a.width) * a.height)
        throw Error::usage(std::string(op) + ": mask size does not match image");
}

inline double luma601(const Image& im, int x, int y) {
    return 0.299 * im.at(x, y, 0) + 0.587 * im.at(x, y, 1) + 0.114 * im.at(x, y, 2);
}

} // namespace

double lab_l2_error(const Image& a, const Image& b, const std::vector<std::uint8_t>& mask) {
    check_dims("lab_l2_error", a, b, mask);
    double acc = 0.0;
    std::size_t count = 0;
    for (int y = 0; y < a.height; ++y)
        for (int x = 0; x < a.width; ++x) {
            if (!mask.empty() && !mask[static_cast<std::size_t>(y) * a.width + x])
                continue;
            const auto la = srgb_to_lab(a.at(x, y, 0), a.at(x, y, 1), a.at(x, y, 2));
            const auto lb = srgb_to_lab(b.at(x, y, 0), b.at(x, y, 1), b.at(x, y, 2));
            const double d0 = la[0] - lb[0], d1 = la[1] - lb[1], d2 = la[2] - lb[2];
            acc += std::sqrt(d0 * d0 + d1 * d1 + d2 * d2);
            ++count;
        }
    if (count == 0)
        throw Error::usage("lab_l2_error: no valid pixels");
    return acc / static_cast<double>(count);
}

double psnr(const Image& a, const Image& b, const std::vector<std::uint8_t>& mask) {
    check_dims("psnr", a, b, mask);
    double acc = 0.0;
    std::size_t count = 0;
    for (int y = 0; y < a.height; ++y)
        for (int x = 0; x < a.width; ++x) {
            if (!mask.empty() && !mask[static_cast<std::size_t>(y) * a.width + x])
                continue;
            for (int c = 0; c < 3; ++c) {
                const double d = a.at(x, y, c) - b.at(x, y, c);
                acc += d * d;
            }
            count += 3;
        }
    if (count == 0)
        throw Error::usage("psnr: no valid pixels");
    const double mse = acc / static_cast<double>(count);
    if (mse < 1e-10)
        return 99.0;
    return 10.0 * std::log10(1.0 / mse);
}

double ssim(const Image& a, const Image& b, const std::vector<std::uint8_t>& mask) {
    check_dims("ssim", a, b, mask);
    constexpr int kWin = 11;
    constexpr int kHalf = kWin / 2;
    constexpr double kSigma = 1.5;
    constexpr double kC1 = 0.01 * 0.01; // (K1 * L)^2 with L = 1
    constexpr double kC2 = 0.03 * 0.03;

    double weights[kWin][kWin];
    double wsum = 0.0;
    for (int dy = 0; dy < kWin; ++dy)
        for (int dx = 0; dx < kWin; ++dx) {
            const double r2 = (dy - kHalf) * (dy - kHalf) + (dx - kHalf) * (dx - kHalf);
            weights[dy][dx] = std::exp(-r2 / (2.0 * kSigma * kSigma));
            wsum += weights[dy][dx];
        }
    for (int dy = 0; dy < kWin; ++dy)
        for (int dx = 0; dx < kWin; ++dx)
            weights[dy][dx] /= wsum;

    double acc = 0.0;
    std::size_t windows = 0;
    for (int cy = kHalf; cy + kHalf < a.height; ++cy) {
        for (int cx = kHalf; cx + kHalf < a.width; ++cx) {
            if (!mask.empty()) {
                bool ok = true;
                for (int dy = -kHalf; dy <= kHalf && ok; ++dy)
                    for (int dx = -kHalf; dx <= kHalf; ++dx)
                        if (!mask[static_cast<std::size_t>(cy + dy) * a.width + cx + dx]) {
                            ok = false;
                            break;
                        }
                if (!ok)
                    continue;
            }
            double mx = 0.0, my = 0.0;
            for (int dy = -kHalf; dy <= kHalf; ++dy)
                for (int dx = -kHalf; dx <= kHalf; ++dx) {
                    const double w = weights[dy + kHalf][dx + kHalf];
                    mx += w * luma601(a, cx + dx, cy + dy);
                    my += w * luma601(b, cx + dx, cy + dy);
                }
            double vx = 0.0, vy = 0.0, cov = 0.0;
            for (int dy = -kHalf; dy <= kHalf; ++dy)
                for (int dx = -kHalf; dx <= kHalf; ++dx) {
                    const double w = weights[dy + kHalf][dx + kHalf];
                    const double da = luma601(a, cx + dx, cy + dy) - mx;
                    const double db = luma601(b, cx + dx, cy + dy) - my;
                    vx += w * (da * da);
                    vy += w * (db * db);
                    // grouped so the rounding path is symmetric in (a, b)
                    cov += w * (da * db);
                }
            acc += ((2.0 * mx * my + kC1) * (2.0 * cov + kC2)) /
                   ((mx * mx + my * my + kC1) * (vx + vy + kC2));
            ++windows;
        }
    }
    if (windows == 0)
        throw Error::data("ssim: valid region smaller than the 11x11 window");
    return acc / static_cast<double>(windows);
}

MetricsRecord compute_metrics(const Image& a, const Image& b,
                              const std::vector<std::uint8_t>& mask) {
    return MetricsRecord{lab_l2_error(a, b, mask), psnr(a, b, mask), ssim(a, b, mask)};
}

} // namespace cfe::img
