#include "support/oracles.hpp"

#include <cmath>

namespace oracle {

using cfe::nn::Shape;
using cfe::nn::Tensor;

Tensor conv2d_loops(const Tensor& x, const Tensor& w, const std::vector<double>& bias,
                    int stride, int padding) {
    const Shape& xs = x.shape();
    const Shape& ws = w.shape();
    const int k = ws.h;
    const int oh = (xs.h + 2 * padding - k) / stride + 1;
    const int ow = (xs.w + 2 * padding - k) / stride + 1;
    Tensor out = Tensor::zeros({xs.n, ws.n, oh, ow});
    for (int n = 0; n < xs.n; ++n)
        for (int oc = 0; oc < ws.n; ++oc)
            for (int oy = 0; oy < oh; ++oy)
                for (int ox = 0; ox < ow; ++ox) {
                    double acc = bias.empty() ? 0.0 : bias[oc];
                    for (int ic = 0; ic < xs.c; ++ic)
                        for (int ky = 0; ky < k; ++ky)
                            for (int kx = 0; kx < k; ++kx) {
                                const int iy = oy * stride - padding + ky;
                                const int ix = ox * stride - padding + kx;
                                if (iy < 0 || iy >= xs.h || ix < 0 || ix >= xs.w)
                                    continue;
                                acc += x.at(n, ic, iy, ix) * w.at(oc, ic, ky, kx);
                            }
                    out.at(n, oc, oy, ox) = acc;
                }
    return out;
}

Tensor linear_loops(const Tensor& x, const Tensor& w, const std::vector<double>& bias) {
    const int n = x.shape().n, f = x.shape().c, o = w.shape().n;
    Tensor out = Tensor::zeros({n, o, 1, 1});
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < o; ++j) {
            double acc = bias.empty() ? 0.0 : bias[j];
            for (int q = 0; q < f; ++q)
                acc += x.at(i, q, 0, 0) * w.at(j, q, 0, 0);
            out.at(i, j, 0, 0) = acc;
        }
    return out;
}

namespace {

// y[c][p] for a 1x1 conv with weight (out,in,1,1) at spatial position p
std::vector<std::vector<double>> conv1x1_positions(const Tensor& x, const Tensor& w,
                                                   const std::vector<double>& b) {
    const Shape& xs = x.shape();
    const int m = xs.h * xs.w;
    const int out_c = w.shape().n;
    std::vector<std::vector<double>> y(out_c, std::vector<double>(m, 0.0));
    for (int oc = 0; oc < out_c; ++oc)
        for (int p = 0; p < m; ++p) {
            double acc = b.empty() ? 0.0 : b[oc];
            for (int ic = 0; ic < xs.c; ++ic)
                acc += w.at(oc, ic, 0, 0) * x.at(0, ic, p / xs.w, p % xs.w);
            y[oc][p] = acc;
        }
    return y;
}

} // namespace

std::vector<double> nonlocal_attention_rows(const Tensor& x, const Tensor& theta_w,
                                            const std::vector<double>& theta_b,
                                            const Tensor& phi_w,
                                            const std::vector<double>& phi_b) {
    const Shape& xs = x.shape();
    const int m = xs.h * xs.w;
    const int half = theta_w.shape().n;
    const auto th = conv1x1_positions(x, theta_w, theta_b);
    const auto ph = conv1x1_positions(x, phi_w, phi_b);
    std::vector<double> attn(static_cast<std::size_t>(m) * m, 0.0);
    for (int i = 0; i < m; ++i) {
        double mx = -1e300;
        std::vector<double> row(m);
        for (int j = 0; j < m; ++j) {
            double dot = 0.0;
            for (int c = 0; c < half; ++c)
                dot += th[c][i] * ph[c][j];
            row[j] = dot;
            mx = std::max(mx, dot);
        }
        double s = 0.0;
        for (int j = 0; j < m; ++j) {
            row[j] = std::exp(row[j] - mx);
            s += row[j];
        }
        for (int j = 0; j < m; ++j)
            attn[static_cast<std::size_t>(i) * m + j] = row[j] / s;
    }
    return attn;
}

Tensor nonlocal_loops(const Tensor& x, const Tensor& theta_w, const std::vector<double>& theta_b,
                      const Tensor& phi_w, const std::vector<double>& phi_b, const Tensor& g_w,
                      const std::vector<double>& g_b, const Tensor& wz_w,
                      const std::vector<double>& wz_b) {
    const Shape& xs = x.shape();
    const int m = xs.h * xs.w;
    const int half = g_w.shape().n;
    const auto attn = nonlocal_attention_rows(x, theta_w, theta_b, phi_w, phi_b);
    const auto g = conv1x1_positions(x, g_w, g_b);

    // y_i = sum_j attn[i][j] g_j, then z = w_z y + x
    std::vector<std::vector<double>> y(half, std::vector<double>(m, 0.0));
    for (int c = 0; c < half; ++c)
        for (int i = 0; i < m; ++i) {
            double acc = 0.0;
            for (int j = 0; j < m; ++j)
                acc += attn[static_cast<std::size_t>(i) * m + j] * g[c][j];
            y[c][i] = acc;
        }

    Tensor out = Tensor::zeros(xs);
    for (int oc = 0; oc < xs.c; ++oc)
        for (int p = 0; p < m; ++p) {
            double acc = wz_b.empty() ? 0.0 : wz_b[oc];
            for (int c = 0; c < half; ++c)
                acc += wz_w.at(oc, c, 0, 0) * y[c][p];
            out.at(0, oc, p / xs.w, p % xs.w) = acc + x.at(0, oc, p / xs.w, p % xs.w);
        }
    return out;
}

std::array<double, 3> srgb_to_lab_reference(double r, double g, double b) {
    auto lin = [](double u) {
        if (u < 0.0)
            u = 0.0;
        if (u > 1.0)
            u = 1.0;
        return u <= 0.04045 ? u / 12.92 : std::pow((u + 0.055) / 1.055, 2.4);
    };
    const double rl = lin(r), gl = lin(g), bl = lin(b);
    // same standard, spelled out independently
    const double X = (0.4124564 * rl + 0.3575761 * gl + 0.1804375 * bl) / 0.95047;
    const double Y = 0.2126729 * rl + 0.7151522 * gl + 0.0721750 * bl;
    const double Z = (0.0193339 * rl + 0.1191920 * gl + 0.9503041 * bl) / 1.08883;
    auto f = [](double t) {
        return t > 0.008856451679035631 ? std::pow(t, 1.0 / 3.0)
                                        : 7.787037037037035 * t + 16.0 / 116.0;
    };
    const double fx = f(X), fy = f(Y), fz = f(Z);
    return {116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)};
}

double ssim_loops(const cfe::img::Image& a, const cfe::img::Image& b) {
    const int half = 5;
    double w[11][11], wsum = 0.0;
    for (int i = 0; i < 11; ++i)
        for (int j = 0; j < 11; ++j) {
            w[i][j] = std::exp(-((i - 5.0) * (i - 5.0) + (j - 5.0) * (j - 5.0)) / 4.5);
            wsum += w[i][j];
        }
    for (int i = 0; i < 11; ++i)
        for (int j = 0; j < 11; ++j)
            w[i][j] /= wsum;

    auto luma = [](const cfe::img::Image& im, int x, int y) {
        return 0.299 * im.at(x, y, 0) + 0.587 * im.at(x, y, 1) + 0.114 * im.at(x, y, 2);
    };

    double acc = 0.0;
    long count = 0;
    for (int cy = half; cy + half < a.height; ++cy)
        for (int cx = half; cx + half < a.width; ++cx) {
            double ma = 0.0, mb = 0.0;
            for (int dy = -half; dy <= half; ++dy)
                for (int dx = -half; dx <= half; ++dx) {
                    ma += w[dy + half][dx + half] * luma(a, cx + dx, cy + dy);
                    mb += w[dy + half][dx + half] * luma(b, cx + dx, cy + dy);
                }
            double va = 0.0, vb = 0.0, cab = 0.0;
            for (int dy = -half; dy <= half; ++dy)
                for (int dx = -half; dx <= half; ++dx) {
                    const double da = luma(a, cx + dx, cy + dy) - ma;
                    const double db = luma(b, cx + dx, cy + dy) - mb;
                    va += w[dy + half][dx + half] * da * da;
                    vb += w[dy + half][dx + half] * db * db;
                    cab += w[dy + half][dx + half] * da * db;
                }
            const double c1 = 1e-4, c2 = 9e-4;
            acc += ((2 * ma * mb + c1) * (2 * cab + c2)) /
                   ((ma * ma + mb * mb + c1) * (va + vb + c2));
            ++count;
        }
    return acc / count;
}

double lab_l2_loops(const cfe::img::Image& a, const cfe::img::Image& b) {
    double acc = 0.0;
    for (int y = 0; y < a.height; ++y)
        for (int x = 0; x < a.width; ++x) {
            const auto la = srgb_to_lab_reference(a.at(x, y, 0), a.at(x, y, 1), a.at(x, y, 2));
            const auto lb = srgb_to_lab_reference(b.at(x, y, 0), b.at(x, y, 1), b.at(x, y, 2));
            acc += std::sqrt((la[0] - lb[0]) * (la[0] - lb[0]) +
                             (la[1] - lb[1]) * (la[1] - lb[1]) +
                             (la[2] - lb[2]) * (la[2] - lb[2]));
        }
    return acc / (static_cast<double>(a.width) * a.height);
}

} // namespace oracle
