#include "models/affine_fit.hpp"

#include "common/error.hpp"

#include <cmath>

namespace cfe::models {

namespace {

// Jacobi eigendecomposition of a symmetric 4x4; used only on the degenerate
// path, where plain elimination has no usable pivot.
void jacobi_eigen(double a[4][4], double vec[4][4], double val[4]) {
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j)
            vec[i][j] = i == j ? 1.0 : 0.0;
    for (int sweep = 0; sweep < 64; ++sweep) {
        double off = 0.0;
        for (int p = 0; p < 4; ++p)
            for (int q = p + 1; q < 4; ++q)
                off += a[p][q] * a[p][q];
        if (off < 1e-30)
            break;
        for (int p = 0; p < 4; ++p)
            for (int q = p + 1; q < 4; ++q) {
                if (std::fabs(a[p][q]) < 1e-300)
                    continue;
                const double theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                const double t = (theta >= 0 ? 1.0 : -1.0) /
                                 (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (int k = 0; k < 4; ++k) {
                    const double akp = a[k][p], akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for (int k = 0; k < 4; ++k) {
                    const double apk = a[p][k], aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for (int k = 0; k < 4; ++k) {
                    const double vkp = vec[k][p], vkq = vec[k][q];
                    vec[k][p] = c * vkp - s * vkq;
                    vec[k][q] = s * vkp + c * vkq;
                }
            }
    }
    for (int i = 0; i < 4; ++i)
        val[i] = a[i][i];
}

// Solve M x = r by elimination with partial pivoting; returns false when a
// pivot collapses (rank-deficient normal matrix).
bool solve4(const double m_in[4][4], const double r_in[4], double x[4]) {
    double a[4][5];
    double scale = 0.0;
    for (int i = 0; i < 4; ++i) {
        for (int j = 0; j < 4; ++j) {
            a[i][j] = m_in[i][j];
            scale = std::max(scale, std::fabs(m_in[i][j]));
        }
        a[i][4] = r_in[i];
    }
    if (scale == 0.0)
        return false;
    for (int col = 0; col < 4; ++col) {
        int piv = col;
        for (int row = col + 1; row < 4; ++row)
            if (std::fabs(a[row][col]) > std::fabs(a[piv][col]))
                piv = row;
        if (std::fabs(a[piv][col]) < 1e-12 * scale)
            return false;
        if (piv != col)
            for (int j = col; j < 5; ++j)
                std::swap(a[piv][j], a[col][j]);
        for (int row = col + 1; row < 4; ++row) {
            const double f = a[row][col] / a[col][col];
            for (int j = col; j < 5; ++j)
                a[row][j] -= f * a[col][j];
        }
    }
    for (int row = 3; row >= 0; --row) {
        double acc = a[row][4];
        for (int j = row + 1; j < 4; ++j)
            acc -= a[row][j] * x[j];
        x[row] = acc / a[row][row];
    }
    return true;
}

} // namespace

void AffineLsFit::add(const img::Image& raw, const img::Image& target,
                      const std::vector<std::uint8_t>& mask) {
    if (raw.width != target.width || raw.height != target.height)
        throw Error::usage("affine fit: image dimensions differ");
    if (!mask.empty() && mask.size() != static_cast<std::size_t>(raw.width) * raw.height)
        throw Error::usage("affine fit: mask size does not match image");
    const std::size_t n = raw.pix.size() / 3;
    for (std::size_t i = 0; i < n; ++i) {
        if (!mask.empty() && !mask[i])
            continue;
        const double z[4] = {raw.pix[3 * i], raw.pix[3 * i + 1], raw.pix[3 * i + 2], 1.0};
        for (int r = 0; r < 4; ++r)
            for (int c = 0; c < 4; ++c)
                m_[r][c] += z[r] * z[c];
        for (int a = 0; a < 3; ++a) {
            const double q = target.pix[3 * i + a] - raw.pix[3 * i + a];
            for (int r = 0; r < 4; ++r)
                rhs_[a][r] += z[r] * q;
        }
        samples_.insert(samples_.end(), {z[0], z[1], z[2], target.pix[3 * i] - raw.pix[3 * i],
                                         target.pix[3 * i + 1] - raw.pix[3 * i + 1],
                                         target.pix[3 * i + 2] - raw.pix[3 * i + 2]});
        ++count_;
    }
}

AffineFitResult AffineLsFit::solve() const {
    if (count_ < 4)
        throw Error::data("affine fit: need at least 4 valid pixels, got " +
                          std::to_string(count_));
    AffineFitResult res;

    double w[3][4];
    bool ok = true;
    for (int a = 0; a < 3 && ok; ++a)
        ok = solve4(m_, rhs_[a], w[a]);

    if (!ok) {
        // constant-color input: fall back to the pseudo-inverse solution
        res.degenerate = true;
        double a[4][4];
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 4; ++j)
                a[i][j] = m_[i][j];
        double vec[4][4], val[4];
        jacobi_eigen(a, vec, val);
        double vmax = 0.0;
        for (int i = 0; i < 4; ++i)
            vmax = std::max(vmax, std::fabs(val[i]));
        for (int ch = 0; ch < 3; ++ch) {
            double proj[4] = {0, 0, 0, 0};
            for (int k = 0; k < 4; ++k) {
                if (std::fabs(val[k]) <= 1e-12 * vmax)
                    continue;
                double dot = 0.0;
                for (int i = 0; i < 4; ++i)
                    dot += vec[i][k] * rhs_[ch][i];
                proj[k] = dot / val[k];
            }
            for (int i = 0; i < 4; ++i) {
                double acc = 0.0;
                for (int k = 0; k < 4; ++k)
                    acc += vec[i][k] * proj[k];
                w[ch][i] = acc;
            }
        }
    }

    double residual = 0.0;
    for (std::size_t i = 0; i < samples_.size(); i += 6) {
        const double* s = &samples_[i];
        for (int a = 0; a < 3; ++a) {
            const double d =
                w[a][0] * s[0] + w[a][1] * s[1] + w[a][2] * s[2] + w[a][3] - s[3 + a];
            residual += d * d;
        }
    }
    // per-element mean over 3 channels, matching the training objective
    res.loss = residual / (3.0 * static_cast<double>(count_));

    for (int a = 0; a < 3; ++a) {
        for (int c = 0; c < 3; ++c)
            res.map.weight[3 * a + c] = w[a][c];
        res.map.bias[a] = w[a][3];
    }
    return res;
}

AffineFitResult least_squares_affine_fit(const img::Image& raw, const img::Image& target,
                                         const std::vector<std::uint8_t>& mask) {
    AffineLsFit fit;
    fit.add(raw, target, mask);
    return fit.solve();
}

} // namespace cfe::models
