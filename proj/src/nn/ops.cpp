#include "nn/ops.hpp"

#include "common/error.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

namespace cfe::nn {

namespace {

bool wants_grad(Tape* tape, std::initializer_list<const Tensor*> inputs) {
    if (!tape)
        return false;
    for (const Tensor* t : inputs)
        if (t->defined() && t->requires_grad())
            return true;
    return false;
}

void check_same_shape(const char* op, const Tensor& a, const Tensor& b) {
    if (!(a.shape() == b.shape()))
        throw Error::usage(std::string(op) + ": shape mismatch " + a.shape().str() + " vs " +
                           b.shape().str());
}

} // namespace

Tensor conv2d(Tape* tape, const Tensor& input, const Tensor& weight, const Tensor& bias,
              int stride, int padding) {
    const Shape& xs = input.shape();
    const Shape& ws = weight.shape();
    if (ws.h != ws.w)
        throw Error::usage("conv2d: kernel must be square, got " + ws.str());
    if (xs.c != ws.c)
        throw Error::usage("conv2d: input channels " + std::to_string(xs.c) +
                           " != weight in_channels " + std::to_string(ws.c));
    if (bias.defined() && bias.numel() != static_cast<std::size_t>(ws.n))
        throw Error::usage("conv2d: bias length " + std::to_string(bias.numel()) +
                           " != out_channels " + std::to_string(ws.n));
    if (stride != 1 && stride != 2)
        throw Error::usage("conv2d: stride must be 1 or 2, got " + std::to_string(stride));
    if (padding < 0)
        throw Error::usage("conv2d: padding must be >= 0");

    const int k = ws.h, p = padding, s = stride;
    const int oh = (xs.h + 2 * p - k) / s + 1;
    const int ow = (xs.w + 2 * p - k) / s + 1;
    if (xs.h + 2 * p - k < 0 || xs.w + 2 * p - k < 0 || oh < 1 || ow < 1)
        throw Error::usage("conv2d: non-positive output size for input " + xs.str() + ", kernel " +
                           std::to_string(k) + ", stride " + std::to_string(s) + ", padding " +
                           std::to_string(p));

    Tensor out = Tensor::zeros({xs.n, ws.n, oh, ow});
    const double* x = input.data();
    const double* w = weight.data();
    const double* b = bias.defined() ? bias.data() : nullptr;
    double* y = out.data();

    const std::size_t x_chan = static_cast<std::size_t>(xs.h) * xs.w;
    for (int n = 0; n < xs.n; ++n) {
        const double* xn = x + static_cast<std::size_t>(n) * xs.c * x_chan;
        for (int oc = 0; oc < ws.n; ++oc) {
            const double* wc = w + static_cast<std::size_t>(oc) * ws.c * k * k;
            const double bv = b ? b[oc] : 0.0;
            for (int oy = 0; oy < oh; ++oy) {
                for (int ox = 0; ox < ow; ++ox) {
                    double acc = bv;
                    for (int ic = 0; ic < xs.c; ++ic) {
                        const double* xc = xn + ic * x_chan;
                        const double* wk = wc + static_cast<std::size_t>(ic) * k * k;
                        for (int ky = 0; ky < k; ++ky) {
                            const int iy = oy * s - p + ky;
                            if (iy < 0 || iy >= xs.h)
                                continue;
                            const double* xrow = xc + static_cast<std::size_t>(iy) * xs.w;
                            const double* wrow = wk + static_cast<std::size_t>(ky) * k;
                            for (int kx = 0; kx < k; ++kx) {
                                const int ix = ox * s - p + kx;
                                if (ix < 0 || ix >= xs.w)
                                    continue;
                                acc += xrow[ix] * wrow[kx];
                            }
                        }
                    }
                    *y++ = acc;
                }
            }
        }
    }

    if (wants_grad(tape, {&input, &weight, &bias})) {
        out.set_requires_grad(true);
        Tensor xi = input, wi = weight, bi = bias, yo = out;
        tape->record([xi, wi, bi, yo, s, p, k]() mutable {
            const Shape& xs = xi.shape();
            const Shape& ws = wi.shape();
            const Shape& ys = yo.shape();
            const double* g = yo.grad();
            const double* x = xi.data();
            const double* w = wi.data();
            const bool need_x = xi.requires_grad();
            const bool need_w = wi.requires_grad();
            const bool need_b = bi.defined() && bi.requires_grad();
            double* gx = need_x ? xi.grad() : nullptr;
            double* gw = need_w ? wi.grad() : nullptr;
            double* gb = need_b ? bi.grad() : nullptr;
            const std::size_t x_chan = static_cast<std::size_t>(xs.h) * xs.w;
            for (int n = 0; n < xs.n; ++n) {
                const std::size_t xoff = static_cast<std::size_t>(n) * xs.c * x_chan;
                for (int oc = 0; oc < ws.n; ++oc) {
                    const std::size_t woff = static_cast<std::size_t>(oc) * ws.c * k * k;
                    const double* grow =
                        g + (static_cast<std::size_t>(n) * ys.c + oc) * ys.h * ys.w;
                    double gbacc = 0.0;
                    for (int oy = 0; oy < ys.h; ++oy) {
                        for (int ox = 0; ox < ys.w; ++ox) {
                            const double gv = grow[static_cast<std::size_t>(oy) * ys.w + ox];
                            if (gv == 0.0)
                                continue;
                            gbacc += gv;
                            for (int ic = 0; ic < xs.c; ++ic) {
                                for (int ky = 0; ky < k; ++ky) {
                                    const int iy = oy * s - p + ky;
                                    if (iy < 0 || iy >= xs.h)
                                        continue;
                                    for (int kx = 0; kx < k; ++kx) {
                                        const int ix = ox * s - p + kx;
                                        if (ix < 0 || ix >= xs.w)
                                            continue;
                                        const std::size_t xidx =
                                            xoff + ic * x_chan +
                                            static_cast<std::size_t>(iy) * xs.w + ix;
                                        const std::size_t widx =
                                            woff + (static_cast<std::size_t>(ic) * k + ky) * k +
                                            kx;
                                        if (gw)
                                            gw[widx] += gv * x[xidx];
                                        if (gx)
                                            gx[xidx] += gv * w[widx];
                                    }
                                }
                            }
                        }
                    }
                    if (gb)
                        gb[oc] += gbacc;
                }
            }
        });
    }
    return out;
}

Tensor conv2d_transpose(Tape* tape, const Tensor& input, const Tensor& weight, const Tensor& bias,
                        int stride, int padding) {
    const Shape& zs = input.shape();
    const Shape& ws = weight.shape();
    if (ws.h != ws.w)
        throw Error::usage("conv2d_transpose: kernel must be square, got " + ws.str());
    if (zs.c != ws.n)
        throw Error::usage("conv2d_transpose: input channels " + std::to_string(zs.c) +
                           " != weight out_channels " + std::to_string(ws.n));
    if (bias.defined() && bias.numel() != static_cast<std::size_t>(ws.c))
        throw Error::usage("conv2d_transpose: bias length " + std::to_string(bias.numel()) +
                           " != out_channels " + std::to_string(ws.c));
    if (stride != 1 && stride != 2)
        throw Error::usage("conv2d_transpose: stride must be 1 or 2");
    if (padding < 0)
        throw Error::usage("conv2d_transpose: padding must be >= 0");

    const int k = ws.h, s = stride, p = padding;
    const int oh = (zs.h - 1) * s - 2 * p + k;
    const int ow = (zs.w - 1) * s - 2 * p + k;
    if (oh < 1 || ow < 1)
        throw Error::usage("conv2d_transpose: non-positive output size");

    Tensor out = Tensor::zeros({zs.n, ws.c, oh, ow});
    const double* z = input.data();
    const double* w = weight.data();
    double* y = out.data();
    const std::size_t y_chan = static_cast<std::size_t>(oh) * ow;

    if (bias.defined()) {
        const double* b = bias.data();
        for (int n = 0; n < zs.n; ++n)
            for (int oc = 0; oc < ws.c; ++oc) {
                double* yc = y + (static_cast<std::size_t>(n) * ws.c + oc) * y_chan;
                std::fill(yc, yc + y_chan, b[oc]);
            }
    }

    for (int n = 0; n < zs.n; ++n) {
        for (int zc = 0; zc < zs.c; ++zc) {
            const double* zch =
                z + (static_cast<std::size_t>(n) * zs.c + zc) * zs.h * zs.w;
            const double* wz = w + static_cast<std::size_t>(zc) * ws.c * k * k;
            for (int iy = 0; iy < zs.h; ++iy) {
                for (int ix = 0; ix < zs.w; ++ix) {
                    const double v = zch[static_cast<std::size_t>(iy) * zs.w + ix];
                    if (v == 0.0)
                        continue;
                    for (int oc = 0; oc < ws.c; ++oc) {
                        double* yc = y + (static_cast<std::size_t>(n) * ws.c + oc) * y_chan;
                        const double* wk = wz + static_cast<std::size_t>(oc) * k * k;
                        for (int ky = 0; ky < k; ++ky) {
                            const int oy = iy * s - p + ky;
                            if (oy < 0 || oy >= oh)
                                continue;
                            for (int kx = 0; kx < k; ++kx) {
                                const int ox = ix * s - p + kx;
                                if (ox < 0 || ox >= ow)
                                    continue;
                                yc[static_cast<std::size_t>(oy) * ow + ox] +=
                                    v * wk[static_cast<std::size_t>(ky) * k + kx];
                            }
                        }
                    }
                }
            }
        }
    }

    if (wants_grad(tape, {&input, &weight, &bias})) {
        out.set_requires_grad(true);
        Tensor zi = input, wi = weight, bi = bias, yo = out;
        tape->record([zi, wi, bi, yo, s, p, k]() mutable {
            const Shape& zs = zi.shape();
            const Shape& ws = wi.shape();
            const Shape& ys = yo.shape();
            const double* g = yo.grad();
            const double* z = zi.data();
            const double* w = wi.data();
            const bool need_z = zi.requires_grad();
            const bool need_w = wi.requires_grad();
            double* gz = need_z ? zi.grad() : nullptr;
            double* gw = need_w ? wi.grad() : nullptr;
            const std::size_t y_chan = static_cast<std::size_t>(ys.h) * ys.w;
            if (bi.defined() && bi.requires_grad()) {
                double* gb = bi.grad();
                for (int n = 0; n < ys.n; ++n)
                    for (int oc = 0; oc < ys.c; ++oc) {
                        const double* gc =
                            g + (static_cast<std::size_t>(n) * ys.c + oc) * y_chan;
                        double acc = 0.0;
                        for (std::size_t i = 0; i < y_chan; ++i)
                            acc += gc[i];
                        gb[oc] += acc;
                    }
            }
            if (!gz && !gw)
                return;
            for (int n = 0; n < zs.n; ++n) {
                for (int zc = 0; zc < zs.c; ++zc) {
                    const std::size_t zoff =
                        (static_cast<std::size_t>(n) * zs.c + zc) * zs.h * zs.w;
                    const std::size_t woff = static_cast<std::size_t>(zc) * ws.c * k * k;
                    for (int iy = 0; iy < zs.h; ++iy) {
                        for (int ix = 0; ix < zs.w; ++ix) {
                            const std::size_t zidx =
                                zoff + static_cast<std::size_t>(iy) * zs.w + ix;
                            double gzacc = 0.0;
                            for (int oc = 0; oc < ws.c; ++oc) {
                                const double* gc =
                                    g + (static_cast<std::size_t>(n) * ys.c + oc) * y_chan;
                                for (int ky = 0; ky < k; ++ky) {
                                    const int oy = iy * s - p + ky;
                                    if (oy < 0 || oy >= ys.h)
                                        continue;
                                    for (int kx = 0; kx < k; ++kx) {
                                        const int ox = ix * s - p + kx;
                                        if (ox < 0 || ox >= ys.w)
                                            continue;
                                        const double gv =
                                            gc[static_cast<std::size_t>(oy) * ys.w + ox];
                                        const std::size_t widx =
                                            woff + (static_cast<std::size_t>(oc) * k + ky) * k +
                                            kx;
                                        if (gw)
                                            gw[widx] += gv * z[zidx];
                                        gzacc += gv * w[widx];
                                    }
                                }
                            }
                            if (gz)
                                gz[zidx] += gzacc;
                        }
                    }
                }
            }
        });
    }
    return out;
}

Tensor batchnorm(Tape* tape, const Tensor& input, const Tensor& gamma, const Tensor& beta,
                 BatchNormStats& running, bool training, double momentum, double eps) {
    const Shape& xs = input.shape();
    if (eps <= 0.0)
        throw Error::usage("batchnorm: eps must be > 0");
    if (gamma.numel() != static_cast<std::size_t>(xs.c) ||
        beta.numel() != static_cast<std::size_t>(xs.c))
        throw Error::usage("batchnorm: gamma/beta length must equal channel count " +
                           std::to_string(xs.c));
    if (!training && !running.initialized)
        throw Error::usage("batchnorm: eval mode requires initialized running statistics");

    const std::size_t chan = static_cast<std::size_t>(xs.h) * xs.w;
    const std::size_t m = static_cast<std::size_t>(xs.n) * chan; // samples per channel

    Tensor mean = Tensor::zeros({1, xs.c, 1, 1});
    Tensor var = Tensor::zeros({1, xs.c, 1, 1});

    const double* x = input.data();
    if (training) {
        for (int c = 0; c < xs.c; ++c) {
            double acc = 0.0;
            for (int n = 0; n < xs.n; ++n) {
                const double* xc = x + (static_cast<std::size_t>(n) * xs.c + c) * chan;
                for (std::size_t i = 0; i < chan; ++i)
                    acc += xc[i];
            }
            const double mu = acc / static_cast<double>(m);
            double vacc = 0.0;
            for (int n = 0; n < xs.n; ++n) {
                const double* xc = x + (static_cast<std::size_t>(n) * xs.c + c) * chan;
                for (std::size_t i = 0; i < chan; ++i) {
                    const double d = xc[i] - mu;
                    vacc += d * d;
                }
            }
            mean.data()[c] = mu;
            var.data()[c] = vacc / static_cast<double>(m);
        }
        // running stats follow the usual convention: biased variance normalizes,
        // unbiased variance feeds the running average
        if (!running.initialized) {
            running.mean = Tensor::zeros({1, xs.c, 1, 1});
            running.var = Tensor::full({1, xs.c, 1, 1}, 1.0);
            running.initialized = true;
        }
        const double unbias = m > 1 ? static_cast<double>(m) / static_cast<double>(m - 1) : 1.0;
        for (int c = 0; c < xs.c; ++c) {
            running.mean.data()[c] =
                (1.0 - momentum) * running.mean.data()[c] + momentum * mean.data()[c];
            running.var.data()[c] =
                (1.0 - momentum) * running.var.data()[c] + momentum * var.data()[c] * unbias;
        }
    } else {
        for (int c = 0; c < xs.c; ++c) {
            mean.data()[c] = running.mean.data()[c];
            var.data()[c] = running.var.data()[c];
        }
    }

    Tensor inv_std = Tensor::zeros({1, xs.c, 1, 1});
    for (int c = 0; c < xs.c; ++c)
        inv_std.data()[c] = 1.0 / std::sqrt(var.data()[c] + eps);

    Tensor xhat = Tensor::zeros(xs);
    Tensor out = Tensor::zeros(xs);
    const double* gm = gamma.data();
    const double* bt = beta.data();
    for (int n = 0; n < xs.n; ++n) {
        for (int c = 0; c < xs.c; ++c) {
            const double mu = mean.data()[c];
            const double is = inv_std.data()[c];
            const double* xc = x + (static_cast<std::size_t>(n) * xs.c + c) * chan;
            double* hc = xhat.data() + (static_cast<std::size_t>(n) * xs.c + c) * chan;
            double* yc = out.data() + (static_cast<std::size_t>(n) * xs.c + c) * chan;
            for (std::size_t i = 0; i < chan; ++i) {
                const double h = (xc[i] - mu) * is;
                hc[i] = h;
                yc[i] = gm[c] * h + bt[c];
            }
        }
    }

    if (wants_grad(tape, {&input, &gamma, &beta})) {
        out.set_requires_grad(true);
        Tensor xi = input, gi = gamma, bi = beta, yo = out, xh = xhat, istd = inv_std;
        tape->record([xi, gi, bi, yo, xh, istd, training]() mutable {
            const Shape& xs = xi.shape();
            const std::size_t chan = static_cast<std::size_t>(xs.h) * xs.w;
            const std::size_t m = static_cast<std::size_t>(xs.n) * chan;
            const double* g = yo.grad();
            const double* h = xh.data();
            const bool need_x = xi.requires_grad();
            const bool need_g = gi.requires_grad();
            const bool need_b = bi.requires_grad();
            for (int c = 0; c < xs.c; ++c) {
                double sum_g = 0.0, sum_gh = 0.0;
                for (int n = 0; n < xs.n; ++n) {
                    const std::size_t off = (static_cast<std::size_t>(n) * xs.c + c) * chan;
                    for (std::size_t i = 0; i < chan; ++i) {
                        sum_g += g[off + i];
                        sum_gh += g[off + i] * h[off + i];
                    }
                }
                if (need_g)
                    gi.grad()[c] += sum_gh;
                if (need_b)
                    bi.grad()[c] += sum_g;
                if (need_x) {
                    const double gs = gi.data()[c] * istd.data()[c];
                    if (training) {
                        const double mg = sum_g / static_cast<double>(m);
                        const double mgh = sum_gh / static_cast<double>(m);
                        for (int n = 0; n < xs.n; ++n) {
                            const std::size_t off =
                                (static_cast<std::size_t>(n) * xs.c + c) * chan;
                            for (std::size_t i = 0; i < chan; ++i)
                                xi.grad()[off + i] +=
                                    gs * (g[off + i] - mg - h[off + i] * mgh);
                        }
                    } else {
                        for (int n = 0; n < xs.n; ++n) {
                            const std::size_t off =
                                (static_cast<std::size_t>(n) * xs.c + c) * chan;
                            for (std::size_t i = 0; i < chan; ++i)
                                xi.grad()[off + i] += gs * g[off + i];
                        }
                    }
                }
            }
        });
    }
    return out;
}

Tensor relu(Tape* tape, const Tensor& x) {
    Tensor out = Tensor::zeros(x.shape());
    const double* xd = x.data();
    double* y = out.data();
    const std::size_t n = x.numel();
    for (std::size_t i = 0; i < n; ++i)
        y[i] = xd[i] > 0.0 ? xd[i] : 0.0;

    if (wants_grad(tape, {&x})) {
        out.set_requires_grad(true);
        Tensor xi = x, yo = out;
        tape->record([xi, yo]() mutable {
            if (!xi.requires_grad())
                return;
            const double* xd = xi.data();
            const double* g = yo.grad();
            double* gx = xi.grad();
            const std::size_t n = xi.numel();
            // subgradient at exactly 0 is 0
            for (std::size_t i = 0; i < n; ++i)
                if (xd[i] > 0.0)
                    gx[i] += g[i];
        });
    }
    return out;
}

Tensor linear(Tape* tape, const Tensor& x, const Tensor& weight, const Tensor& bias) {
    const Shape& xs = x.shape();
    const Shape& ws = weight.shape();
    if (xs.h != 1 || xs.w != 1)
        throw Error::usage("linear: input must be (n,f,1,1), got " + xs.str());
    if (ws.c != xs.c)
        throw Error::usage("linear: input features " + std::to_string(xs.c) +
                           " != weight columns " + std::to_string(ws.c));
    if (bias.defined() && bias.numel() != static_cast<std::size_t>(ws.n))
        throw Error::usage("linear: bias length mismatch");

    const int f = xs.c, o = ws.n;
    Tensor out = Tensor::zeros({xs.n, o, 1, 1});
    const double* xd = x.data();
    const double* w = weight.data();
    const double* b = bias.defined() ? bias.data() : nullptr;
    double* y = out.data();
    for (int n = 0; n < xs.n; ++n) {
        const double* xr = xd + static_cast<std::size_t>(n) * f;
        double* yr = y + static_cast<std::size_t>(n) * o;
        for (int j = 0; j < o; ++j) {
            const double* wr = w + static_cast<std::size_t>(j) * f;
            double acc = b ? b[j] : 0.0;
            for (int i = 0; i < f; ++i)
                acc += xr[i] * wr[i];
            yr[j] = acc;
        }
    }

    if (wants_grad(tape, {&x, &weight, &bias})) {
        out.set_requires_grad(true);
        Tensor xi = x, wi = weight, bi = bias, yo = out;
        tape->record([xi, wi, bi, yo]() mutable {
            const int nb = xi.shape().n, f = xi.shape().c, o = wi.shape().n;
            const double* g = yo.grad();
            const double* xd = xi.data();
            const double* w = wi.data();
            double* gx = xi.requires_grad() ? xi.grad() : nullptr;
            double* gw = wi.requires_grad() ? wi.grad() : nullptr;
            double* gb = (bi.defined() && bi.requires_grad()) ? bi.grad() : nullptr;
            for (int n = 0; n < nb; ++n) {
                const double* gr = g + static_cast<std::size_t>(n) * o;
                const double* xr = xd + static_cast<std::size_t>(n) * f;
                for (int j = 0; j < o; ++j) {
                    const double gv = gr[j];
                    if (gv == 0.0)
                        continue;
                    const double* wr = w + static_cast<std::size_t>(j) * f;
                    if (gb)
                        gb[j] += gv;
                    for (int i = 0; i < f; ++i) {
                        if (gw)
                            gw[static_cast<std::size_t>(j) * f + i] += gv * xr[i];
                        if (gx)
                            gx[static_cast<std::size_t>(n) * f + i] += gv * wr[i];
                    }
                }
            }
        });
    }
    return out;
}

Tensor softmax_lastdim(Tape* tape, const Tensor& x) {
    const Shape& xs = x.shape();
    const std::size_t rows = static_cast<std::size_t>(xs.n) * xs.c * xs.h;
    const int w = xs.w;
    Tensor out = Tensor::zeros(xs);
    const double* xd = x.data();
    double* y = out.data();
    for (std::size_t r = 0; r < rows; ++r) {
        const double* xr = xd + r * w;
        double* yr = y + r * w;
        double mx = xr[0];
        for (int i = 1; i < w; ++i)
            mx = std::max(mx, xr[i]);
        double s = 0.0;
        for (int i = 0; i < w; ++i) {
            yr[i] = std::exp(xr[i] - mx);
            s += yr[i];
        }
        const double inv = 1.0 / s;
        for (int i = 0; i < w; ++i)
            yr[i] *= inv;
    }

    if (wants_grad(tape, {&x})) {
        out.set_requires_grad(true);
        Tensor xi = x, yo = out;
        tape->record([xi, yo]() mutable {
            if (!xi.requires_grad())
                return;
            const Shape& xs = xi.shape();
            const std::size_t rows = static_cast<std::size_t>(xs.n) * xs.c * xs.h;
            const int w = xs.w;
            const double* g = yo.grad();
            const double* y = yo.data();
            double* gx = xi.grad();
            for (std::size_t r = 0; r < rows; ++r) {
                const double* gr = g + r * w;
                const double* yr = y + r * w;
                double dot = 0.0;
                for (int i = 0; i < w; ++i)
                    dot += gr[i] * yr[i];
                for (int i = 0; i < w; ++i)
                    gx[r * w + i] += yr[i] * (gr[i] - dot);
            }
        });
    }
    return out;
}

Tensor mse_loss(Tape* tape, const Tensor& pred, const Tensor& target, const Tensor& mask) {
    check_same_shape("mse_loss", pred, target);
    if (mask.defined())
        check_same_shape("mse_loss(mask)", pred, mask);

    const std::size_t n = pred.numel();
    const double* p = pred.data();
    const double* t = target.data();
    const double* m = mask.defined() ? mask.data() : nullptr;
    double count = 0.0, acc = 0.0;
    if (m) {
        for (std::size_t i = 0; i < n; ++i) {
            if (m[i] != 0.0) {
                const double d = p[i] - t[i];
                acc += d * d;
                count += 1.0;
            }
        }
        if (count == 0.0)
            throw Error::usage("mse_loss: mask has no valid elements");
    } else {
        for (std::size_t i = 0; i < n; ++i) {
            const double d = p[i] - t[i];
            acc += d * d;
        }
        count = static_cast<double>(n);
    }
    Tensor out = Tensor::scalar(acc / count);

    if (wants_grad(tape, {&pred, &target})) {
        out.set_requires_grad(true);
        Tensor pi = pred, ti = target, mi = mask, yo = out;
        tape->record([pi, ti, mi, yo, count]() mutable {
            const double gs = yo.grad()[0];
            const std::size_t n = pi.numel();
            const double* p = pi.data();
            const double* t = ti.data();
            const double* m = mi.defined() ? mi.data() : nullptr;
            const double c = 2.0 * gs / count;
            double* gp = pi.requires_grad() ? pi.grad() : nullptr;
            double* gt = ti.requires_grad() ? ti.grad() : nullptr;
            for (std::size_t i = 0; i < n; ++i) {
                if (m && m[i] == 0.0)
                    continue;
                const double d = c * (p[i] - t[i]);
                if (gp)
                    gp[i] += d;
                if (gt)
                    gt[i] -= d;
            }
        });
    }
    return out;
}

Tensor add(Tape* tape, const Tensor& a, const Tensor& b) {
    check_same_shape("add", a, b);
    Tensor out = Tensor::zeros(a.shape());
    const double* ad = a.data();
    const double* bd = b.data();
    double* y = out.data();
    const std::size_t n = a.numel();
    for (std::size_t i = 0; i < n; ++i)
        y[i] = ad[i] + bd[i];

    if (wants_grad(tape, {&a, &b})) {
        out.set_requires_grad(true);
        Tensor ai = a, bi = b, yo = out;
        tape->record([ai, bi, yo]() mutable {
            const double* g = yo.grad();
            const std::size_t n = ai.numel();
            if (ai.requires_grad()) {
                double* ga = ai.grad();
                for (std::size_t i = 0; i < n; ++i)
                    ga[i] += g[i];
            }
            if (bi.requires_grad()) {
                double* gb = bi.grad();
                for (std::size_t i = 0; i < n; ++i)
                    gb[i] += g[i];
            }
        });
    }
    return out;
}

Tensor mul(Tape* tape, const Tensor& a, const Tensor& b) {
    check_same_shape("mul", a, b);
    Tensor out = Tensor::zeros(a.shape());
    const double* ad = a.data();
    const double* bd = b.data();
    double* y = out.data();
    const std::size_t n = a.numel();
    for (std::size_t i = 0; i < n; ++i)
        y[i] = ad[i] * bd[i];

    if (wants_grad(tape, {&a, &b})) {
        out.set_requires_grad(true);
        Tensor ai = a, bi = b, yo = out;
        tape->record([ai, bi, yo]() mutable {
            const double* g = yo.grad();
            const std::size_t n = ai.numel();
            if (ai.requires_grad()) {
                double* ga = ai.grad();
                const double* bd = bi.data();
                for (std::size_t i = 0; i < n; ++i)
                    ga[i] += g[i] * bd[i];
            }
            if (bi.requires_grad()) {
                double* gb = bi.grad();
                const double* ad = ai.data();
                for (std::size_t i = 0; i < n; ++i)
                    gb[i] += g[i] * ad[i];
            }
        });
    }
    return out;
}

Tensor scale(Tape* tape, const Tensor& x, double k) {
    Tensor out = Tensor::zeros(x.shape());
    const double* xd = x.data();
    double* y = out.data();
    const std::size_t n = x.numel();
    for (std::size_t i = 0; i < n; ++i)
        y[i] = xd[i] * k;

    if (wants_grad(tape, {&x})) {
        out.set_requires_grad(true);
        Tensor xi = x, yo = out;
        tape->record([xi, yo, k]() mutable {
            if (!xi.requires_grad())
                return;
            const double* g = yo.grad();
            double* gx = xi.grad();
            const std::size_t n = xi.numel();
            for (std::size_t i = 0; i < n; ++i)
                gx[i] += g[i] * k;
        });
    }
    return out;
}

Tensor sum(Tape* tape, const Tensor& x) {
    double acc = 0.0;
    const double* xd = x.data();
    const std::size_t n = x.numel();
    for (std::size_t i = 0; i < n; ++i)
        acc += xd[i];
    Tensor out = Tensor::scalar(acc);

    if (wants_grad(tape, {&x})) {
        out.set_requires_grad(true);
        Tensor xi = x, yo = out;
        tape->record([xi, yo]() mutable {
            if (!xi.requires_grad())
                return;
            const double gs = yo.grad()[0];
            double* gx = xi.grad();
            const std::size_t n = xi.numel();
            for (std::size_t i = 0; i < n; ++i)
                gx[i] += gs;
        });
    }
    return out;
}

Tensor reshape(Tape* tape, const Tensor& x, const Shape& s) {
    Tensor out = x.reshaped_view(s);
    if (wants_grad(tape, {&x})) {
        out.set_requires_grad(true);
        Tensor xi = x, yo = out;
        tape->record([xi, yo]() mutable {
            if (!xi.requires_grad())
                return;
            const double* g = yo.grad();
            double* gx = xi.grad();
            const std::size_t n = xi.numel();
            for (std::size_t i = 0; i < n; ++i)
                gx[i] += g[i];
        });
    }
    return out;
}

Tensor transpose_mat(Tape* tape, const Tensor& x) {
    const Shape& xs = x.shape();
    Tensor out = Tensor::zeros({xs.n, xs.c, xs.w, xs.h});
    const std::size_t slices = static_cast<std::size_t>(xs.n) * xs.c;
    const std::size_t sz = static_cast<std::size_t>(xs.h) * xs.w;
    const double* xd = x.data();
    double* y = out.data();
    for (std::size_t sl = 0; sl < slices; ++sl) {
        const double* xm = xd + sl * sz;
        double* ym = y + sl * sz;
        for (int r = 0; r < xs.h; ++r)
            for (int c = 0; c < xs.w; ++c)
                ym[static_cast<std::size_t>(c) * xs.h + r] =
                    xm[static_cast<std::size_t>(r) * xs.w + c];
    }

    if (wants_grad(tape, {&x})) {
        out.set_requires_grad(true);
        Tensor xi = x, yo = out;
        tape->record([xi, yo]() mutable {
            if (!xi.requires_grad())
                return;
            const Shape& xs = xi.shape();
            const std::size_t slices = static_cast<std::size_t>(xs.n) * xs.c;
            const std::size_t sz = static_cast<std::size_t>(xs.h) * xs.w;
            const double* g = yo.grad();
            double* gx = xi.grad();
            for (std::size_t sl = 0; sl < slices; ++sl) {
                const double* gm = g + sl * sz;
                double* gxm = gx + sl * sz;
                for (int r = 0; r < xs.h; ++r)
                    for (int c = 0; c < xs.w; ++c)
                        gxm[static_cast<std::size_t>(r) * xs.w + c] +=
                            gm[static_cast<std::size_t>(c) * xs.h + r];
            }
        });
    }
    return out;
}

Tensor matmul(Tape* tape, const Tensor& a, const Tensor& b) {
    const Shape& as = a.shape();
    const Shape& bs = b.shape();
    if (as.n != bs.n || as.c != bs.c)
        throw Error::usage("matmul: batch dims differ, " + as.str() + " vs " + bs.str());
    if (as.w != bs.h)
        throw Error::usage("matmul: inner dims differ, " + as.str() + " vs " + bs.str());
    const int r = as.h, k = as.w, m = bs.w;
    const std::size_t slices = static_cast<std::size_t>(as.n) * as.c;
    Tensor out = Tensor::zeros({as.n, as.c, r, m});
    const double* ad = a.data();
    const double* bd = b.data();
    double* y = out.data();
    for (std::size_t sl = 0; sl < slices; ++sl) {
        const double* am = ad + sl * static_cast<std::size_t>(r) * k;
        const double* bm = bd + sl * static_cast<std::size_t>(k) * m;
        double* ym = y + sl * static_cast<std::size_t>(r) * m;
        for (int i = 0; i < r; ++i) {
            double* yrow = ym + static_cast<std::size_t>(i) * m;
            for (int kk = 0; kk < k; ++kk) {
                const double av = am[static_cast<std::size_t>(i) * k + kk];
                if (av == 0.0)
                    continue;
                const double* brow = bm + static_cast<std::size_t>(kk) * m;
                for (int j = 0; j < m; ++j)
                    yrow[j] += av * brow[j];
            }
        }
    }

    if (wants_grad(tape, {&a, &b})) {
        out.set_requires_grad(true);
        Tensor ai = a, bi = b, yo = out;
        tape->record([ai, bi, yo]() mutable {
            const Shape& as = ai.shape();
            const Shape& bs = bi.shape();
            const int r = as.h, k = as.w, m = bs.w;
            const std::size_t slices = static_cast<std::size_t>(as.n) * as.c;
            const double* g = yo.grad();
            const double* ad = ai.data();
            const double* bd = bi.data();
            double* ga = ai.requires_grad() ? ai.grad() : nullptr;
            double* gb = bi.requires_grad() ? bi.grad() : nullptr;
            for (std::size_t sl = 0; sl < slices; ++sl) {
                const double* gm = g + sl * static_cast<std::size_t>(r) * m;
                const double* am = ad + sl * static_cast<std::size_t>(r) * k;
                const double* bm = bd + sl * static_cast<std::size_t>(k) * m;
                for (int i = 0; i < r; ++i) {
                    for (int j = 0; j < m; ++j) {
                        const double gv = gm[static_cast<std::size_t>(i) * m + j];
                        if (gv == 0.0)
                            continue;
                        for (int kk = 0; kk < k; ++kk) {
                            if (ga)
                                ga[sl * r * k + static_cast<std::size_t>(i) * k + kk] +=
                                    gv * bm[static_cast<std::size_t>(kk) * m + j];
                            if (gb)
                                gb[sl * k * m + static_cast<std::size_t>(kk) * m + j] +=
                                    gv * am[static_cast<std::size_t>(i) * k + kk];
                        }
                    }
                }
            }
        });
    }
    return out;
}

Tensor global_avg_pool(Tape* tape, const Tensor& x) {
    const Shape& xs = x.shape();
    const std::size_t chan = static_cast<std::size_t>(xs.h) * xs.w;
    Tensor out = Tensor::zeros({xs.n, xs.c, 1, 1});
    const double* xd = x.data();
    double* y = out.data();
    const std::size_t slices = static_cast<std::size_t>(xs.n) * xs.c;
    for (std::size_t sl = 0; sl < slices; ++sl) {
        const double* xc = xd + sl * chan;
        double acc = 0.0;
        for (std::size_t i = 0; i < chan; ++i)
            acc += xc[i];
        y[sl] = acc / static_cast<double>(chan);
    }

    if (wants_grad(tape, {&x})) {
        out.set_requires_grad(true);
        Tensor xi = x, yo = out;
        tape->record([xi, yo]() mutable {
            if (!xi.requires_grad())
                return;
            const Shape& xs = xi.shape();
            const std::size_t chan = static_cast<std::size_t>(xs.h) * xs.w;
            const double inv = 1.0 / static_cast<double>(chan);
            const double* g = yo.grad();
            double* gx = xi.grad();
            const std::size_t slices = static_cast<std::size_t>(xs.n) * xs.c;
            for (std::size_t sl = 0; sl < slices; ++sl) {
                const double gv = g[sl] * inv;
                double* gc = gx + sl * chan;
                for (std::size_t i = 0; i < chan; ++i)
                    gc[i] += gv;
            }
        });
    }
    return out;
}

Tensor affine_color_residual(Tape* tape, const Tensor& image, const Tensor& params) {
    const Shape& xs = image.shape();
    const Shape& ps = params.shape();
    if (xs.c != 3)
        throw Error::usage("affine_color_residual: image must have 3 channels, got " +
                           std::to_string(xs.c));
    if (ps.c != 12 || ps.h != 1 || ps.w != 1 || ps.n != xs.n)
        throw Error::usage("affine_color_residual: params must be (n,12,1,1) matching image "
                           "batch, got " +
                           ps.str());

    const std::size_t chan = static_cast<std::size_t>(xs.h) * xs.w;
    Tensor out = Tensor::zeros(xs);
    const double* img = image.data();
    const double* pp = params.data();
    double* y = out.data();
    for (int n = 0; n < xs.n; ++n) {
        const double* P = pp + static_cast<std::size_t>(n) * 12;
        const double* in = img + static_cast<std::size_t>(n) * 3 * chan;
        double* yn = y + static_cast<std::size_t>(n) * 3 * chan;
        for (int a = 0; a < 3; ++a) {
            const double w0 = P[3 * a], w1 = P[3 * a + 1], w2 = P[3 * a + 2], b = P[9 + a];
            double* yc = yn + static_cast<std::size_t>(a) * chan;
            for (std::size_t i = 0; i < chan; ++i)
                yc[i] = w0 * in[i] + w1 * in[chan + i] + w2 * in[2 * chan + i] + b;
        }
    }

    if (wants_grad(tape, {&image, &params})) {
        out.set_requires_grad(true);
        Tensor xi = image, pi = params, yo = out;
        tape->record([xi, pi, yo]() mutable {
            const Shape& xs = xi.shape();
            const std::size_t chan = static_cast<std::size_t>(xs.h) * xs.w;
            const double* g = yo.grad();
            const double* img = xi.data();
            const double* pp = pi.data();
            double* gp = pi.requires_grad() ? pi.grad() : nullptr;
            double* gx = xi.requires_grad() ? xi.grad() : nullptr;
            for (int n = 0; n < xs.n; ++n) {
                const double* gn = g + static_cast<std::size_t>(n) * 3 * chan;
                const double* in = img + static_cast<std::size_t>(n) * 3 * chan;
                const double* P = pp + static_cast<std::size_t>(n) * 12;
                for (int a = 0; a < 3; ++a) {
                    const double* gc = gn + static_cast<std::size_t>(a) * chan;
                    double s0 = 0.0, s1 = 0.0, s2 = 0.0, sb = 0.0;
                    for (std::size_t i = 0; i < chan; ++i) {
                        const double gv = gc[i];
                        s0 += gv * in[i];
                        s1 += gv * in[chan + i];
                        s2 += gv * in[2 * chan + i];
                        sb += gv;
                    }
                    if (gp) {
                        gp[static_cast<std::size_t>(n) * 12 + 3 * a] += s0;
                        gp[static_cast<std::size_t>(n) * 12 + 3 * a + 1] += s1;
                        gp[static_cast<std::size_t>(n) * 12 + 3 * a + 2] += s2;
                        gp[static_cast<std::size_t>(n) * 12 + 9 + a] += sb;
                    }
                    if (gx) {
                        double* gxn = gx + static_cast<std::size_t>(n) * 3 * chan;
                        for (int b = 0; b < 3; ++b) {
                            const double w = P[3 * a + b];
                            double* gxc = gxn + static_cast<std::size_t>(b) * chan;
                            for (std::size_t i = 0; i < chan; ++i)
                                gxc[i] += w * gc[i];
                        }
                    }
                }
            }
        });
    }
    return out;
}

Tensor pad_spatial(Tape* tape, const Tensor& x, int new_h, int new_w) {
    const Shape& xs = x.shape();
    if (new_h < xs.h || new_w < xs.w)
        throw Error::usage("pad_spatial: target smaller than input");
    Tensor out = Tensor::zeros({xs.n, xs.c, new_h, new_w});
    const std::size_t slices = static_cast<std::size_t>(xs.n) * xs.c;
    const double* xd = x.data();
    double* y = out.data();
    for (std::size_t sl = 0; sl < slices; ++sl)
        for (int r = 0; r < xs.h; ++r) {
            const double* src = xd + (sl * xs.h + r) * xs.w;
            double* dst = y + (sl * new_h + r) * new_w;
            std::copy(src, src + xs.w, dst);
        }

    if (wants_grad(tape, {&x})) {
        out.set_requires_grad(true);
        Tensor xi = x, yo = out;
        tape->record([xi, yo, new_h, new_w]() mutable {
            if (!xi.requires_grad())
                return;
            const Shape& xs = xi.shape();
            const std::size_t slices = static_cast<std::size_t>(xs.n) * xs.c;
            const double* g = yo.grad();
            double* gx = xi.grad();
            for (std::size_t sl = 0; sl < slices; ++sl)
                for (int r = 0; r < xs.h; ++r)
                    for (int c = 0; c < xs.w; ++c)
                        gx[(sl * xs.h + r) * xs.w + c] += g[(sl * new_h + r) * new_w + c];
        });
    }
    return out;
}

Tensor crop_spatial(Tape* tape, const Tensor& x, int new_h, int new_w) {
    const Shape& xs = x.shape();
    if (new_h > xs.h || new_w > xs.w)
        throw Error::usage("crop_spatial: target larger than input");
    Tensor out = Tensor::zeros({xs.n, xs.c, new_h, new_w});
    const std::size_t slices = static_cast<std::size_t>(xs.n) * xs.c;
    const double* xd = x.data();
    double* y = out.data();
    for (std::size_t sl = 0; sl < slices; ++sl)
        for (int r = 0; r < new_h; ++r) {
            const double* src = xd + (sl * xs.h + r) * xs.w;
            double* dst = y + (sl * new_h + r) * new_w;
            std::copy(src, src + new_w, dst);
        }

    if (wants_grad(tape, {&x})) {
        out.set_requires_grad(true);
        Tensor xi = x, yo = out;
        tape->record([xi, yo, new_h, new_w]() mutable {
            if (!xi.requires_grad())
                return;
            const Shape& xs = xi.shape();
            const std::size_t slices = static_cast<std::size_t>(xs.n) * xs.c;
            const double* g = yo.grad();
            double* gx = xi.grad();
            for (std::size_t sl = 0; sl < slices; ++sl)
                for (int r = 0; r < new_h; ++r)
                    for (int c = 0; c < new_w; ++c)
                        gx[(sl * xs.h + r) * xs.w + c] += g[(sl * new_h + r) * new_w + c];
        });
    }
    return out;
}

} // namespace cfe::nn
