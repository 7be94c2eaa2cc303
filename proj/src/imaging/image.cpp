#include "imaging/image.hpp"

#include "common/error.hpp"

#include <algorithm>
#include <cmath>

namespace cfe::img {

namespace {
inline double lerp(double a, double b, double t) { return a + t * (b - a); }
} // namespace

Image resize_bilinear(const Image& in, int new_w, int new_h) {
    if (new_w < 1 || new_h < 1)
        throw Error::usage("resize: target dimensions must be >= 1");
    if (new_w == in.width && new_h == in.height)
        return in;
    Image out(new_w, new_h);
    const double sx = static_cast<double>(in.width) / new_w;
    const double sy = static_cast<double>(in.height) / new_h;
    for (int y = 0; y < new_h; ++y) {
        double fy = (y + 0.5) * sy - 0.5;
        fy = std::clamp(fy, 0.0, static_cast<double>(in.height - 1));
        const int y0 = static_cast<int>(fy);
        const int y1 = std::min(y0 + 1, in.height - 1);
        const double ty = fy - y0;
        for (int x = 0; x < new_w; ++x) {
            double fx = (x + 0.5) * sx - 0.5;
            fx = std::clamp(fx, 0.0, static_cast<double>(in.width - 1));
            const int x0 = static_cast<int>(fx);
            const int x1 = std::min(x0 + 1, in.width - 1);
            const double tx = fx - x0;
            for (int c = 0; c < 3; ++c) {
                const double top = lerp(in.at(x0, y0, c), in.at(x1, y0, c), tx);
                const double bot = lerp(in.at(x0, y1, c), in.at(x1, y1, c), tx);
                out.at(x, y, c) = lerp(top, bot, ty);
            }
        }
    }
    return out;
}

Image resize_longer_edge(const Image& in, int target) {
    if (target < 1)
        throw Error::usage("resize_longer_edge: target must be >= 1");
    int new_w, new_h;
    if (in.width >= in.height) {
        new_w = target;
        new_h = std::max(1, static_cast<int>(std::lround(
                                static_cast<double>(in.height) * target / in.width)));
    } else {
        new_h = target;
        new_w = std::max(1, static_cast<int>(std::lround(
                                static_cast<double>(in.width) * target / in.height)));
    }
    return resize_bilinear(in, new_w, new_h);
}

PaddedImage pad_to_square(const Image& in, int size) {
    if (in.width > size || in.height > size)
        throw Error::data("pad_to_square: image " + std::to_string(in.width) + "x" +
                          std::to_string(in.height) + " exceeds pad size " +
                          std::to_string(size));
    PaddedImage p;
    p.image = Image(size, size);
    p.mask.assign(static_cast<std::size_t>(size) * size, 0);
    p.original_width = in.width;
    p.original_height = in.height;
    for (int y = 0; y < in.height; ++y)
        for (int x = 0; x < in.width; ++x) {
            for (int c = 0; c < 3; ++c)
                p.image.at(x, y, c) = in.at(x, y, c);
            p.mask[static_cast<std::size_t>(y) * size + x] = 1;
        }
    return p;
}

Image unpad(const PaddedImage& p) {
    Image out(p.original_width, p.original_height);
    for (int y = 0; y < p.original_height; ++y)
        for (int x = 0; x < p.original_width; ++x)
            for (int c = 0; c < 3; ++c)
                out.at(x, y, c) = p.image.at(x, y, c);
    return out;
}

Image clamp01(const Image& in) {
    Image out = in;
    for (double& v : out.pix)
        v = std::clamp(v, 0.0, 1.0);
    return out;
}

nn::Tensor image_to_tensor(const Image& in) {
    nn::Tensor t = nn::Tensor::zeros({1, 3, in.height, in.width});
    double* d = t.data();
    const std::size_t chan = static_cast<std::size_t>(in.height) * in.width;
    for (int y = 0; y < in.height; ++y)
        for (int x = 0; x < in.width; ++x)
            for (int c = 0; c < 3; ++c)
                d[c * chan + static_cast<std::size_t>(y) * in.width + x] = in.at(x, y, c);
    return t;
}

Image tensor_to_image(const nn::Tensor& t, int batch_index) {
    const nn::Shape& s = t.shape();
    if (s.c != 3)
        throw Error::usage("tensor_to_image: expected 3 channels, got " + std::to_string(s.c));
    Image out(s.w, s.h);
    for (int y = 0; y < s.h; ++y)
        for (int x = 0; x < s.w; ++x)
            for (int c = 0; c < 3; ++c)
                out.at(x, y, c) = t.at(batch_index, c, y, x);
    return out;
}

nn::Tensor mask_to_tensor(const PaddedImage& p) {
    const int size = p.image.width;
    nn::Tensor t = nn::Tensor::zeros({1, 1, size, size});
    double* d = t.data();
    for (std::size_t i = 0; i < p.mask.size(); ++i)
        d[i] = p.mask[i] ? 1.0 : 0.0;
    return t;
}

nn::Tensor mask_to_tensor3(const PaddedImage& p) {
    const int size = p.image.width;
    nn::Tensor t = nn::Tensor::zeros({1, 3, size, size});
    double* d = t.data();
    const std::size_t chan = p.mask.size();
    for (std::size_t i = 0; i < chan; ++i) {
        const double v = p.mask[i] ? 1.0 : 0.0;
        d[i] = v;
        d[chan + i] = v;
        d[2 * chan + i] = v;
    }
    return t;
}

} // namespace cfe::img
