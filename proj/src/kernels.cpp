#include "miniseg/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace miniseg {

namespace {

[[noreturn]] void shape_error(const std::string& op, const std::string& detail) {
    throw std::invalid_argument(op + ": " + detail);
}

std::string dims(std::size_t a, std::size_t b) {
    return std::to_string(a) + " vs " + std::to_string(b);
}

struct ConvGeometry {
    std::size_t out_h;
    std::size_t out_w;
};

ConvGeometry conv_geometry(const Shape& xs, const Shape& ws, std::size_t stride,
                           std::size_t pad) {
    if (stride == 0) shape_error("conv2d", "stride must be >= 1");
    if (xs.c != ws.c) shape_error("conv2d", "input channels mismatch (x.c vs w.inC) " + dims(xs.c, ws.c));
    const std::size_t ph = xs.h + 2 * pad;
    const std::size_t pw = xs.w + 2 * pad;
    if (ph < ws.h) shape_error("conv2d", "kernel height exceeds padded input height " + dims(ws.h, ph));
    if (pw < ws.w) shape_error("conv2d", "kernel width exceeds padded input width " + dims(ws.w, pw));
    if ((ph - ws.h) % stride != 0) {
        shape_error("conv2d", "height (h + 2*pad - kh) not divisible by stride");
    }
    if ((pw - ws.w) % stride != 0) {
        shape_error("conv2d", "width (w + 2*pad - kw) not divisible by stride");
    }
    return {(ph - ws.h) / stride + 1, (pw - ws.w) / stride + 1};
}

// Input coordinate hit by output coordinate `o` at kernel tap `k`, or -1 when
// it falls into the zero padding.
inline std::ptrdiff_t source_coord(std::size_t o, std::size_t k, std::size_t stride,
                                   std::size_t pad, std::size_t extent) {
    const auto v = static_cast<std::ptrdiff_t>(o * stride + k) - static_cast<std::ptrdiff_t>(pad);
    return (v < 0 || v >= static_cast<std::ptrdiff_t>(extent)) ? -1 : v;
}

}  // namespace

Tensor conv2d_forward(const Tensor& x, const Tensor& w, std::span<const double> b,
                      std::size_t stride, std::size_t pad) {
    const Shape& xs = x.shape();
    const Shape& ws = w.shape();
    const auto g = conv_geometry(xs, ws, stride, pad);
    if (b.size() != ws.n) shape_error("conv2d", "bias length vs w.outC " + dims(b.size(), ws.n));

    Tensor y(Shape{xs.n, ws.n, g.out_h, g.out_w});
    for (std::size_t n = 0; n < xs.n; ++n) {
        for (std::size_t o = 0; o < ws.n; ++o) {
            double* yp = &y.at(n, o, 0, 0);
            std::fill(yp, yp + g.out_h * g.out_w, b[o]);
            for (std::size_t c = 0; c < xs.c; ++c) {
                const double* xp = x.data().data() + x.offset(n, c, 0, 0);
                for (std::size_t ki = 0; ki < ws.h; ++ki) {
                    for (std::size_t kj = 0; kj < ws.w; ++kj) {
                        const double wv = w.at(o, c, ki, kj);
                        for (std::size_t i = 0; i < g.out_h; ++i) {
                            const auto ii = source_coord(i, ki, stride, pad, xs.h);
                            if (ii < 0) continue;
                            const double* xrow = xp + static_cast<std::size_t>(ii) * xs.w;
                            double* yrow = yp + i * g.out_w;
                            for (std::size_t j = 0; j < g.out_w; ++j) {
                                const auto jj = source_coord(j, kj, stride, pad, xs.w);
                                if (jj < 0) continue;
                                yrow[j] += wv * xrow[jj];
                            }
                        }
                    }
                }
            }
        }
    }
    return y;
}

ConvGrads conv2d_backward(const Tensor& x, const Tensor& w, const Tensor& dy,
                          std::size_t stride, std::size_t pad) {
    const Shape& xs = x.shape();
    const Shape& ws = w.shape();
    const auto g = conv_geometry(xs, ws, stride, pad);
    const Shape expected{xs.n, ws.n, g.out_h, g.out_w};
    if (dy.shape() != expected) {
        shape_error("conv2d_backward",
                    "dy shape " + to_string(dy.shape()) + " != forward output " + to_string(expected));
    }

    ConvGrads out{Tensor(xs), Tensor(ws), std::vector<double>(ws.n, 0.0)};
    for (std::size_t n = 0; n < xs.n; ++n) {
        for (std::size_t o = 0; o < ws.n; ++o) {
            const double* dyp = dy.data().data() + dy.offset(n, o, 0, 0);
            double db = 0.0;
            for (std::size_t k = 0; k < g.out_h * g.out_w; ++k) db += dyp[k];
            out.db[o] += db;
            for (std::size_t c = 0; c < xs.c; ++c) {
                const double* xp = x.data().data() + x.offset(n, c, 0, 0);
                double* dxp = &out.dx.at(n, c, 0, 0);
                for (std::size_t ki = 0; ki < ws.h; ++ki) {
                    for (std::size_t kj = 0; kj < ws.w; ++kj) {
                        const double wv = w.at(o, c, ki, kj);
                        double dw = 0.0;
                        for (std::size_t i = 0; i < g.out_h; ++i) {
                            const auto ii = source_coord(i, ki, stride, pad, xs.h);
                            if (ii < 0) continue;
                            const std::size_t row = static_cast<std::size_t>(ii) * xs.w;
                            const double* dyrow = dyp + i * g.out_w;
                            for (std::size_t j = 0; j < g.out_w; ++j) {
                                const auto jj = source_coord(j, kj, stride, pad, xs.w);
                                if (jj < 0) continue;
                                dw += dyrow[j] * xp[row + static_cast<std::size_t>(jj)];
                                dxp[row + static_cast<std::size_t>(jj)] += wv * dyrow[j];
                            }
                        }
                        out.dw.at(o, c, ki, kj) += dw;
                    }
                }
            }
        }
    }
    return out;
}

Tensor relu(const Tensor& x) {
    Tensor y = x;
    for (double& v : y.data()) v = v > 0.0 ? v : 0.0;
    return y;
}

Tensor relu_backward(const Tensor& x, const Tensor& dy) {
    if (x.shape() != dy.shape()) {
        shape_error("relu_backward", "x " + to_string(x.shape()) + " vs dy " + to_string(dy.shape()));
    }
    Tensor dx(x.shape());
    for (std::size_t i = 0; i < x.numel(); ++i) dx[i] = x[i] > 0.0 ? dy[i] : 0.0;
    return dx;
}

PoolResult maxpool2x2(const Tensor& x) {
    const Shape& s = x.shape();
    if (s.h % 2 != 0) shape_error("maxpool2x2", "odd height " + std::to_string(s.h));
    if (s.w % 2 != 0) shape_error("maxpool2x2", "odd width " + std::to_string(s.w));
    const Shape os{s.n, s.c, s.h / 2, s.w / 2};
    PoolResult r{Tensor(os), PoolIndex{s, os, std::vector<std::size_t>(os.numel())}};
    std::size_t k = 0;
    for (std::size_t n = 0; n < s.n; ++n) {
        for (std::size_t c = 0; c < s.c; ++c) {
            for (std::size_t i = 0; i < os.h; ++i) {
                for (std::size_t j = 0; j < os.w; ++j, ++k) {
                    // Row-major scan with strict '>' keeps the lowest index on ties.
                    std::size_t best = x.offset(n, c, 2 * i, 2 * j);
                    for (std::size_t di = 0; di < 2; ++di) {
                        for (std::size_t dj = 0; dj < 2; ++dj) {
                            const std::size_t cand = x.offset(n, c, 2 * i + di, 2 * j + dj);
                            if (x[cand] > x[best]) best = cand;
                        }
                    }
                    r.y[k] = x[best];
                    r.index.argmax[k] = best;
                }
            }
        }
    }
    return r;
}

Tensor maxpool2x2_backward(const PoolIndex& index, const Tensor& dy) {
    if (dy.shape() != index.output_shape) {
        shape_error("maxpool2x2_backward",
                    "dy " + to_string(dy.shape()) + " vs pooled " + to_string(index.output_shape));
    }
    Tensor dx(index.input_shape);
    for (std::size_t k = 0; k < dy.numel(); ++k) dx[index.argmax[k]] += dy[k];
    return dx;
}

Tensor upsample2x_nearest(const Tensor& x) {
    const Shape& s = x.shape();
    Tensor y(Shape{s.n, s.c, 2 * s.h, 2 * s.w});
    for (std::size_t n = 0; n < s.n; ++n)
        for (std::size_t c = 0; c < s.c; ++c)
            for (std::size_t i = 0; i < 2 * s.h; ++i)
                for (std::size_t j = 0; j < 2 * s.w; ++j) y.at(n, c, i, j) = x.at(n, c, i / 2, j / 2);
    return y;
}

Tensor upsample2x_nearest_backward(const Tensor& dy) {
    const Shape& s = dy.shape();
    if (s.h % 2 != 0 || s.w % 2 != 0) {
        shape_error("upsample2x_nearest_backward", "dy spatial dims must be even, got " + to_string(s));
    }
    Tensor dx(Shape{s.n, s.c, s.h / 2, s.w / 2});
    for (std::size_t n = 0; n < s.n; ++n)
        for (std::size_t c = 0; c < s.c; ++c)
            for (std::size_t i = 0; i < s.h / 2; ++i)
                for (std::size_t j = 0; j < s.w / 2; ++j)
                    dx.at(n, c, i, j) = dy.at(n, c, 2 * i, 2 * j) + dy.at(n, c, 2 * i, 2 * j + 1) +
                                        dy.at(n, c, 2 * i + 1, 2 * j) +
                                        dy.at(n, c, 2 * i + 1, 2 * j + 1);
    return dx;
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
    const Shape& as = a.shape();
    const Shape& bs = b.shape();
    if (as.n != bs.n) shape_error("concat_channels", "batch mismatch " + dims(as.n, bs.n));
    if (as.h != bs.h) shape_error("concat_channels", "height mismatch " + dims(as.h, bs.h));
    if (as.w != bs.w) shape_error("concat_channels", "width mismatch " + dims(as.w, bs.w));
    Tensor y(Shape{as.n, as.c + bs.c, as.h, as.w});
    const std::size_t la = as.c * as.plane();
    const std::size_t lb = bs.c * bs.plane();
    auto out = y.data().begin();
    for (std::size_t n = 0; n < as.n; ++n) {
        out = std::copy_n(a.data().begin() + static_cast<std::ptrdiff_t>(n * la), la, out);
        out = std::copy_n(b.data().begin() + static_cast<std::ptrdiff_t>(n * lb), lb, out);
    }
    return y;
}

ChannelSplit concat_channels_backward(const Tensor& dy, std::size_t a_channels) {
    const Shape& s = dy.shape();
    if (a_channels == 0 || a_channels >= s.c) {
        shape_error("concat_channels_backward", "split point " + std::to_string(a_channels) +
                                                    " outside (0, " + std::to_string(s.c) + ")");
    }
    ChannelSplit r{Tensor(Shape{s.n, a_channels, s.h, s.w}),
                   Tensor(Shape{s.n, s.c - a_channels, s.h, s.w})};
    const std::size_t la = a_channels * s.plane();
    const std::size_t lb = (s.c - a_channels) * s.plane();
    auto in = dy.data().begin();
    for (std::size_t n = 0; n < s.n; ++n) {
        std::copy_n(in, la, r.a.data().begin() + static_cast<std::ptrdiff_t>(n * la));
        in += static_cast<std::ptrdiff_t>(la);
        std::copy_n(in, lb, r.b.data().begin() + static_cast<std::ptrdiff_t>(n * lb));
        in += static_cast<std::ptrdiff_t>(lb);
    }
    return r;
}

Tensor sigmoid(const Tensor& x) {
    Tensor y = x;
    for (double& v : y.data()) {
        if (v >= 0.0) {
            v = 1.0 / (1.0 + std::exp(-v));
        } else {
            const double e = std::exp(v);
            v = e / (1.0 + e);
        }
    }
    return y;
}

Tensor sigmoid_backward(const Tensor& y, const Tensor& dy) {
    if (y.shape() != dy.shape()) {
        shape_error("sigmoid_backward", "y " + to_string(y.shape()) + " vs dy " + to_string(dy.shape()));
    }
    Tensor dx(y.shape());
    for (std::size_t i = 0; i < y.numel(); ++i) dx[i] = dy[i] * y[i] * (1.0 - y[i]);
    return dx;
}

LossResult bce_dice_loss(const Tensor& pred, const Tensor& mask) {
    if (pred.shape() != mask.shape()) {
        shape_error("bce_dice_loss",
                    "pred " + to_string(pred.shape()) + " vs mask " + to_string(mask.shape()));
    }
    for (std::size_t i = 0; i < mask.numel(); ++i) {
        if (mask[i] != 0.0 && mask[i] != 1.0) {
            throw std::invalid_argument("bce_dice_loss: mask value " + std::to_string(mask[i]) +
                                        " at index " + std::to_string(i) + " is not 0 or 1");
        }
    }

    const Shape& s = pred.shape();
    const std::size_t per_sample = s.c * s.plane();
    const double total = static_cast<double>(pred.numel());
    const double batch = static_cast<double>(s.n);

    LossResult r;
    r.dpred = Tensor(s);
    for (std::size_t n = 0; n < s.n; ++n) {
        const std::size_t base = n * per_sample;
        double inter = 0.0;
        double psum = 0.0;
        double msum = 0.0;
        for (std::size_t k = base; k < base + per_sample; ++k) {
            const double p = std::clamp(pred[k], kProbClamp, 1.0 - kProbClamp);
            const double m = mask[k];
            r.bce -= m * std::log(p) + (1.0 - m) * std::log(1.0 - p);
            r.dpred[k] = -(m / p - (1.0 - m) / (1.0 - p)) / total;
            inter += p * m;
            psum += p;
            msum += m;
        }
        const double denom = psum + msum + kDiceSmooth;
        const double numer = 2.0 * inter + kDiceSmooth;
        r.dice_loss += 1.0 - numer / denom;
        for (std::size_t k = base; k < base + per_sample; ++k) {
            const double m = mask[k];
            const double ddice = (2.0 * m * denom - numer) / (denom * denom);
            r.dpred[k] -= ddice / batch;
        }
    }
    r.bce /= total;
    r.dice_loss /= batch;
    r.loss = r.bce + r.dice_loss;
    return r;
}

}  // namespace miniseg
