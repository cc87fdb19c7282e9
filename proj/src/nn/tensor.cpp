#include "topoembed/nn/tensor.hpp"

#include "topoembed/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <sstream>

namespace topoembed::nn {

std::string Shape::str() const {
    std::ostringstream out;
    out << n << 'x' << c << 'x' << h << 'x' << w;
    return out.str();
}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(shape), data_(std::move(data)) {
    require(data_.size() == shape_.size(), ErrorKind::Contract,
            "tensor data size " + std::to_string(data_.size()) + " does not match shape " + shape_.str());
}

Tensor Tensor::reshaped(Shape shape) const {
    require(shape.size() == data_.size(), ErrorKind::Contract,
            "cannot reshape " + shape_.str() + " to " + shape.str());
    return Tensor(shape, data_);
}

Tensor Tensor::slice(int first, int count) const {
    require(first >= 0 && count >= 0 && first + count <= shape_.n, ErrorKind::Contract, "batch slice out of range");
    Shape s = shape_;
    s.n = count;
    const auto per = shape_.sample_size();
    std::vector<double> out(data_.begin() + static_cast<std::ptrdiff_t>(first * per),
                            data_.begin() + static_cast<std::ptrdiff_t>((first + count) * per));
    return Tensor(s, std::move(out));
}

bool Tensor::all_finite() const noexcept {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
    const auto& sa = a.shape();
    const auto& sb = b.shape();
    require(sa.n == sb.n && sa.h == sb.h && sa.w == sb.w, ErrorKind::Contract,
            "cannot concatenate " + sa.str() + " with " + sb.str());
    Tensor out({sa.n, sa.c + sb.c, sa.h, sa.w});
    const auto pa = sa.sample_size();
    const auto pb = sb.sample_size();
    for (int n = 0; n < sa.n; ++n) {
        std::copy_n(a.data() + n * pa, pa, out.data() + n * (pa + pb));
        std::copy_n(b.data() + n * pb, pb, out.data() + n * (pa + pb) + pa);
    }
    return out;
}

Tensor channel(const Tensor& t, int c) {
    const auto& s = t.shape();
    require(c >= 0 && c < s.c, ErrorKind::Contract, "channel index out of range");
    Tensor out({s.n, 1, s.h, s.w});
    const std::size_t plane = static_cast<std::size_t>(s.h) * s.w;
    for (int n = 0; n < s.n; ++n) {
        std::copy_n(t.data() + t.index(n, c, 0, 0), plane, out.data() + n * plane);
    }
    return out;
}

Tensor stack(const std::vector<Tensor>& samples) {
    require(!samples.empty(), ErrorKind::Contract, "cannot stack an empty list");
    Shape s = samples.front().shape();
    s.n = 0;
    for (const auto& t : samples) {
        require(t.shape().c == s.c && t.shape().h == s.h && t.shape().w == s.w, ErrorKind::Contract,
                "stack needs equal sample shapes");
        s.n += t.shape().n;
    }
    Tensor out(s);
    std::size_t offset = 0;
    for (const auto& t : samples) {
        std::copy_n(t.data(), t.size(), out.data() + offset);
        offset += t.size();
    }
    return out;
}

namespace {

struct Tap {
    int i0;
    int i1;
    double w1;
};

std::vector<Tap> bilinear_taps(int in, int out) {
    std::vector<Tap> taps(static_cast<std::size_t>(out));
    const double scale = static_cast<double>(in) / out;
    for (int o = 0; o < out; ++o) {
        double src = (o + 0.5) * scale - 0.5;
        if (src < 0.0) {
            src = 0.0;
        }
        int i0 = static_cast<int>(std::floor(src));
        i0 = std::min(i0, in - 1);
        const int i1 = std::min(i0 + 1, in - 1);
        taps[static_cast<std::size_t>(o)] = {i0, i1, src - i0};
    }
    return taps;
}

} // namespace

Tensor resize_bilinear(const Tensor& x, int out_h, int out_w) {
    const auto& s = x.shape();
    auto ty = bilinear_taps(s.h, out_h);
    auto tx = bilinear_taps(s.w, out_w);
    Tensor out({s.n, s.c, out_h, out_w});
    for (int n = 0; n < s.n; ++n) {
        for (int c = 0; c < s.c; ++c) {
            for (int oy = 0; oy < out_h; ++oy) {
                const auto& a = ty[static_cast<std::size_t>(oy)];
                for (int ox = 0; ox < out_w; ++ox) {
                    const auto& b = tx[static_cast<std::size_t>(ox)];
                    const double top = (1 - b.w1) * x.at(n, c, a.i0, b.i0) + b.w1 * x.at(n, c, a.i0, b.i1);
                    const double bot = (1 - b.w1) * x.at(n, c, a.i1, b.i0) + b.w1 * x.at(n, c, a.i1, b.i1);
                    out.at(n, c, oy, ox) = (1 - a.w1) * top + a.w1 * bot;
                }
            }
        }
    }
    return out;
}

} // namespace topoembed::nn
