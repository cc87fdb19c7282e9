#include "topoembed/nn/layers.hpp"

#include "topoembed/error.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace topoembed::nn {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ColMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor>;

void init_uniform(std::vector<double>& values, double bound, Rng& rng) {
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (auto& v : values) {
        v = dist(rng);
    }
}

void expect_channels(const Shape& s, int channels, const char* layer) {
    require(s.c == channels, ErrorKind::Contract,
            std::string(layer) + " expects " + std::to_string(channels) + " channels, got " + s.str());
}

} // namespace

// ---------------------------------------------------------------- Conv2d

Conv2d::Conv2d(int in_channels, int out_channels, int kernel, int stride, Padding pad)
    : in_(in_channels), out_(out_channels), k_(kernel), stride_(stride), pad_(pad),
      weight_("weight", static_cast<std::size_t>(out_channels) * in_channels * kernel * kernel),
      bias_("bias", static_cast<std::size_t>(out_channels)) {}

std::unique_ptr<Layer> Conv2d::clone() const {
    auto copy = std::make_unique<Conv2d>(*this);
    copy->cols_.clear();
    return copy;
}

std::string Conv2d::describe() const {
    std::ostringstream out;
    out << "Conv2d(" << in_ << "->" << out_ << ", k=" << k_ << ", s=" << stride_ << ", pad=" << pad_.top << ','
        << pad_.left << ',' << pad_.bottom << ',' << pad_.right << ')';
    return out.str();
}

Shape Conv2d::output_shape(const Shape& in) const {
    return {in.n, out_, (in.h + pad_.top + pad_.bottom - k_) / stride_ + 1,
            (in.w + pad_.left + pad_.right - k_) / stride_ + 1};
}

namespace {

// Row r = (c, ky, kx) of the unrolled input holds, for every output position
// (n, oy, ox), the input pixel that kernel tap touches (zero in the padding).
template <bool Scatter>
void unroll(const Shape& s, const Shape& o, int k, int stride, const Padding& pad, double* image, double* cols) {
    const int plane = o.h * o.w;
    const std::size_t width = static_cast<std::size_t>(s.n) * plane;
    int r = 0;
    for (int c = 0; c < s.c; ++c) {
        for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx, ++r) {
                double* row = cols + static_cast<std::size_t>(r) * width;
                // Output columns whose input column lies inside the image.
                int ox_lo = 0;
                while (ox_lo < o.w && ox_lo * stride + kx - pad.left < 0) {
                    ++ox_lo;
                }
                int ox_hi = o.w;
                while (ox_hi > ox_lo && (ox_hi - 1) * stride + kx - pad.left >= s.w) {
                    --ox_hi;
                }
                for (int n = 0; n < s.n; ++n) {
                    double* src_plane = image + (static_cast<std::size_t>(n) * s.c + c) * s.h * s.w;
                    for (int oy = 0; oy < o.h; ++oy) {
                        const int iy = oy * stride + ky - pad.top;
                        double* dst = row + static_cast<std::size_t>(n) * plane + oy * o.w;
                        if (iy < 0 || iy >= s.h) {
                            continue;
                        }
                        double* src = src_plane + static_cast<std::size_t>(iy) * s.w + kx - pad.left;
                        if (stride == 1) {
                            for (int ox = ox_lo; ox < ox_hi; ++ox) {
                                if constexpr (Scatter) {
                                    src[ox] += dst[ox];
                                } else {
                                    dst[ox] = src[ox];
                                }
                            }
                        } else {
                            for (int ox = ox_lo; ox < ox_hi; ++ox) {
                                if constexpr (Scatter) {
                                    src[ox * stride] += dst[ox];
                                } else {
                                    dst[ox] = src[ox * stride];
                                }
                            }
                        }
                    }
                }
            }
        }
    }
}

} // namespace

Tensor Conv2d::run(const Tensor& x, std::vector<double>* cols_cache) const {
    const Shape& s = x.shape();
    expect_channels(s, in_, "Conv2d");
    const Shape o = output_shape(s);
    require(o.h > 0 && o.w > 0, ErrorKind::Contract, "Conv2d input " + s.str() + " too small");
    const int rows = in_ * k_ * k_;
    const int plane = o.h * o.w;
    const int cols = s.n * plane;

    std::vector<double> local;
    std::vector<double>& buf = cols_cache != nullptr ? *cols_cache : local;
    buf.assign(static_cast<std::size_t>(rows) * cols, 0.0);
    unroll<false>(s, o, k_, stride_, pad_, const_cast<double*>(x.data()), buf.data());

    Eigen::Map<const RowMatrix> w(weight_.value.data(), out_, rows);
    Eigen::Map<const RowMatrix> colm(buf.data(), rows, cols);
    RowMatrix y = w * colm;
    Tensor out(o);
    for (int n = 0; n < s.n; ++n) {
        for (int c = 0; c < out_; ++c) {
            double* dst = out.data() + out.index(n, c, 0, 0);
            const double* src = y.data() + static_cast<std::size_t>(c) * cols + static_cast<std::size_t>(n) * plane;
            const double b = bias_.value[static_cast<std::size_t>(c)];
            for (int p = 0; p < plane; ++p) {
                dst[p] = src[p] + b;
            }
        }
    }
    return out;
}

Tensor Conv2d::infer(const Tensor& x) const {
    return run(x, nullptr);
}

Tensor Conv2d::forward(const Tensor& x, Mode) {
    in_shape_ = x.shape();
    return run(x, &cols_);
}

Tensor Conv2d::backward(const Tensor& grad_out) {
    const Shape& s = in_shape_;
    const Shape o = output_shape(s);
    require(grad_out.shape() == o, ErrorKind::Contract, "Conv2d backward shape mismatch");
    const int rows = in_ * k_ * k_;
    const int plane = o.h * o.w;
    const int cols = s.n * plane;

    RowMatrix g(out_, cols);
    for (int n = 0; n < s.n; ++n) {
        for (int c = 0; c < out_; ++c) {
            std::copy_n(grad_out.data() + grad_out.index(n, c, 0, 0), plane,
                        g.data() + static_cast<std::size_t>(c) * cols + static_cast<std::size_t>(n) * plane);
        }
    }
    Eigen::Map<const RowMatrix> colm(cols_.data(), rows, cols);
    Eigen::Map<RowMatrix> dw(weight_.grad.data(), out_, rows);
    dw.noalias() += g * colm.transpose();
    Eigen::Map<Eigen::VectorXd> db(bias_.grad.data(), out_);
    db += g.rowwise().sum();

    Eigen::Map<const RowMatrix> w(weight_.value.data(), out_, rows);
    RowMatrix dcols = w.transpose() * g;
    Tensor dx(s);
    unroll<true>(s, o, k_, stride_, pad_, dx.data(), dcols.data());
    return dx;
}

void Conv2d::collect_parameters(std::vector<Parameter*>& out) {
    out.push_back(&weight_);
    out.push_back(&bias_);
}

void Conv2d::initialize(Rng& rng) {
    init_uniform(weight_.value, 1.0 / std::sqrt(static_cast<double>(in_ * k_ * k_)), rng);
    std::fill(bias_.value.begin(), bias_.value.end(), 0.0);
}

// ----------------------------------------------------------- BatchNorm2d

BatchNorm2d::BatchNorm2d(int channels, double momentum, double eps)
    : channels_(channels), momentum_(momentum), eps_(eps), gamma_("gamma", static_cast<std::size_t>(channels)),
      beta_("beta", static_cast<std::size_t>(channels)), running_mean_(static_cast<std::size_t>(channels), 0.0),
      running_var_(static_cast<std::size_t>(channels), 1.0) {
    std::fill(gamma_.value.begin(), gamma_.value.end(), 1.0);
}

std::unique_ptr<Layer> BatchNorm2d::clone() const {
    auto copy = std::make_unique<BatchNorm2d>(*this);
    copy->xhat_ = Tensor();
    return copy;
}

std::string BatchNorm2d::describe() const {
    return "BatchNorm2d(" + std::to_string(channels_) + ")";
}

Tensor BatchNorm2d::infer(const Tensor& x) const {
    const Shape& s = x.shape();
    expect_channels(s, channels_, "BatchNorm2d");
    Tensor out(s);
    const std::size_t plane = static_cast<std::size_t>(s.h) * s.w;
    for (int c = 0; c < channels_; ++c) {
        const auto ci = static_cast<std::size_t>(c);
        const double scale = gamma_.value[ci] / std::sqrt(running_var_[ci] + eps_);
        const double shift = beta_.value[ci] - running_mean_[ci] * scale;
        for (int n = 0; n < s.n; ++n) {
            const double* src = x.data() + x.index(n, c, 0, 0);
            double* dst = out.data() + out.index(n, c, 0, 0);
            for (std::size_t p = 0; p < plane; ++p) {
                dst[p] = src[p] * scale + shift;
            }
        }
    }
    return out;
}

Tensor BatchNorm2d::forward(const Tensor& x, Mode mode) {
    const Shape& s = x.shape();
    expect_channels(s, channels_, "BatchNorm2d");
    mode_ = mode;
    xhat_ = Tensor(s);
    inv_std_.assign(static_cast<std::size_t>(channels_), 0.0);
    Tensor out(s);
    const std::size_t plane = static_cast<std::size_t>(s.h) * s.w;
    const double count = static_cast<double>(plane) * s.n;
    for (int c = 0; c < channels_; ++c) {
        const auto ci = static_cast<std::size_t>(c);
        double mean = running_mean_[ci];
        double var = running_var_[ci];
        if (mode == Mode::Train) {
            double sum = 0.0;
            for (int n = 0; n < s.n; ++n) {
                const double* src = x.data() + x.index(n, c, 0, 0);
                for (std::size_t p = 0; p < plane; ++p) {
                    sum += src[p];
                }
            }
            mean = sum / count;
            double sq = 0.0;
            for (int n = 0; n < s.n; ++n) {
                const double* src = x.data() + x.index(n, c, 0, 0);
                for (std::size_t p = 0; p < plane; ++p) {
                    sq += (src[p] - mean) * (src[p] - mean);
                }
            }
            var = sq / count;
            const double unbiased = count > 1.0 ? sq / (count - 1.0) : var;
            running_mean_[ci] = (1.0 - momentum_) * running_mean_[ci] + momentum_ * mean;
            running_var_[ci] = (1.0 - momentum_) * running_var_[ci] + momentum_ * unbiased;
        }
        const double inv = 1.0 / std::sqrt(var + eps_);
        inv_std_[ci] = inv;
        for (int n = 0; n < s.n; ++n) {
            const double* src = x.data() + x.index(n, c, 0, 0);
            double* xh = xhat_.data() + xhat_.index(n, c, 0, 0);
            double* dst = out.data() + out.index(n, c, 0, 0);
            for (std::size_t p = 0; p < plane; ++p) {
                xh[p] = (src[p] - mean) * inv;
                dst[p] = gamma_.value[ci] * xh[p] + beta_.value[ci];
            }
        }
    }
    return out;
}

Tensor BatchNorm2d::backward(const Tensor& grad_out) {
    const Shape& s = xhat_.shape();
    require(grad_out.shape() == s, ErrorKind::Contract, "BatchNorm2d backward shape mismatch");
    Tensor dx(s);
    const std::size_t plane = static_cast<std::size_t>(s.h) * s.w;
    const double count = static_cast<double>(plane) * s.n;
    for (int c = 0; c < channels_; ++c) {
        const auto ci = static_cast<std::size_t>(c);
        double sum_dy = 0.0;
        double sum_dy_xhat = 0.0;
        for (int n = 0; n < s.n; ++n) {
            const double* dy = grad_out.data() + grad_out.index(n, c, 0, 0);
            const double* xh = xhat_.data() + xhat_.index(n, c, 0, 0);
            for (std::size_t p = 0; p < plane; ++p) {
                sum_dy += dy[p];
                sum_dy_xhat += dy[p] * xh[p];
            }
        }
        gamma_.grad[ci] += sum_dy_xhat;
        beta_.grad[ci] += sum_dy;
        const double g = gamma_.value[ci] * inv_std_[ci];
        for (int n = 0; n < s.n; ++n) {
            const double* dy = grad_out.data() + grad_out.index(n, c, 0, 0);
            const double* xh = xhat_.data() + xhat_.index(n, c, 0, 0);
            double* out = dx.data() + dx.index(n, c, 0, 0);
            for (std::size_t p = 0; p < plane; ++p) {
                out[p] = mode_ == Mode::Train ? g * (dy[p] - sum_dy / count - xh[p] * sum_dy_xhat / count) : g * dy[p];
            }
        }
    }
    return dx;
}

void BatchNorm2d::collect_parameters(std::vector<Parameter*>& out) {
    out.push_back(&gamma_);
    out.push_back(&beta_);
}

void BatchNorm2d::collect_buffers(std::vector<std::vector<double>*>& out) {
    out.push_back(&running_mean_);
    out.push_back(&running_var_);
}

void BatchNorm2d::initialize(Rng&) {
    std::fill(gamma_.value.begin(), gamma_.value.end(), 1.0);
    std::fill(beta_.value.begin(), beta_.value.end(), 0.0);
    std::fill(running_mean_.begin(), running_mean_.end(), 0.0);
    std::fill(running_var_.begin(), running_var_.end(), 1.0);
}

// ------------------------------------------------------------------ ReLU

Tensor ReLU::infer(const Tensor& x) const {
    Tensor out = x;
    for (auto& v : out.values()) {
        v = v > 0.0 ? v : 0.0;
    }
    return out;
}

Tensor ReLU::forward(const Tensor& x, Mode) {
    output_ = infer(x);
    return output_;
}

Tensor ReLU::backward(const Tensor& grad_out) {
    require(grad_out.shape() == output_.shape(), ErrorKind::Contract, "ReLU backward shape mismatch");
    Tensor dx = grad_out;
    for (std::size_t i = 0; i < dx.size(); ++i) {
        if (!(output_[i] > 0.0)) {
            dx[i] = 0.0;
        }
    }
    return dx;
}

// ------------------------------------------------------------- MaxPool2d

Tensor MaxPool2d::run(const Tensor& x, std::vector<std::size_t>* argmax) const {
    const Shape& s = x.shape();
    const Shape o = output_shape(s);
    require(o.h > 0 && o.w > 0, ErrorKind::Contract, "MaxPool2d input " + s.str() + " too small");
    Tensor out(o);
    if (argmax != nullptr) {
        argmax->assign(o.size(), 0);
    }
    std::size_t k = 0;
    for (int n = 0; n < s.n; ++n) {
        for (int c = 0; c < s.c; ++c) {
            for (int oy = 0; oy < o.h; ++oy) {
                for (int ox = 0; ox < o.w; ++ox, ++k) {
                    std::size_t best = x.index(n, c, 2 * oy, 2 * ox);
                    for (int dy = 0; dy < 2; ++dy) {
                        for (int dx = 0; dx < 2; ++dx) {
                            const auto idx = x.index(n, c, 2 * oy + dy, 2 * ox + dx);
                            if (x[idx] > x[best]) {
                                best = idx;
                            }
                        }
                    }
                    out[k] = x[best];
                    if (argmax != nullptr) {
                        (*argmax)[k] = best;
                    }
                }
            }
        }
    }
    return out;
}

Tensor MaxPool2d::infer(const Tensor& x) const {
    return run(x, nullptr);
}

Tensor MaxPool2d::forward(const Tensor& x, Mode) {
    in_shape_ = x.shape();
    return run(x, &argmax_);
}

Tensor MaxPool2d::backward(const Tensor& grad_out) {
    require(grad_out.size() == argmax_.size(), ErrorKind::Contract, "MaxPool2d backward shape mismatch");
    Tensor dx(in_shape_);
    for (std::size_t k = 0; k < argmax_.size(); ++k) {
        dx[argmax_[k]] += grad_out[k];
    }
    return dx;
}

// ------------------------------------------------------------ Upsample2x

Tensor Upsample2x::infer(const Tensor& x) const {
    return resize_bilinear(x, x.shape().h * 2, x.shape().w * 2);
}

Tensor Upsample2x::forward(const Tensor& x, Mode) {
    in_shape_ = x.shape();
    return infer(x);
}

Tensor Upsample2x::backward(const Tensor& grad_out) {
    const Shape& s = in_shape_;
    const Shape o = output_shape(s);
    require(grad_out.shape() == o, ErrorKind::Contract, "Upsample2x backward shape mismatch");
    // Adjoint of resize_bilinear: scatter each output gradient to its taps.
    auto taps = [](int in, int out, int o_idx, int& i0, int& i1, double& w1) {
        double src = (o_idx + 0.5) * in / out - 0.5;
        if (src < 0.0) {
            src = 0.0;
        }
        i0 = std::min(static_cast<int>(std::floor(src)), in - 1);
        i1 = std::min(i0 + 1, in - 1);
        w1 = src - i0;
    };
    Tensor dx(s);
    for (int n = 0; n < s.n; ++n) {
        for (int c = 0; c < s.c; ++c) {
            for (int oy = 0; oy < o.h; ++oy) {
                int y0 = 0;
                int y1 = 0;
                double wy = 0.0;
                taps(s.h, o.h, oy, y0, y1, wy);
                for (int ox = 0; ox < o.w; ++ox) {
                    int x0 = 0;
                    int x1 = 0;
                    double wx = 0.0;
                    taps(s.w, o.w, ox, x0, x1, wx);
                    const double g = grad_out.at(n, c, oy, ox);
                    dx.at(n, c, y0, x0) += (1 - wy) * (1 - wx) * g;
                    dx.at(n, c, y0, x1) += (1 - wy) * wx * g;
                    dx.at(n, c, y1, x0) += wy * (1 - wx) * g;
                    dx.at(n, c, y1, x1) += wy * wx * g;
                }
            }
        }
    }
    return dx;
}

// --------------------------------------------------------------- Flatten

Tensor Flatten::infer(const Tensor& x) const {
    return x.reshaped(output_shape(x.shape()));
}

Tensor Flatten::forward(const Tensor& x, Mode) {
    in_shape_ = x.shape();
    return infer(x);
}

Tensor Flatten::backward(const Tensor& grad_out) {
    return grad_out.reshaped(in_shape_);
}

// ---------------------------------------------------------------- Linear

Linear::Linear(int in_features, int out_features)
    : in_(in_features), out_(out_features),
      weight_("weight", static_cast<std::size_t>(in_features) * out_features),
      bias_("bias", static_cast<std::size_t>(out_features)) {}

std::unique_ptr<Layer> Linear::clone() const {
    auto copy = std::make_unique<Linear>(*this);
    copy->input_ = Tensor();
    return copy;
}

std::string Linear::describe() const {
    return "Linear(" + std::to_string(in_) + "->" + std::to_string(out_) + ")";
}

Tensor Linear::infer(const Tensor& x) const {
    const Shape& s = x.shape();
    require(static_cast<int>(s.sample_size()) == in_, ErrorKind::Contract,
            "Linear expects " + std::to_string(in_) + " features, got " + s.str());
    Eigen::Map<const RowMatrix> w(weight_.value.data(), out_, in_);
    Eigen::Map<const ColMatrix> xm(x.data(), in_, s.n);
    Tensor out({s.n, out_, 1, 1});
    Eigen::Map<ColMatrix> y(out.data(), out_, s.n);
    y.noalias() = w * xm;
    Eigen::Map<const Eigen::VectorXd> b(bias_.value.data(), out_);
    y.colwise() += b;
    return out;
}

Tensor Linear::forward(const Tensor& x, Mode) {
    input_ = x;
    return infer(x);
}

Tensor Linear::backward(const Tensor& grad_out) {
    const Shape& s = input_.shape();
    require(grad_out.shape() == Shape{s.n, out_, 1, 1}, ErrorKind::Contract, "Linear backward shape mismatch");
    Eigen::Map<const ColMatrix> g(grad_out.data(), out_, s.n);
    Eigen::Map<const ColMatrix> xm(input_.data(), in_, s.n);
    Eigen::Map<RowMatrix> dw(weight_.grad.data(), out_, in_);
    dw.noalias() += g * xm.transpose();
    Eigen::Map<Eigen::VectorXd> db(bias_.grad.data(), out_);
    db += g.rowwise().sum();
    Eigen::Map<const RowMatrix> w(weight_.value.data(), out_, in_);
    Tensor dx(s);
    Eigen::Map<ColMatrix> dxm(dx.data(), in_, s.n);
    dxm.noalias() = w.transpose() * g;
    return dx;
}

void Linear::collect_parameters(std::vector<Parameter*>& out) {
    out.push_back(&weight_);
    out.push_back(&bias_);
}

void Linear::initialize(Rng& rng) {
    init_uniform(weight_.value, 1.0 / std::sqrt(static_cast<double>(in_)), rng);
    std::fill(bias_.value.begin(), bias_.value.end(), 0.0);
}

// ------------------------------------------------------------ Sequential

Sequential::Sequential(const Sequential& other) {
    layers_.reserve(other.layers_.size());
    for (const auto& l : other.layers_) {
        layers_.push_back(l->clone());
    }
}

Sequential& Sequential::operator=(const Sequential& other) {
    if (this != &other) {
        Sequential copy(other);
        layers_ = std::move(copy.layers_);
    }
    return *this;
}

std::string Sequential::describe() const {
    std::ostringstream out;
    out << "Sequential[";
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        out << (i ? ", " : "") << layers_[i]->describe();
    }
    out << ']';
    return out.str();
}

Shape Sequential::output_shape(const Shape& in) const {
    Shape s = in;
    for (const auto& l : layers_) {
        s = l->output_shape(s);
    }
    return s;
}

Tensor Sequential::infer(const Tensor& x) const {
    Tensor h = x;
    for (const auto& l : layers_) {
        h = l->infer(h);
    }
    return h;
}

Tensor Sequential::forward(const Tensor& x, Mode mode) {
    Tensor h = x;
    for (auto& l : layers_) {
        h = l->forward(h, mode);
    }
    return h;
}

Tensor Sequential::backward(const Tensor& grad_out) {
    Tensor g = grad_out;
    for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) {
        g = (*it)->backward(g);
    }
    return g;
}

void Sequential::collect_parameters(std::vector<Parameter*>& out) {
    for (auto& l : layers_) {
        l->collect_parameters(out);
    }
}

void Sequential::collect_buffers(std::vector<std::vector<double>*>& out) {
    for (auto& l : layers_) {
        l->collect_buffers(out);
    }
}

void Sequential::initialize(Rng& rng) {
    for (auto& l : layers_) {
        l->initialize(rng);
    }
}

std::vector<Shape> Sequential::trace_shapes(const Tensor& x) const {
    std::vector<Shape> shapes;
    Tensor h = x;
    for (const auto& l : layers_) {
        h = l->infer(h);
        shapes.push_back(h.shape());
    }
    return shapes;
}

std::vector<Parameter*> Sequential::parameters() {
    std::vector<Parameter*> out;
    collect_parameters(out);
    return out;
}

std::vector<const Parameter*> Sequential::parameters() const {
    auto params = const_cast<Sequential*>(this)->parameters();
    return {params.begin(), params.end()};
}

std::vector<std::vector<double>*> Sequential::buffers() {
    std::vector<std::vector<double>*> out;
    collect_buffers(out);
    return out;
}

std::vector<const std::vector<double>*> Sequential::buffers() const {
    auto bufs = const_cast<Sequential*>(this)->buffers();
    return {bufs.begin(), bufs.end()};
}

std::size_t Sequential::parameter_count() const {
    std::size_t total = 0;
    for (const auto* p : parameters()) {
        total += p->value.size();
    }
    return total;
}

void Sequential::zero_grad() {
    for (auto* p : parameters()) {
        std::fill(p->grad.begin(), p->grad.end(), 0.0);
    }
}

} // namespace topoembed::nn
