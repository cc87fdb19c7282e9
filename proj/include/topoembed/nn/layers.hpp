#pragma once

#include "topoembed/nn/tensor.hpp"
#include "topoembed/util.hpp"

#include <memory>
#include <string>
#include <vector>

namespace topoembed::nn {

struct Parameter {
    std::string name;
    std::vector<double> value;
    std::vector<double> grad;

    explicit Parameter(std::string n = {}, std::size_t size = 0) : name(std::move(n)), value(size, 0.0), grad(size, 0.0) {}
};

/// Train: batch statistics, running averages updated. Eval: running averages.
/// Both modes cache what backward() needs.
enum class Mode { Train, Eval };

class Layer {
public:
    virtual ~Layer() = default;

    virtual std::unique_ptr<Layer> clone() const = 0;
    virtual std::string describe() const = 0;
    virtual Shape output_shape(const Shape& in) const = 0;

    /// Pure inference with running statistics; safe to call concurrently.
    virtual Tensor infer(const Tensor& x) const = 0;

    virtual Tensor forward(const Tensor& x, Mode mode) = 0;

    /// Accumulates parameter gradients and returns d(loss)/d(input) for the
    /// most recent forward().
    virtual Tensor backward(const Tensor& grad_out) = 0;

    virtual void collect_parameters(std::vector<Parameter*>& out) { (void)out; }
    virtual void collect_buffers(std::vector<std::vector<double>*>& out) { (void)out; }
    virtual void initialize(Rng& rng) { (void)rng; }
};

struct Padding {
    int top = 0;
    int left = 0;
    int bottom = 0;
    int right = 0;

    static Padding uniform(int p) { return {p, p, p, p}; }
};

class Conv2d final : public Layer {
public:
    Conv2d(int in_channels, int out_channels, int kernel, int stride, Padding pad);

    std::unique_ptr<Layer> clone() const override;
    std::string describe() const override;
    Shape output_shape(const Shape& in) const override;
    Tensor infer(const Tensor& x) const override;
    Tensor forward(const Tensor& x, Mode mode) override;
    Tensor backward(const Tensor& grad_out) override;
    void collect_parameters(std::vector<Parameter*>& out) override;
    void initialize(Rng& rng) override;

private:
    Tensor run(const Tensor& x, std::vector<double>* cols_cache) const;

    int in_;
    int out_;
    int k_;
    int stride_;
    Padding pad_;
    Parameter weight_;
    Parameter bias_;
    Shape in_shape_;
    std::vector<double> cols_;
};

class BatchNorm2d final : public Layer {
public:
    explicit BatchNorm2d(int channels, double momentum = 0.1, double eps = 1e-5);

    std::unique_ptr<Layer> clone() const override;
    std::string describe() const override;
    Shape output_shape(const Shape& in) const override { return in; }
    Tensor infer(const Tensor& x) const override;
    Tensor forward(const Tensor& x, Mode mode) override;
    Tensor backward(const Tensor& grad_out) override;
    void collect_parameters(std::vector<Parameter*>& out) override;
    void collect_buffers(std::vector<std::vector<double>*>& out) override;
    void initialize(Rng& rng) override;

private:
    int channels_;
    double momentum_;
    double eps_;
    Parameter gamma_;
    Parameter beta_;
    std::vector<double> running_mean_;
    std::vector<double> running_var_;
    Mode mode_ = Mode::Train;
    Tensor xhat_;
    std::vector<double> inv_std_;
};

class ReLU final : public Layer {
public:
    std::unique_ptr<Layer> clone() const override { return std::make_unique<ReLU>(*this); }
    std::string describe() const override { return "ReLU"; }
    Shape output_shape(const Shape& in) const override { return in; }
    Tensor infer(const Tensor& x) const override;
    Tensor forward(const Tensor& x, Mode mode) override;
    Tensor backward(const Tensor& grad_out) override;

private:
    Tensor output_;
};

class MaxPool2d final : public Layer {
public:
    std::unique_ptr<Layer> clone() const override { return std::make_unique<MaxPool2d>(*this); }
    std::string describe() const override { return "MaxPool2d(2)"; }
    Shape output_shape(const Shape& in) const override { return {in.n, in.c, in.h / 2, in.w / 2}; }
    Tensor infer(const Tensor& x) const override;
    Tensor forward(const Tensor& x, Mode mode) override;
    Tensor backward(const Tensor& grad_out) override;

private:
    Tensor run(const Tensor& x, std::vector<std::size_t>* argmax) const;

    Shape in_shape_;
    std::vector<std::size_t> argmax_;
};

/// Bilinear x2 upsampling, half-pixel centers.
class Upsample2x final : public Layer {
public:
    std::unique_ptr<Layer> clone() const override { return std::make_unique<Upsample2x>(*this); }
    std::string describe() const override { return "Upsample(x2, bilinear)"; }
    Shape output_shape(const Shape& in) const override { return {in.n, in.c, in.h * 2, in.w * 2}; }
    Tensor infer(const Tensor& x) const override;
    Tensor forward(const Tensor& x, Mode mode) override;
    Tensor backward(const Tensor& grad_out) override;

private:
    Shape in_shape_;
};

class Flatten final : public Layer {
public:
    std::unique_ptr<Layer> clone() const override { return std::make_unique<Flatten>(*this); }
    std::string describe() const override { return "Flatten"; }
    Shape output_shape(const Shape& in) const override { return {in.n, static_cast<int>(in.sample_size()), 1, 1}; }
    Tensor infer(const Tensor& x) const override;
    Tensor forward(const Tensor& x, Mode mode) override;
    Tensor backward(const Tensor& grad_out) override;

private:
    Shape in_shape_;
};

class Linear final : public Layer {
public:
    Linear(int in_features, int out_features);

    std::unique_ptr<Layer> clone() const override;
    std::string describe() const override;
    Shape output_shape(const Shape& in) const override { return {in.n, out_, 1, 1}; }
    Tensor infer(const Tensor& x) const override;
    Tensor forward(const Tensor& x, Mode mode) override;
    Tensor backward(const Tensor& grad_out) override;
    void collect_parameters(std::vector<Parameter*>& out) override;
    void initialize(Rng& rng) override;

private:
    int in_;
    int out_;
    Parameter weight_;
    Parameter bias_;
    Tensor input_;
};

/// Ordered container; itself a layer so stages can nest.
class Sequential final : public Layer {
public:
    Sequential() = default;
    Sequential(const Sequential& other);
    Sequential& operator=(const Sequential& other);
    Sequential(Sequential&&) noexcept = default;
    Sequential& operator=(Sequential&&) noexcept = default;

    template <typename L, typename... Args>
    L& add(Args&&... args) {
        auto layer = std::make_unique<L>(std::forward<Args>(args)...);
        auto& ref = *layer;
        layers_.push_back(std::move(layer));
        return ref;
    }
    void append(std::unique_ptr<Layer> layer) { layers_.push_back(std::move(layer)); }

    std::size_t size() const noexcept { return layers_.size(); }
    Layer& operator[](std::size_t i) { return *layers_[i]; }
    const Layer& operator[](std::size_t i) const { return *layers_[i]; }

    std::unique_ptr<Layer> clone() const override { return std::make_unique<Sequential>(*this); }
    std::string describe() const override;
    Shape output_shape(const Shape& in) const override;
    Tensor infer(const Tensor& x) const override;
    Tensor forward(const Tensor& x, Mode mode) override;
    Tensor backward(const Tensor& grad_out) override;
    void collect_parameters(std::vector<Parameter*>& out) override;
    void collect_buffers(std::vector<std::vector<double>*>& out) override;
    void initialize(Rng& rng) override;

    /// Output shapes after each top-level child during inference.
    std::vector<Shape> trace_shapes(const Tensor& x) const;

    std::vector<Parameter*> parameters();
    std::vector<const Parameter*> parameters() const;
    std::vector<std::vector<double>*> buffers();
    std::vector<const std::vector<double>*> buffers() const;
    std::size_t parameter_count() const;
    void zero_grad();

private:
    std::vector<std::unique_ptr<Layer>> layers_;
};

} // namespace topoembed::nn
