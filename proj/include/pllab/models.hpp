#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "pllab/numkit.hpp"

namespace pllab {

/// Parameter gradients laid out like the owning model: one weight matrix per
/// layer plus an optional bias vector (empty when the layer has none).
struct ParamGrads {
    std::vector<DenseMatrix> weights;
    std::vector<Vec> biases;

    void add_scaled(const ParamGrads& other, double scale);
    void scale(double s);
    bool all_finite() const;
};

/// Intermediate activations retained by forward() so backward() can run the
/// chain rule without recomputation.
struct ForwardCache {
    Vec input;
    std::vector<Vec> pre_acts;  // per layer, before activation
    std::vector<Vec> acts;      // per layer, after activation (last == logits)
};

enum class Activation { Relu, Identity };

/// A differentiable logit function g: R^d -> R^m trained by plain SGD. The
/// softmax and the loss live outside; backward consumes dLoss/dz.
class Model {
public:
    virtual ~Model() = default;
    virtual int input_dim() const = 0;
    virtual int output_dim() const = 0;

    /// Logits for one input; fills cache when given.
    virtual Vec forward(std::span<const double> x, ForwardCache* cache = nullptr) const = 0;

    /// Zero-initialized gradients with this model's shapes.
    virtual ParamGrads zero_grads() const = 0;

    /// Accumulates exact parameter gradients of the end-to-end loss into out,
    /// given dLoss/dz for the forward pass that produced cache.
    virtual void backward(const ForwardCache& cache, std::span<const double> grad_z,
                          ParamGrads& out) const = 0;

    /// theta <- theta - lr * (grad + weight_decay * theta). Rejects lr <= 0
    /// and non-finite gradients.
    virtual void sgd_step(const ParamGrads& grads, double lr, double weight_decay = 0.0) = 0;

    virtual std::unique_ptr<Model> clone() const = 0;
    virtual std::string describe() const = 0;
};

/// z = theta * x, theta is m x d, no bias.
class SoftmaxRegression : public Model {
public:
    explicit SoftmaxRegression(DenseMatrix theta);
    static SoftmaxRegression init(int d, int m, Rng& rng);

    int input_dim() const override { return theta_.cols(); }
    int output_dim() const override { return theta_.rows(); }
    Vec forward(std::span<const double> x, ForwardCache* cache = nullptr) const override;
    ParamGrads zero_grads() const override;
    void backward(const ForwardCache& cache, std::span<const double> grad_z,
                  ParamGrads& out) const override;
    void sgd_step(const ParamGrads& grads, double lr, double weight_decay = 0.0) override;
    std::unique_ptr<Model> clone() const override;
    std::string describe() const override;

    const DenseMatrix& theta() const { return theta_; }
    DenseMatrix& theta() { return theta_; }

private:
    DenseMatrix theta_;
};

/// Fully connected network with biased layers; hidden activations are ReLU and
/// the final layer emits raw logits.
class Mlp : public Model {
public:
    struct Layer {
        DenseMatrix w;  // out x in
        Vec b;
        Activation act = Activation::Identity;
    };

    explicit Mlp(std::vector<Layer> layers);
    /// Glorot-initialized network d -> hidden[0] -> ... -> m, zero biases.
    static Mlp init(int d, const std::vector<int>& hidden, int m, Rng& rng);

    int input_dim() const override { return layers_.front().w.cols(); }
    int output_dim() const override { return layers_.back().w.rows(); }
    Vec forward(std::span<const double> x, ForwardCache* cache = nullptr) const override;
    ParamGrads zero_grads() const override;
    void backward(const ForwardCache& cache, std::span<const double> grad_z,
                  ParamGrads& out) const override;
    void sgd_step(const ParamGrads& grads, double lr, double weight_decay = 0.0) override;
    std::unique_ptr<Model> clone() const override;
    std::string describe() const override;

    const std::vector<Layer>& layers() const { return layers_; }

private:
    std::vector<Layer> layers_;
};

/// JSON checkpoint: architecture descriptor plus decimal weight arrays
/// (doubles round-trip exactly through the serializer).
void save_checkpoint(const Model& model, const std::string& path);
std::unique_ptr<Model> load_checkpoint(const std::string& path);

}  // namespace pllab
