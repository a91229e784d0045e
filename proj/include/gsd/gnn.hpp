#pragma once

#include "gsd/coarsening.hpp"
#include "gsd/graph.hpp"

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace gsd {

enum class ConvMode { NonParametric, Spline };

std::string to_string(ConvMode m);
ConvMode conv_mode_from_string(const std::string& s);

/// Cubic B-spline interpolation kernel on uniform clamped knots over
/// [0,1], evaluated at eigenvalue-rank positions i/(n-1). Rows sum to 1.
struct SplineKernel {
    Matrix basis;  // n x q
    int q = 0;
};

SplineKernel spline_kernel(int n, int q);

struct LayerToken {
    enum class Kind { GC, P, FC } kind;
    int arg;
};

struct NetworkSpec {
    std::vector<LayerToken> layers;
    ConvMode mode = ConvMode::NonParametric;
    int spline_q = 25;
    int class_count = 10;
};

/// Parses dash-separated tokens GC<depth>, P<stride>, FC<width>;
/// pooling strides must be powers of 2.
NetworkSpec parse_architecture(const std::string& s);

struct TrainConfig {
    double learning_rate = 1e-3;
    int batch_size = 64;
    int steps = 1500;
    std::uint64_t seed = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    double weight_decay = 5e-4;
    int eval_every = 50;
};

/// Sample features live in columns; row index c*n + v addresses channel
/// c at node v.
struct Dataset {
    Matrix features;
    std::vector<int> labels;
    int nodes = 0;
    int channels = 1;

    int size() const { return static_cast<int>(labels.size()); }
};

struct Param {
    Matrix value;
    Matrix grad;
    Matrix adam_m, adam_v;
    bool decay = false;  // weight decay applies (weights yes, biases no)
};

class Layer {
public:
    virtual ~Layer() = default;
    /// in: layer input, cached for backward. batch = sample count.
    virtual Matrix forward(const Matrix& in, int batch) = 0;
    /// Accumulates parameter gradients; returns input gradient unless
    /// need_input_grad is false.
    virtual Matrix backward(const Matrix& grad_out, bool need_input_grad) = 0;
    virtual std::vector<Param*> params() { return {}; }
};

/// Spectral graph convolution g = V sum_r diag(resp) V^T f + bias, with
/// the response either free per frequency or spline-interpolated.
class SpectralConvLayer : public Layer {
public:
    SpectralConvLayer(ConvMode mode, SpectralBasis basis, int in_channels, int out_channels,
                      int spline_q, std::uint64_t seed);

    Matrix forward(const Matrix& in, int batch) override;
    Matrix backward(const Matrix& grad_out, bool need_input_grad) override;
    std::vector<Param*> params() override;

    /// Current frequency responses, n x (M*R); spline mode multiplies
    /// out the kernel.
    Matrix responses() const;

    ConvMode mode;
    SpectralBasis basis;
    SplineKernel kernel;  // spline mode only
    int in_channels, out_channels;
    Param weight;  // NonParametric: n x (M*R); Spline: q x (M*R)
    Param bias;    // M x 1
    bool input_is_spectral = false;

private:
    Matrix spectral_in_;  // cached V^T input
    int batch_ = 0;
};

class ReluLayer : public Layer {
public:
    Matrix forward(const Matrix& in, int batch) override;
    Matrix backward(const Matrix& grad_out, bool need_input_grad) override;

private:
    Matrix mask_;
};

/// log2(stride) successive stride-2 max poolings from `level` upward.
class MaxPoolLayer : public Layer {
public:
    MaxPoolLayer(const PoolingPlan* plan, int level, int stride);

    Matrix forward(const Matrix& in, int batch) override;
    Matrix backward(const Matrix& grad_out, bool need_input_grad) override;

    int level, sublevels;

private:
    const PoolingPlan* plan_;
    std::vector<Eigen::MatrixXi> argmax_;  // per sublevel
    std::vector<int> in_rows_;
};

/// Node-major layout (n x C*B) -> flat columns (n*C x B).
class FlattenLayer : public Layer {
public:
    explicit FlattenLayer(int nodes) : nodes_(nodes) {}
    Matrix forward(const Matrix& in, int batch) override;
    Matrix backward(const Matrix& grad_out, bool need_input_grad) override;

private:
    int nodes_, channels_ = 0;
};

class DenseLayer : public Layer {
public:
    DenseLayer(int in_dim, int out_dim, std::uint64_t seed);
    Matrix forward(const Matrix& in, int batch) override;
    Matrix backward(const Matrix& grad_out, bool need_input_grad) override;
    std::vector<Param*> params() override;

    Param weight;  // out x in
    Param bias;    // out x 1

private:
    Matrix in_;
};

struct TrainTrace {
    std::vector<int> steps;
    std::vector<double> train_loss;
    std::vector<double> val_accuracy;
    bool diverged = false;
};

class Network {
public:
    /// Builds the layer stack over the plan's coarsening hierarchy;
    /// conv layers use the NormalizedLaplacian basis of each padded
    /// level graph. A final linear layer of class_count outputs is
    /// appended after the listed FC layers.
    Network(NetworkSpec spec, const PoolingPlan& plan, int in_channels, std::uint64_t seed);

    /// Scatter raw features into the padded, permuted layout; applies
    /// the first conv layer's forward GFT so repeated passes skip it.
    Matrix prepare_input(const Matrix& features) const;

    /// Logits for prepared input columns.
    Matrix forward(const Matrix& prepared, int batch);

    /// Mean softmax cross-entropy plus weight decay; fills every
    /// parameter's grad.
    double loss_and_grad(const Matrix& prepared, const std::vector<int>& labels);

    std::vector<int> predict(const Matrix& prepared);
    double accuracy(const Matrix& prepared, const std::vector<int>& labels);

    std::vector<Param*> params();
    const std::vector<std::unique_ptr<Layer>>& layers() const { return layers_; }
    std::vector<SpectralConvLayer*> conv_layers();
    const NetworkSpec& spec() const { return spec_; }
    int in_channels() const { return in_channels_; }
    double weight_decay_loss(double coefficient) const;

    void save_checkpoint(const std::string& path, const std::string& arch_string,
                         const std::string& plan_ref) const;
    void load_checkpoint(const std::string& path);

private:
    NetworkSpec spec_;
    const PoolingPlan* plan_;
    int in_channels_;
    std::vector<std::unique_ptr<Layer>> layers_;
    double decay_coeff_ = 0.0;  // set by loss_and_grad caller via train config

    friend TrainTrace train(Network& net, const Dataset& train_data, const Dataset& val_data,
                            const TrainConfig& cfg);

public:
    void set_weight_decay(double wd) { decay_coeff_ = wd; }
    double softmax_cross_entropy(const Matrix& logits, const std::vector<int>& labels,
                                 Matrix* grad_logits) const;
};

/// Mini-batch Adam; records train loss and validation accuracy every
/// eval_every steps. Aborts (diverged=true) if the loss stays above 10x
/// its initial value for 100 consecutive steps.
TrainTrace train(Network& net, const Dataset& train_data, const Dataset& val_data,
                 const TrainConfig& cfg);

void save_metric_trace_csv(const TrainTrace& trace, const std::string& path);

struct LogRegConfig {
    int steps = 2000;
    double reg = 1e-4;
};

/// Multinomial logistic regression by full-batch gradient descent with
/// l2 regularization; returns test accuracy.
double logreg(const Matrix& train_x, const std::vector<int>& train_y, const Matrix& test_x,
              const std::vector<int>& test_y, const LogRegConfig& cfg = {});

}  // namespace gsd
