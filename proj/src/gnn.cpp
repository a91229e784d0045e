#include "gsd/gnn.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <stdexcept>

namespace gsd {

namespace {

Matrix glorot_uniform(int rows, int cols, int fan_in, int fan_out, std::mt19937_64& rng) {
    double bound = std::sqrt(6.0 / (fan_in + fan_out));
    std::uniform_real_distribution<double> u(-bound, bound);
    Matrix m(rows, cols);
    for (int j = 0; j < cols; ++j)
        for (int i = 0; i < rows; ++i) m(i, j) = u(rng);
    return m;
}

Param make_param(Matrix value, bool decay) {
    Param p;
    p.grad = Matrix::Zero(value.rows(), value.cols());
    p.adam_m = p.grad;
    p.adam_v = p.grad;
    p.value = std::move(value);
    p.decay = decay;
    return p;
}

}  // namespace

// --- SpectralConvLayer ---

SpectralConvLayer::SpectralConvLayer(ConvMode mode_, SpectralBasis basis_, int in_channels_,
                                     int out_channels_, int spline_q, std::uint64_t seed)
    : mode(mode_), basis(std::move(basis_)), in_channels(in_channels_),
      out_channels(out_channels_) {
    std::mt19937_64 rng(seed);
    const int n = basis.n();
    const int mr = out_channels * in_channels;
    if (mode == ConvMode::Spline) {
        kernel = spline_kernel(n, spline_q);
        weight = make_param(glorot_uniform(spline_q, mr, in_channels, out_channels, rng), true);
    } else {
        weight = make_param(glorot_uniform(n, mr, in_channels, out_channels, rng), true);
    }
    bias = make_param(Matrix::Zero(out_channels, 1), false);
}

Matrix SpectralConvLayer::responses() const {
    return mode == ConvMode::Spline ? Matrix(kernel.basis * weight.value) : weight.value;
}

Matrix SpectralConvLayer::forward(const Matrix& in, int batch) {
    const int n = basis.n();
    const int r = in_channels, m = out_channels;
    if (in.rows() != n || in.cols() != static_cast<Eigen::Index>(r) * batch)
        throw std::invalid_argument("SpectralConvLayer: input shape mismatch");
    batch_ = batch;
    spectral_in_ = input_is_spectral ? in : Matrix(basis.vectors.transpose() * in);
    Matrix resp = responses();
    Matrix t(n, static_cast<Eigen::Index>(m) * batch);
    for (int b = 0; b < batch; ++b)
        for (int mo = 0; mo < m; ++mo) {
            auto col = t.col(b * m + mo);
            col = resp.col(mo * r).cwiseProduct(spectral_in_.col(b * r));
            for (int ri = 1; ri < r; ++ri)
                col += resp.col(mo * r + ri).cwiseProduct(spectral_in_.col(b * r + ri));
        }
    Matrix out = basis.vectors * t;
    for (int b = 0; b < batch; ++b)
        for (int mo = 0; mo < m; ++mo) out.col(b * m + mo).array() += bias.value(mo, 0);
    return out;
}

Matrix SpectralConvLayer::backward(const Matrix& grad_out, bool need_input_grad) {
    const int n = basis.n();
    const int r = in_channels, m = out_channels;
    const int batch = batch_;
    for (int b = 0; b < batch; ++b)
        for (int mo = 0; mo < m; ++mo) bias.grad(mo, 0) += grad_out.col(b * m + mo).sum();

    Matrix dt = basis.vectors.transpose() * grad_out;
    Matrix resp = responses();
    Matrix dresp = Matrix::Zero(n, static_cast<Eigen::Index>(m) * r);
    for (int b = 0; b < batch; ++b)
        for (int mo = 0; mo < m; ++mo)
            for (int ri = 0; ri < r; ++ri)
                dresp.col(mo * r + ri) +=
                    dt.col(b * m + mo).cwiseProduct(spectral_in_.col(b * r + ri));
    if (mode == ConvMode::Spline)
        weight.grad += kernel.basis.transpose() * dresp;
    else
        weight.grad += dresp;

    if (!need_input_grad) return {};
    Matrix dxs = Matrix::Zero(n, static_cast<Eigen::Index>(r) * batch);
    for (int b = 0; b < batch; ++b)
        for (int ri = 0; ri < r; ++ri) {
            auto col = dxs.col(b * r + ri);
            for (int mo = 0; mo < m; ++mo)
                col += resp.col(mo * r + ri).cwiseProduct(dt.col(b * m + mo));
        }
    return input_is_spectral ? dxs : Matrix(basis.vectors * dxs);
}

std::vector<Param*> SpectralConvLayer::params() { return {&weight, &bias}; }

// --- ReluLayer ---

Matrix ReluLayer::forward(const Matrix& in, int) {
    mask_ = (in.array() > 0.0).cast<double>();
    return in.cwiseProduct(mask_);
}

Matrix ReluLayer::backward(const Matrix& grad_out, bool) {
    // subgradient at 0 is 0
    return grad_out.cwiseProduct(mask_);
}

// --- MaxPoolLayer ---

MaxPoolLayer::MaxPoolLayer(const PoolingPlan* plan, int level_, int stride)
    : level(level_), plan_(plan) {
    sublevels = 0;
    for (int s = stride; s > 1; s /= 2) ++sublevels;
    if (level + sublevels > plan->depth())
        throw std::invalid_argument("MaxPoolLayer: stride exceeds coarsening depth");
}

Matrix MaxPoolLayer::forward(const Matrix& in, int) {
    Matrix cur = in;
    argmax_.clear();
    in_rows_.clear();
    for (int s = 0; s < sublevels; ++s) {
        int lvl = level + s;
        if (cur.rows() != plan_->padded_size(lvl))
            throw std::invalid_argument("MaxPoolLayer: row count mismatch");
        for (int pos = 0; pos < cur.rows(); ++pos)
            if (plan_->is_fake(lvl, pos)) cur.row(pos).setZero();
        in_rows_.push_back(static_cast<int>(cur.rows()));
        Matrix out(cur.rows() / 2, cur.cols());
        Eigen::MatrixXi arg(out.rows(), out.cols());
        for (int rr = 0; rr < out.rows(); ++rr)
            for (int c = 0; c < out.cols(); ++c) {
                // ties go to the lower row
                if (cur(2 * rr, c) >= cur(2 * rr + 1, c)) {
                    out(rr, c) = cur(2 * rr, c);
                    arg(rr, c) = 2 * rr;
                } else {
                    out(rr, c) = cur(2 * rr + 1, c);
                    arg(rr, c) = 2 * rr + 1;
                }
            }
        argmax_.push_back(std::move(arg));
        cur = std::move(out);
    }
    return cur;
}

Matrix MaxPoolLayer::backward(const Matrix& grad_out, bool) {
    Matrix cur = grad_out;
    for (int s = sublevels - 1; s >= 0; --s) {
        const auto& arg = argmax_[s];
        Matrix up = Matrix::Zero(in_rows_[s], cur.cols());
        for (int rr = 0; rr < cur.rows(); ++rr)
            for (int c = 0; c < cur.cols(); ++c) up(arg(rr, c), c) += cur(rr, c);
        int lvl = level + s;
        for (int pos = 0; pos < up.rows(); ++pos)
            if (plan_->is_fake(lvl, pos)) up.row(pos).setZero();
        cur = std::move(up);
    }
    return cur;
}

// --- FlattenLayer ---

Matrix FlattenLayer::forward(const Matrix& in, int batch) {
    channels_ = static_cast<int>(in.cols()) / batch;
    Matrix out(static_cast<Eigen::Index>(nodes_) * channels_, batch);
    for (int b = 0; b < batch; ++b)
        for (int c = 0; c < channels_; ++c)
            out.col(b).segment(static_cast<Eigen::Index>(c) * nodes_, nodes_) = in.col(b * channels_ + c);
    return out;
}

Matrix FlattenLayer::backward(const Matrix& grad_out, bool) {
    const int batch = static_cast<int>(grad_out.cols());
    Matrix in(nodes_, static_cast<Eigen::Index>(channels_) * batch);
    for (int b = 0; b < batch; ++b)
        for (int c = 0; c < channels_; ++c)
            in.col(b * channels_ + c) = grad_out.col(b).segment(static_cast<Eigen::Index>(c) * nodes_, nodes_);
    return in;
}

// --- DenseLayer ---

DenseLayer::DenseLayer(int in_dim, int out_dim, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    weight = make_param(glorot_uniform(out_dim, in_dim, in_dim, out_dim, rng), true);
    bias = make_param(Matrix::Zero(out_dim, 1), false);
}

Matrix DenseLayer::forward(const Matrix& in, int) {
    in_ = in;
    Matrix out = weight.value * in;
    out.colwise() += Vector(bias.value.col(0));
    return out;
}

Matrix DenseLayer::backward(const Matrix& grad_out, bool need_input_grad) {
    weight.grad += grad_out * in_.transpose();
    bias.grad.col(0) += grad_out.rowwise().sum();
    if (!need_input_grad) return {};
    return weight.value.transpose() * grad_out;
}

std::vector<Param*> DenseLayer::params() { return {&weight, &bias}; }

// --- Network ---

Network::Network(NetworkSpec spec, const PoolingPlan& plan, int in_channels, std::uint64_t seed)
    : spec_(std::move(spec)), plan_(&plan), in_channels_(in_channels) {
    std::mt19937_64 seeder(seed);
    int level = 0;
    int channels = in_channels;
    bool flat = false;
    int flat_dim = 0;
    for (const auto& tok : spec_.layers) {
        switch (tok.kind) {
            case LayerToken::Kind::GC: {
                if (flat) throw std::invalid_argument("Network: GC after FC");
                auto shift = shift_operator(plan_->padded_graph(level),
                                            ShiftKind::NormalizedLaplacian);
                layers_.push_back(std::make_unique<SpectralConvLayer>(
                    spec_.mode, eigendecompose(shift), channels, tok.arg, spec_.spline_q,
                    seeder()));
                layers_.push_back(std::make_unique<ReluLayer>());
                channels = tok.arg;
                break;
            }
            case LayerToken::Kind::P: {
                if (flat) throw std::invalid_argument("Network: P after FC");
                auto pool = std::make_unique<MaxPoolLayer>(plan_, level, tok.arg);
                level += pool->sublevels;
                layers_.push_back(std::move(pool));
                break;
            }
            case LayerToken::Kind::FC: {
                if (!flat) {
                    int nodes = plan_->padded_size(level);
                    layers_.push_back(std::make_unique<FlattenLayer>(nodes));
                    flat_dim = nodes * channels;
                    flat = true;
                } else {
                    layers_.push_back(std::make_unique<ReluLayer>());
                }
                layers_.push_back(std::make_unique<DenseLayer>(flat_dim, tok.arg, seeder()));
                flat_dim = tok.arg;
                break;
            }
        }
    }
    // final linear classifier
    layers_.push_back(std::make_unique<ReluLayer>());
    layers_.push_back(std::make_unique<DenseLayer>(flat_dim, spec_.class_count, seeder()));

    if (!layers_.empty()) {
        if (auto* conv = dynamic_cast<SpectralConvLayer*>(layers_.front().get()))
            conv->input_is_spectral = true;
    }
}

Matrix Network::prepare_input(const Matrix& features) const {
    const int samples = static_cast<int>(features.cols());
    const int n_pad = plan_->padded_size(0);
    const auto& perm = plan_->perms[0];
    const int c = in_channels_;
    const int n_real = static_cast<int>(features.rows()) / c;
    Matrix padded(n_pad, static_cast<Eigen::Index>(c) * samples);
    padded.setZero();
    for (int s = 0; s < samples; ++s)
        for (int ch = 0; ch < c; ++ch) {
            auto col = padded.col(static_cast<Eigen::Index>(s) * c + ch);
            for (int pos = 0; pos < n_pad; ++pos) {
                int id = perm[pos];
                if (id >= 0) col[pos] = features(static_cast<Eigen::Index>(ch) * n_real + id, s);
            }
        }
    const auto* conv = layers_.empty() ? nullptr
                                       : dynamic_cast<const SpectralConvLayer*>(layers_.front().get());
    if (conv != nullptr) padded = conv->basis.vectors.transpose() * padded;
    // flatten to one column per sample
    Matrix out(static_cast<Eigen::Index>(n_pad) * c, samples);
    for (int s = 0; s < samples; ++s)
        for (int ch = 0; ch < c; ++ch)
            out.col(s).segment(static_cast<Eigen::Index>(ch) * n_pad, n_pad) =
                padded.col(static_cast<Eigen::Index>(s) * c + ch);
    return out;
}

Matrix Network::forward(const Matrix& prepared, int batch) {
    const int n_pad = plan_->padded_size(0);
    const int c = in_channels_;
    Matrix cur(n_pad, static_cast<Eigen::Index>(c) * batch);
    for (int b = 0; b < batch; ++b)
        for (int ch = 0; ch < c; ++ch)
            cur.col(static_cast<Eigen::Index>(b) * c + ch) =
                prepared.col(b).segment(static_cast<Eigen::Index>(ch) * n_pad, n_pad);
    for (auto& layer : layers_) cur = layer->forward(cur, batch);
    return cur;
}

double Network::softmax_cross_entropy(const Matrix& logits, const std::vector<int>& labels,
                                      Matrix* grad_logits) const {
    const int batch = static_cast<int>(labels.size());
    double loss = 0.0;
    Matrix g(logits.rows(), logits.cols());
    for (int b = 0; b < batch; ++b) {
        if (labels[b] < 0 || labels[b] >= spec_.class_count)
            throw std::invalid_argument("softmax_cross_entropy: label out of range");
        Vector col = logits.col(b);
        col.array() -= col.maxCoeff();
        Vector e = col.array().exp();
        double z = e.sum();
        loss -= col[labels[b]] - std::log(z);
        Vector p = e / z;
        p[labels[b]] -= 1.0;
        g.col(b) = p;
    }
    loss /= batch;
    g /= batch;
    if (grad_logits) *grad_logits = std::move(g);
    return loss;
}

double Network::weight_decay_loss(double coefficient) const {
    double s = 0.0;
    for (const auto& layer : layers_)
        for (const Param* p : const_cast<Layer&>(*layer).params())
            if (p->decay) s += p->value.squaredNorm();
    return 0.5 * coefficient * s;
}

double Network::loss_and_grad(const Matrix& prepared, const std::vector<int>& labels) {
    for (Param* p : params()) p->grad.setZero();
    const int batch = static_cast<int>(labels.size());
    Matrix logits = forward(prepared, batch);
    Matrix dlogits;
    double loss = softmax_cross_entropy(logits, labels, &dlogits);
    Matrix grad = std::move(dlogits);
    for (int i = static_cast<int>(layers_.size()) - 1; i >= 0; --i)
        grad = layers_[i]->backward(grad, i > 0);
    if (decay_coeff_ > 0.0) {
        loss += weight_decay_loss(decay_coeff_);
        for (Param* p : params())
            if (p->decay) p->grad += decay_coeff_ * p->value;
    }
    return loss;
}

std::vector<int> Network::predict(const Matrix& prepared) {
    const int total = static_cast<int>(prepared.cols());
    std::vector<int> out(total);
    const int chunk = 256;
    for (int start = 0; start < total; start += chunk) {
        int b = std::min(chunk, total - start);
        Matrix logits = forward(prepared.middleCols(start, b), b);
        for (int j = 0; j < b; ++j) {
            int arg = 0;
            logits.col(j).maxCoeff(&arg);
            out[start + j] = arg;
        }
    }
    return out;
}

double Network::accuracy(const Matrix& prepared, const std::vector<int>& labels) {
    auto pred = predict(prepared);
    int correct = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) correct += pred[i] == labels[i];
    return labels.empty() ? 0.0 : static_cast<double>(correct) / labels.size();
}

std::vector<Param*> Network::params() {
    std::vector<Param*> out;
    for (auto& layer : layers_)
        for (Param* p : layer->params()) out.push_back(p);
    return out;
}

std::vector<SpectralConvLayer*> Network::conv_layers() {
    std::vector<SpectralConvLayer*> out;
    for (auto& layer : layers_)
        if (auto* c = dynamic_cast<SpectralConvLayer*>(layer.get())) out.push_back(c);
    return out;
}

// --- training ---

TrainTrace train(Network& net, const Dataset& train_data, const Dataset& val_data,
                 const TrainConfig& cfg) {
    if (cfg.learning_rate < 0.0 || cfg.batch_size < 1)
        throw std::invalid_argument("TrainConfig: positive rate and batch required");
    net.set_weight_decay(cfg.weight_decay);
    Matrix train_prep = net.prepare_input(train_data.features);
    Matrix val_prep = val_data.size() > 0 ? net.prepare_input(val_data.features) : Matrix();

    std::mt19937_64 rng(cfg.seed);
    std::vector<int> order(train_data.size());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    std::size_t cursor = 0;

    auto params = net.params();
    TrainTrace trace;
    double initial_loss = 0.0;
    int high_loss_streak = 0;
    const int n_pad_c = static_cast<int>(train_prep.rows());

    for (int step = 1; step <= cfg.steps; ++step) {
        const int b = std::min<int>(cfg.batch_size, train_data.size());
        Matrix batch(n_pad_c, b);
        std::vector<int> labels(b);
        for (int j = 0; j < b; ++j) {
            if (cursor >= order.size()) {
                std::shuffle(order.begin(), order.end(), rng);
                cursor = 0;
            }
            int idx = order[cursor++];
            batch.col(j) = train_prep.col(idx);
            labels[j] = train_data.labels[idx];
        }
        double loss = net.loss_and_grad(batch, labels);
        if (step == 1) initial_loss = loss;
        high_loss_streak = loss > 10.0 * initial_loss ? high_loss_streak + 1 : 0;
        if (high_loss_streak >= 100) {
            trace.diverged = true;
            break;
        }

        const double bc1 = 1.0 - std::pow(cfg.beta1, step);
        const double bc2 = 1.0 - std::pow(cfg.beta2, step);
        for (Param* p : params) {
            p->adam_m = cfg.beta1 * p->adam_m + (1.0 - cfg.beta1) * p->grad;
            p->adam_v = cfg.beta2 * p->adam_v.array().matrix() +
                        (1.0 - cfg.beta2) * p->grad.cwiseProduct(p->grad);
            p->value.array() -= cfg.learning_rate * (p->adam_m.array() / bc1) /
                                ((p->adam_v.array() / bc2).sqrt() + cfg.adam_eps);
        }

        if (cfg.eval_every > 0 && step % cfg.eval_every == 0) {
            trace.steps.push_back(step);
            trace.train_loss.push_back(loss);
            trace.val_accuracy.push_back(
                val_data.size() > 0 ? net.accuracy(val_prep, val_data.labels) : 0.0);
        }
    }
    return trace;
}

void save_metric_trace_csv(const TrainTrace& trace, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_metric_trace_csv: cannot open " + path);
    out << "step,train_loss,val_accuracy\n";
    char buf[96];
    for (std::size_t i = 0; i < trace.steps.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g\n", trace.steps[i], trace.train_loss[i],
                      trace.val_accuracy[i]);
        out << buf;
    }
}

// --- checkpoints ---

void Network::save_checkpoint(const std::string& path, const std::string& arch_string,
                              const std::string& plan_ref) const {
    nlohmann::json j;
    j["version"] = 1;
    j["arch"] = arch_string;
    j["mode"] = to_string(spec_.mode);
    j["q"] = spec_.spline_q;
    j["class_count"] = spec_.class_count;
    j["plan_ref"] = plan_ref;
    auto arr = nlohmann::json::array();
    for (const auto& layer : layers_)
        for (Param* p : const_cast<Layer&>(*layer).params()) {
            nlohmann::json pj;
            pj["rows"] = p->value.rows();
            pj["cols"] = p->value.cols();
            std::vector<double> data(p->value.size());
            // row-major serialization
            for (Eigen::Index r = 0; r < p->value.rows(); ++r)
                for (Eigen::Index c = 0; c < p->value.cols(); ++c)
                    data[r * p->value.cols() + c] = p->value(r, c);
            pj["data"] = data;
            arr.push_back(std::move(pj));
        }
    j["params"] = std::move(arr);
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_checkpoint: cannot open " + path);
    out << j.dump();
}

void Network::load_checkpoint(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_checkpoint: cannot open " + path);
    nlohmann::json j;
    in >> j;
    auto arr = j.at("params");
    auto ps = params();
    if (arr.size() != ps.size()) throw std::runtime_error("load_checkpoint: parameter count mismatch");
    for (std::size_t i = 0; i < ps.size(); ++i) {
        int rows = arr[i].at("rows"), cols = arr[i].at("cols");
        if (rows != ps[i]->value.rows() || cols != ps[i]->value.cols())
            throw std::runtime_error("load_checkpoint: parameter shape mismatch");
        std::vector<double> data = arr[i].at("data");
        for (int r = 0; r < rows; ++r)
            for (int c = 0; c < cols; ++c) ps[i]->value(r, c) = data[r * cols + c];
    }
}

}  // namespace gsd
