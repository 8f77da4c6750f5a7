#pragma once

// Minimal multilayer perceptron with hand-written reverse mode, an
// adaptive-moment optimizer, the expectile loss primitive and a central
// finite-difference gradient checker.
//
// Parameters live in one flat vector; layer weights and biases are views into
// it. Layer l maps sizes[l] -> sizes[l+1]; hidden layers use ReLU, the output
// layer is affine. Batches are column-major: one sample per column.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "gas/error.hpp"
#include "gas/rng.hpp"

namespace gas {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

/// Layer sizes for `layers` weight layers: input -> embedding -> hidden x
/// (layers - 2) -> output.
inline std::vector<int> make_layer_sizes(int input, int output, int layers = 7, int hidden = 128,
                                         int embedding = 64) {
    if (layers < 1) throw ConfigError("layers must be >= 1");
    std::vector<int> sizes{input};
    if (layers >= 2) {
        sizes.push_back(embedding);
        for (int i = 0; i < layers - 2; ++i) sizes.push_back(hidden);
    }
    sizes.push_back(output);
    return sizes;
}

struct MlpCache {
    std::vector<Mat> activations;  // activations[0] is the input batch
};

class Mlp {
public:
    Mlp() = default;

    /// Zero-initialized network.
    explicit Mlp(std::vector<int> sizes) : sizes_(std::move(sizes)) {
        if (sizes_.size() < 2) throw ConfigError("an MLP needs at least input and output sizes");
        for (int s : sizes_)
            if (s <= 0) throw ConfigError("layer sizes must be positive");
        std::size_t offset = 0;
        for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
            weight_offset_.push_back(offset);
            offset += static_cast<std::size_t>(sizes_[l]) * static_cast<std::size_t>(sizes_[l + 1]);
            bias_offset_.push_back(offset);
            offset += static_cast<std::size_t>(sizes_[l + 1]);
        }
        params_ = Vec::Zero(static_cast<Eigen::Index>(offset));
    }

    /// He-style uniform initialization: W ~ U(-sqrt(6/fan_in), sqrt(6/fan_in)),
    /// zero biases.
    Mlp(std::vector<int> sizes, Rng& rng) : Mlp(std::move(sizes)) {
        for (int l = 0; l < num_layers(); ++l) {
            const double bound = std::sqrt(6.0 / sizes_[static_cast<std::size_t>(l)]);
            std::uniform_real_distribution<double> u(-bound, bound);
            auto w = weight(l);
            for (Eigen::Index j = 0; j < w.cols(); ++j)
                for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, j) = u(rng);
        }
    }

    const std::vector<int>& sizes() const { return sizes_; }
    int num_layers() const { return static_cast<int>(sizes_.size()) - 1; }
    int input_size() const { return sizes_.front(); }
    int output_size() const { return sizes_.back(); }
    Eigen::Index parameter_count() const { return params_.size(); }

    Vec& params() { return params_; }
    const Vec& params() const { return params_; }

    Eigen::Map<Mat> weight(int l) { return {params_.data() + weight_offset_[ul(l)], rows(l), cols(l)}; }
    Eigen::Map<const Mat> weight(int l) const {
        return {params_.data() + weight_offset_[ul(l)], rows(l), cols(l)};
    }
    Eigen::Map<Vec> bias(int l) { return {params_.data() + bias_offset_[ul(l)], rows(l)}; }
    Eigen::Map<const Vec> bias(int l) const { return {params_.data() + bias_offset_[ul(l)], rows(l)}; }

    /// Batched forward pass; fills `cache` when given so backward() can run.
    Mat forward(const Mat& input, MlpCache* cache = nullptr) const {
        require(input.rows() == input_size(), "mlp_forward: input has " + std::to_string(input.rows()) +
                                                   " rows, expected " + std::to_string(input_size()));
        if (cache) {
            cache->activations.resize(sizes_.size());
            cache->activations[0] = input;
        }
        Mat h = input;
        for (int l = 0; l < num_layers(); ++l) {
            Mat z = weight(l) * h;
            z.colwise() += bias(l);
            if (l + 1 < num_layers()) z = z.cwiseMax(0.0);
            h = std::move(z);
            if (cache) cache->activations[ul(l) + 1] = h;
        }
        return h;
    }

    Vec forward(const Vec& input) const { return forward(Mat(input)).col(0); }

    /// Gradient of sum(output .* upstream) with respect to every parameter,
    /// as a flat vector laid out like params(). The ReLU subgradient at 0 is 0.
    /// When `input_grad` is given it receives the gradient with respect to the
    /// input batch.
    Vec backward(const MlpCache& cache, const Mat& upstream, Mat* input_grad = nullptr) const {
        require(cache.activations.size() == sizes_.size(), "mlp_backward: cache does not match network");
        const Eigen::Index batch = cache.activations[0].cols();
        require(upstream.rows() == output_size() && upstream.cols() == batch,
                "mlp_backward: upstream gradient shape mismatch");
        Vec grads = Vec::Zero(params_.size());
        Mat delta = upstream;
        for (int l = num_layers() - 1; l >= 0; --l) {
            const Mat& below = cache.activations[ul(l)];
            Eigen::Map<Mat>(grads.data() + weight_offset_[ul(l)], rows(l), cols(l)).noalias() =
                delta * below.transpose();
            Eigen::Map<Vec>(grads.data() + bias_offset_[ul(l)], rows(l)) = delta.rowwise().sum();
            if (l > 0) {
                Mat next = weight(l).transpose() * delta;
                delta = next.cwiseProduct((below.array() > 0.0).cast<double>().matrix());
            } else if (input_grad) {
                *input_grad = weight(l).transpose() * delta;
            }
        }
        return grads;
    }

    bool all_finite() const { return params_.allFinite(); }

private:
    static std::size_t ul(int l) { return static_cast<std::size_t>(l); }
    Eigen::Index rows(int l) const { return sizes_[ul(l) + 1]; }
    Eigen::Index cols(int l) const { return sizes_[ul(l)]; }

    std::vector<int> sizes_;
    std::vector<std::size_t> weight_offset_;
    std::vector<std::size_t> bias_offset_;
    Vec params_;
};

// ---------------------------------------------------------------------------
// Optimizer

struct AdamConfig {
    double learning_rate = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 1e-4;
    double grad_clip_norm = 0.25;  // <= 0 disables clipping
};

struct OptimState {
    AdamConfig hyper;
    Vec first_moment;
    Vec second_moment;
    long long step = 0;

    OptimState() = default;
    OptimState(AdamConfig cfg, Eigen::Index n)
        : hyper(cfg), first_moment(Vec::Zero(n)), second_moment(Vec::Zero(n)) {}
};

struct StepReport {
    bool applied = false;
    double grad_norm = 0.0;
    double clip_scale = 1.0;
};

/// One update: global-norm clipping, decoupled weight decay
/// (params *= 1 - lr * wd), then the bias-corrected moment step. A
/// non-finite gradient leaves params and state untouched and reports
/// applied = false.
inline StepReport optimizer_step(Vec& params, const Vec& grads, OptimState& state) {
    require(grads.size() == params.size(), "optimizer_step: gradient size mismatch");
    require(state.first_moment.size() == params.size(), "optimizer_step: state size mismatch");
    StepReport report;
    report.grad_norm = grads.norm();
    if (!std::isfinite(report.grad_norm)) return report;

    const AdamConfig& h = state.hyper;
    if (h.grad_clip_norm > 0.0 && report.grad_norm > h.grad_clip_norm)
        report.clip_scale = h.grad_clip_norm / report.grad_norm;
    const Vec g = grads * report.clip_scale;

    ++state.step;
    if (h.weight_decay != 0.0) params *= (1.0 - h.learning_rate * h.weight_decay);
    state.first_moment = h.beta1 * state.first_moment + (1.0 - h.beta1) * g;
    state.second_moment = h.beta2 * state.second_moment + (1.0 - h.beta2) * g.cwiseAbs2();
    const double c1 = 1.0 - std::pow(h.beta1, static_cast<double>(state.step));
    const double c2 = 1.0 - std::pow(h.beta2, static_cast<double>(state.step));
    params.array() -= h.learning_rate * (state.first_moment.array() / c1) /
                      ((state.second_moment.array() / c2).sqrt() + h.eps);
    report.applied = true;
    return report;
}

// ---------------------------------------------------------------------------
// Expectile loss

/// Expectile level alpha in (0, 1).
class ExpectileLevel {
public:
    explicit ExpectileLevel(double alpha) : alpha_(alpha) {
        if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("expectile level must be in (0, 1)");
    }
    double value() const { return alpha_; }

    /// |alpha - 1(u < 0)|
    double weight(double u) const { return u < 0.0 ? 1.0 - alpha_ : alpha_; }

private:
    double alpha_;
};

struct ExpectileTerm {
    double value = 0.0;
    double derivative = 0.0;
};

/// f(u) = |alpha - 1(u<0)| u^2 and f'(u) = 2 |alpha - 1(u<0)| u.
inline ExpectileTerm expectile_term(double u, double alpha) {
    const double w = std::abs(alpha - (u < 0.0 ? 1.0 : 0.0));
    return {w * u * u, 2.0 * w * u};
}

/// Mean expectile loss of a scalar location m over samples.
inline double scalar_expectile_loss(const std::vector<double>& xs, double m, double alpha, double* grad = nullptr) {
    require(!xs.empty(), "scalar expectile: no samples");
    double loss = 0.0, g = 0.0;
    for (double x : xs) {
        const ExpectileTerm e = expectile_term(x - m, alpha);
        loss += e.value;
        g -= e.derivative;
    }
    const double n = static_cast<double>(xs.size());
    if (grad) *grad = g / n;
    return loss / n;
}

/// Learns the alpha-expectile of `xs` by full-batch gradient descent from the
/// sample mean. The step 1 / (2 max(alpha, 1 - alpha)) never overshoots the
/// piecewise-quadratic minimum.
inline double fit_scalar_expectile(const std::vector<double>& xs, double alpha, int iterations = 2000) {
    const ExpectileLevel level(alpha);
    double m = 0.0;
    for (double x : xs) m += x;
    m /= static_cast<double>(xs.size());
    const double step = 0.5 / std::max(alpha, 1.0 - alpha);
    for (int i = 0; i < iterations; ++i) {
        double g = 0.0;
        scalar_expectile_loss(xs, m, level.value(), &g);
        m -= step * g;
    }
    return m;
}

// ---------------------------------------------------------------------------
// Gradient checking

/// Scalar objective that also writes its analytic gradient when asked.
using Objective = std::function<double(const Vec& params, Vec* grad)>;

struct GradCheckOptions {
    double step = 1e-5;
    // Coordinates checked when the vector is larger than this; a random
    // subset of this size is used instead of every coordinate.
    Eigen::Index max_coordinates = 400;
    std::uint64_t seed = 0;
};

/// Worst relative error between the analytic gradient and central finite
/// differences, with denominator max(|analytic|, |numeric|, 1e-8).
inline double grad_check(const Objective& f, const Vec& params, const GradCheckOptions& opt = {}) {
    Vec analytic(params.size());
    f(params, &analytic);

    std::vector<Eigen::Index> coords(static_cast<std::size_t>(params.size()));
    std::iota(coords.begin(), coords.end(), Eigen::Index{0});
    if (params.size() > opt.max_coordinates) {
        Rng rng = make_stream(opt.seed, "grad_check");
        std::shuffle(coords.begin(), coords.end(), rng);
        coords.resize(static_cast<std::size_t>(opt.max_coordinates));
    }

    double worst = 0.0;
    Vec probe = params;
    for (Eigen::Index i : coords) {
        const double saved = probe(i);
        probe(i) = saved + opt.step;
        const double up = f(probe, nullptr);
        probe(i) = saved - opt.step;
        const double down = f(probe, nullptr);
        probe(i) = saved;
        const double numeric = (up - down) / (2.0 * opt.step);
        const double denom = std::max({std::abs(analytic(i)), std::abs(numeric), 1e-8});
        worst = std::max(worst, std::abs(analytic(i) - numeric) / denom);
    }
    return worst;
}

}  // namespace gas
