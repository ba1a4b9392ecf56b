#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "zrnorm/matrix.hpp"
#include "zrnorm/normalize.hpp"
#include "zrnorm/parallel.hpp"
#include "zrnorm/random.hpp"
#include "zrnorm/units.hpp"

namespace zrnorm {

enum class ProbeKind { linear, mlp };

inline std::string_view to_string(ProbeKind k) { return k == ProbeKind::linear ? "linear" : "mlp"; }

struct ProbeConfig {
    ProbeKind kind = ProbeKind::linear;
    std::size_t hidden_units = 1024; // mlp only
    std::size_t epochs = 10;
    std::size_t batch_size = 256;
    double learning_rate = 0.01;
    std::uint64_t seed = 0;
    std::size_t n_runs = 10;

    void validate() const {
        if (epochs == 0 || batch_size == 0 || n_runs == 0 || !(learning_rate > 0.0) ||
            (kind == ProbeKind::mlp && hidden_units == 0))
            throw InvalidArgument("ProbeConfig: hyperparameters must be positive");
    }
};

/// Softmax classifier over single frames: multinomial logistic regression, or one ReLU
/// hidden layer followed by softmax. Inputs are standardized with statistics of the training set.
class ProbeClassifier {
public:
    ProbeClassifier() = default;

    ProbeClassifier(ProbeKind kind, std::size_t n_inputs, std::size_t n_classes, std::size_t hidden, Rng& rng)
        : kind_(kind), d_(n_inputs), c_(n_classes), h_(kind == ProbeKind::mlp ? hidden : 0) {
        input_mean_.assign(d_, 0.0);
        input_scale_.assign(d_, 1.0);
        if (kind_ == ProbeKind::linear) {
            params_.assign(d_ * c_ + c_, 0.0);
        } else {
            params_.assign(d_ * h_ + h_ + h_ * c_ + c_, 0.0);
            const double s1 = std::sqrt(2.0 / static_cast<double>(d_));
            const double s2 = std::sqrt(1.0 / static_cast<double>(h_));
            for (std::size_t i = 0; i < d_ * h_; ++i) params_[i] = s1 * standard_normal(rng);
            for (std::size_t i = 0; i < h_ * c_; ++i) params_[d_ * h_ + h_ + i] = s2 * standard_normal(rng);
        }
    }

    ProbeKind kind() const noexcept { return kind_; }
    std::size_t n_inputs() const noexcept { return d_; }
    std::size_t n_classes() const noexcept { return c_; }

    std::span<double> parameters() noexcept { return params_; }
    std::span<const double> parameters() const noexcept { return params_; }

    void set_input_normalization(std::vector<double> mean, std::vector<double> scale) {
        input_mean_ = std::move(mean);
        input_scale_ = std::move(scale);
    }

    /// Mean cross-entropy over the given rows and its gradient w.r.t. parameters().
    double loss_and_gradient(const Matrix& x, std::span<const std::uint32_t> y, std::span<const std::size_t> rows,
                             std::vector<double>* grad) const {
        if (grad) grad->assign(params_.size(), 0.0);
        std::vector<double> in(d_), hidden(h_), logits(c_), dlogits(c_), dhidden(h_);
        double loss = 0.0;
        for (std::size_t r : rows) {
            prepare(x.row(r), in);
            forward(in, hidden, logits);
            const double lse = log_sum_exp(logits);
            loss += lse - logits[y[r]];
            if (!grad) continue;
            for (std::size_t k = 0; k < c_; ++k) dlogits[k] = std::exp(logits[k] - lse) - (k == y[r] ? 1.0 : 0.0);
            backward(in, hidden, dlogits, dhidden, *grad);
        }
        const double inv = 1.0 / static_cast<double>(rows.size());
        if (grad)
            for (double& g : *grad) g *= inv;
        return loss * inv;
    }

    std::uint32_t predict(std::span<const double> frame) const {
        std::vector<double> in(d_), hidden(h_), logits(c_);
        prepare(frame, in);
        forward(in, hidden, logits);
        return static_cast<std::uint32_t>(std::max_element(logits.begin(), logits.end()) - logits.begin());
    }

private:
    void prepare(std::span<const double> frame, std::vector<double>& in) const {
        if (frame.size() != d_) throw DimensionMismatch(d_, frame.size(), "probe input");
        for (std::size_t j = 0; j < d_; ++j) in[j] = (frame[j] - input_mean_[j]) * input_scale_[j];
    }

    static double log_sum_exp(const std::vector<double>& v) {
        const double m = *std::max_element(v.begin(), v.end());
        double s = 0.0;
        for (double x : v) s += std::exp(x - m);
        return m + std::log(s);
    }

    // Parameter layout. linear: W (d x c), b (c). mlp: W1 (d x h), b1 (h), W2 (h x c), b2 (c).
    void forward(const std::vector<double>& in, std::vector<double>& hidden, std::vector<double>& logits) const {
        if (kind_ == ProbeKind::linear) {
            const double* w = params_.data();
            const double* b = w + d_ * c_;
            for (std::size_t k = 0; k < c_; ++k) logits[k] = b[k];
            for (std::size_t j = 0; j < d_; ++j) {
                const double v = in[j];
                const double* wr = w + j * c_;
                for (std::size_t k = 0; k < c_; ++k) logits[k] += v * wr[k];
            }
            return;
        }
        const double* w1 = params_.data();
        const double* b1 = w1 + d_ * h_;
        const double* w2 = b1 + h_;
        const double* b2 = w2 + h_ * c_;
        for (std::size_t u = 0; u < h_; ++u) hidden[u] = b1[u];
        for (std::size_t j = 0; j < d_; ++j) {
            const double v = in[j];
            const double* wr = w1 + j * h_;
            for (std::size_t u = 0; u < h_; ++u) hidden[u] += v * wr[u];
        }
        for (double& a : hidden) a = a > 0.0 ? a : 0.0;
        for (std::size_t k = 0; k < c_; ++k) logits[k] = b2[k];
        for (std::size_t u = 0; u < h_; ++u) {
            const double a = hidden[u];
            if (a == 0.0) continue;
            const double* wr = w2 + u * c_;
            for (std::size_t k = 0; k < c_; ++k) logits[k] += a * wr[k];
        }
    }

    void backward(const std::vector<double>& in, const std::vector<double>& hidden, const std::vector<double>& dlogits,
                  std::vector<double>& dhidden, std::vector<double>& grad) const {
        if (kind_ == ProbeKind::linear) {
            double* gw = grad.data();
            double* gb = gw + d_ * c_;
            for (std::size_t j = 0; j < d_; ++j) {
                const double v = in[j];
                double* gr = gw + j * c_;
                for (std::size_t k = 0; k < c_; ++k) gr[k] += v * dlogits[k];
            }
            for (std::size_t k = 0; k < c_; ++k) gb[k] += dlogits[k];
            return;
        }
        const double* w2 = params_.data() + d_ * h_ + h_;
        double* gw1 = grad.data();
        double* gb1 = gw1 + d_ * h_;
        double* gw2 = gb1 + h_;
        double* gb2 = gw2 + h_ * c_;
        for (std::size_t u = 0; u < h_; ++u) {
            const double a = hidden[u];
            double* gr = gw2 + u * c_;
            const double* wr = w2 + u * c_;
            double back = 0.0;
            for (std::size_t k = 0; k < c_; ++k) {
                gr[k] += a * dlogits[k];
                back += wr[k] * dlogits[k];
            }
            dhidden[u] = a > 0.0 ? back : 0.0;
        }
        for (std::size_t k = 0; k < c_; ++k) gb2[k] += dlogits[k];
        for (std::size_t j = 0; j < d_; ++j) {
            const double v = in[j];
            if (v == 0.0) continue;
            double* gr = gw1 + j * h_;
            for (std::size_t u = 0; u < h_; ++u) gr[u] += v * dhidden[u];
        }
        for (std::size_t u = 0; u < h_; ++u) gb1[u] += dhidden[u];
    }

    ProbeKind kind_ = ProbeKind::linear;
    std::size_t d_ = 0, c_ = 0, h_ = 0;
    std::vector<double> params_;
    std::vector<double> input_mean_, input_scale_;
};

inline void check_probe_inputs(const Matrix& x, std::span<const std::uint32_t> y) {
    if (x.rows() != y.size()) throw InvalidArgument("probe: frames and labels differ in length");
    if (x.rows() == 0) throw InvalidArgument("probe: no frames");
    std::set<std::uint32_t> classes(y.begin(), y.end());
    if (classes.size() < 2) throw InvalidArgument("probe: need at least 2 classes in the training labels");
}

/// Seeded mini-batch gradient descent on mean cross-entropy. Deterministic given the seed.
inline ProbeClassifier train_probe(const Matrix& x, std::span<const std::uint32_t> y, std::size_t n_classes,
                                   const ProbeConfig& cfg) {
    cfg.validate();
    check_probe_inputs(x, y);
    const std::uint32_t max_label = *std::max_element(y.begin(), y.end());
    if (max_label >= n_classes) throw InvalidArgument("probe: label " + std::to_string(max_label) + " >= n_classes");

    Rng init = make_rng(cfg.seed, {0x696E6974ULL});
    ProbeClassifier clf(cfg.kind, x.cols(), n_classes, cfg.hidden_units, init);
    const NormStats stats = fit_stats(x);
    std::vector<double> scale(x.cols());
    for (std::size_t j = 0; j < scale.size(); ++j) scale[j] = 1.0 / std::max(stats.std[j], standardize_eps);
    clf.set_input_normalization(stats.mean, std::move(scale));

    std::vector<std::size_t> order(x.rows());
    std::vector<double> grad;
    auto params = clf.parameters();
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        Rng rng = make_rng(cfg.seed, {0x65706F6368ULL, epoch});
        shuffle(order.begin(), order.end(), rng);
        for (std::size_t b = 0; b < order.size(); b += cfg.batch_size) {
            const std::size_t e = std::min(order.size(), b + cfg.batch_size);
            clf.loss_and_gradient(x, y, std::span<const std::size_t>(order.data() + b, e - b), &grad);
            for (std::size_t i = 0; i < params.size(); ++i) params[i] -= cfg.learning_rate * grad[i];
        }
    }
    return clf;
}

/// Top-1 accuracy.
inline double evaluate_probe(const ProbeClassifier& clf, const Matrix& x, std::span<const std::uint32_t> y) {
    if (x.rows() != y.size()) throw InvalidArgument("evaluate_probe: frames and labels differ in length");
    if (x.rows() == 0) throw InvalidArgument("evaluate_probe: no frames");
    if (x.cols() != clf.n_inputs()) throw DimensionMismatch(clf.n_inputs(), x.cols(), "evaluate_probe");
    std::vector<std::uint8_t> hit(x.rows());
    parallel_for(x.rows(), [&](std::size_t i) { hit[i] = clf.predict(x.row(i)) == y[i] ? 1 : 0; });
    const auto correct = std::accumulate(hit.begin(), hit.end(), std::size_t{0});
    return static_cast<double>(correct) / static_cast<double>(x.rows());
}

struct ProbeResult {
    double accuracy = 0.0; // mean over runs
    std::vector<double> run_accuracies;
    std::vector<std::uint64_t> run_seeds;
};

/// Trains `n_runs` probes with seeds derived from cfg.seed and reports mean test accuracy.
inline ProbeResult run_probe(const Matrix& train_x, std::span<const std::uint32_t> train_y, const Matrix& test_x,
                             std::span<const std::uint32_t> test_y, std::size_t n_classes, const ProbeConfig& cfg) {
    cfg.validate();
    ProbeResult out;
    for (std::size_t run = 0; run < cfg.n_runs; ++run) {
        ProbeConfig c = cfg;
        c.seed = cfg.n_runs == 1 ? cfg.seed : derive_seed(cfg.seed, {0x72756EULL, run});
        const auto clf = train_probe(train_x, train_y, n_classes, c);
        out.run_accuracies.push_back(evaluate_probe(clf, test_x, test_y));
        out.run_seeds.push_back(c.seed);
    }
    out.accuracy = std::accumulate(out.run_accuracies.begin(), out.run_accuracies.end(), 0.0) /
                   static_cast<double>(cfg.n_runs);
    return out;
}

/// The same probe over one-hot unit codes of width K.
inline ProbeResult probe_on_units(std::span<const std::uint32_t> train_units, std::span<const std::uint32_t> train_y,
                                  std::span<const std::uint32_t> test_units, std::span<const std::uint32_t> test_y,
                                  std::size_t k, std::size_t n_classes, const ProbeConfig& cfg) {
    return run_probe(one_hot(train_units, k), train_y, one_hot(test_units, k), test_y, n_classes, cfg);
}

} // namespace zrnorm
