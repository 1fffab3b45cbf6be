#include "segpipe/error.hpp"
#include "segpipe/losses.hpp"
#include "segpipe/optim.hpp"
#include "segpipe/rng.hpp"

#include <cmath>

namespace segpipe {

std::string_view toy_problem_name(ToyProblem p) {
    switch (p) {
        case ToyProblem::QuadraticBowl: return "quadratic";
        case ToyProblem::LeastSquares: return "least_squares";
        case ToyProblem::Logistic: return "logistic";
    }
    return "unknown";
}

ToyProblem parse_toy_problem(std::string_view name) {
    if (name == "quadratic" || name == "quadratic_bowl") return ToyProblem::QuadraticBowl;
    if (name == "least_squares" || name == "lstsq") return ToyProblem::LeastSquares;
    if (name == "logistic") return ToyProblem::Logistic;
    throw Error(Errc::InvalidInput, "unknown toy problem '" + std::string(name) + "'");
}

namespace {

// Each problem owns its parameters and evaluates (loss, gradients) in place.
struct Problem {
    std::vector<Tensor> params;
    virtual ~Problem() = default;
    virtual double evaluate(std::vector<Tensor>& grads) const = 0;
};

// 0.5 * sum h (w - w*)^2 over an 8x8 matrix and an 8-vector, h in [0.5, 2].
struct QuadraticBowl final : Problem {
    std::vector<Tensor> target, curvature;

    explicit QuadraticBowl(Rng& rng) {
        for (const auto& shape : {std::vector<std::size_t>{8, 8}, std::vector<std::size_t>{8}}) {
            Tensor t(shape), h(shape);
            for (double& v : t.data) v = rng.normal();
            for (double& v : h.data) v = rng.uniform(0.5, 2.0);
            params.emplace_back(shape, 0.0);
            target.push_back(std::move(t));
            curvature.push_back(std::move(h));
        }
    }

    double evaluate(std::vector<Tensor>& grads) const override {
        double loss = 0.0;
        for (std::size_t i = 0; i < params.size(); ++i) {
            for (std::size_t j = 0; j < params[i].size(); ++j) {
                const double d = params[i].data[j] - target[i].data[j];
                loss += 0.5 * curvature[i].data[j] * d * d;
                grads[i].data[j] = curvature[i].data[j] * d;
            }
        }
        return loss;
    }
};

// 0.5 / n ||X W - Y||^2 with X: 64x8, W: 8x2.
struct LeastSquares final : Problem {
    Matrix x, y;

    explicit LeastSquares(Rng& rng) : x(64, 8), y(64, 2) {
        Matrix w_true(8, 2);
        for (double& v : x.data()) v = rng.normal();
        for (double& v : w_true.data()) v = rng.normal();
        y = matmul(x, w_true);
        for (double& v : y.data()) v += 0.01 * rng.normal();
        params.emplace_back(std::vector<std::size_t>{8, 2}, 0.0);
    }

    double evaluate(std::vector<Tensor>& grads) const override {
        const Matrix w(8, 2, params[0].data);
        Matrix resid = matmul(x, w);
        double loss = 0.0;
        for (std::size_t i = 0; i < resid.data().size(); ++i) {
            resid.data()[i] -= y.data()[i];
            loss += resid.data()[i] * resid.data()[i];
        }
        const double n = static_cast<double>(x.rows());
        const Matrix g = matmul(x.transpose(), resid);
        for (std::size_t i = 0; i < g.data().size(); ++i) {
            grads[0].data[i] = g.data()[i] / n;
        }
        return 0.5 * loss / n;
    }
};

// Mean binary cross-entropy of a linear classifier on two Gaussian blobs.
struct Logistic final : Problem {
    std::vector<std::array<double, 2>> points;
    std::vector<double> labels;

    explicit Logistic(Rng& rng) {
        for (int i = 0; i < 128; ++i) {
            const double label = i % 2;
            const double cx = label ? 1.5 : -1.5;
            points.push_back({cx + rng.normal(), -cx + rng.normal()});
            labels.push_back(label);
        }
        params.emplace_back(std::vector<std::size_t>{1, 2}, 0.0);
        params.emplace_back(std::vector<std::size_t>{1}, 0.0);
    }

    double evaluate(std::vector<Tensor>& grads) const override {
        const auto& w = params[0].data;
        const double b = params[1].data[0];
        double loss = 0.0;
        std::fill(grads[0].data.begin(), grads[0].data.end(), 0.0);
        grads[1].data[0] = 0.0;
        const double n = static_cast<double>(points.size());
        for (std::size_t i = 0; i < points.size(); ++i) {
            const double s = w[0] * points[i][0] + w[1] * points[i][1] + b;
            const double y = labels[i];
            loss += std::max(s, 0.0) - s * y + std::log1p(std::exp(-std::abs(s)));
            const double r = (sigmoid(s) - y) / n;
            grads[0].data[0] += r * points[i][0];
            grads[0].data[1] += r * points[i][1];
            grads[1].data[0] += r;
        }
        return loss / n;
    }
};

std::unique_ptr<Problem> make_problem(ToyProblem kind, Rng& rng) {
    switch (kind) {
        case ToyProblem::QuadraticBowl: return std::make_unique<QuadraticBowl>(rng);
        case ToyProblem::LeastSquares: return std::make_unique<LeastSquares>(rng);
        case ToyProblem::Logistic: return std::make_unique<Logistic>(rng);
    }
    throw Error(Errc::InvalidInput, "unknown toy problem");
}

}  // namespace

std::vector<double> toy_train(ToyProblem problem, Optimizer& optimizer, int steps, std::uint64_t seed) {
    if (steps < 1) {
        throw Error(Errc::InvalidInput, "steps must be at least 1");
    }
    Rng rng(derive_seed(seed, toy_problem_name(problem)));
    auto p = make_problem(problem, rng);
    std::vector<Tensor> grads;
    for (const Tensor& t : p->params) {
        grads.emplace_back(t.shape, 0.0);
    }
    std::vector<double> curve;
    curve.reserve(static_cast<std::size_t>(steps) + 1);
    for (int s = 0; s <= steps; ++s) {
        const double loss = p->evaluate(grads);
        if (!std::isfinite(loss) || loss > 1e6) {
            throw Error(Errc::DivergedLoss, "loss " + std::to_string(loss) + " at step " + std::to_string(s));
        }
        curve.push_back(loss);
        if (s < steps) {
            optimizer.step(p->params, grads);
        }
    }
    return curve;
}

}  // namespace segpipe
