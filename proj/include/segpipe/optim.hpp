#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace segpipe {

// ---------------------------------------------------------------------------
// Dense storage

struct Tensor {
    std::vector<std::size_t> shape;
    std::vector<double> data;

    Tensor() = default;
    explicit Tensor(std::vector<std::size_t> dims, double fill = 0.0);

    std::size_t rank() const { return shape.size(); }
    std::size_t size() const { return data.size(); }
    // Leading dimension by product of the rest (rank >= 2).
    std::size_t rows() const { return shape.empty() ? 1 : shape[0]; }
    std::size_t cols() const { return rows() == 0 ? 0 : data.size() / rows(); }

    friend bool operator==(const Tensor&, const Tensor&) = default;
};

class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
    Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    const std::vector<double>& data() const { return data_; }
    std::vector<double>& data() { return data_; }

    Matrix transpose() const;
    double frobenius_norm() const;

    static Matrix identity(std::size_t n);

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

Matrix matmul(const Matrix& a, const Matrix& b);
// a * a^T
Matrix gram(const Matrix& a);

// ---------------------------------------------------------------------------
// Automatic optimizer selection

enum class OptimizerKind { MuSGD, AdamW };
std::string_view optimizer_name(OptimizerKind kind);

struct OptimizerChoice {
    OptimizerKind kind = OptimizerKind::AdamW;
    double learning_rate = 0.0;
    double momentum = 0.9;
    std::int64_t iterations = 0;  // epochs * ceil(n_train / batch)
};

inline constexpr std::int64_t kMuSGDIterationThreshold = 10'000;

// MuSGD at lr 0.01 when the iteration estimate exceeds 10,000, otherwise
// AdamW at lr 0.01 / (4 + n_classes); momentum 0.9 either way.
OptimizerChoice select_optimizer(std::int64_t epochs, std::int64_t n_train, std::int64_t batch,
                                 std::int64_t n_classes);

// ---------------------------------------------------------------------------
// Newton-Schulz orthogonalization

// One step of X <- a X + b (X X^T) X + c (X X^T)^2 X.
struct QuinticCoefficients {
    double a;
    double b;
    double c;
};

// Per-step minimax schedule: step k is the odd quintic closest to 1 in the
// sup norm over the interval of singular values left by step k-1, starting
// from [1e-3, 1]. After five steps every singular value in that range lands
// in [0.886, 1.114].
inline constexpr std::array<QuinticCoefficients, 5> kMinimaxSchedule{{
    {8.470329482, -25.10807862, 18.62927881},
    {4.182838715, -3.108705448, 0.5806075097},
    {3.961872037, -2.954074405, 0.5629774098},
    {3.286622662, -2.46474742, 0.5073607839},
    {2.273780165, -1.644687778, 0.4161939348},
}};

// Fixed coefficients of the reference Muon implementation. Its five-step
// output band is roughly [0.68, 1.20].
inline constexpr QuinticCoefficients kMuonClassic{3.4445, -4.7750, 2.0315};

// Frobenius-normalizes g, then applies `iters` quintic steps following
// kMinimaxSchedule (steps past its end reuse the last entry). Tall inputs are
// orthogonalized through their transpose.
Matrix newton_schulz(const Matrix& g, int iters = 5);
Matrix newton_schulz(const Matrix& g, std::span<const QuinticCoefficients> schedule);

// ---------------------------------------------------------------------------
// Optimizers

class Optimizer {
public:
    virtual ~Optimizer() = default;
    virtual void step(std::span<Tensor> params, std::span<const Tensor> grads) = 0;
    virtual std::string_view name() const = 0;

    double learning_rate() const { return lr_; }
    void set_learning_rate(double lr) { lr_ = lr; }

protected:
    explicit Optimizer(double lr) : lr_(lr) {}
    double lr_;
};

struct MuSGDConfig {
    double momentum = 0.9;
    double w_muon = 0.2;
    double w_sgd = 1.0;
    int ns_iters = 5;
};

// Muon + Nesterov SGD. Rank >= 2 tensors take
//   p -= lr * (w_muon * NS(momentum buffer) + w_sgd * nesterov direction),
// lower-rank tensors take the SGD branch only.
class MuSGD final : public Optimizer {
public:
    explicit MuSGD(double lr = 0.01, MuSGDConfig config = {});

    void step(std::span<Tensor> params, std::span<const Tensor> grads) override;
    std::string_view name() const override { return "MuSGD"; }

    const MuSGDConfig& config() const { return config_; }
    const std::vector<Tensor>& muon_buffers() const { return muon_buf_; }
    const std::vector<Tensor>& sgd_buffers() const { return sgd_buf_; }

private:
    MuSGDConfig config_;
    std::vector<Tensor> muon_buf_;
    std::vector<Tensor> sgd_buf_;
};

struct AdamWConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;
};

// p -= lr * m_hat / (sqrt(v_hat) + eps) + lr * weight_decay * p
class AdamW final : public Optimizer {
public:
    explicit AdamW(double lr = 0.001, AdamWConfig config = {});

    void step(std::span<Tensor> params, std::span<const Tensor> grads) override;
    std::string_view name() const override { return "AdamW"; }

    std::int64_t steps() const { return t_; }

private:
    AdamWConfig config_;
    std::int64_t t_ = 0;
    std::vector<Tensor> exp_avg_;
    std::vector<Tensor> exp_avg_sq_;
};

std::unique_ptr<Optimizer> make_optimizer(const OptimizerChoice& choice);

// ---------------------------------------------------------------------------
// Cosine annealing with warm restarts

struct LrSchedule {
    double lr_max = 0.01;
    double lr_min = 0.0;
    int period_epochs = 100;
    std::vector<int> restart_epochs;  // epochs at which t resets to 0
};

double lr_at(const LrSchedule& schedule, double epoch);

// ---------------------------------------------------------------------------
// Toy problems

enum class ToyProblem { QuadraticBowl, LeastSquares, Logistic };
std::string_view toy_problem_name(ToyProblem p);
ToyProblem parse_toy_problem(std::string_view name);

// Loss before every step followed by the loss after the last one
// (steps + 1 values). Throws DivergedLoss once the loss exceeds 1e6.
std::vector<double> toy_train(ToyProblem problem, Optimizer& optimizer, int steps, std::uint64_t seed = 42);

}  // namespace segpipe
