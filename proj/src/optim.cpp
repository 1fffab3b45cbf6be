#include "segpipe/optim.hpp"

#include "segpipe/error.hpp"
#include "segpipe/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace segpipe {

Tensor::Tensor(std::vector<std::size_t> dims, double fill) : shape(std::move(dims)) {
    std::size_t n = 1;
    for (const std::size_t d : shape) {
        n *= d;
    }
    data.assign(n, fill);
}

std::string_view optimizer_name(OptimizerKind kind) {
    return kind == OptimizerKind::MuSGD ? "MuSGD" : "AdamW";
}

OptimizerChoice select_optimizer(std::int64_t epochs, std::int64_t n_train, std::int64_t batch,
                                 std::int64_t n_classes) {
    if (epochs <= 0 || n_train <= 0 || batch <= 0 || n_classes <= 0) {
        throw Error(Errc::InvalidInput, "epochs, n_train, batch and n_classes must be positive");
    }
    OptimizerChoice choice;
    choice.iterations = epochs * ((n_train + batch - 1) / batch);
    choice.momentum = 0.9;
    if (choice.iterations > kMuSGDIterationThreshold) {
        choice.kind = OptimizerKind::MuSGD;
        choice.learning_rate = 0.01;
    } else {
        choice.kind = OptimizerKind::AdamW;
        choice.learning_rate = 0.01 / static_cast<double>(4 + n_classes);
    }
    return choice;
}

namespace {

void check_pairs(std::span<Tensor> params, std::span<const Tensor> grads) {
    if (params.size() != grads.size()) {
        throw Error(Errc::ShapeMismatch, "parameter and gradient counts differ");
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (params[i].shape != grads[i].shape || params[i].data.size() != grads[i].data.size()) {
            throw Error(Errc::ShapeMismatch, "gradient " + std::to_string(i) + " does not match its parameter");
        }
    }
}

void ensure_buffers(std::vector<Tensor>& buffers, std::span<Tensor> params) {
    if (buffers.empty()) {
        for (const Tensor& p : params) {
            buffers.emplace_back(p.shape, 0.0);
        }
        return;
    }
    if (buffers.size() != params.size()) {
        throw Error(Errc::ShapeMismatch, "optimizer state was built for a different parameter list");
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (buffers[i].shape != params[i].shape) {
            throw Error(Errc::ShapeMismatch, "optimizer state shape differs from parameter " + std::to_string(i));
        }
    }
}

}  // namespace

MuSGD::MuSGD(double lr, MuSGDConfig config) : Optimizer(lr), config_(config) {
    if (!(lr >= 0.0) || !(config.momentum >= 0.0 && config.momentum < 1.0)) {
        throw Error(Errc::InvalidInput, "MuSGD needs lr >= 0 and momentum in [0, 1)");
    }
}

void MuSGD::step(std::span<Tensor> params, std::span<const Tensor> grads) {
    check_pairs(params, grads);
    ensure_buffers(sgd_buf_, params);
    ensure_buffers(muon_buf_, params);
    const kernels::KernelTable& k = kernels::active();
    const double mu = config_.momentum;

    std::vector<double> sgd_dir;
    for (std::size_t i = 0; i < params.size(); ++i) {
        Tensor& p = params[i];
        const Tensor& g = grads[i];
        sgd_dir.resize(p.size());
        k.nesterov_update(sgd_dir, sgd_buf_[i].data, g.data, mu);

        const bool muon_branch = p.rank() >= 2 && config_.w_muon != 0.0;
        if (!muon_branch) {
            for (std::size_t j = 0; j < p.size(); ++j) {
                p.data[j] -= lr_ * (config_.w_sgd * sgd_dir[j]);
            }
            continue;
        }

        std::vector<double>& mbuf = muon_buf_[i].data;
        bool all_zero = true;
        for (std::size_t j = 0; j < mbuf.size(); ++j) {
            mbuf[j] = mu * mbuf[j] + g.data[j];
            all_zero = all_zero && mbuf[j] == 0.0;
        }
        std::vector<double> muon_dir(p.size(), 0.0);
        if (!all_zero) {
            muon_dir = newton_schulz(Matrix(p.rows(), p.cols(), mbuf), config_.ns_iters).data();
        }
        for (std::size_t j = 0; j < p.size(); ++j) {
            p.data[j] -= lr_ * (config_.w_muon * muon_dir[j] + config_.w_sgd * sgd_dir[j]);
        }
    }
}

AdamW::AdamW(double lr, AdamWConfig config) : Optimizer(lr), config_(config) {
    if (!(lr >= 0.0) || !(config.beta1 >= 0.0 && config.beta1 < 1.0) || !(config.beta2 >= 0.0 && config.beta2 < 1.0) ||
        !(config.eps > 0.0) || !(config.weight_decay >= 0.0)) {
        throw Error(Errc::InvalidInput, "invalid AdamW hyperparameters");
    }
}

void AdamW::step(std::span<Tensor> params, std::span<const Tensor> grads) {
    check_pairs(params, grads);
    ensure_buffers(exp_avg_, params);
    ensure_buffers(exp_avg_sq_, params);
    ++t_;
    kernels::AdamWCoefficients c;
    c.lr = lr_;
    c.beta1 = config_.beta1;
    c.beta2 = config_.beta2;
    c.one_minus_beta1 = 1.0 - config_.beta1;
    c.one_minus_beta2 = 1.0 - config_.beta2;
    c.eps = config_.eps;
    c.weight_decay = config_.weight_decay;
    c.bias_correction1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
    c.bias_correction2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
    const kernels::KernelTable& k = kernels::active();
    for (std::size_t i = 0; i < params.size(); ++i) {
        k.adamw_update(params[i].data, grads[i].data, exp_avg_[i].data, exp_avg_sq_[i].data, c);
    }
}

std::unique_ptr<Optimizer> make_optimizer(const OptimizerChoice& choice) {
    if (choice.kind == OptimizerKind::MuSGD) {
        MuSGDConfig cfg;
        cfg.momentum = choice.momentum;
        return std::make_unique<MuSGD>(choice.learning_rate, cfg);
    }
    AdamWConfig cfg;
    cfg.beta1 = choice.momentum;
    return std::make_unique<AdamW>(choice.learning_rate, cfg);
}

double lr_at(const LrSchedule& schedule, double epoch) {
    if (!(epoch >= 0.0)) {
        throw Error(Errc::InvalidInput, "epoch must be non-negative");
    }
    if (schedule.period_epochs <= 0 || schedule.lr_min > schedule.lr_max) {
        throw Error(Errc::InvalidInput, "schedule needs a positive period and lr_min <= lr_max");
    }
    double last_restart = 0.0;
    for (const int r : schedule.restart_epochs) {
        if (r <= epoch && r > last_restart) {
            last_restart = r;
        }
    }
    const double t = epoch - last_restart;
    const double lr = schedule.lr_min + 0.5 * (schedule.lr_max - schedule.lr_min) *
                                            (1.0 + std::cos(std::numbers::pi * t / schedule.period_epochs));
    return std::clamp(lr, schedule.lr_min, schedule.lr_max);
}

}  // namespace segpipe
