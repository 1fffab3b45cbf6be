#pragma once

#include "segpipe/losses.hpp"
#include "segpipe/rng.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace segpipe::cli {

enum ExitStatus : int { kOk = 0, kValidation = 1, kIo = 2, kInternal = 3 };

// args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

struct LosscheckOptions {
    int trials = 100;
    std::uint64_t seed = 42;
    int size = 8;
    bool inject_fault = false;
};

struct LosscheckRow {
    std::string component;
    double max_relative_error = 0.0;
    double tolerance = 0.0;
    bool passed = false;
};

// Random logits ~ N(0, 2) and a random target with a random class.
LossInput random_loss_input(Rng& rng, int size);

std::vector<LosscheckRow> run_losscheck(const LosscheckOptions& options, const LossWeights& weights = {});

}  // namespace segpipe::cli
