// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 toktrack contributors

#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace toktrack {

struct GradCheckEntry {
    std::string op;
    int inputs = 0;          // random instances checked
    double max_rel_err = 0.0;
    bool passed = false;
};

struct GradSuiteResult {
    double tolerance = 0.0;
    std::vector<GradCheckEntry> entries;
    bool passed() const;
};

// Checks autodiff against central differences for every differentiable op
// group the model uses, `inputs` random instances per op, every input
// tensor of each op perturbed. Deterministic given the seed.
GradSuiteResult run_grad_suite(std::uint64_t seed = 0, int inputs = 10, double tolerance = 1e-5);

// One aligned row per op plus a PASS/FAIL footer.
std::string format_grad_report(const GradSuiteResult& result);

} // namespace toktrack
