// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 toktrack contributors

#include <doctest.h>

#include "toktrack/grad_suite.hpp"

using namespace toktrack;

TEST_CASE("gradient suite covers every op group and passes at 1e-5") {
    GradSuiteResult res = run_grad_suite(0, 10, 1e-5);
    REQUIRE(res.entries.size() == 13);
    for (const GradCheckEntry& e : res.entries) {
        INFO(e.op, " max_rel_err=", e.max_rel_err);
        CHECK(e.passed);
        CHECK(e.inputs == 10);
        CHECK(e.max_rel_err >= 0.0);
    }
    CHECK(res.passed());
    std::string report = format_grad_report(res);
    CHECK(report.find("matmul") != std::string::npos);
    CHECK(report.find("total_loss") != std::string::npos);
    CHECK(report.find("PASS") != std::string::npos);
}

TEST_CASE("gradient suite is deterministic and tolerance-sensitive") {
    GradSuiteResult a = run_grad_suite(7, 3, 1e-5);
    GradSuiteResult b = run_grad_suite(7, 3, 1e-5);
    REQUIRE(a.entries.size() == b.entries.size());
    for (std::size_t i = 0; i < a.entries.size(); ++i)
        CHECK(a.entries[i].max_rel_err == b.entries[i].max_rel_err);
    GradSuiteResult strict = run_grad_suite(7, 3, 0.0);
    CHECK_FALSE(strict.passed());
    CHECK(format_grad_report(strict).find("FAIL") != std::string::npos);
}
