#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "endo/metrics.hpp"

namespace endo {

struct CheckResult {
    std::string name;
    bool pass = false;
    std::string detail;
};

struct SuiteReport {
    std::string suite;
    std::vector<CheckResult> checks;

    bool passed() const;
};

struct VerifyOptions {
    std::uint64_t seed = 0;
    // Deliberately breaks one check per suite; used to test the harness itself.
    bool inject_fault = false;
    int cases = 100;
};

// Finite-difference gradient check of the tiny model, f64.
SuiteReport verify_gradcheck(const VerifyOptions& opts);
// Masking, causality, incremental decoding, schedule, accumulation,
// checkpoint and determinism contracts.
SuiteReport verify_invariants(const VerifyOptions& opts);
// Metrics against brute-force oracles and the worked examples.
SuiteReport verify_oracles(const VerifyOptions& opts);

const std::vector<std::string>& suite_names();
// Throws std::invalid_argument for an unknown suite.
SuiteReport run_suite(std::string_view name, const VerifyOptions& opts);

std::string format_report(const SuiteReport& report);

// Slow, obviously-correct reference implementations.
namespace oracle {

double bleu(std::span<const Words> candidates, std::span<const Words> references, int k);
// Memoized recursion over suffixes.
std::size_t lcs(const Words& a, const Words& b);
double rouge_l_f1(const Words& candidate, const Words& reference);
// Enumerates every one-to-one exact-match alignment. Meant for short inputs.
double meteor(const Words& candidate, const Words& reference);

}  // namespace oracle

}  // namespace endo
