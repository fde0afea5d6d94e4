#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace calmreg {

struct VerifyOptions {
    std::uint64_t seed = 0;
    bool quick = false;
    int threads = 0;  // 0: CALMREG_THREADS or hardware concurrency
};

struct CriterionResult {
    int id = 0;
    std::string name;
    bool pass = false;
    double value = 0.0;      // headline statistic
    double threshold = 0.0;  // what it is compared against
    std::string detail;      // deterministic; no timings
    double seconds = 0.0;    // wall time, never written to CSV
};

struct VerifyResult {
    std::vector<CriterionResult> items;
    double seconds = 0.0;
    bool all_pass() const;
    std::string to_csv() const;
    std::string summary_table() const;  // includes timings
};

using CriterionFn = CriterionResult (*)(const VerifyOptions&);

struct CriterionEntry {
    int id;
    const char* name;
    CriterionFn fn;
};

// Criteria 1..12 in order; 13 (determinism + total runtime) is assembled by run_verify.
const std::vector<CriterionEntry>& criteria();

CriterionResult run_criterion(const CriterionEntry& e, const VerifyOptions& opt);

VerifyResult run_verify(const VerifyOptions& opt,
                        const std::function<void(const CriterionResult&)>& on_result = {});

}  // namespace calmreg
