#pragma once

#include "rbki/genio.hpp"
#include "rbki/lab.hpp"
#include "rbki/rbki.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace rbki::verify {

inline constexpr int kCriterionCount = 12;

// Master seed for the release acceptance run; every trial derives its own
// stream from (seed, fixed criterion tag, trial index).
inline constexpr std::uint64_t kDefaultSeed = 20260823ULL;

struct Options {
    std::uint64_t seed = kDefaultSeed;
    int threads = 1;
    double calibration_C = 1.0;  // minimum-singular-value floor scale
    double c1 = 1.0;             // iteration-count advisor scale
};

struct CriterionResult {
    int id = 0;
    std::string name;
    bool pass = false;
    std::string detail;   // one-line summary of the measured quantities
    double seconds = 0.0;
    std::vector<genio::TrialRecord> records;
};

// Stable criterion names, index 0 holds criterion 1.
const std::vector<std::string>& criterion_names();

CriterionResult run_criterion(int id, const Options& opt);

// Runs criteria 1..12 in order; when progress is non-null, one line per
// criterion is streamed as it finishes.
std::vector<CriterionResult> run_all(const Options& opt,
                                     std::ostream* progress = nullptr);

// "criterion  7 PASS  name (detail) [1.2s]"
std::string format_line(const CriterionResult& r);

}  // namespace rbki::verify
