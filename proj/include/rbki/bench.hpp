#pragma once

#include "rbki/genio.hpp"
#include "rbki/rbki.hpp"

#include <string>
#include <vector>

namespace rbki::bench {

struct Options {
    genio::SpectrumSpec spectrum{};  // synthesized problem, geometric by default
    Index n = 400;
    Index d = 400;
    int k = 20;
    std::vector<int> blocks = {1, 4, 20};
    double target_ratio = 1.25;  // stop a series once frobenius_ratio <= this
    std::uint64_t seed = 0;
    int eval_stride = 1;          // checkpoint every this many Krylov blocks
    bool record_wall_time = true;  // false keeps output byte-stable across runs

    void validate() const;
};

// One measured point on a block width's accuracy-versus-cost curve.
struct Checkpoint {
    int b = 0;
    int blocks_done = 0;
    int basis_cols = 0;
    long long matvec_count = 0;  // operator cost plus one pass for evaluation
    double seconds = 0.0;        // elapsed within this series
    double frobenius_error = 0.0;
    double frobenius_ratio = 0.0;
    bool reached = false;
};

struct SweepResult {
    std::vector<Checkpoint> checkpoints;
    std::vector<genio::TrialRecord> records;
    double optimal_error = 0.0;
};

// Runs the iteration once per block width on one synthesized matrix, recording
// the error ratio at every checkpoint until the target is met or the basis
// fills the ambient space.
SweepResult sweep(const Options& opt);

// gnuplot script with two panels (error ratio vs matvec count, error ratio vs
// seconds), one series per block width, reading the records CSV by filename.
std::string plot_script(const std::string& csv_filename,
                        const std::vector<int>& blocks);

}  // namespace rbki::bench
