#pragma once

#include "rbki/common.hpp"
#include "rbki/dense.hpp"

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace rbki::genio {

// Test-matrix spectra. `values` are the leading singular values; anything
// beyond the generator's reach down to min(n,d) is filled per kind (decay kinds
// extend their law, explicit lists pad with zeros). Repeats are allowed here:
// matrices with vanishing gaps are exactly what the smoothing path needs.
struct SpectrumSpec {
    enum class Kind { geometric, polynomial, clustered, explicit_list };

    Kind kind = Kind::geometric;
    double ratio = 0.9;             // geometric: sigma_i = ratio^{i-1}
    double power = 1.0;             // polynomial: sigma_i = i^{-power}
    std::vector<double> values;     // clustered / explicit_list seeds
    std::vector<int> multiplicities;  // clustered only, aligned with values

    std::vector<double> singular_values(Index count) const;
    std::string describe() const;
};

// "geometric:0.9", "poly:1.5", "list:3,2,1", "clustered:1x2,0.5x3"
SpectrumSpec parse_spectrum_spec(const std::string& text);

struct SynthMatrix {
    Matrix A;
    dense::SvdResult truth;  // the factors A was built from, sign-normalized
};

// A = U diag(sigma) V^T with independent Haar factors. The truth factors are
// exact by construction, not recomputed.
SynthMatrix synth_matrix(const SpectrumSpec& spec, Index n, Index d,
                         std::uint64_t seed);

// Haar-distributed orthonormal columns (QR of a Gaussian with R-sign fix).
Matrix haar_basis(Index rows, Index cols, std::mt19937_64& rng);

// Matrix Market "array real general", entries column-major, full double
// round-trip precision.
void write_matrix_market(const std::string& path, const Matrix& M);
Matrix read_matrix_market(const std::string& path);

// Raw binary: magic "RBKI", u32 version 1, u64 rows, u64 cols, then row-major
// float64 payload, all little-endian.
void write_matrix_raw(const std::string& path, const Matrix& M);
Matrix read_matrix_raw(const std::string& path);

// Reads either format, deciding by file magic rather than extension.
Matrix read_matrix_any(const std::string& path);

// One experiment trial, one row in the results CSV. Fields that do not apply
// to a given experiment stay NaN (numeric) or empty (text).
struct TrialRecord {
    int schema_version = 1;
    std::string experiment_id;
    std::uint64_t seed = 0;
    long long n = -1, d = -1;
    int k = -1, b = -1, q = -1;
    double epsilon = nan_value(), delta = nan_value(), gamma = nan_value();
    long long matvec_count = -1;
    long long matvec_proxy_bq = -1;
    double wall_time_s = nan_value();
    double frobenius_ratio = nan_value();
    double spectral_ratio = nan_value();
    double max_index_residual = nan_value();
    double sigma_min = nan_value();
    double log_sigma_min = nan_value();
    double log_bound = nan_value();
    bool pass = false;

    static double nan_value();
};

// Deterministic CSV: fixed header, rows sorted by (experiment_id, seed),
// 17 significant digits, RFC 4180 quoting.
void emit_records(std::vector<TrialRecord> records, const std::string& path);
void write_records(const std::vector<TrialRecord>& records, std::ostream& out);
std::string csv_header();

}  // namespace rbki::genio
