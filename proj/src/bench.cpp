#include "rbki/bench.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

namespace rbki::bench {
namespace {

using clock_type = std::chrono::steady_clock;

std::string series_id(int b) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "bench_b%03d", b);
    return buf;
}

}  // namespace

void Options::validate() const {
    if (n <= 0 || d <= 0) throw config_error("bench: n and d must be positive");
    if (k <= 0 || k > std::min(n, d))
        throw config_error("bench: need 1 <= k <= min(n, d)");
    if (blocks.empty()) throw config_error("bench: empty block-width list");
    for (int b : blocks)
        if (b < 1 || b > k)
            throw config_error("bench: block widths must satisfy 1 <= b <= k");
    if (!(target_ratio > 1.0))
        throw config_error("bench: target ratio must exceed 1");
    if (eval_stride < 1) throw config_error("bench: eval stride must be >= 1");
}

SweepResult sweep(const Options& opt) {
    opt.validate();
    const genio::SynthMatrix synth =
        genio::synth_matrix(opt.spectrum, opt.n, opt.d, mix_seed(opt.seed, 0xBE01));
    const Matrix& A = synth.A;
    const double total_sq = A.squaredNorm();

    const std::vector<double> sigma =
        opt.spectrum.singular_values(std::min(opt.n, opt.d));
    double tail_sq = 0.0;
    for (std::size_t i = static_cast<std::size_t>(opt.k); i < sigma.size(); ++i)
        tail_sq += sigma[i] * sigma[i];

    SweepResult out;
    out.optimal_error = std::sqrt(tail_sq);
    const double nan = genio::TrialRecord::nan_value();

    for (int b : opt.blocks) {
        const auto t0 = clock_type::now();
        core::DenseOperator op(A);
        const Matrix G =
            core::gaussian_start_block(opt.n, b, mix_seed(opt.seed, 0xBE02 + b));
        dense::BlockOrthonormalizer ortho(opt.d);
        Matrix AZ(opt.n, opt.d);
        Index az_cols = 0;
        Matrix prev;
        const long long max_blocks = (opt.d + b - 1) / b;

        bool reached = false;
        for (long long block = 0; block < max_blocks && !reached; ++block) {
            const Matrix W = (block == 0) ? op.apply_transpose(G)
                                          : op.apply_transpose(op.apply(prev));
            const Index before = ortho.rank();
            const Index kept = ortho.push_block(W);
            if (kept == 0) break;
            prev = ortho.basis().middleCols(before, kept);
            AZ.middleCols(az_cols, kept) = A * prev;
            az_cols += kept;

            const bool last = block + 1 == max_blocks || az_cols >= opt.d;
            if ((block + 1) % opt.eval_stride != 0 && !last) continue;

            const Matrix gram =
                AZ.leftCols(az_cols).transpose() * AZ.leftCols(az_cols);
            Eigen::SelfAdjointEigenSolver<Matrix> es(gram);
            if (es.info() != Eigen::Success)
                throw numeric_error("bench: basis Gram eigensolve failed");
            double captured = 0.0;
            const Index m = es.eigenvalues().size();
            const Index take = std::min<Index>(opt.k, m);
            for (Index i = 0; i < take; ++i)
                captured += std::max(0.0, es.eigenvalues()(m - 1 - i));
            const double err = std::sqrt(std::max(0.0, total_sq - captured));
            const double ratio =
                out.optimal_error > 0.0
                    ? err / out.optimal_error
                    : (err <= 1e-8 * std::sqrt(total_sq)
                           ? 1.0
                           : std::numeric_limits<double>::infinity());

            Checkpoint cp;
            cp.b = b;
            cp.blocks_done = static_cast<int>(block + 1);
            cp.basis_cols = static_cast<int>(az_cols);
            cp.matvec_count = op.matvec_count() + az_cols;
            cp.seconds = std::chrono::duration<double>(clock_type::now() - t0).count();
            cp.frobenius_error = err;
            cp.frobenius_ratio = ratio;
            cp.reached = ratio <= opt.target_ratio;
            reached = cp.reached;
            out.checkpoints.push_back(cp);

            genio::TrialRecord rec;
            rec.experiment_id = series_id(b);
            rec.seed = opt.seed;
            rec.n = opt.n;
            rec.d = opt.d;
            rec.k = opt.k;
            rec.b = b;
            rec.q = cp.blocks_done;
            rec.epsilon = opt.target_ratio - 1.0;
            rec.matvec_count = cp.matvec_count;
            rec.matvec_proxy_bq = static_cast<long long>(b) * cp.blocks_done;
            rec.wall_time_s = opt.record_wall_time ? cp.seconds : nan;
            rec.frobenius_ratio = cp.frobenius_ratio;
            rec.pass = cp.reached;
            out.records.push_back(rec);
        }
    }
    return out;
}

std::string plot_script(const std::string& csv_filename,
                        const std::vector<int>& blocks) {
    std::ostringstream out;
    out << "# Accuracy versus cost, one series per block width.\n";
    out << "# Usage: gnuplot " << "this_script.gp" << "\n";
    out << "set datafile separator \",\"\n";
    out << "set terminal pngcairo size 1200,500\n";
    out << "set output \"bench.png\"\n";
    out << "set multiplot layout 1,2\n";
    out << "set logscale y\n";
    out << "set key top right\n";
    out << "set ylabel \"Frobenius error ratio\"\n";

    const auto series = [&](int value_col) {
        std::ostringstream plot;
        plot << "plot ";
        for (std::size_t i = 0; i < blocks.size(); ++i) {
            const std::string id = series_id(blocks[i]);
            if (i) plot << ", \\\n     ";
            plot << '"' << csv_filename << "\" using (strcol(2) eq \"" << id
                 << "\" ? $" << value_col << " : 1/0):15 with linespoints title \"b="
                 << blocks[i] << '"';
        }
        plot << "\n";
        return plot.str();
    };

    out << "set xlabel \"matrix-vector products\"\n";
    out << series(12);
    out << "set xlabel \"seconds\"\n";
    out << series(14);
    out << "unset multiplot\n";
    return out.str();
}

}  // namespace rbki::bench
