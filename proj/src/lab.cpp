#include "rbki/lab.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace rbki::lab {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void validate_lambdas(const std::vector<double>& lambdas) {
    if (lambdas.size() < 2)
        throw config_error("spectrum model: need at least two eigenvalues");
    if (std::abs(lambdas[0] - 1.0) > 1e-12)
        throw config_error("spectrum model: eigenvalues must be normalized to lambda_1 = 1");
    for (std::size_t i = 0; i < lambdas.size(); ++i) {
        if (!std::isfinite(lambdas[i]) || lambdas[i] < 0.0 || lambdas[i] > 1.0)
            throw config_error("spectrum model: eigenvalues must lie in [0,1]");
        if (i > 0 && !(lambdas[i] < lambdas[i - 1]))
            throw config_error("spectrum model: eigenvalues must be strictly decreasing");
    }
}

}  // namespace

SpectrumModel::SpectrumModel(std::vector<double> lambdas, std::string label)
    : lambdas_(std::move(lambdas)), label_(std::move(label)) {
    validate_lambdas(lambdas_);
}

SpectrumModel SpectrumModel::geometric(int k, double ratio) {
    if (k < 2) throw config_error("spectrum model: k must be at least 2");
    if (!(ratio > 0.0 && ratio < 1.0))
        throw config_error("spectrum model: geometric ratio must lie in (0,1)");
    std::vector<double> l(static_cast<std::size_t>(k));
    double v = 1.0;
    for (int i = 0; i < k; ++i) {
        l[static_cast<std::size_t>(i)] = v;
        v *= ratio;
    }
    std::ostringstream os;
    os << "geometric:" << ratio;
    return SpectrumModel(std::move(l), os.str());
}

SpectrumModel SpectrumModel::polynomial(int k, double power) {
    if (k < 2) throw config_error("spectrum model: k must be at least 2");
    if (!(power > 0.0)) throw config_error("spectrum model: power must be positive");
    std::vector<double> l(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i)
        l[static_cast<std::size_t>(i)] = std::pow(static_cast<double>(i + 1), -power);
    std::ostringstream os;
    os << "poly:" << power;
    return SpectrumModel(std::move(l), os.str());
}

SpectrumModel SpectrumModel::clustered(const std::vector<int>& counts, double base_ratio,
                                       double width) {
    if (counts.empty()) throw config_error("spectrum model: no clusters");
    if (!(base_ratio > 0.0 && base_ratio < 1.0))
        throw config_error("spectrum model: base ratio must lie in (0,1)");
    if (!(width > 0.0 && width < 1.0))
        throw config_error("spectrum model: cluster width must lie in (0,1)");
    std::vector<double> l;
    double base = 1.0;
    for (int count : counts) {
        if (count < 1) throw config_error("spectrum model: cluster counts must be positive");
        if ((count - 1) * width >= 1.0 - base_ratio)
            throw config_error("spectrum model: cluster too wide to stay decreasing");
        for (int j = 0; j < count; ++j) l.push_back(base * (1.0 - j * width));
        base *= base_ratio;
    }
    std::ostringstream os;
    os << "clustered:" << counts.size() << "x" << base_ratio << "x" << width;
    return SpectrumModel(std::move(l), os.str());
}

SpectrumModel SpectrumModel::custom(std::vector<double> lambdas, bool normalize) {
    if (lambdas.empty()) throw config_error("spectrum model: empty eigenvalue list");
    if (normalize && lambdas[0] > 0.0) {
        const double l1 = lambdas[0];
        for (double& v : lambdas) v /= l1;
    }
    return SpectrumModel(std::move(lambdas), "custom");
}

core::GapStats SpectrumModel::gap_stats() const {
    return core::gap_stats_from_eigenvalues(lambdas_, k());
}

VandermondeKrylov sample_krylov(const SpectrumModel& spectrum, int b,
                                std::uint64_t seed) {
    const int k = spectrum.k();
    if (b < 1 || k % b != 0)
        throw config_error("sample krylov: block size must divide k");
    VandermondeKrylov out;
    out.k = k;
    out.b = b;
    out.t = k / b;
    out.lambdas = spectrum.lambdas();

    auto rng = make_rng(seed, 0x4B52u);
    out.H = gaussian_matrix(k, b, rng);
    out.V = dense::VandermondeMatrix(out.lambdas, out.t).build();
    out.K.resize(k, k);
    for (int j = 0; j < b; ++j) {
        out.K.middleCols(static_cast<Index>(j) * out.t, out.t) =
            out.H.col(j).asDiagonal() * out.V;
    }
    return out;
}

Matrix krylov_from_blocks(const std::vector<double>& lambdas, const Matrix& H, int t) {
    if (t < 1) throw config_error("krylov blocks: t must be at least 1");
    const Index k = H.rows();
    if (static_cast<std::size_t>(k) != lambdas.size())
        throw config_error("krylov blocks: eigenvalue count must match rows of H");
    const Index b = H.cols();
    Matrix K(k, b * t);
    K.leftCols(b) = H;
    for (int i = 1; i < t; ++i) {
        for (Index r = 0; r < k; ++r) {
            K.row(r).segment(static_cast<Index>(i) * b, b) =
                lambdas[static_cast<std::size_t>(r)] *
                K.row(r).segment(static_cast<Index>(i - 1) * b, b);
        }
    }
    return K;
}

Matrix witness_start_block(int k, int b) {
    if (b < 1 || k < 1 || k % b != 0)
        throw config_error("witness block: block size must divide k");
    const int t = k / b;
    Matrix H = Matrix::Zero(k, b);
    for (int j = 0; j < b; ++j) {
        for (int r = 0; r < t; ++r) H(j * t + r, j) = 1.0;
    }
    return H;
}

double theorem41_bound_from_lambdas(const std::vector<double>& lambdas, int b,
                                    double delta, double calibration_C) {
    const int k = static_cast<int>(lambdas.size());
    if (b < 1 || k < 2 || k % b != 0)
        throw config_error("bound: block size must divide k");
    if (!(delta > 0.0 && delta < 1.0))
        throw config_error("bound: delta must lie in (0,1)");
    if (!(calibration_C > 0.0))
        throw config_error("bound: calibration constant must be positive");
    const int t = k / b;
    core::GapStats stats = core::gap_stats_from_eigenvalues(lambdas, k);
    if (!(stats.min_relative_gap > 0.0)) return -kInf;
    return std::log(calibration_C) + 5.0 * std::log(delta) -
           14.0 * std::log(static_cast<double>(k)) +
           6.0 * (t - 1) *
               std::log(stats.min_relative_gap / (6.0 * stats.condition_number));
}

double theorem41_bound(const SpectrumModel& spectrum, int b, double delta,
                       double calibration_C) {
    return theorem41_bound_from_lambdas(spectrum.lambdas(), b, delta, calibration_C);
}

PVDecomposition pv_decompose(const VandermondeKrylov& kry) {
    PVDecomposition out;
    out.Q.reserve(static_cast<std::size_t>(kry.b));
    out.piece_sigma.reserve(static_cast<std::size_t>(kry.b));
    out.min_piece = kInf;
    for (int j = 0; j < kry.b; ++j) {
        Matrix Qj;
        if (kry.b == 1) {
            Qj = Matrix::Identity(kry.k, kry.k);
        } else {
            Matrix L(kry.k, static_cast<Index>(kry.b - 1) * kry.t);
            Index at = 0;
            for (int other = 0; other < kry.b; ++other) {
                if (other == j) continue;
                L.middleCols(at, kry.t) =
                    kry.K.middleCols(static_cast<Index>(other) * kry.t, kry.t);
                at += kry.t;
            }
            Qj = dense::orthonormal_complement(L, static_cast<double>(kry.k) * 1e3);
        }
        if (Qj.cols() != kry.t) out.degenerate = true;
        Matrix piece = Qj.transpose() * (kry.H.col(j).asDiagonal() * kry.V);
        const double sm = (piece.rows() == 0) ? 0.0 : dense::sigma_min(piece);
        out.piece_sigma.push_back(sm);
        out.min_piece = std::min(out.min_piece, sm);
        out.Q.push_back(std::move(Qj));
    }
    return out;
}

bool pv_inequality_holds(const VandermondeKrylov& kry, const PVDecomposition& pv,
                         double sigma_min_K, double sigma_max_K, double slack) {
    const double rhs = pv.min_piece / std::sqrt(static_cast<double>(kry.b));
    return sigma_min_K >= rhs - slack * sigma_max_K;
}

SigmaMinExperiment sigma_min_experiment(const SpectrumModel& spectrum, int b,
                                        int trials, std::uint64_t seed, double delta,
                                        double calibration_C, bool with_pv) {
    if (trials < 1) throw config_error("sigma_min experiment: need at least one trial");
    SigmaMinExperiment out;
    out.log_bound = theorem41_bound(spectrum, b, delta, calibration_C);
    out.trials.reserve(static_cast<std::size_t>(trials));

    for (int trial = 0; trial < trials; ++trial) {
        SigmaMinTrial rec;
        rec.seed = mix_seed(seed, static_cast<std::uint64_t>(trial));
        VandermondeKrylov kry = sample_krylov(spectrum, b, rec.seed);
        Vector s = dense::singular_values(kry.K);
        rec.sigma_min = s(s.size() - 1);
        rec.sigma_max = s(0);
        rec.log_sigma_min = (rec.sigma_min > 0.0) ? std::log(rec.sigma_min) : -kInf;
        rec.log_bound = out.log_bound;
        rec.violated = rec.log_sigma_min < out.log_bound;
        if (with_pv) {
            PVDecomposition pv = pv_decompose(kry);
            rec.degenerate = pv.degenerate;
            rec.pv_min_piece = pv.min_piece;
            rec.pv_holds = pv.degenerate ||
                           pv_inequality_holds(kry, pv, rec.sigma_min, rec.sigma_max);
        }
        if (rec.violated) ++out.violations;
        out.trials.push_back(std::move(rec));
    }
    out.violation_fraction =
        static_cast<double>(out.violations) / static_cast<double>(trials);

    std::vector<double> loginv;
    loginv.reserve(out.trials.size());
    for (const auto& t : out.trials) loginv.push_back(-t.log_sigma_min);
    std::sort(loginv.begin(), loginv.end());
    const std::size_t m = loginv.size();
    out.median_log_inv_sigma_min =
        (m % 2 == 1) ? loginv[m / 2] : 0.5 * (loginv[m / 2 - 1] + loginv[m / 2]);
    return out;
}

double bilinear_variance(const Matrix& Qj, const dense::VandermondeMatrix& V,
                         const Vector& x, const Vector& y) {
    if (Qj.cols() != x.size())
        throw config_error("bilinear variance: x length must match cols(Q_j)");
    if (std::abs(x.norm() - 1.0) > 1e-8)
        throw config_error("bilinear variance: x must be a unit vector");
    if (std::abs(y.norm() - 1.0) > 1e-8)
        throw config_error("bilinear variance: y must be a unit vector");
    Matrix Vm = V.build();
    if (Vm.rows() != Qj.rows())
        throw config_error("bilinear variance: node count must match rows(Q_j)");
    if (Vm.cols() != y.size())
        throw config_error("bilinear variance: y length must match the Vandermonde degree");
    Vector qx = Qj * x;
    Vector vy = Vm * y;
    double var = 0.0;
    for (Index i = 0; i < qx.size(); ++i) var += qx(i) * qx(i) * vy(i) * vy(i);
    return var;
}

NonsparseCount vandermonde_nonsparse_count(const dense::VandermondeMatrix& V,
                                           const Vector& y) {
    const int k = static_cast<int>(V.nodes.size());
    const int t = V.degree;
    if (y.size() != t)
        throw config_error("nonsparse count: y length must match the Vandermonde degree");
    if (y.cwiseAbs().maxCoeff() == 0.0)
        throw config_error("nonsparse count: y must be nonzero");
    core::GapStats stats = core::gap_stats_from_eigenvalues(V.nodes, k);
    if (!(stats.min_relative_gap > 0.0))
        throw config_error("nonsparse count: spectrum gap vanishes");

    NonsparseCount out;
    out.needed = k - (t - 1);
    out.log_threshold =
        std::log(y.cwiseAbs().maxCoeff()) +
        2.0 * (t - 1) * std::log(stats.min_relative_gap / (6.0 * stats.condition_number));
    out.threshold = std::exp(out.log_threshold);

    Vector vy = V.build() * y;
    for (Index i = 0; i < vy.size(); ++i) {
        const double a = std::abs(vy(i));
        if (a > 0.0 && std::log(a) >= out.log_threshold - 1e-9) ++out.count;
    }
    out.holds = out.count >= out.needed;
    return out;
}

Vector adversarial_y(const SpectrumModel& spectrum, int t) {
    if (t < 1) throw config_error("adversarial y: t must be at least 1");
    if (t > spectrum.k()) throw config_error("adversarial y: t exceeds spectrum size");
    std::vector<double> coeff{1.0};
    for (int j = 2; j <= t; ++j) {
        const double root = spectrum.lambdas()[static_cast<std::size_t>(j - 1)];
        std::vector<double> next(coeff.size() + 1, 0.0);
        for (std::size_t r = 0; r < coeff.size(); ++r) {
            next[r + 1] += coeff[r];
            next[r] -= root * coeff[r];
        }
        coeff = std::move(next);
    }
    Vector y = Vector::Zero(t);
    for (std::size_t r = 0; r < coeff.size(); ++r)
        y(static_cast<Index>(r)) = coeff[r];
    return y;
}

NonsparseCount subspace_nonsparse_check(const Matrix& Qj,
                                        const SpectrumModel& spectrum, const Vector& x,
                                        double delta) {
    if (!(delta > 0.0 && delta < 1.0))
        throw config_error("subspace check: delta must lie in (0,1)");
    if (Qj.rows() != spectrum.k())
        throw config_error("subspace check: Q_j rows must match the spectrum size");
    if (Qj.cols() != x.size())
        throw config_error("subspace check: x length must match cols(Q_j)");
    if (std::abs(x.norm() - 1.0) > 1e-8)
        throw config_error("subspace check: x must be a unit vector");
    const int k = spectrum.k();
    const int t = static_cast<int>(Qj.cols());
    core::GapStats stats = spectrum.gap_stats();
    if (!(stats.min_relative_gap > 0.0))
        throw config_error("subspace check: spectrum gap vanishes");

    NonsparseCount out;
    out.needed = t + 1;
    out.log_threshold =
        std::log(delta) - 0.5 * std::log(std::log(2.0 / delta)) - std::log(14.0) -
        3.0 * std::log(static_cast<double>(k)) +
        (t - 1) * std::log(stats.min_relative_gap / (2.0 * stats.condition_number));
    out.threshold = std::exp(out.log_threshold);

    Vector qx = Qj * x;
    for (Index i = 0; i < qx.size(); ++i) {
        const double a = std::abs(qx(i));
        if (a > 0.0 && std::log(a) >= out.log_threshold - 1e-9) ++out.count;
    }
    out.holds = out.count >= out.needed;
    return out;
}

namespace {

// Visits combinations of {0..k-1} of size s in lexicographic order.
template <typename F>
void for_each_support(int k, int s, long limit, F&& body) {
    std::vector<int> idx(static_cast<std::size_t>(s));
    for (int i = 0; i < s; ++i) idx[static_cast<std::size_t>(i)] = i;
    long visited = 0;
    while (true) {
        body(idx);
        if (++visited >= limit) return;
        int pos = s - 1;
        while (pos >= 0 && idx[static_cast<std::size_t>(pos)] == k - s + pos) --pos;
        if (pos < 0) return;
        ++idx[static_cast<std::size_t>(pos)];
        for (int i = pos + 1; i < s; ++i)
            idx[static_cast<std::size_t>(i)] = idx[static_cast<std::size_t>(i - 1)] + 1;
    }
}

long binomial_capped(int k, int s, long cap) {
    long result = 1;
    for (int i = 0; i < s; ++i) {
        result = result * (k - i) / (i + 1);
        if (result > cap) return cap + 1;
    }
    return result;
}

}  // namespace

Certificate certify(const VandermondeKrylov& kry, int j, int i, double delta,
                    long exhaustive_limit, int samples, std::uint64_t seed) {
    if (j < 0 || j >= kry.b || i < 0 || i >= kry.b)
        throw config_error("certify: block indices out of range");
    if (i == j) throw config_error("certify: witness block must differ from the left-out one");
    if (!(delta > 0.0 && delta < 1.0))
        throw config_error("certify: delta must lie in (0,1)");

    const int k = kry.k;
    const int t = kry.t;
    core::GapStats stats = core::gap_stats_from_eigenvalues(kry.lambdas, k);
    if (!(stats.min_relative_gap > 0.0))
        throw config_error("certify: spectrum gap vanishes");

    Certificate cert;
    cert.Gamma = kry.H.col(i).asDiagonal() * kry.V;
    cert.s = t;
    cert.log_eta = std::log(delta) - std::log(2.0) -
                   1.5 * std::log(static_cast<double>(k)) +
                   (t - 1) * std::log(stats.min_relative_gap /
                                      (2.0 * stats.condition_number));
    cert.eta = std::exp(cert.log_eta);
    cert.M = std::sqrt(5.0) * std::pow(static_cast<double>(k), 1.5) *
             std::sqrt(std::log(2.0 / delta));

    PVDecomposition pv = pv_decompose(kry);
    const Matrix& Qj = pv.Q[static_cast<std::size_t>(j)];
    cert.p1_residual = (cert.Gamma.transpose() * Qj).cwiseAbs().maxCoeff();
    cert.p1 = cert.p1_residual <= 1e-10;

    cert.gamma_norm = dense::sigma_max(cert.Gamma);
    cert.p2 = cert.gamma_norm <= cert.M;

    const long combos = binomial_capped(k, t, exhaustive_limit);
    cert.exhaustive = combos <= exhaustive_limit;
    cert.min_support_sigma = kInf;
    auto eval_support = [&](const std::vector<int>& support) {
        Matrix sub(t, t);
        for (int r = 0; r < t; ++r)
            sub.row(r) = cert.Gamma.row(support[static_cast<std::size_t>(r)]);
        cert.min_support_sigma =
            std::min(cert.min_support_sigma, dense::sigma_min(sub));
    };
    if (cert.exhaustive) {
        for_each_support(k, t, exhaustive_limit, eval_support);
    } else {
        auto rng = make_rng(seed, 0x5EC7u);
        std::vector<int> all(static_cast<std::size_t>(k));
        for (int r = 0; r < k; ++r) all[static_cast<std::size_t>(r)] = r;
        for (int sample = 0; sample < samples; ++sample) {
            for (int r = 0; r < t; ++r) {
                std::uniform_int_distribution<int> pick(r, k - 1);
                std::swap(all[static_cast<std::size_t>(r)],
                          all[static_cast<std::size_t>(pick(rng))]);
            }
            std::vector<int> support(all.begin(), all.begin() + t);
            eval_support(support);
        }
    }
    cert.p3 = cert.min_support_sigma >= cert.eta;
    return cert;
}

AbstractBound abstract_nonsparse_bound(const Certificate& cert, int k) {
    if (k < 1) throw config_error("abstract bound: k must be positive");
    if (!(cert.eta > 0.0) || !(cert.M > 0.0))
        throw config_error("abstract bound: certificate values must be positive");
    if (cert.eta > cert.M)
        throw config_error("abstract bound: eta must not exceed the norm bound M");
    AbstractBound out;
    out.log_gamma = cert.log_eta - std::log(3.0 * cert.M * std::sqrt(static_cast<double>(k)));
    out.gamma = std::exp(out.log_gamma);
    out.needed = cert.s + 1;
    return out;
}

int entries_at_least(const Vector& v, double gamma) {
    int count = 0;
    for (Index i = 0; i < v.size(); ++i)
        if (std::abs(v(i)) >= gamma) ++count;
    return count;
}

NonsingularityResult nonsingularity_check(const SpectrumModel& spectrum, int b,
                                          int trials, std::uint64_t seed) {
    if (trials < 1) throw config_error("nonsingularity: need at least one trial");
    NonsingularityResult out;
    out.trials = trials;
    out.sigma_mins.reserve(static_cast<std::size_t>(trials));
    for (int trial = 0; trial < trials; ++trial) {
        VandermondeKrylov kry =
            sample_krylov(spectrum, b, mix_seed(seed, static_cast<std::uint64_t>(trial)));
        Vector s = dense::singular_values(kry.K);
        const double smin = s(s.size() - 1);
        out.sigma_mins.push_back(smin);
        if (smin <= rank_tolerance(kry.k, s(0))) ++out.rank_failures;
    }
    return out;
}

}  // namespace rbki::lab
