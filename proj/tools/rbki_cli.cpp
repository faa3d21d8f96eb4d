#include "CLI11.hpp"

#include "rbki/bench.hpp"
#include "rbki/genio.hpp"
#include "rbki/lab.hpp"
#include "rbki/rbki.hpp"
#include "rbki/verify.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <limits>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace {

using namespace rbki;

int default_threads() {
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

std::vector<int> parse_int_list(const std::string& text, const char* what) {
    std::vector<int> out;
    std::stringstream stream(text);
    std::string token;
    while (std::getline(stream, token, ',')) {
        try {
            std::size_t pos = 0;
            const int value = std::stoi(token, &pos);
            if (pos != token.size() || value < 1) throw std::invalid_argument(token);
            out.push_back(value);
        } catch (const std::exception&) {
            throw config_error(std::string(what) + ": bad list entry '" + token +
                               "' (want comma-separated positive integers)");
        }
    }
    if (out.empty()) throw config_error(std::string(what) + ": empty list");
    return out;
}

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw io_error("cannot create output directory '" + dir + "': " + ec.message());
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw io_error("cannot open '" + path + "' for writing");
    out << content;
    if (!out) throw io_error("write failed for '" + path + "'");
}

// Maps the text spectrum forms onto the lab's node models. The lab needs
// exactly k strictly decreasing nodes, so explicit lists must match k.
lab::SpectrumModel lab_model_from_text(int k, const std::string& text) {
    const genio::SpectrumSpec spec = genio::parse_spectrum_spec(text);
    switch (spec.kind) {
        case genio::SpectrumSpec::Kind::geometric:
            return lab::SpectrumModel::geometric(k, spec.ratio);
        case genio::SpectrumSpec::Kind::polynomial:
            return lab::SpectrumModel::polynomial(k, spec.power);
        case genio::SpectrumSpec::Kind::explicit_list:
            if (static_cast<int>(spec.values.size()) != k)
                throw config_error("lab: list spectrum must supply exactly k values");
            return lab::SpectrumModel::custom(spec.values);
        case genio::SpectrumSpec::Kind::clustered: {
            std::vector<double> expanded;
            for (std::size_t i = 0; i < spec.values.size(); ++i)
                for (int r = 0; r < spec.multiplicities[i]; ++r)
                    expanded.push_back(spec.values[i]);
            if (static_cast<int>(expanded.size()) != k)
                throw config_error("lab: clustered spectrum must expand to exactly k values");
            return lab::SpectrumModel::custom(expanded);
        }
    }
    throw config_error("lab: unknown spectrum kind");
}

// ---------------------------------------------------------------------------

struct ApproxConfig {
    std::string spec_text;
    std::string input_path;
    long long n = 400, d = 400;
    int k = 0;
    int b = 1;
    std::string q_text = "auto";
    double eps = 0.25;
    double delta = 0.05;
    double gamma = 0.0;
    bool smoothed = false;
    std::uint64_t seed = 0;
    int threads = default_threads();
    std::string out_dir = ".";
};

// File inputs have no known spectrum, so auto q runs a cheap probe first and
// feeds its singular-value estimates to the advisor.
int probe_q(const core::LinearOperator& op, const ApproxConfig& c) {
    const Index n = op.rows();
    const Index d = op.cols();
    const Index min_nd = std::min(n, d);
    const int t = (c.k + c.b - 1) / c.b;
    const int k_probe =
        static_cast<int>(std::min<long long>(1LL * c.b * t + 1, min_nd));

    core::KrylovConfig probe;
    probe.k = k_probe;
    probe.b = c.b;
    const long long max_q = (d + c.b - 1) / c.b;
    probe.q = static_cast<int>(std::min<long long>(
        std::max(2LL * ((k_probe + c.b - 1) / c.b) + 2, 4LL), max_q));
    probe.epsilon = c.eps;
    probe.delta = c.delta;
    probe.seed = mix_seed(c.seed, 0xA002);
    const core::LowRankApprox rough = core::rbki(op, probe);

    std::vector<double> sigma(rough.core_singulars.data(),
                              rough.core_singulars.data() + rough.core_singulars.size());
    if (static_cast<int>(sigma.size()) < std::max(2, c.b * ((c.k + c.b - 1) / c.b)))
        throw numeric_error("approx: probe run recovered too few singular values for --q auto");
    return core::recommend_q(sigma, c.k, c.b, c.eps, c.delta, n, 1.0).q;
}

int run_approx(const ApproxConfig& c) {
    if (c.spec_text.empty() == c.input_path.empty())
        throw config_error("approx: give exactly one of --spec or --input");

    Matrix A;
    std::optional<dense::SvdResult> truth;
    genio::SpectrumSpec spec;
    if (!c.spec_text.empty()) {
        spec = genio::parse_spectrum_spec(c.spec_text);
        genio::SynthMatrix synth =
            genio::synth_matrix(spec, c.n, c.d, mix_seed(c.seed, 0xA001));
        A = std::move(synth.A);
        truth = std::move(synth.truth);
    } else {
        A = genio::read_matrix_any(c.input_path);
    }

    core::DenseOperator op(A);
    core::KrylovConfig cfg;
    cfg.k = c.k;
    cfg.b = c.b;
    cfg.epsilon = c.eps;
    cfg.delta = c.delta;
    cfg.seed = c.seed;
    if (c.q_text == "auto") {
        if (truth) {
            const std::vector<double> sigma =
                spec.singular_values(std::min(A.rows(), A.cols()));
            cfg.q = core::recommend_q(sigma, c.k, c.b, c.eps, c.delta, A.rows(), 1.0).q;
        } else {
            core::KrylovConfig shape = cfg;
            shape.q = std::max(1, (c.k + c.b - 1) / c.b);
            shape.validate(A.rows(), A.cols());  // fail fast before the probe
            cfg.q = probe_q(op, c);
        }
    } else {
        try {
            std::size_t pos = 0;
            cfg.q = std::stoi(c.q_text, &pos);
            if (pos != c.q_text.size()) throw std::invalid_argument(c.q_text);
        } catch (const std::exception&) {
            throw config_error("approx: --q must be a positive integer or 'auto'");
        }
    }
    cfg.validate(A.rows(), A.cols());

    const auto t0 = std::chrono::steady_clock::now();
    core::PerturbationConfig pcfg;
    pcfg.gamma = c.gamma;
    pcfg.seed = c.seed;
    const core::LowRankApprox approx =
        c.smoothed ? core::rbki_smoothed(op, cfg, pcfg) : core::rbki(op, cfg);
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    ensure_dir(c.out_dir);
    const std::string base = c.out_dir + "/";
    genio::write_matrix_raw(base + "left.bin", approx.left_vectors);
    Matrix sv(approx.core_singulars.size(), 1);
    sv.col(0) = approx.core_singulars;
    genio::write_matrix_raw(base + "singular_values.bin", sv);
    genio::write_matrix_raw(base + "right.bin", approx.right_vectors);

    genio::TrialRecord rec;
    rec.experiment_id = c.smoothed ? "approx_smoothed" : "approx";
    rec.seed = c.seed;
    rec.n = A.rows();
    rec.d = A.cols();
    rec.k = c.k;
    rec.b = c.b;
    rec.q = cfg.q;
    rec.epsilon = c.eps;
    rec.delta = c.delta;
    if (c.smoothed) rec.gamma = c.gamma;
    rec.matvec_count = approx.matvec_cost;
    rec.matvec_proxy_bq = static_cast<long long>(c.b) * cfg.q;
    // Wall time stays NaN under single-thread strict determinism.
    if (c.threads > 1) rec.wall_time_s = seconds;
    rec.pass = true;

    std::printf("approx: rank %lld factors written to %s{left,singular_values,right}.bin\n",
                static_cast<long long>(approx.rank()), base.c_str());
    std::printf("approx: b=%d q=%d basis_cols=%lld matvecs=%lld\n", c.b, cfg.q,
                static_cast<long long>(approx.basis.Z.cols()), approx.matvec_cost);
    if (truth) {
        const core::ErrorMetrics m = core::error_metrics(op, approx, *truth, c.k);
        rec.frobenius_ratio = m.frobenius_ratio;
        rec.spectral_ratio = m.spectral_ratio;
        rec.max_index_residual = m.max_index_residual;
        rec.pass = m.frobenius_ratio <= 1.0 + c.eps && m.max_index_residual <= c.eps;
        std::printf("approx: frobenius_ratio=%.6f spectral_ratio=%.6f "
                    "max_index_residual=%.6f -> %s\n",
                    m.frobenius_ratio, m.spectral_ratio, m.max_index_residual,
                    rec.pass ? "ok" : "missed target");
    }
    genio::emit_records({rec}, base + "approx.csv");
    return 0;
}

// ---------------------------------------------------------------------------

struct LabConfig {
    int k = 24;
    std::string b_text = "1,2,3,4,6,8,12,24";
    std::string spectrum_text = "geometric:0.9";
    int trials = 200;
    double delta = 0.1;
    double calibration_C = 1.0;
    std::uint64_t seed = 0;
    int threads = default_threads();
    std::string out_dir = ".";
};

int run_lab(const LabConfig& c) {
    if (c.k < 2 || c.k > 200) throw config_error("lab: need 2 <= k <= 200");
    if (c.trials < 1) throw config_error("lab: need at least one trial");
    const std::vector<int> blocks = parse_int_list(c.b_text, "lab --b");
    for (int b : blocks)
        if (c.k % b != 0)
            throw config_error("lab: every block width must divide k (got b=" +
                               std::to_string(b) + ", k=" + std::to_string(c.k) + ")");
    const lab::SpectrumModel model = lab_model_from_text(c.k, c.spectrum_text);

    std::vector<genio::TrialRecord> records;
    int pv_violations = 0, degenerate = 0;
    std::printf("lab: spectrum %s, k=%d, %d trials per block width\n",
                model.describe().c_str(), c.k, c.trials);
    for (int b : blocks) {
        const lab::SigmaMinExperiment exp = lab::sigma_min_experiment(
            model, b, c.trials, mix_seed(c.seed, 0x1AB0 + b), c.delta,
            c.calibration_C, /*with_pv=*/true);
        double worst_sigma = std::numeric_limits<double>::infinity();
        for (const lab::SigmaMinTrial& tr : exp.trials) {
            if (tr.degenerate)
                ++degenerate;
            else if (!tr.pv_holds)
                ++pv_violations;
            worst_sigma = std::min(worst_sigma, tr.sigma_min);
            genio::TrialRecord rec;
            rec.experiment_id = "lab_sigma_b" + std::string(b < 10 ? "0" : "") + std::to_string(b);
            rec.seed = tr.seed;
            rec.k = c.k;
            rec.b = b;
            rec.delta = c.delta;
            rec.sigma_min = tr.sigma_min;
            rec.log_sigma_min = tr.log_sigma_min;
            rec.log_bound = tr.log_bound;
            rec.pass = !tr.violated;
            records.push_back(rec);
        }
        genio::TrialRecord summary;
        summary.experiment_id = "lab_summary_b" + std::string(b < 10 ? "0" : "") + std::to_string(b);
        summary.seed = mix_seed(c.seed, 0x1AB0 + b);
        summary.k = c.k;
        summary.b = b;
        summary.delta = c.delta;
        summary.sigma_min = std::exp(-exp.median_log_inv_sigma_min);
        summary.log_sigma_min = -exp.median_log_inv_sigma_min;
        summary.log_bound = exp.log_bound;
        summary.pass = exp.violation_fraction <= c.delta;
        records.push_back(summary);
        std::printf("lab: b=%2d violation fraction %.3f (allow %.3f), median "
                    "sigma_min %.3e, floor %.3e, worst %.3e\n",
                    b, exp.violation_fraction, c.delta,
                    std::exp(-exp.median_log_inv_sigma_min), std::exp(exp.log_bound),
                    worst_sigma);
    }

    // Non-sparsity counts for each distinct depth t = k/b >= 2.
    std::set<int> depths;
    for (int b : blocks)
        if (c.k / b >= 2) depths.insert(c.k / b);
    const int draws = std::min(c.trials, 100);
    for (int t : depths) {
        const dense::VandermondeMatrix V(model.lambdas(), t);
        auto rng = make_rng(c.seed, 0x1AC0 + t);
        int bad = 0;
        for (int i = 0; i < draws; ++i) {
            Vector y = gaussian_matrix(t, 1, rng).col(0);
            y.normalize();
            if (!lab::vandermonde_nonsparse_count(V, y).holds) ++bad;
        }
        if (!lab::vandermonde_nonsparse_count(V, lab::adversarial_y(model, t)).holds)
            ++bad;
        genio::TrialRecord rec;
        rec.experiment_id = "lab_count_t" + std::string(t < 10 ? "0" : "") + std::to_string(t);
        rec.seed = mix_seed(c.seed, 0x1AC0 + t);
        rec.k = c.k;
        rec.q = t;
        rec.pass = bad == 0;
        records.push_back(rec);
        std::printf("lab: depth t=%d image spread violations %d/%d\n", t, bad, draws + 1);
    }

    // Certificates at the first interior block width.
    for (int b : blocks) {
        if (b <= 1 || b >= c.k) continue;
        const int cert_trials = std::min(c.trials, 20);
        int valid = 0, p1_failures = 0;
        for (int trial = 0; trial < cert_trials; ++trial) {
            const lab::VandermondeKrylov kry =
                lab::sample_krylov(model, b, mix_seed(c.seed, 0x1AD0 + trial));
            const lab::Certificate cert = lab::certify(kry, 0, 1, c.delta);
            valid += cert.valid();
            p1_failures += !cert.p1;
        }
        genio::TrialRecord rec;
        rec.experiment_id = "lab_cert_b" + std::string(b < 10 ? "0" : "") + std::to_string(b);
        rec.seed = mix_seed(c.seed, 0x1AD0);
        rec.k = c.k;
        rec.b = b;
        rec.delta = c.delta;
        rec.pass = p1_failures == 0;
        records.push_back(rec);
        std::printf("lab: certificates at b=%d: %d/%d valid, %d orthogonality failures\n",
                    b, valid, cert_trials, p1_failures);
        break;
    }

    // Nonsingularity sweep.
    int rank_failures = 0;
    for (int b : blocks) {
        const lab::NonsingularityResult res = lab::nonsingularity_check(
            model, b, std::min(c.trials, 100), mix_seed(c.seed, 0x1AE0 + b));
        rank_failures += res.rank_failures;
        genio::TrialRecord rec;
        rec.experiment_id = "lab_rank_b" + std::string(b < 10 ? "0" : "") + std::to_string(b);
        rec.seed = mix_seed(c.seed, 0x1AE0 + b);
        rec.k = c.k;
        rec.b = b;
        rec.pass = res.rank_failures == 0;
        records.push_back(rec);
    }
    std::printf("lab: %d rank failures across the nonsingularity sweep\n", rank_failures);

    ensure_dir(c.out_dir);
    genio::emit_records(records, c.out_dir + "/lab.csv");
    std::printf("lab: records written to %s/lab.csv\n", c.out_dir.c_str());

    if (pv_violations > 0)
        throw numeric_error(
            "lab: the piecewise lower bound failed in " +
            std::to_string(pv_violations) +
            " trials; that inequality is deterministic, so this is a defect");
    if (degenerate > 0)
        std::printf("lab: %d degenerate decomposition trials skipped\n", degenerate);
    return 0;
}

// ---------------------------------------------------------------------------

struct BenchConfig {
    std::string spec_text = "geometric:0.9";
    long long n = 400, d = 400;
    int k = 20;
    std::string b_text = "1,4,20";
    double target = 1.25;
    std::uint64_t seed = 0;
    int stride = 1;
    std::string out_dir = ".";
};

int run_bench(const BenchConfig& c) {
    bench::Options opt;
    opt.spectrum = genio::parse_spectrum_spec(c.spec_text);
    opt.n = c.n;
    opt.d = c.d;
    opt.k = c.k;
    opt.blocks = parse_int_list(c.b_text, "bench --b");
    opt.target_ratio = c.target;
    opt.seed = c.seed;
    opt.eval_stride = c.stride;
    const bench::SweepResult res = bench::sweep(opt);

    ensure_dir(c.out_dir);
    genio::emit_records(res.records, c.out_dir + "/bench.csv");
    write_text_file(c.out_dir + "/bench_plot.gp",
                    bench::plot_script("bench.csv", opt.blocks));

    for (int b : opt.blocks) {
        const bench::Checkpoint* last = nullptr;
        for (const bench::Checkpoint& cp : res.checkpoints)
            if (cp.b == b) last = &cp;
        if (!last) continue;
        std::printf("bench: b=%3d %s at %lld matvecs, %.3f s (ratio %.4f, basis %d)\n",
                    b, last->reached ? "hit target" : "stopped", last->matvec_count,
                    last->seconds, last->frobenius_ratio, last->basis_cols);
    }
    std::printf("bench: CSV and plot script written to %s/\n", c.out_dir.c_str());
    return 0;
}

// ---------------------------------------------------------------------------

struct VerifyConfig {
    bool list = false;
    int only = 0;  // 0 = all
    std::uint64_t seed = verify::kDefaultSeed;
    int threads = default_threads();
    double calibration_C = 1.0;
    double c1 = 1.0;
    std::string out_dir = ".";
};

int run_verify(const VerifyConfig& c) {
    if (c.list) {
        const auto& names = verify::criterion_names();
        for (int id = 1; id <= verify::kCriterionCount; ++id)
            std::printf("criterion %2d: %s\n", id, names[id - 1].c_str());
        return 0;
    }
    verify::Options opt;
    opt.seed = c.seed;
    opt.threads = c.threads;
    opt.calibration_C = c.calibration_C;
    opt.c1 = c.c1;

    std::vector<int> ids;
    if (c.only != 0) {
        ids.push_back(c.only);
    } else {
        for (int id = 1; id <= verify::kCriterionCount; ++id) ids.push_back(id);
    }

    std::vector<genio::TrialRecord> all_records;
    int failed = 0;
    for (int id : ids) {
        const verify::CriterionResult r = verify::run_criterion(id, opt);
        std::cout << verify::format_line(r) << std::endl;
        failed += !r.pass;
        all_records.insert(all_records.end(), r.records.begin(), r.records.end());
    }
    ensure_dir(c.out_dir);
    genio::emit_records(all_records, c.out_dir + "/verify.csv");
    std::printf("%d of %zu criteria passed; records in %s/verify.csv\n",
                static_cast<int>(ids.size()) - failed, ids.size(), c.out_dir.c_str());
    if (failed > 0)
        throw numeric_error(std::to_string(failed) + " acceptance criteria failed");
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"randomized block Krylov low-rank approximation toolkit"};
    app.require_subcommand(1);

    ApproxConfig ac;
    CLI::App* approx = app.add_subcommand("approx", "approximate a matrix to rank k");
    approx->add_option("--spec", ac.spec_text, "spectrum text for a synthetic problem, e.g. geometric:0.9");
    approx->add_option("--input", ac.input_path, "input matrix (Matrix Market or raw binary)");
    approx->add_option("--n", ac.n, "rows for synthetic problems");
    approx->add_option("--d", ac.d, "columns for synthetic problems");
    approx->add_option("--k", ac.k, "target rank")->required();
    approx->add_option("--b", ac.b, "block width");
    approx->add_option("--q", ac.q_text, "Krylov block count, or 'auto'");
    approx->add_option("--eps", ac.eps, "accuracy target");
    approx->add_option("--delta", ac.delta, "failure probability budget");
    CLI::Option* gamma_opt =
        approx->add_option("--gamma", ac.gamma, "diagonal smoothing magnitude (enables the smoothed path)");
    approx->add_option("--seed", ac.seed, "master seed")->envname("RBKI_SEED");
    approx->add_option("--threads", ac.threads, "worker threads; 1 keeps outputs byte-deterministic");
    approx->add_option("--out", ac.out_dir, "output directory");

    LabConfig lc;
    CLI::App* lab_cmd = app.add_subcommand("lab", "conditioning experiments on random Krylov matrices");
    lab_cmd->add_option("--k", lc.k, "Krylov matrix size");
    lab_cmd->add_option("--b", lc.b_text, "comma-separated block widths, each dividing k");
    lab_cmd->add_option("--spectrum", lc.spectrum_text, "node spectrum, e.g. geometric:0.9");
    lab_cmd->add_option("--trials", lc.trials, "trials per block width");
    lab_cmd->add_option("--delta", lc.delta, "failure probability budget");
    lab_cmd->add_option("--calibration-C", lc.calibration_C, "scale on the sigma_min floor");
    lab_cmd->add_option("--seed", lc.seed, "master seed")->envname("RBKI_SEED");
    lab_cmd->add_option("--threads", lc.threads, "worker threads; 1 keeps outputs byte-deterministic");
    lab_cmd->add_option("--out", lc.out_dir, "output directory");

    BenchConfig bc;
    CLI::App* bench_cmd = app.add_subcommand("bench", "accuracy-versus-cost sweep over block widths");
    bench_cmd->add_option("--spec", bc.spec_text, "spectrum text for the synthetic problem");
    bench_cmd->add_option("--n", bc.n, "rows");
    bench_cmd->add_option("--d", bc.d, "columns");
    bench_cmd->add_option("--k", bc.k, "target rank");
    bench_cmd->add_option("--b", bc.b_text, "comma-separated block widths");
    bench_cmd->add_option("--target", bc.target, "stop once frobenius_ratio reaches this");
    bench_cmd->add_option("--seed", bc.seed, "master seed")->envname("RBKI_SEED");
    bench_cmd->add_option("--stride", bc.stride, "checkpoint every this many Krylov blocks");
    bench_cmd->add_option("--out", bc.out_dir, "output directory");

    VerifyConfig vc;
    CLI::App* verify_cmd = app.add_subcommand("verify", "run the acceptance criteria suite");
    verify_cmd->add_flag("--list", vc.list, "list criteria without running");
    verify_cmd->add_option("--only", vc.only, "run a single criterion (1-12)");
    verify_cmd->add_option("--seed", vc.seed, "master seed")->envname("RBKI_SEED");
    verify_cmd->add_option("--threads", vc.threads, "worker threads; 1 keeps outputs byte-deterministic");
    verify_cmd->add_option("--calibration-C", vc.calibration_C, "scale on the sigma_min floor");
    verify_cmd->add_option("--c1", vc.c1, "scale on the advised iteration count");
    verify_cmd->add_option("--out", vc.out_dir, "output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        ac.smoothed = gamma_opt->count() > 0;
        if (approx->parsed()) return run_approx(ac);
        if (lab_cmd->parsed()) return run_lab(lc);
        if (bench_cmd->parsed()) return run_bench(bc);
        if (verify_cmd->parsed()) return run_verify(vc);
        throw config_error("no subcommand selected");
    } catch (const config_error& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const io_error& e) {
        std::cerr << "i/o error: " << e.what() << '\n';
        return 3;
    } catch (const numeric_error& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << '\n';
        return 1;
    }
}
