// End-to-end tests driving the installed CLI binary as a subprocess. The
// binary path arrives via the RBKI_CLI_PATH compile definition.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "rbki/genio.hpp"

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;
using rbki::Matrix;

namespace {

std::string cli_path() { return RBKI_CLI_PATH; }

fs::path scratch_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "rbki_cli_tests" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

struct RunResult {
    int exit_code = -1;
    std::string output;  // stdout and stderr interleaved
};

RunResult run_cli(const std::string& args, const std::string& env_prefix = "") {
    static int counter = 0;
    const fs::path log = fs::temp_directory_path() / "rbki_cli_tests" /
                         ("log_" + std::to_string(counter++) + ".txt");
    fs::create_directories(log.parent_path());
    const std::string cmd = env_prefix + "\"" + cli_path() + "\" " + args + " > \"" +
                            log.string() + "\" 2>&1";
    const int status = std::system(cmd.c_str());
    RunResult res;
    if (status != -1 && WIFEXITED(status)) res.exit_code = WEXITSTATUS(status);
    res.output = slurp(log);
    fs::remove(log);
    return res;
}

int count_occurrences(const std::string& text, const std::string& needle) {
    int count = 0;
    for (std::size_t pos = text.find(needle); pos != std::string::npos;
         pos = text.find(needle, pos + needle.size()))
        ++count;
    return count;
}

}  // namespace

TEST_CASE("approx on a synthetic problem writes factors and a record") {
    const fs::path dir = scratch_dir("approx_ok");
    const RunResult res = run_cli(
        "approx --spec geometric:0.9 --n 60 --d 50 --k 8 --b 4 --q auto "
        "--eps 0.25 --seed 7 --threads 1 --out " + dir.string());
    CHECK(res.exit_code == 0);
    CHECK(res.output.find("frobenius_ratio") != std::string::npos);

    const Matrix left = rbki::genio::read_matrix_raw((dir / "left.bin").string());
    const Matrix sv = rbki::genio::read_matrix_raw((dir / "singular_values.bin").string());
    const Matrix right = rbki::genio::read_matrix_raw((dir / "right.bin").string());
    CHECK(left.rows() == 60);
    CHECK(left.cols() == 8);
    CHECK(sv.rows() == 8);
    CHECK(sv.cols() == 1);
    CHECK(right.rows() == 50);
    CHECK(right.cols() == 8);
    for (int i = 1; i < 8; ++i) CHECK(sv(i, 0) <= sv(i - 1, 0));

    const std::string csv = slurp(dir / "approx.csv");
    CHECK(csv.find(rbki::genio::csv_header()) == 0);
    CHECK(csv.find("approx") != std::string::npos);
}

TEST_CASE("approx auto q with a file input runs the probe phase") {
    const fs::path dir = scratch_dir("approx_file_auto");
    const rbki::genio::SynthMatrix synth = rbki::genio::synth_matrix(
        rbki::genio::parse_spectrum_spec("geometric:0.8"), 50, 40, 123);
    rbki::genio::write_matrix_market((dir / "input.mtx").string(), synth.A);

    const RunResult res = run_cli(
        "approx --input " + (dir / "input.mtx").string() +
        " --k 6 --b 3 --q auto --threads 1 --out " + dir.string());
    CHECK(res.exit_code == 0);
    const Matrix left = rbki::genio::read_matrix_raw((dir / "left.bin").string());
    CHECK(left.rows() == 50);
    CHECK(left.cols() == 6);
    // No ground truth for file inputs, so no quality summary is printed.
    CHECK(res.output.find("frobenius_ratio") == std::string::npos);
}

TEST_CASE("approx with a smoothing magnitude uses the smoothed path") {
    const fs::path dir = scratch_dir("approx_smoothed");
    const RunResult res = run_cli(
        "approx --spec clustered:1x2,0.5x3 --n 30 --d 30 --k 2 --b 2 --q 12 "
        "--gamma 1e-3 --seed 5 --threads 1 --out " + dir.string());
    CHECK(res.exit_code == 0);
    const std::string csv = slurp(dir / "approx.csv");
    CHECK(csv.find("approx_smoothed") != std::string::npos);
    const Matrix left = rbki::genio::read_matrix_raw((dir / "left.bin").string());
    CHECK(left.rows() == 30);
    CHECK(left.cols() == 2);
}

TEST_CASE("approx rejects a rank larger than the matrix") {
    const fs::path dir = scratch_dir("approx_bad_k");
    const RunResult res = run_cli(
        "approx --spec geometric:0.9 --n 20 --d 20 --k 30 --q 5 --threads 1 --out " +
        dir.string());
    CHECK(res.exit_code == 2);
    CHECK(res.output.find("config error") != std::string::npos);
}

TEST_CASE("approx maps a missing input file to the i/o exit code") {
    const fs::path dir = scratch_dir("approx_bad_input");
    const RunResult res = run_cli(
        "approx --input /nonexistent/rbki_missing.mtx --k 4 --q 4 --threads 1 --out " +
        dir.string());
    CHECK(res.exit_code == 3);
    CHECK(res.output.find("i/o error") != std::string::npos);
}

TEST_CASE("lab emits per-trial and summary records") {
    const fs::path dir = scratch_dir("lab_ok");
    const RunResult res = run_cli(
        "lab --k 8 --b 1,2,4 --spectrum geometric:0.8 --trials 20 --seed 3 "
        "--threads 1 --out " + dir.string());
    CHECK(res.exit_code == 0);
    const std::string csv = slurp(dir / "lab.csv");
    CHECK(csv.find("lab_sigma_b01") != std::string::npos);
    CHECK(csv.find("lab_summary_b04") != std::string::npos);
    CHECK(csv.find("lab_count_t02") != std::string::npos);
    CHECK(csv.find("lab_cert_b02") != std::string::npos);
    CHECK(csv.find("lab_rank_b01") != std::string::npos);
    CHECK(res.output.find("violation fraction") != std::string::npos);
}

TEST_CASE("lab rejects block widths that do not divide k") {
    const fs::path dir = scratch_dir("lab_bad_b");
    const RunResult res =
        run_cli("lab --k 8 --b 5 --trials 5 --threads 1 --out " + dir.string());
    CHECK(res.exit_code == 2);
    CHECK(res.output.find("divide") != std::string::npos);
}

TEST_CASE("verify --list prints every criterion without running any") {
    const RunResult res = run_cli("verify --list");
    CHECK(res.exit_code == 0);
    CHECK(count_occurrences(res.output, "criterion") == 12);
    CHECK(res.output.find("PASS") == std::string::npos);
}

TEST_CASE("verify runs a single criterion and writes its records") {
    const fs::path dir = scratch_dir("verify_only7");
    const RunResult res =
        run_cli("verify --only 7 --threads 1 --out " + dir.string());
    CHECK(res.exit_code == 0);
    CHECK(res.output.find("criterion  7 PASS") != std::string::npos);
    const std::string csv = slurp(dir / "verify.csv");
    CHECK(csv.find("c07_frozen") != std::string::npos);
}

TEST_CASE("verify reports numerical failure when a criterion cannot hold") {
    const fs::path dir = scratch_dir("verify_forced_fail");
    // A huge calibration constant lifts the lower-bound floor above any
    // achievable smallest singular value, so the check must fail.
    const RunResult res = run_cli(
        "verify --only 2 --calibration-C 1e30 --threads 1 --out " + dir.string());
    CHECK(res.exit_code == 4);
    CHECK(res.output.find("criterion  2 FAIL") != std::string::npos);
    CHECK(res.output.find("numerical failure") != std::string::npos);
}

TEST_CASE("verify rejects an out-of-range criterion id") {
    const RunResult res = run_cli("verify --only 13 --threads 1");
    CHECK(res.exit_code == 2);
}

TEST_CASE("bench writes one CSV series per block width plus a plot script") {
    const fs::path dir = scratch_dir("bench_ok");
    const RunResult res = run_cli(
        "bench --spec geometric:0.7 --n 60 --d 60 --k 6 --b 1,3 --target 1.5 "
        "--seed 5 --out " + dir.string());
    CHECK(res.exit_code == 0);
    const std::string csv = slurp(dir / "bench.csv");
    CHECK(csv.find("bench_b001") != std::string::npos);
    CHECK(csv.find("bench_b003") != std::string::npos);
    const std::string script = slurp(dir / "bench_plot.gp");
    CHECK(script.find("set datafile separator \",\"") != std::string::npos);
    CHECK(script.find("bench.csv") != std::string::npos);
    CHECK(script.find("b=1") != std::string::npos);
    CHECK(script.find("b=3") != std::string::npos);
}

TEST_CASE("RBKI_SEED environment variable substitutes for --seed") {
    const fs::path dir_flag = scratch_dir("seed_flag");
    const fs::path dir_env = scratch_dir("seed_env");
    const std::string common =
        "approx --spec geometric:0.9 --n 40 --d 40 --k 6 --b 2 --q 8 --threads 1 --out ";
    const RunResult by_flag = run_cli(common + dir_flag.string() + " --seed 42");
    const RunResult by_env = run_cli(common + dir_env.string(), "RBKI_SEED=42 ");
    CHECK(by_flag.exit_code == 0);
    CHECK(by_env.exit_code == 0);
    CHECK(slurp(dir_flag / "approx.csv") == slurp(dir_env / "approx.csv"));
    CHECK(slurp(dir_flag / "left.bin") == slurp(dir_env / "left.bin"));
}

TEST_CASE("single-thread runs are byte-deterministic") {
    const fs::path dir_a = scratch_dir("det_a");
    const fs::path dir_b = scratch_dir("det_b");
    const std::string common =
        "approx --spec geometric:0.9 --n 40 --d 40 --k 6 --b 3 --q 8 "
        "--seed 11 --threads 1 --out ";
    CHECK(run_cli(common + dir_a.string()).exit_code == 0);
    CHECK(run_cli(common + dir_b.string()).exit_code == 0);
    CHECK(slurp(dir_a / "approx.csv") == slurp(dir_b / "approx.csv"));
    CHECK(slurp(dir_a / "left.bin") == slurp(dir_b / "left.bin"));
    CHECK(slurp(dir_a / "right.bin") == slurp(dir_b / "right.bin"));
}
