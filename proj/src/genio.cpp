#include "rbki/genio.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

namespace rbki::genio {

namespace {

double parse_double_token(const std::string& tok, const std::string& where) {
    char* end = nullptr;
    const double v = std::strtod(tok.c_str(), &end);
    if (end == tok.c_str() || *end != '\0')
        throw config_error(where + ": cannot parse number '" + tok + "'");
    return v;
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == sep) {
            out.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    return out;
}

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

std::vector<double> SpectrumSpec::singular_values(Index count) const {
    if (count < 1) throw config_error("spectrum: need at least one singular value");
    std::vector<double> s;
    s.reserve(static_cast<std::size_t>(count));
    switch (kind) {
        case Kind::geometric: {
            if (!(ratio > 0.0 && ratio < 1.0))
                throw config_error("spectrum: geometric ratio must lie in (0,1)");
            double v = 1.0;
            for (Index i = 0; i < count; ++i) {
                s.push_back(v);
                v *= ratio;
            }
            break;
        }
        case Kind::polynomial: {
            if (!(power > 0.0))
                throw config_error("spectrum: polynomial power must be positive");
            for (Index i = 0; i < count; ++i)
                s.push_back(std::pow(static_cast<double>(i + 1), -power));
            break;
        }
        case Kind::clustered: {
            if (values.empty() || values.size() != multiplicities.size())
                throw config_error("spectrum: clustered needs matching values and counts");
            for (std::size_t j = 0; j < values.size(); ++j) {
                if (!(values[j] > 0.0))
                    throw config_error("spectrum: cluster values must be positive");
                if (j > 0 && values[j] > values[j - 1])
                    throw config_error("spectrum: cluster values must be nonincreasing");
                if (multiplicities[j] < 1)
                    throw config_error("spectrum: cluster multiplicities must be positive");
                for (int c = 0; c < multiplicities[j]; ++c) s.push_back(values[j]);
            }
            if (static_cast<Index>(s.size()) > count)
                throw config_error("spectrum: clusters exceed min(n,d) values");
            s.resize(static_cast<std::size_t>(count), 0.0);
            break;
        }
        case Kind::explicit_list: {
            if (values.empty()) throw config_error("spectrum: empty explicit list");
            for (std::size_t j = 0; j < values.size(); ++j) {
                if (!(values[j] >= 0.0) || !std::isfinite(values[j]))
                    throw config_error("spectrum: values must be finite and nonnegative");
                if (j > 0 && values[j] > values[j - 1])
                    throw config_error("spectrum: values must be nonincreasing");
            }
            if (static_cast<Index>(values.size()) > count)
                throw config_error("spectrum: more values than min(n,d)");
            s = values;
            s.resize(static_cast<std::size_t>(count), 0.0);
            break;
        }
    }
    return s;
}

std::string SpectrumSpec::describe() const {
    std::ostringstream os;
    switch (kind) {
        case Kind::geometric:
            os << "geometric:" << ratio;
            break;
        case Kind::polynomial:
            os << "poly:" << power;
            break;
        case Kind::clustered:
            os << "clustered:";
            for (std::size_t j = 0; j < values.size(); ++j) {
                if (j) os << ",";
                os << values[j] << "x" << multiplicities[j];
            }
            break;
        case Kind::explicit_list:
            os << "list:";
            for (std::size_t j = 0; j < values.size(); ++j) {
                if (j) os << ",";
                os << values[j];
            }
            break;
    }
    return os.str();
}

SpectrumSpec parse_spectrum_spec(const std::string& text) {
    const auto colon = text.find(':');
    if (colon == std::string::npos)
        throw config_error("spectrum '" + text + "': expected kind:params");
    const std::string kind = text.substr(0, colon);
    const std::string params = text.substr(colon + 1);
    SpectrumSpec spec;
    if (kind == "geometric") {
        spec.kind = SpectrumSpec::Kind::geometric;
        spec.ratio = parse_double_token(params, "spectrum geometric");
        if (!(spec.ratio > 0.0 && spec.ratio < 1.0))
            throw config_error("spectrum geometric: ratio must lie in (0,1)");
    } else if (kind == "poly") {
        spec.kind = SpectrumSpec::Kind::polynomial;
        spec.power = parse_double_token(params, "spectrum poly");
        if (!(spec.power > 0.0))
            throw config_error("spectrum poly: power must be positive");
    } else if (kind == "list") {
        spec.kind = SpectrumSpec::Kind::explicit_list;
        for (const auto& tok : split(params, ','))
            spec.values.push_back(parse_double_token(tok, "spectrum list"));
    } else if (kind == "clustered") {
        spec.kind = SpectrumSpec::Kind::clustered;
        for (const auto& tok : split(params, ',')) {
            const auto x = tok.find('x');
            if (x == std::string::npos)
                throw config_error("spectrum clustered: expected value x count, got '" +
                                   tok + "'");
            spec.values.push_back(
                parse_double_token(tok.substr(0, x), "spectrum clustered"));
            const std::string cnt = tok.substr(x + 1);
            char* end = nullptr;
            const long m = std::strtol(cnt.c_str(), &end, 10);
            if (end == cnt.c_str() || *end != '\0' || m < 1)
                throw config_error("spectrum clustered: bad multiplicity '" + cnt + "'");
            spec.multiplicities.push_back(static_cast<int>(m));
        }
    } else {
        throw config_error("spectrum: unknown kind '" + kind + "'");
    }
    return spec;
}

Matrix haar_basis(Index rows, Index cols, std::mt19937_64& rng) {
    if (cols < 1 || cols > rows)
        throw config_error("haar basis: need 1 <= cols <= rows");
    Matrix G = gaussian_matrix(rows, cols, rng);
    Eigen::HouseholderQR<Matrix> qr(G);
    Matrix Q = qr.householderQ() * Matrix::Identity(rows, cols);
    Vector diag = qr.matrixQR().diagonal().head(cols);
    for (Index j = 0; j < cols; ++j) {
        if (diag(j) < 0.0) Q.col(j) = -Q.col(j);
    }
    return Q;
}

SynthMatrix synth_matrix(const SpectrumSpec& spec, Index n, Index d,
                         std::uint64_t seed) {
    if (n < 1 || d < 1) throw config_error("synth matrix: dimensions must be positive");
    const Index r = std::min(n, d);
    const std::vector<double> sig = spec.singular_values(r);

    auto rng_u = make_rng(seed, 0x0AA1u);
    auto rng_v = make_rng(seed, 0x0AA2u);
    SynthMatrix out;
    out.truth.U = haar_basis(n, r, rng_u);
    out.truth.V = haar_basis(d, r, rng_v);
    out.truth.s = Eigen::Map<const Vector>(sig.data(), r);
    // Same sign convention as the SVD kernel, so factors compare entrywise.
    for (Index j = 0; j < r; ++j) {
        Index imax = 0;
        out.truth.U.col(j).cwiseAbs().maxCoeff(&imax);
        if (out.truth.U(imax, j) < 0.0) {
            out.truth.U.col(j) = -out.truth.U.col(j);
            out.truth.V.col(j) = -out.truth.V.col(j);
        }
    }
    out.A = out.truth.U * out.truth.s.asDiagonal() * out.truth.V.transpose();
    return out;
}

void write_matrix_market(const std::string& path, const Matrix& M) {
    if (M.rows() < 1 || M.cols() < 1)
        throw config_error("matrix market write: empty matrix");
    dense::require_finite(M, "matrix market write");
    std::ofstream out(path);
    if (!out) throw io_error("cannot open '" + path + "' for writing");
    out << "%%MatrixMarket matrix array real general\n";
    out << M.rows() << " " << M.cols() << "\n";
    for (Index j = 0; j < M.cols(); ++j)
        for (Index i = 0; i < M.rows(); ++i)
            out << format_double(M(i, j)) << "\n";
    if (!out) throw io_error("write failed for '" + path + "'");
}

namespace {

struct MmToken {
    std::string text;
    long line;
};

}  // namespace

Matrix read_matrix_market(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open '" + path + "'");
    auto fail = [&](long line, const std::string& msg) -> void {
        std::ostringstream os;
        os << path << ":" << line << ": " << msg;
        throw io_error(os.str());
    };

    std::string line;
    long lineno = 0;
    if (!std::getline(in, line)) fail(1, "empty file");
    ++lineno;
    {
        std::istringstream hs(line);
        std::string banner, object, format, field, symmetry;
        hs >> banner >> object >> format >> field >> symmetry;
        if (banner != "%%MatrixMarket") fail(lineno, "missing MatrixMarket banner");
        if (object != "matrix" || format != "array" || field != "real" ||
            symmetry != "general")
            fail(lineno, "only 'matrix array real general' is supported, got '" + line + "'");
    }

    long rows = -1, cols = -1;
    std::vector<MmToken> tokens;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line[0] == '%') continue;
        std::istringstream ls(line);
        std::string tok;
        while (ls >> tok) tokens.push_back({tok, lineno});
        if (rows < 0 && tokens.size() >= 2) {
            char* end = nullptr;
            rows = std::strtol(tokens[0].text.c_str(), &end, 10);
            if (end == tokens[0].text.c_str() || *end != '\0' || rows < 1)
                fail(tokens[0].line, "bad row count '" + tokens[0].text + "'");
            cols = std::strtol(tokens[1].text.c_str(), &end, 10);
            if (end == tokens[1].text.c_str() || *end != '\0' || cols < 1)
                fail(tokens[1].line, "bad column count '" + tokens[1].text + "'");
            tokens.erase(tokens.begin(), tokens.begin() + 2);
        }
    }
    if (rows < 0) fail(lineno, "missing dimension line");
    if (rows > 100000 || cols > 100000 || rows * cols > 200000000L)
        fail(lineno, "dimensions too large for a dense read");

    const long expected = rows * cols;
    if (static_cast<long>(tokens.size()) != expected) {
        std::ostringstream os;
        os << "expected " << expected << " entries, found " << tokens.size();
        fail(lineno, os.str());
    }

    Matrix M(rows, cols);
    std::size_t idx = 0;
    for (Index j = 0; j < cols; ++j) {
        for (Index i = 0; i < rows; ++i, ++idx) {
            char* end = nullptr;
            const double v = std::strtod(tokens[idx].text.c_str(), &end);
            if (end == tokens[idx].text.c_str() || *end != '\0')
                fail(tokens[idx].line, "cannot parse entry '" + tokens[idx].text + "'");
            if (!std::isfinite(v))
                fail(tokens[idx].line, "non-finite entry '" + tokens[idx].text + "'");
            M(i, j) = v;
        }
    }
    return M;
}

namespace {

void put_u32le(std::ostream& out, std::uint32_t v) {
    char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
    out.write(b, 4);
}

void put_u64le(std::ostream& out, std::uint64_t v) {
    char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
    out.write(b, 8);
}

bool get_u32le(std::istream& in, std::uint32_t& v) {
    unsigned char b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4)) return false;
    v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return true;
}

bool get_u64le(std::istream& in, std::uint64_t& v) {
    unsigned char b[8];
    if (!in.read(reinterpret_cast<char*>(b), 8)) return false;
    v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return true;
}

}  // namespace

void write_matrix_raw(const std::string& path, const Matrix& M) {
    if (M.rows() < 1 || M.cols() < 1) throw config_error("raw write: empty matrix");
    dense::require_finite(M, "raw write");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw io_error("cannot open '" + path + "' for writing");
    out.write("RBKI", 4);
    put_u32le(out, 1u);
    put_u64le(out, static_cast<std::uint64_t>(M.rows()));
    put_u64le(out, static_cast<std::uint64_t>(M.cols()));
    for (Index i = 0; i < M.rows(); ++i) {
        for (Index j = 0; j < M.cols(); ++j) {
            put_u64le(out, std::bit_cast<std::uint64_t>(M(i, j)));
        }
    }
    if (!out) throw io_error("write failed for '" + path + "'");
}

Matrix read_matrix_raw(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot open '" + path + "'");
    char magic[4];
    if (!in.read(magic, 4) || std::memcmp(magic, "RBKI", 4) != 0)
        throw io_error(path + ": missing RBKI magic");
    std::uint32_t version = 0;
    if (!get_u32le(in, version)) throw io_error(path + ": truncated header");
    if (version != 1) {
        std::ostringstream os;
        os << path << ": unsupported version " << version;
        throw io_error(os.str());
    }
    std::uint64_t rows = 0, cols = 0;
    if (!get_u64le(in, rows) || !get_u64le(in, cols))
        throw io_error(path + ": truncated header");
    if (rows < 1 || cols < 1) throw io_error(path + ": degenerate dimensions");
    if (rows > 100000 || cols > 100000 || rows * cols > 200000000ULL)
        throw io_error(path + ": dimension header implausibly large");

    Matrix M(static_cast<Index>(rows), static_cast<Index>(cols));
    for (std::uint64_t i = 0; i < rows; ++i) {
        for (std::uint64_t j = 0; j < cols; ++j) {
            std::uint64_t bits = 0;
            if (!get_u64le(in, bits)) {
                std::ostringstream os;
                os << path << ": truncated payload, expected " << rows * cols
                   << " doubles, stopped at " << (i * cols + j);
                throw io_error(os.str());
            }
            const double v = std::bit_cast<double>(bits);
            if (!std::isfinite(v)) {
                std::ostringstream os;
                os << path << ": non-finite entry at (" << i << "," << j << ")";
                throw io_error(os.str());
            }
            M(static_cast<Index>(i), static_cast<Index>(j)) = v;
        }
    }
    char extra;
    if (in.read(&extra, 1)) throw io_error(path + ": trailing bytes after payload");
    return M;
}

Matrix read_matrix_any(const std::string& path) {
    std::ifstream probe(path, std::ios::binary);
    if (!probe) throw io_error("cannot open '" + path + "'");
    char head[4] = {0, 0, 0, 0};
    probe.read(head, 4);
    probe.close();
    if (std::memcmp(head, "RBKI", 4) == 0) return read_matrix_raw(path);
    if (head[0] == '%') return read_matrix_market(path);
    throw io_error(path + ": unrecognized format (expected RBKI magic or %%MatrixMarket)");
}

double TrialRecord::nan_value() { return std::numeric_limits<double>::quiet_NaN(); }

std::string csv_header() {
    return "schema_version,experiment_id,seed,n,d,k,b,q,epsilon,delta,gamma,"
           "matvec_count,matvec_proxy_bq,wall_time_s,frobenius_ratio,spectral_ratio,"
           "max_index_residual,sigma_min,log_sigma_min,log_bound,pass";
}

namespace {

std::string csv_quote(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += "\"\"";
        else out.push_back(c);
    }
    out += "\"";
    return out;
}

}  // namespace

void write_records(const std::vector<TrialRecord>& records, std::ostream& out) {
    out << csv_header() << "\n";
    for (const auto& r : records) {
        out << r.schema_version << "," << csv_quote(r.experiment_id) << "," << r.seed
            << "," << r.n << "," << r.d << "," << r.k << "," << r.b << "," << r.q << ","
            << format_double(r.epsilon) << "," << format_double(r.delta) << ","
            << format_double(r.gamma) << "," << r.matvec_count << ","
            << r.matvec_proxy_bq << "," << format_double(r.wall_time_s) << ","
            << format_double(r.frobenius_ratio) << "," << format_double(r.spectral_ratio)
            << "," << format_double(r.max_index_residual) << ","
            << format_double(r.sigma_min) << "," << format_double(r.log_sigma_min) << ","
            << format_double(r.log_bound) << "," << (r.pass ? "true" : "false") << "\n";
    }
}

void emit_records(std::vector<TrialRecord> records, const std::string& path) {
    std::stable_sort(records.begin(), records.end(),
                     [](const TrialRecord& a, const TrialRecord& b) {
                         if (a.experiment_id != b.experiment_id)
                             return a.experiment_id < b.experiment_id;
                         return a.seed < b.seed;
                     });
    std::ofstream out(path);
    if (!out) throw io_error("cannot open '" + path + "' for writing");
    write_records(records, out);
    if (!out) throw io_error("write failed for '" + path + "'");
}

}  // namespace rbki::genio
