#pragma once

#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "json.hpp"

#include "core.hpp"
#include "data.hpp"
#include "inference.hpp"
#include "sim.hpp"

namespace srnet {

/// Tab-separated matrix with a header row of column ids and a leading id
/// column. The header may or may not carry a corner label. "NA" marks a
/// missing cell.
struct LabeledMatrix {
    std::string corner = "id";
    std::vector<std::string> row_ids;
    std::vector<std::string> col_ids;
    Matrix values;
    Mask observed;
};

namespace detail {

inline std::vector<std::string> split_tabs(const std::string& line)
{
    std::vector<std::string> out;
    std::size_t start = 0;
    for (;;) {
        const auto pos = line.find('\t', start);
        if (pos == std::string::npos) {
            out.push_back(line.substr(start));
            return out;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
}

inline std::string parse_error(const std::string& path, std::size_t line, std::size_t column, const std::string& token)
{
    return path + ": line " + std::to_string(line) + ", column " + std::to_string(column) + ": bad token '" +
           token + "'";
}

inline bool parse_real(const std::string& token, double& out)
{
    const char* first = token.data();
    const char* last = token.data() + token.size();
    if (first != last && *first == '+') {
        ++first;
    }
    const auto res = std::from_chars(first, last, out);
    return res.ec == std::errc() && res.ptr == last && std::isfinite(out);
}

inline void check_unique(const std::vector<std::string>& ids, const std::string& what, const std::string& path)
{
    std::set<std::string> seen;
    for (const auto& id : ids) {
        require(seen.insert(id).second, ErrorKind::DuplicateId, path + ": duplicate " + what + " id '" + id + "'");
    }
}

} // namespace detail

/// Shortest decimal text that reads back to the same double.
inline std::string format_real(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline LabeledMatrix read_labeled_tsv(const std::string& path, bool allow_missing = true)
{
    std::ifstream in(path);
    require(in.good(), ErrorKind::IoError, "cannot open " + path);
    std::string line;
    std::vector<std::vector<std::string>> rows;
    std::vector<std::size_t> line_numbers;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.empty()) {
            continue;
        }
        rows.push_back(detail::split_tabs(line));
        line_numbers.push_back(lineno);
    }
    require(rows.size() >= 2, ErrorKind::EmptyInput, path + ": needs a header and at least one data row");

    LabeledMatrix m;
    const auto& header = rows.front();
    const std::size_t width = rows[1].size();
    require(width >= 2, ErrorKind::ParseError, detail::parse_error(path, line_numbers[1], 1, rows[1].front()));
    if (header.size() == width) {
        m.corner = header.front();
        m.col_ids.assign(header.begin() + 1, header.end());
    } else if (header.size() + 1 == width) {
        m.col_ids = header;
    } else {
        throw Error(ErrorKind::ParseError, path + ": header has " + std::to_string(header.size()) +
                                               " fields but data rows have " + std::to_string(width));
    }
    const Index n = static_cast<Index>(rows.size() - 1);
    const Index c = static_cast<Index>(m.col_ids.size());
    m.values = Matrix::Zero(n, c);
    m.observed = Mask::Constant(n, c, true);
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& fields = rows[r];
        require(fields.size() == width, ErrorKind::ParseError,
                path + ": line " + std::to_string(line_numbers[r]) + " has " + std::to_string(fields.size()) +
                    " fields, expected " + std::to_string(width));
        m.row_ids.push_back(fields.front());
        for (std::size_t k = 1; k < fields.size(); ++k) {
            const auto i = static_cast<Index>(r - 1);
            const auto j = static_cast<Index>(k - 1);
            if (fields[k] == "NA") {
                require(allow_missing, ErrorKind::ParseError,
                        detail::parse_error(path, line_numbers[r], k + 1, fields[k]));
                m.observed(i, j) = false;
                m.values(i, j) = 0.0;
                continue;
            }
            double v = 0.0;
            require(detail::parse_real(fields[k], v), ErrorKind::ParseError,
                    detail::parse_error(path, line_numbers[r], k + 1, fields[k]));
            m.values(i, j) = v;
        }
    }
    detail::check_unique(m.row_ids, "row", path);
    detail::check_unique(m.col_ids, "column", path);
    return m;
}

inline void write_labeled_tsv(const std::string& path, const LabeledMatrix& m)
{
    std::ofstream out(path);
    require(out.good(), ErrorKind::IoError, "cannot write " + path);
    out << m.corner;
    for (const auto& id : m.col_ids) {
        out << '\t' << id;
    }
    out << '\n';
    const bool masked = m.observed.size() == m.values.size();
    for (Index i = 0; i < m.values.rows(); ++i) {
        out << m.row_ids[static_cast<std::size_t>(i)];
        for (Index j = 0; j < m.values.cols(); ++j) {
            out << '\t';
            if (masked && !m.observed(i, j)) {
                out << "NA";
            } else {
                out << format_real(m.values(i, j));
            }
        }
        out << '\n';
    }
    require(out.good(), ErrorKind::IoError, "failed writing " + path);
}

inline void write_matrix_tsv(const std::string& path, const std::string& corner, const std::vector<std::string>& row_ids,
                             const std::vector<std::string>& col_ids, const Matrix& values)
{
    require(static_cast<Index>(row_ids.size()) == values.rows() && static_cast<Index>(col_ids.size()) == values.cols(),
            ErrorKind::ShapeMismatch, "ids do not match matrix shape for " + path);
    LabeledMatrix m;
    m.corner = corner;
    m.row_ids = row_ids;
    m.col_ids = col_ids;
    m.values = values;
    write_labeled_tsv(path, m);
}

// ---------------------------------------------------------------------------
// Expression

inline ExpressionMatrix load_expression(const std::string& path)
{
    LabeledMatrix m = read_labeled_tsv(path, true);
    for (Index i = 0; i < m.values.rows(); ++i) {
        require(m.observed.row(i).any(), ErrorKind::EmptyRowOrColumn,
                path + ": gene '" + m.row_ids[static_cast<std::size_t>(i)] + "' has no observed values");
    }
    for (Index t = 0; t < m.values.cols(); ++t) {
        require(m.observed.col(t).any(), ErrorKind::EmptyRowOrColumn,
                path + ": experiment '" + m.col_ids[static_cast<std::size_t>(t)] + "' has no observed values");
    }
    ExpressionMatrix e;
    e.values = std::move(m.values);
    e.observed = std::move(m.observed);
    e.gene_ids = std::move(m.row_ids);
    e.experiment_ids = std::move(m.col_ids);
    return e;
}

inline void save_expression(const std::string& path, const ExpressionMatrix& e)
{
    LabeledMatrix m;
    m.corner = "gene";
    m.row_ids = e.gene_ids;
    m.col_ids = e.experiment_ids;
    m.values = e.values;
    m.observed = e.observed;
    write_labeled_tsv(path, m);
}

/// Centers each experiment to mean 0 and scales to sample variance 1 over its
/// observed entries (n - 1 denominator).
inline ExpressionMatrix standardize_experiments(const ExpressionMatrix& E)
{
    ExpressionMatrix out = E;
    for (Index t = 0; t < E.experiments(); ++t) {
        double sum = 0.0;
        Index count = 0;
        for (Index i = 0; i < E.genes(); ++i) {
            if (E.observed(i, t)) {
                sum += E.values(i, t);
                ++count;
            }
        }
        const std::string name =
            t < static_cast<Index>(E.experiment_ids.size()) ? E.experiment_ids[static_cast<std::size_t>(t)] : std::to_string(t);
        require(count >= 2, ErrorKind::ZeroVariance, "experiment '" + name + "' has fewer than 2 observed values");
        const double mean = sum / static_cast<double>(count);
        double ss = 0.0;
        for (Index i = 0; i < E.genes(); ++i) {
            if (E.observed(i, t)) {
                const double d = E.values(i, t) - mean;
                ss += d * d;
            }
        }
        const double sd = std::sqrt(ss / static_cast<double>(count - 1));
        require(sd > 0.0, ErrorKind::ZeroVariance, "experiment '" + name + "' has zero variance");
        for (Index i = 0; i < E.genes(); ++i) {
            if (E.observed(i, t)) {
                out.values(i, t) = (E.values(i, t) - mean) / sd;
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Prior and groups

inline PriorMatrix load_prior(const std::string& path)
{
    LabeledMatrix m = read_labeled_tsv(path, false);
    PriorMatrix p;
    p.probs = std::move(m.values);
    p.gene_ids = std::move(m.row_ids);
    p.tf_ids = std::move(m.col_ids);
    p.validate();
    return p;
}

inline void save_prior(const std::string& path, const PriorMatrix& p)
{
    write_matrix_tsv(path, "gene", p.gene_ids, p.tf_ids, p.probs);
}

/// Reorders prior rows into the expression gene order; every gene must
/// appear in both files.
inline PriorMatrix match_prior(const PriorMatrix& prior, const ExpressionMatrix& E)
{
    std::unordered_map<std::string, Index> where;
    for (std::size_t i = 0; i < prior.gene_ids.size(); ++i) {
        where.emplace(prior.gene_ids[i], static_cast<Index>(i));
    }
    for (const auto& id : prior.gene_ids) {
        require(std::find(E.gene_ids.begin(), E.gene_ids.end(), id) != E.gene_ids.end(), ErrorKind::UnknownId,
                "prior gene '" + id + "' is not in the expression matrix");
    }
    PriorMatrix out;
    out.tf_ids = prior.tf_ids;
    out.gene_ids = E.gene_ids;
    out.probs.resize(E.genes(), prior.factors());
    for (std::size_t i = 0; i < E.gene_ids.size(); ++i) {
        const auto it = where.find(E.gene_ids[i]);
        require(it != where.end(), ErrorKind::UnknownId, "expression gene '" + E.gene_ids[i] + "' has no prior row");
        out.probs.row(static_cast<Index>(i)) = prior.probs.row(it->second);
    }
    return out;
}

/// Two-column file: experiment id, group label. Labels are numbered in order
/// of first appearance. An optional header line "experiment<TAB>group" and
/// '#' comments are skipped.
inline GroupPartition load_groups(const std::string& path, const std::vector<std::string>& experiment_ids)
{
    std::ifstream in(path);
    require(in.good(), ErrorKind::IoError, "cannot open " + path);
    std::unordered_map<std::string, std::size_t> index;
    for (std::size_t t = 0; t < experiment_ids.size(); ++t) {
        index.emplace(experiment_ids[t], t);
    }
    std::vector<int> labels(experiment_ids.size(), -1);
    std::map<std::string, int> label_ids;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.empty() || line.front() == '#') {
            continue;
        }
        const auto fields = detail::split_tabs(line);
        require(fields.size() == 2, ErrorKind::ParseError, detail::parse_error(path, lineno, 1, line));
        if (lineno == 1 && fields[0] == "experiment" && fields[1] == "group") {
            continue;
        }
        const auto it = index.find(fields[0]);
        require(it != index.end(), ErrorKind::UnknownId, path + ": unknown experiment '" + fields[0] + "'");
        require(labels[it->second] < 0, ErrorKind::DuplicateId, path + ": experiment '" + fields[0] + "' listed twice");
        const auto [lab, inserted] = label_ids.emplace(fields[1], static_cast<int>(label_ids.size()));
        labels[it->second] = lab->second;
    }
    for (std::size_t t = 0; t < labels.size(); ++t) {
        require(labels[t] >= 0, ErrorKind::UncoveredExperiment,
                path + ": experiment '" + experiment_ids[t] + "' has no group");
    }
    return GroupPartition(std::move(labels));
}

// ---------------------------------------------------------------------------
// Key-value configuration

/// `key = value` lines; '#' starts a comment.
class Config
{
public:
    Config() = default;

    static Config parse(std::istream& in, const std::string& origin = "config")
    {
        Config c;
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            const auto hash = line.find('#');
            if (hash != std::string::npos) {
                line.erase(hash);
            }
            const std::string body = trim(line);
            if (body.empty()) {
                continue;
            }
            const auto eq = body.find('=');
            require(eq != std::string::npos, ErrorKind::ParseError,
                    origin + ": line " + std::to_string(lineno) + ": expected key = value");
            const std::string key = trim(body.substr(0, eq));
            const std::string value = trim(body.substr(eq + 1));
            require(!key.empty(), ErrorKind::ParseError, origin + ": line " + std::to_string(lineno) + ": empty key");
            require(c.values_.emplace(key, value).second, ErrorKind::ParseError,
                    origin + ": line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
        }
        return c;
    }

    static Config load(const std::string& path)
    {
        std::ifstream in(path);
        require(in.good(), ErrorKind::IoError, "cannot open config " + path);
        return parse(in, path);
    }

    bool has(const std::string& key) const { return values_.count(key) != 0; }
    void set(const std::string& key, const std::string& value) { values_[key] = value; }
    const std::map<std::string, std::string>& entries() const { return values_; }

    std::string get(const std::string& key, const std::string& fallback) const
    {
        const auto it = values_.find(key);
        return it == values_.end() ? fallback : it->second;
    }

    std::string require_string(const std::string& key) const
    {
        const auto it = values_.find(key);
        require(it != values_.end(), ErrorKind::InvalidArgument, "config key '" + key + "' is required");
        return it->second;
    }

    double get_double(const std::string& key, double fallback) const
    {
        if (!has(key)) {
            return fallback;
        }
        double v = 0.0;
        require(detail::parse_real(values_.at(key), v), ErrorKind::ParseError,
                "config key '" + key + "': not a number: " + values_.at(key));
        return v;
    }

    long long get_int(const std::string& key, long long fallback) const
    {
        if (!has(key)) {
            return fallback;
        }
        const std::string& s = values_.at(key);
        long long v = 0;
        const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
        require(res.ec == std::errc() && res.ptr == s.data() + s.size(), ErrorKind::ParseError,
                "config key '" + key + "': not an integer: " + s);
        return v;
    }

    std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const
    {
        if (!has(key)) {
            return fallback;
        }
        const std::string& s = values_.at(key);
        std::uint64_t v = 0;
        const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
        require(res.ec == std::errc() && res.ptr == s.data() + s.size(), ErrorKind::ParseError,
                "config key '" + key + "': not an unsigned integer: " + s);
        return v;
    }

    bool get_bool(const std::string& key, bool fallback) const
    {
        if (!has(key)) {
            return fallback;
        }
        const std::string& s = values_.at(key);
        if (s == "true" || s == "yes" || s == "1") {
            return true;
        }
        if (s == "false" || s == "no" || s == "0") {
            return false;
        }
        throw Error(ErrorKind::ParseError, "config key '" + key + "': not a boolean: " + s);
    }

    /// Comma-separated reals.
    std::vector<double> get_list(const std::string& key) const
    {
        std::vector<double> out;
        std::stringstream ss(require_string(key));
        std::string item;
        while (std::getline(ss, item, ',')) {
            double v = 0.0;
            require(detail::parse_real(trim(item), v), ErrorKind::ParseError,
                    "config key '" + key + "': not a number: " + item);
            out.push_back(v);
        }
        require(!out.empty(), ErrorKind::ParseError, "config key '" + key + "' is empty");
        return out;
    }

    /// Lambda values from `<name>_grid = a,b,c` or `<name>_log2 = lo:hi[:step]`
    /// (powers of two over the exponent range).
    std::vector<double> get_grid(const std::string& name) const
    {
        const std::string list_key = name + "_grid";
        const std::string log_key = name + "_log2";
        require(!(has(list_key) && has(log_key)), ErrorKind::InvalidArgument,
                "give only one of " + list_key + " and " + log_key);
        if (has(list_key)) {
            return get_list(list_key);
        }
        if (has(log_key)) {
            std::vector<double> parts;
            std::stringstream ss(values_.at(log_key));
            std::string item;
            while (std::getline(ss, item, ':')) {
                double v = 0.0;
                require(detail::parse_real(trim(item), v), ErrorKind::ParseError,
                        "config key '" + log_key + "': bad range " + values_.at(log_key));
                parts.push_back(v);
            }
            require(parts.size() == 2 || parts.size() == 3, ErrorKind::ParseError,
                    "config key '" + log_key + "' must be lo:hi or lo:hi:step");
            const double step = parts.size() == 3 ? parts[2] : 1.0;
            require(step > 0.0 && parts[1] >= parts[0], ErrorKind::InvalidArgument,
                    "config key '" + log_key + "' needs lo <= hi and step > 0");
            std::vector<double> out;
            for (double e = parts[0]; e <= parts[1] + 1e-9; e += step) {
                out.push_back(std::exp2(e));
            }
            return out;
        }
        return {get_double(name, 1.0)};
    }

private:
    static std::string trim(const std::string& s)
    {
        const auto b = s.find_first_not_of(" \t\r\n");
        if (b == std::string::npos) {
            return "";
        }
        const auto e = s.find_last_not_of(" \t\r\n");
        return s.substr(b, e - b + 1);
    }

    std::map<std::string, std::string> values_;
};

// ---------------------------------------------------------------------------
// Bootstrap archive: a directory holding index.json and long-format TSV blocks
// (replicate, row, column, value) so intervals and p-values can be recomputed
// without refitting.

struct BootstrapArchive {
    BootstrapResult result;
    std::vector<std::string> gene_ids;
    std::vector<std::string> tf_ids;
    std::vector<std::string> experiment_ids;
};

namespace detail {

inline void write_sample_block(const std::filesystem::path& path, const std::vector<Matrix>& samples)
{
    std::ofstream out(path);
    require(out.good(), ErrorKind::IoError, "cannot write " + path.string());
    out << "replicate\trow\tcol\tvalue\n";
    for (std::size_t b = 0; b < samples.size(); ++b) {
        const Matrix& m = samples[b];
        for (Index i = 0; i < m.rows(); ++i) {
            for (Index j = 0; j < m.cols(); ++j) {
                out << b << '\t' << i << '\t' << j << '\t' << format_real(m(i, j)) << '\n';
            }
        }
    }
    require(out.good(), ErrorKind::IoError, "failed writing " + path.string());
}

inline std::vector<Matrix> read_sample_block(const std::filesystem::path& path, int B, Index rows, Index cols)
{
    std::ifstream in(path);
    require(in.good(), ErrorKind::IoError, "cannot open " + path.string());
    std::vector<Matrix> samples(static_cast<std::size_t>(B), Matrix::Zero(rows, cols));
    std::vector<Mask> seen(static_cast<std::size_t>(B), Mask::Constant(rows, cols, false));
    std::string line;
    std::getline(in, line);
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) {
            continue;
        }
        const auto f = split_tabs(line);
        require(f.size() == 4, ErrorKind::ParseError, parse_error(path.string(), lineno, 1, line));
        double b = 0, i = 0, j = 0, v = 0;
        require(parse_real(f[0], b) && parse_real(f[1], i) && parse_real(f[2], j) && parse_real(f[3], v),
                ErrorKind::ParseError, parse_error(path.string(), lineno, 1, line));
        require(b >= 0 && b < B && i >= 0 && i < static_cast<double>(rows) && j >= 0 && j < static_cast<double>(cols),
                ErrorKind::OutOfRange, parse_error(path.string(), lineno, 1, line));
        samples[static_cast<std::size_t>(b)](static_cast<Index>(i), static_cast<Index>(j)) = v;
        seen[static_cast<std::size_t>(b)](static_cast<Index>(i), static_cast<Index>(j)) = true;
    }
    for (const auto& s : seen) {
        require(s.all(), ErrorKind::ParseError, path.string() + ": sample block is incomplete");
    }
    return samples;
}

} // namespace detail

inline void save_bootstrap_archive(const std::filesystem::path& dir, const BootstrapArchive& ar)
{
    std::filesystem::create_directories(dir);
    const BootstrapResult& r = ar.result;
    nlohmann::json index;
    index["format"] = "srnet-bootstrap";
    index["version"] = 1;
    index["replicates"] = r.B;
    index["genes"] = r.tested.rows();
    index["factors"] = r.tested.cols();
    index["experiments"] = r.tilde_p_samples.empty() ? 0 : r.tilde_p_samples.front().cols();
    index["gene_ids"] = ar.gene_ids;
    index["tf_ids"] = ar.tf_ids;
    index["experiment_ids"] = ar.experiment_ids;
    index["blocks"] = {{"tilde_a", "tilde_a_samples.tsv"}, {"tilde_p", "tilde_p_samples.tsv"}, {"tested", "tested.tsv"}};
    {
        std::ofstream out(dir / "index.json");
        require(out.good(), ErrorKind::IoError, "cannot write archive index");
        out << index.dump(2) << '\n';
    }
    detail::write_sample_block(dir / "tilde_a_samples.tsv", r.tilde_a_samples);
    detail::write_sample_block(dir / "tilde_p_samples.tsv", r.tilde_p_samples);
    write_matrix_tsv((dir / "tested.tsv").string(), "gene", ar.gene_ids, ar.tf_ids, r.tested.cast<double>().matrix());
}

inline BootstrapArchive load_bootstrap_archive(const std::filesystem::path& dir)
{
    std::ifstream in(dir / "index.json");
    require(in.good(), ErrorKind::IoError, "cannot open " + (dir / "index.json").string());
    nlohmann::json index;
    try {
        in >> index;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::ParseError, std::string("archive index: ") + e.what());
    }
    require(index.value("format", "") == "srnet-bootstrap", ErrorKind::ParseError, "not a bootstrap archive");
    BootstrapArchive ar;
    ar.gene_ids = index.at("gene_ids").get<std::vector<std::string>>();
    ar.tf_ids = index.at("tf_ids").get<std::vector<std::string>>();
    ar.experiment_ids = index.at("experiment_ids").get<std::vector<std::string>>();
    const int B = index.at("replicates").get<int>();
    const Index n = index.at("genes").get<Index>();
    const Index L = index.at("factors").get<Index>();
    const Index T = index.at("experiments").get<Index>();
    const auto blocks = index.at("blocks");
    ar.result.B = B;
    ar.result.tilde_a_samples = detail::read_sample_block(dir / blocks.at("tilde_a").get<std::string>(), B, n, L);
    ar.result.tilde_p_samples = detail::read_sample_block(dir / blocks.at("tilde_p").get<std::string>(), B, L, T);
    const LabeledMatrix tested = read_labeled_tsv((dir / blocks.at("tested").get<std::string>()).string(), false);
    require(tested.values.rows() == n && tested.values.cols() == L, ErrorKind::ShapeMismatch, "tested mask shape");
    ar.result.tested = tested.values.array() != 0.0;
    compute_pvalues(ar.result);
    return ar;
}

// ---------------------------------------------------------------------------
// Edge list

/// One line per nonzero connection: gene, TF, strength, a~ and (optionally)
/// the bootstrap p-value.
inline void write_edge_list(const std::string& path, const std::vector<std::string>& gene_ids,
                            const std::vector<std::string>& tf_ids, const Matrix& A, const Matrix& tilde_a,
                            const Matrix* pvalues = nullptr)
{
    std::ofstream out(path);
    require(out.good(), ErrorKind::IoError, "cannot write " + path);
    out << "gene\ttf\tstrength\ttilde_a";
    if (pvalues) {
        out << "\tpvalue";
    }
    out << '\n';
    for (Index i = 0; i < A.rows(); ++i) {
        for (Index j = 0; j < A.cols(); ++j) {
            if (A(i, j) == 0.0) {
                continue;
            }
            out << gene_ids[static_cast<std::size_t>(i)] << '\t' << tf_ids[static_cast<std::size_t>(j)] << '\t'
                << format_real(A(i, j)) << '\t' << format_real(tilde_a(i, j));
            if (pvalues) {
                const double p = (*pvalues)(i, j);
                out << '\t' << (std::isnan(p) ? std::string("NA") : format_real(p));
            }
            out << '\n';
        }
    }
    require(out.good(), ErrorKind::IoError, "failed writing " + path);
}

// ---------------------------------------------------------------------------
// Edge categories

inline const char* to_string(EdgeCategory c)
{
    switch (c) {
    case EdgeCategory::Documented: return "DOCUMENTED";
    case EdgeCategory::Suggested: return "SUGGESTED";
    case EdgeCategory::None: return "NONE";
    case EdgeCategory::Excluded: return "-";
    }
    return "-";
}

/// n x L table of DOCUMENTED / SUGGESTED / NONE, with "-" for cells outside
/// the candidate set.
inline CategoryMatrix load_categories(const std::string& path, const std::vector<std::string>& gene_ids,
                                      const std::vector<std::string>& tf_ids)
{
    std::ifstream in(path);
    require(in.good(), ErrorKind::IoError, "cannot open " + path);
    std::string line;
    std::vector<std::vector<std::string>> rows;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (!line.empty()) {
            rows.push_back(detail::split_tabs(line));
        }
    }
    require(rows.size() == gene_ids.size() + 1, ErrorKind::ShapeMismatch, path + ": expected one row per gene");
    require(rows.front().size() == tf_ids.size() + 1, ErrorKind::ShapeMismatch, path + ": expected one column per TF");
    for (std::size_t j = 0; j < tf_ids.size(); ++j) {
        require(rows.front()[j + 1] == tf_ids[j], ErrorKind::UnknownId, path + ": unexpected TF '" + rows.front()[j + 1] + "'");
    }
    CategoryMatrix c(static_cast<Index>(gene_ids.size()), static_cast<Index>(tf_ids.size()));
    for (std::size_t i = 0; i < gene_ids.size(); ++i) {
        const auto& f = rows[i + 1];
        require(f.size() == tf_ids.size() + 1, ErrorKind::ParseError, path + ": ragged row " + std::to_string(i + 2));
        require(f.front() == gene_ids[i], ErrorKind::UnknownId, path + ": unexpected gene '" + f.front() + "'");
        for (std::size_t j = 0; j < tf_ids.size(); ++j) {
            const std::string& tok = f[j + 1];
            EdgeCategory v = EdgeCategory::Excluded;
            if (tok == "DOCUMENTED") {
                v = EdgeCategory::Documented;
            } else if (tok == "SUGGESTED") {
                v = EdgeCategory::Suggested;
            } else if (tok == "NONE") {
                v = EdgeCategory::None;
            } else {
                require(tok == "-", ErrorKind::ParseError, detail::parse_error(path, i + 2, j + 2, tok));
            }
            c(static_cast<Index>(i), static_cast<Index>(j)) = v;
        }
    }
    return c;
}

inline void save_categories(const std::string& path, const std::vector<std::string>& gene_ids,
                            const std::vector<std::string>& tf_ids, const CategoryMatrix& c)
{
    std::ofstream out(path);
    require(out.good(), ErrorKind::IoError, "cannot write " + path);
    out << "gene";
    for (const auto& tf : tf_ids) {
        out << '\t' << tf;
    }
    out << '\n';
    for (Index i = 0; i < c.rows(); ++i) {
        out << gene_ids[static_cast<std::size_t>(i)];
        for (Index j = 0; j < c.cols(); ++j) {
            out << '\t' << to_string(c(i, j));
        }
        out << '\n';
    }
}

} // namespace srnet
