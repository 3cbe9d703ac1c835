#pragma once

// CSV and JSON serialization. Numbers are written in shortest round-trip
// form and parsed with from_chars, so output does not depend on locale.

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "crband/bands.hpp"
#include "crband/censoring.hpp"
#include "crband/data.hpp"
#include "crband/error.hpp"
#include "crband/finegray.hpp"
#include "crband/step_function.hpp"

namespace crband {

inline std::string format_number(double v)
{
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

namespace detail {

inline std::string_view trim(std::string_view s)
{
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

inline std::vector<std::string_view> split_csv(std::string_view line)
{
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;) {
        const auto pos = line.find(',', start);
        out.push_back(trim(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

inline double parse_double(std::string_view s, std::optional<std::size_t> row, std::string_view column)
{
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || res.ec != std::errc() || res.ptr != s.data() + s.size()) {
        throw Error(Errc::Parse, "bad number '" + std::string(s) + "' in column " + std::string(column), row);
    }
    return v;
}

inline int parse_int(std::string_view s, std::optional<std::size_t> row, std::string_view column)
{
    int v = 0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || res.ec != std::errc() || res.ptr != s.data() + s.size()) {
        throw Error(Errc::Parse, "bad integer '" + std::string(s) + "' in column " + std::string(column), row);
    }
    return v;
}

} // namespace detail

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

/// Reads a comma-separated table with a header row; blank lines are skipped.
inline CsvTable read_csv_table(std::istream& in)
{
    CsvTable t;
    std::string line;
    bool have_header = false;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        if (detail::trim(line).empty()) continue;
        auto cells = detail::split_csv(line);
        if (!have_header) {
            for (auto c : cells) t.header.emplace_back(c);
            have_header = true;
            continue;
        }
        ++row;
        if (cells.size() != t.header.size()) {
            throw Error(Errc::Parse, "expected " + std::to_string(t.header.size()) + " fields, got " +
                                         std::to_string(cells.size()), row);
        }
        t.rows.emplace_back(cells.begin(), cells.end());
    }
    if (!have_header) throw Error(Errc::Parse, "missing header row");
    return t;
}

/// Dataset from `id,time,status,cens_time,z1..zp`. Completeness is
/// CensoringComplete when every event row carries cens_time, unless
/// `completeness` forces a tag (validation then enforces it).
inline Dataset read_dataset_csv(std::istream& in, std::optional<Completeness> completeness = std::nullopt)
{
    const auto table = read_csv_table(in);
    const std::vector<std::string> required{"id", "time", "status", "cens_time"};
    for (std::size_t k = 0; k < required.size(); ++k) {
        if (table.header.size() <= k || table.header[k] != required[k]) {
            throw Error(Errc::Parse, "header must start with id,time,status,cens_time");
        }
    }
    Dataset d;
    bool all_known = true;
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        const auto& cells = table.rows[i];
        const std::size_t row = i + 1;
        CompetingRisksRecord r;
        r.id = cells[0];
        r.time = detail::parse_double(cells[1], row, "time");
        r.status = detail::parse_int(cells[2], row, "status");
        if (!cells[3].empty() && cells[3] != "NA") r.cens_time = detail::parse_double(cells[3], row, "cens_time");
        for (std::size_t k = 4; k < cells.size(); ++k) r.covariates.push_back(detail::parse_double(cells[k], row, table.header[k]));
        if (r.is_event() && !r.cens_time) all_known = false;
        d.records.push_back(std::move(r));
    }
    if (d.records.empty()) throw Error(Errc::EmptyDataset, "no data rows");
    d.completeness = completeness.value_or(all_known ? Completeness::CensoringComplete : Completeness::Incomplete);
    return validate(std::move(d));
}

inline Dataset read_dataset_csv(const std::string& path, std::optional<Completeness> completeness = std::nullopt)
{
    std::ifstream in(path);
    if (!in) throw Error(Errc::Io, "cannot open " + path);
    return read_dataset_csv(in, completeness);
}

inline void write_dataset_header(std::ostream& out, std::size_t p, bool with_m)
{
    if (with_m) out << "m,";
    out << "id,time,status,cens_time";
    for (std::size_t k = 1; k <= p; ++k) out << ",z" << k;
    out << '\n';
}

inline void write_dataset_rows(std::ostream& out, const Dataset& d, std::optional<int> m = std::nullopt)
{
    for (const auto& r : d.records) {
        if (m) out << *m << ',';
        out << r.id << ',' << format_number(r.time) << ',' << r.status << ',';
        if (r.cens_time) out << format_number(*r.cens_time);
        for (double z : r.covariates) out << ',' << format_number(z);
        out << '\n';
    }
}

inline void write_dataset_csv(std::ostream& out, const Dataset& d)
{
    write_dataset_header(out, d.num_covariates(), false);
    write_dataset_rows(out, d);
}

/// Augmented datasets stacked in one file with a leading `m` column.
inline void write_augmented_long(std::ostream& out, std::span<const Dataset> augmented)
{
    write_dataset_header(out, augmented.empty() ? 0 : augmented.front().num_covariates(), true);
    for (const auto& d : augmented) write_dataset_rows(out, d, d.imputation_index);
}

inline void write_band_csv(std::ostream& out, const BandResult& b)
{
    out << "t,center,lower,upper,lower_clipped,upper_clipped\n";
    for (std::size_t i = 0; i < b.grid.size(); ++i) {
        out << format_number(b.grid[i]) << ',' << format_number(b.center[i]) << ',' << format_number(b.lower[i]) << ','
            << format_number(b.upper[i]) << ',' << format_number(b.clipped_lower[i]) << ','
            << format_number(b.clipped_upper[i]) << '\n';
    }
}

inline nlohmann::json band_sidecar(const BandResult& b)
{
    return {{"method", to_string(b.method)}, {"alpha", b.alpha}, {"q", b.q},   {"n", b.n},
            {"t1", b.interval.t1},           {"t2", b.interval.t2}, {"B", b.B}, {"M", b.M},
            {"I", b.I},                      {"seed", b.seed},    {"failures", b.failures}};
}

inline nlohmann::json step_json(const StepFunction& f)
{
    return {{"times", f.jump_times()}, {"values", f.values()}, {"initial", f.initial_value()}};
}

inline StepFunction step_from_json(const nlohmann::json& j)
{
    return StepFunction(j.at("times").get<std::vector<double>>(), j.at("values").get<std::vector<double>>(),
                        j.value("initial", 0.0));
}

inline nlohmann::json fit_json(const FineGrayFit& fit)
{
    std::vector<double> info;
    for (Eigen::Index r = 0; r < fit.information.rows(); ++r) {
        for (Eigen::Index c = 0; c < fit.information.cols(); ++c) info.push_back(fit.information(r, c));
    }
    return {{"method", fit.method},
            {"beta", std::vector<double>(fit.beta.data(), fit.beta.data() + fit.beta.size())},
            {"information", info},
            {"breslow", step_json(fit.breslow)},
            {"iterations", fit.iterations},
            {"converged", fit.converged},
            {"score_norm", fit.score_norm},
            {"loglik", fit.loglik}};
}

inline nlohmann::json censoring_json(const CensoringSurvival& g)
{
    nlohmann::json j{{"variant", variant_name(g)}};
    std::visit(
        [&](const auto& m) {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, censoring::KaplanMeier>) {
                j["curve"] = step_json(m.curve);
            } else if constexpr (std::is_same_v<T, censoring::Cox>) {
                j["beta"] = std::vector<double>(m.beta.data(), m.beta.data() + m.beta.size());
                j["baseline_cumhaz"] = step_json(m.baseline_cumhaz);
            } else if constexpr (std::is_same_v<T, censoring::Uniform>) {
                j["c"] = m.c;
            } else if constexpr (std::is_same_v<T, censoring::Weibull>) {
                j["shape"] = m.shape;
                j["scale"] = m.scale;
            } else {
                j["times"] = m.times;
            }
        },
        g);
    return j;
}

inline std::string read_file(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(Errc::Io, "cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace crband
