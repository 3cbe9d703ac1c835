// crband: command-line front end for fitting, imputation, bands and
// coverage studies. Every run writes a manifest next to its primary output.

#include <openssl/evp.h>

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "crband/crband.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace crband;

namespace {

constexpr const char* kVersion = "0.1.0";

enum Exit { kOk = 0, kInput = 1, kNumeric = 2, kResampling = 3 };

int exit_code(Errc c)
{
    switch (c) {
        case Errc::SingularInformation:
        case Errc::NonConvergence:
        case Errc::FitFailed:
        case Errc::ZeroWeightedRiskSet:
        case Errc::EmptyRiskSet:
        case Errc::ZeroGhat:
        case Errc::CalibrationFailed:
        case Errc::ImputationFailed:
        case Errc::ZeroConditioningMass:
            return kNumeric;
        case Errc::TooManyFailedReplicates:
            return kResampling;
        default:
            return kInput;
    }
}

std::string sha256_hex(const std::string& bytes)
{
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr);
    std::ostringstream out;
    for (unsigned i = 0; i < len; ++i) out << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[i]);
    return out.str();
}

/// Digest of a primary output. The runtime_s column of a coverage table
/// is wall-clock and is blanked first.
std::string output_digest(const std::string& path)
{
    const auto text = read_file(path);
    if (text.rfind("n,censoring,", 0) != 0) return sha256_hex(text);
    std::istringstream in(text);
    std::string line, masked;
    while (std::getline(in, line)) {
        const auto cut = line.rfind(',');
        masked += line.substr(0, cut) + "\n";
    }
    return sha256_hex(masked);
}

std::string now_utc()
{
    const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    std::ostringstream out;
    out << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return out.str();
}

std::vector<double> parse_list(const std::string& s, const char* what)
{
    std::vector<double> out;
    for (auto cell : detail::split_csv(s)) out.push_back(detail::parse_double(cell, std::nullopt, what));
    return out;
}

void write_text(const std::string& path, const std::string& text)
{
    if (const auto dir = fs::path(path).parent_path(); !dir.empty()) fs::create_directories(dir);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(Errc::Io, "cannot write " + path);
    out << text;
}

struct Run {
    std::string command;
    std::vector<std::string> argv;
    json params = json::object();
    std::vector<std::string> inputs;
    std::vector<std::string> outputs;
    std::string manifest;
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
    std::string started = now_utc();
};

void write_manifest(const Run& run, int status)
{
    json inputs = json::array();
    for (const auto& p : run.inputs) inputs.push_back({{"path", p}, {"sha256", sha256_hex(read_file(p))}});
    json outputs = json::array();
    for (const auto& p : run.outputs) {
        if (fs::exists(p)) outputs.push_back({{"path", p}, {"sha256", output_digest(p)}});
    }
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - run.start).count();
    json m{{"command", run.command},
           {"argv", run.argv},
           {"params", run.params},
           {"seed", run.params.value("seed", json())},
           {"inputs", inputs},
           {"outputs", outputs},
           {"version", kVersion},
           {"started", run.started},
           {"wall_clock_s", wall},
           {"exit_code", status}};
    write_text(run.manifest, m.dump(2) + "\n");
}

Dataset load(const std::string& path, double horizon)
{
    auto d = read_dataset_csv(path);
    if (horizon > 0.0) {
        d.horizon = horizon;
    } else {
        for (const auto& r : d.records) d.horizon = std::max(d.horizon, r.time);
    }
    return d;
}

struct GModelArgs {
    std::string kind = "km";
    double anchor = 0.0;
    std::string anchors;
};

CensoringSurvival build_g_model(const Dataset& d, const GModelArgs& a)
{
    if (a.kind == "km") return km_censoring(d);
    if (a.kind == "cox") return cox_censoring(d);
    const auto km = km_censoring_curve(d);
    if (a.kind == "uniform") {
        if (!(a.anchor > 0.0)) throw Error(Errc::InvalidArgument, "--anchor is required for the uniform model");
        return fit_uniform_from_km(km, a.anchor, d.horizon);
    }
    const auto t = parse_list(a.anchors, "anchors");
    if (t.size() != 2) throw Error(Errc::InvalidArgument, "--anchors takes two times for the weibull model");
    return fit_weibull_from_km(km, t[0], t[1]);
}

void add_g_model_options(CLI::App* cmd, GModelArgs& g)
{
    cmd->add_option("--g-model", g.kind, "censoring model")->check(CLI::IsMember({"km", "cox", "uniform", "weibull"}));
    cmd->add_option("--anchor", g.anchor, "uniform model: anchor time");
    cmd->add_option("--anchors", g.anchors, "weibull model: two anchor times \"ta,tb\"");
}

json g_params(const GModelArgs& g)
{
    return {{"g_model", g.kind}, {"anchor", g.anchor}, {"anchors", g.anchors}};
}

// ---- fit

struct FitArgs {
    std::string data, method = "cc", out = "fit.json";
    double tol = 1e-8;
    int max_iter = 100;
};

int run_fit(const FitArgs& a, Run& run)
{
    run.inputs = {a.data};
    run.outputs = {a.out};
    run.params = {{"data", a.data}, {"method", a.method}, {"tol", a.tol}, {"max_iter", a.max_iter}, {"out", a.out}};
    const auto d = load(a.data, 0.0);
    FitOptions opt;
    opt.newton.tol = a.tol;
    opt.newton.max_iter = a.max_iter;
    FineGrayFit fit;
    if (a.method == "cc") {
        if (!d.has_censoring_times()) {
            // locate the first event row without a censoring time
            validate([&] {
                auto c = d;
                c.completeness = Completeness::CensoringComplete;
                return c;
            }());
        }
        fit = fit_mple(d, opt);
    } else {
        fit = fit_mple_ipcw(make_ipcw_context(degrade_to_incomplete(d)), opt);
    }
    write_text(a.out, fit_json(fit).dump(2) + "\n");
    if (!fit.converged) {
        std::cerr << "NonConvergence: score norm " << fit.score_norm << " after " << fit.iterations << " iterations\n";
        return kNumeric;
    }
    return kOk;
}

// ---- impute

struct ImputeArgs {
    std::string data, out = "augmented.csv", tail = "largest";
    int M = 10;
    std::uint64_t seed = 0;
    double horizon = 0.0;
    bool split = false;
    GModelArgs g;
};

int run_impute(const ImputeArgs& a, unsigned threads, Run& run)
{
    run.inputs = {a.data};
    run.params = {{"data", a.data}, {"m", a.M}, {"seed", a.seed}, {"tail", a.tail}, {"horizon", a.horizon},
                  {"split", a.split}, {"out", a.out}};
    run.params.update(g_params(a.g));
    const auto d = degrade_to_incomplete(load(a.data, a.horizon));
    ImputationConfig ic;
    ic.M = a.M;
    ic.seed = a.seed;
    ic.tail_rule = a.tail == "horizon" ? TailRule::Horizon : TailRule::LargestObservedTime;
    ic.threads = threads;
    const auto g = build_g_model(d, a.g);
    const auto aug = impute_many(d, g, ic);
    if (!a.split) {
        std::ostringstream out;
        write_augmented_long(out, aug);
        write_text(a.out, out.str());
        run.outputs = {a.out};
    } else {
        const fs::path base(a.out);
        for (const auto& x : aug) {
            const auto p = (base.parent_path() / (base.stem().string() + "_" + std::to_string(x.imputation_index) +
                                                  base.extension().string()))
                               .string();
            std::ostringstream out;
            write_dataset_csv(out, x);
            write_text(p, out.str());
            run.outputs.push_back(p);
        }
    }
    return kOk;
}

// ---- band

struct BandArgs {
    std::string data, method = "cc", z, interval = "deciles", center = "subsample", out = "band.csv", tail = "largest";
    double alpha = 0.05, horizon = 0.0;
    int B = 1000, M = 1000, I = 10;
    std::uint64_t seed = 0;
    GModelArgs g;
};

int run_band(const BandArgs& a, unsigned threads, Run& run)
{
    const std::string sidecar = fs::path(a.out).replace_extension(".json").string();
    run.inputs = {a.data};
    run.outputs = {a.out, sidecar};
    run.params = {{"data", a.data}, {"method", a.method}, {"z", a.z},     {"alpha", a.alpha},
                  {"boot", a.B},    {"m", a.M},           {"i", a.I},     {"interval", a.interval},
                  {"center", a.center}, {"seed", a.seed}, {"tail", a.tail}, {"horizon", a.horizon},
                  {"out", a.out}};
    run.params.update(g_params(a.g));
    const auto d = load(a.data, a.horizon);
    const auto z = parse_list(a.z, "z");
    BandConfig bc;
    bc.alpha = a.alpha;
    bc.B = a.B;
    bc.seed = a.seed;
    bc.threads = threads;
    if (a.interval == "deciles") {
        bc.interval = band_interval(d, 1, SingleSample{});
    } else {
        const auto t = parse_list(a.interval, "interval");
        if (t.size() != 2) throw Error(Errc::InvalidArgument, "--interval takes \"deciles\" or \"t1,t2\"");
        bc.interval = band_interval(d, 1, FixedInterval{t[0], t[1]});
    }
    BandResult band;
    if (a.method == "cc") {
        band = cc_band(d, z, bc);
    } else if (a.method == "wbmi") {
        const auto inc = degrade_to_incomplete(d);
        WbMiConfig mi;
        mi.M = a.M;
        mi.I = a.I;
        mi.tail_rule = a.tail == "horizon" ? TailRule::Horizon : TailRule::LargestObservedTime;
        mi.center_rule = a.center == "fullmean" ? CenterRule::FullMean : CenterRule::SubsampleDraw;
        if (mi.I >= mi.M) std::cerr << "warning: I >= M; subsamples repeat datasets\n";
        band = wb_mi_band(inc, build_g_model(inc, a.g), z, bc, mi);
    } else {
        band = bipcw_band(degrade_to_incomplete(d), z, bc);
        if (band.failures > 0) std::cerr << band.failures << " bootstrap refits dropped\n";
    }
    std::ostringstream csv;
    write_band_csv(csv, band);
    write_text(a.out, csv.str());
    write_text(sidecar, band_sidecar(band).dump(2) + "\n");
    return kOk;
}

// ---- simulate / coverage

struct CoverageArgs {
    std::string setting = "100,light,0.08,0.008", generator = "cause-specific", out = "coverage.csv", methods = "cc,wbmi,bipcw";
    std::string data_dir;
    int sims = 500, B = 500, M = 1000, I = 10;
    std::uint64_t seed = 1;
    double alpha = 0.05;
};

SimConfig sim_config(const CoverageArgs& a, std::string& censoring_label)
{
    const auto cells = detail::split_csv(a.setting);
    if (cells.size() != 4) throw Error(Errc::InvalidArgument, "--setting takes \"n,censoring,r1,r2\"");
    SimConfig cfg;
    cfg.n = static_cast<std::size_t>(detail::parse_int(cells[0], std::nullopt, "n"));
    censoring_label = std::string(cells[1]);
    if (censoring_label == "light") {
        cfg.censor_target = {0.20, 0.25};
    } else if (censoring_label == "strong" || censoring_label == "heavy") {
        cfg.censor_target = {0.37, 0.43};
    } else {
        throw Error(Errc::InvalidArgument, "censoring must be light or strong");
    }
    cfg.rates = {detail::parse_double(cells[2], std::nullopt, "r1"), detail::parse_double(cells[3], std::nullopt, "r2")};
    cfg.n_sims = a.sims;
    cfg.B = a.B;
    cfg.M = a.M;
    cfg.I = a.I;
    cfg.seed = a.seed;
    cfg.alpha = a.alpha;
    if (a.generator == "fg-direct") cfg.generator = Generator::FineGrayDirect;
    return cfg;
}

int run_coverage_cmd(const CoverageArgs& a, unsigned threads, Run& run)
{
    run.outputs = {a.out};
    run.params = {{"setting", a.setting}, {"sims", a.sims}, {"boot", a.B},      {"m", a.M},
                  {"i", a.I},             {"seed", a.seed}, {"alpha", a.alpha}, {"generator", a.generator},
                  {"methods", a.methods}, {"data_dir", a.data_dir}, {"out", a.out}};
    std::string label;
    const auto cfg = sim_config(a, label);
    CoverageOptions opt;
    opt.threads = threads;
    opt.run_cc = a.methods.find("cc") != std::string::npos;
    opt.run_wbmi = a.methods.find("wbmi") != std::string::npos;
    opt.run_bipcw = a.methods.find("bipcw") != std::string::npos;
    const auto res = run_coverage(cfg, opt);

    if (!a.data_dir.empty()) {
        for (std::size_t s = 1; s <= static_cast<std::size_t>(cfg.n_sims); ++s) {
            auto stream = sim_stream(cfg.seed, s, "data");
            std::ostringstream out;
            write_dataset_csv(out, gen_dataset(cfg, res.calibration.c, stream));
            const auto p = (fs::path(a.data_dir) / ("sim_" + std::to_string(s) + ".csv")).string();
            write_text(p, out.str());
            run.outputs.push_back(p);
        }
    }

    std::ostringstream csv;
    csv << "n,censoring,rates,method,cp_percent,median_width,n_sims,B,M,I,seed,runtime_s\n";
    for (const auto& row : res.rows) {
        const bool mi = row.method == BandMethod::WBMI;
        csv << cfg.n << ',' << label << ',' << format_number(cfg.rates[0]) << '/' << format_number(cfg.rates[1]) << ','
            << to_string(row.method) << ',' << format_number(row.cp_percent) << ','
            << format_number(row.median_width) << ',' << row.n_ok << ',' << cfg.B << ',' << (mi ? cfg.M : 0) << ','
            << (mi ? cfg.I : 0) << ',' << cfg.seed << ',' << format_number(std::round(res.runtime_s * 1000.0) / 1000.0)
            << '\n';
        if (row.failures > 0) std::cerr << to_string(row.method) << ": " << row.failures << " simulations failed\n";
    }
    write_text(a.out, csv.str());
    std::cerr << "censoring c = " << res.calibration.c << ", mean censoring rate " << res.mean_censoring_rate
              << ", window [" << res.interval.t1 << ", " << res.interval.t2 << "]\n";
    return kOk;
}

struct Cli {
    CLI::App app{"Competing-risks CIF estimation and simultaneous confidence bands"};
    unsigned threads = 0;
    std::string manifest;
    FitArgs fit;
    ImputeArgs impute;
    BandArgs band;
    CoverageArgs coverage;
    std::string replay_path;
    bool replay_check = false;
    CLI::App *c_fit, *c_impute, *c_band, *c_simulate, *c_coverage, *c_replay;

    Cli()
    {
        app.require_subcommand(1);
        app.add_option("--threads", threads, "worker threads (0 = all cores)")->envname("CRBAND_THREADS");
        app.add_option("--manifest", manifest, "manifest path (default: <out>.manifest.json)");
        app.set_version_flag("--version", kVersion);

        c_fit = app.add_subcommand("fit", "fit the Fine-Gray model");
        c_fit->add_option("--data", fit.data, "dataset CSV")->required()->check(CLI::ExistingFile);
        c_fit->add_option("--method", fit.method)->check(CLI::IsMember({"cc", "ipcw"}));
        c_fit->add_option("--tol", fit.tol);
        c_fit->add_option("--max-iter", fit.max_iter);
        c_fit->add_option("--out", fit.out, "fit JSON");

        c_impute = app.add_subcommand("impute", "multiply impute censoring times of event subjects");
        c_impute->add_option("--data", impute.data)->required()->check(CLI::ExistingFile);
        add_g_model_options(c_impute, impute.g);
        c_impute->add_option("--m", impute.M, "number of augmented datasets");
        c_impute->add_option("--seed", impute.seed);
        c_impute->add_option("--horizon", impute.horizon, "study horizon (default: largest observed time)");
        c_impute->add_option("--tail", impute.tail)->check(CLI::IsMember({"largest", "horizon"}));
        c_impute->add_option("--out", impute.out, "long-format CSV with leading m column");
        c_impute->add_flag("--split", impute.split, "one file per dataset: <out stem>_<m>.csv");

        c_band = app.add_subcommand("band", "simultaneous confidence band for the CIF at z");
        c_band->add_option("--data", band.data)->required()->check(CLI::ExistingFile);
        c_band->add_option("--method", band.method)->check(CLI::IsMember({"cc", "wbmi", "bipcw"}));
        c_band->add_option("--z", band.z, "covariate values \"v1,v2,...\"")->required();
        c_band->add_option("--alpha", band.alpha);
        c_band->add_option("--boot", band.B, "bootstrap replicates");
        c_band->add_option("--m", band.M, "augmented datasets (wbmi)");
        c_band->add_option("--i", band.I, "datasets per replicate (wbmi)");
        add_g_model_options(c_band, band.g);
        c_band->add_option("--center", band.center)->check(CLI::IsMember({"subsample", "fullmean"}));
        c_band->add_option("--tail", band.tail)->check(CLI::IsMember({"largest", "horizon"}));
        c_band->add_option("--horizon", band.horizon);
        c_band->add_option("--interval", band.interval, "\"deciles\" or \"t1,t2\"");
        c_band->add_option("--seed", band.seed);
        c_band->add_option("--out", band.out, "band CSV; the sidecar goes to <out>.json");

        c_simulate = app.add_subcommand("simulate", "coverage study, optionally writing the simulated datasets");
        c_coverage = app.add_subcommand("coverage", "coverage study");
        for (auto* c : {c_simulate, c_coverage}) {
            c->add_option("--setting", coverage.setting, "\"n,censoring,r1,r2\" with censoring light or strong");
            c->add_option("--sims", coverage.sims);
            c->add_option("--boot", coverage.B);
            c->add_option("--m", coverage.M);
            c->add_option("--i", coverage.I);
            c->add_option("--seed", coverage.seed);
            c->add_option("--alpha", coverage.alpha);
            c->add_option("--generator", coverage.generator)->check(CLI::IsMember({"cause-specific", "fg-direct"}));
            c->add_option("--methods", coverage.methods, "comma list of cc, wbmi, bipcw");
            c->add_option("--out", coverage.out, "coverage table CSV");
        }
        c_simulate->add_option("--data-dir", coverage.data_dir, "write each simulated dataset here");

        c_replay = app.add_subcommand("replay", "rerun a command from its manifest");
        c_replay->add_option("manifest", replay_path)->required()->check(CLI::ExistingFile);
        c_replay->add_flag("--check", replay_check, "compare output digests with the manifest");
    }
};

int dispatch(const std::vector<std::string>& args);

int replay(const std::string& path, bool check)
{
    const auto m = json::parse(read_file(path));
    const auto argv = m.at("argv").get<std::vector<std::string>>();
    const int status = dispatch(argv);
    if (!check) return status;
    int mismatches = 0;
    for (const auto& o : m.at("outputs")) {
        const auto p = o.at("path").get<std::string>();
        if (!fs::exists(p) || output_digest(p) != o.at("sha256").get<std::string>()) {
            std::cerr << "digest mismatch: " << p << "\n";
            ++mismatches;
        }
    }
    if (mismatches == 0) std::cerr << "replay reproduced " << m.at("outputs").size() << " outputs\n";
    return mismatches ? kInput : status;
}

int dispatch(const std::vector<std::string>& args)
{
    Cli cli;
    std::vector<std::string> rev(args.rbegin(), args.rend());
    try {
        cli.app.parse(rev);
    } catch (const CLI::ParseError& e) {
        return cli.app.exit(e) == 0 ? kOk : kInput;
    }
    if (cli.c_replay->parsed()) return replay(cli.replay_path, cli.replay_check);

    Run run;
    run.argv = args;
    const unsigned threads = cli.threads;
    int status = kOk;
    std::string primary;
    try {
        if (cli.c_fit->parsed()) {
            run.command = "fit";
            primary = cli.fit.out;
            status = run_fit(cli.fit, run);
        } else if (cli.c_impute->parsed()) {
            run.command = "impute";
            primary = cli.impute.out;
            status = run_impute(cli.impute, threads, run);
        } else if (cli.c_band->parsed()) {
            run.command = "band";
            primary = cli.band.out;
            status = run_band(cli.band, threads, run);
        } else {
            run.command = cli.c_simulate->parsed() ? "simulate" : "coverage";
            primary = cli.coverage.out;
            status = run_coverage_cmd(cli.coverage, threads, run);
        }
    } catch (const Error& e) {
        std::cerr << e.what() << "\n";
        status = exit_code(e.code());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        status = kInput;
    }
    run.params["threads"] = threads;
    run.manifest = cli.manifest.empty() ? primary + ".manifest.json" : cli.manifest;
    try {
        write_manifest(run, status);
    } catch (const std::exception& e) {
        std::cerr << "manifest: " << e.what() << "\n";
        if (status == kOk) status = kInput;
    }
    return status;
}

} // namespace

int main(int argc, char** argv)
{
    std::vector<std::string> args(argv + 1, argv + argc);
    return dispatch(args);
}
