#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "crband/io.hpp"
#include "properties.hpp"

namespace fs = std::filesystem;
using namespace crband;

namespace {

class Cli : public ::testing::Test {
protected:
    void SetUp() override
    {
        dir_ = fs::temp_directory_path() / ("crband_cli_" + std::to_string(::getpid()) + "_" +
                                            ::testing::UnitTest::GetInstance()->current_test_info()->name());
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }

    std::string path(const std::string& name) const { return (dir_ / name).string(); }

    int run(const std::string& args, const std::string& env = "")
    {
        const std::string cmd = "cd '" + dir_.string() + "' && " + env + " '" CRBAND_EXE "' " + args + " > out.txt 2> err.txt";
        const int status = std::system(cmd.c_str());
        return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    }

    std::string err() const { return read_file(path("err.txt")); }

    void write(const std::string& name, const Dataset& d) const
    {
        std::ofstream out(path(name));
        write_dataset_csv(out, d);
    }

    fs::path dir_;
};

nlohmann::json load_json(const std::string& p) { return nlohmann::json::parse(read_file(p)); }

} // namespace

TEST_F(Cli, FitWritesJsonAndManifest)
{
    write("d.csv", props::sample(1, 60));
    ASSERT_EQ(run("fit --data d.csv --out fit.json"), 0) << err();
    const auto fit = load_json(path("fit.json"));
    EXPECT_EQ(fit["beta"].size(), 3u);
    EXPECT_TRUE(fit["converged"].get<bool>());
    EXPECT_FALSE(fit["breslow"]["times"].empty());
    const auto m = load_json(path("fit.json.manifest.json"));
    EXPECT_EQ(m["command"], "fit");
    EXPECT_EQ(m["inputs"][0]["sha256"].get<std::string>().size(), 64u);
    EXPECT_EQ(m["outputs"][0]["path"], "fit.json");
}

TEST_F(Cli, IpcwEqualsCcWithoutCompetingEvents)
{
    auto d = props::sample(2, 60);
    for (auto& r : d.records) {
        if (r.status == 2) r.status = 1;
    }
    write("d.csv", validate(d));
    ASSERT_EQ(run("fit --data d.csv --method cc --out cc.json"), 0) << err();
    ASSERT_EQ(run("fit --data d.csv --method ipcw --out ip.json"), 0) << err();
    const auto a = load_json(path("cc.json"))["beta"].get<std::vector<double>>();
    const auto b = load_json(path("ip.json"))["beta"].get<std::vector<double>>();
    for (std::size_t k = 0; k < a.size(); ++k) EXPECT_NEAR(a[k], b[k], 1e-10);
}

TEST_F(Cli, MissingCensoringTimeIsInputError)
{
    write("d.csv", degrade_to_incomplete(props::sample(3, 30)));
    EXPECT_EQ(run("fit --data d.csv --method cc --out fit.json"), 1);
    EXPECT_NE(err().find("MissingCensoringTime"), std::string::npos) << err();
    EXPECT_NE(err().find("(row "), std::string::npos) << err();
}

TEST_F(Cli, ParseErrorNamesRow)
{
    std::ofstream(path("bad.csv")) << "id,time,status,cens_time\na,1,1,2\nb,oops,0,\n";
    EXPECT_EQ(run("fit --data bad.csv --out fit.json"), 1);
    EXPECT_NE(err().find("row 2"), std::string::npos) << err();
}

TEST_F(Cli, NonConvergenceExitsTwoWithDiagnostics)
{
    std::ofstream(path("sep.csv")) << "id,time,status,cens_time,z1\na,1,1,9,1\nb,2,1,9,1\nc,3,1,9,1\nd,4,0,,0\ne,5,0,,0\n"
                                      "f,6,0,,0\n";
    EXPECT_EQ(run("fit --data sep.csv --out fit.json"), 2);
    const auto fit = load_json(path("fit.json"));
    EXPECT_FALSE(fit["converged"].get<bool>());
    EXPECT_EQ(load_json(path("fit.json.manifest.json"))["exit_code"], 2);
}

TEST_F(Cli, ImputeLongAndSplit)
{
    write("d.csv", degrade_to_incomplete(props::sample(4, 20)));
    ASSERT_EQ(run("impute --data d.csv --m 3 --seed 5 --out aug.csv"), 0) << err();
    const auto table = [&] {
        std::ifstream in(path("aug.csv"));
        return read_csv_table(in);
    }();
    EXPECT_EQ(table.header.front(), "m");
    EXPECT_EQ(table.rows.size(), 60u);
    write("big.csv", degrade_to_incomplete(props::sample(4, 200)));
    ASSERT_EQ(run("impute --data big.csv --m 2 --seed 5 --g-model cox --split --out parts/aug.csv"), 0) << err();
    const auto part = read_dataset_csv(path("parts/aug_2.csv"));
    EXPECT_TRUE(part.has_censoring_times());
    EXPECT_EQ(run("impute --data d.csv --g-model uniform --out u.csv"), 1);
}

TEST_F(Cli, BandsNestInAlphaAndIgnoreThreads)
{
    write("d.csv", props::sample(5, 80));
    ASSERT_EQ(run("band --data d.csv --method cc --z 0,0,1 --boot 200 --seed 3 --alpha 0.05 --out a.csv"), 0) << err();
    ASSERT_EQ(run("band --data d.csv --method cc --z 0,0,1 --boot 200 --seed 3 --alpha 0.5 --out b.csv"), 0) << err();
    std::ifstream ia(path("a.csv")), ib(path("b.csv"));
    const auto a = read_csv_table(ia), b = read_csv_table(ib);
    ASSERT_EQ(a.rows.size(), b.rows.size());
    for (std::size_t i = 0; i < a.rows.size(); ++i) {
        EXPECT_LE(std::stod(a.rows[i][2]), std::stod(b.rows[i][2]));
        EXPECT_GE(std::stod(a.rows[i][3]), std::stod(b.rows[i][3]));
    }
    EXPECT_EQ(load_json(path("a.json"))["method"], "cc");

    const std::string mi = "band --data d.csv --method wbmi --z 0,0,1 --boot 100 --m 30 --i 5 --seed 3 ";
    ASSERT_EQ(run("--threads 1 " + mi + "--out t1.csv"), 0) << err();
    ASSERT_EQ(run(mi + "--out t4.csv", "CRBAND_THREADS=4"), 0) << err();
    EXPECT_EQ(read_file(path("t1.csv")), read_file(path("t4.csv")));
    EXPECT_EQ(load_json(path("t4.csv.manifest.json"))["params"]["threads"], 4);
}

TEST_F(Cli, ResamplingCeilingExitsThree)
{
    std::ofstream(path("d.csv")) << "id,time,status,cens_time,z1\na,1,1,5,0.5\nb,2,2,6,-0.2\nc,3,0,,1.0\nd,4,1,7,0.0\n"
                                    "e,5,0,,-1.0\nf,6,1,9,0.3\ng,7,2,8,0.8\nh,8,0,,0.1\n";
    EXPECT_EQ(run("band --data d.csv --method bipcw --z 0.2 --boot 50 --seed 1 --out b.csv"), 3);
    EXPECT_NE(err().find("TooManyFailedReplicates"), std::string::npos) << err();
}

TEST_F(Cli, ReplayReproducesOutputs)
{
    write("d.csv", props::sample(6, 60));
    ASSERT_EQ(run("band --data d.csv --method bipcw --z 0,0,1 --boot 40 --seed 9 --out b.csv"), 0) << err();
    const auto first = read_file(path("b.csv"));
    fs::remove(path("b.csv"));
    ASSERT_EQ(run("replay b.csv.manifest.json --check"), 0) << err();
    EXPECT_EQ(read_file(path("b.csv")), first);

    auto m = load_json(path("b.csv.manifest.json"));
    m["outputs"][0]["sha256"] = std::string(64, '0');
    std::ofstream(path("tampered.json")) << m.dump();
    EXPECT_EQ(run("replay tampered.json --check"), 1);
}

TEST_F(Cli, CoverageTable)
{
    ASSERT_EQ(run("coverage --setting 60,light,0.08,0.008 --sims 4 --boot 20 --m 8 --i 3 --seed 2 --out cov.csv"), 0)
        << err();
    std::ifstream in(path("cov.csv"));
    const auto t = read_csv_table(in);
    EXPECT_EQ(t.header, (std::vector<std::string>{"n", "censoring", "rates", "method", "cp_percent", "median_width",
                                                  "n_sims", "B", "M", "I", "seed", "runtime_s"}));
    ASSERT_EQ(t.rows.size(), 3u);
    EXPECT_EQ(t.rows[0][3], "cc");
    EXPECT_EQ(t.rows[1][3], "wbmi");
    EXPECT_EQ(t.rows[2][3], "bipcw");
    EXPECT_EQ(t.rows[1][8], "8");
    ASSERT_EQ(run("simulate --setting 60,strong,0.05,0.05 --sims 2 --boot 20 --m 8 --i 3 --seed 2 --methods cc "
                  "--data-dir sims --out sim.csv"),
              0)
        << err();
    EXPECT_TRUE(read_dataset_csv(path("sims/sim_2.csv")).has_censoring_times());
    EXPECT_EQ(run("coverage --setting 60,medium,0.08,0.008 --sims 2 --out bad.csv"), 1);
}
