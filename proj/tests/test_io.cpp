#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <random>

#include <unistd.h>
#include <sys/wait.h>

#include <gtest/gtest.h>

#include "memsq/memsq.hpp"

namespace {

using namespace memsq;
using namespace memsq::io;

class TempDir : public ::testing::Test {
protected:
    void SetUp() override {
        const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
        dir = fs::temp_directory_path() /
              ("memsq_" + std::to_string(::getpid()) + "_" + info->test_suite_name() + "_" + info->name());
        fs::remove_all(dir);
        fs::create_directories(dir);
    }
    void TearDown() override { fs::remove_all(dir); }

    fs::path dir;
};

std::string error_of(const std::string& text) {
    try {
        parse_config(text);
    } catch (const ConfigError& e) {
        return e.what();
    }
    return "";
}

TEST(Config, MinimalGetsDocumentedDefaults) {
    const Config c = parse_config("lambda = 5\npressure = 0\n[domain]\ntype = interval\nlength = 1\n"
                                  "[profile]\ntype = constant\nvalue = 1\n");
    EXPECT_EQ(c.spec.lambda, 5.0);
    EXPECT_EQ(c.spec.pressure, 0.0);
    EXPECT_EQ(std::get<Interval>(c.spec.domain).length, 1.0);
    EXPECT_EQ(std::get<ConstantProfile>(c.spec.profile).value, 1.0);
    EXPECT_TRUE(std::holds_alternative<ZeroInitial>(c.spec.initial));
    EXPECT_EQ(c.spec.resolution, 256u);
    EXPECT_EQ(c.spec.controls, SolverControls{});
    EXPECT_EQ(c.command, CommandOptions{});
}

TEST(Config, NegativePressureCarriesLineNumber) {
    const std::string e = error_of("lambda = 5\n# comment\npressure = -1\n");
    EXPECT_NE(e.find("line 3"), std::string::npos) << e;
    EXPECT_NE(e.find("pressure"), std::string::npos) << e;
}

TEST(Config, DuplicateKeyRejected) {
    const std::string e = error_of("lambda = 5\nlambda = 6\n");
    EXPECT_NE(e.find("line 2"), std::string::npos) << e;
    EXPECT_NE(e.find("duplicate"), std::string::npos) << e;
}

TEST(Config, OtherMalformedInputs) {
    EXPECT_NE(error_of("[domain]\nlenght = 1\n").find("line 2"), std::string::npos);
    EXPECT_NE(error_of("[nowhere]\n").find("line 1"), std::string::npos);
    EXPECT_NE(error_of("lambda = five\n").find("line 1"), std::string::npos);
    EXPECT_NE(error_of("lambda\n").find("line 1"), std::string::npos);
    EXPECT_NE(error_of("[domain]\nresolution = 8\n").find("line 2"), std::string::npos);
    EXPECT_FALSE(error_of("[domain]\ntype = torus\n").empty());
    EXPECT_FALSE(error_of("[solver]\nquench_gap = 0.5\n").empty());
    EXPECT_FALSE(error_of("[domain]\n[domain]\n").empty());
}

TEST(Config, FormatParseRoundTrip) {
    Config c;
    c.spec.lambda = 0.1 + 0.2;
    c.spec.pressure = 1.0 / 3.0;
    c.spec.domain = RadialBall{0.75, 3};
    c.spec.resolution = 300;
    c.spec.profile = BumpProfile{1.0, 0.25, 0.1, 0.3};
    c.spec.initial = BumpInitial{0.2, 0.0, 0.4};
    c.spec.controls.t_max = 12.5;
    c.spec.controls.quench_gap = 3e-5;
    c.spec.controls.diffusion_dt_factor = std::numeric_limits<double>::infinity();
    c.command.lambdas = {15, 30, 60.5};
    c.command.pressures = {0, 1};
    c.command.store = "sweeps/store.jsonl";
    c.command.with_pstar = true;
    EXPECT_EQ(parse_config(format_config(c)), c);

    Config d;
    d.spec.profile = AffineProfile{2.0, 0.5};
    d.spec.initial = ScaledSteadyInitial{0.25};
    d.command.output = "out";
    EXPECT_EQ(parse_config(format_config(d)), d);
}

RunManifest sample_manifest() {
    RunManifest m;
    m.command = "simulate";
    m.spec.lambda = 5.0;
    m.spec.pressure = 0.1;
    m.spec.controls.t_max = 3.0;
    m.spec.controls.diffusion_dt_factor = std::numeric_limits<double>::infinity();
    m.verdict = "quenched";
    m.headline = {{"t_hat", 0.07513312345678901}, {"rate_exponent", 1.0 / 3.0}};
    m.files = {"run.csv", "manifest.json"};
    m.notes = {"first note"};
    m.wall_seconds = 0.125;
    return m;
}

TEST(Manifest, RoundTripIdentity) {
    const RunManifest m = sample_manifest();
    EXPECT_EQ(parse_manifest(serialize_manifest(m)), m);
    EXPECT_EQ(serialize_manifest(parse_manifest(serialize_manifest(m))), serialize_manifest(m));
}

TEST(Manifest, MalformedJsonIsAConfigError) {
    EXPECT_THROW(parse_manifest("{not json"), ConfigError);
}

TEST(Csv, NumbersReparseBitExactly) {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-1e3, 1e3);
    CsvWriter w({"a", "b"});
    std::vector<std::pair<double, double>> rows;
    for (int i = 0; i < 500; ++i) {
        rows.emplace_back(u(rng), std::exp(u(rng) / 20.0));
        w.row({rows.back().first, rows.back().second});
    }
    const CsvTable t = parse_csv(w.str());
    ASSERT_EQ(t.rows.size(), rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        EXPECT_EQ(t.rows[i][0], rows[i].first);
        EXPECT_EQ(t.rows[i][1], rows[i].second);
    }
    EXPECT_EQ(w.str().find('\r'), std::string::npos);
}

TEST(Csv, MalformedRowsRejected) {
    EXPECT_THROW(parse_csv("a,b\n1\n"), IoError);
    EXPECT_THROW(parse_csv("a,b\n1,x\n"), IoError);
    EXPECT_THROW(parse_csv(""), IoError);
}

ProblemSpec small_spec(double lambda) {
    ProblemSpec s;
    s.lambda = lambda;
    s.resolution = 64;
    return s;
}

TEST_F(TempDir, QuenchedRunWritesAllArtifacts) {
    const ProblemSpec spec = small_spec(5.0);
    const auto run = integrate(spec);
    const auto rep = analyze_quench(run.trajectory, spec);
    SimilarityOutput sim;
    sim.frame = rescale_similarity(run.trajectory, rep.time.t_hat, rep.set.center_x);
    sim.energy = energy_of_frame(sim.frame, spec.lambda, 1.0);
    RunManifest m;
    m.command = "simulate";
    m.spec = spec;
    m.verdict = verdict_name(run.verdict);
    const RunManifest written = write_run_outputs(dir, run.trajectory, sim, m);

    EXPECT_TRUE(fs::exists(dir / "run.csv"));
    EXPECT_TRUE(fs::exists(dir / "similarity.csv"));
    EXPECT_TRUE(fs::exists(dir / "snapshots" / "0000.csv"));
    const RunManifest back = read_manifest((dir / "manifest.json").string());
    EXPECT_EQ(back, written);
    EXPECT_EQ(back.verdict, "quenched");
    for (const auto& f : back.files) EXPECT_TRUE(fs::exists(dir / f)) << f;

    const CsvTable t = parse_csv(read_file(dir / "run.csv"));
    EXPECT_EQ(t.header, (std::vector<std::string>{"t", "U", "gap", "argmax", "dt", "ut_inf"}));
    ASSERT_EQ(t.rows.size(), run.trajectory.samples.size());
    for (std::size_t k = 0; k < t.rows.size(); ++k) {
        EXPECT_EQ(t.rows[k][0], run.trajectory.samples[k].t);
        EXPECT_EQ(t.rows[k][1], run.trajectory.samples[k].max_u);
    }
    const CsvTable sims = parse_csv(read_file(dir / "similarity.csv"));
    EXPECT_EQ(sims.header, (std::vector<std::string>{"s", "w0", "E", "tolE"}));
    const CsvTable snap = parse_csv(read_file(dir / "snapshots" / "0000.csv"));
    EXPECT_EQ(snap.header, (std::vector<std::string>{"x", "u"}));
    EXPECT_EQ(snap.rows.size(), 65u);
}

TEST_F(TempDir, GlobalRunHasNoSimilarityFile) {
    const ProblemSpec spec = small_spec(0.5);
    const auto run = integrate(spec);
    RunManifest m;
    m.spec = spec;
    m.verdict = verdict_name(run.verdict);
    write_file(dir / "similarity.csv", "stale\n");
    write_run_outputs(dir, run.trajectory, std::nullopt, m);
    EXPECT_FALSE(fs::exists(dir / "similarity.csv"));
    EXPECT_EQ(read_manifest((dir / "manifest.json").string()).verdict, "global");
}

TEST_F(TempDir, UnwritableDirectoryIsAnIoError) {
    write_file(dir / "plain", "x");
    EXPECT_THROW(write_run_outputs(dir / "plain" / "sub", integrate(small_spec(0.5)).trajectory, std::nullopt, {}),
                 IoError);
}

SweepRecord record(double lambda, double pressure, std::optional<double> t_hat) {
    SweepRecord r;
    r.key = SweepKey{lambda, pressure, "interval:L=1", "constant:1", 256};
    r.verdict = t_hat ? "quenched" : "global";
    r.t_hat = t_hat;
    r.digest = "00000000deadbeef";
    return r;
}

TEST_F(TempDir, StoreAppendsAndIsIdempotent) {
    const fs::path store = dir / "store.jsonl";
    const std::vector<SweepRecord> three = {record(10, 0, 0.03), record(5, 0, 0.075), record(0.5, 0, std::nullopt)};
    const auto first = merge_sweep(store, three);
    EXPECT_EQ(first.appended, 3u);
    const std::string text = read_file(store);
    EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 3);
    // Sorted key order on disk.
    const auto loaded = load_store(store);
    ASSERT_EQ(loaded.records.size(), 3u);
    EXPECT_EQ(loaded.records[0].key.lambda, 0.5);
    EXPECT_EQ(loaded.records[2].key.lambda, 10.0);
    EXPECT_FALSE(loaded.records[0].t_hat.has_value());

    const auto again = merge_sweep(store, three);
    EXPECT_EQ(again.appended, 0u);
    EXPECT_EQ(again.skipped, 3u);
    EXPECT_EQ(read_file(store), text);
}

TEST_F(TempDir, CorruptTailTruncatedThenAppended) {
    const fs::path store = dir / "store.jsonl";
    merge_sweep(store, {record(5, 0, 0.075)});
    const std::string good = read_file(store);
    write_file(store, good + "{\"key\": {\"lambda\"");
    const auto r = merge_sweep(store, {record(10, 0, 0.03)});
    ASSERT_TRUE(r.warning.has_value());
    EXPECT_EQ(r.appended, 1u);
    const auto loaded = load_store(store);
    EXPECT_FALSE(loaded.corrupt_tail);
    EXPECT_EQ(loaded.records.size(), 2u);
}

TEST_F(TempDir, StoreValidAfterTruncationAtAnyLineBoundary) {
    const fs::path store = dir / "store.jsonl";
    merge_sweep(store, {record(1, 0, 1.0), record(2, 0, 0.5), record(3, 1, 0.2), record(4, 2, 0.1)});
    const std::string text = read_file(store);
    std::size_t lines = 0;
    for (std::size_t pos = 0; pos <= text.size(); pos = text.find('\n', pos) + 1) {
        const auto parsed = parse_store(std::string_view(text).substr(0, pos));
        EXPECT_FALSE(parsed.corrupt_tail);
        EXPECT_EQ(parsed.records.size(), lines++);
        if (pos == text.size()) break;
    }
}

TEST(Store, CorruptionBeforeTheLastLineIsAnError) {
    EXPECT_THROW(parse_store("garbage\n" + record_line(record(1, 0, 1.0))), IoError);
}

TEST_F(TempDir, ShuffledMergeOrdersGiveTheSortedUnion) {
    std::vector<SweepRecord> all;
    for (double l : {1.0, 2.0, 4.0, 8.0})
        for (double p : {0.0, 1.0, 2.0}) all.push_back(record(l, p, 1.0 / (l + p)));
    std::vector<SweepRecord> sorted = all;
    std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.key < b.key; });
    std::string expected;
    for (const auto& r : sorted) expected += record_line(r);

    std::mt19937 rng(11);
    for (int trial = 0; trial < 10; ++trial) {
        const fs::path store = dir / ("s" + std::to_string(trial) + ".jsonl");
        auto shuffled = all;
        std::shuffle(shuffled.begin(), shuffled.end(), rng);
        // Producers hand in overlapping batches in arbitrary order.
        std::set<SweepKey> seen;
        for (std::size_t i = 0; i < shuffled.size(); i += 3) {
            const std::size_t end = std::min(shuffled.size(), i + 5);
            merge_sweep(store, std::vector<SweepRecord>(shuffled.begin() + i, shuffled.begin() + end));
        }
        std::vector<SweepRecord> on_disk = load_store(store).records;
        std::sort(on_disk.begin(), on_disk.end(), [](const auto& a, const auto& b) { return a.key < b.key; });
        std::string got;
        for (const auto& r : on_disk) got += record_line(r);
        EXPECT_EQ(got, expected);
        EXPECT_EQ(sweep_csv(on_disk), sweep_csv(sorted));
    }
}

// ---------------------------------------------------------------------------
// CLI
// ---------------------------------------------------------------------------

int run_cli(const std::string& args) {
    const std::string cmd = std::string(MEMSQ_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

TEST_F(TempDir, CliExitCodes) {
    write_file(dir / "quench.ini", "lambda = 5\n[domain]\nresolution = 64\n");
    write_file(dir / "short.ini", "lambda = 5\n[domain]\nresolution = 64\n[solver]\nt_max = 0.001\n");
    write_file(dir / "bad.ini", "lambda = 5\npressure = -1\n");
    write_file(dir / "plain", "x");

    EXPECT_EQ(run_cli("simulate " + (dir / "quench.ini").string() + " -o " + (dir / "out").string()), 0);
    EXPECT_EQ(run_cli("report " + (dir / "out").string()), 0);
    EXPECT_EQ(run_cli("simulate " + (dir / "short.ini").string() + " -o " + (dir / "short").string()), 2);
    EXPECT_EQ(read_manifest((dir / "short" / "manifest.json").string()).verdict, "undecided");
    EXPECT_EQ(run_cli("simulate " + (dir / "bad.ini").string()), 3);
    EXPECT_EQ(run_cli("simulate"), 3);
    EXPECT_EQ(run_cli("frobnicate x"), 3);
    EXPECT_EQ(run_cli("simulate " + (dir / "missing.ini").string()), 4);
    EXPECT_EQ(run_cli("simulate " + (dir / "quench.ini").string() + " -o " + (dir / "plain" / "x").string()), 4);
    EXPECT_EQ(run_cli("report " + (dir / "nowhere").string()), 4);
    EXPECT_EQ(run_cli("--help"), 0);
}

TEST_F(TempDir, CliRunsAreBitIdentical) {
    write_file(dir / "c.ini", "lambda = 5\n[domain]\nresolution = 64\n");
    ASSERT_EQ(run_cli("simulate " + (dir / "c.ini").string() + " -o " + (dir / "a").string()), 0);
    ASSERT_EQ(run_cli("simulate " + (dir / "c.ini").string() + " -o " + (dir / "b").string()), 0);
    EXPECT_EQ(read_file(dir / "a" / "run.csv"), read_file(dir / "b" / "run.csv"));
    EXPECT_EQ(read_file(dir / "a" / "similarity.csv"), read_file(dir / "b" / "similarity.csv"));
}

TEST_F(TempDir, CliSweepResumes) {
    const std::string cfg = "[domain]\nresolution = 64\n[command]\nlambdas = 5, 10\npressures = 0\nstore = " +
                            (dir / "store.jsonl").string() + "\n";
    write_file(dir / "s.ini", cfg);
    ASSERT_EQ(run_cli("sweep " + (dir / "s.ini").string() + " -o " + (dir / "sw").string()), 0);
    const std::string first = read_file(dir / "store.jsonl");
    EXPECT_EQ(std::count(first.begin(), first.end(), '\n'), 2);
    ASSERT_EQ(run_cli("sweep " + (dir / "s.ini").string() + " -o " + (dir / "sw").string()), 0);
    EXPECT_EQ(read_file(dir / "store.jsonl"), first);
    const std::string csv = read_file(dir / "sw" / "sweep.csv");
    EXPECT_EQ(csv.rfind("lambda,P,N,verdict,T_hat\n", 0), 0u);
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 3);
}

}  // namespace
