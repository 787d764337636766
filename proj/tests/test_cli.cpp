#include <gtest/gtest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

struct Result {
  int code = -1;
  std::string err;
};

std::string slurp(const fs::path &p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const fs::path &p, const std::string &text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

std::size_t count_lines(const std::string &s) {
  std::size_t n = 0;
  for (char c : s) n += c == '\n';
  return n;
}

class CliTest : public ::testing::Test {
protected:
  void SetUp() override {
    const auto *info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() /
           ("archlab_cli_" + std::to_string(::getpid()) + "_" + info->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  Result run(const std::string &args, const std::string &env = "") const {
    const fs::path err = dir_ / "stderr.txt";
    const std::string cmd = env + (env.empty() ? "" : " ") + std::string(ARCHLAB_CLI) + " " + args + " >/dev/null 2>" +
                            err.string();
    const int status = std::system(cmd.c_str());
    Result r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.err = slurp(err);
    return r;
  }

  fs::path path(const std::string &name) const { return dir_ / name; }

  /// Small dataset written with gen-data into `name`.
  fs::path make_data(const std::string &name, const std::string &extra = "") const {
    const fs::path spec = path(name + "_spec.json");
    spit(spec, R"({"n": 300, "k": 3, "embed_seed": 5, "sample_seed": 6)" + extra + "}");
    const Result r = run("gen-data --spec " + spec.string() + " --out " + path(name).string());
    EXPECT_EQ(r.code, 0) << r.err;
    return path(name) / "X.csv";
  }

  fs::path dir_;
};

} // namespace

TEST_F(CliTest, GenDataWritesContractFilesDeterministically) {
  const fs::path spec = path("spec.json");
  spit(spec, R"({"n": 200, "embed_seed": 3, "sample_seed": 4})");
  ASSERT_EQ(run("gen-data --spec " + spec.string() + " --out " + path("a").string()).code, 0);
  ASSERT_EQ(run("gen-data --spec " + spec.string() + " --out " + path("b").string()).code, 0);
  for (const char *f : {"X.csv", "atrue.csv", "ztrue.csv", "manifest.json"}) ASSERT_TRUE(fs::exists(path("a") / f)) << f;
  for (const char *f : {"X.csv", "atrue.csv", "ztrue.csv"}) EXPECT_EQ(slurp(path("a") / f), slurp(path("b") / f)) << f;
  EXPECT_EQ(count_lines(slurp(path("a") / "X.csv")), 201u);
  const std::string manifest = slurp(path("a") / "manifest.json");
  for (const char *key : {"\"command\"", "\"config\"", "\"seeds\"", "\"inputs\"", "\"outputs\"", "\"git_describe\"",
                          "\"duration_seconds\""})
    EXPECT_NE(manifest.find(key), std::string::npos) << key;
  for (const auto &e : fs::directory_iterator(path("a"))) EXPECT_NE(e.path().extension(), ".tmp");
}

TEST_F(CliTest, GenDataInvalidWarpDimIsConfigError) {
  const fs::path spec = path("spec.json");
  spit(spec, R"({"n": 10, "warp": {"kind": "exp", "dim": 8}})");
  const Result r = run("gen-data --spec " + spec.string() + " --out " + path("o").string());
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("warp.dim"), std::string::npos) << r.err;
  EXPECT_FALSE(fs::exists(path("o") / "X.csv"));
}

TEST_F(CliTest, UnknownConfigFieldIsRejected) {
  const fs::path spec = path("spec.json");
  spit(spec, R"({"n": 10, "warp": {"knd": "exp"}})");
  const Result r = run("gen-data --spec " + spec.string() + " --out " + path("o").string());
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("warp.knd"), std::string::npos) << r.err;
}

TEST_F(CliTest, MalformedJsonIsConfigError) {
  const fs::path spec = path("spec.json");
  spit(spec, "{\"n\": ");
  EXPECT_EQ(run("gen-data --spec " + spec.string() + " --out " + path("o").string()).code, 2);
}

TEST_F(CliTest, MissingInputIsIoError) {
  EXPECT_EQ(run("fit-linear --data " + path("none.csv").string() + " --k 3 --out " + path("o").string()).code, 3);
}

TEST_F(CliTest, UsageErrorsExitTwo) {
  EXPECT_EQ(run("").code, 2);
  EXPECT_EQ(run("frobnicate").code, 2);
  EXPECT_EQ(run("fit-linear --k 3").code, 2);
}

TEST_F(CliTest, FitLinearOutputsAndDeterminism) {
  const fs::path data = make_data("d");
  ASSERT_EQ(run("fit-linear --data " + data.string() + " --k 3 --out " + path("f1").string()).code, 0);
  ASSERT_EQ(run("fit-linear --data " + data.string() + " --k 3 --out " + path("f2").string()).code, 0);
  for (const char *f : {"model.json", "rss_log.csv", "scatter.csv", "recovery.json"})
    EXPECT_EQ(slurp(path("f1") / f), slurp(path("f2") / f)) << f;
  EXPECT_EQ(slurp(path("f1") / "rss_log.csv").rfind("iter,rss\n", 0), 0u);
  const std::string scatter = slurp(path("f1") / "scatter.csv");
  EXPECT_EQ(scatter.rfind("pc1,pc2,group\n", 0), 0u);
  EXPECT_NE(scatter.find(",archetype\n"), std::string::npos);
  EXPECT_NE(scatter.find(",truth\n"), std::string::npos);
  EXPECT_EQ(count_lines(scatter), 1u + 300u + 3u + 3u);
}

TEST_F(CliTest, FlagsOverrideConfigFile) {
  const fs::path data = make_data("d");
  const fs::path cfg = path("cfg.json");
  spit(cfg, R"({"k": 2, "max_iters": 7})");
  ASSERT_EQ(run("fit-linear --data " + data.string() + " --config " + cfg.string() + " --k 4 --out " + path("f").string()).code, 0);
  const std::string manifest = slurp(path("f") / "manifest.json");
  EXPECT_NE(manifest.find("\"k\": 4"), std::string::npos) << manifest;
  EXPECT_NE(manifest.find("\"max_iters\": 7"), std::string::npos) << manifest;
}

TEST_F(CliTest, FitLinearBadInitIsConfigError) {
  const fs::path data = make_data("d");
  EXPECT_EQ(run("fit-linear --data " + data.string() + " --k 3 --init nope --out " + path("f").string()).code, 2);
}

TEST_F(CliTest, FailedFitWritesNothing) {
  const fs::path data = make_data("d");
  EXPECT_NE(run("fit-linear --data " + data.string() + " --k 0 --out " + path("f").string()).code, 0);
  EXPECT_FALSE(fs::exists(path("f") / "model.json"));
  EXPECT_FALSE(fs::exists(path("f") / "manifest.json"));
}

TEST_F(CliTest, FitDeepOutputsAndDeterminism) {
  const fs::path data = make_data("d");
  const fs::path arch = path("arch.json");
  const fs::path hyper = path("hyper.json");
  spit(arch, R"({"encoder": [16], "decoder": [16]})");
  spit(hyper, R"({"epochs": 2, "batch": 50})");
  const std::string args = "fit-deep --data " + data.string() + " --k 3 --arch " + arch.string() + " --hyper " +
                           hyper.string() + " --seed 9 --out ";
  ASSERT_EQ(run(args + path("g1").string()).code, 0);
  ASSERT_EQ(run(args + path("g2").string()).code, 0);
  for (const char *f : {"model.json", "history.csv", "latent.csv", "recovery.json"})
    EXPECT_EQ(slurp(path("g1") / f), slurp(path("g2") / f)) << f;
  const std::string latent = slurp(path("g1") / "latent.csv");
  EXPECT_EQ(latent.rfind("mu0,mu1,group\n", 0), 0u);
  EXPECT_EQ(count_lines(latent), 1u + 300u + 3u);
  EXPECT_EQ(count_lines(slurp(path("g1") / "history.csv")), 1u + 2u * 6u);
}

TEST_F(CliTest, FitDeepSideInfoNeedsLabels) {
  const fs::path data = make_data("d");
  EXPECT_EQ(run("fit-deep --data " + data.string() + " --k 3 --side-info --out " + path("g").string()).code, 2);
  const fs::path with_labels = path("ls");
  const fs::path spec = path("ls_spec.json");
  spit(spec, R"({"n": 200, "k": 3})");
  ASSERT_EQ(run("gen-data --spec " + spec.string() + " --side-component 0 --out " + with_labels.string()).code, 0);
  EXPECT_EQ(run("fit-deep --data " + (with_labels / "X.csv").string() +
                " --k 3 --side-info --epochs 1 --out " + path("g").string())
                .code,
            0);
  EXPECT_TRUE(fs::exists(path("g") / "model.json"));
}

TEST_F(CliTest, UnknownArchFieldIsRejected) {
  const fs::path data = make_data("d");
  const fs::path arch = path("arch.json");
  spit(arch, R"({"layers": [16]})");
  const Result r = run("fit-deep --data " + data.string() + " --k 3 --arch " + arch.string() + " --out " + path("g").string());
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("arch.layers"), std::string::npos) << r.err;
}

TEST_F(CliTest, SweepIsDeterministicAcrossThreadCounts) {
  const fs::path data = make_data("d");
  ASSERT_EQ(run("sweep --data " + data.string() + " --ks 1..4 --fit linear --out " + path("s1").string(),
                "ARCHLAB_THREADS=1")
                .code,
            0);
  ASSERT_EQ(run("sweep --data " + data.string() + " --ks 1,2,3,4 --fit linear --out " + path("s2").string(),
                "ARCHLAB_THREADS=3")
                .code,
            0);
  EXPECT_EQ(slurp(path("s1") / "curve.csv"), slurp(path("s2") / "curve.csv"));
  EXPECT_EQ(slurp(path("s1") / "sweep.json"), slurp(path("s2") / "sweep.json"));
  EXPECT_EQ(slurp(path("s1") / "curve.csv").rfind("k,loss\n1,", 0), 0u);
  EXPECT_EQ(count_lines(slurp(path("s1") / "curve.csv")), 5u);
}

TEST_F(CliTest, SweepRejectsBadArguments) {
  const fs::path data = make_data("d");
  EXPECT_EQ(run("sweep --data " + data.string() + " --ks 3..6 --fit cubic --out " + path("s").string()).code, 2);
  EXPECT_EQ(run("sweep --data " + data.string() + " --ks 4,3 --out " + path("s").string()).code, 2);
  EXPECT_EQ(run("sweep --data " + data.string() + " --ks x --out " + path("s").string()).code, 2);
  EXPECT_EQ(run("sweep --data " + data.string() + " --ks 2 --out " + path("s").string(), "ARCHLAB_THREADS=0").code, 2);
}

TEST_F(CliTest, InterpolateEmitsRequestedRows) {
  const fs::path data = make_data("d");
  ASSERT_EQ(run("fit-deep --data " + data.string() + " --k 3 --epochs 1 --out " + path("g").string()).code, 0);
  const std::string args = "interpolate --model " + (path("g") / "model.json").string() +
                           " --from 1,0,0 --to 0,0.5,0.5 --steps 6 --out ";
  ASSERT_EQ(run(args + path("i1").string()).code, 0);
  ASSERT_EQ(run(args + path("i2").string()).code, 0);
  const std::string csv = slurp(path("i1") / "interpolation.csv");
  EXPECT_EQ(csv, slurp(path("i2") / "interpolation.csv"));
  EXPECT_EQ(count_lines(csv), 7u);
  EXPECT_EQ(csv.rfind("t,x0,", 0), 0u);
  EXPECT_EQ(run("interpolate --model " + (path("g") / "model.json").string() +
                " --from 1,0 --to 0,1,0 --out " + path("i3").string())
                .code,
            2);
  EXPECT_EQ(run("interpolate --model " + (path("g") / "model.json").string() +
                " --from 0.7,0.7,-0.4 --to 0,1,0 --out " + path("i3").string())
                .code,
            2);
}

TEST_F(CliTest, InterpolateLinearModel) {
  const fs::path data = make_data("d");
  ASSERT_EQ(run("fit-linear --data " + data.string() + " --k 3 --out " + path("f").string()).code, 0);
  ASSERT_EQ(run("interpolate --model " + (path("f") / "model.json").string() +
                " --from 1,0,0 --to 0,1,0 --steps 4 --out " + path("i").string())
                .code,
            0);
  EXPECT_EQ(count_lines(slurp(path("i") / "interpolation.csv")), 5u);
}

TEST_F(CliTest, SampleIsSeededAndDeterministic) {
  const fs::path data = make_data("d");
  ASSERT_EQ(run("fit-deep --data " + data.string() + " --k 3 --epochs 1 --out " + path("g").string()).code, 0);
  const std::string model = (path("g") / "model.json").string();
  const std::string args = "sample --model " + model + " --weights 0.2,0.3,0.5 --count 4 --noise --seed 11 --out ";
  ASSERT_EQ(run(args + path("s1").string()).code, 0);
  ASSERT_EQ(run(args + path("s2").string()).code, 0);
  const std::string a = slurp(path("s1") / "samples.csv");
  EXPECT_EQ(a, slurp(path("s2") / "samples.csv"));
  EXPECT_EQ(count_lines(a), 5u);
  ASSERT_EQ(run("sample --model " + model + " --weights 0.2,0.3,0.5 --count 4 --noise --seed 12 --out " +
                path("s3").string())
                .code,
            0);
  EXPECT_NE(a, slurp(path("s3") / "samples.csv"));

  const fs::path weights = path("w.csv");
  spit(weights, "w0,w1,w2\n1,0,0\n0,1,0\n");
  ASSERT_EQ(run("sample --model " + model + " --weights " + weights.string() + " --out " + path("s4").string()).code, 0);
  EXPECT_EQ(count_lines(slurp(path("s4") / "samples.csv")), 3u);
}

TEST_F(CliTest, PlotProducesParseableSvg) {
  const fs::path data = make_data("d");
  ASSERT_EQ(run("fit-linear --data " + data.string() + " --k 3 --out " + path("f").string()).code, 0);
  const fs::path xy = path("xy.csv");
  spit(xy, "a,b\n0,1\n1,3\n2,2\n");
  struct Case {
    fs::path in;
    const char *kind;
  } cases[] = {{xy, "auto"},
               {path("f") / "scatter.csv", "auto"},
               {path("f") / "rss_log.csv", "auto"},
               {path("f") / "rss_log.csv", "xy"}};
  int i = 0;
  for (const auto &c : cases) {
    const fs::path svg = path("p" + std::to_string(i++) + ".svg");
    ASSERT_EQ(run("plot --in " + c.in.string() + " --kind " + c.kind + " --out " + svg.string()).code, 0) << c.in;
    const std::string check = "python3 -c \"import sys, xml.etree.ElementTree as ET; r = ET.parse(sys.argv[1]).getroot(); "
                              "sys.exit(0 if r.tag.endswith('svg') and len(r.findall('.//{http://www.w3.org/2000/svg}circle')) > 0 else 1)\" " +
                              svg.string();
    EXPECT_EQ(std::system(check.c_str()), 0) << svg;
  }
  EXPECT_EQ(slurp(path("p0.svg")), [&] {
    EXPECT_EQ(run("plot --in " + xy.string() + " --out " + path("again.svg").string()).code, 0);
    return slurp(path("again.svg"));
  }());
}

TEST_F(CliTest, PlotUnknownKindExitsTwo) {
  const fs::path xy = path("xy.csv");
  spit(xy, "a,b\n0,1\n");
  EXPECT_EQ(run("plot --in " + xy.string() + " --kind pie --out " + path("p.svg").string()).code, 2);
  const fs::path one = path("one.csv");
  spit(one, "a\n1\n");
  EXPECT_EQ(run("plot --in " + one.string() + " --out " + path("p.svg").string()).code, 2);
  const fs::path words = path("words.csv");
  spit(words, "a,b\nx,y\n");
  EXPECT_EQ(run("plot --in " + words.string() + " --out " + path("p.svg").string()).code, 2);
  EXPECT_FALSE(fs::exists(path("p.svg")));
}
