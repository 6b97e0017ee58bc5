#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "aliascope/binary_io.hpp"
#include "aliascope/cli/commands.hpp"
#include "aliascope/cli/report.hpp"
#include "aliascope/nn/checkpoint.hpp"
#include "aliascope/oscillations.hpp"

using namespace aliascope;
namespace fs = std::filesystem;

namespace {

fs::path workdir() {
  static const fs::path dir = [] {
    const fs::path d = fs::temp_directory_path() / "aliascope_cli_unit";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

std::string at(const std::string& name) { return (workdir() / name).string(); }

int run(std::vector<std::string> args) {
  args.insert(args.begin(), "aliascope");
  return cli::run_cli(args);
}

std::string text(const std::string& path) {
  const auto b = read_file(path);
  return {b.begin(), b.end()};
}

// Shared fixtures: small datasets and a trained toy checkpoint.
void prepare() {
  static bool done = false;
  if (done) return;
  REQUIRE(run({"gen", "--n-freqs", "3", "--size", "8", "--count", "90", "--seed", "1", "--out", at("train.oscd")}) ==
          0);
  REQUIRE(run({"gen", "--n-freqs", "3", "--size", "8", "--count", "18", "--seed", "2", "--out", at("test.oscd")}) ==
          0);
  REQUIRE(run({"train", "--arch", "resnet-c", "--width", "2", "--depth", "1", "--data", at("train.oscd"), "--out",
               at("m.alck"), "--epochs", "2", "--lr-drop-epoch", "2", "--batch-size", "16", "--quiet"}) == 0);
  done = true;
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("gen writes a balanced dataset and rejects a bad count") {
  CHECK(run({"gen", "--n-freqs", "2", "--size", "8", "--count", "8", "--out", at("g.oscd")}) == 0);
  const Dataset d = load_dataset(at("g.oscd"));
  CHECK(d.size() == 8);
  CHECK(d.n_classes() == 4);
  CHECK(fs::exists(at("g.oscd.manifest.json")));
  CHECK(run({"gen", "--n-freqs", "2", "--count", "7", "--out", at("bad.oscd")}) == 2);
  CHECK(!fs::exists(at("bad.oscd")));
}

TEST_CASE("usage errors exit with 2") {
  CHECK(run({}) == 2);
  CHECK(run({"frobnicate"}) == 2);
  CHECK(run({"gen", "--count"}) == 2);
  CHECK(run({"gen", "--count", "4", "--noise", "abc", "--out", at("x")}) == 2);
  CHECK(run({"train", "--arch", "vgg", "--data", at("nope"), "--out", at("x")}) == 2);
  CHECK(run({"--help"}) == 0);
  CHECK(run({"--version"}) == 0);
}

TEST_CASE("runtime failures exit with 1") {
  std::ofstream(at("garbage.oscd")) << "not a dataset at all";
  CHECK(run({"train", "--data", at("garbage.oscd"), "--out", at("x.alck")}) == 1);
}

TEST_CASE("train records architecture and history") {
  prepare();
  const nn::Checkpoint ck = nn::load_checkpoint(at("m.alck"));
  CHECK(ck.model.downsample_points().size() == 4);
  CHECK(ck.history.size() == 2);
  CHECK(fs::exists(at("m.alck.history.csv")));

  CHECK(run({"train", "--arch", "fc-1h", "--hidden", "16", "--data", at("train.oscd"), "--out", at("fc.alck"),
             "--epochs", "1", "--lr-drop-epoch", "1", "--quiet"}) == 0);
  const nn::Checkpoint fc = nn::load_checkpoint(at("fc.alck"));
  CHECK(fc.model.downsample_points().empty());
  CHECK(fc.model.spec().base_width == 16);

  CHECK(run({"train", "--data", at("train.oscd"), "--out", at("y.alck"), "--n-classes", "400", "--quiet"}) == 2);
  CHECK(run({"train", "--data", at("train.oscd"), "--out", at("y.alck"), "--epochs", "3", "--quiet"}) == 2);

  const cli::TrainOptions defaults;
  CHECK(defaults.epochs == 50);
  CHECK(defaults.lr == 1e-3);
  CHECK(defaults.lr_drop_epoch == 35);
  CHECK(defaults.batch_size == 128);
}

TEST_CASE("analyze writes a versioned report") {
  prepare();
  REQUIRE(run({"analyze", "--model", at("m.alck"), "--data", at("test.oscd"), "--out", at("report")}) == 0);
  const auto j = nlohmann::json::parse(text(at("report/report.json")));
  CHECK(j.at("version") == cli::kReportSchemaVersion);
  CHECK(j.at("points").size() == 4);
  for (const auto& p : j.at("points")) {
    double sum = 0.0;
    for (const auto& [k, v] : p.at("fractions").items()) sum += v.get<double>();
    CHECK(sum == doctest::Approx(1.0));
  }
  CHECK(j.at("samples").size() == 18);
  CHECK(fs::exists(at("report/points.csv")));
  CHECK(fs::exists(at("report/samples.csv")));
  CHECK(fs::exists(at("report/manifest.json")));

  const AnalysisReport back = cli::report_from_json(j);
  CHECK(back.samples.size() == 18);
  CHECK(cli::report_to_json(back).at("points") == j.at("points"));
  auto wrong = j;
  wrong["version"] = 2;
  CHECK_THROWS_AS(cli::report_from_json(wrong), FormatError);
  wrong.erase("version");
  CHECK_THROWS_AS(cli::report_from_json(wrong), FormatError);

  REQUIRE(run({"train", "--arch", "fc-2h", "--hidden", "8", "--data", at("train.oscd"), "--out", at("fc2.alck"),
               "--epochs", "1", "--lr-drop-epoch", "1", "--quiet"}) == 0);
  REQUIRE(run({"analyze", "--model", at("fc2.alck"), "--data", at("test.oscd"), "--out", at("fcreport")}) == 0);
  const auto fj = nlohmann::json::parse(text(at("fcreport/report.json")));
  CHECK(fj.at("points").empty());
  CHECK(fj.at("accuracy").contains("top1"));

  CHECK(run({"analyze", "--model", at("m.alck"), "--data", at("test.oscd"), "--divisor", "0", "--out",
             at("r0")}) == 2);
  CHECK(run({"analyze", "--model", at("m.alck"), "--data", at("test.oscd"), "--limit", "0", "--out", at("r0")}) ==
        2);
}

TEST_CASE("attack sweep") {
  prepare();
  REQUIRE(run({"attack", "--model", at("m.alck"), "--data", at("test.oscd"), "--eps", "0,0.01,0.02,0.05", "--steps",
               "5", "--out", at("sweep.csv")}) == 0);
  std::istringstream lines(text(at("sweep.csv")));
  std::string header, line;
  std::getline(lines, header);
  CHECK(header.find("1_median") != std::string::npos);
  CHECK(header.find("*2_p99") != std::string::npos);
  std::vector<std::string> rows;
  while (std::getline(lines, line)) rows.push_back(line);
  CHECK(rows.size() == 4);

  REQUIRE(run({"analyze", "--model", at("m.alck"), "--data", at("test.oscd"), "--out", at("report_sw")}) == 0);
  const auto j = nlohmann::json::parse(text(at("report_sw/report.json")));
  const std::string top1 = cli::format_number(j.at("accuracy").at("top1").get<double>());
  CHECK(rows[0].rfind("0," + top1 + ",", 0) == 0);

  CHECK(run({"attack", "--model", at("m.alck"), "--data", at("test.oscd"), "--eps", "0.1", "--out",
             at("s2.csv")}) == 2);
  CHECK(run({"attack", "--model", at("m.alck"), "--data", at("test.oscd"), "--eps", "0,-1", "--out",
             at("s2.csv")}) == 2);
}

TEST_CASE("sweep-arch reports analytic parameter counts") {
  prepare();
  REQUIRE(run({"sweep-arch", "--train", at("train.oscd"), "--test", at("test.oscd"), "--families",
               "fc-1h,fc-2h,resnet-c,resnet-w,resnet-d", "--widths", "2", "--depths", "1", "--width", "2",
               "--depth", "1", "--hiddens", "4", "--epochs", "1", "--lr-drop-epoch", "1", "--quiet", "--out",
               at("arch.csv")}) == 0);
  std::istringstream lines(text(at("arch.csv")));
  std::string line;
  std::getline(lines, line);
  CHECK(line == "family,width,depth,param_count,test_accuracy");
  int rows = 0;
  while (std::getline(lines, line)) {
    ++rows;
    std::istringstream cells(line);
    std::string family, width, depth, params;
    std::getline(cells, family, ',');
    std::getline(cells, width, ',');
    std::getline(cells, depth, ',');
    std::getline(cells, params, ',');
    nn::ModelSpec s;
    s.family = nn::parse_family(family);
    s.base_width = std::stoul(width);
    s.depth = nn::is_resnet(s.family) ? std::stoul(depth) : 3;
    s.n_classes = 9;
    s.input_size = 8;
    CHECK(std::stoul(params) == nn::analytic_parameter_count(s));
  }
  CHECK(rows == 5);
}

TEST_CASE("every command is byte-reproducible") {
  prepare();
  auto twice = [](std::vector<std::string> args, const std::string& out_a, const std::string& out_b,
                  const std::vector<std::string>& files) {
    auto a = args, b = args;
    a.push_back(at(out_a));
    b.push_back(at(out_b));
    REQUIRE(run(a) == 0);
    REQUIRE(run(b) == 0);
    for (const auto& f : files) {
      INFO(out_a << f);
      CHECK(read_file(at(out_a) + f) == read_file(at(out_b) + f));
    }
  };
  twice({"gen", "--n-freqs", "3", "--size", "8", "--count", "27", "--seed", "9", "--out"}, "r1.oscd", "r2.oscd", {""});
  twice({"train", "--width", "2", "--depth", "1", "--data", at("train.oscd"), "--epochs", "1", "--lr-drop-epoch",
         "1", "--quiet", "--out"},
        "r1.alck", "r2.alck", {"", ".history.csv"});
  twice({"analyze", "--model", at("m.alck"), "--data", at("test.oscd"), "--out"}, "ra1", "ra2",
        {"/report.json", "/points.csv", "/samples.csv"});
  twice({"attack", "--model", at("m.alck"), "--data", at("test.oscd"), "--eps", "0,0.05", "--steps", "3",
         "--random-start", "--out"},
        "rs1.csv", "rs2.csv", {""});
  twice({"sweep-arch", "--train", at("train.oscd"), "--test", at("test.oscd"), "--families", "fc-1h", "--hiddens",
         "4", "--epochs", "1", "--lr-drop-epoch", "1", "--quiet", "--out"},
        "rw1.csv", "rw2.csv", {""});
}

}
