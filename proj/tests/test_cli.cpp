#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "kinemo/io.hpp"
#include "kinemo/synthdata.hpp"

using namespace kinemo;
namespace fs = std::filesystem;

namespace {

const std::string kBin = KINEMO_BIN;
const fs::path kWork = "/tmp/kinemo_cli_test";

int run(const std::string& args, std::string* output = nullptr) {
  const std::string out_file = (kWork / "cmd_output.txt").string();
  const std::string cmd = kBin + " " + args + " >" + out_file + " 2>&1";
  const int status = std::system(cmd.c_str());
  if (output) {
    std::ifstream in(out_file);
    std::stringstream ss;
    ss << in.rdbuf();
    *output = ss.str();
  }
  return WEXITSTATUS(status);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct Fixture {
  Fixture() {
    fs::remove_all(kWork);
    fs::create_directories(kWork);
  }
};

int parse_kept(const std::string& text) {
  const auto pos = text.find("kept ");
  REQUIRE(pos != std::string::npos);
  return std::atoi(text.c_str() + pos + 5);
}

}  // namespace

TEST_CASE("cli end to end") {
  Fixture fx;
  const std::string data = (kWork / "data").string();

  SUBCASE("usage errors exit with 2, help with 0") {
    CHECK(run("synth") == 2);  // --out missing
    CHECK(run("--help") == 0);
    CHECK(run("predict --data x") == 2);
    CHECK(run("nonsense") == 2);
  }

  SUBCASE("pipeline, determinism, filtering, export") {
    CHECK(run("synth --out " + data + " --count 6 --seed 3") == 0);

    // determinism: regenerating yields byte-identical files
    const std::string data2 = (kWork / "data2").string();
    CHECK(run("synth --out " + data2 + " --count 6 --seed 3") == 0);
    for (const auto& f : fs::directory_iterator(fs::path(data) / "shapes")) {
      const auto other = fs::path(data2) / "shapes" / f.path().filename();
      REQUIRE(fs::exists(other));
      CHECK(slurp(f.path()) == slurp(other));
    }
    CHECK(slurp(fs::path(data) / "manifest.json") ==
          slurp(fs::path(data2) / "manifest.json"));

    const std::string gnn = (kWork / "gnn.json").string();
    const std::string feas = (kWork / "feas.json").string();
    CHECK(run("train-gnn --data " + data + " --out " + gnn +
              " --epochs 2 --points 96 --seed 3") == 0);
    CHECK(fs::exists(kWork / "gnn.csv"));
    {
      std::ifstream csv(kWork / "gnn.csv");
      std::string line;
      int rows = 0;
      while (std::getline(csv, line)) ++rows;
      CHECK(rows == 3);  // header + 2 epochs
    }
    CHECK(run("train-feas --data " + data + " --out " + feas +
              " --epochs 1 --pair-points 64 --seed 3") == 0);

    const std::string out = (kWork / "out").string();
    std::string text;
    CHECK(run("predict --data " + data + " --gnn " + gnn + " --feas " + feas +
              " --out " + out + " --refine obb --split test --seed 3",
              &text) == 0);
    CHECK(text.find("kept") != std::string::npos);

    // tau monotonicity at the extremes
    std::string all_text, none_text;
    CHECK(run("predict --data " + data + " --gnn " + gnn + " --feas " + feas +
              " --out " + (kWork / "out_all").string() +
              " --refine obb --split test --seed 3 --tau 0",
              &all_text) == 0);
    CHECK(run("predict --data " + data + " --gnn " + gnn + " --feas " + feas +
              " --out " + (kWork / "out_none").string() +
              " --refine obb --split test --seed 3 --tau 1.1",
              &none_text) == 0);
    const int kept_default = parse_kept(text);
    const int kept_all = parse_kept(all_text);
    const int kept_none = parse_kept(none_text);
    CHECK(kept_none == 0);
    CHECK(kept_all >= kept_default);
    CHECK(kept_default >= kept_none);

    // eval runs and writes both report forms
    const std::string report = (kWork / "report").string();
    std::string eval_text;
    CHECK(run("eval --data " + data + " --pred " + out + "/preds --out " +
              report + " --split test",
              &eval_text) == 0);
    CHECK(fs::exists(report + ".txt"));
    CHECK(fs::exists(report + ".json"));
    CHECK(eval_text.find("mean") != std::string::npos);

    // eval on predictions equal to GT: zero errors, accuracy 1
    const std::string gt_as_pred = (kWork / "gt_pred").string();
    fs::create_directories(gt_as_pred);
    const Manifest manifest = load_manifest(data + "/manifest.json");
    for (const auto& id : manifest.test) {
      fs::copy_file(fs::path(data) / "annotations" / (id + ".json"),
                    fs::path(gt_as_pred) / (id + ".json"));
    }
    std::string self_text;
    CHECK(run("eval --data " + data + " --pred " + gt_as_pred + " --out " +
              (kWork / "self_report").string() + " --split test",
              &self_text) == 0);
    {
      std::ifstream in((kWork / "self_report.json").string());
      nlohmann::json j = nlohmann::json::parse(in);
      CHECK(j["overall"]["type_accuracy"].get<double>() == doctest::Approx(1.0));
      CHECK(j["overall"]["mean_angle"].get<double>() == doctest::Approx(0.0));
      if (!j["overall"]["mean_dist"].is_null()) {
        CHECK(j["overall"]["mean_dist"].get<double>() == doctest::Approx(0.0));
      }
      CHECK(j["categories"].size() == 5);  // category rows + overall mean row
    }

    // missing predictions: exit 1
    const std::string sparse = (kWork / "sparse").string();
    fs::create_directories(sparse);
    fs::copy_file(fs::path(gt_as_pred) / (manifest.test.front() + ".json"),
                  fs::path(sparse) / (manifest.test.front() + ".json"));
    CHECK(run("eval --data " + data + " --pred " + sparse + " --out " +
              (kWork / "sparse_report").string() + " --split test") == 1);

    // export: an OBJ with a polyline for the axis
    const std::string some_id = manifest.test.front();
    const std::string obj = (kWork / "export.obj").string();
    CHECK(run("export --shape " + data + "/shapes/" + some_id +
              ".json --annot " + data + "/annotations/" + some_id +
              ".json --out " + obj + " --with-obb") == 0);
    const std::string obj_text = slurp(obj);
    CHECK(obj_text.find("\nl ") != std::string::npos);   // axis polyline
    CHECK(obj_text.find("mtllib") != std::string::npos);
    CHECK(fs::exists(kWork / "export.shape.json"));
    const Shape with_obb = load_shape((kWork / "export.shape.json").string());
    bool any_obb = false;
    for (const auto& n : with_obb.nodes) any_obb = any_obb || n.obb.has_value();
    CHECK(any_obb);

    // id mismatch: exit 1
    std::string mismatch_id;
    for (const auto& id : manifest.test) {
      if (id != some_id) {
        mismatch_id = id;
        break;
      }
    }
    if (!mismatch_id.empty()) {
      CHECK(run("export --shape " + data + "/shapes/" + some_id +
                ".json --annot " + data + "/annotations/" + mismatch_id +
                ".json --out " + obj) == 1);
    }
  }
}
