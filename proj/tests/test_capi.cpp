#include <cstring>
#include <filesystem>
#include <string>

#include "bifamp/bifamp.h"
#include "doctest.h"
#include "json.hpp"

namespace {

const char* kGenConfig = R"({
  "problem": {"application": "dictionary", "alpha": 0.5, "pi": 2.0,
              "rho": 0.3, "delta": 0.01},
  "n": 40,
  "seed": 7
})";

}  // namespace

TEST_CASE("c api end to end") {
  CHECK(std::string(bifamp_version()) == "0.1.0");

  bifamp_instance* inst = nullptr;
  REQUIRE(bifamp_generate(kGenConfig, &inst) == BIFAMP_OK);

  char* info = nullptr;
  REQUIRE(bifamp_instance_info(inst, &info) == BIFAMP_OK);
  auto parsed = nlohmann::json::parse(info);
  CHECK(parsed.at("n") == 40);
  CHECK(parsed.at("problem").at("application") == "dictionary");
  bifamp_string_free(info);

  // file round trip
  auto path = std::filesystem::temp_directory_path() / "bifamp_capi_inst.bin";
  REQUIRE(bifamp_instance_save(inst, path.string().c_str()) == BIFAMP_OK);
  bifamp_instance* loaded = nullptr;
  REQUIRE(bifamp_instance_load(path.string().c_str(), &loaded) == BIFAMP_OK);
  std::filesystem::remove(path);

  // amp run on the loaded instance
  bifamp_result* amp = nullptr;
  REQUIRE(bifamp_amp(loaded, R"({"amp": {"max_iterations": 200}, "seed": 7})",
                     &amp) == BIFAMP_OK);
  auto summary = nlohmann::json::parse(bifamp_result_json(amp));
  CHECK(summary.at("command") == "amp");
  CHECK(summary.contains("mse"));
  const char* trace = bifamp_result_table(amp, "trace");
  REQUIRE(trace != nullptr);
  CHECK(std::string(trace).rfind("iteration,", 0) == 0);
  CHECK(bifamp_result_table(amp, "nonsense") == nullptr);
  bifamp_result_free(amp);
  bifamp_instance_free(loaded);
  bifamp_instance_free(inst);
}

TEST_CASE("c api se and thresholds") {
  const char* se_config = R"({
    "problem": {"application": "dictionary", "alpha": 0.5, "pi": 2.0,
                "rho": 0.2, "delta": 0.0},
    "se": {"init": "informative"}
  })";
  bifamp_result* se = nullptr;
  REQUIRE(bifamp_se(se_config, &se) == BIFAMP_OK);
  auto summary = nlohmann::json::parse(bifamp_result_json(se));
  CHECK(summary.at("fixed_point").at("e_x").get<double>() < 1e-8);
  REQUIRE(bifamp_result_table(se, "trajectory") != nullptr);
  bifamp_result_free(se);

  const char* thr_config = R"({
    "problem": {"application": "completion", "alpha": 4.0, "pi": 4.0,
                "rho": 1.0, "epsilon": 0.6, "delta": 0.0}
  })";
  bifamp_result* thr = nullptr;
  REQUIRE(bifamp_thresholds(thr_config, &thr) == BIFAMP_OK);
  auto tj = nlohmann::json::parse(bifamp_result_json(thr));
  CHECK(tj.at("counting_bound").at("value").get<double>() ==
        doctest::Approx(0.5));
  bifamp_result_free(thr);
}

TEST_CASE("c api phase sweep reruns byte-identically") {
  const char* config = R"({
    "problem": {"application": "completion", "alpha": 4.0, "pi": 4.0,
                "rho": 1.0, "delta": 0.01},
    "phase": {"axes": [{"param": "epsilon", "from": 0.4, "to": 0.6, "count": 3}]},
    "threads": 2
  })";
  bifamp_result* a = nullptr;
  REQUIRE(bifamp_phase(config, &a) == BIFAMP_OK);
  bifamp_result* b = nullptr;
  REQUIRE(bifamp_phase(config, &b) == BIFAMP_OK);
  REQUIRE(bifamp_result_table(a, "grid") != nullptr);
  CHECK(std::string(bifamp_result_table(a, "grid")) ==
        std::string(bifamp_result_table(b, "grid")));
  // the emitted JSON re-parses
  CHECK_NOTHROW(nlohmann::json::parse(bifamp_result_json(a)));
  bifamp_result_free(a);
  bifamp_result_free(b);
}

TEST_CASE("c api error paths") {
  bifamp_instance* inst = nullptr;
  CHECK(bifamp_generate(nullptr, &inst) == BIFAMP_ERR_INVALID);
  CHECK(bifamp_generate("{not json", &inst) == BIFAMP_ERR_CONFIG);
  CHECK(bifamp_generate(R"({"problem": {"application": "dictionary"},
                            "n": 10, "seed": 1, "bogus": 2})",
                        &inst) == BIFAMP_ERR_CONFIG);
  CHECK(bifamp_generate(R"({"problem": {"application": "dictionary",
                            "rho": 2.0}, "n": 10, "seed": 1})",
                        &inst) == BIFAMP_ERR_CONFIG);
  CHECK(std::strlen(bifamp_last_error()) > 0);
  CHECK(bifamp_instance_load("/nonexistent/path.bin", &inst) == BIFAMP_ERR_IO);

  bifamp_result* res = nullptr;
  CHECK(bifamp_se(R"({"problem": {"application": "dictionary"},
                      "se": {"init": "sideways"}})",
                  &res) == BIFAMP_ERR_CONFIG);
}
